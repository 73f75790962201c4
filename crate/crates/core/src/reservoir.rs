//! Float-precision echo state networks.
//!
//! State update (leaky form, `lr = 1` gives the plain recurrence):
//!
//! ```text
//! s(t) = (1 − lr)·s(t−1) + lr·f(W_in·[u(t); 1] + W_r·s(t−1))
//! y(t) = W_out·s(t)
//! ```
//!
//! The trailing constant `1` is the input bias column of `W_in`; without it
//! an odd activation driven from a zero state can only produce outputs that
//! are odd functions of the input history.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::EvalSet;
use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, Cholesky, Entry, Matrix, SparseMatrix};
use crate::metrics::{argmax, rmse, Performance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    HardTanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
            Activation::HardTanh => x.clamp(-1.0, 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub spectral_radius: f64,
    pub leaking_rate: f64,
    /// Number of stored reservoir connections.
    pub ncrl: usize,
    /// Ridge coefficient λ of the readout.
    pub ridge: f64,
    pub seed: u64,
}

impl Hyperparams {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.spectral_radius > 0.0 && self.spectral_radius.is_finite()) {
            return Err(Error::OutOfRange {
                name: "spectral_radius",
                value: self.spectral_radius,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        if !(self.leaking_rate > 0.0 && self.leaking_rate <= 1.0) {
            return Err(Error::OutOfRange { name: "leaking_rate", value: self.leaking_rate, min: 0.0, max: 1.0 });
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::OutOfRange { name: "ridge", value: self.ridge, min: 0.0, max: f64::INFINITY });
        }
        if self.ncrl == 0 {
            return Err(Error::OutOfRange { name: "ncrl", value: 0.0, min: 1.0, max: (n * n) as f64 });
        }
        if self.ncrl > n * n {
            return Err(Error::InvalidSparsity { ncrl: self.ncrl, n });
        }
        Ok(())
    }
}

/// Network shape and activation, fixed before hyperparameters are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub n: usize,
    pub d_in: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirModel {
    pub arch: Architecture,
    pub hp: Hyperparams,
    /// `N × (d_in + 1)`; the last column multiplies the constant bias input.
    pub w_in: Matrix,
    pub w_r: SparseMatrix,
    /// `d_out × N`, present once trained.
    pub w_out: Option<Matrix>,
    /// Set when `W_r` had no nonzero eigenvalue and was rescaled by its
    /// max row-sum norm instead.
    pub spectral_fallback: bool,
}

/// Reservoir states over time, one row per step.
#[derive(Clone, Debug, PartialEq)]
pub struct StateTrace {
    pub states: Matrix,
    /// Time index of the first row in the driving series.
    pub start: usize,
}

/// Builds a random reservoir.
///
/// `W_in` is i.i.d. uniform on [−1, 1]; `W_r` gets exactly `ncrl`
/// connections at distinct positions with uniform [−1, 1] values, rescaled
/// so its spectral radius equals `hp.spectral_radius`.
pub fn init_reservoir(hp: &Hyperparams, arch: &Architecture) -> Result<ReservoirModel> {
    let n = arch.n;
    if n == 0 {
        return Err(Error::OutOfRange { name: "n", value: 0.0, min: 1.0, max: f64::INFINITY });
    }
    if arch.d_in == 0 {
        return Err(Error::OutOfRange { name: "d_in", value: 0.0, min: 1.0, max: f64::INFINITY });
    }
    hp.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let cols = arch.d_in + 1;
    let w_in_data = (0..n * cols).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let w_in = Matrix::from_vec(n, cols, w_in_data)?;

    let mut positions = sample(&mut rng, n * n, hp.ncrl).into_vec();
    positions.sort_unstable();
    let entries = positions
        .into_iter()
        .map(|p| Entry { row: p / n, col: p % n, value: rng.gen_range(-1.0..=1.0) })
        .collect();
    let mut w_r = SparseMatrix::new(n, entries)?;

    let rho = spectral_radius(&w_r.to_dense())?;
    let mut spectral_fallback = false;
    let norm = if rho > 1e-12 {
        rho
    } else {
        spectral_fallback = true;
        w_r.max_row_sum()
    };
    if norm > 0.0 {
        w_r.scale(hp.spectral_radius / norm);
    }
    Ok(ReservoirModel { arch: *arch, hp: *hp, w_in, w_r, w_out: None, spectral_fallback })
}

impl ReservoirModel {
    pub fn n(&self) -> usize {
        self.arch.n
    }

    pub fn d_in(&self) -> usize {
        self.arch.d_in
    }

    /// One application of the state update.
    pub fn update_state(&self, u: &[f64], s_prev: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n()];
        self.update_into(u, s_prev, &mut out, 0)?;
        Ok(out)
    }

    fn update_into(&self, u: &[f64], s_prev: &[f64], out: &mut [f64], step: usize) -> Result<()> {
        if u.len() != self.d_in() {
            return Err(Error::Shape { expected: self.d_in(), got: u.len(), what: "input vector" });
        }
        if s_prev.len() != self.n() {
            return Err(Error::Shape { expected: self.n(), got: s_prev.len(), what: "state vector" });
        }
        let bias_col = self.d_in();
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.w_in.row(i);
            let mut acc = row[bias_col];
            for (w, x) in row[..bias_col].iter().zip(u) {
                acc += w * x;
            }
            *o = acc;
        }
        self.w_r.mul_vec_into(s_prev, out);
        let lr = self.hp.leaking_rate;
        let f = self.arch.activation;
        for (o, &sp) in out.iter_mut().zip(s_prev) {
            let a = f.apply(*o);
            *o = if lr == 1.0 { a } else { (1.0 - lr) * sp + lr * a };
            if !o.is_finite() {
                return Err(Error::NonFiniteState { step });
            }
        }
        Ok(())
    }

    /// Drives the reservoir from the zero state.
    pub fn run(&self, inputs: &Matrix) -> Result<StateTrace> {
        self.run_from(inputs, &vec![0.0; self.n()])
    }

    /// Drives the reservoir from `s0`; row `t` is the state after input `t`.
    pub fn run_from(&self, inputs: &Matrix, s0: &[f64]) -> Result<StateTrace> {
        if inputs.rows() == 0 {
            return Err(Error::EmptyInput("input series"));
        }
        let n = self.n();
        let mut states = Matrix::zeros(inputs.rows(), n);
        let mut prev = s0.to_vec();
        let mut cur = vec![0.0; n];
        for t in 0..inputs.rows() {
            self.update_into(inputs.row(t), &prev, &mut cur, t)?;
            states.row_mut(t).copy_from_slice(&cur);
            core::mem::swap(&mut prev, &mut cur);
        }
        Ok(StateTrace { states, start: 0 })
    }

    /// `y(t) = W_out·s(t)` for every step of the series.
    pub fn predict(&self, inputs: &Matrix) -> Result<Matrix> {
        let w_out = self.w_out.as_ref().ok_or(Error::Untrained)?;
        let trace = self.run(inputs)?;
        readout(w_out, &trace.states)
    }

    /// Fits `W_out` by ridge regression on the states of `set`.
    pub fn fit(&mut self, set: &EvalSet) -> Result<()> {
        let (x, y) = collect_design(set, |m| Ok(self.run(m)?.states))?;
        self.w_out = Some(train_readout(&x, &y, self.hp.ridge)?);
        Ok(())
    }

    pub fn evaluate(&self, set: &EvalSet) -> Result<Performance> {
        let w_out = self.w_out.as_ref().ok_or(Error::Untrained)?;
        score(set, w_out.rows(), |m| readout(w_out, &self.run(m)?.states))
    }
}

/// Applies a readout to every state row: returns `T × d_out`.
pub fn readout(w_out: &Matrix, states: &Matrix) -> Result<Matrix> {
    if w_out.cols() != states.cols() {
        return Err(Error::Shape { expected: w_out.cols(), got: states.cols(), what: "readout width" });
    }
    let mut out = Matrix::zeros(states.rows(), w_out.rows());
    for t in 0..states.rows() {
        let s = states.row(t);
        for (o, y) in out.row_mut(t).iter_mut().enumerate() {
            *y = crate::linalg::dot(w_out.row(o), s);
        }
    }
    Ok(out)
}

/// Stacks scored states and targets of an evaluation set.
///
/// Classification targets are one-hot rows repeated for every step of the
/// sequence.
pub(crate) fn collect_design(
    set: &EvalSet,
    mut states_of: impl FnMut(&Matrix) -> Result<Matrix>,
) -> Result<(Matrix, Matrix)> {
    if set.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    match set {
        EvalSet::Series(w) => {
            let states = states_of(&w.inputs)?;
            let keep = |m: &Matrix| {
                let rows: Vec<Vec<f64>> = (w.skip..m.rows()).map(|t| m.row(t).to_vec()).collect();
                Matrix::from_rows(&rows)
            };
            Ok((keep(&states)?, keep(&w.targets)?))
        }
        EvalSet::Sequences { sequences, labels, n_classes } => {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (seq, &label) in sequences.iter().zip(labels) {
                let states = states_of(seq)?;
                for t in 0..states.rows() {
                    xs.push(states.row(t).to_vec());
                    let mut onehot = vec![0.0; *n_classes];
                    onehot[label] = 1.0;
                    ys.push(onehot);
                }
            }
            Ok((Matrix::from_rows(&xs)?, Matrix::from_rows(&ys)?))
        }
    }
}

/// Scores per-step outputs produced by `outputs_of` against an evaluation set.
///
/// Regression: RMSE over the scored steps. Classification: per-step outputs
/// are averaged over each sequence and the argmax is the predicted class.
pub(crate) fn score(
    set: &EvalSet,
    d_out: usize,
    mut outputs_of: impl FnMut(&Matrix) -> Result<Matrix>,
) -> Result<Performance> {
    if set.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    match set {
        EvalSet::Series(w) => {
            let out = outputs_of(&w.inputs)?;
            if out.cols() != w.targets.cols() {
                return Err(Error::Shape { expected: w.targets.cols(), got: out.cols(), what: "output channels" });
            }
            let n = out.rows() - w.skip;
            let pred = Matrix::from_vec(n, out.cols(), out.as_slice()[w.skip * out.cols()..].to_vec())?;
            let tgt = Matrix::from_vec(n, out.cols(), w.targets.as_slice()[w.skip * out.cols()..].to_vec())?;
            Ok(Performance::rmse(rmse(&pred, &tgt)?))
        }
        EvalSet::Sequences { sequences, labels, n_classes } => {
            if d_out != *n_classes {
                return Err(Error::Shape { expected: *n_classes, got: d_out, what: "readout classes" });
            }
            let mut correct = 0usize;
            for (seq, &label) in sequences.iter().zip(labels) {
                let out = outputs_of(seq)?;
                let mut mean = vec![0.0; d_out];
                for t in 0..out.rows() {
                    for (m, y) in mean.iter_mut().zip(out.row(t)) {
                        *m += y;
                    }
                }
                if argmax(&mean) == label {
                    correct += 1;
                }
            }
            Ok(Performance::accuracy(correct as f64 / sequences.len() as f64))
        }
    }
}

/// Ridge regression readout: `W_out = Yᵀ·X·(XᵀX + λI)⁻¹` with `X` the
/// `T × N` state matrix and `Y` the `T × d_out` targets.
///
/// One step of iterative refinement is applied to each right-hand side.
pub fn train_readout(states: &Matrix, targets: &Matrix, ridge: f64) -> Result<Matrix> {
    if states.rows() == 0 {
        return Err(Error::EmptyInput("state trace"));
    }
    if states.rows() != targets.rows() {
        return Err(Error::Shape { expected: states.rows(), got: targets.rows(), what: "target rows" });
    }
    let n = states.cols();
    let mut gram = states.gram();
    for i in 0..n {
        gram[(i, i)] += ridge;
    }
    let chol = Cholesky::factor(&gram)?;
    let xty = states.transpose().matmul(targets)?;
    let mut w_out = Matrix::zeros(targets.cols(), n);
    for o in 0..targets.cols() {
        let rhs: Vec<f64> = (0..n).map(|i| xty[(i, o)]).collect();
        let mut w = chol.solve(&rhs);
        let r = gram.mul_vec(&w);
        let resid: Vec<f64> = rhs.iter().zip(&r).map(|(b, a)| b - a).collect();
        let dw = chol.solve(&resid);
        for (wi, d) in w.iter_mut().zip(dw) {
            *wi += d;
        }
        w_out.row_mut(o).copy_from_slice(&w);
    }
    Ok(w_out)
}

/// Relative residual `‖(XᵀX + λI)·wᵀ − XᵀY‖ / (‖XᵀX + λI‖·‖w‖ + ‖XᵀY‖)`
/// of the ridge normal equations.
pub fn normal_equation_residual(states: &Matrix, targets: &Matrix, ridge: f64, w_out: &Matrix) -> Result<f64> {
    let n = states.cols();
    let mut gram = states.gram();
    for i in 0..n {
        gram[(i, i)] += ridge;
    }
    let xty = states.transpose().matmul(targets)?;
    let lhs = gram.matmul(&w_out.transpose())?;
    let mut num = 0.0;
    for i in 0..n {
        for o in 0..targets.cols() {
            let d = lhs[(i, o)] - xty[(i, o)];
            num += d * d;
        }
    }
    let den = gram.frobenius() * w_out.frobenius() + xty.frobenius();
    Ok(if den == 0.0 { libm::sqrt(num) } else { libm::sqrt(num) / den })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_neuron(lr: f64, act: Activation) -> ReservoirModel {
        ReservoirModel {
            arch: Architecture { n: 2, d_in: 1, activation: act },
            hp: Hyperparams { spectral_radius: 0.5, leaking_rate: lr, ncrl: 2, ridge: 0.0, seed: 0 },
            w_in: Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap(),
            w_r: SparseMatrix::new(
                2,
                vec![Entry { row: 0, col: 1, value: 0.5 }, Entry { row: 1, col: 0, value: 0.5 }],
            )
            .unwrap(),
            w_out: None,
            spectral_fallback: false,
        }
    }

    #[test]
    fn hand_evaluated_update() {
        let m = two_neuron(1.0, Activation::Tanh);
        let s = m.update_state(&[1.0], &[0.2, -0.4]).unwrap();
        assert!((s[0] - libm::tanh(0.8)).abs() < 1e-15);
        assert!((s[1] - libm::tanh(0.1)).abs() < 1e-15);
    }

    #[test]
    fn zero_in_zero_out() {
        let m = two_neuron(1.0, Activation::Tanh);
        assert_eq!(m.update_state(&[0.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn hardtanh_identity_inside_saturation() {
        let m = ReservoirModel {
            arch: Architecture { n: 1, d_in: 1, activation: Activation::HardTanh },
            hp: Hyperparams { spectral_radius: 0.5, leaking_rate: 1.0, ncrl: 1, ridge: 0.0, seed: 0 },
            w_in: Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(),
            w_r: SparseMatrix::new(1, vec![Entry { row: 0, col: 0, value: 0.0 }]).unwrap(),
            w_out: None,
            spectral_fallback: false,
        };
        assert_eq!(m.update_state(&[0.5], &[0.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn non_finite_input_is_reported() {
        let m = two_neuron(1.0, Activation::Tanh);
        assert_eq!(m.update_state(&[f64::NAN], &[0.0, 0.0]), Err(Error::NonFiniteState { step: 0 }));
    }

    #[test]
    fn run_composes_updates() {
        let m = two_neuron(0.7, Activation::Tanh);
        let u = Matrix::from_rows(&[vec![1.0], vec![-0.5], vec![0.25]]).unwrap();
        let trace = m.run(&u).unwrap();
        let mut s = vec![0.0, 0.0];
        for t in 0..3 {
            s = m.update_state(u.row(t), &s).unwrap();
            assert_eq!(trace.states.row(t), &s[..]);
        }
    }

    #[test]
    fn empty_series_is_error() {
        let m = two_neuron(1.0, Activation::Tanh);
        assert_eq!(m.run(&Matrix::zeros(0, 1)).unwrap_err(), Error::EmptyInput("input series"));
    }

    #[test]
    fn one_by_one_reservoir() {
        let hp = Hyperparams { spectral_radius: 0.5, leaking_rate: 1.0, ncrl: 1, ridge: 0.0, seed: 3 };
        let m = init_reservoir(&hp, &Architecture { n: 1, d_in: 1, activation: Activation::Tanh }).unwrap();
        assert_eq!(m.w_r.nnz(), 1);
        assert!((m.w_r.entries()[0].value.abs() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sparsity_bound() {
        let hp = Hyperparams { spectral_radius: 0.5, leaking_rate: 1.0, ncrl: 10, ridge: 0.0, seed: 3 };
        let arch = Architecture { n: 3, d_in: 1, activation: Activation::Tanh };
        assert_eq!(init_reservoir(&hp, &arch).unwrap_err(), Error::InvalidSparsity { ncrl: 10, n: 3 });
    }

    #[test]
    fn untrained_predict_fails() {
        let m = two_neuron(1.0, Activation::Tanh);
        assert_eq!(m.predict(&Matrix::zeros(2, 1)).unwrap_err(), Error::Untrained);
    }

    #[test]
    fn zero_and_selector_readouts() {
        let mut m = two_neuron(1.0, Activation::Tanh);
        let u = Matrix::from_rows(&[vec![1.0], vec![-0.5], vec![0.25]]).unwrap();
        m.w_out = Some(Matrix::zeros(1, 2));
        assert!(m.predict(&u).unwrap().as_slice().iter().all(|&y| y == 0.0));
        m.w_out = Some(Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap());
        let y = m.predict(&u).unwrap();
        let s = m.run(&u).unwrap().states;
        for t in 0..3 {
            assert_eq!(y[(t, 0)], s[(t, 1)]);
        }
    }

    #[test]
    fn orthonormal_design_gives_projection() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![2.0], vec![-3.0], vec![5.0]]).unwrap();
        let w = train_readout(&x, &y, 0.0).unwrap();
        assert_eq!(w.as_slice(), &[2.0, -3.0]);
    }

    #[test]
    fn huge_ridge_shrinks_to_zero() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![2.0], vec![-3.0], vec![5.0]]).unwrap();
        let w = train_readout(&x, &y, 1e12).unwrap();
        assert!(w.max_abs() < 1e-10);
    }

    #[test]
    fn singular_without_ridge() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(train_readout(&x, &y, 0.0), Err(Error::IllConditioned { .. })));
    }
}
