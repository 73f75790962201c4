//! Linear quantization and the integer-only reservoir datapath.
//!
//! A quantized model works on three integer grids:
//!
//! * weights: `W_in` and `W_r` are quantized symmetrically per tensor at
//!   `q` bits (`x_int = round(scale·(x − b))`, `b = 0`);
//! * states: the activation output is a `q`-bit fraction with scale
//!   `2^(q−1)`, so code `c` stands for `c / 2^(q−1)` in [−1, 1);
//! * accumulator: `acc = bias + W_in_int·u_int + W_r_int·s_int` with scale
//!   `A = scale(W_r)·2^(q−1)`. Inputs are quantized at `A / scale(W_in)` so
//!   both products land on the same grid, and the input-bias column of
//!   `W_in` is rounded directly at scale `A`.
//!
//! The activation is replaced by a [`ThresholdTable`]: the accumulator is
//! compared against `2^q − 1` integer thresholds and the number of passed
//! thresholds selects the next state code. The float scales never appear
//! in the forward pass.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, EvalSet, Split};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::Performance;
use crate::reservoir::{self, Activation, Hyperparams, ReservoirModel};

/// Largest supported weight/state bit-width.
pub const MAX_BITS: u32 = 8;
/// Widest input port the quantizer will produce.
pub const MAX_INPUT_BITS: u32 = 24;

/// Parameters of `x_int = clamp(round(scale·(x − bias)))` on a signed
/// `bits`-wide two's-complement grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    pub scale: f64,
    pub bias: f64,
    pub bits: u32,
    /// The calibrating tensor was all zeros; `scale` was set to 1.
    #[serde(default)]
    pub zero_tensor: bool,
}

impl QuantParams {
    pub fn min_code(&self) -> i64 {
        -(1i64 << (self.bits - 1))
    }

    pub fn max_code(&self) -> i64 {
        (1i64 << (self.bits - 1)) - 1
    }

    /// Grid of the activation output: `2^(q−1)` codes per unit.
    pub fn activation(q: u32) -> Result<Self> {
        check_bits(q)?;
        Ok(Self { scale: (1u64 << (q - 1)) as f64, bias: 0.0, bits: q, zero_tensor: false })
    }
}

fn check_bits(q: u32) -> Result<()> {
    if !(1..=MAX_BITS).contains(&q) {
        return Err(Error::OutOfRange { name: "q", value: q as f64, min: 1.0, max: MAX_BITS as f64 });
    }
    Ok(())
}

/// Largest code a symmetric `q`-bit scheme maps the extreme value to.
///
/// `2^(q−1) − 1`, except at `q = 1` where that would be zero; there the
/// extreme maps to magnitude 1 (and positive values clamp to code 0).
pub fn symmetric_extreme(q: u32) -> f64 {
    ((1u64 << (q - 1)) - 1).max(1) as f64
}

/// Symmetric per-tensor parameters: `b = 0`, `scale = (2^(q−1) − 1)/max|x|`.
pub fn compute_quant_params(tensor: &[f64], q: u32) -> Result<QuantParams> {
    check_bits(q)?;
    if tensor.is_empty() {
        return Err(Error::EmptyInput("tensor"));
    }
    if tensor.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("tensor contains non-finite values"));
    }
    let max = tensor.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return Ok(QuantParams { scale: 1.0, bias: 0.0, bits: q, zero_tensor: true });
    }
    Ok(QuantParams { scale: symmetric_extreme(q) / max, bias: 0.0, bits: q, zero_tensor: false })
}

/// Round half away from zero, then clamp to the signed grid.
#[inline]
pub fn quantize(x: f64, p: &QuantParams) -> i64 {
    let r = libm::round(p.scale * (x - p.bias));
    let (lo, hi) = (p.min_code(), p.max_code());
    if r <= lo as f64 {
        lo
    } else if r >= hi as f64 {
        hi
    } else {
        r as i64
    }
}

pub fn quantize_all(xs: &[f64], p: &QuantParams) -> Vec<i64> {
    xs.iter().map(|&x| quantize(x, p)).collect()
}

#[inline]
pub fn dequantize(code: i64, p: &QuantParams) -> f64 {
    code as f64 / p.scale + p.bias
}

/// Monotone step function from accumulator values to state codes.
///
/// `codes[k]` is selected when exactly `k` thresholds are `≤ acc`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub thresholds: Vec<i64>,
    pub codes: Vec<i64>,
}

impl ThresholdTable {
    #[inline]
    pub fn apply(&self, acc: i64) -> i64 {
        self.codes[self.thresholds.partition_point(|&t| t <= acc)]
    }
}

/// Float reference composition `quantize(f(dequantize(acc)))` that a
/// threshold table must reproduce.
pub fn activation_reference(act: Activation, q: u32, acc_scale: f64, acc: i64) -> i64 {
    let state = QuantParams { scale: (1u64 << (q - 1)) as f64, bias: 0.0, bits: q, zero_tensor: false };
    let acc_params = QuantParams { scale: acc_scale, bias: 0.0, bits: 64, zero_tensor: false };
    quantize(act.apply(dequantize(acc, &acc_params)), &state)
}

/// Search bound for thresholds; accumulators are far narrower than this.
const THRESHOLD_SEARCH: i64 = 1 << 52;

/// Streamlines `quantize ∘ f ∘ dequantize` into integer thresholds.
///
/// Each threshold is the smallest accumulator value whose reference code
/// reaches the next output code, found by bisection on the reference
/// itself, so the table agrees with the float composition on every
/// accumulator value by construction.
pub fn build_thresholds(act: Activation, q_act: u32, acc_scale: f64) -> Result<ThresholdTable> {
    check_bits(q_act)?;
    if !(acc_scale > 0.0 && acc_scale.is_finite()) {
        return Err(Error::OutOfRange { name: "accumulator_scale", value: acc_scale, min: 0.0, max: f64::INFINITY });
    }
    let half = 1i64 << (q_act - 1);
    let codes: Vec<i64> = (-half..half).collect();
    let reference = |acc: i64| activation_reference(act, q_act, acc_scale, acc);
    let mut thresholds = Vec::with_capacity(codes.len() - 1);
    for &code in &codes[1..] {
        let (mut lo, mut hi) = (-THRESHOLD_SEARCH, THRESHOLD_SEARCH);
        if reference(hi) < code {
            return Err(Error::Internal(format!("code {code} unreachable for accumulator scale {acc_scale}")));
        }
        // invariant: reference(hi) >= code, and everything below lo is < code
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if reference(mid) >= code {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        thresholds.push(lo);
    }
    // Equal neighbours are legal: on a coarse accumulator grid a code can
    // be skipped entirely. A decrease would mean a non-monotone reference.
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Internal(format!("non-monotone thresholds for q = {q_act}, accumulator scale {acc_scale}")));
    }
    Ok(ThresholdTable { thresholds, codes })
}

/// Position of a reservoir connection, ordered row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WeightIndex {
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntEntry {
    pub row: usize,
    pub col: usize,
    pub value: i64,
}

impl IntEntry {
    pub fn index(&self) -> WeightIndex {
        WeightIndex { row: self.row, col: self.col }
    }
}

/// Bits of a signed two's-complement word holding `[-m, m]`.
pub fn signed_bits(max_abs: u64) -> u32 {
    let mut bits = 1;
    while ((1u128 << (bits - 1)) - 1) < max_abs as u128 {
        bits += 1;
    }
    bits
}

/// Bits of a signed word holding every value in `[lo, hi]`.
pub fn range_bits(lo: i64, hi: i64) -> u32 {
    let mut bits = 1u32;
    while bits < 64 && !(lo >= -(1i64 << (bits - 1)) && hi <= (1i64 << (bits - 1)) - 1) {
        bits += 1;
    }
    bits
}

fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Integer-weight reservoir with a streamlined activation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedModel {
    pub q: u32,
    pub activation: Activation,
    pub n: usize,
    pub d_in: usize,
    pub d_out: usize,
    /// `N × d_in`, row-major.
    pub w_in: Vec<i64>,
    pub w_in_params: QuantParams,
    /// Input-bias column of `W_in` at accumulator scale.
    pub bias: Vec<i64>,
    /// Surviving reservoir connections, row-major.
    pub w_r: Vec<IntEntry>,
    pub w_r_params: QuantParams,
    pub input_params: QuantParams,
    pub state_params: QuantParams,
    pub acc_scale: f64,
    pub acc_bits: u32,
    pub thresholds: ThresholdTable,
    /// Float readout used for performance measurement, `d_out × N`.
    pub w_out: Matrix,
    /// `q`-bit readout used by the hardware datapath, `d_out × N`.
    pub w_out_int: Vec<i64>,
    pub w_out_params: QuantParams,
    /// Connections removed by pruning, ascending.
    pub pruned: Vec<WeightIndex>,
    /// Connection count before pruning.
    pub ncrl: usize,
    /// Hyperparameters of the float model this was quantized from.
    pub source: Hyperparams,
    /// `Perf^base(q)` once measured.
    pub base_perf: Option<Performance>,
}

/// Integer trace of a quantized forward pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntTrace {
    pub steps: usize,
    pub n: usize,
    pub d_out: usize,
    /// `steps × n` state codes.
    pub states: Vec<i64>,
    /// `steps × d_out` integer readout accumulators.
    pub outputs: Vec<i64>,
}

impl IntTrace {
    pub fn state(&self, t: usize) -> &[i64] {
        &self.states[t * self.n..(t + 1) * self.n]
    }

    pub fn output(&self, t: usize) -> &[i64] {
        &self.outputs[t * self.d_out..(t + 1) * self.d_out]
    }
}

/// Quantizes a trained float reservoir at `q` bits.
///
/// The input grid is sized from the largest absolute input of the
/// training split; inputs beyond it saturate at the port. The readout is
/// then recalibrated on the quantized model's own training states (the
/// reservoir weights are not retrained).
pub fn quantize_model(m: &ReservoirModel, q: u32, ds: &Dataset) -> Result<QuantizedModel> {
    let max_input = ds
        .train_input_rows()
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    let mut qm = quantize_with_input_range(m, q, max_input)?;
    qm.refit_readout(&ds.view(Split::Train)?, m.hp.ridge)?;
    Ok(qm)
}

/// Quantization without readout recalibration; `W_out` is copied from the
/// float model.
pub fn quantize_with_input_range(m: &ReservoirModel, q: u32, max_input: f64) -> Result<QuantizedModel> {
    check_bits(q)?;
    if m.hp.leaking_rate != 1.0 {
        return Err(Error::InvalidArgument("the integer datapath requires leaking rate 1"));
    }
    let w_out = m.w_out.clone().ok_or(Error::Untrained)?;
    let (n, d_in) = (m.n(), m.d_in());

    let mut w_in_data = Vec::with_capacity(n * d_in);
    let mut bias_f = Vec::with_capacity(n);
    for i in 0..n {
        let row = m.w_in.row(i);
        w_in_data.extend_from_slice(&row[..d_in]);
        bias_f.push(row[d_in]);
    }
    let w_in_params = compute_quant_params(&w_in_data, q)?;
    let r_values: Vec<f64> = m.w_r.entries().iter().map(|e| e.value).collect();
    let w_r_params = compute_quant_params(&r_values, q)?;
    let state_params = QuantParams::activation(q)?;
    let acc_scale = w_r_params.scale * state_params.scale;

    let input_scale = acc_scale / w_in_params.scale;
    let input_extreme = libm::ceil(max_input * input_scale).max(1.0);
    let input_bits = signed_bits(input_extreme as u64);
    if input_bits > MAX_INPUT_BITS {
        return Err(Error::InvalidArgument("input range needs more than 24 bits"));
    }
    let input_params = QuantParams { scale: input_scale, bias: 0.0, bits: input_bits, zero_tensor: false };

    let w_in = quantize_all(&w_in_data, &w_in_params);
    let bias = bias_f.iter().map(|&b| libm::round(b * acc_scale) as i64).collect();
    let w_r = m
        .w_r
        .entries()
        .iter()
        .map(|e| IntEntry { row: e.row, col: e.col, value: quantize(e.value, &w_r_params) })
        .collect();
    let w_out_params = compute_quant_params(w_out.as_slice(), q)?;
    let w_out_int = quantize_all(w_out.as_slice(), &w_out_params);
    let thresholds = build_thresholds(m.arch.activation, q, acc_scale)?;

    let mut qm = QuantizedModel {
        q,
        activation: m.arch.activation,
        n,
        d_in,
        d_out: w_out.rows(),
        w_in,
        w_in_params,
        bias,
        w_r,
        w_r_params,
        input_params,
        state_params,
        acc_scale,
        acc_bits: 0,
        thresholds,
        w_out,
        w_out_int,
        w_out_params,
        pruned: Vec::new(),
        ncrl: m.w_r.nnz(),
        source: m.hp,
        base_perf: None,
    };
    let design = 2 * q + ceil_log2(n) + 1;
    qm.acc_bits = design.max(signed_bits(qm.accumulator_bound()));
    Ok(qm)
}

impl QuantizedModel {
    /// Largest `|acc|` any neuron can reach for in-range inputs and states.
    pub fn accumulator_bound(&self) -> u64 {
        let u_max = self.input_params.min_code().unsigned_abs();
        let s_max = self.state_params.min_code().unsigned_abs();
        let mut bound: Vec<u64> = self.bias.iter().map(|b| b.unsigned_abs()).collect();
        for i in 0..self.n {
            for j in 0..self.d_in {
                bound[i] += self.w_in[i * self.d_in + j].unsigned_abs() * u_max;
            }
        }
        for e in &self.w_r {
            bound[e.row] += e.value.unsigned_abs() * s_max;
        }
        bound.into_iter().max().unwrap_or(0)
    }

    pub fn nnz(&self) -> usize {
        self.w_r.len()
    }

    pub fn entry_position(&self, idx: WeightIndex) -> Result<usize> {
        self.w_r
            .binary_search_by(|e| e.index().cmp(&idx))
            .map_err(|_| Error::NotANonzero { row: idx.row, col: idx.col })
    }

    /// Input-port codes for one input row.
    pub fn quantize_input(&self, u: &[f64]) -> Vec<i64> {
        quantize_all(u, &self.input_params)
    }

    /// Per-step `bias + W_in_int·u_int`, `steps × n`.
    ///
    /// These partial sums do not depend on `W_r` and are reused across
    /// sensitivity flips.
    pub fn input_sums(&self, inputs: &Matrix) -> Result<Vec<i64>> {
        if inputs.cols() != self.d_in {
            return Err(Error::Shape { expected: self.d_in, got: inputs.cols(), what: "input width" });
        }
        let mut out = Vec::with_capacity(inputs.rows() * self.n);
        for t in 0..inputs.rows() {
            let u = self.quantize_input(inputs.row(t));
            for i in 0..self.n {
                let row = &self.w_in[i * self.d_in..(i + 1) * self.d_in];
                let mut acc = self.bias[i];
                for (w, x) in row.iter().zip(&u) {
                    acc += w * x;
                }
                out.push(acc);
            }
        }
        Ok(out)
    }

    /// Integer forward pass from the zero state.
    pub fn forward(&self, inputs: &Matrix) -> Result<IntTrace> {
        if inputs.rows() == 0 {
            return Err(Error::EmptyInput("input series"));
        }
        let sums = self.input_sums(inputs)?;
        let states = self.recur(&sums, inputs.rows(), None)?;
        let outputs = self.readout_int(&states, inputs.rows());
        Ok(IntTrace { steps: inputs.rows(), n: self.n, d_out: self.d_out, states, outputs })
    }

    /// State recurrence over cached input sums. `override_entry` replaces the
    /// value of one `w_r` entry (by position) without touching the model.
    pub(crate) fn recur(&self, sums: &[i64], steps: usize, override_entry: Option<(usize, i64)>) -> Result<Vec<i64>> {
        let n = self.n;
        let limit = 1i64 << (self.acc_bits - 1);
        let mut states = vec![0i64; steps * n];
        let mut prev = vec![0i64; n];
        let mut acc = vec![0i64; n];
        for t in 0..steps {
            acc.copy_from_slice(&sums[t * n..(t + 1) * n]);
            for (k, e) in self.w_r.iter().enumerate() {
                let w = match override_entry {
                    Some((pos, v)) if pos == k => v,
                    _ => e.value,
                };
                acc[e.row] += w * prev[e.col];
            }
            let row = &mut states[t * n..(t + 1) * n];
            for (i, (s, &a)) in row.iter_mut().zip(&acc).enumerate() {
                if a < -limit || a >= limit {
                    return Err(Error::Internal(format!(
                        "accumulator overflow at step {t}, neuron {i}: {a} exceeds {} bits",
                        self.acc_bits
                    )));
                }
                *s = self.thresholds.apply(a);
            }
            prev.copy_from_slice(row);
        }
        Ok(states)
    }

    fn readout_int(&self, states: &[i64], steps: usize) -> Vec<i64> {
        let mut out = Vec::with_capacity(steps * self.d_out);
        for t in 0..steps {
            let s = &states[t * self.n..(t + 1) * self.n];
            for o in 0..self.d_out {
                let w = &self.w_out_int[o * self.n..(o + 1) * self.n];
                out.push(w.iter().zip(s).map(|(a, b)| a * b).sum());
            }
        }
        out
    }

    /// Dequantized states (`steps × n`) of a state-code buffer.
    pub fn dequantize_states(&self, states: &[i64], steps: usize) -> Matrix {
        let data = states.iter().map(|&c| dequantize(c, &self.state_params)).collect();
        Matrix::from_vec(steps, self.n, data).expect("state buffer matches its shape")
    }

    /// Float readout applied to dequantized states.
    pub(crate) fn float_outputs(&self, states: &[i64], steps: usize) -> Result<Matrix> {
        reservoir::readout(&self.w_out, &self.dequantize_states(states, steps))
    }

    pub fn predict(&self, inputs: &Matrix) -> Result<Matrix> {
        let trace = self.forward(inputs)?;
        self.float_outputs(&trace.states, trace.steps)
    }

    pub fn evaluate(&self, set: &EvalSet) -> Result<Performance> {
        reservoir::score(set, self.d_out, |m| self.predict(m))
    }

    /// Like [`evaluate`](Self::evaluate) with one `w_r` entry overridden.
    ///
    /// `sums` holds precomputed [`input_sums`](Self::input_sums) per driving
    /// series, in evaluation-set order.
    pub(crate) fn evaluate_cached(
        &self,
        set: &EvalSet,
        sums: &[Vec<i64>],
        override_entry: Option<(usize, i64)>,
    ) -> Result<Performance> {
        let mut next = 0usize;
        reservoir::score(set, self.d_out, |m| {
            let states = self.recur(&sums[next], m.rows(), override_entry)?;
            next += 1;
            self.float_outputs(&states, m.rows())
        })
    }

    pub(crate) fn cache_input_sums(&self, set: &EvalSet) -> Result<Vec<Vec<i64>>> {
        match set {
            EvalSet::Series(w) => Ok(vec![self.input_sums(&w.inputs)?]),
            EvalSet::Sequences { sequences, .. } => sequences.iter().map(|s| self.input_sums(s)).collect(),
        }
    }

    /// Refits the float readout by ridge regression on this model's own
    /// dequantized states over `set`, then requantizes the integer readout.
    pub fn refit_readout(&mut self, set: &EvalSet, ridge: f64) -> Result<()> {
        let (x, y) = reservoir::collect_design(set, |m| {
            let trace = self.forward(m)?;
            Ok(self.dequantize_states(&trace.states, trace.steps))
        })?;
        self.w_out = reservoir::train_readout(&x, &y, ridge)?;
        self.w_out_params = compute_quant_params(self.w_out.as_slice(), self.q)?;
        self.w_out_int = quantize_all(self.w_out.as_slice(), &self.w_out_params);
        self.base_perf = None;
        Ok(())
    }

    /// Measures and caches `Perf^base(q)` on `set`.
    pub fn measure_base_perf(&mut self, set: &EvalSet) -> Result<Performance> {
        let p = self.evaluate(set)?;
        self.base_perf = Some(p);
        Ok(p)
    }

    /// FNV-1a digest of every integer parameter and the mask.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        feed(self.q as u64);
        for &w in self.w_in.iter().chain(&self.bias).chain(&self.w_out_int) {
            feed(w as u64);
        }
        for e in &self.w_r {
            feed(e.row as u64);
            feed(e.col as u64);
            feed(e.value as u64);
        }
        for t in self.thresholds.thresholds.iter().chain(&self.thresholds.codes) {
            feed(*t as u64);
        }
        for p in &self.pruned {
            feed(p.row as u64);
            feed(p.col as u64);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_tensor_at_four_bits() {
        let p = compute_quant_params(&[0.3, -1.0, 0.5], 4).unwrap();
        assert_eq!((p.scale, p.bias, p.zero_tensor), (7.0, 0.0, false));
    }

    #[test]
    fn zero_tensor_is_flagged() {
        let p = compute_quant_params(&[0.0, 0.0], 4).unwrap();
        assert_eq!(p.scale, 1.0);
        assert!(p.zero_tensor);
    }

    #[test]
    fn eight_bit_scale() {
        let p = compute_quant_params(&[-2.0, 0.5], 8).unwrap();
        assert_eq!(p.scale, 63.5);
    }

    #[test]
    fn bit_width_range_is_checked() {
        assert!(compute_quant_params(&[1.0], 0).is_err());
        assert!(compute_quant_params(&[1.0], 9).is_err());
    }

    #[test]
    fn quantize_examples() {
        let unit = QuantParams { scale: 1.0, bias: 0.0, bits: 4, zero_tensor: false };
        for x in -8..=7 {
            assert_eq!(quantize(x as f64, &unit), x);
        }
        let p = QuantParams { scale: 7.0, bias: 0.0, bits: 4, zero_tensor: false };
        assert_eq!(quantize(-1.0, &p), -7);
        assert_eq!(quantize(0.5, &p), 4);
        assert_eq!(quantize(-0.5, &p), -4);
        assert_eq!(quantize(100.0, &p), 7);
        assert_eq!(quantize(-100.0, &p), -8);
    }

    #[test]
    fn dequantize_examples() {
        let p = QuantParams { scale: 7.0, bias: 0.25, bits: 4, zero_tensor: false };
        assert_eq!(dequantize(0, &p), 0.25);
        assert_eq!(dequantize(-8, &p), -8.0 / 7.0 + 0.25);
    }

    #[test]
    fn single_bit_table() {
        let t = build_thresholds(Activation::HardTanh, 1, 10.0).unwrap();
        assert_eq!(t.thresholds.len(), 1);
        assert_eq!(t.codes, vec![-1, 0]);
        assert_eq!(t.apply(-1_000_000), -1);
        assert_eq!(t.apply(1_000_000), 0);
    }

    #[test]
    fn table_saturates() {
        let t = build_thresholds(Activation::HardTanh, 4, 80.0).unwrap();
        assert_eq!(t.thresholds.len(), 15);
        assert_eq!(t.apply(i64::MIN / 4), -8);
        assert_eq!(t.apply(i64::MAX / 4), 7);
    }

    #[test]
    fn coarse_grid_skips_codes() {
        // fewer accumulator steps than state codes: some codes are unreachable
        let t = build_thresholds(Activation::HardTanh, 8, 50.0).unwrap();
        assert!(t.thresholds.windows(2).any(|w| w[0] == w[1]));
        for acc in -60..60 {
            assert_eq!(t.apply(acc), activation_reference(Activation::HardTanh, 8, 50.0, acc));
        }
    }

    #[test]
    fn bit_helpers() {
        assert_eq!(signed_bits(0), 1);
        assert_eq!(signed_bits(1), 2);
        assert_eq!(signed_bits(7), 4);
        assert_eq!(signed_bits(8), 5);
        assert_eq!(range_bits(-8, 7), 4);
        assert_eq!(range_bits(-9, 0), 5);
        assert_eq!(range_bits(0, 0), 1);
        assert_eq!(ceil_log2(50), 6);
    }
}
