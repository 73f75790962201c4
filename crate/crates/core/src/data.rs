//! Benchmark datasets, train/test splits and per-channel normalization.
//!
//! Two sample layouts cover the benchmark shapes:
//!
//! * [`Samples::Series`]: one long time series with per-step targets
//!   (one-step-ahead regression). The first `n_train` steps are training
//!   data, the following `n_test` steps are test data.
//! * [`Samples::Sequences`]: independent labelled sequences
//!   (classification). The first `n_train` sequences train, the rest test.
//!
//! Evaluation never sees a dataset directly; it sees an [`EvalSet`]
//! produced by [`Dataset::view`].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Steps preceding a series window that are run but not scored.
pub const MAX_WASHOUT: usize = 100;

/// Fraction of the training split held out for validation and calibration.
pub const HOLDOUT_FRACTION: f64 = 0.2;

/// Washout length for a training window of `t_train` steps: `min(100, 10%)`.
pub fn washout(t_train: usize) -> usize {
    MAX_WASHOUT.min(t_train / 10)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Task {
    Regression,
    Classification { n_classes: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "layout")]
pub enum Samples {
    Series { inputs: Matrix, targets: Matrix },
    Sequences { sequences: Vec<Matrix>, labels: Vec<usize> },
}

/// Per-channel affine map `x' = (x − mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Channels whose training variance was zero; those keep scale 1.
    pub constant_channels: Vec<usize>,
}

impl ChannelStats {
    fn fit<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut n = 0usize;
        let mut mean = vec![0.0; dim];
        let mut m2 = vec![0.0; dim];
        // Welford
        for row in rows {
            n += 1;
            for c in 0..dim {
                let d = row[c] - mean[c];
                mean[c] += d / n as f64;
                m2[c] += d * (row[c] - mean[c]);
            }
        }
        let mut scale = vec![1.0; dim];
        let mut constant_channels = Vec::new();
        for c in 0..dim {
            let var = if n > 0 { m2[c] / n as f64 } else { 0.0 };
            if var > 1e-24 {
                scale[c] = libm::sqrt(var);
            } else {
                constant_channels.push(c);
            }
        }
        Self { mean, scale, constant_channels }
    }

    fn apply(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for t in 0..out.rows() {
            for (c, x) in out.row_mut(t).iter_mut().enumerate() {
                *x = (*x - self.mean[c]) / self.scale[c];
            }
        }
        out
    }

    fn invert(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for t in 0..out.rows() {
            for (c, x) in out.row_mut(t).iter_mut().enumerate() {
                *x = *x * self.scale[c] + self.mean[c];
            }
        }
        out
    }
}

/// Record sufficient to undo [`normalize`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub inputs: ChannelStats,
    /// Present for regression targets only.
    pub targets: Option<ChannelStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub task: Task,
    pub samples: Samples,
    /// Training steps (series) or sequences (classification).
    pub n_train: usize,
    pub n_test: usize,
    pub normalization: Option<Normalization>,
}

/// Which part of a dataset to look at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Whole training split.
    Train,
    Test,
    /// Training split minus the holdout.
    Fit,
    /// Last 20% of the training split: validation for hyperparameter
    /// search and calibration for sensitivity scoring.
    Holdout,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Fit => "fit",
            Split::Holdout => "holdout",
        }
    }
}

/// A contiguous series window: all rows are run through the reservoir from
/// a zero state, the first `skip` rows are not scored.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesWindow {
    pub inputs: Matrix,
    pub targets: Matrix,
    pub skip: usize,
}

/// Evaluation data in the shape the models consume.
#[derive(Clone, Debug, PartialEq)]
pub enum EvalSet {
    Series(SeriesWindow),
    Sequences { sequences: Vec<Matrix>, labels: Vec<usize>, n_classes: usize },
}

impl EvalSet {
    pub fn is_empty(&self) -> bool {
        match self {
            EvalSet::Series(w) => w.inputs.rows() <= w.skip,
            EvalSet::Sequences { sequences, .. } => sequences.is_empty(),
        }
    }

    /// Number of scored items (time steps or sequences).
    pub fn scored_len(&self) -> usize {
        match self {
            EvalSet::Series(w) => w.inputs.rows().saturating_sub(w.skip),
            EvalSet::Sequences { sequences, .. } => sequences.len(),
        }
    }
}

fn slice_rows(m: &Matrix, from: usize, to: usize) -> Matrix {
    let rows: Vec<Vec<f64>> = (from..to).map(|t| m.row(t).to_vec()).collect();
    if rows.is_empty() {
        return Matrix::zeros(0, m.cols());
    }
    Matrix::from_rows(&rows).expect("rows of one matrix share a width")
}

impl Dataset {
    pub fn d_in(&self) -> usize {
        match &self.samples {
            Samples::Series { inputs, .. } => inputs.cols(),
            Samples::Sequences { sequences, .. } => sequences.first().map_or(0, Matrix::cols),
        }
    }

    pub fn d_out(&self) -> usize {
        match (&self.samples, self.task) {
            (Samples::Series { targets, .. }, _) => targets.cols(),
            (_, Task::Classification { n_classes }) => n_classes,
            (Samples::Sequences { .. }, Task::Regression) => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.samples, self.task) {
            (Samples::Series { inputs, targets }, Task::Regression) => {
                if inputs.rows() != targets.rows() {
                    return Err(Error::Shape { expected: inputs.rows(), got: targets.rows(), what: "target rows" });
                }
                if self.n_train + self.n_test > inputs.rows() {
                    return Err(Error::InvalidArgument("train + test exceeds series length"));
                }
            }
            (Samples::Sequences { sequences, labels }, Task::Classification { n_classes }) => {
                if sequences.len() != labels.len() {
                    return Err(Error::Shape { expected: sequences.len(), got: labels.len(), what: "labels" });
                }
                if self.n_train + self.n_test > sequences.len() {
                    return Err(Error::InvalidArgument("train + test exceeds sequence count"));
                }
                if labels.iter().any(|&l| l >= n_classes) {
                    return Err(Error::InvalidArgument("label outside [0, n_classes)"));
                }
                let d = self.d_in();
                if sequences.iter().any(|s| s.cols() != d || s.rows() == 0) {
                    return Err(Error::InvalidArgument("sequences must be non-empty with equal width"));
                }
            }
            _ => return Err(Error::TaskMismatch("sample layout does not match task")),
        }
        if self.n_test == 0 {
            return Err(Error::EmptyInput("test split"));
        }
        if self.n_train == 0 {
            return Err(Error::EmptyInput("training split"));
        }
        Ok(())
    }

    fn holdout_start(&self) -> usize {
        let hold = libm::round(self.n_train as f64 * HOLDOUT_FRACTION) as usize;
        self.n_train - hold.clamp(1, self.n_train.saturating_sub(1).max(1))
    }

    /// Index range `[start, end)` of a split, in steps or sequences.
    pub fn range(&self, split: Split) -> (usize, usize) {
        match split {
            Split::Train => (0, self.n_train),
            Split::Test => (self.n_train, self.n_train + self.n_test),
            Split::Fit => (0, self.holdout_start()),
            Split::Holdout => (self.holdout_start(), self.n_train),
        }
    }

    /// Builds the evaluation view of a split.
    ///
    /// Series windows that start at step 0 skip the washout; later windows
    /// are preceded by up to `washout(n_train)` context steps that are run
    /// but not scored.
    pub fn view(&self, split: Split) -> Result<EvalSet> {
        let (start, end) = self.range(split);
        if end <= start {
            return Err(Error::EmptyInput(split.name()));
        }
        match (&self.samples, self.task) {
            (Samples::Series { inputs, targets }, _) => {
                let (from, skip) = if start == 0 {
                    (0, washout(end))
                } else {
                    let warm = washout(self.n_train).min(start);
                    (start - warm, warm)
                };
                Ok(EvalSet::Series(SeriesWindow {
                    inputs: slice_rows(inputs, from, end),
                    targets: slice_rows(targets, from, end),
                    skip,
                }))
            }
            (Samples::Sequences { sequences, labels }, Task::Classification { n_classes }) => {
                Ok(EvalSet::Sequences {
                    sequences: sequences[start..end].to_vec(),
                    labels: labels[start..end].to_vec(),
                    n_classes,
                })
            }
            _ => Err(Error::TaskMismatch("sample layout does not match task")),
        }
    }

    /// Input rows of the training split, used for input-range calibration.
    pub fn train_input_rows(&self) -> Vec<&[f64]> {
        match &self.samples {
            Samples::Series { inputs, .. } => (0..self.n_train).map(|t| inputs.row(t)).collect(),
            Samples::Sequences { sequences, .. } => sequences[..self.n_train]
                .iter()
                .flat_map(|s| (0..s.rows()).map(move |t| s.row(t)))
                .collect(),
        }
    }
}

/// Parameters of the Hénon map `x' = 1 − a·x² + y`, `y' = b·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HenonParams {
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub y0: f64,
    /// Iterations discarded before recording.
    pub transient: usize,
}

impl Default for HenonParams {
    fn default() -> Self {
        Self { a: 1.4, b: 0.3, x0: 0.0, y0: 0.0, transient: 200 }
    }
}

/// Iterates the Hénon map and returns `len` recorded x values, the first
/// being the state after `transient` iterations.
pub fn henon_orbit(len: usize, p: &HenonParams) -> Result<Vec<f64>> {
    let (mut x, mut y) = (p.x0, p.y0);
    let mut out = Vec::with_capacity(len);
    for step in 0..p.transient + len {
        if step >= p.transient {
            out.push(x);
        }
        let nx = 1.0 - p.a * x * x + y;
        y = p.b * x;
        x = nx;
        if !(x.abs() <= 1e6) {
            return Err(Error::Divergent { a: p.a, b: p.b, step: step + 1 });
        }
    }
    Ok(out)
}

/// One-step-ahead Hénon regression: input `x_t`, target `x_{t+1}`.
///
/// The split is 80/20 (4000/1000 for 5000 steps).
pub fn gen_henon(n_steps: usize, p: &HenonParams) -> Result<Dataset> {
    if n_steps < 2 {
        return Err(Error::OutOfRange { name: "n_steps", value: n_steps as f64, min: 2.0, max: f64::INFINITY });
    }
    let orbit = henon_orbit(n_steps + 1, p)?;
    let inputs = Matrix::from_vec(n_steps, 1, orbit[..n_steps].to_vec())?;
    let targets = Matrix::from_vec(n_steps, 1, orbit[1..].to_vec())?;
    let n_train = n_steps * 4 / 5;
    Ok(Dataset {
        name: String::from("henon"),
        task: Task::Regression,
        samples: Samples::Series { inputs, targets },
        n_train,
        n_test: n_steps - n_train,
        normalization: None,
    })
}

/// Settings of the synthetic sinusoid classification benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_classes: usize,
    pub seq_len: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

/// Class-conditional noisy sinusoids: class `c` oscillates at
/// `0.05 + 0.4·c/(n_classes − 1)` cycles per step with a random phase.
pub fn gen_synthetic_classification(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n_classes < 2 {
        return Err(Error::OutOfRange {
            name: "n_classes",
            value: spec.n_classes as f64,
            min: 2.0,
            max: f64::INFINITY,
        });
    }
    if spec.seq_len == 0 {
        return Err(Error::EmptyInput("sequence length"));
    }
    if spec.n_test == 0 {
        return Err(Error::EmptyInput("test split"));
    }
    if spec.n_train == 0 {
        return Err(Error::EmptyInput("training split"));
    }
    if !(spec.noise >= 0.0) {
        return Err(Error::InvalidArgument("noise must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.n_train + spec.n_test;
    let mut sequences = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for i in 0..total {
        let label = i % spec.n_classes;
        let freq = 0.05 + 0.4 * label as f64 / (spec.n_classes - 1) as f64;
        let phase = rng.gen_range(0.0..2.0 * PI);
        let data = (0..spec.seq_len)
            .map(|t| libm::sin(2.0 * PI * freq * t as f64 + phase) + spec.noise * gaussian(&mut rng))
            .collect();
        sequences.push(Matrix::from_vec(spec.seq_len, 1, data)?);
        labels.push(label);
    }
    Ok(Dataset {
        name: String::from("synthetic"),
        task: Task::Classification { n_classes: spec.n_classes },
        samples: Samples::Sequences { sequences, labels },
        n_train: spec.n_train,
        n_test: spec.n_test,
        normalization: None,
    })
}

// Box–Muller; avoids pulling in rand_distr for one normal draw.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
}

/// Per-channel standardization with statistics from the training split.
///
/// Regression targets are standardized too; classification labels are not
/// touched. Constant channels are left unscaled and listed in the record.
pub fn normalize(ds: &Dataset) -> Result<Dataset> {
    let d_in = ds.d_in();
    let inputs = ChannelStats::fit(ds.train_input_rows().into_iter(), d_in);
    let mut out = ds.clone();
    let targets = match &mut out.samples {
        Samples::Series { inputs: x, targets: y } => {
            let ts = ChannelStats::fit((0..ds.n_train).map(|t| y.row(t)), y.cols());
            *x = inputs.apply(x);
            *y = ts.apply(y);
            Some(ts)
        }
        Samples::Sequences { sequences, .. } => {
            for s in sequences.iter_mut() {
                *s = inputs.apply(s);
            }
            None
        }
    };
    out.normalization = Some(Normalization { inputs, targets });
    Ok(out)
}

/// Inverts [`normalize`]; a dataset without a record is returned unchanged.
pub fn denormalize(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    let Some(norm) = out.normalization.take() else {
        return out;
    };
    match &mut out.samples {
        Samples::Series { inputs, targets } => {
            *inputs = norm.inputs.invert(inputs);
            if let Some(ts) = &norm.targets {
                *targets = ts.invert(targets);
            }
        }
        Samples::Sequences { sequences, .. } => {
            for s in sequences.iter_mut() {
                *s = norm.inputs.invert(s);
            }
        }
    }
    out
}
