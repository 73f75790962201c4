//! Bit-flip sensitivity scoring of quantized reservoir weights, ranking,
//! and rate-`p` pruning.
//!
//! The score of a weight is the mean absolute performance deviation over
//! all `q` single-bit flips of its two's-complement code:
//!
//! ```text
//! Sensitivity(w) = 1/q · Σ_b |Perf_base(q) − Perf_flip(b, w)(q)|
//! ```

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::EvalSet;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::metrics::Performance;
use crate::quant::{QuantizedModel, WeightIndex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrunerKind {
    Random,
    MutualInformation,
    Spearman,
    Pca,
    Lasso,
    Sensitivity,
}

impl PrunerKind {
    pub const ALL: [PrunerKind; 6] = [
        PrunerKind::Random,
        PrunerKind::MutualInformation,
        PrunerKind::Spearman,
        PrunerKind::Pca,
        PrunerKind::Lasso,
        PrunerKind::Sensitivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrunerKind::Random => "random",
            PrunerKind::MutualInformation => "mutual_information",
            PrunerKind::Spearman => "spearman",
            PrunerKind::Pca => "pca",
            PrunerKind::Lasso => "lasso",
            PrunerKind::Sensitivity => "sensitivity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightScore {
    pub index: WeightIndex,
    pub score: f64,
}

/// Per-weight importance scores from any pruner, plus their ranking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub pruner: PrunerKind,
    pub q: u32,
    /// Identifies the data the scores were computed on.
    pub calibration: String,
    /// Performance of the unflipped model on the calibration data.
    pub base_perf: Option<Performance>,
    /// One score per stored connection, in row-major index order.
    pub scores: Vec<WeightScore>,
    /// Indices in ascending score order.
    pub ranking: Vec<WeightIndex>,
    /// Degenerate-input notes (constant traces, rank deficiency, ...).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SensitivityReport {
    pub fn new(
        pruner: PrunerKind,
        q: u32,
        calibration: String,
        base_perf: Option<Performance>,
        mut scores: Vec<WeightScore>,
    ) -> Self {
        scores.sort_by(|a, b| a.index.cmp(&b.index));
        let ranking = rank_weights(&scores);
        Self { pruner, q, calibration, base_perf, scores, ranking, warnings: Vec::new() }
    }
}

/// Ascending score, ties broken by `(row, col)`.
pub fn rank_weights(scores: &[WeightScore]) -> Vec<WeightIndex> {
    let mut sorted: Vec<WeightScore> = scores.to_vec();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.index.cmp(&b.index)));
    sorted.into_iter().map(|s| s.index).collect()
}

/// Flips bit `b` (1 = LSB) of a `q`-bit two's-complement code.
pub fn flip_bit(w: i64, b: u32, q: u32) -> Result<i64> {
    if q == 0 || q > 63 || b == 0 || b > q {
        return Err(Error::BitOutOfRange { bit: b, q });
    }
    let half = 1i64 << (q - 1);
    if w < -half || w >= half {
        return Err(Error::OutOfRange { name: "weight code", value: w as f64, min: -half as f64, max: (half - 1) as f64 });
    }
    let mask = (1u64 << q) - 1;
    let raw = ((w as u64) & mask) ^ (1u64 << (b - 1));
    // sign-extend from q bits
    let shift = 64 - q;
    Ok(((raw << shift) as i64) >> shift)
}

/// Calibration data with everything that does not depend on `W_r`
/// precomputed.
pub struct Calibration<'a> {
    set: &'a EvalSet,
    sums: Vec<Vec<i64>>,
    base: Performance,
}

impl<'a> Calibration<'a> {
    pub fn new(qm: &QuantizedModel, set: &'a EvalSet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptyInput("calibration set"));
        }
        let sums = qm.cache_input_sums(set)?;
        let base = qm.evaluate_cached(set, &sums, None)?;
        Ok(Self { set, sums, base })
    }

    pub fn base_perf(&self) -> Performance {
        self.base
    }

    /// `|Perf_base − Perf_flip(b, w)|` for the connection at `position`.
    pub fn flip_deviation(&self, qm: &QuantizedModel, position: usize, bit: u32) -> Result<f64> {
        let w = qm.w_r[position].value;
        let flipped = flip_bit(w, bit, qm.q)?;
        let perf = qm.evaluate_cached(self.set, &self.sums, Some((position, flipped)))?;
        Ok(self.base.deviation(&perf))
    }

    /// Mean deviation over all `q` bit flips of one connection.
    pub fn score(&self, qm: &QuantizedModel, position: usize) -> Result<f64> {
        let mut total = 0.0;
        for bit in 1..=qm.q {
            total += self.flip_deviation(qm, position, bit)?;
        }
        Ok(total / qm.q as f64)
    }
}

/// Sensitivity of one stored connection on `calib`.
pub fn sensitivity_score(qm: &QuantizedModel, weight: WeightIndex, calib: &EvalSet) -> Result<f64> {
    let position = qm.entry_position(weight)?;
    Calibration::new(qm, calib)?.score(qm, position)
}

/// Scores every stored connection. Jobs are `(weight, bit)` pairs; the
/// executor may run them in any order or concurrently.
pub fn sensitivity_report(
    qm: &QuantizedModel,
    calib: &EvalSet,
    calibration_id: &str,
    exec: &impl Executor,
) -> Result<SensitivityReport> {
    let cal = Calibration::new(qm, calib)?;
    let q = qm.q as usize;
    let jobs = qm.nnz() * q;
    let deviations = exec.map(jobs, &|job| cal.flip_deviation(qm, job / q, (job % q) as u32 + 1));
    let mut scores = Vec::with_capacity(qm.nnz());
    for (position, chunk) in deviations.chunks(q).enumerate() {
        let mut total = 0.0;
        for d in chunk {
            total += *d.as_ref().map_err(Clone::clone)?;
        }
        scores.push(WeightScore { index: qm.w_r[position].index(), score: total / qm.q as f64 });
    }
    Ok(SensitivityReport::new(PrunerKind::Sensitivity, qm.q, calibration_id.into(), Some(cal.base_perf()), scores))
}

/// Pruned connection set for a rate `p` (percent) under one ranking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneMask {
    pub rate: f64,
    /// Removed connections, ascending.
    pub pruned: Vec<WeightIndex>,
}

/// Number of connections a rate removes: `round(p/100 · ncrl)`.
pub fn prune_count(p: f64, ncrl: usize) -> usize {
    libm::round(p / 100.0 * ncrl as f64) as usize
}

/// The first `round(p% · ncrl)` entries of `ranking`.
pub fn prune_mask(ranking: &[WeightIndex], p: f64, ncrl: usize) -> Result<PruneMask> {
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::OutOfRange { name: "pruning rate", value: p, min: 0.0, max: 100.0 });
    }
    let count = prune_count(p, ncrl);
    if count > ranking.len() {
        return Err(Error::Shape { expected: count, got: ranking.len(), what: "ranking length" });
    }
    let mut pruned = ranking[..count].to_vec();
    pruned.sort();
    Ok(PruneMask { rate: p, pruned })
}

/// Copy of `qm` with the masked connections structurally removed.
pub fn apply_mask(qm: &QuantizedModel, mask: &PruneMask) -> Result<QuantizedModel> {
    let mut out = qm.clone();
    for idx in &mask.pruned {
        qm.entry_position(*idx)?;
    }
    out.w_r.retain(|e| mask.pruned.binary_search(&e.index()).is_err());
    out.pruned.extend_from_slice(&mask.pruned);
    out.pruned.sort();
    out.base_perf = None;
    Ok(out)
}

/// Removes the lowest-ranked `p`% of connections. The input model is not
/// modified.
pub fn prune(qm: &QuantizedModel, ranking: &[WeightIndex], p: f64) -> Result<QuantizedModel> {
    let mask = prune_mask(ranking, p, qm.ncrl)?;
    apply_mask(qm, &mask)
}
