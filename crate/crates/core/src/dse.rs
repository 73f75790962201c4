//! Design-space exploration over bit-widths × pruning rates.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    lasso_scores, mi_scores, pca_scores, random_scores, DEFAULT_LASSO_ALPHA, DEFAULT_MI_BINS, DEFAULT_PCA_COMPONENTS,
};
use crate::data::{Dataset, EvalSet, Split};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::metrics::{PerfKind, Performance};
use crate::quant::{quantize_model, QuantizedModel, MAX_BITS};
use crate::reservoir::ReservoirModel;
use crate::rtl::CostEstimate;
use crate::sensitivity::{apply_mask, prune_mask, sensitivity_report, PruneMask, PrunerKind, SensitivityReport};

pub const CALIBRATION_ID: &str = "holdout";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub q: Vec<u32>,
    pub p: Vec<f64>,
    pub pruners: Vec<PrunerKind>,
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.q.is_empty() || self.p.is_empty() || self.pruners.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one q, p and pruner"));
        }
        for &q in &self.q {
            if !(1..=MAX_BITS).contains(&q) {
                return Err(Error::OutOfRange { name: "q", value: q as f64, min: 1.0, max: MAX_BITS as f64 });
            }
        }
        for &p in &self.p {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::OutOfRange { name: "p", value: p, min: 0.0, max: 100.0 });
            }
        }
        let dup_q = (1..self.q.len()).any(|i| self.q[..i].contains(&self.q[i]));
        let dup_p = (1..self.p.len()).any(|i| self.p[..i].contains(&self.p[i]));
        let dup_k = (1..self.pruners.len()).any(|i| self.pruners[..i].contains(&self.pruners[i]));
        if dup_q || dup_p || dup_k {
            return Err(Error::InvalidArgument("grid values must be unique"));
        }
        Ok(())
    }
}

/// Baseline pruner settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrunerOptions {
    pub mi_bins: usize,
    pub pca_components: usize,
    pub lasso_alpha: f64,
    pub random_seed: u64,
}

impl Default for PrunerOptions {
    fn default() -> Self {
        Self {
            mi_bins: DEFAULT_MI_BINS,
            pca_components: DEFAULT_PCA_COMPONENTS,
            lasso_alpha: DEFAULT_LASSO_ALPHA,
            random_seed: 0,
        }
    }
}

/// One grid cell `s(q, p)` for one pruner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceleratorConfig {
    pub q: u32,
    pub p: f64,
    pub pruner: PrunerKind,
    /// Test-split performance of the pruned model.
    pub perf: Option<Performance>,
    /// Test-split performance of the unpruned model at this `q`.
    pub base_perf: Option<Performance>,
    pub mask: Option<PruneMask>,
    /// Surviving reservoir connections.
    pub nnz: Option<usize>,
    pub cost: Option<CostEstimate>,
    pub error: Option<String>,
    #[serde(skip)]
    pub model: Option<QuantizedModel>,
}

impl AcceleratorConfig {
    fn failed(q: u32, p: f64, pruner: PrunerKind, base_perf: Option<Performance>, cause: &str) -> Self {
        Self {
            q,
            p,
            pruner,
            perf: None,
            base_perf,
            mask: None,
            nnz: None,
            cost: None,
            error: Some(cause.into()),
            model: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DseResult {
    pub dataset: String,
    pub grid: Grid,
    pub seed: u64,
    /// Ordered by `(q, p, pruner)`.
    pub configs: Vec<AcceleratorConfig>,
    /// One ranking per `(q, pruner)` that could be scored.
    pub reports: Vec<SensitivityReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DseResult {
    pub fn failed_cells(&self) -> impl Iterator<Item = &AcceleratorConfig> {
        self.configs.iter().filter(|c| c.error.is_some())
    }

    pub fn get(&self, q: u32, p: f64, pruner: PrunerKind) -> Option<&AcceleratorConfig> {
        self.configs.iter().find(|c| c.q == q && c.p == p && c.pruner == pruner)
    }
}

/// Ranking of one pruner on the calibration data.
pub fn score_pruner(
    qm: &QuantizedModel,
    kind: PrunerKind,
    calib: &EvalSet,
    opts: &PrunerOptions,
    exec: &impl Executor,
) -> Result<SensitivityReport> {
    match kind {
        PrunerKind::Sensitivity => sensitivity_report(qm, calib, CALIBRATION_ID, exec),
        PrunerKind::Random => Ok(random_scores(qm, opts.random_seed)),
        PrunerKind::MutualInformation => mi_scores(qm, calib, CALIBRATION_ID, opts.mi_bins),
        PrunerKind::Spearman => crate::baselines::spearman_scores(qm, calib, CALIBRATION_ID),
        PrunerKind::Pca => pca_scores(qm, calib, CALIBRATION_ID, opts.pca_components),
        PrunerKind::Lasso => lasso_scores(qm, calib, CALIBRATION_ID, opts.lasso_alpha),
    }
}

/// Outcome of scoring one pruner; errors are kept as text so they survive
/// serialization between pipeline stages.
pub type Ranking = core::result::Result<SensitivityReport, String>;

/// Quantizes `model` at `q` and records `Perf^base(q)` on the test split.
pub fn quantize_for_grid(model: &ReservoirModel, q: u32, ds: &Dataset) -> Result<QuantizedModel> {
    let mut qm = quantize_model(model, q, ds)?;
    qm.measure_base_perf(&ds.view(Split::Test)?)?;
    Ok(qm)
}

/// One ranking per pruner kind, in the order given.
pub fn score_pruners(
    qm: &QuantizedModel,
    kinds: &[PrunerKind],
    calib: &EvalSet,
    opts: &PrunerOptions,
    exec: &impl Executor,
) -> Vec<(PrunerKind, Ranking)> {
    kinds.iter().map(|&k| (k, score_pruner(qm, k, calib, opts, exec).map_err(|e| e.to_string()))).collect()
}

/// Cells that could not be evaluated because `cause` struck before pruning.
pub fn failed_cells(q: u32, ps: &[f64], kinds: &[PrunerKind], cause: &str) -> Vec<AcceleratorConfig> {
    let mut out = Vec::new();
    for &p in ps {
        for &k in kinds {
            out.push(AcceleratorConfig::failed(q, p, k, None, cause));
        }
    }
    out
}

/// Prunes `qm` at every rate under each ranking and evaluates on `test`.
/// Returns cells ordered by `(p, ranking order)`.
pub fn evaluate_cells(
    qm: &QuantizedModel,
    rankings: &[(PrunerKind, Ranking)],
    ps: &[f64],
    test: &EvalSet,
    exec: &impl Executor,
) -> Vec<AcceleratorConfig> {
    let jobs: Vec<(f64, usize)> = ps.iter().flat_map(|&p| (0..rankings.len()).map(move |k| (p, k))).collect();
    exec.map(jobs.len(), &|j| {
        let (p, k) = jobs[j];
        let (kind, ranking) = &rankings[k];
        let cell = ranking.as_ref().map_err(|e| e.clone()).and_then(|rep| {
            let run = || -> Result<_> {
                let mask = prune_mask(&rep.ranking, p, qm.ncrl)?;
                let pruned = apply_mask(qm, &mask)?;
                let perf = pruned.evaluate(test)?;
                Ok((mask, pruned, perf))
            };
            run().map_err(|e| e.to_string())
        });
        match cell {
            Ok((mask, pruned, perf)) => AcceleratorConfig {
                q: qm.q,
                p,
                pruner: *kind,
                perf: Some(perf),
                base_perf: qm.base_perf,
                nnz: Some(pruned.nnz()),
                mask: Some(mask),
                cost: None,
                error: None,
                model: Some(pruned),
            },
            Err(e) => AcceleratorConfig::failed(qm.q, p, *kind, qm.base_perf, &e),
        }
    })
}

/// Sorts grid axes the way results are ordered.
pub fn sorted_axes(grid: &Grid) -> (Vec<u32>, Vec<f64>, Vec<PrunerKind>) {
    let mut qs = grid.q.clone();
    qs.sort_unstable();
    let mut ps = grid.p.clone();
    ps.sort_by(f64::total_cmp);
    let mut kinds = grid.pruners.clone();
    kinds.sort();
    (qs, ps, kinds)
}

/// Orders configurations by `(q, p, pruner)`.
pub fn sort_configs(configs: &mut [AcceleratorConfig]) {
    configs.sort_by(|a, b| a.q.cmp(&b.q).then(a.p.total_cmp(&b.p)).then(a.pruner.cmp(&b.pruner)));
}

/// Runs the full grid.
///
/// Per `q`: quantize, measure the base performance on the test split, score
/// each pruner once on the calibration slice, then prune at every rate with
/// that single ranking (so masks nest) and evaluate on the test split.
/// A failure aborts only the affected cells, which carry the cause.
/// `progress` sees every cell in result order.
pub fn explore(
    model: &ReservoirModel,
    ds: &Dataset,
    grid: &Grid,
    opts: &PrunerOptions,
    exec: &impl Executor,
    progress: &mut dyn FnMut(&AcceleratorConfig),
) -> Result<DseResult> {
    grid.validate()?;
    let calib = ds.view(Split::Holdout)?;
    let test = ds.view(Split::Test)?;
    let (qs, ps, kinds) = sorted_axes(grid);
    let mut configs = Vec::new();
    let mut reports = Vec::new();
    for &q in &qs {
        let mut cells = match quantize_for_grid(model, q, ds) {
            Ok(qm) => {
                let rankings = score_pruners(&qm, &kinds, &calib, opts, exec);
                reports.extend(rankings.iter().filter_map(|(_, r)| r.as_ref().ok().cloned()));
                evaluate_cells(&qm, &rankings, &ps, &test, exec)
            }
            Err(e) => failed_cells(q, &ps, &kinds, &e.to_string()),
        };
        sort_configs(&mut cells);
        cells.iter().for_each(|c| progress(c));
        configs.extend(cells);
    }
    Ok(DseResult {
        dataset: ds.name.clone(),
        grid: grid.clone(),
        seed: model.hp.seed,
        configs,
        reports,
        warnings: Vec::new(),
    })
}

/// Bounds for [`filter_configs`]. `perf` is a floor for accuracy and a
/// ceiling for RMSE; `cost` is a ceiling on estimated LUTs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub perf: Option<f64>,
    pub cost: Option<u64>,
}

/// Keeps the configurations meeting every supplied bound. Failed cells and
/// cells without the bounded quantity are dropped. An empty outcome is not
/// an error but is recorded in `warnings`.
pub fn filter_configs(result: &DseResult, bounds: &Bounds) -> Result<DseResult> {
    if bounds.perf.is_none() && bounds.cost.is_none() {
        return Err(Error::InvalidArgument("filter needs a performance or cost bound"));
    }
    let keep = |c: &AcceleratorConfig| {
        let perf_ok = bounds.perf.map_or(true, |b| match c.perf {
            Some(Performance { kind: PerfKind::Accuracy, value }) => value >= b,
            Some(Performance { kind: PerfKind::Rmse, value }) => value <= b,
            None => false,
        });
        let cost_ok = bounds.cost.map_or(true, |b| c.cost.is_some_and(|k| k.est_luts <= b));
        c.error.is_none() && perf_ok && cost_ok
    };
    let mut out = result.clone();
    out.configs.retain(keep);
    if out.configs.is_empty() {
        out.warnings.push(format!("no configuration satisfies the bounds {bounds:?}"));
    }
    Ok(out)
}
