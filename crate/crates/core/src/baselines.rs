//! Conventional pruners used as comparison points for sensitivity pruning.
//!
//! All of them except `random` score neurons from the calibration state
//! trace; a connection inherits the importance of its destination neuron
//! (the row it feeds).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::EvalSet;
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::quant::QuantizedModel;
use crate::reservoir::collect_design;
use crate::sensitivity::{PrunerKind, SensitivityReport, WeightScore};

pub const DEFAULT_MI_BINS: usize = 8;
pub const DEFAULT_PCA_COMPONENTS: usize = 5;
pub const DEFAULT_LASSO_ALPHA: f64 = 1e-2;
pub const LASSO_TOLERANCE: f64 = 1e-6;
pub const LASSO_MAX_SWEEPS: usize = 10_000;

/// Neuron-level importances plus notes about degenerate inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Importance {
    pub values: Vec<f64>,
    pub warnings: Vec<String>,
}

fn report(qm: &QuantizedModel, kind: PrunerKind, calibration: &str, imp: Importance) -> SensitivityReport {
    let scores = qm.w_r.iter().map(|e| WeightScore { index: e.index(), score: imp.values[e.row] }).collect();
    let mut r = SensitivityReport::new(kind, qm.q, calibration.into(), None, scores);
    r.warnings = imp.warnings;
    r
}

/// Dequantized calibration states and targets, rows in a canonical order so
/// that batch statistics do not depend on the order of the sequences.
pub fn calibration_design(qm: &QuantizedModel, set: &EvalSet) -> Result<(Matrix, Matrix)> {
    let (x, y) = collect_design(set, |m| {
        let trace = qm.forward(m)?;
        Ok(qm.dequantize_states(&trace.states, trace.steps))
    })?;
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let lex = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).map(|(p, q)| p.total_cmp(q)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal)
    };
    order.sort_by(|&i, &j| lex(x.row(i), x.row(j)).then_with(|| lex(y.row(i), y.row(j))));
    let gather = |m: &Matrix| {
        let data = order.iter().flat_map(|&i| m.row(i).iter().copied()).collect();
        Matrix::from_vec(m.rows(), m.cols(), data)
    };
    Ok((gather(&x)?, gather(&y)?))
}

fn column(m: &Matrix, j: usize) -> Vec<f64> {
    (0..m.rows()).map(|t| m[(t, j)]).collect()
}

// ---------------------------------------------------------------- random

/// I.i.d. uniform scores in `[0, 1)`, deterministic per seed.
pub fn random_scores(qm: &QuantizedModel, seed: u64) -> SensitivityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores = qm.w_r.iter().map(|e| WeightScore { index: e.index(), score: rng.gen::<f64>() }).collect();
    SensitivityReport::new(PrunerKind::Random, qm.q, format!("seed:{seed}"), None, scores)
}

// -------------------------------------------------------------- spearman

/// Fractional ranks (1-based, ties get the average rank).
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&ranks(x), &ranks(y))
}

/// `|ρ_s|` between each state column and the targets, max over outputs.
pub fn spearman_importance(states: &Matrix, targets: &Matrix) -> Importance {
    let ys: Vec<Vec<f64>> = (0..targets.cols()).map(|o| ranks(&column(targets, o))).collect();
    let mut warnings = Vec::new();
    let values = (0..states.cols())
        .map(|j| {
            let rx = ranks(&column(states, j));
            let best = ys.iter().filter_map(|ry| pearson(&rx, ry)).map(libm::fabs).fold(None, |m: Option<f64>, v| {
                Some(m.map_or(v, |m| m.max(v)))
            });
            best.unwrap_or_else(|| {
                warnings.push(format!("neuron {j}: constant trace, correlation set to 0"));
                0.0
            })
        })
        .collect();
    Importance { values, warnings }
}

pub fn spearman_scores(qm: &QuantizedModel, calib: &EvalSet, calibration: &str) -> Result<SensitivityReport> {
    let (x, y) = calibration_design(qm, calib)?;
    Ok(report(qm, PrunerKind::Spearman, calibration, spearman_importance(&x, &y)))
}

// ------------------------------------------------------- mutual information

/// Equal-frequency bin of every sample. Equal values always share a bin.
pub fn equal_frequency_bins(x: &[f64], n_bins: usize) -> Vec<usize> {
    let t = x.len();
    let mut idx: Vec<usize> = (0..t).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut bins = vec![0; t];
    let mut start_bin = 0;
    for (r, &k) in idx.iter().enumerate() {
        if r == 0 || x[k] != x[idx[r - 1]] {
            start_bin = r * n_bins / t;
        }
        bins[k] = start_bin;
    }
    bins
}

/// Plug-in mutual information (nats) of two binned samples.
pub fn binned_mutual_information(a: &[usize], b: &[usize], n_bins: usize) -> f64 {
    let t = a.len() as f64;
    let mut joint = vec![0usize; n_bins * n_bins];
    let mut pa = vec![0usize; n_bins];
    let mut pb = vec![0usize; n_bins];
    for (&i, &j) in a.iter().zip(b) {
        joint[i * n_bins + j] += 1;
        pa[i] += 1;
        pb[j] += 1;
    }
    let mut mi = 0.0;
    for i in 0..n_bins {
        for j in 0..n_bins {
            let c = joint[i * n_bins + j];
            if c > 0 {
                let pxy = c as f64 / t;
                mi += pxy * libm::log(pxy * t * t / (pa[i] as f64 * pb[j] as f64));
            }
        }
    }
    mi.max(0.0)
}

fn occupied(bins: &[usize]) -> usize {
    let mut seen: Vec<usize> = bins.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Histogram MI between each state column and the targets, max over outputs.
pub fn mi_importance(states: &Matrix, targets: &Matrix, n_bins: usize) -> Result<Importance> {
    if n_bins < 2 {
        return Err(Error::OutOfRange { name: "n_bins", value: n_bins as f64, min: 2.0, max: f64::INFINITY });
    }
    if states.rows() == 0 {
        return Err(Error::EmptyInput("calibration states"));
    }
    let mut warnings = Vec::new();
    let ys: Vec<Vec<usize>> = (0..targets.cols())
        .map(|o| equal_frequency_bins(&column(targets, o), n_bins))
        .filter(|b| occupied(b) > 1)
        .collect();
    if ys.is_empty() {
        warnings.push(String::from("targets: degenerate binning, all importances 0"));
    }
    let values = (0..states.cols())
        .map(|j| {
            let bx = equal_frequency_bins(&column(states, j), n_bins);
            if occupied(&bx) <= 1 {
                warnings.push(format!("neuron {j}: degenerate binning, importance set to 0"));
                return 0.0;
            }
            ys.iter().map(|by| binned_mutual_information(&bx, by, n_bins)).fold(0.0, f64::max)
        })
        .collect();
    Ok(Importance { values, warnings })
}

pub fn mi_scores(qm: &QuantizedModel, calib: &EvalSet, calibration: &str, n_bins: usize) -> Result<SensitivityReport> {
    let (x, y) = calibration_design(qm, calib)?;
    Ok(report(qm, PrunerKind::MutualInformation, calibration, mi_importance(&x, &y, n_bins)?))
}

// ------------------------------------------------------------------- pca

/// `Σ_{i<k} ratio_i · v_{ji}²` over the top-`k` principal components of the
/// centred state covariance.
pub fn pca_importance(states: &Matrix, k: usize) -> Result<Importance> {
    let (t, n) = (states.rows(), states.cols());
    if k == 0 || k > n {
        return Err(Error::OutOfRange { name: "k", value: k as f64, min: 1.0, max: n as f64 });
    }
    if t == 0 {
        return Err(Error::EmptyInput("calibration states"));
    }
    let mut mean = vec![0.0; n];
    for r in 0..t {
        for (m, x) in mean.iter_mut().zip(states.row(r)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= t as f64);
    let mut centred = states.clone();
    for r in 0..t {
        for (x, m) in centred.row_mut(r).iter_mut().zip(&mean) {
            *x -= m;
        }
    }
    let cov = centred.gram();
    let (vals, vecs) = symmetric_eigen(&cov);
    let vals: Vec<f64> = vals.into_iter().map(|v| v.max(0.0)).collect();
    let total: f64 = vals.iter().sum();
    let mut warnings = Vec::new();
    if total == 0.0 {
        warnings.push(String::from("state trace has zero variance, all importances 0"));
        return Ok(Importance { values: vec![0.0; n], warnings });
    }
    let tol = vals[0] * 1e-12 * n as f64;
    let available = vals.iter().filter(|&&v| v > tol).count();
    if available < k {
        warnings.push(format!("rank-deficient states: using {available} of {k} components"));
    }
    let used = k.min(available);
    let mut values = vec![0.0; n];
    for i in 0..used {
        let ratio = vals[i] / total;
        for (j, v) in values.iter_mut().enumerate() {
            let l = vecs[(j, i)];
            *v += ratio * l * l;
        }
    }
    Ok(Importance { values, warnings })
}

pub fn pca_scores(qm: &QuantizedModel, calib: &EvalSet, calibration: &str, k: usize) -> Result<SensitivityReport> {
    let (x, _) = calibration_design(qm, calib)?;
    Ok(report(qm, PrunerKind::Pca, calibration, pca_importance(&x, k)?))
}

// ----------------------------------------------------------------- lasso

/// Solution of `min_w 1/(2T)‖y − Xw‖² + α‖w‖₁` by cyclic coordinate
/// descent, stopped when the duality gap drops below
/// `LASSO_TOLERANCE · ‖y‖²/T`.
pub fn lasso(x: &Matrix, y: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let (t, n) = (x.rows(), x.cols());
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::OutOfRange { name: "alpha", value: alpha, min: 0.0, max: f64::INFINITY });
    }
    if t == 0 || y.len() != t {
        return Err(Error::Shape { expected: t, got: y.len(), what: "lasso targets" });
    }
    let tf = t as f64;
    let xt = x.transpose();
    let norms: Vec<f64> = (0..n).map(|j| xt.row(j).iter().map(|v| v * v).sum()).collect();
    let mut w = vec![0.0; n];
    let mut r = y.to_vec();
    let y2: f64 = y.iter().map(|v| v * v).sum();
    let target = LASSO_TOLERANCE * y2 / tf;
    let mut gap = f64::INFINITY;
    for _ in 0..LASSO_MAX_SWEEPS {
        gap = duality_gap(&xt, y, &r, &w, alpha);
        if gap <= target {
            return Ok(w);
        }
        for j in 0..n {
            if norms[j] == 0.0 {
                continue;
            }
            let col = xt.row(j);
            let rho: f64 = col.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() + norms[j] * w[j];
            let new = soft_threshold(rho, tf * alpha) / norms[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for (ri, a) in r.iter_mut().zip(col) {
                    *ri -= delta * a;
                }
                w[j] = new;
            }
        }
    }
    Err(Error::LassoNoConvergence { sweeps: LASSO_MAX_SWEEPS, gap })
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Primal minus dual objective at `w` with residual `r = y − Xw`; the dual
/// point is the residual scaled into the feasible set.
fn duality_gap(xt: &Matrix, y: &[f64], r: &[f64], w: &[f64], alpha: f64) -> f64 {
    let tf = r.len() as f64;
    let dual_norm = (0..xt.rows())
        .map(|j| libm::fabs(xt.row(j).iter().zip(r).map(|(a, b)| a * b).sum::<f64>()))
        .fold(0.0, f64::max);
    let nu = if dual_norm > tf * alpha { tf * alpha / dual_norm } else { 1.0 };
    let r2: f64 = r.iter().map(|v| v * v).sum();
    let ry: f64 = r.iter().zip(y).map(|(a, b)| a * b).sum();
    let l1: f64 = w.iter().map(|v| libm::fabs(*v)).sum();
    let primal = r2 / (2.0 * tf) + alpha * l1;
    let dual = (nu * ry - 0.5 * nu * nu * r2) / tf;
    (primal - dual).max(0.0)
}

/// Columns centred and scaled to unit variance; constant columns become 0.
pub fn standardize_columns(m: &Matrix) -> Matrix {
    let (t, n) = (m.rows(), m.cols());
    let mut out = m.clone();
    for j in 0..n {
        let mean = (0..t).map(|r| m[(r, j)]).sum::<f64>() / t as f64;
        let var = (0..t).map(|r| (m[(r, j)] - mean) * (m[(r, j)] - mean)).sum::<f64>() / t as f64;
        let sd = libm::sqrt(var);
        for r in 0..t {
            out[(r, j)] = if sd > 0.0 { (m[(r, j)] - mean) / sd } else { 0.0 };
        }
    }
    out
}

/// L1 norm of each neuron's Lasso coefficients across outputs, fitted on
/// standardized states against centred targets.
pub fn lasso_importance(states: &Matrix, targets: &Matrix, alpha: f64) -> Result<Importance> {
    let x = standardize_columns(states);
    let mut values = vec![0.0; states.cols()];
    for o in 0..targets.cols() {
        let mut y = column(targets, o);
        let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
        y.iter_mut().for_each(|v| *v -= mean);
        let w = lasso(&x, &y, alpha)?;
        for (v, c) in values.iter_mut().zip(&w) {
            *v += libm::fabs(*c);
        }
    }
    Ok(Importance { values, warnings: Vec::new() })
}

pub fn lasso_scores(qm: &QuantizedModel, calib: &EvalSet, calibration: &str, alpha: f64) -> Result<SensitivityReport> {
    let (x, y) = calibration_design(qm, calib)?;
    Ok(report(qm, PrunerKind::Lasso, calibration, lasso_importance(&x, &y, alpha)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Matrix {
        Matrix::from_vec(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_of_identical_is_one() {
        let y: Vec<f64> = (0..50).map(|i| libm::sin(i as f64)).collect();
        let imp = spearman_importance(&col(&y), &col(&y));
        assert_eq!(imp.values, vec![1.0]);
    }

    #[test]
    fn constant_trace_has_zero_correlation() {
        let imp = spearman_importance(&col(&[0.5; 10]), &col(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]));
        assert_eq!(imp.values, vec![0.0]);
        assert_eq!(imp.warnings.len(), 1);
    }

    #[test]
    fn equal_frequency_bins_split_evenly() {
        let x: Vec<f64> = (0..16).rev().map(|i| i as f64).collect();
        let b = equal_frequency_bins(&x, 8);
        assert_eq!(b[15], 0);
        assert_eq!(b[0], 7);
        for k in 0..8 {
            assert_eq!(b.iter().filter(|&&v| v == k).count(), 2);
        }
    }

    #[test]
    fn ties_share_a_bin() {
        let b = equal_frequency_bins(&[1.0, 1.0, 1.0, 1.0, 2.0, 3.0], 3);
        assert_eq!(&b[..4], &[0, 0, 0, 0]);
    }

    #[test]
    fn degenerate_binning_is_flagged() {
        let imp = mi_importance(&col(&[0.0; 8]), &col(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]), 4).unwrap();
        assert_eq!(imp.values, vec![0.0]);
        assert!(!imp.warnings.is_empty());
        assert!(mi_importance(&col(&[0.0]), &col(&[0.0]), 1).is_err());
    }

    #[test]
    fn pca_single_direction() {
        let mut rows = Vec::new();
        for i in 0..20 {
            rows.push(vec![i as f64, 0.0, 0.0]);
        }
        let imp = pca_importance(&Matrix::from_rows(&rows).unwrap(), 2).unwrap();
        assert!((imp.values[0] - 1.0).abs() < 1e-12);
        assert!(imp.values[1].abs() < 1e-12 && imp.values[2].abs() < 1e-12);
        assert!(imp.warnings.iter().any(|w| w.contains("rank-deficient")));
        assert!(pca_importance(&Matrix::from_rows(&rows).unwrap(), 4).is_err());
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn lasso_huge_alpha_is_zero() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(lasso(&x, &[1.0, 2.0, 3.0], 1e6).unwrap(), vec![0.0, 0.0]);
        assert!(lasso(&x, &[1.0, 2.0, 3.0], 0.0).is_err());
    }
}
