//! Random hyperparameter search.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::metrics::Performance;
use crate::reservoir::{init_reservoir, Architecture, Hyperparams};

/// Closed sampling ranges. `ridge` is sampled log-uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub spectral_radius: (f64, f64),
    pub leaking_rate: (f64, f64),
    pub ncrl: (usize, usize),
    pub ridge: (f64, f64),
}

impl SearchSpace {
    /// Default ranges for an `n`-neuron reservoir.
    pub fn for_size(n: usize) -> Self {
        Self { spectral_radius: (0.1, 1.5), leaking_rate: (0.1, 1.0), ncrl: (n, 10 * n), ridge: (1e-12, 1e-2) }
    }

    /// A space containing exactly one configuration.
    pub fn point(hp: &Hyperparams) -> Self {
        Self {
            spectral_radius: (hp.spectral_radius, hp.spectral_radius),
            leaking_rate: (hp.leaking_rate, hp.leaking_rate),
            ncrl: (hp.ncrl, hp.ncrl),
            ridge: (hp.ridge, hp.ridge),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let ordered = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
        if !ordered(self.spectral_radius) || self.spectral_radius.0 <= 0.0 {
            return Err(Error::InvalidArgument("empty search space: spectral_radius"));
        }
        if !ordered(self.leaking_rate) || self.leaking_rate.0 <= 0.0 || self.leaking_rate.1 > 1.0 {
            return Err(Error::InvalidArgument("empty search space: leaking_rate"));
        }
        if self.ncrl.0 == 0 || self.ncrl.0 > self.ncrl.1 || self.ncrl.0 > n * n {
            return Err(Error::InvalidArgument("empty search space: ncrl"));
        }
        if !ordered(self.ridge) || self.ridge.0 <= 0.0 {
            return Err(Error::InvalidArgument("empty search space: ridge"));
        }
        Ok(())
    }

    fn sample(&self, n: usize, rng: &mut ChaCha8Rng, seed: u64) -> Hyperparams {
        let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if lo == hi { lo } else { rng.gen_range(lo..=hi) };
        let spectral_radius = uniform(rng, self.spectral_radius);
        let leaking_rate = uniform(rng, self.leaking_rate);
        let ncrl = rng.gen_range(self.ncrl.0..=self.ncrl.1.min(n * n));
        let ridge = if self.ridge.0 == self.ridge.1 {
            self.ridge.0
        } else {
            libm::exp(rng.gen_range(libm::log(self.ridge.0)..=libm::log(self.ridge.1)))
        };
        Hyperparams { spectral_radius, leaking_rate, ncrl, ridge, seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub hp: Hyperparams,
    pub perf: Option<Performance>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Hyperparams,
    pub best_perf: Performance,
    pub best_trial: usize,
    pub trials: Vec<Trial>,
}

/// Samples `n_trials` configurations, trains each on the fitting part of
/// the training split and scores it on the held-out tail. Every trial uses
/// the reservoir seed `seed`, so trials differ only in hyperparameters.
///
/// Failed trials stay in the log with their error. Ties go to the earliest
/// trial.
pub fn random_search(
    space: &SearchSpace,
    n_trials: usize,
    ds: &Dataset,
    arch: &Architecture,
    seed: u64,
    exec: &impl Executor,
) -> Result<SearchResult> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1"));
    }
    space.validate(arch.n)?;
    let fit = ds.view(Split::Fit)?;
    let holdout = ds.view(Split::Holdout)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs: Vec<Hyperparams> = (0..n_trials).map(|_| space.sample(arch.n, &mut rng, seed)).collect();
    let outcomes = exec.map(n_trials, &|i| -> Result<Performance> {
        let mut m = init_reservoir(&configs[i], arch)?;
        m.fit(&fit)?;
        m.evaluate(&holdout)
    });
    let mut trials = Vec::with_capacity(n_trials);
    let mut best: Option<(usize, Performance)> = None;
    for (index, (hp, outcome)) in configs.into_iter().zip(outcomes).enumerate() {
        let (perf, error) = match outcome {
            Ok(p) if p.value.is_finite() => (Some(p), None),
            Ok(p) => (None, Some(alloc::format!("non-finite performance {}", p.value))),
            Err(e) => (None, Some(e.to_string())),
        };
        if let Some(p) = perf {
            if best.map_or(true, |(_, b)| p.better_than(&b)) {
                best = Some((index, p));
            }
        }
        trials.push(Trial { index, hp, perf, error });
    }
    let (best_trial, best_perf) = best.ok_or(Error::Internal("every search trial failed".to_string()))?;
    Ok(SearchResult { best: trials[best_trial].hp, best_perf, best_trial, trials })
}
