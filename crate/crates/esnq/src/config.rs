//! Experiment configuration (TOML).
//!
//! ```toml
//! schema_version = 1
//! seed = 0
//! out_dir = "out"
//!
//! [dataset]
//! kind = "henon"          # or "synthetic", "csv"
//! n_steps = 5000
//!
//! [model]
//! n = 50
//! spectral_radius = 0.9
//! ncrl = 250
//! ridge = 1e-8
//!
//! [grid]
//! q = [4, 6, 8]
//! p = [15, 30, 45, 60, 75, 90]
//! pruners = ["sensitivity"]
//! ```
//!
//! Optional tables: `[search]` (random hyperparameter search replacing
//! the `[model]` values), `[pruners]` (baseline settings) and `[report]`.
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use esnq_core::data::{gen_henon, gen_synthetic_classification, normalize, Dataset, HenonParams, SyntheticSpec};
use esnq_core::dse::{Grid, PrunerOptions};
use esnq_core::quant::MAX_BITS;
use esnq_core::reservoir::{Activation, Architecture, Hyperparams};
use esnq_core::search::SearchSpace;
use esnq_core::sensitivity::PrunerKind;
use serde::{Deserialize, Serialize};

use crate::artifact::SCHEMA_VERSION;
use crate::csvio::load_dataset_csv;
use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub search: Option<SearchConfig>,
    pub grid: GridConfig,
    #[serde(default)]
    pub pruners: PrunerConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Henon {
        #[serde(default = "default_henon_steps")]
        n_steps: usize,
        #[serde(default = "default_henon_a")]
        a: f64,
        #[serde(default = "default_henon_b")]
        b: f64,
        #[serde(default = "default_henon_transient")]
        transient: usize,
    },
    Synthetic {
        n_classes: usize,
        seq_len: usize,
        n_train: usize,
        n_test: usize,
        #[serde(default)]
        noise: f64,
        /// Defaults to the experiment seed.
        #[serde(default)]
        seed: Option<u64>,
    },
    Csv {
        path: PathBuf,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
    },
}

fn default_henon_steps() -> usize {
    5000
}
fn default_henon_a() -> f64 {
    HenonParams::default().a
}
fn default_henon_b() -> f64 {
    HenonParams::default().b
}
fn default_henon_transient() -> usize {
    HenonParams::default().transient
}
fn default_train_fraction() -> f64 {
    0.8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    pub spectral_radius: f64,
    #[serde(default = "default_leaking_rate")]
    pub leaking_rate: f64,
    pub ncrl: usize,
    pub ridge: f64,
}

fn default_activation() -> Activation {
    Activation::Tanh
}
fn default_leaking_rate() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub n_trials: usize,
    #[serde(default)]
    pub spectral_radius: Option<(f64, f64)>,
    #[serde(default)]
    pub leaking_rate: Option<(f64, f64)>,
    #[serde(default)]
    pub ncrl: Option<(usize, usize)>,
    #[serde(default)]
    pub ridge: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub q: Vec<u32>,
    pub p: Vec<f64>,
    #[serde(default = "default_pruners")]
    pub pruners: Vec<String>,
}

fn default_pruners() -> Vec<String> {
    vec![PrunerKind::Sensitivity.name().to_string()]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrunerConfig {
    pub mi_bins: Option<usize>,
    pub pca_components: Option<usize>,
    pub lasso_alpha: Option<f64>,
    /// Defaults to the experiment seed.
    pub random_seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(CliError::Usage(format!("unknown report format `{s}` (supported: csv, json)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default = "default_formats")]
    pub formats: Vec<ReportFormat>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { formats: default_formats() }
    }
}

fn default_formats() -> Vec<ReportFormat> {
    vec![ReportFormat::Csv, ReportFormat::Json]
}

impl ExperimentConfig {
    /// Parses and validates a config file, resolving relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without resolving paths or checking files.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let span = e.span().map(|s| format!(" (bytes {}..{})", s.start, s.end)).unwrap_or_default();
            CliError::config("<document>", format!("{}{span}", e.message()))
        })
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if self.out_dir.is_relative() {
            self.out_dir = base.join(&self.out_dir);
        }
        if let DatasetConfig::Csv { path, .. } = &mut self.dataset {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    /// Range and consistency checks; each error names the offending field.
    pub fn validate(&self) -> Result<()> {
        let err = |path: &str, msg: String| Err(CliError::config(path, msg));
        if self.schema_version != SCHEMA_VERSION {
            return err("schema_version", format!("{} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        match &self.dataset {
            DatasetConfig::Henon { n_steps, a, b, .. } => {
                if *n_steps < 10 {
                    return err("dataset.n_steps", format!("{n_steps} is too short (minimum 10)"));
                }
                if !a.is_finite() || !b.is_finite() {
                    return err("dataset.a", "map parameters must be finite".into());
                }
            }
            DatasetConfig::Synthetic { n_classes, seq_len, n_train, n_test, noise, .. } => {
                if *n_classes < 2 {
                    return err("dataset.n_classes", format!("{n_classes} must be at least 2"));
                }
                for (name, v) in [("seq_len", seq_len), ("n_train", n_train), ("n_test", n_test)] {
                    if *v == 0 {
                        return err(&format!("dataset.{name}"), "must be positive".into());
                    }
                }
                if !(*noise >= 0.0 && noise.is_finite()) {
                    return err("dataset.noise", format!("{noise} must be a finite nonnegative number"));
                }
            }
            DatasetConfig::Csv { path, train_fraction } => {
                if !path.is_file() {
                    return err("dataset.path", format!("{} does not exist", path.display()));
                }
                if !(*train_fraction > 0.0 && *train_fraction < 1.0) {
                    return err("dataset.train_fraction", format!("{train_fraction} must lie in (0, 1)"));
                }
            }
        }

        let m = &self.model;
        if m.n == 0 {
            return err("model.n", "must be positive".into());
        }
        if let Err(e) = self.hyperparams().validate(m.n) {
            let field = match &e {
                esnq_core::Error::OutOfRange { name, .. } => format!("model.{name}"),
                esnq_core::Error::InvalidSparsity { .. } => "model.ncrl".into(),
                _ => "model".into(),
            };
            return err(&field, e.to_string());
        }
        if m.leaking_rate != 1.0 {
            return err("model.leaking_rate", "the integer datapath implements lr = 1 only".into());
        }

        if let Some(s) = &self.search {
            if s.n_trials == 0 {
                return err("search.n_trials", "must be at least 1".into());
            }
            if s.leaking_rate.is_some_and(|r| r != (1.0, 1.0)) {
                return err("search.leaking_rate", "the integer datapath implements lr = 1 only".into());
            }
            if let Err(e) = self.search_space().validate(m.n) {
                let field = match &e {
                    esnq_core::Error::InvalidArgument(msg) => {
                        format!("search.{}", msg.rsplit(": ").next().unwrap_or_default())
                    }
                    _ => "search".into(),
                };
                return err(&field, e.to_string());
            }
        }

        let g = &self.grid;
        if g.q.is_empty() {
            return err("grid.q", "needs at least one bit-width".into());
        }
        for (i, &q) in g.q.iter().enumerate() {
            if !(1..=MAX_BITS).contains(&q) {
                return err(&format!("grid.q[{i}]"), format!("{q} is outside [1, {MAX_BITS}]"));
            }
            if g.q[..i].contains(&q) {
                return err(&format!("grid.q[{i}]"), format!("duplicate value {q}"));
            }
        }
        if g.p.is_empty() {
            return err("grid.p", "needs at least one pruning rate".into());
        }
        for (i, &p) in g.p.iter().enumerate() {
            if !(0.0..=100.0).contains(&p) {
                return err(&format!("grid.p[{i}]"), format!("{p} is outside [0, 100]"));
            }
            if g.p[..i].contains(&p) {
                return err(&format!("grid.p[{i}]"), format!("duplicate value {p}"));
            }
        }
        if g.pruners.is_empty() {
            return err("grid.pruners", "needs at least one pruner".into());
        }
        for (i, name) in g.pruners.iter().enumerate() {
            if PrunerKind::from_name(name).is_none() {
                let known: Vec<&str> = PrunerKind::ALL.iter().map(|k| k.name()).collect();
                return err(&format!("grid.pruners[{i}]"), format!("unknown pruner `{name}` (known: {})", known.join(", ")));
            }
            if g.pruners[..i].contains(name) {
                return err(&format!("grid.pruners[{i}]"), format!("duplicate pruner `{name}`"));
            }
        }

        let o = &self.pruners;
        if o.mi_bins.is_some_and(|b| b < 2) {
            return err("pruners.mi_bins", "must be at least 2".into());
        }
        if o.pca_components == Some(0) {
            return err("pruners.pca_components", "must be at least 1".into());
        }
        if o.lasso_alpha.is_some_and(|a| !(a > 0.0 && a.is_finite())) {
            return err("pruners.lasso_alpha", "must be a positive finite number".into());
        }
        if self.report.formats.is_empty() {
            return err("report.formats", "needs at least one format".into());
        }
        Ok(())
    }

    pub fn architecture(&self, d_in: usize) -> Architecture {
        Architecture { n: self.model.n, d_in, activation: self.model.activation }
    }

    /// Hyperparameters from the `[model]` table.
    pub fn hyperparams(&self) -> Hyperparams {
        let m = &self.model;
        Hyperparams {
            spectral_radius: m.spectral_radius,
            leaking_rate: m.leaking_rate,
            ncrl: m.ncrl,
            ridge: m.ridge,
            seed: self.seed,
        }
    }

    /// Sampling ranges; unset ranges fall back to the defaults for `n`,
    /// except the leaking rate, which stays at the model's value.
    pub fn search_space(&self) -> SearchSpace {
        let d = SearchSpace::for_size(self.model.n);
        let lr = self.model.leaking_rate;
        match &self.search {
            Some(s) => SearchSpace {
                spectral_radius: s.spectral_radius.unwrap_or(d.spectral_radius),
                leaking_rate: s.leaking_rate.unwrap_or((lr, lr)),
                ncrl: s.ncrl.unwrap_or(d.ncrl),
                ridge: s.ridge.unwrap_or(d.ridge),
            },
            None => SearchSpace::point(&self.hyperparams()),
        }
    }

    pub fn grid(&self) -> Grid {
        Grid {
            q: self.grid.q.clone(),
            p: self.grid.p.clone(),
            pruners: self.grid.pruners.iter().filter_map(|n| PrunerKind::from_name(n)).collect(),
        }
    }

    pub fn pruner_options(&self) -> PrunerOptions {
        let d = PrunerOptions::default();
        let o = &self.pruners;
        PrunerOptions {
            mi_bins: o.mi_bins.unwrap_or(d.mi_bins),
            pca_components: o.pca_components.unwrap_or(d.pca_components),
            lasso_alpha: o.lasso_alpha.unwrap_or(d.lasso_alpha),
            random_seed: o.random_seed.unwrap_or(self.seed),
        }
    }

    /// Builds the raw (unnormalized) dataset.
    pub fn raw_dataset(&self) -> Result<Dataset> {
        Ok(match &self.dataset {
            DatasetConfig::Henon { n_steps, a, b, transient } => {
                let p = HenonParams { a: *a, b: *b, transient: *transient, ..HenonParams::default() };
                gen_henon(*n_steps, &p)?
            }
            DatasetConfig::Synthetic { n_classes, seq_len, n_train, n_test, noise, seed } => {
                gen_synthetic_classification(&SyntheticSpec {
                    n_classes: *n_classes,
                    seq_len: *seq_len,
                    n_train: *n_train,
                    n_test: *n_test,
                    noise: *noise,
                    seed: seed.unwrap_or(self.seed),
                })?
            }
            DatasetConfig::Csv { path, train_fraction } => {
                let name = path.file_stem().map_or("csv".into(), |s| s.to_string_lossy().into_owned());
                load_dataset_csv(path, &name, *train_fraction)?
            }
        })
    }

    /// Dataset as used by every stage: generated or loaded, then
    /// standardized on the training split.
    pub fn dataset(&self) -> Result<Dataset> {
        Ok(normalize(&self.raw_dataset()?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HENON: &str = r#"
schema_version = 1
seed = 3
[dataset]
kind = "henon"
n_steps = 500
[model]
n = 10
spectral_radius = 0.9
ncrl = 30
ridge = 1e-8
[grid]
q = [4, 8]
p = [0, 50]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::parse(HENON).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
        assert_eq!(cfg.model.activation, Activation::Tanh);
        assert_eq!(cfg.grid().pruners, vec![PrunerKind::Sensitivity]);
        assert_eq!(cfg.pruner_options().random_seed, 3);
        assert_eq!(cfg.report.formats, vec![ReportFormat::Csv, ReportFormat::Json]);
        assert_eq!(cfg.search_space(), SearchSpace::point(&cfg.hyperparams()));
    }

    fn field_of(text: &str) -> String {
        let cfg = ExperimentConfig::parse(text).unwrap();
        match cfg.validate().unwrap_err() {
            CliError::Config { path, .. } => path,
            e => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn validation_names_the_field() {
        assert_eq!(field_of(&HENON.replace("q = [4, 8]", "q = [9]")), "grid.q[0]");
        assert_eq!(field_of(&HENON.replace("q = [4, 8]", "q = [4, 4]")), "grid.q[1]");
        assert_eq!(field_of(&HENON.replace("p = [0, 50]", "p = [0, 101]")), "grid.p[1]");
        assert_eq!(field_of(&HENON.replace("ncrl = 30", "ncrl = 101")), "model.ncrl");
        assert_eq!(field_of(&HENON.replace("ridge = 1e-8", "ridge = -1.0")), "model.ridge");
        assert_eq!(field_of(&format!("{HENON}pruners = [\"magic\"]\n")), "grid.pruners[0]");
        assert_eq!(field_of(&HENON.replace("schema_version = 1", "schema_version = 2")), "schema_version");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ExperimentConfig::parse(&HENON.replace("n = 10", "n = 10\nsize = 3")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("size"), "{e}");
    }

    #[test]
    fn search_space_falls_back_to_defaults() {
        let cfg = ExperimentConfig::parse(&format!("{HENON}[search]\nn_trials = 4\nridge = [1e-9, 1e-3]\n")).unwrap();
        cfg.validate().unwrap();
        let s = cfg.search_space();
        assert_eq!(s.ridge, (1e-9, 1e-3));
        assert_eq!(s.leaking_rate, (1.0, 1.0));
        assert_eq!(s.ncrl, SearchSpace::for_size(10).ncrl);
    }
}
