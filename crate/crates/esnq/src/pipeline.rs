//! Pipeline stages. Each stage reads its inputs from the artifacts of the
//! previous stages under the output directory and writes its own, so a
//! chain of single-stage invocations produces the same files as `run`.
//!
//! ```text
//! out/data/dataset.json             normalized dataset
//! out/data/dataset.csv              the same data in original units
//! out/tune/search.json              random-search log (with [search] only)
//! out/train/model.json              trained float model
//! out/quantize/q{q}.json            quantized model with base performance
//! out/sensitivity/q{q}_{pruner}.json  weight scores and ranking
//! out/prune/cells.json              every grid cell's mask and performance
//! out/prune/q{q}_p{p}_{pruner}.json   pruned model of one cell
//! out/dse/result.json               cells with cost estimates
//! out/dse/timing.json               wall-clock time per stage
//! out/rtl/esn_q{q}_p{p}_{pruner}.v  one module per successful cell
//! out/report/report.{csv,json}      one row per cell
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use esnq_core::data::{denormalize, Dataset, Split};
use esnq_core::dse::{
    evaluate_cells, failed_cells, quantize_for_grid, score_pruner, sort_configs, sorted_axes, AcceleratorConfig,
    Bounds, DseResult, Ranking,
};
use esnq_core::exec::Executor;
use esnq_core::quant::QuantizedModel;
use esnq_core::reservoir::{init_reservoir, ReservoirModel};
use esnq_core::rtl::{attach_costs, emit_verilog, lower};
use esnq_core::search::{random_search, SearchResult};
use esnq_core::sensitivity::{PrunerKind, SensitivityReport};
use serde::{Deserialize, Serialize};

use crate::artifact::{read_json, write_json, write_text, Outcome};
use crate::config::{ExperimentConfig, ReportFormat};
use crate::csvio::save_dataset_csv;
use crate::error::{CliError, Result};
use crate::report::{render, report_rows};

pub const STAGES: [&str; 9] =
    ["gen-data", "tune", "train", "quantize", "sensitivity", "prune", "dse", "emit-rtl", "report"];

/// Everything a stage needs besides its input artifacts.
pub struct Context<'a, E: Executor> {
    pub cfg: &'a ExperimentConfig,
    pub out: PathBuf,
    pub exec: &'a E,
    /// Report formats; defaults to the config's `[report]` list.
    pub formats: Vec<ReportFormat>,
    pub bounds: Option<Bounds>,
    /// Suppresses progress lines.
    pub quiet: bool,
}

impl<'a, E: Executor> Context<'a, E> {
    pub fn new(cfg: &'a ExperimentConfig, exec: &'a E) -> Self {
        Self {
            cfg,
            out: cfg.out_dir.clone(),
            exec,
            formats: cfg.report.formats.clone(),
            bounds: None,
            quiet: false,
        }
    }

    fn path(&self, stage: &str, name: &str) -> PathBuf {
        self.out.join(stage).join(name)
    }

    fn seed(&self) -> u64 {
        self.cfg.seed
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

/// What a stage reports back besides its files.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct StageOutcome {
    /// Grid cells carrying an error record.
    pub failed_cells: Vec<String>,
    pub warnings: Vec<String>,
}

fn p_label(p: f64) -> String {
    format!("{p}").replace('.', "_")
}

fn cell_name(q: u32, p: f64, pruner: PrunerKind) -> String {
    format!("q{q}_p{}_{}", p_label(p), pruner.name())
}

fn describe(c: &AcceleratorConfig) -> String {
    format!("q={} p={} pruner={}: {}", c.q, c.p, c.pruner.name(), c.error.as_deref().unwrap_or("ok"))
}

pub fn load_dataset<E: Executor>(ctx: &Context<E>) -> Result<Dataset> {
    Ok(read_json(&ctx.path("data", "dataset.json"), "dataset")?.data)
}

pub fn gen_data<E: Executor>(ctx: &Context<E>) -> Result<StageOutcome> {
    let ds = ctx.cfg.dataset()?;
    write_json(&ctx.path("data", "dataset.json"), "dataset", ctx.seed(), &ds)?;
    save_dataset_csv(&denormalize(&ds), &ctx.path("data", "dataset.csv"))?;
    Ok(StageOutcome::default())
}

/// Random search over the `[search]` ranges; without that table the stage
/// does nothing and training uses the `[model]` values.
pub fn tune<E: Executor>(ctx: &Context<E>) -> Result<StageOutcome> {
    let Some(search) = &ctx.cfg.search else {
        ctx.note("tune: no [search] table, using [model] hyperparameters");
        return Ok(StageOutcome::default());
    };
    let ds = load_dataset(ctx)?;
    let arch = ctx.cfg.architecture(ds.d_in());
    let result = random_search(&ctx.cfg.search_space(), search.n_trials, &ds, &arch, ctx.seed(), ctx.exec)?;
    write_json(&ctx.path("tune", "search.json"), "search", ctx.seed(), &result)?;
    Ok(StageOutcome::default())
}

pub fn train<E: Executor>(ctx: &Context<E>) -> Result<StageOutcome> {
    let ds = load_dataset(ctx)?;
    let hp = match ctx.cfg.search {
        Some(_) => read_json::<SearchResult>(&ctx.path("tune", "search.json"), "search")?.data.best,
        None => ctx.cfg.hyperparams(),
    };
    let mut model = init_reservoir(&hp, &ctx.cfg.architecture(ds.d_in()))?;
    model.fit(&ds.view(Split::Train)?)?;
    write_json(&ctx.path("train", "model.json"), "model", ctx.seed(), &model)?;
    Ok(StageOutcome::default())
}

fn load_model<E: Executor>(ctx: &Context<E>) -> Result<ReservoirModel> {
    Ok(read_json(&ctx.path("train", "model.json"), "model")?.data)
}

pub fn quantize<E: Executor>(ctx: &Context<E>) -> Result<StageOutcome> {
    let ds = load_dataset(ctx)?;
    let model = load_model(ctx)?;
    let (qs, _, _) = sorted_axes(&ctx.cfg.grid());
    let outcomes = ctx.exec.map(qs.len(), &|i| Outcome::from_result(quantize_for_grid(&model, qs[i], &ds)));
    for (&q, outcome) in qs.iter().zip(&outcomes) {
        write_json(&ctx.path("quantize", &format!("q{q}.json")), "quantized_model", ctx.seed(), outcome)?;
    }
    Ok(StageOutcome::default())
}

fn load_quantized<E: Executor>(ctx: &Context<E>, q: u32) -> Result<std::result::Result<QuantizedModel, String>> {
    let env = read_json::<Outcome<QuantizedModel>>(&ctx.path("quantize", &format!("q{q}.json")), "quantized_model")?;
    Ok(env.data.into_result())
}

pub fn sensitivity<E: Executor>(ctx: &Context<E>) -> Result<StageOutcome> {
    let ds = load_dataset(ctx)?;
    let calib = ds.view(Split::Holdout)?;
    let opts = ctx.cfg.pruner_options();
    let (qs, _, kinds) = sorted_axes(&ctx.cfg.grid());
    for &q in &qs {
        let qm = load_quantized(ctx, q)?;
        for &kind in &kinds {
            let ranking: Ranking = match &qm {
                Ok(qm) => score_pruner(qm, kind, &calib, &opts, ctx.exec).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            };
            let name = format!("q{q}_{}.json", kind.name());
            write_json(&ctx.path("sensitivity", &name), "ranking", ctx.seed(), &Outcome::from_result(ranking))?;
        }
    }
    Ok(StageOutcome::default())
}

fn load_ranking<E: Executor>(ctx: &Context<E>, q: u32, kind: PrunerKind) -> Result<Ranking> {
    let path = ctx.path("sensitivity", &format!("q{q}_{}.json", kind.name()));
    Ok(read_json::<Outcome<SensitivityReport>>(&path, "ranking")?.data.into_result())
}

pub fn prune<E: Executor>(ctx: &Context<E>) -> Result<StageOutcome> {
    let ds = load_dataset(ctx)?;
    let test = ds.view(Split::Test)?;
    let (qs, ps, kinds) = sorted_axes(&ctx.cfg.grid());
    let mut configs = Vec::new();
    for &q in &qs {
        let mut cells = match load_quantized(ctx, q)? {
            Ok(qm) => {
                let rankings =
                    kinds.iter().map(|&k| Ok((k, load_ranking(ctx, q, k)?))).collect::<Result<Vec<_>>>()?;
                evaluate_cells(&qm, &rankings, &ps, &test, ctx.exec)
            }
            Err(e) => failed_cells(q, &ps, &kinds, &e),
        };
        sort_configs(&mut cells);
        configs.extend(cells);
    }
    for c in &configs {
        if let Some(m) = &c.model {
            let name = format!("{}.json", cell_name(c.q, c.p, c.pruner));
            write_json(&ctx.path("prune", &name), "pruned_model", ctx.seed(), m)?;
        }
    }
    write_json(&ctx.path("prune", "cells.json"), "cells", ctx.seed(), &configs)?;
    Ok(StageOutcome { failed_cells: configs.iter().filter(|c| c.error.is_some()).map(describe).collect(), ..Default::default() })
}

fn load_cells<E: Executor>(ctx: &Context<E>) -> Result<Vec<AcceleratorConfig>> {
    let mut cells: Vec<AcceleratorConfig> = read_json(&ctx.path("prune", "cells.json"), "cells")?.data;
    for c in cells.iter_mut().filter(|c| c.error.is_none()) {
        let name = format!("{}.json", cell_name(c.q, c.p, c.pruner));
        c.model = Some(read_json(&ctx.path("prune", &name), "pruned_model")?.data);
    }
    Ok(cells)
}

#[derive(Debug, Serialize, Deserialize)]
struct Timing {
    stage: String,
    elapsed_ms: u128,
}

/// Assembles the exploration result, attaches cost estimates and prints one
/// progress line per cell.
pub fn dse<E: Executor>(ctx: &Context<E>) -> Result<StageOutcome> {
    let start = Instant::now();
    let ds = load_dataset(ctx)?;
    let model = load_model(ctx)?;
    let grid = ctx.cfg.grid();
    let (qs, _, kinds) = sorted_axes(&grid);
    let mut reports = Vec::new();
    for &q in &qs {
        for &k in &kinds {
            if let Ok(r) = load_ranking(ctx, q, k)? {
                reports.push(r);
            }
        }
    }
    let mut result = DseResult {
        dataset: ds.name.clone(),
        grid,
        seed: model.hp.seed,
        configs: load_cells(ctx)?,
        reports,
        warnings: Vec::new(),
    };
    attach_costs(&mut result);
    for c in &result.configs {
        let perf = c.perf.map_or("-".to_string(), |p| format!("{}", p.value));
        let luts = c.cost.map_or(String::new(), |k| format!(" est_luts={}", k.est_luts));
        let err = c.error.as_deref().map_or(String::new(), |e| format!(" error=\"{e}\""));
        ctx.note(&format!("q={} p={} pruner={} perf={perf}{luts}{err}", c.q, c.p, c.pruner.name()));
    }
    write_json(&ctx.path("dse", "result.json"), "dse_result", ctx.seed(), &result)?;
    let timing = Timing { stage: "dse".into(), elapsed_ms: start.elapsed().as_millis() };
    write_json(&ctx.path("dse", "timing.json"), "timing", ctx.seed(), &timing)?;
    Ok(StageOutcome { failed_cells: result.failed_cells().map(describe).collect(), ..Default::default() })
}

pub fn load_result(path: &Path) -> Result<DseResult> {
    Ok(read_json(path, "dse_result")?.data)
}

pub fn module_name(c: &AcceleratorConfig) -> String {
    format!("esn_{}", cell_name(c.q, c.p, c.pruner))
}

pub fn emit_rtl<E: Executor>(ctx: &Context<E>) -> Result<StageOutcome> {
    let result = load_result(&ctx.path("dse", "result.json"))?;
    let mut out = StageOutcome::default();
    for c in &result.configs {
        if c.error.is_some() {
            out.failed_cells.push(describe(c));
            continue;
        }
        let path = ctx.path("prune", &format!("{}.json", cell_name(c.q, c.p, c.pruner)));
        let model: QuantizedModel = read_json(&path, "pruned_model")?.data;
        let name = module_name(c);
        let text = emit_verilog(&lower(&model)?, &name)?;
        write_text(&ctx.path("rtl", &format!("{name}.v")), &text)?;
    }
    Ok(out)
}

pub fn report<E: Executor>(ctx: &Context<E>) -> Result<StageOutcome> {
    let mut result = load_result(&ctx.path("dse", "result.json"))?;
    if let Some(bounds) = &ctx.bounds {
        result = esnq_core::dse::filter_configs(&result, bounds)?;
    }
    let rows = report_rows(&result);
    let mut out = StageOutcome { warnings: result.warnings.clone(), ..Default::default() };
    if rows.is_empty() {
        out.warnings.push("report is empty: no configuration to list".into());
    }
    out.failed_cells = result.failed_cells().map(describe).collect();
    for &f in &ctx.formats {
        write_text(&ctx.path("report", &format!("report.{}", f.extension())), &render(&rows, f)?)?;
    }
    Ok(out)
}

/// Runs one stage by name.
pub fn run_stage<E: Executor>(ctx: &Context<E>, stage: &str) -> Result<StageOutcome> {
    match stage {
        "gen-data" => gen_data(ctx),
        "tune" => tune(ctx),
        "train" => train(ctx),
        "quantize" => quantize(ctx),
        "sensitivity" => sensitivity(ctx),
        "prune" => prune(ctx),
        "dse" => dse(ctx),
        "emit-rtl" => emit_rtl(ctx),
        "report" => report(ctx),
        _ => Err(CliError::Usage(format!("unknown stage `{stage}`"))),
    }
}

/// The whole pipeline, stage after stage. Failed cells are collected from
/// the final report.
pub fn run<E: Executor>(ctx: &Context<E>) -> Result<StageOutcome> {
    let mut warnings = Vec::new();
    let mut last = StageOutcome::default();
    for stage in STAGES {
        last = run_stage(ctx, stage)?;
        warnings.append(&mut last.warnings);
    }
    Ok(StageOutcome { failed_cells: last.failed_cells, warnings })
}
