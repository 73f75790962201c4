use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use esnq_core::dse::Bounds;

use crate::config::{ExperimentConfig, ReportFormat};
use crate::error::{CliError, Result};
use crate::exec::RayonExecutor;
use crate::pipeline::{run, run_stage, Context, StageOutcome};

pub const EXIT_OK: u8 = 0;
pub const EXIT_PARTIAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "esnq", version, about = "Quantize, prune and lower echo state networks to direct-logic RTL")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every stage in order.
    Run(Common),
    /// Generate or load the dataset and normalize it.
    GenData(Common),
    /// Random hyperparameter search (needs a [search] table).
    Tune(Common),
    /// Train the float reservoir readout.
    Train(Common),
    /// Quantize the trained model at every grid bit-width.
    Quantize(Common),
    /// Score weights with every configured pruner.
    Sensitivity(Common),
    /// Prune and evaluate every grid cell.
    Prune(Common),
    /// Assemble the exploration result and attach cost estimates.
    Dse(Common),
    /// Write one Verilog module per successful cell.
    EmitRtl(Common),
    /// Write the report tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Experiment seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Report format, repeatable (overrides `[report] formats`).
    #[arg(long, value_parser = ["csv", "json"])]
    pub format: Vec<String>,
    /// No progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Keep cells with accuracy ≥ bound (classification) or RMSE ≤ bound.
    #[arg(long, allow_negative_numbers = true)]
    pub perf_bound: Option<f64>,
    /// Keep cells with est_luts ≤ bound.
    #[arg(long)]
    pub cost_bound: Option<u64>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Run(c) => ("run", c),
            Command::GenData(c) => ("gen-data", c),
            Command::Tune(c) => ("tune", c),
            Command::Train(c) => ("train", c),
            Command::Quantize(c) => ("quantize", c),
            Command::Sensitivity(c) => ("sensitivity", c),
            Command::Prune(c) => ("prune", c),
            Command::Dse(c) => ("dse", c),
            Command::EmitRtl(c) => ("emit-rtl", c),
            Command::Report(r) => ("report", &r.common),
        }
    }
}

/// Loads the config with command-line overrides applied.
pub fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Executes a parsed command. `Ok` carries failed cells and warnings.
pub fn execute(cli: &Cli) -> Result<StageOutcome> {
    let (stage, common) = cli.command.parts();
    let cfg = load_config(common)?;
    if common.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let exec = RayonExecutor::new(common.jobs);
    let mut ctx = Context::new(&cfg, &exec);
    ctx.quiet = common.quiet;
    if !common.format.is_empty() {
        ctx.formats = common.format.iter().map(|f| ReportFormat::parse(f)).collect::<Result<_>>()?;
    }
    if let Command::Report(r) = &cli.command {
        if r.perf_bound.is_some() || r.cost_bound.is_some() {
            ctx.bounds = Some(Bounds { perf: r.perf_bound, cost: r.cost_bound });
        }
    }
    if stage == "run" {
        run(&ctx)
    } else {
        run_stage(&ctx, stage)
    }
}

/// Parses arguments, runs, prints diagnostics and returns the exit code:
/// 0 success, 1 runtime error, 2 config or usage error, 3 some grid cells
/// failed.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            if outcome.failed_cells.is_empty() {
                EXIT_OK
            } else {
                eprintln!("{} grid cell(s) failed:", outcome.failed_cells.len());
                for c in &outcome.failed_cells {
                    eprintln!("  {c}");
                }
                EXIT_PARTIAL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
