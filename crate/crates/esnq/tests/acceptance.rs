//! End-to-end acceptance checks on the Hénon benchmark. Prints one
//! PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are still run and still print FAIL,
//! but do not fail the process unless `ESNQ_ACCEPTANCE_STRICT` is set.

#[path = "../../core/tests/support/mod.rs"]
mod brute_force;

use std::cell::OnceCell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use esnq::exec::RayonExecutor;
use esnq_core::data::{gen_henon, normalize, Dataset, HenonParams, Split};
use esnq_core::dse::{explore, quantize_for_grid, score_pruner, DseResult, Grid, PrunerOptions};
use esnq_core::exec::Sequential;
use esnq_core::linalg::Matrix;
use esnq_core::quant::{build_thresholds, compute_quant_params, quantize_model};
use esnq_core::reservoir::{init_reservoir, Activation, Architecture, Hyperparams, ReservoirModel};
use esnq_core::rtl::{attach_costs, interpret_netlist, lower};
use esnq_core::sensitivity::{prune, sensitivity_report, PrunerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const RATES: [f64; 7] = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0];
const KNOWN_FAILURES: &[usize] = &[6];

type Check = Result<String, String>;

fn henon() -> Dataset {
    normalize(&gen_henon(5000, &HenonParams::default()).unwrap()).unwrap()
}

fn reference_hp(seed: u64) -> Hyperparams {
    Hyperparams { spectral_radius: 0.9, leaking_rate: 1.0, ncrl: 250, ridge: 1e-8, seed }
}

fn trained(ds: &Dataset, hp: &Hyperparams, n: usize, activation: Activation) -> ReservoirModel {
    let mut m = init_reservoir(hp, &Architecture { n, d_in: ds.d_in(), activation }).unwrap();
    m.fit(&ds.view(Split::Train).unwrap()).unwrap();
    m
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Grid results shared by several criteria.
struct Sweeps {
    /// Sensitivity pruning over `RATES` at q ∈ {4, 6, 8}, with costs, per seed.
    sensitivity: Vec<DseResult>,
}

impl Sweeps {
    fn run(ds: &Dataset, exec: &RayonExecutor) -> Self {
        let grid = Grid { q: vec![4, 6, 8], p: RATES.to_vec(), pruners: vec![PrunerKind::Sensitivity] };
        let sensitivity = SEEDS
            .iter()
            .map(|&seed| {
                let model = trained(ds, &reference_hp(seed), 50, Activation::Tanh);
                let mut r = explore(&model, ds, &grid, &PrunerOptions::default(), exec, &mut |_| {}).unwrap();
                attach_costs(&mut r);
                r
            })
            .collect();
        Self { sensitivity }
    }
}

fn float_baseline(ds: &Dataset) -> Check {
    let rmse: Vec<f64> = SEEDS
        .iter()
        .map(|&s| trained(ds, &reference_hp(s), 50, Activation::Tanh).evaluate(&ds.view(Split::Test).unwrap()).unwrap().value)
        .collect();
    let m = median(rmse.clone());
    ensure(m <= 0.05, format!("median test RMSE {m:.4} (seeds: {rmse:.4?}), bound 0.05"))
}

fn sensitivity_oracle() -> Check {
    let ds = normalize(&gen_henon(240, &HenonParams::default()).unwrap()).unwrap();
    let calib = ds.view(Split::Holdout).unwrap();
    let (mut models, mut weights) = (0, 0);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.gen_range(1..=5);
        let ncrl = rng.gen_range(1..=(n * n).min(8));
        let act = if seed % 2 == 0 { Activation::Tanh } else { Activation::HardTanh };
        let hp = Hyperparams { spectral_radius: 0.9, leaking_rate: 1.0, ncrl, ridge: 1e-6, seed };
        let m = trained(&ds, &hp, n, act);
        for q in 1..=3 {
            let qm = quantize_model(&m, q, &ds).unwrap();
            let report = sensitivity_report(&qm, &calib, "holdout", &Sequential).unwrap();
            let oracle = brute_force::brute_force_scores(&qm, &calib);
            for (s, o) in report.scores.iter().zip(&oracle) {
                if s.score.to_bits() != o.to_bits() {
                    return Err(format!("seed {seed} q {q} weight {:?}: {} vs oracle {}", s.index, s.score, o));
                }
            }
            models += 1;
            weights += oracle.len();
        }
    }
    Ok(format!("{models} models, {weights} weights, all bit-exact"))
}

fn hardtanh_code(q: u32, acc_scale: f64, acc: i64) -> i64 {
    let half = 1i64 << (q - 1);
    let y = (acc as f64 / acc_scale).clamp(-1.0, 1.0);
    ((y * half as f64).round() as i64).clamp(-half, half - 1)
}

fn streamline_exhaustive(ds: &Dataset) -> Check {
    let mut checked = 0u64;
    for q in 1..=8u32 {
        // the accumulator of a trained datapath, plus a spread of scales
        let qm = quantize_model(&trained(ds, &reference_hp(0), 50, Activation::HardTanh), q, ds).unwrap();
        let mut cases = vec![(qm.acc_scale, qm.acc_bits)];
        for max_w in [0.05, 0.37, 1.0, 2.5] {
            let s = compute_quant_params(&[max_w], q).unwrap().scale * (1u64 << (q - 1)) as f64;
            cases.push((s, 2 * q + 7));
        }
        for (acc_scale, bits) in cases {
            let table = build_thresholds(Activation::HardTanh, q, acc_scale).unwrap();
            let (lo, hi) = (-(1i64 << (bits - 1)), (1i64 << (bits - 1)) - 1);
            for acc in lo..=hi {
                let want = hardtanh_code(q, acc_scale, acc);
                if table.apply(acc) != want {
                    return Err(format!("q={q} scale={acc_scale} acc={acc}: {} vs {want}", table.apply(acc)));
                }
            }
            checked += (hi - lo + 1) as u64;
        }
    }
    Ok(format!("{checked} accumulator values over q=1..8, zero mismatches"))
}

fn netlist_bit_exact(ds: &Dataset, exec: &RayonExecutor) -> Check {
    let model = trained(ds, &reference_hp(0), 50, Activation::Tanh);
    let calib = ds.view(Split::Holdout).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut steps = 0usize;
    for q in [4, 6, 8] {
        let qm = quantize_for_grid(&model, q, ds).unwrap();
        let rep = score_pruner(&qm, PrunerKind::Sensitivity, &calib, &PrunerOptions::default(), exec).unwrap();
        for p in [0.0, 15.0, 45.0, 75.0, 90.0] {
            let pruned = prune(&qm, &rep.ranking, p).unwrap();
            let net = lower(&pruned).unwrap();
            for k in 0..100 {
                let len = 100;
                let u = Matrix::from_vec(len, 1, (0..len).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();
                let codes: Vec<Vec<i64>> = (0..len).map(|t| pruned.quantize_input(u.row(t))).collect();
                let hw = interpret_netlist(&net, &codes).map_err(|e| format!("q={q} p={p}: {e}"))?;
                if hw != pruned.forward(&u).unwrap().outputs {
                    return Err(format!("q={q} p={p} sequence {k}: netlist output differs"));
                }
                steps += len;
            }
        }
    }
    Ok(format!("15 configs × 100 sequences ({steps} steps), bit-exact"))
}

fn pruner_ordering(ds: &Dataset, exec: &RayonExecutor) -> Check {
    let grid = Grid { q: vec![8], p: vec![45.0, 75.0], pruners: PrunerKind::ALL.to_vec() };
    let results: Vec<DseResult> = SEEDS
        .iter()
        .map(|&seed| {
            let model = trained(ds, &reference_hp(seed), 50, Activation::Tanh);
            let opts = PrunerOptions { random_seed: seed, ..PrunerOptions::default() };
            explore(&model, ds, &grid, &opts, exec, &mut |_| {}).unwrap()
        })
        .collect();
    let mut ok = true;
    let mut lines = Vec::new();
    for p in [45.0, 75.0] {
        let med = |k: PrunerKind| median(results.iter().map(|r| r.get(8, p, k).unwrap().perf.unwrap().value).collect());
        let meds: Vec<(PrunerKind, f64)> = PrunerKind::ALL.iter().map(|&k| (k, med(k))).collect();
        let sens = med(PrunerKind::Sensitivity);
        let worst = meds.iter().map(|m| m.1).fold(f64::MIN, f64::max);
        let good = sens <= med(PrunerKind::Random) && sens < worst;
        ok &= good;
        let table: Vec<String> = meds.iter().map(|(k, v)| format!("{}={v:.3}", k.name())).collect();
        lines.push(format!("p={p}: {}", table.join(" ")));
    }
    ensure(ok, lines.join("; "))
}

fn graceful_degradation(sweeps: &Sweeps) -> Check {
    let meds: Vec<f64> = RATES
        .iter()
        .map(|&p| median(sweeps.sensitivity.iter().map(|r| r.get(8, p, PrunerKind::Sensitivity).unwrap().perf.unwrap().value).collect()))
        .collect();
    let violations: Vec<String> = (1..meds.len())
        .filter(|&i| meds[i] < 0.9 * meds[i - 1])
        .map(|i| format!("p{}→p{}: {:.3} < 0.9·{:.3}", RATES[i - 1], RATES[i], meds[i], meds[i - 1]))
        .collect();
    ensure(violations.is_empty(), format!("medians {meds:.3?}; violations: [{}]", violations.join(", ")))
}

fn cost_monotonicity(sweeps: &Sweeps) -> Check {
    let mut summary = Vec::new();
    for (seed, r) in SEEDS.iter().zip(&sweeps.sensitivity) {
        for q in [4, 6, 8] {
            let luts: Vec<u64> =
                RATES.iter().map(|&p| r.get(q, p, PrunerKind::Sensitivity).unwrap().cost.unwrap().est_luts).collect();
            if !luts.windows(2).all(|w| w[1] < w[0]) {
                return Err(format!("seed {seed} q={q}: est_luts {luts:?}"));
            }
            if *seed == 0 {
                summary.push(format!("q={q}: {}→{}", luts[0], luts[luts.len() - 1]));
            }
        }
    }
    Ok(format!("strictly decreasing for 5 seeds × q∈{{4,6,8}}; seed 0 {}", summary.join(", ")))
}

fn dse_integrity(ds: &Dataset, sweeps: &Sweeps, exec: &RayonExecutor) -> Check {
    let model = trained(ds, &reference_hp(0), 50, Activation::Tanh);
    let ps = [15.0, 30.0, 45.0, 60.0, 75.0, 90.0];
    let grid = Grid { q: vec![4, 6, 8], p: ps.to_vec(), pruners: vec![PrunerKind::Sensitivity] };
    let r = explore(&model, ds, &grid, &PrunerOptions::default(), exec, &mut |_| {}).unwrap();
    if r.configs.len() != 18 || r.failed_cells().count() != 0 {
        return Err(format!("{} configs, {} failed", r.configs.len(), r.failed_cells().count()));
    }
    for q in [4, 6, 8] {
        let masks: Vec<_> = ps.iter().map(|&p| r.get(q, p, PrunerKind::Sensitivity).unwrap().mask.clone().unwrap()).collect();
        if !masks.windows(2).all(|w| w[0].pruned.iter().all(|i| w[1].pruned.binary_search(i).is_ok())) {
            return Err(format!("masks at q={q} are not nested"));
        }
    }
    for r in &sweeps.sensitivity {
        for q in [4, 6, 8] {
            let c = r.get(q, 0.0, PrunerKind::Sensitivity).unwrap();
            if c.perf.unwrap().value.to_bits() != c.base_perf.unwrap().value.to_bits() {
                return Err(format!("seed {} q={q}: p=0 perf differs from base", r.seed));
            }
        }
    }
    Ok("18 configs, nested masks per q, p=0 perf bit-equal to base for 5 seeds".into())
}

fn determinism() -> Check {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/henon.toml");
    let dir = tempfile::TempDir::new().unwrap();
    let run = |jobs: &str| {
        let out = dir.path().join(format!("jobs{jobs}"));
        let status = Command::new(env!("CARGO_BIN_EXE_esnq"))
            .args(["run", "--quiet", "--jobs", jobs, "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "run with --jobs {jobs}: {status}");
        out
    };
    let (a, b) = (run("1"), run("4"));
    for f in ["report/report.csv", "report/report.json"] {
        if std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap() {
            return Err(format!("{f} differs between --jobs 1 and --jobs 4"));
        }
    }
    Ok("report.csv and report.json byte-identical for --jobs 1 and --jobs 4".into())
}

fn guarded(f: impl FnOnce() -> Check) -> Check {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    })
}

fn main() -> ExitCode {
    let strict = std::env::var_os("ESNQ_ACCEPTANCE_STRICT").is_some();
    let exec = RayonExecutor::new(None);
    let ds = henon();
    let sweeps = OnceCell::new();
    let shared = || sweeps.get_or_init(|| Sweeps::run(&ds, &exec));
    let mut unexpected = 0;
    for id in 1..=9usize {
        let start = Instant::now();
        let (name, outcome) = match id {
            1 => ("float baseline", guarded(|| float_baseline(&ds))),
            2 => ("sensitivity oracle", guarded(sensitivity_oracle)),
            3 => ("streamline exhaustive (hardtanh)", guarded(|| streamline_exhaustive(&ds))),
            4 => ("netlist bit-exactness", guarded(|| netlist_bit_exact(&ds, &exec))),
            5 => ("pruner ordering", guarded(|| pruner_ordering(&ds, &exec))),
            6 => ("graceful degradation", guarded(|| graceful_degradation(shared()))),
            7 => ("cost monotonicity", guarded(|| cost_monotonicity(shared()))),
            8 => ("dse integrity", guarded(|| dse_integrity(&ds, shared(), &exec))),
            _ => ("determinism", guarded(determinism)),
        };
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_FAILURES.contains(&id);
        match outcome {
            Ok(detail) => println!("PASS {id} {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                let note = if known && !strict { " (known deviation, not counted)" } else { "" };
                println!("FAIL {id} {name} [{secs:.1}s]{note}: {detail}");
                if !known || strict {
                    unexpected += 1;
                }
            }
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
