//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria 1–6 and 9 are self-contained and fail the target when red.
//! Criteria 7, 8 and 10 read the benchmark files listed in the data manifest
//! (`$AL_REGRESS_DATA`, default `<workspace>/data/manifest.toml`); missing
//! files make them FAIL with the reason printed, but only fail the target
//! when `ACCEPTANCE_STRICT=1`.

use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use al_regress::dataset::load_dataset;
use al_regress::harness::{run_experiment_on, ExperimentConfig, RegressionConfig, RegressionKind};
use al_regress::oracle::{NoiseKind, OracleConfig};
use al_regress::regression::{fit, stationarity_residual};
use al_regress::strategy::select_ours_sequential;
use al_regress::validate::{check_bound, check_commit_and_q, check_local_search, CheckOutcome};
use al_regress::{Dataset, Manifest, Matrix, NnGraph, StrategyConfig, StrategyKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    needs_data: bool,
    detail: String,
}

fn outcome(id: u32, name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, name, pass, needs_data: false, detail }
}

fn checks_pass(outs: &[CheckOutcome]) -> (bool, String) {
    let pass = outs.iter().all(CheckOutcome::passed);
    let detail = outs
        .iter()
        .map(|o| format!("{} {}/{} ok {}", o.name, o.cases - o.failures, o.cases, o.detail).trim_end().to_string())
        .collect::<Vec<_>>()
        .join("; ");
    (pass, detail)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

// 1. Toy: θ(u) = 9, and labeling u drops a neighbor from 7 to 4.
fn toy() -> Outcome {
    // rows: u=-9, a=-13, 2, 19 in the pool; labeled at -20, 0, 20
    let x = Matrix::from_rows(&[[-9.0], [-13.0], [2.0], [19.0], [-20.0], [0.0], [20.0]]).unwrap();
    let g = NnGraph::build(&[4, 5, 6], &[0, 1, 2, 3], Arc::new(x)).unwrap();
    let before = (g.theta(0).unwrap(), g.theta(1).unwrap());
    let after = g.commit(&[0]).unwrap().theta(1).unwrap();
    let q = g.q_single(0).unwrap();
    let pick = select_ours_sequential(&g).unwrap();
    let pass = before == (9.0, 7.0) && after == 4.0 && q == 12.0 && pick.chosen == [0] && pick.score == 12.0;
    outcome(
        1,
        "toy instance: q_single = 12, point selected",
        pass,
        format!("theta {} -> 0, neighbor {} -> {after}, q = {q}, picked {:?}", before.0, before.1, pick.chosen),
    )
}

fn bound() -> Outcome {
    let (o, t) = timed(|| check_bound(2, 10_000).unwrap());
    let pass = o.passed() && t < Duration::from_secs(1);
    outcome(2, "L1 error bound, 10000 draws, < 1 s", pass, format!("{} violations, {t:.2?}", o.failures))
}

fn oracle_equivalence() -> Outcome {
    let (outs, t) = timed(|| check_commit_and_q(0, 200).unwrap());
    let (ok, detail) = checks_pass(&outs);
    outcome(3, "commit/Q vs rebuild, 200 instances, < 5 s", ok && t < Duration::from_secs(5), format!("{detail}; {t:.2?}"))
}

fn local_search() -> (Outcome, Outcome) {
    let (outs, t) = timed(|| check_local_search(1, 100).unwrap());
    let (ok, detail) = checks_pass(&outs[..2]);
    let dual = &outs[2];
    (
        outcome(4, "local search H' <= 5 x optimum, improves seed, < 30 s", ok && t < Duration::from_secs(30), format!("{detail}; {t:.2?}")),
        outcome(5, "Q/H' duality is exact", dual.passed(), format!("{}/{} exact", dual.cases - dual.failures, dual.cases)),
    )
}

fn regression() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (m, d) = (100, 10);
    let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let x = Matrix::new(m, d, (0..m * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let y: Vec<f64> = x.iter_rows().map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 2.0).collect();
    let (ls, _) = fit(&x, &y, 0.0).unwrap();
    let num: f64 = ls.weights.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let rel_w = num / w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let noisy: Vec<f64> = y.iter().map(|v| v + rng.gen_range(-1.0..1.0)).collect();
    let (ridge, _) = fit(&x, &noisy, 1.0).unwrap();
    let (_, rel_r) = stationarity_residual(&ridge, &x, &noisy);
    outcome(
        6,
        "regression: weight error <= 1e-6, ridge residual <= 1e-8",
        rel_w <= 1e-6 && rel_r <= 1e-8,
        format!("weight error {rel_w:.2e}, ridge residual {rel_r:.2e}"),
    )
}

fn manifest_path() -> PathBuf {
    std::env::var_os("AL_REGRESS_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/manifest.toml"))
}

fn load(name: &str) -> Result<Dataset, String> {
    let m = Manifest::from_path(manifest_path()).map_err(|e| e.to_string())?;
    load_dataset(m.get(name).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

fn config(ds: &Dataset, kinds: &[StrategyKind], trials: usize) -> ExperimentConfig {
    let entry = Manifest::parse(&format!(
        "[[dataset]]\nname = \"{}\"\npath = \"-\"\ndelimiter = \",\"\ntarget_column = 0\n",
        ds.name
    ))
    .unwrap()
    .datasets
    .remove(0);
    let mut c = ExperimentConfig::new(entry, RegressionConfig::new(RegressionKind::Linear));
    c.strategies = kinds.iter().map(|&k| StrategyConfig::new(k)).collect();
    c.trials = trials;
    c
}

fn directional() -> Outcome {
    use StrategyKind::*;
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["housing", "yacht"] {
        let ds = match load(name) {
            Ok(ds) => ds,
            Err(e) => {
                pass = false;
                parts.push(format!("{name}: not run ({e})"));
                continue;
            }
        };
        let r = run_experiment_on(&ds, &config(&ds, &[OursSequential, OursBatch, Random], 30)).unwrap();
        let at = |k| r.curves.iter().find(|c| c.strategy == k && c.round == 10).unwrap();
        let (seq, batch, rnd) = (at(OursSequential), at(OursBatch), at(Random));
        let pooled = ((seq.std_rmse.powi(2) + rnd.std_rmse.powi(2)) / 2.0).sqrt();
        let margin_ok = seq.mean_rmse <= rnd.mean_rmse - 0.25 * pooled;
        let batch_ok = batch.mean_rmse <= seq.mean_rmse;
        pass &= margin_ok && batch_ok;
        parts.push(format!(
            "{name}: seq {:.4} vs random {:.4} - 0.25*{pooled:.4} = {:.4} [{}], batch {:.4} [{}]",
            seq.mean_rmse,
            rnd.mean_rmse,
            rnd.mean_rmse - 0.25 * pooled,
            if margin_ok { "ok" } else { "miss" },
            batch.mean_rmse,
            if batch_ok { "ok" } else { "miss" },
        ));
    }
    let t = start.elapsed();
    pass &= t < Duration::from_secs(600);
    Outcome {
        id: 7,
        name: "round-10 RMSE: sequential beats random by 0.25 std, batch <= sequential",
        pass,
        needs_data: true,
        detail: format!("{}; {t:.1?}", parts.join("; ")),
    }
}

fn noise_robustness() -> Outcome {
    let mut invariant = true;
    let mut model_based_differ = false;
    let mut parts = Vec::new();
    for name in ["housing", "yacht"] {
        let Ok(ds) = load(name) else {
            parts.push(format!("{name}: skipped"));
            continue;
        };
        let exact = config(&ds, &StrategyKind::ALL, 3);
        let mut noisy = exact.clone();
        noisy.oracle = OracleConfig { noise_kind: NoiseKind::Gaussian, noise_scale: 0.1, rng_seed: 0 };
        let a = run_experiment_on(&ds, &exact).unwrap();
        let b = run_experiment_on(&ds, &noisy).unwrap();
        let mut changed = Vec::new();
        for (x, y) in a.results.iter().zip(&b.results) {
            let same = x.queried_indices() == y.queried_indices();
            if x.strategy.is_feature_only() {
                invariant &= same;
            } else if !same && !changed.contains(&x.strategy) {
                changed.push(x.strategy);
            }
        }
        model_based_differ |= changed.len() == 2;
        parts.push(format!("{name}: feature-only identical, changed {changed:?}"));
    }
    let ran = parts.iter().any(|p| !p.ends_with("skipped"));
    Outcome {
        id: 8,
        name: "noise leaves ours/greedy/random queries unchanged, moves qbc/emcm",
        pass: ran && invariant && model_based_differ,
        needs_data: true,
        detail: parts.join("; "),
    }
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let rows: String = (0..150)
        .map(|_| {
            let (a, b, c): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
            format!("{a},{b},{c},{}\n", 2.0 * a - b + c * c)
        })
        .collect();
    std::fs::write(dir.path().join("d.csv"), rows).unwrap();
    std::fs::write(
        dir.path().join("m.toml"),
        "[[dataset]]\nname = \"d\"\npath = \"d.csv\"\ndelimiter = \",\"\ntarget_column = 3\n",
    )
    .unwrap();
    let run = |out: &str| {
        Command::new(env!("CARGO_BIN_EXE_al-regress"))
            .args(["run", "--dataset", "d", "--trials", "3", "--noise", "gaussian", "--seed", "5", "--manifest"])
            .arg(dir.path().join("m.toml"))
            .arg("--out")
            .arg(dir.path().join(out))
            .output()
            .unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    let mut pass = a.status.success() && b.status.success();
    let mut differing = Vec::new();
    for f in ["curves.csv", "ranking.csv", "trials.csv", "queries.csv"] {
        let read = |d: &str| std::fs::read(dir.path().join(d).join(f)).unwrap_or_default();
        let (x, y) = (read("a"), read("b"));
        if x.is_empty() || x != y {
            pass = false;
            differing.push(f);
        }
    }
    outcome(9, "two identical CLI runs give byte-identical files", pass, format!("differing: {differing:?}"))
}

fn shapes() -> Outcome {
    let expected = [
        ("housing", 506, 13),
        ("concrete", 1030, 8),
        ("yacht", 308, 6),
        ("pm10", 500, 7),
        ("redwine", 1599, 11),
        ("whitewine", 4898, 11),
    ];
    let mut pass = true;
    let parts: Vec<String> = expected
        .iter()
        .map(|&(name, n, d)| match load(name) {
            Ok(ds) if (ds.n(), ds.d()) == (n, d) => format!("{name} ({n},{d}) ok"),
            Ok(ds) => {
                pass = false;
                format!("{name} ({},{}) != ({n},{d})", ds.n(), ds.d())
            }
            Err(_) => {
                pass = false;
                format!("{name} not supplied")
            }
        })
        .collect();
    Outcome { id: 10, name: "dataset shapes", pass, needs_data: true, detail: parts.join("; ") }
}

fn main() {
    // `cargo test -- <filter>` passes arguments; this target ignores them
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let (c4, c5) = local_search();
    let results = [
        toy(),
        bound(),
        oracle_equivalence(),
        c4,
        c5,
        regression(),
        directional(),
        noise_robustness(),
        cli_determinism(),
        shapes(),
    ];
    let mut blocking = 0;
    for r in &results {
        println!("{} {:>2}. {} :: {}", if r.pass { "PASS" } else { "FAIL" }, r.id, r.name, r.detail);
        if !r.pass && (strict || !r.needs_data) {
            blocking += 1;
        }
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if blocking > 0 {
        std::process::exit(1);
    }
}
