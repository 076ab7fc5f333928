use std::error::Error as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use al_regress::dataset::{load_dataset, make_split, Manifest};
use al_regress::harness::{
    emit_report, run_experiment, ExperimentConfig, PreparedData, RegressionConfig, RegressionKind,
};
use al_regress::oracle::{NoiseKind, OracleConfig};
use al_regress::strategy::{StrategyConfig, StrategyKind};
use al_regress::{validate, Error, NnGraph};

#[derive(Parser)]
#[command(name = "al-regress", version, about = "Graph-based active learning for regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Regression {
    Linear,
    Ridge,
    Poly,
}

#[derive(Clone, Copy, ValueEnum)]
enum Noise {
    Exact,
    Gaussian,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-trial benchmark and write CSV reports.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        dataset: String,
        #[arg(long, value_enum, default_value = "linear")]
        regression: Regression,
        /// Ridge penalty; defaults to 0 for linear and 1 otherwise.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 2)]
        degree: usize,
        /// Comma-separated: ours_sequential,ours_batch,random,greedy,qbc,emcm
        #[arg(long, default_value = "ours_sequential,ours_batch,random,greedy,qbc,emcm")]
        strategies: String,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
        #[arg(long, default_value_t = 0.02)]
        per_round_fraction: f64,
        #[arg(long, value_enum, default_value = "exact")]
        noise: Noise,
        #[arg(long, default_value_t = 0.1)]
        noise_scale: f64,
        #[arg(long, default_value_t = 4)]
        committee_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Rebuild and compare the graph after every query.
        #[arg(long)]
        debug_checks: bool,
    },
    /// Cross-check the graph, local search and exact solvers on synthetic instances.
    Validate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dump the initial uncertainty graph of one seeded split as `u,nn,theta`.
    Graph {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        dataset: String,
        #[arg(long, value_enum, default_value = "linear")]
        regression: Regression,
        #[arg(long, default_value_t = 2)]
        degree: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn regression_config(kind: Regression, alpha: Option<f64>, degree: usize) -> RegressionConfig {
    let kind = match kind {
        Regression::Linear => RegressionKind::Linear,
        Regression::Ridge => RegressionKind::Ridge,
        Regression::Poly => RegressionKind::Polynomial,
    };
    let mut cfg = RegressionConfig::new(kind);
    if let Some(a) = alpha {
        cfg.alpha = a;
    }
    cfg.degree = degree;
    cfg
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            manifest,
            dataset,
            regression,
            alpha,
            degree,
            strategies,
            trials,
            rounds,
            per_round_fraction,
            noise,
            noise_scale,
            committee_size,
            seed,
            out,
            debug_checks,
        } => {
            let manifest = Manifest::from_path(&manifest)?;
            let entry = manifest.get(&dataset)?.clone();
            let mut config = ExperimentConfig::new(entry, regression_config(regression, alpha, degree))
                .with_rounds(rounds, per_round_fraction);
            config.strategies = strategies
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.parse::<StrategyKind>().map(|k| StrategyConfig {
                        committee_size,
                        ..StrategyConfig::new(k)
                    })
                })
                .collect::<Result<_, _>>()?;
            config.trials = trials;
            config.base_seed = seed;
            config.debug_checks = debug_checks;
            config.oracle = OracleConfig {
                noise_kind: match noise {
                    Noise::Exact => NoiseKind::Exact,
                    Noise::Gaussian => NoiseKind::Gaussian,
                },
                noise_scale,
                rng_seed: 0,
            };
            let report = run_experiment(&config)?;
            emit_report(&report, &out)?;
            println!("{}: {} trials, {} rounds", report.dataset, report.trials, report.rounds);
            for &kind in &report.strategies {
                let curve = report.mean_curve(kind);
                println!(
                    "  {:<16} rmse round 0 {:>10.4}  round {} {:>10.4}",
                    kind.name(),
                    curve[0],
                    report.rounds,
                    curve[report.rounds]
                );
            }
            for r in &report.ranking {
                println!(
                    "  {} at {:>2}% (round {:>2}): {}/{}/{}",
                    report.designated, r.checkpoint_percent, r.round, r.first, r.second, r.others
                );
            }
            Ok(())
        }
        Command::Validate { seed } => {
            let outcomes = validate::run_all(seed)?;
            let mut failed = 0;
            for o in &outcomes {
                println!(
                    "{} {:<28} {:>6} cases {:>4} failures {}",
                    if o.passed() { "PASS" } else { "FAIL" },
                    o.name,
                    o.cases,
                    o.failures,
                    o.detail
                );
                failed += usize::from(!o.passed());
            }
            if failed > 0 {
                return Err(Error::InvalidInput(format!("{failed} validation checks failed")));
            }
            Ok(())
        }
        Command::Graph {
            manifest,
            dataset,
            regression,
            degree,
            seed,
            out,
        } => {
            let manifest = Manifest::from_path(&manifest)?;
            let ds = load_dataset(manifest.get(&dataset)?)?;
            let data = PreparedData::new(&ds, &regression_config(regression, None, degree))?;
            let split = make_split(ds.n(), seed)?;
            let g = NnGraph::build(&split.initial_labeled, &split.unlabeled_pool, Arc::clone(&data.features))?;
            match out {
                Some(path) => {
                    let f = File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
                    g.dump(BufWriter::new(f)).map_err(|e| Error::Io { path, source: e })?;
                }
                None => g
                    .dump(std::io::stdout().lock())
                    .map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?,
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            let mut src = e.source();
            while let Some(s) = src {
                // Round/Trial wrappers already embed their source in Display
                if !msg.ends_with(&s.to_string()) {
                    msg.push_str(": ");
                    msg.push_str(&s.to_string());
                }
                src = s.source();
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
