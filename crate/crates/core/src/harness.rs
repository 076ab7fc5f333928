//! Multi-trial active learning experiments and their CSV reports.
//!
//! One trial: seeded split into test / initial labeled / pool, fit on the
//! labeled set, then `rounds` rounds of querying. Sequential strategies take
//! `ceil(per_round_fraction · |U₀|)` single queries per round; the batch
//! strategy picks `round(total_fraction · |U₀|)` points at once and its curve
//! is flat at the final RMSE after round 0. Test RMSE always uses the
//! noiseless targets.
//!
//! Table-style ranking checkpoints at 5/10/15/20 % of the pool map to round
//! `round_half_up(pct / (100 · per_round_fraction))`, so with 2 % rounds they
//! land on rounds 3, 5, 8 and 10.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{
    apply_standardizer, fit_standardizer, load_dataset, make_split, mean_std, Dataset,
    DatasetManifest,
};
use crate::error::{Error, Result};
use crate::features::{model_space, FeatureMapSpec};
use crate::graph::{DistanceCache, NnGraph};
use crate::matrix::Matrix;
use crate::oracle::{LabelOracle, OracleConfig};
use crate::regression::{fit, rmse};
use crate::strategy::{
    select_emcm, select_greedy, select_ours_batch, select_ours_sequential, select_qbc,
    select_random, sequential_seed_set, SelectionTrace, StrategyConfig, StrategyKind,
};

pub const CHECKPOINT_PERCENTS: [f64; 4] = [5.0, 10.0, 15.0, 20.0];

/// Largest active point set for which a full pairwise distance table is kept.
pub const DISTANCE_CACHE_LIMIT: usize = 3000;

const FRACTION_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionKind {
    Linear,
    Ridge,
    Polynomial,
}

impl FromStr for RegressionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(RegressionKind::Linear),
            "ridge" => Ok(RegressionKind::Ridge),
            "poly" | "polynomial" => Ok(RegressionKind::Polynomial),
            _ => Err(Error::InvalidInput(format!("unknown regression kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionConfig {
    pub kind: RegressionKind,
    pub alpha: f64,
    pub degree: usize,
}

impl RegressionConfig {
    /// Defaults: α = 0 for linear, 1 for ridge and polynomial; degree 2.
    pub fn new(kind: RegressionKind) -> Self {
        let alpha = match kind {
            RegressionKind::Linear => 0.0,
            RegressionKind::Ridge | RegressionKind::Polynomial => 1.0,
        };
        Self {
            kind,
            alpha,
            degree: 2,
        }
    }

    pub fn feature_spec(&self) -> Result<FeatureMapSpec> {
        match self.kind {
            RegressionKind::Polynomial => FeatureMapSpec::polynomial(self.degree),
            _ => Ok(FeatureMapSpec::identity()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetManifest,
    pub regression: RegressionConfig,
    pub strategies: Vec<StrategyConfig>,
    pub trials: usize,
    pub rounds: usize,
    pub per_round_fraction: f64,
    pub total_fraction: f64,
    pub oracle: OracleConfig,
    pub base_seed: u64,
    /// Rebuild the graph from scratch after every query and compare.
    pub debug_checks: bool,
}

impl ExperimentConfig {
    /// Protocol defaults: 30 trials, 10 rounds of 2 %, 20 % total, exact labels.
    pub fn new(dataset: DatasetManifest, regression: RegressionConfig) -> Self {
        Self {
            dataset,
            regression,
            strategies: StrategyKind::ALL.iter().map(|&k| StrategyConfig::new(k)).collect(),
            trials: 30,
            rounds: 10,
            per_round_fraction: 0.02,
            total_fraction: 0.20,
            oracle: OracleConfig::default(),
            base_seed: 0,
            debug_checks: false,
        }
    }

    /// Sets `rounds` and keeps `total_fraction = rounds · per_round_fraction`.
    pub fn with_rounds(mut self, rounds: usize, per_round_fraction: f64) -> Self {
        self.rounds = rounds;
        self.per_round_fraction = per_round_fraction;
        self.total_fraction = rounds as f64 * per_round_fraction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::InvalidInput("no strategies configured".into()));
        }
        for (i, s) in self.strategies.iter().enumerate() {
            s.validate()?;
            if self.strategies[..i].iter().any(|o| o.kind == s.kind) {
                return Err(Error::InvalidInput(format!("strategy {} listed twice", s.kind)));
            }
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be >= 1".into()));
        }
        let fractions = [self.per_round_fraction, self.total_fraction];
        if fractions.iter().any(|f| !(f.is_finite() && (0.0..=1.0).contains(f))) {
            return Err(Error::InvalidInput("query fractions must lie in [0, 1]".into()));
        }
        if (self.rounds as f64 * self.per_round_fraction - self.total_fraction).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "rounds x per-round fraction ({} x {}) must equal the total fraction {}",
                self.rounds, self.per_round_fraction, self.total_fraction
            )));
        }
        if !(self.regression.alpha.is_finite() && self.regression.alpha >= 0.0) {
            return Err(Error::InvalidInput("alpha must be finite and >= 0".into()));
        }
        self.regression.feature_spec()?;
        Ok(())
    }

    pub fn per_round_count(&self, pool: usize) -> usize {
        (self.per_round_fraction * pool as f64 - FRACTION_EPS).ceil().max(0.0) as usize
    }

    pub fn batch_count(&self, pool: usize) -> usize {
        (self.total_fraction * pool as f64).round() as usize
    }

    /// Round index for a checkpoint given as a percentage of the pool.
    pub fn checkpoint_round(&self, percent: f64) -> usize {
        if self.per_round_fraction <= 0.0 {
            return 0;
        }
        let r = (percent / (100.0 * self.per_round_fraction) + 0.5 + FRACTION_EPS).floor();
        (r.max(0.0) as usize).min(self.rounds)
    }
}

/// Standardized model-space features plus targets, shared by all trials.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub name: String,
    pub features: Arc<Matrix>,
    pub targets: Vec<f64>,
}

impl PreparedData {
    /// Z-scores the raw features over all rows, then applies the feature map.
    pub fn new(dataset: &Dataset, regression: &RegressionConfig) -> Result<Self> {
        let params = fit_standardizer(&dataset.features);
        let z = apply_standardizer(&dataset.features, &params)?;
        let features = model_space(&z, &regression.feature_spec()?)?;
        Ok(Self {
            name: dataset.name.clone(),
            features: Arc::new(features),
            targets: dataset.targets.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryRecord {
    pub round: usize,
    pub index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub strategy: StrategyKind,
    pub trial: usize,
    pub seed: u64,
    /// Index 0 is before any query.
    pub rmse_per_round: Vec<f64>,
    pub queries: Vec<QueryRecord>,
    pub batch_swaps: usize,
}

impl TrialResult {
    pub fn queried_indices(&self) -> Vec<usize> {
        self.queries.iter().map(|q| q.index).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub strategy: StrategyKind,
    pub round: usize,
    pub mean_rmse: f64,
    pub std_rmse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankingCount {
    pub checkpoint_percent: u32,
    pub round: usize,
    pub first: usize,
    pub second: usize,
    pub others: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub dataset: String,
    pub strategies: Vec<StrategyKind>,
    pub designated: StrategyKind,
    pub rounds: usize,
    pub trials: usize,
    pub curves: Vec<CurvePoint>,
    /// Ordered by strategy (config order), then trial.
    pub results: Vec<TrialResult>,
    pub ranking: Vec<RankingCount>,
}

impl ExperimentReport {
    pub fn trials_of(&self, kind: StrategyKind) -> impl Iterator<Item = &TrialResult> + '_ {
        self.results.iter().filter(move |r| r.strategy == kind)
    }

    pub fn mean_curve(&self, kind: StrategyKind) -> Vec<f64> {
        let mut pts: Vec<&CurvePoint> = self.curves.iter().filter(|c| c.strategy == kind).collect();
        pts.sort_by_key(|c| c.round);
        pts.into_iter().map(|c| c.mean_rmse).collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn strategy_seed(trial_seed: u64, s: &StrategyConfig) -> u64 {
    let tag = StrategyKind::ALL.iter().position(|&k| k == s.kind).unwrap_or(0) as u64;
    splitmix64(splitmix64(trial_seed) ^ splitmix64(s.rng_seed) ^ (tag << 56))
}

fn oracle_seed(trial_seed: u64, oracle: &OracleConfig) -> u64 {
    splitmix64(splitmix64(trial_seed ^ 0x6f72_6163_6c65) ^ oracle.rng_seed)
}

/// State shared by every strategy run on the same trial.
struct TrialContext {
    labeled0: Vec<usize>,
    pool0: Vec<usize>,
    test_x: Matrix,
    test_y: Vec<f64>,
    cache: Option<Arc<DistanceCache>>,
}

impl TrialContext {
    fn new(data: &PreparedData, trial_seed: u64, want_cache: bool) -> Result<Self> {
        let split = make_split(data.targets.len(), trial_seed)?;
        let test_x = data.features.select_rows(&split.test);
        let test_y = split.test.iter().map(|&i| data.targets[i]).collect();
        let active = split.initial_labeled.len() + split.unlabeled_pool.len();
        let cache = (want_cache && active <= DISTANCE_CACHE_LIMIT).then(|| {
            let mut rows = split.initial_labeled.clone();
            rows.extend_from_slice(&split.unlabeled_pool);
            Arc::new(DistanceCache::new(&data.features, &rows))
        });
        Ok(Self {
            labeled0: split.initial_labeled,
            pool0: split.unlabeled_pool,
            test_x,
            test_y,
            cache,
        })
    }
}

struct Learner<'a> {
    data: &'a PreparedData,
    alpha: f64,
    labeled: Vec<usize>,
    labels: Vec<f64>,
    pool: Vec<usize>,
}

impl Learner<'_> {
    fn test_rmse(&self, ctx: &TrialContext) -> Result<f64> {
        let (model, _) = fit(&self.data.features.select_rows(&self.labeled), &self.labels, self.alpha)?;
        rmse(&model.predict(&ctx.test_x)?, &ctx.test_y)
    }

    fn add(&mut self, idx: usize, oracle: &mut LabelOracle) -> Result<()> {
        let pos = self
            .pool
            .binary_search(&idx)
            .map_err(|_| Error::NotUnlabeled(idx))?;
        let y = oracle.label(&self.data.targets, idx, &self.labels)?;
        self.pool.remove(pos);
        self.labeled.push(idx);
        self.labels.push(y);
        Ok(())
    }
}

fn uses_graph(kind: StrategyKind) -> bool {
    matches!(kind, StrategyKind::OursSequential | StrategyKind::OursBatch)
}

/// Runs one strategy on one seeded trial.
pub fn run_trial(
    data: &PreparedData,
    config: &ExperimentConfig,
    strategy: &StrategyConfig,
    trial_seed: u64,
) -> Result<TrialResult> {
    let ctx = TrialContext::new(data, trial_seed, uses_graph(strategy.kind))?;
    run_trial_in(data, config, strategy, trial_seed, 0, &ctx)
}

fn run_trial_in(
    data: &PreparedData,
    config: &ExperimentConfig,
    strategy: &StrategyConfig,
    trial_seed: u64,
    trial: usize,
    ctx: &TrialContext,
) -> Result<TrialResult> {
    strategy.validate()?;
    let mut learner = Learner {
        data,
        alpha: config.regression.alpha,
        labeled: ctx.labeled0.clone(),
        labels: ctx.labeled0.iter().map(|&i| data.targets[i]).collect(),
        pool: ctx.pool0.clone(),
    };
    let oracle_cfg = OracleConfig {
        rng_seed: oracle_seed(trial_seed, &config.oracle),
        ..config.oracle
    };
    let mut oracle = LabelOracle::new(oracle_cfg, &learner.labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(strategy_seed(trial_seed, strategy));
    let active_total = learner.labeled.len() + learner.pool.len();

    let mut graph = if uses_graph(strategy.kind) {
        Some(NnGraph::build_with_cache(
            &learner.labeled,
            &learner.pool,
            Arc::clone(&data.features),
            ctx.cache.clone(),
        )?)
    } else {
        None
    };

    let mut rmse_per_round = Vec::with_capacity(config.rounds + 1);
    rmse_per_round.push(learner.test_rmse(ctx)?);
    let mut queries = Vec::new();
    let mut batch_swaps = 0;
    let u0 = ctx.pool0.len();

    if strategy.kind == StrategyKind::OursBatch {
        let k = if strategy.batch_k > 0 {
            strategy.batch_k
        } else {
            config.batch_count(u0)
        };
        let wrap = |e| Error::Round {
            round: 1,
            source: Box::new(e),
        };
        let final_rmse = if k == 0 || config.rounds == 0 {
            rmse_per_round[0]
        } else {
            let g = graph.as_ref().expect("graph strategy");
            let seed = sequential_seed_set(g, k).map_err(wrap)?;
            let trace = select_ours_batch(g, k, &seed).map_err(wrap)?;
            batch_swaps = trace.swaps_performed;
            for &u in &trace.chosen {
                learner.add(u, &mut oracle).map_err(wrap)?;
                queries.push(QueryRecord {
                    round: 1,
                    index: u,
                    score: trace.score,
                });
            }
            learner.test_rmse(ctx).map_err(wrap)?
        };
        rmse_per_round.extend(std::iter::repeat_n(final_rmse, config.rounds));
    } else {
        let per_round = config.per_round_count(u0);
        for round in 1..=config.rounds {
            let wrap = |e| Error::Round {
                round,
                source: Box::new(e),
            };
            for _ in 0..per_round {
                if learner.pool.is_empty() {
                    return Err(wrap(Error::EmptyPool));
                }
                let trace = select_one(data, config, strategy, &learner, graph.as_ref(), &mut rng)
                    .map_err(wrap)?;
                let u = trace.chosen[0];
                learner.add(u, &mut oracle).map_err(wrap)?;
                if let Some(g) = graph.as_mut() {
                    *g = g.commit(&[u]).map_err(wrap)?;
                    if config.debug_checks {
                        let fresh = NnGraph::build(&learner.labeled, &learner.pool, Arc::clone(&data.features))
                            .map_err(wrap)?;
                        if fresh != *g {
                            return Err(wrap(Error::InvalidInput(
                                "incremental graph diverged from rebuild".into(),
                            )));
                        }
                    }
                }
                if config.debug_checks && learner.labeled.len() + learner.pool.len() != active_total {
                    return Err(wrap(Error::InvalidInput("labeled + pool size changed".into())));
                }
                queries.push(QueryRecord {
                    round,
                    index: u,
                    score: trace.score,
                });
            }
            rmse_per_round.push(learner.test_rmse(ctx).map_err(wrap)?);
        }
    }

    Ok(TrialResult {
        strategy: strategy.kind,
        trial,
        seed: trial_seed,
        rmse_per_round,
        queries,
        batch_swaps,
    })
}

fn select_one(
    data: &PreparedData,
    config: &ExperimentConfig,
    strategy: &StrategyConfig,
    learner: &Learner<'_>,
    graph: Option<&NnGraph>,
    rng: &mut ChaCha8Rng,
) -> Result<SelectionTrace> {
    let alpha = config.regression.alpha;
    // committees need two labels to resample; until then pick at random
    let cold = learner.labeled.len() < 2;
    match strategy.kind {
        StrategyKind::Qbc | StrategyKind::Emcm if cold => select_random(&learner.pool, rng),
        StrategyKind::OursSequential => select_ours_sequential(graph.expect("graph strategy")),
        StrategyKind::Random => select_random(&learner.pool, rng),
        StrategyKind::Greedy => select_greedy(&data.features, &learner.labeled, &learner.pool),
        StrategyKind::Qbc => select_qbc(
            &data.features,
            &learner.labeled,
            &learner.labels,
            &learner.pool,
            strategy.committee_size,
            alpha,
            rng,
        ),
        StrategyKind::Emcm => select_emcm(
            &data.features,
            &learner.labeled,
            &learner.labels,
            &learner.pool,
            strategy.committee_size,
            alpha,
            rng,
        ),
        StrategyKind::OursBatch => unreachable!("batch selection is handled per trial"),
    }
}

/// Loads the configured dataset and runs the experiment on it.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let dataset = load_dataset(&config.dataset)?;
    run_experiment_on(&dataset, config)
}

/// Runs every strategy on trials seeded `base_seed + t`. Trials run in parallel.
pub fn run_experiment_on(dataset: &Dataset, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let data = PreparedData::new(dataset, &config.regression)?;
    let want_cache = config.strategies.iter().any(|s| uses_graph(s.kind));

    let per_trial: Vec<Vec<TrialResult>> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let seed = config.base_seed.wrapping_add(t as u64);
            let ctx = TrialContext::new(&data, seed, want_cache)?;
            config
                .strategies
                .iter()
                .map(|s| {
                    run_trial_in(&data, config, s, seed, t, &ctx).map_err(|e| Error::Trial {
                        trial: t,
                        strategy: s.kind.to_string(),
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let strategies: Vec<StrategyKind> = config.strategies.iter().map(|s| s.kind).collect();
    let mut results = Vec::with_capacity(config.trials * strategies.len());
    for si in 0..strategies.len() {
        results.extend(per_trial.iter().map(|row| row[si].clone()));
    }

    let mut curves = Vec::new();
    for &kind in &strategies {
        for round in 0..=config.rounds {
            let vals: Vec<f64> = results
                .iter()
                .filter(|r| r.strategy == kind)
                .map(|r| r.rmse_per_round[round])
                .collect();
            let (mean, std) = mean_std(&vals);
            curves.push(CurvePoint {
                strategy: kind,
                round,
                mean_rmse: mean,
                std_rmse: std,
            });
        }
    }

    let designated = if strategies.contains(&StrategyKind::OursSequential) {
        StrategyKind::OursSequential
    } else {
        strategies[0]
    };
    let ranking = CHECKPOINT_PERCENTS
        .iter()
        .map(|&pct| {
            let round = config.checkpoint_round(pct);
            let mut count = RankingCount {
                checkpoint_percent: pct as u32,
                round,
                first: 0,
                second: 0,
                others: 0,
            };
            for row in &per_trial {
                let mine = row
                    .iter()
                    .find(|r| r.strategy == designated)
                    .expect("designated strategy ran")
                    .rmse_per_round[round];
                // competition ranking: ties share the better place
                let better = row.iter().filter(|r| r.rmse_per_round[round] < mine).count();
                match better {
                    0 => count.first += 1,
                    1 => count.second += 1,
                    _ => count.others += 1,
                }
            }
            count
        })
        .collect();

    Ok(ExperimentReport {
        dataset: data.name,
        strategies,
        designated,
        rounds: config.rounds,
        trials: config.trials,
        curves,
        results,
        ranking,
    })
}

pub const CURVES_HEADER: &str = "dataset,strategy,round,mean_rmse,std_rmse";
pub const RANKING_HEADER: &str = "dataset,designated,checkpoint_pct,round,first,second,others";
pub const TRIALS_HEADER: &str = "dataset,strategy,trial,seed,round,rmse";
pub const QUERIES_HEADER: &str = "dataset,strategy,trial,order,round,index,score";

/// Writes `curves.csv`, `ranking.csv`, `trials.csv` and `queries.csv` into `out_dir`.
pub fn emit_report(report: &ExperimentReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if report.strategies.is_empty() {
        return Err(Error::InvalidInput("report has no strategies".into()));
    }
    let ds = &report.dataset;
    let mut curves = format!("{CURVES_HEADER}\n");
    for c in &report.curves {
        let _ = writeln!(curves, "{ds},{},{},{},{}", c.strategy, c.round, c.mean_rmse, c.std_rmse);
    }
    let mut ranking = format!("{RANKING_HEADER}\n");
    for r in &report.ranking {
        let _ = writeln!(
            ranking,
            "{ds},{},{},{},{},{},{}",
            report.designated, r.checkpoint_percent, r.round, r.first, r.second, r.others
        );
    }
    let mut trials = format!("{TRIALS_HEADER}\n");
    let mut queries = format!("{QUERIES_HEADER}\n");
    for t in &report.results {
        for (round, v) in t.rmse_per_round.iter().enumerate() {
            let _ = writeln!(trials, "{ds},{},{},{},{round},{v}", t.strategy, t.trial, t.seed);
        }
        for (order, q) in t.queries.iter().enumerate() {
            let _ = writeln!(
                queries,
                "{ds},{},{},{order},{},{},{}",
                t.strategy, t.trial, q.round, q.index, q.score
            );
        }
    }

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for (name, body) in [
        ("curves.csv", curves),
        ("ranking.csv", ranking),
        ("trials.csv", trials),
        ("queries.csv", queries),
    ] {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
