//! Query selection: the graph-based sequential and batch selectors and the
//! four baselines (random, greedy, QBC, EMCM).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::NnGraph;
use crate::matrix::{l2, Matrix};
use crate::regression::{fit, LinearModel};

/// Minimum Q gain for a swap to be accepted.
pub const SWAP_TOLERANCE: f64 = 1e-12;

pub const DEFAULT_COMMITTEE_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    OursSequential,
    OursBatch,
    Random,
    Greedy,
    Qbc,
    Emcm,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::OursSequential,
        StrategyKind::OursBatch,
        StrategyKind::Random,
        StrategyKind::Greedy,
        StrategyKind::Qbc,
        StrategyKind::Emcm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::OursSequential => "ours_sequential",
            StrategyKind::OursBatch => "ours_batch",
            StrategyKind::Random => "random",
            StrategyKind::Greedy => "greedy",
            StrategyKind::Qbc => "qbc",
            StrategyKind::Emcm => "emcm",
        }
    }

    /// Strategies whose choices depend only on features, never on labels.
    pub fn is_feature_only(self) -> bool {
        !matches!(self, StrategyKind::Qbc | StrategyKind::Emcm)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match norm.as_str() {
            "ours_sequential" | "ours_seq" | "ours" | "sequential" => StrategyKind::OursSequential,
            "ours_batch" | "batch" => StrategyKind::OursBatch,
            "random" => StrategyKind::Random,
            "greedy" => StrategyKind::Greedy,
            "qbc" => StrategyKind::Qbc,
            "emcm" => StrategyKind::Emcm,
            _ => return Err(Error::InvalidInput(format!("unknown strategy {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub committee_size: usize,
    pub rng_seed: u64,
    /// Only read by [`StrategyKind::OursBatch`]; 0 means "derive from the experiment".
    pub batch_k: usize,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            committee_size: DEFAULT_COMMITTEE_SIZE,
            rng_seed: 0,
            batch_k: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.kind, StrategyKind::Qbc | StrategyKind::Emcm) && self.committee_size < 2 {
            return Err(Error::InvalidInput(format!(
                "{} needs a committee of at least 2, got {}",
                self.kind, self.committee_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace {
    pub chosen: Vec<usize>,
    pub score: f64,
    pub swaps_performed: usize,
    /// Q after each accepted swap (batch only).
    pub swap_history: Vec<f64>,
}

impl SelectionTrace {
    fn single(idx: usize, score: f64) -> Self {
        Self {
            chosen: vec![idx],
            score,
            swaps_performed: 0,
            swap_history: Vec::new(),
        }
    }
}

/// Position of the maximum; the earliest position wins ties.
fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Picks the unlabeled point with the largest `Q({u})`.
pub fn select_ours_sequential(g: &NnGraph) -> Result<SelectionTrace> {
    let scores: Vec<f64> = (0..g.unlabeled().len())
        .into_par_iter()
        .map(|p| g.q_single_at(p))
        .collect();
    let p = argmax(&scores).ok_or(Error::EmptyPool)?;
    Ok(SelectionTrace::single(g.unlabeled()[p], scores[p]))
}

/// Runs the sequential rule `k` times, committing each pick to a scratch copy
/// of the graph without querying any label.
pub fn sequential_seed_set(g: &NnGraph, k: usize) -> Result<Vec<usize>> {
    if k > g.unlabeled().len() {
        return Err(Error::InvalidInput(format!(
            "batch size {k} exceeds pool size {}",
            g.unlabeled().len()
        )));
    }
    let mut scratch = g.clone();
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let u = select_ours_sequential(&scratch)?.chosen[0];
        scratch = scratch.commit(&[u])?;
        picked.push(u);
    }
    Ok(picked)
}

/// Nearest and second-nearest "facility" per pool point, where the facilities
/// are the original labeled set (distance θ) plus every member of the batch.
struct FacilityState {
    best: Vec<(f64, Option<usize>)>,
    second: Vec<f64>,
}

impl FacilityState {
    fn new(g: &NnGraph, set: &[usize]) -> Self {
        let pool = g.unlabeled();
        let thetas = g.thetas();
        let mut best = Vec::with_capacity(pool.len());
        let mut second = Vec::with_capacity(pool.len());
        for (&j, &t) in pool.iter().zip(thetas) {
            let (mut b1, mut who, mut b2) = (t, None, f64::INFINITY);
            for &s in set {
                let d = g.dist(j, s);
                if d < b1 {
                    b2 = b1;
                    b1 = d;
                    who = Some(s);
                } else if d < b2 {
                    b2 = d;
                }
            }
            best.push((b1, who));
            second.push(b2);
        }
        Self { best, second }
    }

    fn cost(&self) -> f64 {
        self.best.iter().map(|b| b.0).sum()
    }

    /// `H'` after replacing `out` with `inn`.
    fn swap_cost(&self, g: &NnGraph, out: usize, inn: usize) -> f64 {
        g.unlabeled()
            .iter()
            .enumerate()
            .map(|(p, &j)| {
                let (b1, who) = self.best[p];
                let keep = if who == Some(out) { self.second[p] } else { b1 };
                keep.min(g.dist(j, inn))
            })
            .sum()
    }
}

/// Single-swap local search over batches of size `k`, starting from `seed_set`.
///
/// Outsiders are scanned in ascending order, batch members in ascending order,
/// and the first improving swap is taken before moving to the next outsider.
/// Passes repeat until one completes without a swap.
pub fn select_ours_batch(g: &NnGraph, k: usize, seed_set: &[usize]) -> Result<SelectionTrace> {
    let pool_len = g.unlabeled().len();
    if k == 0 {
        return Err(Error::InvalidInput("batch size must be >= 1".into()));
    }
    if k > pool_len {
        return Err(Error::InvalidInput(format!(
            "batch size {k} exceeds pool size {pool_len}"
        )));
    }
    if seed_set.len() != k {
        return Err(Error::InvalidInput(format!(
            "seed set has {} points, expected {k}",
            seed_set.len()
        )));
    }
    let mut set = seed_set.to_vec();
    set.sort_unstable();
    // validates membership and distinctness
    g.q_set(&set)?;

    let h = g.total_uncertainty();
    let mut state = FacilityState::new(g, &set);
    let mut cost = state.cost();
    let mut history = Vec::new();

    loop {
        let mut changed = false;
        let outsiders: Vec<usize> = g
            .unlabeled()
            .iter()
            .copied()
            .filter(|u| set.binary_search(u).is_err())
            .collect();
        for u in outsiders {
            for pos in 0..set.len() {
                let l = set[pos];
                let c = state.swap_cost(g, l, u);
                if (h - c) > (h - cost) + SWAP_TOLERANCE {
                    set.remove(pos);
                    let at = set.binary_search(&u).unwrap_err();
                    set.insert(at, u);
                    state = FacilityState::new(g, &set);
                    cost = state.cost();
                    history.push(h - cost);
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            break;
        }
    }

    Ok(SelectionTrace {
        score: g.q_set(&set)?,
        chosen: set,
        swaps_performed: history.len(),
        swap_history: history,
    })
}

pub fn select_random<R: Rng + ?Sized>(unlabeled: &[usize], rng: &mut R) -> Result<SelectionTrace> {
    if unlabeled.is_empty() {
        return Err(Error::EmptyPool);
    }
    let i = unlabeled[rng.gen_range(0..unlabeled.len())];
    Ok(SelectionTrace::single(i, 0.0))
}

/// Farthest-first: the pool point whose nearest labeled point (Euclidean) is farthest.
pub fn select_greedy(features: &Matrix, labeled: &[usize], unlabeled: &[usize]) -> Result<SelectionTrace> {
    if labeled.is_empty() {
        return Err(Error::EmptyLabeled);
    }
    if unlabeled.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut order = unlabeled.to_vec();
    order.sort_unstable();
    let scores: Vec<f64> = order
        .par_iter()
        .map(|&u| {
            labeled
                .iter()
                .map(|&l| l2(features.row(u), features.row(l)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let p = argmax(&scores).expect("nonempty");
    Ok(SelectionTrace::single(order[p], scores[p]))
}

/// Fits `size` models on bootstrap resamples of the labeled rows.
pub fn bootstrap_committee<R: Rng + ?Sized>(
    features: &Matrix,
    labeled: &[usize],
    labels: &[f64],
    size: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Vec<LinearModel>> {
    if labeled.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labeled.len(),
            got: labels.len(),
        });
    }
    if labeled.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "bootstrap committees need at least 2 labeled points, got {}",
            labeled.len()
        )));
    }
    if size < 2 {
        return Err(Error::InvalidInput("committee size must be >= 2".into()));
    }
    (0..size)
        .map(|_| {
            let draw: Vec<usize> = (0..labeled.len())
                .map(|_| rng.gen_range(0..labeled.len()))
                .collect();
            let rows: Vec<usize> = draw.iter().map(|&i| labeled[i]).collect();
            let y: Vec<f64> = draw.iter().map(|&i| labels[i]).collect();
            fit(&features.select_rows(&rows), &y, alpha).map(|(m, _)| m)
        })
        .collect()
}

/// Population variance of the committee's predictions at each candidate.
pub fn qbc_scores(committee: &[LinearModel], features: &Matrix, candidates: &[usize]) -> Vec<f64> {
    let b = committee.len() as f64;
    candidates
        .iter()
        .map(|&u| {
            let x = features.row(u);
            let preds: Vec<f64> = committee.iter().map(|m| m.predict_row(x)).collect();
            let mean = preds.iter().sum::<f64>() / b;
            preds.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / b
        })
        .collect()
}

/// Mean norm of the squared-loss gradient `(f(x) - f_b(x)) · [x, 1]` over the ensemble.
pub fn emcm_scores(
    main: &LinearModel,
    ensemble: &[LinearModel],
    features: &Matrix,
    candidates: &[usize],
) -> Vec<f64> {
    let b = ensemble.len() as f64;
    candidates
        .iter()
        .map(|&u| {
            let x = features.row(u);
            let norm = (x.iter().map(|v| v * v).sum::<f64>() + 1.0).sqrt();
            let f = main.predict_row(x);
            ensemble
                .iter()
                .map(|m| (f - m.predict_row(x)).abs() * norm)
                .sum::<f64>()
                / b
        })
        .collect()
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

/// Query-by-committee: largest prediction variance across a bootstrap committee.
pub fn select_qbc<R: Rng + ?Sized>(
    features: &Matrix,
    labeled: &[usize],
    labels: &[f64],
    unlabeled: &[usize],
    committee_size: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<SelectionTrace> {
    if unlabeled.is_empty() {
        return Err(Error::EmptyPool);
    }
    let committee = bootstrap_committee(features, labeled, labels, committee_size, alpha, rng)?;
    let order = sorted(unlabeled);
    let scores = qbc_scores(&committee, features, &order);
    let p = argmax(&scores).expect("nonempty");
    Ok(SelectionTrace::single(order[p], scores[p]))
}

/// Expected model change: largest mean gradient norm against a bootstrap ensemble.
pub fn select_emcm<R: Rng + ?Sized>(
    features: &Matrix,
    labeled: &[usize],
    labels: &[f64],
    unlabeled: &[usize],
    ensemble_size: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<SelectionTrace> {
    if unlabeled.is_empty() {
        return Err(Error::EmptyPool);
    }
    let ensemble = bootstrap_committee(features, labeled, labels, ensemble_size, alpha, rng)?;
    let (main, _) = fit(&features.select_rows(labeled), labels, alpha)?;
    let order = sorted(unlabeled);
    let scores = emcm_scores(&main, &ensemble, features, &order);
    let p = argmax(&scores).expect("nonempty");
    Ok(SelectionTrace::single(order[p], scores[p]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn line(points: &[f64]) -> Arc<Matrix> {
        Arc::new(Matrix::from_rows(&points.iter().map(|&p| [p]).collect::<Vec<_>>()).unwrap())
    }

    fn model(w: &[f64], b: f64) -> LinearModel {
        LinearModel {
            weights: w.to_vec(),
            bias: b,
            ridge_alpha: 0.0,
        }
    }

    #[test]
    fn parse_names() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
        }
        assert_eq!("Ours-Batch".parse::<StrategyKind>().unwrap(), StrategyKind::OursBatch);
        assert!("bogus".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn committee_size_validated() {
        let mut c = StrategyConfig::new(StrategyKind::Qbc);
        c.committee_size = 1;
        assert!(c.validate().is_err());
        c.kind = StrategyKind::Random;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn sequential_single_candidate() {
        let g = NnGraph::build(&[0], &[1], line(&[0.0, 3.5])).unwrap();
        let t = select_ours_sequential(&g).unwrap();
        assert_eq!((t.chosen[0], t.score), (1, 3.5));
        let empty = NnGraph::build(&[0], &[], line(&[0.0])).unwrap();
        assert!(matches!(select_ours_sequential(&empty), Err(Error::EmptyPool)));
    }

    #[test]
    fn batch_whole_pool() {
        let g = NnGraph::build(&[0], &[1, 2, 3], line(&[0.0, 1.0, 4.0, 9.0])).unwrap();
        let t = select_ours_batch(&g, 3, &[3, 1, 2]).unwrap();
        assert_eq!(t.chosen, vec![1, 2, 3]);
        assert_eq!(t.score, g.total_uncertainty());
        assert_eq!(t.swaps_performed, 0);
    }

    #[test]
    fn batch_rejects_bad_inputs() {
        let g = NnGraph::build(&[0], &[1, 2], line(&[0.0, 1.0, 4.0])).unwrap();
        assert!(select_ours_batch(&g, 3, &[1, 2]).is_err());
        assert!(select_ours_batch(&g, 2, &[1]).is_err());
        assert!(select_ours_batch(&g, 1, &[0]).is_err());
    }

    #[test]
    fn batch_improves_a_bad_seed() {
        // Two clusters far from the labeled point; the seed sits in one cluster twice.
        let f = line(&[0.0, 10.0, 10.5, 20.0, 20.5]);
        let g = NnGraph::build(&[0], &[1, 2, 3, 4], f).unwrap();
        let seed_q = g.q_set(&[1, 2]).unwrap();
        let t = select_ours_batch(&g, 2, &[1, 2]).unwrap();
        assert!(t.score > seed_q);
        assert!(t.swaps_performed >= 1);
        assert!(t.swap_history.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn random_is_uniformish_and_seeded() {
        let pool: Vec<usize> = (0..10).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut counts = [0usize; 10];
        let draws = 100_000;
        for _ in 0..draws {
            counts[select_random(&pool, &mut rng).unwrap().chosen[0]] += 1;
        }
        let sd = (draws as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * 0.1).abs() < 3.0 * sd, "{counts:?}");
        }
        let a: Vec<usize> = {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            (0..20).map(|_| select_random(&pool, &mut r).unwrap().chosen[0]).collect()
        };
        let b: Vec<usize> = {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            (0..20).map(|_| select_random(&pool, &mut r).unwrap().chosen[0]).collect()
        };
        assert_eq!(a, b);
        assert_eq!(select_random(&[7], &mut rng).unwrap().chosen, vec![7]);
        assert!(select_random(&[], &mut rng).is_err());
    }

    #[test]
    fn greedy_picks_farthest() {
        let f = line(&[0.0, 1.0, 5.0, -3.0, 0.0]);
        let t = select_greedy(&f, &[0], &[1, 2, 3, 4]).unwrap();
        assert_eq!((t.chosen[0], t.score), (2, 5.0));
        // all candidates coincide with the labeled point: smallest index
        let f = line(&[2.0, 2.0, 2.0]);
        assert_eq!(select_greedy(&f, &[0], &[2, 1]).unwrap().chosen, vec![1]);
        assert!(select_greedy(&f, &[], &[1]).is_err());
    }

    #[test]
    fn qbc_two_member_variance() {
        let f = line(&[0.0, 1.0, 2.0, 3.0]);
        // predictions at x: m1 = x, m2 = 3x - 1; difference 2x - 1, variance (x - 0.5)^2
        let committee = [model(&[1.0], 0.0), model(&[3.0], -1.0)];
        let s = qbc_scores(&committee, &f, &[0, 1, 2, 3]);
        assert_eq!(s, vec![0.25, 0.25, 2.25, 6.25]);
        assert_eq!(argmax(&s), Some(3));
    }

    #[test]
    fn qbc_degenerate_committee_ties_to_smallest() {
        // every labeled row identical: all bootstrap models agree
        let f = line(&[1.0, 1.0, 7.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = select_qbc(&f, &[0, 1], &[2.0, 2.0], &[3, 2], 4, 0.0, &mut rng).unwrap();
        assert_eq!((t.chosen[0], t.score), (2, 0.0));
    }

    #[test]
    fn emcm_one_dimensional() {
        let f = line(&[2.0, -1.0]);
        let main = model(&[1.0], 0.0);
        let ens = [model(&[1.0], 1.0), model(&[0.0], 0.0)];
        // x=2: |Δf| = 1 and 2, mean 1.5, |[2,1]| = sqrt5
        // x=-1: |Δf| = 1 and 1, mean 1, |[-1,1]| = sqrt2
        let s = emcm_scores(&main, &ens, &f, &[0, 1]);
        assert!((s[0] - 1.5 * 5f64.sqrt()).abs() < 1e-15);
        assert!((s[1] - 2f64.sqrt()).abs() < 1e-15);
        let agree = emcm_scores(&main, &[main.clone(), main.clone()], &f, &[0, 1]);
        assert_eq!(agree, vec![0.0, 0.0]);
    }

    #[test]
    fn committee_needs_two_labels() {
        let f = line(&[0.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(select_qbc(&f, &[0], &[1.0], &[1], 4, 0.0, &mut rng).is_err());
        assert!(select_emcm(&f, &[0], &[1.0], &[1], 4, 0.0, &mut rng).is_err());
    }

    #[test]
    fn committee_strategies_are_seeded() {
        let f = Arc::new(
            Matrix::from_rows(&(0..12).map(|i| [i as f64, (i * i % 7) as f64]).collect::<Vec<_>>())
                .unwrap(),
        );
        let labeled = [0, 3, 5, 8];
        let y = [1.0, -2.0, 0.5, 4.0];
        let pool = [1, 2, 4, 6, 7, 9, 10, 11];
        for emcm in [false, true] {
            let run = |seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                if emcm {
                    select_emcm(&f, &labeled, &y, &pool, 4, 0.0, &mut rng).unwrap()
                } else {
                    select_qbc(&f, &labeled, &y, &pool, 4, 0.0, &mut rng).unwrap()
                }
            };
            assert_eq!(run(3), run(3));
        }
    }
}
