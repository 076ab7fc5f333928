//! Cross-checks of the graph machinery against exhaustive recomputation on
//! random synthetic instances. Backs `al-regress validate`.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::exact::{best_subset_by_q, min_residual};
use crate::graph::{bound_terms, NnGraph};
use crate::matrix::Matrix;
use crate::strategy::{select_ours_batch, sequential_seed_set};

/// Random graph over uniform points in `[-1, 1]^d`; indices `0..n_labeled`
/// are labeled, the rest unlabeled.
pub fn random_instance<R: Rng + ?Sized>(
    rng: &mut R,
    n_labeled: usize,
    n_unlabeled: usize,
    d: usize,
) -> Result<NnGraph> {
    let n = n_labeled + n_unlabeled;
    let data = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let features = Arc::new(Matrix::new(n, d, data)?);
    let labeled: Vec<usize> = (0..n_labeled).collect();
    let unlabeled: Vec<usize> = (n_labeled..n).collect();
    NnGraph::build(&labeled, &unlabeled, features)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub detail: String,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn outcome(name: &'static str, cases: usize, failures: usize, detail: String) -> CheckOutcome {
    CheckOutcome {
        name,
        cases,
        failures,
        detail,
    }
}

/// Incremental commit versus full rebuild, and Q versus rebuild differences.
pub fn check_commit_and_q(seed: u64, instances: usize) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut commit_fail, mut q_fail, mut q_cases) = (0, 0, 0);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let nl = rng.gen_range(1..=20);
        let nu = rng.gen_range(2..=50);
        let d = rng.gen_range(1..=8);
        let g = random_instance(&mut rng, nl, nu, d)?;
        let pool = g.unlabeled().to_vec();
        let h = g.total_uncertainty();

        let k = rng.gen_range(1..=pool.len().min(5));
        let set: Vec<usize> = pool.choose_multiple(&mut rng, k).copied().collect();
        let mut labeled = g.labeled().to_vec();
        labeled.extend_from_slice(&set);
        let rest: Vec<usize> = pool.iter().copied().filter(|u| !set.contains(u)).collect();
        let rebuilt = NnGraph::build(&labeled, &rest, Arc::clone(g.features()))?;
        if g.commit(&set)? != rebuilt {
            commit_fail += 1;
        }
        let err = (g.q_set(&set)? - (h - rebuilt.total_uncertainty())).abs();
        worst = worst.max(err);
        q_cases += 1;
        if err > 1e-9 {
            q_fail += 1;
        }
        for &u in pool.iter().take(10) {
            let mut l = g.labeled().to_vec();
            l.push(u);
            let r: Vec<usize> = pool.iter().copied().filter(|&v| v != u).collect();
            let after = NnGraph::build(&l, &r, Arc::clone(g.features()))?;
            let err = (g.q_single(u)? - (h - after.total_uncertainty())).abs();
            worst = worst.max(err);
            q_cases += 1;
            if err > 1e-9 {
                q_fail += 1;
            }
        }
    }
    Ok(vec![
        outcome("commit_equals_rebuild", instances, commit_fail, String::new()),
        outcome("q_equals_rebuild_difference", q_cases, q_fail, format!("max abs error {worst:.3e}")),
    ])
}

/// Local search against exhaustive optimum, and Q/H' duality.
pub fn check_local_search(seed: u64, instances: usize) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ratio_fail, mut monotone_fail, mut dual_fail) = (0, 0, 0);
    let (mut worst_ratio, mut worst_q_ratio) = (0.0f64, 1.0f64);
    for _ in 0..instances {
        let nl = rng.gen_range(1..=6);
        let nu = rng.gen_range(4..=14);
        let d = rng.gen_range(1..=5);
        let k = rng.gen_range(2..=3);
        let g = random_instance(&mut rng, nl, nu, d)?;
        let seed_set = sequential_seed_set(&g, k)?;
        let trace = select_ours_batch(&g, k, &seed_set)?;
        let h = g.total_uncertainty();
        let local_residual = h - trace.score;
        let (_, opt_residual) = min_residual(&g, k)?;
        let (_, best_q) = best_subset_by_q(&g, k)?;
        if local_residual > 5.0 * opt_residual + 1e-9 {
            ratio_fail += 1;
        }
        if opt_residual > 0.0 {
            worst_ratio = worst_ratio.max(local_residual / opt_residual);
        }
        if trace.score > 0.0 {
            worst_q_ratio = worst_q_ratio.min(trace.score / best_q);
        }
        if trace.score < g.q_set(&seed_set)? {
            monotone_fail += 1;
        }
        if best_q != h - opt_residual {
            dual_fail += 1;
        }
    }
    Ok(vec![
        outcome(
            "local_search_within_5x",
            instances,
            ratio_fail,
            format!("worst H' ratio {worst_ratio:.4}, worst Q ratio {worst_q_ratio:.4}"),
        ),
        outcome("local_search_improves_seed", instances, monotone_fail, String::new()),
        outcome("q_residual_duality", instances, dual_fail, String::new()),
    ])
}

/// `|Σ Δw_i Δx_i| <= max|Δw_i| · L1(Δx)` on random draws.
pub fn check_bound(seed: u64, draws: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fails = 0;
    for _ in 0..draws {
        let d = rng.gen_range(1..=20);
        let mut v = || -> Vec<f64> { (0..d).map(|_| rng.gen_range(-10.0..10.0)).collect() };
        let (w, ws, xu, xl) = (v(), v(), v(), v());
        let diag = bound_terms(&w, &ws, &xu, &xl)?;
        if !diag.holds(1e-12) {
            fails += 1;
        }
    }
    Ok(outcome("l1_error_bound", draws, fails, String::new()))
}

pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = check_commit_and_q(seed, 200)?;
    out.extend(check_local_search(seed.wrapping_add(1), 100)?);
    out.push(check_bound(seed.wrapping_add(2), 10_000)?);
    Ok(out)
}
