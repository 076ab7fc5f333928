//! Exhaustive solvers over subsets of the unlabeled pool, for small instances.
//!
//! Used as ground truth for the local search and for the two modification
//! decision problems (minimize the maximum / the total remaining edge weight).

use crate::error::{Error, Result};
use crate::graph::NnGraph;

pub const MAX_POOL: usize = 20;
pub const MAX_SUBSETS: u64 = 200_000;

#[derive(Debug, Clone)]
pub struct ModificationInstance {
    pub graph: NnGraph,
    pub k: usize,
    /// Threshold on every remaining edge weight.
    pub beta: f64,
    /// Threshold on the total remaining edge weight.
    pub sigma: f64,
}

fn binomial(n: usize, r: usize) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u64 = 1;
    for i in 0..r {
        acc = acc.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    acc
}

fn check_limits(g: &NnGraph, sizes: impl Iterator<Item = usize>) -> Result<()> {
    let n = g.unlabeled().len();
    if n > MAX_POOL {
        return Err(Error::EnumerationLimit(format!(
            "pool of {n} exceeds {MAX_POOL}"
        )));
    }
    let total: u64 = sizes.map(|k| binomial(n, k)).fold(0, u64::saturating_add);
    if total > MAX_SUBSETS {
        return Err(Error::EnumerationLimit(format!(
            "{total} subsets exceed {MAX_SUBSETS}"
        )));
    }
    Ok(())
}

/// Calls `visit` with every size-`k` subset of `items` in lexicographic order.
pub fn for_each_combination(items: &[usize], k: usize, mut visit: impl FnMut(&[usize])) {
    let n = items.len();
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf: Vec<usize> = idx.iter().map(|&i| items[i]).collect();
    loop {
        visit(&buf);
        // advance the rightmost index that still has room
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
        for j in i..k {
            buf[j] = items[idx[j]];
        }
    }
}

/// Size-`k` subset maximizing `Q`, with its value. Ties keep the
/// lexicographically smallest subset.
pub fn best_subset_by_q(g: &NnGraph, k: usize) -> Result<(Vec<usize>, f64)> {
    let n = g.unlabeled().len();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "subset size {k} must be in 1..={n}"
        )));
    }
    check_limits(g, std::iter::once(k))?;
    let h = g.total_uncertainty();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for_each_combination(g.unlabeled(), k, |s| {
        let q = h - g.residual_after(s);
        if best.as_ref().is_none_or(|(_, b)| q > *b) {
            best = Some((s.to_vec(), q));
        }
    });
    Ok(best.expect("at least one subset"))
}

/// Size-`k` subset minimizing the remaining total weight `H'`, with its value.
pub fn min_residual(g: &NnGraph, k: usize) -> Result<(Vec<usize>, f64)> {
    let n = g.unlabeled().len();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "subset size {k} must be in 1..={n}"
        )));
    }
    check_limits(g, std::iter::once(k))?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for_each_combination(g.unlabeled(), k, |s| {
        let r = g.residual_after(s);
        if best.as_ref().is_none_or(|(_, b)| r < *b) {
            best = Some((s.to_vec(), r));
        }
    });
    Ok(best.expect("at least one subset"))
}

fn sizes(inst: &ModificationInstance) -> Result<std::ops::RangeInclusive<usize>> {
    let n = inst.graph.unlabeled().len();
    if inst.k > n {
        return Err(Error::InvalidInput(format!("k = {} exceeds pool size {n}", inst.k)));
    }
    if !(inst.beta >= 0.0 && inst.sigma >= 0.0) {
        return Err(Error::InvalidInput("thresholds must be non-negative".into()));
    }
    check_limits(&inst.graph, 1..=inst.k)?;
    Ok(1..=inst.k)
}

fn any_subset(inst: &ModificationInstance, accept: impl Fn(&NnGraph) -> bool) -> Result<bool> {
    for k in sizes(inst)? {
        let mut found = false;
        for_each_combination(inst.graph.unlabeled(), k, |s| {
            if !found {
                let after = inst.graph.commit(s).expect("subset of the pool");
                found = accept(&after);
            }
        });
        if found {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Is there a nonempty `S`, `|S| <= k`, leaving total edge weight `<= sigma`?
pub fn mmtd_decide(inst: &ModificationInstance) -> Result<bool> {
    any_subset(inst, |g| g.total_uncertainty() <= inst.sigma)
}

/// Is there a nonempty `S`, `|S| <= k`, leaving every edge weight `<= beta`?
pub fn mmmd_decide(inst: &ModificationInstance) -> Result<bool> {
    any_subset(inst, |g| g.thetas().iter().all(|&t| t <= inst.beta))
}
