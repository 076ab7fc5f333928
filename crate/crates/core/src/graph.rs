//! Nearest-neighbor bipartite graph between the unlabeled pool and the
//! labeled set.
//!
//! Every unlabeled point carries exactly one edge, to its L1-nearest labeled
//! point; the edge weight θ is that distance. The total weight `H` is the
//! estimated uncertainty of the pool and `Q(S)` is how much `H` drops when the
//! points in `S` move to the labeled side.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matrix::{l1, Matrix};
use crate::regression::LinearModel;

/// Dense symmetric table of L1 distances over a fixed subset of rows.
///
/// Entries are produced by the same [`l1`] routine the graph otherwise calls,
/// so a cached graph is bit-identical to an uncached one.
#[derive(Debug)]
pub struct DistanceCache {
    pos: Vec<u32>,
    width: usize,
    table: Vec<f64>,
}

const NOT_CACHED: u32 = u32::MAX;

impl DistanceCache {
    pub fn new(features: &Matrix, rows: &[usize]) -> Self {
        let width = rows.len();
        let mut pos = vec![NOT_CACHED; features.rows()];
        for (k, &r) in rows.iter().enumerate() {
            pos[r] = k as u32;
        }
        let mut table = vec![0.0; width * width];
        for a in 0..width {
            for b in (a + 1)..width {
                let d = l1(features.row(rows[a]), features.row(rows[b]));
                table[a * width + b] = d;
                table[b * width + a] = d;
            }
        }
        Self { pos, width, table }
    }

    #[inline]
    fn get(&self, a: usize, b: usize) -> Option<f64> {
        let (pa, pb) = (*self.pos.get(a)?, *self.pos.get(b)?);
        if pa == NOT_CACHED || pb == NOT_CACHED {
            return None;
        }
        Some(self.table[pa as usize * self.width + pb as usize])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Outside,
    Labeled,
    Unlabeled(u32),
}

#[derive(Debug, Clone)]
pub struct NnGraph {
    features: Arc<Matrix>,
    cache: Option<Arc<DistanceCache>>,
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    nn: Vec<usize>,
    theta: Vec<f64>,
    role: Vec<Role>,
}

impl PartialEq for NnGraph {
    fn eq(&self, other: &Self) -> bool {
        self.labeled == other.labeled
            && self.unlabeled == other.unlabeled
            && self.nn == other.nn
            && self.theta == other.theta
    }
}

fn sorted_unique(idx: &[usize], what: &str, n: usize) -> Result<Vec<usize>> {
    let mut v = idx.to_vec();
    v.sort_unstable();
    if v.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput(format!("{what} contains duplicate indices")));
    }
    if let Some(&bad) = v.last().filter(|&&i| i >= n) {
        return Err(Error::InvalidInput(format!(
            "{what} index {bad} out of range for {n} rows"
        )));
    }
    Ok(v)
}

impl NnGraph {
    /// Builds the graph by exhaustive scan. Ties go to the smallest labeled index.
    pub fn build(labeled: &[usize], unlabeled: &[usize], features: Arc<Matrix>) -> Result<Self> {
        Self::build_with_cache(labeled, unlabeled, features, None)
    }

    pub fn build_with_cache(
        labeled: &[usize],
        unlabeled: &[usize],
        features: Arc<Matrix>,
        cache: Option<Arc<DistanceCache>>,
    ) -> Result<Self> {
        if !features.is_finite() {
            return Err(Error::NonFinite("graph features"));
        }
        let n = features.rows();
        let labeled = sorted_unique(labeled, "labeled set", n)?;
        let unlabeled = sorted_unique(unlabeled, "unlabeled set", n)?;
        if labeled.is_empty() {
            return Err(Error::EmptyLabeled);
        }
        let mut role = vec![Role::Outside; n];
        for &l in &labeled {
            role[l] = Role::Labeled;
        }
        for (p, &u) in unlabeled.iter().enumerate() {
            if role[u] == Role::Labeled {
                return Err(Error::InvalidInput(format!(
                    "index {u} is both labeled and unlabeled"
                )));
            }
            role[u] = Role::Unlabeled(p as u32);
        }
        let mut g = Self {
            features,
            cache,
            labeled,
            unlabeled,
            nn: Vec::new(),
            theta: Vec::new(),
            role,
        };
        let (nn, theta) = g
            .unlabeled
            .iter()
            .map(|&u| g.nearest_in(u, &g.labeled))
            .unzip();
        g.nn = nn;
        g.theta = theta;
        Ok(g)
    }

    /// Attaches a distance cache covering every point in the graph.
    pub fn with_cache(mut self, cache: Arc<DistanceCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    /// Nearest member of `set` (sorted ascending) to `u`; first minimum wins.
    fn nearest_in(&self, u: usize, set: &[usize]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for &l in set {
            let d = self.dist(u, l);
            if d < best.1 {
                best = (l, d);
            }
        }
        best
    }

    #[inline]
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        if let Some(d) = self.cache.as_ref().and_then(|c| c.get(a, b)) {
            return d;
        }
        l1(self.features.row(a), self.features.row(b))
    }

    pub fn features(&self) -> &Arc<Matrix> {
        &self.features
    }

    pub fn cache(&self) -> Option<&Arc<DistanceCache>> {
        self.cache.as_ref()
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    /// θ of every unlabeled point, aligned with [`Self::unlabeled`].
    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    /// `(u, nearest labeled, θ)` for every unlabeled point.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.unlabeled
            .iter()
            .zip(&self.nn)
            .zip(&self.theta)
            .map(|((&u, &l), &t)| (u, l, t))
    }

    pub fn is_unlabeled(&self, i: usize) -> bool {
        matches!(self.role.get(i), Some(Role::Unlabeled(_)))
    }

    pub fn is_labeled(&self, i: usize) -> bool {
        matches!(self.role.get(i), Some(Role::Labeled))
    }

    pub(crate) fn slot(&self, u: usize) -> Result<usize> {
        match self.role.get(u) {
            Some(Role::Unlabeled(p)) => Ok(*p as usize),
            _ => Err(Error::NotUnlabeled(u)),
        }
    }

    pub fn nn_of(&self, u: usize) -> Result<usize> {
        Ok(self.nn[self.slot(u)?])
    }

    pub fn theta(&self, u: usize) -> Result<f64> {
        Ok(self.theta[self.slot(u)?])
    }

    /// `H`, the sum of all edge weights.
    pub fn total_uncertainty(&self) -> f64 {
        self.theta.iter().sum()
    }

    /// `Q({u})`: u's own θ plus the drop it causes in every other θ.
    pub fn q_single(&self, u: usize) -> Result<f64> {
        let p = self.slot(u)?;
        Ok(self.q_single_at(p))
    }

    pub(crate) fn q_single_at(&self, p: usize) -> f64 {
        let u = self.unlabeled[p];
        let mut q = self.theta[p];
        for (k, (&j, &t)) in self.unlabeled.iter().zip(&self.theta).enumerate() {
            if k != p {
                q += t - t.min(self.dist(j, u));
            }
        }
        q
    }

    fn check_subset(&self, set: &[usize]) -> Result<Vec<usize>> {
        if set.is_empty() {
            return Err(Error::InvalidInput("query set is empty".into()));
        }
        let s = sorted_unique(set, "query set", self.role.len())
            .map_err(|_| Error::InvalidInput("query set has duplicates or bad indices".into()))?;
        for &u in &s {
            self.slot(u)?;
        }
        Ok(s)
    }

    /// `H'` after moving `set` to the labeled side. `set` must already be validated.
    pub(crate) fn residual_after(&self, set: &[usize]) -> f64 {
        let mut h = 0.0;
        for (&j, &t) in self.unlabeled.iter().zip(&self.theta) {
            if set.contains(&j) {
                continue;
            }
            let mut best = t;
            for &s in set {
                best = best.min(self.dist(j, s));
            }
            h += best;
        }
        h
    }

    /// `H'` for a validated subset, exposed for the exact solvers.
    pub fn residual_uncertainty(&self, set: &[usize]) -> Result<f64> {
        let s = self.check_subset(set)?;
        Ok(self.residual_after(&s))
    }

    /// `Q(S) = H - H'`. The graph is not modified.
    pub fn q_set(&self, set: &[usize]) -> Result<f64> {
        let s = self.check_subset(set)?;
        Ok(self.total_uncertainty() - self.residual_after(&s))
    }

    /// Moves `set` to the labeled side and returns the updated graph.
    ///
    /// Each remaining θ becomes `min(θ, min_s L1(u, s))`; on equal distance the
    /// smaller labeled index wins, matching [`Self::build`].
    pub fn commit(&self, set: &[usize]) -> Result<Self> {
        let s = self.check_subset(set)?;
        let mut role = self.role.clone();
        let mut labeled = self.labeled.clone();
        for &u in &s {
            role[u] = Role::Labeled;
        }
        labeled.extend_from_slice(&s);
        labeled.sort_unstable();

        let mut unlabeled = Vec::with_capacity(self.unlabeled.len() - s.len());
        let mut nn = Vec::with_capacity(unlabeled.capacity());
        let mut theta = Vec::with_capacity(unlabeled.capacity());
        for ((&u, &old_nn), &old_t) in self.unlabeled.iter().zip(&self.nn).zip(&self.theta) {
            if role[u] == Role::Labeled {
                continue;
            }
            let (mut best_l, mut best_t) = (old_nn, old_t);
            for &c in &s {
                let d = self.dist(u, c);
                if d < best_t || (d == best_t && c < best_l) {
                    best_l = c;
                    best_t = d;
                }
            }
            role[u] = Role::Unlabeled(unlabeled.len() as u32);
            unlabeled.push(u);
            nn.push(best_l);
            theta.push(best_t);
        }
        Ok(Self {
            features: Arc::clone(&self.features),
            cache: self.cache.clone(),
            labeled,
            unlabeled,
            nn,
            theta,
            role,
        })
    }

    /// Writes `u,nn,theta` rows with a header line.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "u,nn,theta")?;
        for (u, l, t) in self.edges() {
            writeln!(out, "{u},{l},{t}")?;
        }
        Ok(())
    }
}

/// Error-bound terms relating a model fit on `L` to one fit on `L ∪ U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundDiagnostic {
    /// `|Σ_i (w*_i - w_i)(x_u,i - x_l,i)|`
    pub delta_u: f64,
    /// `max_i |w*_i - w_i|`
    pub lambda_val: f64,
    pub l1_dist: f64,
}

impl BoundDiagnostic {
    pub fn bound(&self) -> f64 {
        self.lambda_val * self.l1_dist
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.delta_u <= self.bound() + tol
    }
}

pub fn bound_terms(w: &[f64], w_star: &[f64], x_u: &[f64], x_l: &[f64]) -> Result<BoundDiagnostic> {
    let d = w.len();
    for len in [w_star.len(), x_u.len(), x_l.len()] {
        if len != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: len,
            });
        }
    }
    let mut dot = 0.0;
    let mut lambda = 0.0f64;
    for i in 0..d {
        let dw = w_star[i] - w[i];
        dot += dw * (x_u[i] - x_l[i]);
        lambda = lambda.max(dw.abs());
    }
    Ok(BoundDiagnostic {
        delta_u: dot.abs(),
        lambda_val: lambda,
        l1_dist: l1(x_u, x_l),
    })
}

/// Bound diagnostic for a model fit on the labeled set against the model fit
/// on labeled plus unlabeled ground truth. Benchmark/validation use only.
pub fn check_bound(
    model_l: &LinearModel,
    model_lu: &LinearModel,
    x_u: &[f64],
    x_l: &[f64],
) -> Result<BoundDiagnostic> {
    let diag = bound_terms(&model_l.weights, &model_lu.weights, x_u, x_l)?;
    // The chain |Σ a_i b_i| <= Σ |a_i||b_i| <= max|a_i| Σ|b_i| is exact algebra;
    // the slack only absorbs rounding.
    debug_assert!(diag.holds(1e-9 * (1.0 + diag.bound())), "{diag:?}");
    Ok(diag)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> Arc<Matrix> {
        Arc::new(Matrix::from_rows(&points.iter().map(|&p| [p]).collect::<Vec<_>>()).unwrap())
    }

    #[test]
    fn single_labeled_point() {
        let f = line(&[0.0, 2.5, -4.0]);
        let g = NnGraph::build(&[0], &[1, 2], f).unwrap();
        assert_eq!(g.nn_of(1).unwrap(), 0);
        assert_eq!(g.theta(1).unwrap(), 2.5);
        assert_eq!(g.theta(2).unwrap(), 4.0);
        assert_eq!(g.edges().count(), 2);
    }

    #[test]
    fn coincident_point_has_zero_weight() {
        let f = line(&[1.0, 1.0, 3.0]);
        let g = NnGraph::build(&[0, 2], &[1], f).unwrap();
        assert_eq!(g.theta(1).unwrap(), 0.0);
    }

    #[test]
    fn ties_pick_smallest_index() {
        let f = line(&[-1.0, 0.0, 1.0]);
        let g = NnGraph::build(&[2, 0], &[1], f).unwrap();
        assert_eq!(g.nn_of(1).unwrap(), 0);
        assert_eq!(g.theta(1).unwrap(), 1.0);
    }

    #[test]
    fn labeled_point_has_no_theta() {
        let f = line(&[0.0, 1.0]);
        let g = NnGraph::build(&[0], &[1], f).unwrap();
        assert!(matches!(g.theta(0), Err(Error::NotUnlabeled(0))));
        assert!(matches!(g.q_single(0), Err(Error::NotUnlabeled(0))));
    }

    #[test]
    fn build_errors() {
        let f = line(&[0.0, 1.0, 2.0]);
        assert!(matches!(
            NnGraph::build(&[], &[1], f.clone()),
            Err(Error::EmptyLabeled)
        ));
        assert!(NnGraph::build(&[0], &[0, 1], f.clone()).is_err());
        assert!(NnGraph::build(&[0], &[1, 1], f.clone()).is_err());
        assert!(NnGraph::build(&[0], &[7], f).is_err());
    }

    #[test]
    fn empty_pool_has_zero_uncertainty() {
        let g = NnGraph::build(&[0], &[], line(&[0.0])).unwrap();
        assert_eq!(g.total_uncertainty(), 0.0);
    }

    #[test]
    fn isolated_candidate_scores_own_theta() {
        // u=3 is far from every other unlabeled point
        let f = line(&[0.0, 1.0, 2.0, -50.0]);
        let g = NnGraph::build(&[0], &[1, 2, 3], f).unwrap();
        assert_eq!(g.q_single(3).unwrap(), 50.0);
    }

    #[test]
    fn q_set_edge_cases() {
        let f = line(&[0.0, 3.0, 5.0, 9.0]);
        let g = NnGraph::build(&[0], &[1, 2, 3], f).unwrap();
        assert_eq!(g.q_set(&[2]).unwrap(), g.q_single(2).unwrap());
        assert_eq!(g.q_set(&[1, 2, 3]).unwrap(), g.total_uncertainty());
        assert!(g.q_set(&[]).is_err());
        assert!(g.q_set(&[0]).is_err());
        assert!(g.q_set(&[1, 1]).is_err());
    }

    #[test]
    fn commit_everything() {
        let f = line(&[0.0, 3.0, 5.0]);
        let g = NnGraph::build(&[0], &[1, 2], f).unwrap();
        let h = g.commit(&[1, 2]).unwrap();
        assert!(h.unlabeled().is_empty());
        assert_eq!(h.total_uncertainty(), 0.0);
        assert_eq!(h.labeled(), &[0, 1, 2]);
    }

    #[test]
    fn commit_tie_prefers_smaller_index() {
        // u=2 is at distance 1 from labeled 3 and from the newly labeled 1.
        let f = line(&[10.0, 1.0, 2.0, 3.0]);
        let g = NnGraph::build(&[3], &[1, 2], f.clone()).unwrap();
        assert_eq!(g.nn_of(2).unwrap(), 3);
        let h = g.commit(&[1]).unwrap();
        assert_eq!(h.nn_of(2).unwrap(), 1);
        assert_eq!(h, NnGraph::build(&[1, 3], &[2], f).unwrap());
    }

    #[test]
    fn cache_is_transparent() {
        let f = Arc::new(
            Matrix::from_rows(&[[0.1, 2.0], [1.3, -0.7], [0.4, 0.4], [2.2, 1.1], [-1.0, 0.0]])
                .unwrap(),
        );
        let cache = Arc::new(DistanceCache::new(&f, &[0, 1, 2, 3, 4]));
        let a = NnGraph::build(&[0], &[1, 2, 3, 4], f.clone()).unwrap();
        let b = NnGraph::build_with_cache(&[0], &[1, 2, 3, 4], f, Some(cache)).unwrap();
        assert_eq!(a, b);
        for u in [1, 2, 3, 4] {
            assert_eq!(a.q_single(u).unwrap(), b.q_single(u).unwrap());
        }
    }

    #[test]
    fn dump_format() {
        let g = NnGraph::build(&[0], &[1], line(&[0.0, 2.0])).unwrap();
        let mut buf = Vec::new();
        g.dump(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "u,nn,theta\n1,0,2\n");
    }

    #[test]
    fn bound_trivial_cases() {
        let d = bound_terms(&[1.0, 2.0], &[1.0, 2.0], &[3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert_eq!((d.delta_u, d.bound()), (0.0, 0.0));
        let d = bound_terms(&[1.0, -2.0], &[5.0, 2.0], &[3.0, 4.0], &[3.0, 4.0]).unwrap();
        assert_eq!(d.delta_u, 0.0);
        assert!(bound_terms(&[1.0], &[1.0, 2.0], &[0.0], &[0.0]).is_err());
    }
}
