//! Feature maps from raw (standardized) features into the model space.
//!
//! The polynomial map emits every monomial of total degree `1..=k` in graded
//! lexicographic order: all degree-1 terms, then degree-2, and so on; within a
//! degree, monomials are the non-decreasing index tuples `(i1 <= i2 <= ...)`
//! in lexicographic order. For `x = [x1, x2]` and `k = 2` that is
//! `[x1, x2, x1², x1·x2, x2²]`. No constant term is produced; the regression
//! solver owns the intercept.

use crate::dataset::standardize;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Identity,
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureMapSpec {
    pub kind: FeatureKind,
    /// Ignored for [`FeatureKind::Identity`].
    pub degree: usize,
    /// Re-standardize the expanded columns before use.
    pub standardize_expanded: bool,
}

impl FeatureMapSpec {
    pub fn identity() -> Self {
        Self {
            kind: FeatureKind::Identity,
            degree: 1,
            standardize_expanded: true,
        }
    }

    pub fn polynomial(degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidInput("polynomial degree must be >= 1".into()));
        }
        Ok(Self {
            kind: FeatureKind::Polynomial,
            degree,
            standardize_expanded: true,
        })
    }
}

impl Default for FeatureMapSpec {
    fn default() -> Self {
        Self::identity()
    }
}

/// `C(n, r)` with overflow reported.
fn binomial(n: usize, r: usize) -> Option<usize> {
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    usize::try_from(acc).ok()
}

pub fn expanded_dim(d: usize, spec: &FeatureMapSpec) -> Result<usize> {
    match spec.kind {
        FeatureKind::Identity => Ok(d),
        FeatureKind::Polynomial => {
            let n = d
                .checked_add(spec.degree)
                .ok_or(Error::Overflow("expanded feature count"))?;
            binomial(n, spec.degree)
                .map(|c| c - 1)
                .ok_or(Error::Overflow("expanded feature count"))
        }
    }
}

/// Index tuples of every monomial, in the documented order.
pub fn monomials(d: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, start: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(d, i, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for deg in 1..=degree {
        rec(d, 0, deg, &mut Vec::with_capacity(deg), &mut out);
    }
    out
}

pub fn expand(x: &[f64], spec: &FeatureMapSpec) -> Vec<f64> {
    match spec.kind {
        FeatureKind::Identity => x.to_vec(),
        FeatureKind::Polynomial => expand_with(x, &monomials(x.len(), spec.degree)),
    }
}

fn expand_with(x: &[f64], terms: &[Vec<usize>]) -> Vec<f64> {
    terms
        .iter()
        .map(|t| t.iter().map(|&i| x[i]).product())
        .collect()
}

/// Expands every row; does not standardize.
pub fn expand_matrix(features: &Matrix, spec: &FeatureMapSpec) -> Result<Matrix> {
    match spec.kind {
        FeatureKind::Identity => Ok(features.clone()),
        FeatureKind::Polynomial => {
            let dim = expanded_dim(features.cols(), spec)?;
            let terms = monomials(features.cols(), spec.degree);
            let mut data = Vec::with_capacity(features.rows() * dim);
            for r in features.iter_rows() {
                data.extend(expand_with(r, &terms));
            }
            Matrix::new(features.rows(), dim, data)
        }
    }
}

/// The matrix the model and the uncertainty graph both operate on.
///
/// Identity maps pass through. Expanded features are re-standardized over all
/// rows when `standardize_expanded` is set.
pub fn model_space(features: &Matrix, spec: &FeatureMapSpec) -> Result<Matrix> {
    match spec.kind {
        FeatureKind::Identity => Ok(features.clone()),
        FeatureKind::Polynomial => {
            let z = expand_matrix(features, spec)?;
            Ok(if spec.standardize_expanded {
                standardize(&z)
            } else {
                z
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_d_degree_two() {
        let spec = FeatureMapSpec::polynomial(2).unwrap();
        let z = expand(&[2.0, 3.0], &spec);
        // x1, x2, x1^2, x1 x2, x2^2
        assert_eq!(z, vec![2.0, 3.0, 4.0, 6.0, 9.0]);
        assert_eq!(expanded_dim(2, &spec).unwrap(), 5);
    }

    #[test]
    fn identity_passthrough() {
        let x = [1.5, -2.0, 0.25];
        assert_eq!(expand(&x, &FeatureMapSpec::identity()), x.to_vec());
        assert_eq!(expanded_dim(3, &FeatureMapSpec::identity()).unwrap(), 3);
    }

    #[test]
    fn closed_form_counts() {
        let p = |k| FeatureMapSpec::polynomial(k).unwrap();
        assert_eq!(expanded_dim(3, &p(2)).unwrap(), 9);
        assert_eq!(expanded_dim(13, &p(1)).unwrap(), 13);
        assert_eq!(expanded_dim(6, &p(2)).unwrap(), 27);
        assert_eq!(expanded_dim(13, &p(2)).unwrap(), 104);
    }

    #[test]
    fn overflow_reported() {
        let spec = FeatureMapSpec::polynomial(usize::MAX / 2).unwrap();
        assert!(matches!(
            expanded_dim(usize::MAX / 2, &spec),
            Err(Error::Overflow(_))
        ));
        let spec = FeatureMapSpec::polynomial(200).unwrap();
        assert!(expanded_dim(200, &spec).is_err());
    }

    #[test]
    fn zero_degree_rejected() {
        assert!(FeatureMapSpec::polynomial(0).is_err());
    }

    #[test]
    fn expanded_columns_standardized() {
        let m = Matrix::from_rows(&[[0.0, 1.0], [1.0, 3.0], [2.0, -1.0], [5.0, 0.5]]).unwrap();
        let z = model_space(&m, &FeatureMapSpec::polynomial(2).unwrap()).unwrap();
        assert_eq!(z.cols(), 5);
        for j in 0..z.cols() {
            let (mu, sd) = crate::dataset::mean_std(&z.column(j));
            assert!(mu.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
        }
    }
}
