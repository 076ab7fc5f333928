//! Least-squares and ridge fitting with an unpenalized intercept.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Singular values below `RCOND * s_max` are dropped when `alpha == 0`.
pub const RCOND: f64 = 1e-10;

/// Ridge term used by the normal-equation fallback when the SVD does not converge.
pub const FLOOR_ALPHA: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub ridge_alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    /// `||∇|| ` of the penalized objective over `(w, b)` at the solution.
    pub normal_equation_residual: f64,
    /// Residual divided by `||[Xᵀy; Σy]||`.
    pub relative_residual: f64,
    pub effective_rank_deficient: bool,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.cols(),
            });
        }
        Ok(x.iter_rows().map(|r| self.predict_row(r)).collect())
    }

    /// `||X w + b - y||² + α||w||²`.
    pub fn objective(&self, x: &Matrix, y: &[f64]) -> f64 {
        let sse: f64 = x
            .iter_rows()
            .zip(y)
            .map(|(r, t)| {
                let e = self.predict_row(r) - t;
                e * e
            })
            .sum();
        sse + self.ridge_alpha * self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

/// Minimizes `||Xw + b - y||² + α||w||²` with `b` unpenalized.
///
/// Solved on centered data through an SVD; at `α = 0` this is the
/// minimum-norm least-squares solution.
pub fn fit(x: &Matrix, y: &[f64], alpha: f64) -> Result<(LinearModel, FitDiagnostics)> {
    let (m, dim) = (x.rows(), x.cols());
    if m == 0 {
        return Err(Error::InvalidInput("cannot fit on zero rows".into()));
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: y.len(),
        });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("design matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets"));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be finite and >= 0, got {alpha}")));
    }

    let x_mean: Vec<f64> = (0..dim)
        .map(|j| x.iter_rows().map(|r| r[j]).sum::<f64>() / m as f64)
        .collect();
    let y_mean = y.iter().sum::<f64>() / m as f64;
    let xc = DMatrix::from_fn(m, dim, |i, j| x.get(i, j) - x_mean[j]);
    let yc = DVector::from_iterator(m, y.iter().map(|v| v - y_mean));

    let (w, deficient) = match solve_svd(&xc, &yc, alpha) {
        Some(sol) => sol,
        None => (solve_normal(&xc, &yc, alpha + FLOOR_ALPHA)?, true),
    };

    let weights: Vec<f64> = w.iter().copied().collect();
    let bias = y_mean - weights.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
    let model = LinearModel {
        weights,
        bias,
        ridge_alpha: alpha,
    };
    if model.weights.iter().any(|v| !v.is_finite()) || !model.bias.is_finite() {
        return Err(Error::NonFinite("fitted model"));
    }
    let (res, rel) = stationarity_residual(&model, x, y);
    Ok((
        model,
        FitDiagnostics {
            normal_equation_residual: res,
            relative_residual: rel,
            effective_rank_deficient: deficient,
        },
    ))
}

fn solve_svd(xc: &DMatrix<f64>, yc: &DVector<f64>, alpha: f64) -> Option<(DVector<f64>, bool)> {
    let (m, dim) = xc.shape();
    let svd = SVD::try_new(xc.clone(), true, true, f64::EPSILON, 0)?;
    let u = svd.u.as_ref()?;
    let vt = svd.v_t.as_ref()?;
    let s_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = RCOND * s_max;
    let mut w = DVector::zeros(dim);
    let mut rank = 0usize;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let keep = s > cutoff && s > 0.0;
        rank += keep as usize;
        let filter = if alpha > 0.0 {
            s / (s * s + alpha)
        } else if keep {
            1.0 / s
        } else {
            continue;
        };
        let coef = u.column(k).dot(yc) * filter;
        w.axpy(coef, &vt.row(k).transpose(), 1.0);
    }
    // Centering removes one degree of freedom.
    let deficient = rank < dim || m <= dim;
    Some((w, deficient))
}

fn solve_normal(xc: &DMatrix<f64>, yc: &DVector<f64>, alpha: f64) -> Result<DVector<f64>> {
    let dim = xc.ncols();
    let gram = xc.transpose() * xc + DMatrix::identity(dim, dim) * alpha;
    let rhs = xc.transpose() * yc;
    gram.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::InvalidInput("normal equations are not positive definite".into()))
}

/// Gradient norm of the penalized objective (halved) at `model`, absolute and
/// relative to `||[Xᵀy; Σy]||`.
pub fn stationarity_residual(model: &LinearModel, x: &Matrix, y: &[f64]) -> (f64, f64) {
    let dim = model.dim();
    let mut gw = vec![0.0; dim];
    let mut gb = 0.0;
    let mut xty = vec![0.0; dim];
    let mut sy = 0.0;
    for (r, &t) in x.iter_rows().zip(y) {
        let e = model.predict_row(r) - t;
        for j in 0..dim {
            gw[j] += r[j] * e;
            xty[j] += r[j] * t;
        }
        gb += e;
        sy += t;
    }
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g += model.ridge_alpha * w;
    }
    let norm = |v: &[f64], s: f64| (v.iter().map(|a| a * a).sum::<f64>() + s * s).sqrt();
    let abs = norm(&gw, gb);
    let scale = norm(&xty, sy);
    (abs, if scale > 0.0 { abs / scale } else { abs })
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("rmse of empty vectors".into()));
    }
    let mse = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt())
}
