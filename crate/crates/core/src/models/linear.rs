//! Least squares, ridge and LASSO on a design matrix.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::spec::{PenaltyConfig, PenaltyKind};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg;
use crate::scalar::Scalar;

/// `ŷ = intercept + xᵀ weights`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFit<F> {
    pub intercept: F,
    pub weights: Array1<F>,
    /// Coordinate-descent sweeps used (LASSO only).
    pub sweeps: usize,
}

impl<F: Scalar> LinearFit<F> {
    pub fn predict(&self, x: ArrayView2<F>) -> Array1<F> {
        x.dot(&self.weights).mapv(|v| v + self.intercept)
    }
}

struct Centered<F> {
    x: Array2<F>,
    y: Array1<F>,
    x_mean: Array1<F>,
    y_mean: F,
}

fn center<F: Scalar>(x: ArrayView2<F>, y: ArrayView1<F>, fit_intercept: bool) -> Centered<F> {
    if !fit_intercept {
        return Centered {
            x: x.to_owned(),
            y: y.to_owned(),
            x_mean: Array1::zeros(x.ncols()),
            y_mean: F::zero(),
        };
    }
    let x_mean = linalg::column_means(x);
    let y_mean = y.sum() / F::of_usize(y.len().max(1));
    let xc = &x - &x_mean.view().insert_axis(Axis(0));
    let yc = y.mapv(|v| v - y_mean);
    Centered {
        x: xc,
        y: yc,
        x_mean,
        y_mean,
    }
}

fn finish<F: Scalar>(c: &Centered<F>, weights: Array1<F>, sweeps: usize) -> LinearFit<F> {
    let intercept = c.y_mean - c.x_mean.dot(&weights);
    LinearFit {
        intercept,
        weights,
        sweeps,
    }
}

/// Ordinary least squares with intercept (the dynamic linear regression
/// when the design holds lags, dummies and externals).
pub fn fit_ols<F: Scalar>(m: &FeatureMatrix<F>) -> Result<LinearFit<F>> {
    let (n, p) = m.x.dim();
    if n <= p {
        return Err(Error::Singular(format!("{n} rows for {} coefficients", p + 1)));
    }
    // centred, unit-norm columns keep the QR rank test meaningful when raw
    // scales differ by orders of magnitude (load next to 0/1 dummies)
    let nf = F::of_usize(n);
    let x_mean = m.x.mean_axis(Axis(0)).expect("rows");
    let y_mean = m.target.sum() / nf;
    let mut design = &m.x - &x_mean;
    let mut scale = Array1::<F>::zeros(p);
    for (j, mut col) in design.columns_mut().into_iter().enumerate() {
        let norm = col.iter().map(|v| *v * *v).sum::<F>().sqrt();
        if norm == F::zero() {
            return Err(Error::Singular(format!("column {j} is constant")));
        }
        col.mapv_inplace(|v| v / norm);
        scale[j] = norm;
    }
    let yc = m.target.mapv(|v| v - y_mean);
    let b = linalg::lstsq(design.view(), yc.view())?;
    let weights = &b / &scale;
    Ok(LinearFit {
        intercept: y_mean - x_mean.dot(&weights),
        weights,
        sweeps: 0,
    })
}

/// OLS when `penalty` is `None`, otherwise ridge or LASSO.
pub fn fit_linear<F: Scalar>(m: &FeatureMatrix<F>, penalty: Option<&PenaltyConfig>) -> Result<LinearFit<F>> {
    match penalty {
        None => fit_ols(m),
        Some(cfg) => match cfg.kind {
            PenaltyKind::Ridge => Ok(ridge_path(m, &[F::of(cfg.lambda)], cfg.fit_intercept)?.remove(0)),
            PenaltyKind::Lasso => Ok(lasso_path(m, &[F::of(cfg.lambda)], cfg)?.remove(0)),
        },
    }
}

/// Ridge fits `min Σ r² + λ‖ω‖²` for each λ, sharing one Gram matrix.
pub fn ridge_path<F: Scalar>(m: &FeatureMatrix<F>, lambdas: &[F], fit_intercept: bool) -> Result<Vec<LinearFit<F>>> {
    let c = center(m.x.view(), m.target.view(), fit_intercept);
    let g = linalg::gram(c.x.view());
    let xty = c.x.t().dot(&c.y);
    lambdas
        .iter()
        .map(|&lambda| {
            if lambda < F::zero() {
                return Err(Error::Config("ridge lambda must be non-negative".into()));
            }
            let mut a = g.clone();
            for j in 0..a.nrows() {
                a[[j, j]] += lambda;
            }
            let w = linalg::spd_solve(a.view(), xty.view())
                .map_err(|_| Error::Singular("ridge system is singular at this lambda".into()))?;
            Ok(finish(&c, w, 0))
        })
        .collect()
}

/// Smallest LASSO penalty with an all-zero slope vector:
/// `max_j |⟨x_j − x̄_j, y − ȳ⟩| / n`.
pub fn lambda_max<F: Scalar>(m: &FeatureMatrix<F>) -> Result<F> {
    let c = center(m.x.view(), m.target.view(), true);
    let n = F::of_usize(m.n_rows().max(1));
    // same arithmetic as the first coordinate-descent step, so the slopes
    // at λ_max come out exactly zero
    let lmax = (0..c.x.ncols())
        .map(|j| c.x.column(j).to_owned().dot(&c.y) / n)
        .fold(F::zero(), |acc, v| acc.max(v.abs()));
    let scale = c.y.iter().fold(F::zero(), |a, v| a.max(v.abs()));
    if !(lmax > F::epsilon() * scale.max(F::one())) {
        return Err(Error::Degenerate(
            "lambda_max is zero (constant target or all-zero design)".into(),
        ));
    }
    Ok(lmax)
}

/// `len` values decreasing geometrically from `top` to `ratio · top`.
pub fn lambda_grid<F: Scalar>(top: F, len: usize, ratio: F) -> Vec<F> {
    if len == 1 {
        return vec![top];
    }
    let step = ratio.ln() / F::of_usize(len - 1);
    (0..len).map(|i| top * (step * F::of_usize(i)).exp()).collect()
}

/// Ridge grid top: the LASSO all-zero threshold expressed on the ridge
/// objective's scale (`Σ r²` rather than `(1/2n) Σ r²`), i.e. `2n · λ_max`.
pub fn ridge_lambda_max<F: Scalar>(m: &FeatureMatrix<F>) -> Result<F> {
    Ok(lambda_max(m)? * F::of_usize(2 * m.n_rows()))
}

fn soft_threshold<F: Scalar>(z: F, g: F) -> F {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        F::zero()
    }
}

/// Cyclic coordinate descent for `(1/2n)‖y − Xω‖² + λ‖ω‖₁` along `lambdas`,
/// warm-starting each fit from the previous one.
pub fn lasso_path<F: Scalar>(m: &FeatureMatrix<F>, lambdas: &[F], cfg: &PenaltyConfig) -> Result<Vec<LinearFit<F>>> {
    let c = center(m.x.view(), m.target.view(), cfg.fit_intercept);
    let (n, p) = c.x.dim();
    if n == 0 {
        return Err(Error::Empty("no training rows".into()));
    }
    let nf = F::of_usize(n);
    let tol = F::of(cfg.tolerance).max(F::epsilon() * F::of(64.0));
    let cols: Vec<Array1<F>> = (0..p).map(|j| c.x.column(j).to_owned()).collect();
    let a: Vec<F> = cols.iter().map(|x| x.dot(x) / nf).collect();
    let mut w = Array1::<F>::zeros(p);
    let mut r = c.y.clone();
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if lambda < F::zero() {
            return Err(Error::Config("lasso lambda must be non-negative".into()));
        }
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            let mut max_delta = F::zero();
            for j in 0..p {
                if a[j] == F::zero() {
                    continue;
                }
                let rho = cols[j].dot(&r) / nf + a[j] * w[j];
                let new = soft_threshold(rho, lambda) / a[j];
                let delta = new - w[j];
                if delta != F::zero() {
                    r.scaled_add(-delta, &cols[j]);
                    w[j] = new;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            if max_delta <= tol || sweeps >= cfg.max_sweeps {
                break;
            }
        }
        out.push(finish(&c, w.clone(), sweeps));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ColumnKind;
    use ndarray::array;

    fn matrix(x: Array2<f64>, y: Array1<f64>) -> FeatureMatrix<f64> {
        let n = x.nrows();
        let p = x.ncols();
        FeatureMatrix {
            x,
            target: y,
            row_times: (0..n).collect(),
            columns: (0..p).map(|j| ColumnKind::Predictor(format!("x{j}"))).collect(),
            standardization: None,
        }
    }

    fn sample() -> FeatureMatrix<f64> {
        let x = array![
            [0.3, 1.2, -0.4],
            [1.1, -0.7, 0.9],
            [-0.5, 0.4, 1.6],
            [0.8, 0.1, -1.1],
            [-1.4, 0.9, 0.2],
            [0.6, -1.5, 0.7],
            [0.2, 0.3, -0.3]
        ];
        let y = array![1.0, 2.5, -0.3, 0.7, -1.9, 2.2, 0.4];
        matrix(x, y)
    }

    #[test]
    fn zero_penalty_matches_ols() {
        let m = sample();
        let ols = fit_ols(&m).unwrap();
        let ridge = fit_linear(&m, Some(&PenaltyConfig::ridge(0.0))).unwrap();
        let lasso = fit_linear(&m, Some(&PenaltyConfig::lasso(0.0))).unwrap();
        for j in 0..3 {
            assert!((ols.weights[j] - ridge.weights[j]).abs() < 1e-8);
            assert!((ols.weights[j] - lasso.weights[j]).abs() < 1e-6);
        }
        assert!((ols.intercept - ridge.intercept).abs() < 1e-8);
    }

    #[test]
    fn lasso_at_lambda_max_is_exactly_zero() {
        let m = sample();
        let lmax = lambda_max(&m).unwrap();
        let fit = fit_linear(&m, Some(&PenaltyConfig::lasso(lmax))).unwrap();
        assert!(fit.weights.iter().all(|w| *w == 0.0));
        let below = fit_linear(&m, Some(&PenaltyConfig::lasso(lmax * 0.95))).unwrap();
        assert!(below.weights.iter().any(|w| *w != 0.0));
    }

    #[test]
    fn lambda_max_scales_with_target() {
        let m = sample();
        let mut m10 = m.clone();
        m10.target.mapv_inplace(|v| v * 10.0);
        let a = lambda_max(&m).unwrap();
        let b = lambda_max(&m10).unwrap();
        assert!((b - 10.0 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn constant_target_is_degenerate() {
        let mut m = sample();
        m.target.fill(3.0);
        assert!(matches!(lambda_max(&m), Err(Error::Degenerate(_))));
    }

    #[test]
    fn single_orthonormal_column_path_starts_at_zero() {
        let x = array![[0.5], [-0.5], [0.5], [-0.5]];
        let y = x.column(0).mapv(|v| 2.0 * v);
        let m = matrix(x, y);
        let lmax = lambda_max(&m).unwrap();
        let grid = lambda_grid(lmax, 5, 0.01);
        let path = lasso_path(&m, &grid, &PenaltyConfig::lasso(0.0)).unwrap();
        assert_eq!(path[0].weights[0], 0.0);
        assert!(path[4].weights[0] > 0.0);
    }

    #[test]
    fn grid_is_strictly_decreasing_with_endpoints() {
        let g = lambda_grid(5.0f64, 100, 0.01);
        assert_eq!(g.len(), 100);
        assert!((g[0] - 5.0).abs() < 1e-15);
        assert!((g[99] - 0.05).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn singular_ols_suggests_ridge() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]];
        let m = matrix(x, array![1.0, 2.0, 3.0, 4.0]);
        let err = fit_ols(&m).unwrap_err();
        assert!(err.to_string().contains("ridge"));
    }
}
