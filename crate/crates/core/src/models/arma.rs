//! Seasonal-ARMA(X) estimation by conditional sum of squares.
//!
//! The model is `y_t = z_tᵀη + e_t + Σ_j θ_j e_{t−j}` where `z_t` holds an
//! intercept, the seasonal lags, `p` recent lags, dummies and predictors.
//! For fixed θ the residuals are linear in η, so η is profiled out by least
//! squares on MA-filtered data and only θ is searched numerically.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex;

use super::spec::ArmaOrder;
use crate::error::{Error, Result};
use crate::features::{ColumnKind, FeatureMatrix};
use crate::linalg;
use crate::scalar::Scalar;

/// Gradient tolerance on `ln S(θ)`.
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ArmaFit<F> {
    pub p: usize,
    pub q: usize,
    pub intercept: F,
    /// Coefficients on `columns`, in design order.
    pub weights: Array1<F>,
    pub columns: Vec<ColumnKind>,
    /// MA coefficients `θ_1..θ_q`.
    pub theta: Vec<F>,
    /// Conditional sum of squares at the estimate.
    pub css: F,
    pub n_obs: usize,
    pub aicc: F,
    pub iterations: usize,
    /// MA roots were moved outside the unit circle after estimation.
    pub reflected: bool,
    /// Line search stalled before the gradient tolerance was met.
    pub stalled: bool,
    /// Last `q` in-sample residuals, oldest first.
    pub residual_tail: Vec<F>,
    /// `(p, q, AICc)` of every candidate that was fitted.
    pub candidates: Vec<(usize, usize, F)>,
}

impl<F: Scalar> ArmaFit<F> {
    pub fn sigma2(&self) -> F {
        self.css / F::of_usize(self.n_obs)
    }

    /// AR coefficient on recent lag `i` (1-based), zero when absent.
    pub fn phi(&self, i: usize) -> F {
        self.coefficient(&ColumnKind::RecentLag(i))
    }

    pub fn coefficient(&self, col: &ColumnKind) -> F {
        self.columns
            .iter()
            .position(|c| c == col)
            .map(|j| self.weights[j])
            .unwrap_or(F::zero())
    }
}

/// `v_t = u_t − Σ_j θ_j v_{t−j}` with zero initial values.
pub fn ma_filter<F: Scalar>(u: ArrayView1<F>, theta: &[F]) -> Array1<F> {
    let mut v = Array1::<F>::zeros(u.len());
    for t in 0..u.len() {
        let mut x = u[t];
        for (j, th) in theta.iter().enumerate() {
            if t > j {
                x -= *th * v[t - j - 1];
            }
        }
        v[t] = x;
    }
    v
}

struct Profile<F> {
    css: F,
    grad: Vec<F>,
    eta: Array1<F>,
    resid: Array1<F>,
}

fn with_intercept<F: Scalar>(x: ArrayView2<F>) -> Array2<F> {
    let (n, p) = x.dim();
    let mut z = Array2::<F>::ones((n, p + 1));
    z.slice_mut(s![.., 1..]).assign(&x);
    z
}

fn profile<F: Scalar>(z: &Array2<F>, y: ArrayView1<F>, theta: &[F]) -> Result<Profile<F>> {
    let (yf, zf) = if theta.is_empty() {
        (y.to_owned(), z.clone())
    } else {
        let mut zf = Array2::<F>::zeros(z.dim());
        for j in 0..z.ncols() {
            zf.column_mut(j).assign(&ma_filter(z.column(j), theta));
        }
        (ma_filter(y, theta), zf)
    };
    let eta = linalg::lstsq(zf.view(), yf.view())?;
    let resid = &yf - &zf.dot(&eta);
    let css = resid.dot(&resid);
    let mut grad = Vec::with_capacity(theta.len());
    for j in 1..=theta.len() {
        let mut lagged = Array1::<F>::zeros(resid.len());
        for t in j..resid.len() {
            lagged[t] = -resid[t - j];
        }
        let d = ma_filter(lagged.view(), theta);
        grad.push(F::of(2.0) * resid.dot(&d));
    }
    Ok(Profile { css, grad, eta, resid })
}

/// `ln S(θ)` and its gradient; `None` when θ gives a non-finite objective.
fn objective<F: Scalar>(z: &Array2<F>, y: ArrayView1<F>, theta: &[F]) -> Option<(F, Vec<F>)> {
    let p = profile(z, y, theta).ok()?;
    if !p.css.is_finite() || p.css <= F::zero() || p.grad.iter().any(|g| !g.is_finite()) {
        return None;
    }
    let g = p.grad.iter().map(|g| *g / p.css).collect();
    Some((p.css.ln(), g))
}

struct Minimum<F> {
    x: Vec<F>,
    iterations: usize,
    stalled: bool,
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Quasi-Newton (BFGS) minimization with Armijo backtracking.
fn bfgs<F: Scalar>(f: impl Fn(&[F]) -> Option<(F, Vec<F>)>, x0: Vec<F>, tol: F, max_iter: usize) -> Result<Minimum<F>> {
    let k = x0.len();
    let mut x = x0;
    let (mut fx, mut g) = f(&x).ok_or_else(|| Error::Degenerate("CSS objective is not finite at the start".into()))?;
    let identity = || {
        let mut h = vec![vec![F::zero(); k]; k];
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = F::one();
        }
        h
    };
    let mut h = identity();
    let mut fresh = true;
    for it in 0..max_iter {
        if g.iter().all(|v| v.abs() <= tol) {
            return Ok(Minimum {
                x,
                iterations: it,
                stalled: false,
            });
        }
        let mut d: Vec<F> = (0..k).map(|i| -dot(&h[i], &g)).collect();
        if dot(&g, &d) >= F::zero() {
            h = identity();
            fresh = true;
            d = g.iter().map(|v| -*v).collect();
        }
        let norm = dot(&d, &d).sqrt();
        let mut step = if norm > F::of(0.5) { F::of(0.5) / norm } else { F::one() };
        let slope = dot(&g, &d);
        let mut accepted = None;
        while step > F::of(1e-14) {
            let xn: Vec<F> = x.iter().zip(&d).map(|(a, b)| *a + step * *b).collect();
            if let Some((fnew, gnew)) = f(&xn) {
                if fnew <= fx + F::of(1e-4) * step * slope {
                    accepted = Some((xn, fnew, gnew));
                    break;
                }
            }
            step *= F::of(0.5);
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if fresh {
                return Ok(Minimum {
                    x,
                    iterations: it,
                    stalled: true,
                });
            }
            h = identity();
            fresh = true;
            continue;
        };
        let sv: Vec<F> = xn.iter().zip(&x).map(|(a, b)| *a - *b).collect();
        let yv: Vec<F> = gnew.iter().zip(&g).map(|(a, b)| *a - *b).collect();
        let sy = dot(&sv, &yv);
        if sy > F::epsilon() * dot(&sv, &sv).sqrt() * dot(&yv, &yv).sqrt() && sy > F::zero() {
            let hy: Vec<F> = (0..k).map(|i| dot(&h[i], &yv)).collect();
            let yhy = dot(&yv, &hy);
            let rho = F::one() / sy;
            for i in 0..k {
                for j in 0..k {
                    h[i][j] += (F::one() + yhy * rho) * sv[i] * sv[j] * rho - (hy[i] * sv[j] + sv[i] * hy[j]) * rho;
                }
            }
            fresh = false;
        }
        x = xn;
        fx = fnew;
        g = gnew;
    }
    Err(Error::Convergence {
        iterations: max_iter,
        best_objective: fx.exp().as_f64(),
        best_params: x.iter().map(|v| v.as_f64()).collect(),
    })
}

/// Roots of `c_0 + c_1 z + … + c_n z^n` by Durand–Kerner iteration.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().is_some_and(|v| v.abs() < 1e-14) {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let monic: Vec<f64> = c.iter().map(|v| v / lead).collect();
    let eval = |z: Complex<f64>| monic.iter().rev().fold(Complex::new(0.0, 0.0), |acc, a| acc * z + a);
    let radius = 1.0 + monic[..n].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut roots: Vec<Complex<f64>> = (0..n)
        .map(|k| Complex::from_polar(radius * 0.9, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();
    for _ in 0..2000 {
        let mut change = 0.0f64;
        for i in 0..n {
            let mut den = Complex::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= roots[i] - roots[j];
                }
            }
            if den.norm() == 0.0 {
                den = Complex::new(1e-12, 0.0);
            }
            let delta = eval(roots[i]) / den;
            roots[i] -= delta;
            change = change.max(delta.norm());
        }
        if change < 1e-15 {
            break;
        }
    }
    roots
}

/// Reflects roots of `1 + Σθ_j z^j` inside the unit circle to their
/// reciprocals. Returns the new θ and whether anything moved.
pub fn make_invertible<F: Scalar>(theta: &[F]) -> (Vec<F>, bool) {
    if theta.is_empty() {
        return (Vec::new(), false);
    }
    let mut c = vec![1.0];
    c.extend(theta.iter().map(|t| t.as_f64()));
    let roots = polynomial_roots(&c);
    if roots.iter().all(|r| r.norm() > 1.0) {
        return (theta.to_vec(), false);
    }
    // Π (1 − z / r_k) keeps the constant term at 1
    let mut poly = vec![Complex::new(1.0, 0.0)];
    for r in roots {
        let r = if r.norm() <= 1.0 { Complex::new(1.0, 0.0) / r.conj() } else { r };
        let mut next = vec![Complex::new(0.0, 0.0); poly.len() + 1];
        for (i, a) in poly.iter().enumerate() {
            next[i] += a;
            next[i + 1] -= a / r;
        }
        poly = next;
    }
    let out = poly[1..].iter().map(|v| F::of(v.re)).collect();
    (out, true)
}

/// AICc with `k` = regression coefficients + MA coefficients + noise variance.
pub fn aicc<F: Scalar>(css: F, n: usize, k: usize) -> F {
    let nf = F::of_usize(n);
    let kf = F::of_usize(k);
    if n <= k + 1 {
        return F::infinity();
    }
    nf * (css / nf).ln() + F::of(2.0) * kf + F::of(2.0) * kf * (kf + F::one()) / (nf - kf - F::one())
}

fn recent_lag_labels(max_p: usize, keep: usize) -> Vec<String> {
    (keep + 1..=max_p).map(|i| ColumnKind::RecentLag(i).label()).collect()
}

/// Fits one `(p, q)` on a design that holds at least `p` recent-lag columns;
/// surplus recent lags are dropped.
pub fn fit_arma_order<F: Scalar>(m: &FeatureMatrix<F>, p: usize, q: usize, max_iterations: usize) -> Result<ArmaFit<F>> {
    let have = m.columns.iter().filter(|c| matches!(c, ColumnKind::RecentLag(_))).count();
    if have < p {
        return Err(Error::Schema(format!("design has {have} recent lags, order needs {p}")));
    }
    if p + q == 0 {
        return Err(Error::Config("ARMA order needs p + q >= 1".into()));
    }
    let d = m.without_columns(&recent_lag_labels(have, p));
    let n = d.n_rows();
    let z = with_intercept(d.x.view());
    if n <= z.ncols() + q + 1 {
        return Err(Error::History {
            needed: z.ncols() + q + 2,
            available: n,
        });
    }
    let y = d.target.view();
    let (theta, iterations, stalled) = if q == 0 {
        (Vec::new(), 0, false)
    } else {
        let min = bfgs(|th| objective(&z, y, th), vec![F::zero(); q], F::of(GRADIENT_TOLERANCE), max_iterations)?;
        (min.x, min.iterations, min.stalled)
    };
    let (theta, reflected) = make_invertible(&theta);
    let prof = profile(&z, y, &theta)?;
    let k = z.ncols() + q + 1;
    let tail = prof.resid.slice(s![n.saturating_sub(q)..]).to_vec();
    Ok(ArmaFit {
        p,
        q,
        intercept: prof.eta[0],
        weights: prof.eta.slice(s![1..]).to_owned(),
        columns: d.columns.clone(),
        theta,
        css: prof.css,
        n_obs: n,
        aicc: aicc(prof.css, n, k),
        iterations,
        reflected,
        stalled,
        residual_tail: tail,
        candidates: Vec::new(),
    })
}

/// Fits the fixed order, or every candidate with AICc selection. The design
/// must carry as many recent-lag columns as the largest candidate `p`.
pub fn fit_seasonal_arma<F: Scalar>(m: &FeatureMatrix<F>, order: &ArmaOrder) -> Result<ArmaFit<F>> {
    let cands = order.candidates();
    if cands.is_empty() {
        return Err(Error::Config("empty ARMA order grid".into()));
    }
    let mut best: Option<ArmaFit<F>> = None;
    let mut table = Vec::new();
    let mut first_err = None;
    for &(p, q) in &cands {
        match fit_arma_order(m, p, q, order.max_iterations) {
            Ok(fit) => {
                table.push((p, q, fit.aicc));
                if best.as_ref().is_none_or(|b| fit.aicc < b.aicc) {
                    best = Some(fit);
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    match best {
        Some(mut b) => {
            b.candidates = table;
            Ok(b)
        }
        None => Err(first_err.expect("at least one candidate")),
    }
}

/// Largest recent-lag order among the candidates.
pub fn max_recent_lag(order: &ArmaOrder) -> usize {
    order.candidates().iter().map(|c| c.0).max().unwrap_or(0)
}

/// 24 recursive forecasts. `x` holds the design rows of the target hours
/// built from a history in which target-day prices are unknown; recent-lag
/// entries pointing into the target day are replaced by earlier forecasts.
/// `tail` holds in-sample residuals ending right before the first target
/// hour, or is empty when none are available.
pub fn forecast_recursive<F: Scalar>(fit: &ArmaFit<F>, x: ArrayView2<F>, tail: &[F]) -> Vec<F> {
    let h = x.nrows();
    let mut out: Vec<F> = Vec::with_capacity(h);
    for t in 0..h {
        let mut v = fit.intercept;
        for (j, col) in fit.columns.iter().enumerate() {
            let value = match col {
                ColumnKind::RecentLag(i) if t >= *i => out[t - i],
                _ => x[[t, j]],
            };
            v += fit.weights[j] * value;
        }
        // e_{t−j} for in-sample hours; zero once inside the forecast horizon
        for (j, th) in fit.theta.iter().enumerate() {
            let lag = j + 1;
            if lag > t && tail.len() + t >= lag {
                v += *th * tail[tail.len() + t - lag];
            }
        }
        out.push(v);
    }
    out
}
