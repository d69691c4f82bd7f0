//! ε-insensitive support vector regression with a Gaussian kernel.
//!
//! The dual is solved with sequential minimal optimization over the paired
//! variables `(α_i, α_i*)`, using second-order working-set selection.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample;

use super::spec::SvrConfig;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::scalar::Scalar;
use crate::seeds;

/// Coefficients below this magnitude do not make a row a support vector.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;
const MAX_SIGMA_ROWS: usize = 500;

#[derive(Clone, Debug, PartialEq)]
pub struct SvrFit<F> {
    /// Retained training rows (standardized feature scale).
    pub support: Array2<F>,
    /// `α_i − α_i*` for each retained row, on the scaled target.
    pub coef: Array1<F>,
    pub bias: F,
    pub sigma: F,
    /// Affine map from the internal target scale back to prices.
    pub y_center: F,
    pub y_scale: F,
    pub iterations: usize,
    /// Largest KKT violation `max_up(−∇) − min_low(−∇)` at termination.
    pub kkt_gap: F,
}

impl<F: Scalar> SvrFit<F> {
    pub fn predict(&self, x: ArrayView2<F>) -> Array1<F> {
        let g = gamma(self.sigma);
        x.rows()
            .into_iter()
            .map(|row| {
                let mut s = self.bias;
                for (sv, c) in self.support.rows().into_iter().zip(self.coef.iter()) {
                    s += *c * rbf(row, sv, g);
                }
                self.y_center + self.y_scale * s
            })
            .collect()
    }

    pub fn n_support(&self) -> usize {
        self.coef.len()
    }
}

fn gamma<F: Scalar>(sigma: F) -> F {
    F::one() / (F::of(2.0) * sigma * sigma)
}

fn sq_dist<F: Scalar>(a: ArrayView1<F>, b: ArrayView1<F>) -> F {
    a.iter().zip(b.iter()).map(|(x, y)| (*x - *y) * (*x - *y)).sum()
}

fn rbf<F: Scalar>(a: ArrayView1<F>, b: ArrayView1<F>, gamma: F) -> F {
    (-gamma * sq_dist(a, b)).exp()
}

/// `exp(−‖a − b‖² / (2σ²))` for all row pairs.
pub fn rbf_kernel<F: Scalar>(x: ArrayView2<F>, sigma: F) -> Array2<F> {
    let n = x.nrows();
    let g = gamma(sigma);
    let xs = x.as_standard_layout();
    let flat = xs.as_slice().expect("standard layout");
    let p = x.ncols();
    let mut k = Array2::<F>::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = F::one();
        let a = &flat[i * p..(i + 1) * p];
        for j in 0..i {
            let b = &flat[j * p..(j + 1) * p];
            let d: F = a.iter().zip(b).map(|(u, v)| (*u - *v) * (*u - *v)).sum();
            let v = (-g * d).exp();
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// Median pairwise Euclidean distance over at most 500 rows drawn with `seed`.
pub fn median_heuristic_sigma<F: Scalar>(x: ArrayView2<F>, seed: u64) -> Result<F> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::Config("sigma heuristic needs at least two rows".into()));
    }
    let rows: Vec<usize> = if n > MAX_SIGMA_ROWS {
        let mut rng = seeds::rng(seed);
        let mut r = sample(&mut rng, n, MAX_SIGMA_ROWS).into_vec();
        r.sort_unstable();
        r
    } else {
        (0..n).collect()
    };
    let mut d = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for (a, &i) in rows.iter().enumerate() {
        for &j in &rows[..a] {
            d.push(sq_dist(x.row(i), x.row(j)).sqrt());
        }
    }
    let mid = d.len() / 2;
    let odd = d.len() % 2 == 1;
    let cmp = |a: &F, b: &F| a.partial_cmp(b).expect("finite distances");
    let (lower, upper, _) = d.select_nth_unstable_by(mid, cmp);
    let upper = *upper;
    let med = if odd {
        upper
    } else {
        let below = lower.iter().copied().fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
        (below + upper) / F::of(2.0)
    };
    if !(med > F::zero()) {
        return Err(Error::Config("sigma heuristic found all rows identical; set sigma explicitly".into()));
    }
    Ok(med)
}

/// Solution of the ε-SVR dual for a precomputed kernel matrix.
#[derive(Clone, Debug)]
pub struct DualSolution<F> {
    /// `α_i − α_i*`.
    pub beta: Array1<F>,
    pub bias: F,
    /// Dual objective `½ βᵀKβ + ε‖β‖₁ − yᵀβ`.
    pub objective: F,
    pub iterations: usize,
    pub kkt_gap: F,
}

/// Dual objective for a given coefficient vector.
pub fn dual_objective<F: Scalar>(k: ArrayView2<F>, y: ArrayView1<F>, epsilon: F, beta: ArrayView1<F>) -> F {
    let kb = k.dot(&beta);
    F::of(0.5) * beta.dot(&kb) + epsilon * beta.iter().map(|b| b.abs()).sum::<F>() - y.dot(&beta)
}

/// Minimizes `½ βᵀKβ + ε Σ|β_i| − yᵀβ` subject to `Σβ_i = 0`, `|β_i| ≤ C`.
pub fn solve_svr_dual<F: Scalar>(
    k: ArrayView2<F>,
    y: ArrayView1<F>,
    c: F,
    epsilon: F,
    tol: F,
    max_iter: usize,
) -> Result<DualSolution<F>> {
    let l = y.len();
    if !(c > F::zero()) {
        return Err(Error::Config("SVR needs C > 0".into()));
    }
    if k.dim() != (l, l) {
        return Err(Error::Schema("kernel size does not match target".into()));
    }
    // 2l variables: α (sign +1, linear term ε − y) and α* (sign −1, ε + y)
    let n = 2 * l;
    let kd: Vec<F> = k.iter().copied().collect();
    let row = |b: usize| &kd[b * l..(b + 1) * l];
    let sign = |t: usize| if t < l { F::one() } else { -F::one() };
    let base = |t: usize| if t < l { t } else { t - l };
    let mut alpha = vec![F::zero(); n];
    let mut grad: Vec<F> = (0..n)
        .map(|t| if t < l { epsilon - y[t] } else { epsilon + y[t - l] })
        .collect();
    let tau = F::of(1e-12);
    let two = F::of(2.0);
    let in_up = |t: usize, a: F| if t < l { a < c } else { a > F::zero() };
    let in_low = |t: usize, a: F| if t < l { a > F::zero() } else { a < c };

    let mut iterations = 0;
    let mut gap = F::zero();
    while iterations < max_iter {
        // i maximizes −y_t ∇_t over I_up
        let mut gmax = F::neg_infinity();
        let mut gmin = F::infinity();
        let mut i = usize::MAX;
        for t in 0..n {
            let v = -sign(t) * grad[t];
            if in_up(t, alpha[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(t, alpha[t]) && v < gmin {
                gmin = v;
            }
        }
        gap = gmax - gmin;
        if i == usize::MAX || gap <= tol {
            break;
        }
        // j minimizes the second-order decrease over I_low with −y∇ < gmax
        let bi = base(i);
        let ki = row(bi);
        let kii = ki[bi];
        let mut j = usize::MAX;
        let mut best = F::infinity();
        for t in 0..n {
            if !in_low(t, alpha[t]) {
                continue;
            }
            let b = gmax + sign(t) * grad[t];
            if b > F::zero() {
                let bt = base(t);
                let mut a = kii + kd[bt * l + bt] - two * ki[bt];
                if a <= F::zero() {
                    a = tau;
                }
                let v = -(b * b) / a;
                if v < best {
                    best = v;
                    j = t;
                }
            }
        }
        if j == usize::MAX {
            break;
        }
        iterations += 1;
        let bj = base(j);
        let kj = row(bj);
        let (yi, yj) = (sign(i), sign(j));
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let kij = ki[bj];
        if yi != yj {
            let mut quad = kii + kj[bj] - two * kij;
            if quad <= F::zero() {
                quad = tau;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > F::zero() {
                if alpha[j] < F::zero() {
                    alpha[j] = F::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < F::zero() {
                alpha[i] = F::zero();
                alpha[j] = -diff;
            }
            if diff > F::zero() {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = kii + kj[bj] - two * kij;
            if quad <= F::zero() {
                quad = tau;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < F::zero() {
                alpha[j] = F::zero();
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < F::zero() {
                alpha[i] = F::zero();
                alpha[j] = sum;
            }
        }
        // ∇_t += y_t (y_i Δα_i K_{t,i} + y_j Δα_j K_{t,j})
        let wi = yi * (alpha[i] - ai_old);
        let wj = yj * (alpha[j] - aj_old);
        let (gp, gm) = grad.split_at_mut(l);
        for t in 0..l {
            let u = wi * ki[t] + wj * kj[t];
            gp[t] += u;
            gm[t] -= u;
        }
    }
    if iterations >= max_iter && gap > tol {
        return Err(Error::Convergence {
            iterations,
            best_objective: f64::NAN,
            best_params: Vec::new(),
        });
    }
    let beta: Array1<F> = (0..l).map(|t| alpha[t] - alpha[t + l]).collect();
    let bias = bias_from(&alpha, &grad, c, l);
    let objective = dual_objective(k, y, epsilon, beta.view());
    Ok(DualSolution {
        beta,
        bias,
        objective,
        iterations,
        kkt_gap: gap,
    })
}

/// Offset from free variables, or the midpoint of the feasible interval.
fn bias_from<F: Scalar>(alpha: &[F], grad: &[F], c: F, l: usize) -> F {
    let mut ub = F::infinity();
    let mut lb = F::neg_infinity();
    let mut sum = F::zero();
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let y = if t < l { F::one() } else { -F::one() };
        let yg = y * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= F::zero();
        if at_upper {
            if y < F::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y > F::zero() {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 {
        sum / F::of_usize(free)
    } else {
        (ub + lb) / F::of(2.0)
    };
    -rho
}

pub fn fit_svr<F: Scalar>(m: &FeatureMatrix<F>, cfg: &SvrConfig) -> Result<SvrFit<F>> {
    if !(cfg.c > 0.0) || !(cfg.epsilon >= 0.0) || (!cfg.sigma_rule && !(cfg.sigma > 0.0)) {
        return Err(Error::Config("SVR needs C > 0, epsilon >= 0 and sigma > 0".into()));
    }
    let n = m.n_rows();
    if n < 2 {
        return Err(Error::Empty("SVR needs at least two rows".into()));
    }
    let sigma = if cfg.sigma_rule {
        median_heuristic_sigma(m.x.view(), cfg.seed)?
    } else {
        F::of(cfg.sigma)
    };
    let k = rbf_kernel(m.x.view(), sigma);
    fit_svr_with_kernel(m, &k, sigma, cfg)
}

/// Fits against a precomputed kernel of `m.x`, letting a tuner reuse one
/// kernel across the C grid.
pub fn fit_svr_with_kernel<F: Scalar>(m: &FeatureMatrix<F>, k: &Array2<F>, sigma: F, cfg: &SvrConfig) -> Result<SvrFit<F>> {
    let n = m.n_rows();
    let y_center = m.target.sum() / F::of_usize(n);
    let sd = crate::linalg::sample_std(m.target.as_slice().expect("contiguous target"));
    let y_scale = if sd > F::zero() { sd } else { F::one() };
    let ys = m.target.mapv(|v| (v - y_center) / y_scale);
    let sol = solve_svr_dual(
        k.view(),
        ys.view(),
        F::of(cfg.c),
        F::of(cfg.epsilon),
        F::of(cfg.tolerance),
        max_iterations(n),
    )?;
    let keep: Vec<usize> = (0..n)
        .filter(|&i| sol.beta[i].abs() > F::of(SUPPORT_THRESHOLD))
        .collect();
    Ok(SvrFit {
        support: m.x.select(ndarray::Axis(0), &keep),
        coef: keep.iter().map(|&i| sol.beta[i]).collect(),
        bias: sol.bias,
        sigma,
        y_center,
        y_scale,
        iterations: sol.iterations,
        kkt_gap: sol.kkt_gap,
    })
}

fn max_iterations(n: usize) -> usize {
    (1000 * n).max(100_000)
}
