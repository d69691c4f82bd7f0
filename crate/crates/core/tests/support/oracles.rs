//! Dense reference solutions for the model solvers.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use pricecast_core::features::FeatureMatrix;
use pricecast_core::models::forest::{best_split, grow_tree, Node};
use pricecast_core::models::linear::{fit_linear, fit_ols, lambda_max};
use pricecast_core::models::svr::{dual_objective, rbf_kernel, solve_svr_dual};
use pricecast_core::models::{fit_blm, fit_pcr, BlmConfig, PenaltyConfig};
use pricecast_core::seeds;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian(rng: &mut impl Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| StandardNormal.sample(rng))
}

pub fn instance(seed: u64, n: usize, p: usize) -> FeatureMatrix<f64> {
    let mut rng = seeds::rng(seed);
    let x = gaussian(&mut rng, n, p);
    let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y = Array1::from_shape_fn(n, |i| {
        3.0 + (0..p).map(|j| beta[j] * x[[i, j]]).sum::<f64>() + 0.5 * normal(&mut rng)
    });
    FeatureMatrix::from_arrays(x, y)
}

pub fn to_na(x: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[[i, j]])
}

/// Centered design and target as nalgebra values.
pub fn centered(m: &FeatureMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, f64) {
    let x = to_na(&m.x);
    let means = DVector::from_fn(x.ncols(), |j, _| x.column(j).mean());
    let xc = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - means[j]);
    let ym = m.target.mean().unwrap();
    let yc = DVector::from_fn(x.nrows(), |i, _| m.target[i] - ym);
    (xc, yc, means, ym)
}

pub fn ols_oracle(m: &FeatureMatrix<f64>) -> DVector<f64> {
    let (xc, yc, _, _) = centered(m);
    (xc.transpose() * &xc).lu().solve(&(xc.transpose() * yc)).unwrap()
}

/// Largest coefficient gap between ridge and `(XᵀX + λI)⁻¹Xᵀy` on centered
/// 50×8 designs.
pub fn ridge_gap(instances: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..instances {
        let m = instance(seed, 50, 8);
        let lambda = 0.1 * (seed + 1) as f64;
        let (xc, yc, means, ym) = centered(&m);
        let a = xc.transpose() * &xc + DMatrix::identity(8, 8) * lambda;
        let w = a.lu().solve(&(xc.transpose() * yc)).unwrap();
        let fit = fit_linear(&m, Some(&PenaltyConfig::ridge(lambda))).unwrap();
        for j in 0..8 {
            worst = worst.max((fit.weights[j] - w[j]).abs());
        }
        worst = worst.max((fit.intercept - (ym - means.dot(&w))).abs());
    }
    worst
}

/// Instances where LASSO at λ_max keeps a nonzero slope, and instances
/// where nothing enters at 0.9·λ_max.
pub fn lasso_threshold_violations(instances: u64) -> (usize, usize) {
    let (mut nonzero, mut stuck) = (0, 0);
    for seed in 0..instances {
        let m = instance(100 + seed, 60, 6);
        let top = lambda_max(&m).unwrap();
        let at = fit_linear(&m, Some(&PenaltyConfig::lasso(top))).unwrap();
        nonzero += at.weights.iter().any(|w| *w != 0.0) as usize;
        let below = fit_linear(&m, Some(&PenaltyConfig::lasso(top * 0.9))).unwrap();
        stuck += below.weights.iter().all(|w| *w == 0.0) as usize;
    }
    (nonzero, stuck)
}

/// Largest gap between PCR with every component (and plain OLS) and the
/// normal-equation solution.
pub fn pcr_full_rank_gap(instances: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..instances {
        let m = instance(200 + seed, 40, 7);
        let w = ols_oracle(&m);
        let pcr = fit_pcr(&m, 7).unwrap();
        let ols = fit_ols(&m).unwrap();
        for j in 0..7 {
            worst = worst.max((pcr.weights[j] - w[j]).abs()).max((ols.weights[j] - w[j]).abs());
        }
    }
    worst
}

/// Largest gap between PCR with `k` components and regression on the
/// leading `k` eigenvectors of `XᵀX`.
pub fn pcr_eigen_gap() -> f64 {
    let m = instance(300, 80, 5);
    let (xc, yc, _, _) = centered(&m);
    let eig = (xc.transpose() * &xc).symmetric_eigen();
    let mut order: Vec<usize> = (0..5).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut worst: f64 = 0.0;
    for k in 1..=5 {
        let v = DMatrix::from_fn(5, k, |i, j| eig.eigenvectors[(i, order[j])]);
        let z = &xc * &v;
        let g = (z.transpose() * &z).lu().solve(&(z.transpose() * &yc)).unwrap();
        let w = v * g;
        let fit = fit_pcr(&m, k).unwrap();
        for j in 0..5 {
            worst = worst.max((fit.weights[j] - w[j]).abs());
        }
    }
    worst
}

/// Minimum of `½βᵀKβ + ε|β|₁ − yᵀβ` over `Σβ = 0`, `|β| ≤ C` by enumerating
/// every assignment of each coordinate to a bound, zero or an open interval
/// of fixed sign, solving the KKT system of the free coordinates and keeping
/// the best feasible point.
pub fn qp_oracle(k: &Array2<f64>, y: &Array1<f64>, c: f64, eps: f64) -> f64 {
    let l = y.len();
    let kn = to_na(k);
    let mut best = f64::INFINITY;
    let states = 5usize.pow(l as u32);
    let mut beta = vec![0.0; l];
    for code in 0..states {
        let mut s = code;
        let mut free = Vec::new();
        let mut sign = vec![0.0; l];
        for i in 0..l {
            match s % 5 {
                0 => beta[i] = -c,
                1 => beta[i] = 0.0,
                2 => beta[i] = c,
                3 => {
                    free.push(i);
                    sign[i] = -1.0;
                }
                _ => {
                    free.push(i);
                    sign[i] = 1.0;
                }
            }
            s /= 5;
        }
        let fixed_sum: f64 = (0..l).filter(|i| sign[*i] == 0.0).map(|i| beta[i]).sum();
        if free.is_empty() {
            if fixed_sum.abs() > 1e-12 {
                continue;
            }
        } else {
            let f = free.len();
            let mut a = DMatrix::zeros(f + 1, f + 1);
            let mut b = DVector::zeros(f + 1);
            for (r, &i) in free.iter().enumerate() {
                for (cc, &j) in free.iter().enumerate() {
                    a[(r, cc)] = kn[(i, j)];
                }
                a[(r, f)] = 1.0;
                a[(f, r)] = 1.0;
                let fixed_part: f64 = (0..l).filter(|j| sign[*j] == 0.0).map(|j| kn[(i, j)] * beta[j]).sum();
                b[r] = y[i] - eps * sign[i] - fixed_part;
            }
            b[f] = -fixed_sum;
            let Some(sol) = a.lu().solve(&b) else { continue };
            let mut ok = true;
            for (r, &i) in free.iter().enumerate() {
                let v = sol[r];
                if v * sign[i] <= 0.0 || v.abs() >= c {
                    ok = false;
                    break;
                }
                beta[i] = v;
            }
            if !ok {
                continue;
            }
        }
        let bv = Array1::from(beta.clone());
        best = best.min(dual_objective(k.view(), y.view(), eps, bv.view()));
    }
    best
}

/// Largest objective gap between the SMO solution and [`qp_oracle`], after
/// checking the dual constraints hold.
pub fn svr_qp_gap(instances: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..instances {
        let mut rng = seeds::rng(400 + seed);
        let l = 6 + (seed as usize % 3);
        let x = gaussian(&mut rng, l, 2);
        let y = Array1::from_shape_fn(l, |i| (x[[i, 0]]).sin() + 0.3 * x[[i, 1]] + 0.1 * normal(&mut rng));
        let k = rbf_kernel(x.view(), 1.0);
        let (c, eps) = (1.0 + seed as f64 * 0.3, 0.1);
        let oracle = qp_oracle(&k, &y, c, eps);
        let sol = solve_svr_dual(k.view(), y.view(), c, eps, 1e-4, 100_000).unwrap();
        if sol.beta.sum().abs() > 1e-10 || sol.beta.iter().any(|b| b.abs() > c + 1e-12) {
            return f64::INFINITY;
        }
        worst = worst.max((sol.objective - oracle).abs());
    }
    worst
}

fn sse(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum()
}

/// Best (column, threshold, gain) by trying every midpoint in every column.
pub fn split_oracle(x: &Array2<f64>, y: &Array1<f64>) -> Option<(usize, f64, f64)> {
    let total = sse(&y.to_vec());
    let mut best: Option<(usize, f64, f64)> = None;
    for j in 0..x.ncols() {
        let mut vals: Vec<f64> = x.column(j).to_vec();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (l, r): (Vec<usize>, Vec<usize>) = (0..x.nrows()).partition(|&i| x[[i, j]] <= t);
            let gain = total
                - sse(&l.iter().map(|&i| y[i]).collect::<Vec<_>>())
                - sse(&r.iter().map(|&i| y[i]).collect::<Vec<_>>());
            if best.is_none_or(|b| gain > b.2 + 1e-9) {
                best = Some((j, t, gain));
            }
        }
    }
    best
}

/// Instances (≤ 20 rows, ties on even seeds) where the split search or the
/// root of a grown tree disagrees with [`split_oracle`].
pub fn split_mismatches(instances: u64) -> usize {
    let mut bad = 0;
    for seed in 0..instances {
        let mut rng = seeds::rng(500 + seed);
        let n = 8 + (seed as usize % 13);
        let mut x = gaussian(&mut rng, n, 3);
        if seed % 2 == 0 {
            x.mapv_inplace(|v| (v * 2.0).round() / 2.0);
        }
        let y = Array1::from_shape_fn(n, |i| x[[i, 1]].max(0.0) * 2.0 + 0.3 * normal(&mut rng));
        let rows: Vec<usize> = (0..n).collect();
        let (col, thr, gain) = split_oracle(&x, &y).unwrap();
        let got = best_split(x.view(), y.view(), &rows, &[0, 1, 2]).unwrap();
        let search_ok = got.column == col && (got.threshold - thr).abs() < 1e-12 && (got.gain - gain).abs() < 1e-9;
        let tree = grow_tree(x.view(), y.view(), rows, 3, 1, &mut seeds::rng(seed));
        let root_ok = matches!(&tree.nodes[0],
            Node::Split { column, threshold, .. } if *column == col && (threshold - thr).abs() < 1e-12);
        bad += (!search_ok || !root_ok) as usize;
    }
    bad
}

/// Largest gap between boosting with `ν = 1` and OLS on centered
/// orthonormal designs.
pub fn blm_orthonormal_gap(instances: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..instances {
        let mut rng = seeds::rng(600 + seed);
        let (n, p) = (40, 5);
        let raw = gaussian(&mut rng, n, p);
        let mut c = to_na(&raw);
        for j in 0..p {
            let m = c.column(j).mean();
            c.column_mut(j).add_scalar_mut(-m);
        }
        let q = c.qr().q();
        let x = Array2::from_shape_fn((n, p), |(i, j)| q[(i, j)]);
        let y = Array1::from_shape_fn(n, |i| 1.0 + 2.0 * x[[i, 0]] - x[[i, 3]] + 0.2 * normal(&mut rng));
        let m = FeatureMatrix::from_arrays(x, y);
        let w = ols_oracle(&m);
        let fit = fit_blm(&m, &BlmConfig { m_stop: 50, nu: 1.0 }).unwrap();
        for j in 0..p {
            worst = worst.max((fit.weights[j] - w[j]).abs());
        }
    }
    worst
}
