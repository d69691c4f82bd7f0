//! Small dense linear-algebra kernels used by the regression models.
//!
//! Designs in this engine are tall and narrow (hundreds of rows, a few dozen
//! columns), so straightforward Householder QR, Cholesky and one-sided Jacobi
//! SVD are both accurate and fast enough.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative threshold below which a pivot is treated as zero.
pub fn rank_tolerance<F: Scalar>() -> F {
    F::epsilon().powf(F::of(0.75))
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<F: Scalar>(a: ArrayView2<F>) -> Option<Array2<F>> {
    let n = a.nrows();
    let mut l = Array2::<F>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > F::zero()) {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor `L`.
pub fn cholesky_solve_factored<F: Scalar>(l: &Array2<F>, b: ArrayView1<F>) -> Array1<F> {
    let n = l.nrows();
    let mut z = Array1::<F>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * z[k];
        }
        z[i] = s / l[[i, i]];
    }
    let mut x = Array1::<F>::zeros(n);
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves the symmetric positive definite system `A x = b`.
pub fn spd_solve<F: Scalar>(a: ArrayView2<F>, b: ArrayView1<F>) -> Result<Array1<F>> {
    let l = cholesky(a).ok_or_else(|| Error::Singular("matrix is not positive definite".into()))?;
    Ok(cholesky_solve_factored(&l, b))
}

/// `XᵀX` for a tall design.
pub fn gram<F: Scalar>(x: ArrayView2<F>) -> Array2<F> {
    x.t().dot(&x)
}

/// Least-squares solution of `min ‖X b − y‖` via Householder QR.
///
/// Fails with [`Error::Singular`] when `X` has (numerically) dependent columns.
pub fn lstsq<F: Scalar>(x: ArrayView2<F>, y: ArrayView1<F>) -> Result<Array1<F>> {
    let (m, n) = x.dim();
    if m < n {
        return Err(Error::Singular(format!("{m} rows for {n} unknowns")));
    }
    // columns are equilibrated to unit norm and the solution unscaled at the end
    let mut r = x.to_owned();
    let mut qty = y.to_owned();
    let mut scale = Array1::<F>::zeros(n);
    for (j, mut col) in r.columns_mut().into_iter().enumerate() {
        let norm = col.iter().map(|v| *v * *v).sum::<F>().sqrt();
        if norm == F::zero() {
            return Err(Error::Singular(format!("column {j} is all zero")));
        }
        col.mapv_inplace(|v| v / norm);
        scale[j] = norm;
    }
    for k in 0..n {
        let mut norm = F::zero();
        for i in k..m {
            norm += r[[i, k]] * r[[i, k]];
        }
        let norm = norm.sqrt();
        if norm <= rank_tolerance::<F>() {
            return Err(Error::Singular(format!("column {k} is linearly dependent")));
        }
        let alpha = if r[[k, k]] > F::zero() { -norm } else { norm };
        // v = x - alpha e1, stored in place below the diagonal
        let mut v = Array1::<F>::zeros(m - k);
        for i in k..m {
            v[i - k] = r[[i, k]];
        }
        v[0] -= alpha;
        let vnorm2: F = v.iter().map(|a| *a * *a).sum();
        if vnorm2 > F::zero() {
            for j in k..n {
                let mut s = F::zero();
                for i in k..m {
                    s += v[i - k] * r[[i, j]];
                }
                let f = (s + s) / vnorm2;
                for i in k..m {
                    r[[i, j]] -= f * v[i - k];
                }
            }
            let mut s = F::zero();
            for i in k..m {
                s += v[i - k] * qty[i];
            }
            let f = (s + s) / vnorm2;
            for i in k..m {
                qty[i] -= f * v[i - k];
            }
        }
    }
    let mut b = Array1::<F>::zeros(n);
    for i in (0..n).rev() {
        let mut s = qty[i];
        for j in (i + 1)..n {
            s -= r[[i, j]] * b[j];
        }
        b[i] = s / r[[i, i]];
    }
    Ok(b / scale)
}

/// Thin singular value decomposition `X = U diag(s) Vᵀ` (one-sided Jacobi).
///
/// Singular values are returned in non-increasing order; `U` is `m×n`,
/// `V` is `n×n`. Requires `m ≥ n`.
pub struct Svd<F> {
    pub u: Array2<F>,
    pub s: Array1<F>,
    pub v: Array2<F>,
}

pub fn svd<F: Scalar>(x: ArrayView2<F>) -> Result<Svd<F>> {
    let (m, n) = x.dim();
    if m < n {
        return Err(Error::Precondition(format!(
            "svd needs at least as many rows as columns ({m} < {n})"
        )));
    }
    // columns of X and V stored contiguously
    let mut a: Vec<Vec<F>> = (0..n).map(|j| x.column(j).to_vec()).collect();
    let mut v: Vec<Vec<F>> = (0..n)
        .map(|j| (0..n).map(|r| if r == j { F::one() } else { F::zero() }).collect())
        .collect();
    let eps = F::epsilon();
    let rotate = |p: &mut [F], q: &mut [F], c: F, s: F| {
        for (pi, qi) in p.iter_mut().zip(q.iter_mut()) {
            let (x, y) = (*pi, *qi);
            *pi = c * x - s * y;
            *qi = s * x + c * y;
        }
    };
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (lo, hi) = a.split_at_mut(j);
                let (ci, cj) = (&mut lo[i], &mut hi[0]);
                let mut alpha = F::zero();
                let mut beta = F::zero();
                let mut gamma = F::zero();
                for (ai, aj) in ci.iter().zip(cj.iter()) {
                    alpha += *ai * *ai;
                    beta += *aj * *aj;
                    gamma += *ai * *aj;
                }
                if gamma == F::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let sign = if zeta >= F::zero() { F::one() } else { -F::one() };
                let t = sign / (zeta.abs() + (F::one() + zeta * zeta).sqrt());
                let c = F::one() / (F::one() + t * t).sqrt();
                let s = c * t;
                rotate(ci, cj, c, s);
                let (lo, hi) = v.split_at_mut(j);
                rotate(&mut lo[i], &mut hi[0], c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<F> = a.iter().map(|col| col.iter().map(|v| *v * *v).sum::<F>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| norms[q].partial_cmp(&norms[p]).unwrap_or(std::cmp::Ordering::Equal));
    let mut u = Array2::<F>::zeros((m, n));
    let mut vs = Array2::<F>::zeros((n, n));
    let mut s = Array1::<F>::zeros(n);
    for (k, &j) in order.iter().enumerate() {
        s[k] = norms[j];
        if norms[j] > F::zero() {
            for r in 0..m {
                u[[r, k]] = a[j][r] / norms[j];
            }
        }
        for r in 0..n {
            vs[[r, k]] = v[j][r];
        }
    }
    Ok(Svd { u, s, v: vs })
}

/// Column means of a design.
pub fn column_means<F: Scalar>(x: ArrayView2<F>) -> Array1<F> {
    let n = F::of_usize(x.nrows().max(1));
    x.sum_axis(Axis(0)).mapv(|s| s / n)
}

pub fn mean<F: Scalar>(v: &[F]) -> F {
    if v.is_empty() {
        return F::zero();
    }
    v.iter().copied().sum::<F>() / F::of_usize(v.len())
}

/// Sample standard deviation (divisor `n − 1`).
pub fn sample_std<F: Scalar>(v: &[F]) -> F {
    if v.len() < 2 {
        return F::zero();
    }
    let m = mean(v);
    let ss: F = v.iter().map(|x| (*x - m) * (*x - m)).sum();
    (ss / F::of_usize(v.len() - 1)).sqrt()
}
