//! Principal component regression.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg;
use crate::scalar::Scalar;

/// Regression of the centered target on the first `k` principal component
/// scores of the centered design.
#[derive(Clone, Debug, PartialEq)]
pub struct PcrFit<F> {
    pub k: usize,
    pub x_mean: Array1<F>,
    pub y_mean: F,
    /// First `k` right singular vectors, one per column.
    pub loadings: Array2<F>,
    /// Coefficients on the component scores.
    pub score_weights: Array1<F>,
    /// Same model expressed on the original columns.
    pub weights: Array1<F>,
    pub singular_values: Array1<F>,
}

impl<F: Scalar> PcrFit<F> {
    pub fn predict(&self, x: ArrayView2<F>) -> Array1<F> {
        let xc = &x - &self.x_mean.view().insert_axis(Axis(0));
        xc.dot(&self.weights).mapv(|v| v + self.y_mean)
    }
}

/// Numerical rank from singular values in non-increasing order.
pub fn numerical_rank<F: Scalar>(s: &Array1<F>, rows: usize) -> usize {
    let top = s.first().copied().unwrap_or(F::zero());
    if top == F::zero() {
        return 0;
    }
    let tol = top * F::epsilon() * F::of_usize(rows.max(s.len())) * F::of(16.0);
    s.iter().filter(|v| **v > tol).count()
}

/// PCR fits for each requested number of components, sharing one SVD.
pub fn pcr_path<F: Scalar>(m: &FeatureMatrix<F>, ks: &[usize]) -> Result<Vec<PcrFit<F>>> {
    let (n, p) = m.x.dim();
    if n < 2 {
        return Err(Error::Empty("PCR needs at least two rows".into()));
    }
    let x_mean = linalg::column_means(m.x.view());
    let y_mean = m.target.sum() / F::of_usize(n);
    let xc = &m.x - &x_mean.view().insert_axis(Axis(0));
    let yc = m.target.mapv(|v| v - y_mean);
    let svd = if n >= p {
        linalg::svd(xc.view())?
    } else {
        // Wide design: decompose the transpose and swap factors.
        let t = linalg::svd(xc.t())?;
        linalg::Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        }
    };
    let rank = numerical_rank(&svd.s, n);
    let max_k = ks.iter().copied().max().unwrap_or(0);
    if max_k > rank {
        return Err(Error::Rank {
            requested: max_k,
            rank,
        });
    }
    // ω_j = z_jᵀ y_c / δ_j² with z_j = X̃ v_j = δ_j u_j
    let all_w: Vec<F> = (0..rank.min(max_k))
        .map(|j| svd.u.column(j).dot(&yc) / svd.s[j])
        .collect();
    ks.iter()
        .map(|&k| {
            if k == 0 {
                return Err(Error::Config("PCR needs k >= 1".into()));
            }
            let loadings = svd.v.slice(ndarray::s![.., ..k]).to_owned();
            let score_weights = Array1::from(all_w[..k].to_vec());
            let weights = loadings.dot(&score_weights);
            Ok(PcrFit {
                k,
                x_mean: x_mean.clone(),
                y_mean,
                loadings,
                score_weights,
                weights,
                singular_values: svd.s.clone(),
            })
        })
        .collect()
}

pub fn fit_pcr<F: Scalar>(m: &FeatureMatrix<F>, k: usize) -> Result<PcrFit<F>> {
    Ok(pcr_path(m, &[k])?.remove(0))
}
