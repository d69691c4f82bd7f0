//! Componentwise L2 boosting with simple linear base learners.

use ndarray::{Array1, ArrayView2, Axis};

use super::spec::BlmConfig;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct BlmFit<F> {
    pub intercept: F,
    /// Accumulated coefficient per (uncentered) column.
    pub weights: Array1<F>,
    pub m_stop: usize,
    /// Number of times each column was selected.
    pub selections: Vec<usize>,
    /// Columns never considered because they have no variance.
    pub skipped: Vec<String>,
}

impl<F: Scalar> BlmFit<F> {
    pub fn predict(&self, x: ArrayView2<F>) -> Array1<F> {
        x.dot(&self.weights).mapv(|v| v + self.intercept)
    }
}

/// Boosts once up to the largest of `checkpoints` and snapshots the model
/// at every requested iteration count.
pub fn blm_path<F: Scalar>(m: &FeatureMatrix<F>, nu: f64, checkpoints: &[usize]) -> Result<Vec<BlmFit<F>>> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Config("BLM shrinkage nu must lie in (0, 1]".into()));
    }
    let (n, p) = m.x.dim();
    if n == 0 {
        return Err(Error::Empty("no training rows".into()));
    }
    let nu = F::of(nu);
    let x_mean = linalg::column_means(m.x.view());
    let xc = &m.x - &x_mean.view().insert_axis(Axis(0));
    let y_mean = m.target.sum() / F::of_usize(n);
    let u0 = m.target.mapv(|v| v - y_mean);
    let g = linalg::gram(xc.view());
    let mut c = xc.t().dot(&u0);
    let scale = g.diag().iter().fold(F::zero(), |a, v| a.max(*v));
    let mut skipped = Vec::new();
    let usable: Vec<bool> = (0..p)
        .map(|j| {
            let ok = g[[j, j]] > scale * F::epsilon() * F::of(64.0) && g[[j, j]] > F::zero();
            if !ok {
                skipped.push(m.columns[j].label());
            }
            ok
        })
        .collect();

    let mut order: Vec<usize> = (0..checkpoints.len()).collect();
    order.sort_by_key(|&i| checkpoints[i]);
    let mut out: Vec<Option<BlmFit<F>>> = vec![None; checkpoints.len()];
    let mut beta = Array1::<F>::zeros(p);
    let mut selections = vec![0usize; p];
    let mut iter = 0usize;
    let snapshot = |beta: &Array1<F>, selections: &[usize], iter: usize| BlmFit {
        intercept: y_mean - x_mean.dot(beta),
        weights: beta.clone(),
        m_stop: iter,
        selections: selections.to_vec(),
        skipped: skipped.clone(),
    };
    for &ci in &order {
        let target = checkpoints[ci];
        while iter < target {
            // RSS after fitting column j to the residual drops by c_j² / g_jj
            let mut best: Option<(usize, F)> = None;
            for j in 0..p {
                if !usable[j] {
                    continue;
                }
                let gain = c[j] * c[j] / g[[j, j]];
                if best.is_none_or(|(_, b)| gain > b) {
                    best = Some((j, gain));
                }
            }
            let Some((j, _)) = best else { break };
            let step = nu * c[j] / g[[j, j]];
            beta[j] += step;
            selections[j] += 1;
            for k in 0..p {
                c[k] -= step * g[[k, j]];
            }
            iter += 1;
        }
        out[ci] = Some(snapshot(&beta, &selections, target));
    }
    Ok(out.into_iter().map(|f| f.expect("every checkpoint visited")).collect())
}

pub fn fit_blm<F: Scalar>(m: &FeatureMatrix<F>, cfg: &BlmConfig) -> Result<BlmFit<F>> {
    Ok(blm_path(m, cfg.nu, &[cfg.m_stop])?.remove(0))
}
