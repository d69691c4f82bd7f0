//! Linear stacking of member forecasts.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Penalty used when member predictions are collinear.
pub const FALLBACK_RIDGE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleFit<F> {
    pub intercept: F,
    /// One weight per member, in member order.
    pub weights: Array1<F>,
    /// The least-squares system was singular and a tiny ridge was used.
    pub ridge_fallback: bool,
}

impl<F: Scalar> EnsembleFit<F> {
    /// `member_forecasts` has one column per member.
    pub fn combine(&self, member_forecasts: ArrayView2<F>) -> Array1<F> {
        member_forecasts.dot(&self.weights).mapv(|v| v + self.intercept)
    }
}

/// Least squares with intercept of `realized` on the member prediction
/// columns `preds` (rows are held-out hours).
pub fn fit_ensemble<F: Scalar>(preds: ArrayView2<F>, realized: &[F]) -> Result<EnsembleFit<F>> {
    let (n, k) = preds.dim();
    if k < 2 {
        return Err(Error::Config("an ensemble needs at least two members".into()));
    }
    if n != realized.len() {
        return Err(Error::Schema("member predictions and realized values differ in length".into()));
    }
    if n == 0 {
        return Err(Error::Empty("no held-out predictions".into()));
    }
    let y = Array1::from(realized.to_vec());
    let mut design = Array2::<F>::ones((n, k + 1));
    design.slice_mut(ndarray::s![.., 1..]).assign(&preds);
    match linalg::lstsq(design.view(), y.view()) {
        Ok(b) => Ok(EnsembleFit {
            intercept: b[0],
            weights: b.slice(ndarray::s![1..]).to_owned(),
            ridge_fallback: false,
        }),
        Err(Error::Singular(_)) => {
            let means = linalg::column_means(preds);
            let ym = y.sum() / F::of_usize(n);
            let xc = &preds - &means.view().insert_axis(ndarray::Axis(0));
            let mut g = linalg::gram(xc.view());
            for j in 0..k {
                g[[j, j]] += F::of(FALLBACK_RIDGE);
            }
            let rhs = xc.t().dot(&y.mapv(|v| v - ym));
            let w = linalg::spd_solve(g.view(), rhs.view())?;
            Ok(EnsembleFit {
                intercept: ym - means.dot(&w),
                weights: w,
                ridge_fallback: true,
            })
        }
        Err(e) => Err(e),
    }
}
