use nalgebra::{DMatrix, DVector};

use super::BootstrapDraws;
use crate::analytic::Interval;
use crate::error::{Error, Result};

/// Sample quantile of sorted data, Hyndman-Fan type 6: the `p(B + 1)`-th order
/// statistic with linear interpolation, clamped to the extremes.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let b = sorted.len();
    assert!(b > 0, "quantile of an empty sample");
    let h = p * (b as f64 + 1.0);
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= b as f64 {
        return sorted[b - 1];
    }
    let lo = h.floor();
    let i = lo as usize - 1;
    sorted[i] + (h - lo) * (sorted[i + 1] - sorted[i])
}

/// Equal-tailed intervals `[β̂ⱼ − q₁₋α/₂, β̂ⱼ − qα/₂]` from a `B × k` draw matrix.
pub fn percentile_intervals(
    deltas: &DMatrix<f64>,
    beta_hat: &DVector<f64>,
    alpha: f64,
) -> Result<Vec<Interval>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if deltas.nrows() < 2 {
        return Err(Error::InsufficientDraws {
            needed: 2,
            found: deltas.nrows(),
        });
    }
    if deltas.ncols() != beta_hat.len() {
        return Err(Error::DimensionMismatch {
            context: "bootstrap draw columns vs coefficients",
            expected: beta_hat.len(),
            found: deltas.ncols(),
        });
    }
    if deltas.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidPlan(
            "bootstrap draws contain non-finite values".into(),
        ));
    }
    Ok((0..beta_hat.len())
        .map(|j| {
            let mut col: Vec<f64> = deltas.column(j).iter().copied().collect();
            col.sort_by(f64::total_cmp);
            Interval {
                lo: beta_hat[j] - quantile_sorted(&col, 1.0 - alpha / 2.0),
                hi: beta_hat[j] - quantile_sorted(&col, alpha / 2.0),
            }
        })
        .collect())
}

pub fn percentile_ci(
    draws: &BootstrapDraws,
    beta_hat: &DVector<f64>,
    alpha: f64,
) -> Result<Vec<Interval>> {
    percentile_intervals(&draws.deltas, beta_hat, alpha)
}

/// `β̂ − mean(δ*)`: subtracts the bootstrap bias estimate.
pub fn bias_corrected_estimate(draws: &BootstrapDraws, beta_hat: &DVector<f64>) -> DVector<f64> {
    let mean = draws.deltas.row_mean().transpose();
    beta_hat - mean
}
