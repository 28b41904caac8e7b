//! Plug-in bias correction and its finite-sample variance adjustment.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::design::{BiasMatrices, OlsFit};
use crate::error::{Error, Result};
use crate::misclass::MisclassRates;

/// A closed confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticReport {
    pub beta_bc: DVector<f64>,
    /// `Γ̂₊ = Q̂⁻¹ D̄₊`
    pub gamma_plus: DMatrix<f64>,
    /// `Γ̂₋ = Q̂⁻¹ D̄₋`
    pub gamma_minus: DMatrix<f64>,
    /// Robust sandwich `V̂/n`.
    pub var_base: DMatrix<f64>,
    /// Rate-estimation terms, already divided by `n`.
    pub var_adjustment: DMatrix<f64>,
    pub ci: Vec<Interval>,
}

impl AnalyticReport {
    pub fn variance(&self) -> DMatrix<f64> {
        &self.var_base + &self.var_adjustment
    }
}

fn check_shapes(fit: &OlsFit, bm: &BiasMatrices) -> Result<()> {
    let k = fit.k();
    for (context, found) in [
        ("Q_hat", fit.q_hat_inv.nrows()),
        ("D_plus_bar", bm.d_plus_bar.nrows()),
        ("D_minus_bar", bm.d_minus_bar.nrows()),
    ] {
        if found != k {
            return Err(Error::DimensionMismatch {
                context,
                expected: k,
                found,
            });
        }
    }
    if !fit.q_hat_inv.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularDesign {
            rcond: 0.0,
            columns: Vec::new(),
        });
    }
    Ok(())
}

/// `(Γ̂₊, Γ̂₋)`.
pub fn gamma_matrices(fit: &OlsFit, bm: &BiasMatrices) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_shapes(fit, bm)?;
    Ok((
        &fit.q_hat_inv * &bm.d_plus_bar,
        &fit.q_hat_inv * &bm.d_minus_bar,
    ))
}

/// `β̂ᵇᶜ = (I + Γ̂₊F̂₊ + Γ̂₋F̂₋) β̂`.
pub fn bchs_correct(
    fit: &OlsFit,
    bm: &BiasMatrices,
    rates: &MisclassRates,
) -> Result<DVector<f64>> {
    let (gp, gm) = gamma_matrices(fit, bm)?;
    let k = fit.k();
    let map = DMatrix::identity(k, k) + gp * rates.f_plus + gm * rates.f_minus;
    Ok(map * &fit.beta_hat)
}

/// Robust sandwich variance of `β̂`, `V̂/n`.
pub fn sandwich_variance(fit: &OlsFit) -> DMatrix<f64> {
    fit.sandwich() / fit.n() as f64
}

/// Variance of the corrected estimator:
/// `(1/n)[V̂ + (nF̂₊(1−F̂₊)/m) Γ̂₊ββ'Γ̂₊' + (nF̂₋(1−F̂₋)/m) Γ̂₋ββ'Γ̂₋']`.
///
/// The `F̂₊F̂₋` cross terms are of smaller order and are left out, which keeps
/// the adjustment positive semidefinite.
pub fn bchs_variance(
    fit: &OlsFit,
    bm: &BiasMatrices,
    rates: &MisclassRates,
    beta_for_bias: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    Ok(sandwich_variance(fit) + variance_adjustment(fit, bm, rates, beta_for_bias)?)
}

fn variance_adjustment(
    fit: &OlsFit,
    bm: &BiasMatrices,
    rates: &MisclassRates,
    beta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    if beta.len() != fit.k() {
        return Err(Error::DimensionMismatch {
            context: "beta_for_bias",
            expected: fit.k(),
            found: beta.len(),
        });
    }
    let (gp, gm) = gamma_matrices(fit, bm)?;
    let m = rates.m as f64;
    let vp = gp * beta;
    let vm = gm * beta;
    Ok(
        &vp * vp.transpose() * (rates.f_plus * (1.0 - rates.f_plus) / m)
            + &vm * vm.transpose() * (rates.f_minus * (1.0 - rates.f_minus) / m),
    )
}

/// Normal-quantile intervals `βⱼ ± z₁₋α/₂ √varⱼⱼ`.
pub fn wald_ci(beta: &DVector<f64>, var: &DMatrix<f64>, alpha: f64) -> Result<Vec<Interval>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if var.nrows() != beta.len() || var.ncols() != beta.len() {
        return Err(Error::DimensionMismatch {
            context: "variance vs coefficients",
            expected: beta.len(),
            found: var.nrows(),
        });
    }
    let z = normal_quantile(1.0 - alpha / 2.0);
    beta.iter()
        .enumerate()
        .map(|(j, &b)| {
            let v = var[(j, j)];
            if v.is_nan() || v < 0.0 {
                return Err(Error::NegativeVariance { index: j, value: v });
            }
            let half = z * v.sqrt();
            Ok(Interval {
                lo: b - half,
                hi: b + half,
            })
        })
        .collect()
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Corrected estimate, its variance pieces and Wald intervals.
pub fn analytic_report(
    fit: &OlsFit,
    bm: &BiasMatrices,
    rates: &MisclassRates,
    alpha: f64,
) -> Result<AnalyticReport> {
    let (gamma_plus, gamma_minus) = gamma_matrices(fit, bm)?;
    let beta_bc = bchs_correct(fit, bm, rates)?;
    let var_base = sandwich_variance(fit);
    let var_adjustment = variance_adjustment(fit, bm, rates, &beta_bc)?;
    let ci = wald_ci(&beta_bc, &(&var_base + &var_adjustment), alpha)?;
    Ok(AnalyticReport {
        beta_bc,
        gamma_plus,
        gamma_minus,
        var_base,
        var_adjustment,
        ci,
    })
}
