//! One entry point for the six estimators compared in applied work and in the
//! coverage tables.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analytic::{analytic_report, sandwich_variance, wald_ci, Interval};
use crate::bootstrap::{
    bias_corrected_estimate, percentile_ci, run_bootstrap, BootstrapPlan, LabelDiagnostics, Scheme,
    WildWeights, DEFAULT_RETRY_CAP,
};
use crate::design::{bias_matrices, fit_dataset, BiasMatrices, Dataset, DesignSpec, OlsFit};
use crate::error::{Error, Result};
use crate::misclass::MisclassRates;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// OLS on the imputed labels with a robust Wald interval.
    Ols,
    /// Plug-in bias correction with the rate-uncertainty variance adjustment.
    Bchs,
    NoLabel,
    FixedLabel,
    CoupledLabel,
    /// Coupled labels with Hessian rotation and Binomial rate redraws.
    CoupledRotatedVaradj,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Ols,
        Method::Bchs,
        Method::NoLabel,
        Method::FixedLabel,
        Method::CoupledLabel,
        Method::CoupledRotatedVaradj,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::Bchs => "bchs",
            Method::NoLabel => "no-label",
            Method::FixedLabel => "fixed-label",
            Method::CoupledLabel => "coupled-label",
            Method::CoupledRotatedVaradj => "coupled-rotated-varadj",
        }
    }

    /// Row label for text tables.
    pub fn title(self) -> &'static str {
        match self {
            Method::Ols => "OLS",
            Method::Bchs => "BCHS bias-corrected & var. adj.",
            Method::NoLabel => "No-label resampling",
            Method::FixedLabel => "Fixed-label bootstrap",
            Method::CoupledLabel => "Coupled-label bootstrap",
            Method::CoupledRotatedVaradj => "Coupled-label, rotation & var. adj.",
        }
    }

    /// Resampling scheme and rotation flag, for bootstrap methods.
    pub fn scheme(self) -> Option<(Scheme, bool)> {
        match self {
            Method::Ols | Method::Bchs => None,
            Method::NoLabel => Some((Scheme::NoLabelResampling, false)),
            Method::FixedLabel => Some((Scheme::FixedLabel, false)),
            Method::CoupledLabel => Some((Scheme::CoupledLabel, false)),
            Method::CoupledRotatedVaradj => Some((Scheme::CoupledLabelVarAdj, true)),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                format!("unknown method {s:?}; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSettings {
    pub alpha: f64,
    /// Bootstrap replications `B`.
    pub reps: usize,
    /// Every bootstrap method uses this seed, so they share wild weights.
    pub seed: u64,
    pub wild_weights: WildWeights,
    pub retry_cap: usize,
    /// Keep the `B × k` draw matrix in the outcome.
    pub keep_draws: bool,
}

impl Default for MethodSettings {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            reps: 499,
            seed: 0,
            wild_weights: WildWeights::StandardNormal,
            retry_cap: DEFAULT_RETRY_CAP,
            keep_draws: false,
        }
    }
}

impl MethodSettings {
    pub fn plan(&self, method: Method) -> Option<BootstrapPlan> {
        method.scheme().map(|(scheme, rotate)| BootstrapPlan {
            scheme,
            rotate,
            reps: self.reps,
            wild_weights: self.wild_weights,
            seed: self.seed,
            alpha: self.alpha,
            retry_cap: self.retry_cap,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    pub estimate: DVector<f64>,
    pub ci: Vec<Interval>,
    pub diagnostics: Option<LabelDiagnostics>,
    pub draws: Option<DMatrix<f64>>,
}

/// A fitted sample ready for any of the six methods.
#[derive(Debug, Clone)]
pub struct Analysis<'a> {
    pub dataset: &'a Dataset,
    pub spec: &'a DesignSpec,
    pub rates: MisclassRates,
    pub fit: OlsFit,
    pub bias: BiasMatrices,
}

impl<'a> Analysis<'a> {
    pub fn new(dataset: &'a Dataset, spec: &'a DesignSpec, rates: MisclassRates) -> Result<Self> {
        dataset.check_spec(spec)?;
        let fit = fit_dataset(dataset, spec)?;
        let bias = bias_matrices(&dataset.z, spec)?;
        Ok(Self {
            dataset,
            spec,
            rates,
            fit,
            bias,
        })
    }

    pub fn run(&self, method: Method, settings: &MethodSettings) -> Result<MethodOutcome> {
        if !(settings.alpha > 0.0 && settings.alpha < 1.0) {
            return Err(Error::InvalidAlpha(settings.alpha));
        }
        match settings.plan(method) {
            None => {
                let (estimate, ci) = if method == Method::Ols {
                    let var = sandwich_variance(&self.fit);
                    let ci = wald_ci(&self.fit.beta_hat, &var, settings.alpha)?;
                    (self.fit.beta_hat.clone(), ci)
                } else {
                    let report =
                        analytic_report(&self.fit, &self.bias, &self.rates, settings.alpha)?;
                    (report.beta_bc, report.ci)
                };
                Ok(MethodOutcome {
                    method,
                    estimate,
                    ci,
                    diagnostics: None,
                    draws: None,
                })
            }
            Some(plan) => {
                let draws = run_bootstrap(self.dataset, self.spec, &self.fit, &self.rates, &plan)?;
                let ci = percentile_ci(&draws, &self.fit.beta_hat, settings.alpha)?;
                let estimate = bias_corrected_estimate(&draws, &self.fit.beta_hat);
                Ok(MethodOutcome {
                    method,
                    estimate,
                    ci,
                    diagnostics: Some(draws.diagnostics),
                    draws: settings.keep_draws.then_some(draws.deltas),
                })
            }
        }
    }

    pub fn run_all(
        &self,
        methods: &[Method],
        settings: &MethodSettings,
    ) -> Result<Vec<MethodOutcome>> {
        methods.iter().map(|&m| self.run(m, settings)).collect()
    }
}
