//! Wild bootstrap with resampled binary labels.
//!
//! Each replication draws a pair of bootstrap labels `(θ*ᵢ, θ̂*ᵢ)` for every
//! observation, generates `Y*ᵢ = β̂'g(θ*ᵢ, Zᵢ) + ûᵢηᵢ`, and regresses `Y*` on
//! `g(θ̂*ᵢ, Zᵢ)`. The schemes differ only in how the label pairs are drawn.

mod diagnostics;
mod engine;
mod interval;
mod sampler;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use diagnostics::{diagnose_label_draws, diagnose_labels, LabelDiagnostics, LabelStats};
pub use engine::{run_bootstrap, BootstrapDraws};
pub use interval::{bias_corrected_estimate, percentile_ci, percentile_intervals, quantile_sorted};
pub use sampler::{
    draw_rate_star, draw_wild_weights, sample_coupled_label, sample_fixed_label, CoupledPmf,
    FixedLabelPmf, LabelPairDraw,
};

/// How bootstrap label pairs are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `θ* = θ̂* = θ̂`: no measurement error in the bootstrap world.
    NoLabelResampling,
    /// `θ* = θ̂`, `θ̂*` a corrupted copy of `θ̂`.
    FixedLabel,
    /// `(θ*, θ̂*)` drawn jointly with discordance probabilities `F̂₋`, `F̂₊`.
    CoupledLabel,
    /// Coupled labels with the rates redrawn as `Binomial(m, F̂±)/m` once per
    /// replication.
    CoupledLabelVarAdj,
}

impl Scheme {
    pub fn is_coupled(self) -> bool {
        matches!(self, Scheme::CoupledLabel | Scheme::CoupledLabelVarAdj)
    }
}

/// Distribution of the wild-bootstrap multipliers `ηᵢ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WildWeights {
    #[default]
    StandardNormal,
    /// `±1` with probability one half each.
    Rademacher,
}

pub const DEFAULT_RETRY_CAP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapPlan {
    pub scheme: Scheme,
    /// Store `Q̂⁻¹Q̂*(β̂* − β̂)` instead of `β̂* − β̂`. Coupled schemes only.
    pub rotate: bool,
    /// Number of replications `B`.
    pub reps: usize,
    pub wild_weights: WildWeights,
    pub seed: u64,
    pub alpha: f64,
    /// Attempts per replication before giving up on singular designs or
    /// invalid rate draws.
    pub retry_cap: usize,
}

impl BootstrapPlan {
    pub fn new(scheme: Scheme, reps: usize, seed: u64) -> Self {
        Self {
            scheme,
            rotate: false,
            reps,
            wild_weights: WildWeights::StandardNormal,
            seed,
            alpha: 0.05,
            retry_cap: DEFAULT_RETRY_CAP,
        }
    }

    pub fn rotated(mut self, rotate: bool) -> Self {
        self.rotate = rotate;
        self
    }

    pub fn with_weights(mut self, law: WildWeights) -> Self {
        self.wild_weights = law;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidPlan("need at least one replication".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if self.rotate && !self.scheme.is_coupled() {
            return Err(Error::InvalidPlan(format!(
                "rotation is only defined for coupled-label schemes, not {:?}",
                self.scheme
            )));
        }
        if self.retry_cap == 0 {
            return Err(Error::InvalidPlan("retry cap must be positive".into()));
        }
        Ok(())
    }
}
