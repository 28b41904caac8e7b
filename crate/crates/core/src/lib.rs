//! Bootstrap inference for linear regressions whose covariates are built from
//! binary labels imputed by a classifier.
//!
//! The regression of interest is `Y = g(θ, Z)'β + u` with `θ` latent. Only the
//! imputed labels `θ̂` are observed, together with the false-positive and
//! false-negative rates of the classifier measured on a small validation
//! sample. Plugging `θ̂` into OLS biases `β̂` at the same order as its sampling
//! error. This crate provides:
//!
//! * [`design`]: the known map `g`, OLS with a robust sandwich, and the
//!   bias-direction matrices `D₊`, `D₋`;
//! * [`misclass`]: misclassification rates from a validation sample;
//! * [`analytic`]: the plug-in bias correction with its variance adjustment;
//! * [`bootstrap`]: the wild bootstrap with resampled labels (no-label,
//!   fixed-label, coupled-label and the variance-corrected coupled-label
//!   schemes, with optional Hessian rotation) and percentile intervals;
//! * [`montecarlo`]: the interactions-model simulation and coverage tables;
//! * [`inference`]: a uniform entry point running any of the six methods.

pub mod analytic;
pub mod bootstrap;
pub mod design;
mod error;
pub mod inference;
pub mod misclass;
pub mod montecarlo;
pub mod rng;

pub use analytic::{AnalyticReport, Interval};
pub use bootstrap::{
    BootstrapDraws, BootstrapPlan, LabelDiagnostics, LabelPairDraw, Scheme, WildWeights,
};
pub use design::{BiasMatrices, Dataset, DesignSpec, LabelDesign, OlsFit, Term};
pub use error::{Error, Result};
pub use inference::{Analysis, Method, MethodOutcome, MethodSettings};
pub use misclass::MisclassRates;
pub use montecarlo::{CellResult, SimConfig, TableReport};

pub use nalgebra::{DMatrix, DVector};
