use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use super::diagnostics::{diagnose_labels, LabelDiagnostics, LabelStats};
use super::sampler::{draw_rate_star, draw_wild_weights, sample_coupled_label, sample_fixed_label};
use super::{BootstrapPlan, CoupledPmf, FixedLabelPmf, LabelPairDraw, Scheme};
use crate::design::{
    bias_matrices_with, symmetrize, BiasMatrices, Dataset, DesignSpec, LabelDesign, OlsFit,
    RCOND_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::misclass::MisclassRates;
use crate::rng::{stream, Purpose};

/// Output of [`run_bootstrap`].
#[derive(Debug, Clone)]
pub struct BootstrapDraws {
    pub scheme: Scheme,
    pub rotated: bool,
    /// `B × k`; row `b` holds `β̂* − β̂`, or the rotated draw `β̃* − R̂*β̂`.
    pub deltas: DMatrix<f64>,
    pub label_stats: Vec<LabelStats>,
    pub diagnostics: LabelDiagnostics,
}

impl BootstrapDraws {
    pub fn reps(&self) -> usize {
        self.deltas.nrows()
    }
}

struct Replicate {
    delta: Vec<f64>,
    stats: LabelStats,
    singular: usize,
    invalid_rates: usize,
}

enum Attempt {
    Done(Vec<f64>, LabelStats),
    Singular,
    InvalidRates,
}

struct Engine<'a> {
    plan: &'a BootstrapPlan,
    rates: &'a MisclassRates,
    design: LabelDesign,
    bm: BiasMatrices,
    theta_hat: &'a [bool],
    pi_hat: f64,
    residuals: &'a [f64],
    /// `(g(1,Zᵢ) − g(0,Zᵢ))'β̂`
    label_effect: Vec<f64>,
    gram_base: Vec<f64>,
    chol_base: Cholesky<f64, Dyn>,
    /// Columns of `G₀ = [g(0,Zᵢ)']` and `G₁ − G₀`, `None` where identically zero.
    zero_cols: Vec<Option<Vec<f64>>>,
    diff_cols: Vec<Option<Vec<f64>>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `Σ aᵢbᵢ` over the rows with `on[i]` set.
fn dot_on(a: &[f64], b: &[f64], on: &[bool]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb, co) = (a.chunks_exact(4), b.chunks_exact(4), on.chunks_exact(4));
    let tail: f64 = (ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .zip(co.remainder()))
    .map(|((x, y), &o)| if o { x * y } else { 0.0 })
    .sum();
    for ((x, y), o) in ca.zip(cb).zip(co) {
        for l in 0..4 {
            acc[l] += if o[l] { x[l] * y[l] } else { 0.0 };
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn column(design: &LabelDesign, j: usize, f: fn(f64, f64) -> f64) -> Option<Vec<f64>> {
    let col: Vec<f64> = (0..design.n())
        .map(|i| f(design.row(i, false)[j], design.row(i, true)[j]))
        .collect();
    col.iter().any(|&v| v != 0.0).then_some(col)
}

/// Pivot ratio below which an updated Gram matrix is rebuilt before judging it.
const SCREEN_TOLERANCE: f64 = 1e-6;

/// Cholesky factor with the ratio of smallest to largest pivot of `L` at least `tol`.
fn factor(gram: &[f64], k: usize, tol: f64) -> Option<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(DMatrix::from_row_slice(k, k, gram))?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = (diag.min(), diag.max());
    (lo > 0.0 && lo / hi >= tol).then_some(chol)
}

impl<'a> Engine<'a> {
    fn new(
        dataset: &'a Dataset,
        spec: &DesignSpec,
        fit: &'a OlsFit,
        rates: &'a MisclassRates,
        plan: &'a BootstrapPlan,
    ) -> Result<Self> {
        plan.validate()?;
        let k = dataset.check_spec(spec)?;
        let n = dataset.n();
        if fit.k() != k || fit.n() != n {
            return Err(Error::DimensionMismatch {
                context: "fit vs dataset and design",
                expected: k,
                found: fit.k(),
            });
        }
        let pi_hat = dataset.pi_hat();
        match plan.scheme {
            Scheme::NoLabelResampling => {}
            Scheme::FixedLabel => {
                FixedLabelPmf::new(rates.f_plus, rates.f_minus, pi_hat)?;
            }
            Scheme::CoupledLabel | Scheme::CoupledLabelVarAdj => {
                CoupledPmf::new(rates.f_plus, rates.f_minus, pi_hat)?;
            }
        }
        let design = LabelDesign::new(&dataset.z, spec)?;
        let bm = bias_matrices_with(&design, false)?;
        let beta = &fit.beta_hat;
        let label_effect = (0..n)
            .map(|i| {
                let (g1, g0) = (design.row(i, true), design.row(i, false));
                (0..k).map(|j| (g1[j] - g0[j]) * beta[j]).sum()
            })
            .collect();
        let gram_base = design.gram(&dataset.theta_hat);
        let chol_base =
            factor(&gram_base, k, RCOND_TOLERANCE).ok_or_else(|| Error::SingularDesign {
                rcond: 0.0,
                columns: Vec::new(),
            })?;
        let zero_cols = (0..k).map(|j| column(&design, j, |g0, _| g0)).collect();
        let diff_cols = (0..k)
            .map(|j| column(&design, j, |g0, g1| g1 - g0))
            .collect();
        Ok(Self {
            plan,
            rates,
            design,
            bm,
            theta_hat: &dataset.theta_hat,
            pi_hat,
            residuals: fit.residuals.as_slice(),
            label_effect,
            gram_base,
            chol_base,
            zero_cols,
            diff_cols,
        })
    }

    fn labels(&self, b: u64, attempt: u64) -> Result<Option<LabelPairDraw>> {
        let seed = self.plan.seed;
        let base = (self.rates.f_plus, self.rates.f_minus);
        let mut rng = stream(seed, &[b, attempt, Purpose::Labels as u64]);
        Ok(Some(match self.plan.scheme {
            Scheme::NoLabelResampling => LabelPairDraw::unperturbed(self.theta_hat),
            Scheme::FixedLabel => sample_fixed_label(self.theta_hat, base, self.pi_hat, &mut rng)?,
            Scheme::CoupledLabel => {
                sample_coupled_label(self.theta_hat, base, self.pi_hat, &mut rng)?
            }
            Scheme::CoupledLabelVarAdj => {
                let star = draw_rate_star(
                    self.rates,
                    &mut stream(seed, &[b, attempt, Purpose::RateDraws as u64]),
                );
                if CoupledPmf::new(star.0, star.1, self.pi_hat).is_err() {
                    return Ok(None);
                }
                sample_coupled_label(self.theta_hat, star, self.pi_hat, &mut rng)?
            }
        }))
    }

    fn attempt(&self, b: u64, attempt: u64) -> Result<Attempt> {
        let Some(labels) = self.labels(b, attempt)? else {
            return Ok(Attempt::InvalidRates);
        };
        let (n, k) = (self.design.n(), self.design.k());
        let eta = draw_wild_weights(
            n,
            self.plan.wild_weights,
            &mut stream(self.plan.seed, &[b, attempt, Purpose::WildWeights as u64]),
        );

        // δ = (X̂*'X̂*)⁻¹ X̂*'e with eᵢ = Y*ᵢ − g(θ̂*ᵢ)'β̂ = ûᵢηᵢ + (g(θ*ᵢ) − g(θ̂*ᵢ))'β̂,
        // and X̂*'e = G₀'e + (G₁ − G₀)'(θ̂* ∘ e).
        let mut flipped = Vec::new();
        let mut discordant = Vec::new();
        let rows = labels
            .theta_star
            .iter()
            .zip(&labels.theta_hat_star)
            .zip(self.theta_hat);
        let e: Vec<f64> = rows
            .zip(self.residuals.iter().zip(&eta))
            .enumerate()
            .map(|(i, (((&ts, &th), &orig), (&r, &w)))| {
                if th != orig {
                    flipped.push(i);
                }
                let mut ei = r * w;
                if ts != th {
                    discordant.push(i);
                    ei += if ts {
                        self.label_effect[i]
                    } else {
                        -self.label_effect[i]
                    };
                }
                ei
            })
            .collect();
        let score = DVector::from_fn(k, |j, _| {
            let base = self.zero_cols[j].as_deref().map_or(0.0, |c| dot(c, &e));
            base + self.diff_cols[j]
                .as_deref()
                .map_or(0.0, |c| dot_on(c, &e, &labels.theta_hat_star))
        });

        let delta = if self.plan.rotate {
            self.chol_base.solve(&score)
        } else {
            match self.bootstrap_factor(&labels.theta_hat_star, &flipped) {
                Some(chol) => chol.solve(&score),
                None => return Ok(Attempt::Singular),
            }
        };
        if delta.iter().any(|d| !d.is_finite()) {
            return Ok(Attempt::Singular);
        }
        let stats = LabelStats::from_discordant(&labels, &discordant, &self.design, &self.bm);
        Ok(Attempt::Done(delta.as_slice().to_vec(), stats))
    }

    /// Cholesky factor of `X̂*'X̂*`, or `None` if it is numerically singular.
    ///
    /// The base Gram matrix is updated for the flipped rows only. Updates can
    /// leave rounding residue where a column should vanish, so a factor with
    /// small pivots is checked again against the Gram matrix built from scratch.
    fn bootstrap_factor(
        &self,
        theta_hat_star: &[bool],
        flipped: &[usize],
    ) -> Option<Cholesky<f64, Dyn>> {
        let k = self.design.k();
        if flipped.is_empty() {
            return Some(self.chol_base.clone());
        }
        let mut gram = self.gram_base.clone();
        for &i in flipped {
            let sign = if theta_hat_star[i] { 1.0 } else { -1.0 };
            let (g1, g0) = (self.design.row(i, true), self.design.row(i, false));
            for a in 0..k {
                for c in a..k {
                    gram[a * k + c] += sign * (g1[a] * g1[c] - g0[a] * g0[c]);
                }
            }
        }
        symmetrize(&mut gram, k);
        match factor(&gram, k, SCREEN_TOLERANCE) {
            Some(chol) => Some(chol),
            None => factor(&self.design.gram(theta_hat_star), k, RCOND_TOLERANCE),
        }
    }

    fn replicate(&self, b: u64) -> Result<Replicate> {
        let (mut singular, mut invalid_rates) = (0, 0);
        for attempt in 0..self.plan.retry_cap as u64 {
            match self.attempt(b, attempt)? {
                Attempt::Done(delta, stats) => {
                    return Ok(Replicate {
                        delta,
                        stats,
                        singular,
                        invalid_rates,
                    })
                }
                Attempt::Singular => singular += 1,
                Attempt::InvalidRates => invalid_rates += 1,
            }
        }
        Err(Error::RetriesExhausted {
            replication: b as usize,
            attempts: self.plan.retry_cap,
            singular,
            invalid_rates,
        })
    }
}

/// Runs `plan.reps` replications of the wild bootstrap with resampled labels.
///
/// Replication `b` draws from streams keyed by `(plan.seed, b, attempt)`, so the
/// output is identical for any thread count. Under
/// [`Scheme::CoupledLabelVarAdj`] a rate draw that makes a branch probability
/// negative is discarded and redrawn, like a singular bootstrap design.
pub fn run_bootstrap(
    dataset: &Dataset,
    spec: &DesignSpec,
    fit: &OlsFit,
    rates: &MisclassRates,
    plan: &BootstrapPlan,
) -> Result<BootstrapDraws> {
    let engine = Engine::new(dataset, spec, fit, rates, plan)?;
    let k = engine.design.k();
    let results: Vec<Result<Replicate>> = (0..plan.reps as u64)
        .into_par_iter()
        .map(|b| engine.replicate(b))
        .collect();
    let mut deltas = DMatrix::zeros(plan.reps, k);
    let mut label_stats = Vec::with_capacity(plan.reps);
    let (mut singular, mut invalid_rates) = (0, 0);
    for (b, r) in results.into_iter().enumerate() {
        let r = r?;
        for j in 0..k {
            deltas[(b, j)] = r.delta[j];
        }
        singular += r.singular;
        invalid_rates += r.invalid_rates;
        label_stats.push(r.stats);
    }
    if singular + invalid_rates > 0 {
        log::info!(
            "bootstrap redraws: {singular} singular designs, {invalid_rates} invalid rate draws"
        );
    }
    let mut diagnostics = diagnose_labels(&label_stats, dataset.n());
    diagnostics.rejected_singular = singular;
    diagnostics.rejected_invalid_rates = invalid_rates;
    Ok(BootstrapDraws {
        scheme: plan.scheme,
        rotated: plan.rotate,
        deltas,
        label_stats,
        diagnostics,
    })
}
