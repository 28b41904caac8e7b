//! The interactions-model simulation and its coverage tables.
//!
//! Data follow `Yᵢ = 10 + θᵢZᵢ + Zᵢ + (0.3 + 0.2θᵢ)uᵢ` with `Zᵢ, uᵢ ~ N(0, 1)`,
//! `pᵢ = P(χ²₁ ≤ Zᵢ²)` and `p̃ᵢ = 2pᵢ(p̄ − F) + F`. The label pair `(θᵢ, θ̂ᵢ)`
//! takes the values `(1,1), (1,0), (0,1), (0,0)` with probabilities
//! `(p̃ᵢ − F, F, F, 1 − p̃ᵢ − F)` where `F = κ/√n`. The regression is
//! `Y` on `(1, θ̂Z, Z)` and the target is the interaction slope, equal to 1.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::design::{Dataset, DesignSpec};
use crate::error::{Error, Result};
use crate::inference::{Analysis, Method, MethodSettings};
use crate::misclass::estimate_rates;
use crate::rng::{derive, stream, Purpose};

/// Index of the interaction slope in `(1, θZ, Z)`.
pub const TARGET_COEF: usize = 1;
pub const TRUE_SLOPE: f64 = 1.0;
/// `√n / m` held fixed across sample sizes.
pub const ROOT_N_OVER_M: f64 = 0.1265;

/// External sample size keeping `√n/m` at [`ROOT_N_OVER_M`].
pub fn external_size(n: usize) -> u64 {
    ((n as f64).sqrt() / ROOT_N_OVER_M).round() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// `κ₊ = κ₋ = κ`.
    pub kappa: f64,
    pub p_bar: f64,
    pub m: u64,
    /// Monte Carlo replications.
    pub reps: usize,
    /// Bootstrap replications `B`.
    pub boot_reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub methods: Vec<Method>,
}

impl SimConfig {
    /// Desk-scale defaults: 2000 replications with `B = 299`, all six methods.
    pub fn new(n: usize, kappa: f64, p_bar: f64) -> Self {
        Self {
            n,
            kappa,
            p_bar,
            m: external_size(n),
            reps: 2000,
            boot_reps: 299,
            seed: 0,
            alpha: 0.05,
            methods: Method::ALL.to_vec(),
        }
    }

    /// `F = κ/√n`.
    pub fn rate(&self) -> f64 {
        self.kappa / (self.n as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSimConfig(msg));
        if self.n < 4 {
            return fail(format!("n = {} is too small", self.n));
        }
        if self.reps == 0 {
            return fail("reps must be at least 1".into());
        }
        if self.m == 0 {
            return fail("external sample size m must be at least 1".into());
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return fail(format!(
                "kappa = {} must be finite and nonnegative",
                self.kappa
            ));
        }
        let f = self.rate();
        // p̃ ranges over [F, 2p̄ − F]; P(0,0) = 1 − p̃ − F needs p̄ ≤ 1/2.
        if !(self.p_bar > f && self.p_bar <= 0.5) {
            return fail(format!(
                "need F = kappa/sqrt(n) = {f:.5} < p_bar = {} <= 0.5 for nonnegative label probabilities",
                self.p_bar
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        if self.methods.iter().any(|m| m.scheme().is_some()) && self.boot_reps < 2 {
            return fail("bootstrap methods need boot_reps >= 2".into());
        }
        Ok(())
    }

    /// The 3 × 3 grid `n ∈ {8000, 16000, 32000}`, `κ ∈ {0.5, 1, 1.5}`.
    pub fn grid(p_bar: f64, reps: usize, boot_reps: usize, seed: u64) -> Vec<SimConfig> {
        let mut out = Vec::with_capacity(9);
        for n in [8000, 16000, 32000] {
            for kappa in [0.5, 1.0, 1.5] {
                out.push(SimConfig {
                    reps,
                    boot_reps,
                    seed,
                    ..SimConfig::new(n, kappa, p_bar)
                });
            }
        }
        out
    }

    /// A single small cell that finishes in seconds.
    pub fn smoke(seed: u64) -> SimConfig {
        SimConfig {
            reps: 50,
            boot_reps: 99,
            seed,
            ..SimConfig::new(2000, 1.0, 0.5)
        }
    }
}

/// `pᵢ = P(χ²₁ ≤ z²) = erf(|z|/√2)`.
pub fn chi2_1_cdf_of_square(z: f64) -> f64 {
    erf(z.abs() / std::f64::consts::SQRT_2)
}

/// Joint probabilities of `(θ, θ̂)` in the order `(1,1), (1,0), (0,1), (0,0)`.
pub fn joint_label_probs(p: f64, p_bar: f64, f: f64) -> Result<[f64; 4]> {
    let p_tilde = p * 2.0 * (p_bar - f) + f;
    let mut probs = [p_tilde - f, f, f, 1.0 - p_tilde - f];
    // rounding at the edges of the p̃ range
    for q in probs.iter_mut() {
        if *q < 0.0 && *q > -1e-12 {
            *q = 0.0;
        }
    }
    if let Some(bad) = probs.iter().find(|&&q| q < 0.0) {
        return Err(Error::InvalidSimConfig(format!(
            "negative label probability {bad} at p = {p}"
        )));
    }
    debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    Ok(probs)
}

fn draw_pair(probs: &[f64; 4], u: f64) -> (bool, bool) {
    let c1 = probs[0];
    let c2 = c1 + probs[1];
    let c3 = c2 + probs[2];
    if u < c1 {
        (true, true)
    } else if u < c2 {
        (true, false)
    } else if u < c3 {
        (false, true)
    } else {
        (false, false)
    }
}

/// A simulated regression sample with its external validation pairs.
#[derive(Debug, Clone)]
pub struct SimDraw {
    pub dataset: Dataset,
    /// `(θ, θ̂)` pairs of the external sample.
    pub external: Vec<(f64, f64)>,
}

/// Draws `(θ, θ̂)` for covariate values `z`.
fn label_pairs<R: Rng>(config: &SimConfig, z: &[f64], rng: &mut R) -> Result<Vec<(bool, bool)>> {
    let f = config.rate();
    z.iter()
        .map(|&zi| {
            let probs = joint_label_probs(chi2_1_cdf_of_square(zi), config.p_bar, f)?;
            Ok(draw_pair(&probs, rng.random()))
        })
        .collect()
}

pub fn simulate_dataset(config: &SimConfig, rep: u64) -> Result<SimDraw> {
    config.validate()?;
    let n = config.n;
    let mut cov = stream(config.seed, &[rep, Purpose::SimCovariates as u64]);
    let z: Vec<f64> = (0..n).map(|_| cov.sample(StandardNormal)).collect();
    let u: Vec<f64> = (0..n).map(|_| cov.sample(StandardNormal)).collect();
    let pairs = label_pairs(
        config,
        &z,
        &mut stream(config.seed, &[rep, Purpose::SimLabels as u64]),
    )?;
    let y = DVector::from_fn(n, |i, _| {
        let t = if pairs[i].0 { 1.0 } else { 0.0 };
        10.0 + t * z[i] + z[i] + (0.3 + 0.2 * t) * u[i]
    });
    let theta_true = pairs.iter().map(|p| p.0).collect();
    let theta_hat = pairs.iter().map(|p| p.1).collect();

    let mut ext = stream(config.seed, &[rep, Purpose::SimExternal as u64]);
    let z_ext: Vec<f64> = (0..config.m).map(|_| ext.sample(StandardNormal)).collect();
    let external = label_pairs(config, &z_ext, &mut ext)?
        .into_iter()
        .map(|(t, h)| (t as u8 as f64, h as u8 as f64))
        .collect();

    let dataset = Dataset::new(y, DMatrix::from_vec(n, 1, z), theta_hat, Some(theta_true))?;
    Ok(SimDraw { dataset, external })
}

/// `corr(θᵢ, Zᵢ²)` over `draws` simulated observations.
pub fn theta_z2_correlation(config: &SimConfig, draws: usize) -> Result<f64> {
    config.validate()?;
    let mut rng = stream(config.seed, &[u64::MAX, Purpose::SimCovariates as u64]);
    let z: Vec<f64> = (0..draws).map(|_| rng.sample(StandardNormal)).collect();
    let pairs = label_pairs(config, &z, &mut rng)?;
    let x: Vec<f64> = pairs.iter().map(|p| p.0 as u8 as f64).collect();
    let y: Vec<f64> = z.iter().map(|v| v * v).collect();
    Ok(correlation(&x, &y))
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Target-coefficient results of one method in one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepOutcome {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    /// Largest L(iii) t-statistic, for bootstrap methods.
    pub l3_t: Option<f64>,
    pub redraws: usize,
}

/// One replication: simulate, estimate rates, run every method.
pub fn run_rep(config: &SimConfig, rep: u64) -> Result<Vec<RepOutcome>> {
    let draw = simulate_dataset(config, rep)?;
    let rates = estimate_rates(&draw.external)?;
    let spec = DesignSpec::intercept_interaction();
    let analysis = Analysis::new(&draw.dataset, &spec, rates)?;
    let settings = MethodSettings {
        alpha: config.alpha,
        reps: config.boot_reps,
        seed: derive(config.seed, &[rep, Purpose::Bootstrap as u64]),
        ..MethodSettings::default()
    };
    config
        .methods
        .iter()
        .map(|&m| {
            let o = analysis.run(m, &settings)?;
            let ci = o.ci[TARGET_COEF];
            Ok(RepOutcome {
                estimate: o.estimate[TARGET_COEF],
                lo: ci.lo,
                hi: ci.hi,
                l3_t: o.diagnostics.as_ref().map(|d| d.l3_max_abs_t),
                redraws: o
                    .diagnostics
                    .as_ref()
                    .map_or(0, |d| d.rejected_singular + d.rejected_invalid_rates),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Median over replications of `estimate − 1`.
    pub median_bias: f64,
    /// Share of intervals containing 1.
    pub coverage: f64,
    pub median_length: f64,
    /// Median of the largest L(iii) t-statistic, for bootstrap methods.
    pub median_l3_t: Option<f64>,
    pub redraws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub config: SimConfig,
    pub reps_completed: usize,
    pub failed_reps: usize,
    pub methods: Vec<MethodSummary>,
    /// Excluded from serialized output so records are reproducible.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl CellResult {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == method)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn summarize(method_index: usize, method: Method, reps: &[Vec<RepOutcome>]) -> MethodSummary {
    let rows: Vec<&RepOutcome> = reps.iter().map(|r| &r[method_index]).collect();
    let count = rows.len() as f64;
    let mut bias: Vec<f64> = rows.iter().map(|r| r.estimate - TRUE_SLOPE).collect();
    let mut length: Vec<f64> = rows.iter().map(|r| r.hi - r.lo).collect();
    let covered = rows
        .iter()
        .filter(|r| r.lo <= TRUE_SLOPE && TRUE_SLOPE <= r.hi)
        .count();
    let mut l3: Vec<f64> = rows.iter().filter_map(|r| r.l3_t).collect();
    MethodSummary {
        method,
        median_bias: median(&mut bias),
        coverage: covered as f64 / count,
        median_length: median(&mut length),
        median_l3_t: (!l3.is_empty()).then(|| median(&mut l3)),
        redraws: rows.iter().map(|r| r.redraws).sum(),
    }
}

/// Runs every replication of a cell. More than 1% failed replications abort
/// the cell.
pub fn run_cell(config: &SimConfig) -> Result<CellResult> {
    config.validate()?;
    let start = Instant::now();
    let results: Vec<Result<Vec<RepOutcome>>> = (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| run_rep(config, rep))
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut failed = 0;
    let mut first = None;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                failed += 1;
                first.get_or_insert(e.to_string());
            }
        }
    }
    if failed * 100 > config.reps || ok.is_empty() {
        return Err(Error::CellAborted {
            failed,
            reps: config.reps,
            first: first.unwrap_or_default(),
        });
    }
    if failed > 0 {
        log::warn!(
            "{failed} of {} replications failed: {}",
            config.reps,
            first.unwrap_or_default()
        );
    }
    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(i, &m)| summarize(i, m, &ok))
        .collect();
    Ok(CellResult {
        config: config.clone(),
        reps_completed: ok.len(),
        failed_reps: failed,
        methods,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Flat record of one method in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub n: usize,
    pub kappa: f64,
    pub p_bar: f64,
    pub m: u64,
    pub reps: usize,
    #[serde(rename = "B")]
    pub boot_reps: usize,
    pub seed: u64,
    pub method: Method,
    pub median_bias: f64,
    pub coverage: f64,
    pub median_length: f64,
    pub reps_completed: usize,
    pub failed_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub cells: Vec<CellResult>,
}

impl TableReport {
    pub fn records(&self) -> Vec<CellRecord> {
        self.cells
            .iter()
            .flat_map(|c| {
                c.methods.iter().map(move |s| CellRecord {
                    n: c.config.n,
                    kappa: c.config.kappa,
                    p_bar: c.config.p_bar,
                    m: c.config.m,
                    reps: c.config.reps,
                    boot_reps: c.config.boot_reps,
                    seed: c.config.seed,
                    method: s.method,
                    median_bias: s.median_bias,
                    coverage: s.coverage,
                    median_length: s.median_length,
                    reps_completed: c.reps_completed,
                    failed_reps: c.failed_reps,
                })
            })
            .collect()
    }

    /// Aligned text: one block per statistic, methods as rows and cells as columns.
    pub fn to_text(&self) -> String {
        let mut methods: Vec<Method> = Vec::new();
        for c in &self.cells {
            for s in &c.methods {
                if !methods.contains(&s.method) {
                    methods.push(s.method);
                }
            }
        }
        let width = methods
            .iter()
            .map(|m| m.title().len())
            .max()
            .unwrap_or(6)
            .max(6);
        let headers: Vec<String> = self
            .cells
            .iter()
            .map(|c| format!("n={} k={}", c.config.n, c.config.kappa))
            .collect();
        let col = headers.iter().map(String::len).max().unwrap_or(8).max(8);
        let mut out = String::new();
        if let Some(first) = self.cells.first() {
            let _ = writeln!(
                out,
                "p_bar = {}, reps = {}, B = {}, seed = {}",
                first.config.p_bar, first.config.reps, first.config.boot_reps, first.config.seed
            );
        }
        type Stat = fn(&MethodSummary) -> String;
        let stats: [(&str, Stat); 3] = [
            ("Median bias", |s| format!("{:.3}", s.median_bias)),
            ("Coverage (%)", |s| format!("{:.1}", 100.0 * s.coverage)),
            ("Median length", |s| format!("{:.3}", s.median_length)),
        ];
        for (name, stat) in stats {
            let _ = writeln!(out, "\n{name}");
            let _ = write!(out, "{:<width$}", "");
            for h in &headers {
                let _ = write!(out, "  {h:>col$}");
            }
            out.push('\n');
            for &m in &methods {
                let _ = write!(out, "{:<width$}", m.title());
                for c in &self.cells {
                    let cell = c.method(m).map(stat).unwrap_or_else(|| "-".into());
                    let _ = write!(out, "  {cell:>col$}");
                }
                out.push('\n');
            }
        }
        out
    }
}

pub fn run_table(configs: &[SimConfig]) -> Result<TableReport> {
    if configs.is_empty() {
        return Err(Error::InvalidSimConfig("empty grid".into()));
    }
    let cells = configs
        .iter()
        .map(|c| {
            log::info!("cell n = {}, kappa = {}, p_bar = {}", c.n, c.kappa, c.p_bar);
            run_cell(c)
        })
        .collect::<Result<_>>()?;
    Ok(TableReport { cells })
}
