//! Regression designs built from binary labels through a known map `g`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reciprocal condition number below which a design is treated as singular.
pub const RCOND_TOLERANCE: f64 = 1e-10;

/// One output column of a design recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    /// Copy covariate column `j` of `Z`.
    Column(usize),
    /// A fixed value, identical for every observation.
    Constant(f64),
}

impl Term {
    #[inline]
    fn eval(&self, z: &DMatrix<f64>, row: usize) -> f64 {
        match *self {
            Term::Column(j) => z[(row, j)],
            Term::Constant(c) => c,
        }
    }
}

/// The known map `g(θ, Z)` from a label and covariates to the regressors.
///
/// No intercept is ever inserted: if the model has one, `Z` must carry a
/// constant column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum DesignSpec {
    /// `g(θ, Z) = (θ, Z')'`.
    Additive,
    /// `g(θ, Z) = (θ Z₁', Z₂')'` where `Z₁` are the `interacted` columns and
    /// `Z₂` the `plain` ones. The two sets may overlap.
    Interaction {
        interacted: Vec<usize>,
        plain: Vec<usize>,
    },
    /// Arbitrary column recipes for `g(0, ·)` and `g(1, ·)`.
    Custom { zero: Vec<Term>, one: Vec<Term> },
}

impl DesignSpec {
    /// Interaction design whose plain block is every column not interacted.
    pub fn interaction(interacted: Vec<usize>, dz: usize) -> Self {
        let plain = (0..dz).filter(|j| !interacted.contains(j)).collect();
        DesignSpec::Interaction { interacted, plain }
    }

    /// The simulation design `(1, θz, z)` for a single covariate `z`.
    pub fn intercept_interaction() -> Self {
        DesignSpec::Custom {
            zero: vec![Term::Constant(1.0), Term::Constant(0.0), Term::Column(0)],
            one: vec![Term::Constant(1.0), Term::Column(0), Term::Column(0)],
        }
    }

    /// Compiles the design into explicit recipes for `g(0, ·)` and `g(1, ·)`,
    /// checking them against a covariate matrix of width `dz`.
    pub fn recipes(&self, dz: usize) -> Result<(Vec<Term>, Vec<Term>)> {
        let (zero, one) = match self {
            DesignSpec::Additive => {
                let cols: Vec<Term> = (0..dz).map(Term::Column).collect();
                let mut zero = vec![Term::Constant(0.0)];
                zero.extend(cols.iter().copied());
                let mut one = vec![Term::Constant(1.0)];
                one.extend(cols);
                (zero, one)
            }
            DesignSpec::Interaction { interacted, plain } => {
                let mut zero: Vec<Term> = interacted.iter().map(|_| Term::Constant(0.0)).collect();
                let mut one: Vec<Term> = interacted.iter().map(|&j| Term::Column(j)).collect();
                zero.extend(plain.iter().map(|&j| Term::Column(j)));
                one.extend(plain.iter().map(|&j| Term::Column(j)));
                (zero, one)
            }
            DesignSpec::Custom { zero, one } => {
                if zero.len() != one.len() {
                    return Err(Error::RecipeLength {
                        zero: zero.len(),
                        one: one.len(),
                    });
                }
                (zero.clone(), one.clone())
            }
        };
        for term in zero.iter().chain(one.iter()) {
            if let Term::Column(j) = *term {
                if j >= dz {
                    return Err(Error::ColumnOutOfRange {
                        index: j,
                        width: dz,
                    });
                }
            }
        }
        if zero.is_empty() {
            return Err(Error::DimensionMismatch {
                context: "design width",
                expected: 1,
                found: 0,
            });
        }
        Ok((zero, one))
    }

    /// Number of regressors `k` produced for covariates of width `dz`.
    pub fn width(&self, dz: usize) -> Result<usize> {
        self.recipes(dz).map(|(zero, _)| zero.len())
    }

    /// Human-readable coefficient names given the covariate names.
    pub fn coef_names(&self, z_names: &[String], label: &str) -> Result<Vec<String>> {
        let (zero, one) = self.recipes(z_names.len())?;
        let name = |t: &Term| match *t {
            Term::Column(j) => z_names[j].clone(),
            Term::Constant(c) => format!("{c}"),
        };
        Ok(zero
            .iter()
            .zip(one.iter())
            .map(|(a, b)| match (a, b) {
                _ if a == b => name(a),
                (Term::Constant(c0), Term::Constant(c1)) if *c0 == 0.0 && *c1 == 1.0 => {
                    label.to_string()
                }
                (Term::Constant(c0), _) if *c0 == 0.0 => format!("{label}:{}", name(b)),
                _ => format!("{label}?{}|{}", name(a), name(b)),
            })
            .collect())
    }
}

/// Per-observation rows of `g(0, Zᵢ)` and `g(1, Zᵢ)`, stored row-major.
///
/// Resampling schemes only ever switch a row between these two values, so
/// every bootstrap design is a selection from this table.
#[derive(Debug, Clone)]
pub struct LabelDesign {
    n: usize,
    k: usize,
    zero: Vec<f64>,
    one: Vec<f64>,
}

impl LabelDesign {
    pub fn new(z: &DMatrix<f64>, spec: &DesignSpec) -> Result<Self> {
        let (r0, r1) = spec.recipes(z.ncols())?;
        let n = z.nrows();
        let k = r0.len();
        let mut zero = Vec::with_capacity(n * k);
        let mut one = Vec::with_capacity(n * k);
        for i in 0..n {
            zero.extend(r0.iter().map(|t| t.eval(z, i)));
            one.extend(r1.iter().map(|t| t.eval(z, i)));
        }
        Ok(Self { n, k, zero, one })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `g(label, Zᵢ)`.
    #[inline]
    pub fn row(&self, i: usize, label: bool) -> &[f64] {
        let rows = if label { &self.one } else { &self.zero };
        &rows[i * self.k..(i + 1) * self.k]
    }

    /// Stacks `g(θᵢ, Zᵢ)` into an `n × k` matrix.
    pub fn build(&self, theta: &[bool]) -> Result<DMatrix<f64>> {
        if theta.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "labels vs covariate rows",
                expected: self.n,
                found: theta.len(),
            });
        }
        Ok(DMatrix::from_fn(self.n, self.k, |i, j| {
            self.row(i, theta[i])[j]
        }))
    }

    /// `Σᵢ g(θᵢ,Zᵢ) g(θᵢ,Zᵢ)'` as a dense row-major `k × k` buffer.
    pub(crate) fn gram(&self, theta: &[bool]) -> Vec<f64> {
        let k = self.k;
        let mut acc = vec![0.0; k * k];
        for (i, &t) in theta.iter().enumerate() {
            let row = self.row(i, t);
            for a in 0..k {
                let ra = row[a];
                for b in a..k {
                    acc[a * k + b] += ra * row[b];
                }
            }
        }
        symmetrize(&mut acc, k);
        acc
    }
}

pub(crate) fn symmetrize(buf: &mut [f64], k: usize) {
    for a in 0..k {
        for b in 0..a {
            buf[a * k + b] = buf[b * k + a];
        }
    }
}

/// Observed sample: outcome, covariates and imputed labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
    pub theta_hat: Vec<bool>,
    /// Latent labels; only known in simulations.
    pub theta_true: Option<Vec<bool>>,
}

impl Dataset {
    pub fn new(
        y: DVector<f64>,
        z: DMatrix<f64>,
        theta_hat: Vec<bool>,
        theta_true: Option<Vec<bool>>,
    ) -> Result<Self> {
        let n = y.len();
        let check = |context, found| {
            if found == n {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    context,
                    expected: n,
                    found,
                })
            }
        };
        check("covariate rows", z.nrows())?;
        check("imputed labels", theta_hat.len())?;
        if let Some(t) = &theta_true {
            check("true labels", t.len())?;
        }
        Ok(Self {
            y,
            z,
            theta_hat,
            theta_true,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Share of imputed positives, `π̂ = (1/n) Σ θ̂ᵢ`.
    pub fn pi_hat(&self) -> f64 {
        share(&self.theta_hat)
    }

    /// Checks the sample has at least `k + 1` rows for this design.
    pub fn check_spec(&self, spec: &DesignSpec) -> Result<usize> {
        let k = spec.width(self.z.ncols())?;
        if self.n() < k + 1 {
            return Err(Error::TooFewObservations { n: self.n(), k });
        }
        Ok(k)
    }
}

pub(crate) fn share(labels: &[bool]) -> f64 {
    labels.iter().filter(|&&t| t).count() as f64 / labels.len() as f64
}

/// Converts numeric labels to booleans, rejecting anything but 0 and 1.
pub fn labels_from_f64(values: &[f64]) -> Result<Vec<bool>> {
    values
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if value == 0.0 {
                Ok(false)
            } else if value == 1.0 {
                Ok(true)
            } else {
                Err(Error::NonBinaryLabel { index, value })
            }
        })
        .collect()
}

/// OLS fit of `y` on a design matrix with heteroskedasticity-robust pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta_hat: DVector<f64>,
    pub residuals: DVector<f64>,
    /// `(1/n) Σ X̂ᵢX̂ᵢ'`
    pub q_hat: DMatrix<f64>,
    pub q_hat_inv: DMatrix<f64>,
    /// `(1/n) Σ X̂ᵢX̂ᵢ'ûᵢ²` (HC0)
    pub sigma_hat: DMatrix<f64>,
    /// Share of imputed positives; set when the fit comes from a [`Dataset`].
    pub pi_hat: Option<f64>,
}

impl OlsFit {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    pub fn k(&self) -> usize {
        self.beta_hat.len()
    }

    /// `V̂ = Q̂⁻¹ Σ̂ Q̂⁻¹`, the asymptotic variance of `√n(β̂ − β)`.
    pub fn sandwich(&self) -> DMatrix<f64> {
        &self.q_hat_inv * &self.sigma_hat * &self.q_hat_inv
    }
}

/// Stacks `g(θᵢ, Zᵢ)` for every observation.
pub fn build_design(theta: &[bool], z: &DMatrix<f64>, spec: &DesignSpec) -> Result<DMatrix<f64>> {
    if theta.len() != z.nrows() {
        return Err(Error::DimensionMismatch {
            context: "labels vs covariate rows",
            expected: z.nrows(),
            found: theta.len(),
        });
    }
    LabelDesign::new(z, spec)?.build(theta)
}

/// Least squares through a Householder QR factorization.
pub fn ols_fit(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, k) = design.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            context: "outcome vs design rows",
            expected: n,
            found: y.len(),
        });
    }
    if n < k || k == 0 {
        return Err(Error::TooFewObservations { n, k });
    }

    let qr = design.clone().qr();
    let r = qr.r();
    check_conditioning(&r)?;

    let qty = qr.q().tr_mul(y);
    let beta_hat = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign {
            rcond: 0.0,
            columns: Vec::new(),
        })?;
    let residuals = y - design * &beta_hat;

    let nf = n as f64;
    let q_hat = design.tr_mul(design) / nf;
    let r_inv =
        r.solve_upper_triangular(&DMatrix::identity(k, k))
            .ok_or(Error::SingularDesign {
                rcond: 0.0,
                columns: Vec::new(),
            })?;
    // (X'X)⁻¹ = R⁻¹R⁻ᵀ
    let q_hat_inv = (&r_inv * r_inv.transpose()) * nf;

    let mut sigma_hat = DMatrix::zeros(k, k);
    for i in 0..n {
        let x = design.row(i);
        let u2 = residuals[i] * residuals[i];
        for a in 0..k {
            for b in a..k {
                sigma_hat[(a, b)] += x[a] * x[b] * u2;
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            sigma_hat[(a, b)] = sigma_hat[(b, a)];
        }
    }
    sigma_hat /= nf;

    Ok(OlsFit {
        beta_hat,
        residuals,
        q_hat,
        q_hat_inv,
        sigma_hat,
        pi_hat: None,
    })
}

/// Builds the design from the imputed labels and fits OLS.
pub fn fit_dataset(dataset: &Dataset, spec: &DesignSpec) -> Result<OlsFit> {
    dataset.check_spec(spec)?;
    let design = build_design(&dataset.theta_hat, &dataset.z, spec)?;
    let mut fit = ols_fit(&design, &dataset.y)?;
    fit.pi_hat = Some(dataset.pi_hat());
    Ok(fit)
}

fn check_conditioning(r: &DMatrix<f64>) -> Result<()> {
    let svd = r.clone().svd(false, true);
    let sv = &svd.singular_values;
    let (mut imin, mut smin, mut smax) = (0, f64::INFINITY, 0.0f64);
    for (i, &s) in sv.iter().enumerate() {
        if s < smin {
            smin = s;
            imin = i;
        }
        smax = smax.max(s);
    }
    let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
    if rcond.is_finite() && rcond >= RCOND_TOLERANCE {
        return Ok(());
    }
    // Columns loading on the (near) null direction.
    let columns = svd
        .v_t
        .map(|v_t| {
            v_t.row(imin)
                .iter()
                .enumerate()
                .filter(|(_, v)| v.abs() > 0.1)
                .map(|(j, _)| j)
                .collect()
        })
        .unwrap_or_default();
    Err(Error::SingularDesign { rcond, columns })
}

/// Averages of the bias-direction matrices over the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasMatrices {
    /// `(1/n) Σ D₊ᵢ`, `D₊ᵢ = g(1,Zᵢ)(g(1,Zᵢ) − g(0,Zᵢ))'`
    pub d_plus_bar: DMatrix<f64>,
    /// `(1/n) Σ D₋ᵢ`, `D₋ᵢ = g(0,Zᵢ)(g(0,Zᵢ) − g(1,Zᵢ))'`
    pub d_minus_bar: DMatrix<f64>,
    /// Row-wise `(D₊ᵢ, D₋ᵢ)` when requested.
    pub per_obs: Option<Vec<(DMatrix<f64>, DMatrix<f64>)>>,
}

impl BiasMatrices {
    pub fn per_obs_available(&self) -> bool {
        self.per_obs.is_some()
    }
}

/// `D₊ᵢ` and `D₋ᵢ` for a single observation.
pub fn obs_bias(design: &LabelDesign, i: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = design.k();
    let g1 = design.row(i, true);
    let g0 = design.row(i, false);
    let plus = DMatrix::from_fn(k, k, |a, b| g1[a] * (g1[b] - g0[b]));
    let minus = DMatrix::from_fn(k, k, |a, b| g0[a] * (g0[b] - g1[b]));
    (plus, minus)
}

pub fn bias_matrices(z: &DMatrix<f64>, spec: &DesignSpec) -> Result<BiasMatrices> {
    bias_matrices_with(&LabelDesign::new(z, spec)?, false)
}

pub fn bias_matrices_with(design: &LabelDesign, keep_rows: bool) -> Result<BiasMatrices> {
    let (n, k) = (design.n(), design.k());
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut plus = vec![0.0; k * k];
    let mut minus = vec![0.0; k * k];
    for i in 0..n {
        let g1 = design.row(i, true);
        let g0 = design.row(i, false);
        for a in 0..k {
            for b in 0..k {
                let d = g1[b] - g0[b];
                plus[a * k + b] += g1[a] * d;
                minus[a * k + b] -= g0[a] * d;
            }
        }
    }
    let nf = n as f64;
    let per_obs = keep_rows.then(|| (0..n).map(|i| obs_bias(design, i)).collect());
    Ok(BiasMatrices {
        d_plus_bar: DMatrix::from_row_slice(k, k, &plus) / nf,
        d_minus_bar: DMatrix::from_row_slice(k, k, &minus) / nf,
        per_obs,
    })
}
