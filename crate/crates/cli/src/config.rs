//! Run configuration: a TOML file with command-line overrides.

use std::path::{Path, PathBuf};

use labelboot::misclass::{estimate_rates, rates_from_summary};
use labelboot::{DesignSpec, Method, MisclassRates, SimConfig, Term, WildWeights};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::ingest::{read_rate_pairs, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Estimate,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignForm {
    /// `(θ, Z')'`
    #[default]
    Additive,
    /// `(θZ₁', Z₂')'` with `Z₁` the `interacted` columns.
    Interaction,
    /// Explicit `zero` and `one` recipes.
    Custom,
}

/// Design description in terms of covariate names.
///
/// Custom recipe entries are either a covariate name or a numeric constant.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    #[serde(default)]
    pub form: DesignForm,
    #[serde(default)]
    pub interacted: Vec<String>,
    #[serde(default)]
    pub zero: Vec<String>,
    #[serde(default)]
    pub one: Vec<String>,
}

impl DesignConfig {
    pub fn resolve(&self, names: &[String]) -> Result<DesignSpec> {
        let index = |name: &str| {
            names.iter().position(|n| n == name).ok_or_else(|| {
                CliError::Config(format!("design refers to unknown covariate {name:?}"))
            })
        };
        match self.form {
            DesignForm::Additive => Ok(DesignSpec::Additive),
            DesignForm::Interaction => {
                let interacted = self
                    .interacted
                    .iter()
                    .map(|n| index(n))
                    .collect::<Result<Vec<_>>>()?;
                if interacted.is_empty() {
                    return Err(CliError::Config(
                        "interaction design needs interacted columns".into(),
                    ));
                }
                Ok(DesignSpec::interaction(interacted, names.len()))
            }
            DesignForm::Custom => {
                let term = |s: &String| match s.parse::<f64>() {
                    Ok(c) => Ok(Term::Constant(c)),
                    Err(_) => index(s).map(Term::Column),
                };
                let zero = self.zero.iter().map(term).collect::<Result<Vec<_>>>()?;
                let one = self.one.iter().map(term).collect::<Result<Vec<_>>>()?;
                let spec = DesignSpec::Custom { zero, one };
                spec.recipes(names.len())?;
                Ok(spec)
            }
        }
    }
}

impl std::str::FromStr for DesignConfig {
    type Err = String;

    /// `additive` or `interaction:col1,col2`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "additive" => Ok(DesignConfig::default()),
            Some(("interaction", cols)) => Ok(DesignConfig {
                form: DesignForm::Interaction,
                interacted: cols.split(',').map(|c| c.trim().to_string()).collect(),
                ..DesignConfig::default()
            }),
            _ => Err(format!(
                "expected `additive` or `interaction:col1,col2`, got {s:?}"
            )),
        }
    }
}

/// Either a published summary `(F̂₊, F̂₋, m)` or a file of validation pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub f_plus: Option<f64>,
    pub f_minus: Option<f64>,
    pub m: Option<u64>,
    pub pairs: Option<PathBuf>,
}

impl RatesConfig {
    pub fn summary(f_plus: f64, f_minus: f64, m: u64) -> Self {
        Self {
            f_plus: Some(f_plus),
            f_minus: Some(f_minus),
            m: Some(m),
            pairs: None,
        }
    }

    /// Parses `F+,F-,m`.
    pub fn parse_triple(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || format!("expected F+,F-,m, got {s:?}");
        let [fp, fm, m] = parts.as_slice() else {
            return Err(bad());
        };
        Ok(Self::summary(
            fp.parse().map_err(|_| bad())?,
            fm.parse().map_err(|_| bad())?,
            m.parse().map_err(|_| bad())?,
        ))
    }

    pub fn resolve(&self) -> Result<MisclassRates> {
        match (self.pairs.as_ref(), self.f_plus, self.f_minus, self.m) {
            (Some(path), None, None, None) => Ok(estimate_rates(&read_rate_pairs(path)?)?),
            (None, Some(fp), Some(fm), Some(m)) => {
                rates_from_summary(fp, fm, m).map_err(|e| CliError::Config(e.to_string()))
            }
            _ => Err(CliError::Config(
                "rates need either `pairs` or all of `f_plus`, `f_minus`, `m`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    /// Replications `B`; defaults to 499, or to the preset's value when simulating.
    pub reps: Option<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub wild_weights: WildWeights,
    #[serde(default = "default_retry_cap")]
    pub retry_cap: usize,
    /// Write the `B × k` draw matrix of each bootstrap method.
    #[serde(default)]
    pub write_draws: bool,
}

pub const DEFAULT_BOOT_REPS: usize = 499;

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_retry_cap() -> usize {
    labelboot::bootstrap::DEFAULT_RETRY_CAP
}

impl BootstrapConfig {
    pub fn reps(&self) -> usize {
        self.reps.unwrap_or(DEFAULT_BOOT_REPS)
    }
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            reps: None,
            methods: default_methods(),
            wild_weights: WildWeights::default(),
            retry_cap: default_retry_cap(),
            write_draws: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 3 × 3 grid at `p̄ = 0.5`, 2000 replications, `B = 299`.
    Table1Desk,
    /// 3 × 3 grid at `p̄ = 0.05`, 2000 replications, `B = 299`.
    Table2Desk,
    /// One cell, `n = 2000`, 50 replications, `B = 99`.
    Smoke,
}

/// Simulation grid: a preset, or explicit `n × kappa` values at one `p_bar`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub preset: Option<Preset>,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub kappa: Vec<f64>,
    pub p_bar: Option<f64>,
    /// Overrides the preset's Monte Carlo replications.
    pub reps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Coefficients shown in the text table; defaults to those involving the label.
    #[serde(default)]
    pub report: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default)]
    pub rates: RatesConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub path: PathBuf,
    #[serde(flatten)]
    pub schema: Schema,
}

fn default_seed() -> u64 {
    1
}

fn default_alpha() -> f64 {
    0.05
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::default(),
            seed: default_seed(),
            alpha: default_alpha(),
            threads: None,
            data: None,
            design: DesignConfig::default(),
            rates: RatesConfig::default(),
            bootstrap: BootstrapConfig::default(),
            simulate: SimulateConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file. Relative data and rate paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = cfg.data.as_mut() {
            rebase(&mut d.path);
        }
        if let Some(p) = cfg.rates.pairs.as_mut() {
            rebase(p);
        }
        Ok(cfg)
    }

    /// Checks settings that do not need the data.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        if self.bootstrap.methods.is_empty() {
            return fail("no methods selected".into());
        }
        if self.bootstrap.methods.iter().any(|m| m.scheme().is_some()) && self.bootstrap.reps() < 2
        {
            return fail("bootstrap methods need at least 2 replications".into());
        }
        if self.bootstrap.retry_cap == 0 {
            return fail("retry_cap must be at least 1".into());
        }
        match self.mode {
            Mode::Estimate => {
                let Some(data) = &self.data else {
                    return fail("estimate needs a data file".into());
                };
                if !data.path.is_file() {
                    return fail(format!("data file {} does not exist", data.path.display()));
                }
                if let Some(p) = &self.rates.pairs {
                    if !p.is_file() {
                        return fail(format!("rates file {} does not exist", p.display()));
                    }
                }
            }
            Mode::Simulate => {
                for cell in self.sim_cells()? {
                    cell.validate()
                        .map_err(|e| CliError::Config(e.to_string()))?;
                }
            }
        }
        Ok(())
    }

    /// Simulation cells described by the config.
    pub fn sim_cells(&self) -> Result<Vec<SimConfig>> {
        let sim = &self.simulate;
        let mut cells = match sim.preset {
            Some(Preset::Table1Desk) => SimConfig::grid(0.5, 2000, 299, self.seed),
            Some(Preset::Table2Desk) => SimConfig::grid(0.05, 2000, 299, self.seed),
            Some(Preset::Smoke) => vec![SimConfig::smoke(self.seed)],
            None => {
                let p_bar = sim.p_bar.ok_or_else(|| {
                    CliError::Config("simulate needs a preset or p_bar, n and kappa".into())
                })?;
                if sim.n.is_empty() || sim.kappa.is_empty() {
                    return Err(CliError::Config("simulate needs n and kappa values".into()));
                }
                let mut cells = Vec::new();
                for &n in &sim.n {
                    for &kappa in &sim.kappa {
                        cells.push(SimConfig {
                            seed: self.seed,
                            ..SimConfig::new(n, kappa, p_bar)
                        });
                    }
                }
                cells
            }
        };
        for c in &mut cells {
            if let Some(reps) = sim.reps {
                c.reps = reps;
            }
            if let Some(b) = self.bootstrap.reps {
                c.boot_reps = b;
            }
            c.alpha = self.alpha;
            c.methods = self.bootstrap.methods.clone();
        }
        Ok(cells)
    }

    /// The config without thread count and output location.
    pub fn canonical(&self) -> RunConfig {
        let mut canonical = self.clone();
        canonical.threads = None;
        canonical.output.dir = None;
        canonical
    }

    /// SHA-256 of the settings that determine the results. Thread count and
    /// output location are left out.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
