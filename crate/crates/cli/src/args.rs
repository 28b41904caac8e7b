//! Command-line flags and their merge into a [`RunConfig`].

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use labelboot::{Method, WildWeights};

use crate::commands::{estimate_command, simulate_command};
use crate::config::{DataConfig, DesignConfig, Mode, Preset, RatesConfig, RunConfig};
use crate::error::{CliError, Result};
use crate::ingest::Schema;
use crate::synth::{write_postings_csv, SynthConfig};

#[derive(Debug, Parser)]
#[command(
    name = "labelboot",
    version,
    about = "Bootstrap inference for regressions on classifier-generated labels"
)]
pub struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the estimators on a CSV sample.
    Estimate(Box<EstimateArgs>),
    /// Run a Monte Carlo coverage study.
    Simulate(SimulateArgs),
    /// Write the synthetic near-singular job-postings sample.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Bootstrap replications B.
    #[arg(long = "boot-reps")]
    pub boot_reps: Option<usize>,
    /// Methods to run, comma separated: ols, bchs, no-label, fixed-label,
    /// coupled-label, coupled-rotated-varadj.
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<Method>,
    #[arg(long = "wild-weights", value_parser = parse_weights)]
    pub wild_weights: Option<WildWeights>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "LABELBOOT_THREADS")]
    pub threads: Option<usize>,
}

fn parse_weights(s: &str) -> std::result::Result<WildWeights, String> {
    match s {
        "standard-normal" | "normal" => Ok(WildWeights::StandardNormal),
        "rademacher" => Ok(WildWeights::Rademacher),
        _ => Err(format!("expected standard-normal or rademacher, got {s:?}")),
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Sample CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub outcome: Option<String>,
    /// Imputed label column.
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Categorical columns expanded to indicators.
    #[arg(long = "fixed-effects", value_delimiter = ',')]
    pub fixed_effects: Option<Vec<String>>,
    /// `additive` or `interaction:col1,col2`.
    #[arg(long)]
    pub design: Option<DesignConfig>,
    /// Summary rates `F+,F-,m`.
    #[arg(long, value_parser = RatesConfig::parse_triple, conflicts_with = "rates_file")]
    pub rates: Option<RatesConfig>,
    /// Validation pairs CSV with columns `theta,theta_hat`.
    #[arg(long = "rates-file")]
    pub rates_file: Option<PathBuf>,
    /// Coefficients shown in the text table.
    #[arg(long, value_delimiter = ',')]
    pub report: Option<Vec<String>>,
    /// Also write each bootstrap draw matrix.
    #[arg(long = "write-draws")]
    pub write_draws: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Monte Carlo replications per cell.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub kappa: Option<Vec<f64>>,
    #[arg(long = "p-bar")]
    pub p_bar: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Destination CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = SynthConfig::default().n)]
    pub n: usize,
    #[arg(long, default_value_t = SynthConfig::default().seed)]
    pub seed: u64,
}

fn base_config(common: &CommonArgs, mode: Mode) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.mode = mode;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(a) = common.alpha {
        cfg.alpha = a;
    }
    if let Some(b) = common.boot_reps {
        cfg.bootstrap.reps = Some(b);
    }
    if !common.method.is_empty() {
        cfg.bootstrap.methods = common.method.clone();
    }
    if let Some(w) = common.wild_weights {
        cfg.bootstrap.wild_weights = w;
    }
    if let Some(dir) = &common.out {
        cfg.output.dir = Some(dir.clone());
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    Ok(cfg)
}

pub fn estimate_config(args: &EstimateArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&args.common, Mode::Estimate)?;
    if let Some(path) = &args.data {
        let schema = cfg.data.take().map(|d| d.schema).unwrap_or_default();
        cfg.data = Some(DataConfig {
            path: path.clone(),
            schema,
        });
    }
    let has_role_flags = args.outcome.is_some()
        || args.label.is_some()
        || args.covariates.is_some()
        || args.fixed_effects.is_some();
    if has_role_flags {
        let data = cfg
            .data
            .as_mut()
            .ok_or_else(|| CliError::Config("column roles given without --data".into()))?;
        let schema: &mut Schema = &mut data.schema;
        if let Some(o) = &args.outcome {
            schema.outcome = o.clone();
        }
        if let Some(l) = &args.label {
            schema.label = l.clone();
        }
        if let Some(c) = &args.covariates {
            schema.covariates = c.clone();
        }
        if let Some(f) = &args.fixed_effects {
            schema.fixed_effects = f.clone();
        }
    }
    if let Some(data) = &cfg.data {
        if data.schema.outcome.is_empty() || data.schema.label.is_empty() {
            return Err(CliError::Config(
                "data needs --outcome and --label columns".into(),
            ));
        }
    }
    if let Some(d) = &args.design {
        cfg.design = d.clone();
    }
    if let Some(r) = &args.rates {
        cfg.rates = r.clone();
    }
    if let Some(p) = &args.rates_file {
        cfg.rates = RatesConfig {
            pairs: Some(p.clone()),
            ..RatesConfig::default()
        };
    }
    if let Some(r) = &args.report {
        cfg.output.report = r.clone();
    }
    if args.write_draws {
        cfg.bootstrap.write_draws = true;
    }
    Ok(cfg)
}

pub fn simulate_config(args: &SimulateArgs) -> Result<RunConfig> {
    let mut cfg = base_config(&args.common, Mode::Simulate)?;
    let sim = &mut cfg.simulate;
    if args.preset.is_some() {
        sim.preset = args.preset;
    }
    if args.reps.is_some() {
        sim.reps = args.reps;
    }
    if let Some(n) = &args.n {
        sim.n = n.clone();
    }
    if let Some(k) = &args.kappa {
        sim.kappa = k.clone();
    }
    if args.p_bar.is_some() {
        sim.p_bar = args.p_bar;
    }
    Ok(cfg)
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let print = |stdout: &mut dyn Write, text: &str| {
        stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e))
    };
    match &cli.command {
        Command::Estimate(args) => {
            let out = estimate_command(&estimate_config(args)?)?;
            print(stdout, &out.table)
        }
        Command::Simulate(args) => {
            let out = simulate_command(&simulate_config(args)?)?;
            print(stdout, &out.table)
        }
        Command::Synth(args) => {
            let cfg = SynthConfig {
                n: args.n,
                seed: args.seed,
                ..SynthConfig::default()
            };
            write_postings_csv(&args.out, &cfg)
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
