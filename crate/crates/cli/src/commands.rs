//! The `estimate` and `simulate` commands.

use std::path::Path;

use labelboot::montecarlo::run_table;
use labelboot::{
    Analysis, DMatrix, LabelDiagnostics, Method, MethodOutcome, MethodSettings, MisclassRates,
    TableReport,
};
use serde::Serialize;

use crate::config::{Mode, RunConfig};
use crate::error::{CliError, Result};
use crate::ingest::{ingest_csv, BaseLevel};
use crate::output::{
    estimate_records, estimate_table, sim_records, to_jsonl, write_file, EstimateRecord, SimRecord,
};

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RatesSummary {
    pub f_plus: f64,
    pub f_minus: f64,
    pub m: u64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodDiagnostics {
    pub method: Method,
    pub diagnostics: LabelDiagnostics,
}

/// Run metadata and label diagnostics written next to the estimates.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateSummary {
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub dropped_rows: usize,
    pub base_levels: Vec<BaseLevel>,
    pub pi_hat: f64,
    pub rates: RatesSummary,
    pub coefficients: Vec<String>,
    pub diagnostics: Vec<MethodDiagnostics>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize)]
struct DrawFile<'a> {
    config_hash: &'a str,
    seed: u64,
    method: Method,
    coefficients: &'a [String],
    draws: &'a DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub outcomes: Vec<MethodOutcome>,
    pub records: Vec<EstimateRecord>,
    pub summary: EstimateSummary,
    pub table: String,
}

impl EstimateOutput {
    pub fn jsonl(&self) -> String {
        to_jsonl(&self.records)
    }

    pub fn outcome(&self, method: Method) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }

    /// Writes `estimates.jsonl`, `estimates.txt`, `diagnostics.json` and, when
    /// draws were kept, one `draws-<method>.json` per bootstrap method.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_file(&dir.join("estimates.jsonl"), &self.jsonl())?;
        write_file(&dir.join("estimates.txt"), &self.table)?;
        let summary = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        write_file(&dir.join("diagnostics.json"), &(summary + "\n"))?;
        for o in &self.outcomes {
            if let Some(draws) = &o.draws {
                let file = DrawFile {
                    config_hash: &self.summary.config_hash,
                    seed: self.summary.seed,
                    method: o.method,
                    coefficients: &self.summary.coefficients,
                    draws,
                };
                let text = serde_json::to_string(&file).expect("draws serialize") + "\n";
                write_file(&dir.join(format!("draws-{}.json", o.method)), &text)?;
            }
        }
        Ok(())
    }
}

fn rates_summary(rates: &MisclassRates, n: usize) -> RatesSummary {
    RatesSummary {
        f_plus: rates.f_plus,
        f_minus: rates.f_minus,
        m: rates.m,
        kappa_plus: rates.kappa_plus(n),
        kappa_minus: rates.kappa_minus(n),
    }
}

/// Ingests the data and runs the configured methods.
pub fn estimate(cfg: &RunConfig) -> Result<EstimateOutput> {
    if cfg.mode != Mode::Estimate {
        return Err(CliError::Config("config is not in estimate mode".into()));
    }
    cfg.validate()?;
    let data = cfg.data.as_ref().expect("validated");
    let ingested = ingest_csv(&data.path, &data.schema)?;
    let spec = cfg.design.resolve(&ingested.covariate_names)?;
    let rates = cfg.rates.resolve()?;
    let coef_names = spec.coef_names(&ingested.covariate_names, &data.schema.label)?;
    let (zero, one) = spec.recipes(ingested.covariate_names.len())?;
    let shown: Vec<usize> = if cfg.output.report.is_empty() {
        (0..zero.len()).filter(|&j| zero[j] != one[j]).collect()
    } else {
        cfg.output
            .report
            .iter()
            .map(|name| {
                coef_names.iter().position(|c| c == name).ok_or_else(|| {
                    CliError::Config(format!(
                        "no coefficient named {name:?}; have {coef_names:?}"
                    ))
                })
            })
            .collect::<Result<_>>()?
    };

    let dataset = &ingested.dataset;
    let n = dataset.n();
    let analysis = Analysis::new(dataset, &spec, rates)?;
    let settings = MethodSettings {
        alpha: cfg.alpha,
        reps: cfg.bootstrap.reps(),
        seed: cfg.seed,
        wild_weights: cfg.bootstrap.wild_weights,
        retry_cap: cfg.bootstrap.retry_cap,
        keep_draws: cfg.bootstrap.write_draws,
    };
    let outcomes = with_threads(cfg.threads, || {
        analysis.run_all(&cfg.bootstrap.methods, &settings)
    })??;

    let hash = cfg.hash();
    let records = estimate_records(
        &outcomes,
        &coef_names,
        n,
        settings.reps,
        cfg.seed,
        cfg.alpha,
        &hash,
    );
    let rates_out = rates_summary(&rates, n);
    let pi_hat = dataset.pi_hat();
    let preamble = vec![
        format!("config_hash = {hash}, seed = {}", cfg.seed),
        format!(
            "n = {n} ({} rows dropped), pi_hat = {pi_hat:.4}, F+ = {}, F- = {}, m = {}, B = {}, alpha = {}",
            ingested.dropped_rows, rates.f_plus, rates.f_minus, rates.m, settings.reps, cfg.alpha
        ),
    ];
    let table = estimate_table(&outcomes, &coef_names, &shown, &preamble);
    let diagnostics = outcomes
        .iter()
        .filter_map(|o| {
            o.diagnostics.clone().map(|diagnostics| MethodDiagnostics {
                method: o.method,
                diagnostics,
            })
        })
        .collect();
    let summary = EstimateSummary {
        config_hash: hash,
        seed: cfg.seed,
        n,
        dropped_rows: ingested.dropped_rows,
        base_levels: ingested.base_levels.clone(),
        pi_hat,
        rates: rates_out,
        coefficients: coef_names,
        diagnostics,
        config: cfg.canonical(),
    };
    Ok(EstimateOutput {
        outcomes,
        records,
        summary,
        table,
    })
}

/// [`estimate`], then writes the reports when an output directory is set.
pub fn estimate_command(cfg: &RunConfig) -> Result<EstimateOutput> {
    let out = estimate(cfg)?;
    if let Some(dir) = &cfg.output.dir {
        out.write(dir)?;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub report: TableReport,
    pub records: Vec<SimRecord>,
    pub table: String,
    pub config_hash: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, Serialize)]
struct RunFile<'a> {
    config_hash: &'a str,
    seed: u64,
    config: &'a RunConfig,
    cells: &'a [labelboot::SimConfig],
}

impl SimulateOutput {
    pub fn jsonl(&self) -> String {
        to_jsonl(&self.records)
    }

    /// Writes `cells.jsonl`, `table.txt` and `run.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_file(&dir.join("cells.jsonl"), &self.jsonl())?;
        write_file(&dir.join("table.txt"), &self.table)?;
        let cells: Vec<_> = self.report.cells.iter().map(|c| c.config.clone()).collect();
        let run = RunFile {
            config_hash: &self.config_hash,
            seed: self.config.seed,
            config: &self.config,
            cells: &cells,
        };
        let text = serde_json::to_string_pretty(&run).expect("run file serializes") + "\n";
        write_file(&dir.join("run.json"), &text)
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<SimulateOutput> {
    if cfg.mode != Mode::Simulate {
        return Err(CliError::Config("config is not in simulate mode".into()));
    }
    cfg.validate()?;
    let cells = cfg.sim_cells()?;
    let report = with_threads(cfg.threads, || run_table(&cells))??;
    for c in &report.cells {
        log::info!(
            "cell n = {}, kappa = {}: {} reps in {:.1} s",
            c.config.n,
            c.config.kappa,
            c.reps_completed,
            c.wall_seconds
        );
    }
    let hash = cfg.hash();
    let records = sim_records(&report, &hash);
    let table = format!("config_hash = {hash}\n{}", report.to_text());
    Ok(SimulateOutput {
        report,
        records,
        table,
        config_hash: hash,
        config: cfg.canonical(),
    })
}

/// [`simulate`], then writes the reports when an output directory is set.
pub fn simulate_command(cfg: &RunConfig) -> Result<SimulateOutput> {
    let out = simulate(cfg)?;
    if let Some(dir) = &cfg.output.dir {
        out.write(dir)?;
    }
    Ok(out)
}
