//! Synthetic job-postings sample with a rare, noisily classified label.
//!
//! Log wages depend on a latent remote-work indicator, an occupation group
//! and a full-time flag. Remote jobs are rare and concentrated in a few
//! occupations, so the regression on the imputed indicator is nearly singular.

use std::io::Write;
use std::path::Path;

use labelboot::rng::stream;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Occupation code, share of postings, relative remote propensity, wage effect.
const OCCUPATIONS: [(&str, f64, f64, f64); 8] = [
    ("35", 0.55, 0.3, 0.00),
    ("41", 0.12, 1.5, 0.15),
    ("43", 0.08, 3.0, 0.20),
    ("11", 0.05, 4.0, 0.60),
    ("13", 0.05, 4.0, 0.50),
    ("15", 0.05, 5.0, 0.55),
    ("27", 0.05, 3.0, 0.30),
    ("53", 0.05, 0.3, 0.10),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    /// Share of truly remote postings.
    pub pi: f64,
    /// Population `P(θ̂ = 1, θ = 0)`.
    pub f_plus: f64,
    /// Population `P(θ̂ = 0, θ = 1)`.
    pub f_minus: f64,
    /// Remote-work wage premium.
    pub premium: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 16_000,
            pi: 0.024,
            f_plus: 0.009,
            f_minus: 0.009,
            premium: 0.9,
            seed: 2023,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posting {
    pub logwage: f64,
    pub remote: bool,
    pub soc2: &'static str,
    pub fulltime: bool,
    pub remote_true: bool,
}

pub fn postings(cfg: &SynthConfig) -> Result<Vec<Posting>> {
    if !(cfg.f_minus < cfg.pi && cfg.f_plus < 1.0 - cfg.pi && cfg.pi > 0.0) {
        return Err(CliError::Config("need 0 < F- < pi and F+ < 1 - pi".into()));
    }
    let mean_propensity: f64 = OCCUPATIONS.iter().map(|o| o.1 * o.2).sum();
    let miss = cfg.f_minus / cfg.pi;
    let false_alarm = cfg.f_plus / (1.0 - cfg.pi);
    let mut rng = stream(cfg.seed, &[]);
    let rows = (0..cfg.n)
        .map(|_| {
            let mut u: f64 = rng.random();
            let occ = OCCUPATIONS
                .iter()
                .find(|o| {
                    u -= o.1;
                    u < 0.0
                })
                .unwrap_or(&OCCUPATIONS[0]);
            let truth = rng.random::<f64>() < (cfg.pi * occ.2 / mean_propensity).min(1.0);
            let flip = rng.random::<f64>() < if truth { miss } else { false_alarm };
            let fulltime = rng.random::<f64>() < 0.65;
            let noise: f64 = rng.sample(StandardNormal);
            let logwage = 2.75
                + cfg.premium * f64::from(u8::from(truth))
                + occ.3
                + 0.12 * f64::from(u8::from(fulltime))
                + 0.4 * noise;
            Posting {
                logwage: (logwage * 1e4).round() / 1e4,
                remote: truth != flip,
                soc2: occ.0,
                fulltime,
                remote_true: truth,
            }
        })
        .collect();
    Ok(rows)
}

pub fn write_postings<W: Write>(
    writer: W,
    rows: &[Posting],
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "logwage",
        "remote",
        "const",
        "soc2",
        "fulltime",
        "remote_true",
    ])?;
    let bit = |b: bool| if b { "1" } else { "0" };
    for r in rows {
        w.write_record([
            &r.logwage.to_string(),
            bit(r.remote),
            "1",
            r.soc2,
            bit(r.fulltime),
            bit(r.remote_true),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_postings_csv(path: &Path, cfg: &SynthConfig) -> Result<()> {
    let rows = postings(cfg)?;
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_postings(std::io::BufWriter::new(file), &rows).map_err(|e| CliError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
