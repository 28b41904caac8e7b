use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::LabelPairDraw;
use crate::design::{BiasMatrices, LabelDesign};

/// Discordance summary of one replication's labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelStats {
    /// Count of `θ̂*ᵢ = 1, θ*ᵢ = 0`.
    pub false_pos: usize,
    /// Count of `θ̂*ᵢ = 0, θ*ᵢ = 1`.
    pub false_neg: usize,
    pub f_plus_star: f64,
    pub f_minus_star: f64,
    /// `(1/√n) Σ θ̂*ᵢ(1 − θ*ᵢ)(D₊ᵢ − D̄₊)`
    pub l3_plus: DMatrix<f64>,
    /// `(1/√n) Σ θ*ᵢ(1 − θ̂*ᵢ)(D₋ᵢ − D̄₋)`
    pub l3_minus: DMatrix<f64>,
}

impl LabelStats {
    pub fn from_draw(draw: &LabelPairDraw, design: &LabelDesign, bm: &BiasMatrices) -> Self {
        let discordant: Vec<usize> = (0..design.n())
            .filter(|&i| draw.theta_star[i] != draw.theta_hat_star[i])
            .collect();
        Self::from_discordant(draw, &discordant, design, bm)
    }

    /// As [`LabelStats::from_draw`], given the rows where `θ*ᵢ ≠ θ̂*ᵢ`.
    pub(crate) fn from_discordant(
        draw: &LabelPairDraw,
        discordant: &[usize],
        design: &LabelDesign,
        bm: &BiasMatrices,
    ) -> Self {
        let (n, k) = (design.n(), design.k());
        let mut plus = DMatrix::zeros(k, k);
        let mut minus = DMatrix::zeros(k, k);
        let (mut false_pos, mut false_neg) = (0usize, 0usize);
        for &i in discordant {
            let th = draw.theta_hat_star[i];
            let g1 = design.row(i, true);
            let g0 = design.row(i, false);
            // D₊ᵢ = g1(g1 − g0)', D₋ᵢ = −g0(g1 − g0)'
            let (target, lead, sign) = if th {
                false_pos += 1;
                (&mut plus, g1, 1.0)
            } else {
                false_neg += 1;
                (&mut minus, g0, -1.0)
            };
            for a in 0..k {
                for b in 0..k {
                    target[(a, b)] += sign * lead[a] * (g1[b] - g0[b]);
                }
            }
        }
        let root_n = (n as f64).sqrt();
        let l3_plus = (plus - &bm.d_plus_bar * false_pos as f64) / root_n;
        let l3_minus = (minus - &bm.d_minus_bar * false_neg as f64) / root_n;
        Self {
            false_pos,
            false_neg,
            f_plus_star: draw.f_plus_star,
            f_minus_star: draw.f_minus_star,
            l3_plus,
            l3_minus,
        }
    }
}

/// Across-replication summary of the label draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDiagnostics {
    pub replications: usize,
    /// Mean and variance of `√n · (1/n) Σ θ̂*ᵢ(1 − θ*ᵢ)`; the mean tracks `κ̂₊`.
    pub kappa_plus_mean: f64,
    pub kappa_plus_var: f64,
    pub kappa_minus_mean: f64,
    pub kappa_minus_var: f64,
    pub f_plus_star_mean: f64,
    pub f_minus_star_mean: f64,
    pub l3_plus_mean: DMatrix<f64>,
    pub l3_minus_mean: DMatrix<f64>,
    /// Largest `|mean / s.e.|` over the entries of both L(iii) matrices that
    /// vary across replications.
    pub l3_max_abs_t: f64,
    pub rejected_singular: usize,
    pub rejected_invalid_rates: usize,
}

fn mean_var(values: impl Iterator<Item = f64> + Clone, count: usize) -> (f64, f64) {
    let c = count as f64;
    let mean = values.clone().sum::<f64>() / c;
    let var = if count > 1 {
        values.map(|v| (v - mean).powi(2)).sum::<f64>() / (c - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

fn matrix_t(stats: &[LabelStats], pick: fn(&LabelStats) -> &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let b = stats.len();
    let (k1, k2) = pick(&stats[0]).shape();
    let mut mean = DMatrix::zeros(k1, k2);
    let mut max_t: f64 = 0.0;
    for r in 0..k1 {
        for c in 0..k2 {
            let (m, v) = mean_var(stats.iter().map(|s| pick(s)[(r, c)]), b);
            mean[(r, c)] = m;
            let se = (v / b as f64).sqrt();
            if b > 1 && se > 0.0 {
                max_t = max_t.max((m / se).abs());
            }
        }
    }
    (mean, max_t)
}

pub fn diagnose_labels(stats: &[LabelStats], n: usize) -> LabelDiagnostics {
    let b = stats.len();
    if b == 0 {
        return LabelDiagnostics {
            replications: 0,
            kappa_plus_mean: 0.0,
            kappa_plus_var: 0.0,
            kappa_minus_mean: 0.0,
            kappa_minus_var: 0.0,
            f_plus_star_mean: 0.0,
            f_minus_star_mean: 0.0,
            l3_plus_mean: DMatrix::zeros(0, 0),
            l3_minus_mean: DMatrix::zeros(0, 0),
            l3_max_abs_t: 0.0,
            rejected_singular: 0,
            rejected_invalid_rates: 0,
        };
    }
    let root_n = (n as f64).sqrt();
    let (kappa_plus_mean, kappa_plus_var) =
        mean_var(stats.iter().map(|s| s.false_pos as f64 / root_n), b);
    let (kappa_minus_mean, kappa_minus_var) =
        mean_var(stats.iter().map(|s| s.false_neg as f64 / root_n), b);
    let (l3_plus_mean, t_plus) = matrix_t(stats, |s| &s.l3_plus);
    let (l3_minus_mean, t_minus) = matrix_t(stats, |s| &s.l3_minus);
    LabelDiagnostics {
        replications: b,
        kappa_plus_mean,
        kappa_plus_var,
        kappa_minus_mean,
        kappa_minus_var,
        f_plus_star_mean: stats.iter().map(|s| s.f_plus_star).sum::<f64>() / b as f64,
        f_minus_star_mean: stats.iter().map(|s| s.f_minus_star).sum::<f64>() / b as f64,
        l3_plus_mean,
        l3_minus_mean,
        l3_max_abs_t: t_plus.max(t_minus),
        rejected_singular: 0,
        rejected_invalid_rates: 0,
    }
}

/// Summarises retained label draws directly.
pub fn diagnose_label_draws(
    draws: &[LabelPairDraw],
    design: &LabelDesign,
    bm: &BiasMatrices,
) -> LabelDiagnostics {
    let stats: Vec<LabelStats> = draws
        .iter()
        .map(|d| LabelStats::from_draw(d, design, bm))
        .collect();
    diagnose_labels(&stats, design.n())
}
