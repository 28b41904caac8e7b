use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use super::WildWeights;
use crate::error::{Error, Result};
use crate::misclass::MisclassRates;

/// One replication's bootstrap labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPairDraw {
    /// Bootstrap "true" labels `θ*`.
    pub theta_star: Vec<bool>,
    /// Bootstrap imputed labels `θ̂*`.
    pub theta_hat_star: Vec<bool>,
    /// Rates used for this replication.
    pub f_plus_star: f64,
    pub f_minus_star: f64,
}

impl LabelPairDraw {
    /// `θ* = θ̂* = θ̂`.
    pub fn unperturbed(theta_hat: &[bool]) -> Self {
        Self {
            theta_star: theta_hat.to_vec(),
            theta_hat_star: theta_hat.to_vec(),
            f_plus_star: 0.0,
            f_minus_star: 0.0,
        }
    }
}

pub fn draw_wild_weights<R: Rng + ?Sized>(n: usize, law: WildWeights, rng: &mut R) -> Vec<f64> {
    match law {
        WildWeights::StandardNormal => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        WildWeights::Rademacher => (0..n)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect(),
    }
}

fn check_share(pi_hat: f64) -> Result<()> {
    if pi_hat > 0.0 && pi_hat < 1.0 {
        Ok(())
    } else {
        Err(Error::DegenerateLabelShare(pi_hat))
    }
}

fn check_branch(sampler: &'static str, branch: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidBranch {
            sampler,
            branch,
            value,
        })
    }
}

/// Flip probabilities of the fixed-label scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedLabelPmf {
    /// `P*(θ̂* = 0 | θ̂ = 1) = F̂₋/π̂`
    pub flip_one: f64,
    /// `P*(θ̂* = 1 | θ̂ = 0) = F̂₊/(1 − π̂)`
    pub flip_zero: f64,
}

impl FixedLabelPmf {
    pub fn new(f_plus: f64, f_minus: f64, pi_hat: f64) -> Result<Self> {
        check_share(pi_hat)?;
        let flip_one = f_minus / pi_hat;
        let flip_zero = f_plus / (1.0 - pi_hat);
        check_branch("fixed-label", "theta_hat*=0 | theta_hat=1", flip_one)?;
        check_branch("fixed-label", "theta_hat*=1 | theta_hat=0", flip_zero)?;
        Ok(Self {
            flip_one,
            flip_zero,
        })
    }

    /// `θ̂*ᵢ` given `θ̂ᵢ` and a uniform draw on `[0, 1)`.
    #[inline]
    pub fn draw(&self, theta_hat: bool, u: f64) -> bool {
        if theta_hat {
            u >= self.flip_one
        } else {
            u < self.flip_zero
        }
    }
}

const COUPLED_BRANCHES: [[&str; 4]; 2] = [
    [
        "(1,1) | theta_hat=0",
        "(1,0) | theta_hat=0",
        "(0,1) | theta_hat=0",
        "(0,0) | theta_hat=0",
    ],
    [
        "(1,1) | theta_hat=1",
        "(1,0) | theta_hat=1",
        "(0,1) | theta_hat=1",
        "(0,0) | theta_hat=1",
    ],
];

/// Coupled-label categorical distributions over `(θ*, θ̂*)`, in the branch
/// order `(1,1), (1,0), (0,1), (0,0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledPmf {
    given_zero: [f64; 4],
    given_one: [f64; 4],
    cum_zero: [f64; 3],
    cum_one: [f64; 3],
}

impl CoupledPmf {
    pub fn new(f_plus: f64, f_minus: f64, pi_hat: f64) -> Result<Self> {
        check_share(pi_hat)?;
        let odds = pi_hat / (1.0 - pi_hat);
        let given_one = [
            1.0 - f_plus - f_minus / pi_hat,
            f_minus,
            f_plus,
            f_minus * (1.0 - pi_hat) / pi_hat,
        ];
        let given_zero = [
            f_plus * odds,
            f_minus,
            f_plus,
            1.0 - f_plus / (1.0 - pi_hat) - f_minus,
        ];
        for (probs, names) in [
            (&given_zero, &COUPLED_BRANCHES[0]),
            (&given_one, &COUPLED_BRANCHES[1]),
        ] {
            for (&p, &name) in probs.iter().zip(names.iter()) {
                check_branch("coupled-label", name, p)?;
            }
        }
        let cum = |p: &[f64; 4]| [p[0], p[0] + p[1], p[0] + p[1] + p[2]];
        Ok(Self {
            cum_zero: cum(&given_zero),
            cum_one: cum(&given_one),
            given_zero,
            given_one,
        })
    }

    pub fn probabilities(&self, theta_hat: bool) -> [f64; 4] {
        if theta_hat {
            self.given_one
        } else {
            self.given_zero
        }
    }

    /// `(θ*ᵢ, θ̂*ᵢ)` given `θ̂ᵢ` and a uniform draw on `[0, 1)`.
    #[inline]
    pub fn draw(&self, theta_hat: bool, u: f64) -> (bool, bool) {
        let c = if theta_hat {
            &self.cum_one
        } else {
            &self.cum_zero
        };
        if u < c[0] {
            (true, true)
        } else if u < c[1] {
            (true, false)
        } else if u < c[2] {
            (false, true)
        } else {
            (false, false)
        }
    }
}

/// Fixed-label draw: `θ* = θ̂`, `θ̂*` flipped independently across observations.
pub fn sample_fixed_label<R: Rng + ?Sized>(
    theta_hat: &[bool],
    rates: (f64, f64),
    pi_hat: f64,
    rng: &mut R,
) -> Result<LabelPairDraw> {
    let pmf = FixedLabelPmf::new(rates.0, rates.1, pi_hat)?;
    let theta_hat_star = theta_hat
        .iter()
        .map(|&t| pmf.draw(t, rng.random()))
        .collect();
    Ok(LabelPairDraw {
        theta_star: theta_hat.to_vec(),
        theta_hat_star,
        f_plus_star: rates.0,
        f_minus_star: rates.1,
    })
}

/// Coupled-label draw for the given `(f₊*, f₋*)`.
pub fn sample_coupled_label<R: Rng + ?Sized>(
    theta_hat: &[bool],
    rates_star: (f64, f64),
    pi_hat: f64,
    rng: &mut R,
) -> Result<LabelPairDraw> {
    let pmf = CoupledPmf::new(rates_star.0, rates_star.1, pi_hat)?;
    let (theta_star, theta_hat_star) = theta_hat.iter().map(|&t| pmf.draw(t, rng.random())).unzip();
    Ok(LabelPairDraw {
        theta_star,
        theta_hat_star,
        f_plus_star: rates_star.0,
        f_minus_star: rates_star.1,
    })
}

/// `(Binomial(m, F̂₊)/m, Binomial(m, F̂₋)/m)`, drawn independently.
pub fn draw_rate_star<R: Rng + ?Sized>(rates: &MisclassRates, rng: &mut R) -> (f64, f64) {
    let m = rates.m;
    let mut draw = |p: f64| {
        let count = Binomial::new(m, p.clamp(0.0, 1.0))
            .expect("rates validated to lie in [0, 1]")
            .sample(rng);
        count as f64 / m as f64
    };
    let plus = draw(rates.f_plus);
    let minus = draw(rates.f_minus);
    (plus, minus)
}
