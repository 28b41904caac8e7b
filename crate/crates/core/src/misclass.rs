//! Classifier error rates measured on a validation sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// False-positive and false-negative rates with the validation sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisclassRates {
    /// `F̂₊ = (1/m) Σ θ̂ᵢ(1 − θᵢ)`
    pub f_plus: f64,
    /// `F̂₋ = (1/m) Σ θᵢ(1 − θ̂ᵢ)`
    pub f_minus: f64,
    pub m: u64,
}

impl MisclassRates {
    pub fn zero(m: u64) -> Self {
        Self {
            f_plus: 0.0,
            f_minus: 0.0,
            m,
        }
    }

    pub fn kappa_plus(&self, n: usize) -> f64 {
        (n as f64).sqrt() * self.f_plus
    }

    pub fn kappa_minus(&self, n: usize) -> f64 {
        (n as f64).sqrt() * self.f_minus
    }

    pub fn is_zero(&self) -> bool {
        self.f_plus == 0.0 && self.f_minus == 0.0
    }

    fn validate(self) -> Result<Self> {
        let ok = |f: f64| f.is_finite() && (0.0..=1.0).contains(&f);
        if !ok(self.f_plus) || !ok(self.f_minus) {
            return Err(Error::InvalidRates(format!(
                "rates must lie in [0, 1], got F+ = {}, F- = {}",
                self.f_plus, self.f_minus
            )));
        }
        if self.f_plus + self.f_minus > 1.0 {
            return Err(Error::InvalidRates(format!(
                "F+ + F- = {} exceeds 1",
                self.f_plus + self.f_minus
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidRates(
                "validation sample size m must be at least 1".into(),
            ));
        }
        Ok(self)
    }
}

/// Estimates the rates from validation pairs `(θᵢ, θ̂ᵢ)`.
pub fn estimate_rates(pairs: &[(f64, f64)]) -> Result<MisclassRates> {
    if pairs.is_empty() {
        return Err(Error::EmptySample);
    }
    let (mut false_pos, mut false_neg) = (0u64, 0u64);
    for (index, &(truth, imputed)) in pairs.iter().enumerate() {
        for value in [truth, imputed] {
            if value != 0.0 && value != 1.0 {
                return Err(Error::NonBinaryLabel { index, value });
            }
        }
        match (truth == 1.0, imputed == 1.0) {
            (false, true) => false_pos += 1,
            (true, false) => false_neg += 1,
            _ => {}
        }
    }
    let m = pairs.len() as u64;
    MisclassRates {
        f_plus: false_pos as f64 / m as f64,
        f_minus: false_neg as f64 / m as f64,
        m,
    }
    .validate()
}

/// Rates taken from a published summary.
pub fn rates_from_summary(f_plus: f64, f_minus: f64, m: u64) -> Result<MisclassRates> {
    MisclassRates { f_plus, f_minus, m }.validate()
}

/// `√n`-scaled rates for a regression sample of size `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    pub plus: f64,
    pub minus: f64,
    /// False when `n / m² ≥ 1`: the rate estimates are then too noisy for the
    /// scaled rates to be consistent.
    pub rate_condition_ok: bool,
}

pub fn kappa(rates: &MisclassRates, n: usize) -> Kappa {
    let m = rates.m as f64;
    let ratio = n as f64 / (m * m);
    let rate_condition_ok = ratio < 1.0;
    if !rate_condition_ok {
        log::warn!(
            "n / m^2 = {ratio:.3} >= 1 (n = {n}, m = {}); misclassification rates are estimated too imprecisely relative to n",
            rates.m
        );
    }
    Kappa {
        plus: rates.kappa_plus(n),
        minus: rates.kappa_minus(n),
        rate_condition_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn nine_false_positives_in_a_thousand() {
        let mut pairs = vec![(0.0, 1.0); 9];
        pairs.extend(std::iter::repeat_n((1.0, 1.0), 400));
        pairs.extend(std::iter::repeat_n((0.0, 0.0), 591));
        let r = estimate_rates(&pairs).unwrap();
        assert_eq!(r.m, 1000);
        assert_eq!(r.f_plus, 0.009);
        assert_eq!(r.f_minus, 0.0);
    }

    #[test]
    fn concordant_sample_has_zero_rates() {
        let pairs = [(1.0, 1.0), (0.0, 0.0), (1.0, 1.0)];
        let r = estimate_rates(&pairs).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn hand_counted_eight_pairs() {
        let mut pairs = vec![(1.0, 1.0); 4];
        pairs.extend([(0.0, 0.0), (0.0, 0.0), (0.0, 1.0), (1.0, 0.0)]);
        let r = estimate_rates(&pairs).unwrap();
        assert_eq!((r.f_plus, r.f_minus, r.m), (0.125, 0.125, 8));
    }

    #[test]
    fn rejects_bad_samples() {
        assert_eq!(estimate_rates(&[]), Err(Error::EmptySample));
        assert_eq!(
            estimate_rates(&[(0.0, 0.0), (2.0, 1.0)]),
            Err(Error::NonBinaryLabel {
                index: 1,
                value: 2.0
            })
        );
    }

    #[test]
    fn summaries() {
        assert!(rates_from_summary(0.009, 0.009, 1000).is_ok());
        assert!(rates_from_summary(0.009, 0.018, 1000).is_ok());
        let zero = rates_from_summary(0.0, 0.0, 5).unwrap();
        for n in [1, 10, 10_000] {
            let k = kappa(&zero, n);
            assert_eq!((k.plus, k.minus), (0.0, 0.0));
        }
        assert!(rates_from_summary(-0.1, 0.0, 10).is_err());
        assert!(rates_from_summary(0.6, 0.5, 10).is_err());
        assert!(rates_from_summary(0.1, 0.1, 0).is_err());
        assert!(rates_from_summary(f64::NAN, 0.1, 3).is_err());
    }

    #[test]
    fn kappa_values() {
        let r = rates_from_summary(1.0 / 8000f64.sqrt(), 0.0, 707).unwrap();
        assert_relative_eq!(kappa(&r, 8000).plus, 1.0, epsilon = 1e-12);
        let r = rates_from_summary(0.009, 0.009, 1000).unwrap();
        let k = kappa(&r, 16315);
        assert_relative_eq!(k.plus, 0.009 * 16315f64.sqrt(), epsilon = 1e-12);
        assert!((k.plus - 1.1495).abs() < 1e-4);
        assert!(k.rate_condition_ok);
        assert!(!kappa(&r, 2_000_000).rate_condition_ok);
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_discordance(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..200), seed in any::<u64>()) {
            let pairs: Vec<(f64, f64)> = pairs.into_iter().map(|(a, b)| (a as f64, b as f64)).collect();
            let r = estimate_rates(&pairs).unwrap();
            let mut shuffled = pairs.clone();
            let len = shuffled.len();
            let mut s = seed;
            for i in (1..len).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(estimate_rates(&shuffled).unwrap(), r);
            let discordant = pairs.iter().filter(|(a, b)| a != b).count() as f64 / len as f64;
            prop_assert!((r.f_plus + r.f_minus - discordant).abs() < 1e-15);
        }

        #[test]
        fn kappa_scales_with_root_n(f in 0.0f64..0.5, n in 1usize..100_000) {
            let r = rates_from_summary(f, f / 2.0, 100).unwrap();
            let a = kappa(&r, n);
            let b = kappa(&r, 4 * n);
            prop_assert!((b.plus - 2.0 * a.plus).abs() <= 1e-12 * (1.0 + b.plus));
            prop_assert!((b.minus - 2.0 * a.minus).abs() <= 1e-12 * (1.0 + b.minus));
        }
    }
}
