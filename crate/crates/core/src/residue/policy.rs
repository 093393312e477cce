use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::descent::exponents::default_c;
use crate::ntheory::{ln_big, Natural};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyScale {
    /// Asymptotic windows with log-power factors and base primes above `K^10`.
    PaperFaithful,
    /// A slack factor on the exponent budget, small base primes, and
    /// `h = 0` allowed when the window is too narrow.
    DeskScale,
}

/// Size policy for the step constructions and the endgame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundPolicy {
    pub scale: PolicyScale,
    #[serde(with = "crate::codec::ratio")]
    pub c: BigRational,
    #[serde(with = "crate::codec::ratio")]
    pub epsilon: BigRational,
    #[serde(with = "crate::codec::ratio")]
    pub omega: BigRational,
    #[serde(with = "crate::codec::ratio")]
    pub nu: BigRational,
    /// Desk scale: fraction of the exponent budget `ω/k · log n` given to `l log ϖ`.
    #[serde(with = "crate::codec::ratio")]
    pub slack: BigRational,
    /// Desk scale: base primes are taken above this floor.
    pub prime_floor: u64,
    /// Upper limit for the power-residue prime search.
    pub prime_cap: u64,
    #[serde(with = "crate::codec::dec")]
    pub min_n: Natural,
    /// Two-term congruence solutions tried per step before giving up.
    pub weil_candidates: usize,
    /// CRT shifts scanned per step for the coprimality side conditions.
    pub shift_scan: u64,
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

impl BoundPolicy {
    pub fn desk(grh: bool) -> Self {
        let epsilon = ratio(1, 1000);
        BoundPolicy {
            scale: PolicyScale::DeskScale,
            c: default_c(grh, &epsilon),
            epsilon,
            omega: BigRational::one(),
            nu: ratio(1, 100),
            slack: ratio(1, 2),
            prime_floor: 5,
            prime_cap: 1_000_000,
            min_n: Natural::from(10_000_000_000u64),
            weil_candidates: 64,
            shift_scan: 10_000,
        }
    }

    pub fn paper_faithful(grh: bool) -> Self {
        BoundPolicy {
            scale: PolicyScale::PaperFaithful,
            ..BoundPolicy::desk(grh)
        }
    }

    pub fn with_omega(mut self, omega: BigRational) -> Self {
        self.omega = omega;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.omega.is_positive() || self.omega > BigRational::one() {
            return Err(format!("omega = {} must lie in (0, 1]", self.omega));
        }
        if !self.epsilon.is_positive() {
            return Err("epsilon must be positive".into());
        }
        if self.nu.is_negative() {
            return Err("nu must be non-negative".into());
        }
        if !self.c.is_positive() {
            return Err("c must be positive".into());
        }
        if !self.slack.is_positive() || self.slack > BigRational::one() {
            return Err(format!("slack = {} must lie in (0, 1]", self.slack));
        }
        if self.scale == PolicyScale::PaperFaithful
            && self.c != default_c(true, &self.epsilon)
            && self.c != default_c(false, &self.epsilon)
        {
            return Err(format!("c = {} must be 2 + 2ε or 12/5 + 2ε", self.c));
        }
        if self.prime_cap < 7 || self.weil_candidates == 0 || self.shift_scan == 0 {
            return Err("prime cap, Weil candidates and shift scan must be positive".into());
        }
        Ok(())
    }

    pub fn omega_f64(&self) -> f64 {
        ratio_to_f64(&self.omega)
    }

    pub fn c_f64(&self) -> f64 {
        ratio_to_f64(&self.c)
    }

    /// Largest `h` whose `prime^{6Kh}` fits the window for a `k`-th power
    /// taken from `size`. `log_power` is the power of `log size` the asymptotic
    /// scale removes from the window; desk scale ignores it and may return 0.
    /// `None` means the paper-scale window admits no `h >= 1`.
    pub fn max_height(
        &self,
        prime: &Natural,
        k: u32,
        big_k: u64,
        size: &Natural,
        log_power: u32,
    ) -> Option<u64> {
        let ln_size = ln_big(size);
        let per_h = 6.0 * big_k as f64 * ln_big(prime);
        let exponent_budget = self.omega_f64() / k as f64 * ln_size;
        match self.scale {
            PolicyScale::DeskScale => {
                let budget = ratio_to_f64(&self.slack) * exponent_budget;
                Some((budget / per_h).floor().max(0.0) as u64)
            }
            PolicyScale::PaperFaithful => {
                let budget = exponent_budget - log_power as f64 * ln_size.ln();
                let h = (budget / per_h).floor();
                (h >= 1.0).then_some(h as u64)
            }
        }
    }

    /// Floor above which base primes are chosen: `K^10` at paper scale.
    pub fn base_prime_floor(&self, big_k: u64) -> Natural {
        match self.scale {
            PolicyScale::DeskScale => Natural::from(self.prime_floor),
            PolicyScale::PaperFaithful => Natural::from(big_k).pow(10),
        }
    }

    pub fn is_desk(&self) -> bool {
        self.scale == PolicyScale::DeskScale
    }
}

impl Default for BoundPolicy {
    fn default() -> Self {
        BoundPolicy::desk(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    #[test]
    fn defaults_validate() {
        assert!(BoundPolicy::desk(true).validate().is_ok());
        assert!(BoundPolicy::paper_faithful(false).validate().is_ok());
        assert_eq!(BoundPolicy::desk(true).c, ratio(2002, 1000));
        assert_eq!(BoundPolicy::desk(false).c, ratio(2402, 1000));
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let p = BoundPolicy::desk(true).with_omega(ratio(3, 2));
        assert!(p.validate().is_err());
        let p = BoundPolicy::desk(true).with_omega(BigRational::zero());
        assert!(p.validate().is_err());
        let mut p = BoundPolicy::paper_faithful(true);
        p.c = ratio(3, 1);
        assert!(p.validate().is_err());
        p.scale = PolicyScale::DeskScale;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn desk_height_window() {
        let p = BoundPolicy::desk(true);
        // 11^6 <= (10^40)^{1/6} but 11^12 is not
        let n = Natural::from(10u32).pow(40);
        assert_eq!(p.max_height(&Natural::from(11u32), 3, 1, &n, 3), Some(1));
        // (6,6) at desk sizes: nothing fits
        let n = Natural::from(10u32).pow(16);
        assert_eq!(p.max_height(&Natural::from(11u32), 6, 6, &n, 4), Some(0));
    }

    #[test]
    fn paper_height_window_underflows_at_desk_size() {
        let p = BoundPolicy::paper_faithful(true);
        let n = Natural::from(10u32).pow(16);
        assert_eq!(p.max_height(&Natural::from(11u32), 3, 1, &n, 3), None);
        let n = Natural::from(10u32).pow(60);
        assert!(p.max_height(&Natural::from(11u32), 3, 1, &n, 3).unwrap() >= 1);
    }
}
