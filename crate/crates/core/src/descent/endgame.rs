use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::engine::DescentState;
use crate::ntheory::{
    find_prime_in_ap, hensel_lift_power, iroot, ln_big, mod_inverse, mod_pow,
    CongruenceSystem, Natural, NtError,
};
use crate::residue::BoundPolicy;
use crate::ternary::check_mod16;

/// The 5-adic step: a prime `p` with `5^{2h} ∥ m - 2λ²p³`, and the ternary
/// target `N = m - 2λ²p³`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndgameData {
    #[serde(with = "crate::codec::dec")]
    pub lambda: Natural,
    pub h: u64,
    /// Root of `2λ²B³ ≡ m (mod 5^{2h})`.
    #[serde(with = "crate::codec::dec")]
    pub b: Natural,
    /// Whether `p ≡ B + 5^{2h}` rather than `B (mod 5^{2h+1})`.
    pub offset: bool,
    #[serde(with = "crate::codec::dec")]
    pub p: Natural,
    /// `N / 5^{2h}`.
    #[serde(with = "crate::codec::dec")]
    pub t: Natural,
    /// `5^h`.
    #[serde(with = "crate::codec::dec")]
    pub m: Natural,
    #[serde(with = "crate::codec::dec")]
    pub big_n: Natural,
}

impl EndgameData {
    pub fn lambda_p(&self) -> Natural {
        &self.lambda * &self.p
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EndgameError {
    #[error("descent has not reached stage 0 (at stage {0})")]
    NotAtBottom(usize),
    #[error("λ shares a factor with 30m")]
    LambdaNotCoprime,
    #[error("residual {0} is divisible by 5")]
    ResidualDivisibleByFive(Natural),
    #[error("no 5-adic height h >= 1 fits below (n/6)^(1/3)")]
    HeightWindowEmpty,
    #[error("no prime p in ({lo}, {hi}] with p ≡ {residues:?} (mod {modulus}) and p ≡ 1 (mod 3)")]
    NoPrimeInWindow {
        lo: Natural,
        hi: Natural,
        modulus: Natural,
        residues: Vec<Natural>,
    },
    #[error("2λ²p³ >= m: window misconfigured")]
    NonPositive,
    #[error(transparent)]
    Arithmetic(#[from] NtError),
}

/// Largest `h` with `λ·(5^{2h+1})^c < (n/6)^{1/3}`, in floating point.
fn height(n: &Natural, lambda: &Natural, policy: &BoundPolicy) -> Option<u64> {
    let room = (ln_big(n) - 6f64.ln()) / 3.0 - ln_big(lambda);
    let per = policy.c_f64() * 5f64.ln();
    // (2h + 1)·per < room
    let raw = (room / per - 1.0) / 2.0;
    let h = if raw <= 0.0 { 0 } else { raw.ceil() as u64 - 1 };
    if h >= 1 {
        Some(h)
    } else if policy.is_desk() {
        Some(1)
    } else {
        None
    }
}

/// Primes scanned per residue class before the window is declared empty.
const PRIMES_PER_CLASS: usize = 4096;

/// Run the endgame on a finished descent. `skip` passes over that many
/// admissible primes, so callers can ask for another `p`.
pub fn run_endgame(
    state: &DescentState,
    n: &Natural,
    policy: &BoundPolicy,
    skip: usize,
) -> Result<EndgameData, EndgameError> {
    if state.stage != 0 {
        return Err(EndgameError::NotAtBottom(state.stage));
    }
    let m = &state.residual;
    let lambda = state.upsilon();
    if !lambda.gcd(&(m * 30u32)).is_one() {
        return Err(EndgameError::LambdaNotCoprime);
    }
    let five = Natural::from(5u32);
    if (m % &five).is_zero() {
        return Err(EndgameError::ResidualDivisibleByFive(m.clone()));
    }
    let h = height(n, &lambda, policy).ok_or(EndgameError::HeightWindowEmpty)?;
    let q = five.pow(2 * h as u32);
    let q5 = &q * 5u32;
    let two_l2 = &lambda * &lambda * 2u32;
    let inv = mod_inverse(&(&two_l2 % &q), &q).ok_or(EndgameError::LambdaNotCoprime)?;
    let a = (m % &q) * inv % &q;
    // cubing permutes the units mod 5, with inverse x -> x^3
    let b0 = mod_pow(&(&a % &five), &Natural::from(3u32), &five);
    let b = hensel_lift_power(&b0, 3, &a, &five, 2 * h as u32)? % &q;

    let lambda3 = &lambda * &lambda * &lambda;
    let lo = iroot(&(n / (&lambda3 * 6u32)), 3);
    let hi = if n.is_zero() {
        Natural::zero()
    } else {
        iroot(&((n - 1u32) / (&lambda3 * 3u32)), 3)
    };

    let m5 = m % &q5;
    let classes: Vec<(bool, Natural)> = [false, true]
        .into_iter()
        .map(|off| (off, if off { &b + &q } else { b.clone() }))
        .filter(|(_, r)| (&two_l2 * r * r * r) % &q5 != m5)
        .collect();

    let mut remaining = skip;
    for (offset, r) in &classes {
        let mut sys = CongruenceSystem::new();
        sys.push(r.clone(), q5.clone())?;
        sys.push(Natural::one(), Natural::from(3u32))?;
        let mut cursor = lo.clone();
        for _ in 0..PRIMES_PER_CLASS {
            let Some(p) = find_prime_in_ap(&sys, &cursor, &hi, m) else {
                break;
            };
            cursor = p.clone();
            let used = &two_l2 * &p * &p * &p;
            if used >= *m {
                return Err(EndgameError::NonPositive);
            }
            let big_n = m - used;
            if !big_n.gcd(&(&p * 6u32)).is_one() || !check_mod16(&big_n, &p) {
                continue;
            }
            if remaining > 0 {
                remaining -= 1;
                continue;
            }
            let t = &big_n / &q;
            return Ok(EndgameData {
                lambda,
                h,
                b,
                offset: *offset,
                p,
                t,
                m: five.pow(h as u32),
                big_n,
            });
        }
    }
    Err(EndgameError::NoPrimeInWindow {
        lo,
        hi,
        modulus: q5,
        residues: classes.into_iter().map(|(_, r)| r).collect(),
    })
}

/// Every endgame invariant that can be checked from `(n, m, data)` alone.
pub fn check_endgame(n: &Natural, m: &Natural, e: &EndgameData) -> Result<(), String> {
    super::verify::endgame_faults(n, m, e).map_err(|(check, detail)| format!("{check}: {detail}"))
}

/// Hypotheses of the representation theorem for `x² + y² + 6pz² = N`: the
/// two local conditions, and the size ratios whose thresholds are not
/// effective.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub coprime_to_6p: bool,
    pub mod16_soluble: bool,
    /// `N·M¹²/p²¹`.
    #[serde(with = "crate::codec::ratio")]
    pub ratio_general: BigRational,
    /// `N/p⁵`.
    #[serde(with = "crate::codec::ratio")]
    pub ratio_ramanujan: BigRational,
}

pub fn ternary_hypotheses(big_n: &Natural, p: &Natural, m: &Natural) -> HypothesisReport {
    let nn = BigInt::from(big_n.clone());
    let pp = BigInt::from(p.clone());
    let mm = BigInt::from(m.clone());
    HypothesisReport {
        coprime_to_6p: big_n.gcd(&(p * 6u32)).is_one(),
        mod16_soluble: check_mod16(big_n, p),
        ratio_general: BigRational::new(&nn * num_traits::pow(mm, 12), num_traits::pow(pp.clone(), 21)),
        ratio_ramanujan: BigRational::new(nn, num_traits::pow(pp, 5)),
    }
}
