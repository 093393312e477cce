//! Exact big-integer number theory.
//!
//! Everything above this module (residue constructions, the descent, the
//! ternary solver) is built from the primitives here: primality, complete
//! factorization under a work budget, modular powers and k-th roots, Hensel
//! lifting, the Chinese Remainder Theorem, sums of two squares, and prime
//! search inside an arithmetic progression.
//!
//! All functions are pure. The Pollard rho seed schedule is fixed, so repeated
//! calls with the same input do the same work and return the same answer.

mod factor;
mod modular;
pub(crate) mod primes;
mod progression;
mod two_squares;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use thiserror::Error;

pub use factor::{factorize, factorize_with, square_split, FactorBudget, Factorization};
pub use modular::{
    crt_solve, hensel_lift_power, kth_power_residue, kth_roots_mod_prime, mod_inverse, mod_pow,
    CongruenceSystem,
};
pub use primes::{is_prime, is_prime_u64, next_prime, small_primes};
pub use progression::find_prime_in_ap;
pub use two_squares::{two_squares, two_squares_with};

/// Arbitrary-precision non-negative integer.
pub type Natural = BigUint;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NtError {
    #[error("factorization budget of {budget} rho iterations exhausted")]
    BudgetExceeded {
        budget: u64,
        partial: Factorization,
    },
    #[error("moduli {a} and {b} are not coprime")]
    NotCoprime { a: Natural, b: Natural },
    #[error("{value} is divisible by the prime {prime}")]
    DivisibleByPrime { value: Natural, prime: Natural },
    #[error("invalid congruence: residue {residue} modulo {modulus}")]
    InvalidCongruence { residue: Natural, modulus: Natural },
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// Natural logarithm of a big integer, accurate to f64 precision.
///
/// Returns negative infinity for zero.
pub fn ln_big(n: &Natural) -> f64 {
    let bits = n.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return (n.to_u64().unwrap() as f64).ln();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_u64().unwrap() as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Integer k-th root: the largest r with r^k <= n.
pub fn iroot(n: &Natural, k: u32) -> Natural {
    n.nth_root(k)
}

/// Exact exponent of the prime `p` in `n` (n > 0).
pub fn valuation(n: &Natural, p: &Natural) -> u64 {
    use num_integer::Integer;
    use num_traits::Zero;
    if n.is_zero() {
        return u64::MAX;
    }
    let mut v = 0;
    let mut m = n.clone();
    loop {
        let (q, r) = m.div_rem(p);
        if !r.is_zero() {
            return v;
        }
        v += 1;
        m = q;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_big_matches_f64_for_small_and_large() {
        let n = Natural::from(1_000_000u32);
        assert!((ln_big(&n) - 1e6f64.ln()).abs() < 1e-12);
        let big = Natural::from(10u32).pow(40);
        assert!((ln_big(&big) - 40.0 * 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn valuation_counts_exact_power() {
        let n = Natural::from(5u32).pow(7) * Natural::from(12u32);
        assert_eq!(valuation(&n, &Natural::from(5u32)), 7);
        assert_eq!(valuation(&n, &Natural::from(2u32)), 2);
        assert_eq!(valuation(&n, &Natural::from(7u32)), 0);
    }
}
