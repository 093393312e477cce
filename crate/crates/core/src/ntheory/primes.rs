use std::sync::OnceLock;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use super::Natural;

/// Witnesses that make Miller-Rabin deterministic for every n < 2^64.
const DETERMINISTIC_BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Rounds used above 2^64. The bases are the first primes, so the test is
/// still a pure function of its input.
const BIG_ROUNDS: usize = 40;

const TRIAL_LIMIT: u32 = 1 << 12;

/// All primes below `limit`, by the sieve of Eratosthenes.
pub fn small_primes(limit: u32) -> Vec<u32> {
    if limit < 3 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n];
    let mut out = Vec::new();
    for i in 2..n {
        if composite[i] {
            continue;
        }
        out.push(i as u32);
        let mut j = i * i;
        while j < n {
            composite[j] = true;
            j += i;
        }
    }
    out
}

pub(crate) fn trial_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| small_primes(TRIAL_LIMIT))
}

#[inline]
pub(crate) fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub(crate) fn pow_mod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut r = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod_u64(r, b, m);
        }
        b = mul_mod_u64(b, b, m);
        e >>= 1;
    }
    r
}

fn strong_probable_prime_u64(n: u64, a: u64, d: u64, s: u32) -> bool {
    let mut x = pow_mod_u64(a, d, n);
    if x == 1 || x == n - 1 {
        return true;
    }
    for _ in 1..s {
        x = mul_mod_u64(x, x, n);
        if x == n - 1 {
            return true;
        }
    }
    false
}

/// Deterministic primality for machine-word inputs.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &DETERMINISTIC_BASES {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    DETERMINISTIC_BASES
        .iter()
        .all(|&a| strong_probable_prime_u64(n, a, d, s))
}

fn strong_probable_prime_big(n: &BigUint, a: &BigUint, d: &BigUint, s: u64) -> bool {
    let n_minus_1 = n - 1u32;
    let mut x = a.modpow(d, n);
    if x.is_one() || x == n_minus_1 {
        return true;
    }
    for _ in 1..s {
        x = (&x * &x) % n;
        if x == n_minus_1 {
            return true;
        }
    }
    false
}

/// Primality test: deterministic below 2^64, a 40-round strong probable-prime
/// test with fixed prime bases above.
pub fn is_prime(n: &Natural) -> bool {
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    for &p in trial_primes() {
        if (n % p).is_zero() {
            return false;
        }
    }
    let n_minus_1: BigUint = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    trial_primes()
        .iter()
        .take(BIG_ROUNDS)
        .all(|&a| strong_probable_prime_big(n, &BigUint::from(a), &d, s))
}

/// Smallest prime strictly greater than `n`.
pub fn next_prime(n: &Natural) -> Natural {
    let mut c: Natural = n + 1u32;
    if c <= Natural::from(2u32) {
        return Natural::from(2u32);
    }
    if c.is_even() {
        c += 1u32;
    }
    while !is_prime(&c) {
        c += 2u32;
    }
    c
}
