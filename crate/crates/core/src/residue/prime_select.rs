use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use super::ResidueError;
use crate::ntheory::{is_prime_u64, kth_power_residue, Natural};

/// Smallest odd prime `ϖ <= cap` with `ϖ ∤ m·D·k` such that `y^k ≡ m` is
/// soluble modulo every power of `ϖ`.
///
/// For odd `k` only primes `ϖ ≡ 2 (mod k)` are considered; then `k` is
/// invertible modulo `ϖ - 1` and every unit is a k-th power. For even `k`
/// the primes are tried in ascending order against the power-residue test.
pub fn find_residue_prime(m: &Natural, k: u64, avoid: &Natural, cap: u64) -> Result<Natural, ResidueError> {
    find_residue_prime_nth(m, k, avoid, cap, 0)
}

/// As [`find_residue_prime`], skipping the first `skip` qualifying primes.
pub fn find_residue_prime_nth(
    m: &Natural,
    k: u64,
    avoid: &Natural,
    cap: u64,
    skip: usize,
) -> Result<Natural, ResidueError> {
    let exhausted = || ResidueError::CapExhausted {
        m: m.clone(),
        k,
        avoid: avoid.clone(),
        cap,
    };
    if k == 0 || m.is_zero() {
        return Err(exhausted());
    }
    let blocked = |p: u64| {
        (m % p).is_zero() || (avoid % p).is_zero() || k % p == 0
    };
    let mut remaining = skip;
    let mut accept = || -> bool {
        if remaining == 0 {
            true
        } else {
            remaining -= 1;
            false
        }
    };
    if k.is_odd() {
        // 2 + jk is odd exactly when j is odd
        let mut j = 1u64;
        loop {
            let Some(p) = k.checked_mul(j).and_then(|v| v.checked_add(2)) else {
                break;
            };
            if p > cap {
                break;
            }
            if is_prime_u64(p) && !blocked(p) && accept() {
                return Ok(Natural::from(p));
            }
            j += 2;
        }
    } else {
        let mut p = 3u64;
        while p <= cap {
            if is_prime_u64(p) && !blocked(p) {
                let pb = Natural::from(p);
                if kth_power_residue(m, k, &pb)? && accept() {
                    return Ok(pb);
                }
            }
            p += 2;
        }
    }
    Err(exhausted())
}

/// Smallest prime above `after` that is coprime to `30K`.
pub fn next_admissible_prime(after: &Natural, big_k: u64) -> Natural {
    let thirty_k = 30u64 * big_k;
    let mut p = after.to_u64().map(|a| a + 1).unwrap_or(u64::MAX);
    if p == u64::MAX {
        // above the word range: fall back to the big-integer search
        let mut c = crate::ntheory::next_prime(after);
        while (Natural::from(thirty_k) % &c).is_zero() {
            c = crate::ntheory::next_prime(&c);
        }
        return c;
    }
    loop {
        if is_prime_u64(p) && thirty_k % p != 0 {
            return Natural::from(p);
        }
        p += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ntheory::mod_pow;

    fn nat(n: u64) -> Natural {
        Natural::from(n)
    }

    #[test]
    fn examples() {
        for m in [2u64, 4, 7, 1_000_001] {
            assert_eq!(find_residue_prime(&nat(m), 3, &nat(1), 100).unwrap(), nat(5), "m = {m}");
        }
        assert_eq!(find_residue_prime(&nat(4), 2, &nat(1), 100).unwrap(), nat(3));
        assert_eq!(find_residue_prime(&nat(2), 2, &nat(1), 100).unwrap(), nat(7));
    }

    #[test]
    fn avoid_set_and_skip() {
        // 5 divides m, so the next prime ≡ 2 (mod 3) is used
        assert_eq!(find_residue_prime(&nat(10), 3, &nat(1), 100).unwrap(), nat(11));
        assert_eq!(find_residue_prime(&nat(7), 3, &nat(30 * 11), 100).unwrap(), nat(17));
        assert_eq!(find_residue_prime_nth(&nat(7), 3, &nat(1), 100, 2).unwrap(), nat(17));
    }

    #[test]
    fn cap_exhaustion_is_reported() {
        let err = find_residue_prime(&nat(2), 2, &nat(1), 5).unwrap_err();
        assert!(matches!(err, ResidueError::CapExhausted { cap: 5, .. }));
    }

    #[test]
    fn odd_k_primes_make_every_unit_a_power() {
        for k in [3u64, 5, 7, 9] {
            for skip in 0..4 {
                let p = find_residue_prime_nth(&nat(6), k, &nat(30), 10_000, skip).unwrap();
                let p64 = p.to_u64().unwrap();
                assert_eq!((p64 - 1).gcd(&k), 1);
                for m in 1..p64 {
                    let hit = (1..p64).any(|y| mod_pow(&nat(y), &nat(k), &p) == nat(m));
                    assert!(hit, "m = {m} not a {k}-th power mod {p}");
                }
            }
        }
    }

    #[test]
    fn even_k_prime_passes_residue_test_by_enumeration() {
        for m in [2u64, 3, 5, 11, 123_457] {
            for k in [2u64, 4, 6, 8] {
                let p = find_residue_prime(&nat(m), k, &nat(30), 10_000).unwrap();
                let p64 = p.to_u64().unwrap();
                assert!(p64 > 5 && m % p64 != 0 && k % p64 != 0);
                assert!((1..p64).any(|y| mod_pow(&nat(y), &nat(k), &p) == nat(m % p64)));
                // and no smaller admissible prime works
                for q in (7..p64).filter(|&q| is_prime_u64(q) && m % q != 0 && k % q != 0) {
                    let qb = nat(q);
                    assert!(!(1..q).any(|y| mod_pow(&nat(y), &nat(k), &qb) == nat(m % q)));
                }
            }
        }
    }

    #[test]
    fn admissible_primes() {
        assert_eq!(next_admissible_prime(&nat(5), 6), nat(7));
        assert_eq!(next_admissible_prime(&nat(5), 7), nat(11));
        assert_eq!(next_admissible_prime(&nat(7), 6), nat(11));
        assert_eq!(next_admissible_prime(&nat(0), 1), nat(7));
    }
}
