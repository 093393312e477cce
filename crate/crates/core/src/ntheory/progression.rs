use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use super::modular::{crt_solve, mod_inverse, CongruenceSystem};
use super::primes::trial_primes;
use super::{is_prime, Natural};

const SEGMENT: usize = 1 << 14;

/// Smallest prime `p` in `(lo, hi]` satisfying every congruence of `sys` with
/// `gcd(p, avoid) = 1`.
///
/// The progression is sieved segment by segment with the trial primes that do
/// not divide its modulus; survivors go through [`is_prime`]. Returns `None`
/// when some residue shares a factor with its modulus or the interval holds
/// no such prime.
pub fn find_prime_in_ap(
    sys: &CongruenceSystem,
    lo: &Natural,
    hi: &Natural,
    avoid: &Natural,
) -> Option<Natural> {
    if lo >= hi {
        return None;
    }
    if sys
        .congruences()
        .iter()
        .any(|(r, m)| !r.gcd(m).is_one())
    {
        return None;
    }
    let modulus = sys.modulus();
    let residue = if sys.is_empty() {
        Natural::zero()
    } else {
        crt_solve(sys).ok()? % &modulus
    };

    // first term strictly above lo
    let above: Natural = lo + 1u32;
    let first = if above <= residue {
        residue.clone()
    } else {
        let gap: Natural = &above - &residue;
        let steps = gap.div_ceil(&modulus);
        &residue + steps * &modulus
    };
    if &first > hi {
        return None;
    }
    let terms: Natural = (hi - &first) / &modulus + 1u32;

    let sieve_primes: Vec<(u64, u64)> = trial_primes()
        .iter()
        .map(|&q| q as u64)
        .filter(|&q| !(&modulus % q).is_zero())
        .map(|q| {
            let qb = Natural::from(q);
            let m_inv = mod_inverse(&(&modulus % &qb), &qb)
                .expect("q does not divide the modulus")
                .to_u64()
                .unwrap();
            (q, m_inv)
        })
        .collect();
    let small_limit = Natural::from(*trial_primes().last().unwrap());

    let mut start = Natural::zero();
    let mut composite = vec![false; SEGMENT];
    while start < terms {
        let len = (&terms - &start).to_usize().map_or(SEGMENT, |r| r.min(SEGMENT));
        composite[..len].iter_mut().for_each(|c| *c = false);
        let base: Natural = &first + &start * &modulus;
        for &(q, m_inv) in &sieve_primes {
            // base + j*modulus ≡ 0 (mod q)  <=>  j ≡ -base * modulus^{-1}
            let b = (&base % q).to_u64().unwrap();
            let mut j = ((q - b) % q) as u128 * m_inv as u128 % q as u128;
            while (j as usize) < len {
                composite[j as usize] = true;
                j += q as u128;
            }
        }
        for (j, &is_composite) in composite[..len].iter().enumerate() {
            let cand: Natural = &base + &modulus * j;
            let candidate_prime = if cand <= small_limit {
                is_prime(&cand)
            } else {
                !is_composite && is_prime(&cand)
            };
            if candidate_prime && cand.gcd(avoid).is_one() {
                return Some(cand);
            }
        }
        start += SEGMENT;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ntheory::is_prime_u64;

    fn nat(n: u64) -> Natural {
        Natural::from(n)
    }

    fn sys(pairs: &[(u64, u64)]) -> CongruenceSystem {
        let mut s = CongruenceSystem::new();
        for &(r, m) in pairs {
            s.push(nat(r), nat(m)).unwrap();
        }
        s
    }

    fn brute(pairs: &[(u64, u64)], lo: u64, hi: u64, avoid: u64) -> Option<u64> {
        (lo + 1..=hi).find(|&p| {
            is_prime_u64(p) && pairs.iter().all(|&(r, m)| p % m == r) && p.gcd(&avoid) == 1
        })
    }

    #[test]
    fn examples() {
        assert_eq!(
            find_prime_in_ap(&sys(&[(1, 3), (2, 5)]), &nat(10), &nat(100), &nat(1)),
            Some(nat(37))
        );
        assert_eq!(find_prime_in_ap(&sys(&[(0, 4)]), &nat(0), &nat(10_000), &nat(1)), None);
        assert_eq!(find_prime_in_ap(&sys(&[(1, 3)]), &nat(3), &nat(8), &nat(7)), None);
        assert_eq!(find_prime_in_ap(&sys(&[(1, 3)]), &nat(3), &nat(8), &nat(1)), Some(nat(7)));
    }

    #[test]
    fn empty_interval_and_empty_system() {
        assert_eq!(find_prime_in_ap(&sys(&[(1, 3)]), &nat(8), &nat(8), &nat(1)), None);
        assert_eq!(find_prime_in_ap(&CongruenceSystem::new(), &nat(0), &nat(10), &nat(1)), Some(nat(2)));
        assert_eq!(find_prime_in_ap(&CongruenceSystem::new(), &nat(24), &nat(28), &nat(1)), None);
    }

    #[test]
    fn small_primes_inside_progression_are_found() {
        // the sieve must not discard a trial prime that lies in the progression
        assert_eq!(find_prime_in_ap(&sys(&[(2, 5)]), &nat(0), &nat(100), &nat(1)), Some(nat(2)));
        assert_eq!(find_prime_in_ap(&sys(&[(1, 4)]), &nat(0), &nat(100), &nat(1)), Some(nat(5)));
    }

    #[test]
    fn agrees_with_brute_force() {
        let systems: [&[(u64, u64)]; 5] = [
            &[(1, 3), (2, 5)],
            &[(1, 3), (3, 25)],
            &[(7, 125), (1, 3)],
            &[(1, 2)],
            &[(5, 8), (2, 3), (4, 7)],
        ];
        for s in systems {
            for lo in (0..3000).step_by(97) {
                for width in [1u64, 10, 500, 5000] {
                    for avoid in [1u64, 37, 30] {
                        assert_eq!(
                            find_prime_in_ap(&sys(s), &nat(lo), &nat(lo + width), &nat(avoid)),
                            brute(s, lo, lo + width, avoid).map(nat),
                            "{s:?} ({lo}, {}] avoid {avoid}",
                            lo + width
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn large_progression_crosses_segments() {
        // modulus 3 * 5^9; the first hit may need several sieve segments
        let s = sys(&[(1, 3), (1_000_001 % 1_953_125, 1_953_125)]);
        let lo = Natural::from(10u32).pow(15);
        let hi = &lo * 2u32;
        let p = find_prime_in_ap(&s, &lo, &hi, &nat(1)).unwrap();
        assert!(is_prime(&p) && p > lo && p <= hi);
        assert_eq!(&p % 3u32, nat(1));
        assert_eq!(&p % 1_953_125u32, nat(1_000_001 % 1_953_125));
        let m = nat(3 * 1_953_125);
        let mut q = &p - &m;
        while q > lo {
            assert!(!is_prime(&q));
            q -= &m;
        }
    }
}
