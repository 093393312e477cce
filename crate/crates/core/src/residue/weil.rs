use num_traits::{ToPrimitive, Zero};

use super::ResidueError;
use crate::ntheory::{mod_pow, Natural, NtError};

fn reduce(x: &Natural, p: u64) -> u64 {
    (x % p).to_u64().expect("residue fits in a word")
}

fn power_table(k: u32, p: u64) -> Vec<u64> {
    (0..p).map(|x| crate::ntheory::primes::pow_mod_u64(x, k as u64, p)).collect()
}

struct Grid {
    p: u64,
    a: u64,
    t: u64,
    pw1: Vec<u64>,
    by_value: Vec<Vec<u64>>,
}

impl Grid {
    fn new(c1: &Natural, c2: &Natural, target: &Natural, k1: u32, k2: u32, prime: &Natural) -> Result<Self, ResidueError> {
        let p = prime.to_u64().ok_or_else(|| {
            NtError::Precondition(format!("two-term enumeration needs a word-sized prime, got {prime}"))
        })?;
        if p > 1 << 20 {
            return Err(NtError::Precondition(format!("prime {p} too large for grid enumeration")).into());
        }
        let (a, b, t) = (reduce(c1, p), reduce(c2, p), reduce(target, p));
        if a == 0 || b == 0 {
            let offender = if a == 0 { c1 } else { c2 };
            return Err(NtError::DivisibleByPrime {
                value: offender.clone(),
                prime: prime.clone(),
            }
            .into());
        }
        let pw1 = power_table(k1, p);
        let pw2 = power_table(k2, p);
        // bucket v by the value of c2·v^k2 so each w is a lookup
        let mut by_value: Vec<Vec<u64>> = vec![Vec::new(); p as usize];
        for v in 1..p {
            by_value[((b as u128 * pw2[v as usize] as u128) % p as u128) as usize].push(v);
        }
        Ok(Grid { p, a, t, pw1, by_value })
    }

    fn solutions(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let p = self.p;
        (1..p).flat_map(move |w| {
            let lhs = (self.a as u128 * self.pw1[w as usize] as u128 % p as u128) as u64;
            let need = (self.t + p - lhs) % p;
            self.by_value[need as usize].iter().map(move |&v| (w, v))
        })
    }
}

/// All `(w, v)` with `1 <= w, v < ϖ` and `c1·w^k1 + c2·v^k2 ≡ target (mod ϖ)`,
/// in lexicographic order.
pub fn weil_solutions(
    c1: &Natural,
    c2: &Natural,
    target: &Natural,
    k1: u32,
    k2: u32,
    prime: &Natural,
) -> Result<Vec<(Natural, Natural)>, ResidueError> {
    let grid = Grid::new(c1, c2, target, k1, k2, prime)?;
    Ok(grid
        .solutions()
        .map(|(w, v)| (Natural::from(w), Natural::from(v)))
        .collect())
}

/// Lexicographically smallest solution of
/// `c1·w^k1 + c2·v^k2 ≡ target (mod ϖ)` with `ϖ ∤ wv`.
pub fn solve_weil(
    c1: &Natural,
    c2: &Natural,
    target: &Natural,
    k1: u32,
    k2: u32,
    prime: &Natural,
) -> Result<Option<(Natural, Natural)>, ResidueError> {
    let grid = Grid::new(c1, c2, target, k1, k2, prime)?;
    let first = grid.solutions().next();
    Ok(first.map(|(w, v)| (Natural::from(w), Natural::from(v))))
}

pub(crate) fn is_weil_solution(
    c1: &Natural,
    c2: &Natural,
    target: &Natural,
    k1: u32,
    k2: u32,
    prime: &Natural,
    (w, v): (&Natural, &Natural),
) -> bool {
    if (w % prime).is_zero() || (v % prime).is_zero() {
        return false;
    }
    let lhs = c1 * mod_pow(w, &Natural::from(k1), prime) + c2 * mod_pow(v, &Natural::from(k2), prime);
    lhs % prime == target % prime
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nat(n: u64) -> Natural {
        Natural::from(n)
    }

    fn brute(c1: u64, c2: u64, t: u64, k1: u32, k2: u32, p: u64) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        for w in 1..p {
            for v in 1..p {
                let lhs = (c1 as u128 * (w as u128).pow(k1) + c2 as u128 * (v as u128).pow(k2)) % p as u128;
                if lhs == (t % p) as u128 {
                    out.push((w, v));
                }
            }
        }
        out
    }

    #[test]
    fn small_examples() {
        assert_eq!(
            solve_weil(&nat(1), &nat(1), &nat(2), 5, 7, &nat(11)).unwrap(),
            Some((nat(1), nat(1)))
        );
        // 3² + 3³ = 36 ≡ 1 (mod 7); nothing smaller in lexicographic order
        assert_eq!(
            solve_weil(&nat(1), &nat(1), &nat(1), 2, 3, &nat(7)).unwrap(),
            Some((nat(3), nat(3)))
        );
        let all = weil_solutions(&nat(1), &nat(1), &nat(1), 2, 3, &nat(7)).unwrap();
        assert!(all.contains(&(nat(3), nat(6))));
    }

    #[test]
    fn divisible_coefficient_is_an_error() {
        assert!(solve_weil(&nat(7), &nat(1), &nat(1), 2, 2, &nat(7)).is_err());
        assert!(solve_weil(&nat(1), &nat(14), &nat(1), 2, 2, &nat(7)).is_err());
    }

    #[test]
    fn grid_enumeration_matches_brute_force() {
        for p in [3u64, 5, 7, 11, 13, 17] {
            for (k1, k2) in [(2u32, 2u32), (2, 3), (3, 3), (4, 6), (6, 6), (5, 8)] {
                for c2 in 1..p.min(4) {
                    for t in 0..p {
                        let got: Vec<(u64, u64)> = weil_solutions(&nat(1), &nat(c2), &nat(t), k1, k2, &nat(p))
                            .unwrap()
                            .into_iter()
                            .map(|(w, v)| (w.to_u64().unwrap(), v.to_u64().unwrap()))
                            .collect();
                        assert_eq!(got, brute(1, c2, t, k1, k2, p), "p={p} k=({k1},{k2}) c2={c2} t={t}");
                        for (w, v) in got {
                            assert!(is_weil_solution(&nat(1), &nat(c2), &nat(t), k1, k2, &nat(p), (&nat(w), &nat(v))));
                        }
                    }
                }
            }
        }
    }

    // Primes at which every nonzero target is hit for exponents 2..=6,
    // found by enumerating the grid for all primes below 200.
    #[test]
    fn existence_on_verified_primes() {
        let verified = [
            23u64, 47, 53, 59, 83, 89, 103, 107, 113, 127, 131, 137, 149, 151, 163, 167, 173, 179,
            181, 191, 193, 197, 199,
        ];
        for p in verified {
            for k1 in 2..=6u32 {
                for k2 in 2..=6u32 {
                    for t in 1..p {
                        let s = solve_weil(&nat(1), &nat(1), &nat(t), k1, k2, &nat(p)).unwrap();
                        if s.is_none() {
                            panic!("no solution p={p} k=({k1},{k2}) t={t}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn some_small_primes_miss_targets() {
        // x^4 + y^4 never hits 1 modulo 17
        assert_eq!(solve_weil(&nat(1), &nat(1), &nat(1), 4, 4, &nat(17)).unwrap(), None);
        assert!(solve_weil(&nat(1), &nat(1), &nat(13), 6, 6, &nat(73)).unwrap().is_none());
    }
}
