use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{factorize, Natural, NtError};

/// `b^e mod q`; zero when `q == 1`.
pub fn mod_pow(b: &Natural, e: &Natural, q: &Natural) -> Natural {
    assert!(!q.is_zero(), "modulus must be positive");
    if q.is_one() {
        return Natural::zero();
    }
    b.modpow(e, q)
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn mod_inverse(a: &Natural, m: &Natural) -> Option<Natural> {
    if m.is_one() {
        return Some(Natural::zero());
    }
    let m_int = BigInt::from_biguint(Sign::Plus, m.clone());
    let a_int = BigInt::from_biguint(Sign::Plus, a % m);
    let e = a_int.extended_gcd(&m_int);
    if !e.gcd.is_one() {
        return None;
    }
    let x = e.x.mod_floor(&m_int);
    x.to_biguint()
}

fn check_unit(m: &Natural, p: &Natural) -> Result<(), NtError> {
    if (m % p).is_zero() {
        return Err(NtError::DivisibleByPrime {
            value: m.clone(),
            prime: p.clone(),
        });
    }
    Ok(())
}

/// Whether `y^k ≡ m (mod p)` is soluble, by the criterion
/// `m^((p-1)/d) ≡ 1` with `d = gcd(k, p-1)`.
pub fn kth_power_residue(m: &Natural, k: u64, p: &Natural) -> Result<bool, NtError> {
    check_unit(m, p)?;
    let p_minus_1: Natural = p - 1u32;
    let d = p_minus_1.gcd(&Natural::from(k));
    Ok(mod_pow(m, &(&p_minus_1 / &d), p).is_one())
}

/// Distinct prime divisors of a small positive integer.
fn prime_divisors(n: &Natural) -> Vec<Natural> {
    factorize(n)
        .expect("divisor of k factors within budget")
        .factors
        .into_iter()
        .map(|(q, _)| q)
        .collect()
}

/// Smallest element of order exactly `q^s` in the Sylow q-subgroup, obtained
/// as `rho^t` from the least q-th power non-residue `rho`.
fn sylow_generator(q: &Natural, t: &Natural, p: &Natural) -> Natural {
    let p_minus_1: Natural = p - 1u32;
    let exp = &p_minus_1 / q;
    let mut rho = Natural::from(2u32);
    while mod_pow(&rho, &exp, p).is_one() {
        rho += 1u32;
    }
    mod_pow(&rho, t, p)
}

/// Discrete logarithm of `target` to base `c` inside a cyclic group of order
/// `q^s`, digit by digit (Pohlig-Hellman). `q` is small, so each digit is
/// found by exhaustive search.
fn log_in_q_group(target: &Natural, c: &Natural, q: &Natural, s: u64, p: &Natural) -> Natural {
    let q_small = q.to_u64().expect("root order is a machine word");
    let c_inv = mod_inverse(c, p).expect("group element is a unit");
    let gamma = mod_pow(c, &q.pow((s - 1) as u32), p);
    let mut log = Natural::zero();
    let mut q_pow = Natural::one();
    for i in 0..s {
        let shifted = (target * mod_pow(&c_inv, &log, p)) % p;
        let h = mod_pow(&shifted, &q.pow((s - 1 - i) as u32), p);
        let mut acc = Natural::one();
        let mut digit = None;
        for d in 0..q_small {
            if acc == h {
                digit = Some(d);
                break;
            }
            acc = (&acc * &gamma) % p;
        }
        let d = digit.expect("element lies in the q-group");
        log += &q_pow * d;
        q_pow *= q;
    }
    log
}

/// One q-th root of the q-th power residue `a` modulo `p`, for a prime `q`
/// dividing `p - 1`.
fn prime_order_root(a: &Natural, q: &Natural, p: &Natural) -> Natural {
    let p_minus_1: Natural = p - 1u32;
    let mut s = 0u64;
    let mut t = p_minus_1.clone();
    while (&t % q).is_zero() {
        t /= q;
        s += 1;
    }
    // x1 = a^alpha with q*alpha ≡ 1 (mod t); then x1^q = a * e with e in the
    // Sylow q-subgroup, and the correction is a q-th root of e^{-1} there.
    let alpha = if t.is_one() {
        Natural::zero()
    } else {
        mod_inverse(&(q % &t), &t).expect("q is coprime to t")
    };
    let x1 = mod_pow(a, &alpha, p);
    let x1_q = mod_pow(&x1, q, p);
    let a_inv = mod_inverse(a, p).expect("a is a unit");
    let e = (&x1_q * &a_inv) % p;
    let e_inv = mod_inverse(&e, p).expect("unit");
    let c = sylow_generator(q, &t, p);
    let log = log_in_q_group(&e_inv, &c, q, s, p);
    debug_assert!((&log % q).is_zero());
    let zeta = mod_pow(&c, &(&log / q), p);
    (x1 * zeta) % p
}

/// A generator of the subgroup of d-th roots of unity modulo `p`.
fn roots_of_unity_generator(d: &Natural, p: &Natural) -> Natural {
    let p_minus_1: Natural = p - 1u32;
    let primes = prime_divisors(d);
    let exp = &p_minus_1 / d;
    let mut g = Natural::from(2u32);
    loop {
        let mu = mod_pow(&g, &exp, p);
        if primes.iter().all(|q| !mod_pow(&mu, &(d / q), p).is_one()) {
            return mu;
        }
        g += 1u32;
    }
}

/// All solutions `x` in `[1, p)` of `x^k ≡ a (mod p)`, sorted ascending.
///
/// `p` must be prime and `a` a unit modulo `p`. Returns an empty list when `a`
/// is not a k-th power residue.
pub fn kth_roots_mod_prime(a: &Natural, k: u64, p: &Natural) -> Result<Vec<Natural>, NtError> {
    check_unit(a, p)?;
    let a = a % p;
    if p == &Natural::from(2u32) {
        return Ok(vec![Natural::one()]);
    }
    let p_minus_1: Natural = p - 1u32;
    let k_big = Natural::from(k);
    let d = p_minus_1.gcd(&k_big);
    if !mod_pow(&a, &(&p_minus_1 / &d), p).is_one() {
        return Ok(Vec::new());
    }
    // Reduce to a d-th root: if y^d = a then x = y^c with c*(k/d) ≡ 1
    // modulo (p-1)/d satisfies x^k = a.
    let mut y = a.clone();
    let mut remaining = d.clone();
    for q in prime_divisors(&d) {
        while (&remaining % &q).is_zero() {
            let after = &remaining / &q;
            let root = prime_order_root(&y, &q, p);
            // Among the q roots, keep one that is still an `after`-th power.
            let zeta = roots_of_unity_generator(&q, p);
            let mut cand = root;
            loop {
                let check = &p_minus_1 / &after;
                if mod_pow(&cand, &check, p).is_one() {
                    break;
                }
                cand = (&cand * &zeta) % p;
            }
            y = cand;
            remaining = after;
        }
    }
    let reduced_mod = &p_minus_1 / &d;
    let c = if reduced_mod.is_one() {
        Natural::one()
    } else {
        mod_inverse(&(&k_big / &d), &reduced_mod).expect("k/d is coprime to (p-1)/d")
    };
    let x0 = mod_pow(&y, &c, p);
    let mu = roots_of_unity_generator(&d, p);
    let count = d.to_u64().expect("root count fits a word");
    let mut roots = Vec::with_capacity(count as usize);
    let mut x = x0;
    for _ in 0..count {
        roots.push(x.clone());
        x = (&x * &mu) % p;
    }
    roots.sort();
    roots.dedup();
    Ok(roots)
}

/// Lift a simple root `z0` of `z^k ≡ m (mod p)` to the unique `z` with
/// `z^k ≡ m (mod p^l)`, `z ≡ z0 (mod p)` and `1 <= z <= p^l`.
pub fn hensel_lift_power(
    z0: &Natural,
    k: u64,
    m: &Natural,
    p: &Natural,
    l: u32,
) -> Result<Natural, NtError> {
    if l == 0 {
        return Err(NtError::Precondition("lifting exponent must be positive".into()));
    }
    if (Natural::from(k) % p).is_zero() || (z0 % p).is_zero() {
        return Err(NtError::Precondition(format!(
            "derivative {k}*z0^(k-1) vanishes modulo {p}"
        )));
    }
    let k_big = Natural::from(k);
    if mod_pow(z0, &k_big, p) != m % p {
        return Err(NtError::Precondition(format!(
            "z0 = {z0} is not a root of z^{k} ≡ {m} modulo {p}"
        )));
    }
    let k_minus_1 = Natural::from(k - 1);
    let mut z = z0 % p;
    let mut precision = 1u32;
    while precision < l {
        precision = (2 * precision).min(l);
        let modulus = p.pow(precision);
        let m_mod = m % &modulus;
        let value = mod_pow(&z, &k_big, &modulus);
        let derivative = (&k_big * mod_pow(&z, &k_minus_1, &modulus)) % &modulus;
        let inv = mod_inverse(&derivative, &modulus).expect("derivative is a unit");
        let delta = ((&value + &modulus - &m_mod) % &modulus * inv) % &modulus;
        z = (&z + &modulus - delta) % &modulus;
    }
    let modulus = p.pow(l);
    let z = z % &modulus;
    Ok(if z.is_zero() { modulus } else { z })
}

/// A list of congruences `x ≡ residue (mod modulus)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongruenceSystem {
    congruences: Vec<(Natural, Natural)>,
}

impl CongruenceSystem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append `x ≡ residue (mod modulus)`; requires `modulus >= 2` and
    /// `residue < modulus`.
    pub fn push(&mut self, residue: Natural, modulus: Natural) -> Result<(), NtError> {
        if modulus < Natural::from(2u32) || residue >= modulus {
            return Err(NtError::InvalidCongruence { residue, modulus });
        }
        self.congruences.push((residue, modulus));
        Ok(())
    }

    pub fn with(mut self, residue: u64, modulus: u64) -> Result<Self, NtError> {
        self.push(Natural::from(residue), Natural::from(modulus))?;
        Ok(self)
    }

    pub fn congruences(&self) -> &[(Natural, Natural)] {
        &self.congruences
    }

    pub fn modulus(&self) -> Natural {
        self.congruences
            .iter()
            .fold(Natural::one(), |acc, (_, m)| acc * m)
    }

    pub fn is_empty(&self) -> bool {
        self.congruences.is_empty()
    }
}

/// The unique solution in `[1, ∏ moduli]` of a system with pairwise coprime
/// moduli. The empty system yields 1.
pub fn crt_solve(sys: &CongruenceSystem) -> Result<Natural, NtError> {
    let cs = sys.congruences();
    for (i, (_, a)) in cs.iter().enumerate() {
        for (_, b) in &cs[i + 1..] {
            if !a.gcd(b).is_one() {
                return Err(NtError::NotCoprime {
                    a: a.clone(),
                    b: b.clone(),
                });
            }
        }
    }
    let mut x = Natural::zero();
    let mut modulus = Natural::one();
    for (r, m) in cs {
        let inv = mod_inverse(&(&modulus % m), m).expect("moduli are coprime");
        let x_mod = &x % m;
        let diff = BigInt::from_biguint(Sign::Plus, r.clone()) - BigInt::from_biguint(Sign::Plus, x_mod);
        let diff = diff
            .mod_floor(&BigInt::from_biguint(Sign::Plus, m.clone()))
            .abs()
            .to_biguint()
            .unwrap();
        let t = (diff * inv) % m;
        x += &modulus * t;
        modulus *= m;
    }
    Ok(if x.is_zero() { modulus } else { x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ntheory::small_primes;
    use proptest::prelude::*;

    fn nat(n: u64) -> Natural {
        Natural::from(n)
    }

    fn brute_pow(b: u64, e: u64, q: u64) -> u64 {
        let mut r = 1 % q;
        for _ in 0..e {
            r = (r as u128 * b as u128 % q as u128) as u64;
        }
        r
    }

    #[test]
    fn mod_pow_examples() {
        assert_eq!(mod_pow(&nat(3), &nat(4), &nat(5)), nat(1));
        assert_eq!(mod_pow(&nat(12345), &nat(0), &nat(7)), nat(1));
        assert_eq!(mod_pow(&nat(12345), &nat(0), &nat(1)), nat(0));
        // square-and-multiply oracle, computed independently
        assert_eq!(
            mod_pow(&nat(2), &nat(10_000_000_000), &nat(1_000_000_007)),
            nat(291_251_492)
        );
    }

    #[test]
    fn mod_pow_matches_repeated_multiplication() {
        for b in 0..20 {
            for e in 0..30 {
                for q in 1..25 {
                    assert_eq!(mod_pow(&nat(b), &nat(e), &nat(q)), nat(brute_pow(b, e, q)));
                }
            }
        }
    }

    #[test]
    fn kth_power_residue_examples() {
        assert!(kth_power_residue(&nat(1), 7, &nat(29)).unwrap());
        assert!(!kth_power_residue(&nat(2), 3, &nat(7)).unwrap());
        assert!(kth_power_residue(&nat(14), 3, &nat(7)).is_err());
        // ϖ ≡ 2 (mod k), k odd: every unit is a k-th power residue
        for m in 1..11 {
            assert!(kth_power_residue(&nat(m), 3, &nat(11)).unwrap());
        }
        for m in 1..7 {
            assert!(kth_power_residue(&nat(m), 5, &nat(7)).unwrap());
        }
    }

    #[test]
    fn kth_power_residue_matches_enumeration() {
        for p in small_primes(102) {
            let p = p as u64;
            for k in 1..=12u64 {
                let powers: std::collections::BTreeSet<u64> =
                    (1..p).map(|y| brute_pow(y, k, p)).collect();
                for m in 1..p {
                    assert_eq!(
                        kth_power_residue(&nat(m), k, &nat(p)).unwrap(),
                        powers.contains(&m),
                        "m={m} k={k} p={p}"
                    );
                }
            }
        }
    }

    #[test]
    fn kth_roots_match_enumeration() {
        for p in small_primes(120) {
            let p = p as u64;
            for k in 1..=12u64 {
                for a in 1..p {
                    let expected: Vec<Natural> =
                        (1..p).filter(|&y| brute_pow(y, k, p) == a).map(nat).collect();
                    assert_eq!(
                        kth_roots_mod_prime(&nat(a), k, &nat(p)).unwrap(),
                        expected,
                        "a={a} k={k} p={p}"
                    );
                }
            }
        }
    }

    #[test]
    fn kth_roots_high_two_adicity() {
        // 2^16 + 1 has p - 1 = 2^16, the hardest case for square roots
        let p = nat(65537);
        for a in [3u64, 9, 81, 6561, 43046721 % 65537] {
            let roots = kth_roots_mod_prime(&nat(a), 8, &p).unwrap();
            for r in &roots {
                assert_eq!(mod_pow(r, &nat(8), &p), nat(a) % &p);
            }
            let brute = (1..65537u64).filter(|&y| brute_pow(y, 8, 65537) == a % 65537).count();
            assert_eq!(roots.len(), brute);
        }
    }

    #[test]
    fn hensel_examples() {
        assert_eq!(hensel_lift_power(&nat(3), 3, &nat(2), &nat(5), 2).unwrap(), nat(3));
        assert_eq!(hensel_lift_power(&nat(4), 3, &nat(64), &nat(11), 1).unwrap(), nat(4));
        // brute force over residues mod 343 gives the single lift 108
        assert_eq!(hensel_lift_power(&nat(3), 2, &nat(2), &nat(7), 3).unwrap(), nat(108));
    }

    #[test]
    fn hensel_rejects_bad_input() {
        assert!(hensel_lift_power(&nat(1), 5, &nat(1), &nat(5), 2).is_err());
        assert!(hensel_lift_power(&nat(2), 2, &nat(3), &nat(7), 2).is_err());
        assert!(hensel_lift_power(&nat(7), 2, &nat(0), &nat(7), 2).is_err());
    }

    #[test]
    fn hensel_matches_brute_force() {
        for p in small_primes(51) {
            let p = p as u64;
            for k in 1..=10u64 {
                if k % p == 0 {
                    continue;
                }
                for l in 1..=3u32 {
                    let pl = p.pow(l);
                    for z0 in 1..p {
                        let m = brute_pow(z0, k, pl) + pl * 3;
                        let lifted = hensel_lift_power(&nat(z0), k, &nat(m), &nat(p), l).unwrap();
                        let brute: Vec<u64> = (1..=pl)
                            .filter(|&z| z % p == z0 && brute_pow(z, k, pl) == m % pl)
                            .collect();
                        assert_eq!(brute, vec![lifted.to_u64().unwrap()], "p={p} k={k} l={l} z0={z0}");
                    }
                }
            }
        }
    }

    #[test]
    fn crt_examples() {
        let sys = CongruenceSystem::new().with(2, 3).unwrap().with(3, 5).unwrap();
        assert_eq!(crt_solve(&sys).unwrap(), nat(8));
        let sys = CongruenceSystem::new().with(0, 11).unwrap();
        assert_eq!(crt_solve(&sys).unwrap(), nat(11));
        let sys = CongruenceSystem::new()
            .with(1, 2).unwrap()
            .with(0, 3).unwrap()
            .with(2, 5).unwrap()
            .with(4, 7).unwrap();
        // sweep of 1..=210 finds 207 as the only solution
        assert_eq!(crt_solve(&sys).unwrap(), nat(207));
    }

    #[test]
    fn crt_errors() {
        let sys = CongruenceSystem::new().with(1, 4).unwrap().with(3, 6).unwrap();
        assert!(matches!(crt_solve(&sys), Err(NtError::NotCoprime { .. })));
        assert!(CongruenceSystem::new().with(5, 5).is_err());
        assert!(CongruenceSystem::new().with(0, 1).is_err());
        assert_eq!(crt_solve(&CongruenceSystem::new()).unwrap(), nat(1));
    }

    proptest! {
        #[test]
        fn crt_solution_unique_in_range(
            r1 in 0u64..8, r2 in 0u64..9, r3 in 0u64..25, r4 in 0u64..11
        ) {
            let moduli = [8u64, 9, 25, 11];
            let residues = [r1, r2, r3, r4];
            let mut sys = CongruenceSystem::new();
            for (r, m) in residues.iter().zip(moduli) {
                sys.push(nat(*r), nat(m)).unwrap();
            }
            let x = crt_solve(&sys).unwrap().to_u64().unwrap();
            let total: u64 = moduli.iter().product();
            prop_assert!((1..=total).contains(&x));
            let sweep: Vec<u64> = (1..=total)
                .filter(|v| residues.iter().zip(moduli).all(|(r, m)| v % m == *r))
                .collect();
            prop_assert_eq!(sweep, vec![x]);
        }

        #[test]
        fn hensel_output_is_a_root(idx in 0usize..20, k in 2u64..12, l in 1u32..8, z0 in 1u64..1000) {
            let p = [7u64, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83][idx];
            prop_assume!(k % p != 0 && z0 % p != 0);
            let m = nat(z0).pow(k as u32) + nat(12345) * nat(p).pow(l);
            let z = hensel_lift_power(&nat(z0), k, &m, &nat(p), l).unwrap();
            let pl = nat(p).pow(l);
            prop_assert_eq!(mod_pow(&z, &nat(k), &pl), &m % &pl);
            prop_assert_eq!(&z % nat(p), nat(z0 % p));
            prop_assert!(z >= nat(1) && z <= pl);
        }
    }
}
