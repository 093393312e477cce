//! Representations `N = x^2 + y^2 + 6p z^2`: a sweep solver, an exact
//! counter, and the 2-adic (mod 16) local checks.

use std::sync::OnceLock;

use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ntheory::{two_squares_with, FactorBudget, Natural, NtError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TernaryInstance {
    #[serde(with = "crate::codec::dec")]
    pub n: Natural,
    #[serde(with = "crate::codec::dec")]
    pub p: Natural,
    /// Require `x, y, z >= 1`; otherwise zeros are allowed.
    pub require_positive: bool,
}

impl TernaryInstance {
    pub fn new(n: Natural, p: Natural) -> Self {
        TernaryInstance {
            n,
            p,
            require_positive: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TernarySolution {
    #[serde(with = "crate::codec::dec")]
    pub x: Natural,
    #[serde(with = "crate::codec::dec")]
    pub y: Natural,
    #[serde(with = "crate::codec::dec")]
    pub z: Natural,
}

impl TernarySolution {
    pub fn value(&self, p: &Natural) -> Natural {
        &self.x * &self.x + &self.y * &self.y + p * 6u32 * &self.z * &self.z
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum TernaryOutcome {
    Found(TernarySolution),
    /// Every admissible `z` was tried with complete factorizations.
    ProvenAbsent,
    /// The z budget ran out, or some factorization hit its work cap.
    BudgetExhausted { tried: u64, factor_failures: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TernaryBudget {
    pub max_z: u64,
    pub factor: FactorBudget,
    pub batch: usize,
}

impl Default for TernaryBudget {
    fn default() -> Self {
        TernaryBudget {
            max_z: 1_000_000,
            factor: FactorBudget { rho_iterations: 1 << 20 },
            batch: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TernaryError {
    #[error("p = {0} must be positive")]
    ZeroPrime(Natural),
    #[error("N = {n} exceeds the exhaustive counting cap {cap}")]
    CapExceeded { n: Natural, cap: u64 },
    #[error(transparent)]
    Arithmetic(#[from] NtError),
}

const RESIDUE_PRIMES_3_MOD_4: [u64; 14] = [3, 7, 11, 19, 23, 31, 43, 47, 59, 67, 71, 79, 83, 103];

/// Cheap rejection of values that are not sums of two squares.
fn obviously_not_two_squares(r: &Natural) -> bool {
    if (r % 4u32).to_u32() == Some(3) {
        return true;
    }
    for q in RESIDUE_PRIMES_3_MOD_4 {
        let mut e = 0u32;
        let mut m = r.clone();
        loop {
            let (d, rem) = m.div_rem(&Natural::from(q));
            if !rem.is_zero() || m.is_zero() {
                break;
            }
            e += 1;
            m = d;
        }
        if e % 2 == 1 {
            return true;
        }
    }
    false
}

/// Position `i` of the sweep visits `z = 1 + (offset + i·stride) mod count`.
#[derive(Debug, Clone, Copy)]
struct Sweep {
    count: u64,
    offset: u64,
    stride: u64,
}

impl Sweep {
    fn new(count: u64, seed: u64, inst: &TernaryInstance) -> Self {
        if count == 0 {
            return Sweep { count, offset: 0, stride: 1 };
        }
        let mut key = seed;
        for d in inst.n.iter_u64_digits().chain(inst.p.iter_u64_digits()) {
            key = ChaCha8Rng::seed_from_u64(key ^ d).next_u64();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let offset = rng.gen_range(0..count);
        // golden-ratio stride, nudged to be coprime to the count
        let mut stride = ((count as f64) * 0.618_033_988_749_894_9) as u64;
        stride = stride.max(1);
        while stride.gcd(&count) != 1 {
            stride += 1;
        }
        Sweep { count, offset, stride: stride % count.max(1) }
    }

    fn z_at(&self, i: u64) -> u64 {
        let pos = (self.offset as u128 + i as u128 * self.stride as u128) % self.count as u128;
        pos as u64 + 1
    }
}

enum Probe {
    Hit(TernarySolution),
    Miss,
    FactorFailure,
}

fn probe(inst: &TernaryInstance, six_p: &Natural, z: u64, budget: FactorBudget) -> Probe {
    let zz = Natural::from(z) * z;
    let used = six_p * &zz;
    if used > inst.n {
        return Probe::Miss;
    }
    let r = &inst.n - used;
    if obviously_not_two_squares(&r) {
        return Probe::Miss;
    }
    match two_squares_with(&r, inst.require_positive, budget) {
        Ok(Some((x, y))) => Probe::Hit(TernarySolution {
            x,
            y,
            z: Natural::from(z),
        }),
        Ok(None) => Probe::Miss,
        Err(_) => Probe::FactorFailure,
    }
}

/// Sweep `z` in a seeded pseudo-random order and decompose `N - 6pz^2` into
/// two squares. Batches run in parallel; within a batch the hit earliest in
/// the sweep order wins, so the result does not depend on the worker count.
pub fn solve_ternary(inst: &TernaryInstance, budget: &TernaryBudget, seed: u64) -> Result<TernaryOutcome, TernaryError> {
    if inst.p.is_zero() {
        return Err(TernaryError::ZeroPrime(inst.p.clone()));
    }
    let six_p = &inst.p * 6u32;
    let z_max = (&inst.n / &six_p).sqrt().to_u64().unwrap_or(u64::MAX);
    if !inst.require_positive {
        if let Probe::Hit(s) = probe(inst, &six_p, 0, budget.factor) {
            return Ok(TernaryOutcome::Found(s));
        }
    }
    let sweep = Sweep::new(z_max, seed, inst);
    let limit = z_max.min(budget.max_z);
    let batch = budget.batch.max(1) as u64;
    let mut failures = 0u64;
    let mut start = 0u64;
    while start < limit {
        let end = (start + batch).min(limit);
        let results: Vec<(u64, Probe)> = (start..end)
            .into_par_iter()
            .map(|i| (i, probe(inst, &six_p, sweep.z_at(i), budget.factor)))
            .collect();
        for (_, r) in results {
            match r {
                Probe::Hit(s) => return Ok(TernaryOutcome::Found(s)),
                Probe::FactorFailure => failures += 1,
                Probe::Miss => {}
            }
        }
        start = end;
    }
    if limit == z_max && failures == 0 {
        Ok(TernaryOutcome::ProvenAbsent)
    } else {
        Ok(TernaryOutcome::BudgetExhausted {
            tried: limit,
            factor_failures: failures,
        })
    }
}

/// Number of ordered pairs `(x, y)` with `x^2 + y^2 = r`, both positive or
/// both non-negative.
fn two_square_count(r: u64, positive: bool) -> u64 {
    if r == 0 {
        return u64::from(!positive);
    }
    // d1(r) - d3(r) from the factorization
    let mut m = r;
    let mut count = 1u64;
    while m % 2 == 0 {
        m /= 2;
    }
    let mut q = 3u64;
    while q * q <= m {
        if m % q == 0 {
            let mut e = 0u64;
            while m % q == 0 {
                m /= q;
                e += 1;
            }
            if q % 4 == 1 {
                count *= e + 1;
            } else if e % 2 == 1 {
                return 0;
            }
        }
        q += 2;
    }
    if m > 1 {
        if m % 4 == 1 {
            count *= 2;
        } else {
            return 0;
        }
    }
    let s = r.isqrt();
    let square = u64::from(s * s == r);
    if positive {
        count - square
    } else {
        count + square
    }
}

/// Exact number of ordered triples with `x^2 + y^2 + 6pz^2 = N`, by
/// enumeration of `z`. Refuses `N` above `cap`.
pub fn count_representations(inst: &TernaryInstance, cap: u64) -> Result<u64, TernaryError> {
    let n = match inst.n.to_u64() {
        Some(n) if n <= cap => n,
        _ => return Err(TernaryError::CapExceeded { n: inst.n.clone(), cap }),
    };
    let p = inst.p.to_u64().filter(|&p| p > 0).ok_or_else(|| TernaryError::ZeroPrime(inst.p.clone()))?;
    let six_p = 6 * p;
    let z0 = u64::from(inst.require_positive);
    let mut total = 0u64;
    let mut z = z0;
    while six_p * z * z <= n {
        total += two_square_count(n - six_p * z * z, inst.require_positive);
        z += 1;
    }
    Ok(total)
}

pub const DEFAULT_COUNT_CAP: u64 = 100_000_000;

fn mod16_table() -> &'static [[bool; 16]; 16] {
    static TABLE: OnceLock<[[bool; 16]; 16]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[false; 16]; 16];
        for (c, row) in t.iter_mut().enumerate() {
            for x in 0..16usize {
                for y in 0..16usize {
                    for z in 0..16usize {
                        row[(x * x + y * y + c * z * z) % 16] = true;
                    }
                }
            }
        }
        t
    })
}

/// Whether `N ≡ x^2 + y^2 + 6p z^2 (mod 16)` is soluble.
pub fn check_mod16(n: &Natural, p: &Natural) -> bool {
    let c = ((p * 6u32) % 16u32).to_usize().unwrap();
    let r = (n % 16u32).to_usize().unwrap();
    mod16_table()[c][r]
}

/// Whether `x^2 + y^2 + 6p z^2 + 2λ^2 p^3` covers every odd class mod 16
/// with at least one of `x, y` odd.
pub fn check_mod16_shifted_coverage(p: &Natural, lambda: &Natural) -> bool {
    let p16 = (p % 16u32).to_u64().unwrap();
    let l16 = (lambda % 16u32).to_u64().unwrap();
    let shift = (2 * l16 * l16 * p16 * p16 * p16) % 16;
    let c = (6 * p16) % 16;
    let mut hit = [false; 16];
    for x in 0..16u64 {
        for y in 0..16u64 {
            if x % 2 == 0 && y % 2 == 0 {
                continue;
            }
            for z in 0..16u64 {
                hit[((x * x + y * y + c * z * z + shift) % 16) as usize] = true;
            }
        }
    }
    (1..16).step_by(2).all(|a| hit[a])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nat(n: u64) -> Natural {
        Natural::from(n)
    }

    fn brute_count(n: u64, p: u64, positive: bool) -> u64 {
        let lo = u64::from(positive);
        let mut c = 0;
        let mut z = lo;
        while 6 * p * z * z <= n {
            let mut x = lo;
            while x * x + 6 * p * z * z <= n {
                let r = n - x * x - 6 * p * z * z;
                let y = r.isqrt();
                if y * y == r && y >= lo {
                    c += 1;
                }
                x += 1;
            }
            z += 1;
        }
        c
    }

    #[test]
    fn constructed_instance() {
        let inst = TernaryInstance::new(nat(55), nat(5));
        let out = solve_ternary(&inst, &TernaryBudget::default(), 0).unwrap();
        let TernaryOutcome::Found(s) = out else { panic!("{out:?}") };
        assert_eq!((s.x.clone(), s.y.clone(), s.z.clone()), (nat(4), nat(3), nat(1)));
        assert_eq!(count_representations(&inst, DEFAULT_COUNT_CAP).unwrap(), 2);
    }

    #[test]
    fn small_n_is_proven_absent() {
        let inst = TernaryInstance::new(nat(1), nat(5));
        assert_eq!(solve_ternary(&inst, &TernaryBudget::default(), 0).unwrap(), TernaryOutcome::ProvenAbsent);
        // 31 is below 1 + 1 + 30
        assert_eq!(count_representations(&TernaryInstance::new(nat(31), nat(5)), 1000).unwrap(), 0);
    }

    #[test]
    fn budget_is_distinct_from_absence() {
        let inst = TernaryInstance::new(nat(1_000_003), nat(5));
        let budget = TernaryBudget { max_z: 0, ..Default::default() };
        assert!(matches!(
            solve_ternary(&inst, &budget, 0).unwrap(),
            TernaryOutcome::BudgetExhausted { tried: 0, .. }
        ));
    }

    #[test]
    fn count_matches_triple_loop() {
        for p in [5u64, 7, 11, 13] {
            for n in (1..3000).chain(19_900..20_000) {
                let inst = TernaryInstance::new(nat(n), nat(p));
                assert_eq!(count_representations(&inst, 100_000).unwrap(), brute_count(n, p, true), "N={n} p={p}");
                let loose = TernaryInstance { require_positive: false, ..inst };
                assert_eq!(count_representations(&loose, 100_000).unwrap(), brute_count(n, p, false), "N={n} p={p}");
            }
        }
    }

    #[test]
    fn counting_cap() {
        let inst = TernaryInstance::new(nat(DEFAULT_COUNT_CAP + 1), nat(5));
        assert!(matches!(count_representations(&inst, DEFAULT_COUNT_CAP), Err(TernaryError::CapExceeded { .. })));
    }

    #[test]
    fn solver_finds_iff_count_positive() {
        for p in [5u64, 13] {
            for n in 1..2000 {
                let inst = TernaryInstance::new(nat(n), nat(p));
                let found = matches!(solve_ternary(&inst, &TernaryBudget::default(), 7).unwrap(), TernaryOutcome::Found(_));
                assert_eq!(found, count_representations(&inst, 10_000).unwrap() > 0, "N={n} p={p}");
            }
        }
    }

    #[test]
    fn solutions_are_exact_and_seed_deterministic() {
        let inst = TernaryInstance::new(nat(1_000_000_007), nat(101));
        let a = solve_ternary(&inst, &TernaryBudget::default(), 42).unwrap();
        let b = solve_ternary(&inst, &TernaryBudget { batch: 3, ..Default::default() }, 42).unwrap();
        let TernaryOutcome::Found(s) = &a else { panic!() };
        assert_eq!(s.value(&inst.p), inst.n);
        assert!(s.x >= s.y);
        assert_eq!(a, b);
    }

    // Solubility table for N ≡ x^2 + y^2 + 6p z^2 (mod 16), rows by p mod 8
    // (odd p) and columns N mod 16, computed by enumerating all 16^3 triples.
    #[test]
    fn mod16_table_frozen() {
        let expect: [(u64, [u8; 16]); 4] = [
            (1, [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1]),
            (3, [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 1]),
            (5, [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1]),
            (7, [1, 1, 1, 1, 1, 1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1]),
        ];
        for (pm8, row) in expect {
            for (r, &want) in row.iter().enumerate() {
                assert_eq!(check_mod16(&nat(r as u64), &nat(pm8)), want == 1, "p≡{pm8} N≡{r}");
                assert_eq!(check_mod16(&nat(r as u64 + 16 * 5), &nat(pm8 + 8 * 3)), want == 1);
            }
        }
    }

    #[test]
    fn local_obstruction_is_sound() {
        for p in [5u64, 7, 11, 13] {
            for n in 1..3000 {
                let inst = TernaryInstance::new(nat(n), nat(p));
                if count_representations(&inst, 10_000).unwrap() > 0 {
                    assert!(check_mod16(&nat(n), &nat(p)));
                }
            }
        }
    }

    #[test]
    fn shifted_coverage_samples() {
        assert!(check_mod16_shifted_coverage(&nat(3), &nat(1)));
        assert!(check_mod16_shifted_coverage(&nat(5), &nat(3)));
        for p in [3u64, 5, 7, 11, 101] {
            assert_eq!(
                check_mod16_shifted_coverage(&nat(p), &nat(1)),
                check_mod16_shifted_coverage(&nat(p), &nat(9))
            );
        }
    }
}
