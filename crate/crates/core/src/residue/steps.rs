use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use super::check::{check_step, StepContext};
use super::prime_select::find_residue_prime_nth;
use super::weil::weil_solutions;
use super::{BasePrimes, BoundPolicy, PolicyScale, ResidueError, StepKind, StepWitness};
use crate::descent::exponents::ExponentTuple;
use crate::ntheory::{
    crt_solve, hensel_lift_power, kth_power_residue, kth_roots_mod_prime, mod_inverse,
    CongruenceSystem, Natural,
};

/// Knobs the descent turns when it retries a stage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepOptions {
    /// Skip this many otherwise valid CRT shifts.
    pub g_rank: usize,
    /// Primes the next residual must not be divisible by.
    pub avoid: Vec<Natural>,
    /// Top step: skip this many qualifying fresh primes.
    pub prime_skip: usize,
}

// residue combinations beyond this are thinned before the CRT enumeration
const MAX_COMBINATIONS: usize = 1 << 16;

fn small(x: &Natural, q: u64) -> u64 {
    (x % q).to_u64().unwrap()
}

fn pow_small(r: u64, k: u32, q: u64) -> u64 {
    let mut acc = 1u128;
    for _ in 0..k {
        acc = acc * r as u128 % q as u128;
    }
    acc as u64
}

/// Admissible residues of `y` modulo a gadget prime `q`: the residual
/// `target - y^k` must be a unit mod `q`, and mod 3 it should be `≡ 1`
/// (falling back to `≡ 0` when no residue gives 1).
fn gadget_residues(target: &Natural, k: u32, q: u64) -> Vec<u64> {
    let t = small(target, q);
    let diff = |r: u64| (t + q - pow_small(r, k, q)) % q;
    if q == 3 {
        let ones: Vec<u64> = (0..3).filter(|&r| diff(r) == 1).collect();
        if !ones.is_empty() {
            return ones;
        }
        return (0..3).filter(|&r| diff(r) == 0).collect();
    }
    (0..q).filter(|&r| diff(r) != 0).collect()
}

struct ShiftProblem<'a> {
    kind: StepKind,
    stage: usize,
    prime: Natural,
    h: u64,
    l: u64,
    exponent: u32,
    input: &'a Natural,
    /// Value `y^k` is subtracted from.
    target: Natural,
    z: Natural,
    y2: Option<(Natural, u32)>,
    pair_seed: Option<(Natural, Natural)>,
}

/// Scan `y = z + g·ϖ^l` over CRT shifts `g` in increasing order and return
/// the first witness that passes every check.
fn shift_search(
    ctx: &StepContext<'_>,
    prob: ShiftProblem<'_>,
    opts: &StepOptions,
) -> Result<StepWitness, ResidueError> {
    let policy = ctx.policy;
    let modulus = prob.prime.pow(prob.l as u32);
    let k = prob.exponent;
    let stage = prob.stage;

    // (modulus, admissible residues of y) for the gadget primes and the Weil prime
    let mut moduli: Vec<(u64, Vec<u64>)> = Vec::new();
    let mut gadget: Vec<u64> = vec![2, 3, 5];
    if stage >= 3 {
        for p in &ctx.base.as_slice()[..stage - 2] {
            gadget.push(p.to_u64().ok_or_else(|| ResidueError::Precondition {
                stage,
                reason: format!("base prime {p} exceeds the word size"),
            })?);
        }
    }
    for &q in &gadget {
        moduli.push((q, gadget_residues(&prob.target, k, q)));
    }
    // v -> w for the admissible two-term solutions
    let mut weil_w: Vec<(u64, Natural)> = Vec::new();
    if stage >= 2 {
        let q = ctx.base.get(stage - 1);
        let inv = mod_inverse(&(&modulus % q), q).ok_or_else(|| ResidueError::Precondition {
            stage,
            reason: format!("{q} divides the step modulus"),
        })?;
        let scaled = (&inv * &prob.target) % q;
        let sols = weil_solutions(&Natural::one(), &inv, &scaled, ctx.exponents.k(stage - 1), k, q)?;
        for (w, v) in sols {
            let v = v.to_u64().unwrap();
            if !weil_w.iter().any(|(seen, _)| *seen == v) {
                weil_w.push((v, w));
            }
            if weil_w.len() >= policy.weil_candidates {
                break;
            }
        }
        if weil_w.is_empty() {
            return Err(ResidueError::NoWeilSolution { stage, prime: q.clone() });
        }
        let mut vs: Vec<u64> = weil_w.iter().map(|(v, _)| *v).collect();
        vs.sort_unstable();
        moduli.push((q.to_u64().unwrap(), vs));
    }

    // residues of y become residues of g = (y - z)·ϖ^{-l}
    let mut g_sets: Vec<(u64, Vec<u64>)> = Vec::with_capacity(moduli.len());
    for (q, rs) in &moduli {
        if rs.is_empty() {
            return Err(ResidueError::ShiftSearchExhausted { stage, scanned: 0 });
        }
        let qb = Natural::from(*q);
        let inv = mod_inverse(&(&modulus % &qb), &qb)
            .ok_or_else(|| ResidueError::Precondition {
                stage,
                reason: format!("{q} divides the step modulus"),
            })?
            .to_u64()
            .unwrap();
        let z = small(&prob.z, *q);
        let mut gs: Vec<u64> = rs
            .iter()
            .map(|&r| ((r + q - z) % q) as u128 * inv as u128 % *q as u128)
            .map(|g| g as u64)
            .collect();
        gs.sort_unstable();
        g_sets.push((*q, gs));
    }
    // thin the largest sets until the product is manageable
    while g_sets.iter().map(|(_, s)| s.len()).product::<usize>() > MAX_COMBINATIONS {
        let largest = g_sets.iter_mut().max_by_key(|(_, s)| s.len()).unwrap();
        let keep = largest.1.len().div_ceil(2);
        largest.1.truncate(keep);
    }
    let crt_modulus: u64 = g_sets.iter().map(|(q, _)| *q).product();
    let mut bases: Vec<u64> = Vec::new();
    let mut idx = vec![0usize; g_sets.len()];
    'combos: loop {
        let mut sys = CongruenceSystem::new();
        for (i, (q, gs)) in g_sets.iter().enumerate() {
            sys.push(Natural::from(gs[idx[i]]), Natural::from(*q))?;
        }
        bases.push(crt_solve(&sys)?.to_u64().unwrap());
        for i in 0..idx.len() {
            idx[i] += 1;
            if idx[i] < g_sets[i].1.len() {
                continue 'combos;
            }
            idx[i] = 0;
        }
        break;
    }
    bases.sort_unstable();

    let mut avoid: Vec<Natural> = opts.avoid.clone();
    if prob.l >= 1 {
        avoid.push(prob.prime.clone());
    }
    let t = ctx.exponents.len() as u64;
    let extra = prob.y2.as_ref().map(|(y2, k2)| y2.pow(*k2)).unwrap_or_default();
    let ln_cap = match policy.scale {
        PolicyScale::PaperFaithful => {
            let ln_size = crate::ntheory::ln_big(prob.input);
            let s = match prob.kind {
                StepKind::Pair => ctx.exponents.len() as f64,
                _ => stage as f64,
            };
            let kw = match prob.kind {
                StepKind::Pair => ctx.exponents.k(ctx.exponents.len()),
                _ => k,
            } as f64;
            Some(policy.omega_f64() / kw * ln_size - s * ln_size.ln())
        }
        PolicyScale::DeskScale => None,
    };

    let mut skipped = 0usize;
    let mut scanned = 0u64;
    let mut last: Option<super::StepViolation> = None;
    for j in 0..policy.shift_scan {
        for &g0 in &bases {
            let g = Natural::from(g0) + Natural::from(j) * crt_modulus;
            scanned += 1;
            let y = &prob.z + &g * &modulus;
            let power = y.pow(k);
            // sizes only grow with g
            match ln_cap {
                None => {
                    if (&power + &extra) * (4 * t) > *prob.input {
                        return Err(last.map_or(
                            ResidueError::ShiftSearchExhausted { stage, scanned },
                            |violation| ResidueError::Violation { stage, violation },
                        ));
                    }
                }
                Some(cap) => {
                    if crate::ntheory::ln_big(&y) > cap {
                        return Err(ResidueError::ShiftSearchExhausted { stage, scanned });
                    }
                }
            }
            if power >= prob.target {
                continue;
            }
            let residual = &prob.target - &power;
            let (quotient, rem) = residual.div_rem(&modulus);
            if !rem.is_zero() || quotient.is_zero() {
                continue;
            }
            if avoid.iter().any(|p| (&quotient % p).is_zero()) {
                continue;
            }
            let weil = if stage >= 2 {
                let q = ctx.base.get(stage - 1);
                let v = small(&y, q.to_u64().unwrap());
                match weil_w.iter().find(|(vv, _)| *vv == v) {
                    Some((v, w)) => Some((w.clone(), Natural::from(*v))),
                    None => continue,
                }
            } else {
                None
            };
            let witness = StepWitness {
                kind: prob.kind,
                stage,
                prime: prob.prime.clone(),
                h: prob.h,
                l: prob.l,
                exponent: k,
                input: prob.input.clone(),
                y,
                y2: prob.y2.as_ref().map(|(y2, _)| y2.clone()),
                exponent2: prob.y2.as_ref().map(|(_, k2)| *k2),
                z: prob.z.clone(),
                g,
                weil,
                pair_seed: prob.pair_seed.clone(),
                quotient,
            };
            match check_step(ctx, &witness) {
                Ok(()) => {
                    if skipped == opts.g_rank {
                        return Ok(witness);
                    }
                    skipped += 1;
                }
                Err(v) => last = Some(v),
            }
        }
    }
    Err(match last {
        Some(violation) => ResidueError::Violation { stage, violation },
        None => ResidueError::ShiftSearchExhausted { stage, scanned },
    })
}

/// Smallest lift modulo `ϖ^l` over all roots of `y^k ≡ target (mod ϖ)`;
/// 1 when `l = 0`.
fn hensel_root(target: &Natural, k: u32, prime: &Natural, l: u64, stage: usize) -> Result<Natural, ResidueError> {
    if l == 0 {
        return Ok(Natural::one());
    }
    let roots = kth_roots_mod_prime(&(target % prime), k as u64, prime)?;
    let mut best: Option<Natural> = None;
    for r in roots {
        let z = hensel_lift_power(&r, k as u64, target, prime, l as u32)?;
        if best.as_ref().is_none_or(|b| &z < b) {
            best = Some(z);
        }
    }
    best.ok_or_else(|| ResidueError::Precondition {
        stage,
        reason: format!("target is not a {k}-th power residue modulo {prime}"),
    })
}

fn height(
    policy: &BoundPolicy,
    prime: &Natural,
    k: u32,
    big_k: u64,
    size: &Natural,
    log_power: u32,
    stage: usize,
) -> Result<(u64, u64), ResidueError> {
    let h = policy
        .max_height(prime, k, big_k, size, log_power)
        .ok_or_else(|| ResidueError::HeightUnderflow { stage, prime: prime.clone() })?;
    Ok((h, 6 * big_k * h))
}

/// Step for the last exponent with a fresh power-residue prime.
pub fn construct_step_top(
    n: &Natural,
    k: &ExponentTuple,
    base: &BasePrimes,
    policy: &BoundPolicy,
    opts: &StepOptions,
) -> Result<StepWitness, ResidueError> {
    let t = k.len();
    let kt = k.k(t);
    let big_k = k.big_k();
    if base.len() + 1 != t {
        return Err(ResidueError::Precondition {
            stage: t,
            reason: format!("expected {} base primes", t - 1),
        });
    }
    if t >= 2 && (n % base.get(t - 1)).is_zero() {
        return Err(ResidueError::Precondition {
            stage: t,
            reason: format!("{} divides n", base.get(t - 1)),
        });
    }
    let avoid_d = base.omega(t - 1) * 30u32;
    let prime = find_residue_prime_nth(n, kt as u64, &avoid_d, policy.prime_cap, opts.prime_skip)?;
    let (h, l) = height(policy, &prime, kt, big_k, n, t as u32 + 2, t)?;
    let z = hensel_root(n, kt, &prime, l, t)?;
    let ctx = StepContext { exponents: k, base, policy };
    shift_search(
        &ctx,
        ShiftProblem {
            kind: StepKind::Top,
            stage: t,
            prime,
            h,
            l,
            exponent: kt,
            input: n,
            target: n.clone(),
            z,
            y2: None,
            pair_seed: None,
        },
        opts,
    )
}

/// Step for exponent `k_u` at the fixed base prime `ϖ_u`.
pub fn construct_step_mid(
    m: &Natural,
    u: usize,
    k: &ExponentTuple,
    base: &BasePrimes,
    policy: &BoundPolicy,
    opts: &StepOptions,
) -> Result<StepWitness, ResidueError> {
    let t = k.len();
    if u == 0 || u >= t || base.len() + 1 != t {
        return Err(ResidueError::Precondition {
            stage: u,
            reason: format!("stage {u} is not an intermediate stage of a {t}-tuple"),
        });
    }
    let ku = k.k(u);
    let prime = base.get(u).clone();
    if (m % &prime).is_zero() {
        return Err(ResidueError::Precondition {
            stage: u,
            reason: format!("{prime} divides the residual"),
        });
    }
    if !kth_power_residue(m, ku as u64, &prime)? {
        return Err(ResidueError::Precondition {
            stage: u,
            reason: format!("residual is not a {ku}-th power residue modulo {prime}"),
        });
    }
    if u >= 2 && (m % base.get(u - 1)).is_zero() {
        return Err(ResidueError::Precondition {
            stage: u,
            reason: format!("{} divides the residual", base.get(u - 1)),
        });
    }
    let (h, l) = height(policy, &prime, ku, k.big_k(), m, u as u32 + 1, u)?;
    let z = hensel_root(m, ku, &prime, l, u)?;
    let ctx = StepContext { exponents: k, base, policy };
    shift_search(
        &ctx,
        ShiftProblem {
            kind: StepKind::Mid,
            stage: u,
            prime,
            h,
            l,
            exponent: ku,
            input: m,
            target: m.clone(),
            z,
            y2: None,
            pair_seed: None,
        },
        opts,
    )
}

/// Step removing `k_{t-1}` and `k_t` together at `ϖ_{t-1}`.
pub fn construct_step_pair(
    n: &Natural,
    k: &ExponentTuple,
    base: &BasePrimes,
    policy: &BoundPolicy,
    opts: &StepOptions,
) -> Result<StepWitness, ResidueError> {
    let t = k.len();
    if t < 2 || base.len() + 1 != t {
        return Err(ResidueError::Precondition {
            stage: t.saturating_sub(1),
            reason: "the pair step needs t >= 2 and t - 1 base primes".into(),
        });
    }
    let stage = t - 1;
    let prime = base.get(stage).clone();
    if (n % &prime).is_zero() {
        return Err(ResidueError::Precondition {
            stage,
            reason: format!("{prime} divides n"),
        });
    }
    let (k1, k2) = (k.k(t - 1), k.k(t));
    let (h, l) = height(policy, &prime, k2, k.big_k(), n, t as u32 + 2, stage)?;
    let modulus = prime.pow(l as u32);
    let seeds = weil_solutions(&Natural::one(), &Natural::one(), n, k1, k2, &prime)?;
    if seeds.is_empty() {
        return Err(ResidueError::NoWeilSolution { stage, prime });
    }
    let ctx = StepContext { exponents: k, base, policy };
    let mut last_err = None;
    for (u0, v0) in seeds.into_iter().take(policy.weil_candidates) {
        let (z, w) = if l == 0 {
            (u0.clone(), v0.clone())
        } else {
            let w = &v0 + &modulus;
            let wk = w.pow(k2);
            if wk >= *n {
                continue;
            }
            let rest = n - &wk;
            let lift = hensel_lift_power(&u0, k1 as u64, &rest, &prime, l as u32)?;
            (lift + &modulus, w)
        };
        let wk = w.pow(k2);
        if wk >= *n {
            continue;
        }
        let target = n - &wk;
        let res = shift_search(
            &ctx,
            ShiftProblem {
                kind: StepKind::Pair,
                stage,
                prime: prime.clone(),
                h,
                l,
                exponent: k1,
                input: n,
                target,
                z,
                y2: Some((w, k2)),
                pair_seed: Some((u0, v0)),
            },
            opts,
        );
        match res {
            Ok(w) => return Ok(w),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or(ResidueError::NoWeilSolution { stage, prime }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descent::exponents::ExponentTuple;

    fn nat(n: u64) -> Natural {
        Natural::from(n)
    }

    fn big(s: &str) -> Natural {
        s.parse().unwrap()
    }

    #[test]
    fn gadget_residues_make_residual_a_unit() {
        for q in [2u64, 3, 5, 7, 11] {
            for t in 0..q {
                for k in [2u32, 3, 4, 5, 6] {
                    let rs = gadget_residues(&nat(t), k, q);
                    for r in rs {
                        let d = (t + q * 10 - pow_small(r, k, q)) % q;
                        if q == 3 {
                            assert_ne!(d, 2);
                        } else {
                            assert_ne!(d, 0);
                        }
                    }
                }
            }
        }
        // residual ≡ 1 (mod 3) is preferred when reachable
        assert_eq!(gadget_residues(&nat(2), 2, 3), vec![1, 2]);
        assert_eq!(gadget_residues(&nat(0), 2, 3), vec![0]);
        assert_eq!(gadget_residues(&nat(0), 3, 3), vec![2]);
    }

    #[test]
    fn top_step_single_exponent_with_positive_height() {
        let k = ExponentTuple::new(&[3]).unwrap();
        let base = BasePrimes::default();
        let policy = BoundPolicy::desk(false);
        let n = big("10000000000000000000000000000000000000651");
        let w = construct_step_top(&n, &k, &base, &policy, &StepOptions::default()).unwrap();
        assert!(w.h >= 1);
        assert_eq!(w.kind, StepKind::Top);
        let ctx = StepContext { exponents: &k, base: &base, policy: &policy };
        check_step(&ctx, &w).unwrap();
        assert_eq!((&n - w.y.pow(3)) % w.modulus(), nat(0));
        assert_eq!(&w.y % w.modulus(), w.z);
    }

    #[test]
    fn top_then_mid_for_two_exponents() {
        let k = ExponentTuple::new(&[6, 6]).unwrap();
        let base = BasePrimes::new(vec![nat(11)]);
        let policy = BoundPolicy::desk(true);
        let ctx = StepContext { exponents: &k, base: &base, policy: &policy };
        // modulo 7 every unit sixth power is 1, so 11 is the useful base prime
        let mut done = 0;
        for n in (1_000_000_000_003u64..).step_by(2).filter(|n| n % 11 != 0).take(30) {
            let n = nat(n);
            let Ok(top) = construct_step_top(&n, &k, &base, &policy, &StepOptions::default()) else {
                continue;
            };
            check_step(&ctx, &top).unwrap();
            let Ok(mid) = construct_step_mid(&top.quotient, 1, &k, &base, &policy, &StepOptions::default()) else {
                continue;
            };
            check_step(&ctx, &mid).unwrap();
            assert!(mid.weil.is_none());
            done += 1;
        }
        assert!(done >= 10, "only {done} complete descents");
    }

    #[test]
    fn pair_step_for_even_tuple() {
        let k = ExponentTuple::new(&[4, 4, 4]).unwrap();
        let base = BasePrimes::new(vec![nat(7), nat(11)]);
        let policy = BoundPolicy::desk(false);
        let ctx = StepContext { exponents: &k, base: &base, policy: &policy };
        let mut ok = 0;
        for n in (10_000_000_000_001u64..).step_by(2).filter(|n| n % 11 != 0).take(20) {
            if let Ok(w) = construct_step_pair(&nat(n), &k, &base, &policy, &StepOptions::default()) {
                check_step(&ctx, &w).unwrap();
                assert_eq!(w.stage, 2);
                assert!(w.weil.is_some());
                ok += 1;
            }
        }
        assert!(ok >= 10);
    }

    #[test]
    fn retry_rank_gives_a_different_shift() {
        let k = ExponentTuple::new(&[5]).unwrap();
        let base = BasePrimes::default();
        let policy = BoundPolicy::desk(false);
        let n = nat(123_456_789_012_345_679);
        let a = construct_step_top(&n, &k, &base, &policy, &StepOptions::default()).unwrap();
        let b = construct_step_top(&n, &k, &base, &policy, &StepOptions { g_rank: 1, ..Default::default() }).unwrap();
        assert!(b.g > a.g);
    }

    #[test]
    fn mid_precondition_is_enforced() {
        let k = ExponentTuple::new(&[6, 6]).unwrap();
        let base = BasePrimes::new(vec![nat(7)]);
        let policy = BoundPolicy::desk(true);
        // 3 is not a sixth power residue modulo 7
        let m = nat(10_000_000_003 * 7 + 3);
        let err = construct_step_mid(&m, 1, &k, &base, &policy, &StepOptions::default()).unwrap_err();
        assert!(matches!(err, ResidueError::Precondition { stage: 1, .. }));
    }
}
