use std::fmt;

use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::policy::ratio_to_f64;
use super::weil::is_weil_solution;
use super::{BasePrimes, BoundPolicy, PolicyScale, StepKind, StepWitness};
use crate::descent::exponents::ExponentTuple;
use crate::ntheory::{is_prime, kth_power_residue, ln_big, mod_inverse, mod_pow, Natural};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepCondition {
    Structure,
    A,
    B,
    C,
    D,
    Divisibility,
}

impl fmt::Display for StepCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepCondition::Structure => "structure",
            StepCondition::A => "condition (a)",
            StepCondition::B => "condition (b)",
            StepCondition::C => "condition (c)",
            StepCondition::D => "condition (d)",
            StepCondition::Divisibility => "divisibility",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepViolation {
    pub condition: StepCondition,
    pub detail: String,
}

impl fmt::Display for StepViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.condition, self.detail)
    }
}

impl std::error::Error for StepViolation {}

/// Everything a step is checked against besides the witness itself.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub exponents: &'a ExponentTuple,
    pub base: &'a BasePrimes,
    pub policy: &'a BoundPolicy,
}

fn fail<T>(condition: StepCondition, detail: impl Into<String>) -> Result<T, StepViolation> {
    Err(StepViolation {
        condition,
        detail: detail.into(),
    })
}

fn ensure(ok: bool, condition: StepCondition, detail: impl FnOnce() -> String) -> Result<(), StepViolation> {
    if ok {
        Ok(())
    } else {
        fail(condition, detail())
    }
}

fn divides(p: &Natural, x: &Natural) -> bool {
    (x % p).is_zero()
}

/// Value the single power `y^k` is taken from: the step input, less `y2^k2`
/// for the pair kind. `None` if that difference is not positive.
pub(crate) fn gadget_target(w: &StepWitness) -> Option<Natural> {
    match (&w.y2, w.exponent2) {
        (Some(y2), Some(k2)) if w.kind == StepKind::Pair => {
            let s = y2.pow(k2);
            (w.input > s).then(|| &w.input - s)
        }
        _ => Some(w.input.clone()),
    }
}

/// Stage index used in the log-power factors of condition (b).
fn log_stage(ctx: &StepContext<'_>, w: &StepWitness) -> usize {
    match w.kind {
        StepKind::Pair => ctx.exponents.len(),
        _ => w.stage,
    }
}

/// Exponent whose root sets the size window of condition (b).
fn window_exponent(ctx: &StepContext<'_>, w: &StepWitness) -> u32 {
    match w.kind {
        StepKind::Pair => ctx.exponents.k(ctx.exponents.len()),
        _ => w.exponent,
    }
}

fn check_structure(ctx: &StepContext<'_>, w: &StepWitness) -> Result<(), StepViolation> {
    use StepCondition::Structure as S;
    let t = ctx.exponents.len();
    let big_k = ctx.exponents.big_k();
    match w.kind {
        StepKind::Top => ensure(w.stage == t, S, || format!("top step at stage {} of {t}", w.stage))?,
        StepKind::Mid => ensure(w.stage >= 1 && w.stage < t, S, || {
            format!("intermediate step at stage {} of {t}", w.stage)
        })?,
        StepKind::Pair => ensure(t >= 2 && w.stage + 1 == t, S, || {
            format!("pair step at stage {} of {t}", w.stage)
        })?,
    }
    ensure(w.exponent == ctx.exponents.k(w.stage), S, || {
        format!("exponent {} but k_{} = {}", w.exponent, w.stage, ctx.exponents.k(w.stage))
    })?;
    match w.kind {
        StepKind::Pair => {
            ensure(w.exponent2 == Some(ctx.exponents.k(t)) && w.y2.is_some(), S, || {
                format!("pair step needs y2 with exponent k_{t} = {}", ctx.exponents.k(t))
            })?;
            ensure(w.pair_seed.is_some(), S, || "pair step without a seed solution".into())?;
        }
        _ => ensure(w.y2.is_none() && w.exponent2.is_none() && w.pair_seed.is_none(), S, || {
            "single step carries pair fields".into()
        })?,
    }
    if w.kind != StepKind::Top {
        ensure(ctx.base.len() + 1 == t, S, || "base prime count does not match the tuple".into())?;
        ensure(&w.prime == ctx.base.get(w.stage), S, || {
            format!("step prime {} differs from base prime {}", w.prime, ctx.base.get(w.stage))
        })?;
    }
    ensure(Some(w.l) == big_k.checked_mul(6).and_then(|v| v.checked_mul(w.h)), S, || {
        format!("l = {} is not 6Kh = 6·{big_k}·{}", w.l, w.h)
    })?;
    ensure(w.l <= u32::MAX as u64, S, || format!("l = {} out of range", w.l))?;
    ensure(!w.y.is_zero() && w.y2.as_ref().is_none_or(|v| !v.is_zero()), S, || "y must be positive".into())?;
    ensure(!w.g.is_zero(), S, || "CRT shift g must be positive".into())?;
    Ok(())
}

fn check_a(ctx: &StepContext<'_>, w: &StepWitness) -> Result<(), StepViolation> {
    use StepCondition::A;
    let t = ctx.exponents.len();
    let modulus = w.modulus();
    let p = &w.prime;
    ensure(is_prime(p) && p != &Natural::from(2u32), A, || format!("{p} is not an odd prime"))?;
    ensure(!divides(p, &Natural::from(w.exponent)), A, || format!("{p} divides k = {}", w.exponent))?;
    match w.kind {
        StepKind::Top => {
            let d = Natural::from(30u32) * &w.input * ctx.base.omega(t - 1);
            ensure(d.gcd(p).is_one(), A, || format!("gcd({p}, 30·n·Ω_{}) > 1", t - 1))?;
        }
        StepKind::Mid => {
            ensure(!divides(p, &w.input), A, || format!("{p} divides the input"))?;
            let residue = kth_power_residue(&w.input, w.exponent as u64, p).unwrap_or(false);
            ensure(residue, A, || format!("input is not a {}-th power residue modulo {p}", w.exponent))?;
            if w.stage >= 2 {
                let below = ctx.base.get(w.stage - 1);
                ensure(!divides(below, &w.input), A, || format!("{below} divides the input"))?;
            }
        }
        StepKind::Pair => {
            ensure(!divides(p, &w.input), A, || format!("{p} divides the input"))?;
        }
    }
    let lhs = match w.kind {
        StepKind::Pair => {
            let y2 = w.y2.as_ref().unwrap();
            let k2 = w.exponent2.unwrap();
            (mod_pow(&w.y, &Natural::from(w.exponent), &modulus) + mod_pow(y2, &Natural::from(k2), &modulus))
                % &modulus
        }
        _ => mod_pow(&w.y, &Natural::from(w.exponent), &modulus),
    };
    ensure(lhs == &w.input % &modulus, A, || {
        format!("powers are not congruent to the input modulo {p}^{}", w.l)
    })?;
    ensure(w.y == &w.z + &w.g * &modulus, A, || "y differs from z + g·ϖ^l".into())?;
    match w.kind {
        StepKind::Pair => {
            let (u0, v0) = w.pair_seed.as_ref().unwrap();
            let k1 = w.exponent;
            let k2 = w.exponent2.unwrap();
            ensure(
                is_weil_solution(&Natural::one(), &Natural::one(), &w.input, k1, k2, p, (u0, v0)),
                A,
                || format!("seed ({u0}, {v0}) does not solve the two-term congruence modulo {p}"),
            )?;
            let y2 = w.y2.as_ref().unwrap();
            ensure(y2 % p == v0 % p, A, || "y2 is not congruent to the seed v".into())?;
            if w.l >= 1 {
                ensure(&w.y % p == u0 % p, A, || "y is not congruent to the seed u".into())?;
                ensure(&w.z > &modulus && w.z <= &modulus * 2u32, A, || "z outside (ϖ^l, 2ϖ^l]".into())?;
                ensure(y2 > &modulus && y2 <= &(&modulus * 2u32), A, || "y2 outside (ϖ^l, 2ϖ^l]".into())?;
            }
        }
        _ => ensure(!w.z.is_zero() && w.z <= modulus, A, || "z outside [1, ϖ^l]".into())?,
    }
    Ok(())
}

fn check_b(ctx: &StepContext<'_>, w: &StepWitness) -> Result<(), StepViolation> {
    use StepCondition::B;
    let modulus = w.modulus();
    let smallest = match &w.y2 {
        Some(y2) => y2.min(&w.y),
        None => &w.y,
    };
    let largest = match &w.y2 {
        Some(y2) => y2.max(&w.y),
        None => &w.y,
    };
    ensure(&modulus <= smallest, B, || format!("{}^{} exceeds min y", w.prime, w.l))?;
    match ctx.policy.scale {
        PolicyScale::DeskScale => {
            let t = ctx.exponents.len() as u64;
            let consumed = w.consumed() * (4 * t);
            ensure(consumed <= w.input, B, || {
                format!("4t times the removed powers exceeds the input at stage {}", w.stage)
            })
        }
        PolicyScale::PaperFaithful => {
            ensure(w.h >= 1, B, || "paper scale needs h >= 1".into())?;
            let ln_size = ln_big(&w.input);
            let ln_ln = ln_size.ln();
            let s = log_stage(ctx, w) as f64;
            let k = window_exponent(ctx, w) as f64;
            let big_k = ctx.exponents.big_k() as f64;
            let centre = ratio_to_f64(&ctx.policy.omega) / k * ln_size;
            let lower = centre - 20.0 * s * big_k * ln_ln;
            let upper = centre - s * ln_ln;
            let ln_mod = w.l as f64 * ln_big(&w.prime);
            let slack = 1e-9 * ln_size.max(1.0);
            ensure(lower <= ln_mod + slack, B, || format!("{}^{} below the lower window", w.prime, w.l))?;
            ensure(ln_big(largest) <= upper + slack, B, || "max y above the upper window".into())
        }
    }
}

fn check_c(ctx: &StepContext<'_>, w: &StepWitness) -> Result<(), StepViolation> {
    use StepCondition::C;
    let consumed = w.consumed();
    ensure(w.input > consumed, C, || "removed powers exceed the input".into())?;
    let residual = &w.input - consumed;
    let ten_omega = ctx.base.omega(w.stage - 1) * 10u32;
    ensure(residual.gcd(&ten_omega).is_one(), C, || {
        format!("residual shares a factor with 10·Ω_{}", w.stage - 1)
    })?;
    ensure(&residual % 3u32 != Natural::from(2u32), C, || "residual ≡ 2 (mod 3)".into())
}

fn check_d(ctx: &StepContext<'_>, w: &StepWitness) -> Result<(), StepViolation> {
    use StepCondition::D;
    if w.stage < 2 {
        return ensure(w.weil.is_none(), D, || "bottom stage carries a two-term solution".into());
    }
    let q = ctx.base.get(w.stage - 1);
    let k_below = ctx.exponents.k(w.stage - 1);
    ensure(!divides(q, &w.quotient), D, || format!("{q} divides the next residual"))?;
    let residue = kth_power_residue(&w.quotient, k_below as u64, q).unwrap_or(false);
    ensure(residue, D, || format!("next residual is not a {k_below}-th power residue modulo {q}"))?;
    let Some((ww, vv)) = &w.weil else {
        return fail(D, "missing two-term solution");
    };
    let Some(target) = gadget_target(w) else {
        return fail(D, "pair input too small");
    };
    let Some(c2) = mod_inverse(&(w.modulus() % q), q) else {
        return fail(D, format!("{q} divides the step modulus"));
    };
    let scaled = (&c2 * &target) % q;
    ensure(
        is_weil_solution(&Natural::one(), &c2, &scaled, k_below, w.exponent, q, (ww, vv)),
        D,
        || format!("({ww}, {vv}) does not solve the two-term congruence modulo {q}"),
    )?;
    ensure(&w.y % q == vv % q, D, || format!("y is not congruent to v modulo {q}"))
}

fn check_divisibility(w: &StepWitness) -> Result<(), StepViolation> {
    use StepCondition::Divisibility as V;
    let consumed = w.consumed();
    ensure(w.input > consumed, V, || "removed powers exceed the input".into())?;
    ensure(!w.quotient.is_zero(), V, || "zero quotient".into())?;
    ensure(&w.quotient * w.modulus() == &w.input - consumed, V, || {
        format!("quotient times {}^{} differs from the residual", w.prime, w.l)
    })
}

/// Re-derive every condition of a step from its recorded fields.
pub fn check_step(ctx: &StepContext<'_>, w: &StepWitness) -> Result<(), StepViolation> {
    check_structure(ctx, w)?;
    check_a(ctx, w)?;
    check_b(ctx, w)?;
    check_c(ctx, w)?;
    check_d(ctx, w)?;
    check_divisibility(w)
}
