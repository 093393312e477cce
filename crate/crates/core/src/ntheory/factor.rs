use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::primes::{mul_mod_u64, trial_primes};
use super::{is_prime, Natural, NtError};

/// Work cap for Pollard rho, counted in polynomial iterations across the
/// whole factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorBudget {
    pub rho_iterations: u64,
}

impl Default for FactorBudget {
    fn default() -> Self {
        FactorBudget {
            rho_iterations: 1 << 32,
        }
    }
}

/// Prime factorization with strictly increasing primes.
///
/// `cofactor` is set only when the factorization is partial, i.e. when it is
/// carried inside [`NtError::BudgetExceeded`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factorization {
    pub factors: Vec<(Natural, u32)>,
    pub cofactor: Option<Natural>,
}

impl Factorization {
    pub fn is_complete(&self) -> bool {
        self.cofactor.is_none()
    }

    /// Product of all listed prime powers times the cofactor, if any.
    pub fn value(&self) -> Natural {
        let mut v = self
            .factors
            .iter()
            .fold(Natural::one(), |acc, (p, e)| acc * p.pow(*e));
        if let Some(c) = &self.cofactor {
            v *= c;
        }
        v
    }

    fn from_map(map: BTreeMap<Natural, u32>, cofactor: Option<Natural>) -> Self {
        Factorization {
            factors: map.into_iter().collect(),
            cofactor,
        }
    }
}

/// Factor `n` completely under the default rho budget.
pub fn factorize(n: &Natural) -> Result<Factorization, NtError> {
    factorize_with(n, FactorBudget::default())
}

/// Factor `n` completely: trial division, then Brent's variant of Pollard rho
/// with the fixed seed schedule c = 1, 2, 3, ...
pub fn factorize_with(n: &Natural, budget: FactorBudget) -> Result<Factorization, NtError> {
    if n.is_zero() {
        return Err(NtError::Precondition("cannot factor 0".into()));
    }
    let mut found: BTreeMap<Natural, u32> = BTreeMap::new();
    let mut rest = n.clone();
    for &p in trial_primes() {
        let pb = BigUint::from(p);
        if &pb * &pb > rest {
            break;
        }
        let mut e = 0;
        loop {
            let (q, r) = rest.div_rem(&pb);
            if !r.is_zero() {
                break;
            }
            rest = q;
            e += 1;
        }
        if e > 0 {
            found.insert(pb, e);
        }
    }

    let mut remaining = budget.rho_iterations;
    let mut stack = vec![rest];
    let mut unresolved: Vec<Natural> = Vec::new();
    while let Some(m) = stack.pop() {
        if m.is_one() {
            continue;
        }
        if is_prime(&m) {
            *found.entry(m).or_insert(0) += 1;
            continue;
        }
        if let Some(r) = exact_square_root(&m) {
            stack.push(r.clone());
            stack.push(r);
            continue;
        }
        match split(&m, &mut remaining) {
            Some(d) => {
                let other = &m / &d;
                stack.push(d);
                stack.push(other);
            }
            None => unresolved.push(m),
        }
    }

    if unresolved.is_empty() {
        Ok(Factorization::from_map(found, None))
    } else {
        let cofactor = unresolved.into_iter().fold(Natural::one(), |a, b| a * b);
        Err(NtError::BudgetExceeded {
            budget: budget.rho_iterations,
            partial: Factorization::from_map(found, Some(cofactor)),
        })
    }
}

fn exact_square_root(n: &Natural) -> Option<Natural> {
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}

/// Find a nontrivial divisor of the composite `n`, or `None` once the budget
/// runs out.
fn split(n: &Natural, remaining: &mut u64) -> Option<Natural> {
    if n.is_even() {
        return Some(Natural::from(2u32));
    }
    let small = n.to_u64();
    let mut c = 1u64;
    while *remaining > 0 {
        let d = match small {
            Some(s) => rho_u64(s, c, remaining).map(Natural::from),
            None => rho_big(n, &Natural::from(c), remaining),
        };
        if d.is_some() {
            return d;
        }
        c += 1;
    }
    None
}

const BATCH: u64 = 128;

fn rho_u64(n: u64, c: u64, remaining: &mut u64) -> Option<u64> {
    let f = |x: u64| ((mul_mod_u64(x, x, n) as u128 + c as u128) % n as u128) as u64;
    let diff = |a: u64, b: u64| a.abs_diff(b);
    let mut y = 2u64;
    let mut x = y;
    let mut ys = y;
    let mut q = 1u64;
    let mut g = 1u64;
    let mut r = 1u64;
    while g == 1 {
        x = y;
        for _ in 0..r {
            y = f(y);
        }
        let mut k = 0;
        while k < r && g == 1 {
            ys = y;
            let steps = BATCH.min(r - k);
            if *remaining < steps {
                *remaining = 0;
                return None;
            }
            *remaining -= steps;
            for _ in 0..steps {
                y = f(y);
                q = mul_mod_u64(q, diff(x, y), n);
            }
            g = q.gcd(&n);
            k += BATCH;
        }
        r *= 2;
    }
    if g == n {
        loop {
            if *remaining == 0 {
                return None;
            }
            *remaining -= 1;
            ys = f(ys);
            g = diff(x, ys).gcd(&n);
            if g > 1 {
                break;
            }
        }
    }
    (g != n && g != 1).then_some(g)
}

fn rho_big(n: &Natural, c: &Natural, remaining: &mut u64) -> Option<Natural> {
    let f = |x: &Natural| (x * x + c) % n;
    let diff = |a: &Natural, b: &Natural| if a > b { a - b } else { b - a };
    let mut y = Natural::from(2u32);
    let mut x = y.clone();
    let mut ys = y.clone();
    let mut q = Natural::one();
    let mut g = Natural::one();
    let mut r = 1u64;
    while g.is_one() {
        x = y.clone();
        for _ in 0..r {
            y = f(&y);
        }
        let mut k = 0;
        while k < r && g.is_one() {
            ys = y.clone();
            let steps = BATCH.min(r - k);
            if *remaining < steps {
                *remaining = 0;
                return None;
            }
            *remaining -= steps;
            for _ in 0..steps {
                y = f(&y);
                q = (&q * diff(&x, &y)) % n;
            }
            g = q.gcd(n);
            k += BATCH;
        }
        r *= 2;
    }
    if &g == n {
        loop {
            if *remaining == 0 {
                return None;
            }
            *remaining -= 1;
            ys = f(&ys);
            g = diff(&x, &ys).gcd(n);
            if !g.is_one() {
                break;
            }
        }
    }
    (&g != n && !g.is_one()).then_some(g)
}

/// Split `n = t * m^2` with `t` squarefree, i.e. `m^2` is the largest square
/// divisor of `n`.
pub fn square_split(n: &Natural) -> Result<(Natural, Natural), NtError> {
    let f = factorize(n)?;
    let mut t = Natural::one();
    let mut m = Natural::one();
    for (p, e) in &f.factors {
        if e % 2 == 1 {
            t *= p;
        }
        m *= p.pow(e / 2);
    }
    Ok((t, m))
}
