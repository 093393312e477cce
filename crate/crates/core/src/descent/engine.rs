use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::exponents::{ExponentTuple, Route};
use crate::ntheory::{kth_power_residue, Natural};
use crate::residue::{
    construct_step_mid, construct_step_pair, construct_step_top, BasePrimes, BoundPolicy,
    ResidueError, StepOptions, StepWitness,
};

/// Residual and accumulated steps after consuming stages `t, …, stage + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentState {
    #[serde(with = "crate::codec::dec")]
    pub n: Natural,
    pub exponents: ExponentTuple,
    pub route: Route,
    pub base: BasePrimes,
    pub stage: usize,
    #[serde(with = "crate::codec::dec")]
    pub residual: Natural,
    pub steps: Vec<StepWitness>,
}

/// `y^{final}` for working position `position`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalPower {
    pub position: usize,
    pub exponent: u32,
    pub y: Natural,
}

impl DescentState {
    pub fn start(n: Natural, exponents: ExponentTuple, route: Route, base: BasePrimes) -> Self {
        let stage = exponents.len();
        DescentState {
            residual: n.clone(),
            n,
            exponents,
            route,
            base,
            stage,
            steps: Vec::new(),
        }
    }

    /// `Υ_r` as `(prime, exponent)` pairs, skipping steps with `l = 0`.
    pub fn upsilon_factors(&self) -> Vec<(Natural, u64)> {
        self.steps
            .iter()
            .filter(|s| s.l > 0)
            .map(|s| (s.prime.clone(), s.l))
            .collect()
    }

    pub fn upsilon(&self) -> Natural {
        self.steps.iter().fold(Natural::one(), |acc, s| acc * s.modulus())
    }

    /// `∏ ϖ^{l/2}`; every `l = 6Kh` is even.
    pub fn upsilon_sqrt(&self) -> Natural {
        self.steps
            .iter()
            .fold(Natural::one(), |acc, s| acc * s.prime.pow((s.l / 2) as u32))
    }

    /// `γ_r = ∏_{r < j <= t} (1 - 1/k_j)` for `r = t, t-1, …, 0`.
    pub fn gamma_ladder(&self) -> Vec<BigRational> {
        let t = self.exponents.len();
        let mut out = vec![BigRational::one()];
        let mut acc = BigRational::one();
        for j in (1..=t).rev() {
            let k = BigInt::from(self.exponents.k(j));
            acc *= BigRational::new(&k - 1, k);
            out.push(acc.clone());
        }
        out
    }

    /// Every consumed `y`, scaled by the step moduli of all later steps.
    /// `None` if some scaling exponent `l/k` is not integral.
    pub fn final_powers(&self) -> Option<Vec<FinalPower>> {
        let mut out = Vec::new();
        for (i, step) in self.steps.iter().enumerate() {
            for (position, y, k) in step.powers() {
                let mut y = y;
                for earlier in &self.steps[..i] {
                    if earlier.l % k as u64 != 0 {
                        return None;
                    }
                    y *= earlier.prime.pow((earlier.l / k as u64) as u32);
                }
                out.push(FinalPower {
                    position,
                    exponent: k,
                    y,
                });
            }
        }
        Some(out)
    }

    /// `Υ_r m_r + Σ (y^{final})^k`.
    pub fn conserved_total(&self) -> Option<Natural> {
        let powers = self.final_powers()?;
        let tail = powers
            .iter()
            .fold(Natural::zero(), |acc, f| acc + f.y.pow(f.exponent));
        Some(self.upsilon() * &self.residual + tail)
    }

    /// Primes whose powers divide `Υ_r`.
    pub fn consumed_primes(&self) -> Vec<Natural> {
        self.upsilon_factors().into_iter().map(|(p, _)| p).collect()
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let total = self
            .conserved_total()
            .ok_or_else(|| "a scaling exponent l/k is not integral".to_string())?;
        if total != self.n {
            return Err(format!("conservation fails at stage {}: total {total} != n", self.stage));
        }
        if self.upsilon() * &self.residual > self.n {
            return Err("Υ·m exceeds n".into());
        }
        let r = self.stage;
        let ten_omega = self.base.omega(r.min(self.base.len())) * 10u32;
        if !self.residual.gcd(&ten_omega).is_one() {
            return Err(format!("residual shares a factor with 10·Ω_{r}"));
        }
        if &self.residual % 3u32 == Natural::from(2u32) {
            return Err("residual ≡ 2 (mod 3)".into());
        }
        if r >= 1 && r < self.exponents.len() {
            let p = self.base.get(r);
            let ok = kth_power_residue(&self.residual, self.exponents.k(r) as u64, p).unwrap_or(false);
            if !ok {
                return Err(format!("residual is not a {}-th power residue modulo {p}", self.exponents.k(r)));
            }
        }
        for p in self.consumed_primes() {
            if (&self.residual % &p).is_zero() {
                return Err(format!("consumed prime {p} divides the residual"));
            }
        }
        for s in &self.steps {
            if s.prime.is_even() || s.l % 2 != 0 {
                return Err("Υ is not an odd square".into());
            }
        }
        Ok(())
    }

    fn apply(&self, step: StepWitness) -> DescentState {
        // a pair step at t-1 also consumes t, so both kinds land on stage - 1
        let stage = step.stage - 1;
        let mut next = self.clone();
        next.residual = step.quotient.clone();
        next.stage = stage;
        next.steps.push(step);
        next
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DescentError {
    #[error("stage {stage}: {source}")]
    Step {
        stage: usize,
        #[source]
        source: ResidueError,
    },
    #[error("invariant broken after stage {stage}: {detail}")]
    Invariant { stage: usize, detail: String },
    #[error("retry budget of {budget} step constructions exhausted (last failure: {last})")]
    BudgetExhausted { budget: usize, last: String },
    #[error("every complete descent was rejected downstream ({tried} tried): {last}")]
    Rejected { tried: usize, last: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Alternatives tried at one stage before backtracking.
    pub per_stage: usize,
    /// Step constructions allowed in one descent search.
    pub total_steps: usize,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            per_stage: 8,
            total_steps: 96,
        }
    }
}

struct Search<'a, F> {
    policy: &'a BoundPolicy,
    retry: RetryPolicy,
    accept: F,
    constructed: usize,
    accepted_tries: usize,
    last: Option<DescentError>,
}

impl<T, F> Search<'_, F>
where
    F: FnMut(&DescentState) -> Result<T, String>,
{
    fn next_step(&self, state: &DescentState, alt: usize) -> Result<StepWitness, ResidueError> {
        let opts = StepOptions {
            g_rank: if state.steps.is_empty() && state.route == Route::Top { 0 } else { alt },
            avoid: state.consumed_primes(),
            prime_skip: if state.steps.is_empty() { alt } else { 0 },
        };
        let (k, base, policy) = (&state.exponents, &state.base, self.policy);
        if state.steps.is_empty() {
            match state.route {
                Route::Top => construct_step_top(&state.n, k, base, policy, &opts),
                Route::Pair => construct_step_pair(&state.n, k, base, policy, &opts),
            }
        } else {
            construct_step_mid(&state.residual, state.stage, k, base, policy, &opts)
        }
    }

    fn run(&mut self, state: &DescentState) -> Option<T> {
        if state.stage == 0 {
            self.accepted_tries += 1;
            return match (self.accept)(state) {
                Ok(v) => Some(v),
                Err(reason) => {
                    self.last = Some(DescentError::Rejected {
                        tried: self.accepted_tries,
                        last: reason,
                    });
                    None
                }
            };
        }
        for alt in 0..self.retry.per_stage {
            if self.constructed >= self.retry.total_steps {
                return None;
            }
            self.constructed += 1;
            match self.next_step(state, alt) {
                Ok(step) => {
                    let next = state.apply(step);
                    if let Err(detail) = next.check_invariants() {
                        self.last = Some(DescentError::Invariant {
                            stage: state.stage,
                            detail,
                        });
                        return None;
                    }
                    if let Some(v) = self.run(&next) {
                        return Some(v);
                    }
                }
                Err(source) => {
                    let fresh_prime_retry = state.steps.is_empty()
                        && state.route == Route::Top
                        && !matches!(source, ResidueError::CapExhausted { .. });
                    self.last = Some(DescentError::Step {
                        stage: state.stage,
                        source,
                    });
                    // later ranks cannot succeed once a rank fails, but a new
                    // fresh prime might
                    if !fresh_prime_retry {
                        return None;
                    }
                }
            }
        }
        None
    }
}

/// Depth-first search over step alternatives. `accept` sees each complete
/// descent (stage 0) and either takes it or rejects it with a reason, in
/// which case the search backtracks.
pub fn search_descent<T, F>(
    start: &DescentState,
    policy: &BoundPolicy,
    retry: RetryPolicy,
    accept: F,
) -> Result<T, DescentError>
where
    F: FnMut(&DescentState) -> Result<T, String>,
{
    let mut search = Search {
        policy,
        retry,
        accept,
        constructed: 0,
        accepted_tries: 0,
        last: None,
    };
    if let Some(v) = search.run(start) {
        return Ok(v);
    }
    let last = search.last.unwrap_or(DescentError::BudgetExhausted {
        budget: retry.total_steps,
        last: "no step attempted".into(),
    });
    if search.constructed >= retry.total_steps {
        if let DescentError::Invariant { .. } = last {
            return Err(last);
        }
        return Err(DescentError::BudgetExhausted {
            budget: retry.total_steps,
            last: last.to_string(),
        });
    }
    Err(last)
}

/// First complete descent found by [`search_descent`].
pub fn run_descent(
    n: &Natural,
    k: &ExponentTuple,
    route: Route,
    base: &BasePrimes,
    policy: &BoundPolicy,
    retry: RetryPolicy,
) -> Result<DescentState, DescentError> {
    let start = DescentState::start(n.clone(), k.clone(), route, base.clone());
    search_descent(&start, policy, retry, |s| Ok(s.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residue::StepKind;

    fn big(s: &str) -> Natural {
        s.parse().unwrap()
    }

    #[test]
    fn single_exponent_descent_has_one_step() {
        let k = ExponentTuple::new(&[4]).unwrap();
        let policy = BoundPolicy::desk(true);
        let n = big("1000000000000000000000000000000000000000000000007");
        let s = run_descent(&n, &k, Route::Top, &BasePrimes::default(), &policy, RetryPolicy::default()).unwrap();
        assert_eq!(s.stage, 0);
        assert_eq!(s.steps.len(), 1);
        assert!(s.steps[0].h >= 1);
        s.check_invariants().unwrap();
        assert_eq!(s.conserved_total().unwrap(), n);
        let root = s.upsilon_sqrt();
        assert_eq!(&root * &root, s.upsilon());
    }

    #[test]
    fn two_exponent_descent_conserves() {
        let k = ExponentTuple::new(&[6, 6]).unwrap();
        let policy = BoundPolicy::desk(true);
        for n in [1_000_000_000_039u64, 12_345_678_901_237, 9_999_999_999_999_937] {
            let n = Natural::from(n);
            // sixth powers of units mod 7, 11 and 13 are too sparse for a
            // two-term solution; 23 - 1 = 2·11 leaves all squares available
            let base = BasePrimes::new(vec![Natural::from(23u32)]);
            let s = run_descent(&n, &k, Route::Top, &base, &policy, RetryPolicy::default()).unwrap();
            assert_eq!(s.steps.len(), 2);
            assert_eq!(s.conserved_total().unwrap(), n);
            s.check_invariants().unwrap();
            assert_eq!(s.gamma_ladder().last().unwrap(), &BigRational::new(25.into(), 36.into()));
        }
    }

    #[test]
    fn pair_route_consumes_two_exponents_first() {
        let k = ExponentTuple::new(&[4, 4, 4]).unwrap();
        let policy = BoundPolicy::desk(false);
        let n = Natural::from(31_415_926_535_897_933u64);
        let base = BasePrimes::new(vec![Natural::from(11u32), Natural::from(23u32)]);
        let s = run_descent(&n, &k, Route::Pair, &base, &policy, RetryPolicy::default()).unwrap();
        assert_eq!(s.steps[0].kind, StepKind::Pair);
        assert_eq!(s.steps.len(), 2);
        assert_eq!(s.final_powers().unwrap().len(), 3);
        assert_eq!(s.conserved_total().unwrap(), n);
    }

    #[test]
    fn rejection_backtracks_to_other_choices() {
        let k = ExponentTuple::new(&[5]).unwrap();
        let policy = BoundPolicy::desk(true);
        let n = Natural::from(123_456_789_012_345_679u64);
        let start = DescentState::start(n, k, Route::Top, BasePrimes::default());
        let mut seen = Vec::new();
        let r: Result<(), _> = search_descent(&start, &policy, RetryPolicy::default(), |s| {
            seen.push(s.steps[0].prime.clone());
            Err("rejected".into())
        });
        assert!(matches!(r, Err(DescentError::Rejected { .. }) | Err(DescentError::BudgetExhausted { .. })));
        assert_eq!(seen.len(), RetryPolicy::default().per_stage);
        seen.dedup();
        assert_eq!(seen.len(), RetryPolicy::default().per_stage);
    }
}
