//! Power-residue prime selection, the two-term congruence solver, and the
//! three step constructions that peel one or two tail powers off a residual
//! while forcing it to be divisible by a large prime power.

mod check;
mod policy;
mod prime_select;
mod steps;
mod weil;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ntheory::{is_prime, Natural, NtError};

pub use check::{check_step, StepCondition, StepContext, StepViolation};
pub use policy::{BoundPolicy, PolicyScale};
pub use prime_select::{find_residue_prime, find_residue_prime_nth, next_admissible_prime};
pub use steps::{construct_step_mid, construct_step_pair, construct_step_top, StepOptions};
pub use weil::{solve_weil, weil_solutions};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResidueError {
    #[error("no prime up to {cap} makes {m} a {k}-th power residue (avoiding divisors of {avoid})")]
    CapExhausted {
        m: Natural,
        k: u64,
        avoid: Natural,
        cap: u64,
    },
    #[error("stage {stage}: the height window at prime {prime} admits no h >= 1")]
    HeightUnderflow { stage: usize, prime: Natural },
    #[error("stage {stage}: precondition failed: {reason}")]
    Precondition { stage: usize, reason: String },
    #[error("stage {stage}: no admissible two-term solution modulo {prime}")]
    NoWeilSolution { stage: usize, prime: Natural },
    #[error("stage {stage}: no CRT shift among the first {scanned} candidates satisfies every condition")]
    ShiftSearchExhausted { stage: usize, scanned: u64 },
    #[error("stage {stage}: constructed witness fails {violation}")]
    Violation {
        stage: usize,
        violation: StepViolation,
    },
    #[error(transparent)]
    Arithmetic(#[from] NtError),
}

/// Fixed primes `ϖ_1, …, ϖ_{t-1}` shared by all stages of one descent.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BasePrimes {
    #[serde(with = "crate::codec::dec_vec")]
    primes: Vec<Natural>,
}

impl BasePrimes {
    pub fn new(primes: Vec<Natural>) -> Self {
        BasePrimes { primes }
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    /// Prime at 1-based index `i`.
    pub fn get(&self, i: usize) -> &Natural {
        &self.primes[i - 1]
    }

    pub fn as_slice(&self) -> &[Natural] {
        &self.primes
    }

    /// `Ω_u = ϖ_1 ⋯ ϖ_u`, with `Ω_0 = 1`.
    pub fn omega(&self, u: usize) -> Natural {
        self.primes[..u].iter().fold(Natural::one(), |acc, p| acc * p)
    }

    /// Replace the prime at 1-based index `i` by the next admissible prime
    /// above every current base prime; the last index must also avoid `n`.
    pub fn bump(&mut self, i: usize, n: &Natural, big_k: u64) {
        let floor = self.primes.iter().max().cloned().unwrap_or_else(Natural::zero);
        let must_avoid_n = i == self.primes.len();
        let mut cand = next_admissible_prime(&floor, big_k);
        while must_avoid_n && (n % &cand).is_zero() {
            cand = next_admissible_prime(&cand, big_k);
        }
        self.primes[i - 1] = cand;
    }

    /// Structural requirements: `t - 1` distinct primes coprime to `30K`,
    /// the last one not dividing `n`.
    pub fn validate(&self, n: &Natural, t: usize, big_k: u64) -> Result<(), String> {
        if self.primes.len() + 1 != t {
            return Err(format!("expected {} base primes, found {}", t - 1, self.primes.len()));
        }
        let thirty_k = Natural::from(30u64 * big_k);
        for (i, p) in self.primes.iter().enumerate() {
            if !is_prime(p) {
                return Err(format!("base prime {p} is not prime"));
            }
            if (&thirty_k % p).is_zero() {
                return Err(format!("base prime {p} divides 30K = {thirty_k}"));
            }
            if self.primes[..i].contains(p) {
                return Err(format!("base prime {p} repeated"));
            }
        }
        if let Some(last) = self.primes.last() {
            if (n % last).is_zero() {
                return Err(format!("last base prime {last} divides n"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    /// Fresh prime for the last exponent.
    Top,
    /// Pre-selected base prime for an intermediate exponent.
    Mid,
    /// Last two exponents together at the last base prime.
    Pair,
}

/// One application of a step construction.
///
/// `input` is the value the step acts on and `quotient` the next residual
/// `prime^{-l} (input - y^k [- y2^k2])`. For the pair kind `y` carries the
/// exponent `k_{t-1}` and `y2` the exponent `k_t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepWitness {
    pub kind: StepKind,
    pub stage: usize,
    #[serde(with = "crate::codec::dec")]
    pub prime: Natural,
    pub h: u64,
    pub l: u64,
    pub exponent: u32,
    #[serde(with = "crate::codec::dec")]
    pub input: Natural,
    #[serde(with = "crate::codec::dec")]
    pub y: Natural,
    #[serde(with = "crate::codec::dec_opt", default)]
    pub y2: Option<Natural>,
    #[serde(default)]
    pub exponent2: Option<u32>,
    /// Hensel root: `y ≡ z (mod prime^l)`, `1 <= z <= prime^l`
    /// (`prime^l < z <= 2 prime^l` for the pair kind).
    #[serde(with = "crate::codec::dec")]
    pub z: Natural,
    #[serde(with = "crate::codec::dec")]
    pub g: Natural,
    /// Solution `(w, v)` modulo the next lower base prime.
    #[serde(with = "crate::codec::dec_pair_opt", default)]
    pub weil: Option<(Natural, Natural)>,
    /// Pair kind: the solution `(u, v)` of `u^{k_{t-1}} + v^{k_t} ≡ n` modulo the step prime.
    #[serde(with = "crate::codec::dec_pair_opt", default)]
    pub pair_seed: Option<(Natural, Natural)>,
    #[serde(with = "crate::codec::dec")]
    pub quotient: Natural,
}

impl StepWitness {
    pub fn modulus(&self) -> Natural {
        self.prime.pow(self.l as u32)
    }

    /// Sum of the powers this step removes.
    pub fn consumed(&self) -> Natural {
        let mut s = self.y.pow(self.exponent);
        if let (Some(y2), Some(k2)) = (&self.y2, self.exponent2) {
            s += y2.pow(k2);
        }
        s
    }

    /// `(y, k)` pairs with their 1-based working positions.
    pub fn powers(&self) -> Vec<(usize, Natural, u32)> {
        match self.kind {
            StepKind::Pair => vec![
                (self.stage, self.y.clone(), self.exponent),
                (
                    self.stage + 1,
                    self.y2.clone().unwrap_or_default(),
                    self.exponent2.unwrap_or(0),
                ),
            ],
            _ => vec![(self.stage, self.y.clone(), self.exponent)],
        }
    }
}
