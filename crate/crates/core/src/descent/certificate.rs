use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::endgame::EndgameData;
use super::engine::DescentState;
use super::exponents::{ExponentTuple, Mode, Route};
use crate::ntheory::Natural;
use crate::residue::{BasePrimes, BoundPolicy, StepWitness};
use crate::ternary::TernarySolution;

pub const FORMAT_VERSION: u32 = 1;

/// Complete witness chain for
/// `x1² + x2² + x3³ + x4³ + Σ y_j^{k_j} = n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepresentationCertificate {
    pub format_version: u32,
    #[serde(with = "crate::codec::dec")]
    pub n: Natural,
    pub exponents: ExponentTuple,
    pub route: Route,
    pub mode: Mode,
    pub policy: BoundPolicy,
    pub seed: u64,
    pub base: BasePrimes,
    pub steps: Vec<StepWitness>,
    /// Residual after the last step.
    #[serde(with = "crate::codec::dec")]
    pub residual: Natural,
    pub endgame: EndgameData,
    /// `(v, w, z)` with `v² + w² + 6pz² = N`.
    pub ternary: TernarySolution,
    #[serde(with = "crate::codec::dec_vec")]
    pub x: Vec<Natural>,
    /// In the caller's exponent order.
    #[serde(with = "crate::codec::dec_vec")]
    pub y: Vec<Natural>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssemblyError {
    #[error("z = {z} is not below λp = {lambda_p}")]
    ZTooLarge { z: Natural, lambda_p: Natural },
    #[error("ternary solution has a zero component")]
    ZeroComponent,
    #[error("ternary solution does not satisfy v² + w² + 6pz² + 2λ²p³ = m")]
    TernaryMismatch,
    #[error("a scaling exponent l/k is not integral")]
    NonIntegralScaling,
    #[error("assembled sum {got} differs from n = {n}")]
    SumMismatch { got: Natural, n: Natural },
}

impl RepresentationCertificate {
    /// `x1² + x2² + x3³ + x4³ + Σ y_j^{k_j}` with the caller's exponent order.
    pub fn total(&self) -> Option<Natural> {
        if self.x.len() != 4 || self.y.len() != self.exponents.original().len() {
            return None;
        }
        let x = &self.x;
        let mut s = &x[0] * &x[0] + &x[1] * &x[1] + x[2].pow(3) + x[3].pow(3);
        for (y, &k) in self.y.iter().zip(self.exponents.original()) {
            s += y.pow(k);
        }
        Some(s)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("certificate serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Combine a finished descent, its endgame and a ternary solution into a
/// certificate, checking the final sum.
pub fn reassemble(
    state: &DescentState,
    end: &EndgameData,
    tern: &TernarySolution,
    mode: Mode,
    policy: &BoundPolicy,
    seed: u64,
) -> Result<RepresentationCertificate, AssemblyError> {
    let (v, w, z) = (&tern.x, &tern.y, &tern.z);
    if v.is_zero() || w.is_zero() || z.is_zero() {
        return Err(AssemblyError::ZeroComponent);
    }
    let p = &end.p;
    let lambda = &end.lambda;
    let m = v * v + w * w + p * 6u32 * z * z + lambda * lambda * 2u32 * p * p * p;
    if m != state.residual {
        return Err(AssemblyError::TernaryMismatch);
    }
    let lambda_p = lambda * p;
    if z >= &lambda_p {
        return Err(AssemblyError::ZTooLarge {
            z: z.clone(),
            lambda_p,
        });
    }
    let root = state.upsilon_sqrt();
    let x = vec![&root * v, &root * w, &lambda_p + z, &lambda_p - z];

    let finals = state.final_powers().ok_or(AssemblyError::NonIntegralScaling)?;
    let mut working = vec![Natural::zero(); state.exponents.len()];
    for f in finals {
        working[f.position - 1] = f.y;
    }
    let y = state.exponents.to_original_order(&working);

    let cert = RepresentationCertificate {
        format_version: FORMAT_VERSION,
        n: state.n.clone(),
        exponents: state.exponents.clone(),
        route: state.route,
        mode,
        policy: policy.clone(),
        seed,
        base: state.base.clone(),
        steps: state.steps.clone(),
        residual: state.residual.clone(),
        endgame: end.clone(),
        ternary: tern.clone(),
        x,
        y,
    };
    match cert.total() {
        Some(got) if got == state.n => Ok(cert),
        got => Err(AssemblyError::SumMismatch {
            got: got.unwrap_or_default(),
            n: state.n.clone(),
        }),
    }
}
