use std::fmt;

use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::certificate::{RepresentationCertificate, FORMAT_VERSION};
use super::endgame::EndgameData;
use super::engine::DescentState;
use super::exponents::{check_feasibility, ExponentTuple as Exponents, Route};
use crate::ntheory::{is_prime, valuation, Natural};
use crate::residue::{check_step, StepCondition, StepContext, StepKind};
use crate::ternary::check_mod16;

/// Checks in the order the verifier runs them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckId {
    FormatVersion,
    ExponentTuple,
    PolicyParameters,
    FinalSum,
    Positivity,
    BasePrimes,
    StepPrimality,
    StepChain,
    StepStructure,
    ConditionA,
    ConditionB,
    ConditionC,
    ConditionD,
    Divisibility,
    Conservation,
    LambdaSquare,
    EndgamePrime,
    EndgameCongruence,
    EndgameWindow,
    FiveAdicValuation,
    TernaryInstance,
    TernaryEquation,
    Assembly,
}

impl CheckId {
    pub const ALL: [CheckId; 23] = [
        CheckId::FormatVersion,
        CheckId::ExponentTuple,
        CheckId::PolicyParameters,
        CheckId::FinalSum,
        CheckId::Positivity,
        CheckId::BasePrimes,
        CheckId::StepPrimality,
        CheckId::StepChain,
        CheckId::StepStructure,
        CheckId::ConditionA,
        CheckId::ConditionB,
        CheckId::ConditionC,
        CheckId::ConditionD,
        CheckId::Divisibility,
        CheckId::Conservation,
        CheckId::LambdaSquare,
        CheckId::EndgamePrime,
        CheckId::EndgameCongruence,
        CheckId::EndgameWindow,
        CheckId::FiveAdicValuation,
        CheckId::TernaryInstance,
        CheckId::TernaryEquation,
        CheckId::Assembly,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CheckId::FormatVersion => "format version",
            CheckId::ExponentTuple => "exponent tuple",
            CheckId::PolicyParameters => "policy parameters",
            CheckId::FinalSum => "final sum",
            CheckId::Positivity => "positivity",
            CheckId::BasePrimes => "base primes",
            CheckId::StepPrimality => "step primality",
            CheckId::StepChain => "step chain",
            CheckId::StepStructure => "step structure",
            CheckId::ConditionA => "condition (a)",
            CheckId::ConditionB => "condition (b)",
            CheckId::ConditionC => "condition (c)",
            CheckId::ConditionD => "condition (d)",
            CheckId::Divisibility => "divisibility",
            CheckId::Conservation => "conservation",
            CheckId::LambdaSquare => "lambda square",
            CheckId::EndgamePrime => "endgame prime",
            CheckId::EndgameCongruence => "endgame congruence",
            CheckId::EndgameWindow => "endgame window",
            CheckId::FiveAdicValuation => "5-adic valuation",
            CheckId::TernaryInstance => "ternary instance",
            CheckId::TernaryEquation => "ternary equation",
            CheckId::Assembly => "assembly",
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<StepCondition> for CheckId {
    fn from(c: StepCondition) -> Self {
        match c {
            StepCondition::Structure => CheckId::StepStructure,
            StepCondition::A => CheckId::ConditionA,
            StepCondition::B => CheckId::ConditionB,
            StepCondition::C => CheckId::ConditionC,
            StepCondition::D => CheckId::ConditionD,
            StepCondition::Divisibility => CheckId::Divisibility,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub check: CheckId,
    /// Index into `steps` when the failure belongs to one step.
    pub step: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(i) => write!(f, "{} (step {i}): {}", self.check, self.detail),
            None => write!(f, "{}: {}", self.check, self.detail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: Vec<CheckId>,
    pub failure: Option<Failure>,
}

impl VerificationReport {
    pub fn is_pass(&self) -> bool {
        self.failure.is_none()
    }
}

type Fault = (CheckId, String);

fn ensure(ok: bool, check: CheckId, detail: impl FnOnce() -> String) -> Result<(), Fault> {
    if ok {
        Ok(())
    } else {
        Err((check, detail()))
    }
}

/// Endgame invariants from `(n, m, data)` alone, tagged with the check they
/// belong to.
pub fn endgame_faults(n: &Natural, m: &Natural, e: &EndgameData) -> Result<(), Fault> {
    use CheckId::*;
    let five = Natural::from(5u32);
    ensure(is_prime(&e.p), EndgamePrime, || format!("{} is not prime", e.p))?;
    ensure(e.h >= 1 && e.h <= u32::MAX as u64 / 4, EndgameCongruence, || format!("height h = {} out of range", e.h))?;
    let q = five.pow(2 * e.h as u32);
    let q5 = &q * 5u32;
    let two_l2 = &e.lambda * &e.lambda * 2u32;
    ensure(e.lambda.gcd(&(m * 30u32)).is_one(), LambdaSquare, || "λ shares a factor with 30m".into())?;
    ensure((&two_l2 * &e.b * &e.b * &e.b) % &q == m % &q, EndgameCongruence, || "2λ²B³ ≢ m (mod 5^{2h})".into())?;
    let class = if e.offset { &e.b + &q } else { e.b.clone() };
    ensure(&e.p % &q5 == class % &q5, EndgameCongruence, || "p is not in the recorded class mod 5^{2h+1}".into())?;
    ensure(&e.p % 3u32 == Natural::one(), EndgameCongruence, || "p ≢ 1 (mod 3)".into())?;
    ensure(!(m % &e.p).is_zero(), EndgameCongruence, || "p divides m".into())?;
    let lp = &e.lambda * &e.p;
    let lp3 = &lp * &lp * &lp;
    ensure(&lp3 * 6u32 > *n && &lp3 * 3u32 < *n, EndgameWindow, || {
        "λp is outside ((n/6)^(1/3), (n/3)^(1/3))".into()
    })?;
    let used = &two_l2 * &e.p * &e.p * &e.p;
    ensure(used < *m, EndgameWindow, || "N = m - 2λ²p³ is not positive".into())?;
    let big_n = m - used;
    ensure(big_n == e.big_n, FiveAdicValuation, || "N differs from m - 2λ²p³".into())?;
    ensure(valuation(&big_n, &five) == 2 * e.h, FiveAdicValuation, || "v5(N) != 2h".into())?;
    ensure(e.m == five.pow(e.h as u32) && &e.t * &e.m * &e.m == big_n, FiveAdicValuation, || {
        "N != T·M² with M = 5^h".into()
    })?;
    ensure(e.t.gcd(&e.m).is_one(), FiveAdicValuation, || "T and M share a factor".into())?;
    ensure(big_n.gcd(&(&e.p * 6u32)).is_one(), TernaryInstance, || "gcd(N, 6p) != 1".into())?;
    ensure(check_mod16(&big_n, &e.p), TernaryInstance, || "N is not x² + y² + 6pz² modulo 16".into())
}

fn stage_plan(k: &Exponents, route: Route) -> Vec<(StepKind, usize)> {
    let t = k.len();
    match route {
        Route::Top => std::iter::once((StepKind::Top, t))
            .chain((1..t).rev().map(|u| (StepKind::Mid, u)))
            .collect(),
        Route::Pair => std::iter::once((StepKind::Pair, t - 1))
            .chain((1..t - 1).rev().map(|u| (StepKind::Mid, u)))
            .collect(),
    }
}

struct Verifier<'a> {
    cert: &'a RepresentationCertificate,
    passed: Vec<CheckId>,
}

impl Verifier<'_> {
    fn pass(&mut self, c: CheckId) {
        if !self.passed.contains(&c) {
            self.passed.push(c);
        }
    }

    fn run(&mut self) -> Result<(), Failure> {
        let lift = |(check, detail): Fault| Failure { check, step: None, detail };
        let cert = self.cert;
        use CheckId::*;

        ensure(cert.format_version == FORMAT_VERSION, FormatVersion, || {
            format!("version {} (expected {FORMAT_VERSION})", cert.format_version)
        })
        .map_err(lift)?;
        self.pass(FormatVersion);

        let k = &cert.exponents;
        super::exponents::ExponentTuple::from_parts(k.original().to_vec(), k.working().to_vec(), k.order().to_vec())
            .map_err(|e| lift((ExponentTuple, e.to_string())))?;
        ensure(k.working().windows(2).all(|w| w[0] <= w[1]) || k.is_relabeled(), ExponentTuple, || {
            "working exponents are neither sorted nor a recorded relabeling".into()
        })
        .map_err(lift)?;
        ensure(cert.route == Route::Top || k.len() >= 2, ExponentTuple, || "pair route needs two exponents".into())
            .map_err(lift)?;
        self.pass(ExponentTuple);

        cert.policy.validate().map_err(|e| lift((PolicyParameters, e)))?;
        let verdict = check_feasibility(k);
        ensure(verdict.verdict(cert.mode).feasible, PolicyParameters, || {
            format!("mode {} is not admitted for {k}", cert.mode)
        })
        .map_err(lift)?;
        ensure(cert.n >= cert.policy.min_n, PolicyParameters, || "n is below the policy minimum".into())
            .map_err(lift)?;
        self.pass(PolicyParameters);

        let total = cert.total().ok_or_else(|| lift((FinalSum, "expected four x values and one y per exponent".into())))?;
        ensure(total == cert.n, FinalSum, || format!("sum is {total}, not n = {}", cert.n)).map_err(lift)?;
        self.pass(FinalSum);

        ensure(cert.x.iter().chain(&cert.y).all(|v| !v.is_zero()), Positivity, || "a component is zero".into())
            .map_err(lift)?;
        self.pass(Positivity);

        cert.base.validate(&cert.n, k.len(), k.big_k()).map_err(|e| lift((BasePrimes, e)))?;
        self.pass(BasePrimes);

        // steps
        let plan = stage_plan(k, cert.route);
        let step_fail = |i: usize, check: CheckId, detail: String| Failure { check, step: Some(i), detail };
        for (i, s) in cert.steps.iter().enumerate() {
            if !is_prime(&s.prime) {
                return Err(step_fail(i, StepPrimality, format!("{} is not prime", s.prime)));
            }
        }
        self.pass(StepPrimality);

        if cert.steps.len() != plan.len() {
            return Err(lift((StepChain, format!("{} steps, expected {}", cert.steps.len(), plan.len()))));
        }
        let mut input = cert.n.clone();
        for (i, (s, (kind, stage))) in cert.steps.iter().zip(&plan).enumerate() {
            if s.kind != *kind || s.stage != *stage {
                return Err(step_fail(i, StepChain, format!("{:?} at stage {}, expected {kind:?} at {stage}", s.kind, s.stage)));
            }
            if s.input != input {
                return Err(step_fail(i, StepChain, "input is not the previous residual".into()));
            }
            input = s.quotient.clone();
        }
        ensure(cert.residual == input, StepChain, || "recorded residual is not the last quotient".into()).map_err(lift)?;
        self.pass(StepChain);

        let ctx = StepContext {
            exponents: k,
            base: &cert.base,
            policy: &cert.policy,
        };
        for (i, s) in cert.steps.iter().enumerate() {
            check_step(&ctx, s).map_err(|v| step_fail(i, v.condition.into(), v.detail))?;
        }
        for c in [StepStructure, ConditionA, ConditionB, ConditionC, ConditionD, Divisibility] {
            self.pass(c);
        }

        let mut state = DescentState::start(cert.n.clone(), k.clone(), cert.route, cert.base.clone());
        for (i, s) in cert.steps.iter().enumerate() {
            state.residual = s.quotient.clone();
            state.stage = s.stage - 1;
            state.steps.push(s.clone());
            state.check_invariants().map_err(|d| step_fail(i, Conservation, d))?;
        }
        self.pass(Conservation);

        let e = &cert.endgame;
        let lambda = state.upsilon();
        ensure(e.lambda == lambda, LambdaSquare, || "λ differs from the product of step moduli".into()).map_err(lift)?;
        let root = lambda.sqrt();
        ensure(&root * &root == lambda && lambda.is_odd(), LambdaSquare, || "λ is not an odd square".into())
            .map_err(lift)?;
        ensure(root == state.upsilon_sqrt(), LambdaSquare, || "√λ differs from ∏ϖ^{l/2}".into()).map_err(lift)?;
        endgame_faults(&cert.n, &cert.residual, e).map_err(lift)?;
        for c in [LambdaSquare, EndgamePrime, EndgameCongruence, EndgameWindow, FiveAdicValuation, TernaryInstance] {
            self.pass(c);
        }

        let t = &cert.ternary;
        ensure(t.value(&e.p) == e.big_n, TernaryEquation, || "v² + w² + 6pz² != N".into()).map_err(lift)?;
        ensure(!t.x.is_zero() && !t.y.is_zero() && !t.z.is_zero(), TernaryEquation, || "zero ternary component".into())
            .map_err(lift)?;
        self.pass(TernaryEquation);

        let lp = &e.lambda * &e.p;
        ensure(t.z < lp, Assembly, || "z is not below λp".into()).map_err(lift)?;
        let want_x = [&root * &t.x, &root * &t.y, &lp + &t.z, &lp - &t.z];
        ensure(cert.x[..] == want_x[..], Assembly, || "x values do not follow from the ternary solution".into())
            .map_err(lift)?;
        let finals = state
            .final_powers()
            .ok_or_else(|| lift((Assembly, "scaling exponent l/k not integral".into())))?;
        let mut working = vec![Natural::zero(); k.len()];
        for f in finals {
            working[f.position - 1] = f.y;
        }
        ensure(k.to_original_order(&working) == cert.y, Assembly, || {
            "y values do not follow from the steps".into()
        })
        .map_err(lift)?;
        self.pass(Assembly);
        Ok(())
    }
}

/// Re-check a certificate from its fields alone. Stops at the first failure.
pub fn verify_certificate(cert: &RepresentationCertificate) -> VerificationReport {
    let mut v = Verifier {
        cert,
        passed: Vec::new(),
    };
    // hostile input may trip arithmetic panics (e.g. absurd exponents)
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| v.run()));
    let failure = match result {
        Ok(r) => r.err(),
        Err(_) => Some(Failure {
            check: CheckId::ALL
                .into_iter()
                .find(|c| !v.passed.contains(c))
                .unwrap_or(CheckId::Assembly),
            step: None,
            detail: "malformed values".into(),
        }),
    };
    VerificationReport {
        passed: v.passed,
        failure,
    }
}
