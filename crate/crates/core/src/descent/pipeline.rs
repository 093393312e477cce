use std::fmt;

use serde::{Deserialize, Serialize};

use super::base::select_base_primes;
use super::certificate::{reassemble, AssemblyError, RepresentationCertificate};
use super::endgame::run_endgame;
use super::engine::{search_descent, DescentError, DescentState, RetryPolicy};
use super::exponents::{arrange_for_route, check_feasibility, gamma_omega_solve, omega_exponents, ExponentTuple, Mode, Route};
use super::verify::{verify_certificate, CheckId, Failure};
use crate::ntheory::Natural;
use crate::residue::{BasePrimes, BoundPolicy, ResidueError};
use crate::ternary::{solve_ternary, TernaryBudget, TernaryInstance, TernaryOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub policy: BoundPolicy,
    pub retry: RetryPolicy,
    pub ternary: TernaryBudget,
    pub seed: u64,
    /// Replacements tried per base prime position.
    pub base_bumps: usize,
    /// Endgame primes tried per complete descent.
    pub endgame_primes: usize,
}

impl PipelineConfig {
    pub fn desk(mode: Mode) -> Self {
        PipelineConfig {
            mode,
            policy: BoundPolicy::desk(mode.assumes_grh()),
            retry: RetryPolicy::default(),
            ternary: TernaryBudget::default(),
            seed: 0,
            base_bumps: 8,
            endgame_primes: 4,
        }
    }
}

/// Set ω so that the scaled product of the route's exponents is `2/3 + ν`.
pub fn scaled_policy(k: &ExponentTuple, mode: Mode, policy: &BoundPolicy) -> Option<BoundPolicy> {
    let route = check_feasibility(k).verdict(mode).route?;
    let arranged = arrange_for_route(k, route);
    let omega = gamma_omega_solve(&omega_exponents(&arranged, route), &policy.nu);
    Some(policy.clone().with_omega(omega))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FailureReason {
    Input { detail: String },
    Construction { stage: Option<usize>, detail: String },
    Budget { detail: String },
    Verification { failure: Failure },
}

impl FailureReason {
    /// Process exit status for the command line.
    pub fn exit_code(&self) -> i32 {
        match self {
            FailureReason::Input { .. } => 2,
            FailureReason::Construction { .. } => 3,
            FailureReason::Budget { .. } => 4,
            FailureReason::Verification { .. } => 5,
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureReason::Input { detail } => write!(f, "input error: {detail}"),
            FailureReason::Construction { stage: Some(s), detail } => {
                write!(f, "construction failed at stage {s}: {detail}")
            }
            FailureReason::Construction { stage: None, detail } => write!(f, "construction failed: {detail}"),
            FailureReason::Budget { detail } => write!(f, "budget exhausted: {detail}"),
            FailureReason::Verification { failure } => write!(f, "verification failed at {failure}"),
        }
    }
}

impl std::error::Error for FailureReason {}

#[derive(Debug, Clone)]
pub struct RepresentOutcome {
    pub certificate: RepresentationCertificate,
    pub log: Vec<String>,
}

enum Accepted {
    Done(Box<RepresentationCertificate>),
    Unsound(Failure),
}

#[derive(Default)]
struct Tally {
    ternary_budget: usize,
    ternary_absent: usize,
}

fn finish(
    state: &DescentState,
    config: &PipelineConfig,
    tally: &mut Tally,
) -> Result<Accepted, String> {
    let mut last = String::from("no endgame attempted");
    for skip in 0..config.endgame_primes.max(1) {
        let end = match run_endgame(state, &state.n, &config.policy, skip) {
            Ok(e) => e,
            Err(e) => return Err(format!("endgame: {e}")),
        };
        let inst = TernaryInstance::new(end.big_n.clone(), end.p.clone());
        let sol = match solve_ternary(&inst, &config.ternary, config.seed) {
            Ok(TernaryOutcome::Found(s)) => s,
            Ok(TernaryOutcome::ProvenAbsent) => {
                tally.ternary_absent += 1;
                last = format!("N = {} has no representation with p = {}", end.big_n, end.p);
                continue;
            }
            Ok(TernaryOutcome::BudgetExhausted { tried, factor_failures }) => {
                tally.ternary_budget += 1;
                last = format!("ternary search gave up after {tried} values of z ({factor_failures} factorizations over budget)");
                continue;
            }
            Err(e) => return Err(format!("ternary: {e}")),
        };
        match reassemble(state, &end, &sol, config.mode, &config.policy, config.seed) {
            Ok(cert) => {
                let report = verify_certificate(&cert);
                return Ok(match report.failure {
                    None => Accepted::Done(Box::new(cert)),
                    Some(f) => Accepted::Unsound(f),
                });
            }
            Err(e @ AssemblyError::ZTooLarge { .. }) => last = e.to_string(),
            Err(e) => {
                return Ok(Accepted::Unsound(Failure {
                    check: CheckId::Assembly,
                    step: None,
                    detail: e.to_string(),
                }))
            }
        }
    }
    Err(last)
}

/// Position of a base prime implicated in a step failure.
fn bump_target(err: &DescentError, base: &BasePrimes) -> Option<usize> {
    let DescentError::Step { source, .. } = err else {
        return None;
    };
    let prime = match source {
        ResidueError::NoWeilSolution { prime, .. } | ResidueError::HeightUnderflow { prime, .. } => prime,
        _ => return None,
    };
    base.as_slice().iter().position(|p| p == prime).map(|i| i + 1)
}

fn describe(cert: &RepresentationCertificate) -> Vec<String> {
    let mut log = Vec::new();
    let base: Vec<String> = cert.base.as_slice().iter().map(|p| p.to_string()).collect();
    log.push(format!("base primes: [{}]", base.join(", ")));
    for s in &cert.steps {
        let mut line = format!(
            "stage {} ({:?}): prime {}, h = {}, y = {}",
            s.stage, s.kind, s.prime, s.h, s.y
        );
        if let Some(y2) = &s.y2 {
            line.push_str(&format!(", y2 = {y2}"));
        }
        line.push_str(&format!(", residual {}", s.quotient));
        log.push(line);
    }
    let e = &cert.endgame;
    log.push(format!("endgame: λ = {}, h = {}, p = {}, N = {}", e.lambda, e.h, e.p, e.big_n));
    let t = &cert.ternary;
    log.push(format!("ternary: {}² + {}² + 6·{}·{}² = N", t.x, t.y, e.p, t.z));
    log
}

fn prepare(n: &Natural, k: &ExponentTuple, config: &PipelineConfig) -> Result<(Route, ExponentTuple), FailureReason> {
    let report = check_feasibility(k);
    let verdict = report.verdict(config.mode);
    let Some(route) = verdict.route else {
        let shown: Vec<String> = verdict.comparisons.iter().map(|c| c.to_string()).collect();
        return Err(FailureReason::Input {
            detail: format!("mode {} does not admit {k}: {}", config.mode, shown.join("; ")),
        });
    };
    config
        .policy
        .validate()
        .map_err(|detail| FailureReason::Input { detail })?;
    if *n < config.policy.min_n {
        return Err(FailureReason::Input {
            detail: format!("n = {n} is below the policy minimum {}", config.policy.min_n),
        });
    }
    Ok((route, arrange_for_route(k, route)))
}

/// Run the descent search, replacing a base prime whenever a step reports
/// that it admits no two-term solution or no height.
fn with_base_retries<T>(
    n: &Natural,
    arranged: &ExponentTuple,
    route: Route,
    config: &PipelineConfig,
    mut accept: impl FnMut(&DescentState) -> Result<T, String>,
) -> Result<T, DescentError> {
    let mut base = select_base_primes(n, arranged, &config.policy);
    let mut bumps = vec![0usize; base.len()];
    loop {
        let start = DescentState::start(n.clone(), arranged.clone(), route, base.clone());
        let err = match search_descent(&start, &config.policy, config.retry, &mut accept) {
            Ok(v) => return Ok(v),
            Err(e) => e,
        };
        match bump_target(&err, &base) {
            Some(i) if bumps[i - 1] < config.base_bumps => {
                bumps[i - 1] += 1;
                base.bump(i, n, arranged.big_k());
            }
            _ => return Err(err),
        }
    }
}

fn descent_failure(err: DescentError, tally: &Tally) -> FailureReason {
    match err {
        DescentError::Step { stage, source } => FailureReason::Construction {
            stage: Some(stage),
            detail: source.to_string(),
        },
        DescentError::Invariant { stage, detail } => FailureReason::Verification {
            failure: Failure {
                check: CheckId::Conservation,
                step: None,
                detail: format!("after stage {stage}: {detail}"),
            },
        },
        e @ DescentError::BudgetExhausted { .. } => FailureReason::Budget { detail: e.to_string() },
        DescentError::Rejected { tried, last } => {
            let detail = format!("{tried} descents rejected; last: {last}");
            if tally.ternary_budget > 0 && tally.ternary_absent == 0 {
                FailureReason::Budget { detail }
            } else {
                FailureReason::Construction { stage: Some(0), detail }
            }
        }
    }
}

/// The descent alone, stopped at stage 0.
pub fn descend(n: &Natural, k: &ExponentTuple, config: &PipelineConfig) -> Result<DescentState, FailureReason> {
    let (route, arranged) = prepare(n, k, config)?;
    with_base_retries(n, &arranged, route, config, |s| Ok(s.clone()))
        .map_err(|e| descent_failure(e, &Tally::default()))
}

/// Base primes, descent, endgame, ternary solve, reassembly and
/// verification for one `n`.
pub fn represent(n: &Natural, k: &ExponentTuple, config: &PipelineConfig) -> Result<RepresentOutcome, FailureReason> {
    let (route, arranged) = prepare(n, k, config)?;
    let mut tally = Tally::default();
    let result = with_base_retries(n, &arranged, route, config, |s| finish(s, config, &mut tally));
    match result {
        Ok(Accepted::Done(cert)) => {
            let log = describe(&cert);
            Ok(RepresentOutcome {
                certificate: *cert,
                log,
            })
        }
        Ok(Accepted::Unsound(failure)) => Err(FailureReason::Verification { failure }),
        Err(e) => Err(descent_failure(e, &tally)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixth_powers_end_to_end() {
        let k = ExponentTuple::new(&[6, 6]).unwrap();
        let config = PipelineConfig::desk(Mode::Grh);
        let n = Natural::from(1_000_000_000_000_007u64);
        let out = represent(&n, &k, &config).unwrap();
        assert!(verify_certificate(&out.certificate).is_pass());
        assert_eq!(out.certificate.total().unwrap(), n);
        // sixth powers mod 7 are all 1, so the base prime moves on
        assert_ne!(out.certificate.base.get(1), &Natural::from(7u32));
    }

    #[test]
    fn below_minimum_is_input_error() {
        let k = ExponentTuple::new(&[6, 6]).unwrap();
        let config = PipelineConfig::desk(Mode::Grh);
        let err = represent(&Natural::from(123_456u32), &k, &config).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn inadmissible_mode_is_input_error() {
        let k = ExponentTuple::new(&[6, 6]).unwrap();
        let config = PipelineConfig::desk(Mode::Unconditional);
        let err = represent(&Natural::from(10u64.pow(13) + 1), &k, &config).unwrap_err();
        assert!(matches!(err, FailureReason::Input { .. }));
    }

    #[test]
    fn deterministic_certificates() {
        let k = ExponentTuple::new(&[6, 6]).unwrap();
        let config = PipelineConfig::desk(Mode::Grh);
        let n = Natural::from(4_444_444_444_444_447u64);
        let a = represent(&n, &k, &config).unwrap().certificate.to_json();
        let b = represent(&n, &k, &config).unwrap().certificate.to_json();
        assert_eq!(a, b);
    }
}
