//! Exponent tuples and the exact feasibility calculus.
//!
//! Every decision here is an exact rational comparison. The only floating
//! point quantity is the scaling exponent handed to the h-window sizing, and
//! even that is produced as a dyadic rational by bisection.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExponentError {
    #[error("exponent list is empty")]
    Empty,
    #[error("exponent {0} is below the minimum {1}")]
    TooSmall(u32, u32),
    #[error("gamma-tilde needs at least two exponents")]
    NeedsPair,
    #[error("inconsistent relabeling: {0}")]
    BadRelabel(String),
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Tail exponents of the form. `working` is the order the construction uses:
/// ascending, except that a relabeled tuple moves its largest odd exponent to
/// the last position. `order[j]` is the index in `original` of `working[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentTuple {
    original: Vec<u32>,
    working: Vec<u32>,
    order: Vec<usize>,
}

impl ExponentTuple {
    /// Tuple in ascending working order. Every exponent must be at least 2.
    pub fn new(exponents: &[u32]) -> Result<Self, ExponentError> {
        if exponents.is_empty() {
            return Err(ExponentError::Empty);
        }
        if let Some(&k) = exponents.iter().find(|&&k| k < 2) {
            return Err(ExponentError::TooSmall(k, 2));
        }
        let mut order: Vec<usize> = (0..exponents.len()).collect();
        order.sort_by_key(|&i| (exponents[i], i));
        let working = order.iter().map(|&i| exponents[i]).collect();
        Ok(ExponentTuple {
            original: exponents.to_vec(),
            working,
            order,
        })
    }

    /// Rebuild from stored parts, checking that `order` is a permutation
    /// carrying `original` onto `working`.
    pub fn from_parts(
        original: Vec<u32>,
        working: Vec<u32>,
        order: Vec<usize>,
    ) -> Result<Self, ExponentError> {
        let t = original.len();
        if t == 0 {
            return Err(ExponentError::Empty);
        }
        if working.len() != t || order.len() != t {
            return Err(ExponentError::BadRelabel("length mismatch".into()));
        }
        let mut seen = vec![false; t];
        for (j, &i) in order.iter().enumerate() {
            if i >= t || seen[i] {
                return Err(ExponentError::BadRelabel(format!("{order:?} is not a permutation")));
            }
            seen[i] = true;
            if original[i] != working[j] {
                return Err(ExponentError::BadRelabel(format!(
                    "working[{j}] = {} but original[{i}] = {}",
                    working[j], original[i]
                )));
            }
        }
        if let Some(&k) = original.iter().find(|&&k| k < 2) {
            return Err(ExponentError::TooSmall(k, 2));
        }
        Ok(ExponentTuple {
            original,
            working,
            order,
        })
    }

    /// Move the largest odd exponent to the last working position, keeping
    /// the rest ascending. Unchanged when every exponent is even.
    pub fn relabel_odd_last(&self) -> Self {
        let sorted = ExponentTuple::new(&self.original).expect("already validated");
        let Some(pos) = sorted.working.iter().rposition(|k| k % 2 == 1) else {
            return sorted;
        };
        let mut order = sorted.order.clone();
        let moved = order.remove(pos);
        order.push(moved);
        let working = order.iter().map(|&i| self.original[i]).collect();
        ExponentTuple {
            original: self.original.clone(),
            working,
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.working.len()
    }

    pub fn is_empty(&self) -> bool {
        self.working.is_empty()
    }

    /// Exponent at 1-based working position `j`.
    pub fn k(&self, j: usize) -> u32 {
        self.working[j - 1]
    }

    pub fn working(&self) -> &[u32] {
        &self.working
    }

    pub fn original(&self) -> &[u32] {
        &self.original
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn is_relabeled(&self) -> bool {
        self.working.windows(2).any(|w| w[0] > w[1])
    }

    /// Product of all working exponents but the last (1 for a single exponent).
    pub fn big_k(&self) -> u64 {
        self.working[..self.len() - 1]
            .iter()
            .map(|&k| k as u64)
            .product()
    }

    pub fn has_odd(&self) -> bool {
        self.working.iter().any(|k| k % 2 == 1)
    }

    pub fn gamma(&self) -> BigRational {
        gamma_of(&self.working)
    }

    /// The product with the second largest exponent left out, computed on the
    /// ascending order regardless of relabeling.
    pub fn gamma_tilde(&self) -> Result<BigRational, ExponentError> {
        Ok(gamma_of(&self.tilde_exponents()?))
    }

    /// Exponents entering gamma-tilde: the ascending tuple minus its
    /// second-to-last entry.
    pub fn tilde_exponents(&self) -> Result<Vec<u32>, ExponentError> {
        if self.len() < 2 {
            return Err(ExponentError::NeedsPair);
        }
        let mut sorted = self.original.clone();
        sorted.sort_unstable();
        let t = sorted.len();
        sorted.remove(t - 2);
        Ok(sorted)
    }

    /// Map values given in working order back to the caller's order.
    pub fn to_original_order<T: Clone>(&self, working_values: &[T]) -> Vec<T> {
        let mut out: Vec<Option<T>> = vec![None; self.len()];
        for (j, v) in working_values.iter().enumerate() {
            out[self.order[j]] = Some(v.clone());
        }
        out.into_iter().map(|v| v.expect("order is a permutation")).collect()
    }
}

impl fmt::Display for ExponentTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.original.iter().map(|k| k.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// `∏ (1 - 1/k)` over the given exponents.
pub fn gamma_of(exponents: &[u32]) -> BigRational {
    exponents
        .iter()
        .fold(BigRational::one(), |acc, &k| acc * ratio(k as i64 - 1, k as i64))
}

/// `∏ (1 - ω/k)` over the given exponents, exactly.
pub fn gamma_omega(exponents: &[u32], omega: &BigRational) -> BigRational {
    exponents.iter().fold(BigRational::one(), |acc, &k| {
        acc * (BigRational::one() - omega / BigRational::from_integer(BigInt::from(k)))
    })
}

/// Scaling exponent ω ∈ (0, 1] with `∏ (1 - ω/k) = 2/3 + ν`.
///
/// Returns 1 when the unscaled product already reaches `2/3 + ν`. Otherwise
/// bisects on dyadic rationals until the bracket is within `1e-12` relative
/// width and returns the lower endpoint, so the scaled product is never
/// below the target.
pub fn gamma_omega_solve(exponents: &[u32], nu: &BigRational) -> BigRational {
    let target = ratio(2, 3) + nu;
    if gamma_of(exponents) >= target {
        return BigRational::one();
    }
    let mut lo = BigRational::zero();
    let mut hi = BigRational::one();
    let tol = ratio(1, 1_000_000_000_000);
    let half = ratio(1, 2);
    while (&hi - &lo) > &tol * &hi {
        let mid = (&lo + &hi) * &half;
        if gamma_omega(exponents, &mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Feasibility hypotheses a run may rely on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Grh,
    Unconditional,
    Ramanujan,
    #[serde(rename = "ramanujan+grh")]
    RamanujanGrh,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Grh, Mode::Unconditional, Mode::Ramanujan, Mode::RamanujanGrh];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Grh => "grh",
            Mode::Unconditional => "unconditional",
            Mode::Ramanujan => "ramanujan",
            Mode::RamanujanGrh => "ramanujan+grh",
        }
    }

    /// Whether the mode assumes GRH (and so takes `c = 2 + 2ε`).
    pub fn assumes_grh(&self) -> bool {
        matches!(self, Mode::Grh | Mode::RamanujanGrh)
    }

    pub fn assumes_ramanujan(&self) -> bool {
        matches!(self, Mode::Ramanujan | Mode::RamanujanGrh)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "grh" => Ok(Mode::Grh),
            "unconditional" => Ok(Mode::Unconditional),
            "ramanujan" => Ok(Mode::Ramanujan),
            "ramanujan+grh" | "ramanujan-grh" => Ok(Mode::RamanujanGrh),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

/// Which first step the descent takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// One fresh prime for the last exponent, then one step per base prime.
    Top,
    /// The two largest exponents are consumed together at the last base prime.
    Pair,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub quantity: String,
    #[serde(with = "crate::codec::ratio")]
    pub value: BigRational,
    #[serde(with = "crate::codec::ratio")]
    pub threshold: BigRational,
    pub holds: bool,
}

impl Comparison {
    fn less(quantity: &str, value: &BigRational, threshold: &BigRational) -> Self {
        Comparison {
            quantity: quantity.to_string(),
            value: value.clone(),
            threshold: threshold.clone(),
            holds: value < threshold,
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.holds { "<" } else { ">=" };
        write!(f, "{} = {} {} {}", self.quantity, self.value, op, self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteVerdict {
    pub mode: Mode,
    pub feasible: bool,
    pub route: Option<Route>,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub exponents: Vec<u32>,
    #[serde(with = "crate::codec::ratio")]
    pub gamma: BigRational,
    pub gamma_tilde: Option<String>,
    pub has_odd: bool,
    pub verdicts: Vec<RouteVerdict>,
}

impl FeasibilityReport {
    pub fn verdict(&self, mode: Mode) -> &RouteVerdict {
        self.verdicts
            .iter()
            .find(|v| v.mode == mode)
            .expect("every mode has a verdict")
    }

    pub fn feasible_modes(&self) -> Vec<Mode> {
        self.verdicts.iter().filter(|v| v.feasible).map(|v| v.mode).collect()
    }
}

pub fn grh_threshold() -> BigRational {
    ratio(12, 17)
}

pub fn unconditional_threshold() -> BigRational {
    ratio(74, 105)
}

pub fn ramanujan_threshold() -> BigRational {
    ratio(5, 6)
}

/// Route verdicts for all four modes.
pub fn check_feasibility(k: &ExponentTuple) -> FeasibilityReport {
    let gamma = k.gamma();
    let gamma_tilde = k.gamma_tilde().ok();
    let has_odd = k.has_odd();

    let conditional = |mode: Mode, threshold: BigRational| {
        let cmp = Comparison::less("gamma", &gamma, &threshold);
        RouteVerdict {
            mode,
            feasible: cmp.holds,
            route: cmp.holds.then_some(Route::Top),
            comparisons: vec![cmp],
        }
    };
    let unconditional = |mode: Mode, threshold: BigRational| {
        let by_gamma = Comparison::less("gamma", &gamma, &threshold);
        let odd_route = by_gamma.holds && has_odd;
        let mut comparisons = vec![by_gamma];
        let mut pair_route = false;
        if let Some(gt) = &gamma_tilde {
            let cmp = Comparison::less("gamma_tilde", gt, &threshold);
            pair_route = cmp.holds;
            comparisons.push(cmp);
        }
        let route = if odd_route {
            Some(Route::Top)
        } else if pair_route {
            Some(Route::Pair)
        } else {
            None
        };
        RouteVerdict {
            mode,
            feasible: route.is_some(),
            route,
            comparisons,
        }
    };

    FeasibilityReport {
        exponents: k.original().to_vec(),
        gamma: gamma.clone(),
        gamma_tilde: gamma_tilde.as_ref().map(|g| g.to_string()),
        has_odd,
        verdicts: vec![
            conditional(Mode::Grh, grh_threshold()),
            unconditional(Mode::Unconditional, unconditional_threshold()),
            unconditional(Mode::Ramanujan, ramanujan_threshold()),
            conditional(Mode::RamanujanGrh, ramanujan_threshold()),
        ],
    }
}

/// Working tuple for a route: relabeled so an odd exponent comes last on the
/// top route, ascending on the pair route.
pub fn arrange_for_route(k: &ExponentTuple, route: Route) -> ExponentTuple {
    match route {
        Route::Top => k.relabel_odd_last(),
        Route::Pair => ExponentTuple::new(k.original()).expect("already validated"),
    }
}

/// Exponents whose scaled product sets ω on a route.
pub fn omega_exponents(k: &ExponentTuple, route: Route) -> Vec<u32> {
    match route {
        Route::Top => k.working().to_vec(),
        Route::Pair => k.tilde_exponents().unwrap_or_else(|_| k.working().to_vec()),
    }
}

/// Left side minus right side of the endgame size inequality
/// `γ₀(6/c + 1) - 4/c - ε > 21γ₀ - 14 + ε`; positive exactly when it holds.
pub fn ternary_margin(gamma0: &BigRational, c: &BigRational, epsilon: &BigRational) -> BigRational {
    let six = BigRational::from_integer(6.into());
    let four = BigRational::from_integer(4.into());
    let lhs = gamma0 * (&six / c + BigRational::one()) - &four / c - epsilon;
    let rhs = gamma0 * BigRational::from_integer(21.into()) - BigRational::from_integer(14.into()) + epsilon;
    lhs - rhs
}

/// The same inequality with the Ramanujan-strength bound,
/// `γ₀ - ε > 5γ₀ - 10/3 + ε`.
pub fn ramanujan_margin(gamma0: &BigRational, epsilon: &BigRational) -> BigRational {
    let lhs = gamma0 - epsilon;
    let rhs = gamma0 * BigRational::from_integer(5.into()) - ratio(10, 3) + epsilon;
    lhs - rhs
}

/// Supremum of admissible γ₀ for a given `c` at ε = 0: `(7c - 2)/(10c - 3)`.
pub fn gamma_threshold_for_c(c: &BigRational) -> BigRational {
    let seven = BigRational::from_integer(7.into());
    let ten = BigRational::from_integer(10.into());
    (seven * c - BigRational::from_integer(2.into())) / (ten * c - BigRational::from_integer(3.into()))
}

/// `c = 2 + 2ε` with GRH, `c = 12/5 + 2ε` without.
pub fn default_c(grh: bool, epsilon: &BigRational) -> BigRational {
    let base = if grh { ratio(2, 1) } else { ratio(12, 5) };
    base + epsilon * BigRational::from_integer(2.into())
}

pub fn is_positive(r: &BigRational) -> bool {
    r.is_positive()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tuple(k: &[u32]) -> ExponentTuple {
        ExponentTuple::new(k).unwrap()
    }

    #[test]
    fn gamma_values() {
        assert_eq!(tuple(&[6, 6]).gamma(), ratio(25, 36));
        assert_eq!(tuple(&[5, 8]).gamma(), ratio(7, 10));
        assert_eq!(tuple(&[9, 9, 9]).gamma(), ratio(512, 729));
        assert_eq!(tuple(&[6, 12, 12]).gamma(), ratio(605, 864));
        assert_eq!(tuple(&[4]).gamma(), ratio(3, 4));
    }

    #[test]
    fn gamma_tilde_values() {
        assert_eq!(tuple(&[6, 6]).gamma_tilde().unwrap(), ratio(5, 6));
        assert_eq!(tuple(&[9, 9, 9]).gamma_tilde().unwrap(), ratio(64, 81));
        assert_eq!(tuple(&[4]).gamma_tilde(), Err(ExponentError::NeedsPair));
        for k in [&[3u32, 7][..], &[4, 6, 10], &[2, 5, 5, 9]] {
            let t = tuple(k);
            assert!(t.gamma_tilde().unwrap() >= t.gamma());
        }
    }

    #[test]
    fn rejects_bad_exponents() {
        assert_eq!(ExponentTuple::new(&[]), Err(ExponentError::Empty));
        assert_eq!(ExponentTuple::new(&[3, 1]), Err(ExponentError::TooSmall(1, 2)));
    }

    #[test]
    fn relabeling_moves_largest_odd_last() {
        let t = tuple(&[8, 5]).relabel_odd_last();
        assert_eq!(t.working(), &[8, 5]);
        assert_eq!(t.order(), &[0, 1]);
        assert!(t.is_relabeled());
        let t = tuple(&[9, 4, 7, 12]).relabel_odd_last();
        assert_eq!(t.working(), &[4, 7, 12, 9]);
        assert_eq!(t.to_original_order(&["a", "b", "c", "d"]), vec!["d", "a", "b", "c"]);
        let even = tuple(&[6, 6]).relabel_odd_last();
        assert_eq!(even.working(), &[6, 6]);
        assert!(!even.is_relabeled());
        assert_eq!(t.big_k(), 4 * 7 * 12);
        assert_eq!(tuple(&[4]).big_k(), 1);
    }

    #[test]
    fn from_parts_checks_permutation() {
        let t = tuple(&[9, 4, 7, 12]).relabel_odd_last();
        let back = ExponentTuple::from_parts(
            t.original().to_vec(),
            t.working().to_vec(),
            t.order().to_vec(),
        )
        .unwrap();
        assert_eq!(back, t);
        assert!(ExponentTuple::from_parts(vec![6, 5], vec![5, 6], vec![0, 1]).is_err());
        assert!(ExponentTuple::from_parts(vec![6, 5], vec![6, 6], vec![0, 0]).is_err());
    }

    #[test]
    fn route_verdicts() {
        let r = check_feasibility(&tuple(&[6, 6]));
        assert!(r.verdict(Mode::Grh).feasible);
        assert!(!r.verdict(Mode::Unconditional).feasible);
        let r = check_feasibility(&tuple(&[5, 8]));
        assert_eq!(r.verdict(Mode::Unconditional).route, Some(Route::Top));
        let r = check_feasibility(&tuple(&[9, 9, 9]));
        assert_eq!(r.verdict(Mode::Unconditional).route, Some(Route::Top));
        let r = check_feasibility(&tuple(&[6, 12, 12]));
        assert!(r.verdict(Mode::Grh).feasible);
        let r = check_feasibility(&tuple(&[4]));
        assert_eq!(r.feasible_modes(), vec![Mode::RamanujanGrh]);
        // all even, gamma-tilde small enough: the pair route avoids GRH
        let r = check_feasibility(&tuple(&[4, 4, 4]));
        assert_eq!(r.verdict(Mode::Unconditional).route, Some(Route::Pair));
    }

    #[test]
    fn omega_solve() {
        assert_eq!(gamma_omega_solve(&[6, 6], &ratio(1, 100)), BigRational::one());
        let omega = gamma_omega_solve(&[3, 3], &BigRational::zero());
        let closed = 3.0 * (1.0 - (2.0f64 / 3.0).sqrt());
        let approx = omega.numer().to_string().parse::<f64>().unwrap()
            / omega.denom().to_string().parse::<f64>().unwrap();
        assert!((approx - closed).abs() < 1e-11, "{approx} vs {closed}");
        assert!(gamma_omega(&[3, 3], &omega) >= ratio(2, 3));
        let mut prev = BigRational::one();
        for nu in [0, 1, 5, 20, 60] {
            let w = gamma_omega_solve(&[3, 3], &ratio(nu, 1000));
            assert!(w <= prev);
            prev = w;
        }
    }

    #[test]
    fn margin_thresholds() {
        let eps = BigRational::zero();
        let below = ratio(12, 17) - ratio(1, 1000);
        let above = ratio(12, 17) + ratio(1, 1000);
        assert!(ternary_margin(&below, &ratio(2, 1), &eps).is_positive());
        assert!(ternary_margin(&above, &ratio(2, 1), &eps).is_negative());
        let below = ratio(74, 105) - ratio(1, 1000);
        let above = ratio(74, 105) + ratio(1, 1000);
        assert!(ternary_margin(&below, &ratio(12, 5), &eps).is_positive());
        assert!(ternary_margin(&above, &ratio(12, 5), &eps).is_negative());
        assert_eq!(gamma_threshold_for_c(&ratio(2, 1)), ratio(12, 17));
        assert_eq!(gamma_threshold_for_c(&ratio(12, 5)), ratio(74, 105));
        assert!(ramanujan_margin(&(ratio(5, 6) - ratio(1, 1000)), &eps).is_positive());
        assert!(ramanujan_margin(&(ratio(5, 6) + ratio(1, 1000)), &eps).is_negative());
    }
}
