//! Exhaustive table of `n <= X` with no representation
//! `x1² + x2² + x3³ + x4³ + Σ y_j^{k_j}` in positive integers.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScanError {
    #[error("limit {limit} exceeds the scan cap {cap}")]
    OverCap { limit: u64, cap: u64 },
    #[error("exponent {0} is below 3")]
    SmallExponent(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanWitness {
    pub x: [u64; 4],
    pub y: Vec<u64>,
}

impl ScanWitness {
    pub fn value(&self, tail: &[u32]) -> Option<u64> {
        let [a, b, c, d] = self.x;
        let mut s = a.checked_mul(a)?.checked_add(b.checked_mul(b)?)?;
        s = s.checked_add(c.checked_pow(3)?)?.checked_add(d.checked_pow(3)?)?;
        for (&y, &k) in self.y.iter().zip(tail) {
            s = s.checked_add(y.checked_pow(k)?)?;
        }
        Some(s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub exponents: Vec<u32>,
    pub limit: u64,
    pub representable: u64,
    pub unrepresented: Vec<u64>,
}

pub struct ScanResult {
    pub report: ScanReport,
    tail: Vec<u32>,
    /// Some `x1` with `r - x1²` a nonzero square, indexed by `r`.
    two_sq: Vec<u16>,
    /// `levels[0][v]` is some `x3` with `v - x3³` a positive cube;
    /// `levels[j][v]` is some `y_j` with `v - y_j^{k_j}` reachable at level `j - 1`.
    levels: Vec<Vec<u16>>,
    /// Partial sum `x3³ + x4³ + Σ y^k` chosen for each `n`, `u32::MAX` when none.
    choice: Vec<u32>,
}

const NONE: u32 = u32::MAX;

fn two_square_table(limit: u64) -> Vec<u16> {
    let mut t = vec![0u16; limit as usize + 1];
    let mut a = 1u64;
    while a * a < limit {
        let mut b = 1u64;
        while b <= a && a * a + b * b <= limit {
            t[(a * a + b * b) as usize] = a as u16;
            b += 1;
        }
        a += 1;
    }
    t
}

fn reachable(level: &[u16]) -> Vec<u64> {
    (0..level.len() as u64).filter(|&v| level[v as usize] != 0).collect()
}

fn partial_levels(tail: &[u32], bound: u64) -> Vec<Vec<u16>> {
    let mut first = vec![0u16; bound as usize + 1];
    let mut c = 1u64;
    while c * c * c < bound {
        let mut d = c;
        while c * c * c + d * d * d <= bound {
            let v = (c * c * c + d * d * d) as usize;
            if first[v] == 0 {
                first[v] = c as u16;
            }
            d += 1;
        }
        c += 1;
    }
    let mut levels = vec![first];
    for &k in tail {
        let prev = reachable(levels.last().expect("nonempty"));
        let mut next = vec![0u16; bound as usize + 1];
        for s in prev {
            let mut y = 1u64;
            while let Some(v) = y.checked_pow(k).and_then(|p| p.checked_add(s)) {
                if v > bound {
                    break;
                }
                if next[v as usize] == 0 {
                    next[v as usize] = y as u16;
                }
                y += 1;
            }
        }
        levels.push(next);
    }
    levels
}

/// Largest limit the compact tables can index.
pub const HARD_CAP: u64 = u32::MAX as u64 - 1;

pub fn scan(tail: &[u32], limit: u64, cap: u64) -> Result<ScanResult, ScanError> {
    if limit > cap.min(HARD_CAP) {
        return Err(ScanError::OverCap { limit, cap: cap.min(HARD_CAP) });
    }
    if let Some(&k) = tail.iter().find(|&&k| k < 3) {
        return Err(ScanError::SmallExponent(k));
    }
    let two_sq = two_square_table(limit);
    let bound = limit.saturating_sub(2);
    let levels = partial_levels(tail, bound);
    let values = reachable(levels.last().expect("nonempty"));
    let choice: Vec<u32> = (0..=limit)
        .into_par_iter()
        .map(|n| {
            let top = values.partition_point(|&a| a + 2 <= n);
            values[..top]
                .iter()
                .find(|&&a| two_sq[(n - a) as usize] != 0)
                .map_or(NONE, |&a| a as u32)
        })
        .collect();
    let unrepresented: Vec<u64> = (1..=limit).filter(|&n| choice[n as usize] == NONE).collect();
    let report = ScanReport {
        exponents: [2, 2, 3, 3].iter().chain(tail).copied().collect(),
        limit,
        representable: limit - unrepresented.len() as u64,
        unrepresented,
    };
    Ok(ScanResult {
        report,
        tail: tail.to_vec(),
        two_sq,
        levels,
        choice,
    })
}

impl ScanResult {
    pub fn witness(&self, n: u64) -> Option<ScanWitness> {
        let a = *self.choice.get(n as usize)?;
        if a == NONE || n == 0 {
            return None;
        }
        let r = n - a as u64;
        let x1 = self.two_sq[r as usize] as u64;
        let x2 = (r - x1 * x1).isqrt();
        let mut v = a as u64;
        let mut y = vec![0u64; self.tail.len()];
        for (j, &k) in self.tail.iter().enumerate().rev() {
            let yj = self.levels[j + 1][v as usize] as u64;
            y[j] = yj;
            v -= yj.pow(k);
        }
        let x3 = self.levels[0][v as usize] as u64;
        let rest = v - x3.pow(3);
        let mut x4 = (rest as f64).cbrt().round() as u64;
        while x4.pow(3) > rest {
            x4 -= 1;
        }
        while (x4 + 1).pow(3) <= rest {
            x4 += 1;
        }
        Some(ScanWitness {
            x: [x1, x2, x3, x4],
            y,
        })
    }

    /// Recompute every stored witness; returns the first `n` that fails.
    pub fn check_witnesses(&self) -> Result<(), u64> {
        (1..=self.report.limit)
            .into_par_iter()
            .filter(|&n| self.choice[n as usize] != NONE)
            .find_first(|&n| {
                let w = self.witness(n).expect("stored");
                w.x.iter().chain(&w.y).any(|&v| v == 0) || w.value(&self.tail) != Some(n)
            })
            .map_or(Ok(()), Err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(tail: &[u32], limit: u64) -> Vec<u64> {
        let mut hit = vec![false; limit as usize + 1];
        let mut stack = vec![(0u64, 0usize)];
        let exps: Vec<u32> = [2, 2, 3, 3].iter().chain(tail).copied().collect();
        while let Some((s, i)) = stack.pop() {
            if i == exps.len() {
                hit[s as usize] = true;
                continue;
            }
            let mut v = 1u64;
            while s + v.pow(exps[i]) <= limit {
                stack.push((s + v.pow(exps[i]), i + 1));
                v += 1;
            }
        }
        (1..=limit).filter(|&n| !hit[n as usize]).collect()
    }

    #[test]
    fn matches_brute_force() {
        for tail in [vec![3], vec![4], vec![6, 6], vec![3, 5]] {
            let r = scan(&tail, 3000, 10_000_000).unwrap();
            assert_eq!(r.report.unrepresented, brute(&tail, 3000), "{tail:?}");
            r.check_witnesses().unwrap();
        }
    }

    #[test]
    fn smallest_values() {
        let r = scan(&[6, 6], 10, 100).unwrap();
        // 1+1+1+1+1+1 is the smallest sum
        assert_eq!(r.report.unrepresented, vec![1, 2, 3, 4, 5, 7, 8, 10]);
        assert_eq!(r.witness(6).unwrap().value(&[6, 6]), Some(6));
    }

    #[test]
    fn cap_enforced() {
        assert!(matches!(scan(&[6], 101, 100), Err(ScanError::OverCap { .. })));
        assert!(matches!(scan(&[2], 10, 100), Err(ScanError::SmallExponent(2))));
    }
}
