use num_traits::Zero;

use super::exponents::ExponentTuple;
use crate::ntheory::Natural;
use crate::residue::{next_admissible_prime, BasePrimes, BoundPolicy};

/// The `t - 1` smallest primes above the policy floor that are coprime to
/// `30K`, with the last one not dividing `n`.
pub fn select_base_primes(n: &Natural, k: &ExponentTuple, policy: &BoundPolicy) -> BasePrimes {
    let t = k.len();
    if t <= 1 {
        return BasePrimes::default();
    }
    let big_k = k.big_k();
    let mut primes = Vec::with_capacity(t - 1);
    let mut cursor = policy.base_prime_floor(big_k);
    while primes.len() + 1 < t {
        let p = next_admissible_prime(&cursor, big_k);
        cursor = p.clone();
        if primes.len() + 2 == t && (n % &p).is_zero() {
            continue;
        }
        primes.push(p);
    }
    BasePrimes::new(primes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nat(n: u64) -> Natural {
        Natural::from(n)
    }

    #[test]
    fn desk_selection() {
        let desk = BoundPolicy::desk(true);
        let k = ExponentTuple::new(&[6, 6]).unwrap();
        assert_eq!(select_base_primes(&nat(1_000_003), &k, &desk).as_slice(), &[nat(7)]);
        // 7 | n pushes the last prime on
        assert_eq!(select_base_primes(&nat(7_000_007), &k, &desk).as_slice(), &[nat(11)]);
        let k = ExponentTuple::new(&[9, 9, 9]).unwrap();
        assert_eq!(select_base_primes(&nat(1_000_003), &k, &desk).as_slice(), &[nat(7), nat(11)]);
        let k = ExponentTuple::new(&[5, 7, 8]).unwrap();
        assert_eq!(select_base_primes(&nat(1_000_003), &k, &desk).as_slice(), &[nat(11), nat(13)]);
        let k = ExponentTuple::new(&[4]).unwrap();
        assert!(select_base_primes(&nat(1_000_003), &k, &desk).is_empty());
    }

    #[test]
    fn paper_floor() {
        let paper = BoundPolicy::paper_faithful(true);
        let k = ExponentTuple::new(&[6, 6]).unwrap();
        let b = select_base_primes(&nat(1_000_003), &k, &paper);
        // first prime above 6^10 = 60466176 coprime to 180
        assert_eq!(b.as_slice(), &[nat(60_466_181)]);
    }
}
