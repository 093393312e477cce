use num_bigint::{BigInt, Sign};
use num_traits::{One, Signed, Zero};

use super::factor::{factorize_with, FactorBudget};
use super::modular::mod_pow;
use super::{Natural, NtError};

#[derive(Clone, Debug, PartialEq, Eq)]
struct Gaussian {
    re: BigInt,
    im: BigInt,
}

impl Gaussian {
    fn new(re: BigInt, im: BigInt) -> Self {
        Gaussian { re, im }
    }

    fn one() -> Self {
        Gaussian::new(BigInt::one(), BigInt::zero())
    }

    fn mul(&self, o: &Gaussian) -> Gaussian {
        Gaussian::new(
            &self.re * &o.re - &self.im * &o.im,
            &self.re * &o.im + &self.im * &o.re,
        )
    }

    fn conj(&self) -> Gaussian {
        Gaussian::new(self.re.clone(), -&self.im)
    }

    fn pow(&self, e: u32) -> Gaussian {
        (0..e).fold(Gaussian::one(), |acc, _| acc.mul(self))
    }
}

fn signed(n: &Natural) -> BigInt {
    BigInt::from_biguint(Sign::Plus, n.clone())
}

/// `(a, b)` with `a^2 + b^2 = p` for a prime `p ≡ 1 (mod 4)`: a square root
/// of -1 from a quadratic non-residue, then the Euclidean descent of
/// Cornacchia.
fn prime_two_squares(p: &Natural) -> (Natural, Natural) {
    let exp: Natural = (p - 1u32) >> 2;
    let p_minus_1: Natural = p - 1u32;
    let mut c = Natural::from(2u32);
    let root = loop {
        let t = mod_pow(&c, &exp, p);
        if (&t * &t) % p == p_minus_1 {
            break t;
        }
        c += 1u32;
    };
    let bound = p.sqrt();
    let (mut a, mut b) = (p.clone(), root);
    while b > bound {
        let r = &a % &b;
        a = b;
        b = r;
    }
    let rest = p - &b * &b;
    let other = rest.sqrt();
    debug_assert_eq!(&other * &other, rest);
    (b, other)
}

/// Decompose `n = x^2 + y^2` with `x >= y`, under the default factoring budget.
pub fn two_squares(
    n: &Natural,
    require_positive: bool,
) -> Result<Option<(Natural, Natural)>, NtError> {
    two_squares_with(n, require_positive, FactorBudget::default())
}

/// Decompose `n = x^2 + y^2` with `x >= y`.
///
/// All representations are generated from the Gaussian-integer factorization
/// of `n` and the one with the largest `x` is returned. With
/// `require_positive` only `y >= 1` qualifies.
pub fn two_squares_with(
    n: &Natural,
    require_positive: bool,
    budget: FactorBudget,
) -> Result<Option<(Natural, Natural)>, NtError> {
    if n.is_zero() {
        return Ok((!require_positive).then(|| (Natural::zero(), Natural::zero())));
    }
    let f = factorize_with(n, budget)?;
    let mut fixed = Natural::one();
    let mut split: Vec<(Gaussian, u32)> = Vec::new();
    let mut twos = 0u32;
    for (p, e) in &f.factors {
        let r = (p % 4u32).to_u32_digits().first().copied().unwrap_or(0);
        match r {
            2 => twos = *e,
            3 => {
                if e % 2 == 1 {
                    return Ok(None);
                }
                fixed *= p.pow(e / 2);
            }
            _ => {
                let (a, b) = prime_two_squares(p);
                split.push((Gaussian::new(signed(&a), signed(&b)), *e));
            }
        }
    }
    let base = Gaussian::new(BigInt::one(), BigInt::one())
        .pow(twos)
        .mul(&Gaussian::new(signed(&fixed), BigInt::zero()));

    // every choice of split between each prime and its conjugate
    let mut products = vec![base];
    for (pi, e) in &split {
        let pbar = pi.conj();
        let mut next = Vec::with_capacity(products.len() * (*e as usize + 1));
        for j in 0..=*e {
            let factor = pi.pow(j).mul(&pbar.pow(e - j));
            next.extend(products.iter().map(|g| g.mul(&factor)));
        }
        products = next;
    }

    let best = products
        .into_iter()
        .map(|g| {
            let a = g.re.abs().to_biguint().unwrap();
            let b = g.im.abs().to_biguint().unwrap();
            if a >= b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .filter(|(_, y)| !require_positive || !y.is_zero())
        .max();
    debug_assert!(best.as_ref().is_none_or(|(x, y)| x * x + y * y == *n));
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nat(n: u64) -> Natural {
        Natural::from(n)
    }

    fn sweep(n: u64, require_positive: bool) -> Option<(u64, u64)> {
        let mut x = (n as f64).sqrt() as u64 + 1;
        while x * x > n {
            x -= 1;
        }
        loop {
            let rest = n - x * x;
            let mut y = (rest as f64).sqrt() as u64;
            while y * y > rest {
                y -= 1;
            }
            while (y + 1) * (y + 1) <= rest {
                y += 1;
            }
            if y * y == rest && y <= x && (!require_positive || y >= 1) {
                return Some((x, y));
            }
            if x == 0 || x * x * 2 < n {
                return None;
            }
            x -= 1;
        }
    }

    fn small(r: Option<(Natural, Natural)>) -> Option<(u64, u64)> {
        r.map(|(x, y)| (x.try_into().unwrap(), y.try_into().unwrap()))
    }

    #[test]
    fn examples() {
        assert_eq!(two_squares(&nat(25), true).unwrap(), Some((nat(4), nat(3))));
        assert_eq!(two_squares(&nat(25), false).unwrap(), Some((nat(5), nat(0))));
        assert_eq!(two_squares(&nat(21), true).unwrap(), None);
        assert_eq!(two_squares(&nat(21), false).unwrap(), None);
        assert_eq!(two_squares(&nat(0), false).unwrap(), Some((nat(0), nat(0))));
        assert_eq!(two_squares(&nat(0), true).unwrap(), None);
        assert_eq!(two_squares(&nat(9), true).unwrap(), None);
        assert_eq!(two_squares(&nat(2), true).unwrap(), Some((nat(1), nat(1))));
    }

    #[test]
    fn frozen_large_values() {
        // descending sweep from isqrt(n) finds these first
        assert_eq!(
            small(two_squares(&nat(1_000_000_009), true).unwrap()),
            Some((31400, 3747))
        );
        assert_eq!(
            small(two_squares(&nat(24_505_000), true).unwrap()),
            Some((4950, 50))
        );
        // 10^12 + 37 = 53 * 59 * 349 * 916319
        assert_eq!(two_squares(&nat(1_000_000_000_037), false).unwrap(), None);
    }

    #[test]
    fn matches_sweep_below_1e5() {
        for n in 0..=100_000u64 {
            for rp in [false, true] {
                assert_eq!(small(two_squares(&nat(n), rp).unwrap()), sweep(n, rp), "n={n} rp={rp}");
            }
        }
    }

    #[test]
    fn prime_decomposition_is_exact() {
        for p in [5u64, 13, 17, 1_000_000_009, 998_244_353] {
            let (a, b) = prime_two_squares(&nat(p));
            assert_eq!(&a * &a + &b * &b, nat(p));
        }
        let big = (Natural::one() << 127) - 1u32; // ≡ 3 mod 4
        assert_eq!(two_squares(&(&big * &big), true).unwrap(), None);
        assert_eq!(two_squares(&(&big * &big), false).unwrap(), Some((big, nat(0))));
    }
}
