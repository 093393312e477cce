//! Serde adapters: integers as decimal strings, rationals as `"num/den"`.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serializer};

use crate::ntheory::Natural;

pub fn parse_natural(s: &str) -> Result<Natural, String> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("not a decimal natural number: {s:?}"));
    }
    Natural::from_str(s).map_err(|e| e.to_string())
}

pub fn parse_ratio(s: &str) -> Result<BigRational, String> {
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s.trim(), "1"),
    };
    let num = BigInt::from_str(num).map_err(|e| format!("{s:?}: {e}"))?;
    let den = BigInt::from_str(den).map_err(|e| format!("{s:?}: {e}"))?;
    if den == BigInt::from(0) {
        return Err(format!("{s:?}: zero denominator"));
    }
    Ok(BigRational::new(num, den))
}

pub fn format_ratio(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub mod dec {
    use super::*;

    pub fn serialize<S: Serializer>(n: &Natural, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Natural, D::Error> {
        let s = String::deserialize(d)?;
        parse_natural(&s).map_err(D::Error::custom)
    }
}

pub mod dec_vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[Natural], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for n in v {
            seq.serialize_element(&n.to_str_radix(10))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Natural>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse_natural(s).map_err(D::Error::custom))
            .collect()
    }
}

pub mod dec_opt {
    use super::*;

    pub fn serialize<S: Serializer>(n: &Option<Natural>, s: S) -> Result<S::Ok, S::Error> {
        match n {
            Some(n) => s.serialize_some(&n.to_str_radix(10)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Natural>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| parse_natural(&s).map_err(D::Error::custom))
            .transpose()
    }
}

pub mod dec_pair_opt {
    use super::*;

    pub fn serialize<S: Serializer>(
        p: &Option<(Natural, Natural)>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        match p {
            Some((a, b)) => s.serialize_some(&[a.to_str_radix(10), b.to_str_radix(10)]),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<(Natural, Natural)>, D::Error> {
        match Option::<[String; 2]>::deserialize(d)? {
            Some([a, b]) => Ok(Some((
                parse_natural(&a).map_err(D::Error::custom)?,
                parse_natural(&b).map_err(D::Error::custom)?,
            ))),
            None => Ok(None),
        }
    }
}

pub mod ratio {
    use super::*;

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_ratio(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_ratio(&s).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_parsing_is_strict() {
        assert_eq!(parse_natural("0042").unwrap(), Natural::from(42u32));
        assert!(parse_natural("").is_err());
        assert!(parse_natural("-1").is_err());
        assert!(parse_natural("1e5").is_err());
        assert!(parse_natural(" 7").is_err());
    }

    #[test]
    fn ratio_round_trip() {
        let r = parse_ratio("25/36").unwrap();
        assert_eq!(format_ratio(&r), "25/36");
        assert_eq!(format_ratio(&parse_ratio("10/4").unwrap()), "5/2");
        assert_eq!(format_ratio(&parse_ratio("3").unwrap()), "3/1");
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("a/b").is_err());
    }
}
