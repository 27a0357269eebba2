//! Exact rationals and their `"p/q"` text form.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed rational {0:?}: expected \"p/q\" or an integer")]
pub struct ParseRationalError(pub String);

/// `p/q` from machine integers.
pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(p: i64) -> Rational {
    Rational::from_integer(BigInt::from(p))
}

/// `count / total` as an exact fraction; `total` must be nonzero.
pub fn frac(count: usize, total: usize) -> Rational {
    Rational::new(BigInt::from(count), BigInt::from(total))
}

/// Parses `"p/q"` or `"p"`. Decimal notation is rejected.
pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(s.to_string());
    let t = s.trim();
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (t, "1"),
    };
    let ok = |x: &str| {
        let body = x.strip_prefix('-').unwrap_or(x);
        !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit())
    };
    if !ok(num) || !ok(den) || den.starts_with('-') {
        return Err(err());
    }
    let p = BigInt::from_str(num).map_err(|_| err())?;
    let q = BigInt::from_str(den).map_err(|_| err())?;
    if q.is_zero() {
        return Err(err());
    }
    Ok(Rational::new(p, q))
}

/// Always `"p/q"`, including integers (`"3/1"`).
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Display wrapper producing the `"p/q"` form.
pub struct Pq<'a>(pub &'a Rational);

impl fmt::Display for Pq<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

/// Lossy conversion for display columns only.
pub fn to_f64(r: &Rational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        _ => {
            // scale both down before dividing
            let shift = r.denom().bits().max(r.numer().bits()).saturating_sub(1000);
            let a = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let b = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            a / b
        }
    }
}

/// Natural log of a positive big integer, accurate to f64 precision.
pub fn ln_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (n >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn ceil_to_bigint(r: &Rational) -> BigInt {
    r.ceil().to_integer()
}

/// Exact power of a rational.
pub fn pow(r: &Rational, e: u64) -> Rational {
    let mut base = r.clone();
    let mut acc = Rational::one();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc *= &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    acc
}

/// Smallest `n >= 1` with `q^n < bound` (strict) for `0 < q < 1`, `bound > 0`.
pub fn min_power_below(q: &Rational, bound: &Rational, strict: bool) -> u64 {
    assert!(q.is_positive() && q < &Rational::one() && bound.is_positive());
    let holds = |n: u64| {
        let v = pow(q, n);
        if strict {
            &v < bound
        } else {
            &v <= bound
        }
    };
    let mut hi = 1u64;
    while !holds(hi) {
        hi *= 2;
    }
    let mut lo = hi / 2; // fails (or 0)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Integer square root bracket for a nonnegative rational: returns `(lo, hi)`
/// with `lo^2 <= r <= hi^2` and `hi - lo <= 2^-bits`.
pub fn sqrt_bracket(r: &Rational, bits: u32) -> (Rational, Rational) {
    assert!(!r.is_negative());
    let scale = BigInt::one() << (bits as usize);
    // floor(sqrt(r * scale^2)) / scale
    let scaled = (r * Rational::from_integer(&scale * &scale)).floor().to_integer();
    let s = scaled.sqrt();
    let lo = Rational::new(s.clone(), scale.clone());
    let hi = Rational::new(s + 1, scale);
    (lo, hi)
}

pub mod serde_pq {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

pub mod serde_pq_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let strs: Vec<String> = v.iter().map(format_rational).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse_rational(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

pub mod serde_pq_opt {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        r.as_ref().map(format_rational).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| parse_rational(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Ceiling of `a / b` for positive big integers.
pub fn div_ceil(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = a.div_rem(b);
    if r.is_zero() {
        q
    } else {
        q + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_accepts_fractions_and_integers() {
        assert_eq!(parse_rational("1/2").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("-3/6").unwrap(), ratio(-1, 2));
        assert_eq!(parse_rational("7").unwrap(), int(7));
    }

    #[test]
    fn parse_rejects_decimals_and_garbage() {
        for bad in ["0.5", "1/0", "", "a/b", "1/-2", "1//2", "1e3"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn format_is_always_pq() {
        assert_eq!(format_rational(&int(3)), "3/1");
        assert_eq!(format_rational(&ratio(2, 4)), "1/2");
    }

    #[test]
    fn min_power_below_matches_examples() {
        // (1 - 0.5/2)^n < 0.5 first at n = 3
        assert_eq!(min_power_below(&ratio(3, 4), &ratio(1, 2), true), 3);
        // (1 - 0.8/2)^1 = 0.6 < 0.8
        assert_eq!(min_power_below(&ratio(3, 5), &ratio(4, 5), true), 1);
        // (0.95)^n < 0.1 first at n = 45
        assert_eq!(min_power_below(&ratio(19, 20), &ratio(1, 10), true), 45);
    }

    #[test]
    fn sqrt_bracket_encloses() {
        let (lo, hi) = sqrt_bracket(&ratio(2, 1), 40);
        assert!(&lo * &lo <= int(2) && int(2) <= &hi * &hi);
    }
}
