//! Exact rational helpers over `BigRational`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn int(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn big(v: &BigInt) -> Q {
    Q::from_integer(v.clone())
}

pub fn ratio(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Exact value of a finite double.
pub fn from_f64(x: f64) -> Result<Q> {
    Q::from_float(x).ok_or_else(|| Error::StageFormat(format!("{x} is not finite")))
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `x - floor(x)`.
pub fn frac(x: &Q) -> Q {
    x - x.floor()
}

/// Renders `n/d`, or `n` for integers.
pub fn format(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn parse(s: &str) -> Result<Q> {
    let bad = || Error::StageFormat(format!("`{s}` is not a rational of the form n or n/d"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Q::new(n, d))
}

pub fn parse_int(s: &str) -> Result<BigInt> {
    s.trim()
        .parse()
        .map_err(|_| Error::StageFormat(format!("`{s}` is not an integer")))
}

/// Upper bound on the square root, tight to about 1e-15 relative.
pub fn sqrt_upper(x: &Q) -> f64 {
    let v = to_f64(x).max(0.0).sqrt();
    v * (1.0 + 4.0 * f64::EPSILON) + f64::MIN_POSITIVE
}

/// A vector `(p / q, p' / q)` with a shared positive denominator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RationalVector {
    pub num: [BigInt; 2],
    pub den: BigInt,
}

impl RationalVector {
    pub fn new(p: BigInt, p2: BigInt, q: BigInt) -> Self {
        RationalVector {
            num: [p, p2],
            den: q,
        }
    }

    pub fn from_i64(p: i64, p2: i64, q: i64) -> Self {
        Self::new(BigInt::from(p), BigInt::from(p2), BigInt::from(q))
    }

    pub fn component(&self, i: usize) -> Q {
        Q::new(self.num[i].clone(), self.den.clone())
    }

    pub fn components(&self) -> [Q; 2] {
        [self.component(0), self.component(1)]
    }

    pub fn to_f64(&self) -> [f64; 2] {
        [to_f64(&self.component(0)), to_f64(&self.component(1))]
    }

    /// `k * self` split into integer part and fractional part in `[0,1)^2`.
    pub fn multiple(&self, k: &BigInt) -> ([BigInt; 2], [Q; 2]) {
        let mut ints = [BigInt::zero(), BigInt::zero()];
        let mut fracs = [Q::zero(), Q::zero()];
        for i in 0..2 {
            let (d, r) = (k * &self.num[i]).div_mod_floor(&self.den);
            ints[i] = d;
            fracs[i] = Q::new(r, self.den.clone());
        }
        (ints, fracs)
    }

    pub fn gcd_reduced_denominator(&self) -> BigInt {
        let g = self.num[0].gcd(&self.num[1]).gcd(&self.den);
        if g.is_zero() {
            self.den.clone()
        } else {
            &self.den / g
        }
    }

    /// Squared Euclidean distance to `other`, exact.
    pub fn dist_sq(&self, other: &RationalVector) -> Q {
        let a = self.components();
        let b = other.components();
        let dx = &a[0] - &b[0];
        let dy = &a[1] - &b[1];
        &dx * &dx + &dy * &dy
    }

    pub fn abs_diff(&self, other: &RationalVector) -> [Q; 2] {
        let a = self.components();
        let b = other.components();
        [(&a[0] - &b[0]).abs(), (&a[1] - &b[1]).abs()]
    }
}

/// Text form `{"num": ["p", "p'"], "den": "q"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationalVectorText {
    pub num: [String; 2],
    pub den: String,
}

impl From<&RationalVector> for RationalVectorText {
    fn from(v: &RationalVector) -> Self {
        RationalVectorText {
            num: [v.num[0].to_string(), v.num[1].to_string()],
            den: v.den.to_string(),
        }
    }
}

impl TryFrom<&RationalVectorText> for RationalVector {
    type Error = Error;
    fn try_from(t: &RationalVectorText) -> Result<Self> {
        let den = parse_int(&t.den)?;
        if !den.is_positive() {
            return Err(Error::StageFormat("denominator must be positive".into()));
        }
        Ok(RationalVector::new(
            parse_int(&t.num[0])?,
            parse_int(&t.num[1])?,
            den,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["3", "-7/2", "1/3", "0"] {
            assert_eq!(format(&parse(s).unwrap()), s);
        }
        assert_eq!(format(&parse("6/4").unwrap()), "3/2");
        assert!(parse("1/0").is_err());
        assert!(parse("x").is_err());
    }

    #[test]
    fn multiple_reduces_mod_one() {
        let a = RationalVector::from_i64(145, 96, 288);
        let (ints, fr) = a.multiple(&BigInt::from(24));
        assert_eq!(ints, [BigInt::from(12), BigInt::from(8)]);
        assert_eq!(fr[0], ratio(1, 12));
        assert!(fr[1].is_zero());
    }

    #[test]
    fn from_f64_is_exact() {
        assert_eq!(from_f64(0.375).unwrap(), ratio(3, 8));
        assert!(from_f64(f64::NAN).is_err());
    }
}
