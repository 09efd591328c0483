//! Numeric backends.
//!
//! Every algebraic routine in the crate is generic over [`Scalar`], which is
//! implemented for `f64` (search, simulation) and for arbitrary-precision
//! [`Rational`] (constructions and certificates). Rationals compare exactly;
//! tolerances passed to them are converted exactly before use.

use std::fmt::{Debug, Display};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg;

/// Exact rational number with unbounded numerator and denominator.
pub type Rational = BigRational;

/// Relative singular-value cutoff used by the floating-point rank.
pub const RANK_RTOL: f64 = 1e-9;

pub trait Scalar: Num + Signed + Clone + PartialOrd + Debug + Display + Send + Sync + 'static {
    /// True for backends with exact arithmetic.
    const EXACT: bool;

    /// Absolute tolerance on the total mass of a probability vector.
    const MASS_TOL: f64;

    /// Default tolerance under which two components are merged.
    const MERGE_TOL: f64;

    fn to_f64(&self) -> f64;

    /// Exact conversion of a finite float. Non-finite input is rejected.
    fn from_f64(x: f64) -> Result<Self>;

    fn from_u64(x: u64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self;

    /// `|self - other| <= tol`, evaluated exactly on exact backends.
    fn within(&self, other: &Self, tol: f64) -> bool {
        let diff = (self.clone() - other.clone()).abs();
        match Self::from_f64(tol) {
            Ok(t) => diff <= t,
            Err(_) => false,
        }
    }

    /// Rank of `diag(sqrt(row_weights)) * rows`.
    ///
    /// Exact backends ignore the (strictly positive) row weights since they
    /// cannot change the rank; the float backend applies them so that the
    /// singular values are those of the Gram-faithful matrix.
    fn weighted_rank(rows: &[Vec<Self>], row_weights: &[f64]) -> usize;

    fn to_json(&self) -> Value;

    fn from_json(v: &Value) -> Result<Self>;
}

impl Scalar for f64 {
    const EXACT: bool = false;
    const MASS_TOL: f64 = 1e-12;
    const MERGE_TOL: f64 = 1e-10;

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_f64(x: f64) -> Result<Self> {
        if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::Parse(format!("non-finite value {x}")))
        }
    }

    fn from_u64(x: u64) -> Self {
        x as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn within(&self, other: &Self, tol: f64) -> bool {
        (self - other).abs() <= tol
    }

    fn weighted_rank(rows: &[Vec<f64>], row_weights: &[f64]) -> usize {
        let nrows = rows.len();
        if nrows == 0 {
            return 0;
        }
        let ncols = rows[0].len();
        if ncols == 0 {
            return 0;
        }
        let m = DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j] * row_weights[i].sqrt());
        let sv = m.svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
        if smax == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > RANK_RTOL * smax).count()
    }

    fn to_json(&self) -> Value {
        serde_json::Number::from_f64(*self)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            Value::Number(n) => n.as_f64().ok_or_else(|| Error::Parse(format!("bad number {n}"))),
            Value::String(s) => ToPrimitive::to_f64(&parse_rational(s)?)
                .ok_or_else(|| Error::Parse(format!("rational {s} out of f64 range"))),
            other => Err(Error::Parse(format!("expected a number, got {other}"))),
        }
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;
    const MASS_TOL: f64 = 0.0;
    const MERGE_TOL: f64 = 0.0;

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_f64(x: f64) -> Result<Self> {
        BigRational::from_float(x).ok_or_else(|| Error::Parse(format!("non-finite value {x}")))
    }

    fn from_u64(x: u64) -> Self {
        <BigRational as FromPrimitive>::from_u64(x).expect("u64 is representable")
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn weighted_rank(rows: &[Vec<Rational>], _row_weights: &[f64]) -> usize {
        linalg::rank(rows)
    }

    fn to_json(&self) -> Value {
        Value::String(self.to_string())
    }

    fn from_json(v: &Value) -> Result<Self> {
        match v {
            // Decimal literals are parsed from their text so that 0.3 means 3/10.
            Value::Number(n) => parse_rational(&n.to_string()),
            Value::String(s) => parse_rational(s),
            other => Err(Error::Parse(format!("expected a rational, got {other}"))),
        }
    }
}

/// Parses `"p/q"`, an integer, or a decimal literal (optionally with an
/// exponent) into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("cannot parse {s:?} as a rational"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(BigRational::new(p, q));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits.parse().map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(num);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if neg { -r } else { r })
}

/// Sum of a slice of scalars.
pub fn sum<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |acc, x| acc + x.clone())
}

/// Max-abs distance between two equal-length vectors.
pub fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.clone() - y.clone()).abs())
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
}

/// Integer power by repeated multiplication.
pub fn powi<T: Scalar>(x: &T, k: usize) -> T {
    let mut out = T::one();
    for _ in 0..k {
        out = out * x.clone();
    }
    out
}

/// Converts a vector between backends through `f64`.
pub fn convert_vec<A: Scalar, B: Scalar>(xs: &[A]) -> Result<Vec<B>> {
    xs.iter().map(|x| B::from_f64(x.to_f64())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn parses_rational_forms() {
        assert_eq!(parse_rational("1/18").unwrap(), q(1, 18));
        assert_eq!(parse_rational("-3").unwrap(), q(-3, 1));
        assert_eq!(parse_rational("0.3").unwrap(), q(3, 10));
        assert_eq!(parse_rational("2.5e-1").unwrap(), q(1, 4));
        assert_eq!(parse_rational("1E2").unwrap(), q(100, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational(".").is_err());
    }

    #[test]
    fn json_round_trip() {
        let x = q(-7, 3);
        assert_eq!(x.to_json(), Value::String("-7/3".into()));
        assert_eq!(Rational::from_json(&x.to_json()).unwrap(), x);
        let v: Value = serde_json::from_str("0.1").unwrap();
        assert_eq!(Rational::from_json(&v).unwrap(), q(1, 10));
        assert_eq!(f64::from_json(&Value::String("1/4".into())).unwrap(), 0.25);
    }

    #[test]
    fn exact_within() {
        assert!(q(1, 3).within(&q(1, 3), 0.0));
        assert!(!q(1, 3).within(&q(1, 3 + 1), 0.0));
        assert!(0.1_f64.within(&0.1000001, 1e-6));
    }

    #[test]
    fn float_rank_respects_weights() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1e-12]];
        assert_eq!(f64::weighted_rank(&rows, &[1.0, 1.0]), 1);
        assert_eq!(f64::weighted_rank(&rows, &[1.0, 1e12]), 2);
    }
}
