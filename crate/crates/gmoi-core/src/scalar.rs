//! Complex scalars in two interchangeable modes.
//!
//! [`C64`] is IEEE double precision; [`CQ`] is exact arithmetic over
//! arbitrary-precision rationals. Every numerical routine of the crate is
//! generic over the [`Scalar`] trait, so the same code path produces
//! floating results with residuals and exact results with residual zero.

use std::cmp::Ordering;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::Value;

use crate::error::{GmoiError, Result};

/// Double-precision complex scalar.
pub type C64 = Complex<f64>;

/// Exact complex scalar with arbitrary-precision rational components.
pub type CQ = Complex<BigRational>;

/// Default absolute comparison tolerance for the floating mode.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Arithmetic and conversion interface shared by both scalar modes.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// `true` for the exact rational mode.
    const EXACT: bool;

    /// Short human-readable name of the mode.
    const MODE: &'static str;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;

    /// The real rational `num / den`; in float mode this rounds once.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// Converts a double-precision complex number. The exact mode uses the
    /// exact binary value of each component; non-finite inputs are rejected.
    fn from_c64(z: C64) -> Result<Self>;

    /// Nearest double-precision value.
    fn to_c64(&self) -> C64;

    /// Exact test for zero.
    fn is_zero(&self) -> bool;

    /// Complex modulus as a double.
    fn modulus(&self) -> f64 {
        self.to_c64().norm()
    }

    fn conj(&self) -> Self;

    /// Whether two values should be treated as the same point: exact
    /// equality in rational mode, `|a − b| ≤ tol` in float mode.
    fn coincides(&self, other: &Self, tol: f64) -> bool;

    /// Complex exponential, if representable in this mode.
    fn exp(&self) -> Option<Self>;

    /// Lexicographic order on (re, im); exact in rational mode.
    fn cmp_re_im(&self, other: &Self) -> Ordering {
        let (a, b) = (self.to_c64(), other.to_c64());
        a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
    }

    /// JSON form: `[re, im]` with numbers (float) or `"p/q"` strings (exact).
    fn to_json(&self) -> Value;

    /// Parses a JSON scalar: a `[re, im]` pair or a single real, where each
    /// component is a number or a decimal / `"p/q"` string.
    fn from_json(v: &Value) -> Result<Self>;

    /// `self^k` by repeated squaring.
    fn powi(&self, mut k: usize) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base.clone();
            }
            k >>= 1;
            if k > 0 {
                base = base.clone() * base;
            }
        }
        acc
    }

    /// `k!` in this scalar mode.
    fn factorial(k: usize) -> Self {
        (2..=k).fold(Self::one(), |acc, i| acc * Self::from_i64(i as i64))
    }
}

fn json_component_f64(v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| GmoiError::InvalidInput(format!("non-finite number {n}"))),
        Value::String(s) => {
            if let Some(q) = parse_rational(s) {
                q.to_f64()
                    .ok_or_else(|| GmoiError::InvalidInput(format!("rational {s} out of range")))
            } else {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| GmoiError::InvalidInput(format!("cannot parse scalar component {s:?}")))
            }
        }
        other => Err(GmoiError::InvalidInput(format!(
            "expected number or string scalar component, found {other}"
        ))),
    }
}

/// Parses `"p"`, `"p/q"` or a plain decimal such as `"-1.25"` exactly.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Ok(q) = BigRational::from_str(s) {
        return Some(q);
    }
    // Plain decimal without exponent.
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.')?;
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).ok()?;
    let den = num_traits::pow(BigInt::from(10), frac_part.len());
    let q = BigRational::new(num, den);
    Some(if neg { -q } else { q })
}

fn json_component_rational(v: &Value) -> Result<BigRational> {
    match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(BigRational::from_integer(BigInt::from(i)))
            } else if let Some(u) = n.as_u64() {
                Ok(BigRational::from_integer(BigInt::from(u)))
            } else {
                // Decimal literal: take its textual value exactly.
                let text = n.to_string();
                parse_rational(&text)
                    .or_else(|| n.as_f64().and_then(BigRational::from_float))
                    .ok_or_else(|| GmoiError::InvalidInput(format!("cannot represent {n} exactly")))
            }
        }
        Value::String(s) => parse_rational(s)
            .ok_or_else(|| GmoiError::InvalidInput(format!("cannot parse rational component {s:?}"))),
        other => Err(GmoiError::InvalidInput(format!(
            "expected number or string scalar component, found {other}"
        ))),
    }
}

fn split_json_pair(v: &Value) -> Result<(Value, Value)> {
    match v {
        Value::Array(items) if items.len() == 2 => Ok((items[0].clone(), items[1].clone())),
        Value::Array(items) => Err(GmoiError::InvalidInput(format!(
            "complex scalar must be a [re, im] pair, found {} components",
            items.len()
        ))),
        Value::Number(_) | Value::String(_) => Ok((v.clone(), Value::from(0))),
        other => Err(GmoiError::InvalidInput(format!("expected complex scalar, found {other}"))),
    }
}

/// Formats a rational as `"p"` or `"p/q"`.
pub fn rational_to_string(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl Scalar for C64 {
    const EXACT: bool = false;
    const MODE: &'static str = "float64";

    fn zero() -> Self {
        Complex::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex::new(1.0, 0.0)
    }
    fn from_i64(v: i64) -> Self {
        Complex::new(v as f64, 0.0)
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        Complex::new(num as f64 / den as f64, 0.0)
    }
    fn from_c64(z: C64) -> Result<Self> {
        if z.re.is_finite() && z.im.is_finite() {
            Ok(z)
        } else {
            Err(GmoiError::InvalidInput(format!("non-finite scalar {z}")))
        }
    }
    fn to_c64(&self) -> C64 {
        *self
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn conj(&self) -> Self {
        Complex::conj(self)
    }
    fn coincides(&self, other: &Self, tol: f64) -> bool {
        (self - other).norm() <= tol
    }
    fn exp(&self) -> Option<Self> {
        Some(Complex::exp(*self))
    }
    fn to_json(&self) -> Value {
        Value::Array(vec![Value::from(self.re), Value::from(self.im)])
    }
    fn from_json(v: &Value) -> Result<Self> {
        let (re, im) = split_json_pair(v)?;
        Ok(Complex::new(json_component_f64(&re)?, json_component_f64(&im)?))
    }
}

impl Scalar for CQ {
    const EXACT: bool = true;
    const MODE: &'static str = "exact-rational";

    fn zero() -> Self {
        Complex::new(BigRational::zero(), BigRational::zero())
    }
    fn one() -> Self {
        Complex::new(BigRational::one(), BigRational::zero())
    }
    fn from_i64(v: i64) -> Self {
        Complex::new(BigRational::from_integer(BigInt::from(v)), BigRational::zero())
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        Complex::new(
            BigRational::new(BigInt::from(num), BigInt::from(den)),
            BigRational::zero(),
        )
    }
    fn from_c64(z: C64) -> Result<Self> {
        let re = BigRational::from_float(z.re)
            .ok_or_else(|| GmoiError::NotExact(format!("non-finite component {}", z.re)))?;
        let im = BigRational::from_float(z.im)
            .ok_or_else(|| GmoiError::NotExact(format!("non-finite component {}", z.im)))?;
        Ok(Complex::new(re, im))
    }
    fn to_c64(&self) -> C64 {
        Complex::new(
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    fn modulus(&self) -> f64 {
        let sq = &self.re * &self.re + &self.im * &self.im;
        sq.to_f64().unwrap_or(f64::INFINITY).sqrt()
    }
    fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }
    fn coincides(&self, other: &Self, _tol: f64) -> bool {
        self == other
    }
    fn exp(&self) -> Option<Self> {
        if Scalar::is_zero(self) {
            Some(<Self as Scalar>::one())
        } else {
            None
        }
    }
    fn cmp_re_im(&self, other: &Self) -> Ordering {
        self.re.cmp(&other.re).then_with(|| self.im.cmp(&other.im))
    }
    fn to_json(&self) -> Value {
        Value::Array(vec![
            Value::String(rational_to_string(&self.re)),
            Value::String(rational_to_string(&self.im)),
        ])
    }
    fn from_json(v: &Value) -> Result<Self> {
        let (re, im) = split_json_pair(v)?;
        Ok(Complex::new(json_component_rational(&re)?, json_component_rational(&im)?))
    }
}

/// Builds a complex rational from two real rationals given as `(num, den)`.
pub fn cq(re: (i64, i64), im: (i64, i64)) -> CQ {
    Complex::new(
        BigRational::new(BigInt::from(re.0), BigInt::from(re.1)),
        BigRational::new(BigInt::from(im.0), BigInt::from(im.1)),
    )
}

/// Best rational approximation with denominator at most `max_den`
/// (continued-fraction convergents). Returns `None` for non-finite input.
pub fn rationalize(x: f64, max_den: i64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let neg = x < 0.0;
    let mut v = x.abs();
    let (mut p0, mut q0, mut p1, mut q1): (i128, i128, i128, i128) = (0, 1, 1, 0);
    for _ in 0..64 {
        let a = v.floor();
        if a > 1e15 {
            break;
        }
        let ai = a as i128;
        let p2 = ai * p1 + p0;
        let q2 = ai * q1 + q0;
        if q2 > max_den as i128 {
            break;
        }
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let frac = v - a;
        if frac < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    if q1 == 0 {
        return None;
    }
    let q = BigRational::new(BigInt::from(p1), BigInt::from(q1));
    Some(if neg { -q } else { q })
}

/// Absolute value of a real rational as a double.
pub fn rational_abs_f64(q: &BigRational) -> f64 {
    q.abs().to_f64().unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_field_operations_are_closed() {
        let a = cq((1, 3), (-2, 5));
        let b = cq((7, 2), (1, 1));
        let c = (a.clone() * b.clone()) / b.clone();
        assert_eq!(c, a);
        assert_eq!(a.clone() + b.clone() - b, a);
    }

    #[test]
    fn json_round_trip_both_modes() {
        let a = cq((-3, 4), (5, 1));
        let j = a.to_json();
        assert_eq!(j, serde_json::json!(["-3/4", "5"]));
        assert_eq!(CQ::from_json(&j).unwrap(), a);

        let z = C64::new(0.1, -1.0 / 3.0);
        let text = serde_json::to_string(&z.to_json()).unwrap();
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(C64::from_json(&back).unwrap(), z);
    }

    #[test]
    fn parses_decimal_and_fraction_text() {
        assert_eq!(parse_rational("-1.25").unwrap(), BigRational::new(BigInt::from(-5), BigInt::from(4)));
        assert_eq!(parse_rational("3/6").unwrap(), BigRational::new(BigInt::from(1), BigInt::from(2)));
        assert!(parse_rational("abc").is_none());
        assert_eq!(CQ::from_json(&serde_json::json!(0.5)).unwrap(), CQ::from_ratio(1, 2));
    }

    #[test]
    fn rationalize_recovers_small_fractions() {
        let q = rationalize(-2.0 / 3.0 + 1e-13, 1000).unwrap();
        assert_eq!(q, BigRational::new(BigInt::from(-2), BigInt::from(3)));
        assert_eq!(rationalize(4.0, 10).unwrap(), BigRational::from_integer(BigInt::from(4)));
    }

    #[test]
    fn factorial_and_powers() {
        assert_eq!(CQ::factorial(5), CQ::from_i64(120));
        assert_eq!(C64::from_i64(3).powi(4), C64::from_i64(81));
        assert_eq!(CQ::from_ratio(1, 2).powi(3), CQ::from_ratio(1, 8));
    }
}
