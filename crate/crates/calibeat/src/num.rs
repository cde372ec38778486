//! Numeric backends for score computation.
//!
//! All scores can be computed either in `f64` or in exact rational
//! arithmetic ([`Rat`]).  The exact backend turns the decomposition and
//! online-averaging identities into literal equalities, so tests can assert
//! `residual == 0` instead of arguing about tolerances.  The float backend
//! covers the rules whose values are irrational (spherical scores) and the
//! long-horizon runs where rationals would blow up.
//!
//! Float summations go through a Neumaier compensated accumulator: the
//! bounds being verified are `O(ln t / t)`, which at `t = 10^5..10^6` is
//! within an order of magnitude of naive summation drift.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Exact rational scalar.
pub type Rat = BigRational;

/// Running sum with backend-appropriate error control.
pub trait Accumulator<T>: Clone + Debug {
    fn new() -> Self;
    fn add(&mut self, x: &T);
    fn total(&self) -> T;
}

/// Scalar type usable for simplex points, losses, and scores.
pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + Debug
    + Display
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    /// True when arithmetic is exact (no rounding).
    const EXACT: bool;

    /// Hashable value key used to decide "same forecast value".  Exact
    /// backends key on the value itself; floats key on a rounded grid.
    type Key: Eq + Hash + Ord + Clone + Debug;

    type Acc: Accumulator<Self>;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(n: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    /// Parse either a decimal string ("0.25") or a fraction ("1/4").
    fn parse(s: &str) -> Option<Self>;
    /// Exact representation of a finite float (floats are dyadic rationals).
    fn from_f64_approx(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn abs(&self) -> Self;
    fn is_zero(&self) -> bool;
    /// Integer power; negative exponents panic on a zero base (callers keep
    /// unbounded rules away from the boundary of the simplex).
    fn powi(&self, n: i32) -> Self;
    /// Real power, available on float backends only.
    fn try_powf(&self, e: f64) -> Option<Self>;
    /// Square root, available on float backends only.
    fn try_sqrt(&self) -> Option<Self>;
    fn key(&self, tol: f64) -> Self::Key;
    fn to_json(&self) -> serde_json::Value;
    /// Canonical string form (decimal for floats, `n/d` for rationals).
    fn to_display_string(&self) -> String {
        format!("{self}")
    }
}

/// Neumaier (improved Kahan) compensated summation.
#[derive(Clone, Debug)]
pub struct NeumaierAcc {
    sum: f64,
    comp: f64,
}

impl Accumulator<f64> for NeumaierAcc {
    fn new() -> Self {
        NeumaierAcc { sum: 0.0, comp: 0.0 }
    }

    fn add(&mut self, x: &f64) {
        let x = *x;
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    type Key = i64;
    type Acc = NeumaierAcc;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_int(n: i64) -> Self {
        n as f64
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn parse(s: &str) -> Option<Self> {
        if let Some((n, d)) = s.split_once('/') {
            let n: f64 = n.trim().parse().ok()?;
            let d: f64 = d.trim().parse().ok()?;
            if d == 0.0 {
                return None;
            }
            Some(n / d)
        } else {
            s.trim().parse().ok()
        }
    }
    fn from_f64_approx(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn try_powf(&self, e: f64) -> Option<Self> {
        Some(f64::powf(*self, e))
    }
    fn try_sqrt(&self) -> Option<Self> {
        Some(f64::sqrt(*self))
    }
    fn key(&self, tol: f64) -> i64 {
        let t = if tol > 0.0 { tol } else { 1e-9 };
        (*self / t).round() as i64
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::Number::from_f64(*self)
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null)
    }
}

impl Accumulator<Rat> for Rat {
    fn new() -> Self {
        <Rat as Zero>::zero()
    }
    fn add(&mut self, x: &Rat) {
        *self += x;
    }
    fn total(&self) -> Rat {
        self.clone()
    }
}

impl Scalar for Rat {
    const EXACT: bool = true;
    type Key = Rat;
    type Acc = Rat;

    fn zero() -> Self {
        <Rat as Zero>::zero()
    }
    fn one() -> Self {
        Rat::from_integer(BigInt::from(1))
    }
    fn from_int(n: i64) -> Self {
        Rat::from_integer(BigInt::from(n))
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        Rat::new(BigInt::from(num), BigInt::from(den))
    }
    fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            return Some(Rat::new(n, d));
        }
        // Decimal string: sign, integer part, optional fraction, optional exponent.
        let (mantissa, exp10) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
            None => (s, 0),
        };
        let (int_part, frac_part) = match mantissa.split_once('.') {
            Some((a, b)) => (a, b),
            None => (mantissa, ""),
        };
        let digits = format!("{int_part}{frac_part}");
        if digits.is_empty() || digits == "-" || digits == "+" {
            return None;
        }
        let n: BigInt = digits.parse().ok()?;
        let shift = frac_part.len() as i32 - exp10;
        let ten = BigInt::from(10);
        Some(if shift >= 0 {
            Rat::new(n, num_traits::pow::pow(ten, shift as usize))
        } else {
            Rat::from_integer(n * num_traits::pow::pow(ten, (-shift) as usize))
        })
    }
    fn from_f64_approx(x: f64) -> Self {
        Rat::from_float(x).expect("finite float")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn powi(&self, n: i32) -> Self {
        use num_traits::Pow;
        Pow::pow(self, n)
    }
    fn try_powf(&self, e: f64) -> Option<Self> {
        if e.fract() == 0.0 && (i32::MIN as f64..=i32::MAX as f64).contains(&e) {
            Some(self.powi(e as i32))
        } else {
            None
        }
    }
    fn try_sqrt(&self) -> Option<Self> {
        None
    }
    fn key(&self, _tol: f64) -> Rat {
        self.clone()
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_display_string())
    }
    fn to_display_string(&self) -> String {
        // Prefer an exact decimal when the denominator is 2^a * 5^b.
        let mut den = self.denom().clone();
        let mut twos = 0u32;
        let mut fives = 0u32;
        let two = BigInt::from(2);
        let five = BigInt::from(5);
        while (&den % &two).is_zero() {
            den /= &two;
            twos += 1;
        }
        while (&den % &five).is_zero() {
            den /= &five;
            fives += 1;
        }
        if den == BigInt::from(1) {
            let k = twos.max(fives);
            let scale = num_traits::pow::pow(BigInt::from(10), k as usize);
            let scaled = self.numer() * &scale / self.denom();
            let neg = scaled.is_negative();
            let digits = scaled.abs().to_string();
            let digits = format!("{:0>width$}", digits, width = (k as usize) + 1);
            let (int_part, frac_part) = digits.split_at(digits.len() - k as usize);
            let sign = if neg { "-" } else { "" };
            if frac_part.is_empty() {
                format!("{sign}{int_part}")
            } else {
                format!("{sign}{int_part}.{frac_part}")
            }
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

/// Sum an iterator with the backend's accumulator.
pub fn sum_iter<'a, T: Scalar>(items: impl IntoIterator<Item = &'a T>) -> T {
    let mut acc = T::Acc::new();
    for x in items {
        acc.add(x);
    }
    acc.total()
}
