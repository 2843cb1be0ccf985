//! Exact rational numbers and the scalar abstraction shared by all distance
//! computations.
//!
//! [`Rational`] wraps `Ratio<i128>` with overflow-checked arithmetic. Every
//! quantity at desk scale (distances, weights, breakpoints, heights) has small
//! denominators, so 128-bit numerators and denominators are far from their
//! limits; an overflow panics with a clear message instead of wrapping.
//!
//! [`Scalar`] lets the metric-space algorithms run either on `Rational`
//! (exact mode) or on `f64` (approximate mode for larger instances).

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::Ratio;
use num::traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, Zero};
use num::{Integer, ToPrimitive};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of fractional digits used by [`Rational::to_decimal`] in reports.
pub const DECIMAL_DIGITS: usize = 12;

/// Rounding convention of every decimal rendering produced by this crate.
pub const DECIMAL_ROUNDING: &str = "round-half-even, 12 fractional digits";

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Rational(Ratio<i128>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {input:?} as a rational: {reason}")]
pub struct ParseRationalError {
    pub input: String,
    pub reason: &'static str,
}

#[track_caller]
fn overflow(op: &str) -> ! {
    panic!("exact rational arithmetic overflowed in {op}")
}

impl Rational {
    pub const ZERO: Rational = Rational(Ratio::new_raw(0, 1));
    pub const ONE: Rational = Rational(Ratio::new_raw(1, 1));

    /// `numer / denom`, reduced. Panics when `denom == 0`.
    pub fn new(numer: i128, denom: i128) -> Self {
        assert!(denom != 0, "rational with zero denominator");
        Rational(Ratio::new(numer, denom))
    }

    pub fn from_integer(n: i128) -> Self {
        Rational(Ratio::from_integer(n))
    }

    pub fn numer(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i128 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rational(self.0.recip())
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn to_f64(&self) -> f64 {
        match (self.numer().to_f64(), self.denom().to_f64()) {
            (Some(n), Some(d)) => n / d,
            _ => f64::NAN,
        }
    }

    /// Exact square root when `self` is the square of a rational.
    pub fn sqrt_exact(&self) -> Option<Rational> {
        if self.is_negative() {
            return None;
        }
        let n = isqrt(self.numer())?;
        let d = isqrt(self.denom())?;
        Some(Rational::new(n, d))
    }

    /// Decimal rendering with [`DECIMAL_DIGITS`] fractional digits,
    /// rounded half-to-even.
    pub fn to_decimal(&self) -> String {
        self.to_decimal_digits(DECIMAL_DIGITS)
    }

    pub fn to_decimal_digits(&self, digits: usize) -> String {
        let numer = BigInt::from(self.numer());
        let denom = BigInt::from(self.denom());
        let negative = numer.is_negative();
        let scale = num::pow(BigInt::from(10), digits);
        let scaled = numer.abs() * &scale;
        let (mut q, r): (BigInt, BigInt) = scaled.div_rem(&denom);
        let twice: BigInt = r * 2;
        match twice.cmp(&denom) {
            Ordering::Greater => q += 1,
            Ordering::Equal if q.is_odd() => q += 1,
            _ => {}
        }
        let (int_part, frac_part) = q.div_rem(&scale);
        let mut s = String::new();
        if negative && !(int_part.is_zero() && frac_part.is_zero()) {
            s.push('-');
        }
        s.push_str(&int_part.to_string());
        if digits > 0 {
            let frac = frac_part.to_string();
            s.push('.');
            for _ in frac.len()..digits {
                s.push('0');
            }
            s.push_str(&frac);
        }
        s
    }

    /// Parses `p`, `p/q`, or a decimal literal with optional exponent
    /// (`0.25`, `-1.5e-3`). Decimal input is converted exactly.
    pub fn parse(input: &str) -> Result<Self, ParseRationalError> {
        let err = |reason| ParseRationalError { input: input.to_string(), reason };
        let s = input.trim();
        if s.is_empty() {
            return Err(err("empty string"));
        }
        if let Some((p, q)) = s.split_once('/') {
            let p: i128 = p.trim().parse().map_err(|_| err("bad numerator"))?;
            let q: i128 = q.trim().parse().map_err(|_| err("bad denominator"))?;
            if q == 0 {
                return Err(err("zero denominator"));
            }
            return Ok(Rational::new(p, q));
        }
        let (mantissa, exponent) = match s.find(['e', 'E']) {
            Some(i) => {
                let e: i32 = s[i + 1..].parse().map_err(|_| err("bad exponent"))?;
                (&s[..i], e)
            }
            None => (s, 0),
        };
        let (negative, digits) = match mantissa.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
        };
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err("no digits"));
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return Err(err("invalid character"));
        }
        let mut numer: i128 = 0;
        for c in int_part.chars().chain(frac_part.chars()) {
            numer = numer
                .checked_mul(10)
                .and_then(|n| n.checked_add(i128::from(c as u8 - b'0')))
                .ok_or_else(|| err("too many digits"))?;
        }
        let exp10 = exponent - frac_part.len() as i32;
        let pow = 10i128
            .checked_pow(exp10.unsigned_abs())
            .ok_or_else(|| err("exponent out of range"))?;
        let value = if exp10 >= 0 {
            Rational::from_integer(numer.checked_mul(pow).ok_or_else(|| err("exponent out of range"))?)
        } else {
            Rational::new(numer, pow)
        };
        Ok(if negative { -value } else { value })
    }
}

fn isqrt(n: i128) -> Option<i128> {
    if n < 0 {
        return None;
    }
    let mut r = (n as f64).sqrt() as i128;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    (r * r == n).then_some(r)
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = ParseRationalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rational::parse(s)
    }
}

impl From<i128> for Rational {
    fn from(n: i128) -> Self {
        Rational::from_integer(n)
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(i128::from(n))
    }
}

impl From<i32> for Rational {
    fn from(n: i32) -> Self {
        Rational::from_integer(i128::from(n))
    }
}

macro_rules! checked_binop {
    ($tr:ident, $method:ident, $checked:ident, $name:literal) => {
        impl $tr for Rational {
            type Output = Rational;
            #[track_caller]
            fn $method(self, rhs: Rational) -> Rational {
                match self.0.$checked(&rhs.0) {
                    Some(v) => Rational(v),
                    None => overflow($name),
                }
            }
        }
        impl<'a> $tr<&'a Rational> for Rational {
            type Output = Rational;
            #[track_caller]
            fn $method(self, rhs: &'a Rational) -> Rational {
                $tr::$method(self, *rhs)
            }
        }
        impl<'a> $tr<Rational> for &'a Rational {
            type Output = Rational;
            #[track_caller]
            fn $method(self, rhs: Rational) -> Rational {
                $tr::$method(*self, rhs)
            }
        }
        impl<'a, 'b> $tr<&'b Rational> for &'a Rational {
            type Output = Rational;
            #[track_caller]
            fn $method(self, rhs: &'b Rational) -> Rational {
                $tr::$method(*self, *rhs)
            }
        }
    };
}

checked_binop!(Add, add, checked_add, "addition");
checked_binop!(Sub, sub, checked_sub, "subtraction");
checked_binop!(Mul, mul, checked_mul, "multiplication");

impl Div for Rational {
    type Output = Rational;
    #[track_caller]
    fn div(self, rhs: Rational) -> Rational {
        assert!(!rhs.is_zero(), "rational division by zero");
        match self.0.checked_div(&rhs.0) {
            Some(v) => Rational(v),
            None => overflow("division"),
        }
    }
}

impl<'a> Div<&'a Rational> for &'a Rational {
    type Output = Rational;
    #[track_caller]
    fn div(self, rhs: &'a Rational) -> Rational {
        *self / *rhs
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl AddAssign for Rational {
    #[track_caller]
    fn add_assign(&mut self, rhs: Rational) {
        *self = *self + rhs;
    }
}

impl SubAssign for Rational {
    #[track_caller]
    fn sub_assign(&mut self, rhs: Rational) {
        *self = *self - rhs;
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::ZERO, |a, b| a + *b)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        rational_from_json(&value).map_err(serde::de::Error::custom)
    }
}

/// Reads a rational from a JSON string (`"p/q"`, `"0.25"`) or a JSON number.
pub fn rational_from_json(value: &serde_json::Value) -> Result<Rational, ParseRationalError> {
    match value {
        serde_json::Value::String(s) => Rational::parse(s),
        serde_json::Value::Number(n) => Rational::parse(&n.to_string()),
        other => Err(ParseRationalError {
            input: other.to_string(),
            reason: "expected a string or a number",
        }),
    }
}

/// Arithmetic needed by the metric-space algorithms. Implemented exactly by
/// [`Rational`] and approximately, with comparison tolerances, by `f64`.
pub trait Scalar:
    Clone
    + PartialOrd
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    /// `true` for exact arithmetic.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(q: &Rational) -> Self;
    fn to_f64(&self) -> f64;

    /// Default tolerance under which two distances count as equal
    /// (zero in exact mode).
    fn tolerance() -> Self;

    fn near_zero(&self) -> bool {
        let t = Self::tolerance();
        *self <= t && *self >= -t
    }

    fn is_positive(&self) -> bool {
        *self > Self::tolerance()
    }

    /// `self <= other` up to [`Scalar::tolerance`].
    fn le_tol(&self, other: &Self) -> bool {
        self.clone() <= other.clone() + Self::tolerance()
    }

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Exact text for rationals; `None` for floats.
    fn exact_text(&self) -> Option<String>;

    fn from_int(n: i64) -> Self {
        Self::from_rational(&Rational::from(n))
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Rational::ZERO
    }
    fn one() -> Self {
        Rational::ONE
    }
    fn from_rational(q: &Rational) -> Self {
        *q
    }
    fn to_f64(&self) -> f64 {
        Rational::to_f64(self)
    }
    fn tolerance() -> Self {
        Rational::ZERO
    }
    fn near_zero(&self) -> bool {
        self.is_zero()
    }
    fn is_positive(&self) -> bool {
        Rational::is_positive(self)
    }
    fn le_tol(&self, other: &Self) -> bool {
        self <= other
    }
    fn exact_text(&self) -> Option<String> {
        Some(self.to_string())
    }
}

/// Float comparison tolerance, also the default distance-0 merge tolerance.
pub const FLOAT_TOLERANCE: f64 = 1e-12;

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_rational(q: &Rational) -> Self {
        q.to_f64()
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn tolerance() -> Self {
        FLOAT_TOLERANCE
    }
    fn exact_text(&self) -> Option<String> {
        None
    }
}
