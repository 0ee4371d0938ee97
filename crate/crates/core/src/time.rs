//! Exact rational time in token-time units.
//!
//! One unit is the time needed to process a single token with no attention
//! overhead. Every time and cost in the crate is an exact rational so that
//! analytic identities can be compared with `==` instead of a tolerance.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive};

use crate::error::Error;

/// Exact rational used for times, cost coefficients and fractions.
pub type Rational = Ratio<i128>;

/// A point in time (or a duration) measured in token-time units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Time(Rational);

impl Time {
    pub const ZERO: Time = Time(Ratio::new_raw(0, 1));

    pub fn from_int(v: i64) -> Self {
        Time(Rational::from_integer(v as i128))
    }

    pub fn new(numer: i128, denom: i128) -> Self {
        Time(Rational::new(numer, denom))
    }

    pub fn from_rational(r: Rational) -> Self {
        Time(r)
    }

    pub fn as_rational(&self) -> Rational {
        self.0
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// Largest integer not above this time.
    pub fn floor_int(&self) -> i128 {
        self.0.floor().to_integer()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Rounds `x` to the nearest multiple of `1 / denom`.
    pub fn from_f64_rounded(x: f64, denom: i128) -> Result<Self, Error> {
        if !x.is_finite() {
            return Err(Error::Parse(format!("non-finite time {x}")));
        }
        let scaled = (x * denom as f64).round();
        if scaled.abs() >= i128::MAX as f64 / 4.0 {
            return Err(Error::Overflow);
        }
        Ok(Time(Rational::new(scaled as i128, denom)))
    }

    /// Renders the exact value as a decimal string when the denominator has
    /// only factors 2 and 5, otherwise as `numer/denom`.
    pub fn to_exact_string(&self) -> String {
        format_rational(&self.0)
    }

    /// True when [`Time::to_exact_string`] yields a plain decimal.
    pub fn is_terminating_decimal(&self) -> bool {
        decimal_scale(*self.0.denom()).is_some()
    }
}

impl Default for Time {
    fn default() -> Self {
        Time::ZERO
    }
}

impl From<Rational> for Time {
    fn from(r: Rational) -> Self {
        Time(r)
    }
}

impl Add for Time {
    type Output = Time;
    fn add(self, rhs: Time) -> Time {
        Time(self.0 + rhs.0)
    }
}

impl AddAssign for Time {
    fn add_assign(&mut self, rhs: Time) {
        self.0 += rhs.0;
    }
}

impl Sub for Time {
    type Output = Time;
    fn sub(self, rhs: Time) -> Time {
        Time(self.0 - rhs.0)
    }
}

impl Mul<Rational> for Time {
    type Output = Time;
    fn mul(self, rhs: Rational) -> Time {
        Time(self.0 * rhs)
    }
}

impl Sum for Time {
    fn sum<I: Iterator<Item = Time>>(iter: I) -> Time {
        iter.fold(Time::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

impl FromStr for Time {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        parse_rational(s).map(Time)
    }
}

/// Returns the power of ten that clears `denom`, if one exists.
fn decimal_scale(denom: i128) -> Option<u32> {
    let mut d = denom;
    let (mut twos, mut fives) = (0u32, 0u32);
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    (d == 1).then_some(twos.max(fives))
}

pub fn format_rational(r: &Rational) -> String {
    let (numer, denom) = (*r.numer(), *r.denom());
    if denom == 1 {
        return numer.to_string();
    }
    let Some(digits) = decimal_scale(denom) else {
        return format!("{numer}/{denom}");
    };
    let Some(scaled) = 10i128
        .checked_pow(digits)
        .and_then(|p| numer.checked_mul(p / denom))
    else {
        return format!("{numer}/{denom}");
    };
    let sign = if scaled < 0 { "-" } else { "" };
    let abs = scaled.unsigned_abs();
    let pow = 10u128.pow(digits);
    let frac = format!("{:0width$}", abs % pow, width = digits as usize);
    let frac = frac.trim_end_matches('0');
    format!("{sign}{}.{frac}", abs / pow)
}

/// Parses `12`, `-0.25`, `1.5e3`, `3/4` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational, Error> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid number {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| bad())?;
        let d: i128 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = s[i + 1..].parse().map_err(|_| bad())?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }

    let mut numer: i128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        numer = numer
            .checked_mul(10)
            .and_then(|v| v.checked_add(c.to_digit(10).unwrap() as i128))
            .ok_or(Error::Overflow)?;
    }
    let scale = exponent - frac_part.len() as i32;
    let pow = 10i128
        .checked_pow(scale.unsigned_abs())
        .ok_or(Error::Overflow)?;
    let mut r = if scale >= 0 {
        Rational::from_integer(numer.checked_mul(pow).ok_or(Error::Overflow)?)
    } else {
        Rational::new(numer, pow)
    };
    if negative {
        r = -r;
    }
    Ok(r)
}

/// `ceil(r)` as an integer.
pub fn ceil_int(r: Rational) -> i128 {
    r.ceil().to_integer()
}

/// `ceil(a / b)` for positive integers.
pub fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

pub(crate) fn rational_from_usize(v: usize) -> Rational {
    Rational::from_integer(v as i128)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_integers_decimals_and_fractions() {
        assert_eq!(Time::from_int(24).to_string(), "24");
        assert_eq!(Time::new(3, 2).to_string(), "1.5");
        assert_eq!(Time::new(-1, 8).to_string(), "-0.125");
        assert_eq!(Time::new(1, 1000).to_string(), "0.001");
        assert_eq!(Time::new(1, 3).to_string(), "1/3");
        assert_eq!(Time::ZERO.to_string(), "0");
    }

    #[test]
    fn parses_decimal_forms() {
        assert_eq!("12".parse::<Time>().unwrap(), Time::from_int(12));
        assert_eq!("0.5".parse::<Time>().unwrap(), Time::new(1, 2));
        assert_eq!("1.5e3".parse::<Time>().unwrap(), Time::from_int(1500));
        assert_eq!("25E-2".parse::<Time>().unwrap(), Time::new(1, 4));
        assert_eq!("-3/6".parse::<Time>().unwrap(), Time::new(-1, 2));
        assert_eq!(".75".parse::<Time>().unwrap(), Time::new(3, 4));
        assert!("abc".parse::<Time>().is_err());
        assert!("1/0".parse::<Time>().is_err());
        assert!("".parse::<Time>().is_err());
        assert!("1.2.3".parse::<Time>().is_err());
    }

    #[test]
    fn rounding_from_float() {
        let t = Time::from_f64_rounded(0.1234567891, 1_000_000_000).unwrap();
        assert_eq!(t, Time::new(123_456_789, 1_000_000_000));
        assert!(Time::from_f64_rounded(f64::NAN, 10).is_err());
    }

    #[test]
    fn display_parse_round_trip() {
        for (n, d) in [
            (0, 1),
            (7, 1),
            (1, 2),
            (-5, 4),
            (123456789, 1000),
            (1, 3),
            (22, 7),
        ] {
            let t = Time::new(n, d);
            assert_eq!(t.to_string().parse::<Time>().unwrap(), t);
        }
    }
}
