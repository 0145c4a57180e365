//! Exact-arithmetic helpers.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse `{0}` as a fraction (expected forms like 1/3, 0.25 or 2)")]
pub struct ParseFractionError(pub String);

/// Parses `p/q`, a decimal such as `0.3333`, or an integer, exactly.
pub fn parse_fraction(raw: &str) -> Result<Ratio<i64>, ParseFractionError> {
    let err = || ParseFractionError(raw.to_string());
    let s = raw.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| err())?;
        let q: i64 = q.trim().parse().map_err(|_| err())?;
        if q == 0 {
            return Err(err());
        }
        return Ok(Ratio::new(p, q));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.len() > 15 || !frac.bytes().all(|b| b.is_ascii_digit()) || (int.is_empty() && frac.is_empty()) {
        return Err(err());
    }
    let negative = int.starts_with('-');
    let digits = int.trim_start_matches(['-', '+']);
    if digits.is_empty() && frac.is_empty() {
        return Err(err());
    }
    let int_part: i64 = match digits {
        "" => 0,
        digits if digits.bytes().all(|b| b.is_ascii_digit()) => digits.parse().map_err(|_| err())?,
        _ => return Err(err()),
    };
    let den = 10i64.pow(frac.len() as u32);
    let frac_part: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| err())? };
    let num = int_part
        .checked_mul(den)
        .and_then(|x| x.checked_add(frac_part))
        .ok_or_else(err)?;
    Ok(Ratio::new(if negative { -num } else { num }, den))
}

/// `ceil(frac * n)` for a non-negative fraction.
pub fn ceil_times(frac: Ratio<i64>, n: usize) -> usize {
    let num = *frac.numer() as i128 * n as i128;
    let den = *frac.denom() as i128;
    num.div_euclid(den) as usize + usize::from(num.rem_euclid(den) != 0)
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn from_u128(value: u128) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        // fall back to scaled division for values outside the direct range
        let n = value.numer().to_f64().unwrap_or(f64::NAN);
        let d = value.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Renders `p/q`, or `p` for integers.
pub fn format(value: &Rational) -> String {
    if value.denom() == &BigInt::from(1) || value.numer().is_zero() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}
