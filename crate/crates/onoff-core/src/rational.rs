//! Exact rational arithmetic helpers.
//!
//! Probabilities are `BigRational` throughout: every privacy check in this
//! crate is an exact equality, so floating point never enters probability
//! computation. Floats are derived only at the reporting boundary.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::Error;

/// Exact rational probability/weight.
pub type Rat = BigRational;

/// `n / d` as an exact rational. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rat {
    assert!(d != 0, "zero denominator");
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Rat {
    Rat::zero()
}

pub fn one() -> Rat {
    Rat::one()
}

/// True iff `r` lies in the closed unit interval.
pub fn is_probability(r: &Rat) -> bool {
    !r.is_negative() && *r <= Rat::one()
}

/// Lossy conversion for reporting and sampling only.
pub fn to_f64(r: &Rat) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

/// Parses `"p/q"` or a bare integer `"p"`.
pub fn parse_fraction(s: &str) -> crate::Result<Rat> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = num
        .parse()
        .map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
    let d: BigInt = den
        .parse()
        .map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(n, d))
}

/// Renders as `p/q` (or `p` when the denominator is 1), matching the CSV
/// convention used across the CLI.
pub fn format_fraction(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["3/4", "0", "1", "-2/5", "7"] {
            let r = parse_fraction(s).unwrap();
            assert_eq!(parse_fraction(&format_fraction(&r)).unwrap(), r);
        }
    }

    #[test]
    fn parse_rejects_zero_denominator() {
        assert!(parse_fraction("1/0").is_err());
        assert!(parse_fraction("x/2").is_err());
    }

    #[test]
    fn probability_bounds() {
        assert!(is_probability(&rat(0, 1)));
        assert!(is_probability(&rat(1, 1)));
        assert!(!is_probability(&rat(3, 2)));
        assert!(!is_probability(&rat(-1, 2)));
    }
}
