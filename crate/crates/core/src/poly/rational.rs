//! Exact rational helpers and the `"num/den"` text form used by every file format.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational number. Always stored reduced with a positive denominator.
pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Canonical `"num/den"` rendering (denominator always printed).
pub fn to_fraction_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses the strict `"num/den"` form. The denominator must be a positive integer.
pub fn parse_fraction(s: &str) -> Result<Rational, String> {
    let (n, d) = s
        .split_once('/')
        .ok_or_else(|| format!("coefficient {s:?} is not of the form \"num/den\""))?;
    let num: BigInt = n
        .trim()
        .parse()
        .map_err(|_| format!("bad numerator in coefficient {s:?}"))?;
    let den: BigInt = d
        .trim()
        .parse()
        .map_err(|_| format!("bad denominator in coefficient {s:?}"))?;
    if !den.is_positive() {
        return Err(format!("denominator must be positive in coefficient {s:?}"));
    }
    Ok(Rational::new(num, den))
}

/// Parses either `"num/den"`, a plain integer, or a finite decimal such as `"0.25"`.
/// Used for command-line arguments where users write radii by hand.
pub fn parse_rational_lenient(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    if s.contains('/') {
        return parse_fraction(s);
    }
    if let Some((ip, fp)) = s.split_once('.') {
        let neg = ip.starts_with('-');
        let digits = format!("{}{}", ip.trim_start_matches(['-', '+']), fp);
        let num: BigInt = digits
            .parse()
            .map_err(|_| format!("cannot parse {s:?} as a rational"))?;
        let den = num_traits::pow(BigInt::from(10), fp.len());
        let r = Rational::new(num, den);
        return Ok(if neg { -r } else { r });
    }
    s.parse::<BigInt>()
        .map(Rational::from_integer)
        .map_err(|_| format!("cannot parse {s:?} as a rational"))
}

/// Nearest f64 to an exact rational (falls back to a scaled division for huge values).
pub fn to_f64(r: &Rational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift = nb - db;
    let scaled = if shift > 0 {
        Rational::new(r.numer().clone(), r.denom() << (shift as usize))
    } else {
        Rational::new(r.numer() << ((-shift) as usize), r.denom().clone())
    };
    let n = scaled.numer().to_f64().unwrap_or(0.0);
    let d = scaled.denom().to_f64().unwrap_or(1.0);
    (n / d) * 2f64.powi(shift as i32)
}

/// Exact rational value of a finite float.
pub fn from_f64(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

/// Rounds `x` to the nearest multiple of `2^-power`, exactly.
pub fn round_dyadic(x: f64, power: u32) -> Rational {
    let scale = 2f64.powi(power as i32);
    let k = (x * scale).round();
    let num = BigInt::from(k as i128);
    let den = BigInt::one() << (power as usize);
    Rational::new(num, den)
}

/// Simplest rational within `tol` of `x`, searched by continued fractions with the
/// denominator capped at `max_den`.
pub fn simplest_within(x: f64, tol: f64, max_den: u64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            return None;
        }
        let approx = h2 as f64 / k2 as f64;
        if (approx - x).abs() <= tol {
            return Some(Rational::new(BigInt::from(h2), BigInt::from(k2)));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = v - a;
        if frac == 0.0 {
            return None;
        }
        v = 1.0 / frac;
    }
    None
}

pub fn is_zero(r: &Rational) -> bool {
    r.is_zero()
}

pub fn abs(r: &Rational) -> Rational {
    r.abs()
}
