use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};
use serde::Serialize;

use super::CertifyError;
use crate::reductions::{Pop, Sense};
use crate::Polynomial;

/// `bit(eta) = floor(log2 eta) + 1` for `eta >= 1`, i.e. the binary length of `eta`.
pub fn bit(eta: &BigUint) -> u64 {
    eta.bits()
}

/// Radius of a ball guaranteed to contain a bounded basic closed set given by `m`
/// integer polynomials of degree at most `d` in `n` variables with coefficient
/// bit size at most `tau`:
///
/// `sqrt(n) * (b + 1) * 2^((2nd + 2) * b * (2 tau + bit(b) + (n + 1) bit(d + 1) + bit(m)))`
/// with `b = (2d + 1)(2d)^(n - 1)`.
///
/// The value is kept symbolic as `sqrt(radicand) * mantissa * 2^exponent`, where
/// `radicand` is the square-free part of `n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RadiusBound {
    pub n: u64,
    pub d: u64,
    pub m: u64,
    pub tau: u64,
    pub radicand: u64,
    #[serde(serialize_with = "as_decimal")]
    pub mantissa: BigUint,
    #[serde(serialize_with = "as_decimal")]
    pub exponent: BigUint,
    /// Smallest `k` with `R <= 2^k`.
    #[serde(serialize_with = "as_decimal")]
    pub log2_ceil: BigUint,
    /// Binary length convention used for `bit`.
    pub bit_convention: &'static str,
}

fn as_decimal<S: serde::Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

fn split_square(n: u64) -> (u64, u64) {
    // n = outside^2 * radicand with radicand square-free
    let mut outside = 1;
    let mut rest = n;
    let mut f = 2;
    while f * f <= rest {
        while rest.is_multiple_of(f * f) {
            rest /= f * f;
            outside *= f;
        }
        f += 1;
    }
    (outside, rest)
}

impl RadiusBound {
    pub fn new(n: u64, d: u64, m: u64, tau: u64) -> Result<Self, CertifyError> {
        if n == 0 || d == 0 || m == 0 || tau == 0 {
            return Err(CertifyError::Parameter(format!(
                "radius bound needs n, d, m, tau >= 1 (got n={n}, d={d}, m={m}, tau={tau})"
            )));
        }
        let b = BigUint::from(2 * d + 1) * BigUint::from(2 * d).pow((n - 1) as u32);
        let inner = BigUint::from(2 * tau)
            + bit(&b)
            + BigUint::from(n + 1) * bit(&BigUint::from(d + 1))
            + bit(&BigUint::from(m));
        let exponent = BigUint::from(2 * n * d + 2) * &b * inner;
        let (outside, radicand) = split_square(n);
        let mantissa = (&b + BigUint::one()) * outside;
        let log2_ceil = &exponent + half_log2_ceil(&(BigUint::from(radicand) * &mantissa * &mantissa));
        Ok(RadiusBound {
            n,
            d,
            m,
            tau,
            radicand,
            mantissa,
            exponent,
            log2_ceil,
            bit_convention: "bit(eta) = floor(log2(eta)) + 1",
        })
    }

    /// Recomputes the value from the recorded inputs and compares.
    pub fn is_consistent(&self) -> bool {
        RadiusBound::new(self.n, self.d, self.m, self.tau).is_ok_and(|r| r == *self)
    }

    /// `R^2 = radicand * mantissa^2 * 4^exponent`, if the exponent is small enough
    /// to materialize.
    pub fn squared(&self) -> Option<BigUint> {
        let e = self.exponent.to_u64().filter(|&e| e <= 1 << 24)?;
        Some((BigUint::from(self.radicand) * &self.mantissa * &self.mantissa) << (2 * e))
    }

    /// The exact value when `n` has no square-free part, i.e. `R` is an integer.
    pub fn integer_value(&self) -> Option<BigUint> {
        if self.radicand != 1 {
            return None;
        }
        let e = self.exponent.to_u64().filter(|&e| e <= 1 << 24)?;
        Some(&self.mantissa << e)
    }

    fn squared_parts(&self) -> (BigUint, &BigUint) {
        (BigUint::from(self.radicand) * &self.mantissa * &self.mantissa, &self.exponent)
    }
}

/// `ceil(log2(t) / 2)` for `t >= 1`.
fn half_log2_ceil(t: &BigUint) -> BigUint {
    let l = if t.is_one() { 0 } else { (t - BigUint::one()).bits() };
    BigUint::from(l.div_ceil(2))
}

impl Ord for RadiusBound {
    fn cmp(&self, other: &Self) -> Ordering {
        // compare a * 4^ea with b * 4^eb
        let ((a, ea), (b, eb)) = (self.squared_parts(), other.squared_parts());
        let order = match ea.cmp(eb) {
            Ordering::Equal => a.cmp(&b),
            Ordering::Greater => shifted_cmp(&a, &(ea - eb), &b),
            Ordering::Less => shifted_cmp(&b, &(eb - ea), &a).reverse(),
        };
        order.then_with(|| (self.n, self.d, self.m, self.tau).cmp(&(other.n, other.d, other.m, other.tau)))
    }
}

impl PartialOrd for RadiusBound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Compares `a * 4^shift` with `b` for `shift > 0`.
fn shifted_cmp(a: &BigUint, shift: &BigUint, b: &BigUint) -> Ordering {
    match shift.to_u64() {
        Some(s) if 2 * s <= b.bits() + 2 => (a << (2 * s)).cmp(b),
        _ => Ordering::Greater,
    }
}

impl fmt::Display for RadiusBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.radicand != 1 {
            write!(f, "sqrt({})*", self.radicand)?;
        }
        write!(f, "{}*2^{}", self.mantissa, self.exponent)
    }
}

/// Generators of a closed set: `ge0` constraints as they are and `eq0` constraints
/// as the pair `p >= 0`, `-p >= 0`.
pub fn closed_generators(set: &Pop) -> Result<Vec<Polynomial>, CertifyError> {
    let mut out = Vec::new();
    for (i, c) in set.constraints.iter().enumerate() {
        match c.sense {
            Sense::Ge0 => out.push(c.poly.clone()),
            Sense::Eq0 => {
                out.push(c.poly.clone());
                out.push(-&c.poly);
            }
            Sense::Gt0 => return Err(CertifyError::StrictConstraint(i)),
        }
    }
    Ok(out)
}

/// [`closed_generators`], each scaled by the least common multiple of its
/// denominators.
pub fn integer_generators(set: &Pop) -> Result<Vec<Polynomial>, CertifyError> {
    Ok(closed_generators(set)?.iter().map(clear_denominators).collect())
}

fn clear_denominators(p: &Polynomial) -> Polynomial {
    let l = p
        .terms()
        .fold(BigInt::one(), |acc, (_, c)| acc.lcm(c.denom()));
    p.scale(&crate::Rational::from_integer(l))
}

/// The radius bound for a closed set, with `tau` measured on the integer
/// generators.
pub fn radius_for_set(set: &Pop) -> Result<RadiusBound, CertifyError> {
    let gens = integer_generators(set)?;
    let n = set.vars().len() as u64;
    let d = gens.iter().map(|g| g.degree() as u64).max().unwrap_or(0);
    let tau = gens
        .iter()
        .flat_map(|g| g.terms().map(|(_, c)| c.numer().abs().magnitude().bits()).collect::<Vec<_>>())
        .max()
        .unwrap_or(0);
    RadiusBound::new(n, d.max(1), gens.len() as u64, tau)
}
