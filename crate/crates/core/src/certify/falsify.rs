//! Numerical searches for evidence against coercivity and stable compactness.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::poly::rational::{round_dyadic, to_fraction_string};
use crate::reductions::StableInstance;
use crate::{Polynomial, Rational};

/// Scales `10^k` at which a ray is reported.
pub const RAY_SCALES: [u32; 4] = [0, 1, 2, 3];

/// Largest dimension for which every direction in `{-1, 0, 1}^n` is tried.
pub const LATTICE_MAX_DIM: usize = 8;

fn fractions<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(to_fraction_string))
}

fn fraction<S: Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&to_fraction_string(v))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RayValue {
    pub scale: u32,
    #[serde(serialize_with = "fraction")]
    pub value: Rational,
}

/// A ray `t -> t * direction` along which `p` stays below `gamma_hat` at every
/// reported scale `t = 10^k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    #[serde(serialize_with = "fractions")]
    pub direction: Vec<Rational>,
    #[serde(serialize_with = "fraction")]
    pub gamma_hat: Rational,
    pub values: Vec<RayValue>,
    /// Which search produced the ray.
    pub source: &'static str,
}

impl Witness {
    pub fn value_at(&self, scale: u32) -> Option<&Rational> {
        self.values.iter().find(|v| v.scale == scale).map(|v| &v.value)
    }
}

/// Directions of `{-1, 0, 1}^n \ {0}` with digit order `1, -1, 0`, first
/// coordinate most significant.
pub fn lattice_directions(n: usize) -> impl Iterator<Item = Vec<Rational>> {
    let total = if n <= LATTICE_MAX_DIM { 3usize.pow(n as u32) } else { 0 };
    let digits = [1i64, -1, 0];
    (0..total).filter_map(move |mut idx| {
        let mut v = vec![Rational::zero(); n];
        for i in (0..n).rev() {
            v[i] = Rational::from_integer(BigInt::from(digits[idx % 3]));
            idx /= 3;
        }
        (!v.iter().all(Zero::is_zero)).then_some(v)
    })
}

/// Values `c_k = p_k(v)` of the homogeneous components, so `p(t v) = sum_k c_k t^k`.
fn ray_coefficients(components: &[(u32, Polynomial)], v: &[Rational]) -> Vec<(u32, Rational)> {
    components
        .iter()
        .map(|(k, c)| (*k, c.evaluate(v).expect("direction has the polynomial's arity")))
        .collect()
}

/// `p(t v)` is bounded above on `t >= 0` exactly when its highest non-vanishing
/// positive-degree coefficient is negative.
fn bounded_above(coeffs: &[(u32, Rational)]) -> bool {
    coeffs
        .iter()
        .filter(|(k, c)| *k > 0 && !c.is_zero())
        .max_by_key(|(k, _)| *k)
        .is_none_or(|(_, c)| c.is_negative())
}

fn evaluate_ray(coeffs: &[(u32, Rational)]) -> Vec<RayValue> {
    RAY_SCALES
        .iter()
        .map(|&e| {
            let t = Rational::from_integer(num_traits::pow(BigInt::from(10), e as usize));
            let mut value = Rational::zero();
            for (k, c) in coeffs {
                value += c * num_traits::pow(t.clone(), *k as usize);
            }
            RayValue { scale: e, value }
        })
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// A uniformly distributed point of the unit sphere in `R^n`.
pub fn sphere_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn to_direction(v: &[f64]) -> Vec<Rational> {
    let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
    v.iter().map(|x| round_dyadic(x / scale, 16)).collect()
}

/// Projected gradient descent of the leading form on the unit sphere.
fn guided_direction(rng: &mut ChaCha8Rng, lead: &Polynomial, grads: &[Polynomial]) -> Vec<f64> {
    let n = grads.len();
    let mut v = sphere_sample(rng, n);
    let scale = lead.max_abs_coefficient();
    let step = 0.1 / crate::poly::rational::to_f64(&scale).max(1e-12);
    for _ in 0..60 {
        let g: Vec<f64> = grads.iter().map(|d| d.eval_f64(&v).unwrap_or(0.0)).collect();
        let radial: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
        for i in 0..n {
            v[i] -= step * (g[i] - radial * v[i]);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Searches for a ray along which `p` stays bounded above.
///
/// All of `{-1, 0, 1}^n` is tried first (when `n <= LATTICE_MAX_DIM`), then `trials`
/// further rays, alternately random and pulled toward the minimum of the leading
/// form on the unit sphere. Candidates are accepted only if `p(t v)` is bounded
/// above as a polynomial in `t`; among accepted rays the one with the smallest
/// `gamma_hat` wins, ties going to the earliest.
pub fn falsify_coercive(p: &Polynomial, trials: usize, seed: u64) -> Option<Witness> {
    let n = p.nvars();
    if n == 0 {
        return None;
    }
    let components = p.homogeneous_components();
    let lead = p.leading_form();
    let grads: Vec<Polynomial> = (0..n).map(|i| lead.derivative(i)).collect();
    let mut best: Option<Witness> = None;
    let mut consider = |dir: Vec<Rational>, source: &'static str| {
        let coeffs = ray_coefficients(&components, &dir);
        if !bounded_above(&coeffs) {
            return;
        }
        let values = evaluate_ray(&coeffs);
        let gamma_hat = values.iter().map(|v| v.value.clone()).max().expect("scales are nonempty");
        if best.as_ref().is_none_or(|b| gamma_hat < b.gamma_hat) {
            best = Some(Witness {
                direction: dir,
                gamma_hat,
                values,
                source,
            });
        }
    };
    for dir in lattice_directions(n) {
        consider(dir, "lattice");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let (v, source) = if trial % 2 == 0 {
            (sphere_sample(&mut rng, n), "random")
        } else {
            (guided_direction(&mut rng, &lead, &grads), "leading-form")
        };
        let dir = to_direction(&v);
        if dir.iter().all(Zero::is_zero) {
            continue;
        }
        consider(dir, source);
    }
    best
}

/// A lattice point where `q <= 0`, so the unit sphere meets the region `q <= 0`
/// at `direction / sqrt(norm_squared)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SphereFalsifier {
    #[serde(serialize_with = "fractions")]
    pub direction: Vec<Rational>,
    #[serde(serialize_with = "fraction")]
    pub norm_squared: Rational,
    #[serde(serialize_with = "fraction")]
    pub q: Rational,
}

impl SphereFalsifier {
    /// The normalized point when the norm is rational.
    pub fn unit_point(&self) -> Option<Vec<Rational>> {
        let num = self.norm_squared.numer().sqrt();
        let den = self.norm_squared.denom().sqrt();
        if &num * &num != *self.norm_squared.numer() || &den * &den != *self.norm_squared.denom() {
            return None;
        }
        let norm = Rational::new(num, den);
        Some(self.direction.iter().map(|x| x / &norm).collect())
    }
}

/// First direction of `{-1, 0, 1}^n` with `q <= 0`. Sphere components are
/// homogeneous, so the sign of `q` does not depend on the scale.
pub fn sphere_falsifier(si: &StableInstance) -> Option<SphereFalsifier> {
    let n = si.vars().len();
    lattice_directions(n).find_map(|dir| {
        let q = si.q_value(&dir).ok()?;
        if q.is_positive() {
            return None;
        }
        let norm_squared = dir.iter().map(|x| x * x).sum();
        Some(SphereFalsifier {
            direction: dir,
            norm_squared,
            q,
        })
    })
}

/// Smallest `q` over `samples` seeded uniform points of the unit sphere.
pub fn sphere_min_q(si: &StableInstance, samples: usize, seed: u64) -> f64 {
    let n = si.vars().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| si.q_value_f64(&sphere_sample(&mut rng, n)).unwrap_or(f64::NAN))
        .fold(f64::INFINITY, f64::min)
}
