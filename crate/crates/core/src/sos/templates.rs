//! Identity templates for the certifiers.

use num_traits::{One, Signed};

use super::{SosError, SosTemplate};
use crate::poly::{Polynomial, Rational};
use crate::reductions::StableInstance;

/// Largest generator count for the full product template (2^(m+1) products).
pub const PRODUCT_CAP: usize = 6;

/// `name`, or `name_1`, `name_2`, ... if taken.
pub fn fresh_var(taken: &[String], name: &str) -> String {
    if !taken.iter().any(|v| v == name) {
        return name.to_string();
    }
    (1..)
        .map(|i| format!("{name}_{i}"))
        .find(|c| !taken.iter().any(|v| v == c))
        .expect("unbounded search")
}

/// `sum_i x_i^2` over the first `count` variables of `vars`.
pub fn squared_norm(vars: &[String], count: usize) -> Polynomial {
    (0..count).fold(Polynomial::zero(vars.to_vec()), |acc, i| {
        acc + Polynomial::variable(vars.to_vec(), i).square()
    })
}

fn even_floor(v: i64) -> u32 {
    let v = v.max(0) as u32;
    v - v % 2
}

/// Coercivity at level `r` for a polynomial of degree `d` over `(x, gamma)`:
///
/// `-1 = s0 + s1 (gamma - p) + s2 (|x|^2 - gamma^(2r) - 2^r) + s3 (gamma - p)(|x|^2 - gamma^(2r) - 2^r)`
///
/// with degree bounds `4r`, `max(4r - d, 0)`, `2r`, `max(2r - d, 0)`, each rounded down
/// to an even number. Feasibility puts every sublevel set `{p <= gamma}` inside the
/// ball of radius `sqrt(gamma^(2r) + 2^r)`.
pub fn coercivity_template(p: &Polynomial, r: u32) -> Result<SosTemplate, SosError> {
    if r < 1 {
        return Err(SosError::Parameter("coercivity level r must be at least 1".into()));
    }
    let n = p.nvars();
    let mut vars = p.vars().to_vec();
    let gamma_name = fresh_var(&vars, "gamma");
    vars.push(gamma_name);
    let p = p.align_to(&vars)?;
    let gamma = Polynomial::variable(vars.clone(), n);
    let d = p.degree() as i64;
    let r64 = r as i64;
    let g1 = &gamma - &p;
    let two_r = Polynomial::constant(vars.clone(), Rational::from_integer(num_bigint::BigInt::from(2).pow(r)));
    let g2 = squared_norm(&vars, n) - gamma.pow(2 * r) - two_r;
    let factors = vec![Polynomial::one(vars.clone()), g1.clone(), g2.clone(), &g1 * &g2];
    let bounds = vec![
        4 * r,
        even_floor(4 * r64 - d),
        2 * r,
        even_floor(2 * r64 - d),
    ];
    let target = Polynomial::constant(vars.clone(), -Rational::one());
    SosTemplate::new(vars, target, factors, bounds)
}

/// How products of constraints enter a compactness template.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompactnessForm {
    /// Every product over subsets of `{g0, ..., gm}`.
    Products,
    /// Only `1` and the single generators; sound, but without a completeness guarantee.
    Restricted,
}

/// Emptiness of `{g_i >= 0} ∩ {|x|^2 >= radius + 1}` at level `r`:
/// `-1 = sum_h sigma_h prod_i g_i^(h_i)` with `g0 = |x|^2 - radius - 1` and every
/// `sigma_h` of degree at most `2r`. Feasibility puts the set inside the ball of
/// radius `sqrt(radius + 1)`.
pub fn compactness_template(
    vars: &[String],
    gs: &[Polynomial],
    radius: &Rational,
    r: u32,
    form: CompactnessForm,
) -> Result<SosTemplate, SosError> {
    let vars = vars.to_vec();
    let g0 = squared_norm(&vars, vars.len()) - Polynomial::constant(vars.clone(), radius + Rational::one());
    let mut gens = vec![g0];
    for g in gs {
        gens.push(g.align_to(&vars)?);
    }
    let one = Polynomial::one(vars.clone());
    let factors = match form {
        CompactnessForm::Products => {
            if gs.len() > PRODUCT_CAP {
                return Err(SosError::TooManyProducts {
                    generators: gens.len(),
                    cap: PRODUCT_CAP,
                });
            }
            (0u32..(1 << gens.len()))
                .map(|mask| {
                    gens.iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .fold(one.clone(), |acc, (_, g)| &acc * g)
                })
                .collect::<Vec<_>>()
        }
        CompactnessForm::Restricted => std::iter::once(one.clone()).chain(gens).collect(),
    };
    let bounds = vec![2 * r; factors.len()];
    let target = Polynomial::constant(vars.clone(), -Rational::one());
    SosTemplate::new(vars, target, factors, bounds)
}

/// `radius - |x|^2 = sigma_0 + sum_i sigma_i g_i` with multipliers of degree at most `2r`.
pub fn archimedean_template(
    vars: &[String],
    gs: &[Polynomial],
    radius: &Rational,
    r: u32,
) -> Result<SosTemplate, SosError> {
    if !radius.is_positive() {
        return Err(SosError::Parameter("radius must be positive".into()));
    }
    let vars = vars.to_vec();
    let target = Polynomial::constant(vars.clone(), radius.clone()) - squared_norm(&vars, vars.len());
    let mut factors = vec![Polynomial::one(vars.clone())];
    for g in gs {
        factors.push(g.align_to(&vars)?);
    }
    let bounds = vec![2 * r; factors.len()];
    SosTemplate::new(vars, target, factors, bounds)
}

/// Emptiness of `{|v|^2 = 1, c(v) >= 0 for every sphere component c}`, i.e. of the
/// points of the unit sphere where `q(v) = max_c (-c(v)) <= 0`:
///
/// `-1 = s0 + s+ (|v|^2 - 1) + s- (1 - |v|^2) + sum_c s_c c`
///
/// with `s0` of degree at most `2r + 2` and the others at most `2r`.
pub fn sphere_emptiness_template(si: &StableInstance, r: u32) -> Result<SosTemplate, SosError> {
    let vars = si.vars().to_vec();
    let sphere = squared_norm(&vars, vars.len()) - Polynomial::one(vars.clone());
    let mut factors = vec![Polynomial::one(vars.clone()), sphere.clone(), -sphere];
    for c in &si.sphere_test {
        factors.push(c.align_to(&vars)?);
    }
    let top = factors.iter().map(|f| f.degree()).max().unwrap_or(0);
    let mut bounds = vec![2 * r + top + top % 2];
    bounds.extend(std::iter::repeat_n(2 * r, factors.len() - 1));
    let target = Polynomial::constant(vars.clone(), -Rational::one());
    SosTemplate::new(vars, target, factors, bounds)
}

