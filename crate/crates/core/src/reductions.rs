//! Polynomial encodings of ONE-IN-THREE 3SAT instances.
//!
//! Every generator is a pure function of the instance. Variable names are fixed:
//! `x1..xn, y, z, lambda, chi1.., w, gamma, zeta, psi`, with slots a construction
//! does not use left out; the homogenizing variable is `x0`.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::rational::int;
use crate::poly::{var_names, PolyError, Polynomial, Rational};
use crate::sat::{brute_force_solve, Clause, OneInThreeInstance, SatError, SatOutcome};

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("unknown construction {0:?}")]
    UnknownConstruction(String),
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("malformed problem file: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    /// `p >= 0`
    Ge0,
    /// `p = 0`
    Eq0,
    /// `p > 0`
    Gt0,
}

impl Sense {
    pub fn holds(self, value: &Rational) -> bool {
        match self {
            Sense::Ge0 => !value.is_negative(),
            Sense::Eq0 => value.is_zero(),
            Sense::Gt0 => value.is_positive(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub poly: Polynomial,
    pub sense: Sense,
    /// Display hint: the constraint is conventionally written `poly^2 = 0`.
    /// The zero set is the same, so only `poly` takes part in any computation.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub squared: bool,
}

impl Constraint {
    pub fn new(poly: Polynomial, sense: Sense) -> Self {
        Constraint {
            poly,
            sense,
            squared: false,
        }
    }

    pub fn holds_at(&self, point: &[Rational]) -> Result<bool, PolyError> {
        Ok(self.sense.holds(&self.poly.evaluate(point)?))
    }
}

/// A polynomial optimization problem `min objective s.t. constraints`. A zero
/// objective describes a plain feasible set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Pop {
    pub objective: Polynomial,
    pub constraints: Vec<Constraint>,
}

#[derive(Deserialize)]
struct PopDoc {
    objective: Polynomial,
    constraints: Vec<Constraint>,
}

impl<'de> Deserialize<'de> for Pop {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = PopDoc::deserialize(d)?;
        Pop::new(doc.objective, doc.constraints).map_err(serde::de::Error::custom)
    }
}

impl Pop {
    /// Aligns every polynomial to one ambient list: the objective's variables followed
    /// by any others in order of first appearance.
    pub fn new(objective: Polynomial, constraints: Vec<Constraint>) -> Result<Self, PolyError> {
        let mut vars = objective.vars().to_vec();
        for c in &constraints {
            for v in c.poly.vars() {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
        let objective = objective.align_to(&vars)?;
        let constraints = constraints
            .into_iter()
            .map(|c| {
                Ok(Constraint {
                    poly: c.poly.align_to(&vars)?,
                    ..c
                })
            })
            .collect::<Result<_, PolyError>>()?;
        Ok(Pop {
            objective,
            constraints,
        })
    }

    /// A feasible-set description with zero objective.
    pub fn set(vars: Vec<String>, constraints: Vec<Constraint>) -> Result<Self, PolyError> {
        Pop::new(Polynomial::zero(vars), constraints)
    }

    pub fn vars(&self) -> &[String] {
        self.objective.vars()
    }

    pub fn is_feasible(&self, point: &[Rational]) -> Result<bool, PolyError> {
        for c in &self.constraints {
            if !c.holds_at(point)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn has_strict(&self) -> bool {
        self.constraints.iter().any(|c| c.sense == Sense::Gt0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ReductionError> {
        serde_json::from_str(text).map_err(|e| ReductionError::Format(e.to_string()))
    }
}

/// `T_phi` together with the components whose pointwise maximum of negations is
/// `q_phi(v) = max_c (-c(v))`; the set is stably compact iff `q_phi > 0` on the sphere.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableInstance {
    pub set: Pop,
    pub sphere_test: Vec<Polynomial>,
}

impl StableInstance {
    pub fn vars(&self) -> &[String] {
        self.set.vars()
    }

    /// Exact `q(v) = max_c (-c(v))`. Components are homogeneous, so evaluating at
    /// an unnormalized point scales the value by a positive factor only.
    pub fn q_value(&self, point: &[Rational]) -> Result<Rational, PolyError> {
        let mut best: Option<Rational> = None;
        for c in &self.sphere_test {
            let v = -c.evaluate(point)?;
            if best.as_ref().is_none_or(|b| v > *b) {
                best = Some(v);
            }
        }
        Ok(best.unwrap_or_else(Rational::zero))
    }

    pub fn q_value_f64(&self, point: &[f64]) -> Result<f64, PolyError> {
        let mut best = f64::NEG_INFINITY;
        for c in &self.sphere_test {
            best = best.max(-c.eval_f64(point)?);
        }
        Ok(if self.sphere_test.is_empty() { 0.0 } else { best })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ReductionError> {
        serde_json::from_str(text).map_err(|e| ReductionError::Format(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SetKind {
    Closedness,
    ClosednessBounded,
    Boundedness,
    Archimedean,
}

impl SetKind {
    pub const ALL: [SetKind; 4] = [
        SetKind::Closedness,
        SetKind::ClosednessBounded,
        SetKind::Boundedness,
        SetKind::Archimedean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SetKind::Closedness => "closedness",
            SetKind::ClosednessBounded => "closedness_bounded",
            SetKind::Boundedness => "boundedness",
            SetKind::Archimedean => "archimedean",
        }
    }
}

impl FromStr for SetKind {
    type Err = ReductionError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SetKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ReductionError::UnknownConstruction(format!("set:{s}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Construction {
    SPhi,
    PPhi,
    PHatPhi,
    Qcqp,
    SPhiH,
    Set(SetKind),
    Stable,
}

impl Construction {
    pub fn all() -> Vec<Construction> {
        let mut v = vec![
            Construction::SPhi,
            Construction::PPhi,
            Construction::PHatPhi,
            Construction::Qcqp,
            Construction::SPhiH,
        ];
        v.extend(SetKind::ALL.map(Construction::Set));
        v.push(Construction::Stable);
        v
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Construction::SPhi => f.write_str("s_phi"),
            Construction::PPhi => f.write_str("p_phi"),
            Construction::PHatPhi => f.write_str("p_hat_phi"),
            Construction::Qcqp => f.write_str("qcqp"),
            Construction::SPhiH => f.write_str("s_phi_h"),
            Construction::Set(k) => write!(f, "set:{}", k.name()),
            Construction::Stable => f.write_str("stable"),
        }
    }
}

impl FromStr for Construction {
    type Err = ReductionError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "s_phi" => Construction::SPhi,
            "p_phi" => Construction::PPhi,
            "p_hat_phi" => Construction::PHatPhi,
            "qcqp" => Construction::Qcqp,
            "s_phi_h" => Construction::SPhiH,
            "stable" => Construction::Stable,
            other => match other.strip_prefix("set:") {
                Some(kind) => Construction::Set(kind.parse()?),
                None => return Err(ReductionError::UnknownConstruction(other.to_string())),
            },
        })
    }
}

/// Ground-truth property of a generated object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedLabel {
    /// `s_phi` vanishes somewhere on `{-1,1}^n`.
    HasZero,
    NoZero,
    Attained,
    NotAttained,
    Coercive,
    NotCoercive,
    Closed,
    NotClosed,
    Bounded,
    Unbounded,
    Archimedean,
    NotArchimedean,
    StablyCompact,
    NotStablyCompact,
}

impl fmt::Display for ExpectedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string tag"))
    }
}

/// Generated object for a construction, as written by the generator front end.
#[derive(Clone, Debug)]
pub enum Generated {
    Poly(Polynomial),
    Pop(Pop),
    Stable(StableInstance),
}

impl Generated {
    pub fn to_json(&self) -> String {
        match self {
            Generated::Poly(p) => p.to_json(),
            Generated::Pop(p) => p.to_json(),
            Generated::Stable(s) => s.to_json(),
        }
    }
}

pub fn generate(inst: &OneInThreeInstance, c: Construction) -> Generated {
    match c {
        Construction::SPhi => Generated::Poly(gen_s_phi(inst)),
        Construction::PPhi => Generated::Poly(gen_p_phi(inst)),
        Construction::PHatPhi => Generated::Poly(gen_p_hat_phi(inst)),
        Construction::Qcqp => Generated::Pop(gen_qcqp(inst)),
        Construction::SPhiH => Generated::Poly(gen_s_phi_h(inst)),
        Construction::Set(k) => Generated::Pop(gen_set(inst, k)),
        Construction::Stable => Generated::Stable(gen_stable_instance(inst)),
    }
}

fn xs(n: usize) -> Vec<String> {
    var_names("x", n)
}

fn v(vars: &[String], name: &str) -> Polynomial {
    let idx = vars.iter().position(|w| w == name).expect("generator variable");
    Polynomial::variable(vars.to_vec(), idx)
}

fn c(vars: &[String], value: i64) -> Polynomial {
    Polynomial::constant(vars.to_vec(), int(value))
}

/// `phi_i1 + phi_i2 + phi_i3` with each literal mapped to `names[var]` or its negation.
fn literal_sum(vars: &[String], clause: &Clause, names: &[String]) -> Polynomial {
    let mut acc = Polynomial::zero(vars.to_vec());
    for lit in clause.literals() {
        let x = v(vars, &names[lit.index()]);
        acc = if lit.is_negated() { acc - x } else { acc + x };
    }
    acc
}

fn s_phi_over(inst: &OneInThreeInstance, vars: &[String]) -> Polynomial {
    let x = xs(inst.num_vars());
    let one = c(vars, 1);
    let mut s = Polynomial::zero(vars.to_vec());
    for clause in inst.clauses() {
        s = s + (literal_sum(vars, clause, &x) + &one).square();
    }
    for name in &x {
        s = s + (&one - &v(vars, name).square()).square();
    }
    s
}

/// `s_phi(x) = sum_i (phi_i1 + phi_i2 + phi_i3 + 1)^2 + sum_j (1 - x_j^2)^2`.
pub fn gen_s_phi(inst: &OneInThreeInstance) -> Polynomial {
    s_phi_over(inst, &xs(inst.num_vars()))
}

fn with_extra(n: usize, extra: &[&str]) -> Vec<String> {
    let mut vars = xs(n);
    vars.extend(extra.iter().map(|s| s.to_string()));
    vars
}

/// `p_phi = lambda^2 s_phi(x) + (1 - lambda)^2 (y^2 + (yz - 1)^2)` over `(x, y, z, lambda)`.
pub fn gen_p_phi(inst: &OneInThreeInstance) -> Polynomial {
    let vars = with_extra(inst.num_vars(), &["y", "z", "lambda"]);
    let (y, z, l) = (v(&vars, "y"), v(&vars, "z"), v(&vars, "lambda"));
    let one = c(&vars, 1);
    let s = s_phi_over(inst, &vars);
    let tail = y.square() + (&(&y * &z) - &one).square();
    l.square() * s + (&one - &l).square() * tail
}

/// Quartic variant over `(x, y, z, lambda, chi, w)` in which each product
/// `lambda * x_i` of `lambda^2 s_phi` is replaced by `chi_i`, coupled back by
/// the penalties `(chi_i - lambda x_i)^2` and `(w - yz)^2`.
pub fn gen_p_hat_phi(inst: &OneInThreeInstance) -> Polynomial {
    let n = inst.num_vars();
    let chi = var_names("chi", n);
    let mut vars = with_extra(n, &["y", "z", "lambda"]);
    vars.extend(chi.iter().cloned());
    vars.push("w".into());
    let x = xs(n);
    let (y, z, l, w) = (v(&vars, "y"), v(&vars, "z"), v(&vars, "lambda"), v(&vars, "w"));
    let one = c(&vars, 1);

    // lambda^2 (L + 1)^2 = (L(chi) + lambda)^2 and lambda^2 (1 - x^2)^2 = (lambda - chi x)^2
    let mut s_hat = Polynomial::zero(vars.clone());
    for clause in inst.clauses() {
        s_hat = s_hat + (literal_sum(&vars, clause, &chi) + &l).square();
    }
    for (xi, ci) in x.iter().zip(&chi) {
        s_hat = s_hat + (&l - &(v(&vars, ci) * v(&vars, xi))).square();
    }
    let mut p = s_hat
        + (&one - &l).square() * (y.square() + (&w - &one).square())
        + (&w - &(&y * &z)).square();
    for (xi, ci) in x.iter().zip(&chi) {
        p = p + (v(&vars, ci) - &l * &v(&vars, xi)).square();
    }
    p
}

/// The degree-one-objective, quadratically constrained program over
/// `(x, y, z, lambda, chi_1..chi_k, w, gamma, zeta, psi)`: minimize `gamma` subject to
///
/// * `gamma - lambda * sum_i chi_i - (1 - lambda)(psi + zeta) >= 0`
/// * `1 - x_j^2 = 0`
/// * `chi_i - (phi_i1 + phi_i2 + phi_i3 + 1)^2 = 0` (one `chi` per clause)
/// * `psi - y^2 = 0`, `yz - w = 0`, `zeta - (w - 1)^2 = 0`
/// * `lambda (1 - lambda) = 0`
pub fn gen_qcqp(inst: &OneInThreeInstance) -> Pop {
    let n = inst.num_vars();
    let k = inst.num_clauses();
    let chi = var_names("chi", k);
    let mut vars = with_extra(n, &["y", "z", "lambda"]);
    vars.extend(chi.iter().cloned());
    vars.extend(["w", "gamma", "zeta", "psi"].map(String::from));
    let x = xs(n);
    let one = c(&vars, 1);
    let [y, z, l, w, g, zeta, psi] =
        ["y", "z", "lambda", "w", "gamma", "zeta", "psi"].map(|name| v(&vars, name));

    let chi_sum = chi
        .iter()
        .fold(Polynomial::zero(vars.clone()), |acc, ci| acc + v(&vars, ci));
    let mut cons = vec![Constraint::new(
        &g - &(&l * &chi_sum) - (&one - &l) * (&psi + &zeta),
        Sense::Ge0,
    )];
    for xi in &x {
        cons.push(Constraint::new(&one - &v(&vars, xi).square(), Sense::Eq0));
    }
    for (clause, ci) in inst.clauses().iter().zip(&chi) {
        let sq = (literal_sum(&vars, clause, &x) + &one).square();
        cons.push(Constraint::new(v(&vars, ci) - sq, Sense::Eq0));
    }
    cons.push(Constraint::new(&psi - &y.square(), Sense::Eq0));
    cons.push(Constraint::new(&(&y * &z) - &w, Sense::Eq0));
    cons.push(Constraint::new(&zeta - &(&w - &one).square(), Sense::Eq0));
    cons.push(Constraint::new(&l * &(&one - &l), Sense::Eq0));
    Pop::new(g, cons).expect("generator variables are consistent")
}

/// Homogenization of `s_phi` with the new variable `x0` placed first.
pub fn gen_s_phi_h(inst: &OneInThreeInstance) -> Polynomial {
    let s = gen_s_phi(inst);
    if inst.num_vars() == 0 {
        return Polynomial::zero(vec!["x0".into()]);
    }
    s.homogenize("x0").expect("x0 is not an x_i name")
}

/// Constraint systems over `(x, y)`.
///
/// * `Boundedness`: `(phi_i1 + phi_i2 + phi_i3 + 1) y = 0`, `1 - x_j^2 = 0`.
/// * `Closedness`: the same plus the strict `1 - y > 0`.
/// * `ClosednessBounded`: closedness plus `y + 1 >= 0`.
/// * `Archimedean`: the boundedness equalities, each split into the pair `p >= 0`, `-p >= 0`.
pub fn gen_set(inst: &OneInThreeInstance, kind: SetKind) -> Pop {
    let n = inst.num_vars();
    let vars = with_extra(n, &["y"]);
    let x = xs(n);
    let y = v(&vars, "y");
    let one = c(&vars, 1);
    let mut eqs = Vec::new();
    for clause in inst.clauses() {
        eqs.push((literal_sum(&vars, clause, &x) + &one) * &y);
    }
    for xi in &x {
        eqs.push(&one - &v(&vars, xi).square());
    }
    let mut cons = Vec::new();
    if kind == SetKind::Archimedean {
        for p in eqs {
            let neg = -&p;
            cons.push(Constraint::new(p, Sense::Ge0));
            cons.push(Constraint::new(neg, Sense::Ge0));
        }
    } else {
        cons.extend(eqs.into_iter().map(|p| Constraint::new(p, Sense::Eq0)));
        if matches!(kind, SetKind::Closedness | SetKind::ClosednessBounded) {
            cons.push(Constraint::new(&one - &y, Sense::Gt0));
        }
        if kind == SetKind::ClosednessBounded {
            cons.push(Constraint::new(&y + &one, Sense::Ge0));
        }
    }
    Pop::set(vars, cons).expect("generator variables are consistent")
}

/// `T_phi = {(x0, x) : (phi_i1 + phi_i2 + phi_i3 + x0)^2 = 0, x0^2 - x_j^2 = 0}`.
///
/// The squared clause equalities are stored unsquared with the `squared` flag set;
/// the sphere test keeps the squared forms `±(phi_i1 + phi_i2 + phi_i3 + x0)^2` and
/// `±(x0^2 - x_j^2)`.
pub fn gen_stable_instance(inst: &OneInThreeInstance) -> StableInstance {
    let n = inst.num_vars();
    let mut vars = vec!["x0".to_string()];
    vars.extend(xs(n));
    let x = xs(n);
    let x0 = v(&vars, "x0");
    let mut cons = Vec::new();
    let mut sphere_test = Vec::new();
    for clause in inst.clauses() {
        let lin = literal_sum(&vars, clause, &x) + &x0;
        let sq = lin.square();
        sphere_test.push(sq.clone());
        sphere_test.push(-sq);
        cons.push(Constraint {
            poly: lin,
            sense: Sense::Eq0,
            squared: true,
        });
    }
    for xi in &x {
        let d = x0.square() - v(&vars, xi).square();
        sphere_test.push(d.clone());
        sphere_test.push(-&d);
        cons.push(Constraint::new(d, Sense::Eq0));
    }
    StableInstance {
        set: Pop::set(vars, cons).expect("generator variables are consistent"),
        sphere_test,
    }
}

/// Maps the brute-force verdict through the corresponding hardness statement.
pub fn expected_property(
    inst: &OneInThreeInstance,
    construction: Construction,
) -> Result<ExpectedLabel, ReductionError> {
    let sat = brute_force_solve(inst)?.is_sat();
    Ok(label_for(sat, construction))
}

/// Label implied by satisfiability alone.
pub fn label_for(sat: bool, construction: Construction) -> ExpectedLabel {
    use ExpectedLabel::*;
    let (if_sat, if_unsat) = match construction {
        Construction::SPhi => (HasZero, NoZero),
        Construction::PPhi | Construction::PHatPhi | Construction::Qcqp => (Attained, NotAttained),
        Construction::SPhiH => (NotCoercive, Coercive),
        Construction::Set(SetKind::Closedness | SetKind::ClosednessBounded) => (NotClosed, Closed),
        Construction::Set(SetKind::Boundedness) => (Unbounded, Bounded),
        Construction::Set(SetKind::Archimedean) => (NotArchimedean, Archimedean),
        Construction::Stable => (NotStablyCompact, StablyCompact),
    };
    if sat {
        if_sat
    } else {
        if_unsat
    }
}

/// Smallest value of `s_phi` over `{-1,1}^n`, computed exactly.
pub fn min_s_phi_on_cube(inst: &OneInThreeInstance) -> Rational {
    let s = gen_s_phi(inst);
    let n = inst.num_vars();
    let mut best: Option<Rational> = None;
    for mask in 0u64..(1u64 << n) {
        let point: Vec<Rational> = (0..n)
            .map(|i| if (mask >> i) & 1 == 1 { Rational::one() } else { -Rational::one() })
            .collect();
        let val = s.evaluate(&point).expect("dimension matches");
        if best.as_ref().is_none_or(|b| val < *b) {
            best = Some(val);
        }
    }
    best.unwrap_or_else(Rational::zero)
}

/// Whether the oracle says SAT; convenience for callers that only need the bit.
pub fn is_sat(inst: &OneInThreeInstance) -> Result<bool, SatError> {
    Ok(matches!(brute_force_solve(inst)?, SatOutcome::Sat(_)))
}
