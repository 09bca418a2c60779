//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! Every polynomial carries its own ordered list of variable names. Binary operations
//! unify the two lists (union in first-seen order) before combining terms, so
//! constructions can introduce new variables incrementally.

mod format;
mod monomial;
pub mod rational;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub use format::{parse_poly, PolyDoc};
pub use monomial::{monomials_up_to, Monomial};
pub use rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("malformed polynomial: {0}")]
    Structure(String),
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("variable {0:?} already present")]
    NameCollision(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
}

#[derive(Clone, Debug)]
pub struct Polynomial {
    vars: Vec<String>,
    terms: BTreeMap<Monomial, Rational>,
}

/// Binary operation selector for [`combine`].
#[derive(Clone, Debug)]
pub enum Combine {
    Add,
    Mul,
    /// Ignores the second operand.
    Scale(Rational),
}

pub fn combine(p: &Polynomial, q: &Polynomial, op: Combine) -> Polynomial {
    match op {
        Combine::Add => p + q,
        Combine::Mul => p * q,
        Combine::Scale(r) => p.scale(&r),
    }
}

pub fn var_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

impl Polynomial {
    pub fn zero(vars: Vec<String>) -> Self {
        Polynomial {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: Vec<String>, c: Rational) -> Self {
        let mut p = Self::zero(vars);
        if !c.is_zero() {
            let n = p.vars.len();
            p.terms.insert(Monomial::one(n), c);
        }
        p
    }

    pub fn one(vars: Vec<String>) -> Self {
        Self::constant(vars, Rational::one())
    }

    /// The polynomial `vars[idx]`.
    pub fn variable(vars: Vec<String>, idx: usize) -> Self {
        let n = vars.len();
        let mut p = Self::zero(vars);
        p.terms.insert(Monomial::var(n, idx), Rational::one());
        p
    }

    /// The polynomial consisting of the single variable `name` (ambient list `[name]`).
    pub fn var(name: &str) -> Self {
        Self::variable(vec![name.to_string()], 0)
    }

    /// Builds a polynomial from (exponent vector, coefficient) pairs, summing repeats.
    pub fn from_terms<I>(vars: Vec<String>, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Vec<u32>, Rational)>,
    {
        check_distinct(&vars)?;
        let mut p = Self::zero(vars);
        for (i, (e, c)) in terms.into_iter().enumerate() {
            if e.len() != p.vars.len() {
                return Err(PolyError::Structure(format!(
                    "term {i} has {} exponents, expected {}",
                    e.len(),
                    p.vars.len()
                )));
            }
            p.add_term(Monomial::new(e), c);
        }
        Ok(p)
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum total degree over the terms; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(Monomial::degree);
        match degs.next() {
            None => true,
            Some(d) => degs.all(|e| e == d),
        }
    }

    pub fn max_abs_coefficient(&self) -> Rational {
        self.terms
            .values()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    pub(crate) fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// Re-expresses the polynomial over `vars`, which must contain every variable that
    /// occurs with a nonzero exponent.
    pub fn align_to(&self, vars: &[String]) -> Result<Polynomial, PolyError> {
        if self.vars == vars {
            return Ok(self.clone());
        }
        check_distinct(vars)?;
        let mut map = Vec::with_capacity(self.vars.len());
        let mut used = vec![false; self.vars.len()];
        for m in self.terms.keys() {
            for (i, &e) in m.exps().iter().enumerate() {
                used[i] |= e > 0;
            }
        }
        for (i, v) in self.vars.iter().enumerate() {
            match vars.iter().position(|w| w == v) {
                Some(j) => map.push(j),
                None if !used[i] => map.push(usize::MAX),
                None => return Err(PolyError::UnknownVariable(v.clone())),
            }
        }
        let n = vars.len();
        let mut out = Polynomial::zero(vars.to_vec());
        for (m, c) in &self.terms {
            let mut e = vec![0u32; n];
            for (i, &x) in m.exps().iter().enumerate() {
                if x > 0 {
                    e[map[i]] += x;
                }
            }
            out.add_term(Monomial::new(e), c.clone());
        }
        Ok(out)
    }

    fn unified(&self, other: &Polynomial) -> (Polynomial, Polynomial) {
        if self.vars == other.vars {
            return (self.clone(), other.clone());
        }
        let mut vars = self.vars.clone();
        for v in &other.vars {
            if !vars.contains(v) {
                vars.push(v.clone());
            }
        }
        let a = self.align_to(&vars).expect("union contains all variables");
        let b = other.align_to(&vars).expect("union contains all variables");
        (a, b)
    }

    pub fn scale(&self, r: &Rational) -> Polynomial {
        if r.is_zero() {
            return Polynomial::zero(self.vars.clone());
        }
        Polynomial {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * r)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut acc = Polynomial::one(self.vars.clone());
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn square(&self) -> Polynomial {
        self * self
    }

    fn check_point<T>(&self, point: &[T]) -> Result<(), PolyError> {
        if point.len() != self.vars.len() {
            return Err(PolyError::DimensionMismatch {
                expected: self.vars.len(),
                got: point.len(),
            });
        }
        Ok(())
    }

    /// Exact value at a rational point (one coordinate per variable, in order).
    pub fn evaluate(&self, point: &[Rational]) -> Result<Rational, PolyError> {
        self.check_point(point)?;
        let mut powers: Vec<Vec<Rational>> = point.iter().map(|x| vec![Rational::one(), x.clone()]).collect();
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (i, &e) in m.exps().iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let pw = &mut powers[i];
                while pw.len() <= e as usize {
                    let next = pw.last().unwrap() * &point[i];
                    pw.push(next);
                }
                t *= &pw[e as usize];
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn eval_f64(&self, point: &[f64]) -> Result<f64, PolyError> {
        self.check_point(point)?;
        Ok(self
            .float_terms()
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .enumerate()
                    .fold(*c, |acc, (i, &k)| acc * point[i].powi(k as i32))
            })
            .sum())
    }

    /// Coefficients converted to f64, for repeated numeric evaluation.
    pub fn float_terms(&self) -> Vec<(Vec<u32>, f64)> {
        self.terms
            .iter()
            .map(|(m, c)| (m.exps().to_vec(), rational::to_f64(c)))
            .collect()
    }

    /// Substitutes `name = value` and drops the variable.
    pub fn substitute(&self, name: &str, value: &Rational) -> Result<Polynomial, PolyError> {
        let idx = self
            .var_index(name)
            .ok_or_else(|| PolyError::UnknownVariable(name.to_string()))?;
        let vars: Vec<String> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .map(|(_, v)| v.clone())
            .collect();
        let mut out = Polynomial::zero(vars);
        for (m, c) in &self.terms {
            let mut e = m.exps().to_vec();
            let k = e.remove(idx);
            out.add_term(Monomial::new(e), c * num_traits::pow(value.clone(), k as usize));
        }
        Ok(out)
    }

    /// `newvar^deg(p) * p(x / newvar)`; the new variable is placed first.
    pub fn homogenize(&self, newvar: &str) -> Result<Polynomial, PolyError> {
        if self.var_index(newvar).is_some() {
            return Err(PolyError::NameCollision(newvar.to_string()));
        }
        let d = self.degree();
        let mut vars = Vec::with_capacity(self.vars.len() + 1);
        vars.push(newvar.to_string());
        vars.extend(self.vars.iter().cloned());
        let mut out = Polynomial::zero(vars);
        for (m, c) in &self.terms {
            let mut e = Vec::with_capacity(m.nvars() + 1);
            e.push(d - m.degree());
            e.extend_from_slice(m.exps());
            out.add_term(Monomial::new(e), c.clone());
        }
        Ok(out)
    }

    /// Nonzero homogeneous parts `(j, g_j)` in increasing degree; they sum to `self`.
    pub fn homogeneous_components(&self) -> Vec<(u32, Polynomial)> {
        let mut parts: BTreeMap<u32, Polynomial> = BTreeMap::new();
        for (m, c) in &self.terms {
            parts
                .entry(m.degree())
                .or_insert_with(|| Polynomial::zero(self.vars.clone()))
                .terms
                .insert(m.clone(), c.clone());
        }
        parts.into_iter().collect()
    }

    /// Top-degree homogeneous part.
    pub fn leading_form(&self) -> Polynomial {
        self.homogeneous_components()
            .pop()
            .map(|(_, p)| p)
            .unwrap_or_else(|| Polynomial::zero(self.vars.clone()))
    }

    pub fn derivative(&self, idx: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.vars.clone());
        for (m, c) in &self.terms {
            let k = m.exps()[idx];
            if k == 0 {
                continue;
            }
            let mut m2 = m.clone();
            m2.exps_mut()[idx] -= 1;
            out.add_term(m2, c * Rational::from_integer(k.into()));
        }
        out
    }

    /// Semantic equality that ignores variable order and unused variables.
    fn normalized_terms(&self) -> BTreeMap<Vec<(String, u32)>, Rational> {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut key: Vec<(String, u32)> = m
                    .exps()
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| (self.vars[i].clone(), e))
                    .collect();
                key.sort();
                (key, c.clone())
            })
            .collect()
    }
}

fn check_distinct(vars: &[String]) -> Result<(), PolyError> {
    for (i, v) in vars.iter().enumerate() {
        if vars[..i].contains(v) {
            return Err(PolyError::Structure(format!("duplicate variable {v:?}")));
        }
    }
    Ok(())
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        if self.vars == other.vars {
            self.terms == other.terms
        } else {
            self.normalized_terms() == other.normalized_terms()
        }
    }
}

impl Eq for Polynomial {}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let (mut a, b) = self.unified(rhs);
        for (m, c) in b.terms {
            a.add_term(m, c);
        }
        a
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let (mut a, b) = self.unified(rhs);
        for (m, c) in b.terms {
            a.add_term(m, -c);
        }
        a
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let (a, b) = self.unified(rhs);
        let mut out = Polynomial::zero(a.vars.clone());
        for (ma, ca) in &a.terms {
            for (mb, cb) in &b.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(&-Rational::one())
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: Polynomial) -> Polynomial {
                (&self).$f(&rhs)
            }
        }
        impl $tr<&Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $f(self, rhs: &Polynomial) -> Polynomial {
                (&self).$f(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        (&self).neg()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // highest degree first reads more naturally
        for (i, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            let mono = m.display_with(&self.vars);
            if m.is_one() {
                write!(f, "{a}")?;
            } else if a.is_one() {
                write!(f, "{mono}")?;
            } else {
                write!(f, "{a}*{mono}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::rational::{int, rat};
    use super::*;

    fn x(i: usize, n: usize) -> Polynomial {
        Polynomial::variable(var_names("x", n), i)
    }

    #[test]
    fn cancellation_and_products() {
        let x1 = Polynomial::var("x1");
        assert!((&x1 + &(-&x1)).is_zero());
        let one = Polynomial::one(vec!["x1".into()]);
        let p = &(&x1 + &one) * &(&x1 - &one);
        let expect = &x1.pow(2) - &one;
        assert_eq!(p, expect);
    }

    #[test]
    fn evaluation() {
        let p = &x(0, 2).pow(2) + &x(1, 2).pow(2);
        assert_eq!(p.evaluate(&[rat(3, 2), rat(1, 2)]).unwrap(), rat(5, 2));
        assert_eq!(
            Polynomial::zero(var_names("x", 3))
                .evaluate(&[int(1), int(2), int(3)])
                .unwrap(),
            int(0)
        );
        assert!(matches!(
            p.evaluate(&[int(1)]),
            Err(PolyError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn homogenize_examples() {
        let p = &Polynomial::var("x1").pow(2) + &Polynomial::one(vec!["x1".into()]);
        let h = p.homogenize("x0").unwrap();
        let x0 = Polynomial::var("x0");
        let x1 = Polynomial::var("x1");
        assert_eq!(h, &x1.pow(2) + &x0.pow(2));
        assert_eq!(h.vars()[0], "x0");
        assert!(h.is_homogeneous());

        let c = Polynomial::constant(vec!["x1".into()], int(7));
        let hc = c.homogenize("x0").unwrap();
        assert_eq!(hc.degree(), 0);
        assert_eq!(hc, c);

        assert_eq!(
            p.homogenize("x1"),
            Err(PolyError::NameCollision("x1".into()))
        );
    }

    #[test]
    fn components_examples() {
        let x1 = x(0, 2);
        let x2 = x(1, 2);
        let p = &x1.pow(4) + &x2.pow(2);
        let comps = p.homogeneous_components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0], (2, x2.pow(2)));
        assert_eq!(comps[1], (4, x1.pow(4)));

        let one = Polynomial::one(var_names("x", 1));
        let q = &one - &Polynomial::var("x1").pow(2);
        let comps = q.homogeneous_components();
        assert_eq!(comps[0], (0, one.clone()));
        assert_eq!(comps[1], (2, -Polynomial::var("x1").pow(2)));

        // (x1-x2)^4 + (x1+x2)^2 - 1 splits into degrees 0, 2, 4
        let r = &(&(&x1 - &x2).pow(4) + &(&x1 + &x2).pow(2)) - &Polynomial::one(var_names("x", 2));
        let comps = r.homogeneous_components();
        let degs: Vec<u32> = comps.iter().map(|(d, _)| *d).collect();
        assert_eq!(degs, vec![0, 2, 4]);
        assert_eq!(comps[1].1, (&x1 + &x2).pow(2));
        assert_eq!(comps[2].1, (&x1 - &x2).pow(4));
        let sum = comps
            .iter()
            .fold(Polynomial::zero(r.vars().to_vec()), |acc, (_, g)| &acc + g);
        assert_eq!(sum, r);
    }

    #[test]
    fn variable_union_is_first_seen() {
        let p = &Polynomial::var("y") + &Polynomial::var("x1");
        assert_eq!(p.vars(), &["y".to_string(), "x1".to_string()]);
        let q = &Polynomial::var("x1") * &Polynomial::var("y");
        assert_eq!(q.vars(), &["x1".to_string(), "y".to_string()]);
        assert_eq!(q.degree(), 2);
    }

    #[test]
    fn substitute_and_derivative() {
        let x1 = x(0, 2);
        let x2 = x(1, 2);
        let p = &(&x1.pow(3) * &x2) + &x2.scale(&int(5));
        let s = p.substitute("x2", &int(2)).unwrap();
        assert_eq!(s.vars(), &["x1".to_string()]);
        assert_eq!(s, &Polynomial::var("x1").pow(3).scale(&int(2)) + &Polynomial::constant(vec!["x1".into()], int(10)));
        let d = p.derivative(0);
        assert_eq!(d, (&x1.pow(2) * &x2).scale(&int(3)));
    }

    #[test]
    fn zero_degree_convention() {
        assert_eq!(Polynomial::zero(var_names("x", 2)).degree(), 0);
        assert!(Polynomial::zero(vec![]).is_homogeneous());
    }

    #[test]
    fn display() {
        let x1 = Polynomial::var("x1");
        let p = &x1.pow(4).scale(&rat(2, 3)) - &Polynomial::one(vec!["x1".into()]);
        assert_eq!(p.to_string(), "2/3*x1^4 - 1");
    }
}
