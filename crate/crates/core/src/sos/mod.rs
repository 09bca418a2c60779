//! Sum-of-squares identity templates and their semidefinite encodings.
//!
//! A template asks for SOS multipliers `sigma_j` of bounded degree with
//! `target = sum_j sigma_j * factor_j`. Writing `sigma_j = z_j^T G_j z_j` over a
//! monomial basis `z_j` turns the identity into one linear equation per monomial on
//! the Gram matrices `G_j ⪰ 0`.

mod templates;

pub use templates::{
    archimedean_template, coercivity_template, compactness_template, fresh_var, sphere_emptiness_template,
    squared_norm, CompactnessForm, PRODUCT_CAP,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::monomials_up_to;
use crate::poly::rational::to_f64;
use crate::poly::{Monomial, PolyError, Polynomial, Rational};
use crate::sdp::{Entry, Equality, Face, Objective, SdpProblem, SdpSolution, SdpStatus, SignRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SosError {
    #[error("degree bound {bound} of multiplier {index} is odd")]
    OddBound { index: usize, bound: u32 },
    #[error("template has no factors")]
    EmptyFactors,
    #[error("template lists {factors} factors but {bounds} degree bounds")]
    LengthMismatch { factors: usize, bounds: usize },
    #[error("basis override for multiplier {0} does not match the ambient variables")]
    BasisMismatch(usize),
    #[error("identity is infeasible by construction: no multiplier can produce monomial {0}")]
    InfeasibleByConstruction(String),
    #[error("solution status is {0}; no certificate can be extracted")]
    Inconclusive(SdpStatus),
    #[error("solution does not match the template: {0}")]
    ShapeMismatch(String),
    #[error("{generators} generators give 2^{generators} products; at most {cap} allowed without the restricted template")]
    TooManyProducts { generators: usize, cap: usize },
    #[error("invalid template parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// `target = sum_j sigma_j * factors[j]`, `sigma_j` SOS of degree at most
/// `degree_bounds[j]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SosTemplate {
    pub vars: Vec<String>,
    pub target: Polynomial,
    pub factors: Vec<Polynomial>,
    pub degree_bounds: Vec<u32>,
    /// Replaces the full monomial basis of each multiplier when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bases: Option<Vec<Vec<Monomial>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateDoc {
    vars: Vec<String>,
    target: Polynomial,
    factors: Vec<Polynomial>,
    degree_bounds: Vec<u32>,
    #[serde(default)]
    bases: Option<Vec<Vec<Monomial>>>,
}

impl<'de> Deserialize<'de> for SosTemplate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = TemplateDoc::deserialize(d)?;
        let mut t = SosTemplate::new(doc.vars, doc.target, doc.factors, doc.degree_bounds)
            .map_err(serde::de::Error::custom)?;
        if let Some(b) = doc.bases {
            t = t.with_bases(b).map_err(serde::de::Error::custom)?;
        }
        Ok(t)
    }
}

impl SosTemplate {
    pub fn new(
        vars: Vec<String>,
        target: Polynomial,
        factors: Vec<Polynomial>,
        degree_bounds: Vec<u32>,
    ) -> Result<Self, SosError> {
        if factors.is_empty() {
            return Err(SosError::EmptyFactors);
        }
        if factors.len() != degree_bounds.len() {
            return Err(SosError::LengthMismatch {
                factors: factors.len(),
                bounds: degree_bounds.len(),
            });
        }
        for (i, &b) in degree_bounds.iter().enumerate() {
            if b % 2 == 1 {
                return Err(SosError::OddBound { index: i, bound: b });
            }
        }
        let target = target.align_to(&vars)?;
        let factors = factors
            .iter()
            .map(|f| f.align_to(&vars))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SosTemplate {
            vars,
            target,
            factors,
            degree_bounds,
            bases: None,
        })
    }

    pub fn with_bases(mut self, bases: Vec<Vec<Monomial>>) -> Result<Self, SosError> {
        if bases.len() != self.factors.len() {
            return Err(SosError::LengthMismatch {
                factors: self.factors.len(),
                bounds: bases.len(),
            });
        }
        for (j, b) in bases.iter().enumerate() {
            if b.iter().any(|m| m.nvars() != self.vars.len()) {
                return Err(SosError::BasisMismatch(j));
            }
        }
        self.bases = Some(bases);
        Ok(self)
    }

    pub fn num_multipliers(&self) -> usize {
        self.factors.len()
    }

    pub fn basis(&self, j: usize) -> Vec<Monomial> {
        match &self.bases {
            Some(b) => b[j].clone(),
            None => monomials_up_to(self.vars.len(), self.degree_bounds[j] / 2),
        }
    }

    pub fn bases(&self) -> Vec<Vec<Monomial>> {
        (0..self.num_multipliers()).map(|j| self.basis(j)).collect()
    }
}

/// All monomials of degree at most `degree_bound / 2` in graded order.
pub fn sos_basis(vars: &[String], degree_bound: u32) -> Result<Vec<Monomial>, SosError> {
    if degree_bound % 2 == 1 {
        return Err(SosError::OddBound {
            index: 0,
            bound: degree_bound,
        });
    }
    Ok(monomials_up_to(vars.len(), degree_bound / 2))
}

/// One monomial-matching equation with exact coefficients. Terms are
/// `(block, row, col, coef)` with `row <= col`; an off-diagonal coefficient already
/// includes the factor 2 from the two mirrored Gram entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactRow {
    pub monomial: Monomial,
    pub terms: Vec<(usize, usize, usize, Rational)>,
    pub rhs: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactSystem {
    pub bases: Vec<Vec<Monomial>>,
    pub rows: Vec<ExactRow>,
}

impl ExactSystem {
    pub fn dims(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.len()).collect()
    }

    pub fn sign_rows(&self) -> Vec<SignRow> {
        use num_traits::{Signed, Zero};
        self.rows
            .iter()
            .map(|r| SignRow {
                rhs_zero: r.rhs.is_zero(),
                terms: r.terms.iter().map(|(b, i, j, c)| (*b, *i, *j, c.is_positive())).collect(),
            })
            .collect()
    }

    pub fn face(&self) -> Face {
        crate::sdp::facial_reduction_pattern(&self.dims(), &self.sign_rows())
    }

    pub fn to_problem(&self, objective: Objective) -> SdpProblem {
        SdpProblem {
            blocks: self.dims(),
            equalities: self
                .rows
                .iter()
                .map(|r| Equality {
                    terms: r
                        .terms
                        .iter()
                        .map(|(b, i, j, c)| Entry {
                            block: *b,
                            row: *i,
                            col: *j,
                            coef: to_f64(c),
                        })
                        .collect(),
                    rhs: to_f64(&r.rhs),
                })
                .collect(),
            objective,
        }
    }
}

/// Builds the exact coefficient-matching system of a template.
pub fn compile_exact(t: &SosTemplate) -> Result<ExactSystem, SosError> {
    use num_traits::Zero;
    let bases = t.bases();
    let mut rows: BTreeMap<Monomial, BTreeMap<(usize, usize, usize), Rational>> = BTreeMap::new();
    for (j, (basis, factor)) in bases.iter().zip(&t.factors).enumerate() {
        let fterms: Vec<(&Monomial, &Rational)> = factor.terms().collect();
        for a in 0..basis.len() {
            for c in a..basis.len() {
                let z = basis[a].mul(&basis[c]);
                let mult = Rational::from_integer(if a == c { 1.into() } else { 2.into() });
                for (mu, coef) in &fterms {
                    let entry = rows.entry(z.mul(mu)).or_default().entry((j, a, c)).or_insert_with(Rational::zero);
                    *entry += *coef * &mult;
                }
            }
        }
    }
    for (m, _) in t.target.terms() {
        rows.entry(m.clone()).or_default();
    }
    let mut out = Vec::with_capacity(rows.len());
    for (m, terms) in rows {
        let rhs = t.target.coefficient(&m);
        let terms: Vec<_> = terms
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|((b, i, j), c)| (b, i, j, c))
            .collect();
        if terms.is_empty() {
            if rhs.is_zero() {
                continue;
            }
            return Err(SosError::InfeasibleByConstruction(m.display_with(&t.vars)));
        }
        out.push(ExactRow {
            monomial: m,
            terms,
            rhs,
        });
    }
    Ok(ExactSystem { bases, rows: out })
}

/// The semidefinite program whose feasible points are exactly the Gram matrices
/// of identity-satisfying multiplier tuples.
pub fn compile_identity(t: &SosTemplate) -> Result<SdpProblem, SosError> {
    Ok(compile_exact(t)?.to_problem(Objective::Margin))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericMultiplier {
    pub basis: Vec<Monomial>,
    pub gram: Vec<Vec<f64>>,
}

/// Floating-point Gram matrices for a template.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SosCertificate {
    pub template: SosTemplate,
    pub multipliers: Vec<NumericMultiplier>,
    /// Largest coefficient mismatch of the expanded identity.
    pub residual: f64,
    /// Margin reported by the solver on the presolved face, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
}

impl SosCertificate {
    /// Wraps hand-built Gram matrices (one per factor, in basis order).
    pub fn from_grams(template: SosTemplate, grams: Vec<Vec<Vec<f64>>>) -> Result<Self, SosError> {
        let bases = template.bases();
        if grams.len() != bases.len() {
            return Err(SosError::ShapeMismatch(format!(
                "{} Gram matrices for {} multipliers",
                grams.len(),
                bases.len()
            )));
        }
        for (j, (g, b)) in grams.iter().zip(&bases).enumerate() {
            if g.len() != b.len() || g.iter().any(|r| r.len() != b.len()) {
                return Err(SosError::ShapeMismatch(format!(
                    "Gram matrix {j} is not {0}x{0}",
                    b.len()
                )));
            }
        }
        let multipliers: Vec<NumericMultiplier> = bases
            .into_iter()
            .zip(grams)
            .map(|(basis, gram)| NumericMultiplier { basis, gram })
            .collect();
        let residual = numeric_residual(&template, &multipliers);
        Ok(SosCertificate {
            template,
            multipliers,
            residual,
            margin: None,
        })
    }

    pub fn grams(&self) -> Vec<&Vec<Vec<f64>>> {
        self.multipliers.iter().map(|m| &m.gram).collect()
    }
}

/// `max_alpha |coef_alpha(sum_j z_j^T G_j z_j f_j - target)|` in floating point.
pub fn numeric_residual(t: &SosTemplate, multipliers: &[NumericMultiplier]) -> f64 {
    let mut acc: BTreeMap<Monomial, f64> = BTreeMap::new();
    for (m, c) in t.target.terms() {
        *acc.entry(m.clone()).or_insert(0.0) -= to_f64(c);
    }
    for (mult, factor) in multipliers.iter().zip(&t.factors) {
        let f: Vec<(Monomial, f64)> = factor.terms().map(|(m, c)| (m.clone(), to_f64(c))).collect();
        let z = &mult.basis;
        for a in 0..z.len() {
            for b in 0..z.len() {
                let g = mult.gram[a][b];
                if g == 0.0 {
                    continue;
                }
                let zz = z[a].mul(&z[b]);
                for (mu, fc) in &f {
                    *acc.entry(zz.mul(mu)).or_insert(0.0) += g * fc;
                }
            }
        }
    }
    acc.values().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Copies the Gram blocks of a feasible solve into a certificate.
pub fn extract_certificate(t: &SosTemplate, sol: &SdpSolution) -> Result<SosCertificate, SosError> {
    if sol.status == SdpStatus::Inconclusive {
        return Err(SosError::Inconclusive(sol.status));
    }
    let mut cert = SosCertificate::from_grams(t.clone(), sol.blocks.clone())?;
    cert.margin = Some(sol.margin);
    Ok(cert)
}

#[cfg(test)]
pub(crate) mod tests;
