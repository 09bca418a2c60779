//! Exact rational certificates: rounding numeric Gram matrices onto the identity's
//! affine space, exact PSD checks, and zero-tolerance identity verification.
//!
//! Rounding works in two stages. Rows of the coefficient-matching system that the
//! absorber block (the first multiplier whose factor is a single term, usually the
//! constant 1) never touches are corrected first by an exact minimum-norm solve over
//! the other blocks. Every remaining row then owns a disjoint set of absorber
//! entries, and its residual is spread evenly over them. The identity holds exactly
//! after both stages, so only positive semidefiniteness can fail.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::rational::{parse_fraction, round_dyadic, simplest_within, to_f64, to_fraction_string};
use crate::poly::{Monomial, Polynomial, Rational};
use crate::sdp::Face;
use crate::sos::{compile_exact, ExactSystem, NumericMultiplier, SosCertificate, SosError, SosTemplate};

/// Exact symmetric matrix, row-major.
pub type RationalMatrix = Vec<Vec<Rational>>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RationalizeError {
    #[error("certificate margin {0:e} is not positive; round only strictly feasible solutions")]
    NoMargin(f64),
    #[error(transparent)]
    Template(#[from] SosError),
    #[error("certificate does not match its template: {0}")]
    Shape(String),
    #[error("the identity cannot hold on the presolved face (monomial {0})")]
    Inconsistent(String),
    #[error(
        "Gram matrix {multiplier} is not PSD after rounding at 2^-{denom_power}{}; \
         the rounding error exceeds the margin, retry with denom_power >= {suggested}",
        margin.map(|m| format!(" (margin {m:e})")).unwrap_or_default()
    )]
    NotPsd {
        multiplier: usize,
        denom_power: u32,
        margin: Option<f64>,
        suggested: u32,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("matrix is not symmetric at ({row}, {col})")]
pub struct NotSymmetric {
    pub row: usize,
    pub col: usize,
}

/// Why an exact certificate was rejected.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyFailure {
    #[error("malformed certificate: {0}")]
    Shape(String),
    #[error("Gram matrix {0} is not symmetric")]
    NotSymmetric(usize),
    #[error("Gram matrix {0} is not positive semidefinite")]
    NotPsd(usize),
    #[error("coefficient of {monomial} is {found}, target has {expected}")]
    Mismatch {
        monomial: String,
        expected: String,
        found: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMultiplier {
    pub basis: Vec<Monomial>,
    pub gram: RationalMatrix,
}

/// A template together with exact Gram matrices for its multipliers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalCertificate {
    pub template: SosTemplate,
    pub multipliers: Vec<RationalMultiplier>,
}

impl RationalCertificate {
    /// Builds a certificate from exact Gram matrices in the template's bases.
    pub fn from_grams(template: SosTemplate, grams: Vec<RationalMatrix>) -> Result<Self, RationalizeError> {
        let bases = template.bases();
        if grams.len() != bases.len() {
            return Err(RationalizeError::Shape(format!(
                "{} Gram matrices for {} multipliers",
                grams.len(),
                bases.len()
            )));
        }
        for (j, (g, b)) in grams.iter().zip(&bases).enumerate() {
            if g.len() != b.len() || g.iter().any(|r| r.len() != b.len()) {
                return Err(RationalizeError::Shape(format!("Gram matrix {j} is not {0}x{0}", b.len())));
            }
        }
        let multipliers = bases
            .into_iter()
            .zip(grams)
            .map(|(basis, gram)| RationalMultiplier { basis, gram })
            .collect();
        Ok(RationalCertificate { template, multipliers })
    }

    /// `z_j^T G_j z_j` for every multiplier.
    pub fn multiplier_polynomials(&self) -> Vec<Polynomial> {
        self.multipliers
            .iter()
            .map(|m| {
                let mut acc: BTreeMap<Monomial, Rational> = BTreeMap::new();
                add_quadratic_form(&mut acc, &m.basis, &m.gram, None);
                let terms = acc.into_iter().map(|(m, c)| (m.exps().to_vec(), c));
                Polynomial::from_terms(self.template.vars.clone(), terms).expect("basis matches the template")
            })
            .collect()
    }

    /// Largest denominator bit length over all Gram entries.
    pub fn max_denominator_bits(&self) -> u64 {
        self.multipliers
            .iter()
            .flat_map(|m| m.gram.iter().flatten())
            .map(|r| r.denom().bits())
            .max()
            .unwrap_or(0)
    }

    pub fn to_numeric(&self) -> SosCertificate {
        let grams = self
            .multipliers
            .iter()
            .map(|m| m.gram.iter().map(|r| r.iter().map(to_f64).collect()).collect())
            .collect();
        let mut c = SosCertificate::from_grams(self.template.clone(), grams).expect("shapes already match");
        c.multipliers
            .iter_mut()
            .zip(&self.multipliers)
            .for_each(|(n, m)| n.basis = m.basis.clone());
        c
    }
}

#[derive(Serialize, Deserialize)]
struct MultiplierDoc {
    basis: Vec<Monomial>,
    gram: Vec<Vec<String>>,
}

impl Serialize for RationalMultiplier {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MultiplierDoc {
            basis: self.basis.clone(),
            gram: self
                .gram
                .iter()
                .map(|r| r.iter().map(to_fraction_string).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RationalMultiplier {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = MultiplierDoc::deserialize(d)?;
        let gram = doc
            .gram
            .iter()
            .map(|r| r.iter().map(|s| parse_fraction(s)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(serde::de::Error::custom)?;
        Ok(RationalMultiplier { basis: doc.basis, gram })
    }
}

/// On-disk certificate, tagged by `"form"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum CertificateFile {
    Numeric(SosCertificate),
    Exact(RationalCertificate),
}

impl CertificateFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

impl fmt::Display for RationalCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} =", self.template.target)?;
        for (j, (s, g)) in self.multiplier_polynomials().iter().zip(&self.template.factors).enumerate() {
            let sep = if j == 0 { " " } else { " + " };
            write!(f, "{sep}[{s}]*[{g}]")?;
        }
        Ok(())
    }
}

/// Decides `m ⪰ 0` exactly by LDL^T with symmetric (diagonal) pivoting.
///
/// At each step the largest remaining diagonal entry is the pivot. A negative
/// pivot means indefinite; once every remaining diagonal entry is zero the matrix
/// is PSD exactly when the remaining block is zero.
pub fn check_psd_exact(m: &[Vec<Rational>]) -> Result<bool, NotSymmetric> {
    let n = m.len();
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(NotSymmetric { row: i, col: row.len() });
        }
        for j in 0..i {
            if m[i][j] != m[j][i] {
                return Err(NotSymmetric { row: i, col: j });
            }
        }
    }
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let mut active: Vec<usize> = (0..n).collect();
    while !active.is_empty() {
        let (pos, &p) = active
            .iter()
            .enumerate()
            .max_by(|x, y| a[*x.1][*x.1].cmp(&a[*y.1][*y.1]).then(y.0.cmp(&x.0)))
            .expect("nonempty");
        let piv = a[p][p].clone();
        if piv.is_negative() {
            return Ok(false);
        }
        if piv.is_zero() {
            return Ok(active.iter().all(|&i| active.iter().all(|&j| a[i][j].is_zero())));
        }
        active.remove(pos);
        let col: Vec<Rational> = active.iter().map(|&i| a[i][p].clone()).collect();
        for (x, &i) in active.iter().enumerate() {
            if col[x].is_zero() {
                continue;
            }
            let f = &col[x] / &piv;
            for (y, &j) in active.iter().enumerate().skip(x) {
                if col[y].is_zero() {
                    continue;
                }
                let v = &a[i][j] - &f * &col[y];
                a[j][i] = v.clone();
                a[i][j] = v;
            }
        }
    }
    Ok(true)
}

fn add_quadratic_form(
    acc: &mut BTreeMap<Monomial, Rational>,
    basis: &[Monomial],
    gram: &[Vec<Rational>],
    factor: Option<&Polynomial>,
) {
    let one = [(Monomial::one(basis.first().map_or(0, |b| b.nvars())), Rational::one())];
    let fterms: Vec<(Monomial, Rational)> = match factor {
        Some(f) => f.terms().map(|(m, c)| (m.clone(), c.clone())).collect(),
        None => one.to_vec(),
    };
    for a in 0..basis.len() {
        for b in a..basis.len() {
            let g = &gram[a][b];
            if g.is_zero() {
                continue;
            }
            let g = if a == b { g.clone() } else { g * Rational::from_integer(2.into()) };
            let zz = basis[a].mul(&basis[b]);
            for (mu, fc) in &fterms {
                let e = acc.entry(zz.mul(mu)).or_insert_with(Rational::zero);
                *e += &g * fc;
            }
        }
    }
}

/// Checks `target = sum_j (z_j^T G_j z_j) * factor_j` coefficient by coefficient
/// and `G_j ⪰ 0` for every `j`, all in exact arithmetic.
pub fn verify_identity(cert: &RationalCertificate) -> Result<(), VerifyFailure> {
    let t = &cert.template;
    let n = t.vars.len();
    if cert.multipliers.len() != t.factors.len() {
        return Err(VerifyFailure::Shape(format!(
            "{} multipliers for {} factors",
            cert.multipliers.len(),
            t.factors.len()
        )));
    }
    for (j, m) in cert.multipliers.iter().enumerate() {
        let k = m.basis.len();
        if m.gram.len() != k || m.gram.iter().any(|r| r.len() != k) {
            return Err(VerifyFailure::Shape(format!("Gram matrix {j} is not {k}x{k}")));
        }
        if m.basis.iter().any(|b| b.nvars() != n) {
            return Err(VerifyFailure::Shape(format!("basis {j} is not over {n} variables")));
        }
    }
    let mut acc: BTreeMap<Monomial, Rational> = BTreeMap::new();
    for (m, f) in cert.multipliers.iter().zip(&t.factors) {
        add_quadratic_form(&mut acc, &m.basis, &m.gram, Some(f));
    }
    for (m, c) in t.target.terms() {
        let e = acc.entry(m.clone()).or_insert_with(Rational::zero);
        *e -= c;
    }
    if let Some((m, diff)) = acc.iter().find(|(_, d)| !d.is_zero()) {
        let expected = t.target.coefficient(m);
        return Err(VerifyFailure::Mismatch {
            monomial: m.display_with(&t.vars),
            found: to_fraction_string(&(&expected + diff)),
            expected: to_fraction_string(&expected),
        });
    }
    for (j, m) in cert.multipliers.iter().enumerate() {
        match check_psd_exact(&m.gram) {
            Ok(true) => {}
            Ok(false) => return Err(VerifyFailure::NotPsd(j)),
            Err(_) => return Err(VerifyFailure::NotSymmetric(j)),
        }
    }
    Ok(())
}

/// How far above `denom_power` the internal retries go.
pub const RETRY_STEPS: [u32; 3] = [0, 8, 16];

/// Rounds a numeric certificate to an exact one.
///
/// Entries are first snapped to nearby simple fractions where one exists, otherwise
/// rounded to multiples of `2^-denom_power`; the result is projected exactly onto the
/// identity and checked for PSD. On failure the rounding is retried at
/// `denom_power + 8` and `denom_power + 16`, each time also without snapping.
pub fn rationalize(cert: &SosCertificate, denom_power: u32) -> Result<RationalCertificate, RationalizeError> {
    if let Some(m) = cert.margin {
        if m.is_nan() || m <= 0.0 {
            return Err(RationalizeError::NoMargin(m));
        }
    }
    let template = &cert.template;
    let sys = compile_exact(template)?;
    if cert.multipliers.len() != sys.bases.len() {
        return Err(RationalizeError::Shape(format!(
            "{} multipliers for {} factors",
            cert.multipliers.len(),
            sys.bases.len()
        )));
    }
    for (j, (m, b)) in cert.multipliers.iter().zip(&sys.bases).enumerate() {
        if &m.basis != b {
            return Err(RationalizeError::Shape(format!("basis {j} differs from the template's")));
        }
        if m.gram.len() != b.len() || m.gram.iter().any(|r| r.len() != b.len()) {
            return Err(RationalizeError::Shape(format!("Gram matrix {j} is not {0}x{0}", b.len())));
        }
    }
    let plan = Plan::new(template, sys);
    let finish = |grams: Vec<RationalMatrix>| RationalCertificate {
        template: template.clone(),
        multipliers: plan
            .sys
            .bases
            .iter()
            .cloned()
            .zip(grams)
            .map(|(basis, gram)| RationalMultiplier { basis, gram })
            .collect(),
    };
    let mut last = None;
    for step in RETRY_STEPS {
        let power = denom_power + step;
        for snap in [true, false] {
            let grams = round_grams(&cert.multipliers, &plan.face, power, snap);
            {
                let grams = plan.project(grams)?;
                match first_non_psd(&grams) {
                None => return Ok(finish(grams)),
                Some(j) => last = Some((j, power)),
            }
            }
        }
    }
    for step in RETRY_STEPS {
        let power = denom_power + step;
        for use_snap in [true, false] {
            let rounder = |x: f64| if use_snap { snap(x) } else { None };
            if let Some(grams) = facial::round_on_face(&plan.sys, &cert.multipliers, power, rounder) {
                return Ok(finish(grams));
            }
        }
    }
    let (multiplier, tried) = last.expect("at least one attempt ran");
    Err(RationalizeError::NotPsd {
        multiplier,
        denom_power: tried,
        margin: cert.margin,
        suggested: tried + 8,
    })
}

fn first_non_psd(grams: &[RationalMatrix]) -> Option<usize> {
    grams
        .iter()
        .position(|g| !check_psd_exact(g).expect("projection keeps matrices symmetric"))
}

fn snap(x: f64) -> Option<Rational> {
    simplest_within(x, 1e-11 * x.abs().max(1.0), 1 << 12)
}

fn round_grams(mults: &[NumericMultiplier], face: &Face, power: u32, use_snap: bool) -> Vec<RationalMatrix> {
    mults
        .iter()
        .enumerate()
        .map(|(b, m)| {
            let k = m.gram.len();
            let mut g = vec![vec![Rational::zero(); k]; k];
            for i in 0..k {
                for j in i..k {
                    if !face.contains(b, i, j) {
                        continue;
                    }
                    let x = 0.5 * (m.gram[i][j] + m.gram[j][i]);
                    let r = use_snap
                        .then(|| snap(x))
                        .flatten()
                        .unwrap_or_else(|| round_dyadic(x, power));
                    g[i][j] = r.clone();
                    g[j][i] = r;
                }
            }
            g
        })
        .collect()
}

pub(crate) type Var = (usize, usize, usize);

/// Row classification shared by all rounding attempts.
struct Plan {
    sys: ExactSystem,
    face: Face,
    vars: Vec<String>,
    absorber: Option<usize>,
    /// Row indices solved by the exact minimum-norm step.
    stage1: Vec<usize>,
    /// Row indices fixed by the absorber.
    stage2: Vec<usize>,
}

impl Plan {
    fn new(t: &SosTemplate, sys: ExactSystem) -> Plan {
        let face = sys.face();
        let absorber = t.factors.iter().position(|f| f.num_terms() == 1);
        let (mut stage1, mut stage2) = (Vec::new(), Vec::new());
        for (k, row) in sys.rows.iter().enumerate() {
            let absorbed = absorber.is_some_and(|a| {
                row.terms
                    .iter()
                    .any(|(b, i, j, _)| *b == a && face.contains(*b, *i, *j))
            });
            if absorbed {
                stage2.push(k);
            } else {
                stage1.push(k);
            }
        }
        Plan {
            sys,
            face,
            vars: t.vars.clone(),
            absorber,
            stage1,
            stage2,
        }
    }

    fn face_terms(&self, k: usize) -> impl Iterator<Item = &(usize, usize, usize, Rational)> {
        self.sys.rows[k]
            .terms
            .iter()
            .filter(|(b, i, j, _)| self.face.contains(*b, *i, *j))
    }

    fn row_residual(&self, k: usize, g: &[RationalMatrix]) -> Rational {
        let mut r = self.sys.rows[k].rhs.clone();
        for (b, i, j, c) in self.face_terms(k) {
            r -= c * &g[*b][*i][*j];
        }
        r
    }

    fn inconsistent(&self, k: usize) -> RationalizeError {
        RationalizeError::Inconsistent(self.sys.rows[k].monomial.display_with(&self.vars))
    }

    fn project(&self, mut g: Vec<RationalMatrix>) -> Result<Vec<RationalMatrix>, RationalizeError> {
        self.stage_one(&mut g)?;
        let a = self.absorber;
        for &k in &self.stage2 {
            let delta = self.row_residual(k, &g);
            if delta.is_zero() {
                continue;
            }
            // Minimum Frobenius-norm change: off-diagonal variables stand for two
            // mirrored entries, so they carry weight 2.
            let own: Vec<_> = self.face_terms(k).filter(|t| Some(t.0) == a).collect();
            let mut denom = Rational::zero();
            for (_, i, j, c) in &own {
                denom += if i == j { c * c } else { c * c / Rational::from_integer(2.into()) };
            }
            let step = &delta / &denom;
            for (b, i, j, c) in own {
                let d = if i == j { c * &step } else { c * &step / Rational::from_integer(2.into()) };
                let v = &g[*b][*i][*j] + d;
                g[*b][*j][*i] = v.clone();
                g[*b][*i][*j] = v;
            }
        }
        Ok(g)
    }

    fn stage_one(&self, g: &mut [RationalMatrix]) -> Result<(), RationalizeError> {
        let mut rows: Vec<(usize, Vec<(Var, Rational)>)> = Vec::new();
        for &k in &self.stage1 {
            let terms: Vec<(Var, Rational)> = self.face_terms(k).map(|(b, i, j, c)| ((*b, *i, *j), c.clone())).collect();
            if terms.is_empty() {
                if !self.sys.rows[k].rhs.is_zero() {
                    return Err(self.inconsistent(k));
                }
                continue;
            }
            rows.push((k, terms));
        }
        let resid: Vec<Rational> = rows.iter().map(|(k, _)| self.row_residual(*k, g)).collect();
        let terms: Vec<Vec<(Var, Rational)>> = rows.iter().map(|(_, t)| t.clone()).collect();
        min_norm_update(&terms, resid, g).map_err(|r| self.inconsistent(rows[r].0))
    }
}

/// Adds the smallest correction (in Frobenius norm) to the symmetric matrices `g`
/// that removes the residuals `resid` of the sparse rows `rows`. Off-diagonal
/// variables stand for two mirrored entries. Returns the index of a row that makes
/// the system inconsistent.
pub(crate) fn min_norm_update(
    rows: &[Vec<(Var, Rational)>],
    resid: Vec<Rational>,
    g: &mut [RationalMatrix],
) -> Result<(), usize> {
    if resid.iter().all(Zero::is_zero) {
        return Ok(());
    }
    // weighted normal equations (A W^-1 A^T) y = r, W = 1 on the diagonal and 2 off it
    let half = Rational::new(1.into(), 2.into());
    let weight = |v: &Var| if v.1 == v.2 { Rational::one() } else { half.clone() };
    let mut by_var: BTreeMap<Var, Vec<(usize, Rational)>> = BTreeMap::new();
    for (r, terms) in rows.iter().enumerate() {
        for (v, c) in terms {
            by_var.entry(*v).or_default().push((r, c.clone()));
        }
    }
    let m = rows.len();
    let mut gram = vec![vec![Rational::zero(); m]; m];
    for (v, occ) in &by_var {
        let w = weight(v);
        for (x, (r1, c1)) in occ.iter().enumerate() {
            for (r2, c2) in &occ[x..] {
                let add = c1 * c2 * &w;
                gram[*r1][*r2] += &add;
                if r1 != r2 {
                    gram[*r2][*r1] += add;
                }
            }
        }
    }
    let y = solve_consistent(gram, resid)?;
    for (v, occ) in &by_var {
        let mut d = Rational::zero();
        for (r, c) in occ {
            d += c * &y[*r];
        }
        if d.is_zero() {
            continue;
        }
        let (b, i, j) = *v;
        let val = &g[b][i][j] + d * weight(v);
        g[b][j][i] = val.clone();
        g[b][i][j] = val;
    }
    Ok(())
}

/// Solves `a y = r` exactly by Gauss-Jordan elimination, choosing free variables as
/// zero when `a` is singular. Returns the index of an offending row when the
/// system has no solution.
fn solve_consistent(mut a: Vec<Vec<Rational>>, mut r: Vec<Rational>) -> Result<Vec<Rational>, usize> {
    let n = a.len();
    let mut pivot_of_col = vec![None; n];
    let mut row = 0;
    let mut order: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let Some(p) = (row..n).find(|&i| !a[i][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        r.swap(row, p);
        order.swap(row, p);
        let inv = a[row][col].recip();
        for x in a[row].iter_mut() {
            *x *= &inv;
        }
        r[row] *= &inv;
        for i in 0..n {
            if i == row || a[i][col].is_zero() {
                continue;
            }
            let f = a[i][col].clone();
            for c in col..n {
                let v = &f * &a[row][c];
                a[i][c] -= v;
            }
            let v = &f * &r[row];
            r[i] -= v;
        }
        pivot_of_col[col] = Some(row);
        row += 1;
    }
    if let Some(i) = (row..n).find(|&i| !r[i].is_zero()) {
        return Err(order[i]);
    }
    let mut y = vec![Rational::zero(); n];
    for (col, p) in pivot_of_col.iter().enumerate() {
        if let Some(p) = p {
            y[col] = r[*p].clone();
        }
    }
    Ok(y)
}

mod facial;
