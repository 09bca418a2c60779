//! Dense semidefinite feasibility with a strict-feasibility margin.
//!
//! A problem is a list of symmetric block variables `X_b` and linear equations
//! `sum coef * X_b[row][col] = rhs` over their upper triangles. The solver
//! maximizes the margin `t` such that every block satisfies `X_b - t I ⪰ 0`.
//! Before solving, diagonal entries that the equations force to zero are removed
//! together with their rows and columns (a PSD matrix with a zero diagonal entry
//! has that whole row zero), so the margin is measured on the remaining face.
//!
//! Reported residuals and eigenvalues are always recomputed from the returned
//! matrices; the residual is evaluated in exact rational arithmetic.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::rational::{from_f64, to_f64};
use crate::poly::Rational;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_DIM_CAP: usize = 200;
/// Interior-point iterations are capped separately; each one is a full Newton step.
const IPM_ITER_CAP: usize = 150;
/// Alternating-projection iterations spent after an interior-point breakdown.
const AUTO_AP_BUDGET: usize = 3000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("total block dimension {total} exceeds the cap {cap}")]
    DimensionCap { total: usize, cap: usize },
    #[error("equality {equality}: {msg}")]
    BadEntry { equality: usize, msg: String },
    #[error("solution shape does not match the problem: {0}")]
    ShapeMismatch(String),
    #[error("malformed problem: {0}")]
    Format(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub coef: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equality {
    pub terms: Vec<Entry>,
    pub rhs: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Stop at the first iterate that is strictly feasible.
    Feasibility,
    /// Drive the margin as high as it goes.
    #[default]
    Margin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub equalities: Vec<Equality>,
    #[serde(default)]
    pub objective: Objective,
}

impl SdpProblem {
    pub fn total_dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        for (i, eq) in self.equalities.iter().enumerate() {
            if !eq.rhs.is_finite() {
                return Err(SdpError::BadEntry {
                    equality: i,
                    msg: "non-finite right-hand side".into(),
                });
            }
            for t in &eq.terms {
                let dim = *self.blocks.get(t.block).ok_or_else(|| SdpError::BadEntry {
                    equality: i,
                    msg: format!("block {} not declared", t.block),
                })?;
                if t.row >= dim || t.col >= dim {
                    return Err(SdpError::BadEntry {
                        equality: i,
                        msg: format!("entry ({}, {}) outside block {} of size {dim}", t.row, t.col, t.block),
                    });
                }
                if !t.coef.is_finite() {
                    return Err(SdpError::BadEntry {
                        equality: i,
                        msg: "non-finite coefficient".into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SdpError> {
        let p: SdpProblem = serde_json::from_str(text).map_err(|e| SdpError::Format(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    StrictlyFeasible,
    Feasible,
    Inconclusive,
}

impl fmt::Display for SdpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SdpStatus::StrictlyFeasible => "strictly_feasible",
            SdpStatus::Feasible => "feasible",
            SdpStatus::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Interior point first, alternating projections if it breaks down.
    #[default]
    Auto,
    InteriorPoint,
    AlternatingProjections,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub dim_cap: usize,
    pub method: Method,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            dim_cap: DEFAULT_DIM_CAP,
            method: Method::Auto,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    /// Full symmetric blocks, row-major.
    pub blocks: Vec<Vec<Vec<f64>>>,
    pub status: SdpStatus,
    /// Best margin found: smallest eigenvalue over the blocks restricted to the
    /// presolved face.
    pub margin: f64,
    /// Recomputed smallest eigenvalue, see [`residuals`].
    pub min_eigenvalue: f64,
    /// Largest absolute equality residual.
    pub residual: f64,
    pub iterations: usize,
    pub method: Method,
    /// Number of diagonal entries fixed to zero by the presolve.
    pub fixed_zero: usize,
}

impl SdpSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn block_matrix(&self, b: usize) -> DMatrix<f64> {
        let n = self.blocks[b].len();
        DMatrix::from_fn(n, n, |i, j| self.blocks[b][i][j])
    }
}

/// Indices kept in each block after removing diagonal entries forced to zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Face {
    pub kept: Vec<Vec<usize>>,
}

impl Face {
    pub fn contains(&self, block: usize, row: usize, col: usize) -> bool {
        let k = &self.kept[block];
        k.binary_search(&row).is_ok() && k.binary_search(&col).is_ok()
    }

    pub fn removed(&self, dims: &[usize]) -> usize {
        dims.iter().zip(&self.kept).map(|(d, k)| d - k.len()).sum()
    }
}

/// Sign pattern of one equation, enough to run [`facial_reduction_pattern`].
#[derive(Clone, Debug)]
pub struct SignRow {
    pub rhs_zero: bool,
    /// (block, row, col, coefficient is positive)
    pub terms: Vec<(usize, usize, usize, bool)>,
}

/// Repeatedly applies: an equation with zero right-hand side whose surviving terms
/// are all diagonal with one common sign forces those diagonal entries to zero.
pub fn facial_reduction_pattern(dims: &[usize], rows: &[SignRow]) -> Face {
    let mut alive: Vec<Vec<bool>> = dims.iter().map(|&d| vec![true; d]).collect();
    loop {
        let mut changed = false;
        for row in rows {
            if !row.rhs_zero {
                continue;
            }
            let active: Vec<_> = row
                .terms
                .iter()
                .filter(|(b, r, c, _)| alive[*b][*r] && alive[*b][*c])
                .collect();
            if active.is_empty() || active.iter().any(|(_, r, c, _)| r != c) {
                continue;
            }
            let sign = active[0].3;
            if active.iter().all(|t| t.3 == sign) {
                for (b, r, _, _) in active {
                    alive[*b][*r] = false;
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Face {
        kept: alive
            .into_iter()
            .map(|a| a.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect())
            .collect(),
    }
}

pub fn facial_reduction(p: &SdpProblem) -> Face {
    let rows: Vec<SignRow> = canonical_rows(p)
        .into_iter()
        .map(|(terms, rhs)| SignRow {
            rhs_zero: rhs == 0.0,
            terms: terms.into_iter().map(|(b, r, c, v)| (b, r, c, v > 0.0)).collect(),
        })
        .collect();
    facial_reduction_pattern(&p.blocks, &rows)
}

type Term = (usize, usize, usize, f64);

/// Upper-triangle terms with duplicates merged and zeros dropped.
fn canonical_rows(p: &SdpProblem) -> Vec<(Vec<Term>, f64)> {
    p.equalities
        .iter()
        .map(|eq| {
            let mut acc: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
            for t in &eq.terms {
                let (r, c) = if t.row <= t.col { (t.row, t.col) } else { (t.col, t.row) };
                *acc.entry((t.block, r, c)).or_insert(0.0) += t.coef;
            }
            let terms = acc
                .into_iter()
                .filter(|(_, v)| *v != 0.0)
                .map(|((b, r, c), v)| (b, r, c, v))
                .collect();
            (terms, eq.rhs)
        })
        .collect()
}

/// Recomputes (largest absolute residual, smallest eigenvalue).
///
/// The residual is exact: every float is a rational, summed without rounding. The
/// eigenvalue is taken over the presolved face when every entry outside the face is
/// exactly zero (then the full block is PSD iff its face part is), and over the
/// full blocks otherwise.
pub fn residuals(p: &SdpProblem, s: &SdpSolution) -> Result<(f64, f64), SdpError> {
    if s.blocks.len() != p.blocks.len() {
        return Err(SdpError::ShapeMismatch(format!(
            "{} blocks given, {} expected",
            s.blocks.len(),
            p.blocks.len()
        )));
    }
    for (b, (&d, m)) in p.blocks.iter().zip(&s.blocks).enumerate() {
        if m.len() != d || m.iter().any(|row| row.len() != d) {
            return Err(SdpError::ShapeMismatch(format!("block {b} is not {d}x{d}")));
        }
    }
    let mats: Vec<DMatrix<f64>> = (0..s.blocks.len()).map(|b| s.block_matrix(b)).collect();
    Ok((exact_residual(p, &mats), face_min_eigenvalue(&facial_reduction(p), &mats)))
}

fn face_min_eigenvalue(face: &Face, mats: &[DMatrix<f64>]) -> f64 {
    let outside_zero = mats.iter().enumerate().all(|(b, m)| {
        (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| face.contains(b, i, j) || m[(i, j)] == 0.0))
    });
    if !outside_zero {
        return min_eigenvalue(mats);
    }
    let restricted: Vec<DMatrix<f64>> = mats
        .iter()
        .zip(&face.kept)
        .map(|(m, k)| DMatrix::from_fn(k.len(), k.len(), |i, j| m[(k[i], k[j])]))
        .collect();
    min_eigenvalue(&restricted)
}

fn exact_residual(p: &SdpProblem, mats: &[DMatrix<f64>]) -> f64 {
    let mut worst = Rational::zero();
    for eq in &p.equalities {
        let mut acc = -from_f64(eq.rhs).unwrap_or_else(Rational::zero);
        for t in &eq.terms {
            let x = mats[t.block][(t.row, t.col)];
            match (from_f64(t.coef), from_f64(x)) {
                (Some(c), Some(x)) => acc += c * x,
                _ => return f64::INFINITY,
            }
        }
        let a = acc.abs();
        if a > worst {
            worst = a;
        }
    }
    to_f64(&worst)
}

fn min_eigenvalue(mats: &[DMatrix<f64>]) -> f64 {
    mats.iter()
        .filter(|m| m.nrows() > 0)
        .map(sym_min_eig)
        .fold(f64::INFINITY, f64::min)
}

fn sym_min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Solves the margin problem. `status` is `Inconclusive` whenever the recomputed
/// residual or eigenvalues do not support a feasibility claim; this is never a
/// proof of infeasibility.
pub fn solve_feasibility(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    p.validate()?;
    let total = p.total_dim();
    if total > opts.dim_cap {
        return Err(SdpError::DimensionCap {
            total,
            cap: opts.dim_cap,
        });
    }
    let face = facial_reduction(p);
    let reduced = Reduced::build(p, &face);

    let (mut xs, iterations, method) = match opts.method {
        Method::InteriorPoint => {
            let (x, it, _) = interior_point(&reduced, p.objective, opts);
            (x, it, Method::InteriorPoint)
        }
        Method::AlternatingProjections => {
            let start = reduced.zeros();
            let (x, it) = alternating_projections(&reduced, start, opts.max_iter, opts.tol);
            (x, it, Method::AlternatingProjections)
        }
        Method::Auto => {
            let (x, it, ok) = interior_point(&reduced, p.objective, opts);
            if ok != Ending::BrokeDown {
                (x, it, Method::InteriorPoint)
            } else {
                // warm start from the point the interior method reached and keep
                // whichever ends with the larger margin
                let mut ipm = x.clone();
                reduced.project_affine(&mut ipm);
                let budget = opts.max_iter.min(AUTO_AP_BUDGET);
                let (ap, it2) = alternating_projections(&reduced, x, budget, opts.tol);
                if min_eigenvalue(&ap) > min_eigenvalue(&ipm) {
                    (ap, it + it2, Method::AlternatingProjections)
                } else {
                    (ipm, it + it2, Method::InteriorPoint)
                }
            }
        }
    };
    for _ in 0..2 {
        reduced.project_affine(&mut xs);
    }
    let margin = min_eigenvalue(&xs);
    let full = reduced.expand(&xs, &p.blocks);
    let residual = exact_residual(p, &full);
    let min_eig = face_min_eigenvalue(&face, &full);
    let status = classify(residual, min_eig, opts.tol);
    Ok(SdpSolution {
        blocks: full
            .iter()
            .map(|m| (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect())
            .collect(),
        status,
        margin: if margin.is_finite() { margin } else { 0.0 },
        min_eigenvalue: if min_eig.is_finite() { min_eig } else { 0.0 },
        residual,
        iterations,
        method,
        fixed_zero: face.removed(&p.blocks),
    })
}

fn classify(residual: f64, min_eig: f64, tol: f64) -> SdpStatus {
    if !(residual <= tol) {
        SdpStatus::Inconclusive
    } else if min_eig > 10.0 * tol {
        SdpStatus::StrictlyFeasible
    } else if min_eig >= -tol {
        SdpStatus::Feasible
    } else {
        SdpStatus::Inconclusive
    }
}

/// The face problem: kept indices only, rows normalized to unit norm, linearly
/// dependent rows dropped.
struct Reduced {
    dims: Vec<usize>,
    /// Original block index and kept indices for each reduced block.
    kept: Vec<(usize, Vec<usize>)>,
    rows: Vec<Vec<Term>>,
    rhs: Vec<f64>,
    /// Cholesky factor of the Frobenius Gram matrix of `rows`, for projections.
    gram: Option<Cholesky<f64, nalgebra::Dyn>>,
}

impl Reduced {
    fn build(p: &SdpProblem, face: &Face) -> Reduced {
        let mut kept = Vec::new();
        let mut map: Vec<Option<usize>> = Vec::new();
        let mut index_maps: Vec<Vec<Option<usize>>> = Vec::new();
        for (b, k) in face.kept.iter().enumerate() {
            let mut im = vec![None; p.blocks[b]];
            for (i, &orig) in k.iter().enumerate() {
                im[orig] = Some(i);
            }
            index_maps.push(im);
            if k.is_empty() {
                map.push(None);
            } else {
                map.push(Some(kept.len()));
                kept.push((b, k.clone()));
            }
        }
        let dims: Vec<usize> = kept.iter().map(|(_, k)| k.len()).collect();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for (terms, b) in canonical_rows(p) {
            let mut t: Vec<Term> = Vec::new();
            for (blk, r, c, v) in terms {
                if let (Some(nb), Some(nr), Some(nc)) = (map[blk], index_maps[blk][r], index_maps[blk][c]) {
                    t.push((nb, nr, nc, v));
                }
            }
            let norm = frob_row_norm(&t);
            if norm == 0.0 {
                // nothing left to satisfy; a nonzero rhs shows up in the residual
                continue;
            }
            for e in &mut t {
                e.3 /= norm;
            }
            rows.push(t);
            rhs.push(b / norm);
        }
        let (rows, rhs) = independent_rows(rows, rhs);
        let gram = if rows.is_empty() {
            None
        } else {
            let k = frob_gram(&rows);
            Cholesky::new(k)
        };
        Reduced {
            dims,
            kept,
            rows,
            rhs,
            gram,
        }
    }

    fn apply(&self, xs: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| apply_row(r, xs)))
    }

    fn zeros(&self) -> Vec<DMatrix<f64>> {
        self.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect()
    }

    fn project_affine(&self, xs: &mut [DMatrix<f64>]) {
        let Some(ch) = &self.gram else { return };
        let r = self.apply(xs) - DVector::from_column_slice(&self.rhs);
        let z = ch.solve(&r);
        adjoint_add(&self.rows, &z, -1.0, xs);
    }

    fn expand(&self, xs: &[DMatrix<f64>], dims: &[usize]) -> Vec<DMatrix<f64>> {
        let mut full: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for ((b, k), x) in self.kept.iter().zip(xs) {
            for (i, &oi) in k.iter().enumerate() {
                for (j, &oj) in k.iter().enumerate() {
                    full[*b][(oi, oj)] = 0.5 * (x[(i, j)] + x[(j, i)]);
                }
            }
        }
        full
    }
}

/// Frobenius norm of the symmetric matrix with upper-triangle coefficients `t`
/// (an off-diagonal coefficient `v` stands for `v/2` in both mirrored slots).
fn frob_row_norm(t: &[Term]) -> f64 {
    t.iter()
        .map(|&(_, r, c, v)| if r == c { v * v } else { v * v / 2.0 })
        .sum::<f64>()
        .sqrt()
}

fn frob_dot(a: &[Term], b: &[Term]) -> f64 {
    // both sorted by (block, row, col)
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let ka = (a[i].0, a[i].1, a[i].2);
        let kb = (b[j].0, b[j].1, b[j].2);
        match ka.cmp(&kb) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let w = if ka.1 == ka.2 { 1.0 } else { 0.5 };
                s += w * a[i].3 * b[j].3;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

fn frob_gram(rows: &[Vec<Term>]) -> DMatrix<f64> {
    let m = rows.len();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = frob_dot(&rows[i], &rows[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Greedy selection of linearly independent rows (rows are unit norm).
fn independent_rows(rows: Vec<Vec<Term>>, rhs: Vec<f64>) -> (Vec<Vec<Term>>, Vec<f64>) {
    let mut kept: Vec<usize> = Vec::new();
    // columns of the incremental Cholesky factor of the kept rows' Gram matrix
    let mut l: Vec<Vec<f64>> = Vec::new();
    for i in 0..rows.len() {
        let k: Vec<f64> = kept.iter().map(|&j| frob_dot(&rows[i], &rows[j])).collect();
        let mut w = vec![0.0; kept.len()];
        for a in 0..kept.len() {
            let s: f64 = (0..a).map(|b| l[a][b] * w[b]).sum();
            w[a] = (k[a] - s) / l[a][a];
        }
        let d = frob_dot(&rows[i], &rows[i]) - w.iter().map(|x| x * x).sum::<f64>();
        if d > 1e-10 {
            let mut row = w;
            row.push(d.sqrt());
            l.push(row);
            kept.push(i);
        }
    }
    let r = kept.iter().map(|&i| rows[i].clone()).collect();
    let b = kept.iter().map(|&i| rhs[i]).collect();
    (r, b)
}

fn apply_row(row: &[Term], xs: &[DMatrix<f64>]) -> f64 {
    row.iter()
        .map(|&(b, r, c, v)| {
            let x = &xs[b];
            if r == c {
                v * x[(r, r)]
            } else {
                0.5 * v * (x[(r, c)] + x[(c, r)])
            }
        })
        .sum()
}

/// `xs += scale * sum_i z_i A_i`.
fn adjoint_add(rows: &[Vec<Term>], z: &DVector<f64>, scale: f64, xs: &mut [DMatrix<f64>]) {
    for (row, &zi) in rows.iter().zip(z.iter()) {
        for &(b, r, c, v) in row {
            if r == c {
                xs[b][(r, r)] += scale * zi * v;
            } else {
                let h = 0.5 * scale * zi * v;
                xs[b][(r, c)] += h;
                xs[b][(c, r)] += h;
            }
        }
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Largest step `a` with `x + a d ⪰ 0`, given the Cholesky factor of `x`.
fn max_step(ch: &Cholesky<f64, nalgebra::Dyn>, d: &DMatrix<f64>) -> f64 {
    let l = ch.l();
    let y = l.solve_lower_triangular(d).expect("nonsingular factor");
    let s = l
        .solve_lower_triangular(&y.transpose())
        .expect("nonsingular factor");
    let e = sym_min_eig(&s);
    if e >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / e
    }
}

/// Standard-form data of the margin problem `min s` where `X = Y + (cap - s) I`.
struct MarginForm {
    /// Block sizes: reduced blocks followed by the 1x1 slack block.
    dims: Vec<usize>,
    rows: Vec<Vec<Term>>,
    rhs: DVector<f64>,
    cap: f64,
}

impl MarginForm {
    fn new(red: &Reduced) -> Self {
        let slack = red.dims.len();
        let cap = red.rhs.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        let mut rows = Vec::with_capacity(red.rows.len());
        let mut rhs = Vec::with_capacity(red.rows.len());
        for (row, &b) in red.rows.iter().zip(&red.rhs) {
            let trace: f64 = row.iter().filter(|t| t.1 == t.2).map(|t| t.3).sum();
            let mut r = row.clone();
            if trace != 0.0 {
                r.push((slack, 0, 0, -trace));
            }
            rows.push(r);
            rhs.push(b - cap * trace);
        }
        let mut dims = red.dims.clone();
        dims.push(1);
        MarginForm {
            dims,
            rows,
            rhs: DVector::from_vec(rhs),
            cap,
        }
    }

    fn recover(&self, x: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        let s = x[x.len() - 1][(0, 0)];
        let lambda = self.cap - s;
        x[..x.len() - 1]
            .iter()
            .map(|y| {
                let n = y.nrows();
                y + DMatrix::identity(n, n) * lambda
            })
            .collect()
    }
}

/// Schur complement `M_ij = <A_i, X A_j W>` of the HKM direction.
struct SchurPattern {
    /// Per block: distinct upper-triangle positions and the rows using them.
    positions: Vec<Vec<((usize, usize), Vec<(usize, f64)>)>>,
    /// Per row: entries grouped by block.
    by_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
}

impl SchurPattern {
    fn new(dims: &[usize], rows: &[Vec<Term>]) -> Self {
        let mut pos: Vec<BTreeMap<(usize, usize), Vec<(usize, f64)>>> = vec![BTreeMap::new(); dims.len()];
        let mut by_block = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let mut g: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
            for &(b, r, c, v) in row {
                pos[b].entry((r, c)).or_default().push((i, v));
                g.entry(b).or_default().push((r, c, v));
            }
            by_block.push(g.into_iter().collect());
        }
        SchurPattern {
            positions: pos.into_iter().map(|m| m.into_iter().collect()).collect(),
            by_block,
        }
    }

    fn assemble(&self, x: &[DMatrix<f64>], w: &[DMatrix<f64>], m: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m, m);
        for (i, groups) in self.by_block.iter().enumerate() {
            for (b, entries) in groups {
                let (xb, wb) = (&x[*b], &w[*b]);
                let n = xb.nrows();
                // T = A_i W on the rows A_i touches, then G = X[:, rows] T
                let mut rows: Vec<usize> = entries.iter().flat_map(|&(r, c, _)| [r, c]).collect();
                rows.sort_unstable();
                rows.dedup();
                let slot = |r: usize| rows.binary_search(&r).expect("row is listed");
                let mut t = DMatrix::zeros(rows.len(), n);
                // W is symmetric, so its columns stand in for its rows
                let mut add = |r: usize, c: usize, v: f64| {
                    let sr = slot(r);
                    for (k, w) in wb.column(c).iter().enumerate() {
                        t[(sr, k)] += v * w;
                    }
                };
                for &(r, c, v) in entries {
                    if r == c {
                        add(r, r, v);
                    } else {
                        add(r, c, 0.5 * v);
                        add(c, r, 0.5 * v);
                    }
                }
                let gm = xb.select_columns(&rows) * t;
                let g = |p: usize, q: usize| -> f64 { gm[(p, q)] };
                for ((p, q), users) in &self.positions[*b] {
                    let val = if p == q { g(*p, *p) } else { 0.5 * (g(*p, *q) + g(*q, *p)) };
                    if val == 0.0 {
                        continue;
                    }
                    for &(j, v) in users {
                        out[(i, j)] += v * val;
                    }
                }
            }
        }
        let t = out.transpose();
        (out + t) * 0.5
    }
}

fn apply_rows(rows: &[Vec<Term>], xs: &[DMatrix<f64>]) -> DVector<f64> {
    DVector::from_iterator(rows.len(), rows.iter().map(|r| apply_row(r, xs)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ending {
    Converged,
    /// Numerical breakdown after reaching a primal feasible point with a small
    /// duality gap; the point is kept as is.
    Stalled,
    BrokeDown,
}

/// Relative duality gap and primal residual below which a breakdown counts as
/// [`Ending::Stalled`].
const NEAR_GAP: f64 = 1e-4;
const NEAR_PINF: f64 = 1e-6;

/// Primal-dual path following with the HKM direction and Mehrotra's corrector.
/// Returns the recovered face blocks, iterations, and how the run ended.
fn interior_point(red: &Reduced, objective: Objective, opts: &SolverOptions) -> (Vec<DMatrix<f64>>, usize, Ending) {
    let mf = MarginForm::new(red);
    let k = mf.dims.len();
    let m = mf.rows.len();
    let n_total: usize = mf.dims.iter().sum();
    let slack = k - 1;
    let c: Vec<DMatrix<f64>> = mf
        .dims
        .iter()
        .enumerate()
        .map(|(b, &d)| if b == slack { DMatrix::from_element(1, 1, 1.0) } else { DMatrix::zeros(d, d) })
        .collect();
    let bnorm = mf.rhs.norm();
    let xi = (10.0f64).max((n_total as f64).sqrt()).max(mf.rhs.amax() * (n_total as f64).sqrt());
    let mut x: Vec<DMatrix<f64>> = mf.dims.iter().map(|&d| DMatrix::identity(d, d) * xi).collect();
    let mut z: Vec<DMatrix<f64>> = mf.dims.iter().map(|&d| DMatrix::identity(d, d) * 10.0).collect();
    let mut y = DVector::zeros(m);
    let pattern = SchurPattern::new(&mf.dims, &mf.rows);
    let iter_cap = opts.max_iter.min(IPM_ITER_CAP);
    let eps = 1e-11;
    let mut best;
    let mut near;
    let mut iterations = 0;

    for it in 0..iter_cap {
        iterations = it + 1;
        let ax = apply_rows(&mf.rows, &x);
        let rp = &mf.rhs - &ax;
        let mut rd: Vec<DMatrix<f64>> = c.iter().zip(&z).map(|(cb, zb)| cb - zb).collect();
        adjoint_add(&mf.rows, &y, -1.0, &mut rd);
        let mu = inner(&x, &z) / n_total as f64;
        let pinf = rp.norm() / (1.0 + bnorm);
        let dinf = rd.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / 2.0;
        let pobj = x[slack][(0, 0)];
        let dobj = mf.rhs.dot(&y);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        best = mf.recover(&x);
        near = pinf < NEAR_PINF && gap < NEAR_GAP;
        if objective == Objective::Feasibility && pinf < eps {
            let mut probe = best.clone();
            red.project_affine(&mut probe);
            if min_eigenvalue(&probe) > 10.0 * opts.tol {
                return (probe, iterations, Ending::Converged);
            }
        }
        if pinf < eps && dinf < eps && (gap < eps || mu < eps) {
            return (best, iterations, Ending::Converged);
        }
        if pinf < NEAR_PINF && dinf < eps && gap < 1e-7 {
            // the primal residual has stopped improving; the affine projection
            // applied afterwards removes it
            return (best, iterations, Ending::Stalled);
        }

        let chx: Option<Vec<_>> = x.iter().map(|b| Cholesky::new(b.clone())).collect();
        let chz: Option<Vec<_>> = z.iter().map(|b| Cholesky::new(b.clone())).collect();
        let (Some(chx), Some(chz)) = (chx, chz) else {
            return (best, iterations, if near { Ending::Stalled } else { Ending::BrokeDown });
        };
        let w: Vec<DMatrix<f64>> = chz.iter().map(|ch| ch.inverse()).collect();
        let schur = pattern.assemble(&x, &w, m);
        let Some(schur_ch) = regularized_cholesky(schur) else {
            return (best, iterations, if near { Ending::Stalled } else { Ending::BrokeDown });
        };
        let xrdw: Vec<DMatrix<f64>> = x.iter().zip(&rd).zip(&w).map(|((xb, rb), wb)| xb * rb * wb).collect();
        let a_xrdw = apply_rows(&mf.rows, &xrdw);

        let direction = |comp: &[DMatrix<f64>]| -> (Vec<DMatrix<f64>>, DVector<f64>, Vec<DMatrix<f64>>) {
            // comp is (sigma mu I - correction) W; dX = comp - X - X dZ W
            let rhs = &mf.rhs - apply_rows(&mf.rows, comp) + &a_xrdw;
            let dy = schur_ch.solve(&rhs);
            let mut dz = rd.clone();
            adjoint_add(&mf.rows, &dy, -1.0, &mut dz);
            let dx: Vec<DMatrix<f64>> = (0..k)
                .map(|b| {
                    let mut d = &comp[b] - &x[b] - &x[b] * &dz[b] * &w[b];
                    symmetrize(&mut d);
                    d
                })
                .collect();
            (dx, dy, dz)
        };

        let zero_comp: Vec<DMatrix<f64>> = mf.dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        let (dxp, _, dzp) = direction(&zero_comp);
        let ap = step_length(&chx, &dxp);
        let ad = step_length(&chz, &dzp);
        let xa: Vec<DMatrix<f64>> = x.iter().zip(&dxp).map(|(a, d)| a + d * ap).collect();
        let za: Vec<DMatrix<f64>> = z.iter().zip(&dzp).map(|(a, d)| a + d * ad).collect();
        let mu_aff = inner(&xa, &za) / n_total as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let comp: Vec<DMatrix<f64>> = (0..k)
            .map(|b| {
                let n = mf.dims[b];
                (DMatrix::identity(n, n) * (sigma * mu) - &dxp[b] * &dzp[b]) * &w[b]
            })
            .collect();
        let (dx, dy, dz) = direction(&comp);
        let gamma = 0.95;
        let ap = (gamma * step_length(&chx, &dx)).min(1.0);
        let ad = (gamma * step_length(&chz, &dz)).min(1.0);
        if !(ap.is_finite() && ad.is_finite()) || (ap < 1e-12 && ad < 1e-12) {
            return (best, iterations, if near { Ending::Stalled } else { Ending::BrokeDown });
        }
        for b in 0..k {
            x[b] += &dx[b] * ap;
            symmetrize(&mut x[b]);
            z[b] += &dz[b] * ad;
            symmetrize(&mut z[b]);
        }
        y += dy * ad;
        if x.iter().chain(&z).any(|b| b.iter().any(|v| !v.is_finite())) {
            return (best, iterations, if near { Ending::Stalled } else { Ending::BrokeDown });
        }
    }
    (mf.recover(&x), iterations, Ending::Converged)
}

fn step_length(ch: &[Cholesky<f64, nalgebra::Dyn>], d: &[DMatrix<f64>]) -> f64 {
    ch.iter().zip(d).map(|(c, db)| max_step(c, db)).fold(f64::INFINITY, f64::min)
}

fn regularized_cholesky(m: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    if m.nrows() == 0 {
        return Cholesky::new(m);
    }
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Some(ch);
    }
    let scale = m.diagonal().amax().max(1e-300);
    let mut delta = 1e-14 * scale;
    for _ in 0..8 {
        let reg = &m + DMatrix::identity(m.nrows(), m.ncols()) * delta;
        if let Some(ch) = Cholesky::new(reg) {
            return Some(ch);
        }
        delta *= 100.0;
    }
    None
}

/// Alternates between the affine set and the shifted cone `{X : X ⪰ t I}`,
/// halving the target margin `t` whenever a round fails to converge.
fn alternating_projections(
    red: &Reduced,
    mut x: Vec<DMatrix<f64>>,
    max_iter: usize,
    tol: f64,
) -> (Vec<DMatrix<f64>>, usize) {
    red.project_affine(&mut x);
    let mut best = x.clone();
    let mut best_eig = min_eigenvalue(&best);
    let rounds = 12usize;
    let per_round = (max_iter / rounds).max(1);
    let mut target = red.rhs.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let mut iterations = 0;
    for _ in 0..rounds {
        let mut cur = best.clone();
        for _ in 0..per_round {
            iterations += 1;
            let prev = cur.clone();
            for b in cur.iter_mut() {
                clip_below(b, target);
            }
            red.project_affine(&mut cur);
            let moved: f64 = cur.iter().zip(&prev).map(|(a, b)| (a - b).norm_squared()).sum();
            if moved.sqrt() <= 1e-12 * (1.0 + inner(&cur, &cur).sqrt()) {
                break;
            }
            let res = red.apply(&cur) - DVector::from_column_slice(&red.rhs);
            let e = min_eigenvalue(&cur);
            if res.amax() <= tol * 0.1 && e >= 0.5 * target {
                break;
            }
        }
        let e = min_eigenvalue(&cur);
        if e > best_eig {
            best_eig = e;
            best = cur;
        }
        if best_eig >= 0.5 * target {
            break;
        }
        target *= 0.5;
    }
    (best, iterations)
}

fn clip_below(m: &mut DMatrix<f64>, floor: f64) {
    if m.nrows() == 0 {
        return;
    }
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    *m = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(rhs: f64) -> SdpProblem {
        SdpProblem {
            blocks: vec![1],
            equalities: vec![Equality {
                terms: vec![Entry {
                    block: 0,
                    row: 0,
                    col: 0,
                    coef: 1.0,
                }],
                rhs,
            }],
            objective: Objective::Margin,
        }
    }

    #[test]
    fn infeasible_by_sign_is_inconclusive() {
        let s = solve_feasibility(&single(-1.0), &SolverOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Inconclusive);
        assert!(s.margin <= -0.9, "margin {}", s.margin);
    }

    #[test]
    fn positive_scalar_is_strict() {
        let s = solve_feasibility(&single(2.0), &SolverOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::StrictlyFeasible);
        assert!((s.margin - 2.0).abs() < 1e-6, "margin {}", s.margin);
        let ap = SolverOptions {
            method: Method::AlternatingProjections,
            ..Default::default()
        };
        let s = solve_feasibility(&single(2.0), &ap).unwrap();
        assert_eq!(s.status, SdpStatus::StrictlyFeasible);
    }

    #[test]
    fn residual_recomputation() {
        let p = single(1.0);
        let zero = SdpSolution {
            blocks: vec![vec![vec![0.0]]],
            status: SdpStatus::Inconclusive,
            margin: 0.0,
            min_eigenvalue: 0.0,
            residual: 0.0,
            iterations: 0,
            method: Method::Auto,
            fixed_zero: 0,
        };
        assert_eq!(residuals(&p, &zero).unwrap(), (1.0, 0.0));
        let mut good = zero.clone();
        good.blocks[0][0][0] = 1.0;
        assert_eq!(residuals(&p, &good).unwrap(), (0.0, 1.0));
        for eps in [1e-2, 1e-4, 1e-6] {
            let mut s = good.clone();
            s.blocks[0][0][0] += eps;
            let (r, _) = residuals(&p, &s).unwrap();
            assert!((r - eps).abs() < 1e-15);
        }
        let bad = SdpSolution {
            blocks: vec![],
            ..zero
        };
        assert!(residuals(&p, &bad).is_err());
    }

    #[test]
    fn two_by_two_with_coupling() {
        // X00 + X11 = 2, X01 = 0.5 (coefficient on the upper entry)
        let p = SdpProblem {
            blocks: vec![2],
            equalities: vec![
                Equality {
                    terms: vec![
                        Entry { block: 0, row: 0, col: 0, coef: 1.0 },
                        Entry { block: 0, row: 1, col: 1, coef: 1.0 },
                    ],
                    rhs: 2.0,
                },
                Equality {
                    terms: vec![Entry { block: 0, row: 0, col: 1, coef: 1.0 }],
                    rhs: 0.5,
                },
            ],
            objective: Objective::Margin,
        };
        let s = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::StrictlyFeasible);
        // optimum X = [[1, .5], [.5, 1]] with eigenvalues 0.5 and 1.5
        assert!((s.margin - 0.5).abs() < 1e-6, "margin {}", s.margin);
    }

    #[test]
    fn forced_zero_diagonal_is_presolved() {
        // X00 = 0 forces the first row to zero; X11 = 1 remains.
        let p = SdpProblem {
            blocks: vec![2],
            equalities: vec![
                Equality {
                    terms: vec![Entry { block: 0, row: 0, col: 0, coef: 1.0 }],
                    rhs: 0.0,
                },
                Equality {
                    terms: vec![Entry { block: 0, row: 1, col: 1, coef: 1.0 }],
                    rhs: 1.0,
                },
            ],
            objective: Objective::Margin,
        };
        let face = facial_reduction(&p);
        assert_eq!(face.kept, vec![vec![1]]);
        let s = solve_feasibility(&p, &SolverOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::StrictlyFeasible);
        assert_eq!(s.fixed_zero, 1);
        assert_eq!(s.blocks[0][0], vec![0.0, 0.0]);
        assert!((s.margin - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dimension_cap() {
        let p = SdpProblem {
            blocks: vec![150, 60],
            equalities: vec![],
            objective: Objective::Feasibility,
        };
        assert!(matches!(
            solve_feasibility(&p, &SolverOptions::default()),
            Err(SdpError::DimensionCap { total: 210, cap: 200 })
        ));
    }

    #[test]
    fn bad_entries_rejected() {
        let mut p = single(1.0);
        p.equalities[0].terms[0].row = 3;
        assert!(matches!(p.validate(), Err(SdpError::BadEntry { .. })));
        let json = single(1.0).to_json();
        assert_eq!(SdpProblem::from_json(&json).unwrap(), single(1.0));
    }
}
