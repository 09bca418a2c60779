//! Rounding on the face exposed by a boundary solution.
//!
//! When a numeric Gram matrix has eigenvalues at rounding-noise level, every exact
//! solution nearby is usually forced to share that kernel (the identity is tight
//! at some point). If the kernel has a simple rational basis `N`, writing
//! `G = P H P^T` with `P` spanning the null space of `N` keeps the kernel exactly,
//! and the projection runs on the smaller matrices `H`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::Zero;

use super::{check_psd_exact, min_norm_update, RationalMatrix, Var};
use crate::poly::rational::{round_dyadic, simplest_within, to_f64};
use crate::sos::{ExactSystem, NumericMultiplier};
use crate::Rational;

/// Eigenvalues below this fraction of the largest one count as kernel.
pub const KERNEL_TOL: f64 = 1e-6;

/// Tolerance for snapping kernel vectors to small rationals. Loose because the
/// result is checked exactly.
pub const KERNEL_SNAP_TOL: f64 = 1e-4;

/// Largest coefficient-matching system handled on the face.
pub const FACE_ROW_CAP: usize = 400;

/// Exact `n x (n - k)` basis of the vectors orthogonal to a numerical kernel, or
/// `None` when the kernel has no simple rational basis.
fn complement_basis(g: &DMatrix<f64>) -> Option<Vec<Vec<Rational>>> {
    let n = g.nrows();
    let eig = SymmetricEigen::new(g.clone());
    let top = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let kernel: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] < KERNEL_TOL * top).collect();
    if kernel.is_empty() {
        return Some(
            (0..n)
                .map(|i| (0..n).map(|j| Rational::from_integer((i == j).into())).collect())
                .collect(),
        );
    }
    // reduced row echelon form of the kernel vectors, then snap
    let mut k = DMatrix::from_fn(kernel.len(), n, |r, c| eig.eigenvectors[(c, kernel[r])]);
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        if row == k.nrows() {
            break;
        }
        let (p, best) = (row..k.nrows())
            .map(|r| (r, k[(r, col)].abs()))
            .fold((row, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        if best < 1e-8 {
            continue;
        }
        k.swap_rows(row, p);
        let pv = k[(row, col)];
        for c in 0..n {
            k[(row, c)] /= pv;
        }
        for r in 0..k.nrows() {
            if r != row {
                let f = k[(r, col)];
                for c in 0..n {
                    k[(r, c)] -= f * k[(row, c)];
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    if pivots.len() != kernel.len() {
        return None;
    }
    let mut rref = vec![vec![Rational::zero(); n]; pivots.len()];
    for (r, out) in rref.iter_mut().enumerate() {
        for c in 0..n {
            if pivots.contains(&c) {
                out[c] = Rational::from_integer((c == pivots[r]).into());
            } else {
                out[c] = simplest_within(k[(r, c)], KERNEL_SNAP_TOL, 256)?;
            }
        }
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    Some(
        (0..n)
            .map(|i| {
                free.iter()
                    .map(|&f| {
                        if i == f {
                            Rational::from_integer(1.into())
                        } else if let Some(r) = pivots.iter().position(|&p| p == i) {
                            -rref[r][f].clone()
                        } else {
                            Rational::zero()
                        }
                    })
                    .collect()
            })
            .collect(),
    )
}

fn to_float(m: &[Vec<Rational>], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| to_f64(&m[i][j]))
}

/// Rounds on the face of the numeric solution. `None` when the kernels are not
/// rational, the identity is inconsistent on the face, or the result is not PSD.
pub(super) fn round_on_face(
    sys: &ExactSystem,
    mults: &[NumericMultiplier],
    power: u32,
    snap: impl Fn(f64) -> Option<Rational>,
) -> Option<Vec<RationalMatrix>> {
    if sys.rows.len() > FACE_ROW_CAP {
        return None;
    }
    let mut bases = Vec::with_capacity(mults.len());
    let mut h = Vec::with_capacity(mults.len());
    for m in mults {
        let n = m.gram.len();
        let g = DMatrix::from_fn(n, n, |i, j| 0.5 * (m.gram[i][j] + m.gram[j][i]));
        let p = complement_basis(&g)?;
        let k = p.first().map_or(0, |r| r.len());
        let pf = to_float(&p, n, k);
        let pinv = (pf.transpose() * &pf).try_inverse()? * pf.transpose();
        let hf = &pinv * g * pinv.transpose();
        let mut hr = vec![vec![Rational::zero(); k]; k];
        for a in 0..k {
            for b in a..k {
                let x = 0.5 * (hf[(a, b)] + hf[(b, a)]);
                let r = snap(x).unwrap_or_else(|| round_dyadic(x, power));
                hr[a][b] = r.clone();
                hr[b][a] = r;
            }
        }
        bases.push(p);
        h.push(hr);
    }
    // rows of the identity in terms of the entries of H
    let mut rows: Vec<Vec<(Var, Rational)>> = Vec::with_capacity(sys.rows.len());
    let mut resid = Vec::with_capacity(sys.rows.len());
    for row in &sys.rows {
        let mut acc: std::collections::BTreeMap<Var, Rational> = std::collections::BTreeMap::new();
        for (blk, i, j, c) in &row.terms {
            let p = &bases[*blk];
            let k = p[*i].len();
            for a in 0..k {
                if p[*i][a].is_zero() && p[*j][a].is_zero() {
                    continue;
                }
                for b in a..k {
                    let mut w = &p[*i][a] * &p[*j][b];
                    if a != b {
                        w += &p[*i][b] * &p[*j][a];
                    }
                    if !w.is_zero() {
                        *acc.entry((*blk, a, b)).or_insert_with(Rational::zero) += c * w;
                    }
                }
            }
        }
        let terms: Vec<(Var, Rational)> = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        if terms.is_empty() {
            if !row.rhs.is_zero() {
                return None;
            }
            continue;
        }
        let mut r = row.rhs.clone();
        for ((b, i, j), c) in &terms {
            r -= c * &h[*b][*i][*j];
        }
        rows.push(terms);
        resid.push(r);
    }
    min_norm_update(&rows, resid, &mut h).ok()?;
    if !h.iter().all(|m| check_psd_exact(m).unwrap_or(false)) {
        return None;
    }
    Some(
        bases
            .iter()
            .zip(&h)
            .map(|(p, hm)| {
                let n = p.len();
                let k = hm.len();
                let mut g = vec![vec![Rational::zero(); n]; n];
                for i in 0..n {
                    for j in i..n {
                        let mut v = Rational::zero();
                        for a in 0..k {
                            if p[i][a].is_zero() {
                                continue;
                            }
                            for b in 0..k {
                                if !p[j][b].is_zero() {
                                    v += &p[i][a] * &hm[a][b] * &p[j][b];
                                }
                            }
                        }
                        g[j][i] = v.clone();
                        g[i][j] = v;
                    }
                }
                g
            })
            .collect(),
    )
}
