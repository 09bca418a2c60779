use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// Exponent vector over an ambient variable list.
///
/// Ordered by total degree first; within a degree, monomials that put more weight on
/// earlier variables come first (`x1^2 < x1*x2 < x2^2`). Sorted lists therefore read
/// the way monomial bases are usually written: `1, x1, x2, x1^2, x1*x2, x2^2, ...`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Monomial(exps)
    }

    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, idx: usize) -> Self {
        let mut e = vec![0; nvars];
        e[idx] = 1;
        Monomial(e)
    }

    pub fn exps(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub(crate) fn exps_mut(&mut self) -> &mut Vec<u32> {
        &mut self.0
    }

    /// Human-readable rendering, e.g. `x1^2*y`.
    pub fn display_with(&self, vars: &[String]) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| {
                let name = vars.get(i).cloned().unwrap_or_else(|| format!("v{i}"));
                if e == 1 {
                    name
                } else {
                    format!("{name}^{e}")
                }
            })
            .collect();
        if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        }
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All monomials in `nvars` variables with total degree at most `max_degree`, sorted.
pub fn monomials_up_to(nvars: usize, max_degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in 0..=max_degree {
        let mut cur = vec![0u32; nvars];
        push_degree(&mut out, &mut cur, 0, d);
    }
    out
}

// exponent vectors of exact degree `left` over positions `pos..`, earliest-variable-heavy first
fn push_degree(out: &mut Vec<Monomial>, cur: &mut Vec<u32>, pos: usize, left: u32) {
    if pos == cur.len() {
        if left == 0 {
            out.push(Monomial(cur.clone()));
        }
        return;
    }
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(Monomial(cur.clone()));
        cur[pos] = 0;
        return;
    }
    for e in (0..=left).rev() {
        cur[pos] = e;
        push_degree(out, cur, pos + 1, left - e);
    }
    cur[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_order() {
        let m = |v: &[u32]| Monomial::new(v.to_vec());
        assert!(m(&[0, 0]) < m(&[1, 0]));
        assert!(m(&[1, 0]) < m(&[0, 1]));
        assert!(m(&[0, 1]) < m(&[2, 0]));
        assert!(m(&[2, 0]) < m(&[1, 1]));
        assert!(m(&[1, 1]) < m(&[0, 2]));
    }

    #[test]
    fn enumeration_is_sorted_and_complete() {
        let ms = monomials_up_to(2, 2);
        let shown: Vec<_> = ms.iter().map(|m| m.exps().to_vec()).collect();
        assert_eq!(
            shown,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        let mut sorted = monomials_up_to(3, 4);
        let n = sorted.len();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), n);
        assert_eq!(n, 35);
        assert_eq!(monomials_up_to(0, 3).len(), 1);
    }
}
