//! Shared inputs for the benchmarks.

use popcert::poly::var_names;
use popcert::sdp::{Entry, Equality, Objective, SdpProblem};
use popcert::Polynomial;

/// `x1^4 + x2^2`.
pub fn quartic() -> Polynomial {
    let v = var_names("x", 2);
    Polynomial::variable(v.clone(), 0).pow(4) + Polynomial::variable(v, 1).square()
}

/// `(1 + x1 + ... + xn)^deg`, a dense polynomial for arithmetic timings.
pub fn dense(n: usize, deg: u32) -> Polynomial {
    let v = var_names("x", n);
    let sum = (0..n).fold(Polynomial::one(v.clone()), |acc, i| acc + Polynomial::variable(v.clone(), i));
    sum.pow(deg)
}

/// Find `X >= 0` of size `n` with unit diagonal and the given off-diagonal value.
pub fn correlation_problem(n: usize, off: f64) -> SdpProblem {
    let mut equalities = Vec::new();
    for i in 0..n {
        for j in i..n {
            equalities.push(Equality {
                terms: vec![Entry {
                    block: 0,
                    row: i,
                    col: j,
                    coef: 1.0,
                }],
                rhs: if i == j { 1.0 } else { off },
            });
        }
    }
    SdpProblem {
        blocks: vec![n],
        equalities,
        objective: Objective::Margin,
    }
}
