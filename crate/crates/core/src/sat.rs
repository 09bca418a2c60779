//! ONE-IN-THREE 3SAT instances, a DIMACS-like reader, and a brute-force oracle.
//!
//! The oracle is ground truth for every reduction in [`crate::reductions`]; it
//! enumerates all `2^n` assignments and is therefore capped.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::rational::int;
use crate::poly::Rational;

/// Largest variable count the brute-force oracle accepts.
pub const BRUTE_FORCE_CAP: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: clause must have 3 literals, found {found}")]
    ClauseArity { line: usize, found: usize },
    #[error("line {line}: literal {literal} references a variable outside 1..={n}")]
    VariableOutOfRange { line: usize, literal: i64, n: usize },
    #[error("missing \"p o3sat n k\" header")]
    MissingHeader,
    #[error("header declares {declared} clauses but {found} were given")]
    ClauseCount { declared: usize, found: usize },
    #[error("instance has {n} variables; brute force is capped at {cap}")]
    CapExceeded { n: usize, cap: usize },
}

/// A signed variable reference: `+v` is `x_v`, `-v` is its negation (`v >= 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Literal(i32);

impl Literal {
    pub fn new(signed: i32) -> Self {
        assert!(signed != 0, "literal 0 is the clause terminator");
        Literal(signed)
    }

    /// Zero-based variable index.
    pub fn index(self) -> usize {
        self.0.unsigned_abs() as usize - 1
    }

    pub fn is_negated(self) -> bool {
        self.0 < 0
    }

    pub fn signed(self) -> i32 {
        self.0
    }

    pub fn is_true_under(self, a: &Assignment) -> bool {
        a.0[self.index()] != self.is_negated()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause(pub [Literal; 3]);

impl Clause {
    pub fn new(a: i32, b: i32, c: i32) -> Self {
        Clause([Literal::new(a), Literal::new(b), Literal::new(c)])
    }

    pub fn literals(&self) -> &[Literal; 3] {
        &self.0
    }

    pub fn true_count(&self, a: &Assignment) -> usize {
        self.0.iter().filter(|l| l.is_true_under(a)).count()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneInThreeInstance {
    n: usize,
    clauses: Vec<Clause>,
}

impl OneInThreeInstance {
    /// Panics if a literal is out of range; use [`parse_cnf`] for untrusted input.
    pub fn new(n: usize, clauses: Vec<Clause>) -> Self {
        for c in &clauses {
            for l in c.literals() {
                assert!(l.index() < n, "literal {} out of range for n = {n}", l.signed());
            }
        }
        OneInThreeInstance { n, clauses }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Every clause has exactly one true literal.
    pub fn satisfied_by(&self, a: &Assignment) -> bool {
        a.len() == self.n && self.clauses.iter().all(|c| c.true_count(a) == 1)
    }

    pub fn to_cnf_string(&self) -> String {
        let mut s = format!("p o3sat {} {}\n", self.n, self.clauses.len());
        for c in &self.clauses {
            let [a, b, d] = c.0;
            s.push_str(&format!("{} {} {} 0\n", a.signed(), b.signed(), d.signed()));
        }
        s
    }
}

/// Truth values of `x_1..x_n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        Assignment(values)
    }

    /// Assignment whose `i`-th value is bit `i` of `mask`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Assignment((0..n).map(|i| (mask >> i) & 1 == 1).collect())
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `true -> +1`, `false -> -1`.
    pub fn signs(&self) -> Vec<i64> {
        self.0.iter().map(|&b| if b { 1 } else { -1 }).collect()
    }

    pub fn sign_point(&self) -> Vec<Rational> {
        self.signs().into_iter().map(int).collect()
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<&str> = self.0.iter().map(|&b| if b { "T" } else { "F" }).collect();
        write!(f, "({})", s.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatOutcome {
    Sat(Assignment),
    Unsat,
}

impl SatOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatOutcome::Sat(_))
    }
}

/// Reads `p o3sat n k` followed by `k` lines of three nonzero literals and a `0`.
/// Lines starting with `c` are comments.
pub fn parse_cnf(text: &str) -> Result<OneInThreeInstance, SatError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(SatError::Parse {
                    line: line_no,
                    msg: "duplicate header".into(),
                });
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 4 || toks[0] != "p" || toks[1] != "o3sat" {
                return Err(SatError::Parse {
                    line: line_no,
                    msg: "expected \"p o3sat n k\"".into(),
                });
            }
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| SatError::Parse {
                    line: line_no,
                    msg: format!("bad count {s:?}"),
                })
            };
            header = Some((parse(toks[2])?, parse(toks[3])?));
            continue;
        }
        let (n, _) = header.ok_or(SatError::MissingHeader)?;
        let mut nums = Vec::new();
        for tok in line.split_whitespace() {
            let v: i64 = tok.parse().map_err(|_| SatError::Parse {
                line: line_no,
                msg: format!("bad literal {tok:?}"),
            })?;
            nums.push(v);
        }
        match nums.iter().position(|&v| v == 0) {
            Some(p) if p == nums.len() - 1 => {}
            Some(_) => {
                return Err(SatError::Parse {
                    line: line_no,
                    msg: "terminating 0 must end the clause line".into(),
                })
            }
            None => {
                return Err(SatError::Parse {
                    line: line_no,
                    msg: "clause line must end with 0".into(),
                })
            }
        }
        nums.pop();
        if nums.len() != 3 {
            return Err(SatError::ClauseArity {
                line: line_no,
                found: nums.len(),
            });
        }
        let mut lits = [Literal(1); 3];
        for (slot, &v) in lits.iter_mut().zip(&nums) {
            if v.unsigned_abs() as usize > n || v.unsigned_abs() > i32::MAX as u64 {
                return Err(SatError::VariableOutOfRange {
                    line: line_no,
                    literal: v,
                    n,
                });
            }
            *slot = Literal(v as i32);
        }
        clauses.push(Clause(lits));
    }
    let (n, k) = header.ok_or(SatError::MissingHeader)?;
    if k != clauses.len() {
        return Err(SatError::ClauseCount {
            declared: k,
            found: clauses.len(),
        });
    }
    Ok(OneInThreeInstance { n, clauses })
}

/// Exhaustive search capped at [`BRUTE_FORCE_CAP`] variables.
///
/// Assignments are visited in increasing order of the bit mask `sum_i [x_i] 2^(i-1)`,
/// so the returned witness is the first satisfying assignment in that order.
pub fn brute_force_solve(inst: &OneInThreeInstance) -> Result<SatOutcome, SatError> {
    brute_force_solve_capped(inst, BRUTE_FORCE_CAP)
}

pub fn brute_force_solve_capped(inst: &OneInThreeInstance, cap: usize) -> Result<SatOutcome, SatError> {
    let cap = cap.min(BRUTE_FORCE_CAP);
    if inst.n > cap {
        return Err(SatError::CapExceeded { n: inst.n, cap });
    }
    // (index, wants_true) per literal
    let packed: Vec<[(u32, u64); 3]> = inst
        .clauses
        .iter()
        .map(|c| c.0.map(|l| (l.index() as u32, u64::from(!l.is_negated()))))
        .collect();
    let total: u64 = 1u64 << inst.n;
    for mask in 0..total {
        let ok = packed.iter().all(|lits| {
            lits.iter()
                .filter(|(v, want)| (mask >> v) & 1 == *want)
                .count()
                == 1
        });
        if ok {
            return Ok(SatOutcome::Sat(Assignment::from_mask(inst.n, mask)));
        }
    }
    Ok(SatOutcome::Unsat)
}

/// Every instance with exactly `n` variables and `k` clauses, literals drawn from
/// `±1..=±n` with repetition, in a fixed order.
pub fn all_instances(n: usize, k: usize) -> impl Iterator<Item = OneInThreeInstance> {
    let lits: Vec<i32> = (1..=n as i32).flat_map(|v| [v, -v]).collect();
    let clause_choices: Vec<Clause> = if n == 0 {
        Vec::new()
    } else {
        let mut out = Vec::new();
        for &a in &lits {
            for &b in &lits {
                for &c in &lits {
                    out.push(Clause::new(a, b, c));
                }
            }
        }
        out
    };
    let base = clause_choices.len();
    let count = if k == 0 { 1 } else { base.pow(k as u32) };
    (0..count).map(move |mut idx| {
        let mut clauses = Vec::with_capacity(k);
        for _ in 0..k {
            clauses.push(clause_choices[idx % base]);
            idx /= base;
        }
        OneInThreeInstance { n, clauses }
    })
}

/// `{(x1 ∨ x2 ∨ x3)}`: satisfiable.
pub fn phi1() -> OneInThreeInstance {
    OneInThreeInstance::new(3, vec![Clause::new(1, 2, 3)])
}

/// `{(x1, x1, x1)}`: unsatisfiable (zero or three true literals).
pub fn phi2() -> OneInThreeInstance {
    OneInThreeInstance::new(1, vec![Clause::new(1, 1, 1)])
}
