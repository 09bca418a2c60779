//! Certifiers for coercivity, compactness, the Archimedean property and stable
//! compactness.
//!
//! Each certifier instantiates an identity template at a level `r`, solves the
//! resulting semidefinite program, rounds the Gram matrices to rationals and checks
//! the identity exactly. `Certified` is only ever returned together with a
//! certificate that passed [`verify_identity`]; every other result is
//! `Inconclusive`, since a failed level says nothing about higher ones.

mod falsify;
mod radius;

pub use falsify::{
    falsify_coercive, lattice_directions, sphere_falsifier, sphere_min_q, sphere_sample, RayValue, SphereFalsifier,
    Witness, LATTICE_MAX_DIM, RAY_SCALES,
};
pub use radius::{bit, closed_generators, integer_generators, radius_for_set, RadiusBound};

use std::fmt;
use std::time::{Duration, Instant};

use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::exactcert::{rationalize, verify_identity, RationalCertificate, RationalizeError};
use crate::poly::rational::{from_f64, round_dyadic, to_fraction_string};
use crate::reductions::{Pop, StableInstance};
use crate::sdp::{solve_feasibility, SdpStatus, SolverOptions};
use crate::sos::{
    archimedean_template, coercivity_template, compactness_template, compile_exact, extract_certificate,
    sphere_emptiness_template, CompactnessForm, SosError, SosTemplate,
};
use crate::{Polynomial, Rational};

/// Most sphere components accepted by the stable-compactness template.
pub const SPHERE_COMPONENT_CAP: usize = 1 << 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("constraint {0} is strict; only closed sets (ge0, eq0) can be certified compact")]
    StrictConstraint(usize),
    #[error("{components} sphere components exceed the cap of {cap}; use a restricted template")]
    TooManyComponents { components: usize, cap: usize },
    #[error(transparent)]
    Template(#[from] SosError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CertifyStatus {
    Certified,
    Inconclusive,
}

impl fmt::Display for CertifyStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertifyStatus::Certified => "certified",
            CertifyStatus::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug)]
pub struct CertifyOptions {
    pub solver: SolverOptions,
    /// Initial rounding denominator `2^denom_power`.
    pub denom_power: u32,
    pub seed: u64,
    /// Random points for the consequence and sphere sampling checks.
    pub samples: usize,
    /// Allow the generator-only compactness template when products exceed the cap.
    pub restricted_products: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            solver: SolverOptions::default(),
            denom_power: 30,
            seed: 0,
            samples: 1000,
            restricted_products: false,
        }
    }
}

/// Side results recorded while certifying. Absent fields were not computed.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Checks {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sdp_dimension: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sdp_status: Option<SdpStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identity_verified: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub denominator_bits: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius_bound: Option<RadiusBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consequence_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consequence_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sphere_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sphere_min_q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub falsifier: Option<SphereFalsifier>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Timings {
    pub solve: Duration,
    pub rationalize: Duration,
    pub total: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifyOutcome {
    pub status: CertifyStatus,
    pub level: u32,
    pub certificate: Option<RationalCertificate>,
    /// Why the outcome is inconclusive.
    pub reason: Option<String>,
    pub checks: Checks,
    pub timings: Timings,
}

#[derive(Serialize)]
struct Report<'a> {
    status: CertifyStatus,
    level: u32,
    certificate: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<&'a str>,
    checks: &'a Checks,
}

impl CertifyOutcome {
    fn inconclusive(level: u32, reason: impl Into<String>, checks: Checks) -> Self {
        CertifyOutcome {
            status: CertifyStatus::Inconclusive,
            level,
            certificate: None,
            reason: Some(reason.into()),
            checks,
            timings: Timings::default(),
        }
    }

    pub fn is_certified(&self) -> bool {
        self.status == CertifyStatus::Certified
    }

    /// The outcome report with `certificate` naming the file the certificate was
    /// written to. Timings are left out so reports are reproducible.
    pub fn report_json(&self, certificate_path: Option<&str>) -> String {
        serde_json::to_string_pretty(&Report {
            status: self.status,
            level: self.level,
            certificate: certificate_path,
            reason: self.reason.as_deref(),
            checks: &self.checks,
        })
        .expect("report serializes")
    }
}

/// Solves a template, rounds the solution and verifies it exactly.
pub fn certify_template(t: &SosTemplate, level: u32, opts: &CertifyOptions) -> CertifyOutcome {
    let start = Instant::now();
    let mut checks = Checks::default();
    let sys = match compile_exact(t) {
        Ok(s) => s,
        Err(e) => return CertifyOutcome::inconclusive(level, e.to_string(), checks),
    };
    checks.sdp_dimension = Some(sys.dims().iter().sum());
    checks.equations = Some(sys.rows.len());
    let problem = sys.to_problem(crate::sdp::Objective::Margin);
    let sol = match solve_feasibility(&problem, &opts.solver) {
        Ok(s) => s,
        Err(e) => return CertifyOutcome::inconclusive(level, e.to_string(), checks),
    };
    let solved = start.elapsed();
    checks.sdp_status = Some(sol.status);
    checks.margin = Some(sol.margin);
    checks.residual = Some(sol.residual);
    let mut numeric = match extract_certificate(t, &sol) {
        Ok(c) => c,
        Err(e) => return CertifyOutcome::inconclusive(level, e.to_string(), checks),
    };
    if sol.status == SdpStatus::Feasible && sol.margin <= 0.0 {
        // boundary solution: rounding may still land exactly on the face
        numeric.margin = None;
    }
    let exact = rationalize(&numeric, opts.denom_power);
    let rationalized = start.elapsed();
    let timings = Timings {
        solve: solved,
        rationalize: rationalized - solved,
        total: rationalized,
    };
    let cert = match exact {
        Ok(c) => c,
        Err(e) => {
            let mut out = CertifyOutcome::inconclusive(level, rationalize_reason(&e), checks);
            out.timings = timings;
            return out;
        }
    };
    let verified = verify_identity(&cert);
    checks.identity_verified = Some(verified.is_ok());
    checks.denominator_bits = Some(cert.max_denominator_bits());
    let mut out = match verified {
        Ok(()) => CertifyOutcome {
            status: CertifyStatus::Certified,
            level,
            certificate: Some(cert),
            reason: None,
            checks,
            timings: Timings::default(),
        },
        Err(e) => CertifyOutcome::inconclusive(level, format!("exact verification failed: {e}"), checks),
    };
    out.timings = Timings {
        total: start.elapsed(),
        ..timings
    };
    out
}

fn rationalize_reason(e: &RationalizeError) -> String {
    format!("rounding to an exact certificate failed: {e}")
}

/// Level-`r` coercivity certificate: feasibility puts every sublevel set
/// `{p <= gamma}` inside the ball of radius `sqrt(gamma^(2r) + 2^r)`.
pub fn certify_coercive(p: &Polynomial, r: u32, opts: &CertifyOptions) -> Result<CertifyOutcome, CertifyError> {
    if r < 1 {
        return Err(CertifyError::Parameter("coercivity level r must be at least 1".into()));
    }
    let t = coercivity_template(p, r)?;
    let mut out = certify_template(&t, r, opts);
    if out.is_certified() {
        let violations = coercive_consequence_violations(p, r, opts.samples, opts.seed);
        out.checks.consequence_samples = Some(opts.samples);
        out.checks.consequence_violations = Some(violations);
    }
    Ok(out)
}

/// Counts sampled `(gamma, x)` with `p(x) <= gamma` but `|x|^2 >= gamma^(2r) + 2^r`.
pub fn coercive_consequence_violations(p: &Polynomial, r: u32, samples: usize, seed: u64) -> usize {
    let n = p.nvars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two_r = Rational::from_integer(num_bigint::BigInt::from(2).pow(r));
    let mut bad = 0;
    for _ in 0..samples {
        let radius = 4f64.powi(rng.random_range(-2..=3));
        let x: Vec<Rational> = (0..n)
            .map(|_| round_dyadic(rng.random_range(-radius..=radius), 12))
            .collect();
        let px = p.evaluate(&x).expect("point has the polynomial's arity");
        let slack = from_f64(rng.random_range(0.0..2.0)).expect("finite");
        let gamma = px + slack;
        let norm: Rational = x.iter().map(|v| v * v).sum();
        if norm >= num_traits::pow(gamma, 2 * r as usize) + &two_r {
            bad += 1;
        }
    }
    bad
}

/// Level-`r` compactness certificate for a closed set: emptiness of the set
/// outside the ball of radius `sqrt(R + 1)`, with `R` the override or, without
/// one, the general radius bound. A certificate proves containment in that ball
/// for any `R`; the bound is only needed for completeness, and it is far too large
/// to solve numerically, so without an override the template is only described.
pub fn certify_compact(
    set: &Pop,
    r: u32,
    radius_override: Option<&Rational>,
    opts: &CertifyOptions,
) -> Result<CertifyOutcome, CertifyError> {
    let gens = closed_generators(set)?;
    let form = if opts.restricted_products {
        CompactnessForm::Restricted
    } else {
        CompactnessForm::Products
    };
    let vars = set.vars().to_vec();
    let Some(radius) = radius_override else {
        let bound = radius_for_set(set)?;
        // the template's shape does not depend on the radius
        let t = compactness_template(&vars, &gens, &Rational::one(), r, form)?;
        let sys = compile_exact(&t)?;
        let checks = Checks {
            mode: Some("completeness".into()),
            sdp_dimension: Some(sys.dims().iter().sum()),
            equations: Some(sys.rows.len()),
            radius: Some(bound.to_string()),
            radius_bound: Some(bound),
            ..Checks::default()
        };
        return Ok(CertifyOutcome::inconclusive(
            r,
            "no radius override: the general bound is not solved numerically",
            checks,
        ));
    };
    if radius.is_negative() {
        return Err(CertifyError::Parameter("radius override must be nonnegative".into()));
    }
    let t = compactness_template(&vars, &gens, radius, r, form)?;
    let mut out = certify_template(&t, r, opts);
    out.checks.mode = Some("override".into());
    out.checks.radius = Some(to_fraction_string(radius));
    Ok(out)
}

/// `R - |x|^2 = sigma_0 + sum_i sigma_i g_i` with multipliers of degree at most `2r`.
pub fn certify_archimedean(
    vars: &[String],
    gs: &[Polynomial],
    r: u32,
    radius: &Rational,
    opts: &CertifyOptions,
) -> Result<CertifyOutcome, CertifyError> {
    if !radius.is_positive() {
        return Err(CertifyError::Parameter("R must be positive".into()));
    }
    let t = archimedean_template(vars, gs, radius, r)?;
    let mut out = certify_template(&t, r, opts);
    out.checks.radius = Some(to_fraction_string(radius));
    Ok(out)
}

/// Certifies `q > 0` on the unit sphere by proving that no unit vector has every
/// sphere component nonnegative. A seeded sampling estimate of `min q` and, if one
/// exists, a lattice point with `q <= 0` are reported alongside.
pub fn certify_stable_compact(
    si: &StableInstance,
    r: u32,
    opts: &CertifyOptions,
) -> Result<CertifyOutcome, CertifyError> {
    if si.sphere_test.is_empty() {
        return Err(CertifyError::Parameter("instance has no sphere components".into()));
    }
    if si.sphere_test.len() > SPHERE_COMPONENT_CAP {
        return Err(CertifyError::TooManyComponents {
            components: si.sphere_test.len(),
            cap: SPHERE_COMPONENT_CAP,
        });
    }
    let min_q = sphere_min_q(si, opts.samples, opts.seed);
    let falsifier = sphere_falsifier(si);
    let mut out = match &falsifier {
        Some(f) => CertifyOutcome::inconclusive(
            r,
            format!("q = {} at a point of the unit sphere", to_fraction_string(&f.q)),
            Checks::default(),
        ),
        None => certify_template(&sphere_emptiness_template(si, r)?, r, opts),
    };
    out.checks.sphere_samples = Some(opts.samples);
    out.checks.sphere_min_q = Some(min_q);
    out.checks.falsifier = falsifier;
    Ok(out)
}

/// Runs `attempt` for `r = first..=last` and returns the first certified outcome,
/// or the last inconclusive one.
pub fn ladder<F>(first: u32, last: u32, mut attempt: F) -> Result<CertifyOutcome, CertifyError>
where
    F: FnMut(u32) -> Result<CertifyOutcome, CertifyError>,
{
    if first > last {
        return Err(CertifyError::Parameter(format!("empty ladder {first}..={last}")));
    }
    let mut last_out = None;
    for r in first..=last {
        let out = attempt(r)?;
        if out.is_certified() {
            return Ok(out);
        }
        last_out = Some(out);
    }
    Ok(last_out.expect("ladder is nonempty"))
}
