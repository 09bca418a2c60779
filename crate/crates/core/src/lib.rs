//! Certification toolkit for attainment questions in polynomial optimization.
//!
//! Two halves share one exact polynomial type:
//!
//! * [`sat`] and [`reductions`] build the ONE-IN-THREE 3SAT hardness families (with
//!   brute-force ground truth) for attainment, coercivity, closedness, boundedness,
//!   stable compactness and the Archimedean property;
//! * [`sos`], [`sdp`], [`exactcert`] and [`certify`] search for sum-of-squares
//!   certificates of coercivity, compactness, Archimedean-ness and stable compactness,
//!   round them to exact rationals and check the resulting identity with zero tolerance.

pub mod certify;
pub mod exactcert;
pub mod poly;
pub mod reductions;
pub mod sat;
pub mod sdp;
pub mod sos;

pub use poly::{parse_poly, Monomial, PolyError, Polynomial, Rational};
