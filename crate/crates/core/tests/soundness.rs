//! Certified outcomes carry certificates that verify exactly, survive a file
//! round trip, and imply the claimed geometric consequence on samples.

use popcert::certify::{
    certify_archimedean, certify_coercive, certify_compact, closed_generators, coercive_consequence_violations,
    CertifyOptions, CertifyOutcome, CertifyStatus,
};
use popcert::exactcert::{verify_identity, CertificateFile};
use popcert::poly::rational::int;
use popcert::poly::var_names;
use popcert::reductions::{gen_s_phi_h, gen_set, Constraint, Pop, Sense, SetKind};
use popcert::sat::{phi1, phi2};
use popcert::{parse_poly, Polynomial};

fn assert_sound(out: &CertifyOutcome) {
    assert_eq!(out.status, CertifyStatus::Certified, "{:?}", out.reason);
    let cert = out.certificate.as_ref().unwrap();
    verify_identity(cert).unwrap();
    let text = CertificateFile::Exact(cert.clone()).to_json();
    match CertificateFile::from_json(&text).unwrap() {
        CertificateFile::Exact(back) => {
            assert_eq!(&back, cert);
            verify_identity(&back).unwrap();
        }
        CertificateFile::Numeric(_) => panic!("form changed in the round trip"),
    }
}

#[test]
fn coercive_certificates_imply_bounded_sublevel_sets() {
    let polys = [
        r#"{"vars":["x1","x2"],"terms":[{"c":"1/1","e":[4,0]},{"c":"1/1","e":[0,2]}]}"#,
        r#"{"vars":["x1","x2"],"terms":[{"c":"1/1","e":[2,0]},{"c":"1/1","e":[0,2]}]}"#,
        r#"{"vars":["x1"],"terms":[{"c":"1/1","e":[4]},{"c":"-3/1","e":[2]},{"c":"1/2","e":[1]}]}"#,
    ];
    let opts = CertifyOptions::default();
    for text in polys {
        let p = parse_poly(text).unwrap();
        let out = popcert::certify::ladder(1, 2, |r| certify_coercive(&p, r, &opts)).unwrap();
        assert_sound(&out);
        assert_eq!(coercive_consequence_violations(&p, out.level, 1000, 5), 0);
    }
}

#[test]
fn unsat_homogenized_instance_certifies_and_passes_consequence_check() {
    let p = gen_s_phi_h(&phi2());
    let out = popcert::certify::ladder(1, 3, |r| certify_coercive(&p, r, &CertifyOptions::default())).unwrap();
    assert_sound(&out);
    assert_eq!(out.checks.consequence_violations, Some(0));
}

#[test]
fn sat_homogenized_instance_stays_inconclusive() {
    let p = gen_s_phi_h(&phi1());
    for r in 1..=2 {
        let out = certify_coercive(&p, r, &CertifyOptions::default()).unwrap();
        assert_eq!(out.status, CertifyStatus::Inconclusive, "level {r}");
        assert!(out.certificate.is_none());
    }
}

#[test]
fn compact_certificate_for_unit_circle() {
    let v = var_names("x", 2);
    let norm = Polynomial::variable(v.clone(), 0).square() + Polynomial::variable(v.clone(), 1).square();
    let one = Polynomial::one(v.clone());
    let set = Pop::set(
        v,
        vec![
            Constraint::new(&one - &norm, Sense::Ge0),
            Constraint::new(&norm - &one, Sense::Ge0),
        ],
    )
    .unwrap();
    let out = popcert::certify::ladder(0, 2, |r| certify_compact(&set, r, Some(&int(1)), &CertifyOptions::default()))
        .unwrap();
    assert_sound(&out);
}

#[test]
fn unbounded_set_is_never_certified_compact() {
    let set = gen_set(&phi1(), SetKind::Boundedness);
    let opts = CertifyOptions {
        restricted_products: true,
        ..CertifyOptions::default()
    };
    for r in 0..=1 {
        let out = certify_compact(&set, r, Some(&int(1)), &opts).unwrap();
        assert_eq!(out.status, CertifyStatus::Inconclusive);
    }
}

#[test]
fn archimedean_set_of_unsat_instance_certifies() {
    let set = gen_set(&phi2(), SetKind::Archimedean);
    let gs = closed_generators(&set).unwrap();
    let n = phi2().num_vars() as i64;
    for radius in [int(n), int(set.vars().len() as i64)] {
        let out = popcert::certify::ladder(0, 2, |r| {
            certify_archimedean(set.vars(), &gs, r, &radius, &CertifyOptions::default())
        })
        .unwrap();
        assert_sound(&out);
    }
}
