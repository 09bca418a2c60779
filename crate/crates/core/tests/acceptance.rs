//! Acceptance checks. Each check prints one line with its verdict, elapsed time
//! and time limit; the process exits nonzero if any check fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use popcert::certify::{
    certify_archimedean, certify_coercive, certify_compact, falsify_coercive, ladder, sphere_min_q, CertifyOptions,
    CertifyOutcome, RadiusBound,
};
use popcert::exactcert::{verify_identity, RationalCertificate};
use popcert::poly::rational::{int, rat, to_fraction_string};
use popcert::poly::var_names;
use popcert::reductions::{gen_p_hat_phi, gen_p_phi, gen_s_phi, gen_s_phi_h, gen_stable_instance, Constraint, Pop, Sense};
use popcert::sat::{all_instances, brute_force_solve, phi1, phi2, Assignment, SatOutcome};
use popcert::sdp::{solve_feasibility, Entry, Equality, Objective, SdpProblem, SdpStatus, SolverOptions};
use popcert::sos::coercivity_template;
use popcert::{Monomial, Polynomial, Rational};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// Independent expansion over a fixed variable list, used as the oracle for the
// hand-written identities. Keys are exponent vectors.
#[derive(Clone, Debug, PartialEq)]
struct Expanded(BTreeMap<Vec<u32>, Rational>);

impl Expanded {
    fn constant(n: usize, c: Rational) -> Self {
        let mut m = BTreeMap::new();
        m.insert(vec![0; n], c);
        Expanded(m).trim()
    }

    fn var(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Expanded(BTreeMap::from([(e, int(1))]))
    }

    fn trim(mut self) -> Self {
        self.0.retain(|_, c| !c.is_zero());
        self
    }

    fn add(&self, o: &Self) -> Self {
        let mut m = self.0.clone();
        for (e, c) in &o.0 {
            *m.entry(e.clone()).or_insert_with(Rational::zero) += c;
        }
        Expanded(m).trim()
    }

    fn scale(&self, c: &Rational) -> Self {
        Expanded(self.0.iter().map(|(e, v)| (e.clone(), v * c)).collect()).trim()
    }

    fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&int(-1)))
    }

    fn mul(&self, o: &Self) -> Self {
        let mut m: BTreeMap<Vec<u32>, Rational> = BTreeMap::new();
        for (a, x) in &self.0 {
            for (b, y) in &o.0 {
                let e: Vec<u32> = a.iter().zip(b).map(|(i, j)| i + j).collect();
                *m.entry(e).or_insert_with(Rational::zero) += x * y;
            }
        }
        Expanded(m).trim()
    }
}

/// Expands `sum_i w_i f_i` and compares with the constant `-1`.
fn identity_holds(n: usize, terms: &[(Rational, Expanded)]) -> bool {
    let total = terms
        .iter()
        .fold(Expanded::constant(n, Rational::zero()), |acc, (w, f)| acc.add(&f.scale(w)));
    total == Expanded::constant(n, int(-1))
}

/// Gram matrix of `w * (sum_k c_k m_k)^2` in `basis`.
fn square_gram(basis: &[Monomial], w: &Rational, combo: &[(Monomial, Rational)]) -> Vec<Vec<Rational>> {
    let n = basis.len();
    let mut g = vec![vec![Rational::zero(); n]; n];
    let idx: Vec<(usize, &Rational)> = combo
        .iter()
        .map(|(m, c)| (basis.iter().position(|b| b == m).expect("monomial in basis"), c))
        .collect();
    for &(i, a) in &idx {
        for &(j, b) in &idx {
            g[i][j] += w * a * b;
        }
    }
    g
}

fn add_into(acc: &mut [Vec<Rational>], g: &[Vec<Rational>]) {
    for (r, s) in acc.iter_mut().zip(g) {
        for (a, b) in r.iter_mut().zip(s) {
            *a += b;
        }
    }
}

fn certified(out: &CertifyOutcome) -> Result<&RationalCertificate, String> {
    let cert = out
        .certificate
        .as_ref()
        .filter(|_| out.is_certified())
        .ok_or_else(|| format!("status {} ({:?})", out.status, out.reason))?;
    verify_identity(cert).map_err(|e| format!("exact verification failed: {e}"))?;
    Ok(cert)
}

// ---- 1 ----

fn quartic() -> Polynomial {
    let v = var_names("x", 2);
    Polynomial::variable(v.clone(), 0).pow(4) + Polynomial::variable(v, 1).square()
}

fn hand_encoded_quartic() -> Check {
    // oracle: -1 = 2/3 (x1^2 - 1/2)^2 + 2/3 (g - 1/2)^2 + 2/3 (g - x1^4 - x2^2) + 2/3 (x1^2 + x2^2 - g^2 - 2)
    let (x1, x2, g) = (Expanded::var(3, 0), Expanded::var(3, 1), Expanded::var(3, 2));
    let half = Expanded::constant(3, rat(1, 2));
    let a = x1.mul(&x1).sub(&half);
    let b = g.sub(&half);
    let c = g.sub(&x1.mul(&x1).mul(&x1).mul(&x1)).sub(&x2.mul(&x2));
    let d = x1.mul(&x1).add(&x2.mul(&x2)).sub(&g.mul(&g)).sub(&Expanded::constant(3, int(2)));
    let w = rat(2, 3);
    ensure(
        identity_holds(3, &[(w.clone(), a.mul(&a)), (w.clone(), b.mul(&b)), (w.clone(), c), (w.clone(), d)]),
        "expansion of the identity is not -1",
    )?;

    let t = coercivity_template(&quartic(), 1).map_err(|e| e.to_string())?;
    let bases = t.bases();
    let m = |e: [u32; 3]| Monomial::new(e.to_vec());
    let mut g0 = square_gram(&bases[0], &w, &[(m([2, 0, 0]), int(1)), (m([0, 0, 0]), rat(-1, 2))]);
    add_into(&mut g0, &square_gram(&bases[0], &w, &[(m([0, 0, 1]), int(1)), (m([0, 0, 0]), rat(-1, 2))]));
    let g1 = square_gram(&bases[1], &w, &[(m([0, 0, 0]), int(1))]);
    let g2 = square_gram(&bases[2], &w, &[(m([0, 0, 0]), int(1))]);
    let g3 = vec![vec![Rational::zero(); bases[3].len()]; bases[3].len()];
    let cert = RationalCertificate::from_grams(t, vec![g0, g1, g2, g3]).map_err(|e| e.to_string())?;
    verify_identity(&cert).map_err(|e| e.to_string())?;
    Ok("verified with zero tolerance".into())
}

// ---- 2, 3 ----

fn coercive_at_level_one(p: &Polynomial) -> Check {
    let out = certify_coercive(p, 1, &CertifyOptions::default()).map_err(|e| e.to_string())?;
    let cert = certified(&out)?;
    Ok(format!("certified at r=1, {} denominator bits", cert.max_denominator_bits()))
}

fn quartic_end_to_end() -> Check {
    coercive_at_level_one(&quartic())
}

fn quadratic_derived_identity() -> Check {
    // oracle: -1 = 4/7 (g - 1/2)^2 + 4/7 (g - x1^2 - x2^2) + 4/7 (x1^2 + x2^2 - g^2 - 2)
    let (x1, x2, g) = (Expanded::var(3, 0), Expanded::var(3, 1), Expanded::var(3, 2));
    let b = g.sub(&Expanded::constant(3, rat(1, 2)));
    let norm = x1.mul(&x1).add(&x2.mul(&x2));
    let c = g.sub(&norm);
    let d = norm.sub(&g.mul(&g)).sub(&Expanded::constant(3, int(2)));
    let w = rat(4, 7);
    ensure(
        identity_holds(3, &[(w.clone(), b.mul(&b)), (w.clone(), c), (w, d)]),
        "expansion of the identity is not -1",
    )?;
    let v = var_names("x", 2);
    let p = Polynomial::variable(v.clone(), 0).square() + Polynomial::variable(v, 1).square();
    coercive_at_level_one(&p)
}

// ---- 4 ----

fn reduction_ground_truth() -> Check {
    let mut count = 0usize;
    for n in 0..=3 {
        for k in 0..=2 {
            for inst in all_instances(n, k) {
                let s = gen_s_phi(&inst);
                let min = (0..1u64 << n)
                    .map(|mask| s.evaluate(&Assignment::from_mask(n, mask).sign_point()).unwrap())
                    .min()
                    .unwrap();
                let sat = brute_force_solve(&inst).map_err(|e| e.to_string())?.is_sat();
                ensure(min.is_zero() == sat, format!("min {min} but sat={sat} for {inst:?}"))?;
                count += 1;
            }
        }
    }
    Ok(format!("{count} instances agree"))
}

// ---- 5 ----

fn point(vars: &[String], values: &[(&str, Rational)]) -> Vec<Rational> {
    let mut p = vec![Rational::zero(); vars.len()];
    for (name, v) in values {
        let i = vars.iter().position(|x| x == name).expect("variable present");
        p[i] = v.clone();
    }
    p
}

fn attainment_dichotomy() -> Check {
    let sat = phi1();
    let SatOutcome::Sat(a) = brute_force_solve(&sat).map_err(|e| e.to_string())? else {
        return Err("first fixture reported UNSAT".into());
    };
    let p = gen_p_phi(&sat);
    let mut at: Vec<(String, Rational)> = var_names("x", sat.num_vars()).into_iter().zip(a.sign_point()).collect();
    at.push(("lambda".into(), int(1)));
    let named: Vec<(&str, Rational)> = at.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
    let value = p.evaluate(&point(p.vars(), &named)).map_err(|e| e.to_string())?;
    ensure(value.is_zero(), format!("p at the satisfying point is {value}"))?;

    let unsat = phi2();
    let p = gen_p_phi(&unsat);
    let along: Vec<Rational> = [10i64, 100, 1000]
        .iter()
        .map(|&t| {
            let pt = point(p.vars(), &[("lambda", int(0)), ("z", int(t)), ("y", rat(1, t))]);
            p.evaluate(&pt).unwrap()
        })
        .collect();
    ensure(along.iter().all(|v| *v > Rational::zero()), "value on the curve is not positive")?;
    ensure(along.windows(2).all(|w| w[1] < w[0]), "values on the curve do not decrease")?;

    let ph = gen_p_hat_phi(&unsat);
    let n = unsat.num_vars();
    let xs = var_names("x", n);
    let chis = var_names("chi", n);
    let mut searched = 0;
    for mask in 0..1u64 << n {
        let x = Assignment::from_mask(n, mask).sign_point();
        for lam in [0i64, 1] {
            for y in [-1i64, 0, 1] {
                for z in [-1i64, 0, 1] {
                    let mut vals: Vec<(&str, Rational)> =
                        vec![("lambda", int(lam)), ("w", int(1)), ("y", int(y)), ("z", int(z))];
                    for i in 0..n {
                        vals.push((xs[i].as_str(), x[i].clone()));
                        vals.push((chis[i].as_str(), &x[i] * int(lam)));
                    }
                    let v = ph.evaluate(&point(ph.vars(), &vals)).map_err(|e| e.to_string())?;
                    ensure(!v.is_zero(), format!("zero of the quartic variant at {vals:?}"))?;
                    searched += 1;
                }
            }
        }
    }
    Ok(format!(
        "zero attained for the SAT fixture, curve values {}, {}, {}, {searched} points without a zero",
        along[0], along[1], along[2]
    ))
}

// ---- 6 ----

fn coercivity_labels() -> Check {
    let opts = CertifyOptions::default();
    let out = ladder(1, 3, |r| certify_coercive(&gen_s_phi_h(&phi2()), r, &opts)).map_err(|e| e.to_string())?;
    certified(&out)?;
    let w = falsify_coercive(&gen_s_phi_h(&phi1()), 4, 7).ok_or("no ray witness for the SAT fixture")?;
    for scale in [0, 1, 2] {
        let v = w.value_at(scale).ok_or(format!("no value at 10^{scale}"))?;
        ensure(v.is_zero(), format!("value {v} at 10^{scale}"))?;
    }
    let dir: Vec<String> = w.direction.iter().map(to_fraction_string).collect();
    Ok(format!("UNSAT certified at r={}, SAT ray ({}) stays at 0", out.level, dir.join(", ")))
}

// ---- 7, 8 ----

fn unit_circle_compact() -> Check {
    let v = var_names("x", 2);
    let norm = Polynomial::variable(v.clone(), 0).square() + Polynomial::variable(v.clone(), 1).square();
    let one = Polynomial::one(v.clone());
    let set = Pop::set(
        v,
        vec![Constraint::new(&one - &norm, Sense::Ge0), Constraint::new(&norm - &one, Sense::Ge0)],
    )
    .map_err(|e| e.to_string())?;
    let opts = CertifyOptions::default();
    let out = ladder(0, 2, |r| certify_compact(&set, r, Some(&int(1)), &opts)).map_err(|e| e.to_string())?;
    certified(&out)?;
    Ok(format!("certified at r={}", out.level))
}

fn archimedean_disc() -> Check {
    let v = var_names("x", 2);
    let norm = Polynomial::variable(v.clone(), 0).square() + Polynomial::variable(v.clone(), 1).square();
    let g = &Polynomial::one(v.clone()) - &norm;
    let out = certify_archimedean(&v, &[g], 0, &int(1), &CertifyOptions::default()).map_err(|e| e.to_string())?;
    let cert = certified(&out)?;
    let sigmas = cert.multiplier_polynomials();
    let vars = cert.template.vars.clone();
    ensure(sigmas[0].is_zero(), format!("sigma_0 = {:?}", sigmas[0]))?;
    ensure(sigmas[1] == Polynomial::one(vars), format!("sigma_1 = {:?}", sigmas[1]))?;
    Ok("sigma_0 = 0, sigma_1 = 1".into())
}

// ---- 9 ----

fn bits(v: u64) -> u64 {
    64 - v.leading_zeros() as u64
}

fn radius_bound_value() -> Check {
    let (n, d, m, tau) = (1u64, 2u64, 1u64, 1u64);
    // independent recomputation of sqrt(n)(b + 1) 2^((2nd + 2) b (2 tau + bit(b) + (n + 1) bit(d + 1) + bit(m)))
    let b = (2 * d + 1) * (2 * d).pow((n - 1) as u32);
    let exponent = (2 * n * d + 2) * b * (2 * tau + bits(b) + (n + 1) * bits(d + 1) + bits(m));
    let recomputed = BigUint::from(b + 1) << exponent;
    let r = RadiusBound::new(n, d, m, tau).map_err(|e| e.to_string())?;
    let value = r.integer_value().ok_or("bound is not an integer for n = 1")?;
    ensure(value == recomputed, format!("library value 6*2^{} disagrees with recomputation", r.exponent))?;
    let expected = BigUint::from(6u32) << 200u32;
    ensure(
        value == expected,
        format!(
            "value is 6*2^{exponent} (log2 ceiling {}), expected 6*2^200; recomputation agrees with the library",
            r.log2_ceil
        ),
    )?;
    Ok("6*2^200".into())
}

// ---- 10 ----

fn stable_falsifier() -> Check {
    let si = gen_stable_instance(&phi1());
    let h = rat(1, 2);
    let pt = vec![h.clone(), h.clone(), -&h, -&h];
    let norm: Rational = pt.iter().map(|x| x * x).sum();
    ensure(norm.is_one(), "test point is not on the unit sphere")?;
    let q = si.q_value(&pt).map_err(|e| e.to_string())?;
    ensure(q.is_zero(), format!("q at the SAT point is {q}"))?;
    let min = sphere_min_q(&gen_stable_instance(&phi2()), 10_000, 0);
    ensure(min > 0.05, format!("sampled minimum of q is {min}"))?;
    Ok(format!("q = 0 at the SAT point, sampled minimum {min:.4} for UNSAT"))
}

// ---- 11 ----

fn one_by_one(q11: f64) -> SdpProblem {
    SdpProblem {
        blocks: vec![1],
        equalities: vec![Equality {
            terms: vec![Entry {
                block: 0,
                row: 0,
                col: 0,
                coef: 1.0,
            }],
            rhs: q11,
        }],
        objective: Objective::Margin,
    }
}

fn solver_honesty() -> Check {
    let opts = SolverOptions::default();
    let bad = solve_feasibility(&one_by_one(-1.0), &opts).map_err(|e| e.to_string())?;
    ensure(bad.status == SdpStatus::Inconclusive, format!("q11 = -1 gave {}", bad.status))?;
    ensure(bad.margin <= -0.9, format!("q11 = -1 margin {}", bad.margin))?;
    let good = solve_feasibility(&one_by_one(2.0), &opts).map_err(|e| e.to_string())?;
    ensure(good.status == SdpStatus::StrictlyFeasible, format!("q11 = 2 gave {}", good.status))?;
    ensure((good.margin - 2.0).abs() <= 1e-6, format!("q11 = 2 margin {}", good.margin))?;
    Ok(format!("margins {:.6} and {:.9}", bad.margin, good.margin))
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Check, u64); 11] = [
        ("hand-encoded quartic identity", hand_encoded_quartic, 1),
        ("coercive x1^4 + x2^2 at r=1", quartic_end_to_end, 60),
        ("derived 4/7 identity and x1^2 + x2^2 at r=1", quadratic_derived_identity, 60),
        ("s_phi minimum vs brute force, n<=3 k<=2", reduction_ground_truth, 120),
        ("attainment dichotomy", attainment_dichotomy, 10),
        ("coercivity labels", coercivity_labels, 300),
        ("unit circle compactness", unit_circle_compact, 120),
        ("archimedean disc at r=0", archimedean_disc, 5),
        ("radius bound (1,2,1,1)", radius_bound_value, 1),
        ("stable-compactness falsifier", stable_falsifier, 30),
        ("solver honesty on 1x1 fixtures", solver_honesty, 1),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in checks.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let limit = Duration::from_secs(*limit);
        let (verdict, detail) = match result {
            Ok(detail) if elapsed <= limit => ("PASS", detail),
            Ok(detail) => ("FAIL", format!("over time limit; {detail}")),
            Err(e) => ("FAIL", e),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!(
            "[{verdict}] {:>2}. {name} ({:.2}s / {}s): {detail}",
            i + 1,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("{} of {} acceptance checks passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
