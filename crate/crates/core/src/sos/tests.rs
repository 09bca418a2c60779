use super::*;
use crate::poly::rational::{int, rat};
use crate::poly::var_names;
use crate::sdp::{solve_feasibility, SolverOptions};

fn x(vars: &[String], i: usize) -> Polynomial {
    Polynomial::variable(vars.to_vec(), i)
}

fn constant(vars: &[String], v: Rational) -> Polynomial {
    Polynomial::constant(vars.to_vec(), v)
}

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

/// `x1^4 + x2^2` over `(x1, x2)`.
pub(crate) fn quartic_example() -> Polynomial {
    let v = var_names("x", 2);
    x(&v, 0).pow(4) + x(&v, 1).square()
}

/// Gram matrices of the level-1 identity for `x1^4 + x2^2`:
/// `-1 = 2/3 (x1^2 - 1/2)^2 + 2/3 (gamma - 1/2)^2 + 2/3 (gamma - p) + 2/3 (|x|^2 - gamma^2 - 2)`.
pub(crate) fn quartic_example_grams() -> Vec<Vec<Vec<Rational>>> {
    // basis of sigma_0 over (x1, x2, gamma): 1, x1, x2, g, x1^2, x1x2, x1g, x2^2, x2g, g^2
    let mut g0 = vec![vec![int(0); 10]; 10];
    let two3 = rat(2, 3);
    // (x1^2 - 1/2)^2 uses indices 0 and 4, (gamma - 1/2)^2 uses 0 and 3
    g0[0][0] = &two3 * rat(1, 4) * int(2);
    g0[0][4] = -&two3 * rat(1, 2);
    g0[4][0] = g0[0][4].clone();
    g0[4][4] = two3.clone();
    g0[0][3] = -&two3 * rat(1, 2);
    g0[3][0] = g0[0][3].clone();
    g0[3][3] = two3.clone();
    let mut g2 = vec![vec![int(0); 4]; 4];
    g2[0][0] = two3.clone();
    vec![g0, vec![vec![two3]], g2, vec![vec![int(0)]]]
}

fn to_float(g: &[Vec<Vec<Rational>>]) -> Vec<Vec<Vec<f64>>> {
    g.iter()
        .map(|m| m.iter().map(|r| r.iter().map(to_f64).collect()).collect())
        .collect()
}

#[test]
fn basis_sizes() {
    let v1 = var_names("x", 1);
    let b = sos_basis(&v1, 2).unwrap();
    assert_eq!(b, vec![Monomial::new(vec![0]), Monomial::new(vec![1])]);
    let v2 = var_names("x", 2);
    let b = sos_basis(&v2, 4).unwrap();
    let shown: Vec<Vec<u32>> = b.iter().map(|m| m.exps().to_vec()).collect();
    assert_eq!(
        shown,
        vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
    );
    let v3 = vec!["x1".to_string(), "x2".into(), "gamma".into()];
    assert_eq!(sos_basis(&v3, 4).unwrap().len(), 10);
    assert!(matches!(sos_basis(&v3, 3), Err(SosError::OddBound { .. })));
}

#[test]
fn minus_one_is_not_sos() {
    let t = SosTemplate::new(vec![], constant(&[], int(-1)), vec![constant(&[], int(1))], vec![0]).unwrap();
    let p = compile_identity(&t).unwrap();
    assert_eq!(p.blocks, vec![1]);
    assert_eq!(p.equalities.len(), 1);
    assert_eq!(p.equalities[0].rhs, -1.0);
    let s = solve_feasibility(&p, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, SdpStatus::Inconclusive);
    assert!(extract_certificate(&t, &s).is_err());
}

#[test]
fn nonempty_pair_set_has_no_certificate() {
    // {1 - x1^2 >= 0, x1^2 - 1 >= 0} = {-1, 1}: evaluating any identity at x1 = 1
    // gives -1 = sigma_0(1) >= 0, so the SDP must not report feasibility.
    let v = var_names("x", 1);
    let one = constant(&v, int(1));
    let g = &one - &x(&v, 0).square();
    let t = SosTemplate::new(v.clone(), constant(&v, int(-1)), vec![one, g.clone(), -g], vec![2, 0, 0]).unwrap();
    let p = compile_identity(&t).unwrap();
    assert_eq!(p.blocks, vec![2, 1, 1]);
    let s = solve_feasibility(&p, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, SdpStatus::Inconclusive);
}

#[test]
fn coercivity_template_shape() {
    let t = coercivity_template(&quartic_example(), 1).unwrap();
    assert_eq!(t.degree_bounds, vec![4, 0, 2, 0]);
    assert_eq!(t.vars, vec!["x1", "x2", "gamma"]);
    let p = compile_identity(&t).unwrap();
    assert_eq!(p.blocks, vec![10, 1, 4, 1]);
    for (dim, bound) in p.blocks.iter().zip(&t.degree_bounds) {
        assert_eq!(*dim as u64, binomial(3 + *bound as u64 / 2, 3));
    }
    let quad = {
        let v = var_names("x", 2);
        x(&v, 0).square() + x(&v, 1).square()
    };
    assert_eq!(coercivity_template(&quad, 1).unwrap().degree_bounds, vec![4, 2, 2, 0]);
    assert_eq!(coercivity_template(&quad, 3).unwrap().degree_bounds, vec![12, 10, 6, 4]);
    assert!(coercivity_template(&quad, 0).is_err());
}

#[test]
fn compile_is_deterministic() {
    let t = coercivity_template(&quartic_example(), 2).unwrap();
    assert_eq!(compile_identity(&t).unwrap().to_json(), compile_identity(&t).unwrap().to_json());
}

#[test]
fn hand_encoded_certificate_has_zero_residual() {
    let t = coercivity_template(&quartic_example(), 1).unwrap();
    let c = SosCertificate::from_grams(t.clone(), to_float(&quartic_example_grams())).unwrap();
    assert!(c.residual <= 1e-15, "residual {}", c.residual);
    let mut grams = to_float(&quartic_example_grams());
    grams[0][4][4] += 1e-3;
    let bumped = SosCertificate::from_grams(t, grams).unwrap();
    assert!(bumped.residual >= 1e-4);
}

#[test]
fn solved_certificate_has_small_residual() {
    let t = coercivity_template(&quartic_example(), 1).unwrap();
    let p = compile_identity(&t).unwrap();
    let s = solve_feasibility(&p, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, SdpStatus::StrictlyFeasible, "{:?}", (s.margin, s.residual));
    let c = extract_certificate(&t, &s).unwrap();
    assert!(c.residual <= 1e-6, "residual {}", c.residual);
}

#[test]
fn expansion_bound_at_random_points() {
    use rand::{Rng, SeedableRng};
    let t = coercivity_template(&quartic_example(), 1).unwrap();
    let c = SosCertificate::from_grams(t.clone(), to_float(&quartic_example_grams())).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let nmon = compile_exact(&t).unwrap().rows.len() as f64;
    for _ in 0..100 {
        let pt: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut lhs = -t.target.eval_f64(&pt).unwrap();
        let mut maxmon: f64 = 1.0;
        for (m, f) in c.multipliers.iter().zip(&t.factors) {
            let z: Vec<f64> = m
                .basis
                .iter()
                .map(|b| b.exps().iter().zip(&pt).map(|(&e, v)| v.powi(e as i32)).product())
                .collect();
            let mut q = 0.0;
            for a in 0..z.len() {
                for b in 0..z.len() {
                    q += z[a] * m.gram[a][b] * z[b];
                }
            }
            lhs += q * f.eval_f64(&pt).unwrap();
            maxmon = maxmon.max(pt.iter().fold(1.0f64, |a, v| a.max(v.abs())).powi(6));
        }
        // floating evaluation of each side adds its own rounding on top of the residual
        let bound = (c.residual + 1e-12) * nmon * maxmon;
        assert!(lhs.abs() <= bound, "{lhs} > {bound}");
    }
}

#[test]
fn template_validation() {
    let v = var_names("x", 1);
    let one = constant(&v, int(1));
    assert_eq!(
        SosTemplate::new(v.clone(), one.clone(), vec![], vec![]).unwrap_err(),
        SosError::EmptyFactors
    );
    assert!(matches!(
        SosTemplate::new(v.clone(), one.clone(), vec![one.clone()], vec![1]),
        Err(SosError::OddBound { .. })
    ));
    let t = SosTemplate::new(v.clone(), one.clone(), vec![one.clone()], vec![2]).unwrap();
    let json = serde_json::to_string(&t).unwrap();
    let back: SosTemplate = serde_json::from_str(&json).unwrap();
    assert_eq!(back, t);
    // an empty basis cannot produce the constant 1
    let empty = t.with_bases(vec![vec![]]).unwrap();
    assert!(matches!(compile_identity(&empty), Err(SosError::InfeasibleByConstruction(_))));
}

#[test]
fn compactness_product_count() {
    let v = var_names("x", 2);
    let one = constant(&v, int(1));
    let n2 = x(&v, 0).square() + x(&v, 1).square();
    let gs = vec![&one - &n2, &n2 - &one];
    let t = compactness_template(&v, &gs, &int(1), 1, CompactnessForm::Products).unwrap();
    assert_eq!(t.factors.len(), 8);
    let t = compactness_template(&v, &gs, &int(1), 1, CompactnessForm::Restricted).unwrap();
    assert_eq!(t.factors.len(), 4);
    let many = vec![one.clone(); 7];
    assert!(matches!(
        compactness_template(&v, &many, &int(1), 1, CompactnessForm::Products),
        Err(SosError::TooManyProducts { .. })
    ));
}
