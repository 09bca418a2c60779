use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use popcert::certify::{certify_coercive, CertifyOptions};
use popcert::exactcert::check_psd_exact;
use popcert::poly::rational::rat;
use popcert::reductions::{gen_s_phi_h, min_s_phi_on_cube};
use popcert::sat::{phi1, phi2};
use popcert::sdp::{solve_feasibility, SolverOptions};
use popcert_bench::{correlation_problem, dense, quartic};

fn arithmetic(c: &mut Criterion) {
    let p = dense(4, 4);
    c.bench_function("poly/square dense n=4 d=4", |b| b.iter(|| black_box(&p).square()));
    let m: Vec<Vec<_>> = (0..12)
        .map(|i| (0..12).map(|j| rat(1, (i + j + 1) as i64)).collect())
        .collect();
    c.bench_function("exactcert/ldlt hilbert 12", |b| b.iter(|| check_psd_exact(black_box(&m))));
}

fn solver(c: &mut Criterion) {
    let p = correlation_problem(10, 0.3);
    let opts = SolverOptions::default();
    c.bench_function("sdp/correlation 10", |b| b.iter(|| solve_feasibility(black_box(&p), &opts)));
}

fn pipeline(c: &mut Criterion) {
    let opts = CertifyOptions::default();
    let q = quartic();
    let mut g = c.benchmark_group("certify");
    g.sample_size(10);
    g.bench_function("coercive x1^4+x2^2 r=1", |b| b.iter(|| certify_coercive(black_box(&q), 1, &opts)));
    let s = gen_s_phi_h(&phi2());
    g.bench_function("coercive s_phi_h(unsat) r=1", |b| b.iter(|| certify_coercive(black_box(&s), 1, &opts)));
    g.finish();
    let inst = phi1();
    c.bench_function("reductions/min s_phi on cube", |b| b.iter(|| min_s_phi_on_cube(black_box(&inst))));
}

criterion_group!(benches, arithmetic, solver, pipeline);
criterion_main!(benches);
