use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use ulcp_bench::{elcp, ex3_program, secant_triples};
use ulcp_core::bnb::{bnb_solve, secant, BnbOptions};
use ulcp_core::harness::{solve_problem, PipelineOptions};
use ulcp_core::reformulate::build_rc;

fn elcp_counterparts(c: &mut Criterion) {
    let mut g = c.benchmark_group("elcp");
    for n in [10, 40, 80] {
        let p = elcp(n);
        g.bench_with_input(BenchmarkId::new("build_rc", n), &p, |b, p| b.iter(|| build_rc(black_box(p), None).unwrap()));
        g.bench_with_input(BenchmarkId::new("solve", n), &p, |b, p| {
            b.iter(|| solve_problem(black_box(p), &PipelineOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn ex3_bnb(c: &mut Criterion) {
    let mut g = c.benchmark_group("ex3_bnb");
    g.sample_size(10);
    let opts = BnbOptions {
        trace: false,
        ..Default::default()
    };
    for n in [2, 4] {
        let prog = ex3_program(n, 0);
        g.bench_with_input(BenchmarkId::from_parameter(n), &prog, |b, prog| {
            b.iter(|| bnb_solve(black_box(prog), &opts).unwrap())
        });
    }
    g.finish();
}

fn secant_bound(c: &mut Criterion) {
    let triples = secant_triples(10_000);
    c.bench_function("secant_10k", |b| {
        b.iter(|| triples.iter().map(|&(y, l, u)| secant(black_box(y), l, u)).sum::<f64>())
    });
}

criterion_group!(benches, elcp_counterparts, ex3_bnb, secant_bound);
criterion_main!(benches);
