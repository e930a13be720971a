//! Benchmark fixtures shared by the criterion targets.

use ulcp_core::harness::{build_elcp, build_ex3};
use ulcp_core::reformulate::build_rc;
use ulcp_core::{MathProgram, UncertainLcp, Vector};

/// ELCP instance of size `n` with `q_x = e`.
pub fn elcp(n: usize) -> UncertainLcp {
    build_elcp(n, &Vector::from_element(n, 1.0)).expect("elcp builds").problem
}

/// Nonconvex counterpart of the third example, boxed for branch-and-bound.
pub fn ex3_program(n: usize, seed: u64) -> MathProgram {
    let p = build_ex3(n, seed).expect("ex3 builds");
    let mut art = build_rc(&p, None).expect("ex3 counterpart");
    ulcp_core::harness::add_box(&mut art, 10.0);
    art.program
}

/// Deterministic `(y, l, u)` triples with `l ≤ y ≤ u`.
pub fn secant_triples(count: usize) -> Vec<(f64, f64, f64)> {
    (0..count)
        .map(|i| {
            let t = i as f64 / count as f64;
            let l = -5.0 + 3.0 * t;
            let u = l + 1.0 + 4.0 * (1.0 - t);
            (l + (u - l) * (0.5 + 0.4 * (7.0 * t).sin()), l, u)
        })
        .collect()
}
