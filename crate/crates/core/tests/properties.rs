//! End-to-end invariants of the counterpart pipeline on random instances.

use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use ulcp_core::harness::cases::{planted_scenarios, random_family, ShiftKind};
use ulcp_core::harness::{solve_problem, PipelineOptions, PipelineResult};
use ulcp_core::model::gap_value;
use ulcp_core::reformulate::{build_rc, worst_case};
use ulcp_core::{Error, MathProgram, UncertainLcp, UncertaintySet, Vector};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        max_global_rejects: 2048,
        rng_seed: RngSeed::Fixed(0x5eed),
        ..ProptestConfig::default()
    }
}

fn set_strategy() -> impl Strategy<Value = UncertaintySet> {
    prop_oneof![
        Just(UncertaintySet::BoxInf),
        Just(UncertaintySet::BallOne),
        Just(UncertaintySet::BallTwo),
        Just(UncertaintySet::BoxInfNonneg),
    ]
}

fn kind_strategy() -> impl Strategy<Value = ShiftKind> {
    prop_oneof![Just(ShiftKind::QOnly), Just(ShiftKind::Psd), Just(ShiftKind::PsdWithQ)]
}

fn instance(n: usize, l: usize, kind: ShiftKind, set: UncertaintySet, seed: u64) -> UncertainLcp {
    let fam = random_family(n, l, kind, 0.3, seed).unwrap();
    UncertainLcp::new(fam, set).unwrap()
}

fn tight() -> PipelineOptions {
    PipelineOptions {
        feas_tol: 1e-10,
        gap_tol: 1e-10,
        ..Default::default()
    }
}

fn try_solve(p: &UncertainLcp, opts: &PipelineOptions) -> Option<PipelineResult> {
    match solve_problem(p, opts) {
        Ok(r) => Some(r),
        Err(Error::Solver(m)) if m.contains("Infeasible") => None,
        Err(e) => panic!("solve failed: {e}"),
    }
}

/// Local multistart on nonconvex counterparts is not invariant under
/// rescaling, so value identities are checked on convex routes only.
fn convex(p: &UncertainLcp) -> bool {
    build_rc(p, None).unwrap().is_convex()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn counterpart_value_bounds_the_worst_gap(
        n in 2usize..5, l in 1usize..4, kind in kind_strategy(), set in set_strategy(), seed in 0u64..10_000,
    ) {
        let p = instance(n, l, kind, set, seed);
        let r = try_solve(&p, &tight());
        prop_assume!(r.is_some());
        let r = r.unwrap();
        let g = r.worst.gap.finite();
        prop_assert!(g.is_some(), "returned point is infeasible in some scenario");
        prop_assert!(close(r.value, g.unwrap(), 1e-5), "value {} vs worst gap {}", r.value, g.unwrap());
        for u in p.uset.sample(l, 16, seed).unwrap() {
            let gu = gap_value(&p.family, &r.x, u.as_slice()).unwrap().to_f64();
            prop_assert!(gu <= r.value + 1e-6 * (1.0 + r.value.abs()), "sampled gap {gu} above value {}", r.value);
        }
    }

    #[test]
    fn counterpart_value_scales_with_data(
        n in 2usize..5, l in 1usize..3, kind in kind_strategy(), seed in 0u64..10_000, alpha in 0.1f64..10.0,
    ) {
        let p = instance(n, l, kind, UncertaintySet::BoxInf, seed);
        prop_assume!(convex(&p));
        let base = try_solve(&p, &tight());
        prop_assume!(base.is_some());
        let q = UncertainLcp::new(p.family.scaled(alpha), p.uset.clone()).unwrap();
        let scaled = try_solve(&q, &tight()).expect("scaled problem stays feasible");
        prop_assert!(close(scaled.value, alpha * base.unwrap().value, 1e-5));
    }

    #[test]
    fn change_of_units_divides_the_value(
        n in 2usize..5, kind in kind_strategy(), seed in 0u64..10_000,
        d in proptest::collection::vec(0.2f64..5.0, 4), kappa in 0.1f64..100.0,
    ) {
        let p = instance(n, 2, kind, UncertaintySet::BallTwo, seed);
        prop_assume!(convex(&p));
        let base = try_solve(&p, &tight());
        prop_assume!(base.is_some());
        let base = base.unwrap();
        let dv = Vector::from_vec(d[..n].to_vec());
        let q = p.rescaled(&dv, kappa).unwrap();
        let r = try_solve(&q, &tight()).expect("rescaled problem stays feasible");
        prop_assert!(close(r.value * kappa, base.value, 1e-5), "{} vs {}", r.value * kappa, base.value);
        let mapped: Vec<f64> = r.x.iter().zip(&d).map(|(x, di)| x * di).collect();
        let w = worst_case(&p, &mapped).unwrap();
        prop_assert!(close(w.objective, base.value, 1e-4));
    }

    #[test]
    fn robust_point_dominates_the_nominal_solution(
        n in 2usize..5, l in 1usize..3, kind in kind_strategy(), set in set_strategy(), seed in 0u64..10_000,
    ) {
        let p = instance(n, l, kind, set, seed);
        prop_assume!(convex(&p));
        let rob = try_solve(&p, &tight());
        prop_assume!(rob.is_some());
        let rob = rob.unwrap();
        let nominal = UncertainLcp::new(
            p.family.clone(),
            UncertaintySet::FiniteScenarios(vec![Vector::zeros(l)]),
        ).unwrap();
        let x_nom = try_solve(&nominal, &tight()).expect("strictly monotone nominal LCP is solvable").x;
        let g_nom = worst_case(&p, &x_nom).unwrap().gap;
        prop_assert!(rob.worst.gap.to_f64() <= g_nom.to_f64() + 1e-6 * (1.0 + g_nom.to_f64().abs()));
    }

    #[test]
    fn planted_common_solution_is_recovered(n in 1usize..6, k in 1usize..4, seed in 0u64..10_000) {
        let p = planted_scenarios(n, k, seed, false).unwrap();
        let UncertaintySet::FiniteScenarios(list) = &p.problem.uset else { unreachable!() };
        for u in list {
            let g = gap_value(&p.problem.family, p.solution.as_slice(), u.as_slice()).unwrap().to_f64();
            prop_assert!(g.abs() <= 1e-9 * (1.0 + p.solution.norm()), "planted gap {g}");
        }
        let r = try_solve(&p.problem, &tight()).expect("planted point is feasible");
        prop_assert!(r.value.abs() <= 1e-7, "value {}", r.value);
    }

    #[test]
    fn program_json_roundtrip(
        n in 1usize..5, l in 1usize..4, kind in kind_strategy(), set in set_strategy(), seed in 0u64..10_000,
    ) {
        let art = build_rc(&instance(n, l, kind, set, seed), None).unwrap();
        let text = art.program.to_json();
        let back = MathProgram::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        prop_assert_eq!(back.is_convex(), art.is_convex());
    }

    #[test]
    fn solves_repeat_bitwise(n in 2usize..5, kind in kind_strategy(), seed in 0u64..10_000) {
        let p = instance(n, 2, kind, UncertaintySet::BoxInf, seed);
        let a = try_solve(&p, &PipelineOptions::default());
        prop_assume!(a.is_some());
        let b = try_solve(&p, &PipelineOptions::default()).unwrap();
        let a = a.unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert_eq!(a.x, b.x);
    }
}
