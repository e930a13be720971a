//! Scenario-list counterparts, box vertex reduction and the affine-VI lift.

use super::compose::{row_expr, vec_expr};
use super::{x_name, RcArtifact, Route, T_NAME};
use crate::model::{AffineFamily, Shift, UncertainLcp, UncertaintySet, MAX_VERTEX_DIM};
use crate::program_ir::{validate, MathProgram, Sense, VarId};
use crate::{Error, Mat, Result, Vector};

/// `min t` with `xᵀ(M(u)x + q(u)) ≤ t` and `M(u)x + q(u) ≥ 0` per scenario.
pub fn rc_finite_scenarios(problem: &UncertainLcp) -> Result<RcArtifact> {
    let UncertaintySet::FiniteScenarios(list) = &problem.uset else {
        return Err(Error::refused(Route::Scenarios.name(), "set is not a scenario list"));
    };
    if list.is_empty() {
        return Err(Error::Invalid("empty scenario list".into()));
    }
    let n = problem.n();
    let mut prog = MathProgram::new();
    let x: Vec<VarId> = (0..n).map(|i| prog.add_var(x_name(i), true)).collect();
    let t = prog.add_var(T_NAME, false);
    for (k, u) in list.iter().enumerate() {
        let (m, q) = problem.scenario(u.as_slice())?;
        let mut c = vec_expr(&q, &x);
        c.push((t, -1.0));
        prog.add_quad(x.clone(), &m, c, 0.0, format!("gap[{k}]"));
        for i in 0..n {
            prog.add_linear(row_expr(&m, i, &x), Sense::Ge, -q[i], format!("row[{k}][{i}]"));
        }
    }
    prog.set_objective(vec![(t, 1.0)], vec![], &Mat::zeros(0, 0), 0.0);
    debug_assert!(validate(&prog).is_empty());
    Ok(RcArtifact {
        program: prog,
        x_slot: (0..n).map(x_name).collect(),
        t_slot: Some(T_NAME.into()),
        route: Route::Scenarios,
    })
}

/// Replace a box by its vertex list. Exact for the affine families because
/// both the gap and every row are affine in `u` for fixed `x`.
pub fn box_vertex_reduction(problem: &UncertainLcp) -> Result<UncertainLcp> {
    let l = problem.l();
    match problem.uset {
        UncertaintySet::BoxInf | UncertaintySet::BoxInfNonneg => {}
        _ => {
            return Err(Error::refused(
                Route::Scenarios.name(),
                format!("vertex reduction needs a box, got {}", problem.uset.kind_name()),
            ))
        }
    }
    if l > MAX_VERTEX_DIM {
        return Err(Error::refused(
            Route::Scenarios.name(),
            format!("L = {l} exceeds the vertex limit {MAX_VERTEX_DIM}"),
        ));
    }
    let verts = problem.uset.vertices(l).expect("box vertices below the limit");
    UncertainLcp::new(problem.family.clone(), UncertaintySet::FiniteScenarios(verts))
}

/// Uncertain affine VI data over consecutive shift indices: `C(u) = C₀ + Σ uₗCₗ`
/// and `b(u) = b₀ + Σ uₗbₗ` alongside the family for `M(u)` and `q(u)`.
#[derive(Clone, Debug)]
pub struct AviData {
    pub family: AffineFamily,
    pub c: Vec<Mat>,
    pub b: Vec<Vector>,
}

/// The `(n+m)`-dimensional LCP `B(u) = [[M, −Cᵀ], [C, 0]]`, `d(u) = (q; −b)`,
/// shift by shift, over the given set.
pub fn avi_to_lcp(data: &AviData, uset: UncertaintySet) -> Result<UncertainLcp> {
    let fam = &data.family;
    let n = fam.n();
    let l = fam.l();
    if data.c.len() != l + 1 || data.b.len() != l + 1 {
        return Err(Error::dim(format!(
            "C and b need {} terms each, got {} and {}",
            l + 1,
            data.c.len(),
            data.b.len()
        )));
    }
    let m = data.c[0].nrows();
    for k in 0..=l {
        if data.c[k].shape() != (m, n) || data.b[k].len() != m {
            return Err(Error::dim(format!("term {k} of C or b has wrong shape")));
        }
    }
    let lift = |mm: &Mat, c: &Mat, q: &Vector, b: &Vector| -> (Mat, Vector) {
        let mut big = Mat::zeros(n + m, n + m);
        big.view_mut((0, 0), (n, n)).copy_from(mm);
        big.view_mut((0, n), (n, m)).copy_from(&(-c.transpose()));
        big.view_mut((n, 0), (m, n)).copy_from(c);
        let mut d = Vector::zeros(n + m);
        d.rows_mut(0, n).copy_from(q);
        d.rows_mut(n, m).copy_from(&(-b));
        (big, d)
    };
    let (m0, q0) = lift(&fam.m0, &data.c[0], &fam.q0, &data.b[0]);
    let shifts = fam
        .shifts
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let (m, q) = lift(&s.m, &data.c[k + 1], &s.q, &data.b[k + 1]);
            Shift { m, q }
        })
        .collect();
    UncertainLcp::new(AffineFamily::new(m0, q0, shifts)?, uset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_convex, SolverRequest};

    #[test]
    fn vertex_lists() {
        let fam = |l: usize| {
            AffineFamily::new(
                Mat::identity(1, 1),
                Vector::from_element(1, 1.0),
                (0..l)
                    .map(|_| Shift {
                        m: Mat::zeros(1, 1),
                        q: Vector::from_element(1, 0.1),
                    })
                    .collect(),
            )
            .unwrap()
        };
        let p = box_vertex_reduction(&UncertainLcp::new(fam(1), UncertaintySet::BoxInf).unwrap()).unwrap();
        let UncertaintySet::FiniteScenarios(v) = &p.uset else { panic!() };
        let mut got: Vec<f64> = v.iter().map(|u| u[0]).collect();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, vec![-1.0, 1.0]);
        let p = box_vertex_reduction(&UncertainLcp::new(fam(2), UncertaintySet::BoxInfNonneg).unwrap()).unwrap();
        let UncertaintySet::FiniteScenarios(v) = &p.uset else { panic!() };
        let mut got: Vec<(f64, f64)> = v.iter().map(|u| (u[0], u[1])).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]);
        let big = UncertainLcp::new(fam(17), UncertaintySet::BoxInf).unwrap();
        assert!(matches!(box_vertex_reduction(&big), Err(Error::RouteRefused { .. })));
    }

    #[test]
    fn single_zero_scenario_is_nominal() {
        let fam = AffineFamily::new(
            Mat::identity(2, 2),
            Vector::from_vec(vec![-1.0, 1.0]),
            vec![Shift {
                m: Mat::identity(2, 2),
                q: Vector::zeros(2),
            }],
        )
        .unwrap();
        let p = UncertainLcp::new(fam, UncertaintySet::FiniteScenarios(vec![Vector::zeros(1)])).unwrap();
        let a = rc_finite_scenarios(&p).unwrap();
        assert!(a.is_convex());
        let s = solve_convex(&SolverRequest::new(&a.program)).unwrap();
        assert!(s.objective.abs() < 1e-6);
        let x = a.extract_x(&s);
        assert!((x[0] - 1.0).abs() < 1e-5 && x[1].abs() < 1e-5);
    }

    #[test]
    fn avi_lift_without_constraints_is_identity() {
        let fam = AffineFamily::nominal(Mat::identity(2, 2), Vector::from_vec(vec![1.0, -1.0])).unwrap();
        let data = AviData {
            family: fam.clone(),
            c: vec![Mat::zeros(0, 2)],
            b: vec![Vector::zeros(0)],
        };
        let p = avi_to_lcp(&data, UncertaintySet::BoxInf).unwrap();
        assert_eq!(p.family, fam);
    }
}
