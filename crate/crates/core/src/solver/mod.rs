//! Numerical backends behind one contract.
//!
//! Convex programs (LP, QP, QCQP, SOCP and, with the `sdp` feature, SDP) are
//! lowered to conic form and handed to clarabel. Every reported optimum is
//! re-checked by [`check`] against the original [`MathProgram`] data before
//! it is labelled optimal. Nonconvex programs go through [`solve_local`], a
//! convex-concave multistart that only supplies good feasible points.

mod check;
mod conic;
mod external;
mod local;

pub use check::{check_point, CheckReport};
pub use conic::{lower, ConicForm, LoweredCone};
pub use external::{parse_csdp_solution, sdp_roundtrip, ExternalSdp, SDP_ENV};
pub use local::{dc_split, solve_local, LocalOptions};

use crate::program_ir::{MathProgram, SolutionPoint, SolveStatus};
use crate::{Error, Result};

/// Primal feasibility threshold (scaled) behind an `Optimal` label.
pub const ACCEPT_PRIMAL: f64 = 1e-6;
/// Stationarity threshold (scaled) behind an `Optimal` label.
pub const ACCEPT_DUAL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct SolverRequest<'a> {
    pub program: &'a MathProgram,
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: u32,
    pub warm_start: Option<Vec<f64>>,
}

impl<'a> SolverRequest<'a> {
    pub fn new(program: &'a MathProgram) -> Self {
        SolverRequest {
            program,
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
            warm_start: None,
        }
    }

    pub fn with_tolerances(mut self, feas: f64, gap: f64) -> Self {
        self.feas_tol = feas;
        self.gap_tol = gap;
        self
    }

    pub fn with_max_iter(mut self, it: u32) -> Self {
        self.max_iter = it;
        self
    }

    fn validate(&self) -> Result<()> {
        let ok = |t: f64| t > 0.0 && t < 1.0;
        if !ok(self.feas_tol) || !ok(self.gap_tol) {
            return Err(Error::Invalid("tolerances must lie in (0, 1)".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Invalid("iteration cap must be positive".into()));
        }
        if let Some(w) = &self.warm_start {
            if w.len() != self.program.num_vars() {
                return Err(Error::dim("warm start has the wrong length"));
            }
        }
        Ok(())
    }
}

/// Pluggable convex backend.
pub trait Backend: Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, req: &SolverRequest) -> Result<SolutionPoint>;
}

/// The built-in interior-point backend.
pub struct Clarabel;

impl Backend for Clarabel {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve(&self, req: &SolverRequest) -> Result<SolutionPoint> {
        conic::solve_clarabel(req)
    }
}

/// Solve a linear program.
pub fn solve_lp(req: &SolverRequest) -> Result<SolutionPoint> {
    req.validate()?;
    if !req.program.is_linear() {
        return Err(Error::Invalid("solve_lp needs a linear program".into()));
    }
    conic::solve_clarabel(req)
}

/// Solve a convex program with the built-in backend.
pub fn solve_convex(req: &SolverRequest) -> Result<SolutionPoint> {
    solve_convex_with(&Clarabel, req)
}

pub fn solve_convex_with(backend: &dyn Backend, req: &SolverRequest) -> Result<SolutionPoint> {
    req.validate()?;
    if !req.program.is_convex() {
        return Err(Error::refused("solve_convex", "program is nonconvex"));
    }
    if !req.program.psd.is_empty() && !sdp_available() {
        return Ok(SolutionPoint::failed(
            SolveStatus::Skipped,
            req.program.num_vars(),
            "no SDP-capable backend compiled in (enable the `sdp` feature)",
        ));
    }
    backend.solve(req)
}

/// Whether the built-in backend can handle matrix constraints.
pub fn sdp_available() -> bool {
    cfg!(feature = "sdp")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program_ir::Sense;
    use crate::Mat;

    fn empty() -> Mat {
        Mat::zeros(0, 0)
    }

    #[test]
    fn lp_lower_bound() {
        let mut p = MathProgram::new();
        let x = p.add_var("x", false);
        p.add_linear(vec![(x, 1.0)], Sense::Ge, 3.0, "x>=3");
        p.set_objective(vec![(x, 1.0)], vec![], &empty(), 0.0);
        let s = solve_lp(&SolverRequest::new(&p)).unwrap();
        assert!(s.is_optimal());
        assert!((s.objective - 3.0).abs() < 1e-7);
    }

    #[test]
    fn lp_infeasible_pair() {
        let mut p = MathProgram::new();
        let x = p.add_var("x", false);
        p.add_linear(vec![(x, 1.0)], Sense::Ge, 1.0, "lo");
        p.add_linear(vec![(x, 1.0)], Sense::Le, 0.0, "hi");
        p.set_objective(vec![(x, 1.0)], vec![], &empty(), 0.0);
        let s = solve_lp(&SolverRequest::new(&p)).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn lp_unbounded() {
        let mut p = MathProgram::new();
        let x = p.add_var("x", false);
        p.add_linear(vec![(x, 1.0)], Sense::Le, 0.0, "hi");
        p.set_objective(vec![(x, 1.0)], vec![], &empty(), 0.0);
        let s = solve_lp(&SolverRequest::new(&p)).unwrap();
        assert_eq!(s.status, SolveStatus::Unbounded);
    }

    #[test]
    fn qp_square() {
        let mut p = MathProgram::new();
        let x = p.add_var("x", false);
        p.add_linear(vec![(x, 1.0)], Sense::Ge, 1.0, "x>=1");
        p.set_objective(vec![], vec![x], &Mat::identity(1, 1), 0.0);
        let s = solve_convex(&SolverRequest::new(&p)).unwrap();
        assert!(s.is_optimal());
        assert!((s.values[0] - 1.0).abs() < 1e-7);
        assert!((s.objective - 1.0).abs() < 1e-7);
        assert!(s.dual_residual.unwrap() < ACCEPT_DUAL);
    }

    #[test]
    fn socp_three_four_five() {
        let mut p = MathProgram::new();
        let x = p.add_vars("x", 2, false);
        let t = p.add_var("t", false);
        p.add_soc(vec![vec![(x[0], 1.0)], vec![(x[1], 1.0)]], vec![0.0, 0.0], vec![(t, 1.0)], 0.0, "norm");
        p.add_linear(vec![(x[0], 1.0)], Sense::Ge, 3.0, "x1");
        p.add_linear(vec![(x[1], 1.0)], Sense::Ge, 4.0, "x2");
        p.set_objective(vec![(t, 1.0)], vec![], &empty(), 0.0);
        let s = solve_convex(&SolverRequest::new(&p)).unwrap();
        assert!(s.is_optimal());
        assert!((s.objective - 5.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_constraint_as_cone() {
        // min -x - y  s.t.  x² + y² ≤ 2  → x = y = 1
        let mut p = MathProgram::new();
        let v = p.add_vars("v", 2, false);
        p.add_quad(v.clone(), &Mat::identity(2, 2), vec![], 2.0, "disk");
        p.set_objective(vec![(v[0], -1.0), (v[1], -1.0)], vec![], &empty(), 0.0);
        let s = solve_convex(&SolverRequest::new(&p)).unwrap();
        assert!(s.is_optimal());
        assert!((s.values[0] - 1.0).abs() < 1e-6 && (s.values[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn nonconvex_is_refused() {
        let mut p = MathProgram::new();
        let v = p.add_vars("v", 1, false);
        p.set_objective(vec![], v, &(-Mat::identity(1, 1)), 0.0);
        assert!(matches!(
            solve_convex(&SolverRequest::new(&p)),
            Err(Error::RouteRefused { .. })
        ));
    }

    #[test]
    fn request_validation() {
        let p = MathProgram::new();
        assert!(solve_lp(&SolverRequest::new(&p).with_max_iter(0)).is_err());
        assert!(solve_lp(&SolverRequest::new(&p).with_tolerances(0.0, 1e-8)).is_err());
    }

    #[test]
    fn iteration_cap_is_reported() {
        let mut p = MathProgram::new();
        let x = p.add_vars("x", 3, true);
        p.add_linear(x.iter().map(|&i| (i, 1.0)).collect(), Sense::Ge, 1.0, "sum");
        p.add_quad(x.clone(), &Mat::identity(3, 3), vec![], 10.0, "ball");
        p.set_objective(vec![(x[0], 1.0), (x[1], 2.0), (x[2], 3.0)], vec![], &empty(), 0.0);
        let s = solve_convex(&SolverRequest::new(&p).with_max_iter(1)).unwrap();
        assert_eq!(s.status, SolveStatus::IterationLimit);
    }

    #[test]
    fn deterministic_value() {
        let mut p = MathProgram::new();
        let x = p.add_vars("x", 2, true);
        p.add_linear(vec![(x[0], 1.0), (x[1], 1.0)], Sense::Ge, 1.0, "sum");
        p.set_objective(vec![(x[0], 0.3)], x.clone(), &Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]), 0.0);
        let a = solve_convex(&SolverRequest::new(&p)).unwrap();
        let b = solve_convex(&SolverRequest::new(&p)).unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[cfg(feature = "sdp")]
    #[test]
    fn sdp_scalar_block() {
        let mut p = MathProgram::new();
        let v = p.add_var("v", false);
        p.add_psd(Mat::from_row_slice(1, 1, &[-2.0]), vec![(v, Mat::identity(1, 1))], "v>=2");
        p.set_objective(vec![(v, 1.0)], vec![], &empty(), 0.0);
        let s = solve_convex(&SolverRequest::new(&p)).unwrap();
        assert!(s.is_optimal());
        assert!((s.objective - 2.0).abs() < 1e-6);
    }

    #[cfg(feature = "sdp")]
    #[test]
    fn sdp_two_by_two() {
        // min x  s.t. [[x, 1], [1, x]] ⪰ 0  → x = 1
        let mut p = MathProgram::new();
        let x = p.add_var("x", false);
        let off = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        p.add_psd(off, vec![(x, Mat::identity(2, 2))], "lmi");
        p.set_objective(vec![(x, 1.0)], vec![], &empty(), 0.0);
        let s = solve_convex(&SolverRequest::new(&p)).unwrap();
        assert!(s.is_optimal());
        assert!((s.values[0] - 1.0).abs() < 1e-6);
    }
}
