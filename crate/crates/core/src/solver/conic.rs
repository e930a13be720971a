//! Lowering of a convex [`MathProgram`] to clarabel's standard form
//! `min ½vᵀPv + qᵀv  s.t.  Av + s = b, s ∈ K`.

use super::check::check_point;
use super::{SolverRequest, ACCEPT_DUAL, ACCEPT_PRIMAL};
use crate::linalg;
use crate::program_ir::{MathProgram, SolutionPoint, SolveStatus};
use crate::{Error, Result};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoweredCone {
    Zero(usize),
    Nonneg(usize),
    Soc(usize),
    Psd(usize),
}

impl LoweredCone {
    fn rows(&self) -> usize {
        match *self {
            LoweredCone::Zero(k) | LoweredCone::Nonneg(k) | LoweredCone::Soc(k) => k,
            LoweredCone::Psd(d) => d * (d + 1) / 2,
        }
    }
}

/// Conic standard form with sparse rows.
#[derive(Clone, Debug, Default)]
pub struct ConicForm {
    pub nvars: usize,
    /// Upper-triangular entries of `P`.
    pub p: Vec<(usize, usize, f64)>,
    pub q: Vec<f64>,
    pub rows: Vec<(Vec<(usize, f64)>, f64)>,
    pub cones: Vec<LoweredCone>,
}

impl ConicForm {
    fn push_block(&mut self, cone: LoweredCone, rows: Vec<(Vec<(usize, f64)>, f64)>) {
        debug_assert_eq!(cone.rows(), rows.len());
        if rows.is_empty() {
            return;
        }
        match (self.cones.last_mut(), cone) {
            (Some(LoweredCone::Zero(k)), LoweredCone::Zero(j)) => *k += j,
            (Some(LoweredCone::Nonneg(k)), LoweredCone::Nonneg(j)) => *k += j,
            _ => self.cones.push(cone),
        }
        self.rows.extend(rows);
    }

    /// `Pv + q + Aᵀz` evaluated densely.
    pub fn stationarity(&self, v: &[f64], z: &[f64]) -> (Vec<f64>, f64) {
        let mut r = self.q.clone();
        let mut scale = self.q.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut pv = vec![0.0; self.nvars];
        for &(i, j, val) in &self.p {
            pv[i] += val * v[j];
            if i != j {
                pv[j] += val * v[i];
            }
        }
        let mut atz = vec![0.0; self.nvars];
        for ((row, _), zi) in self.rows.iter().zip(z) {
            for (j, a) in row {
                atz[*j] += a * zi;
            }
        }
        for k in 0..self.nvars {
            r[k] += pv[k] + atz[k];
            scale = scale.max(pv[k].abs()).max(atz[k].abs());
        }
        (r, scale)
    }
}

fn sqrt2() -> f64 {
    std::f64::consts::SQRT_2
}

/// Lower a convex program. Quadratic constraints become rotated cones via
/// `H = FᵀF`; matrix constraints use the scaled upper-triangle vectorization.
/// Balance point of the rotated cone: the magnitude of the linear data.
fn quad_sigma(qc: &crate::program_ir::QuadConstraint) -> f64 {
    qc.c.iter().map(|(_, a)| a.abs()).fold(qc.d.abs(), f64::max).max(1.0)
}

pub fn lower(prog: &MathProgram) -> Result<ConicForm> {
    if !prog.is_convex() {
        return Err(Error::refused("lower", "program is nonconvex"));
    }
    let n = prog.num_vars();
    let mut f = ConicForm {
        nvars: n,
        q: vec![0.0; n],
        ..Default::default()
    };
    for (i, c) in &prog.objective.linear {
        f.q[*i] += c;
    }
    let ov = &prog.objective.quad_vars;
    // vᵀHv = ½vᵀ(2H)v, accumulated over the full symmetric pattern.
    let mut full_p = std::collections::BTreeMap::new();
    for (a, &i) in ov.iter().enumerate() {
        for (b, &j) in ov.iter().enumerate() {
            let h = prog.objective.quad[(a, b)];
            if h != 0.0 {
                *full_p.entry((i, j)).or_insert(0.0) += 2.0 * h;
            }
        }
    }
    f.p = full_p
        .into_iter()
        .filter(|((i, j), v)| i <= j && *v != 0.0)
        .map(|((i, j), v)| (i, j, v))
        .collect();

    let mut eq = Vec::new();
    let mut ineq = Vec::new();
    for lc in &prog.linear {
        use crate::program_ir::Sense;
        match lc.sense {
            Sense::Eq => eq.push((lc.coeffs.clone(), lc.rhs)),
            Sense::Le => ineq.push((lc.coeffs.clone(), lc.rhs)),
            Sense::Ge => ineq.push((lc.coeffs.iter().map(|(i, v)| (*i, -v)).collect(), -lc.rhs)),
        }
    }
    for (i, v) in prog.variables.iter().enumerate() {
        if v.nonneg {
            ineq.push((vec![(i, -1.0)], 0.0));
        }
    }
    f.push_block(LoweredCone::Zero(eq.len()), eq);
    let mut lin_from_quad = Vec::new();
    let mut soc_blocks = Vec::new();
    for qc in &prog.quadratic {
        let fac = linalg::psd_factor(&qc.h, linalg::psd_tol(&qc.h, 1e-12));
        if fac.nrows() == 0 {
            lin_from_quad.push((qc.c.clone(), qc.d));
            continue;
        }
        // ‖(2√σ Fv, ρ − σ)‖ ≤ ρ + σ with ρ = d − cᵀv.
        let sigma = quad_sigma(qc);
        let root = sigma.sqrt();
        let mut rows = Vec::with_capacity(fac.nrows() + 2);
        rows.push((qc.c.clone(), sigma + qc.d));
        for r in 0..fac.nrows() {
            let row: Vec<(usize, f64)> = qc
                .vars
                .iter()
                .enumerate()
                .filter(|(a, _)| fac[(r, *a)] != 0.0)
                .map(|(a, &id)| (id, -2.0 * root * fac[(r, a)]))
                .collect();
            rows.push((row, 0.0));
        }
        rows.push((qc.c.iter().map(|(i, v)| (*i, -v)).collect(), sigma - qc.d));
        soc_blocks.push(rows);
    }
    ineq.extend(lin_from_quad);
    f.push_block(LoweredCone::Nonneg(ineq.len()), ineq);
    for rows in soc_blocks {
        f.push_block(LoweredCone::Soc(rows.len()), rows);
    }
    for sc in &prog.soc {
        let mut rows = Vec::with_capacity(sc.a.len() + 1);
        rows.push((sc.c.iter().map(|(i, v)| (*i, -v)).collect(), sc.d));
        for (ar, b) in sc.a.iter().zip(&sc.b) {
            rows.push((ar.iter().map(|(i, v)| (*i, -v)).collect(), *b));
        }
        f.push_block(LoweredCone::Soc(rows.len()), rows);
    }
    for pc in &prog.psd {
        let d = pc.dim;
        let mut rows = Vec::with_capacity(d * (d + 1) / 2);
        for j in 0..d {
            for i in 0..=j {
                let s = if i == j { 1.0 } else { sqrt2() };
                let row: Vec<(usize, f64)> = pc
                    .terms
                    .iter()
                    .filter(|(_, m)| m[(i, j)] != 0.0)
                    .map(|(id, m)| (*id, -s * m[(i, j)]))
                    .collect();
                rows.push((row, s * pc.f0[(i, j)]));
            }
        }
        f.push_block(LoweredCone::Psd(d), rows);
    }
    Ok(f)
}

fn to_csc_rows(m: usize, n: usize, rows: &[(Vec<(usize, f64)>, f64)]) -> CscMatrix<f64> {
    let (mut ii, mut jj, mut vv) = (Vec::new(), Vec::new(), Vec::new());
    for (r, (row, _)) in rows.iter().enumerate() {
        for (j, v) in row {
            if *v != 0.0 {
                ii.push(r);
                jj.push(*j);
                vv.push(*v);
            }
        }
    }
    CscMatrix::new_from_triplets(m, n, ii, jj, vv)
}

fn cones_for_clarabel(cones: &[LoweredCone]) -> Result<Vec<SupportedConeT<f64>>> {
    cones
        .iter()
        .map(|c| match *c {
            LoweredCone::Zero(k) => Ok(SupportedConeT::ZeroConeT(k)),
            LoweredCone::Nonneg(k) => Ok(SupportedConeT::NonnegativeConeT(k)),
            LoweredCone::Soc(k) => Ok(SupportedConeT::SecondOrderConeT(k)),
            #[cfg(feature = "sdp")]
            LoweredCone::Psd(d) => Ok(SupportedConeT::PSDTriangleConeT(d)),
            #[cfg(not(feature = "sdp"))]
            LoweredCone::Psd(_) => Err(Error::Unsupported("matrix cones need the `sdp` feature".into())),
        })
        .collect()
}

pub(crate) fn solve_clarabel(req: &SolverRequest) -> Result<SolutionPoint> {
    let prog = req.program;
    let form = lower(prog)?;
    let n = form.nvars;
    let m = form.rows.len();
    if n == 0 {
        let ok = prog.max_violation(&[]) <= ACCEPT_PRIMAL;
        return Ok(SolutionPoint {
            values: vec![],
            objective: prog.objective.constant,
            status: if ok { SolveStatus::Optimal } else { SolveStatus::Infeasible },
            primal_residual: prog.max_violation(&[]),
            dual_residual: Some(0.0),
            message: String::new(),
        });
    }
    let (mut pi, mut pj, mut pv) = (Vec::new(), Vec::new(), Vec::new());
    for &(i, j, v) in &form.p {
        pi.push(i);
        pj.push(j);
        pv.push(v);
    }
    let p = CscMatrix::new_from_triplets(n, n, pi, pj, pv);
    let a = to_csc_rows(m, n, &form.rows);
    let b: Vec<f64> = form.rows.iter().map(|(_, b)| *b).collect();
    let cones = cones_for_clarabel(&form.cones)?;
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(req.max_iter)
        .tol_feas(req.feas_tol)
        .tol_gap_abs(req.gap_tol)
        .tol_gap_rel(req.gap_tol)
        .max_threads(1)
        .build()
        .map_err(|e| Error::Solver(format!("settings: {e:?}")))?;
    let mut solver = DefaultSolver::new(&p, &form.q, &a, &b, &cones, settings)
        .map_err(|e| Error::Solver(format!("setup: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved | SolverStatus::InsufficientProgress => {
            SolveStatus::Optimal
        }
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::IterationLimit,
        other => {
            return Err(Error::Solver(format!("backend stopped with {other:?}")));
        }
    };
    if status != SolveStatus::Optimal {
        let mut out = SolutionPoint::failed(status, n, format!("backend status {:?}", sol.status));
        if status == SolveStatus::IterationLimit {
            out.values = sol.x.clone();
        }
        return Ok(out);
    }
    let values = sol.x.clone();
    let report = check_point(prog, &form, &values, Some(&sol.z));
    let accepted = report.primal <= ACCEPT_PRIMAL && report.dual.is_none_or(|d| d <= ACCEPT_DUAL);
    let message = if accepted {
        format!("backend status {:?}", sol.status)
    } else {
        format!(
            "checker rejected backend point (status {:?}, primal {:.2e}, dual {:?})",
            sol.status, report.primal, report.dual
        )
    };
    Ok(SolutionPoint {
        objective: prog.objective_value(&values),
        values,
        status: if accepted { SolveStatus::Optimal } else { SolveStatus::IterationLimit },
        primal_residual: report.primal,
        dual_residual: report.dual,
        message,
    })
}
