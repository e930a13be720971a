//! Local solves for nonconvex quadratic programs by the convex-concave
//! procedure: each `H` is split as `H⁺ − H⁻`, the concave part is replaced
//! by its tangent at the current iterate, and the resulting convex
//! restriction is solved with penalized slacks until the iterates settle.

use super::{solve_convex, SolverRequest, ACCEPT_PRIMAL};
use crate::linalg;
use crate::program_ir::{Convexity, LinExpr, MathProgram, SolutionPoint, SolveStatus, VarId};
use crate::{Mat, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct LocalOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_ccp_iter: usize,
    pub penalty0: f64,
    pub penalty_growth: f64,
    pub penalty_max: f64,
}

impl Default for LocalOptions {
    fn default() -> Self {
        LocalOptions {
            starts: 20,
            seed: 0,
            max_ccp_iter: 60,
            penalty0: 10.0,
            penalty_growth: 3.0,
            penalty_max: 1e9,
        }
    }
}

/// `(H⁺, H⁻)` with `H = H⁺ − H⁻`, both PSD.
pub fn dc_split(h: &Mat) -> (Mat, Mat) {
    let (vals, vecs) = linalg::sym_eigen(h);
    let k = h.nrows();
    let mut pos = Mat::zeros(k, k);
    let mut neg = Mat::zeros(k, k);
    let tol = linalg::psd_tol(h, 1e-12);
    for i in 0..k {
        let v = vecs.column(i);
        let outer = &v * v.transpose();
        if vals[i] > tol {
            pos += outer * vals[i];
        } else if vals[i] < -tol {
            neg += outer * (-vals[i]);
        }
    }
    (pos, neg)
}

struct Concave {
    vars: Vec<VarId>,
    neg: Mat,
}

impl Concave {
    /// Tangent of `−vᵀH⁻v` at `vk`: `(coefficients, constant)`.
    fn tangent(&self, vk: &[f64]) -> (LinExpr, f64) {
        let xk: Vec<f64> = self.vars.iter().map(|&i| vk[i]).collect();
        let xk = crate::Vector::from_vec(xk);
        let g = &self.neg * &xk;
        let lin = self.vars.iter().zip(g.iter()).map(|(&i, gi)| (i, -2.0 * gi)).collect();
        (lin, xk.dot(&g))
    }
}

struct Split {
    base: MathProgram,
    /// Per nonconvex constraint: index in `base.quadratic` and concave part.
    cons: Vec<(usize, Concave)>,
    obj: Option<Concave>,
    slacks: Vec<VarId>,
}

fn split_program(prog: &MathProgram) -> Split {
    let mut base = prog.clone();
    let mut cons = Vec::new();
    let mut slacks = Vec::new();
    for k in 0..base.quadratic.len() {
        if base.quadratic[k].convexity == Convexity::Nonconvex {
            let (pos, neg) = dc_split(&base.quadratic[k].h);
            let q = &mut base.quadratic[k];
            q.h = pos;
            q.convexity = Convexity::Convex;
            cons.push((
                k,
                Concave {
                    vars: q.vars.clone(),
                    neg,
                },
            ));
        }
    }
    for (j, (k, _)) in cons.iter().enumerate() {
        let s = base.add_var(format!("__ccp_slack[{j}]"), true);
        base.quadratic[*k].c.push((s, -1.0));
        slacks.push(s);
    }
    let obj = {
        let q = &base.objective.quad;
        if q.nrows() > 0 && linalg::min_eigenvalue(q) < -linalg::psd_tol(q, 1e-9) {
            let (pos, neg) = dc_split(q);
            base.objective.quad = pos;
            Some(Concave {
                vars: base.objective.quad_vars.clone(),
                neg,
            })
        } else {
            None
        }
    };
    Split {
        base,
        cons,
        obj,
        slacks,
    }
}

impl Split {
    fn restriction(&self, vk: &[f64], penalty: f64) -> MathProgram {
        let mut p = self.base.clone();
        for (k, conc) in &self.cons {
            let (lin, cst) = conc.tangent(vk);
            let q = &mut p.quadratic[*k];
            q.c.extend(lin);
            q.c = crate::program_ir::merge(std::mem::take(&mut q.c));
            q.d -= cst;
        }
        if let Some(conc) = &self.obj {
            let (lin, cst) = conc.tangent(vk);
            p.objective.linear.extend(lin);
            p.objective.constant += cst;
        }
        for &s in &self.slacks {
            p.objective.linear.push((s, penalty));
        }
        p.objective.linear = crate::program_ir::merge(std::mem::take(&mut p.objective.linear));
        p
    }
}

fn ccp_from(prog: &MathProgram, split: &Split, start: &[f64], opts: &LocalOptions, req: &SolverRequest) -> Option<Vec<f64>> {
    let nv = split.base.num_vars();
    let mut vk = start.to_vec();
    vk.resize(nv, 0.0);
    let mut penalty = opts.penalty0;
    let mut last = f64::INFINITY;
    let mut accepted = false;
    for _ in 0..opts.max_ccp_iter {
        let restr = split.restriction(&vk, penalty);
        let r = SolverRequest {
            program: &restr,
            feas_tol: req.feas_tol,
            gap_tol: req.gap_tol,
            max_iter: req.max_iter,
            warm_start: None,
        };
        // A failed restriction ends the run at the last accepted iterate.
        let sol = match solve_convex(&r) {
            Ok(s) if s.is_optimal() => s,
            _ if accepted => break,
            _ => return None,
        };
        accepted = true;
        let slack: f64 = split.slacks.iter().map(|&s| sol.values[s].max(0.0)).sum();
        let obj = prog.objective_value(&sol.values[..prog.num_vars()]);
        let settled = (obj - last).abs() <= 1e-9 * (1.0 + obj.abs());
        vk = sol.values;
        if settled && slack <= 1e-9 {
            break;
        }
        last = obj;
        penalty = (penalty * opts.penalty_growth).min(opts.penalty_max);
    }
    vk.truncate(prog.num_vars());
    Some(vk)
}

/// Best point over `opts.starts` seeded starts. Start 0 is the warm start
/// when one is given, otherwise the origin.
pub fn solve_local(req: &SolverRequest, opts: &LocalOptions) -> Result<SolutionPoint> {
    req.validate()?;
    let prog = req.program;
    let n = prog.num_vars();
    let split = split_program(prog);
    let origin = req.warm_start.clone().unwrap_or_else(|| vec![0.0; n]);
    let anchor = ccp_from(prog, &split, &origin, &LocalOptions { max_ccp_iter: 1, ..opts.clone() }, req)
        .unwrap_or_else(|| origin.clone());
    let starts = opts.starts.max(1);
    let results: Vec<Option<Vec<f64>>> = (0..starts)
        .into_par_iter()
        .map(|k| {
            let start = if k == 0 {
                origin.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(k as u64);
                anchor
                    .iter()
                    .map(|a| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        a + (1.0 + a.abs()) * z
                    })
                    .collect()
            };
            ccp_from(prog, &split, &start, opts, req)
        })
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut discarded = 0;
    for v in results.into_iter() {
        match v {
            Some(v) if prog.max_violation(&v) <= ACCEPT_PRIMAL => {
                let obj = prog.objective_value(&v);
                if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    best = Some((obj, v));
                }
            }
            _ => discarded += 1,
        }
    }
    let message = if discarded > 0 {
        format!("warning: {discarded} of {starts} starts discarded")
    } else {
        String::new()
    };
    Ok(match best {
        Some((obj, v)) => SolutionPoint {
            primal_residual: prog.max_violation(&v),
            values: v,
            objective: obj,
            status: SolveStatus::Optimal,
            dual_residual: None,
            message,
        },
        None => SolutionPoint::failed(SolveStatus::Infeasible, n, format!("no start reached a feasible point; {message}")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program_ir::Sense;

    #[test]
    fn dc_split_reconstructs() {
        let h = Mat::from_row_slice(2, 2, &[1.0, 3.0, 3.0, -2.0]);
        let (p, n) = dc_split(&h);
        assert!(linalg::frobenius(&(&p - &n - &h)) < 1e-12);
        assert!(linalg::min_eigenvalue(&p) > -1e-12 && linalg::min_eigenvalue(&n) > -1e-12);
    }

    #[test]
    fn concave_objective_on_interval() {
        let mut p = MathProgram::new();
        let x = p.add_var("x", false);
        p.add_linear(vec![(x, 1.0)], Sense::Ge, -1.0, "lo");
        p.add_linear(vec![(x, 1.0)], Sense::Le, 2.0, "hi");
        p.set_objective(vec![], vec![x], &(-Mat::identity(1, 1)), 0.0);
        let mut req = SolverRequest::new(&p);
        req.warm_start = Some(vec![0.7]);
        let s = solve_local(&req, &LocalOptions { starts: 4, ..Default::default() }).unwrap();
        assert!(s.is_optimal());
        assert!((s.values[0] - 2.0).abs() < 1e-6);
        assert!((s.objective + 4.0).abs() < 1e-6);
    }

    #[test]
    fn convex_matches_direct() {
        let mut p = MathProgram::new();
        let x = p.add_vars("x", 2, true);
        p.add_linear(vec![(x[0], 1.0), (x[1], 2.0)], Sense::Ge, 2.0, "row");
        p.set_objective(vec![(x[0], 1.0)], x.clone(), &Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]), 0.0);
        let direct = solve_convex(&SolverRequest::new(&p)).unwrap();
        let local = solve_local(&SolverRequest::new(&p), &LocalOptions::default()).unwrap();
        assert!((direct.objective - local.objective).abs() < 1e-6);
    }

    #[test]
    fn nonconvex_constraint_stays_feasible() {
        // min x + y  s.t.  x² + y² ≥ 1 (written −x² − y² ≤ −1), 0 ≤ x, y ≤ 2
        let mut p = MathProgram::new();
        let v = p.add_vars("v", 2, true);
        for &i in &v {
            p.add_linear(vec![(i, 1.0)], Sense::Le, 2.0, "ub");
        }
        p.add_quad(v.clone(), &(-Mat::identity(2, 2)), vec![], -1.0, "outside");
        p.set_objective(vec![(v[0], 1.0), (v[1], 1.0)], vec![], &Mat::zeros(0, 0), 0.0);
        let s = solve_local(&SolverRequest::new(&p), &LocalOptions::default()).unwrap();
        assert!(s.is_optimal());
        assert!((s.objective - 1.0).abs() < 1e-5, "{}", s.objective);
    }

    #[test]
    fn seeded_runs_repeat_bitwise() {
        let mut p = MathProgram::new();
        let v = p.add_vars("v", 2, false);
        for &i in &v {
            p.add_linear(vec![(i, 1.0)], Sense::Le, 1.0, "ub");
            p.add_linear(vec![(i, 1.0)], Sense::Ge, -1.0, "lb");
        }
        p.set_objective(vec![(v[0], 0.1)], v.clone(), &Mat::from_row_slice(2, 2, &[-1.0, 0.2, 0.2, -0.5]), 0.0);
        let o = LocalOptions { seed: 7, ..Default::default() };
        let a = solve_local(&SolverRequest::new(&p), &o).unwrap();
        let b = solve_local(&SolverRequest::new(&p), &o).unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }
}
