//! Spatial branch-and-bound for nonconvex quadratically constrained programs.
//!
//! Every nonconvex quadratic constraint `vᵀHv + cᵀv ≤ d` is split as
//! `H = H⁺ − Σ λⱼνⱼνⱼᵀ` with split variables `yⱼ = √λⱼ νⱼᵀv`. On a box
//! `l ≤ y ≤ u` each `−yⱼ²` is replaced by the secant `−((y − l)(u + l) + l²)`,
//! which gives a convex relaxation and so a lower bound. Upper bounds come
//! from fixing the split-constraint variables at the relaxation point and
//! solving the remaining convex program exactly.

use crate::linalg;
use crate::program_ir::{
    eval_lin, Convexity, LinExpr, MathProgram, QuadConstraint, Sense, SolutionPoint, SolveStatus, VarId,
};
use crate::solver::{solve_convex, solve_local, solve_lp, LocalOptions, SolverRequest};
use crate::{Error, Mat, Result, Vector};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub const DEFAULT_EPS: f64 = 1e-4;
pub const DEFAULT_NODE_CAP: usize = 20_000;
/// Relative eigenvalue cutoff below which a direction is dropped from both parts.
pub const SPLIT_TOL: f64 = 1e-9;
/// Slack for the monotonicity and pruning checks.
const CHECK_TOL: f64 = 1e-6;
/// Acceptance of a relaxation point rejected by the strict checker.
const INEXACT_PRIMAL: f64 = 1e-5;
const INEXACT_DUAL: f64 = 1e-4;
const ROUTE: &str = "bnb";

/// `(y − l)(u + l) + l²`, an upper bound on `y²` over `[l, u]`.
pub fn secant(y: f64, l: f64, u: f64) -> f64 {
    (y - l) * (u + l) + l * l
}

#[derive(Clone, Debug, PartialEq)]
pub struct NegTerm {
    pub lambda: f64,
    pub nu: Vector,
}

/// Split of one nonconvex quadratic constraint of the program.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSplit {
    pub constraint: usize,
    pub vars: Vec<VarId>,
    pub pos: Mat,
    pub neg: Vec<NegTerm>,
}

impl EigenSplit {
    pub fn new(constraint: usize, q: &QuadConstraint) -> Self {
        let (vals, vecs) = linalg::sym_eigen(&q.h);
        let cut = linalg::psd_tol(&q.h, SPLIT_TOL);
        let k = q.h.nrows();
        let mut pos = Mat::zeros(k, k);
        let mut neg = Vec::new();
        for (j, &lam) in vals.iter().enumerate() {
            let mut v: Vector = vecs.column(j).into_owned();
            if lam > cut {
                pos += lam * &v * v.transpose();
            } else if lam < -cut {
                if let Some(first) = v.iter().find(|c| c.abs() > 1e-12) {
                    if *first < 0.0 {
                        v = -v;
                    }
                }
                neg.push(NegTerm { lambda: -lam, nu: v });
            }
        }
        EigenSplit {
            constraint,
            vars: q.vars.clone(),
            pos,
            neg,
        }
    }

    /// Frobenius norm of `H + Σ λνν ᵀ − H⁺`.
    pub fn residual(&self, h: &Mat) -> f64 {
        let mut r = h - &self.pos;
        for t in &self.neg {
            r += t.lambda * &t.nu * t.nu.transpose();
        }
        linalg::frobenius(&r)
    }

    /// `√λⱼ νⱼᵀv` as a sparse form over program variables.
    pub fn y_expr(&self, j: usize) -> LinExpr {
        let t = &self.neg[j];
        let s = t.lambda.sqrt();
        self.vars
            .iter()
            .zip(t.nu.iter())
            .filter(|(_, c)| **c != 0.0)
            .map(|(&v, &c)| (v, s * c))
            .collect()
    }
}

/// Program prepared for branching: convex objective, split data and the
/// list of variables fixed when computing upper bounds.
#[derive(Clone, Debug)]
pub struct BnbContext {
    pub program: MathProgram,
    pub original_vars: usize,
    pub splits: Vec<EigenSplit>,
    /// `(split, term)` pairs in lexicographic order.
    pub coords: Vec<(usize, usize)>,
    pub fixed: Vec<VarId>,
}

/// Outcome of the bound LPs.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundBox {
    Bounds { l: Vec<f64>, u: Vec<f64> },
    Infeasible,
}

impl BnbContext {
    pub fn new(program: &MathProgram) -> Result<Self> {
        let original_vars = program.num_vars();
        let mut prog = program.clone();
        if !prog.psd.is_empty() {
            return Err(Error::Unsupported("branch-and-bound over matrix constraints".into()));
        }
        if prog.objective.quad.nrows() > 0
            && linalg::min_eigenvalue(&prog.objective.quad) < -linalg::psd_tol(&prog.objective.quad, 1e-9)
        {
            let obj = prog.objective.clone();
            let t = prog.add_var("bnb.t", false);
            let mut c = obj.linear.clone();
            c.push((t, -1.0));
            prog.add_quad(obj.quad_vars.clone(), &obj.quad, c, -obj.constant, "bnb.epigraph");
            prog.set_objective(vec![(t, 1.0)], vec![], &Mat::zeros(0, 0), 0.0);
        }
        let mut splits = Vec::new();
        for (k, q) in prog.quadratic.iter().enumerate() {
            if q.convexity == Convexity::Nonconvex {
                let s = EigenSplit::new(k, q);
                debug_assert!(s.residual(&q.h) <= 1e-8 * (1.0 + linalg::frobenius(&q.h)));
                splits.push(s);
            }
        }
        let coords = splits
            .iter()
            .enumerate()
            .flat_map(|(k, s)| (0..s.neg.len()).map(move |j| (k, j)))
            .collect();
        let mut fixed: Vec<VarId> = splits.iter().flat_map(|s| s.vars.iter().copied()).collect();
        fixed.sort_unstable();
        fixed.dedup();
        Ok(BnbContext {
            program: prog,
            original_vars,
            splits,
            coords,
            fixed,
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    fn y_expr(&self, c: usize) -> LinExpr {
        let (k, j) = self.coords[c];
        self.splits[k].y_expr(j)
    }

    /// Min and max of every split coordinate over the linear constraints.
    pub fn bound_box(&self) -> Result<BoundBox> {
        use rayon::prelude::*;
        let mut base = self.program.clone();
        base.quadratic.clear();
        base.soc.clear();
        let jobs: Vec<(usize, f64)> = (0..self.dim()).flat_map(|c| [(c, 1.0), (c, -1.0)]).collect();
        let out: Vec<Result<Option<f64>>> = jobs
            .par_iter()
            .map(|&(c, sign)| {
                let mut lp = base.clone();
                let obj = self.y_expr(c).into_iter().map(|(v, a)| (v, sign * a)).collect();
                lp.set_objective(obj, vec![], &Mat::zeros(0, 0), 0.0);
                let s = solve_lp(&SolverRequest::new(&lp))?;
                match s.status {
                    SolveStatus::Optimal => Ok(Some(sign * s.objective)),
                    SolveStatus::Infeasible => Ok(None),
                    SolveStatus::Unbounded => Err(Error::refused(
                        ROUTE,
                        format!(
                            "split coordinate {c} is unbounded over the linear constraints; add box bounds on x"
                        ),
                    )),
                    _ => Err(Error::Solver(format!("bound LP for coordinate {c}: {}", s.message))),
                }
            })
            .collect();
        let mut l = vec![0.0; self.dim()];
        let mut u = vec![0.0; self.dim()];
        for (&(c, sign), r) in jobs.iter().zip(out) {
            match r? {
                None => return Ok(BoundBox::Infeasible),
                Some(v) if sign > 0.0 => l[c] = v,
                Some(v) => u[c] = v,
            }
        }
        for c in 0..self.dim() {
            if l[c] > u[c] {
                let m = 0.5 * (l[c] + u[c]);
                l[c] = m;
                u[c] = m;
            }
        }
        Ok(BoundBox::Bounds { l, u })
    }

    /// Convex relaxation on the box `[l, u]`.
    pub fn relax(&self, l: &[f64], u: &[f64]) -> MathProgram {
        let mut p = self.program.clone();
        let mut ys = Vec::with_capacity(self.dim());
        for c in 0..self.dim() {
            let (k, j) = self.coords[c];
            let y = p.add_var(format!("bnb.y[{k}][{j}]"), false);
            let mut row = self.y_expr(c).into_iter().map(|(v, a)| (v, -a)).collect::<LinExpr>();
            row.push((y, 1.0));
            p.add_linear(row, Sense::Eq, 0.0, format!("bnb.coupling[{k}][{j}]"));
            p.add_linear(vec![(y, 1.0)], Sense::Ge, l[c], format!("bnb.lower[{k}][{j}]"));
            p.add_linear(vec![(y, 1.0)], Sense::Le, u[c], format!("bnb.upper[{k}][{j}]"));
            ys.push(y);
        }
        let quads = std::mem::take(&mut p.quadratic);
        let mut next = 0;
        for (k, q) in quads.into_iter().enumerate() {
            if next < self.splits.len() && self.splits[next].constraint == k {
                let s = &self.splits[next];
                let mut c = q.c.clone();
                let mut d = q.d;
                for (c_idx, &(sk, _)) in self.coords.iter().enumerate() {
                    if sk == next {
                        c.push((ys[c_idx], -(u[c_idx] + l[c_idx])));
                        d -= u[c_idx] * l[c_idx];
                    }
                }
                p.add_quad(s.vars.clone(), &s.pos, c, d, q.label);
                next += 1;
            } else {
                p.quadratic.push(q);
            }
        }
        p
    }

    /// The original program with the split-constraint variables fixed at `v`.
    pub fn restricted(&self, v: &[f64]) -> MathProgram {
        let mut p = self.program.clone();
        let quads = std::mem::take(&mut p.quadratic);
        let mut next = 0;
        for (k, q) in quads.into_iter().enumerate() {
            if next < self.splits.len() && self.splits[next].constraint == k {
                let form = q.lhs(v) - eval_lin(&q.c, v);
                p.add_linear(q.c, Sense::Le, q.d - form, q.label);
                next += 1;
            } else {
                p.quadratic.push(q);
            }
        }
        for &i in &self.fixed {
            let val = if p.variables[i].nonneg { v[i].max(0.0) } else { v[i] };
            p.add_linear(vec![(i, 1.0)], Sense::Eq, val, format!("bnb.fix[{i}]"));
        }
        p
    }

    /// Exact value of the original program over the completions of `v`.
    fn upper_bound(&self, v: &[f64]) -> Option<(f64, Vec<f64>)> {
        let p = self.restricted(v);
        let s = solve_convex(&SolverRequest::new(&p)).ok()?;
        let usable = s.is_optimal() || (s.status == SolveStatus::IterationLimit && !s.values.is_empty());
        if !usable || self.program.max_violation(&s.values) > CHECK_TOL {
            return None;
        }
        Some((self.program.objective_value(&s.values), s.values))
    }
}

/// One event of the search tree.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TraceRecord {
    pub node: usize,
    pub parent: Option<usize>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    pub lb: Option<f64>,
    pub ub: Option<f64>,
    pub action: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BnbStats {
    pub nodes: usize,
    pub branched: usize,
    pub max_depth: usize,
    pub glb_lb: f64,
    pub glb_ub: f64,
    pub gap: f64,
    pub hit_cap: bool,
    pub relax_failures: usize,
    pub monotone_ok: bool,
    pub pruning_ok: bool,
    pub lb_history: Vec<f64>,
    pub trace: Vec<TraceRecord>,
}

#[derive(Clone, Debug)]
pub struct BnbResult {
    pub solution: SolutionPoint,
    pub stats: BnbStats,
}

#[derive(Clone, Copy, Debug)]
pub struct BnbOptions {
    pub eps: f64,
    pub node_cap: usize,
    pub trace: bool,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions {
            eps: DEFAULT_EPS,
            node_cap: DEFAULT_NODE_CAP,
            trace: true,
        }
    }
}

/// Open node of the search tree.
#[derive(Clone, Debug)]
pub struct BnbNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    pub lb: f64,
    pub ub: f64,
}

struct Open(BnbNode);

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .lb
            .total_cmp(&self.0.lb)
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

enum Eval {
    Infeasible,
    Solved {
        lb: f64,
        ub: Option<(f64, Vec<f64>)>,
        failed: bool,
    },
}

fn evaluate(ctx: &BnbContext, l: &[f64], u: &[f64], floor: f64) -> Result<Eval> {
    let p = ctx.relax(l, u);
    let s = solve_convex(&SolverRequest::new(&p))?;
    match s.status {
        SolveStatus::Infeasible => Ok(Eval::Infeasible),
        SolveStatus::Optimal => Ok(Eval::Solved {
            lb: s.objective.max(floor),
            ub: ctx.upper_bound(&s.values),
            failed: false,
        }),
        SolveStatus::Unbounded => Err(Error::refused(ROUTE, "relaxation is unbounded; add box bounds on x")),
        SolveStatus::IterationLimit if near_optimal(&s) => Ok(Eval::Solved {
            lb: (s.objective - inexact_margin(&s)).max(floor),
            ub: ctx.upper_bound(&s.values),
            failed: false,
        }),
        _ => Ok(Eval::Solved {
            lb: floor,
            ub: None,
            failed: true,
        }),
    }
}

/// One local descent from the incumbent.
fn polish(program: &MathProgram, start: &[f64]) -> Option<Vec<f64>> {
    let mut req = SolverRequest::new(program);
    req.warm_start = Some(start.to_vec());
    let opts = LocalOptions { starts: 1, ..Default::default() };
    let s = solve_local(&req, &opts).ok()?;
    (s.is_optimal() && program.max_violation(&s.values) <= CHECK_TOL).then_some(s.values)
}

/// Backend converged but the independent check asked for more accuracy.
fn near_optimal(s: &SolutionPoint) -> bool {
    !s.values.is_empty()
        && s.primal_residual <= INEXACT_PRIMAL
        && s.dual_residual.is_some_and(|d| d <= INEXACT_DUAL)
}

fn inexact_margin(s: &SolutionPoint) -> f64 {
    s.dual_residual.unwrap_or(INEXACT_DUAL) * (1.0 + s.objective.abs())
}

fn tol(v: f64) -> f64 {
    CHECK_TOL * (1.0 + v.abs())
}

/// Global minimization of a nonconvex program by spatial branch-and-bound.
/// Terminates when the incumbent is within `eps` of the best lower bound.
pub fn bnb_solve(program: &MathProgram, opts: &BnbOptions) -> Result<BnbResult> {
    if !(opts.eps > 0.0) || opts.node_cap == 0 {
        return Err(Error::Invalid("eps and node cap must be positive".into()));
    }
    let ctx = BnbContext::new(program)?;
    let n = ctx.original_vars;
    let (l0, u0) = match ctx.bound_box()? {
        BoundBox::Bounds { l, u } => (l, u),
        BoundBox::Infeasible => {
            return Ok(infeasible_result(n, "linear constraints are infeasible"));
        }
    };
    let mut stats = BnbStats {
        nodes: 1,
        branched: 0,
        max_depth: 0,
        glb_lb: f64::NEG_INFINITY,
        glb_ub: f64::INFINITY,
        gap: f64::INFINITY,
        hit_cap: false,
        relax_failures: 0,
        monotone_ok: true,
        pruning_ok: true,
        lb_history: Vec::new(),
        trace: Vec::new(),
    };
    let record = |stats: &mut BnbStats, node: &BnbNode, action: &str| {
        if opts.trace {
            stats.trace.push(TraceRecord {
                node: node.id,
                parent: node.parent,
                l: node.l.clone(),
                u: node.u.clone(),
                lb: node.lb.is_finite().then_some(node.lb),
                ub: node.ub.is_finite().then_some(node.ub),
                action: action.into(),
            });
        }
    };
    let mut incumbent: Option<Vec<f64>> = None;
    let mut glb_ub = f64::INFINITY;
    let accept = |ub: Option<(f64, Vec<f64>)>, glb_ub: &mut f64, inc: &mut Option<Vec<f64>>| -> f64 {
        match ub {
            Some((v, vals)) => {
                if v < *glb_ub {
                    *glb_ub = v;
                    *inc = Some(vals);
                }
                v
            }
            None => f64::INFINITY,
        }
    };

    let root = match evaluate(&ctx, &l0, &u0, f64::NEG_INFINITY)? {
        Eval::Infeasible => return Ok(infeasible_result(n, "root relaxation is infeasible")),
        Eval::Solved { lb, ub, failed } => {
            if failed {
                return Err(Error::Solver("root relaxation did not solve".into()));
            }
            let ub = accept(ub, &mut glb_ub, &mut incumbent);
            BnbNode {
                id: 0,
                parent: None,
                depth: 0,
                l: l0,
                u: u0,
                lb,
                ub,
            }
        }
    };
    record(&mut stats, &root, "root");
    let mut glb_lb = root.lb.min(glb_ub);
    stats.lb_history.push(glb_lb);
    let mut heap = BinaryHeap::new();
    heap.push(Open(root));
    let mut next_id = 1;
    let mut leaf_lb = f64::INFINITY;

    while let Some(Open(node)) = heap.pop() {
        let cur = node.lb.min(glb_ub);
        if cur < glb_lb - tol(glb_lb) {
            stats.monotone_ok = false;
        }
        glb_lb = glb_lb.max(cur);
        stats.lb_history.push(glb_lb);
        debug_assert!(stats.monotone_ok, "lower bound decreased");
        if glb_ub - glb_lb < opts.eps {
            record(&mut stats, &node, "terminate");
            leaf_lb = leaf_lb.min(node.lb);
            break;
        }
        if node.lb >= glb_ub - opts.eps {
            record(&mut stats, &node, "prune-bound");
            leaf_lb = leaf_lb.min(node.lb);
            continue;
        }
        if stats.nodes >= opts.node_cap {
            stats.hit_cap = true;
            record(&mut stats, &node, "cap");
            heap.push(Open(node));
            break;
        }
        let width = |c: usize| node.u[c] - node.l[c];
        let mut pick = None;
        for c in 0..ctx.dim() {
            if pick.is_none_or(|p: usize| width(c) > width(p)) {
                pick = Some(c);
            }
        }
        let Some(c) = pick.filter(|&c| width(c) > 1e-12 * (1.0 + node.u[c].abs().max(node.l[c].abs()))) else {
            record(&mut stats, &node, "close");
            leaf_lb = leaf_lb.min(node.lb);
            continue;
        };
        stats.branched += 1;
        record(&mut stats, &node, "branch");
        let mid = 0.5 * (node.l[c] + node.u[c]);
        let mut lo = (node.l.clone(), node.u.clone());
        lo.1[c] = mid;
        let mut hi = (node.l.clone(), node.u.clone());
        hi.0[c] = mid;
        let (ea, eb) = rayon::join(
            || evaluate(&ctx, &lo.0, &lo.1, node.lb),
            || evaluate(&ctx, &hi.0, &hi.1, node.lb),
        );
        for ((l, u), e) in [(lo, ea?), (hi, eb?)] {
            let id = next_id;
            next_id += 1;
            stats.nodes += 1;
            let mut child = BnbNode {
                id,
                parent: Some(node.id),
                depth: node.depth + 1,
                l,
                u,
                lb: f64::INFINITY,
                ub: f64::INFINITY,
            };
            stats.max_depth = stats.max_depth.max(child.depth);
            match e {
                Eval::Infeasible => record(&mut stats, &child, "prune-infeasible"),
                Eval::Solved { lb, ub, failed } => {
                    stats.relax_failures += failed as usize;
                    child.lb = lb;
                    child.ub = accept(ub, &mut glb_ub, &mut incumbent);
                    if child.lb > child.ub + opts.eps + tol(child.ub) {
                        stats.pruning_ok = false;
                    }
                    if child.lb < glb_ub - opts.eps {
                        record(&mut stats, &child, "open");
                        heap.push(Open(child));
                    } else {
                        if child.lb < glb_ub - opts.eps - tol(glb_ub) {
                            stats.pruning_ok = false;
                        }
                        record(&mut stats, &child, "prune-bound");
                        leaf_lb = leaf_lb.min(child.lb);
                    }
                }
            }
        }
    }
    if let Some(v) = incumbent.as_ref().and_then(|inc| polish(&ctx.program, inc)) {
        let obj = ctx.program.objective_value(&v);
        if obj < glb_ub {
            glb_ub = obj;
            incumbent = Some(v);
        }
    }
    if glb_ub < glb_lb - opts.eps - tol(glb_lb) {
        stats.pruning_ok = false;
    }
    let open_min = heap.iter().map(|o| o.0.lb).fold(f64::INFINITY, f64::min);
    glb_lb = leaf_lb.min(open_min).max(glb_lb).min(glb_ub);
    stats.glb_lb = glb_lb;
    stats.glb_ub = glb_ub;
    stats.gap = glb_ub - glb_lb;
    let solution = match incumbent {
        Some(vals) => {
            let status = if stats.gap < opts.eps {
                SolveStatus::Optimal
            } else {
                SolveStatus::IterationLimit
            };
            SolutionPoint {
                primal_residual: ctx.program.max_violation(&vals),
                objective: glb_ub,
                values: vals[..n].to_vec(),
                status,
                dual_residual: None,
                message: format!("bnb: {} nodes, gap {:.3e}", stats.nodes, stats.gap),
            }
        }
        None if stats.hit_cap => SolutionPoint::failed(SolveStatus::IterationLimit, n, "node cap reached without incumbent"),
        None => SolutionPoint::failed(SolveStatus::Infeasible, n, "every node relaxation is infeasible"),
    };
    Ok(BnbResult { solution, stats })
}

fn infeasible_result(n: usize, why: &str) -> BnbResult {
    BnbResult {
        solution: SolutionPoint::failed(SolveStatus::Infeasible, n, why),
        stats: BnbStats {
            nodes: 0,
            branched: 0,
            max_depth: 0,
            glb_lb: f64::INFINITY,
            glb_ub: f64::INFINITY,
            gap: 0.0,
            hit_cap: false,
            relax_failures: 0,
            monotone_ok: true,
            pruning_ok: true,
            lb_history: vec![],
            trace: vec![],
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn empty() -> Mat {
        Mat::zeros(0, 0)
    }

    /// `min −x² + 2x` over `0 ≤ x ≤ 2` in epigraph form.
    fn one_d() -> MathProgram {
        let mut p = MathProgram::new();
        let x = p.add_var("x", true);
        let t = p.add_var("t", false);
        p.add_linear(vec![(x, 1.0)], Sense::Le, 2.0, "cap");
        p.add_quad(vec![x], &Mat::from_element(1, 1, -1.0), vec![(x, 2.0), (t, -1.0)], 0.0, "epi");
        p.set_objective(vec![(t, 1.0)], vec![], &empty(), 0.0);
        p
    }

    #[test]
    fn unit_box_bounds() {
        let mut p = MathProgram::new();
        let x = p.add_vars("x", 2, true);
        p.add_linear(vec![(x[0], 1.0)], Sense::Le, 1.0, "b0");
        p.add_linear(vec![(x[1], 1.0)], Sense::Le, 1.0, "b1");
        let h = Mat::from_diagonal(&Vector::from_vec(vec![-4.0, 0.0]));
        p.add_quad(x.clone(), &h, vec![], 1.0, "nc");
        p.set_objective(vec![(x[0], 1.0)], vec![], &empty(), 0.0);
        let ctx = BnbContext::new(&p).unwrap();
        assert_eq!(ctx.dim(), 1);
        assert_eq!(ctx.splits[0].neg[0].lambda, 4.0);
        let BoundBox::Bounds { l, u } = ctx.bound_box().unwrap() else { panic!() };
        assert!(l[0].abs() < 1e-7 && (u[0] - 2.0).abs() < 1e-7, "{l:?} {u:?}");
    }

    #[test]
    fn zero_polytope_bounds() {
        let mut p = one_d();
        p.add_linear(vec![(0, 1.0)], Sense::Le, 0.0, "pin");
        let BoundBox::Bounds { l, u } = BnbContext::new(&p).unwrap().bound_box().unwrap() else { panic!() };
        assert!(l[0].abs() < 1e-7 && u[0].abs() < 1e-7);
    }

    #[test]
    fn unbounded_is_refused() {
        let mut p = one_d();
        p.linear.clear();
        let err = BnbContext::new(&p).unwrap().bound_box().unwrap_err();
        assert!(err.to_string().contains("add box bounds on x"), "{err}");
    }

    #[test]
    fn infeasible_polytope_is_reported() {
        let mut p = one_d();
        p.add_linear(vec![(0, 1.0)], Sense::Ge, 3.0, "clash");
        let r = bnb_solve(&p, &BnbOptions::default()).unwrap();
        assert_eq!(r.solution.status, SolveStatus::Infeasible);
    }

    #[test]
    fn one_dimensional_matches_grid() {
        let opts = BnbOptions {
            eps: 1e-6,
            ..Default::default()
        };
        let r = bnb_solve(&one_d(), &opts).unwrap();
        let grid = (0..=10_000)
            .map(|k| {
                let x = 2.0 * k as f64 / 10_000.0;
                -x * x + 2.0 * x
            })
            .fold(f64::INFINITY, f64::min);
        assert!(r.solution.is_optimal());
        assert!((r.solution.objective - grid).abs() < 1e-6, "{} vs {grid}", r.solution.objective);
        assert!(r.stats.gap < 1e-6 && r.stats.monotone_ok && r.stats.pruning_ok);
    }

    #[test]
    fn nonconvex_objective_gets_an_epigraph() {
        let mut p = MathProgram::new();
        let x = p.add_var("x", false);
        p.add_linear(vec![(x, 1.0)], Sense::Ge, -1.0, "lo");
        p.add_linear(vec![(x, 1.0)], Sense::Le, 2.0, "hi");
        p.set_objective(vec![], vec![x], &Mat::from_element(1, 1, -1.0), 0.0);
        let r = bnb_solve(&p, &BnbOptions::default()).unwrap();
        assert_eq!(r.solution.values.len(), 1);
        assert!((r.solution.objective + 4.0).abs() < 1e-4);
        assert!((r.solution.values[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn convex_closes_at_root() {
        let mut p = MathProgram::new();
        let x = p.add_var("x", false);
        p.add_linear(vec![(x, 1.0)], Sense::Ge, 1.0, "lo");
        p.set_objective(vec![], vec![x], &Mat::identity(1, 1), 0.0);
        let r = bnb_solve(&p, &BnbOptions::default()).unwrap();
        assert_eq!(r.stats.nodes, 1);
        assert!((r.solution.objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_width_relaxation_is_exact() {
        let ctx = BnbContext::new(&one_d()).unwrap();
        for x in [0.0, 0.5, 1.5, 2.0] {
            let s = solve_convex(&SolverRequest::new(&ctx.relax(&[x], &[x]))).unwrap();
            let exact = -x * x + 2.0 * x;
            assert!((s.objective - exact).abs() < 1e-6, "x = {x}: {}", s.objective);
        }
    }

    #[test]
    fn children_partition_parent() {
        let r = bnb_solve(&one_d(), &BnbOptions { eps: 1e-6, ..Default::default() }).unwrap();
        let tr = &r.stats.trace;
        for b in tr.iter().filter(|t| t.action == "branch") {
            let kids: Vec<_> = tr
                .iter()
                .filter(|t| t.parent == Some(b.node) && t.action != "terminate" && t.action != "branch")
                .collect();
            let mut seen: Vec<&TraceRecord> = Vec::new();
            for k in &kids {
                if !seen.iter().any(|s| s.node == k.node) {
                    seen.push(k);
                }
            }
            assert_eq!(seen.len(), 2);
            let (a, c) = (seen[0], seen[1]);
            assert_eq!(a.l[0], b.l[0]);
            assert_eq!(c.u[0], b.u[0]);
            assert_eq!(a.u[0], c.l[0]);
        }
    }

    proptest! {
        #[test]
        fn secant_dominates_square(l in -50.0f64..50.0, w in 0.0f64..50.0, s in 0.0f64..1.0) {
            let u = l + w;
            let y = l + s * w;
            prop_assert!(secant(y, l, u) >= y * y - 1e-9 * (1.0 + y * y));
        }

        #[test]
        fn split_reconstructs(vals in proptest::collection::vec(-5.0f64..5.0, 9)) {
            let h = Mat::from_row_slice(3, 3, &vals);
            let h = linalg::sym_part(&h);
            let mut p = MathProgram::new();
            let x = p.add_vars("x", 3, false);
            p.add_quad(x, &h, vec![], 0.0, "q");
            let s = EigenSplit::new(0, &p.quadratic[0]);
            prop_assert!(s.residual(&p.quadratic[0].h) <= 1e-8 * (1.0 + linalg::frobenius(&h)));
            prop_assert!(s.neg.iter().all(|t| t.lambda > 0.0));
            prop_assert!(linalg::min_eigenvalue(&s.pos) >= -1e-9 * (1.0 + h.amax()));
        }
    }
}
