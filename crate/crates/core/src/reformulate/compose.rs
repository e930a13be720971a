//! Counterparts over the five simple sets and their products.
//!
//! With `gₗ(x) = xᵀMₗx + qₗᵀx` and `bᵢₗ(x) = [Mₗx + qₗ]ᵢ` the robust program
//! is `min g₀(x) + σ_U(g(x))` subject to `[M₀x + q₀]ᵢ − σ_U(−bᵢ(x)) ≥ 0`.
//! Each block below writes one of these support functions with auxiliary
//! variables; rows whose `bᵢₗ` are constants get the support value as data.

use super::{require_psd_nominal, x_name, RcArtifact, Route, T_NAME};
use crate::linalg;
use crate::model::{classify, Definiteness, Shift, UncertainLcp, UncertaintySet};
use crate::program_ir::{validate, LinExpr, MathProgram, Sense, VarId};
use crate::{Error, Mat, Result};

/// How the objective support function is written.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum ObjMode {
    /// `gₗ` of arbitrary sign.
    Signed,
    /// `gₗ ≥ 0` on the whole space (`Mₗ ⪰ 0`, `qₗ = 0`): absolute values drop.
    Nonneg,
}

pub(crate) struct Builder {
    pub prog: MathProgram,
    pub x: Vec<VarId>,
    pub quad_vars: Vec<VarId>,
    pub quad: Mat,
    pub lin: LinExpr,
    pub cst: f64,
    /// Row `i` reads `rows[i] − row_sub[i] − row_const[i] ≥ 0`.
    pub rows: Vec<(LinExpr, f64)>,
    pub row_sub: Vec<LinExpr>,
    pub row_const: Vec<f64>,
}

pub(crate) fn row_expr(m: &Mat, i: usize, x: &[VarId]) -> LinExpr {
    (0..m.ncols())
        .filter(|&j| m[(i, j)] != 0.0)
        .map(|j| (x[j], m[(i, j)]))
        .collect()
}

pub(crate) fn vec_expr(q: &crate::Vector, x: &[VarId]) -> LinExpr {
    q.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, v)| (x[j], *v))
        .collect()
}

fn neg(e: &LinExpr) -> LinExpr {
    e.iter().map(|(i, v)| (*i, -v)).collect()
}

fn row_is_zero(m: &Mat, i: usize) -> bool {
    m.row(i).iter().all(|v| *v == 0.0)
}

impl Builder {
    pub fn new(problem: &UncertainLcp) -> Self {
        let fam = &problem.family;
        let n = fam.n();
        let mut prog = MathProgram::new();
        let x: Vec<VarId> = (0..n).map(|i| prog.add_var(x_name(i), true)).collect();
        let rows = (0..n)
            .map(|i| (row_expr(&fam.m0, i, &x), fam.q0[i]))
            .collect();
        Builder {
            quad_vars: x.clone(),
            quad: linalg::sym_part(&fam.m0),
            lin: vec_expr(&fam.q0, &x),
            cst: 0.0,
            rows,
            row_sub: vec![Vec::new(); n],
            row_const: vec![0.0; n],
            prog,
            x,
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn aux(&mut self, name: String, nonneg: bool) -> VarId {
        self.prog.add_var(name, nonneg)
    }

    /// `xᵀHx + cᵀv ≤ d`, written as a linear row when `H = 0`.
    pub fn quad_le(&mut self, h: &Mat, c: LinExpr, d: f64, label: String) {
        if h.amax() == 0.0 {
            self.prog.add_linear(c, Sense::Le, d, label);
        } else {
            let x = self.x.clone();
            self.prog.add_quad(x, h, c, d, label);
        }
    }

    fn has_nonconvex(&self) -> bool {
        self.prog
            .quadratic
            .iter()
            .any(|q| q.convexity == crate::program_ir::Convexity::Nonconvex)
            || classify(&self.quad) != Definiteness::Psd
    }

    pub fn finish(mut self, route: Route, force_epigraph: bool) -> RcArtifact {
        let n = self.n();
        for i in 0..n {
            let mut e = self.rows[i].0.clone();
            e.extend(neg(&self.row_sub[i]));
            let rhs = self.row_const[i] - self.rows[i].1;
            self.prog.add_linear(e, Sense::Ge, rhs, format!("row[{i}]"));
        }
        let epigraph = force_epigraph || self.has_nonconvex();
        let t_slot = if epigraph {
            let t = self.prog.add_var(T_NAME, false);
            let mut c = self.lin.clone();
            c.push((t, -1.0));
            let qv = self.quad_vars.clone();
            if self.quad.amax() == 0.0 {
                self.prog.add_linear(c, Sense::Le, -self.cst, "epigraph");
            } else {
                self.prog.add_quad(qv, &self.quad, c, -self.cst, "epigraph");
            }
            self.prog.set_objective(vec![(t, 1.0)], vec![], &Mat::zeros(0, 0), 0.0);
            Some(T_NAME.to_string())
        } else {
            let qv = self.quad_vars.clone();
            let lin = self.lin.clone();
            self.prog.set_objective(lin, qv, &self.quad, self.cst);
            None
        };
        debug_assert!(validate(&self.prog).is_empty(), "{:?}", validate(&self.prog));
        RcArtifact {
            x_slot: (0..n).map(x_name).collect(),
            t_slot,
            route,
            program: self.prog,
        }
    }
}

/// Objective and row blocks of one simple set over the given shifts.
pub(crate) fn contribute(b: &mut Builder, set: &UncertaintySet, shifts: &[Shift], mode: ObjMode, tag: &str) -> Result<()> {
    objective_block(b, set, shifts, mode, tag)?;
    row_block(b, set, shifts, tag)
}

fn objective_block(b: &mut Builder, set: &UncertaintySet, shifts: &[Shift], mode: ObjMode, tag: &str) -> Result<()> {
    use UncertaintySet as U;
    if shifts.is_empty() {
        return Ok(());
    }
    let gl = |b: &Builder, l: usize| (shifts[l].m.clone(), vec_expr(&shifts[l].q, &b.x));
    match (set, mode) {
        (U::BoxInf | U::BoxInfNonneg, ObjMode::Nonneg) => {
            for s in shifts {
                b.quad += linalg::sym_part(&s.m);
            }
        }
        (U::BoxInf, ObjMode::Signed) => {
            for l in 0..shifts.len() {
                let tau = b.aux(format!("{tag}tau[{l}]"), false);
                let (h, c) = gl(b, l);
                let mut up = c.clone();
                up.push((tau, -1.0));
                b.quad_le(&h, up, 0.0, format!("{tag}tau[{l}] >= g"));
                let mut lo = neg(&c);
                lo.push((tau, -1.0));
                b.quad_le(&(-h), lo, 0.0, format!("{tag}tau[{l}] >= -g"));
                b.lin.push((tau, 1.0));
            }
        }
        (U::BoxInfNonneg, ObjMode::Signed) => {
            for l in 0..shifts.len() {
                let tau = b.aux(format!("{tag}tau[{l}]"), true);
                let (h, mut c) = gl(b, l);
                c.push((tau, -1.0));
                b.quad_le(&h, c, 0.0, format!("{tag}tau[{l}] >= g"));
                b.lin.push((tau, 1.0));
            }
        }
        (U::BallOne | U::BallOneNonneg, _) => {
            let nonneg = matches!(set, U::BallOneNonneg);
            let s = b.aux(format!("{tag}s"), nonneg);
            for l in 0..shifts.len() {
                let (h, c) = gl(b, l);
                let mut up = c.clone();
                up.push((s, -1.0));
                b.quad_le(&h, up, 0.0, format!("{tag}s >= g[{l}]"));
                if !nonneg && mode == ObjMode::Signed {
                    let mut lo = neg(&c);
                    lo.push((s, -1.0));
                    b.quad_le(&(-h), lo, 0.0, format!("{tag}s >= -g[{l}]"));
                }
            }
            b.lin.push((s, 1.0));
        }
        (U::BallTwo, _) => {
            let s = b.aux(format!("{tag}s"), false);
            let mut cone_rows = Vec::with_capacity(shifts.len());
            for l in 0..shifts.len() {
                let (h, c) = gl(b, l);
                if h.amax() == 0.0 {
                    cone_rows.push(c);
                    continue;
                }
                let w = b.aux(format!("{tag}w[{l}]"), false);
                let mut up = c.clone();
                up.push((w, -1.0));
                b.quad_le(&h, up, 0.0, format!("{tag}w[{l}] >= g"));
                if mode == ObjMode::Signed {
                    let mut lo = neg(&c);
                    lo.push((w, 1.0));
                    b.quad_le(&(-h), lo, 0.0, format!("{tag}w[{l}] <= g"));
                }
                cone_rows.push(vec![(w, 1.0)]);
            }
            let zeros = vec![0.0; cone_rows.len()];
            b.prog.add_soc(cone_rows, zeros, vec![(s, 1.0)], 0.0, format!("{tag}norm of g"));
            b.lin.push((s, 1.0));
        }
        _ => return Err(Error::Unsupported(format!("no simple block for {}", set.kind_name()))),
    }
    Ok(())
}

fn row_block(b: &mut Builder, set: &UncertaintySet, shifts: &[Shift], tag: &str) -> Result<()> {
    use UncertaintySet as U;
    if shifts.is_empty() {
        return Ok(());
    }
    let n = b.n();
    for i in 0..n {
        let consts: Vec<bool> = shifts.iter().map(|s| row_is_zero(&s.m, i)).collect();
        let qi: Vec<f64> = shifts.iter().map(|s| s.q[i]).collect();
        let bexpr = |b: &Builder, l: usize| row_expr(&shifts[l].m, i, &b.x);
        match set {
            U::BoxInf | U::BoxInfNonneg => {
                let nonneg = matches!(set, U::BoxInfNonneg);
                for l in 0..shifts.len() {
                    if consts[l] {
                        b.row_const[i] += if nonneg { (-qi[l]).max(0.0) } else { qi[l].abs() };
                        continue;
                    }
                    let z = b.aux(format!("{tag}z[{l}][{i}]"), nonneg);
                    let e = bexpr(b, l);
                    // z ≥ −b (and z ≥ b for the symmetric box).
                    let mut lo = e.clone();
                    lo.push((z, 1.0));
                    b.prog.add_linear(lo, Sense::Ge, -qi[l], format!("{tag}z[{l}][{i}] >= -b"));
                    if !nonneg {
                        let mut up = neg(&e);
                        up.push((z, 1.0));
                        b.prog.add_linear(up, Sense::Ge, qi[l], format!("{tag}z[{l}][{i}] >= b"));
                    }
                    b.row_sub[i].push((z, 1.0));
                }
            }
            U::BallOne | U::BallOneNonneg => {
                let nonneg = matches!(set, U::BallOneNonneg);
                if consts.iter().all(|c| *c) {
                    let v = if nonneg {
                        qi.iter().fold(0.0f64, |m, q| m.max(-q))
                    } else {
                        qi.iter().fold(0.0f64, |m, q| m.max(q.abs()))
                    };
                    b.row_const[i] += v;
                    continue;
                }
                let r = b.aux(format!("{tag}z[{i}]"), nonneg);
                for l in 0..shifts.len() {
                    let e = bexpr(b, l);
                    let mut lo = e.clone();
                    lo.push((r, 1.0));
                    b.prog.add_linear(lo, Sense::Ge, -qi[l], format!("{tag}z[{i}] >= -b[{l}]"));
                    if !nonneg {
                        let mut up = neg(&e);
                        up.push((r, 1.0));
                        b.prog.add_linear(up, Sense::Ge, qi[l], format!("{tag}z[{i}] >= b[{l}]"));
                    }
                }
                b.row_sub[i].push((r, 1.0));
            }
            U::BallTwo => {
                if consts.iter().all(|c| *c) {
                    b.row_const[i] += qi.iter().map(|q| q * q).sum::<f64>().sqrt();
                    continue;
                }
                let r = b.aux(format!("{tag}r[{i}]"), false);
                let a: Vec<LinExpr> = (0..shifts.len()).map(|l| bexpr(b, l)).collect();
                b.prog.add_soc(a, qi.clone(), vec![(r, 1.0)], 0.0, format!("{tag}row norm[{i}]"));
                b.row_sub[i].push((r, 1.0));
            }
            _ => return Err(Error::Unsupported(format!("no row block for {}", set.kind_name()))),
        }
    }
    Ok(())
}

const SYMMETRIC: &str = "box_inf, ball_one or ball_two";
const NONNEG: &str = "box_inf_nonneg or ball_one_nonneg";

fn is_symmetric(set: &UncertaintySet) -> bool {
    matches!(set, UncertaintySet::BoxInf | UncertaintySet::BallOne | UncertaintySet::BallTwo)
}

fn is_nonneg(set: &UncertaintySet) -> bool {
    matches!(set, UncertaintySet::BoxInfNonneg | UncertaintySet::BallOneNonneg)
}

/// q-only uncertainty over a symmetric box or ball.
pub fn rc_q_uncertain(problem: &UncertainLcp) -> Result<RcArtifact> {
    let r = Route::Prop32;
    if !is_symmetric(&problem.uset) {
        return Err(Error::refused(r.name(), format!("set must be {SYMMETRIC}")));
    }
    if problem.family.has_m_shifts() {
        return Err(Error::Invalid(
            "wrong route: prop32 takes q-only uncertainty but the family has matrix shifts".into(),
        ));
    }
    require_psd_nominal(problem, r)?;
    let mut b = Builder::new(problem);
    contribute(&mut b, &problem.uset, &problem.family.shifts, ObjMode::Signed, "")?;
    Ok(b.finish(r, false))
}

/// PSD shifts with deterministic q over the nonnegative box or simplex.
pub fn rc_psd_shifts_nonneg(problem: &UncertainLcp) -> Result<RcArtifact> {
    let r = Route::Prop34;
    if !is_nonneg(&problem.uset) {
        return Err(Error::refused(r.name(), format!("set must be {NONNEG}")));
    }
    if problem.family.has_q_shifts() {
        return Err(Error::refused(r.name(), "q must be deterministic"));
    }
    if let Some(l) = problem.psd_flags.iter().position(|d| *d != Definiteness::Psd) {
        return Err(Error::refused(r.name(), format!("shift {} is not positive semidefinite", l + 1)));
    }
    require_psd_nominal(problem, r)?;
    let mut b = Builder::new(problem);
    contribute(&mut b, &problem.uset, &problem.family.shifts, ObjMode::Nonneg, "")?;
    Ok(b.finish(r, false))
}

/// Shifts with `u ↦ −u` folded in so that every shift is PSD. Exact for
/// sets invariant under coordinate sign flips.
fn flip_nsd(shifts: &[Shift], flags: &[Definiteness]) -> Vec<Shift> {
    shifts
        .iter()
        .zip(flags)
        .map(|(s, d)| {
            if *d == Definiteness::Nsd && classify(&s.m) != Definiteness::Psd {
                Shift {
                    m: -&s.m,
                    q: -&s.q,
                }
            } else {
                s.clone()
            }
        })
        .collect()
}

/// PSD (or NSD) shifts with deterministic q over a symmetric box or ball.
pub fn rc_hidden_convex(problem: &UncertainLcp) -> Result<RcArtifact> {
    let r = Route::Prop37;
    if !is_symmetric(&problem.uset) {
        return Err(Error::refused(r.name(), format!("set must be {SYMMETRIC}")));
    }
    if problem.family.has_q_shifts() {
        return Err(Error::refused(r.name(), "q must be deterministic"));
    }
    if let Some(l) = problem.psd_flags.iter().position(|d| *d == Definiteness::Indefinite) {
        return Err(Error::refused(r.name(), format!("shift {} is indefinite", l + 1)));
    }
    require_psd_nominal(problem, r)?;
    let shifts = flip_nsd(&problem.family.shifts, &problem.psd_flags);
    let mut b = Builder::new(problem);
    contribute(&mut b, &problem.uset, &shifts, ObjMode::Nonneg, "")?;
    Ok(b.finish(r, false))
}

/// General shifts over the five simple sets; nonconvex in general.
pub fn rc_general_nonconvex(problem: &UncertainLcp) -> Result<RcArtifact> {
    let r = Route::Prop42;
    if !is_symmetric(&problem.uset) && !is_nonneg(&problem.uset) {
        return Err(Error::refused(r.name(), format!("set must be {SYMMETRIC}, {NONNEG}")));
    }
    let mut b = Builder::new(problem);
    contribute(&mut b, &problem.uset, &problem.family.shifts, ObjMode::Signed, "")?;
    Ok(b.finish(r, true))
}

/// Product of independent factors; each factor takes its convex block when
/// its shifts allow one.
pub fn rc_product(problem: &UncertainLcp) -> Result<RcArtifact> {
    let r = Route::Composite;
    let UncertaintySet::Product(factors) = &problem.uset else {
        return Err(Error::refused(r.name(), "set is not a product"));
    };
    let mut b = Builder::new(problem);
    let mut off = 0;
    for (k, (set, d)) in factors.iter().enumerate() {
        let shifts = &problem.family.shifts[off..off + d];
        let flags = &problem.psd_flags[off..off + d];
        off += d;
        let tag = format!("f{k}.");
        let q_free = shifts.iter().all(|s| s.q.amax() == 0.0);
        match set {
            UncertaintySet::Conic { .. } => {
                super::conic::conic_block(&mut b, set, shifts, &tag, r)?;
            }
            s if is_nonneg(s) => {
                let psd = flags.iter().all(|f| *f == Definiteness::Psd);
                let mode = if q_free && psd { ObjMode::Nonneg } else { ObjMode::Signed };
                contribute(&mut b, set, shifts, mode, &tag)?;
            }
            s if is_symmetric(s) => {
                let signed_ok = flags.iter().all(|f| *f != Definiteness::Indefinite);
                if q_free && signed_ok {
                    let flipped = flip_nsd(shifts, flags);
                    contribute(&mut b, set, &flipped, ObjMode::Nonneg, &tag)?;
                } else {
                    contribute(&mut b, set, shifts, ObjMode::Signed, &tag)?;
                }
            }
            other => {
                return Err(Error::Unsupported(format!(
                    "product factor of kind {} is not supported",
                    other.kind_name()
                )))
            }
        }
    }
    Ok(b.finish(r, false))
}
