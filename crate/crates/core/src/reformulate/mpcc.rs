//! Robust MPCC: the uncertain lower-level LCP in `y` (with constant term
//! `Ax + q`) is replaced by its convex counterpart, and that counterpart by
//! its KKT system. The result is a deterministic MPCC whose complementarity
//! pairs are listed separately; nothing here solves it.

use super::compose::rc_hidden_convex;
use crate::model::{Definiteness, UncertainLcp, UncertaintySet};
use crate::program_ir::{LinExpr, MathProgram, Sense, VarId};
use crate::{Error, Mat, Result, Vector};
use std::collections::BTreeMap;

/// Deterministic upper level on `w = (x, y)`: `f(w) = wᵀQw + cᵀw` and
/// `h(w) = Hw + h₀ ≥ 0`.
#[derive(Clone, Debug)]
pub struct UpperLevel {
    pub nx: usize,
    pub f_quad: Mat,
    pub f_lin: Vector,
    pub h_mat: Mat,
    pub h_vec: Vector,
}

/// A constraint of [`MpccProgram::upper`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintRef {
    Linear(usize),
    Quadratic(usize),
    Soc(usize),
    /// The bound `v ≥ 0` of a variable.
    Bound(VarId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairCone {
    /// `μ ≥ 0 ⊥ slack ≥ 0`.
    Nonneg,
    /// `(μ₀, μ̄) ∈ SOC ⊥ (cᵀv + d, Av + b) ∈ SOC`.
    Soc,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplementarityPair {
    pub multipliers: Vec<VarId>,
    pub constraint: ConstraintRef,
    pub cone: PairCone,
}

#[derive(Clone, Debug)]
pub struct MpccProgram {
    /// Upper objective and constraints, lower primal constraints, stationarity
    /// and multiplier cones; complementarity is kept out.
    pub upper: MathProgram,
    pub complementarity: Vec<ComplementarityPair>,
    /// Lower-level primal constraints inside `upper`.
    pub lower: Vec<ConstraintRef>,
    pub x_slot: Vec<String>,
    pub y_slot: Vec<String>,
}

/// Bilinear and linear terms of one stationarity coordinate.
#[derive(Default)]
struct Stationarity {
    lin: BTreeMap<VarId, f64>,
    bil: BTreeMap<(VarId, VarId), f64>,
}

impl Stationarity {
    fn add(&mut self, v: VarId, c: f64) {
        *self.lin.entry(v).or_default() += c;
    }

    fn add_bil(&mut self, a: VarId, b: VarId, c: f64) {
        let key = if a <= b { (a, b) } else { (b, a) };
        *self.bil.entry(key).or_default() += c;
    }

    fn emit(self, prog: &mut MathProgram, constant: f64, label: String) {
        let lin: LinExpr = self.lin.into_iter().filter(|(_, c)| *c != 0.0).collect();
        let bil: Vec<((VarId, VarId), f64)> = self.bil.into_iter().filter(|(_, c)| *c != 0.0).collect();
        if bil.is_empty() {
            prog.add_linear(lin, Sense::Eq, -constant, label);
            return;
        }
        let mut vars: Vec<VarId> = bil.iter().flat_map(|((a, b), _)| [*a, *b]).collect();
        vars.sort_unstable();
        vars.dedup();
        let pos = |v: VarId| vars.iter().position(|w| *w == v).unwrap();
        let mut h = Mat::zeros(vars.len(), vars.len());
        for ((a, b), c) in &bil {
            let (i, j) = (pos(*a), pos(*b));
            if i == j {
                h[(i, i)] += c;
            } else {
                h[(i, j)] += 0.5 * c;
                h[(j, i)] += 0.5 * c;
            }
        }
        let neg: LinExpr = lin.iter().map(|(v, c)| (*v, -c)).collect();
        prog.add_quad(vars.clone(), &h, lin, -constant, format!("{label} <= 0"));
        prog.add_quad(vars, &(-h), neg, constant, format!("{label} >= 0"));
    }
}

/// Robust MPCC with lower level `0 ≤ y ⊥ Ax + M(u)y + q ≥ 0`, `M(u)` PSD
/// for every shift and `U` one of the symmetric box and balls.
pub fn mpcc_reformulate(upper: &UpperLevel, a: &Mat, lower: &UncertainLcp) -> Result<MpccProgram> {
    let ny = lower.n();
    let nx = upper.nx;
    let nw = nx + ny;
    if a.shape() != (ny, nx) {
        return Err(Error::dim(format!("A must be {ny}x{nx}")));
    }
    if upper.f_quad.shape() != (nw, nw) || upper.f_lin.len() != nw || upper.h_mat.ncols() != nw {
        return Err(Error::dim("upper-level data does not match (x, y)"));
    }
    if upper.h_mat.nrows() != upper.h_vec.len() {
        return Err(Error::dim("h rows differ from h constant"));
    }
    if !matches!(lower.uset, UncertaintySet::BoxInf | UncertaintySet::BallOne | UncertaintySet::BallTwo) {
        return Err(Error::refused("mpcc", "lower-level set must be box_inf, ball_one or ball_two"));
    }
    if lower.psd_flags.iter().chain([&lower.nominal_flag]).any(|d| *d != Definiteness::Psd) {
        return Err(Error::refused("mpcc", "lower-level matrices must be positive semidefinite"));
    }
    let rc = rc_hidden_convex(lower)?;
    let low = &rc.program;

    let mut prog = MathProgram::new();
    let x: Vec<VarId> = (0..nx).map(|j| prog.add_var(format!("x[{j}]"), false)).collect();
    let off = nx;
    for v in &low.variables {
        prog.add_var(format!("y.{}", v.name), v.nonneg);
    }
    let map = |v: VarId| v + off;
    let mapl = |e: &LinExpr| -> LinExpr { e.iter().map(|(v, c)| (map(*v), *c)).collect() };
    let y: Vec<VarId> = rc.x_ids().into_iter().map(map).collect();
    let w: Vec<VarId> = x.iter().chain(&y).copied().collect();

    // Upper objective and constraints.
    let f_lin: LinExpr = w.iter().zip(upper.f_lin.iter()).filter(|(_, c)| **c != 0.0).map(|(v, c)| (*v, *c)).collect();
    prog.set_objective(f_lin, w.clone(), &upper.f_quad, 0.0);
    for r in 0..upper.h_mat.nrows() {
        let e: LinExpr = (0..nw).filter(|&j| upper.h_mat[(r, j)] != 0.0).map(|j| (w[j], upper.h_mat[(r, j)])).collect();
        prog.add_linear(e, Sense::Ge, -upper.h_vec[r], format!("h[{r}]"));
    }

    // Lower primal constraints, with Ax added to every feasibility row.
    let mut lower_refs = Vec::new();
    for c in &low.linear {
        let mut coeffs = mapl(&c.coeffs);
        let mut param = Vec::new();
        if let Some(i) = c.label.strip_prefix("row[").and_then(|s| s.strip_suffix(']')).and_then(|s| s.parse::<usize>().ok()) {
            for j in 0..nx {
                if a[(i, j)] != 0.0 {
                    param.push((x[j], a[(i, j)]));
                }
            }
        }
        coeffs.extend(param);
        lower_refs.push(ConstraintRef::Linear(prog.linear.len()));
        prog.add_linear(coeffs, c.sense, c.rhs, format!("lower {}", c.label));
    }
    for q in &low.quadratic {
        lower_refs.push(ConstraintRef::Quadratic(prog.quadratic.len()));
        prog.add_quad(q.vars.iter().map(|v| map(*v)).collect(), &q.h, mapl(&q.c), q.d, format!("lower {}", q.label));
    }
    for s in &low.soc {
        lower_refs.push(ConstraintRef::Soc(prog.soc.len()));
        prog.add_soc(s.a.iter().map(&mapl).collect(), s.b.clone(), mapl(&s.c), s.d, format!("lower {}", s.label));
    }
    if !low.psd.is_empty() {
        return Err(Error::Unsupported("semidefinite lower levels".into()));
    }

    // Stationarity of the lower Lagrangian in the lower variables.
    let nl = low.num_vars();
    let mut stat: Vec<Stationarity> = (0..nl).map(|_| Stationarity::default()).collect();
    let mut constant = vec![0.0; nl];
    let obj = &low.objective;
    for (v, c) in &obj.linear {
        constant[*v] += c;
    }
    for (a_i, &vi) in obj.quad_vars.iter().enumerate() {
        for (b_i, &vj) in obj.quad_vars.iter().enumerate() {
            let h = obj.quad[(a_i, b_i)];
            if h != 0.0 {
                stat[vi].add(map(vj), 2.0 * h);
            }
        }
    }
    // Parametric objective term yᵀAx.
    for (i, &yi) in rc.x_ids().iter().enumerate() {
        for j in 0..nx {
            if a[(i, j)] != 0.0 {
                stat[yi].add(x[j], a[(i, j)]);
            }
        }
    }
    let mut pairs = Vec::new();
    for (k, c) in low.linear.iter().enumerate() {
        let mu = match c.sense {
            Sense::Eq => prog.add_var(format!("lam.lin[{k}]"), false),
            _ => prog.add_var(format!("mu.lin[{k}]"), true),
        };
        let sign = match c.sense {
            Sense::Ge => -1.0,
            Sense::Le | Sense::Eq => 1.0,
        };
        for (v, coef) in &c.coeffs {
            stat[*v].add(mu, sign * coef);
        }
        if c.sense != Sense::Eq {
            pairs.push(ComplementarityPair {
                multipliers: vec![mu],
                constraint: lower_refs[k],
                cone: PairCone::Nonneg,
            });
        }
    }
    let nlin = low.linear.len();
    for (k, q) in low.quadratic.iter().enumerate() {
        let mu = prog.add_var(format!("mu.quad[{k}]"), true);
        for (ai, &vi) in q.vars.iter().enumerate() {
            for (bi, &vj) in q.vars.iter().enumerate() {
                let h = q.h[(ai, bi)];
                if h != 0.0 {
                    stat[vi].add_bil(mu, map(vj), 2.0 * h);
                }
            }
        }
        for (v, coef) in &q.c {
            stat[*v].add(mu, *coef);
        }
        pairs.push(ComplementarityPair {
            multipliers: vec![mu],
            constraint: lower_refs[nlin + k],
            cone: PairCone::Nonneg,
        });
    }
    let nquad = low.quadratic.len();
    for (k, s) in low.soc.iter().enumerate() {
        let mu0 = prog.add_var(format!("mu.soc[{k}][0]"), false);
        let bar: Vec<VarId> = (0..s.a.len()).map(|r| prog.add_var(format!("mu.soc[{k}][{}]", r + 1), false)).collect();
        prog.add_soc(bar.iter().map(|&b| vec![(b, 1.0)]).collect(), vec![0.0; bar.len()], vec![(mu0, 1.0)], 0.0, format!("dual cone[{k}]"));
        for (v, coef) in &s.c {
            stat[*v].add(mu0, -coef);
        }
        for (r, row) in s.a.iter().enumerate() {
            for (v, coef) in row {
                stat[*v].add(bar[r], -coef);
            }
        }
        let mut m = vec![mu0];
        m.extend(bar);
        pairs.push(ComplementarityPair {
            multipliers: m,
            constraint: lower_refs[nlin + nquad + k],
            cone: PairCone::Soc,
        });
    }
    for (k, v) in low.variables.iter().enumerate() {
        if v.nonneg {
            let nu = prog.add_var(format!("nu.bound[{k}]"), true);
            stat[k].add(nu, -1.0);
            pairs.push(ComplementarityPair {
                multipliers: vec![nu],
                constraint: ConstraintRef::Bound(map(k)),
                cone: PairCone::Nonneg,
            });
        }
    }
    for (k, s) in stat.into_iter().enumerate() {
        s.emit(&mut prog, constant[k], format!("stationarity[{}]", low.variables[k].name));
    }
    Ok(MpccProgram {
        upper: prog,
        complementarity: pairs,
        lower: lower_refs,
        x_slot: (0..nx).map(|j| format!("x[{j}]")).collect(),
        y_slot: rc.x_slot.iter().map(|n| format!("y.{n}")).collect(),
    })
}

impl MpccProgram {
    /// Largest violation of the lower-level primal constraints at `v`.
    pub fn lower_violation(&self, v: &[f64]) -> f64 {
        self.lower
            .iter()
            .map(|r| match r {
                ConstraintRef::Linear(i) => self.upper.linear[*i].violation(v),
                ConstraintRef::Quadratic(i) => self.upper.quadratic[*i].violation(v),
                ConstraintRef::Soc(i) => self.upper.soc[*i].violation(v),
                ConstraintRef::Bound(i) => -v[*i],
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sᵀμ` summed over the nonnegative pairs and the cone pairs at `v`.
    pub fn complementarity_residual(&self, v: &[f64]) -> f64 {
        let lin = |e: &LinExpr| -> f64 { e.iter().map(|(i, c)| c * v[*i]).sum() };
        self.complementarity
            .iter()
            .map(|p| {
                let slack: Vec<f64> = match p.constraint {
                    ConstraintRef::Linear(i) => {
                        let c = &self.upper.linear[i];
                        vec![match c.sense {
                            Sense::Ge => lin(&c.coeffs) - c.rhs,
                            _ => c.rhs - lin(&c.coeffs),
                        }]
                    }
                    ConstraintRef::Quadratic(i) => vec![-self.upper.quadratic[i].violation(v)],
                    ConstraintRef::Soc(i) => {
                        let s = &self.upper.soc[i];
                        let mut out = vec![lin(&s.c) + s.d];
                        out.extend(s.a.iter().zip(&s.b).map(|(row, b)| lin(row) + b));
                        out
                    }
                    ConstraintRef::Bound(i) => vec![v[i]],
                };
                p.multipliers.iter().zip(&slack).map(|(m, s)| v[*m] * s).sum::<f64>().abs()
            })
            .sum()
    }
}
