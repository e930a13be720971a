//! Counterparts over conic-representable sets `{u : ∃ν, Pu + Qν + p ∈ K}`.
//!
//! The support function is replaced by its conic dual
//! `σ_U(g) = min { pᵀy : Pᵀy + g = 0, Qᵀy = 0, y ∈ K* }`, which is exact
//! when `U` has a strictly feasible point (or `K` is polyhedral and `U` is
//! nonempty).

use super::compose::{row_expr, vec_expr, Builder};
use super::{require_psd_nominal, RcArtifact, Route};
use crate::model::{cone_margin, ConeBlock, UncertainLcp, UncertaintySet};
use crate::program_ir::{LinExpr, MathProgram, Sense, VarId};
use crate::solver::{solve_convex, SolverRequest};
use crate::{Error, Mat, Result, Vector};

/// Interior margin below which a second-order set counts as degenerate.
pub const SLATER_MIN: f64 = 1e-7;

struct ConicData<'a> {
    p_mat: &'a Mat,
    q_mat: &'a Mat,
    p_vec: &'a Vector,
    cone: &'a [ConeBlock],
}

fn unpack(set: &UncertaintySet) -> Option<(ConicData<'_>, Option<&(Vector, Vector)>)> {
    match set {
        UncertaintySet::Conic {
            p_mat,
            q_mat,
            p_vec,
            cone,
            interior,
        } => Some((
            ConicData {
                p_mat,
                q_mat,
                p_vec,
                cone,
            },
            interior.as_ref(),
        )),
        _ => None,
    }
}

/// Largest `s ≤ 1` with `Pu + Qν + p − s·e ∈ K`, where `e` is the all-ones
/// vector on orthant blocks and `(1, 0, …, 0)` on second-order blocks.
/// Returns `(s, u, ν)`; `s > 0` certifies a strictly feasible point.
pub fn find_interior(set: &UncertaintySet) -> Result<(f64, Vector, Vector)> {
    let (d, _) = unpack(set).ok_or_else(|| Error::Invalid("find_interior needs a conic set".into()))?;
    let mut p = MathProgram::new();
    let lu = d.p_mat.ncols();
    let ln = d.q_mat.ncols();
    let u = p.add_vars("u", lu, false);
    let nu = p.add_vars("nu", ln, false);
    let s = p.add_var("s", false);
    let row = |r: usize| -> LinExpr {
        let mut e = row_expr(d.p_mat, r, &u);
        e.extend(row_expr(d.q_mat, r, &nu));
        e
    };
    let mut off = 0;
    for (bk, b) in d.cone.iter().enumerate() {
        match b {
            ConeBlock::Orthant(k) => {
                for r in off..off + k {
                    let mut e = row(r);
                    e.push((s, -1.0));
                    p.add_linear(e, Sense::Ge, -d.p_vec[r], format!("orthant[{r}]"));
                }
            }
            ConeBlock::Soc(k) => {
                let tail: Vec<LinExpr> = (off + 1..off + k).map(row).collect();
                let tb: Vec<f64> = (off + 1..off + k).map(|r| d.p_vec[r]).collect();
                let mut head = row(off);
                head.push((s, -1.0));
                p.add_soc(tail, tb, head, d.p_vec[off], format!("soc[{bk}]"));
            }
        }
        off += b.dim();
    }
    p.add_linear(vec![(s, 1.0)], Sense::Le, 1.0, "cap");
    p.set_objective(vec![(s, -1.0)], vec![], &Mat::zeros(0, 0), 0.0);
    let sol = solve_convex(&SolverRequest::new(&p))?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("interior search ended with {:?}: {}", sol.status, sol.message)));
    }
    Ok((
        sol.values[s],
        Vector::from_iterator(lu, u.iter().map(|&i| sol.values[i])),
        Vector::from_iterator(ln, nu.iter().map(|&i| sol.values[i])),
    ))
}

fn check_regular(set: &UncertaintySet, route: Route) -> Result<()> {
    let (d, cert) = unpack(set).expect("conic set");
    let has_soc = d.cone.iter().any(|b| matches!(b, ConeBlock::Soc(_)));
    if let Some((u, nu)) = cert {
        let v = d.p_mat * u + d.q_mat * nu + d.p_vec;
        if cone_margin(d.cone, v.as_slice()) > 0.0 {
            return Ok(());
        }
    }
    let (s, _, _) = find_interior(set)?;
    if has_soc && s <= SLATER_MIN {
        return Err(Error::refused(
            route.name(),
            format!("conic set has no strictly feasible point (margin {s:.2e})"),
        ));
    }
    if s < -SLATER_MIN {
        return Err(Error::refused(route.name(), "conic set is empty"));
    }
    Ok(())
}

/// Variables of one `y ∈ K*` block (the cones are self-dual).
fn dual_vars(b: &mut Builder, d: &ConicData, name: &str) -> Vec<VarId> {
    let mut ys = Vec::new();
    let mut off = 0;
    for (bk, blk) in d.cone.iter().enumerate() {
        match blk {
            ConeBlock::Orthant(k) => {
                for r in off..off + k {
                    ys.push(b.aux(format!("{name}[{r}]"), true));
                }
            }
            ConeBlock::Soc(k) => {
                let ids: Vec<VarId> = (off..off + k).map(|r| b.aux(format!("{name}[{r}]"), false)).collect();
                let tail: Vec<LinExpr> = ids[1..].iter().map(|&i| vec![(i, 1.0)]).collect();
                let zeros = vec![0.0; tail.len()];
                b.prog.add_soc(tail, zeros, vec![(ids[0], 1.0)], 0.0, format!("{name} cone[{bk}]"));
                ys.extend(ids);
            }
        }
        off += blk.dim();
    }
    ys
}

/// `(Mᵀy)_col` for the columns of a k×c matrix.
fn transpose_expr(m: &Mat, col: usize, y: &[VarId]) -> LinExpr {
    (0..m.nrows())
        .filter(|&r| m[(r, col)] != 0.0)
        .map(|r| (y[r], m[(r, col)]))
        .collect()
}

pub(crate) fn conic_block(
    b: &mut Builder,
    set: &UncertaintySet,
    shifts: &[crate::model::Shift],
    tag: &str,
    route: Route,
) -> Result<()> {
    check_regular(set, route)?;
    let (d, _) = unpack(set).expect("conic set");
    let n = b.n();
    let pexpr = |ids: &[VarId]| -> LinExpr {
        ids.iter()
            .zip(d.p_vec.iter())
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (*i, *v))
            .collect()
    };
    let q_free = |b: &mut Builder, ids: &[VarId], who: &str| {
        for c in 0..d.q_mat.ncols() {
            let e = transpose_expr(d.q_mat, c, ids);
            b.prog.add_linear(e, Sense::Eq, 0.0, format!("{who} Q'[{c}]"));
        }
    };

    // Objective: pᵀy with Pᵀy + g(x) = 0.
    let y = dual_vars(b, &d, &format!("{tag}y"));
    for (l, s) in shifts.iter().enumerate() {
        let mut e = transpose_expr(d.p_mat, l, &y);
        e.extend(vec_expr(&s.q, &b.x));
        if s.m.amax() == 0.0 {
            b.prog.add_linear(e, Sense::Eq, 0.0, format!("{tag}dual obj[{l}]"));
        } else {
            let neg: LinExpr = e.iter().map(|(i, v)| (*i, -v)).collect();
            b.quad_le(&s.m, e, 0.0, format!("{tag}dual obj[{l}] <= 0"));
            b.quad_le(&(-&s.m), neg, 0.0, format!("{tag}dual obj[{l}] >= 0"));
        }
    }
    q_free(b, &y, &format!("{tag}y"));
    b.lin.extend(pexpr(&y));

    // Row i: σ(−bᵢ) = min pᵀz, Pᵀz = bᵢ(x), Qᵀz = 0.
    for i in 0..n {
        let z = dual_vars(b, &d, &format!("{tag}z{i}"));
        for (l, s) in shifts.iter().enumerate() {
            let mut e = transpose_expr(d.p_mat, l, &z);
            e.extend(row_expr(&s.m, i, &b.x).into_iter().map(|(j, v)| (j, -v)));
            b.prog.add_linear(e, Sense::Eq, s.q[i], format!("{tag}dual row[{i}][{l}]"));
        }
        q_free(b, &z, &format!("{tag}z{i}"));
        let pe = pexpr(&z);
        b.row_sub[i].extend(pe);
    }
    Ok(())
}

/// q-only uncertainty over a conic set; convex when `M0 ⪰ 0`.
pub fn rc_q_conic(problem: &UncertainLcp) -> Result<RcArtifact> {
    let r = Route::Prop33;
    if unpack(&problem.uset).is_none() {
        return Err(Error::refused(r.name(), "set is not conic"));
    }
    if problem.family.has_m_shifts() {
        return Err(Error::Invalid(
            "wrong route: prop33 takes q-only uncertainty but the family has matrix shifts".into(),
        ));
    }
    require_psd_nominal(problem, r)?;
    let mut b = Builder::new(problem);
    conic_block(&mut b, &problem.uset, &problem.family.shifts, "", r)?;
    Ok(b.finish(r, false))
}

/// General shifts over a conic set.
pub fn rc_conic_general(problem: &UncertainLcp) -> Result<RcArtifact> {
    let r = Route::Cor43;
    if unpack(&problem.uset).is_none() {
        return Err(Error::refused(r.name(), "set is not conic"));
    }
    let mut b = Builder::new(problem);
    conic_block(&mut b, &problem.uset, &problem.family.shifts, "", r)?;
    Ok(b.finish(r, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AffineFamily, Shift};

    /// `[−1, 1]` as the orthant set `{u : 1 − u ≥ 0, 1 + u ≥ 0}`.
    fn interval() -> UncertaintySet {
        UncertaintySet::Conic {
            p_mat: Mat::from_row_slice(2, 1, &[-1.0, 1.0]),
            q_mat: Mat::zeros(2, 0),
            p_vec: Vector::from_vec(vec![1.0, 1.0]),
            cone: vec![ConeBlock::Orthant(2)],
            interior: None,
        }
    }

    /// Unit disk as a second-order block.
    fn disk() -> UncertaintySet {
        UncertaintySet::Conic {
            p_mat: Mat::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]),
            q_mat: Mat::zeros(3, 0),
            p_vec: Vector::from_vec(vec![1.0, 0.0, 0.0]),
            cone: vec![ConeBlock::Soc(3)],
            interior: None,
        }
    }

    #[test]
    fn interior_margins() {
        let (s, _, _) = find_interior(&disk()).unwrap();
        assert!((s - 1.0).abs() < 1e-6);
        let flat = UncertaintySet::Conic {
            p_mat: Mat::from_row_slice(2, 1, &[0.0, 1.0]),
            q_mat: Mat::zeros(2, 0),
            p_vec: Vector::from_vec(vec![0.0, 0.0]),
            cone: vec![ConeBlock::Soc(2)],
            interior: None,
        };
        let (s, _, _) = find_interior(&flat).unwrap();
        assert!(s.abs() < 1e-6);
    }

    #[test]
    fn degenerate_soc_set_refused() {
        let flat = UncertaintySet::Conic {
            p_mat: Mat::from_row_slice(2, 1, &[0.0, 1.0]),
            q_mat: Mat::zeros(2, 0),
            p_vec: Vector::from_vec(vec![0.0, 0.0]),
            cone: vec![ConeBlock::Soc(2)],
            interior: None,
        };
        let fam = AffineFamily::new(
            Mat::identity(1, 1),
            Vector::from_vec(vec![1.0]),
            vec![Shift { m: Mat::zeros(1, 1), q: Vector::from_vec(vec![1.0]) }],
        )
        .unwrap();
        let p = UncertainLcp::new(fam, flat).unwrap();
        assert!(matches!(rc_q_conic(&p), Err(Error::RouteRefused { .. })));
    }

    #[test]
    fn conic_interval_matches_box() {
        // q(u) = (−1 + u/2, 1), M = I: the worst row needs x₀ ≥ 1.5.
        let fam = AffineFamily::new(
            Mat::identity(2, 2),
            Vector::from_vec(vec![-1.0, 1.0]),
            vec![Shift { m: Mat::zeros(2, 2), q: Vector::from_vec(vec![0.5, 0.0]) }],
        )
        .unwrap();
        let pc = UncertainLcp::new(fam.clone(), interval()).unwrap();
        let pb = UncertainLcp::new(fam, UncertaintySet::BoxInf).unwrap();
        let ac = rc_q_conic(&pc).unwrap();
        let ab = super::super::rc_q_uncertain(&pb).unwrap();
        let sc = solve_convex(&SolverRequest::new(&ac.program)).unwrap();
        let sb = solve_convex(&SolverRequest::new(&ab.program)).unwrap();
        assert!(sc.is_optimal() && sb.is_optimal());
        assert!((sc.objective - sb.objective).abs() < 1e-6, "{} vs {}", sc.objective, sb.objective);
        // Gap x₀² − x₀ + x₀/2 at x₀ = 1.5.
        assert!((sb.objective - 1.5).abs() < 1e-6, "{}", sb.objective);
    }

    #[test]
    fn disk_support_is_norm() {
        let fam = AffineFamily::new(
            Mat::identity(1, 1),
            Vector::from_vec(vec![2.0]),
            vec![
                Shift { m: Mat::zeros(1, 1), q: Vector::from_vec(vec![0.6]) },
                Shift { m: Mat::zeros(1, 1), q: Vector::from_vec(vec![0.8]) },
            ],
        )
        .unwrap();
        let p = UncertainLcp::new(fam, disk()).unwrap();
        let a = rc_q_conic(&p).unwrap();
        // Fix x = 1 and read the objective: 1 + 2 + ‖(0.6, 0.8)‖ = 4.
        let mut prog = a.program.clone();
        prog.add_linear(vec![(a.x_ids()[0], 1.0)], Sense::Eq, 1.0, "fix");
        let s = solve_convex(&SolverRequest::new(&prog)).unwrap();
        assert!((s.objective - 4.0).abs() < 1e-6, "{}", s.objective);
    }
}
