//! Exact worst-case evaluation of a fixed point.
//!
//! For the affine families the gap and every row are affine in `u`, so their
//! extrema are support-function values: closed form on the simple sets, a
//! small conic solve on conic sets, a scan on scenario lists. The factored
//! family is quadratic in `ξ` and needs a trust-region subproblem per row.

use crate::linalg;
use crate::model::{cone_margin, row_tolerance, ConeBlock, ExtReal, UncertainLcp, UncertaintySet};
use crate::program_ir::{MathProgram, Sense};
use crate::solver::{solve_convex, SolverRequest};
use crate::{Error, Mat, Result, Vector};

/// Worst case of the gap at a point.
#[derive(Clone, Debug)]
pub struct WorstCase {
    /// `max_u xᵀ(M(u)x + q(u))`.
    pub objective: f64,
    /// `minᵢ min_u [M(u)x + q(u)]ᵢ`.
    pub min_row: f64,
    /// `objective` when every row is nonnegative at its worst `u`, else `+∞`.
    pub gap: ExtReal,
    /// Maximizer of the objective.
    pub worst_u: Vector,
    /// Minimizer of each row.
    pub row_u: Vec<Vector>,
}

/// `max { gᵀu : u ∈ U }` and a maximizer.
pub fn support_value(set: &UncertaintySet, g: &[f64]) -> Result<(f64, Vector)> {
    let gv = Vector::from_column_slice(g);
    match set {
        UncertaintySet::FiniteScenarios(list) => {
            let mut best: Option<(f64, &Vector)> = None;
            for u in list {
                let v = gv.dot(u);
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, u));
                }
            }
            let (v, u) = best.ok_or_else(|| Error::Invalid("empty scenario list".into()))?;
            Ok((v, u.clone()))
        }
        UncertaintySet::CholeskyUA { .. } => {
            let u = UncertaintySet::BallTwo.support_point(g).expect("closed form");
            Ok((gv.dot(&u), u))
        }
        UncertaintySet::Conic {
            p_mat,
            q_mat,
            p_vec,
            cone,
            ..
        } => conic_support(p_mat, q_mat, p_vec, cone, g),
        UncertaintySet::Product(factors) => {
            let mut u = Vector::zeros(g.len());
            let mut total = 0.0;
            let mut off = 0;
            for (s, d) in factors {
                let (v, part) = support_value(s, &g[off..off + d])?;
                total += v;
                u.rows_mut(off, *d).copy_from(&part);
                off += d;
            }
            Ok((total, u))
        }
        simple => {
            let u = simple.support_point(g).expect("closed form for simple sets");
            Ok((gv.dot(&u), u))
        }
    }
}

fn conic_support(p_mat: &Mat, q_mat: &Mat, p_vec: &Vector, cone: &[ConeBlock], g: &[f64]) -> Result<(f64, Vector)> {
    let mut prog = MathProgram::new();
    let l = p_mat.ncols();
    let u = prog.add_vars("u", l, false);
    let nu = prog.add_vars("nu", q_mat.ncols(), false);
    let row = |r: usize| -> Vec<(usize, f64)> {
        let mut e: Vec<(usize, f64)> = (0..l).map(|j| (u[j], p_mat[(r, j)])).collect();
        e.extend((0..nu.len()).map(|j| (nu[j], q_mat[(r, j)])));
        e.retain(|(_, v)| *v != 0.0);
        e
    };
    let mut off = 0;
    for (bk, b) in cone.iter().enumerate() {
        match b {
            ConeBlock::Orthant(k) => {
                for r in off..off + k {
                    prog.add_linear(row(r), Sense::Ge, -p_vec[r], format!("orthant[{r}]"));
                }
            }
            ConeBlock::Soc(k) => {
                let tail = (off + 1..off + k).map(row).collect();
                let tb = (off + 1..off + k).map(|r| p_vec[r]).collect();
                prog.add_soc(tail, tb, row(off), p_vec[off], format!("soc[{bk}]"));
            }
        }
        off += b.dim();
    }
    let obj = u.iter().zip(g).map(|(&i, gi)| (i, -gi)).collect();
    prog.set_objective(obj, vec![], &Mat::zeros(0, 0), 0.0);
    let sol = solve_convex(&SolverRequest::new(&prog))?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!(
            "support function over the conic set ended with {:?}",
            sol.status
        )));
    }
    let uv = Vector::from_iterator(l, u.iter().map(|&i| sol.values[i]));
    debug_assert!(cone_margin(cone, (p_mat * &uv + p_vec).as_slice()) > -1e-6 || q_mat.ncols() > 0);
    Ok((-sol.objective, uv))
}

/// `min { ξᵀHξ + gᵀξ : ‖ξ‖₂ ≤ 1 }` by eigendecomposition and bisection on
/// the multiplier, including the hard case.
pub fn trust_region_min(h: &Mat, g: &Vector) -> (f64, Vector) {
    let l = g.len();
    if l == 0 {
        return (0.0, Vector::zeros(0));
    }
    let (lam, v) = linalg::sym_eigen(h);
    let gam = v.transpose() * g * 0.5;
    let scale = 1.0 + lam.amax();
    let lmin = lam[0];
    let eval = |xi: &Vector| (xi.transpose() * linalg::sym_part(h) * xi)[(0, 0)] + g.dot(xi);
    let coords = |mu: f64| -> Vector { Vector::from_iterator(l, (0..l).map(|i| -gam[i] / (lam[i] + mu))) };
    let norm2 = |mu: f64| -> f64 {
        (0..l)
            .map(|i| {
                let d = lam[i] + mu;
                if d <= 0.0 {
                    if gam[i] == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (gam[i] / d).powi(2)
                }
            })
            .sum()
    };
    if lmin > 1e-12 * scale && norm2(0.0) <= 1.0 {
        let xi = &v * coords(0.0);
        return (eval(&xi), xi);
    }
    let lo = (-lmin).max(0.0);
    let degenerate: Vec<usize> = (0..l).filter(|&i| lam[i] + lo <= 1e-12 * scale).collect();
    let gnorm = g.norm();
    let tiny = 1e-14 * (1.0 + gnorm);
    if degenerate.iter().all(|&i| gam[i].abs() <= tiny) {
        let mut y = Vector::zeros(l);
        let mut n2 = 0.0;
        for i in 0..l {
            if !degenerate.contains(&i) {
                y[i] = -gam[i] / (lam[i] + lo);
                n2 += y[i] * y[i];
            }
        }
        if n2 <= 1.0 {
            if let Some(&j) = degenerate.first() {
                y[j] = (1.0 - n2).sqrt();
            }
            let xi = &v * y;
            return (eval(&xi), xi);
        }
    }
    let mut a = lo;
    let mut b = lo + gnorm + 1.0;
    while norm2(b) > 1.0 {
        b = lo + 2.0 * (b - lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if norm2(mid) > 1.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let mut y = coords(b);
    let ny = y.norm();
    if ny > 1.0 {
        y /= ny;
    }
    let xi = &v * y;
    (eval(&xi), xi)
}

/// Worst-case objective and rows at `x`.
pub fn worst_case(problem: &UncertainLcp, x: &[f64]) -> Result<WorstCase> {
    let n = problem.n();
    if x.len() != n {
        return Err(Error::dim("point dimension differs from problem dimension"));
    }
    let xv = Vector::from_column_slice(x);
    if let UncertaintySet::CholeskyUA { a, q } = &problem.uset {
        return Ok(cholesky_worst(problem, a, q, &xv));
    }
    let fam = &problem.family;
    let f0 = &fam.m0 * &xv + &fam.q0;
    let g: Vec<f64> = fam.shifts.iter().map(|s| xv.dot(&(&s.m * &xv + &s.q))).collect();
    let (sig, worst_u) = support_value(&problem.uset, &g)?;
    let objective = xv.dot(&f0) + sig;
    let mut min_row = f64::INFINITY;
    let mut feasible = true;
    let mut row_u = Vec::with_capacity(n);
    let bs: Vec<Vector> = fam.shifts.iter().map(|s| &s.m * &xv + &s.q).collect();
    for i in 0..n {
        let neg_b: Vec<f64> = bs.iter().map(|b| -b[i]).collect();
        let (s, u) = support_value(&problem.uset, &neg_b)?;
        let val = f0[i] - s;
        let (m, qv) = problem.scenario(u.as_slice())?;
        if val < -row_tolerance(&m, &qv, x, i) {
            feasible = false;
        }
        min_row = min_row.min(val);
        row_u.push(u);
    }
    Ok(WorstCase {
        objective,
        min_row,
        gap: if feasible { ExtReal::Finite(objective) } else { ExtReal::PosInf },
        worst_u,
        row_u,
    })
}

fn cholesky_worst(problem: &UncertainLcp, a: &[Mat], q: &[Vector], x: &Vector) -> WorstCase {
    let l = a.len() - 1;
    let n = x.len();
    let c0 = &a[0] * x;
    let k = c0.len();
    let mut gmat = Mat::zeros(k, l);
    for li in 0..l {
        gmat.set_column(li, &(&a[li + 1] * x));
    }
    // ‖c₀ + Gξ‖² + q(ξ)ᵀx is maximized as the minimum of its negative.
    let lin = Vector::from_iterator(l, (0..l).map(|li| 2.0 * gmat.column(li).dot(&c0) + q[li + 1].dot(x)));
    let (v, worst_u) = trust_region_min(&(-(gmat.transpose() * &gmat)), &(-&lin));
    let objective = c0.dot(&c0) + q[0].dot(x) - v;
    let mut min_row = f64::INFINITY;
    let mut feasible = true;
    let mut row_u = Vec::with_capacity(n);
    let prods: Vec<Vec<Vector>> = (0..=l)
        .map(|p| (0..=l).map(|r| a[p].transpose() * (&a[r] * x)).collect())
        .collect();
    for i in 0..n {
        let a0 = prods[0][0][i] + q[0][i];
        let b = Vector::from_iterator(l, (1..=l).map(|li| prods[li][0][i] + prods[0][li][i] + q[li][i]));
        let c = Mat::from_fn(l, l, |r, s| 0.5 * (prods[r + 1][s + 1][i] + prods[s + 1][r + 1][i]));
        let (m, u) = trust_region_min(&c, &b);
        let val = a0 + m;
        let (mm, qq) = problem.scenario(u.as_slice()).expect("ξ has the right length");
        if val < -row_tolerance(&mm, &qq, x.as_slice(), i) {
            feasible = false;
        }
        min_row = min_row.min(val);
        row_u.push(u);
    }
    WorstCase {
        objective,
        min_row,
        gap: if feasible { ExtReal::Finite(objective) } else { ExtReal::PosInf },
        worst_u,
        row_u,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AffineFamily, Shift};

    #[test]
    fn trs_interior_and_boundary() {
        let (v, xi) = trust_region_min(&Mat::identity(2, 2), &Vector::from_vec(vec![1.0, 0.0]));
        assert!((v + 0.25).abs() < 1e-12 && (xi[0] + 0.5).abs() < 1e-12);
        let (v, xi) = trust_region_min(&Mat::identity(1, 1), &Vector::from_vec(vec![-4.0]));
        assert!((v + 3.0).abs() < 1e-10 && (xi[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn trs_hard_case() {
        // −ξ₁² + ξ₂² with no linear term: minimum −1 at ξ = ±e₁.
        let h = Mat::from_diagonal(&Vector::from_vec(vec![-1.0, 1.0]));
        let (v, xi) = trust_region_min(&h, &Vector::zeros(2));
        assert!((v + 1.0).abs() < 1e-12 && (xi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trs_matches_grid() {
        let h = Mat::from_row_slice(2, 2, &[0.3, -1.2, -1.2, 0.5]);
        let g = Vector::from_vec(vec![0.7, -0.2]);
        let (v, _) = trust_region_min(&h, &g);
        let mut best = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let p = Vector::from_vec(vec![-1.0 + i as f64 / 200.0, -1.0 + j as f64 / 200.0]);
                if p.norm() <= 1.0 {
                    best = best.min((p.transpose() * &h * &p)[(0, 0)] + g.dot(&p));
                }
            }
        }
        assert!(v <= best + 1e-12 && best - v < 1e-3, "{v} vs {best}");
    }

    #[test]
    fn box_worst_case_matches_vertices() {
        let fam = AffineFamily::new(
            Mat::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]),
            Vector::from_vec(vec![-1.0, 0.5]),
            vec![
                Shift { m: Mat::from_row_slice(2, 2, &[0.1, 0.0, 0.3, -0.2]), q: Vector::from_vec(vec![0.2, 0.0]) },
                Shift { m: Mat::zeros(2, 2), q: Vector::from_vec(vec![0.0, -0.1]) },
            ],
        )
        .unwrap();
        let p = UncertainLcp::new(fam, UncertaintySet::BoxInf).unwrap();
        let x = [0.8, 0.4];
        let w = worst_case(&p, &x).unwrap();
        let mut obj = f64::NEG_INFINITY;
        let mut row = f64::INFINITY;
        for u in UncertaintySet::BoxInf.vertices(2).unwrap() {
            let (m, q) = p.scenario(u.as_slice()).unwrap();
            let f = m * Vector::from_column_slice(&x) + q;
            obj = obj.max(x[0] * f[0] + x[1] * f[1]);
            row = row.min(f.min());
        }
        assert!((w.objective - obj).abs() < 1e-12);
        assert!((w.min_row - row).abs() < 1e-12);
    }

    #[test]
    fn cholesky_worst_matches_samples() {
        let p = UncertainLcp::cholesky(
            vec![Mat::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]), Mat::from_row_slice(2, 2, &[0.3, 0.0, 0.1, -0.2])],
            vec![Vector::from_vec(vec![0.5, -0.3]), Vector::from_vec(vec![0.1, 0.2])],
        )
        .unwrap();
        let x = [0.6, 0.9];
        let w = worst_case(&p, &x).unwrap();
        let mut obj = f64::NEG_INFINITY;
        let mut row = f64::INFINITY;
        for k in 0..=2000 {
            let xi = -1.0 + k as f64 / 1000.0;
            let (m, q) = p.scenario(&[xi]).unwrap();
            let f = m * Vector::from_column_slice(&x) + q;
            obj = obj.max(x[0] * f[0] + x[1] * f[1]);
            row = row.min(f.min());
        }
        assert!(w.objective >= obj - 1e-12 && w.objective - obj < 1e-5);
        assert!(w.min_row <= row + 1e-12 && row - w.min_row < 1e-5);
    }
}
