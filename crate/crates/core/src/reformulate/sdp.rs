//! Semidefinite counterparts for factored families `M(ξ) = A(ξ)ᵀA(ξ)` over
//! the unit ball, and for the affine VI built on them.
//!
//! Two S-lemma blocks do all the work. The epigraph block certifies
//! `t ≥ ‖A(ξ)v‖² + q(ξ)ᵀv` on `‖ξ‖ ≤ 1` with one multiplier `τ ≥ 0`; the row
//! block certifies `a + bᵀξ + ξᵀCξ ≥ 0` on the ball with two scalars.

use super::compose::{row_expr, vec_expr};
use super::{x_name, RcArtifact, Route, T_NAME};
use crate::model::{UncertainLcp, UncertaintySet};
use crate::program_ir::{validate, LinExpr, MathProgram, Sense, VarId};
use crate::{Error, Mat, Result, Vector};

/// Symmetric affine matrix `F0 + Σ vᵢFᵢ` assembled entry by entry.
struct Lmi {
    f0: Mat,
    terms: Vec<(VarId, Mat)>,
}

impl Lmi {
    fn new(dim: usize) -> Self {
        Lmi {
            f0: Mat::zeros(dim, dim),
            terms: Vec::new(),
        }
    }

    fn slot(&mut self, v: VarId) -> &mut Mat {
        let dim = self.f0.nrows();
        let k = match self.terms.iter().position(|(i, _)| *i == v) {
            Some(k) => k,
            None => {
                self.terms.push((v, Mat::zeros(dim, dim)));
                self.terms.len() - 1
            }
        };
        &mut self.terms[k].1
    }

    /// Adds `e` at `(i, j)` and `(j, i)`.
    fn put(&mut self, i: usize, j: usize, e: &LinExpr, cst: f64) {
        for (v, c) in e {
            let m = self.slot(*v);
            m[(i, j)] += c;
            if i != j {
                m[(j, i)] += c;
            }
        }
        self.f0[(i, j)] += cst;
        if i != j {
            self.f0[(j, i)] += cst;
        }
    }

    fn emit(self, prog: &mut MathProgram, label: String) {
        prog.add_psd(self.f0, self.terms, label);
    }
}

fn scaled(e: &LinExpr, s: f64) -> LinExpr {
    e.iter().map(|(i, v)| (*i, v * s)).collect()
}

/// `A·v` row `r` for a matrix acting on `v`.
fn apply_row(a: &Mat, r: usize, v: &[VarId]) -> LinExpr {
    row_expr(a, r, v)
}

/// `t ≥ ‖A(ξ)v‖² + q(ξ)ᵀv` for all `‖ξ‖₂ ≤ 1`, as the arrowhead LMI
/// `[[t − q₀ᵀv − τ, −½qᵀv, (A₀v)ᵀ], [·, τI, (Aₗv)ᵀ], [·, ·, I]] ⪰ 0`.
fn epigraph_lmi(prog: &mut MathProgram, v: &[VarId], a: &[Mat], q: &[Vector], t: VarId, tag: &str) {
    let l = a.len() - 1;
    let k = a[0].nrows();
    let tau = prog.add_var(format!("{tag}tau"), true);
    let mut m = Lmi::new(1 + l + k);
    let mut corner = vec![(t, 1.0), (tau, -1.0)];
    corner.extend(scaled(&vec_expr(&q[0], v), -1.0));
    m.put(0, 0, &corner, 0.0);
    for li in 1..=l {
        m.put(0, li, &scaled(&vec_expr(&q[li], v), -0.5), 0.0);
        m.put(li, li, &vec![(tau, 1.0)], 0.0);
    }
    for r in 0..k {
        let c = 1 + l + r;
        m.put(0, c, &apply_row(&a[0], r, v), 0.0);
        for li in 1..=l {
            m.put(li, c, &apply_row(&a[li], r, v), 0.0);
        }
        m.put(c, c, &vec![], 1.0);
    }
    m.emit(prog, format!("{tag}epigraph lmi"));
}

/// Affine expression `(coefficients, constant)`.
type Aff = (LinExpr, f64);

/// `a + bᵀξ + ξᵀCξ ≥ 0` for all `‖ξ‖₂ ≤ 1` via `y₁ ≤ 0`, `a + y₁ + y₂ ≥ 0`
/// and `[[−y₂, bᵀ/2], [b/2, C − y₁I]] ⪰ 0`.
fn ball_row_lmi(prog: &mut MathProgram, a: Aff, b: &[Aff], c: &[Vec<LinExpr>], tag: &str) {
    let l = b.len();
    let y1 = prog.add_var(format!("{tag}y1"), false);
    let y2 = prog.add_var(format!("{tag}y2"), false);
    prog.add_linear(vec![(y1, 1.0)], Sense::Le, 0.0, format!("{tag}y1 <= 0"));
    let mut lin = a.0;
    lin.push((y1, 1.0));
    lin.push((y2, 1.0));
    prog.add_linear(lin, Sense::Ge, -a.1, format!("{tag}bound"));
    let mut m = Lmi::new(1 + l);
    m.put(0, 0, &vec![(y2, -1.0)], 0.0);
    for li in 0..l {
        m.put(0, li + 1, &scaled(&b[li].0, 0.5), 0.5 * b[li].1);
        for mi in li..l {
            let mut e = c[li][mi].clone();
            if li == mi {
                e.push((y1, -1.0));
            }
            m.put(li + 1, mi + 1, &e, 0.0);
        }
    }
    m.emit(prog, format!("{tag}row lmi"));
}

/// Row `i` of `GᵀH x` as an expression in `x`.
fn gram_row(g: &Mat, h: &Mat, i: usize, x: &[VarId]) -> LinExpr {
    row_expr(&(g.transpose() * h), i, x)
}

/// Row data of `[A(ξ)ᵀA(ξ)x]ᵢ`: constant part, linear coefficients and the
/// symmetric quadratic coefficient matrix in `ξ`.
fn factored_row(a: &[Mat], i: usize, x: &[VarId]) -> (LinExpr, Vec<LinExpr>, Vec<Vec<LinExpr>>) {
    let l = a.len() - 1;
    let a0 = gram_row(&a[0], &a[0], i, x);
    let b = (1..=l)
        .map(|li| {
            let mut e = gram_row(&a[li], &a[0], i, x);
            e.extend(gram_row(&a[0], &a[li], i, x));
            crate::program_ir::merge(e)
        })
        .collect();
    let c = (1..=l)
        .map(|li| {
            (1..=l)
                .map(|mi| {
                    let mut e = gram_row(&a[li], &a[mi], i, x);
                    e.extend(gram_row(&a[mi], &a[li], i, x));
                    scaled(&crate::program_ir::merge(e), 0.5)
                })
                .collect()
        })
        .collect();
    (a0, b, c)
}

/// Cholesky-factor family over the unit ball: one epigraph LMI of size
/// `1 + L + k` and, per row, an `(L+1)`-dimensional LMI with two scalars.
pub fn rc_cholesky_sdp(problem: &UncertainLcp) -> Result<RcArtifact> {
    let UncertaintySet::CholeskyUA { a, q } = &problem.uset else {
        return Err(Error::refused(Route::Thm39.name(), "set is not a Cholesky-factor ball"));
    };
    let n = problem.n();
    let mut prog = MathProgram::new();
    let x: Vec<VarId> = (0..n).map(|i| prog.add_var(x_name(i), true)).collect();
    let t = prog.add_var(T_NAME, false);
    epigraph_lmi(&mut prog, &x, a, q, t, "");
    for i in 0..n {
        let (a0, b, c) = factored_row(a, i, &x);
        let b: Vec<Aff> = b.into_iter().enumerate().map(|(li, e)| (e, q[li + 1][i])).collect();
        ball_row_lmi(&mut prog, (a0, q[0][i]), &b, &c, &format!("row{i}."));
    }
    prog.set_objective(vec![(t, 1.0)], vec![], &Mat::zeros(0, 0), 0.0);
    debug_assert!(validate(&prog).is_empty());
    Ok(RcArtifact {
        program: prog,
        x_slot: (0..n).map(x_name).collect(),
        t_slot: Some(T_NAME.into()),
        route: Route::Thm39,
    })
}

/// Uncertain affine VI over `{x ≥ 0 : C(u)x ≥ b(u)}` with `F = S(u)ᵀS(u)x + q(u)`,
/// every factor affine in `u` and `‖u‖₂ ≤ 1`. Index 0 holds the nominal data.
#[derive(Clone, Debug)]
pub struct AviSdpData {
    pub s: Vec<Mat>,
    pub q: Vec<Vector>,
    pub c: Vec<Mat>,
    pub b: Vec<Vector>,
}

impl AviSdpData {
    fn check(&self) -> Result<(usize, usize)> {
        let cnt = self.s.len();
        if cnt == 0 || self.q.len() != cnt || self.c.len() != cnt || self.b.len() != cnt {
            return Err(Error::dim("S, q, C and b need the same number of terms"));
        }
        let n = self.s[0].ncols();
        let k = self.s[0].nrows();
        let m = self.c[0].nrows();
        for l in 0..cnt {
            if self.s[l].shape() != (k, n) || self.q[l].len() != n {
                return Err(Error::dim(format!("term {l} of S or q has wrong shape")));
            }
            if self.c[l].shape() != (m, n) || self.b[l].len() != m {
                return Err(Error::dim(format!("term {l} of C or b has wrong shape")));
            }
        }
        Ok((n, m))
    }
}

/// Robust counterpart of the affine VI written on `z = (x, λ)`.
pub fn rc_avi_sdp(data: &AviSdpData) -> Result<RcArtifact> {
    let (n, m) = data.check()?;
    let l = data.s.len() - 1;
    let mut prog = MathProgram::new();
    let x: Vec<VarId> = (0..n).map(|i| prog.add_var(x_name(i), true)).collect();
    let lam: Vec<VarId> = (0..m).map(|j| prog.add_var(format!("lambda[{j}]"), true)).collect();
    let t = prog.add_var(T_NAME, false);
    let z: Vec<VarId> = x.iter().chain(&lam).copied().collect();

    // zᵀB(u)z + zᵀd(u) = ‖S(u)x‖² + q(u)ᵀx − b(u)ᵀλ.
    let k = data.s[0].nrows();
    let a_ext: Vec<Mat> = data
        .s
        .iter()
        .map(|s| {
            let mut e = Mat::zeros(k, n + m);
            e.view_mut((0, 0), (k, n)).copy_from(s);
            e
        })
        .collect();
    let d_ext: Vec<Vector> = (0..=l)
        .map(|li| {
            let mut d = Vector::zeros(n + m);
            d.rows_mut(0, n).copy_from(&data.q[li]);
            d.rows_mut(n, m).copy_from(&(-&data.b[li]));
            d
        })
        .collect();
    epigraph_lmi(&mut prog, &z, &a_ext, &d_ext, t, "");

    // Rows of M(u)x − C(u)ᵀλ + q(u).
    let ct: Vec<Mat> = data.c.iter().map(|c| c.transpose()).collect();
    for i in 0..n {
        let (mut a0, b, c) = factored_row(&data.s, i, &x);
        a0.extend(scaled(&row_expr(&ct[0], i, &lam), -1.0));
        let b: Vec<Aff> = b
            .into_iter()
            .enumerate()
            .map(|(li, mut e)| {
                e.extend(scaled(&row_expr(&ct[li + 1], i, &lam), -1.0));
                (e, data.q[li + 1][i])
            })
            .collect();
        ball_row_lmi(&mut prog, (a0, data.q[0][i]), &b, &c, &format!("row{i}."));
    }

    // Rows of C(u)x − b(u): ‖([Cₗ]ⱼx − [bₗ]ⱼ)ₗ‖ ≤ [C₀]ⱼx − [b₀]ⱼ.
    for j in 0..m {
        let a: Vec<LinExpr> = (1..=l).map(|li| row_expr(&data.c[li], j, &x)).collect();
        let bb: Vec<f64> = (1..=l).map(|li| -data.b[li][j]).collect();
        prog.add_soc(a, bb, row_expr(&data.c[0], j, &x), -data.b[0][j], format!("polyhedron[{j}]"));
    }

    prog.set_objective(vec![(t, 1.0)], vec![], &Mat::zeros(0, 0), 0.0);
    debug_assert!(validate(&prog).is_empty());
    let mut x_slot: Vec<String> = (0..n).map(x_name).collect();
    x_slot.extend((0..m).map(|j| format!("lambda[{j}]")));
    Ok(RcArtifact {
        program: prog,
        x_slot,
        t_slot: Some(T_NAME.into()),
        route: Route::AviSdp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program_ir::to_sdpa;

    fn set_point(a: &RcArtifact, pairs: &[(&str, f64)]) -> Vec<f64> {
        let mut v = vec![0.0; a.program.num_vars()];
        for (name, val) in pairs {
            v[a.program.var(name).unwrap()] = *val;
        }
        v
    }

    #[test]
    fn no_perturbation_collapses_to_nominal() {
        let a0 = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let q0 = Vector::from_vec(vec![-1.0, 2.0]);
        let p = UncertainLcp::cholesky(vec![a0.clone()], vec![q0.clone()]).unwrap();
        let art = rc_cholesky_sdp(&p).unwrap();
        let x = Vector::from_vec(vec![1.2, 0.3]);
        let m = a0.transpose() * &a0;
        let f = &m * &x + &q0;
        let t = x.dot(&f);
        let mut pairs = vec![("x[0]", x[0]), ("x[1]", x[1]), ("t", t)];
        let names: Vec<String> = (0..2).map(|i| format!("row{i}.y2")).collect();
        for i in 0..2 {
            pairs.push((names[i].as_str(), -f[i]));
        }
        let v = set_point(&art, &pairs);
        assert!(art.program.max_violation(&v) < 1e-9, "{}", art.program.max_violation(&v));
        let mut v2 = v.clone();
        v2[art.t_id().unwrap()] = t - 1e-3;
        assert!(art.program.max_violation(&v2) > 1e-5);
    }

    #[test]
    fn origin_is_feasible_with_zero_epigraph() {
        let p = UncertainLcp::cholesky(
            vec![Mat::from_element(1, 1, 1.0), Mat::from_element(1, 1, 0.1)],
            vec![Vector::from_element(1, 1.0), Vector::zeros(1)],
        )
        .unwrap();
        let art = rc_cholesky_sdp(&p).unwrap();
        let v = vec![0.0; art.program.num_vars()];
        assert!(art.program.max_violation(&v) < 1e-12);
    }

    #[test]
    fn sdpa_block_structure() {
        let p = UncertainLcp::cholesky(
            vec![Mat::identity(2, 2), Mat::identity(2, 2) * 0.1],
            vec![Vector::from_element(2, 1.0), Vector::zeros(2)],
        )
        .unwrap();
        let art = rc_cholesky_sdp(&p).unwrap();
        let sd = to_sdpa(&art.program).unwrap();
        assert_eq!(&sd.block_sizes[..3], &[4, 2, 2]);
        assert!(sd.block_sizes[3] < 0);
    }

    #[test]
    fn row_lmi_accepts_s_lemma_certificate() {
        // 1.1 + ξ ≥ 0 on the ball, certified by y₁ = y₂ = −1/2.
        let mut p = MathProgram::new();
        ball_row_lmi(&mut p, (vec![], 1.1), &[(vec![], 1.0)], &[vec![vec![]]], "");
        let v = vec![-0.5, -0.5];
        assert!(p.max_violation(&v) < 1e-12);
        assert_eq!(p.psd[0].dim, 2);
    }

    #[cfg(feature = "sdp")]
    #[test]
    fn row_lmi_is_exact_on_the_ball() {
        use crate::solver::{solve_convex, SolverRequest};
        // Smallest a with a + ξ − ξ² ≥ 0 on [−1, 1] is 2.
        let mut p = MathProgram::new();
        let a = p.add_var("a", false);
        ball_row_lmi(&mut p, (vec![(a, 1.0)], 0.0), &[(vec![], 1.0)], &[vec![vec![]]], "");
        p.psd[0].f0[(1, 1)] -= 1.0;
        p.set_objective(vec![(a, 1.0)], vec![], &Mat::zeros(0, 0), 0.0);
        let s = solve_convex(&SolverRequest::new(&p)).unwrap();
        assert!(s.is_optimal(), "{}", s.message);
        assert!((s.objective - 2.0).abs() < 1e-5, "{}", s.objective);
    }
}
