//! Uncertain-LCP data model, scenario evaluation and residual metrics.
//!
//! An uncertain LCP is a family `M(u) = M0 + Σ uₗ Mₗ`, `q(u) = q0 + Σ uₗ qₗ`
//! together with an uncertainty set for `u`. The worst-case gap over the set
//! is the merit function minimized by every robust counterpart.

use crate::linalg;
use crate::{Error, Mat, Result, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

/// Absolute feasibility tolerance of the gap function's `+∞` branch.
pub const FEAS_TOL: f64 = 1e-8;
/// Eigenvalue tolerance for PSD classification of symmetrized shifts.
pub const PSD_TOL: f64 = 1e-9;
/// Largest shift count for which box vertices are enumerated.
pub const MAX_VERTEX_DIM: usize = 16;
/// Default number of uniform samples for continuous sets.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// A real number or `+∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    pub fn max(self, other: ExtReal) -> ExtReal {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Finite value or `f64::INFINITY`, for arithmetic comparisons.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::PosInf, ExtReal::PosInf) => Some(Ordering::Equal),
            (ExtReal::PosInf, _) => Some(Ordering::Greater),
            (_, ExtReal::PosInf) => Some(Ordering::Less),
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "Inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::PosInf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(ExtReal::Finite)
                .ok_or_else(|| serde::de::Error::custom("bad number")),
            serde_json::Value::String(s) if s == "inf" => Ok(ExtReal::PosInf),
            _ => Err(serde::de::Error::custom("expected number or \"inf\"")),
        }
    }
}

/// One perturbation direction `(Mₗ, qₗ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Shift {
    pub m: Mat,
    pub q: Vector,
}

/// Affine family `M(u) = M0 + Σ uₗ Mₗ`, `q(u) = q0 + Σ uₗ qₗ`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineFamily {
    pub m0: Mat,
    pub q0: Vector,
    pub shifts: Vec<Shift>,
}

impl AffineFamily {
    pub fn new(m0: Mat, q0: Vector, shifts: Vec<Shift>) -> Result<Self> {
        let n = q0.len();
        if m0.nrows() != n || m0.ncols() != n {
            return Err(Error::dim(format!(
                "M0 is {}x{}, expected {n}x{n}",
                m0.nrows(),
                m0.ncols()
            )));
        }
        for (l, s) in shifts.iter().enumerate() {
            if s.m.nrows() != n || s.m.ncols() != n || s.q.len() != n {
                return Err(Error::dim(format!("shift {} has wrong dimensions", l + 1)));
            }
        }
        Ok(AffineFamily { m0, q0, shifts })
    }

    /// Family without perturbations.
    pub fn nominal(m0: Mat, q0: Vector) -> Result<Self> {
        Self::new(m0, q0, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.q0.len()
    }

    pub fn l(&self) -> usize {
        self.shifts.len()
    }

    fn check_u(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.l() {
            return Err(Error::dim(format!(
                "u has length {}, family has {} shifts",
                u.len(),
                self.l()
            )));
        }
        Ok(())
    }

    pub fn matrix_at(&self, u: &[f64]) -> Result<Mat> {
        self.check_u(u)?;
        let mut m = self.m0.clone();
        for (ul, s) in u.iter().zip(&self.shifts) {
            if *ul != 0.0 {
                m += &s.m * *ul;
            }
        }
        Ok(m)
    }

    pub fn vector_at(&self, u: &[f64]) -> Result<Vector> {
        self.check_u(u)?;
        let mut q = self.q0.clone();
        for (ul, s) in u.iter().zip(&self.shifts) {
            if *ul != 0.0 {
                q += &s.q * *ul;
            }
        }
        Ok(q)
    }

    /// Multiply every matrix and vector by `alpha`.
    pub fn scaled(&self, alpha: f64) -> AffineFamily {
        AffineFamily {
            m0: &self.m0 * alpha,
            q0: &self.q0 * alpha,
            shifts: self
                .shifts
                .iter()
                .map(|s| Shift {
                    m: &s.m * alpha,
                    q: &s.q * alpha,
                })
                .collect(),
        }
    }

    /// Change of units `x = D x'`, `w = κ D⁻¹ w'`: every matrix becomes
    /// `DMD/κ` and every vector `Dq/κ`, so gaps divide by `κ`.
    pub fn rescaled(&self, d: &Vector, kappa: f64) -> Result<AffineFamily> {
        if d.len() != self.n() {
            return Err(Error::dim("scaling vector must have length n"));
        }
        if !(kappa > 0.0) || d.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Invalid("scaling factors must be positive".into()));
        }
        let mm = |m: &Mat| Mat::from_fn(m.nrows(), m.ncols(), |i, j| d[i] * m[(i, j)] * d[j] / kappa);
        let vv = |q: &Vector| q.component_mul(d) / kappa;
        Ok(AffineFamily {
            m0: mm(&self.m0),
            q0: vv(&self.q0),
            shifts: self
                .shifts
                .iter()
                .map(|s| Shift { m: mm(&s.m), q: vv(&s.q) })
                .collect(),
        })
    }

    pub fn has_m_shifts(&self) -> bool {
        self.shifts.iter().any(|s| s.m.amax() != 0.0)
    }

    pub fn has_q_shifts(&self) -> bool {
        self.shifts.iter().any(|s| s.q.amax() != 0.0)
    }
}

/// `M(u)x + q(u)`.
pub fn eval_map(family: &AffineFamily, x: &[f64], u: &[f64]) -> Result<Vector> {
    if x.len() != family.n() {
        return Err(Error::dim(format!(
            "x has length {}, family dimension is {}",
            x.len(),
            family.n()
        )));
    }
    let m = family.matrix_at(u)?;
    let q = family.vector_at(u)?;
    Ok(m * Vector::from_column_slice(x) + q)
}

/// Gap function `xᵀ(M(u)x+q(u))` if the map is feasible, `+∞` otherwise.
pub fn gap_value(family: &AffineFamily, x: &[f64], u: &[f64]) -> Result<ExtReal> {
    check_nonneg(x)?;
    let f = eval_map(family, x, u)?;
    let m = family.matrix_at(u)?;
    let q = family.vector_at(u)?;
    Ok(gap_from_map(&m, &q, x, &f))
}

/// Gap of a single scenario given explicit data.
pub fn gap_at(m: &Mat, q: &Vector, x: &[f64]) -> Result<ExtReal> {
    check_nonneg(x)?;
    if m.nrows() != x.len() || q.len() != x.len() {
        return Err(Error::dim("scenario data does not match x"));
    }
    let f = m * Vector::from_column_slice(x) + q;
    Ok(gap_from_map(m, q, x, &f))
}

fn check_nonneg(x: &[f64]) -> Result<()> {
    let scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(i) = x.iter().position(|v| *v < -PSD_TOL * scale || v.is_nan()) {
        return Err(Error::Invalid(format!(
            "gap function requires x >= 0; x[{i}] = {}",
            x[i]
        )));
    }
    Ok(())
}

/// Row-wise tolerance: `FEAS_TOL · max(1, Σ|M_ij x_j| + |q_i|)`.
pub fn row_tolerance(m: &Mat, q: &Vector, x: &[f64], i: usize) -> f64 {
    let mut s = q[i].abs();
    for (j, xj) in x.iter().enumerate() {
        s += (m[(i, j)] * xj).abs();
    }
    FEAS_TOL * s.max(1.0)
}

fn gap_from_map(m: &Mat, q: &Vector, x: &[f64], f: &Vector) -> ExtReal {
    for i in 0..f.len() {
        if f[i] < -row_tolerance(m, q, x, i) {
            return ExtReal::PosInf;
        }
    }
    ExtReal::Finite(x.iter().zip(f.iter()).map(|(a, b)| a * b).sum())
}

/// Family with symmetrized quadratic parts, keeping the original for rows.
#[derive(Clone, Debug)]
pub struct Symmetrized {
    /// Every `Mₗ` replaced by `(Mₗ+Mₗᵀ)/2`; use for quadratic forms only.
    pub quadratic: AffineFamily,
    /// The unmodified family; use for the linear feasibility rows.
    pub original: AffineFamily,
}

pub fn symmetrize(family: &AffineFamily) -> Symmetrized {
    let quadratic = AffineFamily {
        m0: linalg::sym_part(&family.m0),
        q0: family.q0.clone(),
        shifts: family
            .shifts
            .iter()
            .map(|s| Shift {
                m: linalg::sym_part(&s.m),
                q: s.q.clone(),
            })
            .collect(),
    };
    Symmetrized {
        quadratic,
        original: family.clone(),
    }
}

/// One block of a product cone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "dim", rename_all = "snake_case")]
pub enum ConeBlock {
    /// Nonnegative orthant of the given dimension.
    Orthant(usize),
    /// Second-order cone `{(s, v): ‖v‖₂ ≤ s}` of the given total dimension.
    Soc(usize),
}

impl ConeBlock {
    pub fn dim(&self) -> usize {
        match self {
            ConeBlock::Orthant(d) | ConeBlock::Soc(d) => *d,
        }
    }
}

/// Signed distance of `v` to the boundary of the product cone (positive inside).
pub fn cone_margin(cone: &[ConeBlock], v: &[f64]) -> f64 {
    let mut off = 0;
    let mut margin = f64::INFINITY;
    for b in cone {
        let d = b.dim();
        let s = &v[off..off + d];
        let m = match b {
            ConeBlock::Orthant(_) => s.iter().cloned().fold(f64::INFINITY, f64::min),
            ConeBlock::Soc(_) => {
                let tail: f64 = s[1..].iter().map(|a| a * a).sum::<f64>().sqrt();
                (s[0] - tail) / std::f64::consts::SQRT_2
            }
        };
        margin = margin.min(m);
        off += d;
    }
    margin
}

/// Uncertainty sets for the perturbation vector `u`.
#[derive(Clone, Debug, PartialEq)]
pub enum UncertaintySet {
    /// `‖u‖∞ ≤ 1`.
    BoxInf,
    /// `‖u‖₁ ≤ 1`.
    BallOne,
    /// `‖u‖₂ ≤ 1`.
    BallTwo,
    /// `‖u‖∞ ≤ 1, u ≥ 0`.
    BoxInfNonneg,
    /// `‖u‖₁ ≤ 1, u ≥ 0`.
    BallOneNonneg,
    /// `{u : ∃ν, P u + Q ν + p ∈ K}`.
    Conic {
        p_mat: Mat,
        q_mat: Mat,
        p_vec: Vector,
        cone: Vec<ConeBlock>,
        /// Optional strict-interior certificate `(ū, ν̄)`.
        interior: Option<(Vector, Vector)>,
    },
    /// `M = AᵀA`, `A = A0 + Σ ξₗ Aₗ`, `q = q0 + Σ ξₗ qₗ`, `‖ξ‖₂ ≤ 1`.
    CholeskyUA { a: Vec<Mat>, q: Vec<Vector> },
    /// Explicit list of scenarios.
    FiniteScenarios(Vec<Vector>),
    /// Independent sets over consecutive groups of shifts: `(set, group size)`.
    Product(Vec<(UncertaintySet, usize)>),
}

impl UncertaintySet {
    pub fn kind_name(&self) -> &'static str {
        match self {
            UncertaintySet::BoxInf => "box_inf",
            UncertaintySet::BallOne => "ball_one",
            UncertaintySet::BallTwo => "ball_two",
            UncertaintySet::BoxInfNonneg => "box_inf_nonneg",
            UncertaintySet::BallOneNonneg => "ball_one_nonneg",
            UncertaintySet::Conic { .. } => "conic",
            UncertaintySet::CholeskyUA { .. } => "cholesky_ua",
            UncertaintySet::FiniteScenarios(_) => "finite_scenarios",
            UncertaintySet::Product(_) => "product",
        }
    }

    /// Fixed `u` dimension implied by the set data, if any.
    pub fn implied_dim(&self) -> Option<usize> {
        match self {
            UncertaintySet::Conic { p_mat, .. } => Some(p_mat.ncols()),
            UncertaintySet::CholeskyUA { a, .. } => Some(a.len().saturating_sub(1)),
            UncertaintySet::FiniteScenarios(s) => s.first().map(|v| v.len()),
            UncertaintySet::Product(f) => Some(f.iter().map(|(_, d)| d).sum()),
            _ => None,
        }
    }

    /// Membership test (up to `tol`). `None` when undecidable without a solve.
    pub fn contains(&self, u: &[f64], tol: f64) -> Option<bool> {
        let n1: f64 = u.iter().map(|v| v.abs()).sum();
        let n2: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ninf = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let nonneg = u.iter().all(|v| *v >= -tol);
        match self {
            UncertaintySet::BoxInf => Some(ninf <= 1.0 + tol),
            UncertaintySet::BallOne => Some(n1 <= 1.0 + tol),
            UncertaintySet::BallTwo | UncertaintySet::CholeskyUA { .. } => Some(n2 <= 1.0 + tol),
            UncertaintySet::BoxInfNonneg => Some(nonneg && ninf <= 1.0 + tol),
            UncertaintySet::BallOneNonneg => Some(nonneg && n1 <= 1.0 + tol),
            UncertaintySet::FiniteScenarios(list) => Some(list.iter().any(|s| {
                s.len() == u.len() && s.iter().zip(u).all(|(a, b)| (a - b).abs() <= tol)
            })),
            UncertaintySet::Conic {
                p_mat,
                q_mat,
                p_vec,
                cone,
                ..
            } => {
                if q_mat.ncols() > 0 {
                    return None;
                }
                let v = p_mat * Vector::from_column_slice(u) + p_vec;
                Some(cone_margin(cone, v.as_slice()) >= -tol)
            }
            UncertaintySet::Product(factors) => {
                let mut off = 0;
                let mut all = true;
                for (s, d) in factors {
                    match s.contains(&u[off..off + d], tol) {
                        Some(b) => all &= b,
                        None => return None,
                    }
                    off += d;
                }
                Some(all)
            }
        }
    }

    /// Vertex list for polytopic sets of dimension `l` (`None` otherwise).
    pub fn vertices(&self, l: usize) -> Option<Vec<Vector>> {
        match self {
            UncertaintySet::BoxInf | UncertaintySet::BoxInfNonneg => {
                if l > MAX_VERTEX_DIM {
                    return None;
                }
                let lo = if matches!(self, UncertaintySet::BoxInf) {
                    -1.0
                } else {
                    0.0
                };
                Some(
                    (0..(1usize << l))
                        .map(|mask| {
                            Vector::from_iterator(
                                l,
                                (0..l).map(|k| if mask >> k & 1 == 1 { 1.0 } else { lo }),
                            )
                        })
                        .collect(),
                )
            }
            UncertaintySet::BallOne => {
                let mut v = Vec::with_capacity(2 * l);
                for k in 0..l {
                    for s in [1.0, -1.0] {
                        let mut e = Vector::zeros(l);
                        e[k] = s;
                        v.push(e);
                    }
                }
                if l == 0 {
                    v.push(Vector::zeros(0));
                }
                Some(v)
            }
            UncertaintySet::BallOneNonneg => {
                let mut v = vec![Vector::zeros(l)];
                for k in 0..l {
                    let mut e = Vector::zeros(l);
                    e[k] = 1.0;
                    v.push(e);
                }
                Some(v)
            }
            UncertaintySet::FiniteScenarios(list) => Some(list.clone()),
            UncertaintySet::Product(factors) => {
                let mut acc: Vec<Vector> = vec![Vector::zeros(0)];
                for (s, d) in factors {
                    let vs = s.vertices(*d)?;
                    if acc.len() * vs.len() > 100_000 {
                        return None;
                    }
                    let mut next = Vec::with_capacity(acc.len() * vs.len());
                    for a in &acc {
                        for v in &vs {
                            let mut w = Vector::zeros(a.len() + v.len());
                            w.rows_mut(0, a.len()).copy_from(a);
                            w.rows_mut(a.len(), v.len()).copy_from(v);
                            next.push(w);
                        }
                    }
                    acc = next;
                }
                Some(acc)
            }
            _ => None,
        }
    }

    /// `count` seeded uniform samples of dimension `l`; per-sample streams make
    /// the result independent of the degree of parallelism.
    pub fn sample(&self, l: usize, count: usize, seed: u64) -> Result<Vec<Vector>> {
        match self {
            UncertaintySet::FiniteScenarios(list) => Ok(list.clone()),
            UncertaintySet::Conic { .. } => Err(Error::Unsupported(
                "uniform sampling of a conic set needs explicit probe points".into(),
            )),
            _ => Ok((0..count)
                .into_par_iter()
                .map(|k| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(k as u64);
                    self.sample_one(l, &mut rng)
                })
                .collect()),
        }
    }

    fn sample_one(&self, l: usize, rng: &mut ChaCha8Rng) -> Vector {
        match self {
            UncertaintySet::BoxInf => Vector::from_iterator(l, (0..l).map(|_| rng.random_range(-1.0..=1.0))),
            UncertaintySet::BoxInfNonneg => {
                Vector::from_iterator(l, (0..l).map(|_| rng.random_range(0.0..=1.0)))
            }
            UncertaintySet::BallOne | UncertaintySet::BallOneNonneg => {
                // Uniform on the simplex {Σ ≤ 1} via normalized exponentials.
                let e: Vec<f64> = (0..=l).map(|_| Exp1.sample(rng)).collect();
                let tot: f64 = e.iter().sum();
                let signed = matches!(self, UncertaintySet::BallOne);
                Vector::from_iterator(
                    l,
                    (0..l).map(|k| {
                        let s = if signed && rng.random_bool(0.5) { -1.0 } else { 1.0 };
                        s * e[k] / tot
                    }),
                )
            }
            UncertaintySet::BallTwo | UncertaintySet::CholeskyUA { .. } => {
                let g: Vec<f64> = (0..l).map(|_| StandardNormal.sample(rng)).collect();
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                let r: f64 = rng.random::<f64>().powf(1.0 / l.max(1) as f64);
                Vector::from_iterator(l, g.iter().map(|v| v / norm * r))
            }
            UncertaintySet::Product(factors) => {
                let mut out = Vector::zeros(l);
                let mut off = 0;
                for (s, d) in factors {
                    let part = s.sample_one(*d, rng);
                    out.rows_mut(off, *d).copy_from(&part);
                    off += d;
                }
                out
            }
            UncertaintySet::FiniteScenarios(list) => list[rng.random_range(0..list.len())].clone(),
            UncertaintySet::Conic { .. } => unreachable!("handled in sample"),
        }
    }

    /// Maximizer of `gᵀu` over the set, for sets with a closed form.
    pub fn support_point(&self, g: &[f64]) -> Option<Vector> {
        let l = g.len();
        match self {
            UncertaintySet::BoxInf => Some(Vector::from_iterator(
                l,
                g.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }),
            )),
            UncertaintySet::BoxInfNonneg => Some(Vector::from_iterator(
                l,
                g.iter().map(|v| if *v > 0.0 { 1.0 } else { 0.0 }),
            )),
            UncertaintySet::BallOne | UncertaintySet::BallOneNonneg => {
                let nonneg = matches!(self, UncertaintySet::BallOneNonneg);
                let mut u = Vector::zeros(l);
                let mut best: Option<(usize, f64)> = None;
                for (k, v) in g.iter().enumerate() {
                    let val = if nonneg { *v } else { v.abs() };
                    if best.is_none_or(|(_, b)| val > b) {
                        best = Some((k, val));
                    }
                }
                if let Some((k, val)) = best {
                    if val > 0.0 {
                        u[k] = if nonneg || g[k] >= 0.0 { 1.0 } else { -1.0 };
                    }
                }
                Some(u)
            }
            UncertaintySet::BallTwo => {
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    Some(Vector::zeros(l))
                } else {
                    Some(Vector::from_iterator(l, g.iter().map(|v| v / norm)))
                }
            }
            UncertaintySet::Product(factors) => {
                let mut u = Vector::zeros(l);
                let mut off = 0;
                for (s, d) in factors {
                    let part = s.support_point(&g[off..off + d])?;
                    u.rows_mut(off, *d).copy_from(&part);
                    off += d;
                }
                Some(u)
            }
            _ => None,
        }
    }
}

/// Spectral class of a symmetrized matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Definiteness {
    Psd,
    Nsd,
    Indefinite,
}

pub fn classify(m: &Mat) -> Definiteness {
    let tol = linalg::psd_tol(m, PSD_TOL);
    let lo = linalg::min_eigenvalue(m);
    if lo >= -tol {
        return Definiteness::Psd;
    }
    if linalg::max_eigenvalue(m) <= tol {
        Definiteness::Nsd
    } else {
        Definiteness::Indefinite
    }
}

/// An uncertain LCP: family, set, and spectral flags of the shifts.
#[derive(Clone, Debug)]
pub struct UncertainLcp {
    pub family: AffineFamily,
    pub uset: UncertaintySet,
    /// Classification of the symmetrized nominal matrix.
    pub nominal_flag: Definiteness,
    /// Classification of each symmetrized shift.
    pub psd_flags: Vec<Definiteness>,
}

impl UncertainLcp {
    pub fn new(family: AffineFamily, uset: UncertaintySet) -> Result<Self> {
        if let UncertaintySet::CholeskyUA { .. } = uset {
            return Err(Error::Invalid(
                "use UncertainLcp::cholesky for Cholesky-factor sets".into(),
            ));
        }
        if let Some(d) = uset.implied_dim() {
            if d != family.l() {
                return Err(Error::dim(format!(
                    "uncertainty set has dimension {d}, family has {} shifts",
                    family.l()
                )));
            }
        }
        match &uset {
            UncertaintySet::FiniteScenarios(list) => {
                if list.is_empty() {
                    return Err(Error::Invalid("empty scenario list".into()));
                }
                if list.iter().any(|s| s.len() != family.l()) {
                    return Err(Error::dim("scenario length differs from shift count"));
                }
            }
            UncertaintySet::Conic {
                p_mat,
                q_mat,
                p_vec,
                cone,
                interior,
            } => {
                let k: usize = cone.iter().map(|b| b.dim()).sum();
                if p_mat.nrows() != k || q_mat.nrows() != k || p_vec.len() != k {
                    return Err(Error::dim("conic set rows do not match the cone dimension"));
                }
                if cone.iter().any(|b| matches!(b, ConeBlock::Soc(0))) {
                    return Err(Error::Invalid("second-order cone of dimension 0".into()));
                }
                if let Some((u, nu)) = interior {
                    if u.len() != p_mat.ncols() || nu.len() != q_mat.ncols() {
                        return Err(Error::dim("interior certificate has wrong dimensions"));
                    }
                }
            }
            UncertaintySet::Product(factors) => {
                for (s, _) in factors {
                    if matches!(
                        s,
                        UncertaintySet::Product(_)
                            | UncertaintySet::CholeskyUA { .. }
                            | UncertaintySet::FiniteScenarios(_)
                    ) {
                        return Err(Error::Invalid(format!(
                            "{} cannot be a product factor",
                            s.kind_name()
                        )));
                    }
                }
            }
            _ => {}
        }
        let sym = symmetrize(&family);
        let nominal_flag = classify(&sym.quadratic.m0);
        let psd_flags = sym.quadratic.shifts.iter().map(|s| classify(&s.m)).collect();
        Ok(UncertainLcp {
            family,
            uset,
            nominal_flag,
            psd_flags,
        })
    }

    /// Cholesky-factor set: `M(ξ) = A(ξ)ᵀA(ξ)`. The stored family holds the
    /// nominal `A0ᵀA0` and the part of `M(ξ)` that is linear in `ξ`.
    pub fn cholesky(a: Vec<Mat>, q: Vec<Vector>) -> Result<Self> {
        if a.is_empty() || a.len() != q.len() {
            return Err(Error::dim("Cholesky set needs A0..AL and q0..qL of equal count"));
        }
        let n = a[0].ncols();
        let k = a[0].nrows();
        if a.iter().any(|m| m.ncols() != n || m.nrows() != k) || q.iter().any(|v| v.len() != n) {
            return Err(Error::dim("Cholesky factors must share one shape"));
        }
        let m0 = a[0].transpose() * &a[0];
        let shifts = (1..a.len())
            .map(|l| Shift {
                m: a[l].transpose() * &a[0] + a[0].transpose() * &a[l],
                q: q[l].clone(),
            })
            .collect();
        let family = AffineFamily::new(m0, q[0].clone(), shifts)?;
        let l = a.len() - 1;
        Ok(UncertainLcp {
            family,
            uset: UncertaintySet::CholeskyUA { a, q },
            nominal_flag: Definiteness::Psd,
            psd_flags: vec![Definiteness::Psd; l],
        })
    }

    /// Same problem in the units of [`AffineFamily::rescaled`].
    pub fn rescaled(&self, d: &Vector, kappa: f64) -> Result<UncertainLcp> {
        let family = self.family.rescaled(d, kappa)?;
        match &self.uset {
            UncertaintySet::CholeskyUA { a, q } => {
                let dm = Mat::from_diagonal(d) / kappa.sqrt();
                let a = a.iter().map(|m| m * &dm).collect();
                let q = q.iter().map(|v| v.component_mul(d) / kappa).collect();
                UncertainLcp::cholesky(a, q)
            }
            other => UncertainLcp::new(family, other.clone()),
        }
    }

    pub fn n(&self) -> usize {
        self.family.n()
    }

    pub fn l(&self) -> usize {
        self.family.l()
    }

    /// Exact scenario data `(M(u), q(u))`.
    pub fn scenario(&self, u: &[f64]) -> Result<(Mat, Vector)> {
        if let UncertaintySet::CholeskyUA { a, q } = &self.uset {
            if u.len() + 1 != a.len() {
                return Err(Error::dim("ξ has wrong length"));
            }
            let mut am = a[0].clone();
            let mut qv = q[0].clone();
            for (k, ul) in u.iter().enumerate() {
                am += &a[k + 1] * *ul;
                qv += &q[k + 1] * *ul;
            }
            return Ok((am.transpose() * am, qv));
        }
        Ok((self.family.matrix_at(u)?, self.family.vector_at(u)?))
    }

    /// True when every scenario map is affine in `u` (all sets but Cholesky).
    pub fn is_affine_in_u(&self) -> bool {
        !matches!(self.uset, UncertaintySet::CholeskyUA { .. })
    }
}

/// How `residual_report` probes the uncertainty set.
#[derive(Clone, Debug, PartialEq)]
pub enum Probe {
    /// Finite list or vertices when exact; otherwise seeded samples plus the
    /// closed-form worst-case points of the gap and of every row.
    Auto { samples: usize, seed: u64 },
    /// Evaluate at the given points only.
    Points(Vec<Vector>),
    /// Vertex enumeration (polytopic sets only).
    Vertices,
    /// Seeded uniform samples.
    Samples { count: usize, seed: u64 },
}

impl Default for Probe {
    fn default() -> Self {
        Probe::Auto {
            samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

/// Worst-case residual summary of a point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualReport {
    pub x: Vec<f64>,
    /// Maximum gap over the probed scenarios (`+∞` if any is infeasible).
    pub worst_gap: ExtReal,
    /// `max_u eᵀ max(−M(u)x − q(u), 0)`, tolerance-filtered.
    pub infeasibility: f64,
    /// `max_u xᵀ(M(u)x + q(u))`, regardless of feasibility.
    pub complementarity: f64,
    /// Gap at every probed scenario.
    pub per_scenario: Vec<(Vec<f64>, ExtReal)>,
    /// True when the probe attains the exact maximum over the set.
    pub exact: bool,
}

/// Evaluate gap, infeasibility and complementarity over the probe points.
pub fn residual_report(problem: &UncertainLcp, x: &[f64], probe: &Probe) -> Result<ResidualReport> {
    check_nonneg(x)?;
    if x.len() != problem.n() {
        return Err(Error::dim("point dimension differs from problem dimension"));
    }
    let l = problem.l();
    let (points, exact) = probe_points(problem, x, probe)?;
    let evals: Vec<Result<(Vec<f64>, ExtReal, f64, f64)>> = points
        .par_iter()
        .map(|u| {
            let (m, q) = problem.scenario(u.as_slice())?;
            let f = &m * Vector::from_column_slice(x) + &q;
            let gap = gap_from_map(&m, &q, x, &f);
            let mut infeas = 0.0;
            for i in 0..f.len() {
                if f[i] < -row_tolerance(&m, &q, x, i) {
                    infeas += -f[i];
                }
            }
            let comp: f64 = x.iter().zip(f.iter()).map(|(a, b)| a * b).sum();
            Ok((u.as_slice().to_vec(), gap, infeas, comp))
        })
        .collect();
    let mut worst_gap = ExtReal::Finite(f64::NEG_INFINITY);
    let mut infeasibility = 0.0f64;
    let mut complementarity = f64::NEG_INFINITY;
    let mut per_scenario = Vec::with_capacity(evals.len());
    for e in evals {
        let (u, gap, inf, comp) = e?;
        worst_gap = worst_gap.max(gap);
        infeasibility = infeasibility.max(inf);
        complementarity = complementarity.max(comp);
        per_scenario.push((u, gap));
    }
    if per_scenario.is_empty() {
        return Err(Error::Invalid(format!("probe produced no points (L = {l})")));
    }
    Ok(ResidualReport {
        x: x.to_vec(),
        worst_gap,
        infeasibility,
        complementarity,
        per_scenario,
        exact,
    })
}

fn probe_points(problem: &UncertainLcp, x: &[f64], probe: &Probe) -> Result<(Vec<Vector>, bool)> {
    let l = problem.l();
    let set = &problem.uset;
    match probe {
        Probe::Points(p) => {
            if p.iter().any(|u| u.len() != l) {
                return Err(Error::dim("probe point has wrong length"));
            }
            Ok((p.clone(), false))
        }
        Probe::Vertices => set
            .vertices(l)
            .map(|v| (v, problem.is_affine_in_u()))
            .ok_or_else(|| Error::Unsupported(format!("no vertex list for {}", set.kind_name()))),
        Probe::Samples { count, seed } => Ok((set.sample(l, *count, *seed)?, false)),
        Probe::Auto { samples, seed } => {
            if let UncertaintySet::FiniteScenarios(list) = set {
                return Ok((list.clone(), true));
            }
            if l == 0 {
                return Ok((vec![Vector::zeros(0)], true));
            }
            if problem.is_affine_in_u() {
                if let Some(v) = set.vertices(l) {
                    return Ok((v, true));
                }
            }
            let mut pts = set.sample(l, *samples, *seed)?;
            let mut exact = false;
            if problem.is_affine_in_u() {
                if let Some(extra) = worst_case_points(&problem.family, set, x) {
                    pts.extend(extra);
                    exact = true;
                }
            }
            Ok((pts, exact))
        }
    }
}

/// Closed-form maximizers of the gap and minimizers of each row over the set.
fn worst_case_points(family: &AffineFamily, set: &UncertaintySet, x: &[f64]) -> Option<Vec<Vector>> {
    let xv = Vector::from_column_slice(x);
    let l = family.l();
    let g: Vec<f64> = family
        .shifts
        .iter()
        .map(|s| xv.dot(&(&s.m * &xv + &s.q)))
        .collect();
    let mut out = vec![set.support_point(&g)?];
    let rows: Vec<Vector> = family.shifts.iter().map(|s| &s.m * &xv + &s.q).collect();
    for i in 0..family.n() {
        let h: Vec<f64> = (0..l).map(|k| -rows[k][i]).collect();
        out.push(set.support_point(&h)?);
    }
    Some(out)
}

pub mod json {
    //! The `ulcp-v1` problem-file schema.
    //!
    //! ```json
    //! {"schema": "ulcp-v1", "n": 2, "L": 1,
    //!  "M0": [[1,0],[0,1]], "q0": [1,1],
    //!  "shifts": [{"M": [[0,0],[0,0]], "q": [0.5,0]}],
    //!  "uncertainty": {"kind": "box_inf", "params": {}}}
    //! ```
    use super::*;

    pub const SCHEMA: &str = "ulcp-v1";

    #[derive(Serialize, Deserialize)]
    struct ShiftFile {
        #[serde(rename = "M")]
        m: Vec<Vec<f64>>,
        q: Vec<f64>,
    }

    #[derive(Serialize, Deserialize)]
    struct ProblemFile {
        schema: String,
        n: usize,
        #[serde(rename = "L")]
        l: usize,
        #[serde(rename = "M0")]
        m0: Vec<Vec<f64>>,
        q0: Vec<f64>,
        #[serde(default)]
        shifts: Vec<ShiftFile>,
        uncertainty: SetFile,
    }

    #[derive(Serialize, Deserialize)]
    struct SetFile {
        kind: String,
        #[serde(default)]
        params: serde_json::Value,
    }

    #[derive(Serialize, Deserialize)]
    struct ConicParams {
        #[serde(rename = "P")]
        p_mat: Vec<Vec<f64>>,
        #[serde(rename = "Q", default)]
        q_mat: Vec<Vec<f64>>,
        p: Vec<f64>,
        cone: Vec<ConeBlock>,
        #[serde(default)]
        interior_u: Option<Vec<f64>>,
        #[serde(default)]
        interior_nu: Option<Vec<f64>>,
    }

    #[derive(Serialize, Deserialize)]
    struct CholeskyParams {
        #[serde(rename = "A")]
        a: Vec<Vec<Vec<f64>>>,
        q: Vec<Vec<f64>>,
    }

    #[derive(Serialize, Deserialize)]
    struct ScenarioParams {
        scenarios: Vec<Vec<f64>>,
    }

    #[derive(Serialize, Deserialize)]
    struct FactorFile {
        dim: usize,
        set: SetFile,
    }

    #[derive(Serialize, Deserialize)]
    struct ProductParams {
        factors: Vec<FactorFile>,
    }

    fn finite_check(name: &str, vals: impl IntoIterator<Item = f64>) -> Result<()> {
        if vals.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("{name} contains NaN or Inf")));
        }
        Ok(())
    }

    fn to_mat(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<Mat> {
        if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::dim(format!("{name} must be {nrows}x{ncols}")));
        }
        finite_check(name, rows.iter().flatten().cloned())?;
        Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    fn to_mat_any(name: &str, rows: &[Vec<f64>]) -> Result<Mat> {
        let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
        to_mat(name, rows, rows.len(), ncols)
    }

    fn to_vec(name: &str, v: &[f64], len: usize) -> Result<Vector> {
        if v.len() != len {
            return Err(Error::dim(format!("{name} must have length {len}")));
        }
        finite_check(name, v.iter().cloned())?;
        Ok(Vector::from_column_slice(v))
    }

    fn from_mat(m: &Mat) -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
    }

    fn parse_set(sf: &SetFile, l: usize, n: usize) -> Result<UncertaintySet> {
        let params = || -> serde_json::Value {
            if sf.params.is_null() {
                serde_json::json!({})
            } else {
                sf.params.clone()
            }
        };
        Ok(match sf.kind.as_str() {
            "box_inf" => UncertaintySet::BoxInf,
            "ball_one" => UncertaintySet::BallOne,
            "ball_two" => UncertaintySet::BallTwo,
            "box_inf_nonneg" => UncertaintySet::BoxInfNonneg,
            "ball_one_nonneg" => UncertaintySet::BallOneNonneg,
            "conic" => {
                let c: ConicParams = serde_json::from_value(params())?;
                let k = c.p.len();
                let p_mat = to_mat("P", &c.p_mat, k, l)?;
                let r = c.q_mat.first().map(|r| r.len()).unwrap_or(0);
                let q_mat = if c.q_mat.is_empty() {
                    Mat::zeros(k, 0)
                } else {
                    to_mat("Q", &c.q_mat, k, r)?
                };
                let interior = match (c.interior_u, c.interior_nu) {
                    (Some(u), nu) => Some((
                        to_vec("interior_u", &u, l)?,
                        to_vec("interior_nu", &nu.unwrap_or_default(), q_mat.ncols())?,
                    )),
                    (None, _) => None,
                };
                UncertaintySet::Conic {
                    p_mat,
                    q_mat,
                    p_vec: to_vec("p", &c.p, k)?,
                    cone: c.cone,
                    interior,
                }
            }
            "cholesky_ua" => {
                let c: CholeskyParams = serde_json::from_value(params())?;
                let a = c
                    .a
                    .iter()
                    .map(|m| to_mat_any("A", m))
                    .collect::<Result<Vec<_>>>()?;
                let q = c
                    .q
                    .iter()
                    .map(|v| to_vec("q", v, n))
                    .collect::<Result<Vec<_>>>()?;
                UncertaintySet::CholeskyUA { a, q }
            }
            "finite_scenarios" => {
                let s: ScenarioParams = serde_json::from_value(params())?;
                UncertaintySet::FiniteScenarios(
                    s.scenarios
                        .iter()
                        .map(|v| to_vec("scenario", v, l))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            "product" => {
                let p: ProductParams = serde_json::from_value(params())?;
                UncertaintySet::Product(
                    p.factors
                        .iter()
                        .map(|f| Ok((parse_set(&f.set, f.dim, n)?, f.dim)))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            other => return Err(Error::Parse(format!("unknown uncertainty kind '{other}'"))),
        })
    }

    fn write_set(s: &UncertaintySet) -> SetFile {
        let params = match s {
            UncertaintySet::Conic {
                p_mat,
                q_mat,
                p_vec,
                cone,
                interior,
            } => serde_json::to_value(ConicParams {
                p_mat: from_mat(p_mat),
                q_mat: if q_mat.ncols() == 0 { vec![] } else { from_mat(q_mat) },
                p: p_vec.iter().cloned().collect(),
                cone: cone.clone(),
                interior_u: interior.as_ref().map(|(u, _)| u.iter().cloned().collect()),
                interior_nu: interior.as_ref().map(|(_, v)| v.iter().cloned().collect()),
            })
            .expect("serializable"),
            UncertaintySet::CholeskyUA { a, q } => serde_json::to_value(CholeskyParams {
                a: a.iter().map(from_mat).collect(),
                q: q.iter().map(|v| v.iter().cloned().collect()).collect(),
            })
            .expect("serializable"),
            UncertaintySet::FiniteScenarios(list) => serde_json::to_value(ScenarioParams {
                scenarios: list.iter().map(|v| v.iter().cloned().collect()).collect(),
            })
            .expect("serializable"),
            UncertaintySet::Product(f) => serde_json::to_value(ProductParams {
                factors: f
                    .iter()
                    .map(|(s, d)| FactorFile {
                        dim: *d,
                        set: write_set(s),
                    })
                    .collect(),
            })
            .expect("serializable"),
            _ => serde_json::json!({}),
        };
        SetFile {
            kind: s.kind_name().to_string(),
            params,
        }
    }

    pub fn from_str(text: &str) -> Result<UncertainLcp> {
        let pf: ProblemFile = serde_json::from_str(text)?;
        if pf.schema != SCHEMA {
            return Err(Error::Parse(format!(
                "expected schema '{SCHEMA}', found '{}'",
                pf.schema
            )));
        }
        let set = parse_set(&pf.uncertainty, pf.l, pf.n)?;
        if let UncertaintySet::CholeskyUA { a, q } = set {
            return UncertainLcp::cholesky(a, q);
        }
        if pf.shifts.len() != pf.l {
            return Err(Error::dim(format!(
                "L = {} but {} shifts given",
                pf.l,
                pf.shifts.len()
            )));
        }
        let m0 = to_mat("M0", &pf.m0, pf.n, pf.n)?;
        let q0 = to_vec("q0", &pf.q0, pf.n)?;
        let shifts = pf
            .shifts
            .iter()
            .map(|s| {
                Ok(Shift {
                    m: to_mat("shift M", &s.m, pf.n, pf.n)?,
                    q: to_vec("shift q", &s.q, pf.n)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        UncertainLcp::new(AffineFamily::new(m0, q0, shifts)?, set)
    }

    pub fn to_string(p: &UncertainLcp) -> String {
        let (m0, q0, shifts) = if matches!(p.uset, UncertaintySet::CholeskyUA { .. }) {
            (vec![], vec![], vec![])
        } else {
            (
                from_mat(&p.family.m0),
                p.family.q0.iter().cloned().collect(),
                p.family
                    .shifts
                    .iter()
                    .map(|s| ShiftFile {
                        m: from_mat(&s.m),
                        q: s.q.iter().cloned().collect(),
                    })
                    .collect(),
            )
        };
        let pf = ProblemFile {
            schema: SCHEMA.into(),
            n: p.n(),
            l: p.l(),
            m0,
            q0,
            shifts,
            uncertainty: write_set(&p.uset),
        };
        serde_json::to_string_pretty(&pf).expect("serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fam2() -> AffineFamily {
        AffineFamily::new(
            Mat::identity(2, 2),
            Vector::from_vec(vec![1.0, 1.0]),
            vec![Shift {
                m: Mat::identity(2, 2),
                q: Vector::zeros(2),
            }],
        )
        .unwrap()
    }

    #[test]
    fn rescaling_divides_gap() {
        let f = AffineFamily::new(
            Mat::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]),
            Vector::from_vec(vec![-1.0, 4.0]),
            vec![Shift { m: Mat::identity(2, 2), q: Vector::from_vec(vec![1.0, 0.0]) }],
        )
        .unwrap();
        let d = Vector::from_vec(vec![10.0, 0.5]);
        let g = f.rescaled(&d, 4.0).unwrap();
        let x = [3.0, 2.0];
        let xs = [0.3, 4.0];
        let a = gap_value(&f, &x, &[0.7]).unwrap().finite().unwrap();
        let b = gap_value(&g, &xs, &[0.7]).unwrap().finite().unwrap();
        assert!((a / 4.0 - b).abs() < 1e-12);
        assert!(f.rescaled(&d, 0.0).is_err());
    }

    #[test]
    fn eval_map_hand_arithmetic() {
        let f = eval_map(&fam2(), &[1.0, 2.0], &[0.5]).unwrap();
        assert_eq!(f.as_slice(), &[2.5, 4.0]);
    }

    #[test]
    fn eval_map_zero_point_and_nominal() {
        let fam = fam2();
        assert_eq!(eval_map(&fam, &[0.0, 0.0], &[0.3]).unwrap().as_slice(), &[1.0, 1.0]);
        let f = eval_map(&fam, &[2.0, 3.0], &[0.0]).unwrap();
        assert_eq!(f.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn eval_map_dimension_errors() {
        assert!(matches!(eval_map(&fam2(), &[1.0], &[0.0]), Err(Error::Dimension(_))));
        assert!(matches!(eval_map(&fam2(), &[1.0, 1.0], &[]), Err(Error::Dimension(_))));
    }

    #[test]
    fn gap_value_branches() {
        let fam = fam2();
        assert_eq!(gap_value(&fam, &[0.0, 0.0], &[0.0]).unwrap(), ExtReal::Finite(0.0));
        let neg = AffineFamily::nominal(Mat::identity(1, 1), Vector::from_vec(vec![-1.0])).unwrap();
        assert_eq!(gap_value(&neg, &[0.5], &[]).unwrap(), ExtReal::PosInf);
        assert!(matches!(gap_value(&fam, &[-1.0, 0.0], &[0.0]), Err(Error::Invalid(_))));
    }

    #[test]
    fn symmetrize_examples() {
        let m = Mat::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        let fam = AffineFamily::nominal(m, Vector::zeros(2)).unwrap();
        let s = symmetrize(&fam);
        assert_eq!(s.quadratic.m0, Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(s.original, fam);
        let sym = symmetrize(&s.quadratic);
        assert_eq!(sym.quadratic, s.quadratic);
    }

    #[test]
    fn extreal_order_and_display() {
        assert!(ExtReal::PosInf > ExtReal::Finite(1e300));
        assert_eq!(ExtReal::Finite(1.0).max(ExtReal::PosInf), ExtReal::PosInf);
        assert_eq!(ExtReal::PosInf.to_string(), "Inf");
        let s = serde_json::to_string(&vec![ExtReal::Finite(2.0), ExtReal::PosInf]).unwrap();
        assert_eq!(s, "[2.0,\"inf\"]");
        let back: Vec<ExtReal> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![ExtReal::Finite(2.0), ExtReal::PosInf]);
    }

    #[test]
    fn vertices_of_small_sets() {
        let v = UncertaintySet::BoxInf.vertices(1).unwrap();
        assert_eq!(v.len(), 2);
        let v = UncertaintySet::BoxInfNonneg.vertices(2).unwrap();
        let got: Vec<Vec<f64>> = v.iter().map(|x| x.as_slice().to_vec()).collect();
        assert_eq!(got, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        assert!(UncertaintySet::BoxInf.vertices(17).is_none());
        assert_eq!(UncertaintySet::BallOneNonneg.vertices(3).unwrap().len(), 4);
    }

    #[test]
    fn samples_are_members_and_deterministic() {
        for set in [
            UncertaintySet::BoxInf,
            UncertaintySet::BallOne,
            UncertaintySet::BallTwo,
            UncertaintySet::BoxInfNonneg,
            UncertaintySet::BallOneNonneg,
        ] {
            let a = set.sample(3, 200, 7).unwrap();
            let b = set.sample(3, 200, 7).unwrap();
            assert_eq!(a, b);
            assert!(a.iter().all(|u| set.contains(u.as_slice(), 1e-12).unwrap()));
        }
    }

    #[test]
    fn residual_report_scenarios() {
        let fam = fam2();
        let p = UncertainLcp::new(
            fam,
            UncertaintySet::FiniteScenarios(vec![Vector::from_vec(vec![0.0]), Vector::from_vec(vec![1.0])]),
        )
        .unwrap();
        let r = residual_report(&p, &[0.0, 0.0], &Probe::default()).unwrap();
        assert_eq!(r.worst_gap, ExtReal::Finite(0.0));
        assert_eq!(r.infeasibility, 0.0);
        assert!(r.exact);
        let r = residual_report(&p, &[1.0, 0.0], &Probe::default()).unwrap();
        assert_eq!(r.worst_gap, ExtReal::Finite(3.0));
    }

    #[test]
    fn residual_report_ball_two_is_exact_with_support_points() {
        // gap(u) = x·(x + q0 + u q1) with x = 1, q1 = 1: max at u = 1.
        let fam = AffineFamily::new(
            Mat::from_element(1, 1, 1.0),
            Vector::from_vec(vec![0.0]),
            vec![Shift {
                m: Mat::zeros(1, 1),
                q: Vector::from_vec(vec![1.0]),
            }],
        )
        .unwrap();
        let p = UncertainLcp::new(fam, UncertaintySet::BallTwo).unwrap();
        let r = residual_report(&p, &[1.0], &Probe::Auto { samples: 10, seed: 1 }).unwrap();
        assert!(r.exact);
        assert_eq!(r.worst_gap, ExtReal::Finite(2.0));
    }

    #[test]
    fn classification() {
        assert_eq!(classify(&Mat::identity(2, 2)), Definiteness::Psd);
        assert_eq!(classify(&(-Mat::identity(2, 2))), Definiteness::Nsd);
        assert_eq!(
            classify(&Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])),
            Definiteness::Indefinite
        );
    }

    #[test]
    fn json_roundtrip_and_rejection() {
        let p = UncertainLcp::new(fam2(), UncertaintySet::BoxInf).unwrap();
        let text = json::to_string(&p);
        let back = json::from_str(&text).unwrap();
        assert_eq!(back.family, p.family);
        assert_eq!(back.uset, p.uset);
        let bad = text.replace("\"q0\": [\n    1.0,", "\"q0\": [\n    1e999,");
        assert!(json::from_str(&bad).is_err());
        let wrong = text.replace("ulcp-v1", "ulcp-v0");
        assert!(matches!(json::from_str(&wrong), Err(Error::Parse(_))));
    }

    fn small_mat(n: usize) -> impl Strategy<Value = Mat> {
        proptest::collection::vec(-3.0f64..3.0, n * n).prop_map(move |v| Mat::from_vec(n, n, v))
    }

    proptest! {
        #[test]
        fn gap_nonnegative_when_feasible(
            a in small_mat(3),
            x in proptest::collection::vec(0.0f64..2.0, 3),
            q in proptest::collection::vec(-1.0f64..4.0, 3),
        ) {
            let m = a.transpose() * &a;
            let fam = AffineFamily::nominal(m, Vector::from_vec(q)).unwrap();
            let f = eval_map(&fam, &x, &[]).unwrap();
            if f.iter().all(|v| *v >= 0.0) {
                let g = gap_value(&fam, &x, &[]).unwrap();
                prop_assert!(g.finite().unwrap() >= -1e-12);
            }
        }

        #[test]
        fn symmetrize_preserves_quadratic_form(
            m in small_mat(3),
            x in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let fam = AffineFamily::nominal(m.clone(), Vector::zeros(3)).unwrap();
            let s = symmetrize(&fam);
            let xv = Vector::from_vec(x);
            let a = xv.dot(&(&m * &xv));
            let b = xv.dot(&(&s.quadratic.m0 * &xv));
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }
}
