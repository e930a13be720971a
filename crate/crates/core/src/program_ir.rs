//! Solver-agnostic representation of the deterministic programs produced by
//! the reformulations, with validation, SDPA emission and a JSON dump.

use crate::linalg;
use crate::{Error, Mat, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;

pub type VarId = usize;
/// Sparse linear form `Σ coef · v[id]`.
pub type LinExpr = Vec<(VarId, f64)>;

/// Eigenvalue tolerance used for convexity tags.
pub const CONVEX_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Variable {
    pub name: String,
    pub nonneg: bool,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

/// `aᵀv (≥|≤|=) b`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: LinExpr,
    pub sense: Sense,
    pub rhs: f64,
    pub label: String,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    Convex,
    Nonconvex,
}

/// `v_Sᵀ H v_S + cᵀv ≤ d` where `S` is the local variable list of `H`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct QuadConstraint {
    pub vars: Vec<VarId>,
    #[serde(with = "mat_rows")]
    pub h: Mat,
    pub c: LinExpr,
    pub d: f64,
    pub convexity: Convexity,
    pub label: String,
}

/// `‖A v + b‖₂ ≤ cᵀv + d`; `a` holds the rows of `A` sparsely.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SocConstraint {
    pub a: Vec<LinExpr>,
    pub b: Vec<f64>,
    pub c: LinExpr,
    pub d: f64,
    pub label: String,
}

/// `F0 + Σ v_i F_i ⪰ 0` with symmetric `dim × dim` matrices.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PsdConstraint {
    pub dim: usize,
    #[serde(with = "mat_rows")]
    pub f0: Mat,
    #[serde(with = "term_rows")]
    pub terms: Vec<(VarId, Mat)>,
    pub label: String,
}

/// `min cᵀv + v_Sᵀ H v_S + constant`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Objective {
    pub linear: LinExpr,
    pub quad_vars: Vec<VarId>,
    #[serde(with = "mat_rows")]
    pub quad: Mat,
    pub constant: f64,
}

impl Default for Objective {
    fn default() -> Self {
        Objective {
            linear: Vec::new(),
            quad_vars: Vec::new(),
            quad: Mat::zeros(0, 0),
            constant: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct MathProgram {
    pub variables: Vec<Variable>,
    pub objective: Objective,
    pub linear: Vec<LinearConstraint>,
    pub quadratic: Vec<QuadConstraint>,
    pub soc: Vec<SocConstraint>,
    pub psd: Vec<PsdConstraint>,
    #[serde(skip)]
    index: HashMap<String, VarId>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    Skipped,
}

/// Variable assignment with objective value and status.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionPoint {
    pub values: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    /// Checker-reported maximum primal violation (scaled).
    pub primal_residual: f64,
    /// Checker-reported stationarity residual, when a dual is available.
    pub dual_residual: Option<f64>,
    pub message: String,
}

impl SolutionPoint {
    pub fn failed(status: SolveStatus, n: usize, message: impl Into<String>) -> Self {
        SolutionPoint {
            values: vec![f64::NAN; n],
            objective: f64::NAN,
            status,
            primal_residual: f64::INFINITY,
            dual_residual: None,
            message: message.into(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn pick(&self, ids: &[VarId]) -> Vec<f64> {
        ids.iter().map(|&i| self.values[i]).collect()
    }
}

fn sym_convexity(h: &Mat) -> Convexity {
    if h.nrows() == 0 || linalg::min_eigenvalue(h) >= -linalg::psd_tol(h, CONVEX_TOL) {
        Convexity::Convex
    } else {
        Convexity::Nonconvex
    }
}

pub fn eval_lin(e: &[(VarId, f64)], v: &[f64]) -> f64 {
    e.iter().map(|(i, c)| c * v[*i]).sum()
}

fn eval_quad_form(vars: &[VarId], h: &Mat, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for (a, &i) in vars.iter().enumerate() {
        for (b, &j) in vars.iter().enumerate() {
            let hij = h[(a, b)];
            if hij != 0.0 {
                s += hij * v[i] * v[j];
            }
        }
    }
    s
}

impl LinearConstraint {
    /// Signed violation (positive when violated).
    pub fn violation(&self, v: &[f64]) -> f64 {
        let lhs = eval_lin(&self.coeffs, v);
        match self.sense {
            Sense::Ge => self.rhs - lhs,
            Sense::Le => lhs - self.rhs,
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }

    pub fn scale(&self, v: &[f64]) -> f64 {
        1.0 + self.rhs.abs() + self.coeffs.iter().map(|(i, c)| (c * v[*i]).abs()).sum::<f64>()
    }
}

impl QuadConstraint {
    pub fn lhs(&self, v: &[f64]) -> f64 {
        eval_quad_form(&self.vars, &self.h, v) + eval_lin(&self.c, v)
    }

    pub fn violation(&self, v: &[f64]) -> f64 {
        self.lhs(v) - self.d
    }

    pub fn scale(&self, v: &[f64]) -> f64 {
        let mut s = 1.0 + self.d.abs();
        for (a, &i) in self.vars.iter().enumerate() {
            for (b, &j) in self.vars.iter().enumerate() {
                s += (self.h[(a, b)] * v[i] * v[j]).abs();
            }
        }
        s + self.c.iter().map(|(i, c)| (c * v[*i]).abs()).sum::<f64>()
    }
}

impl SocConstraint {
    pub fn violation(&self, v: &[f64]) -> f64 {
        let norm = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(row, b)| {
                let r = eval_lin(row, v) + b;
                r * r
            })
            .sum::<f64>()
            .sqrt();
        norm - eval_lin(&self.c, v) - self.d
    }

    pub fn scale(&self, v: &[f64]) -> f64 {
        let mut s = 1.0 + self.d.abs() + eval_lin(&self.c, v).abs();
        for (row, b) in self.a.iter().zip(&self.b) {
            s += (eval_lin(row, v) + b).abs();
        }
        s
    }
}

impl PsdConstraint {
    pub fn matrix_at(&self, v: &[f64]) -> Mat {
        let mut m = self.f0.clone();
        for (i, f) in &self.terms {
            m += f * v[*i];
        }
        m
    }

    /// Negative of the minimum eigenvalue (positive when violated).
    pub fn violation(&self, v: &[f64]) -> f64 {
        -linalg::min_eigenvalue(&self.matrix_at(v))
    }
}

impl MathProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, nonneg: bool) -> VarId {
        let name = name.into();
        let id = self.variables.len();
        self.index.insert(name.clone(), id);
        self.variables.push(Variable { name, nonneg });
        id
    }

    pub fn add_vars(&mut self, prefix: &str, count: usize, nonneg: bool) -> Vec<VarId> {
        (0..count)
            .map(|k| self.add_var(format!("{prefix}[{k}]"), nonneg))
            .collect()
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    /// Rebuild the name index (needed after deserialization).
    pub fn reindex(&mut self) {
        self.index = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), i))
            .collect();
    }

    pub fn add_linear(&mut self, coeffs: LinExpr, sense: Sense, rhs: f64, label: impl Into<String>) {
        self.linear.push(LinearConstraint {
            coeffs: merge(coeffs),
            sense,
            rhs,
            label: label.into(),
        });
    }

    /// Adds `vᵀHv + cᵀv ≤ d`; `h` is symmetrized and the tag computed.
    pub fn add_quad(&mut self, vars: Vec<VarId>, h: &Mat, c: LinExpr, d: f64, label: impl Into<String>) {
        let h = linalg::sym_part(h);
        let convexity = sym_convexity(&h);
        self.quadratic.push(QuadConstraint {
            vars,
            h,
            c: merge(c),
            d,
            convexity,
            label: label.into(),
        });
    }

    pub fn add_soc(&mut self, a: Vec<LinExpr>, b: Vec<f64>, c: LinExpr, d: f64, label: impl Into<String>) {
        self.soc.push(SocConstraint {
            a: a.into_iter().map(merge).collect(),
            b,
            c: merge(c),
            d,
            label: label.into(),
        });
    }

    pub fn add_psd(&mut self, f0: Mat, terms: Vec<(VarId, Mat)>, label: impl Into<String>) {
        let dim = f0.nrows();
        let mut acc: Vec<(VarId, Mat)> = Vec::new();
        for (i, m) in terms {
            if let Some(slot) = acc.iter_mut().find(|(j, _)| *j == i) {
                slot.1 += m;
            } else {
                acc.push((i, m));
            }
        }
        acc.retain(|(_, m)| m.amax() != 0.0);
        self.psd.push(PsdConstraint {
            dim,
            f0,
            terms: acc,
            label: label.into(),
        });
    }

    pub fn set_objective(&mut self, linear: LinExpr, quad_vars: Vec<VarId>, quad: &Mat, constant: f64) {
        self.objective = Objective {
            linear: merge(linear),
            quad: linalg::sym_part(quad),
            quad_vars,
            constant,
        };
    }

    pub fn objective_value(&self, v: &[f64]) -> f64 {
        eval_lin(&self.objective.linear, v)
            + eval_quad_form(&self.objective.quad_vars, &self.objective.quad, v)
            + self.objective.constant
    }

    pub fn convexity(&self) -> Convexity {
        let quad_ok = self
            .quadratic
            .iter()
            .all(|q| q.convexity == Convexity::Convex);
        if quad_ok && sym_convexity(&self.objective.quad) == Convexity::Convex {
            Convexity::Convex
        } else {
            Convexity::Nonconvex
        }
    }

    pub fn is_convex(&self) -> bool {
        self.convexity() == Convexity::Convex
    }

    pub fn is_linear(&self) -> bool {
        self.quadratic.is_empty()
            && self.soc.is_empty()
            && self.psd.is_empty()
            && self.objective.quad.amax() == 0.0
    }

    /// Largest scaled violation over all constraints and sign restrictions.
    pub fn max_violation(&self, v: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (i, var) in self.variables.iter().enumerate() {
            if var.nonneg {
                worst = worst.max(-v[i] / (1.0 + v[i].abs()));
            }
        }
        for c in &self.linear {
            worst = worst.max(c.violation(v) / c.scale(v));
        }
        for c in &self.quadratic {
            worst = worst.max(c.violation(v) / c.scale(v));
        }
        for c in &self.soc {
            worst = worst.max(c.violation(v) / c.scale(v));
        }
        for c in &self.psd {
            let m = c.matrix_at(v);
            worst = worst.max(c.violation(v) / (1.0 + m.amax()));
        }
        worst
    }

    pub fn to_json(&self) -> String {
        let dump = MpDump {
            schema: MP_SCHEMA.into(),
            convexity: self.convexity(),
            program: self.clone(),
        };
        serde_json::to_string_pretty(&dump).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: MpDump = serde_json::from_str(text)?;
        if dump.schema != MP_SCHEMA {
            return Err(Error::Parse(format!("expected schema '{MP_SCHEMA}'")));
        }
        let mut p = dump.program;
        p.reindex();
        Ok(p)
    }
}

pub const MP_SCHEMA: &str = "mp-v1";

#[derive(Serialize, Deserialize)]
struct MpDump {
    schema: String,
    convexity: Convexity,
    program: MathProgram,
}

/// Combine duplicate variable references and drop zeros.
pub fn merge(e: LinExpr) -> LinExpr {
    let mut out: LinExpr = Vec::with_capacity(e.len());
    for (i, c) in e {
        if let Some(slot) = out.iter_mut().find(|(j, _)| *j == i) {
            slot.1 += c;
        } else {
            out.push((i, c));
        }
    }
    out.retain(|(_, c)| *c != 0.0);
    out
}

/// Consistency diagnostics; empty when the program is well formed.
pub fn validate(prog: &MathProgram) -> Vec<String> {
    let nv = prog.num_vars();
    let mut d = Vec::new();
    let bad_ref = |e: &[(VarId, f64)]| e.iter().any(|(i, c)| *i >= nv || !c.is_finite());
    let mut seen = HashMap::new();
    for (i, v) in prog.variables.iter().enumerate() {
        if let Some(j) = seen.insert(v.name.clone(), i) {
            d.push(format!("duplicate variable name '{}' (ids {j} and {i})", v.name));
        }
    }
    let obj = &prog.objective;
    if bad_ref(&obj.linear) || obj.quad_vars.iter().any(|i| *i >= nv) {
        d.push("objective references an undeclared variable or non-finite coefficient".into());
    }
    if obj.quad.nrows() != obj.quad_vars.len() || obj.quad.ncols() != obj.quad_vars.len() {
        d.push("objective quadratic block does not match its variable list".into());
    }
    for c in &prog.linear {
        if bad_ref(&c.coeffs) || !c.rhs.is_finite() {
            d.push(format!("linear constraint '{}' is malformed", c.label));
        }
    }
    for q in &prog.quadratic {
        let k = q.vars.len();
        if q.h.nrows() != k || q.h.ncols() != k {
            d.push(format!("quadratic constraint '{}' has a Hessian of the wrong size", q.label));
            continue;
        }
        if q.vars.iter().any(|i| *i >= nv) || bad_ref(&q.c) || !q.d.is_finite() {
            d.push(format!("quadratic constraint '{}' references an undeclared variable", q.label));
        }
        if q.h.iter().any(|v| !v.is_finite()) {
            d.push(format!("quadratic constraint '{}' has non-finite entries", q.label));
            continue;
        }
        let asym = (&q.h - q.h.transpose()).amax();
        if asym > 1e-12 * (1.0 + q.h.amax()) {
            d.push(format!("asymmetric Hessian in quadratic constraint '{}'", q.label));
        }
        if sym_convexity(&q.h) != q.convexity {
            d.push(format!("convexity tag of '{}' disagrees with its spectrum", q.label));
        }
    }
    for s in &prog.soc {
        if s.a.len() != s.b.len() {
            d.push(format!("cone constraint '{}' has mismatched A and b", s.label));
        }
        if s.a.iter().any(|r| bad_ref(r)) || bad_ref(&s.c) || !s.d.is_finite() {
            d.push(format!("cone constraint '{}' is malformed", s.label));
        }
    }
    for p in &prog.psd {
        if p.f0.nrows() != p.dim || p.f0.ncols() != p.dim {
            d.push(format!("matrix constraint '{}' has F0 of the wrong size", p.label));
        }
        for (i, f) in &p.terms {
            if *i >= nv || f.nrows() != p.dim || f.ncols() != p.dim {
                d.push(format!("matrix constraint '{}' has a malformed term", p.label));
            } else if (f - f.transpose()).amax() > 1e-12 * (1.0 + f.amax()) {
                d.push(format!("matrix constraint '{}' has an asymmetric coefficient", p.label));
            }
        }
    }
    d
}

/// SDPA sparse problem: `min cᵀx  s.t.  Σ F_i x_i − F_0 ⪰ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpaProblem {
    pub names: Vec<String>,
    pub objective_constant: f64,
    pub block_sizes: Vec<i64>,
    pub c: Vec<f64>,
    /// `(matno, block, i, j, value)`, 1-based, `i ≤ j`.
    pub entries: Vec<(usize, usize, usize, usize, f64)>,
}

/// Emit the SDPA sparse format for a program with linear and matrix
/// constraints and a linear objective.
pub fn emit_sdpa(prog: &MathProgram) -> Result<String> {
    Ok(to_sdpa(prog)?.write())
}

pub fn to_sdpa(prog: &MathProgram) -> Result<SdpaProblem> {
    if !prog.quadratic.is_empty() || !prog.soc.is_empty() || prog.objective.quad.amax() != 0.0 {
        return Err(Error::Unsupported(
            "SDPA emission supports only linear and matrix constraints with a linear objective".into(),
        ));
    }
    let m = prog.num_vars();
    let mut c = vec![0.0; m];
    for (i, v) in &prog.objective.linear {
        c[*i] += v;
    }
    let mut entries = Vec::new();
    let mut block_sizes = Vec::new();
    for (b, p) in prog.psd.iter().enumerate() {
        block_sizes.push(p.dim as i64);
        let blk = b + 1;
        // SDPA writes F(x) = Σ F_i x_i − F_0, so our F0 enters with a minus sign.
        push_upper(&mut entries, 0, blk, &(-&p.f0));
        let mut terms = p.terms.clone();
        terms.sort_by_key(|(i, _)| *i);
        for (i, f) in &terms {
            push_upper(&mut entries, i + 1, blk, f);
        }
    }
    // Diagonal block rows of the form aᵀx − b ≥ 0.
    let mut rows: Vec<(LinExpr, f64)> = Vec::new();
    for lc in &prog.linear {
        match lc.sense {
            Sense::Ge => rows.push((lc.coeffs.clone(), lc.rhs)),
            Sense::Le => rows.push((lc.coeffs.iter().map(|(i, v)| (*i, -v)).collect(), -lc.rhs)),
            Sense::Eq => {
                rows.push((lc.coeffs.clone(), lc.rhs));
                rows.push((lc.coeffs.iter().map(|(i, v)| (*i, -v)).collect(), -lc.rhs));
            }
        }
    }
    for (i, v) in prog.variables.iter().enumerate() {
        if v.nonneg {
            rows.push((vec![(i, 1.0)], 0.0));
        }
    }
    if !rows.is_empty() {
        block_sizes.push(-(rows.len() as i64));
        let blk = block_sizes.len();
        let mut diag = Vec::new();
        for (r, (coeffs, rhs)) in rows.iter().enumerate() {
            if *rhs != 0.0 {
                diag.push((0, blk, r + 1, r + 1, *rhs));
            }
            for (i, v) in coeffs {
                if *v != 0.0 {
                    diag.push((i + 1, blk, r + 1, r + 1, *v));
                }
            }
        }
        diag.sort_by(|a, b| (a.0, a.2).cmp(&(b.0, b.2)));
        entries.extend(diag);
    }
    if block_sizes.is_empty() {
        return Err(Error::Unsupported("program has no constraints to emit".into()));
    }
    Ok(SdpaProblem {
        names: prog.variables.iter().map(|v| v.name.clone()).collect(),
        objective_constant: prog.objective.constant,
        block_sizes,
        c,
        entries,
    })
}

fn push_upper(out: &mut Vec<(usize, usize, usize, usize, f64)>, matno: usize, blk: usize, f: &Mat) {
    for i in 0..f.nrows() {
        for j in i..f.ncols() {
            let v = f[(i, j)];
            if v != 0.0 {
                out.push((matno, blk, i + 1, j + 1, v));
            }
        }
    }
}

impl SdpaProblem {
    pub fn write(&self) -> String {
        let mut s = String::new();
        s.push_str("\"ulcp sdpa export\"\n");
        let _ = writeln!(s, "* objective_constant {}", self.objective_constant);
        for (i, n) in self.names.iter().enumerate() {
            let _ = writeln!(s, "* var {} {}", i + 1, n);
        }
        let _ = writeln!(s, "{} = mDIM", self.c.len());
        let _ = writeln!(s, "{} = nBLOCK", self.block_sizes.len());
        let sizes: Vec<String> = self.block_sizes.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(s, "{} = bLOCKsTRUCT", sizes.join(" "));
        let c: Vec<String> = self.c.iter().map(|v| fmt_num(*v)).collect();
        let _ = writeln!(s, "{}", c.join(" "));
        for (m, b, i, j, v) in &self.entries {
            let _ = writeln!(s, "{m} {b} {i} {j} {}", fmt_num(*v));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut names = Vec::new();
        let mut objective_constant = 0.0;
        let mut body: Vec<&str> = Vec::new();
        for line in text.lines() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('"') {
                continue;
            }
            if let Some(rest) = t.strip_prefix('*') {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                match parts.as_slice() {
                    ["objective_constant", v] => objective_constant = parse_num(v)?,
                    ["var", idx, name] => {
                        let k: usize = idx.parse().map_err(|_| Error::Parse(format!("bad var index '{idx}'")))?;
                        if k != names.len() + 1 {
                            return Err(Error::Parse("variable names out of order".into()));
                        }
                        names.push(name.to_string());
                    }
                    _ => {}
                }
                continue;
            }
            body.push(t);
        }
        let strip = |l: &str| -> String {
            l.split('=')
                .next()
                .unwrap_or("")
                .replace([',', '{', '}', '(', ')'], " ")
                .trim()
                .to_string()
        };
        if body.len() < 4 {
            return Err(Error::Parse("SDPA file is truncated".into()));
        }
        let m: usize = strip(body[0])
            .parse()
            .map_err(|_| Error::Parse("bad mDIM".into()))?;
        let nb: usize = strip(body[1])
            .parse()
            .map_err(|_| Error::Parse("bad nBLOCK".into()))?;
        let block_sizes: Vec<i64> = strip(body[2])
            .split_whitespace()
            .map(|t| t.parse::<i64>().map_err(|_| Error::Parse(format!("bad block size '{t}'"))))
            .collect::<Result<_>>()?;
        if block_sizes.len() != nb || block_sizes.contains(&0) {
            return Err(Error::Parse("block structure does not match nBLOCK".into()));
        }
        let c: Vec<f64> = strip(body[3])
            .split_whitespace()
            .map(parse_num)
            .collect::<Result<_>>()?;
        if c.len() != m {
            return Err(Error::Parse("objective length does not match mDIM".into()));
        }
        let mut entries = Vec::new();
        for line in &body[4..] {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 5 {
                return Err(Error::Parse(format!("bad entry line '{line}'")));
            }
            let idx = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::Parse(format!("bad index '{s}'"))) };
            let (mat, blk, i, j) = (idx(t[0])?, idx(t[1])?, idx(t[2])?, idx(t[3])?);
            let v = parse_num(t[4])?;
            if mat > m || blk == 0 || blk > nb {
                return Err(Error::Parse(format!("entry out of range: '{line}'")));
            }
            let size = block_sizes[blk - 1].unsigned_abs() as usize;
            if i == 0 || j == 0 || i > size || j > size || (block_sizes[blk - 1] < 0 && i != j) {
                return Err(Error::Parse(format!("entry index out of block: '{line}'")));
            }
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            entries.push((mat, blk, i, j, v));
        }
        if names.is_empty() {
            names = (1..=m).map(|k| format!("x[{k}]")).collect();
        } else if names.len() != m {
            return Err(Error::Parse("variable name count does not match mDIM".into()));
        }
        Ok(SdpaProblem {
            names,
            objective_constant,
            block_sizes,
            c,
            entries,
        })
    }

    /// Program with one matrix constraint per positive block and one `≥`
    /// row per diagonal-block entry.
    pub fn to_program(&self) -> MathProgram {
        let mut p = MathProgram::new();
        for n in &self.names {
            p.add_var(n.clone(), false);
        }
        let lin: LinExpr = self.c.iter().enumerate().map(|(i, v)| (i, *v)).collect();
        p.set_objective(lin, vec![], &Mat::zeros(0, 0), self.objective_constant);
        for (b, &size) in self.block_sizes.iter().enumerate() {
            let blk = b + 1;
            if size > 0 {
                let d = size as usize;
                let mut f0 = Mat::zeros(d, d);
                let mut terms: Vec<(VarId, Mat)> = Vec::new();
                for &(mat, eb, i, j, v) in &self.entries {
                    if eb != blk {
                        continue;
                    }
                    let target = if mat == 0 {
                        &mut f0
                    } else {
                        if !terms.iter().any(|(k, _)| *k == mat - 1) {
                            terms.push((mat - 1, Mat::zeros(d, d)));
                        }
                        &mut terms.iter_mut().find(|(k, _)| *k == mat - 1).unwrap().1
                    };
                    let v = if mat == 0 { -v } else { v };
                    target[(i - 1, j - 1)] = v;
                    target[(j - 1, i - 1)] = v;
                }
                terms.sort_by_key(|(i, _)| *i);
                p.psd.push(PsdConstraint {
                    dim: d,
                    f0,
                    terms,
                    label: format!("block {blk}"),
                });
            } else {
                let rows = size.unsigned_abs() as usize;
                let mut coeffs: Vec<LinExpr> = vec![Vec::new(); rows];
                let mut rhs = vec![0.0; rows];
                for &(mat, eb, i, _, v) in &self.entries {
                    if eb != blk {
                        continue;
                    }
                    if mat == 0 {
                        rhs[i - 1] = v;
                    } else {
                        coeffs[i - 1].push((mat - 1, v));
                    }
                }
                for (r, (c, b)) in coeffs.into_iter().zip(rhs).enumerate() {
                    p.add_linear(c, Sense::Ge, b, format!("block {blk} row {}", r + 1));
                }
            }
        }
        p
    }
}

fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

fn parse_num(s: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Parse(format!("bad number '{s}'")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("non-finite number '{s}'")));
    }
    Ok(v)
}

mod mat_rows {
    use crate::Mat;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let nr = rows.len();
        let nc = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != nc) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(Mat::from_fn(nr, nc, |i, j| rows[i][j]))
    }
}

mod term_rows {
    use crate::program_ir::VarId;
    use crate::Mat;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Term {
        var: VarId,
        #[serde(with = "super::mat_rows")]
        matrix: Mat,
    }

    pub fn serialize<S: Serializer>(t: &[(VarId, Mat)], s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Term> = t
            .iter()
            .map(|(i, m)| Term {
                var: *i,
                matrix: m.clone(),
            })
            .collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(VarId, Mat)>, D::Error> {
        let v: Vec<Term> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|t| (t.var, t.matrix)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_program_is_valid() {
        assert!(validate(&MathProgram::new()).is_empty());
    }

    #[test]
    fn asymmetric_hessian_is_diagnosed() {
        let mut p = MathProgram::new();
        let x = p.add_var("x", false);
        let y = p.add_var("y", false);
        p.quadratic.push(QuadConstraint {
            vars: vec![x, y],
            h: Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]),
            c: vec![],
            d: 1.0,
            convexity: Convexity::Convex,
            label: "q".into(),
        });
        let d = validate(&p);
        assert!(d.iter().any(|m| m.contains("asymmetric Hessian")), "{d:?}");
    }

    #[test]
    fn convexity_flips_with_sign() {
        let mut p = MathProgram::new();
        let x = p.add_vars("x", 2, false);
        p.add_quad(x.clone(), &Mat::identity(2, 2), vec![], 1.0, "ball");
        assert!(p.is_convex());
        let mut q = MathProgram::new();
        let x = q.add_vars("x", 2, false);
        q.add_quad(x, &(-Mat::identity(2, 2)), vec![], 1.0, "ball");
        assert!(!q.is_convex());
        assert!(validate(&q).is_empty());
    }

    #[test]
    fn sdpa_single_block() {
        let mut p = MathProgram::new();
        let v = p.add_var("v", false);
        p.set_objective(vec![(v, 1.0)], vec![], &Mat::zeros(0, 0), 0.0);
        p.add_psd(Mat::zeros(1, 1), vec![(v, Mat::identity(1, 1))], "v >= 0");
        let s = to_sdpa(&p).unwrap();
        assert_eq!(s.block_sizes, vec![1]);
        assert_eq!(s.entries, vec![(1, 1, 1, 1, 1.0)]);
        let text = s.write();
        let body: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with('"') && !l.starts_with('*'))
            .skip(3)
            .collect();
        assert_eq!(body, vec!["1.0", "1 1 1 1 1.0"]);
        let again = emit_sdpa(&SdpaProblem::parse(&text).unwrap().to_program()).unwrap();
        assert_eq!(again, text);
    }

    #[test]
    fn sdpa_rejects_quadratic_parts() {
        let mut p = MathProgram::new();
        let x = p.add_vars("x", 1, false);
        p.add_quad(x, &Mat::identity(1, 1), vec![], 1.0, "q");
        assert!(matches!(emit_sdpa(&p), Err(Error::Unsupported(_))));
    }

    #[test]
    fn sdpa_parse_errors() {
        assert!(SdpaProblem::parse("1\n1\n1\n").is_err());
        assert!(SdpaProblem::parse("1 = mDIM\n1 = nBLOCK\n2 = bLOCKsTRUCT\n1.0\n1 1 3 1 1.0\n").is_err());
        assert!(SdpaProblem::parse("1 = mDIM\n1 = nBLOCK\n2 = bLOCKsTRUCT\n1.0\n1 1 1 1 abc\n").is_err());
    }

    #[test]
    fn mp_json_roundtrip() {
        let mut p = MathProgram::new();
        let x = p.add_vars("x", 2, true);
        p.add_linear(vec![(x[0], 1.0), (x[1], 1.0)], Sense::Ge, 1.0, "sum");
        p.add_quad(x.clone(), &Mat::identity(2, 2), vec![(x[0], 1.0)], 3.0, "q");
        p.add_soc(vec![vec![(x[0], 1.0)]], vec![0.5], vec![(x[1], 1.0)], 0.0, "s");
        p.set_objective(vec![(x[1], 2.0)], x.clone(), &Mat::identity(2, 2), 1.0);
        let back = MathProgram::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.var("x[1]"), Some(1));
    }
}
