//! Traffic equilibrium case studies and their expected-residual baselines.

use super::pipeline::{solve_problem, PipelineOptions, PipelineResult, Scaling};
use crate::model::{gap_value, AffineFamily, ExtReal, Shift, UncertainLcp, UncertaintySet};
use crate::program_ir::{MathProgram, Sense, VarId};
use crate::reformulate::box_vertex_reduction;
use crate::solver::{solve_convex, SolverRequest};
use crate::{Error, Mat, Result, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `1/cᵢ(u) = (ĉ₀)ᵢ + u (ĉ₁)ᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseCapacity {
    pub c_hat0: Vector,
    pub c_hat1: Vector,
}

/// Path-based network with GBPR link costs
/// `Cᵢ(f, u) = cᵢ⁰ (1 + 0.15 (fᵢ / cᵢ(u))^{nᵢ})` and demand `d₀ + u d₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrafficNetwork {
    /// Link-path incidence, links × paths.
    pub delta: Mat,
    /// OD-path incidence, OD pairs × paths.
    pub od: Mat,
    /// Declared link list of every path.
    pub paths: Vec<Vec<usize>>,
    pub c0: Vector,
    pub capacity: InverseCapacity,
    pub d0: Vector,
    pub d1: Vector,
    pub eta: f64,
    pub exponents: Vec<u32>,
}

impl TrafficNetwork {
    pub fn validate(&self) -> Result<()> {
        let (links, paths) = self.delta.shape();
        if self.paths.len() != paths || self.od.ncols() != paths {
            return Err(Error::dim("path count differs between Δ, B and the path list"));
        }
        for (j, p) in self.paths.iter().enumerate() {
            if p.is_empty() {
                return Err(Error::Invalid(format!("path {j} has no links")));
            }
            for i in 0..links {
                let want = if p.contains(&i) { 1.0 } else { 0.0 };
                if self.delta[(i, j)] != want {
                    return Err(Error::Invalid(format!("Δ column {j} does not match its declared links")));
                }
            }
            let ones = (0..self.od.nrows()).filter(|&w| self.od[(w, j)] == 1.0).count();
            let others = (0..self.od.nrows()).any(|w| self.od[(w, j)] != 0.0 && self.od[(w, j)] != 1.0);
            if ones != 1 || others {
                return Err(Error::Invalid(format!("B column {j} must hold exactly one 1")));
            }
        }
        for v in [&self.c0, &self.capacity.c_hat0, &self.capacity.c_hat1] {
            if v.len() != links {
                return Err(Error::dim("link vectors must have one entry per link"));
            }
        }
        if self.exponents.len() != links {
            return Err(Error::dim("one GBPR exponent per link"));
        }
        if self.exponents.iter().any(|&e| e != 1) {
            return Err(Error::Unsupported("GBPR exponents other than 1 give a nonlinear map".into()));
        }
        if self.d0.len() != self.od.nrows() || self.d1.len() != self.od.nrows() {
            return Err(Error::dim("demand vectors must have one entry per OD pair"));
        }
        Ok(())
    }

    pub fn n_paths(&self) -> usize {
        self.delta.ncols()
    }

    pub fn n_od(&self) -> usize {
        self.od.nrows()
    }

    /// Path-cost Jacobian for the inverse-capacity vector `r`.
    fn cost_matrix(&self, r: &Vector) -> Mat {
        let diag = Mat::from_diagonal(&self.c0.component_mul(r));
        self.delta.transpose() * diag * &self.delta * (0.15 * self.eta)
    }

    pub fn path_cost_offset(&self) -> Vector {
        self.delta.transpose() * &self.c0 * self.eta
    }

    /// `[[M(u), −Bᵀ], [B, 0]]` and `(q; −d(u))` over `u ∈ [−1, 1]`.
    pub fn to_lcp(&self) -> Result<UncertainLcp> {
        self.validate()?;
        let (np, nw) = (self.n_paths(), self.n_od());
        let lift = |m: &Mat, with_b: bool| {
            let mut big = Mat::zeros(np + nw, np + nw);
            big.view_mut((0, 0), (np, np)).copy_from(m);
            if with_b {
                big.view_mut((0, np), (np, nw)).copy_from(&(-self.od.transpose()));
                big.view_mut((np, 0), (nw, np)).copy_from(&self.od);
            }
            big
        };
        let mut q0 = Vector::zeros(np + nw);
        q0.rows_mut(0, np).copy_from(&self.path_cost_offset());
        q0.rows_mut(np, nw).copy_from(&(-&self.d0));
        let mut q1 = Vector::zeros(np + nw);
        q1.rows_mut(np, nw).copy_from(&(-&self.d1));
        let family = AffineFamily::new(
            lift(&self.cost_matrix(&self.capacity.c_hat0), true),
            q0,
            vec![Shift {
                m: lift(&self.cost_matrix(&self.capacity.c_hat1), false),
                q: q1,
            }],
        )?;
        UncertainLcp::new(family, UncertaintySet::BoxInf)
    }
}

/// OD flows `B x` of the path block of a point.
pub fn od_flows(od: &Mat, z: &[f64]) -> Vec<f64> {
    let np = od.ncols();
    (od * Vector::from_column_slice(&z[..np])).iter().copied().collect()
}

/// `G(x, u)` for every listed scenario.
pub fn gap_row(problem: &UncertainLcp, z: &[f64], us: &[Vector]) -> Result<Vec<ExtReal>> {
    us.iter().map(|u| gap_value(&problem.family, z, u.as_slice())).collect()
}

/// `(α(u), β(u)) = (u(u − 1)/2, u(2 − u))`.
/// Units with path flows in hundreds and costs in thousands.
pub fn traffic_scaling(n_paths: usize, n_od: usize) -> Scaling {
    let mut d = vec![100.0; n_paths];
    d.extend(std::iter::repeat_n(1000.0, n_od));
    Scaling { d, kappa: 1e5 }
}

pub fn alpha_beta(u: f64) -> (f64, f64) {
    (0.5 * u * (u - 1.0), u * (2.0 - u))
}

/// Two-node network with five paths and demand-dependent travel times.
/// The family is affine in `(α, β)`; the three weather scenarios are
/// `u ∈ {0, 1, 2}`.
#[derive(Clone, Debug)]
pub struct TwoNode {
    pub problem: UncertainLcp,
    pub u_values: Vec<f64>,
    /// `(α, β)` of each scenario, in the order of `u_values`.
    pub scenarios: Vec<Vector>,
    pub weights: Vec<f64>,
    pub od: Mat,
}

pub fn build_traffic_2node() -> Result<TwoNode> {
    let od = Mat::from_row_slice(2, 5, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
    let t = Vector::from_vec(vec![1000.0, 950.0, 3000.0, 1000.0, 1300.0]);
    let d = Vector::from_vec(vec![260.0, 170.0]);
    let mut m0 = Mat::zeros(7, 7);
    m0.view_mut((0, 5), (5, 2)).copy_from(&(-od.transpose()));
    m0.view_mut((5, 0), (2, 5)).copy_from(&od);
    let mut q0 = Vector::zeros(7);
    q0.rows_mut(0, 5).copy_from(&t);
    q0.rows_mut(5, 2).copy_from(&(-&d));
    let mut qs = Vector::zeros(7);
    qs.rows_mut(5, 2).fill(100.0);
    let entries = |list: &[(usize, usize, f64)]| {
        let mut m = Mat::zeros(7, 7);
        for &(i, j, v) in list {
            m[(i, j)] = v;
        }
        m
    };
    let m_alpha = entries(&[(0, 0, 40.0), (3, 0, 8.0), (3, 3, 80.0)]);
    let m_beta = entries(&[(0, 3, 20.0), (1, 1, 60.0), (1, 4, 20.0), (2, 2, 80.0), (4, 1, 4.0), (4, 4, 100.0)]);
    let family = AffineFamily::new(
        m0,
        q0,
        vec![
            Shift { m: m_alpha, q: qs.clone() },
            Shift { m: m_beta, q: qs },
        ],
    )?;
    let u_values = vec![0.0, 1.0, 2.0];
    let scenarios: Vec<Vector> = u_values
        .iter()
        .map(|&u| {
            let (a, b) = alpha_beta(u);
            Vector::from_vec(vec![a, b])
        })
        .collect();
    Ok(TwoNode {
        problem: UncertainLcp::new(family, UncertaintySet::FiniteScenarios(scenarios.clone()))?,
        u_values,
        scenarios,
        weights: vec![0.5, 0.25, 0.25],
        od,
    })
}

/// Five-node, seven-link network with two OD pairs and six paths.
#[derive(Clone, Debug)]
pub struct FiveNode {
    pub network: TrafficNetwork,
    /// Box problem over `u ∈ [−1, 1]`.
    pub problem: UncertainLcp,
    /// Vertex reduction of `problem`.
    pub reduced: UncertainLcp,
    pub u_grid: Vec<f64>,
}

pub fn five_node_network(eta: f64) -> TrafficNetwork {
    let paths: Vec<Vec<usize>> = vec![vec![0, 2], vec![0, 6, 5], vec![1, 5], vec![0, 4], vec![0, 6, 3], vec![1, 3]];
    let mut delta = Mat::zeros(7, 6);
    for (j, p) in paths.iter().enumerate() {
        for &i in p {
            delta[(i, j)] = 1.0;
        }
    }
    let od = Mat::from_row_slice(2, 6, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let c_hat0 = Vector::from_vec(vec![1.0 / 40.0, 1.0 / 40.0, 0.05, 0.05, 0.05, 0.05, 0.05]);
    TrafficNetwork {
        delta,
        od,
        paths,
        c0: Vector::from_vec(vec![3.0, 5.0, 6.0, 4.0, 6.0, 4.0, 1.0]),
        capacity: InverseCapacity {
            c_hat1: -&c_hat0,
            c_hat0,
        },
        d0: Vector::from_vec(vec![200.0, 220.0]),
        d1: Vector::from_vec(vec![50.0, 40.0]),
        eta,
        exponents: vec![1; 7],
    }
}

pub fn build_traffic_5node(eta: f64) -> Result<FiveNode> {
    let network = five_node_network(eta);
    let problem = network.to_lcp()?;
    let reduced = box_vertex_reduction(&problem)?;
    Ok(FiveNode {
        network,
        problem,
        reduced,
        u_grid: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
    })
}

/// Minimizer of the scenario gap over the scenario's feasible set.
pub fn scenario_solution(problem: &UncertainLcp, u: &Vector, opts: &PipelineOptions) -> Result<PipelineResult> {
    let single = UncertainLcp::new(problem.family.clone(), UncertaintySet::FiniteScenarios(vec![u.clone()]))?;
    solve_problem(&single, opts)
}

/// `Σₖ wₖ ‖min(x, M(uₖ)x + q(uₖ))‖²`.
pub fn min_residual(problem: &UncertainLcp, scenarios: &[(Vector, f64)], x: &[f64]) -> Result<f64> {
    let xv = Vector::from_column_slice(x);
    let mut s = 0.0;
    for (u, w) in scenarios {
        let (m, q) = problem.scenario(u.as_slice())?;
        let f = &m * &xv + q;
        s += w * xv.zip_map(&f, |a, b| a.min(b).powi(2)).sum();
    }
    Ok(s)
}

/// Expected-residual minimizer of the min-function residual, by descent over
/// the pieces of the piecewise quadratic: each step solves the convex QP of
/// the piece active at the current point. Best over the warm points, the
/// origin and `starts` seeded random starts.
pub fn erm_min_residual(
    problem: &UncertainLcp,
    scenarios: &[(Vector, f64)],
    warm: &[Vector],
    starts: usize,
    seed: u64,
) -> Result<Vector> {
    let n = problem.n();
    let data: Vec<(Mat, Vector, f64)> = scenarios
        .iter()
        .map(|(u, w)| problem.scenario(u.as_slice()).map(|(m, q)| (m, q, *w)))
        .collect::<Result<_>>()?;
    let scale = data.iter().map(|(_, q, _)| q.amax()).fold(1.0, f64::max);
    let ties = |x: &Vector| -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (k, (m, q, _)) in data.iter().enumerate() {
            let f = m * x + q;
            for i in 0..n {
                if (x[i] - f[i]).abs() <= 1e-7 * (1.0 + f[i].abs()) {
                    out.push((k, i));
                }
            }
        }
        out
    };
    // Convex QP of the piece at `x`; near-ties go to `x_i` except those in `flip`.
    let piece_step = |x: &Vector, flip: &[(usize, usize)]| -> Result<Option<Vector>> {
        let mut p = MathProgram::new();
        let v: Vec<VarId> = p.add_vars("x", n, true);
        let mut h = Mat::zeros(n, n);
        let mut c = Vector::zeros(n);
        let mut cst = 0.0;
        for (k, (m, q, w)) in data.iter().enumerate() {
            let f = m * x + q;
            for i in 0..n {
                let row: Vec<(VarId, f64)> = (0..n)
                    .map(|j| (v[j], m[(i, j)] - if i == j { 1.0 } else { 0.0 }))
                    .collect();
                let tie = (x[i] - f[i]).abs() <= 1e-7 * (1.0 + f[i].abs());
                let take_x = if tie { !flip.contains(&(k, i)) } else { x[i] < f[i] };
                let (a, b, sense) = if take_x {
                    let mut a = Vector::zeros(n);
                    a[i] = 1.0;
                    (a, 0.0, Sense::Ge)
                } else {
                    (m.row(i).transpose().into_owned(), q[i], Sense::Le)
                };
                p.add_linear(row, sense, -q[i], format!("piece[{k}][{i}]"));
                h += &a * a.transpose() * *w;
                c += &a * (2.0 * w * b);
                cst += w * b * b;
            }
        }
        let lin = (0..n).map(|j| (v[j], c[j])).collect();
        p.set_objective(lin, v, &h, cst);
        let s = solve_convex(&SolverRequest::new(&p))?;
        Ok(s.is_optimal()
            .then(|| Vector::from_iterator(n, s.values.iter().map(|t| t.max(0.0)))))
    };
    let descend = |start: Vector| -> Result<(f64, Vector)> {
        let mut x = start;
        let mut fx = min_residual(problem, scenarios, x.as_slice())?;
        'outer: for _ in 0..200 {
            let t = ties(&x);
            let mut choices: Vec<Vec<(usize, usize)>> = vec![vec![], t.clone()];
            choices.extend(t.iter().map(|&p| vec![p]));
            for flip in &choices {
                if let Some(cand) = piece_step(&x, flip)? {
                    let fc = min_residual(problem, scenarios, cand.as_slice())?;
                    if fc < fx - 1e-12 * (1.0 + fx) {
                        x = cand;
                        fx = fc;
                        continue 'outer;
                    }
                }
            }
            break;
        }
        Ok((fx, x))
    };
    let mut begin: Vec<Vector> = warm.to_vec();
    begin.push(Vector::zeros(n));
    for k in 0..starts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        begin.push(Vector::from_fn(n, |_, _| rng.random_range(0.0..scale)));
    }
    let mut best: Option<(f64, Vector)> = None;
    for start in begin {
        if start.len() != n {
            return Err(Error::dim("warm point has the wrong length"));
        }
        let (f, x) = descend(start)?;
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, x));
        }
    }
    Ok(best.expect("at least one start").1)
}

/// Options used for the two-node counterparts: branch-and-bound on a `10⁴`
/// box in traffic units.
pub fn two_node_options() -> PipelineOptions {
    PipelineOptions {
        bnb: true,
        box_bound: Some(1e4),
        scaling: Some(traffic_scaling(5, 2)),
        ..Default::default()
    }
}

/// Per-scenario solutions `xᵏ` of the two-node network.
pub fn two_node_scenario_points(t: &TwoNode, opts: &PipelineOptions) -> Result<Vec<Vector>> {
    t.scenarios
        .iter()
        .map(|u| scenario_solution(&t.problem, u, opts).map(|r| Vector::from_vec(r.x)))
        .collect()
}

/// Expected-residual point of the two-node network under the scenario
/// weights, warm-started from the `xᵏ` and their weighted mean.
pub fn two_node_erm(t: &TwoNode, points: &[Vector], starts: usize, seed: u64) -> Result<Vector> {
    let mean = points
        .iter()
        .zip(&t.weights)
        .fold(Vector::zeros(t.problem.n()), |a, (p, w)| a + p * *w);
    let mut warm = points.to_vec();
    warm.push(mean);
    let sc: Vec<(Vector, f64)> = t.scenarios.iter().cloned().zip(t.weights.iter().copied()).collect();
    erm_min_residual(&t.problem, &sc, &warm, starts, seed)
}

/// `max_u eᵀ max(−M(u)x − q(u), 0)`.
pub fn infeasibility(problem: &UncertainLcp, x: &[f64], us: &[Vector]) -> Result<f64> {
    let xv = Vector::from_column_slice(x);
    let mut worst = 0.0f64;
    for u in us {
        let (m, q) = problem.scenario(u.as_slice())?;
        let f = &m * &xv + q;
        worst = worst.max(f.iter().map(|v| (-v).max(0.0)).sum());
    }
    Ok(worst)
}

/// `max_u xᵀ(M(u)x + q(u))`, ignoring feasibility.
pub fn complementarity(problem: &UncertainLcp, x: &[f64], us: &[Vector]) -> Result<f64> {
    let xv = Vector::from_column_slice(x);
    let mut worst = f64::NEG_INFINITY;
    for u in us {
        let (m, q) = problem.scenario(u.as_slice())?;
        worst = worst.max(xv.dot(&(&m * &xv + q)));
    }
    Ok(worst)
}

/// Expected-residual point of a path network: the sample-average minimizer
/// `x*` of `E[zᵀF(z, u) + Q(z, u)]` over `D`, with
/// `z = (I − B†B)x + B†d(u)`, assembled into `(y; w)` with
/// `y = (I − B†B)x* + B†E[d(u)]` and `w` the per-OD minimum of the average
/// path costs. `u` is uniform on `[−1, 1]`.
#[derive(Clone, Debug)]
pub struct ErmPoint {
    pub point: Vector,
    pub x_star: Vector,
    pub objective: f64,
}

pub fn erm_path_network(net: &TrafficNetwork, samples: usize, seed: u64) -> Result<ErmPoint> {
    net.validate()?;
    let (np, nw) = (net.n_paths(), net.n_od());
    let b = &net.od;
    let bbt = b * b.transpose();
    let inv = bbt
        .clone()
        .try_inverse()
        .filter(|_| crate::linalg::min_eigenvalue(&bbt) > 1e-12)
        .ok_or_else(|| Error::Invalid("B Bᵀ is singular".into()))?;
    let bdag = b.transpose() * inv;
    let proj = Mat::identity(np, np) - &bdag * b;
    let q = net.path_cost_offset();
    let demand = |u: f64| &net.d0 + &net.d1 * u;
    let m_at = |u: f64| {
        let r = &net.capacity.c_hat0 + &net.capacity.c_hat1 * u;
        net.cost_matrix(&r)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let us: Vec<f64> = (0..samples.max(1)).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let nk = us.len() as f64;

    let mut p = MathProgram::new();
    let x: Vec<VarId> = p.add_vars("x", np, false);
    let mut h = Mat::zeros(np, np);
    let mut c = Vector::zeros(np);
    let mut cst = 0.0;
    let mut lin: Vec<(VarId, f64)> = Vec::new();
    for (k, &u) in us.iter().enumerate() {
        let m = m_at(u);
        let ms = crate::linalg::sym_part(&m);
        let d = demand(u);
        let r = &bdag * &d;
        h += proj.transpose() * &ms * &proj / nk;
        c += (proj.transpose() * (&ms * &r * 2.0 + &q)) / nk;
        cst += (r.dot(&(&ms * &r)) + q.dot(&r)) / nk;
        let s = p.add_vars(&format!("s[{k}]"), nw, false);
        for (w, &sv) in s.iter().enumerate() {
            lin.push((sv, -d[w] / nk));
            let mp = &m * &proj;
            let off = &m * &r + &q;
            for path in 0..np {
                if b[(w, path)] != 1.0 {
                    continue;
                }
                let mut row: Vec<(VarId, f64)> = (0..np).map(|j| (x[j], mp[(path, j)])).collect();
                row.push((sv, -1.0));
                p.add_linear(row, Sense::Ge, -off[path], format!("min_cost[{k}][{w}][{path}]"));
            }
        }
    }
    let bound = {
        let a = &bdag * demand(-1.0);
        let z = &bdag * demand(1.0);
        a.zip_map(&z, f64::min)
    };
    let bb = &bdag * b;
    for i in 0..np {
        let row = (0..np).map(|j| (x[j], bb[(i, j)])).collect();
        p.add_linear(row, Sense::Le, bound[i], format!("domain[{i}]"));
    }
    lin.extend((0..np).map(|j| (x[j], c[j])));
    p.set_objective(lin, x.clone(), &h, cst);
    let sol = solve_convex(&SolverRequest::new(&p))?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("expected-residual program: {}", sol.message)));
    }
    let xs = Vector::from_iterator(np, x.iter().map(|&i| sol.values[i]));
    let y = &proj * &xs + &bdag * demand(0.0);
    let v = m_at(0.0) * &y + &q;
    let mut point = Vector::zeros(np + nw);
    point.rows_mut(0, np).copy_from(&y);
    for w in 0..nw {
        point[np + w] = (0..np)
            .filter(|&j| b[(w, j)] == 1.0)
            .map(|j| v[j])
            .fold(f64::INFINITY, f64::min);
    }
    Ok(ErmPoint {
        point,
        x_star: xs,
        objective: sol.objective,
    })
}
