//! Build, solve and verify in one call.

use crate::bnb::{bnb_solve, BnbOptions, BnbStats, DEFAULT_EPS, DEFAULT_NODE_CAP};
use crate::model::UncertainLcp;
use crate::program_ir::{Sense, SolveStatus};
use crate::reformulate::{build_rc, worst_case, RcArtifact, Route, WorstCase};
use crate::solver::{sdp_roundtrip, solve_convex, solve_local, ExternalSdp, LocalOptions, SolverRequest};
use crate::{Error, Result, SolutionPoint, Vector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Convex,
    ExternalSdp,
    Bnb,
    Local,
}

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub route: Option<Route>,
    /// Use branch-and-bound for nonconvex counterparts instead of multistart.
    pub bnb: bool,
    pub eps: f64,
    pub node_cap: usize,
    pub seed: u64,
    pub local_starts: usize,
    /// Extra `x_i ≤ r` rows, needed by branch-and-bound when the linear
    /// constraints leave `x` unbounded.
    pub box_bound: Option<f64>,
    pub sdp: Option<ExternalSdp>,
    /// Solve in rescaled units; results are mapped back.
    pub scaling: Option<Scaling>,
    /// Backend tolerances for convex and local solves.
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: u32,
}

/// `x = D x'` and gaps divided by `kappa`, see [`AffineFamily::rescaled`].
///
/// [`AffineFamily::rescaled`]: crate::model::AffineFamily::rescaled
#[derive(Clone, Debug, PartialEq)]
pub struct Scaling {
    pub d: Vec<f64>,
    pub kappa: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            route: None,
            bnb: false,
            eps: DEFAULT_EPS,
            node_cap: DEFAULT_NODE_CAP,
            seed: 0,
            local_starts: 20,
            box_bound: None,
            sdp: None,
            scaling: None,
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub artifact: RcArtifact,
    pub solution: SolutionPoint,
    pub x: Vec<f64>,
    /// Optimal value of the counterpart.
    pub value: f64,
    pub method: Method,
    pub bnb: Option<BnbStats>,
    /// Exact worst case at `x`, recomputed from the problem data.
    pub worst: WorstCase,
}

/// Append `x_i ≤ r` for every primal variable of the counterpart.
pub fn add_box(art: &mut RcArtifact, r: f64) {
    let n = art.x_ids().len();
    add_box_each(art, &vec![r; n]);
}

fn add_box_each(art: &mut RcArtifact, r: &[f64]) {
    for (i, id) in art.x_ids().into_iter().enumerate() {
        art.program.add_linear(vec![(id, 1.0)], Sense::Le, r[i], format!("box[{i}]"));
    }
}

pub fn solve_problem(problem: &UncertainLcp, opts: &PipelineOptions) -> Result<PipelineResult> {
    let Some(sc) = &opts.scaling else {
        let mut art = build_rc(problem, opts.route)?;
        if let Some(r) = opts.box_bound {
            add_box(&mut art, r);
        }
        return solve_artifact(problem, art, opts);
    };
    let d = Vector::from_vec(sc.d.clone());
    let scaled = problem.rescaled(&d, sc.kappa)?;
    let mut art = build_rc(&scaled, opts.route)?;
    if let Some(r) = opts.box_bound {
        let each: Vec<f64> = sc.d.iter().map(|di| r / di).collect();
        add_box_each(&mut art, &each);
    }
    let mut out = solve_artifact(&scaled, art, opts)?;
    for (xi, di) in out.x.iter_mut().zip(&sc.d) {
        *xi *= di;
    }
    out.value *= sc.kappa;
    if let Some(st) = out.bnb.as_mut() {
        st.glb_lb *= sc.kappa;
        st.glb_ub *= sc.kappa;
        st.gap *= sc.kappa;
        for v in st.lb_history.iter_mut() {
            *v *= sc.kappa;
        }
    }
    out.worst = worst_case(problem, &out.x)?;
    Ok(out)
}

pub fn solve_artifact(problem: &UncertainLcp, art: RcArtifact, opts: &PipelineOptions) -> Result<PipelineResult> {
    let req = SolverRequest::new(&art.program)
        .with_tolerances(opts.feas_tol, opts.gap_tol)
        .with_max_iter(opts.max_iter);
    let (solution, method, stats) = if art.is_convex() {
        let s = solve_convex(&req)?;
        if s.status == SolveStatus::Skipped {
            match ExternalSdp::resolve(opts.sdp.clone()) {
                Some(cfg) => (sdp_roundtrip(&art.program, Some(&cfg))?, Method::ExternalSdp, None),
                None => return Err(Error::Solver(s.message)),
            }
        } else {
            (s, Method::Convex, None)
        }
    } else if opts.bnb {
        let r = bnb_solve(
            &art.program,
            &BnbOptions {
                eps: opts.eps,
                node_cap: opts.node_cap,
                trace: true,
            },
        )?;
        (r.solution, Method::Bnb, Some(r.stats))
    } else {
        let lo = LocalOptions {
            starts: opts.local_starts,
            seed: opts.seed,
            ..Default::default()
        };
        (solve_local(&req, &lo)?, Method::Local, None)
    };
    let certified = solution.is_optimal() || (method == Method::Bnb && solution.status == SolveStatus::IterationLimit);
    if !certified {
        return Err(Error::Solver(format!(
            "{} solve ended with {:?}: {}",
            art.route, solution.status, solution.message
        )));
    }
    let x = art.extract_x(&solution);
    let worst = worst_case(problem, &x)?;
    Ok(PipelineResult {
        value: solution.objective,
        x,
        solution,
        method,
        bnb: stats,
        worst,
        artifact: art,
    })
}
