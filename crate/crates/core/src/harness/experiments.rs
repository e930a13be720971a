//! Named experiments that regenerate the published tables.
//!
//! Every cell carries the computed value, the published value when there is
//! one, and a status. `reproduced` means the computed value matches the
//! published one within the cell's tolerance; `structural` marks cells whose
//! published value depends on an unpublished seed, a third-party solver or a
//! non-unique solution, so only the qualitative pattern is compared;
//! `mismatch` is a disagreement; `computed` has no published counterpart.

use super::cases::{build_elcp, build_ex3, elcp_nonrobust_point};
use super::pipeline::{solve_problem, PipelineOptions, PipelineResult};
use super::traffic::{
    build_traffic_2node, build_traffic_5node, complementarity, erm_path_network, gap_row, infeasibility, od_flows,
    scenario_solution, two_node_erm, two_node_options, two_node_scenario_points, FiveNode, TwoNode,
};
use crate::model::ExtReal;
use crate::{Error, Result, Vector};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXPERIMENTS: [&str; 7] = ["table1", "table2", "table3", "table4", "table5", "table6", "table7"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Reproduced,
    Structural,
    Mismatch,
    Computed,
}

impl CellStatus {
    fn tag(self) -> &'static str {
        match self {
            CellStatus::Reproduced => "R",
            CellStatus::Structural => "S",
            CellStatus::Mismatch => "M",
            CellStatus::Computed => "-",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub text: String,
    /// Numeric value; `None` for text cells, `+∞` is serialized as `null`.
    pub value: Option<f64>,
    pub published: Option<String>,
    pub status: CellStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub label: String,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub caption: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub notes: Vec<String>,
    pub config: ExperimentConfig,
    pub elapsed_ms: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Problem sizes for table1 and table2; each has its own default.
    pub sizes: Option<Vec<usize>>,
    pub starts: usize,
    pub eps: f64,
    pub node_cap: usize,
    pub erm_samples: usize,
    /// Cost scale of the five-node network.
    pub eta: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            sizes: None,
            starts: 40,
            eps: crate::bnb::DEFAULT_EPS,
            node_cap: crate::bnb::DEFAULT_NODE_CAP,
            erm_samples: 1000,
            eta: 1.0,
        }
    }
}

/// `v` in the published style: `sig` significant digits, `1.8e+06`.
pub fn sci(v: f64, sig: usize) -> String {
    if !v.is_finite() {
        return if v > 0.0 { "Inf".into() } else { format!("{v}") };
    }
    let s = format!("{:.*e}", sig.saturating_sub(1), v);
    let (mant, exp) = s.split_once('e').expect("exponent");
    let e: i32 = exp.parse().expect("exponent digits");
    format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
}

fn fixed(v: f64, digits: usize) -> String {
    if v.is_finite() {
        format!("{v:.digits$}")
    } else {
        "Inf".into()
    }
}

fn computed(text: String, value: Option<f64>) -> Cell {
    Cell {
        text,
        value,
        published: None,
        status: CellStatus::Computed,
    }
}

fn with_published(text: String, value: Option<f64>, published: &str, status: CellStatus) -> Cell {
    Cell {
        text,
        value,
        published: Some(published.to_string()),
        status,
    }
}

fn pass(ok: bool) -> CellStatus {
    if ok {
        CellStatus::Reproduced
    } else {
        CellStatus::Mismatch
    }
}

/// Half a unit in the last printed digit of `published`.
fn printed_half_ulp(published: &str) -> f64 {
    let (mant, exp) = match published.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().unwrap_or(0)),
        None => (published, 0),
    };
    let decimals = mant.split_once('.').map_or(0, |(_, f)| f.len()) as i32;
    0.5 * 10f64.powi(exp - decimals)
}

/// Matches `published` within `rel` relative error or at the printed precision.
pub fn matches_printed(v: f64, published: &str, rel: f64) -> bool {
    let Ok(p) = published.parse::<f64>() else {
        return false;
    };
    v.is_finite() && (v - p).abs() <= (rel * p.abs()).max(printed_half_ulp(published))
}

fn ext_cell(g: ExtReal, published: &str, rel: f64, finite_status: CellStatus) -> Cell {
    let v = g.to_f64();
    let text = if v.is_finite() { sci(v, 3) } else { "Inf".into() };
    let value = v.is_finite().then_some(v);
    let status = match (v.is_finite(), published == "Inf") {
        (false, true) => CellStatus::Reproduced,
        (true, false) if matches_printed(v, published, rel) => CellStatus::Reproduced,
        (true, false) => finite_status,
        _ => CellStatus::Mismatch,
    };
    with_published(text, value, published, status)
}

fn worst(row: &[ExtReal]) -> f64 {
    row.iter().map(|g| g.to_f64()).fold(f64::NEG_INFINITY, f64::max)
}

fn vector_text(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{:.2}", x + 0.0)).collect();
    format!("({})", parts.join(", "))
}

fn within_each(v: &[f64], published: &[f64], tol: f64) -> bool {
    v.len() == published.len() && v.iter().zip(published).all(|(a, b)| (a - b).abs() <= tol)
}

fn bnb_opts(config: &ExperimentConfig) -> PipelineOptions {
    PipelineOptions {
        bnb: true,
        eps: config.eps,
        node_cap: config.node_cap,
        seed: config.seed,
        local_starts: config.starts,
        ..Default::default()
    }
}

pub fn run_experiment(name: &str, config: &ExperimentConfig) -> Result<Report> {
    let start = Instant::now();
    let mut report = match name {
        "table1" => table1(config),
        "table2" => table2(config),
        "table3" => table3(&two_node_study(config)?),
        "table4" => table4(&two_node_study(config)?),
        "table5" => table5(&two_node_study(config)?),
        "table6" => table6(&five_node_study(config)?),
        "table7" => table7(&five_node_study(config)?),
        other => {
            return Err(Error::Invalid(format!(
                "unknown experiment {other:?}; expected one of {}",
                EXPERIMENTS.join(", ")
            )))
        }
    }?;
    report.name = name.to_string();
    report.config = config.clone();
    report.elapsed_ms = start.elapsed().as_millis();
    Ok(report)
}

fn blank(caption: &str, columns: &[&str]) -> Report {
    Report {
        name: String::new(),
        caption: caption.to_string(),
        columns: columns.iter().map(|c| c.to_string()).collect(),
        rows: Vec::new(),
        notes: Vec::new(),
        config: ExperimentConfig::default(),
        elapsed_ms: 0,
    }
}

const TABLE1: [(usize, &str, &str, &str, &str); 5] = [
    (10, "3.9e-08", "2.0e-07", "0.4e+03", "5.0e+07"),
    (20, "4.7e-08", "3.6e-07", "0.7e+03", "1.0e+09"),
    (40, "1.8e-07", "2.2e-06", "1.6e+03", "4.3e+10"),
    (80, "5.1e-07", "5.2e-06", "5.5e+03", "3.9e+12"),
    (160, "1.6e-05", "5.3e-04", "1.6e+04", "2.8e+14"),
];

fn table1(config: &ExperimentConfig) -> Result<Report> {
    let sizes = config.sizes.clone().unwrap_or_else(|| TABLE1.iter().map(|r| r.0).collect());
    let mut rep = blank(
        "Robust vs non-robust solutions",
        &["n", "|x_rob - x_anlyt|", "residual of x_rob", "|x_nrob - x_anlyt|", "residual of x_nrob"],
    );
    for n in sizes {
        let case = build_elcp(n, &Vector::from_element(n, 1.0))?;
        let r = solve_problem(&case.problem, &PipelineOptions::default())?;
        let err = (Vector::from_vec(r.x.clone()) - &case.x_star).norm();
        let res = r.worst.gap.to_f64();
        let nrob = elcp_nonrobust_point(&case, &Vector::from_element(n, (n * n) as f64));
        let nres = crate::reformulate::worst_case(&case.problem, nrob.as_slice())?.objective;
        let ndist = (&nrob - &case.x_star).norm();
        let published = TABLE1.iter().find(|p| p.0 == n);
        let cell = |text: String, v: f64, idx: usize, status: CellStatus| match published {
            Some(p) => with_published(text, Some(v), [p.1, p.2, p.3, p.4][idx], status),
            None => computed(text, Some(v)),
        };
        rep.rows.push(Row {
            label: n.to_string(),
            cells: vec![
                computed(n.to_string(), Some(n as f64)),
                cell(sci(err, 2), err, 0, pass(err <= 1e-4)),
                cell(sci(res, 2), res, 1, pass(res.abs() <= 1e-3)),
                cell(sci(ndist, 2), ndist, 2, CellStatus::Structural),
                cell(
                    sci(nres, 2),
                    nres,
                    3,
                    if nres > 1e6 { CellStatus::Structural } else { CellStatus::Mismatch },
                ),
            ],
        });
    }
    rep.notes.push("q_x = e; x_nrob = (x_anlyt, n^2 e) solves the scenario u = xi = eta = 0 only".into());
    rep.notes.push("x_rob cells are reproduced when within 1e-4 (distance) and 1e-3 (residual)".into());
    Ok(rep)
}

const TABLE2: [(usize, &str, usize); 7] = [
    (6, "0.0100", 35),
    (7, "0.0035", 82),
    (8, "0.1648", 87),
    (9, "0.0072", 406),
    (10, "0.0040", 254),
    (11, "0.0036", 893),
    (12, "0.1998", 1539),
];

fn table2(config: &ExperimentConfig) -> Result<Report> {
    let sizes = config.sizes.clone().unwrap_or_else(|| TABLE2.iter().map(|r| r.0).collect());
    let mut rep = blank(
        "Global optimization of nonconvex QCQPs",
        &["n", "time(s)", "z_branch", "nodes", "gap", "time(s) multistart", "z_multistart", "|x_b - x_m|/(1+|x_b|)"],
    );
    for n in sizes {
        let p = build_ex3(n, config.seed)?;
        let t0 = Instant::now();
        let b = solve_problem(&p, &bnb_opts(config))?;
        let tb = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let m = solve_problem(&p, &PipelineOptions { bnb: false, ..bnb_opts(config) })?;
        let tm = t1.elapsed().as_secs_f64();
        let st = b.bnb.as_ref().expect("bnb stats");
        let xb = Vector::from_vec(b.x.clone());
        let dx = (&xb - Vector::from_vec(m.x.clone())).norm() / (1.0 + xb.norm());
        let published = TABLE2.iter().find(|r| r.0 == n);
        let seeded = |text: String, v: f64, pv: Option<String>| match pv {
            Some(pv) => with_published(text, Some(v), &pv, CellStatus::Structural),
            None => computed(text, Some(v)),
        };
        let gap_ok = st.gap < config.eps && !st.hit_cap;
        rep.rows.push(Row {
            label: n.to_string(),
            cells: vec![
                computed(n.to_string(), Some(n as f64)),
                computed(format!("{tb:.2}"), Some(tb)),
                seeded(format!("{:.4}", b.value), b.value, published.map(|p| p.1.to_string())),
                seeded(st.nodes.to_string(), st.nodes as f64, published.map(|p| p.2.to_string())),
                match published {
                    Some(_) => with_published(format!("{:.2}", st.gap.max(0.0)), Some(st.gap), "0.00", pass(gap_ok)),
                    None => computed(format!("{:.2}", st.gap.max(0.0)), Some(st.gap)),
                },
                computed(format!("{tm:.2}"), Some(tm)),
                computed(format!("{:.4}", m.value), Some(m.value)),
                computed(format!("{dx:.2}"), Some(dx)),
            ],
        });
    }
    rep.notes.push(format!(
        "B drawn from seed {}; the published instances use an unpublished seed, so values and node counts are structural",
        config.seed
    ));
    rep.notes.push("third-party solver columns are replaced by the built-in multistart".into());
    Ok(rep)
}

/// Everything tables 3 to 5 need.
pub struct TwoNodeStudy {
    pub net: TwoNode,
    pub robust: PipelineResult,
    /// `x¹, x², x³`.
    pub points: Vec<Vector>,
    pub erm: Vector,
}

pub fn two_node_study(config: &ExperimentConfig) -> Result<TwoNodeStudy> {
    let net = build_traffic_2node()?;
    let opts = PipelineOptions {
        eps: config.eps,
        node_cap: config.node_cap,
        ..two_node_options()
    };
    let robust = solve_problem(&net.problem, &opts)?;
    let points = two_node_scenario_points(&net, &opts)?;
    let erm = two_node_erm(&net, &points, config.starts, config.seed)?;
    Ok(TwoNodeStudy {
        net,
        robust,
        points,
        erm,
    })
}

pub const TWO_NODE_ROB: [f64; 7] = [117.7, 89.5, 52.8, 90.5, 79.5, 950.0, 1000.0];
pub const TWO_NODE_ERM: [f64; 7] = [84.0, 84.0, 21.0, 80.0, 20.0, 975.0, 1000.0];

fn table3(s: &TwoNodeStudy) -> Result<Report> {
    let mut rep = blank("Comparison across solutions", &["solution", "infeasibility", "complementarity"]);
    let us = &s.net.scenarios;
    let published: [(&str, [f64; 7], &str, &str, f64, f64); 5] = [
        ("x1", [0.0, 260.0, 0.0, 170.0, 0.0, 950.0, 1000.0], "0", "4.251e6", 0.5, 0.01),
        ("x2", [159.2, 0.83, 0.0, 70.0, 0.0, 1000.0, 1000.0], "250", "1.717e6", 0.5, 0.01),
        ("x3", [0.0, 160.0, 0.0, 3.75, 66.25, 950.0, 1300.0], "500", "2.228e6", 0.5, 0.01),
        ("x_erm", TWO_NODE_ERM, "166", "1.089e6", 2.0, 0.05),
        ("x_rob", TWO_NODE_ROB, "0", "1.840e6", 0.5, 0.01),
    ];
    for (k, (label, px, pinf, pcomp, xtol, ctol)) in published.iter().enumerate() {
        let x: Vec<f64> = match k {
            0..=2 => s.points[k].as_slice().to_vec(),
            3 => s.erm.as_slice().to_vec(),
            _ => s.robust.x.clone(),
        };
        let inf = infeasibility(&s.net.problem, &x, us)?;
        let comp = complementarity(&s.net.problem, &x, us)?;
        let inf_tol = if *label == "x_erm" { 5.0 } else { 1e-6 * (1.0 + pinf.parse::<f64>().unwrap_or(0.0)) };
        let x_status = match (k, within_each(&x, px, *xtol)) {
            (_, true) => CellStatus::Reproduced,
            // Scenario LCPs have non-unique solutions.
            (0..=2, false) => CellStatus::Structural,
            _ => CellStatus::Mismatch,
        };
        rep.rows.push(Row {
            label: label.to_string(),
            cells: vec![
                with_published(vector_text(&x), None, &vector_text(px), x_status),
                with_published(
                    fixed(inf, 2),
                    Some(inf),
                    pinf,
                    pass((inf - pinf.parse::<f64>().unwrap_or(f64::NAN)).abs() <= inf_tol),
                ),
                with_published(sci(comp, 4), Some(comp), pcomp, pass(matches_printed(comp, pcomp, *ctol))),
            ],
        });
    }
    let rob_worst = worst(&gap_row(&s.net.problem, &s.robust.x, us)?);
    let dominated = std::iter::once(&s.erm)
        .chain(&s.points)
        .map(|x| gap_row(&s.net.problem, x.as_slice(), us).map(|r| rob_worst <= worst(&r) + 1e-6 * (1.0 + rob_worst)))
        .collect::<Result<Vec<bool>>>()?;
    rep.notes.push(format!(
        "robust dominance (max over u of G): {}",
        if dominated.iter().all(|b| *b) { "holds" } else { "violated" }
    ));
    rep.notes.push("scenarios u = 0, 1, 2 for (alpha, beta) = (u(u-1)/2, u(2-u)); weights 1/2, 1/4, 1/4".into());
    rep.notes.push("x_erm minimizes the weighted squared min-function residual".into());
    if let Some(b) = &s.robust.bnb {
        rep.notes.push(format!("x_rob by branch-and-bound: {} nodes, gap {:.1e}", b.nodes, b.gap.max(0.0)));
    }
    Ok(rep)
}

fn table4(s: &TwoNodeStudy) -> Result<Report> {
    let mut rep = blank("Evaluation of G(x*, u)", &["u = u1", "u = u2", "u = u3"]);
    let rows: [(&str, &[f64], [&str; 3], CellStatus); 2] = [
        ("x_rob", &s.robust.x, ["1.4e+5", "1.8e+6", "1.8e+6"], CellStatus::Mismatch),
        ("x_erm", s.erm.as_slice(), ["Inf", "6.5e+5", "Inf"], CellStatus::Mismatch),
    ];
    for (label, x, published, finite_status) in rows {
        let g = gap_row(&s.net.problem, x, &s.net.scenarios)?;
        rep.rows.push(Row {
            label: label.into(),
            cells: g
                .iter()
                .zip(published)
                .map(|(gi, p)| ext_cell(*gi, p, 0.01, finite_status))
                .collect(),
        });
    }
    rep.notes.push("finite cells match within 1% or at the published precision".into());
    Ok(rep)
}

fn table5(s: &TwoNodeStudy) -> Result<Report> {
    let mut rep = blank("Flow of each OD pair", &["possible demand", "x_RO", "x_ERM", "x_1", "x_2", "x_3"]);
    let od = &s.net.od;
    let mut cols: Vec<Vec<f64>> = vec![od_flows(od, &s.robust.x), od_flows(od, s.erm.as_slice())];
    cols.extend(s.points.iter().map(|p| od_flows(od, p.as_slice())));
    let published = [[260.0, 189.0, 260.0, 160.0, 160.0], [170.0, 100.0, 170.0, 70.0, 70.0]];
    for (w, (label, demand)) in [("AB", "260,160"), ("BA", "170,70")].into_iter().enumerate() {
        let mut cells = vec![with_published(demand.into(), None, demand, CellStatus::Reproduced)];
        for (c, col) in cols.iter().enumerate() {
            let v = col[w];
            cells.push(with_published(
                format!("{v:.0}"),
                Some(v),
                &format!("{}", published[w][c]),
                pass((v - published[w][c]).abs() <= 0.5),
            ));
        }
        rep.rows.push(Row {
            label: label.into(),
            cells,
        });
    }
    Ok(rep)
}

/// Everything tables 6 and 7 need.
pub struct FiveNodeStudy {
    pub net: FiveNode,
    pub robust: PipelineResult,
    pub erm: Vector,
    /// `x¹ … x⁵` in the published column order.
    pub points: Vec<Vector>,
    pub point_u: Vec<f64>,
}

/// Published column order of the per-scenario points.
pub const FIVE_NODE_POINT_U: [f64; 5] = [-1.0, -0.5, 0.5, 1.0, 0.0];

pub fn five_node_study(config: &ExperimentConfig) -> Result<FiveNodeStudy> {
    let net = build_traffic_5node(config.eta)?;
    let robust = solve_problem(&net.reduced, &PipelineOptions::default())?;
    let erm = erm_path_network(&net.network, config.erm_samples, config.seed)?.point;
    let points = FIVE_NODE_POINT_U
        .iter()
        .map(|&u| {
            scenario_solution(&net.problem, &Vector::from_vec(vec![u]), &PipelineOptions::default())
                .map(|r| Vector::from_vec(r.x))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FiveNodeStudy {
        net,
        robust,
        erm,
        points,
        point_u: FIVE_NODE_POINT_U.to_vec(),
    })
}

fn five_node_columns(s: &FiveNodeStudy) -> Vec<(String, Vec<f64>)> {
    let mut cols = vec![("x_rob".to_string(), s.robust.x.clone()), ("x_erm".to_string(), s.erm.as_slice().to_vec())];
    cols.extend(
        s.points
            .iter()
            .enumerate()
            .map(|(k, p)| (format!("x{}", k + 1), p.as_slice().to_vec())),
    );
    cols
}

fn table6(s: &FiveNodeStudy) -> Result<Report> {
    let mut rep = blank(
        "Flow across two OD pairs",
        &["range of possible demand", "x_rob", "x_erm", "x1", "x2", "x3", "x4", "x5"],
    );
    let published = [[250.0, 200.0, 150.0, 175.0, 225.0, 250.0, 200.0], [260.0, 220.0, 180.0, 200.0, 240.0, 260.0, 220.0]];
    let cols = five_node_columns(s);
    for (w, (label, range)) in [("AD", "150-250"), ("AE", "180-260")].into_iter().enumerate() {
        let mut cells = vec![with_published(range.into(), None, range, CellStatus::Reproduced)];
        for (c, (_, x)) in cols.iter().enumerate() {
            let v = od_flows(&s.net.network.od, x)[w];
            cells.push(with_published(
                format!("{v:.0}"),
                Some(v),
                &format!("{}", published[w][c]),
                pass((v - published[w][c]).abs() <= 0.5),
            ));
        }
        rep.rows.push(Row {
            label: label.into(),
            cells,
        });
    }
    rep.notes.push(format!("x1..x5 solve the scenarios u = {:?}", s.point_u));
    Ok(rep)
}

pub const TABLE7_ROB: [f64; 5] = [10343.0, 7863.0, 5382.0, 2901.0, 421.0];

fn table7(s: &FiveNodeStudy) -> Result<Report> {
    let mut rep = blank(
        "Residual function value at different sample points",
        &["x_rob", "x_erm", "x1", "x2", "x3", "x4", "x5"],
    );
    let published: [[&str; 7]; 5] = [
        ["10343", "4340", "6488", "7922", "18322", "19000", "4329"],
        ["7863", "2176", "Inf", "6772", "14671", "14250", "2165"],
        ["5382", "Inf", "Inf", "Inf", "11021", "9500", "0.000449"],
        ["2901", "Inf", "Inf", "Inf", "7370", "4750", "Inf"],
        ["421", "Inf", "Inf", "Inf", "Inf", "1.170e-05", "Inf"],
    ];
    let us: Vec<Vector> = s.net.u_grid.iter().map(|&u| Vector::from_vec(vec![u])).collect();
    let cols = five_node_columns(s);
    let grid: Vec<Vec<ExtReal>> = cols
        .iter()
        .map(|(_, x)| gap_row(&s.net.problem, x, &us))
        .collect::<Result<_>>()?;
    for (i, u) in s.net.u_grid.iter().enumerate() {
        let cells = (0..cols.len())
            .map(|c| {
                let g = grid[c][i];
                let p = published[i][c];
                // Near-zero published values: compare absolutely.
                if p.parse::<f64>().is_ok_and(|v| v.abs() < 1e-2) {
                    let v = g.to_f64();
                    return with_published(sci(v, 3), v.is_finite().then_some(v), p, pass(v.abs() <= 1e-2));
                }
                let finite = if c == 0 { CellStatus::Mismatch } else { CellStatus::Structural };
                ext_cell(g, p, 0.05, finite)
            })
            .collect();
        rep.rows.push(Row {
            label: format!("{u}"),
            cells,
        });
    }
    let rob = worst(&grid[0]);
    let ok = grid[1..].iter().all(|r| rob <= worst(r) + 1e-6 * (1.0 + rob));
    rep.notes.push(format!(
        "robust dominance over every listed column: {}",
        if ok { "holds" } else { "violated" }
    ));
    rep.notes.push(format!("eta = {}; finite cells within 5% are reproduced", s.net.network.eta));
    rep.notes.push(
        "scenario LCPs have non-unique solutions, so finite x1..x5 and x_erm cells outside 5% are structural".into(),
    );
    Ok(rep)
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Plain-text table in the published layout, each cell tagged with its
    /// status.
    pub fn render(&self) -> String {
        let mut grid: Vec<Vec<String>> = vec![std::iter::once(String::new()).chain(self.columns.clone()).collect()];
        for r in &self.rows {
            let mut line = vec![r.label.clone()];
            line.extend(r.cells.iter().map(|c| format!("{} [{}]", c.text, c.status.tag())));
            grid.push(line);
        }
        let ncol = grid.iter().map(|r| r.len()).max().unwrap_or(0);
        let widths: Vec<usize> = (0..ncol)
            .map(|j| grid.iter().filter_map(|r| r.get(j)).map(|s| s.chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = format!("{}: {}\n", self.name, self.caption);
        for (i, r) in grid.iter().enumerate() {
            let cells: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(j, s)| format!("{s:<w$}", w = widths[j]))
                .collect();
            out.push_str(cells.join(" | ").trim_end());
            out.push('\n');
            if i == 0 {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 3 * ncol.saturating_sub(1)));
                out.push('\n');
            }
        }
        out.push_str("[R] reproduced  [S] structural  [M] mismatch  [-] computed\n");
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }

    pub fn count(&self, status: CellStatus) -> usize {
        self.rows.iter().flat_map(|r| &r.cells).filter(|c| c.status == status).count()
    }

    /// Writes `report.json` and `report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        std::fs::write(dir.join("report.txt"), self.render())?;
        Ok(())
    }
}

/// Runs the experiments concurrently, each writing into `out/<name>/`.
pub fn run_jobs(names: &[String], config: &ExperimentConfig, out: &Path) -> Vec<(String, Result<PathBuf>)> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = names
            .iter()
            .map(|name| {
                scope.spawn(move || {
                    let dir = out.join(name);
                    let r = run_experiment(name, config).and_then(|rep| rep.write(&dir).map(|_| dir));
                    (name.clone(), r)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| (String::new(), Err(Error::Solver("experiment job panicked".into())))))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci_matches_published_style() {
        assert_eq!(sci(1.8443e6, 2), "1.8e+06");
        assert_eq!(sci(3.9e-8, 2), "3.9e-08");
        assert_eq!(sci(f64::INFINITY, 2), "Inf");
    }

    #[test]
    fn printed_precision() {
        assert!(matches_printed(1.8443e6, "1.8e+6", 0.01));
        assert!(!matches_printed(1.284e5, "1.4e+5", 0.01));
        assert!(matches_printed(10343.2, "10343", 0.0));
        assert_eq!(printed_half_ulp("1.840e6"), 500.0);
    }

    #[test]
    fn unknown_experiment() {
        assert!(run_experiment("table9", &ExperimentConfig::default()).is_err());
    }

    #[test]
    fn table1_small_reproduces() {
        let cfg = ExperimentConfig {
            sizes: Some(vec![10]),
            ..Default::default()
        };
        let rep = run_experiment("table1", &cfg).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].cells[1].status, CellStatus::Reproduced);
        assert_eq!(rep.rows[0].cells[2].status, CellStatus::Reproduced);
        let back: Report = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        assert_eq!(back.rows.len(), 1);
        assert!(rep.render().contains("[R]"));
    }

    #[test]
    fn jobs_write_isolated_dirs() {
        let dir = std::env::temp_dir().join(format!("ulcp-jobs-{}", std::process::id()));
        let cfg = ExperimentConfig {
            sizes: Some(vec![4]),
            ..Default::default()
        };
        let out = run_jobs(&["table1".into(), "table6".into()], &cfg, &dir);
        for (name, r) in out {
            let path = r.unwrap();
            assert!(path.ends_with(&name));
            assert!(path.join("report.json").exists());
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
