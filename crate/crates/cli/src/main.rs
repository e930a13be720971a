//! `ulcp`: build, solve and check robust counterparts from problem files.
//!
//! Exit codes: 0 success, 1 bad input, 2 route refused, 3 solver failure,
//! 4 verification failure.

mod config;

use clap::{Parser, Subcommand};
use config::Settings;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use ulcp_core::harness::experiments::EXPERIMENTS;
use ulcp_core::harness::{run_jobs, solve_problem, ExperimentConfig, PipelineOptions};
use ulcp_core::model::{json as problem_json, residual_report, Probe};
use ulcp_core::program_ir::emit_sdpa;
use ulcp_core::reformulate::build_rc;
use ulcp_core::{Error, Route, UncertainLcp};

#[derive(Parser)]
#[command(name = "ulcp", version, about = "Robust counterparts of uncertain LCPs")]
struct Cli {
    /// TOML settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the counterpart program as JSON.
    BuildRc {
        problem: PathBuf,
        #[arg(long, default_value = "auto")]
        route: String,
    },
    /// Solve the counterpart and print the point and its worst case.
    Solve {
        problem: PathBuf,
        #[arg(long, default_value = "auto")]
        route: String,
        /// Branch-and-bound for nonconvex counterparts.
        #[arg(long)]
        bnb: bool,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Add `x_i ≤ R` rows.
        #[arg(long = "box")]
        box_bound: Option<f64>,
    },
    /// Evaluate a point: worst gap, infeasibility, complementarity.
    Verify {
        problem: PathBuf,
        /// JSON array, or an object with an `x` field.
        point: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also fail when the worst gap exceeds this value.
        #[arg(long)]
        max_gap: Option<f64>,
    },
    /// Regenerate a table (`table1` … `table7` or `all`).
    Experiment {
        name: String,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated sizes for table1 / table2.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Print the counterpart in SDPA sparse format.
    EmitSdpa {
        problem: PathBuf,
        #[arg(long, default_value = "auto")]
        route: String,
    },
}

enum Failure {
    Input(String),
    Core(Error),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Core(Error::RouteRefused { .. }) => 2,
            Failure::Core(Error::Solver(_)) => 3,
            Failure::Core(_) => 1,
            Failure::Verify(_) => 4,
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<UncertainLcp, Failure> {
    Ok(problem_json::from_str(&read(path)?)?)
}

fn parse_route(s: &str) -> Result<Option<Route>, Failure> {
    if s == "auto" {
        return Ok(None);
    }
    Ok(Some(s.parse::<Route>()?))
}

fn load_point(path: &Path) -> Result<Vec<f64>, Failure> {
    let v: serde_json::Value = serde_json::from_str(&read(path)?).map_err(|e| Failure::Input(e.to_string()))?;
    let arr = match &v {
        serde_json::Value::Object(m) => m.get("x").cloned().unwrap_or(serde_json::Value::Null),
        other => other.clone(),
    };
    serde_json::from_value(arr).map_err(|_| Failure::Input("point must be an array of numbers or {\"x\": [...]}".into()))
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("json value")
}

fn run(cli: Cli) -> Result<(), Failure> {
    let settings = Settings::load(cli.config.as_deref()).map_err(Failure::Input)?;
    let mut opts = PipelineOptions::default();
    settings.apply(&mut opts);
    match cli.command {
        Command::BuildRc { problem, route } => {
            let p = load_problem(&problem)?;
            let art = build_rc(&p, parse_route(&route)?)?;
            let mut dump: serde_json::Value = serde_json::from_str(&art.program.to_json()).map_err(Error::from)?;
            dump["route"] = json!(art.route.to_string());
            println!("{}", pretty(&dump));
        }
        Command::Solve {
            problem,
            route,
            bnb,
            eps,
            seed,
            box_bound,
        } => {
            let p = load_problem(&problem)?;
            opts.route = parse_route(&route)?;
            opts.bnb = bnb;
            opts.seed = seed;
            if let Some(e) = eps {
                opts.eps = e;
            }
            if box_bound.is_some() {
                opts.box_bound = box_bound;
            }
            let r = solve_problem(&p, &opts)?;
            let stats = r.bnb.as_ref().map(|s| {
                json!({ "nodes": s.nodes, "gap": s.gap, "glb_lb": s.glb_lb, "glb_ub": s.glb_ub,
                        "hit_cap": s.hit_cap, "monotone_ok": s.monotone_ok })
            });
            println!(
                "{}",
                pretty(&json!({
                    "route": r.artifact.route.to_string(),
                    "method": r.method,
                    "status": format!("{:?}", r.solution.status),
                    "value": r.value,
                    "x": r.x,
                    "worst_gap": r.worst.gap,
                    "worst_u": r.worst.worst_u.as_slice(),
                    "bnb": stats,
                }))
            );
        }
        Command::Verify {
            problem,
            point,
            samples,
            seed,
            max_gap,
        } => {
            let p = load_problem(&problem)?;
            let x = load_point(&point)?;
            let rep = residual_report(&p, &x, &Probe::Auto { samples, seed })?;
            println!("{}", pretty(&serde_json::to_value(&rep).map_err(Error::from)?));
            if !rep.worst_gap.is_finite() {
                return Err(Failure::Verify("point is infeasible for some scenario".into()));
            }
            if let Some(m) = max_gap {
                let g = rep.worst_gap.to_f64();
                if g > m {
                    return Err(Failure::Verify(format!("worst gap {g:.3e} exceeds {m:.3e}")));
                }
            }
        }
        Command::Experiment { name, out, seed, sizes } => {
            let names: Vec<String> = if name == "all" {
                EXPERIMENTS.iter().map(|s| s.to_string()).collect()
            } else {
                vec![name]
            };
            let cfg = ExperimentConfig {
                seed,
                sizes,
                eps: opts.eps,
                node_cap: opts.node_cap,
                ..Default::default()
            };
            let mut first_err = None;
            for (name, r) in run_jobs(&names, &cfg, &out) {
                match r {
                    Ok(dir) => {
                        let txt = std::fs::read_to_string(dir.join("report.txt")).unwrap_or_default();
                        println!("{txt}");
                    }
                    Err(e) => {
                        eprintln!("{name}: {e}");
                        first_err.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = first_err {
                return Err(e.into());
            }
        }
        Command::EmitSdpa { problem, route } => {
            let p = load_problem(&problem)?;
            let art = build_rc(&p, parse_route(&route)?)?;
            print!("{}", emit_sdpa(&art.program)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            match f {
                Failure::Input(m) | Failure::Verify(m) => eprintln!("error: {m}"),
                Failure::Core(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(code)
        }
    }
}
