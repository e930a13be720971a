//! Case studies, baselines and experiment reports.

pub mod cases;
pub mod experiments;
pub mod pipeline;
pub mod traffic;

pub use cases::{build_elcp, build_ex3, ElcpCase};
pub use pipeline::{add_box, solve_problem, Method, PipelineOptions, PipelineResult, Scaling};
pub use traffic::{build_traffic_2node, build_traffic_5node, TrafficNetwork};
pub use experiments::{run_experiment, run_jobs, CellStatus, ExperimentConfig, Report};
