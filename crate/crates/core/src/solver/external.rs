//! Optional round trip through an external SDP solver that reads SDPA
//! sparse input and writes a CSDP-style solution file (first line: the
//! variable vector).

use super::ACCEPT_PRIMAL;
use crate::program_ir::{emit_sdpa, MathProgram, SolutionPoint, SolveStatus};
use crate::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};

/// Environment override for the solver executable.
pub const SDP_ENV: &str = "ULCP_SDP_SOLVER";

#[derive(Clone, Debug, PartialEq)]
pub struct ExternalSdp {
    pub executable: String,
    /// Argument template; `{input}` and `{output}` are substituted.
    pub args: Vec<String>,
}

impl ExternalSdp {
    pub fn csdp(executable: impl Into<String>) -> Self {
        ExternalSdp {
            executable: executable.into(),
            args: vec!["{input}".into(), "{output}".into()],
        }
    }

    /// Apply the environment override, if set, to an optional configuration.
    pub fn resolve(config: Option<ExternalSdp>) -> Option<ExternalSdp> {
        match std::env::var(SDP_ENV) {
            Ok(exe) if !exe.trim().is_empty() => Some(match config {
                Some(mut c) => {
                    c.executable = exe;
                    c
                }
                None => ExternalSdp::csdp(exe),
            }),
            _ => config,
        }
    }

    fn locate(&self) -> Option<PathBuf> {
        let p = Path::new(&self.executable);
        if p.components().count() > 1 {
            return p.is_file().then(|| p.to_path_buf());
        }
        std::env::var_os("PATH").and_then(|paths| {
            std::env::split_paths(&paths)
                .map(|d| d.join(&self.executable))
                .find(|c| c.is_file())
        })
    }
}

/// Parse the first line of a CSDP-style solution file as `m` numbers.
pub fn parse_csdp_solution(text: &str, m: usize) -> Result<Vec<f64>> {
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::Parse("empty solution file".into()))?;
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("bad number '{t}' in solution file")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != m {
        return Err(Error::Parse(format!(
            "solution file has {} values, expected {m}",
            vals.len()
        )));
    }
    Ok(vals)
}

static COUNTER: AtomicUsize = AtomicUsize::new(0);

/// Emit SDPA, run the external solver, parse its point and verify every
/// constraint to `1e-6` before reporting it as optimal.
pub fn sdp_roundtrip(prog: &MathProgram, cfg: Option<&ExternalSdp>) -> Result<SolutionPoint> {
    let n = prog.num_vars();
    let Some(cfg) = cfg else {
        return Ok(SolutionPoint::failed(SolveStatus::Skipped, n, "no external SDP solver configured"));
    };
    let Some(exe) = cfg.locate() else {
        return Ok(SolutionPoint::failed(
            SolveStatus::Skipped,
            n,
            format!("external SDP solver '{}' not found", cfg.executable),
        ));
    };
    let text = emit_sdpa(prog)?;
    let tag = format!("ulcp-{}-{}", std::process::id(), COUNTER.fetch_add(1, Ordering::Relaxed));
    let dir = std::env::temp_dir();
    let input = dir.join(format!("{tag}.dat-s"));
    let output = dir.join(format!("{tag}.sol"));
    std::fs::write(&input, text)?;
    let args: Vec<String> = cfg
        .args
        .iter()
        .map(|a| {
            a.replace("{input}", &input.to_string_lossy())
                .replace("{output}", &output.to_string_lossy())
        })
        .collect();
    let run = Command::new(&exe).args(&args).output();
    let _ = std::fs::remove_file(&input);
    let run = run?;
    let sol_text = std::fs::read_to_string(&output);
    let _ = std::fs::remove_file(&output);
    let sol_text = sol_text.map_err(|e| {
        Error::Solver(format!(
            "external solver exited with {} and left no solution file: {e}",
            run.status
        ))
    })?;
    let values = parse_csdp_solution(&sol_text, n)?;
    let viol = prog.max_violation(&values);
    if viol > ACCEPT_PRIMAL {
        return Err(Error::Solver(format!(
            "external point violates the constraints by {viol:.3e}"
        )));
    }
    Ok(SolutionPoint {
        objective: prog.objective_value(&values),
        values,
        status: SolveStatus::Optimal,
        primal_residual: viol,
        dual_residual: None,
        message: format!("external solver {}", exe.display()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_first_line() {
        let v = parse_csdp_solution("2.0 -1e-3\n1 1 1 1 0.5\n", 2).unwrap();
        assert_eq!(v, vec![2.0, -1e-3]);
    }

    #[test]
    fn malformed_solution_is_an_error() {
        assert!(parse_csdp_solution("", 1).is_err());
        assert!(parse_csdp_solution("abc\n", 1).is_err());
        assert!(parse_csdp_solution("1.0 2.0\n", 1).is_err());
        assert!(parse_csdp_solution("nan\n", 1).is_err());
    }

    #[test]
    fn missing_solver_is_skipped() {
        let p = MathProgram::new();
        let s = sdp_roundtrip(&p, None).unwrap();
        assert_eq!(s.status, SolveStatus::Skipped);
        let cfg = ExternalSdp::csdp("/nonexistent/dir/csdp");
        let s = sdp_roundtrip(&p, Some(&cfg)).unwrap();
        assert_eq!(s.status, SolveStatus::Skipped);
    }
}
