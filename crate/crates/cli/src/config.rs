//! TOML settings file. `ULCP_CONFIG` names a file to use when `--config` is
//! absent; `ULCP_SDP_SOLVER` overrides the SDP executable.

use serde::Deserialize;
use std::path::{Path, PathBuf};
use ulcp_core::harness::PipelineOptions;
use ulcp_core::solver::ExternalSdp;

pub const CONFIG_ENV: &str = "ULCP_CONFIG";

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub feas_tol: Option<f64>,
    pub gap_tol: Option<f64>,
    pub max_iter: Option<u32>,
    pub eps: Option<f64>,
    pub node_cap: Option<usize>,
    pub local_starts: Option<usize>,
    pub box_bound: Option<f64>,
    pub sdp: Option<SdpSection>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SdpSection {
    pub executable: String,
    #[serde(default)]
    pub args: Option<Vec<String>>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Settings, String> {
        toml::from_str(text).map_err(|e| format!("config: {e}"))
    }

    /// Reads `path`, or the file named by `ULCP_CONFIG`, or nothing.
    pub fn load(path: Option<&Path>) -> Result<Settings, String> {
        let path: Option<PathBuf> = path
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
                Settings::parse(&text)
            }
            None => Ok(Settings::default()),
        }
    }

    pub fn apply(&self, o: &mut PipelineOptions) {
        if let Some(v) = self.feas_tol {
            o.feas_tol = v;
        }
        if let Some(v) = self.gap_tol {
            o.gap_tol = v;
        }
        if let Some(v) = self.max_iter {
            o.max_iter = v;
        }
        if let Some(v) = self.eps {
            o.eps = v;
        }
        if let Some(v) = self.node_cap {
            o.node_cap = v;
        }
        if let Some(v) = self.local_starts {
            o.local_starts = v;
        }
        if self.box_bound.is_some() {
            o.box_bound = self.box_bound;
        }
        let sdp = self.sdp.as_ref().map(|s| {
            let mut e = ExternalSdp::csdp(s.executable.clone());
            if let Some(a) = &s.args {
                e.args = a.clone();
            }
            e
        });
        o.sdp = ExternalSdp::resolve(sdp);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_sdp_table() {
        let s = Settings::parse("eps = 1e-5\nnode_cap = 50\n[sdp]\nexecutable = \"csdp\"\n").unwrap();
        assert_eq!(s.eps, Some(1e-5));
        assert_eq!(s.sdp.as_ref().unwrap().executable, "csdp");
        let mut o = PipelineOptions::default();
        s.apply(&mut o);
        assert_eq!(o.node_cap, 50);
        assert!(Settings::parse("bogus = 1").is_err());
    }
}
