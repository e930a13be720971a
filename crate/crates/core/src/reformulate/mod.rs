//! Robust-counterpart construction.
//!
//! Every builder produces an [`RcArtifact`]: a [`MathProgram`] whose optimal
//! value is the worst-case gap `min_x max_u xᵀ(M(u)x + q(u))` over the
//! points that are feasible for every scenario. The worst case splits into
//! a support-function term for the objective and one per feasibility row,
//! so a product of independent sets contributes one block per factor.
//!
//! Routing ([`route_for`]) follows the characterization table: convex
//! routes are taken whenever they are valid.

mod compose;
mod conic;
mod mpcc;
mod scenarios;
mod sdp;
mod worst;

pub use compose::{rc_general_nonconvex, rc_hidden_convex, rc_product, rc_psd_shifts_nonneg, rc_q_uncertain};
pub use conic::{find_interior, rc_conic_general, rc_q_conic};
pub use mpcc::{mpcc_reformulate, ComplementarityPair, ConstraintRef, MpccProgram, PairCone, UpperLevel};
pub use scenarios::{avi_to_lcp, box_vertex_reduction, rc_finite_scenarios, AviData};
pub use sdp::{rc_avi_sdp, rc_cholesky_sdp, AviSdpData};
pub use worst::{support_value, trust_region_min, worst_case, WorstCase};

use crate::model::{classify, Definiteness, UncertainLcp, UncertaintySet};
use crate::program_ir::{MathProgram, SolutionPoint, VarId};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Which construction produced a program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// q-only uncertainty over a symmetric box or ball.
    Prop32,
    /// q-only uncertainty over a conic-representable set.
    Prop33,
    /// PSD shifts over the nonnegative box or simplex.
    Prop34,
    /// PSD shifts over a symmetric box or ball (hidden convexity).
    Prop37,
    /// Cholesky-factor family over the unit ball.
    Thm39,
    /// General shifts over the five simple sets.
    Prop42,
    /// General shifts over a conic-representable set.
    Cor43,
    /// Explicit scenario list.
    Scenarios,
    /// Product of independent sets, one block per factor.
    Composite,
    /// Uncertain affine VI over the unit ball.
    AviSdp,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Prop32 => "prop32",
            Route::Prop33 => "prop33",
            Route::Prop34 => "prop34",
            Route::Prop37 => "prop37",
            Route::Thm39 => "thm39",
            Route::Prop42 => "prop42",
            Route::Cor43 => "cor43",
            Route::Scenarios => "scenarios",
            Route::Composite => "composite",
            Route::AviSdp => "avi_sdp",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "prop32" => Route::Prop32,
            "prop33" => Route::Prop33,
            "prop34" => Route::Prop34,
            "prop37" => Route::Prop37,
            "thm39" => Route::Thm39,
            "prop42" => Route::Prop42,
            "cor43" => Route::Cor43,
            "scenarios" => Route::Scenarios,
            "composite" => Route::Composite,
            other => return Err(Error::Invalid(format!("unknown route '{other}'"))),
        })
    }
}

/// A robust counterpart ready for a solver.
#[derive(Clone, Debug)]
pub struct RcArtifact {
    pub program: MathProgram,
    /// Names of the `n` primal variables.
    pub x_slot: Vec<String>,
    /// Epigraph variable, when the objective is written as `min t`.
    pub t_slot: Option<String>,
    pub route: Route,
}

impl RcArtifact {
    pub fn x_ids(&self) -> Vec<VarId> {
        self.x_slot
            .iter()
            .map(|n| self.program.var(n).expect("x variable declared"))
            .collect()
    }

    pub fn t_id(&self) -> Option<VarId> {
        self.t_slot.as_ref().and_then(|n| self.program.var(n))
    }

    /// Primal point from a solution, with roundoff below zero clipped.
    pub fn extract_x(&self, sol: &SolutionPoint) -> Vec<f64> {
        self.x_ids().iter().map(|&i| clip_nonneg(sol.values[i])).collect()
    }

    pub fn is_convex(&self) -> bool {
        self.program.is_convex()
    }
}

pub(crate) fn clip_nonneg(v: f64) -> f64 {
    if v < 0.0 && v > -1e-6 * (1.0 + v.abs()) {
        0.0
    } else {
        v
    }
}

pub(crate) fn x_name(i: usize) -> String {
    format!("x[{i}]")
}

pub(crate) const T_NAME: &str = "t";

/// Route chosen by `auto` for a problem.
pub fn route_for(problem: &UncertainLcp) -> Route {
    let fam = &problem.family;
    let m0_psd = problem.nominal_flag == Definiteness::Psd;
    let signed_ok = problem
        .psd_flags
        .iter()
        .all(|d| matches!(d, Definiteness::Psd | Definiteness::Nsd));
    let all_psd = problem.psd_flags.iter().all(|d| *d == Definiteness::Psd);
    match &problem.uset {
        UncertaintySet::FiniteScenarios(_) => Route::Scenarios,
        UncertaintySet::CholeskyUA { .. } => Route::Thm39,
        UncertaintySet::Conic { .. } => {
            if !fam.has_m_shifts() && m0_psd {
                Route::Prop33
            } else {
                Route::Cor43
            }
        }
        UncertaintySet::BoxInf | UncertaintySet::BallOne | UncertaintySet::BallTwo => {
            if !fam.has_m_shifts() && m0_psd {
                Route::Prop32
            } else if !fam.has_q_shifts() && m0_psd && signed_ok {
                Route::Prop37
            } else {
                Route::Prop42
            }
        }
        UncertaintySet::BoxInfNonneg | UncertaintySet::BallOneNonneg => {
            if !fam.has_q_shifts() && m0_psd && all_psd {
                Route::Prop34
            } else {
                Route::Prop42
            }
        }
        UncertaintySet::Product(_) => Route::Composite,
    }
}

/// Build the counterpart along `route`, or along [`route_for`] when `None`.
pub fn build_rc(problem: &UncertainLcp, route: Option<Route>) -> Result<RcArtifact> {
    let route = route.unwrap_or_else(|| route_for(problem));
    match route {
        Route::Prop32 => rc_q_uncertain(problem),
        Route::Prop33 => rc_q_conic(problem),
        Route::Prop34 => rc_psd_shifts_nonneg(problem),
        Route::Prop37 => rc_hidden_convex(problem),
        Route::Thm39 => rc_cholesky_sdp(problem),
        Route::Prop42 => rc_general_nonconvex(problem),
        Route::Cor43 => rc_conic_general(problem),
        Route::Scenarios => rc_finite_scenarios(problem),
        Route::Composite => rc_product(problem),
        Route::AviSdp => Err(Error::Invalid(
            "the affine-VI route takes AviSdpData; call rc_avi_sdp".into(),
        )),
    }
}

pub(crate) fn require_psd_nominal(problem: &UncertainLcp, route: Route) -> Result<()> {
    if classify(&problem.family.m0) != Definiteness::Psd {
        return Err(Error::refused(
            route.name(),
            "nominal matrix M0 is not positive semidefinite",
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AffineFamily, Shift};
    use crate::{Mat, Vector};

    fn fam(m1: Mat, q1: Vector) -> AffineFamily {
        AffineFamily::new(Mat::identity(2, 2), Vector::from_vec(vec![1.0, 1.0]), vec![Shift { m: m1, q: q1 }]).unwrap()
    }

    #[test]
    fn routing_table() {
        let z = Mat::zeros(2, 2);
        let q = Vector::from_vec(vec![0.5, 0.0]);
        let zq = Vector::zeros(2);
        let neg = -Mat::identity(2, 2);
        let indef = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let case = |f: AffineFamily, s: UncertaintySet| route_for(&UncertainLcp::new(f, s).unwrap());
        assert_eq!(case(fam(z.clone(), q.clone()), UncertaintySet::BoxInf), Route::Prop32);
        assert_eq!(case(fam(Mat::identity(2, 2), zq.clone()), UncertaintySet::BallTwo), Route::Prop37);
        assert_eq!(case(fam(neg.clone(), zq.clone()), UncertaintySet::BallOne), Route::Prop37);
        assert_eq!(case(fam(indef.clone(), zq.clone()), UncertaintySet::BoxInf), Route::Prop42);
        assert_eq!(case(fam(Mat::identity(2, 2), zq.clone()), UncertaintySet::BoxInfNonneg), Route::Prop34);
        assert_eq!(case(fam(neg, zq.clone()), UncertaintySet::BallOneNonneg), Route::Prop42);
        assert_eq!(
            case(fam(indef, zq), UncertaintySet::FiniteScenarios(vec![Vector::zeros(1)])),
            Route::Scenarios
        );
    }

    #[test]
    fn route_names_parse_back() {
        for r in [Route::Prop32, Route::Prop33, Route::Prop34, Route::Prop37, Route::Thm39, Route::Prop42, Route::Cor43] {
            assert_eq!(r.name().parse::<Route>().unwrap(), r);
        }
        assert!("prop99".parse::<Route>().is_err());
    }
}
