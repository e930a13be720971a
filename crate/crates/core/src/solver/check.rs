//! Post-solve verification from the program data alone.

use super::conic::ConicForm;
use crate::program_ir::MathProgram;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    /// Largest scaled primal violation, evaluated on the IR constraints.
    pub primal: f64,
    /// Scaled stationarity plus complementarity residual, when duals exist.
    pub dual: Option<f64>,
}

/// Check a point against `prog`. With duals `z` of the lowered form, also
/// check `Pv + q + Aᵀz = 0` and `sᵀz = 0` for `s = b − Av`.
pub fn check_point(prog: &MathProgram, form: &ConicForm, v: &[f64], z: Option<&[f64]>) -> CheckReport {
    let primal = prog.max_violation(v);
    let dual = z.map(|z| {
        let (r, scale) = form.stationarity(v, z);
        let stat = r.iter().fold(0.0f64, |m, x| m.max(x.abs())) / (1.0 + scale);
        let mut gap = 0.0;
        for ((row, b), zi) in form.rows.iter().zip(z) {
            let s = b - row.iter().map(|(j, a)| a * v[*j]).sum::<f64>();
            gap += s * zi;
        }
        let comp = gap.abs() / (1.0 + prog.objective_value(v).abs());
        stat.max(comp)
    });
    CheckReport { primal, dual }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program_ir::Sense;
    use crate::solver::lower;
    use crate::Mat;

    #[test]
    fn detects_infeasible_point() {
        let mut p = MathProgram::new();
        let x = p.add_var("x", true);
        p.add_linear(vec![(x, 1.0)], Sense::Ge, 1.0, "lo");
        p.set_objective(vec![(x, 1.0)], vec![], &Mat::zeros(0, 0), 0.0);
        let f = lower(&p).unwrap();
        assert!(check_point(&p, &f, &[0.5], None).primal > 0.1);
        assert_eq!(check_point(&p, &f, &[1.0], None).primal, 0.0);
    }

    #[test]
    fn wrong_multiplier_fails_stationarity() {
        let mut p = MathProgram::new();
        let x = p.add_var("x", false);
        p.add_linear(vec![(x, 1.0)], Sense::Ge, 1.0, "lo");
        p.set_objective(vec![(x, 1.0)], vec![], &Mat::zeros(0, 0), 0.0);
        let f = lower(&p).unwrap();
        // Lowered row is −x ≤ −1; the correct multiplier is 1.
        assert!(check_point(&p, &f, &[1.0], Some(&[1.0])).dual.unwrap() < 1e-12);
        assert!(check_point(&p, &f, &[1.0], Some(&[0.3])).dual.unwrap() > 0.1);
    }
}
