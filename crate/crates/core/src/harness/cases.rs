//! Constructed instances: the block LCP with a known robust solution, the
//! non-monotone two-shift family, and seeded random generators.

use crate::model::{AffineFamily, Shift, UncertainLcp, UncertaintySet};
use crate::{Error, Mat, Result, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Block LCP `diag(M, S(ξ, η))` with `q = (−q_x; u e)` and its analytic
/// robust solution `(x*, 0)`.
#[derive(Clone, Debug)]
pub struct ElcpCase {
    pub problem: UncertainLcp,
    pub x_star: Vector,
}

fn block(n: usize, upper: &Mat, lower: &Mat) -> Mat {
    let mut m = Mat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(upper);
    m.view_mut((n, n), (n, n)).copy_from(lower);
    m
}

/// `e_n = (1, …, n)`.
pub fn ramp(n: usize) -> Vector {
    Vector::from_iterator(n, (1..=n).map(|i| i as f64))
}

pub fn build_elcp(n: usize, q_x: &Vector) -> Result<ElcpCase> {
    if n == 0 {
        return Err(Error::Invalid("n must be positive".into()));
    }
    if q_x.len() != n {
        return Err(Error::dim("q_x must have length n"));
    }
    if q_x.iter().any(|v| *v < 0.0) {
        return Err(Error::Invalid("q_x must be nonnegative".into()));
    }
    let e = Vector::from_element(n, 1.0);
    let en = ramp(n);
    let ones = &e * e.transpose();
    let m = Mat::identity(n, n) - &ones / (n as f64 + 1.0);
    let s1 = Mat::identity(n, n) * n as f64 + &en * en.transpose();
    let s2 = &ones + &en * en.transpose();
    let zero = Mat::zeros(n, n);
    let mut q0 = Vector::zeros(2 * n);
    q0.rows_mut(0, n).copy_from(&(-q_x));
    let mut qu = Vector::zeros(2 * n);
    qu.rows_mut(n, n).fill(1.0);
    let shifts = vec![
        Shift {
            m: Mat::zeros(2 * n, 2 * n),
            q: qu,
        },
        Shift {
            m: block(n, &zero, &s1),
            q: Vector::zeros(2 * n),
        },
        Shift {
            m: block(n, &zero, &s2),
            q: Vector::zeros(2 * n),
        },
    ];
    let family = AffineFamily::new(block(n, &m, &zero), q0, shifts)?;
    let uset = UncertaintySet::Product(vec![
        (UncertaintySet::BoxInfNonneg, 1),
        (UncertaintySet::BallOneNonneg, 2),
    ]);
    let mut x_star = Vector::zeros(2 * n);
    x_star
        .rows_mut(0, n)
        .copy_from(&((Mat::identity(n, n) + ones) * q_x));
    Ok(ElcpCase {
        problem: UncertainLcp::new(family, uset)?,
        x_star,
    })
}

/// `(x*, y)` with an arbitrary nonnegative lower block: a solution of the
/// scenario `u = ξ = η = 0` only.
pub fn elcp_nonrobust_point(case: &ElcpCase, y: &Vector) -> Vector {
    let n = case.x_star.len() / 2;
    let mut p = case.x_star.clone();
    p.rows_mut(n, n).copy_from(y);
    p
}

/// `M(u) = u₁S₁ − u₂S₂`, `q(u) = u₁q₁ + u₂q₂` over `[0, 1]²` with
/// `S₁ = e_n e_nᵀ`, `S₂ = 10⁴ BᵀB`, `q₁ = −e_n`, `q₂ = 10/(n(n+1)) S₂ e_n`
/// and `B` standard normal from `seed`.
pub fn build_ex3(n: usize, seed: u64) -> Result<UncertainLcp> {
    if n == 0 {
        return Err(Error::Invalid("n must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = Mat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let en = ramp(n);
    let s1 = &en * en.transpose();
    let s2 = b.transpose() * &b * 1e4;
    let q2 = &s2 * &en * (10.0 / (n as f64 * (n as f64 + 1.0)));
    let family = AffineFamily::new(
        Mat::zeros(n, n),
        Vector::zeros(n),
        vec![Shift { m: s1, q: -en }, Shift { m: -s2, q: q2 }],
    )?;
    UncertainLcp::new(family, UncertaintySet::BoxInfNonneg)
}

fn normal_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Strictly monotone matrix `GGᵀ/n + ½I + (K − Kᵀ)/2`.
fn monotone(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let g = normal_mat(rng, n, n);
    let k = normal_mat(rng, n, n);
    &g * g.transpose() / n as f64 + Mat::identity(n, n) * 0.5 + (&k - k.transpose()) * 0.5
}

/// Scenario list with a planted common solution, or with scenario 0
/// perturbed so that no common solution exists.
#[derive(Clone, Debug)]
pub struct Planted {
    pub problem: UncertainLcp,
    pub solution: Vector,
}

pub fn planted_scenarios(n: usize, k: usize, seed: u64, perturb: bool) -> Result<Planted> {
    if n == 0 || k == 0 {
        return Err(Error::Invalid("need n ≥ 1 and at least one scenario".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vector::from_fn(n, |_, _| if rng.random_bool(0.5) { rng.random_range(0.5..2.0) } else { 0.0 });
    x[0] = rng.random_range(0.5..2.0);
    let mut shifts = Vec::with_capacity(k);
    for _ in 0..k {
        let m = monotone(&mut rng, n);
        let slack = Vector::from_fn(n, |i, _| if x[i] > 0.0 { 0.0 } else { rng.random_range(0.1..1.0) });
        let q = -(&m * &x) + slack;
        shifts.push(Shift { m, q });
    }
    if perturb {
        shifts[0].q[0] += 1.0;
    }
    let scenarios = (0..k)
        .map(|j| {
            let mut u = Vector::zeros(k);
            u[j] = 1.0;
            u
        })
        .collect();
    let family = AffineFamily::new(Mat::zeros(n, n), Vector::zeros(n), shifts)?;
    Ok(Planted {
        problem: UncertainLcp::new(family, UncertaintySet::FiniteScenarios(scenarios))?,
        solution: x,
    })
}

/// Which data the random shifts perturb.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftKind {
    /// `Mₗ = 0`, random `qₗ`.
    QOnly,
    /// Random PSD `Mₗ`, `qₗ = 0`.
    Psd,
    /// Random PSD `Mₗ` and random `qₗ`.
    PsdWithQ,
}

/// Strictly monotone nominal matrix, mixed-sign `q0` and `l` shifts of `kind`.
pub fn random_family(n: usize, l: usize, kind: ShiftKind, scale: f64, seed: u64) -> Result<AffineFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m0 = monotone(&mut rng, n);
    let q0 = normal_vec(&mut rng, n);
    let shifts = (0..l)
        .map(|_| {
            let m = match kind {
                ShiftKind::QOnly => Mat::zeros(n, n),
                ShiftKind::Psd | ShiftKind::PsdWithQ => {
                    let h = normal_mat(&mut rng, n, n);
                    &h * h.transpose() * (scale / n as f64)
                }
            };
            let q = match kind {
                ShiftKind::Psd => Vector::zeros(n),
                ShiftKind::QOnly | ShiftKind::PsdWithQ => normal_vec(&mut rng, n) * scale,
            };
            Shift { m, q }
        })
        .collect();
    AffineFamily::new(m0, q0, shifts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elcp_analytic_point() {
        let c = build_elcp(2, &Vector::from_element(2, 1.0)).unwrap();
        assert_eq!(c.x_star.as_slice(), &[3.0, 3.0, 0.0, 0.0]);
        let m = c.problem.family.m0.view((0, 0), (2, 2)).into_owned();
        let r = m * c.x_star.rows(0, 2) - Vector::from_element(2, 1.0);
        assert!(r.amax() < 1e-12);
        assert!(build_elcp(2, &Vector::from_vec(vec![1.0, -1.0])).is_err());
    }

    #[test]
    fn ex3_structure() {
        let p = build_ex3(3, 42).unwrap();
        assert_eq!(p.l(), 2);
        let s2 = -&p.family.shifts[1].m;
        assert!(crate::linalg::min_eigenvalue(&s2) > 0.0);
        let q2 = &p.family.shifts[1].q;
        let want = &s2 * ramp(3) * (10.0 / 12.0);
        assert!((q2 - &want).amax() < 1e-9 * (1.0 + want.amax()));
        let again = build_ex3(3, 42).unwrap();
        assert_eq!(again.family, p.family);
    }

    #[test]
    fn planted_point_solves_every_scenario() {
        let p = planted_scenarios(4, 3, 7, false).unwrap();
        let UncertaintySet::FiniteScenarios(list) = &p.problem.uset else { panic!() };
        for u in list {
            let g = crate::model::gap_value(&p.problem.family, p.solution.as_slice(), u.as_slice()).unwrap();
            assert!(g.finite().unwrap().abs() < 1e-10);
        }
        let q = planted_scenarios(4, 3, 7, true).unwrap();
        let g = crate::model::gap_value(&q.problem.family, q.solution.as_slice(), list[0].as_slice()).unwrap();
        assert!(g.finite().unwrap() > 0.1);
    }
}
