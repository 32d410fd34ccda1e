use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::hamiltonian::{expect_side, DiscreteHamiltonian, Side};
use super::lagrangian::central_gradient;
use crate::error::{Error, Result};
use crate::numeric::{check_dim, newton_solve_with, NewtonConfig, PhasePoint, RealVec};

/// Right discrete Hamilton map: solves `p_j = D1 H+(q_j, p_{j+1})` for
/// `p_{j+1}` (starting from `p_j`) and sets `q_{j+1} = D2 H+(q_j, p_{j+1})`.
pub fn step_right(h: &dyn DiscreteHamiltonian, x: &PhasePoint, cfg: &NewtonConfig) -> Result<PhasePoint> {
    expect_side(h, Side::Right)?;
    check_dim(&x.q, h.dim())?;
    let q = &x.q;
    let sol = newton_solve_with(|pn| Ok(h.d1(q, pn)? - &x.p), |pn| h.mixed(q, pn), &x.p, cfg)?;
    let q_next = h.d2(q, &sol.x)?;
    PhasePoint::new(x.index + 1, q_next, sol.x)
}

/// Left discrete Hamilton map: solves `q_j = -D2 H-(q_{j+1}, p_j)` for
/// `q_{j+1}` (starting from `q_j`) and sets `p_{j+1} = -D1 H-(q_{j+1}, p_j)`.
pub fn step_left(h: &dyn DiscreteHamiltonian, x: &PhasePoint, cfg: &NewtonConfig) -> Result<PhasePoint> {
    expect_side(h, Side::Left)?;
    check_dim(&x.q, h.dim())?;
    let p = &x.p;
    let sol = newton_solve_with(
        |qn| Ok(&x.q + h.d2(qn, p)?),
        |qn| Ok(h.mixed(qn, p)?.transpose()),
        &x.q,
        cfg,
    )?;
    let p_next = -h.d1(&sol.x, p)?;
    PhasePoint::new(x.index + 1, sol.x, p_next)
}

/// One step of whichever map matches `h.side()`.
pub fn step(h: &dyn DiscreteHamiltonian, x: &PhasePoint, cfg: &NewtonConfig) -> Result<PhasePoint> {
    match h.side() {
        Side::Right => step_right(h, x, cfg),
        Side::Left => step_left(h, x, cfg),
    }
}

/// Largest violation of the two discrete Hamilton equations by the pair
/// `(x, y)`.
pub fn verify_step(h: &dyn DiscreteHamiltonian, x: &PhasePoint, y: &PhasePoint) -> Result<f64> {
    let (first, second) = match h.side() {
        Side::Right => (
            h.d1(&x.q, &y.p)? - &x.p,
            h.d2(&x.q, &y.p)? - &y.q,
        ),
        Side::Left => (
            -h.d2(&y.q, &x.p)? - &x.q,
            -h.d1(&y.q, &x.p)? - &y.p,
        ),
    };
    Ok(first.amax().max(second.amax()))
}

/// Where and why a run stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    /// Index of the last point that was produced.
    pub index: usize,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub newton: NewtonConfig,
    pub truncation: Option<Truncation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTrajectory {
    pub points: Vec<PhasePoint>,
    pub meta: TrajectoryMeta,
}

impl DiscreteTrajectory {
    pub fn is_truncated(&self) -> bool {
        self.meta.truncation.is_some()
    }

    /// First components of `q`, for 1-D models.
    pub fn q_values(&self) -> Vec<f64> {
        self.points.iter().map(|x| x.q[0]).collect()
    }

    pub fn p_values(&self) -> Vec<f64> {
        self.points.iter().map(|x| x.p[0]).collect()
    }
}

/// Iterates the discrete Hamilton map `steps` times. A failing step ends
/// the run; the points computed so far are kept and the failure is recorded
/// in `meta.truncation`.
pub fn run_trajectory(
    h: &dyn DiscreteHamiltonian,
    x0: &PhasePoint,
    steps: usize,
    cfg: &NewtonConfig,
) -> Result<DiscreteTrajectory> {
    if steps == 0 {
        return Err(Error::InvalidInput("trajectory needs at least one step".into()));
    }
    check_dim(&x0.q, h.dim())?;
    let mut points = vec![x0.clone()];
    let mut truncation = None;
    for _ in 0..steps {
        let last = points.last().expect("trajectory starts non-empty");
        match step(h, last, cfg) {
            Ok(next) => points.push(next),
            Err(error) => {
                truncation = Some(Truncation {
                    index: last.index,
                    error,
                });
                break;
            }
        }
    }
    Ok(DiscreteTrajectory {
        points,
        meta: TrajectoryMeta {
            model: h.name(),
            params: BTreeMap::new(),
            newton: *cfg,
            truncation,
        },
    })
}

/// `|| DF^T J DF - J ||_inf` for the step map at `x`, with `DF` by central
/// differences of step `fd_step`. For one degree of freedom this is
/// `|det DF - 1|`.
pub fn symplecticity_defect(
    h: &dyn DiscreteHamiltonian,
    x: &PhasePoint,
    fd_step: f64,
    cfg: &NewtonConfig,
) -> Result<f64> {
    if !(fd_step > 0.0) {
        return Err(Error::InvalidInput("fd_step must be > 0".into()));
    }
    let n = x.dim();
    let mut df = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..2 * n {
        let shifted = |sign: f64| -> Result<RealVec> {
            let mut y = x.clone();
            if k < n {
                y.q[k] += sign * fd_step;
            } else {
                y.p[k - n] += sign * fd_step;
            }
            let z = step(h, &y, cfg)?;
            Ok(RealVec::from_iterator(2 * n, z.q.iter().chain(z.p.iter()).copied()))
        };
        let col = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * fd_step);
        df.set_column(k, &col);
    }
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    Ok((df.transpose() * &j * &df - j).amax())
}

/// Residual of `H-(q_{j+1}, p_j) + p_j q_j = H+(q_j, p_{j+1}) - p_{j+1} q_{j+1}`.
pub fn left_right_relation_residual(
    h_right: &dyn DiscreteHamiltonian,
    h_left: &dyn DiscreteHamiltonian,
    q_j: &RealVec,
    p_j: &RealVec,
    q_next: &RealVec,
    p_next: &RealVec,
) -> Result<f64> {
    expect_side(h_right, Side::Right)?;
    expect_side(h_left, Side::Left)?;
    let lhs = h_left.eval(q_next, p_j)? + p_j.dot(q_j);
    let rhs = h_right.eval(q_j, p_next)? - p_next.dot(q_next);
    Ok((lhs - rhs).abs())
}

/// Largest relative gap `|analytic - fd| / max(1, |analytic|)` between the
/// reported partials and central differences of `eval` over `samples`.
pub fn partial_consistency_gap(h: &dyn DiscreteHamiltonian, samples: &[(RealVec, RealVec)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (a, b) in samples {
        let fd1 = central_gradient(|x| h.eval(x, b).unwrap_or(f64::NAN), a);
        let fd2 = central_gradient(|x| h.eval(a, x).unwrap_or(f64::NAN), b);
        let pairs = h.d1(a, b)?.into_iter().copied().zip(fd1.iter().copied()).collect::<Vec<_>>();
        let more = h.d2(a, b)?.into_iter().copied().zip(fd2.iter().copied()).collect::<Vec<_>>();
        for (exact, approx) in pairs.into_iter().chain(more) {
            let gap = (exact - approx).abs() / exact.abs().max(1.0);
            if !gap.is_finite() {
                return Err(Error::Numerical {
                    context: "partial consistency check".into(),
                });
            }
            worst = worst.max(gap);
        }
    }
    Ok(worst)
}
