//! Vector-field form of the discrete Hamilton-Jacobi equation.
//!
//! A section `gamma` with momenta `p_{j+1} = gamma_j(q_{j+1})` is compatible with
//! the right discrete Hamiltonian vector field
//!
//! ```text
//! X = D2H+(q_j, p_{j+1}) d/dq_{j+1} + D1H+(q_j, p_{j+1}) d/dp_j
//! ```
//!
//! when `D1H+ = Dgamma . D2H+`. The derivative of the section is replaced by a
//! secant through the origin along a configuration grid, which makes the
//! generic solver coincide with the benchmark's closed-form recurrence.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hj_flow::GeneratingSequence;
use crate::mechanics::{expect_side, DiscreteHamiltonian, Side, Truncation};
use crate::numeric::{check_dim, newton_solve, scalar, NewtonConfig, RealVec, SINGULAR_DET_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaSource {
    GenericNewton,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaEntry {
    pub j: usize,
    pub q: RealVec,
    /// Section value, standing in for the momentum `p_j`.
    pub gamma: RealVec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSequence {
    pub entries: Vec<GammaEntry>,
    pub source: GammaSource,
    pub truncation: Option<Truncation>,
}

impl GammaSequence {
    pub fn q_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.q[0]).collect()
    }

    pub fn gamma_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.gamma[0]).collect()
    }
}

/// Coefficients of a discrete Hamiltonian vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldCoefficients {
    pub dq_coeff: RealVec,
    pub dp_coeff: RealVec,
}

/// `(D2H+, D1H+)` at `(q_j, p_next)`.
pub fn eval_field(h: &dyn DiscreteHamiltonian, q_j: &RealVec, p_next: &RealVec) -> Result<FieldCoefficients> {
    expect_side(h, Side::Right)?;
    Ok(FieldCoefficients {
        dq_coeff: h.d2(q_j, p_next)?,
        dp_coeff: h.d1(q_j, p_next)?,
    })
}

/// `(-D2H-, -D1H-)` at `(q_next, p_j)`: the `d/dq_j` and `d/dp_{j+1}` coefficients.
pub fn eval_field_left(h: &dyn DiscreteHamiltonian, q_next: &RealVec, p_j: &RealVec) -> Result<FieldCoefficients> {
    expect_side(h, Side::Left)?;
    Ok(FieldCoefficients {
        dq_coeff: -h.d2(q_next, p_j)?,
        dp_coeff: -h.d1(q_next, p_j)?,
    })
}

/// 1x1 slope matrix for scalar problems.
pub fn slope(x: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, x)
}

fn check_slope(dgamma: &DMatrix<f64>, n: usize) -> Result<()> {
    if dgamma.nrows() != n || dgamma.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: dgamma.nrows().max(dgamma.ncols()),
        });
    }
    Ok(())
}

/// `|| Dgamma . D2H+(q_j, p_next) - D1H+(q_j, p_next) ||_inf`.
pub fn vf_residual(h: &dyn DiscreteHamiltonian, q_j: &RealVec, p_next: &RealVec, dgamma: &DMatrix<f64>) -> Result<f64> {
    check_slope(dgamma, q_j.len())?;
    let f = eval_field(h, q_j, p_next)?;
    Ok((dgamma * f.dq_coeff - f.dp_coeff).amax())
}

/// `|| Dgamma . D2H-(q_next, p_j) - D1H-(q_next, p_j) ||_inf`.
pub fn vf_residual_left(
    h: &dyn DiscreteHamiltonian,
    q_next: &RealVec,
    p_j: &RealVec,
    dgamma: &DMatrix<f64>,
) -> Result<f64> {
    check_slope(dgamma, q_next.len())?;
    let f = eval_field_left(h, q_next, p_j)?;
    Ok((dgamma * f.dq_coeff - f.dp_coeff).amax())
}

/// Componentwise secant `diag(num_i / den_i)`; a zero denominator is a
/// degenerate grid at `index`.
fn secant(num: &RealVec, den: &RealVec, index: usize) -> Result<DMatrix<f64>> {
    if den.iter().any(|&d| d == 0.0) {
        return Err(Error::DegenerateGrid { index });
    }
    Ok(DMatrix::from_diagonal(&num.component_div(den)))
}

/// Solves for the section along a configuration grid. Step `j` uses the
/// slope `gamma_j / q_{j+1}` and Newton-solves `vf_residual = 0` for
/// `gamma_{j+1}`, evaluated at `p_next = gamma_{j+1}`.
pub fn solve_gamma_generic(
    h: &dyn DiscreteHamiltonian,
    q_sequence: &[RealVec],
    gamma0: &RealVec,
    cfg: &NewtonConfig,
) -> Result<GammaSequence> {
    expect_side(h, Side::Right)?;
    if q_sequence.len() < 2 {
        return Err(Error::InvalidInput("gamma recurrence needs at least two grid points".into()));
    }
    for q in q_sequence {
        check_dim(q, h.dim())?;
    }
    check_dim(gamma0, h.dim())?;

    let mut entries = vec![GammaEntry {
        j: 1,
        q: q_sequence[0].clone(),
        gamma: gamma0.clone(),
    }];
    for (k, pair) in q_sequence.windows(2).enumerate() {
        let (q_j, q_next) = (&pair[0], &pair[1]);
        let gamma_j = entries[k].gamma.clone();
        let dgamma = secant(&gamma_j, q_next, k + 2)?;
        let residual = |g: &RealVec| -> Result<RealVec> { Ok(&dgamma * h.d2(q_j, g)? - h.d1(q_j, g)?) };
        let sol = newton_solve(residual, &gamma_j, cfg)?;
        entries.push(GammaEntry {
            j: k + 2,
            q: q_next.clone(),
            gamma: sol.x,
        });
    }
    Ok(GammaSequence {
        entries,
        source: GammaSource::GenericNewton,
        truncation: None,
    })
}

/// Closed-form section step of the benchmark model (`r = s = 1`):
/// `-(g q^2 - g + q') q / (g + q' - 3 q^2 q')`.
pub fn example_gamma_step(gamma_j: f64, q_j: f64, q_next: f64) -> Result<f64> {
    let den = gamma_j + q_next - 3.0 * q_j * q_j * q_next;
    let scale = gamma_j.abs().max(q_next.abs()).max((3.0 * q_j * q_j * q_next).abs());
    if den == 0.0 || den.abs() <= SINGULAR_DET_THRESHOLD * scale {
        return Err(Error::SingularDenominator { denominator: den });
    }
    let g = -(gamma_j * q_j * q_j - gamma_j + q_next) * q_j / den;
    if !g.is_finite() {
        return Err(Error::Numerical {
            context: "closed-form gamma step".into(),
        });
    }
    Ok(g)
}

/// Iterates [`example_gamma_step`] along a grid; a singular denominator
/// truncates and keeps the prefix.
pub fn run_example_vf(q_sequence: &[f64], gamma0: f64) -> Result<GammaSequence> {
    if q_sequence.len() < 2 {
        return Err(Error::InvalidInput("gamma recurrence needs at least two grid points".into()));
    }
    let mut seq = GammaSequence {
        entries: vec![GammaEntry {
            j: 1,
            q: scalar(q_sequence[0]),
            gamma: scalar(gamma0),
        }],
        source: GammaSource::ClosedForm,
        truncation: None,
    };
    let mut gamma = gamma0;
    for (k, pair) in q_sequence.windows(2).enumerate() {
        match example_gamma_step(gamma, pair[0], pair[1]) {
            Ok(g) => gamma = g,
            Err(error) => {
                seq.truncation = Some(Truncation { index: k + 1, error });
                break;
            }
        }
        seq.entries.push(GammaEntry {
            j: k + 2,
            q: scalar(pair[1]),
            gamma: scalar(gamma),
        });
    }
    Ok(seq)
}

/// Left-field residual along a section: at each step the slope is
/// `gamma_{j+1} / q_j` and the field is evaluated at `(q_{j+1}, gamma_j)`.
pub fn left_vf_residuals(h: &dyn DiscreteHamiltonian, seq: &GammaSequence) -> Result<Vec<f64>> {
    expect_side(h, Side::Left)?;
    seq.entries
        .windows(2)
        .map(|w| {
            let dgamma = secant(&w[1].gamma, &w[0].q, w[0].j)?;
            vf_residual_left(h, &w[1].q, &w[0].gamma, &dgamma)
        })
        .collect()
}

/// Vector-field residual of a generating sequence at each interior node,
/// with the centered quotient of `DS` over the grid as the section slope.
pub fn equivalence_check(h: &dyn DiscreteHamiltonian, flow_seq: &GeneratingSequence) -> Result<Vec<f64>> {
    expect_side(h, Side::Right)?;
    let e = &flow_seq.entries;
    if e.len() < 3 {
        return Err(Error::InvalidInput("equivalence check needs at least three entries".into()));
    }
    e.windows(3)
        .map(|w| {
            let dgamma = secant(&(&w[2].ds - &w[0].ds), &(&w[2].q - &w[0].q), w[1].j)?;
            vf_residual(h, &w[1].q, &w[1].ds, &dgamma)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hj_flow::GeneratingEntry;
    use crate::mechanics::{free_particle, hamiltonian_from_lagrangian, run_trajectory, FnHamiltonian};
    use crate::numeric::{fd_partial, PhasePoint};
    use approx::assert_relative_eq;

    fn control_model() -> FnHamiltonian {
        FnHamiltonian::new(Side::Right, 1, |q, p| {
            let (q, p) = (q[0], p[0]);
            (q - q.powi(3)) * p - p * p / 2.0 + q * q / 2.0
        })
        .with_d1(|q, p| scalar((1.0 - 3.0 * q[0] * q[0]) * p[0] + q[0]))
        .with_d2(|q, p| scalar(q[0] - q[0].powi(3) - p[0]))
        .with_mixed(|q, _| DMatrix::from_element(1, 1, 1.0 - 3.0 * q[0] * q[0]))
    }

    fn free_right() -> FnHamiltonian {
        FnHamiltonian::new(Side::Right, 1, |q, p| p[0] * q[0] + p[0] * p[0] / 2.0)
            .with_d1(|_, p| p.clone())
            .with_d2(|q, p| q + p)
    }

    fn benchmark_grid(steps: usize) -> Vec<f64> {
        let start = PhasePoint::scalar(1, 5e-8, 0.0).unwrap();
        run_trajectory(&control_model(), &start, steps, &NewtonConfig::default())
            .unwrap()
            .q_values()
    }

    #[test]
    fn field_examples() {
        let h = control_model();
        let f = eval_field(&h, &scalar(0.0), &scalar(0.0)).unwrap();
        assert_eq!((f.dq_coeff[0], f.dp_coeff[0]), (0.0, 0.0));
        let f = eval_field(&h, &scalar(0.5), &scalar(-2.0)).unwrap();
        assert_eq!((f.dq_coeff[0], f.dp_coeff[0]), (2.375, 0.0));
    }

    #[test]
    fn field_matches_differences() {
        let h = control_model();
        for &(q, p) in &[(0.3, -1.2), (-0.7, 0.4), (1.5, 2.0)] {
            let f = eval_field(&h, &scalar(q), &scalar(p)).unwrap();
            let dq = fd_partial(|x| h.eval(&scalar(q), x).unwrap(), &scalar(p), 0, 1e-6).unwrap();
            let dp = fd_partial(|x| h.eval(x, &scalar(p)).unwrap(), &scalar(q), 0, 1e-6).unwrap();
            assert!((f.dq_coeff[0] - dq).abs() < 1e-6);
            assert!((f.dp_coeff[0] - dp).abs() < 1e-6);
        }
    }

    #[test]
    fn left_field_examples() {
        let zero = FnHamiltonian::new(Side::Left, 1, |_, _| 0.0);
        let f = eval_field_left(&zero, &scalar(1.0), &scalar(2.0)).unwrap();
        assert_eq!((f.dq_coeff[0], f.dp_coeff[0]), (0.0, 0.0));

        // free particle: q_j = q_{j+1} - p_j and p_{j+1} = p_j
        let hm = hamiltonian_from_lagrangian(free_particle(1, 1.0), Side::Left);
        let f = eval_field_left(&hm, &scalar(1.5), &scalar(0.25)).unwrap();
        assert!((f.dq_coeff[0] - 1.25).abs() < 1e-9);
        assert!((f.dp_coeff[0] - 0.25).abs() < 1e-9);

        let quad = |flip: f64| {
            FnHamiltonian::new(Side::Left, 1, move |q, p| flip * (q[0] * p[0] + 0.5 * p[0] * p[0]))
                .with_d1(move |_, p| p * flip)
                .with_d2(move |q, p| (q + p) * flip)
        };
        let a = eval_field_left(&quad(1.0), &scalar(0.7), &scalar(-0.3)).unwrap();
        let b = eval_field_left(&quad(-1.0), &scalar(0.7), &scalar(-0.3)).unwrap();
        assert_eq!(a.dq_coeff, -b.dq_coeff);
        assert_eq!(a.dp_coeff, -b.dp_coeff);
    }

    #[test]
    fn residual_examples() {
        let h = control_model();
        assert_eq!(vf_residual(&h, &scalar(0.0), &scalar(0.0), &slope(3.7)).unwrap(), 0.0);
        assert_eq!(vf_residual(&h, &scalar(0.5), &scalar(-2.0), &slope(0.0)).unwrap(), 0.0);
        assert_eq!(vf_residual(&h, &scalar(0.5), &scalar(-2.0), &slope(2.0)).unwrap(), 4.75);

        let (q, p) = (0.8, 0.3);
        let r = vf_residual(&free_right(), &scalar(q), &scalar(p), &slope(p / (q + p))).unwrap();
        assert!(r < 1e-15);
        assert!(vf_residual(&h, &scalar(0.0), &scalar(0.0), &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn gamma_step_examples() {
        assert_eq!(example_gamma_step(0.0, 0.0, 0.3).unwrap(), 0.0);
        assert_eq!(example_gamma_step(0.0, 0.5, 1.0).unwrap(), -2.0);
        let q1: f64 = 5e-8;
        assert_relative_eq!(
            example_gamma_step(0.0, q1, 5e-8).unwrap(),
            -q1 / (1.0 - 3.0 * q1 * q1),
            max_relative = 1e-15
        );
        assert!(matches!(
            example_gamma_step(0.0, 0.0, 0.0),
            Err(Error::SingularDenominator { .. })
        ));
    }

    #[test]
    fn example_vf_runs() {
        let seq = run_example_vf(&[5e-8, 5e-8], 0.0).unwrap();
        assert_eq!(seq.entries.len(), 2);
        assert_relative_eq!(seq.gamma_values()[1], -5e-8, max_relative = 1e-14);

        let zeros = run_example_vf(&[0.0; 4], 0.0).unwrap();
        assert_eq!(zeros.entries.len(), 1);
        assert_eq!(zeros.truncation.unwrap().error.kind(), "SingularDenominatorError");
        assert!(run_example_vf(&[0.1], 0.0).is_err());
    }

    #[test]
    fn example_vf_tracks_momentum() {
        let start = PhasePoint::scalar(1, 5e-8, 0.0).unwrap();
        let traj = run_trajectory(&control_model(), &start, 18, &NewtonConfig::default()).unwrap();
        let seq = run_example_vf(&traj.q_values(), 0.0).unwrap();
        let p = traj.p_values();
        for (k, e) in seq.entries.iter().enumerate() {
            if e.q[0].abs() < 0.9 {
                assert!((e.gamma[0] - p[k]).abs() <= 1e-12 * p[k].abs().max(1e-7));
            }
        }
        assert!((seq.gamma_values()[1] - p[1]).abs() < 1e-15);
    }

    #[test]
    fn generic_degenerate_grid() {
        let grid = vec![scalar(0.0); 4];
        let err = solve_gamma_generic(&control_model(), &grid, &scalar(0.0), &NewtonConfig::default()).unwrap_err();
        assert_eq!(err.kind(), "DegenerateGridError");
    }

    #[test]
    fn generic_matches_closed_form() {
        let grid = benchmark_grid(18);
        let vec_grid: Vec<RealVec> = grid.iter().map(|&q| scalar(q)).collect();
        let generic = solve_gamma_generic(&control_model(), &vec_grid, &scalar(0.0), &NewtonConfig::default()).unwrap();
        let closed = run_example_vf(&grid, 0.0).unwrap();
        assert_eq!(generic.entries.len(), closed.entries.len());
        for (a, b) in generic.gamma_values().iter().zip(closed.gamma_values()) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn generic_free_particle_constant() {
        let c = 0.05;
        let grid: Vec<RealVec> = (0..20).map(|i| scalar(1.0 + c * i as f64)).collect();
        let seq = solve_gamma_generic(&free_right(), &grid, &scalar(c), &NewtonConfig::default()).unwrap();
        for g in seq.gamma_values() {
            assert!((g - c).abs() < 1e-14);
        }
    }

    #[test]
    fn left_residuals_on_free_particle() {
        let l = free_particle(1, 1.0);
        let hp = hamiltonian_from_lagrangian(l.clone(), Side::Right);
        let hm = hamiltonian_from_lagrangian(l, Side::Left);
        let grid: Vec<RealVec> = (0..15).map(|i| scalar(1.0 + 0.1 * i as f64 + 0.01 * (i * i) as f64)).collect();
        let seq = solve_gamma_generic(&hp, &grid, &scalar(0.2), &NewtonConfig::default()).unwrap();
        let res = left_vf_residuals(&hm, &seq).unwrap();
        assert_eq!(res.len(), 14);
        assert!(res.iter().all(|&r| r < 1e-8), "{res:?}");
    }

    fn section_sequence(n: usize, dg: f64) -> GeneratingSequence {
        // q(gamma) = gamma (ln gamma + 1) solves gamma' (q + gamma) = gamma
        let entries = (0..n)
            .map(|i| {
                let g = 1.0 + dg * i as f64;
                GeneratingEntry {
                    j: i + 1,
                    q: scalar(g * (g.ln() + 1.0)),
                    s: None,
                    ds: scalar(g),
                    residual: None,
                }
            })
            .collect();
        GeneratingSequence {
            entries,
            branch_log: Vec::new(),
            h: 0.0,
            degenerate: false,
            truncation: None,
        }
    }

    #[test]
    fn equivalence_on_analytic_section() {
        let res = equivalence_check(&free_right(), &section_sequence(10_001, 1e-4)).unwrap();
        assert_eq!(res.len(), 9_999);
        assert!(res.iter().cloned().fold(0.0, f64::max) < 1e-8);
    }

    #[test]
    fn equivalence_rejects_repeated_grid() {
        let mut seq = section_sequence(3, 0.1);
        seq.entries[2].q = seq.entries[0].q.clone();
        assert_eq!(
            equivalence_check(&free_right(), &seq).unwrap_err().kind(),
            "DegenerateGridError"
        );
        assert!(equivalence_check(&free_right(), &section_sequence(2, 0.1)).is_err());
    }
}
