//! Shared numeric kernel: vectors, central finite differences, a damped
//! Newton root-finder and a classic RK4 integrator kept as a test oracle
//! for continuous Hamiltonian flows.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense real vector used for configurations and momenta.
pub type RealVec = DVector<f64>;

/// Threshold on the scaled Jacobian determinant below which Newton gives up.
pub const SINGULAR_DET_THRESHOLD: f64 = 1e-14;

/// One-component vector, the common case for the 1-D models.
pub fn scalar(x: f64) -> RealVec {
    RealVec::from_element(1, x)
}

pub fn check_finite(v: &RealVec, context: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical {
            context: context.to_string(),
        })
    }
}

pub fn check_dim(v: &RealVec, expected: usize) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got: v.len(),
        })
    }
}

/// A configuration/momentum pair at step `index` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub index: usize,
    pub q: RealVec,
    pub p: RealVec,
}

impl PhasePoint {
    pub fn new(index: usize, q: RealVec, p: RealVec) -> Result<Self> {
        check_dim(&p, q.len())?;
        if q.is_empty() {
            return Err(Error::InvalidInput("phase point of dimension 0".into()));
        }
        if index == 0 {
            return Err(Error::InvalidInput("phase point indices start at 1".into()));
        }
        check_finite(&q, "phase point q")?;
        check_finite(&p, "phase point p")?;
        Ok(PhasePoint { index, q, p })
    }

    /// 1-D convenience constructor.
    pub fn scalar(index: usize, q: f64, p: f64) -> Result<Self> {
        Self::new(index, scalar(q), scalar(p))
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Threshold on the infinity norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Fixed step factor in (0, 1].
    pub damping: f64,
    /// Relative step for finite-difference Jacobians.
    pub fd_step: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-12,
            max_iter: 50,
            damping: 1.0,
            fd_step: 1e-7,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol > 0.0
            && self.max_iter > 0
            && self.damping > 0.0
            && self.damping <= 1.0
            && self.fd_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("bad newton config {self:?}")))
        }
    }
}

/// Central difference `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn fd_partial<F>(f: F, x: &RealVec, i: usize, step: f64) -> Result<f64>
where
    F: Fn(&RealVec) -> f64,
{
    if i >= x.len() {
        return Err(Error::InvalidInput(format!(
            "coordinate {i} out of range for dimension {}",
            x.len()
        )));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidInput("finite-difference step must be > 0".into()));
    }
    check_finite(x, "fd_partial point")?;
    let mut xp = x.clone();
    let mut xm = x.clone();
    xp[i] += step;
    xm[i] -= step;
    let (fp, fm) = (f(&xp), f(&xm));
    if !fp.is_finite() || !fm.is_finite() {
        return Err(Error::Numerical {
            context: format!("fd_partial evaluation along coordinate {i}"),
        });
    }
    Ok((fp - fm) / (2.0 * step))
}

/// Central-difference Jacobian of a vector map. The step on coordinate `i`
/// is `step * max(1, |x_i|)`.
pub fn fd_jacobian<F>(f: F, x: &RealVec, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&RealVec) -> Result<RealVec>,
{
    let n = x.len();
    let mut jac: Option<DMatrix<f64>> = None;
    for i in 0..n {
        let h = step * x[i].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fp = f(&xp)?;
        let fm = f(&xm)?;
        check_finite(&fp, "fd_jacobian evaluation")?;
        check_finite(&fm, "fd_jacobian evaluation")?;
        let m = jac.get_or_insert_with(|| DMatrix::zeros(fp.len(), n));
        let col = (fp - fm) / (2.0 * h);
        m.set_column(i, &col);
    }
    jac.ok_or_else(|| Error::InvalidInput("jacobian of a 0-dimensional map".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub x: RealVec,
    /// Newton updates taken before the tolerance was met.
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Newton's method with finite-difference Jacobian.
pub fn newton_solve<F>(residual: F, guess: &RealVec, cfg: &NewtonConfig) -> Result<NewtonSolution>
where
    F: Fn(&RealVec) -> Result<RealVec>,
{
    let step = cfg.fd_step;
    newton_solve_with(&residual, |x: &RealVec| fd_jacobian(&residual, x, step), guess, cfg)
}

/// Newton's method with a caller-supplied Jacobian.
///
/// Once the residual is below `cfg.tol` one extra undamped update is tried
/// and kept only if it lowers the residual. Callers that difference the
/// solution (symplecticity checks, composed evaluators) rely on the result
/// being converged well past the tolerance.
pub fn newton_solve_with<F, J>(
    residual: F,
    jacobian: J,
    guess: &RealVec,
    cfg: &NewtonConfig,
) -> Result<NewtonSolution>
where
    F: Fn(&RealVec) -> Result<RealVec>,
    J: Fn(&RealVec) -> Result<DMatrix<f64>>,
{
    cfg.validate()?;
    check_finite(guess, "newton guess")?;
    let eval = |x: &RealVec| -> Result<RealVec> {
        let r = residual(x)?;
        check_dim(&r, x.len())?;
        check_finite(&r, "newton residual")?;
        Ok(r)
    };

    let mut x = guess.clone();
    let mut r = eval(&x)?;
    let mut norm = r.amax();
    let mut iterations = 0;
    while norm > cfg.tol {
        if iterations == cfg.max_iter {
            return Err(Error::Convergence {
                iterations,
                residual: norm,
            });
        }
        let dx = newton_update(&jacobian(&x)?, &r)?;
        x -= dx * cfg.damping;
        check_finite(&x, "newton iterate")?;
        r = eval(&x)?;
        norm = r.amax();
        iterations += 1;
    }

    if norm > 0.0 {
        if let Ok(dx) = jacobian(&x).and_then(|j| newton_update(&j, &r)) {
            let polished = &x - dx;
            if let Ok(rp) = eval(&polished) {
                if rp.amax() < norm {
                    x = polished;
                    norm = rp.amax();
                }
            }
        }
    }

    Ok(NewtonSolution {
        x,
        iterations,
        residual_norm: norm,
    })
}

fn newton_update(jac: &DMatrix<f64>, r: &RealVec) -> Result<RealVec> {
    let n = r.len();
    if jac.nrows() != n || jac.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: jac.ncols(),
        });
    }
    if jac.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            context: "newton jacobian".into(),
        });
    }
    let scale = jac.amax().max(1.0).powi(n as i32);
    let lu = jac.clone().lu();
    let det = lu.determinant();
    if !(det.abs() >= SINGULAR_DET_THRESHOLD * scale) {
        return Err(Error::SingularJacobian { det });
    }
    lu.solve(r).ok_or(Error::SingularJacobian { det })
}

/// Classic RK4 for `(q', p') = field(q, p)`; returns `steps + 1` points
/// starting with `x0`.
pub fn rk4_reference<F>(field: F, x0: &PhasePoint, dt: f64, steps: usize) -> Result<Vec<PhasePoint>>
where
    F: Fn(&RealVec, &RealVec) -> (RealVec, RealVec),
{
    if !(dt > 0.0) || steps == 0 {
        return Err(Error::InvalidInput("rk4 needs dt > 0 and steps >= 1".into()));
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0.clone());
    let (mut q, mut p) = (x0.q.clone(), x0.p.clone());
    for k in 1..=steps {
        let (k1q, k1p) = field(&q, &p);
        let (k2q, k2p) = field(&(&q + &k1q * (dt / 2.0)), &(&p + &k1p * (dt / 2.0)));
        let (k3q, k3p) = field(&(&q + &k2q * (dt / 2.0)), &(&p + &k2p * (dt / 2.0)));
        let (k4q, k4p) = field(&(&q + &k3q * dt), &(&p + &k3p * dt));
        q += (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (dt / 6.0);
        p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (dt / 6.0);
        if q.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                context: format!("rk4 state at step {k}"),
            });
        }
        out.push(PhasePoint {
            index: x0.index + k,
            q: q.clone(),
            p: p.clone(),
        });
    }
    Ok(out)
}
