use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::lagrangian::{central_gradient, DiscreteLagrangian, PairScalarFn, PairVecFn};
use crate::error::{Error, Result};
use crate::numeric::{check_dim, fd_jacobian, newton_solve, NewtonConfig, RealVec};

/// Which generating function a discrete Hamiltonian is.
///
/// `Right` evaluates at `(q_j, p_{j+1})`, `Left` at `(q_{j+1}, p_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Right,
    Left,
}

/// Step for the default mixed-partial Jacobian.
const MIXED_FD_STEP: f64 = 1e-7;

/// A discrete Hamiltonian `H(a, b)` with slot partials. Slot meaning is
/// fixed by [`Side`].
pub trait DiscreteHamiltonian: Send + Sync {
    fn side(&self) -> Side;
    fn dim(&self) -> usize;

    fn name(&self) -> String {
        "anonymous".to_string()
    }

    fn eval(&self, a: &RealVec, b: &RealVec) -> Result<f64>;
    fn d1(&self, a: &RealVec, b: &RealVec) -> Result<RealVec>;
    fn d2(&self, a: &RealVec, b: &RealVec) -> Result<RealVec>;

    /// Mixed second derivative: entry `(i, k)` is `d^2 H / da_i db_k`.
    fn mixed(&self, a: &RealVec, b: &RealVec) -> Result<DMatrix<f64>> {
        fd_jacobian(|bb| self.d1(a, bb), b, MIXED_FD_STEP)
    }
}

pub(crate) fn expect_side(h: &dyn DiscreteHamiltonian, side: Side) -> Result<()> {
    if h.side() == side {
        Ok(())
    } else {
        Err(Error::SideMismatch {
            expected: side,
            got: h.side(),
        })
    }
}

type PairMatFn = Arc<dyn Fn(&RealVec, &RealVec) -> DMatrix<f64> + Send + Sync>;

/// Closure-backed discrete Hamiltonian. Missing partials fall back to
/// central differences of `eval`.
#[derive(Clone)]
pub struct FnHamiltonian {
    side: Side,
    dim: usize,
    name: String,
    eval: PairScalarFn,
    d1: Option<PairVecFn>,
    d2: Option<PairVecFn>,
    mixed: Option<PairMatFn>,
}

impl fmt::Debug for FnHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnHamiltonian")
            .field("side", &self.side)
            .field("dim", &self.dim)
            .field("name", &self.name)
            .finish()
    }
}

impl FnHamiltonian {
    pub fn new<F>(side: Side, dim: usize, eval: F) -> Self
    where
        F: Fn(&RealVec, &RealVec) -> f64 + Send + Sync + 'static,
    {
        FnHamiltonian {
            side,
            dim,
            name: "anonymous".into(),
            eval: Arc::new(eval),
            d1: None,
            d2: None,
            mixed: None,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_d1<F>(mut self, d1: F) -> Self
    where
        F: Fn(&RealVec, &RealVec) -> RealVec + Send + Sync + 'static,
    {
        self.d1 = Some(Arc::new(d1));
        self
    }

    pub fn with_d2<F>(mut self, d2: F) -> Self
    where
        F: Fn(&RealVec, &RealVec) -> RealVec + Send + Sync + 'static,
    {
        self.d2 = Some(Arc::new(d2));
        self
    }

    pub fn with_mixed<F>(mut self, mixed: F) -> Self
    where
        F: Fn(&RealVec, &RealVec) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.mixed = Some(Arc::new(mixed));
        self
    }
}

impl DiscreteHamiltonian for FnHamiltonian {
    fn side(&self) -> Side {
        self.side
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn eval(&self, a: &RealVec, b: &RealVec) -> Result<f64> {
        Ok((self.eval)(a, b))
    }

    fn d1(&self, a: &RealVec, b: &RealVec) -> Result<RealVec> {
        Ok(match &self.d1 {
            Some(f) => f(a, b),
            None => central_gradient(|x| (self.eval)(x, b), a),
        })
    }

    fn d2(&self, a: &RealVec, b: &RealVec) -> Result<RealVec> {
        Ok(match &self.d2 {
            Some(f) => f(a, b),
            None => central_gradient(|x| (self.eval)(a, x), b),
        })
    }

    fn mixed(&self, a: &RealVec, b: &RealVec) -> Result<DMatrix<f64>> {
        match (&self.mixed, &self.d1) {
            (Some(f), _) => Ok(f(a, b)),
            (None, Some(_)) => fd_jacobian(|bb| self.d1(a, bb), b, MIXED_FD_STEP),
            // value only: cross difference, nesting two gradients is too noisy
            (None, None) => Ok(DMatrix::from_fn(a.len(), b.len(), |i, k| {
                let hi = 1e-4 * a[i].abs().max(1.0);
                let hk = 1e-4 * b[k].abs().max(1.0);
                let f = |si: f64, sk: f64| {
                    let mut aa = a.clone();
                    let mut bb = b.clone();
                    aa[i] += si * hi;
                    bb[k] += sk * hk;
                    (self.eval)(&aa, &bb)
                };
                (f(1.0, 1.0) - f(1.0, -1.0) - f(-1.0, 1.0) + f(-1.0, -1.0)) / (4.0 * hi * hk)
            })),
        }
    }
}

/// Discrete Hamiltonian obtained from a discrete Lagrangian by a Legendre
/// transform. Each evaluation recovers the missing configuration with an
/// inner Newton solve.
///
/// Right: `H+(q_j, p_{j+1}) = p_{j+1} q_{j+1} - L_d(q_j, q_{j+1})` where
/// `p_{j+1} = D2 L_d(q_j, q_{j+1})`.
/// Left: `H-(q_{j+1}, p_j) = -p_j q_j - L_d(q_j, q_{j+1})` where
/// `p_j = -D1 L_d(q_j, q_{j+1})`.
///
/// First partials follow from stationarity of the recovered configuration:
/// `D1 H+ = -D1 L_d`, `D2 H+ = q_{j+1}`, `D1 H- = -D2 L_d`, `D2 H- = -q_j`.
#[derive(Debug, Clone)]
pub struct LegendreHamiltonian<L> {
    lagrangian: L,
    side: Side,
    cfg: NewtonConfig,
}

/// Builds `H+` or `H-` from `lagrangian`.
pub fn hamiltonian_from_lagrangian<L: DiscreteLagrangian>(lagrangian: L, side: Side) -> LegendreHamiltonian<L> {
    LegendreHamiltonian {
        lagrangian,
        side,
        cfg: NewtonConfig::default(),
    }
}

impl<L: DiscreteLagrangian> LegendreHamiltonian<L> {
    pub fn with_config(mut self, cfg: NewtonConfig) -> Self {
        self.cfg = cfg;
        self
    }

    pub fn lagrangian(&self) -> &L {
        &self.lagrangian
    }

    /// The configuration hidden in the Hamiltonian's arguments: `q_{j+1}`
    /// for the right side, `q_j` for the left.
    pub fn recover_configuration(&self, a: &RealVec, b: &RealVec) -> Result<RealVec> {
        let n = self.lagrangian.dim();
        check_dim(a, n)?;
        check_dim(b, n)?;
        let l = &self.lagrangian;
        let sol = match self.side {
            // a = q_j, b = p_{j+1}: D2 L_d(q_j, Q) = p_{j+1}
            Side::Right => newton_solve(|x| Ok(l.d2(a, x) - b), a, &self.cfg),
            // a = q_{j+1}, b = p_j: -D1 L_d(Q, q_{j+1}) = p_j
            Side::Left => newton_solve(|x| Ok(-l.d1(x, a) - b), a, &self.cfg),
        };
        sol.map(|s| s.x)
    }
}

impl<L: DiscreteLagrangian> DiscreteHamiltonian for LegendreHamiltonian<L> {
    fn side(&self) -> Side {
        self.side
    }

    fn dim(&self) -> usize {
        self.lagrangian.dim()
    }

    fn name(&self) -> String {
        match self.side {
            Side::Right => "legendre-right".into(),
            Side::Left => "legendre-left".into(),
        }
    }

    fn eval(&self, a: &RealVec, b: &RealVec) -> Result<f64> {
        let q = self.recover_configuration(a, b)?;
        Ok(match self.side {
            Side::Right => b.dot(&q) - self.lagrangian.eval(a, &q),
            Side::Left => -b.dot(&q) - self.lagrangian.eval(&q, a),
        })
    }

    fn d1(&self, a: &RealVec, b: &RealVec) -> Result<RealVec> {
        let q = self.recover_configuration(a, b)?;
        Ok(match self.side {
            Side::Right => -self.lagrangian.d1(a, &q),
            Side::Left => -self.lagrangian.d2(&q, a),
        })
    }

    fn d2(&self, a: &RealVec, b: &RealVec) -> Result<RealVec> {
        let q = self.recover_configuration(a, b)?;
        Ok(match self.side {
            Side::Right => q,
            Side::Left => -q,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanics::lagrangian::{free_particle, FnLagrangian};
    use crate::numeric::scalar;
    use approx::assert_abs_diff_eq;

    #[test]
    fn free_particle_right_hamiltonian() {
        // H+(q, p) = pq + p^2/2 for h = 1
        let h = hamiltonian_from_lagrangian(free_particle(1, 1.0), Side::Right);
        for (q, p) in [(0.0, 0.0), (1.0, 2.0), (-0.4, 0.9), (3.0, -1.5)] {
            let (qv, pv) = (scalar(q), scalar(p));
            assert_abs_diff_eq!(h.eval(&qv, &pv).unwrap(), p * q + p * p / 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(h.d2(&qv, &pv).unwrap()[0], q + p, epsilon = 1e-12);
            assert_abs_diff_eq!(h.d1(&qv, &pv).unwrap()[0], p, epsilon = 1e-12);
        }
    }

    #[test]
    fn free_particle_left_hamiltonian() {
        // H-(q', p) = -p q' + p^2/2 for h = 1
        let h = hamiltonian_from_lagrangian(free_particle(1, 1.0), Side::Left);
        for (qn, p) in [(2.0, 1.0), (-0.3, 0.25)] {
            let (qv, pv) = (scalar(qn), scalar(p));
            assert_abs_diff_eq!(h.eval(&qv, &pv).unwrap(), -p * qn + p * p / 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(h.d1(&qv, &pv).unwrap()[0], -p, epsilon = 1e-12);
            assert_abs_diff_eq!(h.d2(&qv, &pv).unwrap()[0], p - qn, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_momentum_gives_minus_lagrangian() {
        // L_d = (q'-q)^2/2 + (q'-q)^4 - q^2: D2 vanishes at q' = q
        let l = FnLagrangian::new(1, |a, b| {
            let d = b[0] - a[0];
            0.5 * d * d + d.powi(4) - a[0] * a[0]
        });
        let h = hamiltonian_from_lagrangian(l.clone(), Side::Right);
        let q = scalar(0.6);
        assert_abs_diff_eq!(h.eval(&q, &scalar(0.0)).unwrap(), -l.eval(&q, &q), epsilon = 1e-10);
    }

    #[test]
    fn envelope_partials_match_differences() {
        let l = FnLagrangian::new(1, |a, b| {
            let d = b[0] - a[0];
            0.5 * d * d + 0.1 * d.powi(4) - (a[0] * 1.3).cos()
        })
        .with_d1(|a, b| {
            let d = b[0] - a[0];
            scalar(-d - 0.4 * d.powi(3) + 1.3 * (a[0] * 1.3).sin())
        })
        .with_d2(|a, b| {
            let d = b[0] - a[0];
            scalar(d + 0.4 * d.powi(3))
        });
        for side in [Side::Right, Side::Left] {
            let h = hamiltonian_from_lagrangian(l.clone(), side);
            let (a, b) = (scalar(0.4), scalar(0.7));
            let fd1 = central_gradient(|x| h.eval(x, &b).unwrap(), &a);
            let fd2 = central_gradient(|x| h.eval(&a, x).unwrap(), &b);
            assert_abs_diff_eq!(h.d1(&a, &b).unwrap()[0], fd1[0], epsilon = 1e-7);
            assert_abs_diff_eq!(h.d2(&a, &b).unwrap()[0], fd2[0], epsilon = 1e-7);
        }
    }

    #[test]
    fn fn_hamiltonian_fallbacks() {
        let h = FnHamiltonian::new(Side::Right, 1, |q, p| q[0] * q[0] * p[0]);
        let (q, p) = (scalar(1.5), scalar(-2.0));
        assert_abs_diff_eq!(h.d1(&q, &p).unwrap()[0], -6.0, epsilon = 1e-8);
        assert_abs_diff_eq!(h.d2(&q, &p).unwrap()[0], 2.25, epsilon = 1e-8);
        assert_abs_diff_eq!(h.mixed(&q, &p).unwrap()[(0, 0)], 3.0, epsilon = 1e-5);
    }
}
