use std::fmt;
use std::sync::Arc;

use crate::error::Result;
use crate::numeric::{check_dim, check_finite, newton_solve, NewtonConfig, PhasePoint, RealVec};

/// Step used when a partial has to be recovered from the value alone.
pub(crate) const EVAL_FD_STEP: f64 = 1e-6;

/// A two-point function `L_d(q_j, q_{j+1})` with its slot partials.
pub trait DiscreteLagrangian: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, q0: &RealVec, q1: &RealVec) -> f64;
    /// Partial with respect to the first slot.
    fn d1(&self, q0: &RealVec, q1: &RealVec) -> RealVec;
    /// Partial with respect to the second slot.
    fn d2(&self, q0: &RealVec, q1: &RealVec) -> RealVec;
}

pub(crate) type PairScalarFn = Arc<dyn Fn(&RealVec, &RealVec) -> f64 + Send + Sync>;
pub(crate) type PairVecFn = Arc<dyn Fn(&RealVec, &RealVec) -> RealVec + Send + Sync>;

/// Closure-backed discrete Lagrangian. Partials that are not supplied are
/// taken by central differences of `eval`.
#[derive(Clone)]
pub struct FnLagrangian {
    dim: usize,
    eval: PairScalarFn,
    d1: Option<PairVecFn>,
    d2: Option<PairVecFn>,
}

impl fmt::Debug for FnLagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnLagrangian")
            .field("dim", &self.dim)
            .field("analytic_d1", &self.d1.is_some())
            .field("analytic_d2", &self.d2.is_some())
            .finish()
    }
}

impl FnLagrangian {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&RealVec, &RealVec) -> f64 + Send + Sync + 'static,
    {
        FnLagrangian {
            dim,
            eval: Arc::new(eval),
            d1: None,
            d2: None,
        }
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
}

pub(crate) fn central_gradient<F: Fn(&RealVec) -> f64>(f: F, x: &RealVec) -> RealVec {
    RealVec::from_fn(x.len(), |i, _| {
        let h = EVAL_FD_STEP * x[i].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    })
}

impl DiscreteLagrangian for FnLagrangian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, q0: &RealVec, q1: &RealVec) -> f64 {
        (self.eval)(q0, q1)
    }

    fn d1(&self, q0: &RealVec, q1: &RealVec) -> RealVec {
        match &self.d1 {
            Some(f) => f(q0, q1),
            None => central_gradient(|x| (self.eval)(x, q1), q0),
        }
    }

    fn d2(&self, q0: &RealVec, q1: &RealVec) -> RealVec {
        match &self.d2 {
            Some(f) => f(q0, q1),
            None => central_gradient(|x| (self.eval)(q0, x), q1),
        }
    }
}

/// `L_d = |q_{j+1} - q_j|^2 / (2h)` in `dim` dimensions.
pub fn free_particle(dim: usize, h: f64) -> FnLagrangian {
    FnLagrangian::new(dim, move |a, b| (b - a).norm_squared() / (2.0 * h))
        .with_d1(move |a, b| (a - b) / h)
        .with_d2(move |a, b| (b - a) / h)
}

/// Rectangle-rule Lagrangian `|q_{j+1} - q_j|^2 / (2h) - h V(q_j)` for a
/// potential with gradient `grad_v`.
pub fn kinetic_minus_potential<V, G>(dim: usize, h: f64, potential: V, grad_v: G) -> FnLagrangian
where
    V: Fn(&RealVec) -> f64 + Send + Sync + 'static,
    G: Fn(&RealVec) -> RealVec + Send + Sync + 'static,
{
    FnLagrangian::new(dim, move |a, b| (b - a).norm_squared() / (2.0 * h) - h * potential(a))
        .with_d1(move |a, b| (a - b) / h - grad_v(a) * h)
        .with_d2(move |a, b| (b - a) / h)
}

fn check_pair(l: &dyn DiscreteLagrangian, a: &RealVec, b: &RealVec) -> Result<()> {
    check_dim(a, l.dim())?;
    check_dim(b, l.dim())?;
    check_finite(a, "configuration")?;
    check_finite(b, "configuration")
}

/// Right discrete Legendre transform: `(q_j, q_{j+1}) -> (q_{j+1}, D2 L_d)`,
/// returned at index `j + 1`.
pub fn legendre_right(l: &dyn DiscreteLagrangian, j: usize, q_j: &RealVec, q_next: &RealVec) -> Result<PhasePoint> {
    check_pair(l, q_j, q_next)?;
    PhasePoint::new(j + 1, q_next.clone(), l.d2(q_j, q_next))
}

/// Left discrete Legendre transform: `(q_j, q_{j+1}) -> (q_j, -D1 L_d)`,
/// returned at index `j`.
pub fn legendre_left(l: &dyn DiscreteLagrangian, j: usize, q_j: &RealVec, q_next: &RealVec) -> Result<PhasePoint> {
    check_pair(l, q_j, q_next)?;
    PhasePoint::new(j, q_j.clone(), -l.d1(q_j, q_next))
}

/// Coefficients of the discrete one-forms: `theta_plus` on `dq_{j+1}` and
/// `theta_minus` on `dq_j`.
pub fn discrete_one_forms(l: &dyn DiscreteLagrangian, q_j: &RealVec, q_next: &RealVec) -> Result<(RealVec, RealVec)> {
    check_pair(l, q_j, q_next)?;
    Ok((l.d2(q_j, q_next), -l.d1(q_j, q_next)))
}

/// Solves the discrete Euler-Lagrange equation
/// `D2 L_d(q_prev, q_j) + D1 L_d(q_j, q_next) = 0` for `q_next`.
/// Without a guess the linear extrapolation `2 q_j - q_prev` is used.
pub fn del_step(
    l: &dyn DiscreteLagrangian,
    q_prev: &RealVec,
    q_j: &RealVec,
    cfg: &NewtonConfig,
    guess: Option<&RealVec>,
) -> Result<RealVec> {
    check_pair(l, q_prev, q_j)?;
    let momentum = l.d2(q_prev, q_j);
    let start = match guess {
        Some(g) => {
            check_dim(g, l.dim())?;
            g.clone()
        }
        None => q_j * 2.0 - q_prev,
    };
    let sol = newton_solve(|qn| Ok(&momentum + l.d1(q_j, qn)), &start, cfg)?;
    Ok(sol.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::numeric::scalar;
    use approx::assert_abs_diff_eq;

    fn product() -> FnLagrangian {
        FnLagrangian::new(1, |a, b| a[0] * b[0])
    }

    fn oscillator(h: f64) -> FnLagrangian {
        kinetic_minus_potential(1, h, |q| 0.5 * q[0] * q[0], |q| q.clone())
    }

    #[test]
    fn legendre_right_examples() {
        let x = legendre_right(&product(), 1, &scalar(2.0), &scalar(5.0)).unwrap();
        assert_eq!(x.index, 2);
        assert_abs_diff_eq!(x.q[0], 5.0);
        assert_abs_diff_eq!(x.p[0], 2.0, epsilon = 1e-8);

        let x = legendre_right(&free_particle(1, 1.0), 1, &scalar(0.7), &scalar(0.7)).unwrap();
        assert_eq!(x.p[0], 0.0);

        let x = legendre_right(&oscillator(0.1), 1, &scalar(0.0), &scalar(0.1)).unwrap();
        assert_abs_diff_eq!(x.p[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn legendre_left_examples() {
        let x = legendre_left(&product(), 1, &scalar(2.0), &scalar(5.0)).unwrap();
        assert_eq!(x.index, 1);
        assert_abs_diff_eq!(x.q[0], 2.0);
        assert_abs_diff_eq!(x.p[0], -5.0, epsilon = 1e-8);

        let x = legendre_left(&free_particle(1, 1.0), 1, &scalar(-3.0), &scalar(-3.0)).unwrap();
        assert_eq!(x.p[0], 0.0);

        let x = legendre_left(&free_particle(1, 0.1), 1, &scalar(0.0), &scalar(0.1)).unwrap();
        assert_abs_diff_eq!(x.p[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn legendre_checks_dimensions() {
        let err = legendre_right(&free_particle(2, 1.0), 1, &scalar(0.0), &scalar(1.0)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 1 }));
    }

    #[test]
    fn del_step_examples() {
        let cfg = NewtonConfig::default();
        let qn = del_step(&free_particle(1, 1.0), &scalar(0.0), &scalar(1.0), &cfg, None).unwrap();
        assert_abs_diff_eq!(qn[0], 2.0, epsilon = 1e-12);

        // rest solution at the critical point of the oscillator
        let qn = del_step(&oscillator(0.3), &scalar(0.0), &scalar(0.0), &cfg, Some(&scalar(0.4))).unwrap();
        assert_abs_diff_eq!(qn[0], 0.0, epsilon = 1e-12);

        // q_next = 2 q_j - q_prev - h^2 q_j
        let qn = del_step(&oscillator(0.1), &scalar(0.0), &scalar(0.1), &cfg, None).unwrap();
        assert_abs_diff_eq!(qn[0], 0.199, epsilon = 1e-12);
    }

    #[test]
    fn del_step_degenerate_lagrangian() {
        // L_d = q_j + q_next has no dependence of D1 on q_next
        let l = FnLagrangian::new(1, |a, b| a[0] + b[0]);
        let err = del_step(&l, &scalar(0.0), &scalar(1.0), &NewtonConfig::default(), None).unwrap_err();
        assert!(matches!(err, Error::SingularJacobian { .. }));
    }

    #[test]
    fn one_forms() {
        let (tp, tm) = discrete_one_forms(&product(), &scalar(2.0), &scalar(5.0)).unwrap();
        assert_abs_diff_eq!(tp[0], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(tm[0], -5.0, epsilon = 1e-8);

        let constant = FnLagrangian::new(1, |_, _| 4.2);
        let (tp, tm) = discrete_one_forms(&constant, &scalar(2.0), &scalar(5.0)).unwrap();
        assert_eq!((tp[0], tm[0]), (0.0, 0.0));
    }

    #[test]
    fn one_forms_match_legendre_transforms() {
        let l = oscillator(0.25);
        let (a, b) = (scalar(0.3), scalar(-0.45));
        let (tp, tm) = discrete_one_forms(&l, &a, &b).unwrap();
        assert_eq!(tp, legendre_right(&l, 1, &a, &b).unwrap().p);
        assert_eq!(tm, legendre_left(&l, 1, &a, &b).unwrap().p);
    }

    #[test]
    fn fd_fallback_matches_analytic() {
        let analytic = oscillator(0.2);
        let numeric = FnLagrangian::new(1, move |a, b| (b - a).norm_squared() / 0.4 - 0.1 * a[0] * a[0]);
        let (a, b) = (scalar(0.8), scalar(1.3));
        assert_abs_diff_eq!(analytic.d1(&a, &b)[0], numeric.d1(&a, &b)[0], epsilon = 1e-8);
        assert_abs_diff_eq!(analytic.d2(&a, &b)[0], numeric.d2(&a, &b)[0], epsilon = 1e-8);
    }
}
