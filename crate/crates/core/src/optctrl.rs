//! Optimal-control front end.
//!
//! A control problem `q' = Gamma(q, u)` with running cost `L(q, u)` is reduced
//! to a Hamiltonian `H1(q, p) = p . Gamma(q, u*) +- L(q, u*)` by solving the
//! secondary constraint `phi(q, p, u*) = 0` for the control. The discrete
//! right Hamiltonian is the bare substitution `q -> q_j`, `p -> p_{j+1}`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mechanics::{DiscreteHamiltonian, DiscreteTrajectory, Side};
use crate::numeric::{check_dim, check_finite, fd_partial, newton_solve, NewtonConfig, RealVec, SINGULAR_DET_THRESHOLD};

pub type StateControlVecFn = Arc<dyn Fn(&RealVec, &RealVec) -> RealVec + Send + Sync>;
pub type StateControlScalarFn = Arc<dyn Fn(&RealVec, &RealVec) -> f64 + Send + Sync>;
pub type StateControlMatFn = Arc<dyn Fn(&RealVec, &RealVec) -> DMatrix<f64> + Send + Sync>;

/// Sign of the cost term in the constrained Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostSign {
    #[default]
    Plus,
    Minus,
}

impl CostSign {
    pub fn factor(self) -> f64 {
        match self {
            CostSign::Plus => 1.0,
            CostSign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            CostSign::Plus => CostSign::Minus,
            CostSign::Minus => CostSign::Plus,
        }
    }
}

/// `q' = Gamma(q, u)` with running cost `L(q, u)`, state dimension `n` and
/// control dimension `k`.
#[derive(Clone)]
pub struct ControlProblem {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub gamma: StateControlVecFn,
    pub cost: StateControlScalarFn,
    /// `n x k`, entry `(i, a)` is `dGamma_i / du_a`.
    pub du_gamma: StateControlMatFn,
    pub du_cost: StateControlVecFn,
    /// `n x n`, entry `(i, m)` is `dGamma_i / dq_m`.
    pub dq_gamma: Option<StateControlMatFn>,
    pub dq_cost: Option<StateControlVecFn>,
    pub sign: CostSign,
}

impl fmt::Debug for ControlProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlProblem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("k", &self.k)
            .field("sign", &self.sign)
            .finish_non_exhaustive()
    }
}

impl ControlProblem {
    pub fn new<G, C, DG, DC>(n: usize, k: usize, gamma: G, cost: C, du_gamma: DG, du_cost: DC) -> Self
    where
        G: Fn(&RealVec, &RealVec) -> RealVec + Send + Sync + 'static,
        C: Fn(&RealVec, &RealVec) -> f64 + Send + Sync + 'static,
        DG: Fn(&RealVec, &RealVec) -> DMatrix<f64> + Send + Sync + 'static,
        DC: Fn(&RealVec, &RealVec) -> RealVec + Send + Sync + 'static,
    {
        Self {
            name: "custom".into(),
            n,
            k,
            gamma: Arc::new(gamma),
            cost: Arc::new(cost),
            du_gamma: Arc::new(du_gamma),
            du_cost: Arc::new(du_cost),
            dq_gamma: None,
            dq_cost: None,
            sign: CostSign::Plus,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_sign(mut self, sign: CostSign) -> Self {
        self.sign = sign;
        self
    }

    pub fn with_state_partials<DG, DC>(mut self, dq_gamma: DG, dq_cost: DC) -> Self
    where
        DG: Fn(&RealVec, &RealVec) -> DMatrix<f64> + Send + Sync + 'static,
        DC: Fn(&RealVec, &RealVec) -> RealVec + Send + Sync + 'static,
    {
        self.dq_gamma = Some(Arc::new(dq_gamma));
        self.dq_cost = Some(Arc::new(dq_cost));
        self
    }

    fn check_inputs(&self, q: &RealVec, p: &RealVec, u: &RealVec) -> Result<()> {
        check_dim(q, self.n)?;
        check_dim(p, self.n)?;
        check_dim(u, self.k)
    }
}

/// `phi_a = p . dGamma/du_a + sign * dL/du_a`.
pub fn secondary_constraint(cp: &ControlProblem, q: &RealVec, p: &RealVec, u: &RealVec) -> Result<RealVec> {
    cp.check_inputs(q, p, u)?;
    let phi = (cp.du_gamma)(q, u).tr_mul(p) + (cp.du_cost)(q, u) * cp.sign.factor();
    check_dim(&phi, cp.k)?;
    Ok(phi)
}

fn affine_close(a: &RealVec, b: &RealVec) -> bool {
    let scale = a.amax().max(b.amax()).max(1.0);
    (a - b).amax() <= 1e-12 * scale
}

/// Solves `phi(q, p, u) = 0` for `u`. When `phi` is affine in `u` (probed at
/// the origin, the unit vectors and their negatives) the linear system is
/// solved directly; otherwise Newton starts from `guess`.
pub fn eliminate_control(
    cp: &ControlProblem,
    q: &RealVec,
    p: &RealVec,
    cfg: &NewtonConfig,
    guess: &RealVec,
) -> Result<RealVec> {
    cp.check_inputs(q, p, guess)?;
    let phi = |u: &RealVec| secondary_constraint(cp, q, p, u);

    let zero = DVector::zeros(cp.k);
    let phi0 = phi(&zero)?;
    check_finite(&phi0, "secondary constraint")?;
    let mut a = DMatrix::zeros(cp.k, cp.k);
    let mut affine = true;
    for i in 0..cp.k {
        let mut e = zero.clone();
        e[i] = 1.0;
        let fwd = phi(&e)? - &phi0;
        let bwd = &phi0 - phi(&(-&e))?;
        affine &= affine_close(&fwd, &bwd);
        a.set_column(i, &fwd);
    }
    if affine {
        let ones = DVector::from_element(cp.k, 1.0);
        affine = affine_close(&(phi(&ones)? - &phi0), &(&a * &ones));
    }

    if affine {
        let scale = a.amax().max(1.0).powi(cp.k as i32);
        let lu = a.lu();
        let det = lu.determinant();
        if !det.is_finite() || det.abs() < SINGULAR_DET_THRESHOLD * scale {
            return Err(Error::SingularJacobian { det });
        }
        let u = lu.solve(&(-&phi0)).ok_or(Error::SingularJacobian { det })?;
        check_finite(&u, "eliminated control")?;
        if phi(&u)?.amax() <= cfg.tol.max(1e-12 * phi0.amax()) {
            return Ok(u);
        }
        return Ok(newton_solve(phi, &u, cfg)?.x);
    }
    Ok(newton_solve(phi, guess, cfg)?.x)
}

/// Continuous Hamiltonian with the control eliminated.
#[derive(Debug, Clone)]
pub struct ReducedHamiltonian {
    problem: ControlProblem,
    cfg: NewtonConfig,
}

pub fn reduce(cp: ControlProblem) -> ReducedHamiltonian {
    ReducedHamiltonian {
        problem: cp,
        cfg: NewtonConfig::default(),
    }
}

impl ReducedHamiltonian {
    pub fn with_config(mut self, cfg: NewtonConfig) -> Self {
        self.cfg = cfg;
        self
    }

    pub fn problem(&self) -> &ControlProblem {
        &self.problem
    }

    pub fn dim(&self) -> usize {
        self.problem.n
    }

    pub fn u_of_qp(&self, q: &RealVec, p: &RealVec) -> Result<RealVec> {
        eliminate_control(&self.problem, q, p, &self.cfg, &DVector::zeros(self.problem.k))
    }

    pub fn eval(&self, q: &RealVec, p: &RealVec) -> Result<f64> {
        let u = self.u_of_qp(q, p)?;
        let cp = &self.problem;
        Ok(p.dot(&(cp.gamma)(q, &u)) + cp.sign.factor() * (cp.cost)(q, &u))
    }

    /// `dH1/dq`; analytic when the problem carries state partials.
    pub fn dq(&self, q: &RealVec, p: &RealVec) -> Result<RealVec> {
        let cp = &self.problem;
        if let (Some(dg), Some(dc)) = (&cp.dq_gamma, &cp.dq_cost) {
            let u = self.u_of_qp(q, p)?;
            return Ok(dg(q, &u).tr_mul(p) + dc(q, &u) * cp.sign.factor());
        }
        let f = |x: &RealVec| self.eval(x, p).unwrap_or(f64::NAN);
        let grad: Result<Vec<f64>> = (0..cp.n)
            .map(|i| fd_partial(f, q, i, 1e-6 * q[i].abs().max(1.0)))
            .collect();
        Ok(DVector::from_vec(grad?))
    }

    /// `dH1/dp = Gamma(q, u*)`.
    pub fn dp(&self, q: &RealVec, p: &RealVec) -> Result<RealVec> {
        let u = self.u_of_qp(q, p)?;
        Ok((self.problem.gamma)(q, &u))
    }
}

/// `H+(q_j, p_{j+1}) = H1(q_j, p_{j+1})`.
#[derive(Debug, Clone)]
pub struct DiscretizedHamiltonian {
    reduced: ReducedHamiltonian,
}

pub fn discretize_right(hc: ReducedHamiltonian) -> DiscretizedHamiltonian {
    DiscretizedHamiltonian { reduced: hc }
}

impl DiscretizedHamiltonian {
    pub fn reduced(&self) -> &ReducedHamiltonian {
        &self.reduced
    }
}

impl DiscreteHamiltonian for DiscretizedHamiltonian {
    fn side(&self) -> Side {
        Side::Right
    }

    fn dim(&self) -> usize {
        self.reduced.dim()
    }

    fn name(&self) -> String {
        self.reduced.problem.name.clone()
    }

    fn eval(&self, a: &RealVec, b: &RealVec) -> Result<f64> {
        self.reduced.eval(a, b)
    }

    fn d1(&self, a: &RealVec, b: &RealVec) -> Result<RealVec> {
        self.reduced.dq(a, b)
    }

    fn d2(&self, a: &RealVec, b: &RealVec) -> Result<RealVec> {
        self.reduced.dp(a, b)
    }
}

/// `u_j = u*(q_j, p_{j+1})` for every step of a trajectory.
pub fn recover_controls(cp: &ControlProblem, traj: &DiscreteTrajectory, cfg: &NewtonConfig) -> Result<Vec<RealVec>> {
    traj.points
        .windows(2)
        .map(|w| eliminate_control(cp, &w[0].q, &w[1].p, cfg, &DVector::zeros(cp.k)))
        .collect()
}

pub const BUILTIN_MODELS: &[&str] = &["sakamoto1d"];

/// One-dimensional benchmark: `Gamma = q - q^3 + u`, `L = (s q^2 + r u^2) / 2`.
pub fn sakamoto1d(r: f64, s: f64) -> Result<ControlProblem> {
    if !(r > 0.0 && r.is_finite()) || !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidInput(format!("sakamoto1d needs r > 0 and s > 0, got r={r}, s={s}")));
    }
    Ok(ControlProblem::new(
        1,
        1,
        |q, u| DVector::from_element(1, q[0] - q[0].powi(3) + u[0]),
        move |q, u| (s * q[0] * q[0] + r * u[0] * u[0]) / 2.0,
        |_, _| DMatrix::from_element(1, 1, 1.0),
        move |_, u| DVector::from_element(1, r * u[0]),
    )
    .with_state_partials(
        |q, _| DMatrix::from_element(1, 1, 1.0 - 3.0 * q[0] * q[0]),
        move |q, _| DVector::from_element(1, s * q[0]),
    )
    .named("sakamoto1d"))
}

/// Looks up a builtin problem by key.
pub fn builtin(key: &str, params: &BTreeMap<String, f64>) -> Result<ControlProblem> {
    match key {
        "sakamoto1d" => {
            if let Some(bad) = params.keys().find(|k| !matches!(k.as_str(), "r" | "s")) {
                return Err(Error::InvalidInput(format!("unknown parameter '{bad}' for sakamoto1d")));
            }
            let get = |k: &str| params.get(k).copied().unwrap_or(1.0);
            sakamoto1d(get("r"), get("s"))
        }
        other => Err(Error::UnknownModel(other.to_string())),
    }
}
