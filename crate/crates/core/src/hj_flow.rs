//! Generating-function form of the discrete Hamilton-Jacobi equation.
//!
//! A family `{S^j}` solves the right discrete HJ equation when
//!
//! ```text
//! S^{j+1}(q_{j+1}) - S^j(q_j) - DS^{j+1}(q_{j+1}) q_{j+1} + H+(q_j, DS^{j+1}(q_{j+1})) = 0
//! ```
//!
//! and the lifted points `(q_j, DS^j(q_j))` are carried into each other by
//! the right discrete Hamilton map. [`solve_generating_sequence`] builds such
//! a family by flowing the lift; [`run_example_flow`] iterates the explicit
//! quadratic-root recurrence for the one-dimensional control benchmark.

use crate::error::{Error, Result};
use crate::mechanics::{step_right, DiscreteHamiltonian, Side, Truncation};
use crate::numeric::{check_dim, scalar, NewtonConfig, PhasePoint, RealVec};

/// Sign selection for the quadratic-root recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchPolicy {
    Plus,
    Minus,
    /// Root closest to the previous `DS`.
    #[default]
    Continuity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Root {
    Plus,
    Minus,
}

/// Both roots at one recurrence step and the one kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchChoice {
    /// Index of the produced entry.
    pub j: usize,
    pub plus: f64,
    pub minus: f64,
    pub chosen: Root,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingEntry {
    pub j: usize,
    pub q: RealVec,
    /// `S^j(q_j)` when the solver tracks the action.
    pub s: Option<f64>,
    /// `DS^j(q_j)`, the momentum candidate `p_j`.
    pub ds: RealVec,
    /// HJ residual linking this entry to the previous one.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingSequence {
    pub entries: Vec<GeneratingEntry>,
    pub branch_log: Vec<BranchChoice>,
    /// Auxiliary constant of the quadratic recurrence (0 for the generic solver).
    pub h: f64,
    /// Set when a step collapsed a nonzero configuration onto the origin.
    pub degenerate: bool,
    pub truncation: Option<Truncation>,
}

impl GeneratingSequence {
    pub fn q_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.q[0]).collect()
    }

    pub fn ds_values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.ds[0]).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.entries
            .iter()
            .filter_map(|e| e.residual)
            .fold(0.0, f64::max)
    }

    /// First entry index whose root differs from the `+` branch.
    pub fn first_branch_switch(&self) -> Option<usize> {
        self.branch_log
            .iter()
            .find(|c| c.chosen == Root::Minus)
            .map(|c| c.j)
    }
}

/// `S_{j+1} - S_j - DS_{j+1} . q_{j+1} + H+(q_j, DS_{j+1})`.
pub fn hj_residual_right(
    h: &dyn DiscreteHamiltonian,
    s_j: f64,
    s_next: f64,
    ds_next: &RealVec,
    q_j: &RealVec,
    q_next: &RealVec,
) -> Result<f64> {
    if h.side() != Side::Right {
        return Err(Error::SideMismatch {
            expected: Side::Right,
            got: h.side(),
        });
    }
    check_dim(ds_next, q_next.len())?;
    Ok(s_next - s_j - ds_next.dot(q_next) + h.eval(q_j, ds_next)?)
}

/// `S_{j+1} - S_j + DS_j . q_j + H-(q_{j+1}, DS_j)`.
pub fn hj_residual_left(
    h: &dyn DiscreteHamiltonian,
    s_j: f64,
    s_next: f64,
    ds_j: &RealVec,
    q_j: &RealVec,
    q_next: &RealVec,
) -> Result<f64> {
    if h.side() != Side::Left {
        return Err(Error::SideMismatch {
            expected: Side::Left,
            got: h.side(),
        });
    }
    check_dim(ds_j, q_j.len())?;
    Ok(s_next - s_j + ds_j.dot(q_j) + h.eval(q_next, ds_j)?)
}

/// How far the lift `(q_j, DS_j)` is from flowing to `DS_{j+1}` under the
/// right map: `|| D1 H+(q_j, DS_{j+1}) - DS_j ||_inf`.
pub fn commutativity_defect(h: &dyn DiscreteHamiltonian, q_j: &RealVec, ds_j: &RealVec, ds_next: &RealVec) -> Result<f64> {
    Ok((h.d1(q_j, ds_next)? - ds_j).amax())
}

/// Flows the lift `q -> (q, DS)` with the right discrete Hamilton map and
/// accumulates the action `S_{j+1} = S_j + p_{j+1} q_{j+1} - H+(q_j, p_{j+1})`.
/// Each produced entry carries its independently evaluated HJ residual.
pub fn solve_generating_sequence(
    h: &dyn DiscreteHamiltonian,
    q0: &RealVec,
    s0: f64,
    ds0: &RealVec,
    steps: usize,
    cfg: &NewtonConfig,
) -> Result<GeneratingSequence> {
    if steps == 0 {
        return Err(Error::InvalidInput("generating sequence needs at least one step".into()));
    }
    if h.side() != Side::Right {
        return Err(Error::SideMismatch {
            expected: Side::Right,
            got: h.side(),
        });
    }
    check_dim(q0, h.dim())?;
    check_dim(ds0, h.dim())?;

    let mut seq = GeneratingSequence {
        entries: vec![GeneratingEntry {
            j: 1,
            q: q0.clone(),
            s: Some(s0),
            ds: ds0.clone(),
            residual: None,
        }],
        branch_log: Vec::new(),
        h: 0.0,
        degenerate: false,
        truncation: None,
    };

    for _ in 0..steps {
        let last = seq.entries.last().expect("sequence starts non-empty");
        let s_j = last.s.expect("generic entries carry S");
        let lifted = PhasePoint::new(last.j, last.q.clone(), last.ds.clone())?;
        let next = match step_right(h, &lifted, cfg) {
            Ok(next) => next,
            Err(error) => {
                seq.truncation = Some(Truncation { index: last.j, error });
                break;
            }
        };
        let s_next = s_j + next.p.dot(&next.q) - h.eval(&lifted.q, &next.p)?;
        let residual = hj_residual_right(h, s_j, s_next, &next.p, &lifted.q, &next.q)?;
        if lifted.q.amax() != 0.0 && next.q.amax() == 0.0 {
            seq.degenerate = true;
        }
        seq.entries.push(GeneratingEntry {
            j: next.index,
            q: next.q,
            s: Some(s_next),
            ds: next.p,
            residual: Some(residual.abs()),
        });
    }
    Ok(seq)
}

/// Both roots `DS_{j+1} = -q_j^3 + q_j - q_{j+1} +- sqrt(disc)` of the
/// benchmark's quadratic recurrence, `(plus, minus)`.
pub fn example_ds_roots(q_j: f64, q_next: f64, prev_ds: f64, h: f64) -> Result<(f64, f64)> {
    let disc = q_j.powi(6) - 2.0 * q_j.powi(4) + 2.0 * q_j.powi(3) * q_next + 2.0 * h * prev_ds + 2.0 * q_j * q_j
        - 2.0 * q_j * q_next
        + q_next * q_next;
    if !disc.is_finite() {
        return Err(Error::Numerical {
            context: "discriminant of the DS recurrence".into(),
        });
    }
    if disc < 0.0 {
        return Err(Error::Branch { discriminant: disc });
    }
    let base = -q_j.powi(3) + q_j - q_next;
    let root = disc.sqrt();
    Ok((base + root, base - root))
}

fn select_root(plus: f64, minus: f64, prev_ds: f64, branch: BranchPolicy) -> Root {
    match branch {
        BranchPolicy::Plus => Root::Plus,
        BranchPolicy::Minus => Root::Minus,
        BranchPolicy::Continuity => {
            if (minus - prev_ds).abs() < (plus - prev_ds).abs() {
                Root::Minus
            } else {
                Root::Plus
            }
        }
    }
}

/// One step of the quadratic-root recurrence for `DS_{j+1}`.
pub fn example_ds_step(q_j: f64, q_next: f64, prev_ds: f64, h: f64, branch: BranchPolicy) -> Result<f64> {
    let (plus, minus) = example_ds_roots(q_j, q_next, prev_ds, h)?;
    Ok(match select_root(plus, minus, prev_ds, branch) {
        Root::Plus => plus,
        Root::Minus => minus,
    })
}

/// Iterates [`example_ds_step`] along a supplied configuration grid. A
/// negative discriminant stops the run and keeps the prefix.
pub fn run_example_flow(q_sequence: &[f64], ds0: f64, h: f64, branch: BranchPolicy) -> Result<GeneratingSequence> {
    if q_sequence.len() < 2 {
        return Err(Error::InvalidInput("DS recurrence needs at least two grid points".into()));
    }
    if q_sequence.iter().any(|q| !q.is_finite()) || !ds0.is_finite() || !h.is_finite() {
        return Err(Error::Numerical {
            context: "DS recurrence input".into(),
        });
    }
    let mut seq = GeneratingSequence {
        entries: vec![GeneratingEntry {
            j: 1,
            q: scalar(q_sequence[0]),
            s: None,
            ds: scalar(ds0),
            residual: None,
        }],
        branch_log: Vec::new(),
        h,
        degenerate: false,
        truncation: None,
    };
    let mut ds = ds0;
    for (k, pair) in q_sequence.windows(2).enumerate() {
        let j = k + 1;
        let (plus, minus) = match example_ds_roots(pair[0], pair[1], ds, h) {
            Ok(roots) => roots,
            Err(error) => {
                seq.truncation = Some(Truncation { index: j, error });
                break;
            }
        };
        let chosen = select_root(plus, minus, ds, branch);
        ds = if chosen == Root::Plus { plus } else { minus };
        seq.branch_log.push(BranchChoice {
            j: j + 1,
            plus,
            minus,
            chosen,
        });
        seq.entries.push(GeneratingEntry {
            j: j + 1,
            q: scalar(pair[1]),
            s: None,
            ds: scalar(ds),
            residual: None,
        });
    }
    Ok(seq)
}
