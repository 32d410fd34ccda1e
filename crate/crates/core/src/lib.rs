//! Discrete Hamiltonian mechanics and two discrete Hamilton-Jacobi solvers:
//! the generating-function recurrence ([`hj_flow`]) and the discrete
//! Hamiltonian vector field recurrence ([`hj_vf`]), with an optimal-control
//! front end ([`optctrl`]) for the one-dimensional benchmark problem.

pub mod error;
pub mod hj_flow;
pub mod hj_vf;
pub mod mechanics;
pub mod numeric;
pub mod optctrl;

pub use error::{Error, Result};
pub use numeric::{scalar, NewtonConfig, PhasePoint, RealVec};
