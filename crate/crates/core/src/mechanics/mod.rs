//! Discrete Lagrangian and Hamiltonian mechanics: Legendre transforms,
//! discrete Euler-Lagrange stepping, right/left discrete Hamilton maps and
//! symplecticity checks.

mod flow;
mod hamiltonian;
mod lagrangian;

pub use flow::{
    left_right_relation_residual, partial_consistency_gap, run_trajectory, step, step_left, step_right,
    symplecticity_defect, verify_step, DiscreteTrajectory, TrajectoryMeta, Truncation,
};
pub(crate) use hamiltonian::expect_side;
pub use hamiltonian::{hamiltonian_from_lagrangian, DiscreteHamiltonian, FnHamiltonian, LegendreHamiltonian, Side};
pub use lagrangian::{
    del_step, discrete_one_forms, free_particle, kinetic_minus_potential, legendre_left, legendre_right,
    DiscreteLagrangian, FnLagrangian,
};
