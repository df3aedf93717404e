//! Iterative solution of the optimality system by (preconditioned)
//! conjugate gradients on the reduced functional in the controls.

mod operator;
mod pcg;
mod precond;

pub use operator::ReducedOperator;
pub use pcg::{pcg, recover, solve_pcg, PcgOptions, PcgOutcome};
pub use precond::{psi_d_block, Preconditioner};

pub(crate) use precond::check_finite;
