//! KdV boundary-control laboratory.

pub mod complex_cubic;
pub mod control_tools;
pub mod critical_lengths;
pub mod error;
pub mod kdv_solver;
pub mod numerics;
pub mod obstruction_experiments;
pub mod spectral;
pub mod toy_ode;

pub use error::{KdvError, Result};
pub use numerics::C64;
