//! Power-series obstruction experiments: the quadratic form, its sign, the
//! normalized ratio, and nonlinear steering at critical lengths.

mod btable;
mod quadratic;
mod steer;
mod sweep;

pub use btable::BTable;
pub use quadratic::{parseval_quadratic, quadratic_form, quadratic_form_with, quadratic_from_trajectory, FrequencyGrid, QuadraticForm, DECAY_TOL};
pub use sweep::{
    measure, monotone_ratio, monotone_ratio_sweep, random_bump_control, sample_rng, sign_definiteness_sweep, summarize, table_for, HorizonContext, HorizonSummary,
    ObstructionReport, PairInfo, SampleRecord, SweepGrid, REPORT_SCHEMA,
};
pub use steer::{nonlinear_steer, SteerConfig, SteerOutcome, SteerPlan};
