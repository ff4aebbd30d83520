mod bump;
mod freqnull;
mod hum;
mod nfunc;
mod nullctl;
mod signal;
mod spectrum;

pub use bump::{bump_control, bump_derivative, bump_profile};
pub use freqnull::{null_control_frequency, FrequencyNullControl, LEAKAGE_LIMIT, SPECTRUM_FLOOR};
pub use hum::{cg_with, DenseGramian, gramian_asymmetry, gramian_cg, hum_control, pairs_at_length, unreachable_basis, CgOutcome, ControlMap, HumResult, HUM_TOL};
pub use nfunc::{h_prime_ratio, n_functional, NPlan, NValue, GAMMA_SCAN, MIN_H_PRIME};
pub use nullctl::{null_control, NullControl, NullControlPlan, NULL_MAX_ITER, NULL_TIKHONOV, NULL_TOL};
pub use signal::ControlSignal;
pub use spectrum::{default_pad, sobolev_norm, HsNorm};
