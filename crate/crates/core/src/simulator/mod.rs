//! Simulation of noisy, jumpy two-asset prices whose beta follows a
//! diffusion with daily feedback, and of the implied daily truth.

mod beta;
mod config;
mod path;

pub use beta::{
    conditional_mean, drbeta_recursion_coeffs, exponential_moments, martingale_loading,
    martingale_variance, true_h_sequence, unconditional_means, RecursionCoeffs,
};
pub use config::{
    BetaParams, InitialValues, JumpLaw, JumpParams, NoiseParams, ResidVol, SimConfig, VolParams,
};
pub use path::{
    replication_rng, simulate, simulate_beta_truth, simulate_replication, DayLatent, DaySimulator,
    SimDay, SimDiagnostics, SimulatedPanel, Truth, VARIANCE_FLOOR,
};
