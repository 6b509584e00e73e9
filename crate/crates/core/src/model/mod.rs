//! The DR Beta recursion for daily integrated betas.
//!
//! The conditional mean of the next day's integrated beta is
//! `h_n = omega + sum_i gamma_i h_{n-i} + sum_j alpha_j Ibeta_{n-j}`, an
//! ARMA-type filter driven by the estimated daily integrals. This module
//! filters it, fits it by least squares (the Gaussian quasi-likelihood),
//! reports the asymptotic covariance and Wald statistics, selects orders by
//! BIC and forecasts one day ahead.

mod fit;
mod optim;
mod params;
mod recursion;

pub use fit::{bic_select, fit, z_statistics, BicSelection, DrBetaFit, FitOptions, OrderFit, EIGEN_FLOOR};
pub use params::{Bounds, DrBetaParams};
pub use recursion::{forecast, h_gradient, h_recursion, qmle_loss, RecursionInit};

use crate::simulator::{drbeta_recursion_coeffs, BetaParams};

/// Reduced-form parameters implied by a simulated beta diffusion.
pub fn reduced_form(beta: &BetaParams) -> DrBetaParams {
    let c = drbeta_recursion_coeffs(beta);
    DrBetaParams {
        p: beta.p(),
        q: beta.q(),
        omega: c.omega_g,
        gamma: c.gamma.clone(),
        alpha: c.alpha_g.clone(),
    }
}
