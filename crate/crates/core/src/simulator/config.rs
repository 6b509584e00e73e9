//! Simulation configuration with the reference design as its default.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::beta::{drbeta_recursion_coeffs, unconditional_means};

/// Parameters of the spot-beta diffusion.
///
/// `alpha[0]` drives the intraday feedback of the running integral; the later
/// entries load on integrals of earlier days. `gamma[i]` loads on the spot
/// beta `i + 1` days back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaParams {
    pub omega1: f64,
    pub omega2: f64,
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Scale of the intraday Brownian fluctuation.
    pub nu: f64,
    /// Correlation between the beta driver and the market price driver.
    pub rho: f64,
}

impl BetaParams {
    /// `omega1 - omega2`.
    pub fn omega(&self) -> f64 {
        self.omega1 - self.omega2
    }

    pub fn p(&self) -> usize {
        self.alpha.len()
    }

    pub fn q(&self) -> usize {
        self.gamma.len()
    }

    /// Checks the stationarity conditions of the implied daily recursion.
    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() {
            return Err(Error::Config("the beta diffusion needs at least one alpha".into()));
        }
        let finite = [self.omega1, self.omega2, self.nu, self.rho]
            .iter()
            .chain(&self.gamma)
            .chain(&self.alpha)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("beta parameters must be finite".into()));
        }
        if self.nu < 0.0 {
            return Err(Error::Config("nu must be non-negative".into()));
        }
        if self.rho.abs() >= 1.0 {
            return Err(Error::Config("rho must lie in (-1, 1)".into()));
        }
        if self.gamma.iter().map(|g| g.abs()).sum::<f64>() >= 1.0 {
            return Err(Error::Config("sum of |gamma| must be below one".into()));
        }
        let c = drbeta_recursion_coeffs(self);
        let s: f64 = (0..c.alpha_g.len())
            .map(|i| (c.gamma.get(i).copied().unwrap_or(0.0) + c.alpha_g[i]).abs())
            .sum();
        if s >= 1.0 {
            return Err(Error::Config(format!(
                "daily recursion is not stationary: sum |gamma_i + alpha^g_i| = {s:.4}"
            )));
        }
        Ok(())
    }
}

/// Parameters of the market variance process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolParams {
    pub omega1: f64,
    pub omega2: f64,
    pub gamma: f64,
    pub alpha: f64,
    /// Loading of squared market jumps on the variance.
    pub beta: f64,
    pub nu: f64,
    /// Correlation between the variance driver and the market price driver.
    pub rho: f64,
}

/// Volatility of the asset's idiosyncratic component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ResidVol {
    Constant(f64),
}

impl ResidVol {
    pub fn value(&self) -> f64 {
        match self {
            Self::Constant(v) => *v,
        }
    }
}

/// Law of a jump size: `|J|^2 = max(base + sd * N(0, 1), floor)` with a fair
/// random sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpLaw {
    pub base: f64,
    pub sd: f64,
    pub floor: f64,
}

/// Compound Poisson jumps in the market (`1`) and in the asset's own
/// component (`2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpParams {
    /// Expected market jumps per day.
    pub lambda1: f64,
    /// Expected idiosyncratic asset jumps per day.
    pub lambda2: f64,
    pub size1: JumpLaw,
    pub size2: JumpLaw,
    /// Exposure of the asset to market jumps.
    pub beta_d: f64,
}

/// Microstructure noise `eps = theta_t * chi_i`.
///
/// `theta` follows a mean-reverting process around the diurnal level
/// `s * (1 + amp * cos(2 pi t))`; `chi` is a bivariate AR(1) on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    pub s1: f64,
    pub s2: f64,
    pub ou_speed: f64,
    pub diurnal_amp: f64,
    /// Loadings of the asset noise scale on the market and idiosyncratic
    /// price drivers (each multiplied by `s2`).
    pub asset_loading: [f64; 2],
    pub chi_ar: [[f64; 2]; 2],
    pub chi_innov_cov: [[f64; 2]; 2],
    /// AR(1) steps discarded before the first day.
    pub burn_in: usize,
}

/// Starting values of the state variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialValues {
    pub beta0: f64,
    pub sigma2_0: f64,
    pub x1_0: f64,
    pub x2_0: f64,
    /// Spot betas at integer times `-1, -2, ...` (needed when `q >= 2`);
    /// missing entries default to the unconditional mean.
    #[serde(default)]
    pub presample_beta: Vec<f64>,
    /// Daily integrals for days `0, -1, ...` (needed when `p >= 2`); missing
    /// entries default to the unconditional mean.
    #[serde(default)]
    pub presample_ibeta: Vec<f64>,
}

/// Full simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub beta: BetaParams,
    pub vol: VolParams,
    pub resid_vol: ResidVol,
    pub jumps: JumpParams,
    pub noise: NoiseParams,
    pub init: InitialValues,
    pub n_days: usize,
    pub m_per_day: usize,
    /// Euler steps per grid interval.
    pub euler_substeps: usize,
    pub seed: u64,
    /// Store per-grid-point latent prices, beta and variance.
    pub keep_latent: bool,
}

impl Default for SimConfig {
    /// The reference design: an ARMA(1,1)-type beta around 2.16, a GARCH-type
    /// market variance near 3.1e-5 per day, four market and five asset jumps
    /// per day, and AR(0.8) noise with a diurnal scale.
    fn default() -> Self {
        Self {
            beta: BetaParams {
                omega1: 0.7,
                omega2: -0.5,
                gamma: vec![0.1],
                alpha: vec![0.37],
                nu: 1.5,
                rho: -0.6,
            },
            vol: VolParams {
                omega1: 3.02e-5,
                omega2: 4.00e-6,
                gamma: 0.35,
                alpha: 0.4,
                beta: 0.1,
                nu: 1e-5,
                rho: -0.424,
            },
            resid_vol: ResidVol::Constant(0.012),
            jumps: JumpParams {
                lambda1: 4.0,
                lambda2: 5.0,
                size1: JumpLaw {
                    base: 2e-5,
                    sd: 2e-6,
                    floor: 4e-5,
                },
                size2: JumpLaw {
                    base: 1e-5,
                    sd: 1e-6,
                    floor: 2e-5,
                },
                beta_d: 1.5,
            },
            noise: NoiseParams {
                s1: 5.082e-4,
                s2: 1.487e-3,
                ou_speed: 10.0,
                diurnal_amp: 0.1,
                asset_loading: [0.6, 0.8],
                chi_ar: [[0.8, 0.0], [0.0, 0.8]],
                chi_innov_cov: [[0.360, 0.168], [0.168, 0.360]],
                burn_in: 1000,
            },
            init: InitialValues {
                beta0: 2.16,
                sigma2_0: 3.12e-5,
                x1_0: 16.0,
                x2_0: 10.0,
                presample_beta: Vec::new(),
                presample_ibeta: Vec::new(),
            },
            n_days: 500,
            m_per_day: 23_400,
            euler_substeps: 1,
            seed: 0,
            keep_latent: true,
        }
    }
}

impl SimConfig {
    /// Noiseless, jump-free variant of `self`.
    pub fn without_noise_or_jumps(mut self) -> Self {
        self.jumps.lambda1 = 0.0;
        self.jumps.lambda2 = 0.0;
        self.noise.s1 = 0.0;
        self.noise.s2 = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.beta.validate()?;
        if self.euler_substeps == 0 {
            return Err(Error::Config("euler_substeps must be at least 1".into()));
        }
        if self.m_per_day < 2 || self.n_days == 0 {
            return Err(Error::Config("need at least one day of two or more points".into()));
        }
        let non_negative = [
            ("sigma2_0", self.init.sigma2_0),
            ("resid_vol", self.resid_vol.value()),
            ("lambda1", self.jumps.lambda1),
            ("lambda2", self.jumps.lambda2),
            ("s1", self.noise.s1),
            ("s2", self.noise.s2),
            ("ou_speed", self.noise.ou_speed),
            ("jump sd 1", self.jumps.size1.sd),
            ("jump sd 2", self.jumps.size2.sd),
            ("vol nu", self.vol.nu),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.vol.rho.abs() >= 1.0 {
            return Err(Error::Config("vol rho must lie in (-1, 1)".into()));
        }
        if self.beta.rho.powi(2) + self.vol.rho.powi(2) >= 1.0 {
            return Err(Error::Config(
                "driver correlations are not jointly positive definite".into(),
            ));
        }
        let c = self.noise.chi_innov_cov;
        if c[0][0] < 0.0 || c[1][1] < 0.0 || c[0][1] != c[1][0] || c[0][1].powi(2) > c[0][0] * c[1][1] {
            return Err(Error::Config("noise innovation covariance must be PSD".into()));
        }
        Ok(())
    }

    /// Pre-sample spot betas `beta_0, beta_{-1}, ..., beta_{1-q}`.
    pub(crate) fn presample_beta(&self) -> Vec<f64> {
        let (_, mean_beta) = unconditional_means(&self.beta);
        let q = self.beta.q().max(1);
        (0..q)
            .map(|i| {
                if i == 0 {
                    self.init.beta0
                } else {
                    self.init.presample_beta.get(i - 1).copied().unwrap_or(mean_beta)
                }
            })
            .collect()
    }

    /// Pre-sample integrals `Ibeta_0, ..., Ibeta_{2-p}`.
    pub(crate) fn presample_ibeta(&self) -> Vec<f64> {
        let (mean_h, _) = unconditional_means(&self.beta);
        (0..self.beta.p().saturating_sub(1))
            .map(|i| self.init.presample_ibeta.get(i).copied().unwrap_or(mean_h))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_design_is_valid() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn explosive_beta_is_rejected() {
        let mut cfg = SimConfig::default();
        cfg.beta.alpha = vec![1.2];
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::default();
        cfg.beta.gamma = vec![1.1];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_substeps_rejected() {
        let cfg = SimConfig {
            euler_substeps: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = SimConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: SimConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
