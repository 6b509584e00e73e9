//! Robust realized integrated beta from noisy high-frequency prices, the
//! DR Beta ARMA model of daily integrated betas, and the tooling to simulate,
//! estimate, fit and evaluate them.
//!
//! # Layout
//!
//! * [`types`] and [`weights`]: the shared data model and the pre-averaging
//!   weight constants.
//! * [`simulator`]: Euler simulation of a spot-beta diffusion whose daily
//!   integrals follow an exact ARMA recursion, with stochastic volatility,
//!   jumps and serially dependent diurnal noise.
//! * [`estimators`]: the daily robust realized integrated beta, its
//!   asymptotic variance and two competitor estimators.
//! * [`model`]: quasi-maximum-likelihood fitting, inference, order selection
//!   and forecasting of the ARMA recursion.
//! * [`harness`]: Monte Carlo studies, tick ingestion, rolling evaluation and
//!   residual diagnostics.
//!
//! # Example
//!
//! ```
//! use ribeta_core::estimators::rib_day;
//! use ribeta_core::types::{DayGrid, PreAvgConfig};
//! use ribeta_core::weights::weight_constants;
//!
//! let m = 2_340;
//! let y1: Vec<f64> = (0..m).map(|i| 1e-3 * ((i as f64) * 0.37).sin()).collect();
//! let y2: Vec<f64> = y1.iter().map(|v| 1.5 * v).collect();
//! let day = DayGrid::new(1, y1, y2).unwrap();
//! let cfg = PreAvgConfig::default();
//! let wc = weight_constants(&cfg, m).unwrap();
//! let est = rib_day(&day, &cfg, &wc).unwrap();
//! assert!(est.rib.is_finite());
//! ```

pub mod error;
pub mod estimators;
pub mod harness;
pub mod model;
pub mod simulator;
pub mod stats;
pub mod types;
pub mod weights;

pub use error::{Error, Result};
