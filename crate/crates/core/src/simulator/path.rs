//! Streaming Euler simulation of prices, variance, spot beta and noise.
//!
//! One day is advanced at a time so that long panels at fine grids never hold
//! more than a single day of paths. Each replication owns an independent
//! ChaCha8 stream keyed by `(seed, replication)`, which makes results
//! independent of thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::beta::{conditional_mean, day_drift, true_h_sequence};
use crate::simulator::config::{JumpLaw, SimConfig};
use crate::types::{DayGrid, DayPanel};

/// Floor applied to the market variance after each Euler step.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Latent (noise-free) values at the grid points of one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayLatent {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma2: Vec<f64>,
}

/// Output of one simulated day.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDay {
    pub grid: DayGrid,
    pub latent: Option<DayLatent>,
    /// Daily integral of the spot beta (left Riemann sum over Euler steps).
    pub ibeta: f64,
    /// Spot beta at the close.
    pub beta_close: f64,
    /// Conditional mean of `ibeta` given the previous close.
    pub h: f64,
    pub market_jumps: usize,
    pub asset_jumps: usize,
    pub variance_floor_hits: usize,
}

/// Ground truth of a simulated panel.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    /// `Ibeta_1 ..= Ibeta_N`.
    pub ibeta: Vec<f64>,
    /// `beta_1 ..= beta_N` at the closes.
    pub beta_close: Vec<f64>,
    /// `h_1 ..= h_{N+1}` from the daily recursion.
    pub h: Vec<f64>,
    /// `h_1 ..= h_N` from the state at each previous close.
    pub h_direct: Vec<f64>,
    pub presample_beta: Vec<f64>,
    pub presample_ibeta: Vec<f64>,
}

/// Counters collected while simulating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimDiagnostics {
    pub variance_floor_hits: usize,
    pub market_jumps: usize,
    pub asset_jumps: usize,
}

/// A simulated panel with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    pub panel: DayPanel,
    /// Empty unless `keep_latent` is set.
    pub latent: Vec<DayLatent>,
    pub truth: Truth,
    pub diagnostics: SimDiagnostics,
}

/// Random number generator of replication `replication` under `seed`.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Lower-triangular factor mapping independent normals to `(B, Z, Btilde, W)`
/// with `corr(B, Z) = rho`, `corr(B, Btilde) = rho_vol` and all other
/// correlations zero.
fn driver_factor(rho: f64, rho_vol: f64) -> [[f64; 4]; 4] {
    let s = (1.0 - rho * rho).sqrt();
    let c = -rho * rho_vol / s;
    let d = (1.0 - rho_vol * rho_vol - c * c).max(0.0).sqrt();
    [
        [1.0, 0.0, 0.0, 0.0],
        [rho, s, 0.0, 0.0],
        [rho_vol, c, d, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn jump_size<R: Rng>(law: &JumpLaw, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let sq = (law.base + law.sd * z).max(law.floor).max(0.0);
    if rng.random::<bool>() {
        sq.sqrt()
    } else {
        -sq.sqrt()
    }
}

/// Jump arrivals of one day as `(euler_step, signed size)`, sorted by step.
fn draw_jumps<R: Rng>(lambda: f64, law: &JumpLaw, steps: usize, rng: &mut R) -> Result<Vec<(usize, f64)>> {
    if lambda == 0.0 {
        return Ok(Vec::new());
    }
    let n: f64 = Poisson::new(lambda)
        .map_err(|e| Error::Config(format!("jump intensity: {e}")))?
        .sample(rng);
    let mut out: Vec<(usize, f64)> = (0..n as usize)
        .map(|_| {
            let step = ((rng.random::<f64>() * steps as f64) as usize).min(steps - 1);
            (step, jump_size(law, rng))
        })
        .collect();
    out.sort_by_key(|j| j.0);
    Ok(out)
}

fn chi_step<R: Rng>(chi: &mut [f64; 2], a: &[[f64; 2]; 2], f: &[[f64; 2]; 2], rng: &mut R) {
    let e0: f64 = rng.sample(StandardNormal);
    let e1: f64 = rng.sample(StandardNormal);
    let u = [f[0][0] * e0, f[1][0] * e0 + f[1][1] * e1];
    let c = *chi;
    *chi = [
        a[0][0] * c[0] + a[0][1] * c[1] + u[0],
        a[1][0] * c[0] + a[1][1] * c[1] + u[1],
    ];
}

/// Day-by-day simulator of one replication.
pub struct DaySimulator {
    cfg: SimConfig,
    rng: ChaCha8Rng,
    factor: [[f64; 4]; 4],
    chi_factor: [[f64; 2]; 2],
    day: usize,
    x: [f64; 2],
    sigma2: f64,
    theta: [f64; 2],
    chi: [f64; 2],
    /// `beta_{n-1}, beta_{n-2}, ...` (at least one entry).
    beta_lags: Vec<f64>,
    /// `Ibeta_{n-1}, Ibeta_{n-2}, ...` (`p - 1` entries).
    ibeta_lags: Vec<f64>,
}

impl DaySimulator {
    pub fn new(cfg: &SimConfig, replication: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = replication_rng(cfg.seed, replication);
        let c = cfg.noise.chi_innov_cov;
        let l11 = c[0][0].sqrt();
        let l21 = if l11 > 0.0 { c[0][1] / l11 } else { 0.0 };
        let l22 = (c[1][1] - l21 * l21).max(0.0).sqrt();
        let chi_factor = [[l11, 0.0], [l21, l22]];
        let mut sim = Self {
            factor: driver_factor(cfg.beta.rho, cfg.vol.rho),
            chi_factor,
            day: 0,
            x: [cfg.init.x1_0, cfg.init.x2_0],
            sigma2: cfg.init.sigma2_0,
            theta: [cfg.noise.s1 * (1.0 + cfg.noise.diurnal_amp), cfg.noise.s2 * (1.0 + cfg.noise.diurnal_amp)],
            chi: [0.0; 2],
            beta_lags: cfg.presample_beta(),
            ibeta_lags: cfg.presample_ibeta(),
            cfg: cfg.clone(),
            rng: ChaCha8Rng::seed_from_u64(0),
        };
        for _ in 0..cfg.noise.burn_in {
            sim.step_chi(&mut rng);
        }
        sim.rng = rng;
        Ok(sim)
    }

    fn step_chi(&mut self, rng: &mut ChaCha8Rng) {
        chi_step(&mut self.chi, &self.cfg.noise.chi_ar, &self.chi_factor, rng);
    }

    /// Days simulated so far.
    pub fn days_done(&self) -> usize {
        self.day
    }

    /// Conditional mean of the next day's integral given the state at the
    /// last close.
    pub fn next_conditional_mean(&self) -> f64 {
        conditional_mean(&self.cfg.beta, &self.beta_lags, &self.ibeta_lags)
    }

    /// Advances one day.
    pub fn next_day(&mut self) -> Result<SimDay> {
        let mut rng = std::mem::replace(&mut self.rng, ChaCha8Rng::seed_from_u64(0));
        let out = self.advance(&mut rng);
        self.rng = rng;
        out
    }

    fn advance(&mut self, rng: &mut ChaCha8Rng) -> Result<SimDay> {
        let cfg = &self.cfg;
        let m = cfg.m_per_day;
        let sub = cfg.euler_substeps;
        let steps = m * sub;
        let h = 1.0 / steps as f64;
        let sqh = h.sqrt();
        let bp = &cfg.beta;
        let vp = &cfg.vol;
        let np = &cfg.noise;
        let q_resid = cfg.resid_vol.value();
        let alpha1 = bp.alpha[0];

        let beta_open = self.beta_lags[0];
        let (a_n, c_n) = day_drift(bp, &self.beta_lags, &self.ibeta_lags);
        let h_n = conditional_mean(bp, &self.beta_lags, &self.ibeta_lags);
        let sigma2_open = self.sigma2;
        let vol_level = 2.0 * vp.gamma * (vp.omega1 + sigma2_open);
        let vol_pull = vp.omega2 + sigma2_open;

        let jumps1 = draw_jumps(cfg.jumps.lambda1, &cfg.jumps.size1, steps, rng)?;
        let jumps2 = draw_jumps(cfg.jumps.lambda2, &cfg.jumps.size2, steps, rng)?;
        let (mut j1, mut j2) = (0, 0);

        let keep = cfg.keep_latent;
        let mut y1 = Vec::with_capacity(m);
        let mut y2 = Vec::with_capacity(m);
        let mut latent = keep.then(|| DayLatent {
            x1: Vec::with_capacity(m),
            x2: Vec::with_capacity(m),
            beta: Vec::with_capacity(m),
            sigma2: Vec::with_capacity(m),
        });

        let f = self.factor;
        let mut beta = beta_open;
        let mut integral = 0.0;
        let mut z = 0.0;
        let mut z_vol = 0.0;
        let mut floor_hits = 0;
        let two_pi = 2.0 * std::f64::consts::PI;
        for s in 0..steps {
            let u = s as f64 * h;
            integral += beta * h;
            let xi: [f64; 4] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal) * sqh);
            let db = xi[0];
            let dz = f[1][0] * xi[0] + f[1][1] * xi[1];
            let db_vol = f[2][0] * xi[0] + f[2][1] * xi[1] + f[2][2] * xi[2];
            let dw = xi[3];

            let sigma = self.sigma2.sqrt();
            self.x[0] += sigma * db;
            self.x[1] += beta * sigma * db + q_resid * dw;

            let drift = u * vol_level - vol_pull + vp.alpha * self.sigma2 - vp.nu * z_vol * z_vol;
            self.sigma2 += drift * h + 2.0 * vp.nu * (1.0 - u) * z_vol * db_vol;

            let level = 1.0 + np.diurnal_amp * (two_pi * u).cos();
            self.theta[0] += np.ou_speed * (np.s1 * level - self.theta[0]) * h + np.s1 * db;
            self.theta[1] += np.ou_speed * (np.s2 * level - self.theta[1]) * h
                + np.s2 * (np.asset_loading[0] * db + np.asset_loading[1] * dw);

            z += dz;
            z_vol += db_vol;
            let u1 = (s + 1) as f64 * h;
            beta = beta_open + u1 * u1 * a_n - u1 * c_n + alpha1 * integral + bp.nu * (1.0 - u1) * z;

            while j1 < jumps1.len() && jumps1[j1].0 == s {
                let size = jumps1[j1].1;
                self.x[0] += size;
                self.x[1] += cfg.jumps.beta_d * size;
                self.sigma2 += vp.beta * size * size;
                j1 += 1;
            }
            while j2 < jumps2.len() && jumps2[j2].0 == s {
                self.x[1] += jumps2[j2].1;
                j2 += 1;
            }
            if self.sigma2 < VARIANCE_FLOOR {
                self.sigma2 = VARIANCE_FLOOR;
                floor_hits += 1;
            }

            if (s + 1) % sub == 0 {
                chi_step(&mut self.chi, &np.chi_ar, &self.chi_factor, rng);
                y1.push(self.x[0] + self.theta[0] * self.chi[0]);
                y2.push(self.x[1] + self.theta[1] * self.chi[1]);
                if let Some(l) = latent.as_mut() {
                    l.x1.push(self.x[0]);
                    l.x2.push(self.x[1]);
                    l.beta.push(beta);
                    l.sigma2.push(self.sigma2);
                }
            }
        }

        self.day += 1;
        self.beta_lags.rotate_right(1);
        self.beta_lags[0] = beta;
        if !self.ibeta_lags.is_empty() {
            self.ibeta_lags.rotate_right(1);
            self.ibeta_lags[0] = integral;
        }
        if !(beta.is_finite() && self.sigma2.is_finite() && self.x.iter().all(|v| v.is_finite())) {
            return Err(Error::Numerical(format!("simulation diverged on day {}", self.day)));
        }
        Ok(SimDay {
            grid: DayGrid::new(self.day, y1, y2)?,
            latent,
            ibeta: integral,
            beta_close: beta,
            h: h_n,
            market_jumps: jumps1.len(),
            asset_jumps: jumps2.len(),
            variance_floor_hits: floor_hits,
        })
    }
}

/// Simulates `cfg.n_days` days of replication `replication`.
pub fn simulate_replication(cfg: &SimConfig, replication: u64) -> Result<SimulatedPanel> {
    let mut sim = DaySimulator::new(cfg, replication)?;
    let mut days = Vec::with_capacity(cfg.n_days);
    let mut latent = Vec::new();
    let mut truth = Truth {
        presample_beta: cfg.presample_beta(),
        presample_ibeta: cfg.presample_ibeta(),
        ..Default::default()
    };
    let mut diagnostics = SimDiagnostics::default();
    for _ in 0..cfg.n_days {
        let d = sim.next_day()?;
        truth.ibeta.push(d.ibeta);
        truth.beta_close.push(d.beta_close);
        truth.h_direct.push(d.h);
        diagnostics.variance_floor_hits += d.variance_floor_hits;
        diagnostics.market_jumps += d.market_jumps;
        diagnostics.asset_jumps += d.asset_jumps;
        if let Some(l) = d.latent {
            latent.push(l);
        }
        days.push(d.grid);
    }
    let n0 = cfg.beta.q().max(1).min(truth.h_direct.len());
    truth.h = true_h_sequence(&cfg.beta, &truth.ibeta, &truth.presample_ibeta, &truth.h_direct[..n0])?;
    Ok(SimulatedPanel {
        panel: DayPanel::new(days),
        latent,
        truth,
        diagnostics,
    })
}

/// Simulates replication 0 of `cfg`.
pub fn simulate(cfg: &SimConfig) -> Result<SimulatedPanel> {
    simulate_replication(cfg, 0)
}

/// Simulates only the spot beta and its daily integrals.
///
/// The beta driver is a standard Brownian motion on its own, so prices and
/// noise are not needed when only the daily truth is of interest. The Euler
/// scheme is the one used by [`DaySimulator`] with `m_per_day *
/// euler_substeps` steps per day.
pub fn simulate_beta_truth(cfg: &SimConfig, replication: u64) -> Result<Truth> {
    cfg.beta.validate()?;
    let bp = &cfg.beta;
    let mut rng = replication_rng(cfg.seed, replication);
    let steps = cfg.m_per_day * cfg.euler_substeps;
    if steps == 0 {
        return Err(Error::Config("need at least one Euler step per day".into()));
    }
    let h = 1.0 / steps as f64;
    let sqh = h.sqrt();
    let mut beta_lags = cfg.presample_beta();
    let mut ibeta_lags = cfg.presample_ibeta();
    let mut truth = Truth {
        presample_beta: beta_lags.clone(),
        presample_ibeta: ibeta_lags.clone(),
        ..Default::default()
    };
    for day in 1..=cfg.n_days {
        let beta_open = beta_lags[0];
        let (a_n, c_n) = day_drift(bp, &beta_lags, &ibeta_lags);
        truth.h_direct.push(conditional_mean(bp, &beta_lags, &ibeta_lags));
        let mut beta = beta_open;
        let mut integral = 0.0;
        let mut z = 0.0;
        for s in 0..steps {
            integral += beta * h;
            z += rng.sample::<f64, _>(StandardNormal) * sqh;
            let u1 = (s + 1) as f64 * h;
            beta = beta_open + u1 * u1 * a_n - u1 * c_n + bp.alpha[0] * integral + bp.nu * (1.0 - u1) * z;
        }
        if !beta.is_finite() {
            return Err(Error::Numerical(format!("beta diverged on day {day}")));
        }
        truth.ibeta.push(integral);
        truth.beta_close.push(beta);
        beta_lags.rotate_right(1);
        beta_lags[0] = beta;
        if !ibeta_lags.is_empty() {
            ibeta_lags.rotate_right(1);
            ibeta_lags[0] = integral;
        }
    }
    let n0 = bp.q().max(1).min(truth.h_direct.len());
    truth.h = true_h_sequence(bp, &truth.ibeta, &truth.presample_ibeta, &truth.h_direct[..n0])?;
    Ok(truth)
}
