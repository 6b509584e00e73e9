//! Quasi-maximum-likelihood fitting, the asymptotic covariance, Wald-type
//! statistics and BIC order selection.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::optim::{minimize, OptimOptions};
use crate::model::params::{Bounds, DrBetaParams};
use crate::model::recursion::{filter, loss_and_grad, RecursionInit};
use crate::stats::{mean, variance};

/// Stationarity sums above this level are penalized.
const PENALTY_KNEE: f64 = 0.98;
/// Eigenvalues of the covariance below this are treated as zero.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Stream id reserved for multistart draws.
const MULTISTART_STREAM: u64 = 0x6d75_6c74_6973_7461;

/// Settings of [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub bounds: Bounds,
    pub n_starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Pre-sample values; `None` uses the sample mean of the series.
    pub init: Option<RecursionInit>,
    /// Weight of the quadratic stationarity penalty relative to the sample
    /// variance of the series.
    pub penalty_weight: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            bounds: Bounds::default(),
            n_starts: 8,
            seed: 0,
            max_iter: 1000,
            init: None,
            penalty_weight: 100.0,
        }
    }
}

/// Result of [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrBetaFit {
    pub theta_hat: DrBetaParams,
    /// Mean squared one-step error at `theta_hat`.
    pub loss: f64,
    /// Asymptotic covariance of `sqrt(n) (theta_hat - theta)`, row-major.
    pub vhat: Vec<Vec<f64>>,
    /// Standard errors `sqrt(vhat_ii / n)`.
    pub std_errors: Vec<f64>,
    /// `sqrt(n) vhat^(-1/2) theta_hat`, i.e. the statistic against zero.
    pub z_stats: Vec<f64>,
    pub bic: f64,
    /// Filtered conditional means, one per observation.
    pub h_path: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
    pub init: RecursionInit,
}

impl DrBetaFit {
    pub fn vhat_matrix(&self) -> DMatrix<f64> {
        let k = self.vhat.len();
        DMatrix::from_fn(k, k, |i, j| self.vhat[i][j])
    }
}

fn penalty(theta: &DrBetaParams, weight: f64) -> (f64, Vec<f64>) {
    let dim = theta.n_free();
    let (s1, s2) = theta.stationarity_sums();
    let mut g = vec![0.0; dim];
    let mut value = 0.0;
    if s1 > PENALTY_KNEE {
        let e = s1 - PENALTY_KNEE;
        value += weight * e * e;
        for i in 0..theta.q {
            g[1 + i] += 2.0 * weight * e * theta.gamma[i].signum();
        }
    }
    if s2 > PENALTY_KNEE && theta.p > 0 {
        let e = s2 - PENALTY_KNEE;
        value += weight * e * e;
        for j in 0..theta.r() {
            let sign = (theta.gamma.get(j).copied().unwrap_or(0.0) + theta.alpha[j]).signum();
            g[1 + theta.q + j] += 2.0 * weight * e * sign;
            if j < theta.q {
                g[1 + j] += 2.0 * weight * e * sign;
            }
        }
    }
    (value, g)
}

/// Strictly interior box, so the projected optimum satisfies the open bounds.
fn interior(lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let shrink = |l: f64, h: f64| 1e-9 * (h - l);
    (
        lo.iter().zip(hi).map(|(l, h)| l + shrink(*l, *h)).collect(),
        lo.iter().zip(hi).map(|(l, h)| h - shrink(*l, *h)).collect(),
    )
}

fn starting_points(p: usize, q: usize, level: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let r = p.max(q);
    let build = |gamma: Vec<f64>, alpha: Vec<f64>| {
        let mut theta = DrBetaParams::zeros(p, q);
        theta.gamma = gamma;
        if p > 0 {
            theta.alpha = alpha;
        }
        let (s1, s2) = theta.stationarity_sums();
        let s = s1.max(s2);
        if s > 0.9 {
            theta.gamma.iter_mut().chain(theta.alpha.iter_mut()).for_each(|v| *v *= 0.9 / s);
        }
        let persistence: f64 = theta.gamma.iter().chain(&theta.alpha).sum();
        theta.omega = (level * (1.0 - persistence)).clamp(-4.9, 4.9);
        theta.to_vec()
    };
    let mut out = vec![build(vec![0.1 / q.max(1) as f64; q], vec![0.2 / r.max(1) as f64; r])];
    while out.len() < n {
        let gamma = (0..q).map(|_| rng.random_range(-0.3..0.7) / q as f64).collect();
        let alpha = (0..r).map(|_| rng.random_range(-0.3..0.7) / r as f64).collect();
        out.push(build(gamma, alpha));
    }
    out
}

/// Asymptotic covariance `loss * (n^-1 sum grad grad')^-1`, inverting on the
/// eigenbasis with small eigenvalues clipped.
fn covariance(theta: &DrBetaParams, rib: &[f64], init: RecursionInit, loss: f64) -> DMatrix<f64> {
    let dim = theta.n_free();
    let f = filter(theta, rib, init, true);
    let mut j = DMatrix::<f64>::zeros(dim, dim);
    for row in f.grad.chunks(dim) {
        let v = DVector::from_column_slice(row);
        j += &v * v.transpose();
    }
    j /= rib.len() as f64;
    let eig = SymmetricEigen::new(j);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let floor = (EIGEN_FLOOR * top).max(f64::MIN_POSITIVE);
    let inv = eig.eigenvalues.map(|l| 1.0 / l.max(floor));
    let v = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
    (v.clone() + v.transpose()) * (0.5 * loss)
}

/// Fits the order-`(p, q)` recursion to `rib` by minimizing the mean squared
/// one-step error from `opts.n_starts` starting points.
pub fn fit(rib: &[f64], p: usize, q: usize, opts: &FitOptions) -> Result<DrBetaFit> {
    let template = DrBetaParams::zeros(p, q);
    let dim = template.n_free();
    if rib.len() <= 10 * (p + q + 1) {
        return Err(Error::Input(format!(
            "order ({p}, {q}) needs more than {} observations, got {}",
            10 * (p + q + 1),
            rib.len()
        )));
    }
    if let Some(i) = rib.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("observation {} is not finite", i + 1)));
    }
    let init = opts.init.unwrap_or_else(|| RecursionInit::sample_mean(rib));
    let scale = variance(rib).max(f64::MIN_POSITIVE);
    let weight = opts.penalty_weight * scale;
    let objective = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        let theta = DrBetaParams::from_vec(p, q, x).ok()?;
        if !theta.is_stationary() {
            return None;
        }
        let (loss, mut g) = loss_and_grad(&theta, rib, init);
        let (pen, pg) = penalty(&theta, weight);
        g.iter_mut().zip(pg).for_each(|(a, b)| *a += b);
        Some((loss + pen, g))
    };
    let (lo, hi) = template.box_vectors(&opts.bounds);
    let (lo, hi) = interior(&lo, &hi);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(MULTISTART_STREAM);
    let starts = starting_points(p, q, mean(rib), opts.n_starts.max(1), &mut rng);
    let optim = OptimOptions {
        max_iter: opts.max_iter,
        ..Default::default()
    };
    let best = starts
        .iter()
        .filter_map(|x0| minimize(&objective, x0, &lo, &hi, optim))
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .ok_or_else(|| Error::Numerical(format!("no feasible starting point for order ({p}, {q})")))?;
    let theta_hat = DrBetaParams::from_vec(p, q, &best.x)?;
    let h_full = filter(&theta_hat, rib, init, false).h;
    let n = rib.len();
    let loss = rib.iter().zip(&h_full).map(|(x, h)| (x - h).powi(2)).sum::<f64>() / n as f64;
    let vhat = covariance(&theta_hat, rib, init, loss);
    let std_errors = (0..dim).map(|i| (vhat[(i, i)].max(0.0) / n as f64).sqrt()).collect();
    let bic = n as f64 * loss.max(f64::MIN_POSITIVE).ln() + dim as f64 * (n as f64).ln();
    let mut out = DrBetaFit {
        theta_hat,
        loss,
        vhat: (0..dim).map(|i| (0..dim).map(|j| vhat[(i, j)]).collect()).collect(),
        std_errors,
        z_stats: Vec::new(),
        bic,
        h_path: h_full[..n].to_vec(),
        converged: best.converged,
        iterations: best.iterations,
        n_obs: n,
        init,
    };
    out.z_stats = z_statistics(&out, &DrBetaParams::zeros(p, q)).unwrap_or_else(|_| vec![f64::NAN; dim]);
    Ok(out)
}

/// `sqrt(n) V^(-1/2) (theta_hat - theta0)` with the symmetric inverse root.
pub fn z_statistics(fit: &DrBetaFit, theta0: &DrBetaParams) -> Result<Vec<f64>> {
    let th = &fit.theta_hat;
    if theta0.p != th.p || theta0.q != th.q {
        return Err(Error::Input(format!(
            "hypothesis has order ({}, {}) but the fit has ({}, {})",
            theta0.p, theta0.q, th.p, th.q
        )));
    }
    let eig = SymmetricEigen::new(fit.vhat_matrix());
    let (imin, lmin) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty covariance");
    if lmin < EIGEN_FLOOR {
        return Err(Error::Singular {
            eigenvalue: lmin,
            direction: eig.eigenvectors.column(imin).iter().copied().collect(),
        });
    }
    let root_inv = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let diff = DVector::from_iterator(
        th.n_free(),
        th.to_vec().iter().zip(theta0.to_vec()).map(|(a, b)| a - b),
    );
    let t = root_inv * diff * (fit.n_obs as f64).sqrt();
    Ok(t.iter().copied().collect())
}

/// One cell of an order search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderFit {
    pub p: usize,
    pub q: usize,
    /// The fit, or the reason it failed.
    pub fit: std::result::Result<DrBetaFit, String>,
}

/// Outcome of [`bic_select`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BicSelection {
    pub p: usize,
    pub q: usize,
    /// Every grid cell in `(p, q)` lexicographic order.
    pub fits: Vec<OrderFit>,
}

impl BicSelection {
    pub fn selected(&self) -> &DrBetaFit {
        self.fits
            .iter()
            .find(|c| c.p == self.p && c.q == self.q)
            .and_then(|c| c.fit.as_ref().ok())
            .expect("selected order has a fit")
    }
}

/// Fits every order in `{0..=p_max} x {0..=q_max}` except `(0, 0)` and picks
/// the smallest BIC; ties go to the smaller `p + q`, then the smaller `q`.
pub fn bic_select(rib: &[f64], p_max: usize, q_max: usize, opts: &FitOptions) -> Result<BicSelection> {
    let grid: Vec<(usize, usize)> = (0..=p_max)
        .flat_map(|p| (0..=q_max).map(move |q| (p, q)))
        .filter(|&(p, q)| p + q > 0)
        .collect();
    if grid.is_empty() {
        return Err(Error::Config("order grid is empty".into()));
    }
    let fits: Vec<OrderFit> = grid
        .par_iter()
        .map(|&(p, q)| OrderFit {
            p,
            q,
            fit: fit(rib, p, q, opts).map_err(|e| e.to_string()),
        })
        .collect();
    let best = fits
        .iter()
        .filter_map(|c| c.fit.as_ref().ok().map(|f| (c.p, c.q, f.bic)))
        .filter(|(_, _, b)| b.is_finite())
        .min_by(|a, b| a.2.total_cmp(&b.2).then((a.0 + a.1).cmp(&(b.0 + b.1))).then(a.1.cmp(&b.1)))
        .ok_or_else(|| Error::Numerical("every order in the grid failed to fit".into()))?;
    Ok(BicSelection {
        p: best.0,
        q: best.1,
        fits,
    })
}
