//! Filtered conditional means, their parameter gradients and the
//! least-squares quasi-likelihood.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::params::{Bounds, DrBetaParams};
use crate::stats::mean;

/// Values used for the recursion before the first observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionInit {
    /// `h_n` for `n <= 0`.
    pub h0: f64,
    /// `RIB_n` for `n <= 0`.
    pub rib0: f64,
}

impl RecursionInit {
    /// Both initial values at the sample mean of `rib`.
    pub fn sample_mean(rib: &[f64]) -> Self {
        let m = mean(rib);
        Self { h0: m, rib0: m }
    }
}

fn check_series(rib: &[f64]) -> Result<()> {
    if rib.is_empty() {
        return Err(Error::Input("the recursion needs at least one observation".into()));
    }
    if let Some(i) = rib.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(format!("observation {} is not finite", i + 1)));
    }
    Ok(())
}

/// `h_1 ..= h_{N+1}` together with the gradients of `h_1 ..= h_N` when asked.
pub(crate) struct Filtered {
    /// `N + 1` values; the last is the one-step-ahead forecast.
    pub h: Vec<f64>,
    /// Row-major `N x n_free` gradients.
    pub grad: Vec<f64>,
}

/// Runs the recursion without any checks on `theta`.
pub(crate) fn filter(theta: &DrBetaParams, rib: &[f64], init: RecursionInit, with_grad: bool) -> Filtered {
    let n = rib.len();
    let (q, r) = (theta.q, theta.r());
    let free_alpha = theta.p > 0;
    let dim = theta.n_free();
    let mut h = Vec::with_capacity(n + 1);
    let mut grad = if with_grad { vec![0.0; n * dim] } else { Vec::new() };
    let hv = |h: &[f64], k: isize| if k >= 0 { h[k as usize] } else { init.h0 };
    let rv = |k: isize| if k >= 0 { rib[k as usize] } else { init.rib0 };
    for t in 0..=n {
        let ti = t as isize;
        let mut v = theta.omega;
        for (i, g) in theta.gamma.iter().enumerate() {
            v += g * hv(&h, ti - 1 - i as isize);
        }
        if free_alpha {
            for (j, a) in theta.alpha.iter().enumerate() {
                v += a * rv(ti - 1 - j as isize);
            }
        }
        h.push(v);
        if with_grad && t < n {
            let (done, rest) = grad.split_at_mut(t * dim);
            let row = &mut rest[..dim];
            row[0] = 1.0;
            for i in 0..q {
                row[1 + i] = hv(&h, ti - 1 - i as isize);
            }
            if free_alpha {
                for j in 0..r {
                    row[1 + q + j] = rv(ti - 1 - j as isize);
                }
            }
            for (i, g) in theta.gamma.iter().enumerate() {
                let lag = t as isize - 1 - i as isize;
                if lag >= 0 {
                    let prev = &done[lag as usize * dim..(lag as usize + 1) * dim];
                    for (x, p) in row.iter_mut().zip(prev) {
                        *x += g * p;
                    }
                }
            }
        }
    }
    Filtered { h, grad }
}

/// Filtered conditional means `h_1 ..= h_N`, one per observation.
pub fn h_recursion(theta: &DrBetaParams, rib: &[f64], init: RecursionInit) -> Result<Vec<f64>> {
    check_series(rib)?;
    let mut h = filter(theta, rib, init, false).h;
    h.pop();
    Ok(h)
}

/// Gradients of `h_1 ..= h_N` with respect to the free parameters in
/// [`DrBetaParams::to_vec`] order.
pub fn h_gradient(theta: &DrBetaParams, rib: &[f64], init: RecursionInit) -> Result<Vec<Vec<f64>>> {
    check_series(rib)?;
    let f = filter(theta, rib, init, true);
    Ok(f.grad.chunks(theta.n_free()).map(<[f64]>::to_vec).collect())
}

/// Mean squared one-step error `(1/N) sum (RIB_n - h_n)^2`.
pub fn qmle_loss(theta: &DrBetaParams, rib: &[f64], init: RecursionInit) -> Result<f64> {
    check_series(rib)?;
    theta.validate(&Bounds::default())?;
    Ok(loss_unchecked(theta, rib, init))
}

pub(crate) fn loss_unchecked(theta: &DrBetaParams, rib: &[f64], init: RecursionInit) -> f64 {
    let f = filter(theta, rib, init, false);
    rib.iter().zip(&f.h).map(|(x, h)| (x - h).powi(2)).sum::<f64>() / rib.len() as f64
}

/// Loss and its gradient in packing order.
pub(crate) fn loss_and_grad(theta: &DrBetaParams, rib: &[f64], init: RecursionInit) -> (f64, Vec<f64>) {
    let dim = theta.n_free();
    let f = filter(theta, rib, init, true);
    let n = rib.len() as f64;
    let mut loss = 0.0;
    let mut g = vec![0.0; dim];
    for (t, x) in rib.iter().enumerate() {
        let e = x - f.h[t];
        loss += e * e;
        for (gi, d) in g.iter_mut().zip(&f.grad[t * dim..(t + 1) * dim]) {
            *gi -= 2.0 * e * d;
        }
    }
    g.iter_mut().for_each(|v| *v /= n);
    (loss / n, g)
}

/// One-step-ahead conditional mean `h_{N+1}` after filtering `rib_history`.
pub fn forecast(theta: &DrBetaParams, rib_history: &[f64], init: RecursionInit) -> Result<f64> {
    check_series(rib_history)?;
    if rib_history.len() < theta.r() {
        return Err(Error::Input(format!(
            "forecast needs at least {} observations, got {}",
            theta.r(),
            rib_history.len()
        )));
    }
    Ok(*filter(theta, rib_history, init, false).h.last().expect("n + 1 values"))
}
