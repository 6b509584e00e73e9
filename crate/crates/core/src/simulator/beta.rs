//! Daily dynamics implied by the spot-beta diffusion.
//!
//! Within day `n` (time `u` in `[0, 1)` after the open) the spot beta is
//!
//! ```text
//! beta(u) = beta_{n-1} + u^2 a_n - u c_n + alpha_1 int_0^u beta + nu (1 - u) (Z_u - Z_0)
//! a_n = omega1 + sum_i gamma_i beta_{n-i} + sum_{i>=2} alpha_i Ibeta_{n+1-i}
//! c_n = omega2 + beta_{n-1}
//! ```
//!
//! Solving the linear integral equation gives the conditional mean of the
//! daily integral, `h_n = rho1 beta_{n-1} + 2 rho3 a_n - rho2 c_n`, and the
//! martingale difference `D_n = Ibeta_n - h_n`. Eliminating the spot betas
//! yields the ARMA-type recursion
//! `h_n = omega^g + sum_i gamma_i h_{n-i} + sum_j alpha^g_j Ibeta_{n-j}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::config::BetaParams;
use crate::weights::simpson;

/// Coefficients of the daily recursion together with the exponential moments
/// `rho1 = (e^a - 1)/a`, `rho2 = (e^a - 1 - a)/a^2`,
/// `rho3 = (e^a - 1 - a - a^2/2)/a^3` of `a = alpha_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionCoeffs {
    pub rho: [f64; 3],
    pub omega_g: f64,
    pub gamma: Vec<f64>,
    /// `alpha^g_1 .. alpha^g_{max(p, q)}`.
    pub alpha_g: Vec<f64>,
}

/// `(rho1, rho2, rho3)`; a power series is used for `|a| < 1` where the
/// closed forms cancel.
pub fn exponential_moments(a: f64) -> [f64; 3] {
    if a.abs() < 1.0 {
        // rho_j = sum_k a^k / (k + j)!
        let mut out = [0.0; 3];
        for (j, r) in out.iter_mut().enumerate() {
            let mut term = 1.0 / factorial(j + 1);
            let mut k = 0;
            while k < 40 {
                *r += term;
                k += 1;
                term *= a / (k + j + 1) as f64;
            }
        }
        out
    } else {
        let e = a.exp_m1();
        [e / a, (e - a) / (a * a), (e - a - a * a / 2.0) / (a * a * a)]
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Coefficients `(omega^g, gamma, alpha^g)` of the daily recursion.
pub fn drbeta_recursion_coeffs(params: &BetaParams) -> RecursionCoeffs {
    let [r1, r2, r3] = exponential_moments(params.alpha.first().copied().unwrap_or(0.0));
    let p = params.p();
    let q = params.q();
    let a1 = params.alpha.first().copied().unwrap_or(0.0);
    let gsum: f64 = params.gamma.iter().sum();
    let omega_g = (r1 - r2 + 2.0 * r3) * params.omega() + (2.0 * r3 - r2) * (1.0 - gsum) * params.omega2;
    let alpha_g = (1..=p.max(q))
        .map(|i| {
            let mut v = 0.0;
            if i <= q {
                v += 2.0 * r3 * params.gamma[i - 1] * a1;
            }
            if i <= p {
                v += (r1 - r2) * params.alpha[i - 1];
            }
            if i < p {
                v += 2.0 * r3 * params.alpha[i];
            }
            v
        })
        .collect();
    RecursionCoeffs {
        rho: [r1, r2, r3],
        omega_g,
        gamma: params.gamma.clone(),
        alpha_g,
    }
}

/// `(E[h_n], E[beta_n])` under stationarity.
pub fn unconditional_means(params: &BetaParams) -> (f64, f64) {
    let c = drbeta_recursion_coeffs(params);
    let gsum: f64 = c.gamma.iter().sum();
    let agsum: f64 = c.alpha_g.iter().sum();
    let asum: f64 = params.alpha.iter().sum();
    let denom = 1.0 - gsum - agsum;
    let mean_h = c.omega_g / denom;
    let mean_beta = (params.omega() * denom + c.omega_g * asum) / (denom * (1.0 - gsum));
    (mean_h, mean_beta)
}

/// `F(u) = a^-2 (a u e^{a u} - e^{a u} + 1)`, the loading of `dZ` at time
/// `u` before the close on the daily integral (divided by `nu`).
pub fn martingale_loading(a: f64, u: f64) -> f64 {
    let x = a * u;
    if x.abs() < 0.5 {
        // sum_{k>=2} x^k (k - 1) / k!, divided by a^2.
        let mut acc = 0.0;
        let mut pow = u * u;
        let mut fact = 2.0;
        for k in 2..30 {
            acc += pow * (k - 1) as f64 / fact;
            pow *= x;
            fact *= (k + 1) as f64;
            if pow.abs() < 1e-300 {
                break;
            }
        }
        acc
    } else {
        ((x - 1.0) * x.exp_m1() + x) / (a * a)
    }
}

/// Variance of the martingale difference `D_n`:
/// `nu^2 int_0^1 F(u)^2 du` with `F` from [`martingale_loading`].
pub fn martingale_variance(params: &BetaParams) -> f64 {
    if params.nu == 0.0 {
        return 0.0;
    }
    let a = params.alpha.first().copied().unwrap_or(0.0);
    params.nu.powi(2) * simpson(|u| martingale_loading(a, u).powi(2), 0.0, 1.0, 1 << 12)
}

/// Conditional mean `h_n` from the state at the previous close.
///
/// `beta_lags[i]` is `beta_{n-1-i}` and `ibeta_lags[i]` is `Ibeta_{n-1-i}`;
/// they must hold at least `q` and `p - 1` entries respectively.
pub fn conditional_mean(params: &BetaParams, beta_lags: &[f64], ibeta_lags: &[f64]) -> f64 {
    let [r1, r2, r3] = exponential_moments(params.alpha[0]);
    let (a, c) = day_drift(params, beta_lags, ibeta_lags);
    r1 * beta_lags[0] + 2.0 * r3 * a - r2 * c
}

/// Intraday drift coefficients `(a_n, c_n)` (see module docs).
pub(crate) fn day_drift(params: &BetaParams, beta_lags: &[f64], ibeta_lags: &[f64]) -> (f64, f64) {
    let mut a = params.omega1;
    for (g, b) in params.gamma.iter().zip(beta_lags) {
        a += g * b;
    }
    for (al, ib) in params.alpha.iter().skip(1).zip(ibeta_lags) {
        a += al * ib;
    }
    (a, params.omega2 + beta_lags[0])
}

/// Conditional means `h_1 ..= h_{N+1}` by the daily recursion.
///
/// `ibeta` holds `Ibeta_1 .. Ibeta_N`, `presample_ibeta` holds
/// `Ibeta_0, Ibeta_{-1}, ...` and `h_start` the first `max(q, 1)` conditional
/// means (typically from [`conditional_mean`]).
pub fn true_h_sequence(
    params: &BetaParams,
    ibeta: &[f64],
    presample_ibeta: &[f64],
    h_start: &[f64],
) -> Result<Vec<f64>> {
    let c = drbeta_recursion_coeffs(params);
    let q = c.gamma.len();
    let r = c.alpha_g.len();
    let n0 = q.max(1);
    if h_start.len() < n0 {
        return Err(Error::Input(format!(
            "recursion needs {n0} starting values, got {}",
            h_start.len()
        )));
    }
    // Ibeta_{n-j} is reached down to index n0 + 1 - r.
    let need = r.saturating_sub(n0);
    if presample_ibeta.len() < need {
        return Err(Error::Input(format!(
            "recursion needs {need} pre-sample integrals, got {}",
            presample_ibeta.len()
        )));
    }
    let ib = |n: i64| -> f64 {
        if n >= 1 {
            ibeta[(n - 1) as usize]
        } else {
            presample_ibeta[(-n) as usize]
        }
    };
    let total = ibeta.len() + 1;
    let mut h: Vec<f64> = h_start.iter().take(n0.min(total)).copied().collect();
    for n in (n0 + 1)..=total {
        let mut v = c.omega_g;
        for (i, g) in c.gamma.iter().enumerate() {
            v += g * h[n - 2 - i];
        }
        for (j, a) in c.alpha_g.iter().enumerate() {
            v += a * ib(n as i64 - 1 - j as i64);
        }
        h.push(v);
    }
    Ok(h)
}
