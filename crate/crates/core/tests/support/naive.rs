//! Direct-loop reference for the daily estimators under the default
//! configuration. Every quantity is recomputed from the raw prices with no
//! prefix sums, caching or shared helpers from the library; only the continuum
//! weight constants (checked on their own) are taken as inputs.

#![allow(dead_code)]

use ribeta_core::types::Tuning;
use ribeta_core::weights::WeightConstants;

pub struct NaiveDay {
    /// Pre-averaged increments per asset.
    pub pa: [Vec<f64>; 2],
    /// `e[p][j][d + k']`: noise cross terms per pair `11, 12, 22`.
    pub e: [Vec<Vec<f64>>; 3],
    /// Block spot covariances `[S11, S12, S22]`.
    pub sigma: Vec<[f64; 3]>,
    /// Floored block noise moments `[t11, t12, t22]`.
    pub theta: Vec<[f64; 3]>,
    /// Block spot betas before de-biasing.
    pub beta: Vec<f64>,
    pub debias: Vec<f64>,
    pub rib: f64,
    pub s_hat: f64,
    pub chen: f64,
    pub prvb: f64,
}

pub struct NaiveConfig {
    pub trunc_mult: f64,
    pub varpi1: f64,
    pub delta_floor: f64,
}

fn tri(x: f64) -> f64 {
    x.min(1.0 - x)
}

fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean_of(y: &[f64], start: usize, w: usize) -> f64 {
    let mut s = 0.0;
    for v in &y[start..start + w] {
        s += v;
    }
    s / w as f64
}

/// Noise cross term of `(ya, yb)` at position `j` and lag `d`.
pub fn cross_term(ya: &[f64], yb: &[f64], j: usize, d: i64, w: usize) -> f64 {
    let lag = d.unsigned_abs() as usize;
    if d >= 0 {
        (ya[j] - mean_of(ya, j + 2 * w, w)) * (yb[j + lag] - mean_of(yb, j + 4 * w, w))
    } else {
        (yb[j] - mean_of(yb, j + 2 * w, w)) * (ya[j + lag] - mean_of(ya, j + 4 * w, w))
    }
}

/// `k * sum_i (g_{i+1} - g_i)(g_{i-d+1} - g_{i-d})` with `g` zero off `[0, 1]`.
fn phi_disc(k: usize, d: i64) -> f64 {
    let g = |j: i64| {
        if j < 0 || j > k as i64 {
            0.0
        } else {
            tri(j as f64 / k as f64)
        }
    };
    let mut acc = 0.0;
    for i in -(k as i64) - 2..=2 * k as i64 + 2 {
        acc += (g(i + 1) - g(i)) * (g(i - d + 1) - g(i - d));
    }
    k as f64 * acc
}

fn debias(t: &Tuning, wc: &WeightConstants, s11: f64, s12: f64, t11: f64, t12: f64) -> f64 {
    let c = t.k as f64 * t.dt.sqrt();
    let lead = 4.0 / (wc.psi0 * wc.psi0 * c * c * c * t.b as f64 * t.dt.sqrt());
    lead * (c * c * wc.phi01 / s11 + wc.phi11 * t11 / (s11 * s11)) * (t11 * s12 / s11 - t12)
}

fn spot_var(t: &Tuning, wc: &WeightConstants, s: [f64; 3], th: [f64; 3]) -> f64 {
    let c = t.k as f64 * t.dt.sqrt();
    let [s11, s12, s22] = s;
    let [t11, t12, t22] = th;
    let a = wc.phi00 * (s22 / s11 - s12 * s12 / (s11 * s11));
    let b = wc.phi01 / (c * c) * (t22 / s11 - 2.0 * s12 * t12 / (s11 * s11) + s22 * t11 / (s11 * s11));
    let n = wc.phi11 / c.powi(4)
        * (2.0 * s12 * s12 * t11 * t11 / s11.powi(4) - 4.0 * s12 * t11 * t12 / s11.powi(3)
            + (t11 * t22 + t12 * t12) / (s11 * s11));
    2.0 * c / (wc.psi0 * wc.psi0) * (a + b + n)
}

pub fn naive_day(y: [&[f64]; 2], t: &Tuning, wc: &WeightConstants, cfg: &NaiveConfig) -> NaiveDay {
    let m = y[0].len();
    let (k, b, w, kp) = (t.k, t.b, t.l, t.kp);
    let dt = t.dt;

    // Pre-averaged increments.
    let mut pa: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for a in 0..2 {
        for l in 0..=m - k {
            let mut s = 0.0;
            for j in 1..k {
                s += tri(j as f64 / k as f64) * (y[a][l + j] - y[a][l + j - 1]);
            }
            pa[a].push(s);
        }
    }

    // Thresholds from the median absolute deviation.
    let kdt = k as f64 * dt;
    let mut keep = vec![[true; 2]; pa[0].len()];
    for a in 0..2 {
        let scaled: Vec<f64> = pa[a].iter().map(|v| v / kdt.sqrt()).collect();
        let c = median(&scaled);
        let dev: Vec<f64> = scaled.iter().map(|v| (v - c).abs()).collect();
        let u = cfg.trunc_mult * 1.482_602_218_505_602 * median(&dev) * kdt.powf(cfg.varpi1);
        for (i, v) in pa[a].iter().enumerate() {
            keep[i][a] = v.abs() <= u;
        }
    }
    let pairs = [(0usize, 0usize), (0, 1), (1, 1)];
    let kept = |i: usize, p: usize| keep[i][pairs[p].0] && keep[i][pairs[p].1];

    // Noise cross terms at every position where all lags are defined.
    let n_pos = (m + 1 - 5 * w).min(m - kp);
    let mut e: [Vec<Vec<f64>>; 3] = Default::default();
    for (p, &(x, z)) in pairs.iter().enumerate() {
        for j in 0..n_pos {
            let row: Vec<f64> = (-(kp as i64)..=kp as i64)
                .map(|d| cross_term(y[x], y[z], j, d, w))
                .collect();
            e[p].push(row);
        }
    }
    let phi: Vec<f64> = (-(kp as i64)..=kp as i64).map(|d| phi_disc(k, d)).collect();

    // Positions whose local-mean reach overlaps a truncated window.
    let n_win = pa[0].len();
    let clean_asset = |a: usize, j: usize| {
        let lo = j.saturating_sub(k.div_ceil(2));
        let hi = (j + 5 * w).saturating_sub(k / 2).min(n_win - 1);
        (lo..=hi).all(|i| keep[i][a])
    };
    let clean = |p: usize, j: usize| match p {
        0 => clean_asset(0, j),
        1 => clean_asset(0, j) && clean_asset(1, j),
        _ => clean_asset(1, j),
    };

    let n_blocks = m / b;
    let n_prod = b - 2 * k;
    let mut sigma = Vec::new();
    let mut theta = Vec::new();
    let mut beta = Vec::new();
    let mut deb = Vec::new();
    let mut rib = 0.0;
    let mut s_hat = 0.0;
    for blk in 0..n_blocks {
        let l0 = blk * b;
        let positions: Vec<usize> = (l0..=l0 + b - 6 * w).collect();
        let used_for = |p: usize| -> Vec<usize> {
            let u: Vec<usize> = positions.iter().copied().filter(|&j| clean(p, j)).collect();
            if u.is_empty() {
                positions.clone()
            } else {
                u
            }
        };
        let any_kept = (l0..l0 + n_prod).any(|i| keep[i][0] && keep[i][1]);
        let mut s = [0.0; 3];
        let mut th = [0.0; 3];
        for p in 0..3 {
            let used = used_for(p);
            // Noise moments use the plain lag sums.
            let mut plain = 0.0;
            let mut weighted = 0.0;
            for &j in &used {
                for (di, v) in e[p][j].iter().enumerate() {
                    plain += v;
                    weighted += phi[di] * v;
                }
            }
            th[p] = plain / used.len() as f64 * positions.len() as f64 / (b - 6 * w) as f64;
            if !any_kept {
                continue;
            }
            let (x, z) = pairs[p];
            let mut prod = 0.0;
            let mut count = 0usize;
            for i in l0..l0 + n_prod {
                if kept(i, p) {
                    prod += pa[x][i] * pa[z][i];
                    count += 1;
                }
            }
            if count == 0 {
                continue;
            }
            let correction = count as f64 * weighted / used.len() as f64;
            s[p] = (prod - correction / k as f64) / (count as f64 * dt * k as f64 * wc.psi0);
        }
        th[0] = th[0].max(0.0);
        th[2] = th[2].max(0.0);
        let s11 = s[0].max(cfg.delta_floor);
        let bh = s[1] / s11;
        let dbs = debias(t, wc, s11, s[1], th[0], th[1]);
        rib += (bh - dbs) / n_blocks as f64;
        let w_blk = 1.0 / n_blocks as f64;
        s_hat += w_blk * w_blk * spot_var(t, wc, [s11, s[1], s[2]], th) / (b as f64 * dt);
        sigma.push(s);
        theta.push(th);
        beta.push(bh);
        deb.push(dbs);
    }
    let s_hat = s_hat.max(0.0);

    // Competitors: Yhat bias correction on raw increments.
    let dy = |a: usize, i: usize| y[a][i] - y[a][i - 1];
    let dg2 = |r: usize| (tri(r as f64 / k as f64) - tri((r - 1) as f64 / k as f64)).powi(2);
    let yhat = |p: usize, j: usize| {
        let (x, z) = pairs[p];
        let mut s = 0.0;
        for r in 1..=k {
            s += dg2(r) * dy(x, j + r) * dy(z, j + r);
        }
        0.5 * s
    };

    let mut chen = 0.0;
    let chen_norm = 1.0 / ((b - k) as f64 * dt * k as f64 * wc.psi0);
    for blk in 0..n_blocks {
        let i0 = blk * b;
        let last = (b - k + 1).min(m - 1 - k - i0);
        let mut s = [0.0; 3];
        for p in 0..3 {
            let (x, z) = pairs[p];
            for l in 0..=last {
                let j = i0 + l;
                if keep[j][0] && keep[j][1] {
                    s[p] += pa[x][j] * pa[z][j];
                }
                s[p] -= yhat(p, j);
            }
            s[p] *= chen_norm;
        }
        let mut th = [0.0; 3];
        for p in 0..3 {
            let (x, z) = pairs[p];
            for r in 1..=k {
                th[p] += dy(x, i0 + r) * dy(z, i0 + r);
            }
            th[p] /= 2.0 * k as f64;
        }
        let s11 = s[0].max(cfg.delta_floor);
        chen += (s[1] / s11 - debias(t, wc, s11, s[1], th[0], th[1])) / n_blocks as f64;
    }

    let mut tot = [0.0; 3];
    for j in 0..=m - 1 - k {
        if keep[j][0] && keep[j][1] {
            for p in [0, 1] {
                let (x, z) = pairs[p];
                tot[p] += pa[x][j] * pa[z][j] - yhat(p, j);
            }
        }
    }
    let norm = 1.0 / ((m - k) as f64 * dt * k as f64 * wc.psi0);
    let prvb = norm * tot[1] / (norm * tot[0]).max(cfg.delta_floor);

    NaiveDay {
        pa,
        e,
        sigma,
        theta,
        beta,
        debias: deb,
        rib,
        s_hat,
        chen,
        prvb,
    }
}
