//! Box-projected BFGS for smooth objectives with an infeasible region.

/// Stopping rules of [`minimize`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct OptimOptions {
    pub max_iter: usize,
    /// Projected-gradient tolerance, relative to `1 + |f|`.
    pub gtol: f64,
    /// Relative decrease below which two consecutive steps count as stalled.
    pub ftol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            gtol: 1e-9,
            ftol: 1e-14,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((xi, gi), (l, h))| (xi - (xi - gi).clamp(*l, *h)).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` over the closed box `[lo, hi]` starting from `x0`.
///
/// `f` returns `None` for points outside its domain; the line search backs off
/// from them. Coordinates resting on a bound with the gradient pointing
/// outwards are frozen for the step.
pub(crate) fn minimize<F>(f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: OptimOptions) -> Option<OptimResult>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() {
        return None;
    }
    let identity = |scale: f64| -> Vec<f64> {
        let mut h = vec![0.0; n * n];
        (0..n).for_each(|i| h[i * n + i] = scale);
        h
    };
    let mut hinv = identity(1.0);
    let mut stalled = 0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        if projected_gradient_norm(&x, &g, lo, hi) <= opts.gtol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        let frozen: Vec<bool> = (0..n)
            .map(|i| (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0))
            .collect();
        let mut d = vec![0.0; n];
        for i in (0..n).filter(|&i| !frozen[i]) {
            d[i] = -(0..n).filter(|&j| !frozen[j]).map(|j| hinv[i * n + j] * g[j]).sum::<f64>();
        }
        if dot(&d, &g) >= 0.0 {
            hinv = identity(1.0);
            for i in 0..n {
                d[i] = if frozen[i] { 0.0 } else { -g[i] };
            }
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            project(&mut trial, lo, hi);
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite() && ft <= fx + 1e-4 * dot(&g, &step) {
                    accepted = Some((trial, ft, gt, step));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gnew, s)) = accepted else {
            converged = projected_gradient_norm(&x, &g, lo, hi) <= 1e-6 * (1.0 + fx.abs());
            break;
        };
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if it == 0 {
                hinv = identity(sy / dot(&y, &y));
            }
            let hy: Vec<f64> = (0..n).map(|i| dot(&hinv[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    hinv[i * n + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        let decrease = fx - fnew;
        x = xn;
        g = gnew;
        fx = fnew;
        if decrease <= opts.ftol * fx.abs().max(f64::MIN_POSITIVE) {
            stalled += 1;
            if stalled >= 2 {
                converged = true;
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Some(OptimResult {
        x,
        f: fx,
        converged,
        iterations,
    })
}
