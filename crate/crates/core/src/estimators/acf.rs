//! Sample autocorrelation function.

use crate::error::{Error, Result};

/// Mean-centered sample autocorrelations for lags `0..=max_lag`, each lag
/// normalized by the lag-0 sum of squares.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if series.len() <= max_lag {
        return Err(Error::Input(format!(
            "series of length {} is too short for lag {max_lag}",
            series.len()
        )));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let c: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    if c0 <= 0.0 || !c0.is_finite() {
        return Err(Error::Input("series has zero variance".into()));
    }
    Ok((0..=max_lag)
        .map(|h| c[..c.len() - h].iter().zip(&c[h..]).map(|(a, b)| a * b).sum::<f64>() / c0)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn white_noise_has_small_lag_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = acf(&x, 5).unwrap();
        assert_eq!(r[0], 1.0);
        assert!(r[1].abs() < 0.05);
    }

    #[test]
    fn ar1_lag_one_near_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = vec![0.0; 100_000];
        for i in 1..x.len() {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[i] = 0.8 * x[i - 1] + e;
        }
        let r = acf(&x, 1).unwrap();
        assert!((0.78..=0.82).contains(&r[1]), "acf(1) = {}", r[1]);
    }

    #[test]
    fn alternating_series_is_anticorrelated() {
        let x: Vec<f64> = (0..1000).map(|i| 5.0 + if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = acf(&x, 1).unwrap();
        assert!((r[1] + 1.0).abs() < 2e-3);
    }

    #[test]
    fn degenerate_inputs_fail() {
        assert!(acf(&[1.0; 10], 2).is_err());
        assert!(acf(&[1.0, 2.0], 2).is_err());
    }
}
