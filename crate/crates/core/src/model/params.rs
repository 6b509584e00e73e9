//! Reduced-form parameters of the DR Beta recursion and their admissible set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `h_n = omega + sum_i gamma[i] h_{n-1-i} + sum_j alpha[j] RIB_{n-1-j}`.
///
/// `alpha` always has `max(p, q)` entries. With `p = 0` there is no feedback
/// from past integrals, so every `alpha` entry is pinned at zero and is not a
/// free parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrBetaParams {
    pub p: usize,
    pub q: usize,
    pub omega: f64,
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Open box bounds on the free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub omega: (f64, f64),
    pub gamma: (f64, f64),
    pub alpha: (f64, f64),
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            omega: (-5.0, 5.0),
            gamma: (-0.999, 0.999),
            alpha: (-0.999, 0.999),
        }
    }
}

impl DrBetaParams {
    pub fn new(p: usize, q: usize, omega: f64, gamma: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        let theta = Self {
            p,
            q,
            omega,
            gamma,
            alpha,
        };
        theta.check_shape()?;
        Ok(theta)
    }

    /// All-zero parameters of order `(p, q)`.
    pub fn zeros(p: usize, q: usize) -> Self {
        Self {
            p,
            q,
            omega: 0.0,
            gamma: vec![0.0; q],
            alpha: vec![0.0; p.max(q)],
        }
    }

    /// `max(p, q)`.
    pub fn r(&self) -> usize {
        self.p.max(self.q)
    }

    /// Number of estimated parameters.
    pub fn n_free(&self) -> usize {
        1 + self.q + if self.p > 0 { self.r() } else { 0 }
    }

    /// Names of the free parameters in packing order.
    pub fn names(&self) -> Vec<String> {
        let mut out = vec!["omega".to_string()];
        out.extend((1..=self.q).map(|i| format!("gamma{i}")));
        if self.p > 0 {
            out.extend((1..=self.r()).map(|j| format!("alpha{j}")));
        }
        out
    }

    /// Free parameters as `[omega, gamma.., alpha..]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_free());
        v.push(self.omega);
        v.extend_from_slice(&self.gamma);
        if self.p > 0 {
            v.extend_from_slice(&self.alpha);
        }
        v
    }

    /// Inverse of [`Self::to_vec`].
    pub fn from_vec(p: usize, q: usize, v: &[f64]) -> Result<Self> {
        let mut theta = Self::zeros(p, q);
        if v.len() != theta.n_free() {
            return Err(Error::Input(format!(
                "order ({p}, {q}) has {} free parameters, got {}",
                theta.n_free(),
                v.len()
            )));
        }
        theta.omega = v[0];
        theta.gamma.copy_from_slice(&v[1..1 + q]);
        if p > 0 {
            theta.alpha.copy_from_slice(&v[1 + q..]);
        }
        Ok(theta)
    }

    fn check_shape(&self) -> Result<()> {
        if self.gamma.len() != self.q || self.alpha.len() != self.r() {
            return Err(Error::Input(format!(
                "order ({}, {}) needs {} gamma and {} alpha entries, got {} and {}",
                self.p,
                self.q,
                self.q,
                self.r(),
                self.gamma.len(),
                self.alpha.len()
            )));
        }
        if self.p == 0 && self.alpha.iter().any(|a| *a != 0.0) {
            return Err(Error::Input("alpha must be zero when p = 0".into()));
        }
        Ok(())
    }

    /// `(sum |gamma_i|, sum |gamma_i + alpha_i|)` with `gamma_i = 0` past `q`.
    pub fn stationarity_sums(&self) -> (f64, f64) {
        let s1 = self.gamma.iter().map(|g| g.abs()).sum();
        let s2 = self
            .alpha
            .iter()
            .enumerate()
            .map(|(i, a)| (self.gamma.get(i).copied().unwrap_or(0.0) + a).abs())
            .sum();
        (s1, s2)
    }

    pub fn is_stationary(&self) -> bool {
        let (s1, s2) = self.stationarity_sums();
        s1 < 1.0 && s2 < 1.0
    }

    /// Shape, finiteness, box and stationarity checks.
    pub fn validate(&self, bounds: &Bounds) -> Result<()> {
        self.check_shape()?;
        if !self.to_vec().iter().all(|v| v.is_finite()) {
            return Err(Error::Constraint("parameters must be finite".into()));
        }
        let inside = |v: f64, (lo, hi): (f64, f64)| v > lo && v < hi;
        if !inside(self.omega, bounds.omega) {
            return Err(Error::Constraint(format!(
                "omega = {} outside ({}, {})",
                self.omega, bounds.omega.0, bounds.omega.1
            )));
        }
        if let Some(g) = self.gamma.iter().find(|g| !inside(**g, bounds.gamma)) {
            return Err(Error::Constraint(format!("gamma entry {g} outside its box")));
        }
        if let Some(a) = self.alpha.iter().find(|a| self.p > 0 && !inside(**a, bounds.alpha)) {
            return Err(Error::Constraint(format!("alpha entry {a} outside its box")));
        }
        let (s1, s2) = self.stationarity_sums();
        if s1 >= 1.0 || s2 >= 1.0 {
            return Err(Error::Constraint(format!(
                "not stationary: sum |gamma| = {s1:.4}, sum |gamma + alpha| = {s2:.4}"
            )));
        }
        Ok(())
    }

    /// Lower and upper box bounds per free parameter.
    pub(crate) fn box_vectors(&self, bounds: &Bounds) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![bounds.omega.0];
        let mut hi = vec![bounds.omega.1];
        lo.extend(std::iter::repeat_n(bounds.gamma.0, self.q));
        hi.extend(std::iter::repeat_n(bounds.gamma.1, self.q));
        if self.p > 0 {
            lo.extend(std::iter::repeat_n(bounds.alpha.0, self.r()));
            hi.extend(std::iter::repeat_n(bounds.alpha.1, self.r()));
        }
        (lo, hi)
    }
}
