//! Synthetic impostor rows drawn from per-column beta distributions placed
//! away from the genuine user's feature means.
//!
//! Column `i` with genuine mean `mu` uses shapes `alpha = |0.5 - mu| + 0.5`
//! and `beta = 0.5`. Draws come from `Beta(alpha, beta)` when `mu <= 0.5`
//! and from its reflection `1 - Beta(alpha, beta)` otherwise.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const BETA_SHAPE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaNoiseParams {
    pub mu: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta_shape: f64,
}

impl BetaNoiseParams {
    pub fn from_means(mu: Vec<f64>) -> Result<Self> {
        if let Some(m) = mu.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::Validation(format!("column mean {m} outside [0, 1]")));
        }
        let alpha = mu.iter().map(|m| (0.5 - m).abs() + 0.5).collect();
        Ok(BetaNoiseParams { mu, alpha, beta_shape: BETA_SHAPE })
    }

    pub fn width(&self) -> usize {
        self.mu.len()
    }

    /// Analytic mean of column `i`'s marginal.
    pub fn column_mean(&self, i: usize) -> f64 {
        let m = self.alpha[i] / (self.alpha[i] + self.beta_shape);
        if self.mu[i] <= 0.5 {
            m
        } else {
            1.0 - m
        }
    }

    /// Analytic variance of column `i`'s marginal.
    pub fn column_variance(&self, i: usize) -> f64 {
        let (a, b) = (self.alpha[i], self.beta_shape);
        a * b / ((a + b).powi(2) * (a + b + 1.0))
    }
}

/// Fit from normalized genuine training rows.
pub fn fit_beta_params(genuine: ArrayView2<f64>) -> Result<BetaNoiseParams> {
    if genuine.nrows() == 0 {
        return Err(Error::Empty("no genuine rows to fit beta noise".into()));
    }
    let mu = genuine
        .mean_axis(Axis(0))
        .expect("non-empty")
        .iter()
        .map(|m| m.clamp(0.0, 1.0))
        .collect();
    BetaNoiseParams::from_means(mu)
}

/// `count` synthetic rows, each column drawn from its own seeded stream.
pub fn sample_beta_noise(params: &BetaNoiseParams, count: usize, seed: u64) -> Result<Array2<f64>> {
    if count == 0 {
        return Err(Error::Validation("beta noise count must be at least 1".into()));
    }
    let mut out = Array2::zeros((count, params.width()));
    for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        let mut rng = seed::rng(seed::derive_index(seed, "beta-column", j as u64));
        let reflect = params.mu[j] > 0.5;
        for v in col.iter_mut() {
            let b = sample_beta(&mut rng, params.alpha[j], params.beta_shape);
            *v = if reflect { 1.0 - b } else { b };
        }
    }
    Ok(out)
}

/// `Beta(a, b)` as `X / (X + Y)` for independent gammas, combined in log
/// space so tiny shapes never produce `0 / 0`.
pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let lx = ln_gamma_variate(rng, a);
    let ly = ln_gamma_variate(rng, b);
    let v = 1.0 / (1.0 + (ly - lx).exp());
    v.clamp(0.0, 1.0)
}

/// Logarithm of a `Gamma(shape, 1)` draw (Marsaglia and Tsang). Shapes
/// below one use `Gamma(shape + 1) * U^(1/shape)`.
pub fn ln_gamma_variate<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    assert!(shape > 0.0, "gamma shape must be positive");
    if shape < 1.0 {
        let u: f64 = rng.sample(Open01);
        return ln_gamma_variate(rng, shape + 1.0) + u.ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = rng.sample(Open01);
        if u < 1.0 - 0.0331 * x.powi(4) || u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d.ln() + v.ln();
        }
    }
}
