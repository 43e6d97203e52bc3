//! Synthetic walkers: per-axis three-harmonic periodic signals plus
//! Gaussian noise, one parameter draw per user.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::recording::{AccelSample, RawRecording};
use crate::error::{Error, Result};
use crate::seed;

pub const STEP_FREQUENCY_RANGE: (f64, f64) = (1.4, 2.3);
const AMPLITUDE_RANGES: [(f64, f64); 3] = [(1.0, 4.0), (0.3, 2.0), (0.1, 1.0)];
const NOISE_RANGE: (f64, f64) = (0.2, 0.8);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkerParams {
    pub step_frequency_hz: f64,
    /// `[axis][harmonic]`, m/s².
    pub harmonic_amplitudes: [[f64; 3]; 3],
    /// `[axis][harmonic]`, radians.
    pub phases: [[f64; 3]; 3],
    pub noise_std: f64,
}

impl WalkerParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = STEP_FREQUENCY_RANGE;
        if !(lo..=hi).contains(&self.step_frequency_hz) {
            return Err(Error::Validation(format!(
                "step frequency {} outside [{lo}, {hi}]",
                self.step_frequency_hz
            )));
        }
        if self.harmonic_amplitudes.iter().flatten().any(|&a| !(a >= 0.0)) || !(self.noise_std >= 0.0) {
            return Err(Error::Validation("walker amplitudes and noise must be non-negative".into()));
        }
        Ok(())
    }

    /// Noise-free acceleration of one axis at time `t`.
    pub fn clean_axis(&self, axis: usize, t: f64) -> f64 {
        (0..3)
            .map(|h| {
                let k = (h + 1) as f64;
                self.harmonic_amplitudes[axis][h]
                    * (TAU * k * self.step_frequency_hz * t + self.phases[axis][h]).sin()
            })
            .sum()
    }

    fn draw(rng: &mut impl Rng, step_frequency_hz: f64) -> Self {
        let mut harmonic_amplitudes = [[0.0; 3]; 3];
        let mut phases = [[0.0; 3]; 3];
        for axis in 0..3 {
            for h in 0..3 {
                let (lo, hi) = AMPLITUDE_RANGES[h];
                harmonic_amplitudes[axis][h] = rng.random_range(lo..hi);
                phases[axis][h] = rng.random_range(0.0..TAU);
            }
        }
        WalkerParams {
            step_frequency_hz,
            harmonic_amplitudes,
            phases,
            noise_std: rng.random_range(NOISE_RANGE.0..NOISE_RANGE.1),
        }
    }
}

/// Draw per-user parameters. Step frequencies are stratified over the
/// allowed range so that no two users share a stratum.
pub fn draw_walker_params(n_users: usize, seed: u64) -> Vec<WalkerParams> {
    let mut rng = seed::rng(seed::derive(seed, &["walker-params"]));
    let (lo, hi) = STEP_FREQUENCY_RANGE;
    let width = (hi - lo) / n_users as f64;
    let mut strata: Vec<usize> = (0..n_users).collect();
    strata.shuffle(&mut rng);
    strata
        .into_iter()
        .map(|s| {
            let f = lo + width * (s as f64 + rng.random_range(0.1..0.9));
            WalkerParams::draw(&mut rng, f)
        })
        .collect()
}

pub fn generate_walkers(
    n_users: usize,
    duration_s: f64,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<Vec<RawRecording>> {
    if n_users == 0 {
        return Err(Error::Validation("n_users must be at least 1".into()));
    }
    if !(duration_s > 0.0) || !(sample_rate_hz > 0.0) {
        return Err(Error::Validation("duration and sample rate must be positive".into()));
    }
    let n_samples = (duration_s * sample_rate_hz).round() as usize;
    draw_walker_params(n_users, seed)
        .into_iter()
        .enumerate()
        .map(|(u, params)| {
            let user_id = format!("walker{u:03}");
            let mut rng = seed::rng(seed::derive(seed, &["walker-noise", &user_id]));
            let noise = Normal::new(0.0, params.noise_std).expect("noise std validated");
            let samples = (0..n_samples)
                .map(|i| {
                    let t = i as f64 / sample_rate_hz;
                    let mut a = [0.0; 3];
                    for (axis, v) in a.iter_mut().enumerate() {
                        *v = params.clean_axis(axis, t) + noise.sample(&mut rng);
                    }
                    AccelSample { t, ax: a[0], ay: a[1], az: a[2] }
                })
                .collect();
            RawRecording::new(user_id, "1", sample_rate_hz, samples)
        })
        .collect()
}
