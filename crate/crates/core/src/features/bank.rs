//! Per-frame feature bank. The default bank computes twelve statistics
//! on each of ax, ay, az and the magnitude, plus the three pairwise axis
//! correlations, 51 features in total.

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::window::{window, Frame, WindowConfig};
use crate::dataio::{ColumnSpec, FeatureTable, Origin, RawRecording, RowLabel};
use crate::error::{Error, Result};

/// Local maxima must exceed `mean + PEAK_STD_FACTOR * std`.
const PEAK_STD_FACTOR: f64 = 0.5;
const PEAK_MIN_SEPARATION_S: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Ax,
    Ay,
    Az,
    Magnitude,
}

impl Channel {
    fn name(self) -> &'static str {
        match self {
            Channel::Ax => "ax",
            Channel::Ay => "ay",
            Channel::Az => "az",
            Channel::Magnitude => "mag",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Mean,
    Std,
    Min,
    Max,
    Median,
    Iqr,
    MeanAbsDev,
    Rms,
    Energy,
    Peaks,
    DominantFrequency,
    SpectralEntropy,
}

impl Stat {
    pub const ALL: [Stat; 12] = [
        Stat::Mean,
        Stat::Std,
        Stat::Min,
        Stat::Max,
        Stat::Median,
        Stat::Iqr,
        Stat::MeanAbsDev,
        Stat::Rms,
        Stat::Energy,
        Stat::Peaks,
        Stat::DominantFrequency,
        Stat::SpectralEntropy,
    ];

    fn name(self) -> &'static str {
        match self {
            Stat::Mean => "mean",
            Stat::Std => "std",
            Stat::Min => "min",
            Stat::Max => "max",
            Stat::Median => "median",
            Stat::Iqr => "iqr",
            Stat::MeanAbsDev => "mad",
            Stat::Rms => "rms",
            Stat::Energy => "energy",
            Stat::Peaks => "peaks",
            Stat::DominantFrequency => "domfreq",
            Stat::SpectralEntropy => "spec_entropy",
        }
    }

    fn is_spectral(self) -> bool {
        matches!(self, Stat::DominantFrequency | Stat::SpectralEntropy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureBank {
    pub channels: Vec<Channel>,
    pub stats: Vec<Stat>,
    pub correlations: bool,
}

impl Default for FeatureBank {
    fn default() -> Self {
        FeatureBank {
            channels: vec![Channel::Ax, Channel::Ay, Channel::Az, Channel::Magnitude],
            stats: Stat::ALL.to_vec(),
            correlations: true,
        }
    }
}

impl FeatureBank {
    pub fn width(&self) -> usize {
        self.channels.len() * self.stats.len() + if self.correlations { 3 } else { 0 }
    }

    pub fn schema(&self) -> Vec<ColumnSpec> {
        let mut cols = Vec::with_capacity(self.width());
        for ch in &self.channels {
            for st in &self.stats {
                cols.push(ColumnSpec::continuous(format!("{}_{}", ch.name(), st.name())));
            }
        }
        if self.correlations {
            for name in ["corr_xy", "corr_xz", "corr_yz"] {
                cols.push(ColumnSpec::continuous(name));
            }
        }
        cols
    }
}

/// Extract one fixed-width feature row from a frame.
pub fn extract_features(frame: &Frame, bank: &FeatureBank) -> Result<Vec<f64>> {
    if frame.samples.is_empty() {
        return Err(Error::Empty("frame has no samples".into()));
    }
    let ax: Vec<f64> = frame.samples.iter().map(|s| s.ax).collect();
    let ay: Vec<f64> = frame.samples.iter().map(|s| s.ay).collect();
    let az: Vec<f64> = frame.samples.iter().map(|s| s.az).collect();

    let mut planner = FftPlanner::new();
    let mut row = Vec::with_capacity(bank.width());
    for ch in &bank.channels {
        let magnitude;
        let signal: &[f64] = match ch {
            Channel::Ax => &ax,
            Channel::Ay => &ay,
            Channel::Az => &az,
            Channel::Magnitude => {
                magnitude = frame
                    .samples
                    .iter()
                    .map(|s| (s.ax * s.ax + s.ay * s.ay + s.az * s.az).sqrt())
                    .collect::<Vec<_>>();
                &magnitude
            }
        };
        let summary = Summary::new(signal);
        let spectrum = bank
            .stats
            .iter()
            .any(|s| s.is_spectral())
            .then(|| power_spectrum(signal, summary.mean, &mut planner));
        for st in &bank.stats {
            row.push(match st {
                Stat::Mean => summary.mean,
                Stat::Std => summary.std,
                Stat::Min => summary.sorted[0],
                Stat::Max => summary.sorted[summary.sorted.len() - 1],
                Stat::Median => quantile(&summary.sorted, 0.5),
                Stat::Iqr => quantile(&summary.sorted, 0.75) - quantile(&summary.sorted, 0.25),
                Stat::MeanAbsDev => {
                    signal.iter().map(|x| (x - summary.mean).abs()).sum::<f64>() / signal.len() as f64
                }
                Stat::Rms => (summary.energy / signal.len() as f64).sqrt(),
                Stat::Energy => summary.energy,
                Stat::Peaks => count_peaks(
                    signal,
                    summary.mean + PEAK_STD_FACTOR * summary.std,
                    (PEAK_MIN_SEPARATION_S * frame.sample_rate_hz).round() as usize,
                ) as f64,
                Stat::DominantFrequency => {
                    dominant_frequency(spectrum.as_deref().unwrap_or(&[]), signal.len(), frame.sample_rate_hz)
                }
                Stat::SpectralEntropy => spectral_entropy(spectrum.as_deref().unwrap_or(&[])),
            });
        }
    }
    if bank.correlations {
        row.push(correlation(&ax, &ay));
        row.push(correlation(&ax, &az));
        row.push(correlation(&ay, &az));
    }
    debug_assert!(row.iter().all(|v| v.is_finite()));
    Ok(row)
}

/// Window every recording and extract one row per frame. Frames of all
/// sessions of a user are pooled under that user's id.
pub fn featurize_recordings(
    recordings: &[RawRecording],
    config: &WindowConfig,
    bank: &FeatureBank,
) -> Result<FeatureTable> {
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for rec in recordings {
        for frame in window(rec, config)? {
            values.extend(extract_features(&frame, bank)?);
            labels.push(RowLabel {
                user_id: frame.user_id.clone(),
                origin: Origin::Real,
            });
        }
    }
    let rows = Array2::from_shape_vec((labels.len(), bank.width()), values)
        .expect("each row has bank width");
    FeatureTable::new(bank.schema(), rows, labels)
}

struct Summary {
    mean: f64,
    std: f64,
    energy: f64,
    sorted: Vec<f64>,
}

impl Summary {
    fn new(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut sorted = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        Summary {
            mean,
            std: var.sqrt(),
            energy: x.iter().map(|v| v * v).sum(),
            sorted,
        }
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Local maxima strictly above `threshold`, at least `min_sep` samples
/// apart. Taller peaks win conflicts.
fn count_peaks(x: &[f64], threshold: f64, min_sep: usize) -> usize {
    if x.len() < 3 {
        return 0;
    }
    let mut candidates: Vec<usize> = (1..x.len() - 1)
        .filter(|&i| x[i] > threshold && x[i] > x[i - 1] && x[i] >= x[i + 1])
        .collect();
    candidates.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if kept.iter().all(|&k| k.abs_diff(c) >= min_sep) {
            kept.push(c);
        }
    }
    kept.len()
}

/// One-sided power spectrum of the mean-removed signal, bins 1..=n/2.
fn power_spectrum(x: &[f64], mean: f64, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[1..=n / 2].iter().map(|c| c.norm_sqr()).collect()
}

fn dominant_frequency(power: &[f64], n: usize, rate: f64) -> f64 {
    let mut best = (0usize, 0.0f64);
    for (k, &p) in power.iter().enumerate() {
        if p > best.1 {
            best = (k + 1, p);
        }
    }
    best.0 as f64 * rate / n as f64
}

/// Shannon entropy of the normalized power spectrum, scaled to [0, 1].
fn spectral_entropy(power: &[f64]) -> f64 {
    let total: f64 = power.iter().sum();
    if power.len() < 2 || total <= f64::MIN_POSITIVE {
        return 0.0;
    }
    let h: f64 = power
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p / total;
            -q * q.ln()
        })
        .sum();
    (h / (power.len() as f64).ln()).clamp(0.0, 1.0)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    let denom = (saa * sbb).sqrt();
    // Constant channels have undefined correlation; report 0.
    if denom <= 1e-12 * n {
        0.0
    } else {
        (sab / denom).clamp(-1.0, 1.0)
    }
}
