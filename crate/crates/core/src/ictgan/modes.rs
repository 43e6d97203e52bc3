//! Mode-specific normalization: each continuous column is modelled as a
//! one-dimensional Gaussian mixture and every value is encoded as a mode
//! indicator plus a scaled offset from that mode's mean.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::ColumnSpec;
use crate::error::{Error, Result};
use crate::seed;

/// Smallest admissible mode standard deviation.
pub const MIN_MODE_STD: f64 = 1e-6;
/// Values beyond this are clamped so the offset stays inside (-1, 1).
pub const ALPHA_LIMIT: f64 = 1.0 - 1e-9;
/// Columns longer than this are subsampled before mixture fitting.
pub const FIT_SAMPLE_LIMIT: usize = 5000;

const EM_MAX_ITER: usize = 300;
const EM_RESTARTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnModes {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ColumnModes {
    pub fn n_modes(&self) -> usize {
        self.means.len()
    }

    /// Index of the mode with the largest posterior probability for `c`.
    pub fn most_likely_mode(&self, c: f64) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for k in 0..self.n_modes() {
            let lp = self.weights[k].ln() + log_normal(c, self.means[k], self.stds[k]);
            if lp > best.1 {
                best = (k, lp);
            }
        }
        best.0
    }

    pub fn encode(&self, c: f64) -> (f64, usize) {
        let k = self.most_likely_mode(c);
        let alpha = ((c - self.means[k]) / (4.0 * self.stds[k])).clamp(-ALPHA_LIMIT, ALPHA_LIMIT);
        (alpha, k)
    }

    pub fn decode(&self, alpha: f64, mode: usize) -> f64 {
        alpha * 4.0 * self.stds[mode] + self.means[mode]
    }

    pub fn log_likelihood(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .map(|&v| {
                let terms: Vec<f64> = (0..self.n_modes())
                    .map(|k| self.weights[k].ln() + log_normal(v, self.means[k], self.stds[k]))
                    .collect();
                crate::nn::activation::log_sum_exp(&terms)
            })
            .sum()
    }
}

fn log_normal(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeFitConfig {
    pub max_modes: usize,
    pub weight_threshold: f64,
}

impl Default for ModeFitConfig {
    fn default() -> Self {
        ModeFitConfig { max_modes: 10, weight_threshold: 0.005 }
    }
}

/// Fit a Gaussian mixture to one column. The number of modes (at most
/// `max_modes`, at most the distinct-value count) is chosen by the
/// Bayesian information criterion; modes lighter than the weight threshold
/// are dropped and the rest renormalized. Modes are sorted by mean.
pub fn fit_mode_normalizer(values: &[f64], config: &ModeFitConfig, seed: u64) -> Result<ColumnModes> {
    if values.is_empty() {
        return Err(Error::Empty("no values to fit modes".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mode fitting input".into()));
    }
    if config.max_modes == 0 {
        return Err(Error::Hyperparameter("max_modes must be at least 1".into()));
    }
    let mut rng = seed::rng(seed::derive(seed, &["modes"]));
    let data: Vec<f64> = if values.len() > FIT_SAMPLE_LIMIT {
        let mut idx = sample(&mut rng, values.len(), FIT_SAMPLE_LIMIT).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| values[i]).collect()
    } else {
        values.to_vec()
    };
    let mut distinct = data.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() == 1 {
        return Ok(ColumnModes { means: vec![distinct[0]], stds: vec![MIN_MODE_STD], weights: vec![1.0] });
    }

    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let var_floor = (1e-3 * var.sqrt()).powi(2).max(MIN_MODE_STD * MIN_MODE_STD);

    let k_max = config.max_modes.min(distinct.len());
    let mut best: Option<(f64, ColumnModes)> = None;
    let mut worse_in_a_row = 0;
    for k in 1..=k_max {
        let restarts = if k == 1 { 1 } else { EM_RESTARTS };
        let mut fitted: Option<(f64, ColumnModes)> = None;
        for _ in 0..restarts {
            let (ll, m) = em(&data, k, var, var_floor, &mut rng);
            if fitted.as_ref().is_none_or(|(b, _)| ll > *b) {
                fitted = Some((ll, m));
            }
        }
        let (ll, modes) = fitted.expect("at least one restart");
        let free_params = (3 * k - 1) as f64;
        let bic = -2.0 * ll + free_params * n.ln();
        if best.as_ref().is_none_or(|(b, _)| bic < *b) {
            best = Some((bic, modes));
            worse_in_a_row = 0;
        } else {
            worse_in_a_row += 1;
            if worse_in_a_row >= 2 {
                break;
            }
        }
    }
    Ok(prune(best.expect("k = 1 always fitted").1, config.weight_threshold))
}

fn em(data: &[f64], k: usize, var: f64, var_floor: f64, rng: &mut impl Rng) -> (f64, ColumnModes) {
    let n = data.len();
    let mut means = kmeans_pp_init(data, k, rng);
    let mut vars = vec![var.max(var_floor); k];
    let mut weights = vec![1.0 / k as f64; k];
    let mut resp = vec![0.0; n * k];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut ll = prev_ll;
    for _ in 0..EM_MAX_ITER {
        ll = 0.0;
        for (i, &x) in data.iter().enumerate() {
            let r = &mut resp[i * k..(i + 1) * k];
            let mut max = f64::NEG_INFINITY;
            for j in 0..k {
                r[j] = weights[j].ln() + log_normal(x, means[j], vars[j].sqrt());
                max = max.max(r[j]);
            }
            let mut sum = 0.0;
            for v in r.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in r.iter_mut() {
                *v /= sum;
            }
            ll += max + sum.ln();
        }
        for j in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            if nk < 1e-12 {
                weights[j] = 1e-300;
                continue;
            }
            let m = (0..n).map(|i| resp[i * k + j] * data[i]).sum::<f64>() / nk;
            let v = (0..n).map(|i| resp[i * k + j] * (data[i] - m).powi(2)).sum::<f64>() / nk;
            means[j] = m;
            vars[j] = v.max(var_floor);
            weights[j] = nk / n as f64;
        }
        if (ll - prev_ll).abs() <= 1e-8 * n as f64 {
            break;
        }
        prev_ll = ll;
    }
    let stds = vars.iter().map(|v| v.sqrt().max(MIN_MODE_STD)).collect();
    (ll, ColumnModes { means, stds, weights })
}

fn kmeans_pp_init(data: &[f64], k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut centers = vec![data[rng.random_range(0..data.len())]];
    let mut d2: Vec<f64> = data.iter().map(|x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            data[rng.random_range(0..data.len())]
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut pick = data.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            data[pick]
        };
        for (d, x) in d2.iter_mut().zip(data) {
            *d = d.min((x - next).powi(2));
        }
        centers.push(next);
    }
    centers
}

fn prune(modes: ColumnModes, threshold: f64) -> ColumnModes {
    let heaviest = modes
        .weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty mixture");
    let mut keep: Vec<usize> = (0..modes.n_modes())
        .filter(|&j| modes.weights[j] >= threshold || j == heaviest)
        .collect();
    keep.sort_by(|&a, &b| modes.means[a].total_cmp(&modes.means[b]));
    let total: f64 = keep.iter().map(|&j| modes.weights[j]).sum();
    ColumnModes {
        means: keep.iter().map(|&j| modes.means[j]).collect(),
        stds: keep.iter().map(|&j| modes.stds[j]).collect(),
        weights: keep.iter().map(|&j| modes.weights[j] / total).collect(),
    }
}

/// Output activation of one encoded segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanKind {
    /// Scalar offset in (-1, 1).
    Tanh,
    /// One-hot block (mode indicator or discrete category).
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub kind: SpanKind,
    pub start: usize,
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnTransform {
    Continuous(ColumnModes),
    Discrete { categories: usize },
}

/// Table-level encoder built from one mixture per continuous column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeNormalizer {
    pub columns: Vec<ColumnTransform>,
}

impl ModeNormalizer {
    pub fn fit(schema: &[ColumnSpec], rows: ArrayView2<f64>, config: &ModeFitConfig, seed: u64) -> Result<Self> {
        if rows.ncols() != schema.len() {
            return Err(Error::Dimension { expected: schema.len(), got: rows.ncols() });
        }
        let columns = schema
            .iter()
            .enumerate()
            .map(|(j, col)| {
                if col.is_discrete() {
                    Ok(ColumnTransform::Discrete { categories: col.categories.len() })
                } else {
                    let values = rows.column(j).to_vec();
                    let col_seed = seed::derive_index(seed, "mode-column", j as u64);
                    fit_mode_normalizer(&values, config, col_seed).map(ColumnTransform::Continuous)
                }
            })
            .collect::<Result<_>>()?;
        Ok(ModeNormalizer { columns })
    }

    /// Encoded segments in output order.
    pub fn spans(&self) -> Vec<Span> {
        let mut spans = Vec::new();
        let mut start = 0;
        for col in &self.columns {
            match col {
                ColumnTransform::Continuous(m) => {
                    spans.push(Span { kind: SpanKind::Tanh, start, width: 1 });
                    spans.push(Span { kind: SpanKind::Softmax, start: start + 1, width: m.n_modes() });
                    start += 1 + m.n_modes();
                }
                ColumnTransform::Discrete { categories } => {
                    spans.push(Span { kind: SpanKind::Softmax, start, width: *categories });
                    start += categories;
                }
            }
        }
        spans
    }

    pub fn encoded_width(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnTransform::Continuous(m) => 1 + m.n_modes(),
                ColumnTransform::Discrete { categories } => *categories,
            })
            .sum()
    }

    /// Start offset of each column's discrete block, for discrete columns.
    pub fn discrete_offsets(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        for (j, col) in self.columns.iter().enumerate() {
            match col {
                ColumnTransform::Continuous(m) => start += 1 + m.n_modes(),
                ColumnTransform::Discrete { categories } => {
                    out.push((j, start, *categories));
                    start += categories;
                }
            }
        }
        out
    }

    pub fn encode_row(&self, row: ArrayView1<f64>) -> Result<Vec<f64>> {
        if row.len() != self.columns.len() {
            return Err(Error::Dimension { expected: self.columns.len(), got: row.len() });
        }
        let mut out = Vec::with_capacity(self.encoded_width());
        for (col, &c) in self.columns.iter().zip(row) {
            match col {
                ColumnTransform::Continuous(m) => {
                    let (alpha, k) = m.encode(c);
                    out.push(alpha);
                    out.extend((0..m.n_modes()).map(|j| if j == k { 1.0 } else { 0.0 }));
                }
                ColumnTransform::Discrete { categories } => {
                    let k = c.round() as usize;
                    if c < 0.0 || k >= *categories {
                        return Err(Error::Validation(format!("category index {c} out of range")));
                    }
                    out.extend((0..*categories).map(|j| if j == k { 1.0 } else { 0.0 }));
                }
            }
        }
        Ok(out)
    }

    pub fn encode(&self, rows: ArrayView2<f64>) -> Result<Array2<f64>> {
        let w = self.encoded_width();
        let mut out = Array2::zeros((rows.nrows(), w));
        for (i, row) in rows.outer_iter().enumerate() {
            let enc = self.encode_row(row)?;
            out.row_mut(i).assign(&ArrayView1::from(&enc));
        }
        Ok(out)
    }

    /// Inverse of [`ModeNormalizer::encode_row`]. Every one-hot block must
    /// hold exactly one 1 and zeros elsewhere.
    pub fn decode_row(&self, encoded: &[f64]) -> Result<Vec<f64>> {
        self.decode_with(encoded, |block| {
            let ones: Vec<usize> = (0..block.len()).filter(|&j| block[j] == 1.0).collect();
            if ones.len() == 1 && block.iter().all(|&v| v == 0.0 || v == 1.0) {
                Ok(ones[0])
            } else {
                Err(Error::Validation("one-hot block must contain exactly one 1".into()))
            }
        })
    }

    /// Decode soft generator output by taking the argmax of each block.
    pub fn decode_soft_row(&self, encoded: &[f64]) -> Result<Vec<f64>> {
        self.decode_with(encoded, |block| Ok(argmax(block)))
    }

    fn decode_with(&self, encoded: &[f64], mut pick: impl FnMut(&[f64]) -> Result<usize>) -> Result<Vec<f64>> {
        if encoded.len() != self.encoded_width() {
            return Err(Error::Dimension { expected: self.encoded_width(), got: encoded.len() });
        }
        let mut out = Vec::with_capacity(self.columns.len());
        let mut p = 0;
        for col in &self.columns {
            match col {
                ColumnTransform::Continuous(m) => {
                    let alpha = encoded[p];
                    if !alpha.is_finite() {
                        return Err(Error::NonFinite("encoded offset".into()));
                    }
                    let k = pick(&encoded[p + 1..p + 1 + m.n_modes()])?;
                    out.push(m.decode(alpha.clamp(-1.0, 1.0), k));
                    p += 1 + m.n_modes();
                }
                ColumnTransform::Discrete { categories } => {
                    out.push(pick(&encoded[p..p + categories])? as f64);
                    p += categories;
                }
            }
        }
        Ok(out)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
