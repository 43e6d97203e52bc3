//! Attack evaluation: zero-effort attacks (other users' genuine rows),
//! random-vector attacks (uniform probes in the unit cube), error rates,
//! ROC sweeps and Monte-Carlo acceptance-region estimates.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{decide_score, Decision, Scorer};
use crate::error::{Error, Result};
use crate::seed;

/// Probes scored per batch; each batch draws from its own derived seed.
pub const PROBE_CHUNK: usize = 4096;
pub const DEFAULT_ROC_THRESHOLDS: usize = 512;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub fa: u64,
    pub tr: u64,
    pub fr: u64,
    pub ta: u64,
}

impl ConfusionCounts {
    pub fn impostor_trials(&self) -> u64 {
        self.fa + self.tr
    }

    pub fn genuine_trials(&self) -> u64 {
        self.fr + self.ta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub far: f64,
    pub frr: f64,
    pub hter: f64,
}

/// FAR = FA/(FA+TR), FRR = FR/(FR+TA), HTER = (FAR+FRR)/2.
pub fn compute_metrics(c: &ConfusionCounts) -> Result<ErrorRates> {
    if c.impostor_trials() == 0 {
        return Err(Error::UndefinedMetric("FAR has no impostor trials"));
    }
    if c.genuine_trials() == 0 {
        return Err(Error::UndefinedMetric("FRR has no genuine trials"));
    }
    let far = c.fa as f64 / c.impostor_trials() as f64;
    let frr = c.fr as f64 / c.genuine_trials() as f64;
    Ok(ErrorRates { far, frr, hter: (far + frr) / 2.0 })
}

fn check_dim(model: &dyn Scorer, got: usize) -> Result<()> {
    if got != model.feature_dim() {
        return Err(Error::Dimension { expected: model.feature_dim(), got });
    }
    Ok(())
}

/// Count accepts and rejects of the genuine user's own test rows and of
/// every other user's rows.
pub fn zero_effort_eval(
    model: &dyn Scorer,
    genuine: ArrayView2<f64>,
    impostor: ArrayView2<f64>,
    threshold: f64,
) -> Result<ConfusionCounts> {
    if genuine.nrows() == 0 {
        return Err(Error::Empty("genuine test set".into()));
    }
    if impostor.nrows() == 0 {
        return Err(Error::Empty("impostor test set".into()));
    }
    check_dim(model, genuine.ncols())?;
    check_dim(model, impostor.ncols())?;
    Ok(counts_from_scores(&model.score_rows(genuine), &model.score_rows(impostor), threshold))
}

pub fn counts_from_scores(genuine: &[f64], impostor: &[f64], threshold: f64) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for &s in genuine {
        match decide_score(s, threshold) {
            Decision::Genuine => c.ta += 1,
            Decision::Impostor => c.fr += 1,
        }
    }
    for &s in impostor {
        match decide_score(s, threshold) {
            Decision::Genuine => c.fa += 1,
            Decision::Impostor => c.tr += 1,
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArEstimate {
    pub accepted: u64,
    pub n_probes: u64,
    pub estimate: f64,
    pub ci95: (f64, f64),
}

/// Normal-approximation 95% interval with continuity correction, clamped
/// to [0, 1].
pub fn binomial_ci95(accepted: u64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let p = accepted as f64 / nf;
    let half = Z95 * (p * (1.0 - p) / nf).sqrt() + 0.5 / nf;
    ((p - half).max(0.0), (p + half).min(1.0))
}

/// Fraction of uniform probes in `[0, 1]^dims` the model accepts.
pub fn random_vector_attack(
    model: &dyn Scorer,
    n_probes: usize,
    dims: usize,
    threshold: f64,
    seed: u64,
) -> Result<ArEstimate> {
    check_dim(model, dims)?;
    if n_probes == 0 {
        return Err(Error::Validation("random-vector attack needs at least one probe".into()));
    }
    let mut accepted = 0u64;
    let mut done = 0;
    let mut chunk = 0u64;
    while done < n_probes {
        let m = PROBE_CHUNK.min(n_probes - done);
        let mut rng = seed::rng(seed::derive_index(seed, "probe-chunk", chunk));
        let probes = Array2::from_shape_simple_fn((m, dims), || rng.random::<f64>());
        accepted += model
            .score_rows(probes.view())
            .into_iter()
            .filter(|&s| decide_score(s, threshold) == Decision::Genuine)
            .count() as u64;
        done += m;
        chunk += 1;
    }
    let n = n_probes as u64;
    Ok(ArEstimate { accepted, n_probes: n, estimate: accepted as f64 / n as f64, ci95: binomial_ci95(accepted, n) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// Error rates over a threshold sweep, sorted by threshold. Thresholds are
/// `n_thresholds` evenly spaced values in [0, 1], joined by every distinct
/// observed score when there are fewer distinct scores than that, plus
/// one threshold above every score.
pub fn roc_curve(genuine: &[f64], impostor: &[f64], n_thresholds: usize) -> Result<Vec<RocPoint>> {
    if genuine.is_empty() {
        return Err(Error::Empty("genuine scores".into()));
    }
    if impostor.is_empty() {
        return Err(Error::Empty("impostor scores".into()));
    }
    let mut g = genuine.to_vec();
    let mut im = impostor.to_vec();
    g.sort_by(f64::total_cmp);
    im.sort_by(f64::total_cmp);

    let steps = n_thresholds.max(2);
    let mut thresholds: Vec<f64> = (0..steps).map(|i| i as f64 / (steps - 1) as f64).collect();
    let mut distinct: Vec<f64> = g.iter().chain(&im).cloned().collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < steps {
        thresholds.extend(&distinct);
    }
    let top = distinct.last().cloned().unwrap_or(1.0).max(1.0);
    thresholds.push(top + 1e-9);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let below = |v: &[f64], t: f64| v.partition_point(|&s| s < t);
    Ok(thresholds
        .into_iter()
        .map(|t| RocPoint {
            threshold: t,
            far: (im.len() - below(&im, t)) as f64 / im.len() as f64,
            frr: below(&g, t) as f64 / g.len() as f64,
        })
        .collect())
}

/// The ROC point where FAR and FRR are closest; the rate is their mean.
pub fn equal_error_rate(roc: &[RocPoint]) -> Option<(f64, f64)> {
    roc.iter()
        .min_by(|a, b| (a.far - a.frr).abs().total_cmp(&(b.far - b.frr).abs()))
        .map(|p| ((p.far + p.frr) / 2.0, p.threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub counts: ConfusionCounts,
    pub far: f64,
    pub frr: f64,
    pub hter: f64,
    pub eer: f64,
    pub eer_threshold: f64,
    pub ar_estimate: f64,
    pub ar_ci95: (f64, f64),
    pub n_probes: u64,
    #[serde(skip)]
    pub roc: Vec<RocPoint>,
}

/// Zero-effort metrics, ROC and a random-vector attack for one model.
pub fn evaluate(
    model: &dyn Scorer,
    genuine: ArrayView2<f64>,
    impostor: ArrayView2<f64>,
    threshold: f64,
    n_probes: usize,
    seed: u64,
) -> Result<EvalReport> {
    if genuine.nrows() == 0 {
        return Err(Error::Empty("genuine test set".into()));
    }
    if impostor.nrows() == 0 {
        return Err(Error::Empty("impostor test set".into()));
    }
    check_dim(model, genuine.ncols())?;
    check_dim(model, impostor.ncols())?;
    let gs = model.score_rows(genuine);
    let is = model.score_rows(impostor);
    let counts = counts_from_scores(&gs, &is, threshold);
    let rates = compute_metrics(&counts)?;
    let roc = roc_curve(&gs, &is, DEFAULT_ROC_THRESHOLDS)?;
    let (eer, eer_threshold) = equal_error_rate(&roc).expect("non-empty curve");
    let ar = random_vector_attack(model, n_probes, model.feature_dim(), threshold, seed)?;
    Ok(EvalReport {
        threshold,
        counts,
        far: rates.far,
        frr: rates.frr,
        hter: rates.hter,
        eer,
        eer_threshold,
        ar_estimate: ar.estimate,
        ar_ci95: ar.ci95,
        n_probes: ar.n_probes,
        roc,
    })
}
