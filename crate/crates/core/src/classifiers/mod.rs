//! Per-user binary authentication models: linear and RBF support vector
//! machines, a random forest, and a feed-forward network.
//!
//! Every model exposes a genuine-class score in [0, 1]; an input is
//! accepted as genuine when its score is at least the threshold.

pub mod ffnn;
pub mod forest;
pub mod svm;

use std::fmt;
use std::path::Path;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::MinMaxNormalizer;
use crate::nn::activation::sigmoid;
use ffnn::{Ffnn, FfnnTraining};
use forest::{ForestConfig, RandomForest, TreeConfig};
use svm::{Kernel, KernelSvm, LinearSvm, SmoConfig};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Family {
    Linsvm,
    Rbfsvm,
    Rndf,
    Ffnn,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Linsvm => "LINSVM",
            Family::Rbfsvm => "RBFSVM",
            Family::Rndf => "RNDF",
            Family::Ffnn => "FFNN",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, tol: 1e-3, max_iter: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbfParams {
    pub c: f64,
    /// Defaults to `1 / (n_features * mean feature variance)`.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RbfParams {
    fn default() -> Self {
        RbfParams { c: 1.0, gamma: None, tol: 1e-3, max_iter: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Defaults to `sqrt(n_features)`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_features: None,
            min_samples_split: 2,
            max_depth: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FfnnParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for FfnnParams {
    fn default() -> Self {
        FfnnParams {
            hidden: vec![64, 64],
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 32,
        }
    }
}

/// Classifier family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelSpec {
    Linsvm(SvmParams),
    Rbfsvm(RbfParams),
    Rndf(ForestParams),
    Ffnn(FfnnParams),
}

impl ModelSpec {
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Linsvm => ModelSpec::Linsvm(SvmParams::default()),
            Family::Rbfsvm => ModelSpec::Rbfsvm(RbfParams::default()),
            Family::Rndf => ModelSpec::Rndf(ForestParams::default()),
            Family::Ffnn => ModelSpec::Ffnn(FfnnParams::default()),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ModelSpec::Linsvm(_) => Family::Linsvm,
            ModelSpec::Rbfsvm(_) => Family::Rbfsvm,
            ModelSpec::Rndf(_) => Family::Rndf,
            ModelSpec::Ffnn(_) => Family::Ffnn,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Hyperparameter(format!("{}: {msg}", self.family())));
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Hyperparameter(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            ModelSpec::Linsvm(p) => {
                positive("C", p.c)?;
                positive("tol", p.tol)
            }
            ModelSpec::Rbfsvm(p) => {
                positive("C", p.c)?;
                positive("tol", p.tol)?;
                match p.gamma {
                    Some(g) => positive("gamma", g),
                    None => Ok(()),
                }
            }
            ModelSpec::Rndf(p) => {
                if p.n_trees == 0 {
                    return bad("n_trees must be at least 1".into());
                }
                if p.max_features == Some(0) {
                    return bad("max_features must be at least 1".into());
                }
                if p.min_samples_split < 2 {
                    return bad("min_samples_split must be at least 2".into());
                }
                Ok(())
            }
            ModelSpec::Ffnn(p) => {
                if p.hidden.is_empty() || p.hidden.contains(&0) {
                    return bad("hidden layer widths must be non-empty and positive".into());
                }
                if p.epochs == 0 || p.batch_size == 0 {
                    return bad("epochs and batch_size must be at least 1".into());
                }
                positive("learning_rate", p.learning_rate)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedParams {
    Linear(LinearSvm),
    Kernel(KernelSvm),
    Forest(RandomForest),
    Network(Ffnn),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Genuine,
    Impostor,
}

/// Anything that maps a feature row to a genuine-class score in [0, 1].
pub trait Scorer: Sync {
    fn feature_dim(&self) -> usize;

    /// Score without validating the input.
    fn score_unchecked(&self, x: &[f64]) -> f64;

    fn score_rows(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.outer_iter()
            .map(|r| match r.as_slice() {
                Some(s) => self.score_unchecked(s),
                None => self.score_unchecked(&r.to_vec()),
            })
            .collect()
    }
}

/// Accept iff `score >= threshold`; ties are genuine.
pub fn decide_score(score: f64, threshold: f64) -> Decision {
    if score >= threshold {
        Decision::Genuine
    } else {
        Decision::Impostor
    }
}

/// A fitted per-user model. Immutable once trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedAuthModel {
    pub format_version: u32,
    pub family: Family,
    pub user_id: String,
    pub feature_dim: usize,
    pub threshold: f64,
    pub spec: ModelSpec,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalizer: Option<MinMaxNormalizer>,
    pub params: FittedParams,
}

/// Train a genuine-vs-impostor model on rows in the unit cube.
pub fn train(
    spec: &ModelSpec,
    genuine: ArrayView2<f64>,
    impostor: ArrayView2<f64>,
    seed: u64,
) -> Result<TrainedAuthModel> {
    spec.validate()?;
    if genuine.nrows() == 0 {
        return Err(Error::SingleClass("no genuine rows"));
    }
    if impostor.nrows() == 0 {
        return Err(Error::SingleClass("no impostor rows"));
    }
    if genuine.ncols() != impostor.ncols() {
        return Err(Error::Dimension { expected: genuine.ncols(), got: impostor.ncols() });
    }
    if genuine.iter().chain(impostor.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training rows".into()));
    }
    let dim = genuine.ncols();
    let x: Array2<f64> = concatenate(Axis(0), &[genuine, impostor]).expect("widths checked");
    let is_genuine: Vec<bool> = (0..x.nrows()).map(|i| i < genuine.nrows()).collect();
    let signed: Vec<f64> = is_genuine.iter().map(|&g| if g { 1.0 } else { -1.0 }).collect();

    let params = match spec {
        ModelSpec::Linsvm(p) => FittedParams::Linear(LinearSvm::fit(
            x.view(),
            &signed,
            &SmoConfig { c: p.c, tol: p.tol, max_iter: p.max_iter, trace: false },
        )?),
        ModelSpec::Rbfsvm(p) => {
            let gamma = p.gamma.unwrap_or_else(|| default_gamma(x.view()));
            FittedParams::Kernel(KernelSvm::fit(
                x.view(),
                &signed,
                Kernel::Rbf { gamma },
                &SmoConfig { c: p.c, tol: p.tol, max_iter: p.max_iter, trace: false },
            )?)
        }
        ModelSpec::Rndf(p) => {
            let max_features = p
                .max_features
                .unwrap_or_else(|| ((dim as f64).sqrt().floor() as usize).max(1))
                .min(dim);
            let cfg = ForestConfig {
                n_trees: p.n_trees,
                bootstrap: p.bootstrap,
                tree: TreeConfig {
                    max_features,
                    min_samples_split: p.min_samples_split,
                    max_depth: p.max_depth,
                },
            };
            FittedParams::Forest(RandomForest::fit(x.view(), &is_genuine, &cfg, seed))
        }
        ModelSpec::Ffnn(p) => {
            let mut net = Ffnn::new(dim, &p.hidden, seed);
            let targets: Vec<f64> = is_genuine.iter().map(|&g| if g { 1.0 } else { 0.0 }).collect();
            let cfg = FfnnTraining {
                learning_rate: p.learning_rate,
                epochs: p.epochs,
                batch_size: p.batch_size,
            };
            net.fit(x.view(), &targets, &cfg, seed);
            FittedParams::Network(net)
        }
    };
    Ok(TrainedAuthModel {
        format_version: MODEL_FORMAT_VERSION,
        family: spec.family(),
        user_id: String::new(),
        feature_dim: dim,
        threshold: DEFAULT_THRESHOLD,
        spec: spec.clone(),
        seed,
        normalizer: None,
        params,
    })
}

/// `1 / (n_features * mean per-feature variance)`, or `1 / n_features`
/// when every feature is constant.
pub fn default_gamma(x: ArrayView2<f64>) -> f64 {
    let d = x.ncols().max(1) as f64;
    let mean_var = x.var_axis(Axis(0), 0.0).mean().unwrap_or(0.0);
    if mean_var > 0.0 {
        1.0 / (d * mean_var)
    } else {
        1.0 / d
    }
}

impl TrainedAuthModel {
    pub fn with_user(mut self, user_id: impl Into<String>) -> Self {
        self.user_id = user_id.into();
        self
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_dim {
            return Err(Error::Dimension { expected: self.feature_dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scored row".into()));
        }
        Ok(self.score_unchecked(x))
    }

    pub fn decide(&self, x: &[f64], threshold: f64) -> Result<Decision> {
        Ok(decide_score(self.score(x)?, threshold))
    }

    /// Raw decision value before squashing (signed margin for SVMs,
    /// logit for the network, vote fraction for the forest).
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        match &self.params {
            FittedParams::Linear(m) => m.decision(x),
            FittedParams::Kernel(m) => m.decision(x),
            FittedParams::Forest(m) => m.vote_fraction(x),
            FittedParams::Network(m) => {
                let row = ArrayView2::from_shape((1, x.len()), x).expect("row view");
                m.logits(row)[0]
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(s)?;
        let found = probe.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != MODEL_FORMAT_VERSION {
            return Err(Error::Version { found, expected: MODEL_FORMAT_VERSION });
        }
        let model: TrainedAuthModel = serde_json::from_value(probe)?;
        if model.family != model.spec.family() {
            return Err(Error::Validation("model family tag disagrees with its spec".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

impl Scorer for TrainedAuthModel {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        match &self.params {
            FittedParams::Forest(m) => m.vote_fraction(x),
            _ => sigmoid(self.decision_value(x)),
        }
    }

    fn score_rows(&self, x: ArrayView2<f64>) -> Vec<f64> {
        match &self.params {
            FittedParams::Kernel(m) => m.decision_batch(x).into_iter().map(sigmoid).collect(),
            FittedParams::Network(m) => m.logits(x).iter().map(|&z| sigmoid(z)).collect(),
            _ => x
                .outer_iter()
                .map(|r| self.score_unchecked(&r.to_vec()))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn tie_counts_as_genuine() {
        assert_eq!(decide_score(0.5, 0.5), Decision::Genuine);
        assert_eq!(decide_score(0.49, 0.5), Decision::Impostor);
        assert_eq!(decide_score(0.0, 0.0), Decision::Genuine);
    }

    #[test]
    fn single_class_and_non_finite_rejected() {
        let spec = ModelSpec::default_for(Family::Linsvm);
        let g = array![[0.1, 0.2]];
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(matches!(train(&spec, g.view(), empty.view(), 0), Err(Error::SingleClass(_))));
        assert!(matches!(train(&spec, empty.view(), g.view(), 0), Err(Error::SingleClass(_))));
        let bad = array![[f64::NAN, 0.0]];
        assert!(matches!(train(&spec, g.view(), bad.view(), 0), Err(Error::NonFinite(_))));
        let wide = array![[0.1, 0.2, 0.3]];
        assert!(matches!(train(&spec, g.view(), wide.view(), 0), Err(Error::Dimension { .. })));
    }

    #[test]
    fn hyperparameters_validated() {
        assert!(ModelSpec::Linsvm(SvmParams { c: 0.0, ..Default::default() }).validate().is_err());
        assert!(ModelSpec::Rbfsvm(RbfParams { gamma: Some(-1.0), ..Default::default() })
            .validate()
            .is_err());
        assert!(ModelSpec::Rndf(ForestParams { n_trees: 0, ..Default::default() }).validate().is_err());
        assert!(ModelSpec::Ffnn(FfnnParams { hidden: vec![], ..Default::default() })
            .validate()
            .is_err());
        for f in [Family::Linsvm, Family::Rbfsvm, Family::Rndf, Family::Ffnn] {
            ModelSpec::default_for(f).validate().unwrap();
        }
    }

    #[test]
    fn score_checks_dimension() {
        let spec = ModelSpec::default_for(Family::Linsvm);
        let m = train(&spec, array![[0.9, 0.9]].view(), array![[0.1, 0.1]].view(), 0).unwrap();
        assert!(matches!(m.score(&[0.5]), Err(Error::Dimension { .. })));
        assert!(m.score(&[0.5, 0.5]).is_ok());
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec: ModelSpec = toml::from_str("family = \"rbfsvm\"\nc = 2.0\ngamma = 0.5\n").unwrap();
        assert_eq!(spec, ModelSpec::Rbfsvm(RbfParams { c: 2.0, gamma: Some(0.5), ..Default::default() }));
        let spec: ModelSpec = toml::from_str("family = \"rndf\"").unwrap();
        assert_eq!(spec, ModelSpec::default_for(Family::Rndf));
    }

    #[test]
    fn rejects_unknown_version() {
        let spec = ModelSpec::default_for(Family::Linsvm);
        let m = train(&spec, array![[0.9]].view(), array![[0.1]].view(), 0).unwrap();
        let json = m.to_json().unwrap().replace("\"format_version\":1", "\"format_version\":9");
        assert!(matches!(TrainedAuthModel::from_json(&json), Err(Error::Version { found: 9, .. })));
    }
}
