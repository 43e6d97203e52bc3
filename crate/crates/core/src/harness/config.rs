use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::{Family, ModelSpec};
use crate::dataio::RawFormat;
use crate::error::{Error, Result};
use crate::features::{FeatureBank, WindowConfig};
use crate::ictgan::TrainConfig;

/// How the impostor side of a training set is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Real impostor rows only.
    Vanilla,
    /// Real impostor rows plus beta-noise rows.
    Beta,
    /// Real impostor rows plus GAN-generated rows.
    Ictgan,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Vanilla, Variant::Beta, Variant::Ictgan];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::Beta => "beta",
            Variant::Ictgan => "ictgan",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Synthetic walkers generated from the master seed.
    Walkers { n_users: usize, duration_s: f64, sample_rate_hz: f64 },
    /// Delimited raw accelerometer recordings.
    RawCsv {
        path: PathBuf,
        #[serde(default)]
        format: RawFormat,
    },
    /// Precomputed continuous feature table with a user id column.
    FeatureTable {
        path: PathBuf,
        #[serde(default = "default_id_column")]
        id_column: String,
    },
    /// The UCI human-activity-recognition feature release.
    UciHar { dir: PathBuf },
}

fn default_id_column() -> String {
    "user".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    #[serde(flatten)]
    pub source: DatasetSource,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub window: WindowConfig,
    pub bank: FeatureBank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationConfig {
    /// Real impostor training rows are capped at this multiple of the
    /// genuine training row count.
    pub max_impostor_ratio: f64,
    /// Beta-noise rows per real impostor training row.
    pub beta_ratio: f64,
    /// GAN rows per real impostor training row.
    pub ictgan_ratio: f64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig { max_impostor_ratio: 5.0, beta_ratio: 1.0, ictgan_ratio: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub n_probes: usize,
    pub threshold: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig { n_probes: 1_000_000, threshold: crate::classifiers::DEFAULT_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Persist each fitted GAN next to the classifier models.
    pub save_gan_models: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { save_gan_models: false }
    }
}

fn default_train_fraction() -> f64 {
    0.7
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_classifiers() -> Vec<ModelSpec> {
    [Family::Linsvm, Family::Rbfsvm, Family::Rndf, Family::Ffnn]
        .into_iter()
        .map(ModelSpec::default_for)
        .collect()
}

fn default_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random choice derives from it.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub features: FeaturesConfig,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ModelSpec>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub augmentation: AugmentationConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub gan: TrainConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse a config file. Relative dataset paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for ds in &mut self.datasets {
            let p = match &mut ds.source {
                DatasetSource::RawCsv { path, .. } | DatasetSource::FeatureTable { path, .. } => path,
                DatasetSource::UciHar { dir } => dir,
                DatasetSource::Walkers { .. } => continue,
            };
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("no seed given (set `seed` or pass --seed)".into()))
    }

    /// Check everything that can be checked before any output is written.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.seed()?;
        if self.datasets.is_empty() {
            return bad("no datasets configured".into());
        }
        let mut names = BTreeSet::new();
        for ds in &self.datasets {
            if ds.name.is_empty() || !ds.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_".contains(c)) {
                return bad(format!("dataset name '{}' must be non-empty [A-Za-z0-9_-]", ds.name));
            }
            if !names.insert(&ds.name) {
                return bad(format!("duplicate dataset name '{}'", ds.name));
            }
            match &ds.source {
                DatasetSource::Walkers { n_users, duration_s, sample_rate_hz } => {
                    if *n_users < 2 || !(*duration_s > 0.0) || !(*sample_rate_hz > 0.0) {
                        return bad(format!("dataset '{}': walkers need >= 2 users and positive duration and rate", ds.name));
                    }
                }
                DatasetSource::RawCsv { path, .. } | DatasetSource::FeatureTable { path, .. } => {
                    if !path.is_file() {
                        return bad(format!("dataset '{}': file {} does not exist", ds.name, path.display()));
                    }
                }
                DatasetSource::UciHar { dir } => {
                    if !dir.is_dir() {
                        return bad(format!("dataset '{}': directory {} does not exist", ds.name, dir.display()));
                    }
                }
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        self.features.window.validate()?;
        if self.features.bank.width() == 0 {
            return bad("feature bank is empty".into());
        }
        if self.classifiers.is_empty() {
            return bad("no classifiers configured".into());
        }
        let mut families = BTreeSet::new();
        for spec in &self.classifiers {
            spec.validate()?;
            if !families.insert(spec.family()) {
                return bad(format!("classifier {} listed twice", spec.family()));
            }
        }
        if self.variants.is_empty() {
            return bad("no variants configured".into());
        }
        if self.variants.iter().collect::<BTreeSet<_>>().len() != self.variants.len() {
            return bad("variant listed twice".into());
        }
        let a = &self.augmentation;
        if !(a.max_impostor_ratio > 0.0) || !(a.beta_ratio >= 0.0) || !(a.ictgan_ratio >= 0.0) {
            return bad("augmentation ratios must be non-negative and the impostor cap positive".into());
        }
        if self.attack.n_probes == 0 {
            return bad("attack.n_probes must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.attack.threshold) {
            return bad(format!("attack.threshold must lie in [0, 1], got {}", self.attack.threshold));
        }
        if self.variants.contains(&Variant::Ictgan) {
            self.gan.validate()?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of this config.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
[[datasets]]
name = "walk"
kind = "walkers"
n_users = 4
duration_s = 60
sample_rate_hz = 50
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.classifiers.len(), 4);
        assert_eq!(c.variants, Variant::ALL.to_vec());
        assert_eq!(c.attack.n_probes, 1_000_000);
        assert_eq!(c.gan, TrainConfig::default());
        assert_eq!(c.hash(), ExperimentConfig::from_toml(MINIMAL).unwrap().hash());
    }

    #[test]
    fn misspelled_nested_keys_rejected() {
        for extra in ["[gan]\nbatch_size = 100", "[[classifiers]]\nfamily = \"rndf\"\ntrees = 5", "[features.window]\nframe = 10"] {
            let text = format!("{MINIMAL}{extra}\n");
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{extra}");
        }
    }

    #[test]
    fn full_sections_parse() {
        let text = r#"
seed = 1
variants = ["vanilla", "beta"]
[[datasets]]
name = "w"
kind = "walkers"
n_users = 3
duration_s = 30
sample_rate_hz = 20
[[classifiers]]
family = "rbfsvm"
gamma = 2.0
[[classifiers]]
family = "rndf"
n_trees = 10
[features.window]
frame_s = 10
overlap = 0.5
[attack]
n_probes = 100
[gan]
epochs = 5
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.classifiers.len(), 2);
        assert_eq!(c.gan.epochs, 5);
    }

    #[test]
    fn validation_failures() {
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.seed = None;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.datasets[0].source = DatasetSource::FeatureTable { path: "/no/such/file.csv".into(), id_column: "user".into() };
        assert!(matches!(c.validate(), Err(Error::Config(m)) if m.contains("does not exist")));
        let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.attack.n_probes = 0;
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_toml("seed = 1\nbogus = 2\n").is_err());
    }
}
