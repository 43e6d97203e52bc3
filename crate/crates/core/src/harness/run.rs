use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{concatenate, Array2, Axis};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::config::{DatasetConfig, DatasetSource, ExperimentConfig, Variant};
use crate::attackeval::{evaluate, EvalReport};
use crate::betagen::{fit_beta_params, sample_beta_noise};
use crate::classifiers::{train, Family, ModelSpec, TrainedAuthModel};
use crate::dataio::{
    generate_walkers, infer_continuous_schema, load_feature_table, load_raw_csv, load_uci_har, split_per_user,
    FeatureTable,
};
use crate::error::{Error, Result};
use crate::features::{featurize_recordings, unit_matrix, MinMaxNormalizer};
use crate::ictgan::{train_ictgan, write_loss_trace};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub dataset: String,
    pub user: String,
    pub classifier: Family,
    pub variant: Variant,
    /// Seed the classifier was trained with.
    pub seed: u64,
    /// Seed of the random-vector attack.
    pub probe_seed: u64,
    pub train_genuine: usize,
    pub train_impostor_real: usize,
    pub train_impostor_synthetic: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CellRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.report.is_some()
    }
}

/// A failure above the cell level (loading or splitting a dataset).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub dataset: String,
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub classifiers: Vec<Family>,
    pub variants: Vec<Variant>,
    pub cells: Vec<CellRecord>,
    pub failures: Vec<StageFailure>,
    #[serde(skip)]
    pub wall_clock_s: f64,
}

impl RunRecord {
    pub fn failed_cells(&self) -> impl Iterator<Item = &CellRecord> {
        self.cells.iter().filter(|c| c.error.is_some())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Where model files go; nothing is written when `None`.
    pub models_dir: Option<PathBuf>,
    /// Skip zero-effort and random-vector evaluation.
    pub train_only: bool,
    pub only_dataset: Option<String>,
    pub only_user: Option<String>,
}

/// Seed of one (dataset, user, classifier, variant) cell.
pub fn cell_seed(master: u64, dataset: &str, user: &str, family: Family, variant: Variant) -> u64 {
    seed::derive(master, &[dataset, user, family.name(), variant.name()])
}

/// Load a dataset as a feature table (featurizing raw recordings).
pub fn load_dataset(ds: &DatasetConfig, cfg: &ExperimentConfig) -> Result<FeatureTable> {
    let master = cfg.seed()?;
    match &ds.source {
        DatasetSource::Walkers { n_users, duration_s, sample_rate_hz } => {
            let recs = generate_walkers(*n_users, *duration_s, *sample_rate_hz, seed::derive(master, &[&ds.name, "walkers"]))?;
            featurize_recordings(&recs, &cfg.features.window, &cfg.features.bank)
        }
        DatasetSource::RawCsv { path, format } => {
            featurize_recordings(&load_raw_csv(path, format)?, &cfg.features.window, &cfg.features.bank)
        }
        DatasetSource::FeatureTable { path, id_column } => {
            let schema = infer_continuous_schema(path, id_column)?;
            load_feature_table(path, &schema, id_column)
        }
        DatasetSource::UciHar { dir } => load_uci_har(dir),
    }
}

/// Run every (dataset, user, classifier, variant) cell. Cell-level errors
/// are recorded and do not stop the run.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let master = cfg.seed()?;
    let mut record = RunRecord {
        config_hash: cfg.hash(),
        seed: master,
        versions: BTreeMap::from([("gaitauth".to_string(), env!("CARGO_PKG_VERSION").to_string())]),
        classifiers: cfg.classifiers.iter().map(ModelSpec::family).collect(),
        variants: cfg.variants.clone(),
        cells: Vec::new(),
        failures: Vec::new(),
        wall_clock_s: 0.0,
    };
    for ds in &cfg.datasets {
        if opts.only_dataset.as_ref().is_some_and(|d| *d != ds.name) {
            continue;
        }
        let prepared = load_dataset(ds, cfg).and_then(|t| prepare(&ds.name, &t, cfg.train_fraction, master));
        let data = match prepared {
            Ok(d) => d,
            Err(e) => {
                log::error!("dataset {}: {e}", ds.name);
                record.failures.push(StageFailure { dataset: ds.name.clone(), stage: "load".into(), error: e.to_string() });
                continue;
            }
        };
        for user in data.train.user_ids() {
            if opts.only_user.as_ref().is_some_and(|u| *u != user) {
                continue;
            }
            log::info!("dataset {} user {user}", ds.name);
            record.cells.extend(run_user(cfg, opts, &ds.name, &data, &user)?);
        }
    }
    record.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(record)
}

struct PreparedData {
    normalizer: MinMaxNormalizer,
    train: FeatureTable,
    test: FeatureTable,
}

/// Split, then min-max normalize both halves with ranges fitted on the
/// whole training half (every user's genuine rows are some other user's
/// real impostor rows).
fn prepare(name: &str, table: &FeatureTable, train_fraction: f64, master: u64) -> Result<PreparedData> {
    if table.user_ids().len() < 2 {
        return Err(Error::Validation(format!("dataset {name} needs at least 2 users")));
    }
    let (train, test) = split_per_user(table, train_fraction, seed::derive(master, &[name, "split"]))?;
    let normalizer = MinMaxNormalizer::fit(&train)?;
    Ok(PreparedData { train: normalizer.apply(&train)?, test: normalizer.apply(&test)?, normalizer })
}

fn run_user(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    dataset: &str,
    data: &PreparedData,
    user: &str,
) -> Result<Vec<CellRecord>> {
    let master = cfg.seed()?;
    let genuine_idx = data.train.indices_where(|l| l.user_id == user);
    let impostor_pool = data.train.indices_where(|l| l.user_id != user);
    let cap = ((cfg.augmentation.max_impostor_ratio * genuine_idx.len() as f64).floor() as usize).max(1);
    let impostor_idx = if impostor_pool.len() > cap {
        let mut rng = seed::rng(seed::derive(master, &[dataset, user, "impostor-subsample"]));
        let mut picked: Vec<usize> = sample(&mut rng, impostor_pool.len(), cap).into_iter().map(|i| impostor_pool[i]).collect();
        picked.sort_unstable();
        picked
    } else {
        impostor_pool.clone()
    };
    let genuine = unit_matrix(&data.train.select(&genuine_idx));
    let impostor_real = unit_matrix(&data.train.select(&impostor_idx));
    let genuine_test = unit_matrix(&data.test.select(&data.test.indices_where(|l| l.user_id == user)));
    let impostor_test = unit_matrix(&data.test.select(&data.test.indices_where(|l| l.user_id != user)));

    let models_dir = opts.models_dir.as_ref().map(|d| d.join(dataset));
    if let Some(dir) = &models_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut cells = Vec::new();
    for &variant in &cfg.variants {
        let synthetic = synthesize(cfg, dataset, user, variant, data, &impostor_pool, &genuine, impostor_real.nrows(), models_dir.as_deref());
        for spec in &cfg.classifiers {
            let family = spec.family();
            let cell_seed = cell_seed(master, dataset, user, family, variant);
            let mut cell = CellRecord {
                dataset: dataset.to_string(),
                user: user.to_string(),
                classifier: family,
                variant,
                seed: cell_seed,
                probe_seed: seed::derive(cell_seed, &["probe"]),
                train_genuine: genuine.nrows(),
                train_impostor_real: impostor_real.nrows(),
                train_impostor_synthetic: 0,
                report: None,
                error: None,
            };
            let outcome = synthetic.as_ref().map_err(|e| e.to_string()).and_then(|syn| {
                cell.train_impostor_synthetic = syn.nrows();
                run_cell(cfg, opts, spec, &cell, &genuine, &impostor_real, syn, &genuine_test, &impostor_test, data, models_dir.as_deref())
                    .map_err(|e| e.to_string())
            });
            match outcome {
                Ok(report) => cell.report = report,
                Err(e) => {
                    log::warn!("cell {dataset}/{user}/{family}/{variant} failed: {e}");
                    cell.error = Some(e);
                }
            }
            cells.push(cell);
        }
    }
    Ok(cells)
}

/// Synthetic impostor rows for one user and variant, in the unit cube.
#[allow(clippy::too_many_arguments)]
fn synthesize(
    cfg: &ExperimentConfig,
    dataset: &str,
    user: &str,
    variant: Variant,
    data: &PreparedData,
    impostor_pool: &[usize],
    genuine: &Array2<f64>,
    n_real: usize,
    models_dir: Option<&Path>,
) -> Result<Array2<f64>> {
    let master = cfg.seed()?;
    let width = genuine.ncols();
    match variant {
        Variant::Vanilla => Ok(Array2::zeros((0, width))),
        Variant::Beta => {
            let count = (cfg.augmentation.beta_ratio * n_real as f64).round() as usize;
            if count == 0 {
                return Ok(Array2::zeros((0, width)));
            }
            let params = fit_beta_params(genuine.view())?;
            sample_beta_noise(&params, count, seed::derive(master, &[dataset, user, "beta"]))
        }
        Variant::Ictgan => {
            let count = (cfg.augmentation.ictgan_ratio * n_real as f64).round() as usize;
            if count == 0 {
                return Ok(Array2::zeros((0, width)));
            }
            let pool = data.train.select(impostor_pool);
            let (model, trace) = train_ictgan(&pool, &cfg.gan, seed::derive(master, &[dataset, user, "ictgan"]))?;
            if let Some(dir) = models_dir {
                write_loss_trace(dir.join(format!("{user}__ictgan_loss.csv")), &trace)?;
                if cfg.output.save_gan_models {
                    model.save(dir.join(format!("{user}__ictgan.json")))?;
                }
            }
            let generated = model.generate(count, seed::derive(master, &[dataset, user, "ictgan-sample"]))?;
            let mut rows = generated.rows().clone();
            for (j, col) in generated.schema().iter().enumerate() {
                if !col.is_discrete() {
                    rows.column_mut(j).mapv_inplace(|v| v.clamp(0.0, 1.0));
                }
            }
            Ok(unit_matrix(&generated.with_rows(rows)?))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    spec: &ModelSpec,
    cell: &CellRecord,
    genuine: &Array2<f64>,
    impostor_real: &Array2<f64>,
    synthetic: &Array2<f64>,
    genuine_test: &Array2<f64>,
    impostor_test: &Array2<f64>,
    data: &PreparedData,
    models_dir: Option<&Path>,
) -> Result<Option<EvalReport>> {
    let impostor = concatenate(Axis(0), &[impostor_real.view(), synthetic.view()]).expect("same width");
    let mut model: TrainedAuthModel = train(spec, genuine.view(), impostor.view(), cell.seed)?.with_user(&cell.user);
    model.threshold = cfg.attack.threshold;
    model.normalizer = Some(data.normalizer.clone());
    if let Some(dir) = models_dir {
        model.save(dir.join(model_file_name(&cell.user, cell.classifier, cell.variant)))?;
    }
    if opts.train_only {
        return Ok(None);
    }
    evaluate(
        &model,
        genuine_test.view(),
        impostor_test.view(),
        cfg.attack.threshold,
        cfg.attack.n_probes,
        cell.probe_seed,
    )
    .map(Some)
}

pub fn model_file_name(user: &str, family: Family, variant: Variant) -> String {
    format!("{user}__{}__{variant}.json", family.name().to_lowercase())
}
