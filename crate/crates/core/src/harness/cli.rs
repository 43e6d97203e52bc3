use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::ExperimentConfig;
use super::report::{emit_summary, write_run};
use super::run::{run_experiment, RunOptions, RunRecord};
use crate::attackeval::random_vector_attack;
use crate::classifiers::TrainedAuthModel;
use crate::dataio::{generate_walkers, load_raw_csv, write_feature_table, write_raw_csv, RawFormat};
use crate::error::{Error, Result};
use crate::features::featurize_recordings;
use crate::seed;

#[derive(Debug, Parser)]
#[command(name = "gaitauth", version, about = "Gait authentication training and attack evaluation")]
pub struct Cli {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Random-vector probes per model; overrides the config.
    #[arg(long, global = true)]
    pub probes: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic walker recordings.
    SynthData {
        #[arg(long, default_value_t = 10)]
        users: usize,
        #[arg(long, default_value_t = 120.0)]
        duration: f64,
        #[arg(long, default_value_t = 50.0)]
        rate: f64,
        /// Defaults to `<out>/data/walkers.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Window and featurize a raw recording file.
    Featurize {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to `<out>/data/features.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train and save models without attacking them.
    Train {
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        user: Option<String>,
    },
    /// Random-vector attack on a saved model; prints one result row.
    Attack {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Run the full dataset x classifier x variant matrix.
    Run,
    /// Rebuild summary files from a saved run record.
    Report {
        /// Defaults to `<out>/reports/run.json`.
        #[arg(long)]
        record: Option<PathBuf>,
    },
}

/// Parse arguments and run; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn optional_config(cli: &Cli) -> Result<Option<ExperimentConfig>> {
    let Some(path) = &cli.config else { return Ok(None) };
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(p) = cli.probes {
        cfg.attack.n_probes = p;
    }
    Ok(Some(cfg))
}

fn required_config(cli: &Cli) -> Result<ExperimentConfig> {
    let cfg = optional_config(cli)?.ok_or_else(|| Error::Config("this command needs --config".into()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.map(|c| c.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

fn report_failures(record: &RunRecord) -> i32 {
    let mut failed = false;
    for f in &record.failures {
        eprintln!("dataset failed: {} ({}): {}", f.dataset, f.stage, f.error);
        failed = true;
    }
    for c in record.failed_cells() {
        eprintln!(
            "cell failed: {}/{}/{}/{}: {}",
            c.dataset,
            c.user,
            c.classifier,
            c.variant,
            c.error.as_deref().unwrap_or("")
        );
        failed = true;
    }
    i32::from(failed)
}

fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::SynthData { users, duration, rate, output } => {
            let cfg = optional_config(cli)?;
            let master = match cli.seed {
                Some(s) => s,
                None => cfg.as_ref().ok_or_else(|| Error::Config("no seed given (pass --seed)".into()))?.seed()?,
            };
            let path = output.clone().unwrap_or_else(|| out_dir(cli, cfg.as_ref()).join("data").join("walkers.csv"));
            let recs = generate_walkers(*users, *duration, *rate, master)?;
            ensure_parent(&path)?;
            write_raw_csv(&path, &recs)?;
            println!("wrote {} recordings to {}", recs.len(), path.display());
            Ok(0)
        }
        Command::Featurize { input, output } => {
            let cfg = optional_config(cli)?;
            let features = cfg.as_ref().map(|c| c.features.clone()).unwrap_or_default();
            features.window.validate()?;
            let recs = load_raw_csv(input, &RawFormat::default())?;
            let table = featurize_recordings(&recs, &features.window, &features.bank)?;
            let path = output.clone().unwrap_or_else(|| out_dir(cli, cfg.as_ref()).join("data").join("features.csv"));
            ensure_parent(&path)?;
            write_feature_table(&path, &table)?;
            println!("wrote {} rows x {} features to {}", table.n_rows(), table.width(), path.display());
            Ok(0)
        }
        Command::Train { dataset, user } => {
            let cfg = required_config(cli)?;
            let opts = RunOptions {
                models_dir: Some(cfg.out_dir.join("models")),
                train_only: true,
                only_dataset: dataset.clone(),
                only_user: user.clone(),
            };
            let record = run_experiment(&cfg, &opts)?;
            println!("trained {} models under {}", record.cells.iter().filter(|c| c.error.is_none()).count(), cfg.out_dir.join("models").display());
            Ok(report_failures(&record))
        }
        Command::Attack { model, threshold } => {
            let cfg = optional_config(cli)?;
            let m = TrainedAuthModel::load(model)?;
            let n = cli.probes.or(cfg.as_ref().map(|c| c.attack.n_probes)).unwrap_or(1_000_000);
            let t = threshold.unwrap_or(m.threshold);
            let probe_seed = cli.seed.unwrap_or_else(|| seed::derive(m.seed, &["probe"]));
            let ar = random_vector_attack(&m, n, m.feature_dim, t, probe_seed)?;
            println!("user,classifier,threshold,ar,ar_ci_lo,ar_ci_hi,accepted,n_probes,probe_seed");
            println!(
                "{},{},{},{},{},{},{},{},{}",
                m.user_id, m.family, t, ar.estimate, ar.ci95.0, ar.ci95.1, ar.accepted, ar.n_probes, probe_seed
            );
            Ok(0)
        }
        Command::Run => {
            let cfg = required_config(cli)?;
            let opts = RunOptions { models_dir: Some(cfg.out_dir.join("models")), ..Default::default() };
            let record = run_experiment(&cfg, &opts)?;
            write_run(&record, &cfg.out_dir)?;
            let summary = cfg.out_dir.join("summary").join("summary.txt");
            if let Ok(text) = std::fs::read_to_string(&summary) {
                print!("{text}");
            }
            Ok(report_failures(&record))
        }
        Command::Report { record } => {
            let cfg = optional_config(cli)?;
            let out = out_dir(cli, cfg.as_ref());
            let path = record.clone().unwrap_or_else(|| out.join("reports").join("run.json"));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let rec: RunRecord = serde_json::from_str(&text)?;
            emit_summary(&rec, &out.join("summary"))?;
            print!("{}", std::fs::read_to_string(out.join("summary").join("summary.txt")).map_err(|e| Error::io(&path, e))?);
            Ok(0)
        }
    }
}
