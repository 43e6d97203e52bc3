use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Variant;
use super::run::{CellRecord, RunRecord};
use crate::classifiers::Family;
use crate::error::{Error, Result};

pub const CELLS_HEADER: &str = "dataset,user,classifier,variant,status,threshold,fa,tr,fr,ta,far,frr,hter,eer,eer_threshold,ar,ar_ci_lo,ar_ci_hi,n_probes,train_genuine,train_impostor_real,train_impostor_synthetic,seed,probe_seed,error";

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One delimited row per cell.
pub fn cells_csv(record: &RunRecord) -> String {
    let mut out = String::from(CELLS_HEADER);
    out.push('\n');
    for c in &record.cells {
        let head = format!("{},{},{},{}", csv_field(&c.dataset), csv_field(&c.user), c.classifier, c.variant);
        let tail = format!(
            "{},{},{},{},{},{}",
            c.train_genuine,
            c.train_impostor_real,
            c.train_impostor_synthetic,
            c.seed,
            c.probe_seed,
            csv_field(c.error.as_deref().unwrap_or(""))
        );
        let body = match (&c.report, &c.error) {
            (Some(r), None) => format!(
                "ok,{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.threshold, r.counts.fa, r.counts.tr, r.counts.fr, r.counts.ta, r.far, r.frr, r.hter, r.eer,
                r.eer_threshold, r.ar_estimate, r.ar_ci95.0, r.ar_ci95.1, r.n_probes
            ),
            (None, None) => format!("trained{}", ",".repeat(14)),
            _ => format!("failed{}", ",".repeat(14)),
        };
        let _ = writeln!(out, "{head},{body},{tail}");
    }
    out
}

fn roc_csv(cell: &CellRecord) -> Option<String> {
    let r = cell.report.as_ref()?;
    let mut out = String::from("threshold,far,frr\n");
    for p in &r.roc {
        let _ = writeln!(out, "{},{},{}", p.threshold, p.far, p.frr);
    }
    Some(out)
}

/// Write `reports/cells.csv`, `reports/run.json`, `reports/timing.json`,
/// one ROC file per evaluated cell under `roc/`, and the summary files.
/// Everything except `timing.json` is a pure function of the record.
pub fn write_run(record: &RunRecord, out_dir: &Path) -> Result<()> {
    let reports = out_dir.join("reports");
    write(&reports.join("cells.csv"), &cells_csv(record))?;
    let mut json = serde_json::to_string_pretty(record)?;
    json.push('\n');
    write(&reports.join("run.json"), &json)?;
    write(
        &reports.join("timing.json"),
        &format!("{{\n  \"wall_clock_s\": {}\n}}\n", record.wall_clock_s),
    )?;
    for cell in &record.cells {
        if let Some(text) = roc_csv(cell) {
            let name = format!("{}__{}__{}.csv", cell.user, cell.classifier.name().to_lowercase(), cell.variant);
            write(&out_dir.join("roc").join(&cell.dataset).join(name), &text)?;
        }
    }
    if record.cells.iter().any(CellRecord::succeeded) {
        emit_summary(record, &out_dir.join("summary"))?;
    }
    Ok(())
}

/// Means over users for one dataset; `None` where no cell succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dataset: String,
    pub classifiers: Vec<Family>,
    pub variants: Vec<Variant>,
    /// `ar[classifier][variant]`.
    pub ar: Vec<Vec<Option<f64>>>,
    pub hter: Vec<Vec<Option<f64>>>,
    pub far: Vec<Vec<Option<f64>>>,
    pub frr: Vec<Vec<Option<f64>>>,
    pub eer: Vec<Vec<Option<f64>>>,
    pub users: usize,
    pub failed_cells: usize,
}

impl DatasetSummary {
    pub fn ar_of(&self, family: Family, variant: Variant) -> Option<f64> {
        self.lookup(&self.ar, family, variant)
    }

    pub fn hter_of(&self, family: Family, variant: Variant) -> Option<f64> {
        self.lookup(&self.hter, family, variant)
    }

    fn lookup(&self, grid: &[Vec<Option<f64>>], family: Family, variant: Variant) -> Option<f64> {
        let i = self.classifiers.iter().position(|&f| f == family)?;
        let j = self.variants.iter().position(|&v| v == variant)?;
        grid[i][j]
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Aggregate successful cells by (dataset, classifier, variant) with the
/// arithmetic mean over users.
pub fn summarize(record: &RunRecord) -> Result<Vec<DatasetSummary>> {
    if !record.cells.iter().any(CellRecord::succeeded) {
        return Err(Error::Empty("run record has no successful cells".into()));
    }
    let mut datasets: Vec<&str> = Vec::new();
    for c in &record.cells {
        if !datasets.contains(&c.dataset.as_str()) {
            datasets.push(&c.dataset);
        }
    }
    Ok(datasets
        .into_iter()
        .map(|ds| {
            let cells: Vec<&CellRecord> = record.cells.iter().filter(|c| c.dataset == ds).collect();
            let grid = |metric: fn(&crate::attackeval::EvalReport) -> f64| -> Vec<Vec<Option<f64>>> {
                record
                    .classifiers
                    .iter()
                    .map(|&f| {
                        record
                            .variants
                            .iter()
                            .map(|&v| {
                                let vals: Vec<f64> = cells
                                    .iter()
                                    .filter(|c| c.classifier == f && c.variant == v && c.succeeded())
                                    .map(|c| metric(c.report.as_ref().expect("succeeded")))
                                    .collect();
                                mean(&vals)
                            })
                            .collect()
                    })
                    .collect()
            };
            let mut users: Vec<&str> = cells.iter().map(|c| c.user.as_str()).collect();
            users.sort_unstable();
            users.dedup();
            DatasetSummary {
                dataset: ds.to_string(),
                classifiers: record.classifiers.clone(),
                variants: record.variants.clone(),
                ar: grid(|r| r.ar_estimate),
                hter: grid(|r| r.hter),
                far: grid(|r| r.far),
                frr: grid(|r| r.frr),
                eer: grid(|r| r.eer),
                users: users.len(),
                failed_cells: cells.iter().filter(|c| c.error.is_some()).count(),
            }
        })
        .collect())
}

fn grid_csv(s: &DatasetSummary, grid: &[Vec<Option<f64>>]) -> String {
    let mut out = String::from("classifier");
    for v in &s.variants {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
    for (f, row) in s.classifiers.iter().zip(grid) {
        out.push_str(f.name());
        for v in row {
            match v {
                Some(x) => {
                    let _ = write!(out, ",{x}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:6.2}%", 100.0 * x)).unwrap_or_else(|| "    n/a".into())
}

/// Per-dataset AR and HTER grids (rows classifiers, columns variants) and
/// a plain-text summary of means over users.
pub fn emit_summary(record: &RunRecord, dir: &Path) -> Result<Vec<DatasetSummary>> {
    let summaries = summarize(record)?;
    let mut text = String::new();
    let _ = writeln!(text, "Run summary (seed {}, config {})", record.seed, &record.config_hash[..12.min(record.config_hash.len())]);
    let _ = writeln!(text, "All values are arithmetic means over users.");
    for s in &summaries {
        write(&dir.join(format!("{}_ar_grid.csv", s.dataset)), &grid_csv(s, &s.ar))?;
        write(&dir.join(format!("{}_hter_grid.csv", s.dataset)), &grid_csv(s, &s.hter))?;
        write(&dir.join(format!("{}_eer_grid.csv", s.dataset)), &grid_csv(s, &s.eer))?;
        let _ = writeln!(text, "\nDataset {} ({} users, {} failed cells)", s.dataset, s.users, s.failed_cells);
        for (title, grid) in [("Acceptance region", &s.ar), ("HTER at threshold", &s.hter), ("Equal error rate", &s.eer)] {
            let _ = writeln!(text, "\n  {title}");
            let _ = write!(text, "  {:<8}", "");
            for v in &s.variants {
                let _ = write!(text, " {:>8}", v.name());
            }
            text.push('\n');
            for (f, row) in s.classifiers.iter().zip(grid.iter()) {
                let _ = write!(text, "  {:<8}", f.name());
                for v in row {
                    let _ = write!(text, " {:>8}", pct(*v));
                }
                text.push('\n');
            }
        }
    }
    write(&dir.join("summary.txt"), &text)?;
    let mut json = serde_json::to_string_pretty(&summaries)?;
    json.push('\n');
    write(&dir.join("summary.json"), &json)?;
    Ok(summaries)
}
