use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub t: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

/// A timestamped triaxial accelerometer series for one user and session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecording {
    pub user_id: String,
    pub session_id: String,
    pub sample_rate_hz: f64,
    pub samples: Vec<AccelSample>,
}

impl RawRecording {
    /// Build a recording, checking timestamp order and the declared rate
    /// against the median inter-sample gap (10% tolerance).
    pub fn new(
        user_id: impl Into<String>,
        session_id: impl Into<String>,
        sample_rate_hz: f64,
        samples: Vec<AccelSample>,
    ) -> Result<Self> {
        let recording = RawRecording {
            user_id: user_id.into(),
            session_id: session_id.into(),
            sample_rate_hz,
            samples,
        };
        recording.validate()?;
        Ok(recording)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::Validation(format!(
                "user {} session {}: sample rate must be positive, got {}",
                self.user_id, self.session_id, self.sample_rate_hz
            )));
        }
        for (k, pair) in self.samples.windows(2).enumerate() {
            if !(pair[1].t > pair[0].t) {
                return Err(Error::Validation(format!(
                    "user {} session {}: timestamps not strictly increasing at sample {}",
                    self.user_id,
                    self.session_id,
                    k + 1
                )));
            }
        }
        for s in &self.samples {
            if !(s.t.is_finite() && s.ax.is_finite() && s.ay.is_finite() && s.az.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "recording {}/{}",
                    self.user_id, self.session_id
                )));
            }
        }
        if let Some(gap) = median_gap(&self.samples) {
            let declared = 1.0 / self.sample_rate_hz;
            if ((gap - declared) / declared).abs() > 0.10 {
                return Err(Error::Validation(format!(
                    "user {} session {}: declared rate {} Hz disagrees with median gap {:.6} s",
                    self.user_id, self.session_id, self.sample_rate_hz, gap
                )));
            }
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t + 1.0 / self.sample_rate_hz,
            _ => 0.0,
        }
    }
}

fn median_gap(samples: &[AccelSample]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let mut gaps: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
    gaps.sort_by(f64::total_cmp);
    let m = gaps.len();
    Some(if m % 2 == 1 {
        gaps[m / 2]
    } else {
        0.5 * (gaps[m / 2 - 1] + gaps[m / 2])
    })
}

/// Column mapping for delimited recording files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawFormat {
    pub delimiter: char,
    pub user: String,
    /// Absent column means every row belongs to one session.
    pub session: Option<String>,
    pub t: String,
    pub ax: String,
    pub ay: String,
    pub az: String,
    /// Multiplier converting the time column to seconds (0.001 for ms).
    pub time_scale: f64,
    /// Declared sample rate; inferred from the median gap when absent.
    pub sample_rate_hz: Option<f64>,
}

impl Default for RawFormat {
    fn default() -> Self {
        RawFormat {
            delimiter: ',',
            user: "user".into(),
            session: Some("session".into()),
            t: "t".into(),
            ax: "ax".into(),
            ay: "ay".into(),
            az: "az".into(),
            time_scale: 1.0,
            sample_rate_hz: None,
        }
    }
}

/// Load a delimited recording file into one recording per (user, session),
/// in order of first appearance.
pub fn load_raw_csv(path: impl AsRef<Path>, format: &RawFormat) -> Result<Vec<RawRecording>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter as u8)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(e.into()),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        log::warn!("{}: empty recording file", path.display());
        return Ok(Vec::new());
    }
    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("column '{name}' not found in header"),
        })
    };
    let user_col = find(&format.user)?;
    let session_col = format.session.as_deref().map(find).transpose()?;
    let cols = [find(&format.t)?, find(&format.ax)?, find(&format.ay)?, find(&format.az)?];

    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: HashMap<(String, String), Vec<AccelSample>> = HashMap::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut values = [0.0; 4];
        for (v, &c) in values.iter_mut().zip(&cols) {
            *v = record[c].parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("'{}' is not a number", &record[c]),
            })?;
        }
        let key = (
            record[user_col].to_string(),
            session_col.map_or_else(|| "0".to_string(), |c| record[c].to_string()),
        );
        let sample = AccelSample {
            t: values[0] * format.time_scale,
            ax: values[1],
            ay: values[2],
            az: values[3],
        };
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(sample);
    }
    if order.is_empty() {
        log::warn!("{}: recording file has no data rows", path.display());
    }

    let mut out = Vec::with_capacity(order.len());
    for key in order {
        let samples = groups.remove(&key).unwrap_or_default();
        let rate = match format.sample_rate_hz {
            Some(r) => r,
            None => match median_gap(&samples) {
                Some(g) if g > 0.0 => 1.0 / g,
                _ => {
                    return Err(Error::Validation(format!(
                        "user {} session {}: cannot infer sample rate",
                        key.0, key.1
                    )))
                }
            },
        };
        out.push(RawRecording::new(key.0, key.1, rate, samples)?);
    }
    Ok(out)
}

/// Write recordings as `user,session,t,ax,ay,az`.
pub fn write_raw_csv(path: impl AsRef<Path>, recordings: &[RawRecording]) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let mut write = || -> std::io::Result<()> {
        writeln!(file, "user,session,t,ax,ay,az")?;
        for r in recordings {
            for s in &r.samples {
                writeln!(
                    file,
                    "{},{},{},{},{},{}",
                    r.user_id, r.session_id, s.t, s.ax, s.ay, s.az
                )?;
            }
        }
        file.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
