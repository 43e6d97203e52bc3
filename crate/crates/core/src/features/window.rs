use serde::{Deserialize, Serialize};

use crate::dataio::{AccelSample, RawRecording};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub frame_s: f64,
    pub overlap: f64,
    /// Accept frame lengths outside 8–12 s.
    pub allow_any_length: bool,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            frame_s: 10.0,
            overlap: 0.5,
            allow_any_length: false,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_s > 0.0) {
            return Err(Error::Validation("frame length must be positive".into()));
        }
        if !self.allow_any_length && !(8.0..=12.0).contains(&self.frame_s) {
            return Err(Error::Validation(format!(
                "frame length {} s outside 8-12 s (set allow_any_length to override)",
                self.frame_s
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::Validation(format!("overlap {} outside [0, 1)", self.overlap)));
        }
        Ok(())
    }
}

/// A contiguous fixed-length slice of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub user_id: String,
    pub session_id: String,
    pub start_t: f64,
    pub length_s: f64,
    pub sample_rate_hz: f64,
    pub samples: Vec<AccelSample>,
}

/// Cut a recording into frames advancing by `frame_s * (1 - overlap)`.
/// The trailing partial frame is dropped.
pub fn window(recording: &RawRecording, config: &WindowConfig) -> Result<Vec<Frame>> {
    config.validate()?;
    let rate = recording.sample_rate_hz;
    let frame_len = (config.frame_s * rate).round() as usize;
    let step = ((config.frame_s * (1.0 - config.overlap) * rate).round() as usize).max(1);
    let n = recording.samples.len();
    if frame_len == 0 || n < frame_len {
        log::warn!(
            "recording {}/{} ({} samples) shorter than one {} s frame",
            recording.user_id,
            recording.session_id,
            n,
            config.frame_s
        );
        return Ok(Vec::new());
    }
    Ok((0..=(n - frame_len) / step)
        .map(|k| {
            let start = k * step;
            let samples = recording.samples[start..start + frame_len].to_vec();
            Frame {
                user_id: recording.user_id.clone(),
                session_id: recording.session_id.clone(),
                start_t: samples[0].t,
                length_s: frame_len as f64 / rate,
                sample_rate_hz: rate,
                samples,
            }
        })
        .collect())
}
