//! Per-user accelerometer gait authentication with zero-effort and
//! random-vector attack evaluation, and two impostor-augmentation
//! strategies: beta-noise generation and a conditional tabular GAN.

pub mod attackeval;
pub mod betagen;
pub mod classifiers;
pub mod dataio;
pub mod error;
pub mod features;
pub mod harness;
pub mod ictgan;
pub mod nn;
pub mod seed;

pub use error::{Error, Result};
