//! Frame segmentation, the statistical/spectral feature bank, and min-max
//! normalization onto the unit cube.

mod bank;
mod normalize;
mod window;

pub use bank::{extract_features, featurize_recordings, Channel, FeatureBank, Stat};
pub use normalize::{unit_matrix, MinMaxNormalizer};
pub use window::{window, Frame, WindowConfig};
