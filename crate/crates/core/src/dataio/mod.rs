//! Dataset ingestion: raw accelerometer recordings, precomputed feature
//! tables, synthetic walkers and per-user train/test splitting.

mod har;
mod recording;
mod split;
mod table;
mod walker;

pub use har::load_uci_har;
pub use recording::{load_raw_csv, write_raw_csv, AccelSample, RawFormat, RawRecording};
pub use split::split_per_user;
pub use table::{
    infer_continuous_schema, load_feature_table, write_feature_table, ColumnKind, ColumnSpec,
    FeatureTable, Origin, RowLabel,
};
pub use walker::{generate_walkers, WalkerParams};
