use rand::seq::SliceRandom;

use super::table::FeatureTable;
use crate::error::{Error, Result};
use crate::seed;

/// Stratified per-user random split. Each user keeps at least one row on
/// each side; within each output, rows keep their input order.
pub fn split_per_user(
    table: &FeatureTable,
    train_fraction: f64,
    seed: u64,
) -> Result<(FeatureTable, FeatureTable)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let users = table.user_ids();
    let short: Vec<&str> = users
        .iter()
        .filter(|u| table.labels().iter().filter(|l| &l.user_id == *u).count() < 2)
        .map(String::as_str)
        .collect();
    if !short.is_empty() {
        return Err(Error::Validation(format!(
            "users with fewer than 2 rows cannot be split: {}",
            short.join(", ")
        )));
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for user in &users {
        let mut idx = table.indices_where(|l| &l.user_id == user);
        let n = idx.len();
        let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
        idx.shuffle(&mut seed::rng(seed::derive(seed, &["split", user])));
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((table.select(&train), table.select(&test)))
}
