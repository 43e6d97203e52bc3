//! Loader for the UCI "Human Activity Recognition Using Smartphones"
//! archive in its shipped precomputed-feature layout.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::table::{ColumnSpec, FeatureTable, Origin, RowLabel};
use crate::error::{Error, Result};

/// Load `{train,test}/X_*.txt`, `subject_*.txt` and `y_*.txt` from an
/// extracted archive. The activity label becomes a discrete feature column.
pub fn load_uci_har(dir: impl AsRef<Path>) -> Result<FeatureTable> {
    let dir = dir.as_ref();
    let activities = match fs::read_to_string(dir.join("activity_labels.txt")) {
        Ok(s) => s
            .lines()
            .filter_map(|l| l.split_whitespace().nth(1).map(str::to_string))
            .collect::<Vec<_>>(),
        Err(_) => (1..=6).map(|i| i.to_string()).collect(),
    };

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for part in ["train", "test"] {
        let x_path = dir.join(part).join(format!("X_{part}.txt"));
        let s_path = dir.join(part).join(format!("subject_{part}.txt"));
        let y_path = dir.join(part).join(format!("y_{part}.txt"));
        let x = fs::read_to_string(&x_path).map_err(|e| Error::io(&x_path, e))?;
        let s = fs::read_to_string(&s_path).map_err(|e| Error::io(&s_path, e))?;
        let y = fs::read_to_string(&y_path).map_err(|e| Error::io(&y_path, e))?;
        for (k, ((xl, sl), yl)) in x.lines().zip(s.lines()).zip(y.lines()).enumerate() {
            let parse = |tok: &str, path: &Path| {
                tok.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: k + 1,
                    message: format!("'{tok}' is not a number"),
                })
            };
            let row = xl
                .split_whitespace()
                .map(|t| parse(t, &x_path))
                .collect::<Result<Vec<_>>>()?;
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::Parse {
                        path: x_path.clone(),
                        line: k + 1,
                        message: format!("expected {w} features, found {}", row.len()),
                    })
                }
                _ => {}
            }
            let activity = parse(yl.trim(), &y_path)? as usize;
            if activity == 0 || activity > activities.len() {
                return Err(Error::Parse {
                    path: y_path.clone(),
                    line: k + 1,
                    message: format!("activity {activity} out of range"),
                });
            }
            values.extend(row);
            values.push((activity - 1) as f64);
            labels.push(RowLabel {
                user_id: format!("subject{:02}", sl.trim().parse::<u32>().unwrap_or(0)),
                origin: Origin::Real,
            });
        }
    }
    let width = width.unwrap_or(0);
    let mut schema: Vec<ColumnSpec> =
        (0..width).map(|j| ColumnSpec::continuous(format!("f{j:03}"))).collect();
    schema.push(ColumnSpec::discrete("activity", activities));
    let rows = Array2::from_shape_vec((labels.len(), width + 1), values)
        .map_err(|e| Error::Validation(e.to_string()))?;
    FeatureTable::new(schema, rows, labels)
}
