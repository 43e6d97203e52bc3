use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Continuous,
            categories: Vec::new(),
        }
    }

    pub fn discrete(name: impl Into<String>, categories: Vec<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Discrete,
            categories,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.kind == ColumnKind::Discrete
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            ColumnKind::Discrete if self.categories.len() < 2 => Err(Error::Validation(format!(
                "discrete column '{}' needs at least 2 categories",
                self.name
            ))),
            ColumnKind::Continuous if !self.categories.is_empty() => Err(Error::Validation(
                format!("continuous column '{}' cannot list categories", self.name),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Real,
    BetaSynth,
    GanSynth,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Real => "real",
            Origin::BetaSynth => "beta_synth",
            Origin::GanSynth => "gan_synth",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "real" => Some(Origin::Real),
            "beta_synth" => Some(Origin::BetaSynth),
            "gan_synth" => Some(Origin::GanSynth),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowLabel {
    pub user_id: String,
    pub origin: Origin,
}

/// Rows of mixed continuous/discrete features with per-row user labels.
/// Discrete cells store the category index as a float.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    schema: Vec<ColumnSpec>,
    rows: Array2<f64>,
    labels: Vec<RowLabel>,
}

impl FeatureTable {
    pub fn new(schema: Vec<ColumnSpec>, rows: Array2<f64>, labels: Vec<RowLabel>) -> Result<Self> {
        for col in &schema {
            col.validate()?;
        }
        if rows.ncols() != schema.len() {
            return Err(Error::Dimension {
                expected: schema.len(),
                got: rows.ncols(),
            });
        }
        if rows.nrows() != labels.len() {
            return Err(Error::Validation(format!(
                "{} rows but {} labels",
                rows.nrows(),
                labels.len()
            )));
        }
        for (i, row) in rows.outer_iter().enumerate() {
            for (j, (&v, col)) in row.iter().zip(&schema).enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("row {i}, column {j}")));
                }
                if col.is_discrete() && !valid_category(v, col.categories.len()) {
                    return Err(Error::Validation(format!(
                        "row {i}: '{}' holds invalid category index {v}",
                        col.name
                    )));
                }
            }
        }
        Ok(FeatureTable {
            schema,
            rows,
            labels,
        })
    }

    pub fn empty(schema: Vec<ColumnSpec>) -> Result<Self> {
        let width = schema.len();
        Self::new(schema, Array2::zeros((0, width)), Vec::new())
    }

    pub fn schema(&self) -> &[ColumnSpec] {
        &self.schema
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn labels(&self) -> &[RowLabel] {
        &self.labels
    }

    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn width(&self) -> usize {
        self.schema.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows() == 0
    }

    /// Distinct user ids in order of first appearance.
    pub fn user_ids(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.labels
            .iter()
            .filter(|l| seen.insert(l.user_id.as_str()))
            .map(|l| l.user_id.clone())
            .collect()
    }

    pub fn indices_where(&self, mut pred: impl FnMut(&RowLabel) -> bool) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| pred(l))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn select(&self, indices: &[usize]) -> FeatureTable {
        FeatureTable {
            schema: self.schema.clone(),
            rows: self.rows.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    /// Replace the row matrix, keeping schema and labels. Used by
    /// transformations such as normalization.
    pub fn with_rows(&self, rows: Array2<f64>) -> Result<FeatureTable> {
        Self::new(self.schema.clone(), rows, self.labels.clone())
    }

    pub fn concat(&self, other: &FeatureTable) -> Result<FeatureTable> {
        if self.schema != other.schema {
            return Err(Error::Validation("cannot concatenate tables with different schemas".into()));
        }
        let rows = ndarray::concatenate(Axis(0), &[self.rows.view(), other.rows.view()])
            .expect("widths match by schema equality");
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        Ok(FeatureTable {
            schema: self.schema.clone(),
            rows,
            labels,
        })
    }

    pub fn discrete_columns(&self) -> Vec<usize> {
        (0..self.width()).filter(|&j| self.schema[j].is_discrete()).collect()
    }
}

fn valid_category(v: f64, n: usize) -> bool {
    v >= 0.0 && v.fract() == 0.0 && (v as usize) < n
}

/// Schema with every non-id column continuous, read from a file header.
pub fn infer_continuous_schema(path: impl AsRef<Path>, id_column: &str) -> Result<Vec<ColumnSpec>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    Ok(reader
        .headers()?
        .iter()
        .filter(|h| *h != id_column && *h != "origin")
        .map(ColumnSpec::continuous)
        .collect())
}

/// Load a delimited feature table. Columns are matched to the schema by
/// header name; `id_column` supplies user ids and an optional `origin`
/// column supplies row origins (default real).
pub fn load_feature_table(
    path: impl AsRef<Path>,
    schema: &[ColumnSpec],
    id_column: &str,
) -> Result<FeatureTable> {
    let path = path.as_ref();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let id_idx = headers
        .iter()
        .position(|h| h == id_column)
        .ok_or_else(|| parse_err(1, format!("id column '{id_column}' not in header")))?;
    let origin_idx = headers.iter().position(|h| h == "origin");
    let col_idx = schema
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == c.name)
                .ok_or_else(|| parse_err(1, format!("column '{}' not in header", c.name)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record?;
        if record.len() != headers.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        for (col, &c) in schema.iter().zip(&col_idx) {
            let cell = &record[c];
            let v = match col.kind {
                ColumnKind::Continuous => {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| parse_err(line, format!("'{cell}' is not a number ({})", col.name)))?;
                    if !v.is_finite() {
                        return Err(parse_err(line, format!("non-finite value in '{}'", col.name)));
                    }
                    v
                }
                ColumnKind::Discrete => col
                    .categories
                    .iter()
                    .position(|c| c == cell)
                    .ok_or_else(|| {
                        parse_err(line, format!("unknown category '{cell}' for '{}'", col.name))
                    })? as f64,
            };
            values.push(v);
        }
        let origin = match origin_idx {
            Some(o) => Origin::parse(&record[o])
                .ok_or_else(|| parse_err(line, format!("unknown origin '{}'", &record[o])))?,
            None => Origin::Real,
        };
        labels.push(RowLabel {
            user_id: record[id_idx].to_string(),
            origin,
        });
    }
    let rows = Array2::from_shape_vec((labels.len(), schema.len()), values)
        .expect("row-major buffer sized by construction");
    FeatureTable::new(schema.to_vec(), rows, labels)
}

/// Write a table as `user,origin,<columns...>` with category labels for
/// discrete columns.
pub fn write_feature_table(path: impl AsRef<Path>, table: &FeatureTable) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let mut write = || -> std::io::Result<()> {
        write!(out, "user,origin")?;
        for c in table.schema() {
            write!(out, ",{}", c.name)?;
        }
        writeln!(out)?;
        for (row, label) in table.rows().outer_iter().zip(table.labels()) {
            write!(out, "{},{}", label.user_id, label.origin.as_str())?;
            for (&v, col) in row.iter().zip(table.schema()) {
                if col.is_discrete() {
                    write!(out, ",{}", col.categories[v as usize])?;
                } else {
                    write!(out, ",{v}")?;
                }
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
