use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataio::{ColumnKind, FeatureTable};
use crate::error::{Error, Result};

/// Per-feature min-max scaling onto [0, 1]. Out-of-range values are
/// clamped; a degenerate feature (max == min) maps to 0.5. Discrete
/// columns pass through unchanged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MinMaxNormalizer {
    ranges: Vec<(f64, f64)>,
    kinds: Vec<ColumnKind>,
    fitted_rows: usize,
}

impl MinMaxNormalizer {
    pub fn fit(table: &FeatureTable) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Empty("cannot fit normalizer on an empty table".into()));
        }
        let ranges = table
            .rows()
            .columns()
            .into_iter()
            .map(|c| {
                c.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
            })
            .collect();
        Ok(MinMaxNormalizer {
            ranges,
            kinds: table.schema().iter().map(|c| c.kind).collect(),
            fitted_rows: table.n_rows(),
        })
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted_rows > 0
    }

    pub fn fitted_rows(&self) -> usize {
        self.fitted_rows
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn scale_value(&self, column: usize, v: f64) -> f64 {
        let (lo, hi) = self.ranges[column];
        if hi > lo {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }

    pub fn apply(&self, table: &FeatureTable) -> Result<FeatureTable> {
        if !self.is_fitted() {
            return Err(Error::NotFitted("min-max normalizer"));
        }
        if table.width() != self.ranges.len() {
            return Err(Error::Dimension {
                expected: self.ranges.len(),
                got: table.width(),
            });
        }
        table.with_rows(self.apply_matrix(table.rows().view()))
    }

    fn apply_matrix(&self, rows: ArrayView2<f64>) -> Array2<f64> {
        let mut out = rows.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            if self.kinds[j] == ColumnKind::Continuous {
                col.mapv_inplace(|v| self.scale_value(j, v));
            }
        }
        out
    }

    pub fn apply_row(&self, row: ArrayView1<f64>) -> Result<Vec<f64>> {
        if !self.is_fitted() {
            return Err(Error::NotFitted("min-max normalizer"));
        }
        if row.len() != self.ranges.len() {
            return Err(Error::Dimension {
                expected: self.ranges.len(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &v)| match self.kinds[j] {
                ColumnKind::Continuous => self.scale_value(j, v),
                ColumnKind::Discrete => v,
            })
            .collect())
    }
}

/// Classifier-ready matrix in [0, 1]^n: continuous columns as stored
/// (already normalized), discrete category `k` of `K` mapped to `k/(K-1)`.
pub fn unit_matrix(table: &FeatureTable) -> Array2<f64> {
    let mut out = table.rows().clone();
    for (j, col) in table.schema().iter().enumerate() {
        if col.is_discrete() {
            let denom = (col.categories.len() - 1) as f64;
            out.column_mut(j).mapv_inplace(|v| v / denom);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{ColumnSpec, Origin, RowLabel};
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn table(rows: Array2<f64>) -> FeatureTable {
        let schema = (0..rows.ncols()).map(|j| ColumnSpec::continuous(format!("c{j}"))).collect();
        let labels = (0..rows.nrows())
            .map(|_| RowLabel { user_id: "u".into(), origin: Origin::Real })
            .collect();
        FeatureTable::new(schema, rows, labels).unwrap()
    }

    #[test]
    fn maps_train_extremes_and_clamps() {
        let train = table(array![[2.0, 5.0], [10.0, 5.0], [6.0, 5.0]]);
        let norm = MinMaxNormalizer::fit(&train).unwrap();
        let out = norm.apply(&train).unwrap();
        assert_eq!(out.rows().column(0).to_vec(), vec![0.0, 1.0, 0.5]);
        assert_eq!(out.rows().column(1).to_vec(), vec![0.5, 0.5, 0.5]);
        let test = table(array![[12.0, -3.0], [-1.0, 9.0]]);
        let out = norm.apply(&test).unwrap();
        assert_eq!(out.rows(), &array![[1.0, 0.5], [0.0, 0.5]]);
    }

    #[test]
    fn unfitted_and_width_errors() {
        let t = table(array![[1.0]]);
        assert!(matches!(MinMaxNormalizer::default().apply(&t), Err(Error::NotFitted(_))));
        let norm = MinMaxNormalizer::fit(&table(array![[1.0, 2.0]])).unwrap();
        assert!(matches!(norm.apply(&t), Err(Error::Dimension { .. })));
    }

    #[test]
    fn discrete_columns_pass_through_then_unit_scale() {
        let schema = vec![
            ColumnSpec::continuous("x"),
            ColumnSpec::discrete("d", vec!["a".into(), "b".into(), "c".into()]),
        ];
        let labels = vec![RowLabel { user_id: "u".into(), origin: Origin::Real }; 2];
        let t = FeatureTable::new(schema, array![[1.0, 2.0], [3.0, 1.0]], labels).unwrap();
        let n = MinMaxNormalizer::fit(&t).unwrap().apply(&t).unwrap();
        assert_eq!(n.rows(), &array![[0.0, 2.0], [1.0, 1.0]]);
        assert_eq!(unit_matrix(&n), array![[0.0, 1.0], [1.0, 0.5]]);
    }

    proptest! {
        #[test]
        fn outputs_in_unit_cube_and_extremes_attained(
            data in proptest::collection::vec(-1e3f64..1e3, 6..60),
            probe in proptest::collection::vec(-1e4f64..1e4, 3),
        ) {
            let n = data.len() / 3;
            let rows = Array2::from_shape_vec((n, 3), data[..n * 3].to_vec()).unwrap();
            let t = table(rows);
            let norm = MinMaxNormalizer::fit(&t).unwrap();
            let out = norm.apply(&t).unwrap();
            prop_assert!(out.rows().iter().all(|v| (0.0..=1.0).contains(v)));
            for (j, col) in out.rows().columns().into_iter().enumerate() {
                let (lo, hi) = norm.ranges()[j];
                if hi > lo {
                    prop_assert!(col.iter().any(|&v| v == 0.0));
                    prop_assert!(col.iter().any(|&v| v == 1.0));
                }
            }
            let p = norm.apply_row(ndarray::ArrayView1::from(&probe)).unwrap();
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
