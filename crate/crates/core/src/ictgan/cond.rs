//! Conditional vectors over discrete columns, and training-by-sampling of
//! real rows that match a condition.
//!
//! A condition activates one category of one discrete column inside a
//! one-hot vector spanning every discrete category. Without discrete
//! columns the condition is the empty vector.

use ndarray::{Array2, ArrayView2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::modes::ModeNormalizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondBlock {
    /// Column index in the table schema.
    pub column: usize,
    /// Offset of this column's categories inside the condition vector.
    pub cond_offset: usize,
    /// Offset of this column's one-hot block inside an encoded row.
    pub encoded_offset: usize,
    /// Training-row count per category.
    pub counts: Vec<usize>,
}

/// The condition chosen for one row of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CondPick {
    pub block: usize,
    pub category: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondSampler {
    pub blocks: Vec<CondBlock>,
    pub width: usize,
    #[serde(skip)]
    rows_by_category: Vec<Vec<Vec<usize>>>,
}

impl CondSampler {
    /// Category frequencies come from `rows` (raw table values).
    pub fn new(normalizer: &ModeNormalizer, rows: ArrayView2<f64>) -> Self {
        let mut blocks = Vec::new();
        let mut rows_by_category = Vec::new();
        let mut cond_offset = 0;
        for (column, encoded_offset, categories) in normalizer.discrete_offsets() {
            let mut members = vec![Vec::new(); categories];
            for (i, v) in rows.column(column).iter().enumerate() {
                let k = v.round() as usize;
                if k < categories {
                    members[k].push(i);
                }
            }
            blocks.push(CondBlock {
                column,
                cond_offset,
                encoded_offset,
                counts: members.iter().map(Vec::len).collect(),
            });
            rows_by_category.push(members);
            cond_offset += categories;
        }
        CondSampler { blocks, width: cond_offset, rows_by_category }
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0
    }

    /// Training conditions: a column uniformly, then a category with
    /// probability proportional to `ln(count + 1)`.
    pub fn sample_training(&self, n: usize, rng: &mut impl Rng) -> (Array2<f64>, Vec<Option<CondPick>>) {
        self.sample_with(n, rng, |c| if c == 0 { 0.0 } else { (c as f64 + 1.0).ln() })
    }

    /// Generation conditions: a column uniformly, then a category with
    /// probability proportional to its count.
    pub fn sample_generation(&self, n: usize, rng: &mut impl Rng) -> Array2<f64> {
        self.sample_with(n, rng, |c| c as f64).0
    }

    fn sample_with(
        &self,
        n: usize,
        rng: &mut impl Rng,
        weight: impl Fn(usize) -> f64,
    ) -> (Array2<f64>, Vec<Option<CondPick>>) {
        let mut cond = Array2::zeros((n, self.width));
        if self.blocks.is_empty() {
            return (cond, vec![None; n]);
        }
        let dists: Vec<WeightedIndex<f64>> = self
            .blocks
            .iter()
            .map(|b| WeightedIndex::new(b.counts.iter().map(|&c| weight(c))).expect("a category has rows"))
            .collect();
        let picks = (0..n)
            .map(|i| {
                let block = rng.random_range(0..self.blocks.len());
                let category = dists[block].sample(rng);
                cond[[i, self.blocks[block].cond_offset + category]] = 1.0;
                Some(CondPick { block, category })
            })
            .collect();
        (cond, picks)
    }

    /// A real row index for each pick: one matching its category, or a
    /// uniform draw when there is no condition.
    pub fn sample_rows(&self, picks: &[Option<CondPick>], n_rows: usize, rng: &mut impl Rng) -> Vec<usize> {
        picks
            .iter()
            .map(|p| match p {
                Some(p) if !self.rows_by_category.is_empty() => {
                    let members = &self.rows_by_category[p.block][p.category];
                    members[rng.random_range(0..members.len())]
                }
                _ => rng.random_range(0..n_rows),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::ColumnSpec;
    use crate::ictgan::modes::ModeFitConfig;
    use crate::seed;

    fn sampler(counts: &[usize]) -> (CondSampler, Array2<f64>) {
        let cats: Vec<String> = (0..counts.len()).map(|k| format!("c{k}")).collect();
        let schema = vec![ColumnSpec::continuous("x"), ColumnSpec::discrete("d", cats)];
        let mut values = Vec::new();
        for (k, &c) in counts.iter().enumerate() {
            for i in 0..c {
                values.push([i as f64 * 0.1, k as f64]);
            }
        }
        let rows = Array2::from_shape_fn((values.len(), 2), |(i, j)| values[i][j]);
        let n = ModeNormalizer::fit(&schema, rows.view(), &ModeFitConfig::default(), 0).unwrap();
        (CondSampler::new(&n, rows.view()), rows)
    }

    #[test]
    fn no_discrete_columns_gives_empty_condition() {
        let schema = vec![ColumnSpec::continuous("x")];
        let rows = Array2::from_shape_fn((20, 1), |(i, _)| i as f64);
        let n = ModeNormalizer::fit(&schema, rows.view(), &ModeFitConfig::default(), 0).unwrap();
        let s = CondSampler::new(&n, rows.view());
        let (cond, picks) = s.sample_training(5, &mut seed::rng(1));
        assert_eq!(cond.dim(), (5, 0));
        assert!(picks.iter().all(Option::is_none));
    }

    #[test]
    fn one_active_entry_and_matching_rows() {
        let (s, rows) = sampler(&[5, 10, 3, 7]);
        assert_eq!(s.width, 4);
        let mut rng = seed::rng(2);
        let (cond, picks) = s.sample_training(200, &mut rng);
        for r in cond.outer_iter() {
            assert_eq!(r.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(r.sum(), 1.0);
        }
        let idx = s.sample_rows(&picks, rows.nrows(), &mut rng);
        for (p, i) in picks.iter().zip(idx) {
            assert_eq!(rows[[i, 1]] as usize, p.unwrap().category);
        }
    }

    #[test]
    fn empty_category_never_sampled() {
        let (s, _) = sampler(&[6, 0, 4]);
        let mut rng = seed::rng(3);
        let (cond, _) = s.sample_training(2000, &mut rng);
        assert_eq!(cond.column(1).sum(), 0.0);
        assert_eq!(s.sample_generation(2000, &mut rng).column(1).sum(), 0.0);
    }

    #[test]
    fn training_flattens_frequencies() {
        let (s, _) = sampler(&[100, 1]);
        let mut rng = seed::rng(4);
        let n = 20_000;
        let rare_train = s.sample_training(n, &mut rng).0.column(1).sum() / n as f64;
        let rare_gen = s.sample_generation(n, &mut rng).column(1).sum() / n as f64;
        let expect_train = 2f64.ln() / (2f64.ln() + 101f64.ln());
        assert!((rare_train - expect_train).abs() < 0.01, "{rare_train}");
        assert!((rare_gen - 1.0 / 101.0).abs() < 0.005, "{rare_gen}");
    }
}
