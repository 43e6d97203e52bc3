//! Pac critic: `pac` rows and their conditions are concatenated into one
//! input, then two leaky-rectifier layers with dropout and a linear output.
//!
//! The gradient penalty needs derivatives of the input-gradient norm with
//! respect to the weights; for this fixed stack they are written out by
//! hand (dropout is off while the penalty is evaluated).

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::activation::{leaky_relu, leaky_relu_grad};
use crate::nn::{Dense, Parameters};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    pub pac: usize,
    pub row_width: usize,
    pub cond_width: usize,
    pub dropout: f64,
    pub l1: Dense,
    pub l2: Dense,
    pub out: Dense,
}

pub struct CriticCache {
    x: Array2<f64>,
    a1: Array2<f64>,
    m1: Option<Array2<f64>>,
    h1: Array2<f64>,
    a2: Array2<f64>,
    m2: Option<Array2<f64>>,
    h2: Array2<f64>,
    pub scores: Array1<f64>,
}

/// Concatenate each group of `pac` consecutive rows (all rows first, then
/// all their conditions) into one critic input.
pub fn pack(rows: ArrayView2<f64>, cond: ArrayView2<f64>, pac: usize) -> Result<Array2<f64>> {
    let n = rows.nrows();
    if pac == 0 || n % pac != 0 || cond.nrows() != n {
        return Err(Error::Validation(format!("{n} rows cannot be packed in groups of {pac}")));
    }
    let (r, c) = (rows.ncols(), cond.ncols());
    let mut out = Array2::zeros((n / pac, pac * (r + c)));
    for g in 0..n / pac {
        for k in 0..pac {
            let i = g * pac + k;
            out.slice_mut(s![g, k * r..(k + 1) * r]).assign(&rows.row(i));
            out.slice_mut(s![g, pac * r + k * c..pac * r + (k + 1) * c]).assign(&cond.row(i));
        }
    }
    Ok(out)
}

/// Inverse of [`pack`] for the row part of a packed gradient.
pub fn unpack_rows(packed: ArrayView2<f64>, row_width: usize, pac: usize) -> Array2<f64> {
    let mut out = Array2::zeros((packed.nrows() * pac, row_width));
    for g in 0..packed.nrows() {
        for k in 0..pac {
            out.row_mut(g * pac + k)
                .assign(&packed.slice(s![g, k * row_width..(k + 1) * row_width]));
        }
    }
    out
}

impl Critic {
    pub fn new(row_width: usize, cond_width: usize, pac: usize, hidden: usize, dropout: f64, rng: &mut impl Rng) -> Self {
        let input = pac * row_width + pac * cond_width;
        Critic {
            pac,
            row_width,
            cond_width,
            dropout,
            l1: Dense::new(input, hidden, rng),
            l2: Dense::new(hidden, hidden, rng),
            out: Dense::new(hidden, 1, rng),
        }
    }

    pub fn input_width(&self) -> usize {
        self.l1.inputs()
    }

    /// Evaluation-mode scores (no dropout), one per packed input.
    pub fn score(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.forward(x, None::<&mut crate::seed::Rng>)?.scores)
    }

    /// Forward pass. Dropout is applied iff `rng` is given.
    pub fn forward<R: Rng>(&self, x: ArrayView2<f64>, mut rng: Option<&mut R>) -> Result<CriticCache> {
        if x.ncols() != self.input_width() {
            return Err(Error::Dimension { expected: self.input_width(), got: x.ncols() });
        }
        let keep = 1.0 - self.dropout;
        let mut mask = |shape: (usize, usize)| -> Option<Array2<f64>> {
            let rng = rng.as_deref_mut()?;
            if self.dropout <= 0.0 {
                return None;
            }
            Some(Array2::from_shape_fn(shape, |_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }))
        };
        let a1 = self.l1.forward(x);
        let m1 = mask(a1.dim());
        let mut h1 = leaky_relu(a1.view(), LEAKY_SLOPE);
        if let Some(m) = &m1 {
            h1 *= m;
        }
        let a2 = self.l2.forward(h1.view());
        let m2 = mask(a2.dim());
        let mut h2 = leaky_relu(a2.view(), LEAKY_SLOPE);
        if let Some(m) = &m2 {
            h2 *= m;
        }
        let scores = self.out.forward(h2.view()).column(0).to_owned();
        Ok(CriticCache { x: x.to_owned(), a1, m1, h1, a2, m2, h2, scores })
    }

    /// Accumulate parameter gradients for `d loss / d score` and return the
    /// gradient with respect to the packed input.
    pub fn backward(&mut self, cache: &CriticCache, grad_scores: &[f64]) -> Array2<f64> {
        let g = Array2::from_shape_vec((grad_scores.len(), 1), grad_scores.to_vec()).expect("column");
        let mut gh2 = self.out.backward(cache.h2.view(), g.view());
        if let Some(m) = &cache.m2 {
            gh2 *= m;
        }
        gh2 *= &leaky_relu_grad(cache.a2.view(), LEAKY_SLOPE);
        let mut gh1 = self.l2.backward(cache.h1.view(), gh2.view());
        if let Some(m) = &cache.m1 {
            gh1 *= m;
        }
        gh1 *= &leaky_relu_grad(cache.a1.view(), LEAKY_SLOPE);
        self.l1.backward(cache.x.view(), gh1.view())
    }

    /// Gradient of each (dropout-free) score with respect to its input.
    pub fn input_gradients(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.penalty_terms(x)?.g)
    }

    fn penalty_terms(&self, x: ArrayView2<f64>) -> Result<PenaltyTerms> {
        if x.ncols() != self.input_width() {
            return Err(Error::Dimension { expected: self.input_width(), got: x.ncols() });
        }
        let a1 = self.l1.forward(x);
        let d1 = leaky_relu_grad(a1.view(), LEAKY_SLOPE);
        let h1 = leaky_relu(a1.view(), LEAKY_SLOPE);
        let a2 = self.l2.forward(h1.view());
        let d2 = leaky_relu_grad(a2.view(), LEAKY_SLOPE);
        let w3 = self.out.weight.column(0);
        let v2 = &d2 * &w3;
        let v1 = &d1 * &v2.dot(&self.l2.weight.t());
        let g = v1.dot(&self.l1.weight.t());
        Ok(PenaltyTerms { d1, d2, v1, v2, g })
    }

    /// `lambda * mean((|grad_x score| - 1)^2)` over the rows of `x`, with
    /// dropout off. Accumulates its parameter gradients and returns the
    /// penalty value.
    pub fn gradient_penalty(&mut self, x: ArrayView2<f64>, lambda: f64) -> Result<f64> {
        let PenaltyTerms { d1, d2, v1, v2, g } = self.penalty_terms(x)?;
        let n = x.nrows() as f64;
        let norms = g.map_axis(Axis(1), |r| r.dot(&r).sqrt());
        let penalty = lambda * norms.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>() / n;
        let coef = norms.mapv(|v| if v > 0.0 { 2.0 * lambda / n * (v - 1.0) / v } else { 0.0 });
        let u = &g * &coef.insert_axis(Axis(1));

        ndarray::linalg::general_mat_mul(1.0, &u.t(), &v1, 1.0, self.l1.grad_weight_mut());
        let t1 = &d1 * &u.dot(&self.l1.weight);
        ndarray::linalg::general_mat_mul(1.0, &t1.t(), &v2, 1.0, self.l2.grad_weight_mut());
        let s2 = t1.dot(&self.l2.weight);
        let mut gw3 = self.out.grad_weight_mut().column_mut(0);
        Zip::from(&mut gw3)
            .and(d2.axis_iter(Axis(1)))
            .and(s2.axis_iter(Axis(1)))
            .for_each(|g, d, s| *g += d.dot(&s));
        Ok(penalty)
    }
}

struct PenaltyTerms {
    d1: Array2<f64>,
    d2: Array2<f64>,
    v1: Array2<f64>,
    v2: Array2<f64>,
    g: Array2<f64>,
}

impl Parameters for Critic {
    fn visit(&mut self, f: &mut dyn FnMut(&mut [f64], &mut [f64])) {
        self.l1.visit(f);
        self.l2.visit(f);
        self.out.visit(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn input_width_arithmetic() {
        let c = Critic::new(55, 0, 10, 256, 0.5, &mut seed::rng(0));
        assert_eq!(c.input_width(), 550);
        let c = Critic::new(7, 3, 10, 16, 0.5, &mut seed::rng(0));
        assert_eq!(c.input_width(), 100);
    }

    #[test]
    fn pack_layout_rows_then_conditions() {
        let rows = Array2::from_shape_fn((4, 2), |(i, j)| (10 * i + j) as f64);
        let cond = Array2::from_shape_fn((4, 1), |(i, _)| -(i as f64));
        let p = pack(rows.view(), cond.view(), 2).unwrap();
        assert_eq!(p.row(0).to_vec(), vec![0.0, 1.0, 10.0, 11.0, 0.0, -1.0]);
        assert_eq!(p.row(1).to_vec(), vec![20.0, 21.0, 30.0, 31.0, -2.0, -3.0]);
        assert_eq!(unpack_rows(p.view(), 2, 2), rows);
        assert!(pack(rows.view(), cond.view(), 3).is_err());
    }

    #[test]
    fn evaluation_is_deterministic_and_sensitive() {
        let c = Critic::new(3, 0, 2, 8, 0.5, &mut seed::rng(1));
        let x = Array2::from_shape_fn((2, 6), |(i, j)| (i + j) as f64 * 0.1);
        let a = c.score(x.view()).unwrap();
        assert_eq!(a, c.score(x.view()).unwrap());
        let mut y = x.clone();
        y[[0, 0]] += 1e-3;
        assert_ne!(a[0], c.score(y.view()).unwrap()[0]);
        assert!(matches!(c.score(Array2::zeros((1, 5)).view()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn input_gradient_matches_finite_difference() {
        let c = Critic::new(3, 1, 2, 6, 0.0, &mut seed::rng(2));
        let x = Array2::from_shape_fn((3, 8), |(i, j)| ((i * 8 + j) as f64 * 0.77).sin());
        let g = c.input_gradients(x.view()).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            for j in 0..8 {
                let mut p = x.clone();
                p[[i, j]] += h;
                let mut m = x.clone();
                m[[i, j]] -= h;
                let fd = (c.score(p.view()).unwrap()[i] - c.score(m.view()).unwrap()[i]) / (2.0 * h);
                assert!((fd - g[[i, j]]).abs() < 1e-6);
            }
        }
    }
}
