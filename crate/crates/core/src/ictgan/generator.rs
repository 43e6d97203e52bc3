//! Residual generator: `h0 = z ++ cond`, two blocks
//! `h_{i+1} = h_i ++ relu(bn(fc(h_i)))`, then a linear head whose segments
//! pass through tanh (offsets) or gumbel-softmax (one-hot blocks).

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use super::modes::{Span, SpanKind};
use crate::error::{Error, Result};
use crate::nn::activation::{relu, relu_backward, softmax_inplace};
use crate::nn::{BatchNorm, BatchNormCache, Dense, Parameters};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub z_dim: usize,
    pub cond_dim: usize,
    pub hidden: usize,
    pub tau: f64,
    pub spans: Vec<Span>,
    pub res1: Dense,
    pub bn1: BatchNorm,
    pub res2: Dense,
    pub bn2: BatchNorm,
    pub head: Dense,
}

pub struct GeneratorCache {
    h0: Array2<f64>,
    a1: BatchNormCache,
    b1: Array2<f64>,
    h1: Array2<f64>,
    a2: BatchNormCache,
    b2: Array2<f64>,
    h2: Array2<f64>,
    pub logits: Array2<f64>,
    pub output: Array2<f64>,
}

impl Generator {
    pub fn new(z_dim: usize, cond_dim: usize, hidden: usize, spans: Vec<Span>, tau: f64, rng: &mut impl Rng) -> Self {
        let base = z_dim + cond_dim;
        let out = spans.last().map(|s| s.start + s.width).unwrap_or(0);
        let g = Generator {
            z_dim,
            cond_dim,
            hidden,
            tau,
            res1: Dense::new(base, hidden, rng),
            bn1: BatchNorm::new(hidden),
            res2: Dense::new(base + hidden, hidden, rng),
            bn2: BatchNorm::new(hidden),
            head: Dense::new(base + 2 * hidden, out, rng),
            spans,
        };
        assert_eq!(g.res1.inputs(), base);
        assert_eq!(g.res2.inputs(), base + hidden);
        assert_eq!(g.head.inputs(), base + 2 * hidden);
        g
    }

    pub fn output_width(&self) -> usize {
        self.head.outputs()
    }

    /// Standard Gumbel noise for the softmax segments, zero elsewhere.
    pub fn sample_gumbel(&self, n: usize, rng: &mut impl Rng) -> Array2<f64> {
        let mut g = Array2::zeros((n, self.output_width()));
        for span in self.spans.iter().filter(|s| s.kind == SpanKind::Softmax) {
            for i in 0..n {
                for j in span.start..span.start + span.width {
                    let u: f64 = rng.sample(Open01);
                    g[[i, j]] = -(-u.ln()).ln();
                }
            }
        }
        g
    }

    /// Forward pass with batch statistics.
    pub fn forward(&self, z: ArrayView2<f64>, cond: ArrayView2<f64>, gumbel: ArrayView2<f64>) -> Result<GeneratorCache> {
        if z.ncols() != self.z_dim {
            return Err(Error::Dimension { expected: self.z_dim, got: z.ncols() });
        }
        if cond.ncols() != self.cond_dim {
            return Err(Error::Dimension { expected: self.cond_dim, got: cond.ncols() });
        }
        if cond.nrows() != z.nrows() || gumbel.nrows() != z.nrows() {
            return Err(Error::Validation("noise, condition and gumbel rows differ".into()));
        }
        if gumbel.ncols() != self.output_width() {
            return Err(Error::Dimension { expected: self.output_width(), got: gumbel.ncols() });
        }
        let h0 = ndarray::concatenate(Axis(1), &[z, cond]).expect("same rows");
        let (b1, a1) = self.bn1.forward_train(self.res1.forward(h0.view()).view());
        let h1 = ndarray::concatenate(Axis(1), &[h0.view(), relu(b1.view()).view()]).expect("same rows");
        let (b2, a2) = self.bn2.forward_train(self.res2.forward(h1.view()).view());
        let h2 = ndarray::concatenate(Axis(1), &[h1.view(), relu(b2.view()).view()]).expect("same rows");
        let logits = self.head.forward(h2.view());
        let output = self.activate(logits.view(), gumbel);
        Ok(GeneratorCache { h0, a1, b1, h1, a2, b2, h2, logits, output })
    }

    fn activate(&self, logits: ArrayView2<f64>, gumbel: ArrayView2<f64>) -> Array2<f64> {
        let mut out = logits.to_owned();
        for span in &self.spans {
            let cols = s![.., span.start..span.start + span.width];
            match span.kind {
                SpanKind::Tanh => out.slice_mut(cols).mapv_inplace(f64::tanh),
                SpanKind::Softmax => {
                    let mut block = out.slice_mut(cols);
                    block += &gumbel.slice(cols);
                    for row in block.outer_iter_mut() {
                        softmax_inplace(row, self.tau);
                    }
                }
            }
        }
        out
    }

    /// Accumulate parameter gradients for `grad_output` (gradient of the
    /// loss with respect to the activated output) plus an optional
    /// gradient taken directly with respect to the head logits.
    pub fn backward(&mut self, cache: &GeneratorCache, grad_output: ArrayView2<f64>, grad_logits: Option<ArrayView2<f64>>) {
        let mut gl = grad_output.to_owned();
        for span in &self.spans {
            let cols = s![.., span.start..span.start + span.width];
            let y = cache.output.slice(cols);
            let mut g = gl.slice_mut(cols);
            match span.kind {
                SpanKind::Tanh => g.zip_mut_with(&y, |g, &y| *g *= 1.0 - y * y),
                SpanKind::Softmax => {
                    for (mut gr, yr) in g.outer_iter_mut().zip(y.outer_iter()) {
                        let dot = gr.dot(&yr);
                        gr.zip_mut_with(&yr, |g, &y| *g = y * (*g - dot) / self.tau);
                    }
                }
            }
        }
        if let Some(extra) = grad_logits {
            gl += &extra;
        }
        let base = self.z_dim + self.cond_dim;
        let h = self.hidden;
        let gh2 = self.head.backward(cache.h2.view(), gl.view());
        let mut gh1 = gh2.slice(s![.., ..base + h]).to_owned();
        let gb2 = relu_backward(cache.b2.view(), gh2.slice(s![.., base + h..]));
        let ga2 = self.bn2.backward(&cache.a2, gb2.view());
        gh1 += &self.res2.backward(cache.h1.view(), ga2.view());
        let gb1 = relu_backward(cache.b1.view(), gh1.slice(s![.., base..]));
        let ga1 = self.bn1.backward(&cache.a1, gb1.view());
        self.res1.backward_params(cache.h0.view(), ga1.view());
    }
}

impl Parameters for Generator {
    fn visit(&mut self, f: &mut dyn FnMut(&mut [f64], &mut [f64])) {
        self.res1.visit(f);
        self.bn1.visit(f);
        self.res2.visit(f);
        self.bn2.visit(f);
        self.head.visit(f);
    }
}
