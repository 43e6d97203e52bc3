//! Feed-forward network: rectified hidden layers and a sigmoid output
//! unit, trained with binary cross-entropy and Adam.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::nn::activation::{relu, relu_backward, sigmoid};
use crate::nn::{Adam, Dense, Parameters};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ffnn {
    pub layers: Vec<Dense>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnnTraining {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Ffnn {
    pub fn new(inputs: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = seed::rng(seed::derive(seed, &["ffnn-init"]));
        let mut widths = vec![inputs];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths.windows(2).map(|w| Dense::new(w[0], w[1], &mut rng)).collect();
        Ffnn { layers }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    /// Output logits, one per row.
    pub fn logits(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let mut h = x.to_owned();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let a = layer.forward(h.view());
            h = if k < last { relu(a.view()) } else { a };
        }
        h.column(0).to_owned()
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        let row = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        sigmoid(self.logits(row)[0])
    }

    /// Mean binary cross-entropy on logits. Accumulates parameter
    /// gradients and returns the loss.
    pub fn loss_and_backward(&mut self, x: ArrayView2<f64>, targets: &[f64]) -> f64 {
        let n = x.nrows() as f64;
        let last = self.layers.len() - 1;
        let mut inputs = vec![x.to_owned()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate() {
            let a = layer.forward(inputs[k].view());
            if k < last {
                inputs.push(relu(a.view()));
            }
            pre.push(a);
        }
        let logits = pre[last].column(0);
        let mut loss = 0.0;
        let mut grad = Array2::zeros((x.nrows(), 1));
        for (i, (&z, &t)) in logits.iter().zip(targets).enumerate() {
            // log(1 + e^z) - t z, computed stably.
            loss += z.max(0.0) - t * z + (-z.abs()).exp().ln_1p();
            grad[[i, 0]] = (sigmoid(z) - t) / n;
        }
        for k in (0..self.layers.len()).rev() {
            if k < last {
                grad = relu_backward(pre[k].view(), grad.view());
            }
            if k == 0 {
                self.layers[0].backward_params(inputs[0].view(), grad.view());
            } else {
                grad = self.layers[k].backward(inputs[k].view(), grad.view());
            }
        }
        loss / n
    }

    pub fn fit(&mut self, x: ArrayView2<f64>, targets: &[f64], cfg: &FfnnTraining, seed: u64) {
        let mut adam = Adam::new(cfg.learning_rate, 0.9, 0.999);
        let mut rng = seed::rng(seed::derive(seed, &["ffnn-batches"]));
        let mut order: Vec<usize> = (0..x.nrows()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.batch_size.max(1)) {
                let xb = x.select(Axis(0), chunk);
                let tb: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
                self.zero_grad();
                self.loss_and_backward(xb.view(), &tb);
                adam.step(self);
            }
        }
    }
}

impl Parameters for Ffnn {
    fn visit(&mut self, f: &mut dyn FnMut(&mut [f64], &mut [f64])) {
        for layer in &mut self.layers {
            layer.visit(f);
        }
    }
}
