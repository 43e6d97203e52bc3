use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Parameters;

/// Fully connected layer `y = x W + b` with `W` stored as (in, out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    #[serde(skip)]
    grad_weight: Array2<f64>,
    #[serde(skip)]
    grad_bias: Array1<f64>,
}

impl Dense {
    /// Uniform initialization in ±1/sqrt(fan_in) for weights and bias.
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let weight = Array2::from_shape_fn((inputs, outputs), |_| rng.random_range(-bound..bound));
        let bias = Array1::from_shape_fn(outputs, |_| rng.random_range(-bound..bound));
        Dense {
            grad_weight: Array2::zeros((inputs, outputs)),
            grad_bias: Array1::zeros(outputs),
            weight,
            bias,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weight);
        y += &self.bias;
        y
    }

    /// Accumulate parameter gradients and return the input gradient.
    pub fn backward(&mut self, x: ArrayView2<f64>, grad_out: ArrayView2<f64>) -> Array2<f64> {
        self.ensure_grads();
        ndarray::linalg::general_mat_mul(1.0, &x.t(), &grad_out, 1.0, &mut self.grad_weight);
        self.grad_bias += &grad_out.sum_axis(Axis(0));
        grad_out.dot(&self.weight.t())
    }

    /// Parameter gradients only, for the last layer of a chain.
    pub fn backward_params(&mut self, x: ArrayView2<f64>, grad_out: ArrayView2<f64>) {
        self.ensure_grads();
        ndarray::linalg::general_mat_mul(1.0, &x.t(), &grad_out, 1.0, &mut self.grad_weight);
        self.grad_bias += &grad_out.sum_axis(Axis(0));
    }

    pub fn grad_weight_mut(&mut self) -> &mut Array2<f64> {
        self.ensure_grads();
        &mut self.grad_weight
    }

    fn ensure_grads(&mut self) {
        if self.grad_weight.dim() != self.weight.dim() {
            self.grad_weight = Array2::zeros(self.weight.dim());
        }
        if self.grad_bias.len() != self.bias.len() {
            self.grad_bias = Array1::zeros(self.bias.len());
        }
    }
}

impl Parameters for Dense {
    fn visit(&mut self, f: &mut dyn FnMut(&mut [f64], &mut [f64])) {
        self.ensure_grads();
        f(
            self.weight.as_slice_mut().expect("standard layout"),
            self.grad_weight.as_slice_mut().expect("standard layout"),
        );
        f(
            self.bias.as_slice_mut().expect("contiguous"),
            self.grad_bias.as_slice_mut().expect("contiguous"),
        );
    }
}

/// Batch normalization over the batch axis with learned scale and shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
    #[serde(skip)]
    grad_gamma: Array1<f64>,
    #[serde(skip)]
    grad_beta: Array1<f64>,
}

pub struct BatchNormCache {
    x_hat: Array2<f64>,
    inv_std: Array1<f64>,
    batch_mean: Array1<f64>,
    batch_var: Array1<f64>,
}

impl BatchNorm {
    pub fn new(width: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
            momentum: 0.1,
            eps: 1e-5,
            grad_gamma: Array1::zeros(width),
            grad_beta: Array1::zeros(width),
        }
    }

    /// Normalize with batch statistics. Running statistics are left
    /// untouched; see [`BatchNorm::update_running`].
    pub fn forward_train(&self, x: ArrayView2<f64>) -> (Array2<f64>, BatchNormCache) {
        let n = x.nrows() as f64;
        let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
        let mut centered = x.to_owned();
        centered -= &mean;
        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let x_hat = centered * &inv_std;
        let mut y = &x_hat * &self.gamma;
        y += &self.beta;
        (
            y,
            BatchNormCache {
                x_hat,
                inv_std,
                batch_mean: mean,
                batch_var: var,
            },
        )
    }

    pub fn update_running(&mut self, cache: &BatchNormCache) {
        let n = cache.x_hat.nrows() as f64;
        let unbiased = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
        let m = self.momentum;
        Zip::from(&mut self.running_mean)
            .and(&cache.batch_mean)
            .for_each(|r, &b| *r = (1.0 - m) * *r + m * b);
        Zip::from(&mut self.running_var)
            .and(&cache.batch_var)
            .for_each(|r, &b| *r = (1.0 - m) * *r + m * b * unbiased);
    }

    pub fn forward_eval(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let inv_std = self.running_var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let mut y = x.to_owned();
        y -= &self.running_mean;
        y *= &(&inv_std * &self.gamma);
        y += &self.beta;
        y
    }

    pub fn backward(&mut self, cache: &BatchNormCache, grad_out: ArrayView2<f64>) -> Array2<f64> {
        self.ensure_grads();
        let n = grad_out.nrows() as f64;
        self.grad_beta += &grad_out.sum_axis(Axis(0));
        self.grad_gamma += &(&grad_out * &cache.x_hat).sum_axis(Axis(0));
        let g = &grad_out * &self.gamma;
        let sum_g = g.sum_axis(Axis(0));
        let sum_gx = (&g * &cache.x_hat).sum_axis(Axis(0));
        let mut dx = g * n;
        dx -= &sum_g;
        dx -= &(&cache.x_hat * &sum_gx);
        dx *= &(&cache.inv_std / n);
        dx
    }

    fn ensure_grads(&mut self) {
        if self.grad_gamma.len() != self.gamma.len() {
            self.grad_gamma = Array1::zeros(self.gamma.len());
            self.grad_beta = Array1::zeros(self.beta.len());
        }
    }
}

impl Parameters for BatchNorm {
    fn visit(&mut self, f: &mut dyn FnMut(&mut [f64], &mut [f64])) {
        self.ensure_grads();
        f(
            self.gamma.as_slice_mut().expect("contiguous"),
            self.grad_gamma.as_slice_mut().expect("contiguous"),
        );
        f(
            self.beta.as_slice_mut().expect("contiguous"),
            self.grad_beta.as_slice_mut().expect("contiguous"),
        );
    }
}
