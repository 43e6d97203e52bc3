//! Minimal dense-network building blocks with hand-written backward
//! passes: fully connected layers, batch normalization, activations and
//! the Adam optimizer.
//!
//! Tensors are row-major `Array2<f64>` with one sample per row. Layers
//! accumulate parameter gradients in place; callers zero them between
//! optimizer steps.

mod adam;
mod layers;

pub mod activation;

pub use adam::Adam;
pub use layers::{BatchNorm, BatchNormCache, Dense};

/// Uniform visitation of (parameter, gradient) buffers in a fixed order.
pub trait Parameters {
    fn visit(&mut self, f: &mut dyn FnMut(&mut [f64], &mut [f64]));

    fn zero_grad(&mut self) {
        self.visit(&mut |_, g| g.fill(0.0));
    }

    fn num_params(&mut self) -> usize {
        let mut n = 0;
        self.visit(&mut |p, _| n += p.len());
        n
    }

    fn flat_params(&mut self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |p, _| out.extend_from_slice(p));
        out
    }

    fn flat_grads(&mut self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |_, g| out.extend_from_slice(g));
        out
    }

    fn set_flat_params(&mut self, values: &[f64]) {
        let mut offset = 0;
        self.visit(&mut |p, _| {
            p.copy_from_slice(&values[offset..offset + p.len()]);
            offset += p.len();
        });
    }
}

impl<T: Parameters + ?Sized> Parameters for &mut T {
    fn visit(&mut self, f: &mut dyn FnMut(&mut [f64], &mut [f64])) {
        (**self).visit(f)
    }
}
