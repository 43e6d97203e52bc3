use serde::{Deserialize, Serialize};

use super::Parameters;

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step(&mut self, net: &mut impl Parameters) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let mut k = 0;
        let (first, second) = (&mut self.first, &mut self.second);
        net.visit(&mut |p, g| {
            if first.len() <= k {
                first.push(vec![0.0; p.len()]);
                second.push(vec![0.0; p.len()]);
            }
            let (m, v) = (&mut first[k], &mut second[k]);
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
            k += 1;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;
    use ndarray::array;

    #[test]
    fn minimizes_a_quadratic() {
        // Fit y = 2x - 1 with one dense unit under squared loss.
        let mut rng = crate::seed::rng(0);
        let mut layer = Dense::new(1, 1, &mut rng);
        let mut adam = Adam::new(0.05, 0.9, 0.999);
        let x = array![[-1.0], [0.0], [1.0], [2.0]];
        let y = array![[-3.0], [-1.0], [1.0], [3.0]];
        for _ in 0..2000 {
            layer.zero_grad();
            let pred = layer.forward(x.view());
            let grad = (&pred - &y) * (2.0 / 4.0);
            layer.backward_params(x.view(), grad.view());
            adam.step(&mut layer);
        }
        assert!((layer.weight[[0, 0]] - 2.0).abs() < 1e-3);
        assert!((layer.bias[0] + 1.0).abs() < 1e-3);
    }
}
