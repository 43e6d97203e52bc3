use ndarray::{Array2, ArrayView2, ArrayViewMut1, Zip};

pub fn relu(x: ArrayView2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Gradient through ReLU given the pre-activation.
pub fn relu_backward(pre: ArrayView2<f64>, grad: ArrayView2<f64>) -> Array2<f64> {
    Zip::from(&pre)
        .and(&grad)
        .map_collect(|&p, &g| if p > 0.0 { g } else { 0.0 })
}

pub fn leaky_relu(x: ArrayView2<f64>, slope: f64) -> Array2<f64> {
    x.mapv(|v| if v > 0.0 { v } else { slope * v })
}

pub fn leaky_relu_grad(pre: ArrayView2<f64>, slope: f64) -> Array2<f64> {
    pre.mapv(|v| if v > 0.0 { 1.0 } else { slope })
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// In-place softmax of `x / tau`.
pub fn softmax_inplace(mut x: ArrayViewMut1<f64>, tau: f64) {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    x.mapv_inplace(|v| {
        let e = ((v - max) / tau).exp();
        sum += e;
        e
    });
    x.mapv_inplace(|v| v / sum);
}

/// `log(sum(exp(x)))`, stable.
pub fn log_sum_exp(x: &[f64]) -> f64 {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
