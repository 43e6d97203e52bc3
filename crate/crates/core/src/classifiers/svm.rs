//! Support vector machines trained by sequential minimal optimization.
//!
//! The dual problem is solved in the form
//!
//! ```text
//! min_a  1/2 a'Qa - e'a   s.t.  y'a = 0,  0 <= a_i <= C,  Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! Each iteration picks the maximal KKT-violating pair and solves the
//! two-variable subproblem in closed form.

use std::collections::{HashMap, VecDeque};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;
const FULL_KERNEL_LIMIT: usize = 4000;
const ROW_CACHE_BYTES: usize = 256 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match *self {
            Kernel::Linear => a.dot(&b),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoConfig {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Record the dual objective after every iteration.
    pub trace: bool,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            c: 1.0,
            tol: 1e-3,
            max_iter: 1_000_000,
            trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Decision function offset: `f(x) = sum a_i y_i K(x_i, x) + bias`.
    pub bias: f64,
    pub iterations: usize,
    /// Maximal KKT violation `m(a) - M(a)` at termination.
    pub violation: f64,
    /// Dual objective `e'a - 1/2 a'Qa` per iteration, when traced.
    pub dual_trace: Vec<f64>,
}

enum KernelRows<'a> {
    Full(Array2<f64>),
    Cached {
        x: ArrayView2<'a, f64>,
        kernel: Kernel,
        rows: HashMap<usize, Vec<f64>>,
        order: VecDeque<usize>,
        capacity: usize,
    },
}

impl<'a> KernelRows<'a> {
    fn new(x: ArrayView2<'a, f64>, kernel: Kernel) -> Self {
        let n = x.nrows();
        if n <= FULL_KERNEL_LIMIT {
            KernelRows::Full(kernel_matrix(x, x, kernel))
        } else {
            KernelRows::Cached {
                x,
                kernel,
                rows: HashMap::new(),
                order: VecDeque::new(),
                capacity: (ROW_CACHE_BYTES / (8 * n)).max(2),
            }
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        match self {
            KernelRows::Full(k) => k.row(i).to_slice().expect("standard layout"),
            KernelRows::Cached { x, kernel, rows, order, capacity } => {
                if !rows.contains_key(&i) {
                    if order.len() >= *capacity {
                        if let Some(old) = order.pop_front() {
                            rows.remove(&old);
                        }
                    }
                    let xi = x.row(i);
                    let row = x.outer_iter().map(|xj| kernel.eval(xi, xj)).collect();
                    rows.insert(i, row);
                    order.push_back(i);
                }
                &rows[&i]
            }
        }
    }
}

/// Kernel matrix between the rows of `a` and the rows of `b`.
pub fn kernel_matrix(a: ArrayView2<f64>, b: ArrayView2<f64>, kernel: Kernel) -> Array2<f64> {
    let gram = a.dot(&b.t()).as_standard_layout().into_owned();
    match kernel {
        Kernel::Linear => gram,
        Kernel::Rbf { gamma } => {
            let na = a.map_axis(Axis(1), |r| r.dot(&r));
            let nb = b.map_axis(Axis(1), |r| r.dot(&r));
            let mut k = gram;
            for ((i, j), v) in k.indexed_iter_mut() {
                let d2 = (na[i] + nb[j] - 2.0 * *v).max(0.0);
                *v = (-gamma * d2).exp();
            }
            k
        }
    }
}

/// Solve the C-SVM dual for labels `y` in {-1, +1}.
pub fn smo(x: ArrayView2<f64>, y: &[f64], kernel: Kernel, config: &SmoConfig) -> Result<SmoSolution> {
    let n = x.nrows();
    assert_eq!(n, y.len());
    let c = config.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut rows = KernelRows::new(x, kernel);
    let diag: Vec<f64> = (0..n).map(|i| rows.row(i)[i]).collect();
    let mut trace = Vec::new();

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let violation = loop {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        let violation = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || violation < config.tol {
            break violation.max(0.0);
        }
        if iterations >= config.max_iter {
            return Err(Error::NotConverged { iterations, violation });
        }
        iterations += 1;

        let k_ij = rows.row(i)[j];
        let q_ij = y[i] * y[j] * k_ij;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (diag[i] + diag[j] + 2.0 * q_ij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (diag[i] + diag[j] - 2.0 * q_ij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        if di != 0.0 {
            let row_i = rows.row(i);
            for t in 0..n {
                grad[t] += y[t] * row_i[t] * di;
            }
        }
        if dj != 0.0 {
            let row_j = rows.row(j);
            for t in 0..n {
                grad[t] += y[t] * row_j[t] * dj;
            }
        }
        if config.trace {
            let f: f64 = alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>() * 0.5;
            trace.push(-f);
        }
    };

    let bias = -offset(&alpha, &grad, y, c);
    Ok(SmoSolution {
        alpha,
        bias,
        iterations,
        violation,
        dual_trace: trace,
    })
}

/// The offset `rho` from free support vectors, or the midpoint of the
/// feasible interval when every multiplier sits at a bound.
fn offset(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        0.5 * (ub + lb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvm {
    pub fn fit(x: ArrayView2<f64>, y: &[f64], config: &SmoConfig) -> Result<Self> {
        let sol = smo(x, y, Kernel::Linear, config)?;
        let coef: Array1<f64> = sol.alpha.iter().zip(y).map(|(a, yi)| a * yi).collect();
        Ok(LinearSvm {
            weights: x.t().dot(&coef).to_vec(),
            bias: sol.bias,
        })
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSvm {
    pub kernel: Kernel,
    pub support_vectors: Array2<f64>,
    /// `a_i y_i` for each support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
}

impl KernelSvm {
    pub fn fit(x: ArrayView2<f64>, y: &[f64], kernel: Kernel, config: &SmoConfig) -> Result<Self> {
        let sol = smo(x, y, kernel, config)?;
        let support: Vec<usize> = (0..x.nrows()).filter(|&i| sol.alpha[i] > 0.0).collect();
        Ok(KernelSvm {
            kernel,
            support_vectors: x.select(Axis(0), &support),
            coefficients: support.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
            bias: sol.bias,
        })
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        let x = ArrayView1::from(x);
        self.support_vectors
            .outer_iter()
            .zip(&self.coefficients)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn decision_batch(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let k = kernel_matrix(x, self.support_vectors.view(), self.kernel);
        let coef = ArrayView1::from(&self.coefficients);
        k.dot(&coef).iter().map(|v| v + self.bias).collect()
    }
}
