#![allow(dead_code)]

use gaitauth::classifiers::ffnn::Ffnn;
use gaitauth::ictgan::critic::Critic;
use gaitauth::ictgan::generator::Generator;
use gaitauth::ictgan::modes::{Span, SpanKind};
use gaitauth::nn::Parameters;
use gaitauth::seed;
use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

pub const FD_STEP: f64 = 1e-6;
pub const KINK_MARGIN: f64 = 1e-3;
pub const MAX_REL_ERROR: f64 = 1e-4;

/// Central differences of `loss` over every parameter of `net`.
pub fn numeric_gradient<P: Parameters>(net: &mut P, mut loss: impl FnMut(&mut P) -> f64) -> Vec<f64> {
    let base = net.flat_params();
    let mut out = Vec::with_capacity(base.len());
    let mut p = base.clone();
    for i in 0..base.len() {
        p[i] = base[i] + FD_STEP;
        net.set_flat_params(&p);
        let up = loss(net);
        p[i] = base[i] - FD_STEP;
        net.set_flat_params(&p);
        let down = loss(net);
        p[i] = base[i];
        out.push((up - down) / (2.0 * FD_STEP));
    }
    net.set_flat_params(&base);
    out
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

fn near_kink(pre: &Array2<f64>) -> bool {
    pre.iter().any(|v| v.abs() < KINK_MARGIN)
}

fn gaussian(rng: &mut impl Rng, shape: (usize, usize), scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || scale * rng.sample::<f64, _>(StandardNormal))
}

/// Outcome of one randomized gradient check.
pub struct GradCheck {
    pub label: String,
    pub params: usize,
    pub rel_error: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.rel_error < MAX_REL_ERROR
    }
}

/// FFNN binary cross-entropy gradients on a random small net.
pub fn check_ffnn(case: u64) -> GradCheck {
    let mut rng = seed::rng(seed::derive_index(0xF0, "ffnn-case", case));
    loop {
        let inputs = rng.random_range(2..=6);
        let hidden: Vec<usize> = (0..rng.random_range(1..=2)).map(|_| rng.random_range(4..=8)).collect();
        let n = rng.random_range(3..=6);
        let mut net = Ffnn::new(inputs, &hidden, rng.random());
        let x = gaussian(&mut rng, (n, inputs), 1.0);
        let t: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { 0.0 }).collect();

        let mut h = x.clone();
        let mut kink = false;
        for (k, layer) in net.layers.iter().enumerate() {
            let a = layer.forward(h.view());
            if k + 1 < net.layers.len() {
                kink |= near_kink(&a);
                h = a.mapv(|v| v.max(0.0));
            }
        }
        if kink {
            continue;
        }
        net.zero_grad();
        net.loss_and_backward(x.view(), &t);
        let analytic = net.flat_grads();
        let numeric = numeric_gradient(&mut net, |m| m.clone().loss_and_backward(x.view(), &t));
        return GradCheck {
            label: format!("ffnn {inputs}->{hidden:?}->1, batch {n}"),
            params: analytic.len(),
            rel_error: relative_error(&analytic, &numeric),
        };
    }
}

fn random_spans(rng: &mut impl Rng) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut start = 0;
    for _ in 0..rng.random_range(1..=2) {
        let m = rng.random_range(1..=3);
        spans.push(Span { kind: SpanKind::Tanh, start, width: 1 });
        spans.push(Span { kind: SpanKind::Softmax, start: start + 1, width: m });
        start += 1 + m;
    }
    if rng.random::<bool>() {
        let d = rng.random_range(2..=3);
        spans.push(Span { kind: SpanKind::Softmax, start, width: d });
    }
    spans
}

/// Generator gradients for `sum(C * output) + sum(D * logits)` with fixed
/// noise, condition and gumbel draws.
pub fn check_generator(case: u64) -> GradCheck {
    let mut rng = seed::rng(seed::derive_index(0xF1, "generator-case", case));
    loop {
        let z_dim = rng.random_range(2..=5);
        let cond_dim = rng.random_range(0..=3);
        let hidden = rng.random_range(4..=8);
        let n = rng.random_range(4..=6);
        let spans = random_spans(&mut rng);
        let mut g = Generator::new(z_dim, cond_dim, hidden, spans, 0.2, &mut rng);
        let z = gaussian(&mut rng, (n, z_dim), 1.0);
        let cond = Array2::from_shape_fn((n, cond_dim), |(i, j)| if i % cond_dim.max(1) == j { 1.0 } else { 0.0 });
        let gumbel = g.sample_gumbel(n, &mut rng);
        let c = gaussian(&mut rng, (n, g.output_width()), 1.0);
        let d = gaussian(&mut rng, (n, g.output_width()), 0.3);

        let cache = g.forward(z.view(), cond.view(), gumbel.view()).unwrap();
        let h0 = ndarray::concatenate(Axis(1), &[z.view(), cond.view()]).unwrap();
        let (b1, _) = g.bn1.forward_train(g.res1.forward(h0.view()).view());
        let h1 = ndarray::concatenate(Axis(1), &[h0.view(), b1.mapv(|v| v.max(0.0)).view()]).unwrap();
        let (b2, _) = g.bn2.forward_train(g.res2.forward(h1.view()).view());
        if near_kink(&b1) || near_kink(&b2) {
            continue;
        }
        g.zero_grad();
        g.backward(&cache, c.view(), Some(d.view()));
        let analytic = g.flat_grads();
        let loss = |m: &mut Generator| {
            let out = m.forward(z.view(), cond.view(), gumbel.view()).unwrap();
            (&out.output * &c).sum() + (&out.logits * &d).sum()
        };
        let numeric = numeric_gradient(&mut g, loss);
        return GradCheck {
            label: format!("generator z{z_dim} cond{cond_dim} hidden{hidden} out{}, batch {n}", c.ncols()),
            params: analytic.len(),
            rel_error: relative_error(&analytic, &numeric),
        };
    }
}

fn critic_kink(c: &Critic, x: ArrayView2<f64>) -> bool {
    let a1 = c.l1.forward(x);
    let h1 = a1.mapv(|v| if v > 0.0 { v } else { 0.2 * v });
    let a2 = c.l2.forward(h1.view());
    near_kink(&a1) || near_kink(&a2)
}

/// Critic gradients for `sum(w * score)` under a fixed dropout mask plus
/// the gradient penalty on interpolates.
pub fn check_critic(case: u64) -> GradCheck {
    let mut rng = seed::rng(seed::derive_index(0xF2, "critic-case", case));
    loop {
        let row = rng.random_range(2..=4);
        let cond = rng.random_range(0..=2);
        let pac = rng.random_range(2..=3);
        let hidden = rng.random_range(4..=8);
        let packs = rng.random_range(2..=4);
        let mut c = Critic::new(row, cond, pac, hidden, 0.5, &mut rng);
        let width = c.input_width();
        let x = gaussian(&mut rng, (packs, width), 1.0);
        let x_hat = gaussian(&mut rng, (packs, width), 1.0);
        let w: Vec<f64> = (0..packs).map(|_| rng.sample(StandardNormal)).collect();
        let mask_seed: u64 = rng.random();
        if critic_kink(&c, x.view()) || critic_kink(&c, x_hat.view()) {
            continue;
        }
        let lambda = 10.0;
        c.zero_grad();
        let cache = c.forward(x.view(), Some(&mut seed::rng(mask_seed))).unwrap();
        c.backward(&cache, &w);
        c.gradient_penalty(x_hat.view(), lambda).unwrap();
        let analytic = c.flat_grads();
        let loss = |m: &mut Critic| {
            let scores = m.forward(x.view(), Some(&mut seed::rng(mask_seed))).unwrap().scores;
            let mut probe = m.clone();
            let penalty = probe.gradient_penalty(x_hat.view(), lambda).unwrap();
            scores.iter().zip(&w).map(|(s, w)| s * w).sum::<f64>() + penalty
        };
        let numeric = numeric_gradient(&mut c, loss);
        return GradCheck {
            label: format!("critic row{row} cond{cond} pac{pac} hidden{hidden}, {packs} packs"),
            params: analytic.len(),
            rel_error: relative_error(&analytic, &numeric),
        };
    }
}

/// The penalty term alone, to confirm its gradient is not trivially zero.
pub fn penalty_gradient_norm(case: u64) -> f64 {
    let mut rng = seed::rng(case);
    let mut c = Critic::new(3, 1, 2, 6, 0.5, &mut rng);
    let x = gaussian(&mut rng, (3, c.input_width()), 1.0);
    c.zero_grad();
    c.gradient_penalty(x.view(), 10.0).unwrap();
    c.flat_grads().iter().map(|g| g * g).sum::<f64>().sqrt()
}

pub fn first_columns(x: &Array2<f64>, k: usize) -> Array2<f64> {
    x.slice(s![.., ..k]).to_owned()
}
