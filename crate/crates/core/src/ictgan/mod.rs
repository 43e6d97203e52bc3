//! Conditional tabular GAN for synthesizing impostor feature rows.
//!
//! Rows are encoded with per-column Gaussian-mixture normalization. A
//! residual generator maps noise plus a condition vector to encoded rows;
//! a pac critic scores groups of rows. Training minimizes the Wasserstein
//! loss with a gradient penalty, plus a cross-entropy term that ties the
//! generated discrete block to its condition.

pub mod cond;
pub mod critic;
pub mod generator;
pub mod modes;

use std::io::Write;
use std::path::Path;

use ndarray::{s, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataio::{ColumnSpec, FeatureTable, Origin, RowLabel};
use crate::error::{Error, Result};
use crate::nn::{Adam, Parameters};
use crate::seed;
use cond::CondSampler;
use critic::{pack, unpack_rows, Critic};
use generator::Generator;
use modes::{ModeFitConfig, ModeNormalizer};

pub const SYNTH_FORMAT_VERSION: u32 = 1;
/// User label carried by generated rows.
pub const SYNTHETIC_USER: &str = "synthetic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch: usize,
    pub pac: usize,
    pub z_dim: usize,
    pub gumbel_tau: f64,
    pub gp_lambda: f64,
    pub critic_steps: usize,
    pub generator_hidden: usize,
    pub critic_hidden: usize,
    pub dropout: f64,
    pub max_modes: usize,
    pub mode_weight_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.9,
            batch: 500,
            pac: 10,
            z_dim: 128,
            gumbel_tau: 0.2,
            gp_lambda: 10.0,
            critic_steps: 1,
            generator_hidden: 256,
            critic_hidden: 256,
            dropout: 0.5,
            max_modes: 10,
            mode_weight_threshold: 0.005,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Hyperparameter(format!("gan: {m}")));
        if self.pac == 0 || self.batch == 0 || self.batch % self.pac != 0 {
            return fail("batch must be a positive multiple of pac");
        }
        if self.epochs == 0 || self.critic_steps == 0 {
            return fail("epochs and critic_steps must be at least 1");
        }
        if self.z_dim == 0 || self.generator_hidden == 0 || self.critic_hidden == 0 {
            return fail("network widths must be positive");
        }
        if !(self.learning_rate > 0.0 && self.gumbel_tau > 0.0 && self.gp_lambda >= 0.0) {
            return fail("learning_rate and gumbel_tau must be positive, gp_lambda non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("dropout and Adam betas must lie in [0, 1)");
        }
        if self.max_modes == 0 || !(0.0..1.0).contains(&self.mode_weight_threshold) {
            return fail("max_modes must be positive and the weight threshold in [0, 1)");
        }
        Ok(())
    }
}

/// Per-epoch means of the training losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub critic: f64,
    pub generator: f64,
    pub penalty: f64,
}

/// A fitted generator with everything needed to sample decoded rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthModel {
    pub format_version: u32,
    pub schema: Vec<ColumnSpec>,
    pub normalizer: ModeNormalizer,
    pub cond: CondSampler,
    pub config: TrainConfig,
    /// Rows per generator call; batch statistics are taken over this many.
    pub batch: usize,
    pub generator: Generator,
    pub critic: Critic,
}

/// Train on the rows of `table`. Returns the model and the loss trace.
pub fn train_ictgan(table: &FeatureTable, config: &TrainConfig, seed: u64) -> Result<(SynthModel, Vec<EpochLoss>)> {
    config.validate()?;
    let n = table.n_rows();
    if n < config.pac {
        return Err(Error::Validation(format!("{n} training rows, need at least pac = {}", config.pac)));
    }
    let batch = config.batch.min(n / config.pac * config.pac);
    let mode_cfg = ModeFitConfig { max_modes: config.max_modes, weight_threshold: config.mode_weight_threshold };
    let normalizer = ModeNormalizer::fit(table.schema(), table.rows().view(), &mode_cfg, seed::derive(seed, &["normalizer"]))?;
    let encoded = normalizer.encode(table.rows().view())?;
    let sampler = CondSampler::new(&normalizer, table.rows().view());

    let mut init = seed::rng(seed::derive(seed, &["init"]));
    let mut gen = Generator::new(
        config.z_dim,
        sampler.width,
        config.generator_hidden,
        normalizer.spans(),
        config.gumbel_tau,
        &mut init,
    );
    let mut critic = Critic::new(
        normalizer.encoded_width(),
        sampler.width,
        config.pac,
        config.critic_hidden,
        config.dropout,
        &mut init,
    );
    let mut opt_g = Adam::new(config.learning_rate, config.beta1, config.beta2);
    let mut opt_c = Adam::new(config.learning_rate, config.beta1, config.beta2);
    let mut rng = seed::rng(seed::derive(seed, &["train"]));
    let steps = (n / batch).max(1);
    let packs = (batch / config.pac) as f64;
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let (mut sum_c, mut sum_g, mut sum_p) = (0.0, 0.0, 0.0);
        for _ in 0..steps {
            for _ in 0..config.critic_steps {
                let (cond, picks) = sampler.sample_training(batch, &mut rng);
                let z = noise(batch, config.z_dim, &mut rng);
                let gumbel = gen.sample_gumbel(batch, &mut rng);
                let fake = gen.forward(z.view(), cond.view(), gumbel.view())?.output;
                let real = encoded.select(Axis(0), &sampler.sample_rows(&picks, n, &mut rng));
                let fake_p = pack(fake.view(), cond.view(), config.pac)?;
                let real_p = pack(real.view(), cond.view(), config.pac)?;

                critic.zero_grad();
                let fc = critic.forward(fake_p.view(), Some(&mut rng))?;
                let rc = critic.forward(real_p.view(), Some(&mut rng))?;
                critic.backward(&fc, &vec![1.0 / packs; fc.scores.len()]);
                critic.backward(&rc, &vec![-1.0 / packs; rc.scores.len()]);
                let mut mixed = fake_p.clone();
                for (mut row, real_row) in mixed.outer_iter_mut().zip(real_p.outer_iter()) {
                    let eps: f64 = rng.random();
                    row.zip_mut_with(&real_row, |f, &r| *f = eps * r + (1.0 - eps) * *f);
                }
                let penalty = critic.gradient_penalty(mixed.view(), config.gp_lambda)?;
                opt_c.step(&mut critic);
                sum_c += fc.scores.mean().unwrap_or(0.0) - rc.scores.mean().unwrap_or(0.0) + penalty;
                sum_p += penalty;
            }

            let (cond, picks) = sampler.sample_training(batch, &mut rng);
            let z = noise(batch, config.z_dim, &mut rng);
            let gumbel = gen.sample_gumbel(batch, &mut rng);
            gen.zero_grad();
            let cache = gen.forward(z.view(), cond.view(), gumbel.view())?;
            let fake_p = pack(cache.output.view(), cond.view(), config.pac)?;
            let fc = critic.forward(fake_p.view(), Some(&mut rng))?;
            let grad_packed = critic.backward(&fc, &vec![-1.0 / packs; fc.scores.len()]);
            let grad_rows = unpack_rows(grad_packed.view(), normalizer.encoded_width(), config.pac);
            let (ce, grad_logits) = condition_loss(&sampler, &picks, cache.logits.view());
            gen.backward(&cache, grad_rows.view(), grad_logits.as_ref().map(|g| g.view()));
            opt_g.step(&mut gen);
            sum_g += -fc.scores.mean().unwrap_or(0.0) + ce;
        }
        let per = steps as f64;
        let record = EpochLoss {
            epoch,
            critic: sum_c / (per * config.critic_steps as f64),
            generator: sum_g / per,
            penalty: sum_p / (per * config.critic_steps as f64),
        };
        if !(record.critic.is_finite() && record.generator.is_finite()) {
            return Err(Error::NonFinite(format!("GAN loss diverged at epoch {epoch}")));
        }
        log::debug!("gan epoch {epoch}: critic {:.4} generator {:.4}", record.critic, record.generator);
        trace.push(record);
    }
    critic.zero_grad();
    gen.zero_grad();
    let model = SynthModel {
        format_version: SYNTH_FORMAT_VERSION,
        schema: table.schema().to_vec(),
        normalizer,
        cond: sampler,
        config: config.clone(),
        batch,
        generator: gen,
        critic,
    };
    Ok((model, trace))
}

fn noise(n: usize, d: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || rng.sample(StandardNormal))
}

/// Mean cross-entropy between each conditioned discrete block's logits and
/// its condition category, with its gradient on the logits.
fn condition_loss(
    sampler: &CondSampler,
    picks: &[Option<cond::CondPick>],
    logits: ndarray::ArrayView2<f64>,
) -> (f64, Option<Array2<f64>>) {
    if sampler.is_empty() {
        return (0.0, None);
    }
    let n = picks.len() as f64;
    let mut grad = Array2::zeros(logits.dim());
    let mut loss = 0.0;
    for (i, pick) in picks.iter().enumerate() {
        let Some(p) = pick else { continue };
        let block = &sampler.blocks[p.block];
        let width = block.counts.len();
        let range = s![i, block.encoded_offset..block.encoded_offset + width];
        let mut probs = logits.slice(range).to_owned();
        let lse = crate::nn::activation::log_sum_exp(probs.as_slice().expect("contiguous"));
        loss -= probs[p.category] - lse;
        probs.mapv_inplace(|v| (v - lse).exp());
        probs[p.category] -= 1.0;
        grad.slice_mut(range).assign(&(probs / n));
    }
    (loss / n, Some(grad))
}

impl SynthModel {
    /// Decode `count` generated rows. Generation runs in full training-size
    /// batches so batch statistics match training.
    pub fn generate(&self, count: usize, seed: u64) -> Result<FeatureTable> {
        if count == 0 {
            return FeatureTable::empty(self.schema.clone());
        }
        let mut rng = seed::rng(seed::derive(seed, &["generate"]));
        let mut rows = Array2::zeros((count, self.schema.len()));
        let mut filled = 0;
        while filled < count {
            let cond = self.cond.sample_generation(self.batch, &mut rng);
            let z = noise(self.batch, self.config.z_dim, &mut rng);
            let gumbel = self.generator.sample_gumbel(self.batch, &mut rng);
            let out = self.generator.forward(z.view(), cond.view(), gumbel.view())?.output;
            for r in out.outer_iter().take(count - filled) {
                let decoded = self.normalizer.decode_soft_row(r.as_slice().expect("row-major"))?;
                rows.row_mut(filled).assign(&ndarray::ArrayView1::from(&decoded));
                filled += 1;
            }
        }
        let label = RowLabel { user_id: SYNTHETIC_USER.into(), origin: Origin::GanSynth };
        FeatureTable::new(self.schema.clone(), rows, vec![label; count])
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let probe: serde_json::Value = serde_json::from_str(s)?;
        let found = probe.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != SYNTH_FORMAT_VERSION {
            return Err(Error::Version { found, expected: SYNTH_FORMAT_VERSION });
        }
        Ok(serde_json::from_value(probe)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Write the loss trace as comma-separated text with a header row.
pub fn write_loss_trace(path: impl AsRef<Path>, trace: &[EpochLoss]) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from("epoch,critic,generator,penalty\n");
    for r in trace {
        text.push_str(&format!("{},{},{},{}\n", r.epoch, r.critic, r.generator, r.penalty));
    }
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
