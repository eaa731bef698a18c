//! ADAM and the mini-batch training loop.

use log::info;

use crate::baseline::FfnParams;
use crate::error::{Error, Result};
use crate::math::Rng;
use crate::params::ParamSet;
use crate::recurrent::{backward_accumulate, cross_entropy_loss, forward_vectors, LstmParams};
use crate::sampling::SampleSequence;

pub const DEFAULT_LEARNING_RATE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(num_params: usize, alpha: f64) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn with_hyper(num_params: usize, hyper: &AdamHyper) -> Self {
        AdamState {
            beta1: hyper.beta1,
            beta2: hyper.beta2,
            epsilon: hyper.epsilon,
            ..Self::new(num_params, hyper.alpha)
        }
    }

    /// One update on flat arrays.
    pub fn adam_update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "ADAM state for {} parameters given {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let (c1, c2) = self.corrections();
        self.update_range(0, params, grads, c1, c2);
        Ok(())
    }

    /// One update applied block by block, in the parameter set's order.
    pub fn step_params<P: ParamSet>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        if params.num_params() != self.m.len() || grads.num_params() != self.m.len() {
            return Err(Error::shape("ADAM state does not match the parameter set"));
        }
        self.step += 1;
        let (c1, c2) = self.corrections();
        let mut off = 0;
        for (p, g) in params.blocks_mut().into_iter().zip(grads.blocks()) {
            self.update_range(off, p, g, c1, c2);
            off += p.len();
        }
        Ok(())
    }

    fn corrections(&self) -> (f64, f64) {
        let t = self.step as i32;
        (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t))
    }

    fn update_range(&mut self, off: usize, params: &mut [f64], grads: &[f64], c1: f64, c2: f64) {
        let m = &mut self.m[off..off + params.len()];
        let v = &mut self.v[off..off + params.len()];
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m).zip(v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.alpha * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// ADAM hyperparameters, separate from the moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamHyper {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            alpha: DEFAULT_LEARNING_RATE,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub shuffle_seed: u64,
    /// Fraction of the dataset kept out of the updates and used only to
    /// report a held-out loss per epoch.
    pub holdout_fraction: f64,
    /// Log every this many epochs; `0` disables progress logging.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 30,
            shuffle_seed: 0,
            holdout_fraction: 0.0,
            log_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::argument("batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::argument("epochs must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::argument("holdout_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// A model the training loop can drive.
pub trait Trainable: ParamSet {
    fn check_sample(&self, sample: &SampleSequence) -> Result<()>;

    /// Loss of one labeled sample; its gradient is added into `grads`.
    fn accumulate_gradient(&self, sample: &SampleSequence, label: usize, grads: &mut Self) -> Result<f64>;

    fn loss(&self, sample: &SampleSequence, label: usize) -> Result<f64>;

    fn predict(&self, sample: &SampleSequence) -> Result<usize>;
}

impl Trainable for LstmParams {
    fn check_sample(&self, sample: &SampleSequence) -> Result<()> {
        let n = self.config.seq_len;
        if sample.is_empty() || (n != 0 && sample.len() != n) {
            return Err(Error::shape(format!(
                "sample of length {} for a model expecting {n}",
                sample.len()
            )));
        }
        if let Some(v) = sample.vectors.iter().find(|v| v.len() != self.input_dim()) {
            return Err(Error::shape(format!(
                "sample vector of length {} for input_dim {}",
                v.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn accumulate_gradient(&self, sample: &SampleSequence, label: usize, grads: &mut Self) -> Result<f64> {
        let trace = forward_vectors(self, &sample.vectors)?;
        let loss = cross_entropy_loss(&trace.probabilities, label)?;
        backward_accumulate(self, &trace, label, grads)?;
        Ok(loss)
    }

    fn loss(&self, sample: &SampleSequence, label: usize) -> Result<f64> {
        let trace = forward_vectors(self, &sample.vectors)?;
        cross_entropy_loss(&trace.probabilities, label)
    }

    fn predict(&self, sample: &SampleSequence) -> Result<usize> {
        Ok(forward_vectors(self, &sample.vectors)?.prediction())
    }
}

impl Trainable for FfnParams {
    fn check_sample(&self, sample: &SampleSequence) -> Result<()> {
        if sample.len() != 1 || sample.input_dim() != self.input_dim() {
            return Err(Error::shape(format!(
                "feedforward model takes one vector of {}, got {} of {}",
                self.input_dim(),
                sample.len(),
                sample.input_dim()
            )));
        }
        Ok(())
    }

    fn accumulate_gradient(&self, sample: &SampleSequence, label: usize, grads: &mut Self) -> Result<f64> {
        self.loss_and_grad(&sample.vectors[0], label, grads)
    }

    fn loss(&self, sample: &SampleSequence, label: usize) -> Result<f64> {
        let p = crate::baseline::ffn_forward(self, &sample.vectors[0])?;
        cross_entropy_loss(&p, label)
    }

    fn predict(&self, sample: &SampleSequence) -> Result<usize> {
        Ok(crate::math::argmax(&crate::baseline::ffn_forward(self, &sample.vectors[0])?))
    }
}

/// Mean gradient and mean loss over a batch.
pub fn batch_gradient<M: Trainable>(model: &M, batch: &[&SampleSequence]) -> Result<(M, f64)> {
    let mut grads = model.zeros_like();
    let mut loss = 0.0;
    for s in batch {
        let label = s
            .label
            .ok_or_else(|| Error::argument(format!("unlabeled training sample at ({}, {})", s.row, s.col)))?;
        loss += model.accumulate_gradient(s, label, &mut grads)?;
    }
    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    Ok((grads, loss * inv))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mean_loss: f64,
    pub holdout_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub history: Vec<EpochLoss>,
    pub steps: u64,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |e| e.mean_loss)
    }

    /// Two-column `epoch<TAB>mean_loss` text, one line per epoch.
    pub fn loss_log(&self) -> String {
        let mut s = String::from("epoch\tmean_loss\n");
        for e in &self.history {
            s.push_str(&format!("{}\t{:.10}\n", e.epoch, e.mean_loss));
        }
        s
    }
}

pub fn mean_loss<M: Trainable>(model: &M, samples: &[&SampleSequence]) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        let label = s.label.ok_or_else(|| Error::argument("unlabeled sample"))?;
        total += model.loss(s, label)?;
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Shuffled mini-batch ADAM over `epochs`; the model is updated in place.
/// Each epoch's mean loss is the average of the per-batch losses, each
/// measured just before that batch's update.
pub fn train<M: Trainable>(
    model: &mut M,
    dataset: &[SampleSequence],
    cfg: &TrainConfig,
    adam: &mut AdamState,
) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::argument("empty training set"));
    }
    for s in dataset {
        model.check_sample(s)?;
    }
    if adam.m.len() != model.num_params() {
        return Err(Error::shape("ADAM state does not match the model"));
    }
    let mut rng = Rng::seed(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let held = (cfg.holdout_fraction * dataset.len() as f64).floor() as usize;
    let (fit_idx, held_idx) = if held > 0 {
        rng.shuffle(&mut order);
        let held_idx = order.split_off(order.len() - held);
        (order, held_idx)
    } else {
        (order, Vec::new())
    };
    if fit_idx.is_empty() {
        return Err(Error::argument("holdout leaves no training samples"));
    }
    let held_samples: Vec<&SampleSequence> = held_idx.iter().map(|&i| &dataset[i]).collect();
    let mut order = fit_idx;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut weight = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&SampleSequence> = chunk.iter().map(|&i| &dataset[i]).collect();
            let (grads, loss) = batch_gradient(model, &batch)?;
            adam.step_params(model, &grads)?;
            loss_sum += loss * batch.len() as f64;
            weight += batch.len();
        }
        let epoch_loss = loss_sum / weight as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::argument(format!("training diverged at epoch {epoch}")));
        }
        let holdout_loss = if held_samples.is_empty() {
            None
        } else {
            Some(mean_loss(model, &held_samples)?)
        };
        if cfg.log_every > 0 && epoch % cfg.log_every == 0 {
            match holdout_loss {
                Some(h) => info!("epoch {epoch}: loss {epoch_loss:.5}, held-out {h:.5}"),
                None => info!("epoch {epoch}: loss {epoch_loss:.5}"),
            }
        }
        history.push(EpochLoss {
            epoch,
            mean_loss: epoch_loss,
            holdout_loss,
        });
    }
    Ok(TrainReport {
        history,
        steps: adam.step,
    })
}

/// Fraction of labeled samples the model gets right.
pub fn accuracy<M: Trainable>(model: &M, samples: &[SampleSequence]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::argument("no samples to score"));
    }
    let mut hit = 0usize;
    for s in samples {
        if Some(model.predict(s)?) == s.label {
            hit += 1;
        }
    }
    Ok(hit as f64 / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vector;
    use crate::recurrent::LstmConfig;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut a = AdamState::new(3, 0.1);
        let mut p = vec![1.0, -2.0, 3.0];
        a.adam_update(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(a.step, 1);
    }

    #[test]
    fn first_step_by_hand() {
        let mut a = AdamState::new(1, 0.1);
        let mut p = vec![0.0];
        a.adam_update(&mut p, &[1.0]).unwrap();
        // m_hat = 1, v_hat = 1
        assert!((p[0] - (-0.1 / (1.0 + 1e-8))).abs() < 1e-15);
        assert!((p[0] + 0.09999999).abs() < 1e-8);
    }

    #[test]
    fn length_mismatch() {
        let mut a = AdamState::new(2, 0.1);
        assert!(matches!(a.adam_update(&mut [0.0; 3], &[0.0; 3]), Err(Error::Shape(_))));
    }

    #[test]
    fn step_size_stays_bounded() {
        let mut a = AdamState::new(50, 1e-3);
        let mut rng = Rng::seed(4);
        let mut p = vec![0.0; 50];
        for _ in 0..500 {
            let g = rng.uniform(-5.0, 5.0, 50).unwrap();
            let before = p.clone();
            a.adam_update(&mut p, &g).unwrap();
            for (x, y) in p.iter().zip(&before) {
                assert!((x - y).abs() <= 10.0 * a.alpha);
            }
        }
    }

    #[test]
    fn flat_and_blockwise_updates_agree() {
        let mut rng = Rng::seed(2);
        let model = LstmParams::init(LstmConfig::new(3, 2, 2, 0), &mut rng).unwrap();
        let mut grads = model.zeros_like();
        for b in grads.blocks_mut() {
            for v in b.iter_mut() {
                *v = rng.uniform_scalar(-1.0, 1.0);
            }
        }
        let mut a1 = AdamState::new(model.num_params(), 0.01);
        let mut a2 = a1.clone();
        let mut m1 = model.clone();
        let mut flat = model.to_flat();
        for _ in 0..3 {
            a1.step_params(&mut m1, &grads).unwrap();
            a2.adam_update(&mut flat, &grads.to_flat()).unwrap();
        }
        assert_eq!(m1.to_flat(), flat);
    }

    fn toy(n: usize, rng: &mut Rng) -> Vec<SampleSequence> {
        (0..n)
            .map(|i| {
                let label = i % 2;
                let centre = if label == 0 { -0.5 } else { 0.5 };
                let v: Vec<f64> = (0..8).map(|_| centre + rng.uniform_scalar(-0.3, 0.3)).collect();
                SampleSequence {
                    vectors: vec![Vector::from(v)],
                    label: Some(label),
                    row: i,
                    col: 0,
                    valid: vec![true],
                }
            })
            .collect()
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let mut rng = Rng::seed(10);
        let data = toy(200, &mut rng);
        let mut model = LstmParams::init(LstmConfig::new(8, 4, 2, 1), &mut rng).unwrap();
        let cfg = TrainConfig {
            batch_size: 16,
            epochs: 200,
            log_every: 0,
            ..TrainConfig::default()
        };
        let mut adam = AdamState::new(model.num_params(), DEFAULT_LEARNING_RATE);
        let report = train(&mut model, &data, &cfg, &mut adam).unwrap();
        assert!(accuracy(&model, &data).unwrap() >= 0.99);
        assert!(report.final_loss() < 0.5 * report.history[0].mean_loss);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = Rng::seed(12);
        let data = toy(40, &mut rng);
        let run = || {
            let mut model = FfnParams::init(8, 2, crate::baseline::Activation::Sigmoid, &mut Rng::seed(1));
            let cfg = TrainConfig {
                batch_size: 8,
                epochs: 3,
                shuffle_seed: 99,
                holdout_fraction: 0.25,
                log_every: 0,
            };
            let mut adam = AdamState::new(model.num_params(), 1e-3);
            let r = train(&mut model, &data, &cfg, &mut adam).unwrap();
            (r, model)
        };
        let (a, ma) = run();
        let (b, mb) = run();
        assert_eq!(a, b);
        assert_eq!(ma, mb);
        assert!(a.history.iter().all(|e| e.holdout_loss.is_some()));
    }

    #[test]
    fn rejects_bad_configs() {
        let mut rng = Rng::seed(1);
        let data = toy(4, &mut rng);
        let mut model = FfnParams::init(8, 2, crate::baseline::Activation::Sigmoid, &mut rng);
        let mut adam = AdamState::new(model.num_params(), 1e-3);
        let zero_epochs = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        assert!(matches!(train(&mut model, &data, &zero_epochs, &mut adam), Err(Error::Argument(_))));
        assert!(matches!(
            train(&mut model, &[], &TrainConfig::default(), &mut adam),
            Err(Error::Argument(_))
        ));
        let mut wrong = data.clone();
        wrong[0].vectors[0] = Vector::zeros(3);
        assert!(matches!(
            train(&mut model, &wrong, &TrainConfig::default(), &mut adam),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn loss_log_format() {
        let r = TrainReport {
            history: vec![
                EpochLoss { epoch: 1, mean_loss: 0.5, holdout_loss: None },
                EpochLoss { epoch: 2, mean_loss: 0.25, holdout_loss: None },
            ],
            steps: 4,
        };
        assert_eq!(r.loss_log(), "epoch\tmean_loss\n1\t0.5000000000\n2\t0.2500000000\n");
    }
}
