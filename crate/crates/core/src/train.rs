//! The supervised training loop and L1 evaluation.

use alloc::vec::Vec;
use core::fmt;

use crate::image::{bicubic_downsample, ImageError, ImagePair};
use crate::net::{images_to_batch, DegradationModel, NetError};
use crate::optim::Adam;
use crate::rng::Rng;
use crate::tensor::{backward, l1_loss, TensorError};

#[derive(Clone, Debug, PartialEq)]
pub enum TrainError {
    EmptyDataset,
    /// Pairs and model disagree on the HR:LR ratio.
    ScaleMismatch { model: usize, pairs: usize },
    /// All training pairs must share the same dimensions.
    PairSizeMismatch,
    BadConfig(&'static str),
    Net(NetError),
    Tensor(TensorError),
    Image(ImageError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::EmptyDataset => write!(f, "no image pairs supplied"),
            TrainError::ScaleMismatch { model, pairs } => {
                write!(f, "model scale {model} does not match pair scale {pairs}")
            }
            TrainError::PairSizeMismatch => write!(f, "pairs have inconsistent dimensions"),
            TrainError::BadConfig(msg) => write!(f, "bad training config: {msg}"),
            TrainError::Net(e) => write!(f, "{e}"),
            TrainError::Tensor(e) => write!(f, "{e}"),
            TrainError::Image(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<NetError> for TrainError {
    fn from(e: NetError) -> Self {
        TrainError::Net(e)
    }
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Tensor(e)
    }
}

impl From<ImageError> for TrainError {
    fn from(e: ImageError) -> Self {
        TrainError::Image(e)
    }
}

/// Training protocol parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Patches cut per source image when assembling datasets.
    pub patches_per_image: usize,
    pub seed: u64,
    /// Periodic checkpoint interval in steps.
    pub checkpoint_every: usize,
    /// Random horizontal/vertical flip augmentation.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 8,
            lr: 1e-4,
            epochs: 50,
            patches_per_image: 50,
            seed: 0,
            checkpoint_every: 1000,
            augment: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig("batch_size must be positive"));
        }
        if !(self.lr > 0.0) {
            return Err(TrainError::BadConfig("lr must be positive"));
        }
        if self.patches_per_image == 0 {
            return Err(TrainError::BadConfig("patches_per_image must be positive"));
        }
        if self.checkpoint_every == 0 {
            return Err(TrainError::BadConfig("checkpoint_every must be positive"));
        }
        Ok(())
    }
}

/// Why a checkpoint callback fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckpointKind {
    /// Every `checkpoint_every` steps.
    Periodic,
    /// End of every epoch.
    Epoch,
    /// New best epoch-mean loss.
    Best,
    /// End of training.
    Last,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainRecord {
    pub step: u64,
    pub epoch: usize,
    /// Batch loss before the update at this step.
    pub loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    pub epoch_mean_loss: Vec<f64>,
}

impl TrainLog {
    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    pub fn best_epoch_loss(&self) -> Option<f64> {
        self.epoch_mean_loss.iter().copied().fold(None, |acc, v| {
            Some(match acc {
                None => v,
                Some(a) => a.min(v),
            })
        })
    }
}

fn check_pairs(model: &DegradationModel, pairs: &[ImagePair]) -> Result<(), TrainError> {
    let scale = model.config().scale;
    let h = pairs[0].hr.height();
    let w = pairs[0].hr.width();
    for p in pairs {
        if p.scale != scale {
            return Err(TrainError::ScaleMismatch { model: scale, pairs: p.scale });
        }
        if p.hr.height() != h || p.hr.width() != w {
            return Err(TrainError::PairSizeMismatch);
        }
    }
    Ok(())
}

/// Runs `epochs` of shuffled, flip-augmented, L1-trained Adam updates.
///
/// `on_checkpoint` fires every `checkpoint_every` steps, after each epoch
/// that improves the mean loss, and once at the end. Single-threaded and
/// bit-deterministic for a fixed config and seed.
pub fn train(
    model: &mut DegradationModel,
    pairs: &[ImagePair],
    cfg: &TrainConfig,
    mut on_checkpoint: impl FnMut(&DegradationModel, u64, CheckpointKind),
) -> Result<TrainLog, TrainError> {
    cfg.validate()?;
    let mut log = TrainLog::default();
    if cfg.epochs == 0 {
        return Ok(log);
    }
    if pairs.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    check_pairs(model, pairs)?;

    let mut rng = Rng::new(cfg.seed);
    let mut adam = Adam::new(model.parameters(), cfg.lr);
    let mut best = f64::INFINITY;
    let mut step: u64 = 0;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        rng.shuffle(&mut order);
        let mut epoch_sum = 0.0;
        let mut epoch_batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mut hrs = Vec::with_capacity(chunk.len());
            let mut lrs = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let flip_h = cfg.augment && rng.coin();
                let flip_v = cfg.augment && rng.coin();
                let (mut hr, mut lr) = (pairs[i].hr.clone(), pairs[i].lr.clone());
                if flip_h {
                    hr = hr.flipped_horizontal();
                    lr = lr.flipped_horizontal();
                }
                if flip_v {
                    hr = hr.flipped_vertical();
                    lr = lr.flipped_vertical();
                }
                hrs.push(hr);
                lrs.push(lr);
            }
            let hr_batch = images_to_batch(&hrs)?;
            let lr_batch = images_to_batch(&lrs)?;
            let pred = model.forward(&hr_batch)?;
            let loss = l1_loss(&pred, &lr_batch)?;
            adam.zero_grad();
            backward(&loss)?;
            adam.step()?;
            step += 1;
            let value = loss.item();
            log.records.push(TrainRecord { step, epoch, loss: value });
            epoch_sum += value;
            epoch_batches += 1;
            if step % cfg.checkpoint_every as u64 == 0 {
                on_checkpoint(model, step, CheckpointKind::Periodic);
            }
        }
        let mean = epoch_sum / epoch_batches as f64;
        log.epoch_mean_loss.push(mean);
        on_checkpoint(model, step, CheckpointKind::Epoch);
        if mean < best {
            best = mean;
            on_checkpoint(model, step, CheckpointKind::Best);
        }
    }
    on_checkpoint(model, step, CheckpointKind::Last);
    Ok(log)
}

/// Mean L1 between the model's clamped LR predictions and the ground truth,
/// pooled over every pixel of every pair.
pub fn evaluate_l1(model: &DegradationModel, pairs: &[ImagePair]) -> Result<f64, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let scale = model.config().scale;
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in pairs {
        if p.scale != scale {
            return Err(TrainError::ScaleMismatch { model: scale, pairs: p.scale });
        }
        let pred = model.forward_image(&p.hr)?;
        sum += pred
            .data()
            .iter()
            .zip(p.lr.data().iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
        count += pred.data().len();
    }
    Ok(sum / count as f64)
}

/// The bicubic-downsampling baseline over the same pairs.
pub fn bicubic_l1(pairs: &[ImagePair]) -> Result<f64, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for p in pairs {
        let down = bicubic_downsample(&p.hr, p.scale)?;
        sum += down
            .data()
            .iter()
            .zip(p.lr.data().iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
        count += down.data().len();
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::covariance;
    use crate::net::NetConfig;
    use crate::synth::{synth_pairs, SyntheticSpec};

    fn small_model() -> DegradationModel {
        let cfg = NetConfig {
            channels: 4,
            num_resblocks: 1,
            scale: 2,
            bank: crate::gauss::BankSpec::with_factors(alloc::vec![1.0]),
        };
        DegradationModel::new(cfg, 11).unwrap()
    }

    fn small_pairs(count: usize, seed: u64) -> Vec<ImagePair> {
        let cov = covariance(1.0, 0.4, 0.3).unwrap();
        let mut spec = SyntheticSpec::procedural(cov, 2);
        spec.hr_size = 16;
        synth_pairs(&spec, count, seed).unwrap()
    }

    #[test]
    fn zero_epochs_changes_nothing() {
        let mut model = small_model();
        let before: Vec<Vec<f64>> = model.parameters().iter().map(|p| p.to_vec()).collect();
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let mut fired = false;
        let log = train(&mut model, &[], &cfg, |_, _, _| fired = true).unwrap();
        assert!(log.records.is_empty());
        assert!(log.epoch_mean_loss.is_empty());
        assert!(!fired);
        let after: Vec<Vec<f64>> = model.parameters().iter().map(|p| p.to_vec()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn empty_dataset_errors() {
        let mut model = small_model();
        let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
        assert_eq!(
            train(&mut model, &[], &cfg, |_, _, _| {}).unwrap_err(),
            TrainError::EmptyDataset
        );
        assert_eq!(evaluate_l1(&model, &[]).unwrap_err(), TrainError::EmptyDataset);
    }

    #[test]
    fn scale_mismatch_rejected() {
        let mut model = small_model();
        let cov = covariance(1.0, 0.0, 0.3).unwrap();
        let mut spec = SyntheticSpec::procedural(cov, 4);
        spec.hr_size = 16;
        let pairs = synth_pairs(&spec, 2, 0).unwrap();
        let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
        assert_eq!(
            train(&mut model, &pairs, &cfg, |_, _, _| {}).unwrap_err(),
            TrainError::ScaleMismatch { model: 2, pairs: 4 }
        );
    }

    #[test]
    fn training_runs_and_logs() {
        let mut model = small_model();
        let pairs = small_pairs(4, 21);
        let cfg = TrainConfig {
            batch_size: 2,
            epochs: 3,
            seed: 1,
            checkpoint_every: 4,
            ..TrainConfig::default()
        };
        let mut events = Vec::new();
        let log = train(&mut model, &pairs, &cfg, |_, step, kind| {
            events.push((step, kind));
        })
        .unwrap();
        // 3 epochs x 2 batches.
        assert_eq!(log.records.len(), 6);
        assert_eq!(log.epoch_mean_loss.len(), 3);
        assert!(events.contains(&(4, CheckpointKind::Periodic)));
        assert_eq!(events.last(), Some(&(6, CheckpointKind::Last)));
        assert!(log.records.iter().all(|r| r.loss.is_finite()));
    }

    #[test]
    fn deterministic_training() {
        let pairs = small_pairs(3, 2);
        let cfg = TrainConfig { batch_size: 2, epochs: 2, seed: 5, ..TrainConfig::default() };
        let run = |seed| {
            let mut model = DegradationModel::new(
                NetConfig {
                    channels: 4,
                    num_resblocks: 1,
                    scale: 2,
                    bank: crate::gauss::BankSpec::with_factors(alloc::vec![1.0]),
                },
                seed,
            )
            .unwrap();
            let log = train(&mut model, &pairs, &cfg, |_, _, _| {}).unwrap();
            let params: Vec<Vec<u64>> = model
                .parameters()
                .iter()
                .map(|p| p.to_vec().iter().map(|v| v.to_bits()).collect())
                .collect();
            (log, params)
        };
        let (log_a, params_a) = run(3);
        let (log_b, params_b) = run(3);
        assert_eq!(log_a, log_b);
        assert_eq!(params_a, params_b);
    }

    #[test]
    fn perfect_model_scores_zero() {
        // Evaluate a model against its own outputs.
        let model = small_model();
        let pairs = small_pairs(2, 9);
        let self_pairs: Vec<ImagePair> = pairs
            .iter()
            .map(|p| {
                let lr = model.forward_image(&p.hr).unwrap();
                ImagePair::new(p.hr.clone(), lr, p.scale).unwrap()
            })
            .collect();
        assert_eq!(evaluate_l1(&model, &self_pairs).unwrap(), 0.0);
    }
}
