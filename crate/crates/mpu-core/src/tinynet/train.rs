//! Momentum-SGD training loop with seeded shuffling.

use super::{Gradients, NetError, Network};
use crate::numerics::{Rng, Vec64};

/// Paired inputs and targets.
#[derive(Clone, Debug, Default)]
pub struct SplitData {
    pub inputs: Vec<Vec64>,
    pub targets: Vec<Vec64>,
}

impl SplitData {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn push(&mut self, input: Vec64, target: Vec64) {
        self.inputs.push(input);
        self.targets.push(target);
    }
}

/// A train/test split plus the seed that generated it.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub train: SplitData,
    pub test: SplitData,
    pub seed: u64,
}

/// Hyperparameters of one training run.
#[derive(Clone, Copy, Debug)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    fn validate(&self) -> Result<(), NetError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::BadConfig(format!(
                "learning_rate {} must be finite and nonnegative",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(NetError::BadConfig(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(NetError::BadConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// One line of training history.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_mse: f64,
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &Vec64, target: &Vec64) -> Result<(f64, Vec64), NetError> {
    if pred.len() != target.len() {
        return Err(NetError::LengthMismatch {
            expected: target.len(),
            got: pred.len(),
        });
    }
    let n = pred.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (p, t) in pred.iter().zip(target.iter()) {
        let d = p - t;
        value += d * d;
        grad.push(2.0 * d / n);
    }
    Ok((value / n, Vec64::new(grad)))
}

/// Mean MSE of the network over a split, accumulated in sample order.
pub fn evaluate_mse(net: &Network, split: &SplitData) -> Result<f64, NetError> {
    if split.is_empty() {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for (x, y) in split.inputs.iter().zip(&split.targets) {
        let (v, _) = mse_loss(&net.forward(x), y)?;
        acc += v;
    }
    Ok(acc / split.len() as f64)
}

/// Classic momentum SGD: `v <- mu v - eta grad`, `theta <- theta + v`.
/// Mini-batches come from a seeded shuffle each epoch; per-batch gradients
/// are averaged in fixed sample order, so a given seed and config reproduce
/// the same history. Returns one record per epoch with the full train and
/// test MSE at epoch end.
pub fn train(
    net: &mut Network,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<Vec<EpochRecord>, NetError> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(NetError::BadConfig("training split is empty".into()));
    }
    let mut rng = Rng::new(cfg.seed);
    let mut velocity = Gradients::zeros_like(net);
    let mut history = Vec::with_capacity(cfg.epochs);
    let n = data.train.len();

    for epoch in 0..cfg.epochs {
        let order = rng.permutation(n);
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut batch_grads = Gradients::zeros_like(net);
            let mut batch_loss = 0.0;
            for &i in batch {
                let (pred, cache) = net.forward_cached(&data.train.inputs[i]);
                let (loss, loss_grad) = mse_loss(&pred, &data.train.targets[i])?;
                batch_loss += loss;
                let grads = net.backward(&loss_grad, &cache)?;
                batch_grads.add_scaled(&grads, 1.0);
            }
            let inv = 1.0 / batch.len() as f64;
            batch_grads.scale(inv);
            batch_loss *= inv;
            if !batch_loss.is_finite() {
                return Err(NetError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            velocity.scale(cfg.momentum);
            velocity.add_scaled(&batch_grads, -cfg.learning_rate);
            net.apply_step(&velocity);
        }
        let train_mse = evaluate_mse(net, &data.train)?;
        let test_mse = evaluate_mse(net, &data.test)?;
        if !train_mse.is_finite() || !test_mse.is_finite() {
            return Err(NetError::NonFiniteLoss { epoch, batch: 0 });
        }
        history.push(EpochRecord {
            epoch,
            train_mse,
            test_mse,
        });
    }
    Ok(history)
}
