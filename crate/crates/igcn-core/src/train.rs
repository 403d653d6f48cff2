//! Full-batch transductive training with early stopping.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grad::backward;
use crate::metrics::{confusion, metrics};
use crate::model::{
    forward, forward_eval, init_params, masked_cross_entropy, Mode, ModelParams,
    MultiModalDataset, Variant,
};
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::rng::seeded;

/// Validation loss must drop by at least this much to count as improvement.
pub const MIN_IMPROVEMENT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Early stopping cannot trigger before this epoch.
    pub min_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub hidden_width: usize,
    pub dropout_rate: f64,
    /// Seeds parameter initialization and the dropout stream.
    pub seed: u64,
    pub variant: Variant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 2000,
            min_epochs: 200,
            patience: 30,
            learning_rate: 0.01,
            hidden_width: 64,
            dropout_rate: 0.5,
            seed: 0,
            variant: Variant::Full,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidParameter(msg));
        if self.max_epochs == 0 || self.min_epochs > self.max_epochs {
            return bad(format!(
                "need 0 < min_epochs ({}) <= max_epochs ({})",
                self.min_epochs, self.max_epochs
            ));
        }
        if self.patience == 0 {
            return bad("patience must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.hidden_width == 0 {
            return bad("hidden width must be >= 1".into());
        }
        Ok(())
    }
}

/// Metrics recorded after the parameter update of one epoch. Everything
/// except `train_loss` comes from an eval-mode pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Train-mode (dropout) loss that produced this epoch's gradient.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_macro_f1: f64,
}

/// Patience-based stopping on a monitored loss, with a minimum epoch count.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    min_epochs: usize,
    patience: usize,
    best_loss: f64,
    best_epoch: usize,
}

impl EarlyStopping {
    pub fn new(min_epochs: usize, patience: usize) -> Self {
        Self {
            min_epochs,
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
        }
    }

    /// Records the loss of 1-based `epoch`. Returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> (bool, bool) {
        let improved = loss < self.best_loss - MIN_IMPROVEMENT;
        if improved {
            self.best_loss = loss;
            self.best_epoch = epoch;
        }
        let stop = epoch >= self.min_epochs && epoch - self.best_epoch >= self.patience;
        (improved, stop)
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub stopped_at_epoch: usize,
}

/// Trains from a fresh initialization and returns the parameters of the
/// epoch with the lowest validation loss.
///
/// Each epoch runs one train-mode forward pass over all nodes, backpropagates
/// the summed loss over the training mask and takes one Adam step. Training
/// stops once no improvement has been seen for `patience` epochs, but never
/// before `min_epochs`, or at `max_epochs`.
pub fn train(dataset: &MultiModalDataset, config: &TrainConfig) -> Result<(ModelParams, TrainHistory)> {
    let mut params = init_params(
        &dataset.feature_dims(),
        config.hidden_width,
        dataset.num_classes(),
        config.seed,
    )?;
    params.variant = config.variant;
    train_from(dataset, params, config)
}

/// Like [`train`], starting from the given parameters.
pub fn train_from(
    dataset: &MultiModalDataset,
    mut params: ModelParams,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    params.check_against(dataset)?;
    let masks = dataset.masks();
    if masks.train.is_empty() {
        return Err(Error::Empty("training mask"));
    }
    if masks.val.is_empty() {
        return Err(Error::Empty("validation mask"));
    }
    let labels = dataset.labels();
    let classes = dataset.num_classes();

    // distinct stream from the one that initialized the weights
    let mut rng = seeded(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = AdamState::new(&params, AdamConfig::new(config.learning_rate));
    let mode = Mode::Train {
        dropout: config.dropout_rate,
    };

    let mut best_params = params.clone();
    let mut stopper = EarlyStopping::new(config.min_epochs, config.patience);
    let mut epochs = Vec::new();

    for epoch in 1..=config.max_epochs {
        let cache = forward(dataset, &params, mode, &mut rng)?;
        let (train_loss, grads) = backward(dataset, &params, &cache, &masks.train)?;
        if !grads.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite gradient at epoch {epoch}"
            )));
        }
        adam_step(&mut params, &grads, &mut adam)?;

        let eval = forward_eval(dataset, &params)?;
        let val_loss = masked_cross_entropy(&eval.logits, labels, &masks.val)?;
        let preds = eval.predictions();
        let hits = masks.train.iter().filter(|&&j| preds[j] == labels[j]).count();
        let val_truth: Vec<usize> = masks.val.iter().map(|&j| labels[j]).collect();
        let val_pred: Vec<usize> = masks.val.iter().map(|&j| preds[j]).collect();
        let val_macro_f1 = metrics(&confusion(&val_truth, &val_pred, classes)?)?.macro_f1;
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            train_accuracy: hits as f64 / masks.train.len() as f64,
            val_loss,
            val_macro_f1,
        });

        let (improved, stop) = stopper.observe(epoch, val_loss);
        if improved {
            best_params.clone_from(&params);
        }
        if stop {
            break;
        }
    }

    let stopped_at_epoch = epochs.len();
    let best_epoch = stopper.best_epoch();
    if best_epoch == 0 {
        // validation loss was never finite
        return Err(Error::InvalidParameter("validation loss never improved".into()));
    }
    Ok((
        best_params,
        TrainHistory {
            epochs,
            best_epoch,
            stopped_at_epoch,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig {
                min_epochs: 10,
                max_epochs: 5,
                ..Default::default()
            },
            TrainConfig {
                patience: 0,
                ..Default::default()
            },
            TrainConfig {
                dropout_rate: 1.0,
                ..Default::default()
            },
            TrainConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn strictly_improving_loss_never_stops() {
        let mut s = EarlyStopping::new(200, 30);
        for epoch in 1..=2000 {
            let (improved, stop) = s.observe(epoch, 10.0 - epoch as f64 * 1e-3);
            assert!(improved && !stop);
        }
        assert_eq!(s.best_epoch(), 2000);
    }

    #[test]
    fn stopping_waits_for_min_epochs() {
        let mut s = EarlyStopping::new(200, 30);
        s.observe(1, 1.0);
        for epoch in 2..200 {
            assert!(!s.observe(epoch, 2.0).1, "stopped at {epoch}");
        }
        assert!(s.observe(200, 2.0).1);
    }

    #[test]
    fn stopping_counts_patience_from_best() {
        let mut s = EarlyStopping::new(5, 3);
        let losses = [5.0, 4.0, 3.0, 3.0, 3.0, 2.0, 2.5, 2.0 - 1e-7, 2.2];
        let mut stopped = None;
        for (i, &l) in losses.iter().enumerate() {
            if s.observe(i + 1, l).1 {
                stopped = Some(i + 1);
                break;
            }
        }
        // epoch 6 is the last strict improvement; 2.0 - 1e-7 is below the threshold
        assert_eq!(s.best_epoch(), 6);
        assert_eq!(stopped, Some(9));
    }
}
