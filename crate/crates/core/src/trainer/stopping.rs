use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome of feeding one validation score to [`EarlyStopping`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    NoImprovement,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strictly better
/// validation accuracy.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, accuracy: f64) -> Verdict {
        if self.best.is_none_or(|b| accuracy > b) {
            self.best = Some(accuracy);
            self.best_epoch = epoch;
            self.stale = 0;
            return Verdict::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            Verdict::Stop
        } else {
            Verdict::NoImprovement
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best.map(|b| (self.best_epoch, b))
    }
}

/// What one training epoch reports back.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EpochTrain {
    pub mean_loss: f64,
    /// First and last mask scale of the epoch, for annealed phases.
    pub s_range: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub s_range: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

/// A training phase driven by [`train_until_stop`].
pub trait Phase {
    type Snapshot;

    /// Short label for progress logs.
    fn label(&self) -> String;
    /// Runs one epoch; `epoch` counts from 1.
    fn train_epoch(&mut self, epoch: usize) -> Result<EpochTrain>;
    fn validate(&mut self) -> Result<f64>;
    fn snapshot(&self) -> Self::Snapshot;
    fn restore(&mut self, snapshot: Self::Snapshot);
}

/// Trains until early stopping fires or `max_epochs` is reached, then restores
/// the parameters of the best validation epoch.
pub fn train_until_stop<P: Phase>(phase: &mut P, patience: usize, max_epochs: usize) -> Result<PhaseLog> {
    if max_epochs == 0 {
        return Err(Error::InvalidArgument("max_epochs must be positive".into()));
    }
    let mut stopper = EarlyStopping::new(patience);
    let mut best = None;
    let mut epochs = Vec::new();
    for epoch in 1..=max_epochs {
        let train = phase.train_epoch(epoch)?;
        let acc = phase.validate()?;
        match train.s_range {
            Some((s0, s1)) => log::info!(
                "{} epoch {epoch}: loss {:.4} val acc {acc:.4} s {s0:.6}..{s1:.3}",
                phase.label(),
                train.mean_loss
            ),
            None => log::info!("{} epoch {epoch}: loss {:.4} val acc {acc:.4}", phase.label(), train.mean_loss),
        }
        epochs.push(EpochRecord {
            epoch,
            train_loss: train.mean_loss,
            val_accuracy: acc,
            s_range: train.s_range,
        });
        match stopper.observe(epoch, acc) {
            Verdict::Improved => best = Some(phase.snapshot()),
            Verdict::NoImprovement => {}
            Verdict::Stop => break,
        }
    }
    let (best_epoch, best_val_accuracy) = stopper.best().expect("at least one epoch ran");
    phase.restore(best.expect("first epoch always improves"));
    Ok(PhaseLog {
        epochs,
        best_epoch,
        best_val_accuracy,
    })
}
