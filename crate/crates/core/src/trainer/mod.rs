//! Optimization: Adam, early stopping, hyperparameters and checkpoints.

mod adam;
mod checkpoint;
mod hyperparams;
mod stopping;

pub use adam::{AdamState, ParamRef, BETA1, BETA2, EPSILON};
pub use checkpoint::{checksum, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use hyperparams::Hyperparams;
pub use stopping::{train_until_stop, EarlyStopping, EpochRecord, EpochTrain, Phase, PhaseLog, Verdict};
