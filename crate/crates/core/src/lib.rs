//! KAN: a knowledge-base GRU shared across a sequence of binary sentiment
//! tasks, with per-task binary masks deciding which hidden units each task
//! may read and update.
//!
//! The crate holds everything but the command line: a small reverse-mode
//! autodiff engine, the GRU, the data pipeline, the KAN training phases and
//! the evaluation protocol.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod eval;
pub mod kan;
pub mod rng;
pub mod rnn;
pub mod trainer;

pub use autodiff::{Graph, Tensor, Var};
pub use data::{Document, Label, TaskDataset, Vocab};
pub use error::{Error, Result};
pub use eval::{ExperimentReport, SequenceReport};
pub use kan::{ContinualRun, KanModel, LearnerConfig, MaskPolicy, ModelKind, TaskMask};
pub use trainer::{Checkpoint, Hyperparams};
