use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub lr: f64,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Mask scale at the end of annealing and at retrieval.
    pub s_max: f64,
    /// Keep probability of the dropout between embeddings and the GRU.
    pub dropout_keep: f64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub max_epochs: usize,
    /// Maximum document length in tokens.
    pub step: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lr: 0.001,
            batch_size: 64,
            patience: 5,
            s_max: 140.0,
            dropout_keep: 0.5,
            embed_dim: 300,
            hidden_dim: 300,
            max_epochs: 100,
            step: 256,
        }
    }
}

impl Hyperparams {
    /// Desk-scale network: 64-d embeddings and hidden states, 32-token documents.
    pub fn desk() -> Self {
        Hyperparams {
            embed_dim: 64,
            hidden_dim: 64,
            step: 32,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("hyperparams: {m}")));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr {} must be positive", self.lr));
        }
        if !(self.s_max > 1.0 && self.s_max.is_finite()) {
            return bad(format!("s_max {} must exceed 1", self.s_max));
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return bad(format!("dropout_keep {} not in (0, 1]", self.dropout_keep));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("patience", self.patience),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("max_epochs", self.max_epochs),
            ("step", self.step),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}
