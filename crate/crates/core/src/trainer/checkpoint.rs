//! Self-describing parameter archive: a JSON document holding every tensor
//! under a canonical name plus the vocabulary hash and hyperparameters.
//! Floats are written in shortest round-trip form, so load(save(x)) is
//! bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Hyperparams;
use crate::autodiff::Tensor;
use crate::data::Vocab;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "kan-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub vocab_hash: String,
    pub hyperparams: Hyperparams,
    /// Free-form string metadata (seed, mask policy, ...).
    pub meta: BTreeMap<String, String>,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn new(vocab_hash: impl Into<String>, hyperparams: Hyperparams) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            vocab_hash: vocab_hash.into(),
            hyperparams,
            meta: BTreeMap::new(),
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: &Tensor) {
        self.tensors.insert(name.into(), t.clone());
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Checkpoint(format!("missing metadata `{key}`")))
    }

    pub fn check_vocab(&self, vocab: &Vocab) -> Result<()> {
        let h = vocab.hash();
        if h != self.vocab_hash {
            return Err(Error::Checkpoint(format!(
                "vocabulary hash {h} does not match checkpoint {}",
                self.vocab_hash
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        for (name, t) in &self.tensors {
            if !t.is_finite() {
                return Err(Error::NonFinite(name.clone()));
            }
        }
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(s)?;
        if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported archive {} v{}",
                c.format, c.version
            )));
        }
        for (name, t) in &c.tensors {
            Tensor::new(t.shape().to_vec(), t.data().to_vec())
                .map_err(|e| Error::Checkpoint(format!("tensor `{name}`: {e}")))?;
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_json()?)?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Hex SHA-256 over the shapes and raw bits of `tensors`, in order.
pub fn checksum<'a>(tensors: impl IntoIterator<Item = &'a Tensor>) -> String {
    let mut h = Sha256::new();
    for t in tensors {
        for d in t.shape() {
            h.update((*d as u64).to_le_bytes());
        }
        h.update(b"|");
        for v in t.data() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    crate::data::hex(&h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn json_roundtrip_is_bit_exact(values in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 1..40)) {
            let n = values.len();
            let mut c = Checkpoint::new("abc", Hyperparams::default());
            c.insert("kb.gru.w_update", &Tensor::new(vec![n], values).unwrap());
            let back = Checkpoint::from_json(&c.to_json().unwrap()).unwrap();
            prop_assert!(back.tensors["kb.gru.w_update"].bit_eq(&c.tensors["kb.gru.w_update"]));
            prop_assert_eq!(back, c);
        }
    }

    #[test]
    fn checksum_sees_single_bit_flips() {
        let a = Tensor::vector(vec![1.0, 2.0]);
        let mut b = a.clone();
        b.data_mut()[1] = f64::from_bits(2.0f64.to_bits() ^ 1);
        assert_ne!(checksum([&a]), checksum([&b]));
        assert_eq!(checksum([&a]), checksum([&a.clone()]));
    }

    #[test]
    fn rejects_foreign_format() {
        let mut c = Checkpoint::new("abc", Hyperparams::default());
        c.format = "other".into();
        let s = serde_json::to_string(&c).unwrap();
        assert!(matches!(Checkpoint::from_json(&s), Err(Error::Checkpoint(_))));
    }
}
