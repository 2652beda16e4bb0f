//! The declarative run configuration read by `kan run`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use kan_core::data::{SyntheticSpec, DEFAULT_MIN_FREQ};
use kan_core::{Hyperparams, ModelKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Run directory for reports and checkpoints.
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sequences")]
    pub sequences: usize,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    /// Directory written by `kan prepare`.
    pub data: Option<PathBuf>,
    /// Generate tasks instead of reading prepared data.
    pub synthetic: Option<SyntheticSpec>,
    /// Word vectors in text format; random vectors when absent.
    pub embeddings: Option<PathBuf>,
    #[serde(default = "default_min_freq")]
    pub min_freq: usize,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    /// Task counts at which transfer is tabulated; every 6 tasks by default.
    pub checkpoints: Option<Vec<usize>>,
}

fn default_sequences() -> usize {
    5
}

fn default_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}

fn default_min_freq() -> usize {
    DEFAULT_MIN_FREQ
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads and validates `path`, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve(base);
        config.validate()?;
        Ok((config, text))
    }

    pub fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.out);
        self.data.as_mut().map(join);
        self.embeddings.as_mut().map(join);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        match (&self.data, &self.synthetic) {
            (Some(_), Some(_)) => return bad("set either `data` or `[synthetic]`, not both".into()),
            (None, None) => return bad("one of `data` or `[synthetic]` is required".into()),
            (None, Some(spec)) => spec.validate().map_err(|e| CliError::Config(e.to_string()))?,
            (Some(_), None) => {}
        }
        if self.sequences == 0 {
            return bad("sequences must be positive".into());
        }
        if self.models.is_empty() {
            return bad("models must not be empty".into());
        }
        if self.models.iter().collect::<BTreeSet<_>>().len() != self.models.len() {
            return bad("models lists a model twice".into());
        }
        if self.min_freq == 0 {
            return bad("min_freq must be positive".into());
        }
        self.hyperparams
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(ks) = &self.checkpoints {
            if ks.is_empty() || ks.contains(&0) {
                return bad("checkpoints must be a non-empty list of positive task counts".into());
            }
            if let Some(spec) = &self.synthetic {
                if let Some(k) = ks.iter().find(|&&k| k > spec.n_tasks) {
                    return bad(format!("checkpoint {k} exceeds the {} synthetic tasks", spec.n_tasks));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_synthetic_config() {
        let c = RunConfig::parse("out = \"r\"\n[synthetic]\nn_tasks = 3\n").unwrap();
        c.validate().unwrap();
        assert_eq!(c.models, ModelKind::ALL.to_vec());
        assert_eq!(c.sequences, 5);
        assert_eq!(c.hyperparams, Hyperparams::default());
        assert_eq!(c.synthetic.unwrap().n_tasks, 3);
    }

    #[test]
    fn model_names_and_overrides() {
        let c = RunConfig::parse(
            "out = \"r\"\ndata = \"d\"\nmodels = [\"KAN\", \"N-CL\"]\n[hyperparams]\nhidden_dim = 64\n",
        )
        .unwrap();
        assert_eq!(c.models, vec![ModelKind::Kan, ModelKind::NaiveCl]);
        assert_eq!(c.hyperparams.hidden_dim, 64);
        assert_eq!(c.hyperparams.s_max, 140.0);
    }

    #[test]
    fn rejections() {
        for text in [
            "out = \"r\"\n",
            "out = \"r\"\ndata = \"d\"\n[synthetic]\n",
            "out = \"r\"\ndata = \"d\"\nsequences = 0\n",
            "out = \"r\"\ndata = \"d\"\nmodels = [\"KAN\", \"KAN\"]\n",
            "out = \"r\"\ndata = \"d\"\n[hyperparams]\ndropout_keep = 0.0\n",
            "out = \"r\"\n[synthetic]\nn_tasks = 2\nshare = 1.5\n",
            "out = \"r\"\ncheckpoints = [3]\n[synthetic]\nn_tasks = 2\n",
        ] {
            let checked = RunConfig::parse(text).and_then(|c| c.validate());
            assert!(matches!(checked, Err(CliError::Config(_))), "{text}");
        }
        assert!(RunConfig::parse("out = \"r\"\ndata = \"d\"\nmodels = [\"EWC\"]\n").is_err());
        assert!(RunConfig::parse("out = \"r\"\ndata = \"d\"\nepochs = 3\n").is_err());
    }
}
