//! The continual-learning loop and the two baselines built from it.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::model::{KanModel, MaskPolicy};
use super::phases::{ac_train_task, mcl_train_task};
use crate::autodiff::Tensor;
use crate::data::TaskDataset;
use crate::error::{Error, Result};
use crate::trainer::{Checkpoint, Hyperparams, PhaseLog};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    /// A separate network per task.
    #[serde(rename = "ONE")]
    One,
    /// One network trained on every task in turn, without masks.
    #[serde(rename = "N-CL")]
    NaiveCl,
    #[serde(rename = "KAN")]
    Kan,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::One, ModelKind::NaiveCl, ModelKind::Kan];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::One => "ONE",
            ModelKind::NaiveCl => "N-CL",
            ModelKind::Kan => "KAN",
        }
    }

    pub fn learner(self) -> LearnerConfig {
        match self {
            ModelKind::One => LearnerConfig {
                isolated: true,
                train_ac: false,
                policy: MaskPolicy::AllOnes,
            },
            ModelKind::NaiveCl => LearnerConfig {
                isolated: false,
                train_ac: false,
                policy: MaskPolicy::AllOnes,
            },
            ModelKind::Kan => LearnerConfig {
                isolated: false,
                train_ac: true,
                policy: MaskPolicy::Trained,
            },
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model `{s}` (expected ONE, N-CL or KAN)")))
    }
}

/// What a learner does per task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Fresh model for every task, each trained as the first task.
    pub isolated: bool,
    pub train_ac: bool,
    pub policy: MaskPolicy,
}

impl LearnerConfig {
    /// KAN with its AC phases intact but every MCL mask forced to ones.
    pub const KAN_ALL_ONES: LearnerConfig = LearnerConfig {
        isolated: false,
        train_ac: true,
        policy: MaskPolicy::AllOnes,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskLog {
    pub task: String,
    pub ac: Option<PhaseLog>,
    pub mcl: PhaseLog,
}

/// Accuracies gathered while learning a sequence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    /// Test accuracy of each task right after it was learned.
    pub first_learn: Vec<f64>,
    /// Row `k`: test accuracy of tasks `0..=k` after task `k` was learned.
    pub acc_matrix: Vec<Vec<f64>>,
    pub logs: Vec<TaskLog>,
}

/// Learns task `t`: MCL then AC for the first task, AC then MCL afterwards.
pub fn learn_task(model: &mut KanModel, t: usize, data: &TaskDataset, train_ac: bool) -> Result<TaskLog> {
    let mut ac = None;
    if train_ac && t > 0 {
        ac = Some(ac_train_task(model, t, data)?);
    }
    let mcl = mcl_train_task(model, t, data)?;
    if train_ac && t == 0 {
        ac = Some(ac_train_task(model, t, data)?);
    }
    Ok(TaskLog {
        task: data.name.clone(),
        ac,
        mcl,
    })
}

/// A learner part way through a task sequence.
#[derive(Clone, Debug)]
pub struct ContinualRun {
    pub config: LearnerConfig,
    /// For isolated learners, the model of the most recent task.
    pub model: KanModel,
    pub progress: Progress,
}

impl ContinualRun {
    pub fn new(config: LearnerConfig, hp: Hyperparams, seed: u64, embeddings: Arc<Tensor>) -> Result<Self> {
        Ok(ContinualRun {
            config,
            model: KanModel::new(hp, seed, config.policy, embeddings)?,
            progress: Progress::default(),
        })
    }

    pub fn tasks_learned(&self) -> usize {
        self.progress.first_learn.len()
    }

    /// Learns the next task of `tasks` (given in learning order) and records
    /// test accuracies.
    pub fn learn_next(&mut self, tasks: &[TaskDataset]) -> Result<()> {
        let k = self.tasks_learned();
        let data = tasks
            .get(k)
            .ok_or_else(|| Error::InvalidArgument(format!("no task at position {k}")))?;
        let row = if self.config.isolated {
            let m = &self.model;
            self.model = KanModel::new(m.hp.clone(), m.seed, self.config.policy, m.embeddings.clone())?;
            let log = learn_task(&mut self.model, 0, data, self.config.train_ac)?;
            self.progress.logs.push(log);
            let acc = self.model.mcl_accuracy(0, &data.test)?;
            let mut row = self.progress.acc_matrix.last().cloned().unwrap_or_default();
            row.push(acc);
            row
        } else {
            let log = learn_task(&mut self.model, k, data, self.config.train_ac)?;
            self.progress.logs.push(log);
            (0..=k)
                .map(|i| self.model.mcl_accuracy(i, &tasks[i].test))
                .collect::<Result<Vec<_>>>()?
        };
        log::info!("learned {} ({}/{}): test acc {:.4}", data.name, k + 1, tasks.len(), row[k]);
        self.progress.first_learn.push(row[k]);
        self.progress.acc_matrix.push(row);
        Ok(())
    }

    pub fn learn_all(&mut self, tasks: &[TaskDataset]) -> Result<()> {
        while self.tasks_learned() < tasks.len() {
            self.learn_next(tasks)?;
        }
        Ok(())
    }

    /// Test accuracy of every task after the whole sequence.
    pub fn final_accuracies(&self) -> Vec<f64> {
        self.progress.acc_matrix.last().cloned().unwrap_or_default()
    }

    pub fn to_checkpoint(&self, vocab_hash: &str) -> Result<Checkpoint> {
        let mut c = self.model.to_checkpoint(vocab_hash);
        c.meta.insert("learner".into(), serde_json::to_string(&self.config)?);
        c.meta.insert("progress".into(), serde_json::to_string(&self.progress)?);
        Ok(c)
    }

    pub fn from_checkpoint(c: &Checkpoint, embeddings: Arc<Tensor>) -> Result<Self> {
        let config: LearnerConfig = serde_json::from_str(c.meta("learner")?)?;
        let progress: Progress = serde_json::from_str(c.meta("progress")?)?;
        let model = KanModel::from_checkpoint(c, embeddings)?;
        if model.policy != config.policy {
            return Err(Error::Checkpoint("mask policy disagrees with learner".into()));
        }
        Ok(ContinualRun {
            config,
            model,
            progress,
        })
    }
}

/// Learns `tasks` in order from a fresh model.
pub fn continual_learn(
    tasks: &[TaskDataset],
    config: LearnerConfig,
    hp: Hyperparams,
    seed: u64,
    embeddings: Arc<Tensor>,
) -> Result<ContinualRun> {
    if tasks.is_empty() {
        return Err(Error::InvalidArgument("no tasks to learn".into()));
    }
    let mut run = ContinualRun::new(config, hp, seed, embeddings)?;
    run.learn_all(tasks)?;
    Ok(run)
}
