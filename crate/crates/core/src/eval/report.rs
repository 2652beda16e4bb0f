use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::stats::{all_tasks_average, last_task_average, paired_t_test, transfer_table, TTest, TransferRow};
use crate::autodiff::Tensor;
use crate::data::TaskDataset;
use crate::error::{Error, Result};
use crate::kan::{ContinualRun, ModelKind};
use crate::rng::{self, tag};
use crate::trainer::Hyperparams;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// How t-test samples are matched between two models.
pub const PAIRING: &str = "sequence,task";

/// One task order and the seed every model uses on it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub index: usize,
    /// Indices into the task list, in learning order.
    pub order: Vec<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub model: ModelKind,
    pub sequence: usize,
    pub seed: u64,
    /// Task names in learning order.
    pub order: Vec<String>,
    /// Test accuracy of each task right after it was learned.
    pub first_learn: Vec<f64>,
    /// Test accuracy of each task after the whole sequence.
    pub final_acc: Vec<f64>,
    /// Row `k`: accuracies of tasks `0..=k` after learning task `k`.
    pub acc_matrix: Vec<Vec<f64>>,
}

impl SequenceReport {
    pub fn from_run(kind: ModelKind, spec: &SequenceSpec, names: Vec<String>, run: &ContinualRun) -> Self {
        SequenceReport {
            model: kind,
            sequence: spec.index,
            seed: spec.seed,
            order: names,
            first_learn: run.progress.first_learn.clone(),
            final_acc: run.final_accuracies(),
            acc_matrix: run.progress.acc_matrix.clone(),
        }
    }
}

/// Random task orders whose last tasks are pairwise distinct while there are
/// enough tasks, and spread as evenly as possible otherwise.
pub fn draw_orders(n_tasks: usize, n_sequences: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n_tasks == 0 {
        return Err(Error::InvalidArgument("no tasks to order".into()));
    }
    let mut r = rng::stream(seed, &[tag::ORDERS]);
    let mut lasts = Vec::with_capacity(n_sequences);
    while lasts.len() < n_sequences {
        let mut round: Vec<usize> = (0..n_tasks).collect();
        round.shuffle(&mut r);
        lasts.extend(round);
    }
    lasts.truncate(n_sequences);
    Ok(lasts
        .into_iter()
        .map(|last| {
            let mut order: Vec<usize> = (0..n_tasks).filter(|&i| i != last).collect();
            order.shuffle(&mut r);
            order.push(last);
            order
        })
        .collect())
}

pub fn sequence_specs(n_tasks: usize, n_sequences: usize, seed: u64) -> Result<Vec<SequenceSpec>> {
    Ok(draw_orders(n_tasks, n_sequences, seed)?
        .into_iter()
        .enumerate()
        .map(|(index, order)| SequenceSpec {
            index,
            order,
            seed: rng::derive_seed(seed, &[tag::SEQUENCE, index as u64]),
        })
        .collect())
}

/// Trains `kind` over the tasks in `spec.order` and reports its accuracies.
pub fn run_model(
    kind: ModelKind,
    spec: &SequenceSpec,
    tasks: &[TaskDataset],
    hp: &Hyperparams,
    embeddings: Arc<Tensor>,
) -> Result<SequenceReport> {
    let ordered = ordered_tasks(tasks, &spec.order)?;
    let mut run = ContinualRun::new(kind.learner(), hp.clone(), spec.seed, embeddings)?;
    run.learn_all(&ordered)?;
    let names = ordered.iter().map(|t| t.name.clone()).collect();
    Ok(SequenceReport::from_run(kind, spec, names, &run))
}

pub fn ordered_tasks(tasks: &[TaskDataset], order: &[usize]) -> Result<Vec<TaskDataset>> {
    order
        .iter()
        .map(|&i| {
            tasks
                .get(i)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("order names task {i} of {}", tasks.len())))
        })
        .collect()
}

/// Checkpoints every 6 tasks, always ending at `n_tasks`.
pub fn default_checkpoints(n_tasks: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = (6..=n_tasks).step_by(6).collect();
    if ks.last() != Some(&n_tasks) && n_tasks > 0 {
        ks.push(n_tasks);
    }
    ks
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: ModelKind,
    pub sequences: usize,
    pub all_tasks: f64,
    pub last_task: f64,
    pub transfer: Vec<TransferRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: ModelKind,
    pub b: ModelKind,
    pub test: TTest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub pairing: String,
    pub reports: Vec<SequenceReport>,
    pub summary: Vec<ModelSummary>,
    pub comparisons: Vec<Comparison>,
}

impl ExperimentReport {
    /// Aggregates `reports`, ordering them by model then sequence.
    pub fn build(mut reports: Vec<SequenceReport>, checkpoints: &[usize]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::InvalidArgument("experiment without reports".into()));
        }
        reports.sort_by_key(|r| (r.model, r.sequence));
        let mut models: Vec<ModelKind> = reports.iter().map(|r| r.model).collect();
        models.dedup();
        let mut summary = Vec::new();
        for &m in &models {
            let rs: Vec<SequenceReport> = reports.iter().filter(|r| r.model == m).cloned().collect();
            summary.push(ModelSummary {
                model: m,
                sequences: rs.len(),
                all_tasks: all_tasks_average(&rs)?,
                last_task: last_task_average(&rs)?,
                transfer: transfer_table(&rs, checkpoints)?,
            });
        }
        let mut comparisons = Vec::new();
        for (i, &a) in models.iter().enumerate().rev() {
            for &b in models[..i].iter().rev() {
                let (xa, xb) = paired_samples(&reports, a, b)?;
                if xa.len() >= 2 {
                    comparisons.push(Comparison {
                        a,
                        b,
                        test: paired_t_test(&xa, &xb)?,
                    });
                }
            }
        }
        Ok(ExperimentReport {
            schema_version: REPORT_SCHEMA_VERSION,
            pairing: PAIRING.into(),
            reports,
            summary,
            comparisons,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let found = v.get("schema_version").and_then(serde_json::Value::as_u64);
        if found != Some(REPORT_SCHEMA_VERSION as u64) {
            return Err(Error::InvalidArgument(format!(
                "report schema version {} is not the supported {REPORT_SCHEMA_VERSION}",
                found.map_or("missing".to_string(), |f| f.to_string())
            )));
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn summary_of(&self, model: ModelKind) -> Option<&ModelSummary> {
        self.summary.iter().find(|s| s.model == model)
    }

    /// Model × (All Tasks, Last Task).
    pub fn table1_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "all_tasks", "last_task"])?;
        for s in &self.summary {
            w.write_record([s.model.name().to_string(), fmt4(s.all_tasks), fmt4(s.last_task)])?;
        }
        finish(w)
    }

    /// Task × model mean final accuracy.
    pub fn table2_csv(&self) -> Result<String> {
        let mut tasks: Vec<&str> = self
            .reports
            .iter()
            .flat_map(|r| r.order.iter().map(String::as_str))
            .collect();
        tasks.sort_unstable();
        tasks.dedup();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["task".to_string()];
        header.extend(self.summary.iter().map(|s| s.model.name().to_string()));
        w.write_record(&header)?;
        for task in tasks {
            let mut row = vec![task.to_string()];
            for s in &self.summary {
                let accs: Vec<f64> = self
                    .reports
                    .iter()
                    .filter(|r| r.model == s.model)
                    .flat_map(|r| r.order.iter().zip(&r.final_acc).filter(|(n, _)| *n == task).map(|(_, &a)| a))
                    .collect();
                row.push(if accs.is_empty() {
                    String::new()
                } else {
                    fmt4(accs.iter().sum::<f64>() / accs.len() as f64)
                });
            }
            w.write_record(&row)?;
        }
        finish(w)
    }

    /// Model × checkpoint forward/backward accuracies.
    pub fn table3_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "tasks", "forward", "backward"])?;
        for s in &self.summary {
            for row in &s.transfer {
                w.write_record([
                    s.model.name().to_string(),
                    row.tasks.to_string(),
                    fmt4(row.forward),
                    fmt4(row.backward),
                ])?;
            }
        }
        finish(w)
    }
}

fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

/// Final accuracies of `a` and `b` matched by (sequence, task name).
fn paired_samples(reports: &[SequenceReport], a: ModelKind, b: ModelKind) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut xa, mut xb) = (Vec::new(), Vec::new());
    for ra in reports.iter().filter(|r| r.model == a) {
        let Some(rb) = reports.iter().find(|r| r.model == b && r.sequence == ra.sequence) else {
            continue;
        };
        for (name, &acc) in ra.order.iter().zip(&ra.final_acc) {
            let j = rb.order.iter().position(|n| n == name).ok_or_else(|| {
                Error::InvalidArgument(format!("task {name} missing from {b} sequence {}", rb.sequence))
            })?;
            xa.push(acc);
            xb.push(rb.final_acc[j]);
        }
    }
    Ok((xa, xb))
}
