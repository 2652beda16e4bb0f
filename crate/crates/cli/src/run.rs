//! `kan run`: trains every requested model over every sequence, with
//! per-task checkpoints so an interrupted run picks up where it stopped.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use kan_core::data::{gen_synthetic_tasks, load_embeddings, random_embeddings, RANDOM_EMBED_RANGE};
use kan_core::eval::{default_checkpoints, ordered_tasks, sequence_specs, ExperimentReport, SequenceReport, SequenceSpec};
use kan_core::{Checkpoint, ContinualRun, ModelKind, TaskDataset, Tensor};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, IoContext, Result};
use crate::prepare::{load_prepared, prepare_raw, Prepared};
use crate::report::{aggregate, read_sequences, write_outputs, StoredSequence, REPORT_FILE, SEQUENCE_DIR};

pub const CONFIG_FILE: &str = "config.toml";
pub const DATA_DIR: &str = "data";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const WORKERS_ENV: &str = "KAN_WORKERS";

/// Worker count from `KAN_WORKERS`, defaulting to the available cores.
pub fn workers() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

struct Experiment<'c> {
    config: &'c RunConfig,
    tasks: Vec<TaskDataset>,
    embeddings: Arc<Tensor>,
    vocab_hash: String,
}

pub fn cmd_run(config_path: &Path) -> Result<ExperimentReport> {
    let (config, text) = RunConfig::load(config_path)?;
    run_config(&config, &text, workers()?)
}

/// Runs a validated config; `text` is stored verbatim in the run directory.
pub fn run_config(config: &RunConfig, text: &str, workers: usize) -> Result<ExperimentReport> {
    let out = &config.out;
    fs::create_dir_all(out).at(out)?;
    let saved = out.join(CONFIG_FILE);
    if saved.is_file() {
        if fs::read_to_string(&saved).at(&saved)? != text {
            return Err(CliError::Config(format!(
                "{} belongs to a different configuration",
                out.display()
            )));
        }
        log::info!("resuming in {}", out.display());
    } else {
        fs::write(&saved, text).at(&saved)?;
    }

    let prepared = load_data(config)?;
    let hp = &config.hyperparams;
    let embeddings = match &config.embeddings {
        Some(path) => load_embeddings(path, &prepared.vocab, hp.embed_dim, config.seed)?,
        None => {
            if config.synthetic.is_none() {
                log::warn!("no embeddings file; using random word vectors");
            }
            random_embeddings(prepared.vocab.len(), hp.embed_dim, RANDOM_EMBED_RANGE, config.seed)
        }
    };
    let tasks = prepared
        .tasks
        .iter()
        .map(|t| t.to_dataset(hp.step))
        .collect::<kan_core::Result<Vec<_>>>()?;
    let n = tasks.len();
    let checkpoints = config.checkpoints.clone().unwrap_or_else(|| default_checkpoints(n));
    if let Some(k) = checkpoints.iter().find(|&&k| k > n) {
        return Err(CliError::Config(format!("checkpoint {k} exceeds the {n} tasks")));
    }

    let exp = Experiment {
        config,
        tasks,
        embeddings: Arc::new(embeddings),
        vocab_hash: prepared.vocab.hash(),
    };
    let specs = sequence_specs(n, config.sequences, config.seed)?;
    let jobs: Vec<(ModelKind, &SequenceSpec)> = specs
        .iter()
        .flat_map(|s| config.models.iter().map(move |&m| (m, s)))
        .collect();
    log::info!("{} tasks, {} runs on {workers} workers", n, jobs.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<SequenceReport>> =
        pool.install(|| jobs.par_iter().map(|&(m, s)| run_job(&exp, m, s)).collect());
    let reports = results.into_iter().collect::<Result<Vec<_>>>()?;

    let report = aggregate(reports.into_iter().map(StoredSequence::new).collect(), &checkpoints)?;
    write_outputs(out, &report)?;
    Ok(report)
}

fn load_data(config: &RunConfig) -> Result<Prepared> {
    match (&config.data, &config.synthetic) {
        (Some(dir), _) => load_prepared(dir),
        (None, Some(spec)) => {
            let raw = gen_synthetic_tasks(spec, config.seed)?;
            prepare_raw(&raw, &config.out.join(DATA_DIR), config.seed, config.min_freq)
        }
        (None, None) => Err(CliError::Config("no data source".into())),
    }
}

pub fn sequence_dir(out: &Path, model: ModelKind, index: usize) -> PathBuf {
    out.join(SEQUENCE_DIR)
        .join(format!("{}-{index:02}", model.name().to_lowercase()))
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).at(&tmp)?;
    fs::rename(&tmp, path).at(path)
}

fn run_job(exp: &Experiment<'_>, model: ModelKind, spec: &SequenceSpec) -> Result<SequenceReport> {
    let dir = sequence_dir(&exp.config.out, model, spec.index);
    let report_path = dir.join(REPORT_FILE);
    if report_path.is_file() {
        let text = fs::read_to_string(&report_path).at(&report_path)?;
        let stored: StoredSequence = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", report_path.display())))?;
        return Ok(stored.report);
    }
    fs::create_dir_all(&dir).at(&dir)?;
    let ordered = ordered_tasks(&exp.tasks, &spec.order)?;
    let hp = &exp.config.hyperparams;
    let ckpt = dir.join(CHECKPOINT_FILE);
    let mut run = if ckpt.is_file() {
        let c = Checkpoint::load(&ckpt)?;
        let run = ContinualRun::from_checkpoint(&c, exp.embeddings.clone())?;
        if c.vocab_hash != exp.vocab_hash
            || run.config != model.learner()
            || run.model.seed != spec.seed
            || run.model.hp != *hp
        {
            return Err(CliError::Data(format!("{}: checkpoint is from another run", ckpt.display())));
        }
        log::info!("{model} sequence {}: resuming after {} tasks", spec.index, run.tasks_learned());
        run
    } else {
        ContinualRun::new(model.learner(), hp.clone(), spec.seed, exp.embeddings.clone())?
    };
    while run.tasks_learned() < ordered.len() {
        run.learn_next(&ordered)?;
        run.to_checkpoint(&exp.vocab_hash)?.save(&ckpt)?;
        log::info!(
            "{model} sequence {}: {}/{} tasks",
            spec.index,
            run.tasks_learned(),
            ordered.len()
        );
    }
    let names = ordered.iter().map(|t| t.name.clone()).collect();
    let report = SequenceReport::from_run(model, spec, names, &run);
    let text = serde_json::to_string_pretty(&StoredSequence::new(report.clone())).map_err(kan_core::Error::from)?;
    write_atomic(&report_path, &(text + "\n"))?;
    Ok(report)
}

/// `kan report`: rebuilds the report and tables from the stored sequences.
pub fn cmd_report(run: &Path) -> Result<ExperimentReport> {
    let stored = read_sequences(run)?;
    let saved = run.join(CONFIG_FILE);
    let configured = if saved.is_file() {
        RunConfig::parse(&fs::read_to_string(&saved).at(&saved)?)?.checkpoints
    } else {
        None
    };
    let n = stored[0].report.order.len();
    let checkpoints = configured.unwrap_or_else(|| default_checkpoints(n));
    let report = aggregate(stored, &checkpoints)?;
    write_outputs(run, &report)?;
    Ok(report)
}
