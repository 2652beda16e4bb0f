//! Command-line experiments: prepare corpora, run ONE / N-CL / KAN over
//! random task sequences and tabulate the results.

pub mod config;
pub mod error;
pub mod prepare;
pub mod report;
pub mod run;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use prepare::{cmd_prepare, load_prepared, prepare_raw, Manifest};
pub use report::render;
pub use run::{cmd_report, cmd_run, run_config, workers};

use std::path::Path;

use kan_core::data::{gen_synthetic_tasks, write_corpus_dir, SyntheticSpec};

/// `kan synth`: writes a generated corpus as one `*.jsonl` file per task.
pub fn cmd_synth(out: &Path, spec: &SyntheticSpec, seed: u64) -> Result<()> {
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    write_corpus_dir(out, &gen_synthetic_tasks(spec, seed)?)?;
    Ok(())
}
