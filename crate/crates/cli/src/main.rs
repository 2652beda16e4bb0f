use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kan_cli::{cmd_prepare, cmd_report, cmd_run, cmd_synth, render, Result};
use kan_core::data::{SyntheticSpec, DEFAULT_MIN_FREQ};

#[derive(Parser)]
#[command(name = "kan", version, about = "Continual sentiment classification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a corpus directory of *.jsonl task files, split it and build the vocabulary.
    Prepare {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MIN_FREQ)]
        min_freq: usize,
    },
    /// Write a synthetic corpus with a controlled share of cue words between tasks.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        tasks: usize,
        #[arg(long, default_value_t = 600)]
        docs: usize,
        #[arg(long, default_value_t = 0.8)]
        share: f64,
    },
    /// Train the configured models over random task sequences.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rebuild report.json and the CSV tables of a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare {
            corpus,
            out,
            seed,
            min_freq,
        } => {
            let m = cmd_prepare(&corpus, &out, seed, min_freq)?;
            println!("{} tasks, vocabulary {}, manifest {}", m.tasks.len(), m.vocab_size, m.hash);
        }
        Command::Synth {
            out,
            seed,
            tasks,
            docs,
            share,
        } => {
            let spec = SyntheticSpec {
                n_tasks: tasks,
                docs_per_task: docs,
                share,
                ..Default::default()
            };
            cmd_synth(&out, &spec, seed)?;
        }
        Command::Run { config } => print!("{}", render(&cmd_run(&config)?)),
        Command::Report { run } => print!("{}", render(&cmd_report(&run)?)),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
