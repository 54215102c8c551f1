use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hybridcast::data::SynthKind;
use hybridcast::harness::{self, RunConfig};
use hybridcast::metrics::table_csv;
use hybridcast::model::{format_audit, HybridModel, Variant};
use hybridcast::{Error, Result};

#[derive(Parser)]
#[command(name = "hybridcast", version, about = "Multi-task hybrid time-series forecaster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML file with [model], [train] and [data] tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set model.d_model=16`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for both initialization and training.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("model.seed={s}"));
            overrides.push(format!("train.seed={s}"));
        }
        harness::load_config(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint, logs and test metrics.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on the test split of a data file.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every requested variant and write a comparison table.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated variants (default: all).
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        /// Report rolling-origin cross-validation means instead of one split.
        #[arg(long)]
        cross_validate: bool,
    },
    /// Iterated multi-step forecast from the end of a series.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1)]
        horizon: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time single-window inference.
    Bench {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        repetitions: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic OHLCV series.
    Synth {
        #[arg(long, default_value = "sinusoid-mix")]
        kind: String,
        #[arg(long, default_value_t = 1000)]
        length: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the stage-by-stage parameter audit for a configuration.
    Audit {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Use the single-channel reference configuration.
        #[arg(long)]
        reference: bool,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { cfg, data, out } => {
            let outcome = harness::cmd_train(&cfg.load()?, &data, &out)?;
            println!(
                "best epoch {} (val loss {:.6})",
                outcome.log.best_epoch, outcome.log.best_val_loss
            );
            print!("{}", table_csv(&[outcome.metrics.summary()])?);
        }
        Command::Evaluate { checkpoint, data, out } => {
            let eval = harness::cmd_evaluate(&checkpoint, &data, &out)?;
            print!("{}", table_csv(&[eval.summary])?);
        }
        Command::Ablate {
            cfg,
            data,
            out,
            variants,
            cross_validate,
        } => {
            let variants = if variants.is_empty() {
                Variant::ALL.to_vec()
            } else {
                variants.iter().map(|v| v.parse()).collect::<Result<_>>()?
            };
            let report = harness::cmd_ablate(&cfg.load()?, &data, &variants, cross_validate, &out)?;
            let rows: Vec<_> = report.entries.iter().map(|e| e.summary.clone()).collect();
            print!("{}", table_csv(&rows)?);
        }
        Command::Predict {
            checkpoint,
            data,
            horizon,
            out,
        } => {
            for f in harness::cmd_predict(&checkpoint, &data, horizon, &out)? {
                println!("{}\t{}\t{}", f.step, f.task, f.value);
            }
        }
        Command::Bench {
            checkpoint,
            data,
            repetitions,
            out,
        } => {
            let r = harness::cmd_bench(&checkpoint, data.as_deref(), repetitions, &out)?;
            println!(
                "{:.3} ms ± {:.3} ms per window ({} repetitions after {} warm-up)",
                r.mean_seconds * 1e3,
                r.std_seconds * 1e3,
                r.repetitions,
                r.warmup
            );
        }
        Command::Synth {
            kind,
            length,
            seed,
            noise,
            out,
        } => {
            let kind: SynthKind = kind.parse()?;
            let path = harness::cmd_synth(kind, length, seed, noise, &out)?;
            println!("{}", path.display());
        }
        Command::Audit { cfg, reference } => {
            let model_cfg = if reference {
                hybridcast::model::ModelConfig::reference()
            } else {
                cfg.load()?.model
            };
            let model = HybridModel::build(model_cfg)?;
            print!("{}", format_audit(&model.parameter_audit()));
            println!("trainable parameters: {}", model.params().trainable_count());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", category_name(&e));
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}

fn category_name(e: &Error) -> &'static str {
    match e.category() {
        hybridcast::ErrorCategory::Usage => "usage",
        hybridcast::ErrorCategory::Data => "data",
        hybridcast::ErrorCategory::Divergence => "divergence",
        hybridcast::ErrorCategory::Internal => "internal",
    }
}
