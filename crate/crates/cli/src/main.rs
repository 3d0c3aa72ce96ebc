use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use softcca_cli::commands::{self, EvalMode};
use softcca_cli::config::{DataConfig, DataSource};
use softcca_cli::{CliError, ExperimentConfig, Result};

#[derive(Parser)]
#[command(
    name = "softcca",
    version,
    about = "Soft CCA and factorisation autoencoders with stochastic decorrelation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `[training] seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train Soft CCA on the two views.
    TrainCca {
        #[command(flatten)]
        common: Common,
        /// Continue from a checkpoint; its configuration snapshot is used.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Train a factorisation autoencoder.
    TrainFae {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on held-out data.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// correlation, crossview_l2r, crossview_r2l or disentanglement.
        #[arg(long)]
        mode: String,
        /// MNIST directory; overrides the data section.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Render a style-transfer sheet from an FAE checkpoint as PGM.
    StyleSheet {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Time SDL against exact decorrelation over the configured widths.
    BenchDecorr {
        #[command(flatten)]
        common: Common,
    },
    /// Run the finite-difference gradient checks.
    Gradcheck {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.training.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.clone();
    }
    Ok(cfg)
}

/// Data section for evaluation: an explicit config wins over the
/// checkpoint's snapshot, and `--data` points either at an MNIST directory.
fn eval_data(common: &Common, data: &Option<PathBuf>) -> Result<Option<DataConfig>> {
    let mut d = match &common.config {
        Some(p) => Some(ExperimentConfig::load(p)?.data),
        None => None,
    };
    if let Some(dir) = data {
        let mut base = d.unwrap_or_default();
        base.source = DataSource::Mnist;
        base.mnist_dir = dir.clone();
        d = Some(base);
    }
    Ok(d)
}

fn out_dir(common: &Common, fallback: &Path) -> Result<PathBuf> {
    Ok(match &common.out {
        Some(o) => o.clone(),
        None => match &common.config {
            Some(_) => load_config(common)?.output.dir,
            None => fallback.to_path_buf(),
        },
    })
}

fn print(line: &str) {
    eprintln!("{line}");
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainCca { common, resume } => {
            let run = match resume {
                Some(ck) => {
                    let out = out_dir(&common, ck.parent().unwrap_or(Path::new(".")))?;
                    commands::resume_cca(&ck, &out, print)?
                }
                None => {
                    let cfg = load_config(&common)?;
                    commands::train_cca(&cfg, &cfg.output.dir, print)?
                }
            };
            println!(
                "trained {} steps ({} epochs)",
                run.trainer.step,
                run.log.len()
            );
        }
        Command::TrainFae { common, resume } => {
            let run = match resume {
                Some(ck) => {
                    let out = out_dir(&common, ck.parent().unwrap_or(Path::new(".")))?;
                    commands::resume_fae(&ck, &out, print)?
                }
                None => {
                    let cfg = load_config(&common)?;
                    commands::train_fae(&cfg, &cfg.output.dir, print)?
                }
            };
            println!(
                "trained {} steps ({} epochs)",
                run.trainer.step,
                run.log.len()
            );
        }
        Command::Eval {
            common,
            checkpoint,
            mode,
            data,
        } => {
            let mode: EvalMode = mode.parse()?;
            let data = eval_data(&common, &data)?;
            let out = out_dir(&common, checkpoint.parent().unwrap_or(Path::new(".")))?;
            for (label, value) in commands::eval(&checkpoint, data.as_ref(), mode, Some(&out))? {
                println!("{label},{value}");
            }
        }
        Command::StyleSheet {
            common,
            checkpoint,
            data,
        } => {
            let data = eval_data(&common, &data)?;
            let out = out_dir(&common, checkpoint.parent().unwrap_or(Path::new(".")))?;
            let path = commands::style_sheet(&checkpoint, data.as_ref(), &out)?;
            println!("wrote {}", path.display());
        }
        Command::BenchDecorr { common } => {
            let cfg = load_config(&common)?;
            let rep = commands::bench_decorr(&cfg, &cfg.output.dir, print)?;
            println!("sdl slope {:.3}", rep.sdl_slope);
            println!("exact slope {:.3}", rep.exact_slope);
        }
        Command::Gradcheck { common } => {
            let cfg = load_config(&common)?;
            let results = commands::gradcheck(cfg.training.seed)?;
            let mut failed = 0;
            for r in &results {
                println!(
                    "{:<40} max_rel_err {:.3e} over {} entries  {}",
                    r.name,
                    r.max_rel_err,
                    r.entries,
                    if r.passed() { "ok" } else { "FAIL" }
                );
                failed += usize::from(!r.passed());
            }
            if failed > 0 {
                return Err(CliError::Usage(format!("{failed} gradient checks failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
