use std::path::PathBuf;
use std::process::ExitCode;

use amptcr_cli::{cmd_build, cmd_challenge, cmd_train_eval, CliError, PipelineConfig};
use amptcr_core::evalkit::{FoldMode, Task};
use amptcr_core::pipeline::ScalarKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "amptcr", version, about = "Aligned molecular-surface point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON pipeline configuration; omitted fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Points per cloud.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, value_enum)]
    scalar: Option<ScalarArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalarArg {
    Esp,
    Fukui,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Kfold,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Regression,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Build one archive and mesh per structure file.
    Build {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Structure files or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Rebuild one structure under random rotations and report alignment RMSD.
    Challenge {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        structure: PathBuf,
    },
    /// Cross-validated training on a build directory.
    TrainEval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// CSV of name,value rows.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_enum)]
        task: Option<TaskArg>,
        #[arg(long)]
        fp_weight: Option<f64>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, value_enum)]
        calibrate: Option<Switch>,
        cloud_dir: PathBuf,
    },
}

fn base_config(common: &Common) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(n) = common.points {
        cfg.cloud.n_points = n;
    }
    if let Some(s) = common.scalar {
        cfg.cloud.scalar = match s {
            ScalarArg::Esp => ScalarKind::Esp,
            ScalarArg::Fukui => ScalarKind::FukuiDual,
        };
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Build {
            common,
            out,
            jobs,
            inputs,
        } => {
            let cfg = base_config(&common)?.resolve()?;
            let manifest = cmd_build(&cfg, &inputs, &out, jobs);
            match manifest {
                Ok(m) => {
                    for e in m.entries.iter().filter(|e| !e.is_ok()) {
                        eprintln!("{}: {}", e.name, e.status);
                    }
                    let ok = m.entries.iter().filter(|e| e.is_ok()).count();
                    println!("{ok}/{} built into {}", m.entries.len(), out.display());
                    Ok(())
                }
                Err(e) => Err(e),
            }
        }
        Command::Challenge {
            common,
            trials,
            out,
            structure,
        } => {
            let mut cfg = base_config(&common)?;
            if let Some(t) = trials {
                cfg.challenge.trials = t;
            }
            let cfg = cfg.resolve()?;
            let report = cmd_challenge(&cfg, &structure, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::TrainEval {
            common,
            out,
            labels,
            task,
            fp_weight,
            folds,
            mode,
            calibrate,
            cloud_dir,
        } => {
            let mut cfg = base_config(&common)?;
            if let Some(t) = task {
                cfg.model.task = match t {
                    TaskArg::Regression => Task::Regression,
                    TaskArg::Binary => Task::Binary,
                };
            }
            if fp_weight.is_some() {
                cfg.model.fp_weight = fp_weight;
            }
            if let Some(k) = folds {
                cfg.folds.folds = k;
            }
            if let Some(m) = mode {
                cfg.folds.mode = match m {
                    ModeArg::Kfold => FoldMode::Kfold,
                    ModeArg::Random => FoldMode::Random,
                };
            }
            if let Some(c) = calibrate {
                cfg.calibrate = matches!(c, Switch::On);
            }
            let cfg = cfg.resolve()?;
            let report = cmd_train_eval(&cfg, &cloud_dir, &labels, &out)?;
            println!("{}", serde_json::to_string_pretty(&report.result.pooled)?);
            for f in &report.result.failed_folds {
                eprintln!("fold {} failed: {}", f.fold, f.reason);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
