use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sfimos::commands::{self, DistillArgs, EvaluateArgs, PredictArgs, TrainMosArgs};

/// MOS prediction for speech at multiple sampling frequencies, built on a
/// sampling-frequency-independent convolutional front end.
#[derive(Parser)]
#[command(name = "sfimos", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the synthetic track-shaped dataset (400 utterances, 20
    /// systems, 10 listeners)
    GenSynthetic {
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// RNG seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Overwrite a non-empty output directory
        #[arg(long)]
        force: bool,
    },
    /// Distill a frozen 16 kHz teacher's features into the SFI student
    Distill {
        /// Dataset directory (or manifest file) providing the audio
        #[arg(long)]
        data: PathBuf,
        /// Run configuration (key=value lines)
        #[arg(long)]
        config: PathBuf,
        /// Output run directory
        #[arg(long)]
        out: PathBuf,
        /// Existing teacher checkpoint; a seeded teacher is created if absent
        #[arg(long)]
        teacher: Option<PathBuf>,
        /// Resume from a previous distill run directory
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override a config key (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Cross-validated MOS fine-tuning; writes one checkpoint per fold
    TrainMos {
        /// Rating manifest CSV
        #[arg(long)]
        data: PathBuf,
        /// Initial encoder checkpoint (student.bin from distill)
        #[arg(long)]
        init: Option<PathBuf>,
        /// Number of cross-validation folds
        #[arg(long)]
        folds: Option<usize>,
        /// Output run directory
        #[arg(long)]
        out: PathBuf,
        /// Run configuration; defaults to config.txt beside --init
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override a config key (repeatable)
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Predict the MOS of one WAV file with a trained model ensemble
    Predict {
        /// Run directory holding fold*.bin and config.txt
        #[arg(long)]
        models: PathBuf,
        /// Input WAV file
        #[arg(long)]
        wav: PathBuf,
        /// Listener ids, either `a..b` (inclusive) or `i,j,k`;
        /// defaults to all trained listeners
        #[arg(long)]
        listeners: Option<String>,
        /// Print the per-model breakdown
        #[arg(long)]
        verbose: bool,
    },
    /// Score a predictions CSV against a manifest's mean listener ratings
    Evaluate {
        /// Rating manifest CSV (truth)
        #[arg(long)]
        manifest: PathBuf,
        /// Predictions CSV (utterance_id,pred)
        #[arg(long)]
        pred: PathBuf,
        /// Also write report.txt and report.csv here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> sfimos::CmdResult<()> {
    match cli.cmd {
        Cmd::GenSynthetic { out, seed, force } => commands::gen_synthetic(&out, seed, force),
        Cmd::Distill {
            data,
            config,
            out,
            teacher,
            resume,
            seed,
            sets,
        } => commands::distill(DistillArgs {
            data,
            config,
            out,
            teacher,
            resume,
            seed,
            sets,
        }),
        Cmd::TrainMos {
            data,
            init,
            folds,
            out,
            config,
            seed,
            sets,
        } => commands::train_mos(TrainMosArgs {
            data,
            init,
            folds,
            out,
            config,
            seed,
            sets,
        }),
        Cmd::Predict {
            models,
            wav,
            listeners,
            verbose,
        } => commands::predict(PredictArgs {
            models,
            wav,
            listeners,
            verbose,
        })
        .map(|_| ()),
        Cmd::Evaluate { manifest, pred, out } => {
            commands::evaluate(EvaluateArgs { manifest, pred, out }).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
