//! `tsgan` — train, sample, evaluate, and analyze conditional LSTM-GAN
//! time-series generators, plus the baseline augmenters they are compared
//! against.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "tsgan", version, about = "Conditional LSTM-GAN time-series toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct CommonArgs {
    /// Plain-text key=value run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed for everything this command randomizes.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts and the run manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model on a UCR-style dataset.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Training dataset (UCR text convention: label first).
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// LSTM units per layer.
        #[arg(long)]
        units: Option<usize>,
        /// LSTM layers in generator and discriminator.
        #[arg(long)]
        layers: Option<usize>,
        /// Extra discriminator updates per iteration.
        #[arg(long)]
        unroll: Option<usize>,
        /// Minibatch size.
        #[arg(long)]
        batch: Option<usize>,
        /// Adam learning rate.
        #[arg(long)]
        lr: Option<f64>,
        /// Latent values per time step.
        #[arg(long)]
        dz: Option<usize>,
        /// Generator objective: saturating | non-saturating.
        #[arg(long)]
        loss: Option<String>,
        /// Emit a checkpoint every N epochs (0 = final only).
        #[arg(long)]
        checkpoint_every: Option<usize>,
        /// Subsample the training set to this many series in total.
        #[arg(long)]
        train_total: Option<usize>,
        /// Subsample per class, e.g. "498,498".
        #[arg(long)]
        train_per_class: Option<String>,
        /// Skip min-max normalization (data must already be in [0, 1]).
        #[arg(long)]
        no_normalize: bool,
    },
    /// Generate labeled series from a checkpoint.
    Generate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// 1-based class label to condition on.
        #[arg(long)]
        class: Option<usize>,
        /// Number of series to generate.
        #[arg(long)]
        count: Option<usize>,
        /// Map outputs back to the raw data scale using the stored bounds.
        #[arg(long)]
        denormalize: bool,
    },
    /// Average-similarity evaluation of a target set against originals.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Original (reference) dataset.
        #[arg(long)]
        original: Option<PathBuf>,
        /// Target dataset to score against the originals.
        #[arg(long)]
        target: Option<PathBuf>,
        /// Samples per group (0 = smallest group size).
        #[arg(long)]
        n: Option<usize>,
        /// Also pick k medoid exemplars per class and their nearest target
        /// series (0 = skip).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Produce an augmented dataset with one of the baseline methods.
    Augment {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: Option<PathBuf>,
        /// noise | interpolate | extrapolate | hmm.
        #[arg(long)]
        method: Option<String>,
        /// Generated samples per class.
        #[arg(long)]
        count: Option<usize>,
        /// Noise scale for the noise method.
        #[arg(long)]
        gamma: Option<f64>,
        /// HMM state-count search range, e.g. "1..10".
        #[arg(long)]
        states: Option<String>,
        /// Gaussian mixture components per HMM state.
        #[arg(long)]
        mixtures: Option<usize>,
        /// Skip min-max normalization before augmenting.
        #[arg(long)]
        no_normalize: bool,
    },
    /// Class-label interpolation sweep from a fixed latent sequence.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Number of interpolation steps.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Canonical correlation analysis of latent inputs vs. generated-signal
    /// features.
    Cca {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Class label the analysis is run under.
        #[arg(long)]
        class: Option<usize>,
        /// Number of (latent, features) pairs.
        #[arg(long)]
        samples: Option<usize>,
        /// Feature profile: ecg | eeg.
        #[arg(long)]
        profile: Option<String>,
    },
    /// Generate with loading-scaled control inputs and tabulate features.
    Control {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        class: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        profile: Option<String>,
        /// Scale grid start:end:count, e.g. "0:2:11".
        #[arg(long)]
        scales: Option<String>,
        /// Generations averaged per scale.
        #[arg(long)]
        samples_per_scale: Option<usize>,
    },
}

/// Failures split by exit code: usage/config problems exit 2, runtime
/// failures exit 1.
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        // Configuration-level problems map to usage errors.
        if let Some(core) = e.downcast_ref::<tsgan_core::Error>() {
            if matches!(core, tsgan_core::Error::Config(_)) {
                return CliError::Usage(format!("{e:#}"));
            }
        }
        CliError::Runtime(e)
    }
}

pub type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            common,
            data,
            epochs,
            units,
            layers,
            unroll,
            batch,
            lr,
            dz,
            loss,
            checkpoint_every,
            train_total,
            train_per_class,
            no_normalize,
        } => commands::train(commands::TrainArgs {
            common,
            data,
            epochs,
            units,
            layers,
            unroll,
            batch,
            lr,
            dz,
            loss,
            checkpoint_every,
            train_total,
            train_per_class,
            no_normalize,
        }),
        Command::Generate {
            common,
            checkpoint,
            class,
            count,
            denormalize,
        } => commands::generate(common, checkpoint, class, count, denormalize),
        Command::Evaluate {
            common,
            original,
            target,
            n,
            k,
        } => commands::evaluate(common, original, target, n, k),
        Command::Augment {
            common,
            data,
            method,
            count,
            gamma,
            states,
            mixtures,
            no_normalize,
        } => commands::augment(common, data, method, count, gamma, states, mixtures, no_normalize),
        Command::Sweep {
            common,
            checkpoint,
            steps,
        } => commands::sweep(common, checkpoint, steps),
        Command::Cca {
            common,
            checkpoint,
            class,
            samples,
            profile,
        } => commands::cca(common, checkpoint, class, samples, profile),
        Command::Control {
            common,
            checkpoint,
            class,
            samples,
            profile,
            scales,
            samples_per_scale,
        } => commands::control(common, checkpoint, class, samples, profile, scales, samples_per_scale),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
