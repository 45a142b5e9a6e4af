//! `qsafeml` command-line tool: generate or ingest datasets, train the toy
//! variational classifier, emit prediction records, run the offline safety
//! analysis, and monitor prediction streams online.
//!
//! Exit codes: 0 on success, 2 for usage or input errors, 3 for numerical
//! failures.

mod commands;
mod config;

use clap::{Parser, Subcommand, ValueEnum};
use commands::{
    cmd_monitor, cmd_online, cmd_predict, cmd_synth, cmd_train, parse_thresholds, MonitorOptions,
    OnlineOptions, PredictOptions, SplitChoice, StateFormat, SynthOptions, TrainOptions,
};
use qsafeml::linalg::LinalgError;
use qsafeml::monitor::Grouping;
use qsafeml::vqc::{ClassBinning, GradientMode, VqcError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "qsafeml",
    version,
    about = "Safety monitoring for quantum classifiers via quantum state distance metrics"
)]
struct Cli {
    /// TOML config overlay with per-subcommand sections; flags take
    /// precedence over file values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Gaussian-blob dataset CSV.
    Synth(SynthArgs),
    /// Train the variational classifier on a CSV dataset.
    Train(TrainArgs),
    /// Emit prediction records for a dataset using a trained checkpoint.
    Predict(PredictArgs),
    /// Analyze prediction records into a safety report (and plot data).
    Monitor(MonitorArgs),
    /// Check a stream of prediction records against a reference report.
    Online(OnlineArgs),
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    n_features: Option<usize>,
    #[arg(long)]
    n_classes: Option<usize>,
    /// Distance between neighbouring class centers, in noise standard deviations.
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of labels to flip to a random different class.
    #[arg(long)]
    noise_rate: Option<f64>,
    /// Seed for the label-noise draw (defaults to seed + 1).
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Label column name or index.
    #[arg(long)]
    label_col: Option<String>,
    /// Qubit count (default: feature count after preprocessing).
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Seeds the split and the parameter initialization.
    #[arg(long)]
    seed: Option<u64>,
    /// Reduce to this many principal components before encoding.
    #[arg(long)]
    pca_k: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long, value_enum)]
    grad_mode: Option<GradModeArg>,
    #[arg(long, value_enum)]
    binning: Option<BinningArg>,
    /// Checkpoint output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct PredictArgs {
    /// Trained checkpoint path.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Input CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Label column name or index, or "none" for unlabeled data.
    #[arg(long)]
    label_col: Option<String>,
    /// Which side of the training-time split to predict on.
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    /// Record the full output statevector or the basis-outcome distribution.
    #[arg(long, value_enum)]
    state_format: Option<StateFormatArg>,
    /// Output records path (JSON lines).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct MonitorArgs {
    /// One or more prediction-record files; several files produce one report
    /// each plus cross-report correlations.
    #[arg(long, num_args = 1..)]
    records: Option<Vec<PathBuf>>,
    #[arg(long)]
    n_classes: Option<usize>,
    /// One value for all metrics, or four comma-separated values
    /// (trace,fidelity,bures,relative-entropy).
    #[arg(long)]
    thresholds: Option<String>,
    #[arg(long, value_enum)]
    grouping: Option<GroupingArg>,
    /// Opt-in relative-entropy smoothing in (0, 1e-3].
    #[arg(long)]
    qre_smoothing: Option<f64>,
    /// Report output path (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for plot-ready CSV exports.
    #[arg(long)]
    plots_dir: Option<PathBuf>,
}

#[derive(clap::Args)]
struct OnlineArgs {
    /// Records file path, or "-" to read from standard input.
    #[arg(long)]
    records_stream: Option<String>,
    /// Reference safety report produced by `monitor`.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    thresholds: Option<String>,
    #[arg(long)]
    qre_smoothing: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GradModeArg {
    FiniteDifference,
    ParameterShift,
}

impl From<GradModeArg> for GradientMode {
    fn from(a: GradModeArg) -> Self {
        match a {
            GradModeArg::FiniteDifference => GradientMode::FiniteDifference,
            GradModeArg::ParameterShift => GradientMode::ParameterShift,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BinningArg {
    Mod,
}

impl From<BinningArg> for ClassBinning {
    fn from(_: BinningArg) -> Self {
        ClassBinning::Mod
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Test,
    Train,
    All,
}

impl From<SplitArg> for SplitChoice {
    fn from(a: SplitArg) -> Self {
        match a {
            SplitArg::Test => SplitChoice::Test,
            SplitArg::Train => SplitChoice::Train,
            SplitArg::All => SplitChoice::All,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StateFormatArg {
    Statevector,
    Distribution,
}

impl From<StateFormatArg> for StateFormat {
    fn from(a: StateFormatArg) -> Self {
        match a {
            StateFormatArg::Statevector => StateFormat::Statevector,
            StateFormatArg::Distribution => StateFormat::Distribution,
        }
    }
}

fn parse_enum_arg<T: ValueEnum + Clone + Copy>(raw: &str, what: &str) -> anyhow::Result<T> {
    T::from_str(raw, true).map_err(|_| anyhow::anyhow!("invalid {what} value {raw:?}"))
}

fn require<T>(value: Option<T>, flag: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| anyhow::anyhow!("missing required option --{flag} (flag or config file)"))
}

fn validate_thread_env() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("QSAFEML_THREADS") {
        let ok = raw.trim().parse::<usize>().map(|n| n > 0).unwrap_or(false);
        if !ok {
            anyhow::bail!("QSAFEML_THREADS must be a positive integer, got {raw:?}");
        }
    }
    Ok(())
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    validate_thread_env()?;
    let file = config::load(cli.config.as_deref())?;

    match cli.command {
        Command::Synth(args) => {
            let section = file.synth.unwrap_or_default();
            let seed = args.seed.or(section.seed).unwrap_or(7);
            cmd_synth(SynthOptions {
                n_samples: args.n_samples.or(section.n_samples).unwrap_or(200),
                n_features: args.n_features.or(section.n_features).unwrap_or(2),
                n_classes: args.n_classes.or(section.n_classes).unwrap_or(2),
                separation: args.separation.or(section.separation).unwrap_or(3.0),
                seed,
                noise_rate: args.noise_rate.or(section.noise_rate).unwrap_or(0.0),
                noise_seed: args
                    .noise_seed
                    .or(section.noise_seed)
                    .unwrap_or_else(|| seed.wrapping_add(1)),
                out: require(args.out.or(section.out), "out")?,
            })
        }
        Command::Train(args) => {
            let section = file.train.unwrap_or_default();
            let grad_mode = match args.grad_mode {
                Some(m) => m.into(),
                None => match section.grad_mode.as_deref() {
                    Some(raw) => parse_enum_arg::<GradModeArg>(raw, "grad_mode")?.into(),
                    None => GradientMode::FiniteDifference,
                },
            };
            let binning = match args.binning {
                Some(b) => b.into(),
                None => match section.binning.as_deref() {
                    Some(raw) => parse_enum_arg::<BinningArg>(raw, "binning")?.into(),
                    None => ClassBinning::Mod,
                },
            };
            cmd_train(TrainOptions {
                data: require(args.data.or(section.data), "data")?,
                label_col: args
                    .label_col
                    .or(section.label_col)
                    .unwrap_or_else(|| "label".into()),
                qubits: args.qubits.or(section.qubits),
                layers: args.layers.or(section.layers).unwrap_or(2),
                epochs: args.epochs.or(section.epochs).unwrap_or(100),
                lr: args.lr.or(section.lr).unwrap_or(0.1),
                seed: args.seed.or(section.seed).unwrap_or(42),
                pca_k: args.pca_k.or(section.pca_k),
                test_fraction: args.test_fraction.or(section.test_fraction).unwrap_or(0.2),
                grad_mode,
                binning,
                out: require(args.out.or(section.out), "out")?,
            })
        }
        Command::Predict(args) => {
            let section = file.predict.unwrap_or_default();
            let split = match args.split {
                Some(s) => s.into(),
                None => match section.split.as_deref() {
                    Some(raw) => parse_enum_arg::<SplitArg>(raw, "split")?.into(),
                    None => SplitChoice::Test,
                },
            };
            let state_format = match args.state_format {
                Some(s) => s.into(),
                None => match section.state_format.as_deref() {
                    Some(raw) => parse_enum_arg::<StateFormatArg>(raw, "state_format")?.into(),
                    None => StateFormat::Statevector,
                },
            };
            cmd_predict(PredictOptions {
                model: require(args.model.or(section.model), "model")?,
                data: require(args.data.or(section.data), "data")?,
                label_col: args
                    .label_col
                    .or(section.label_col)
                    .unwrap_or_else(|| "label".into()),
                split,
                state_format,
                out: require(args.out.or(section.out), "out")?,
            })
        }
        Command::Monitor(args) => {
            let section = file.monitor.unwrap_or_default();
            let grouping = match args.grouping {
                Some(g) => match g {
                    GroupingArg::TrueLabel => Grouping::TrueLabel,
                    GroupingArg::PredictedLabel => Grouping::PredictedLabel,
                },
                None => match section.grouping.as_deref() {
                    Some(raw) => match parse_enum_arg::<GroupingArg>(raw, "grouping")? {
                        GroupingArg::TrueLabel => Grouping::TrueLabel,
                        GroupingArg::PredictedLabel => Grouping::PredictedLabel,
                    },
                    None => Grouping::TrueLabel,
                },
            };
            let thresholds_raw = args
                .thresholds
                .or(section.thresholds)
                .unwrap_or_else(|| "0.5".into());
            cmd_monitor(MonitorOptions {
                records: require(args.records.or(section.records), "records")?,
                n_classes: require(args.n_classes.or(section.n_classes), "n-classes")?,
                thresholds: parse_thresholds(&thresholds_raw)?,
                grouping,
                qre_smoothing: args.qre_smoothing.or(section.qre_smoothing),
                out: require(args.out.or(section.out), "out")?,
                plots_dir: args.plots_dir.or(section.plots_dir),
            })
        }
        Command::Online(args) => {
            let section = file.online.unwrap_or_default();
            let thresholds_raw = args
                .thresholds
                .or(section.thresholds)
                .unwrap_or_else(|| "0.5".into());
            cmd_online(OnlineOptions {
                records_stream: require(
                    args.records_stream.or(section.records_stream),
                    "records-stream",
                )?,
                reference: require(args.reference.or(section.reference), "reference")?,
                batch_size: args.batch_size.or(section.batch_size).unwrap_or(16),
                thresholds: parse_thresholds(&thresholds_raw)?,
                qre_smoothing: args.qre_smoothing.or(section.qre_smoothing),
            })
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupingArg {
    TrueLabel,
    PredictedLabel,
}

/// Numerical failures exit 3; everything else is a usage/input error (2).
/// Transparent error wrappers forward their source, so nested variants are
/// matched structurally rather than by chain walking alone.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    use qsafeml::metrics::MetricError;
    use qsafeml::monitor::MonitorError;
    use qsafeml::state::StateError;

    fn linalg(e: &LinalgError) -> bool {
        matches!(e, LinalgError::NumericalFailure { .. })
    }
    fn metric(e: &MetricError) -> bool {
        matches!(e, MetricError::Linalg(inner) if linalg(inner))
    }
    fn state(e: &StateError) -> bool {
        matches!(e, StateError::Linalg(inner) if linalg(inner))
    }

    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<LinalgError>() {
            if linalg(e) {
                return 3;
            }
        }
        if let Some(e) = cause.downcast_ref::<VqcError>() {
            if matches!(e, VqcError::NonFiniteLoss { .. }) {
                return 3;
            }
        }
        if let Some(e) = cause.downcast_ref::<MetricError>() {
            if metric(e) {
                return 3;
            }
        }
        if let Some(e) = cause.downcast_ref::<StateError>() {
            if state(e) {
                return 3;
            }
        }
        if let Some(e) = cause.downcast_ref::<MonitorError>() {
            let numerical = match e {
                MonitorError::Metric(inner) => metric(inner),
                MonitorError::State(inner) => state(inner),
                _ => false,
            };
            if numerical {
                return 3;
            }
        }
    }
    2
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_failures_map_to_exit_3() {
        let err = anyhow::Error::from(LinalgError::NumericalFailure {
            sweeps: 100,
            off_mass: 1.0,
        });
        assert_eq!(exit_code_for(&err), 3);

        let err = anyhow::Error::from(VqcError::NonFiniteLoss {
            epoch: 3,
            loss: f64::NAN,
        });
        assert_eq!(exit_code_for(&err), 3);

        // nested inside the metric layer
        let err = anyhow::Error::from(qsafeml::metrics::MetricError::Linalg(
            LinalgError::NumericalFailure {
                sweeps: 100,
                off_mass: 1.0,
            },
        ));
        assert_eq!(exit_code_for(&err), 3);
    }

    #[test]
    fn input_errors_map_to_exit_2() {
        let err = anyhow::Error::from(LinalgError::NotHermitian { violation: 0.5 });
        assert_eq!(exit_code_for(&err), 2);
        let err = anyhow::anyhow!("missing required option --out");
        assert_eq!(exit_code_for(&err), 2);
    }
}
