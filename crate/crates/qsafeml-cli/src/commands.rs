//! Implementations of the five subcommands. Each validates its fully merged
//! options before touching any file, writes outputs deterministically, and
//! prints a single JSON summary line (the online command prints one line per
//! batch).

use anyhow::{bail, Context};
use qsafeml::data::{
    gen_synthetic, inject_label_noise, load_csv, pca_apply, pca_fit, save_csv, split, Dataset,
    LabelColumn, MinMaxScaler, SyntheticSpec,
};
use qsafeml::monitor::{
    analyze, correlate_reports, export_plot_data, read_records, read_records_file,
    read_report_file, write_records_file, write_report_file, BatchSummary, Grouping,
    MonitorConfig, OnlineMonitor, OutputState, PredictionRecord, SafetyReport, ThresholdConfig,
};
use qsafeml::vqc::{
    accuracy, argmax, predict_batch, train, Checkpoint, ClassBinning, GradientMode, Preprocessing,
    TrainConfig, VqcModel,
};
use serde_json::json;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

pub struct SynthOptions {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub separation: f64,
    pub seed: u64,
    pub noise_rate: f64,
    pub noise_seed: u64,
    pub out: PathBuf,
}

pub fn cmd_synth(opts: SynthOptions) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&opts.noise_rate) {
        bail!("--noise-rate {} outside [0, 1]", opts.noise_rate);
    }
    if opts.separation < 0.0 {
        bail!("--separation {} must be nonnegative", opts.separation);
    }
    if opts.n_samples == 0 || opts.n_features == 0 || opts.n_classes == 0 {
        bail!("sample, feature and class counts must be positive");
    }
    let spec = SyntheticSpec {
        n_samples: opts.n_samples,
        n_features: opts.n_features,
        n_classes: opts.n_classes,
        separation: opts.separation,
        seed: opts.seed,
    };
    let dataset = gen_synthetic(&spec);
    let (dataset, mask) = inject_label_noise(&dataset, opts.noise_rate, opts.noise_seed);
    save_csv(&dataset, &opts.out)?;
    println!(
        "{}",
        json!({
            "command": "synth",
            "out": opts.out,
            "n_samples": dataset.n_samples(),
            "n_features": dataset.n_features(),
            "n_classes": dataset.n_classes(),
            "n_labels_flipped": mask.iter().filter(|&&m| m).count(),
        })
    );
    Ok(())
}

pub struct TrainOptions {
    pub data: PathBuf,
    pub label_col: String,
    pub qubits: Option<usize>,
    pub layers: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub pca_k: Option<usize>,
    pub test_fraction: f64,
    pub grad_mode: GradientMode,
    pub binning: ClassBinning,
    pub out: PathBuf,
}

fn ceil_log2(n: usize) -> usize {
    let mut bits = 0;
    while (1usize << bits) < n {
        bits += 1;
    }
    bits.max(1)
}

pub fn cmd_train(opts: TrainOptions) -> anyhow::Result<()> {
    if !(opts.test_fraction > 0.0 && opts.test_fraction < 1.0) {
        bail!("--test-fraction {} outside (0, 1)", opts.test_fraction);
    }
    if opts.lr <= 0.0 {
        bail!("--lr {} must be positive", opts.lr);
    }
    if opts.epochs == 0 || opts.layers == 0 {
        bail!("--epochs and --layers must be at least 1");
    }

    let raw = load_csv(&opts.data, &LabelColumn::parse(&opts.label_col))?;
    let parts = split(&raw, opts.test_fraction, opts.seed)?;
    if !parts.stratified {
        eprintln!("warning: a class has fewer than 2 samples; split is not stratified");
    }

    let scaler = MinMaxScaler::fit(&parts.train);
    for col in scaler.constant_columns() {
        eprintln!("warning: feature column {col} is constant on the training split; scaled to 0");
    }
    let mut train_ds = scaler.transform(&parts.train)?;
    let mut test_ds = scaler.transform(&parts.test)?;

    let pca = match opts.pca_k {
        Some(k) => {
            let transform = pca_fit(&train_ds, k)?;
            train_ds = pca_apply(&transform, &train_ds)?;
            test_ds = pca_apply(&transform, &test_ds)?;
            Some(transform)
        }
        None => None,
    };

    let n_qubits = opts
        .qubits
        .unwrap_or_else(|| train_ds.n_features().max(ceil_log2(raw.n_classes())));
    let model = VqcModel::new(n_qubits, opts.layers, raw.n_classes(), opts.binning)?;
    let cfg = TrainConfig {
        learning_rate: opts.lr,
        epochs: opts.epochs,
        seed: opts.seed,
        gradient_mode: opts.grad_mode,
    };
    let outcome = train(&model, &train_ds, &cfg)?;
    let train_accuracy = accuracy(&outcome.model, &train_ds)?;
    let test_accuracy = accuracy(&outcome.model, &test_ds)?;

    let preprocessing = Preprocessing {
        scaler,
        pca,
        test_fraction: opts.test_fraction,
        split_seed: opts.seed,
        label_names: raw.label_names.clone(),
    };
    let checkpoint = Checkpoint::from_model(&outcome.model, opts.seed, Some(preprocessing));
    checkpoint.save(&opts.out)?;

    println!(
        "{}",
        json!({
            "command": "train",
            "checkpoint": opts.out,
            "n_qubits": n_qubits,
            "n_layers": opts.layers,
            "n_classes": raw.n_classes(),
            "n_train": train_ds.n_samples(),
            "n_test": test_ds.n_samples(),
            "epochs": opts.epochs,
            "initial_loss": outcome.loss_trajectory.first(),
            "final_loss": outcome.loss_trajectory.last(),
            "train_accuracy": train_accuracy,
            "test_accuracy": test_accuracy,
            "stratified_split": parts.stratified,
        })
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitChoice {
    Test,
    Train,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateFormat {
    Statevector,
    Distribution,
}

pub struct PredictOptions {
    pub model: PathBuf,
    pub data: PathBuf,
    pub label_col: String,
    pub split: SplitChoice,
    pub state_format: StateFormat,
    pub out: PathBuf,
}

/// Remap labels of `dataset` into the training-time class indices by name.
fn remap_labels(dataset: &Dataset, trained_names: &[String]) -> anyhow::Result<Vec<usize>> {
    match &dataset.label_names {
        None => Ok(dataset.labels().to_vec()),
        Some(names) => {
            let mut mapping = Vec::with_capacity(names.len());
            for name in names {
                let idx = trained_names
                    .iter()
                    .position(|t| t == name)
                    .with_context(|| {
                        format!("label {name:?} was not present in the training data")
                    })?;
                mapping.push(idx);
            }
            Ok(dataset.labels().iter().map(|&l| mapping[l]).collect())
        }
    }
}

pub fn cmd_predict(opts: PredictOptions) -> anyhow::Result<()> {
    let checkpoint = Checkpoint::load(&opts.model)?;
    let model = checkpoint.to_model()?;

    let labeled = !opts.label_col.eq_ignore_ascii_case("none");
    let raw = if labeled {
        load_csv(&opts.data, &LabelColumn::parse(&opts.label_col))?
    } else {
        load_csv_unlabeled(&opts.data)?
    };

    let (dataset, indices): (Dataset, Vec<usize>) = match opts.split {
        SplitChoice::All => {
            let idx: Vec<usize> = (0..raw.n_samples()).collect();
            (raw.clone(), idx)
        }
        choice => {
            let pp = checkpoint
                .preprocessing
                .as_ref()
                .context("checkpoint has no preprocessing section; use --split all")?;
            let parts = split(&raw, pp.test_fraction, pp.split_seed)?;
            match choice {
                SplitChoice::Test => (parts.test, parts.test_indices),
                SplitChoice::Train => (parts.train, parts.train_indices),
                SplitChoice::All => unreachable!(),
            }
        }
    };

    let transformed = match &checkpoint.preprocessing {
        Some(pp) => {
            let scaled = pp.scaler.transform(&dataset)?;
            match &pp.pca {
                Some(t) => pca_apply(t, &scaled)?,
                None => scaled,
            }
        }
        None => dataset.clone(),
    };

    let true_labels: Option<Vec<usize>> = if labeled {
        let names = checkpoint
            .preprocessing
            .as_ref()
            .and_then(|pp| pp.label_names.clone());
        match names {
            Some(trained) => Some(remap_labels(&dataset, &trained)?),
            None => Some(dataset.labels().to_vec()),
        }
    } else {
        None
    };

    let outputs = predict_batch(&model, &transformed)?;
    let records: Vec<PredictionRecord> = outputs
        .into_iter()
        .enumerate()
        .map(|(i, (probs, state))| {
            let output_state = match opts.state_format {
                StateFormat::Statevector => OutputState::Statevector(state),
                StateFormat::Distribution => OutputState::Distribution(state.probabilities()),
            };
            PredictionRecord {
                sample_id: format!("row{}", indices[i]),
                true_label: true_labels.as_ref().map(|l| l[i]),
                predicted_label: argmax(&probs),
                output_state,
            }
        })
        .collect();

    write_records_file(&opts.out, &records)?;
    println!(
        "{}",
        json!({
            "command": "predict",
            "out": opts.out,
            "records": records.len(),
            "split": match opts.split {
                SplitChoice::Test => "test",
                SplitChoice::Train => "train",
                SplitChoice::All => "all",
            },
        })
    );
    Ok(())
}

/// Load a headered CSV that carries no label column: every cell is a
/// feature and labels come back as a single placeholder class.
fn load_csv_unlabeled(path: &Path) -> anyhow::Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() {
        bail!("{} has an empty header", path.display());
    }
    let mut features = Vec::new();
    let mut count = 0usize;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .with_context(|| format!("row {}, column {}: not a number", row + 2, col + 1))?;
            features.push(v);
        }
        count += 1;
    }
    let mut dataset = Dataset::new(features, header.len(), vec![0; count], 1)?;
    dataset.feature_names = Some(header);
    Ok(dataset)
}

pub struct MonitorOptions {
    pub records: Vec<PathBuf>,
    pub n_classes: usize,
    pub thresholds: ThresholdConfig,
    pub grouping: Grouping,
    pub qre_smoothing: Option<f64>,
    pub out: PathBuf,
    pub plots_dir: Option<PathBuf>,
}

fn dataset_id_for(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn cmd_monitor(opts: MonitorOptions) -> anyhow::Result<()> {
    if opts.n_classes == 0 {
        bail!("--n-classes must be at least 1");
    }
    if let Some(eps) = opts.qre_smoothing {
        if !(eps > 0.0 && eps <= 1e-3) {
            bail!("--qre-smoothing {eps} outside (0, 1e-3]");
        }
    }
    opts.thresholds.validate()?;
    let config = MonitorConfig {
        thresholds: opts.thresholds,
        grouping: opts.grouping,
        qre_smoothing: opts.qre_smoothing,
        aggregation: "uniform".into(),
    };

    let mut reports: Vec<SafetyReport> = Vec::new();
    for path in &opts.records {
        let records = read_records_file(path)?;
        let report = analyze(&records, opts.n_classes, &config, &dataset_id_for(path))?;
        reports.push(report);
    }

    let (doc, flags_total): (serde_json::Value, usize) = if reports.len() == 1 {
        let report = reports.pop().expect("one report");
        let flags = report
            .per_class
            .iter()
            .map(|c| c.flag_count())
            .sum::<usize>()
            + report.overall.flag_count();
        if let Some(dir) = &opts.plots_dir {
            export_plot_data(&report, dir)?;
        }
        let doc = serde_json::to_value(&report)?;
        write_report_file(&opts.out, &report)?;
        (doc, flags)
    } else {
        let correlations = correlate_reports(&reports)?;
        for report in &mut reports {
            report.correlations = Some(correlations.clone());
        }
        if let Some(dir) = &opts.plots_dir {
            for report in &reports {
                export_plot_data(report, &dir.join(&report.dataset_id))?;
            }
        }
        let flags = reports
            .iter()
            .map(|r| {
                r.per_class.iter().map(|c| c.flag_count()).sum::<usize>()
                    + r.overall.flag_count()
            })
            .sum();
        let doc = json!({
            "schema_version": "1",
            "reports": reports,
            "correlations": correlations,
        });
        std::fs::write(&opts.out, serde_json::to_string_pretty(&doc)? + "\n")?;
        (doc, flags)
    };

    let _ = doc;
    println!(
        "{}",
        json!({
            "command": "monitor",
            "out": opts.out,
            "n_reports": opts.records.len(),
            "n_flags": flags_total,
        })
    );
    Ok(())
}

pub struct OnlineOptions {
    pub records_stream: String,
    pub reference: PathBuf,
    pub batch_size: usize,
    pub thresholds: ThresholdConfig,
    pub qre_smoothing: Option<f64>,
}

pub fn cmd_online(opts: OnlineOptions) -> anyhow::Result<()> {
    if let Some(eps) = opts.qre_smoothing {
        if !(eps > 0.0 && eps <= 1e-3) {
            bail!("--qre-smoothing {eps} outside (0, 1e-3]");
        }
    }
    let reference = read_report_file(&opts.reference)?;
    let monitor = OnlineMonitor::new(
        &reference,
        opts.thresholds,
        opts.batch_size,
        opts.qre_smoothing,
    )?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();

    let mut emit = |summary: &BatchSummary| -> anyhow::Result<()> {
        serde_json::to_writer(&mut out, summary)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    };

    if opts.records_stream == "-" {
        let stdin = std::io::stdin();
        stream_batches(stdin.lock(), &monitor, &mut emit)?;
    } else {
        let file = std::fs::File::open(&opts.records_stream)
            .with_context(|| format!("cannot open {}", opts.records_stream))?;
        stream_batches(std::io::BufReader::new(file), &monitor, &mut emit)?;
    }
    Ok(())
}

/// Read JSON-lines records and emit one summary per `batch_size` chunk as
/// soon as it fills (final partial batch included).
fn stream_batches<R: BufRead>(
    reader: R,
    monitor: &OnlineMonitor,
    emit: &mut dyn FnMut(&BatchSummary) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let mut pending: Vec<String> = Vec::new();
    let mut batch_index = 0usize;
    let mut line_no = 0usize;
    let mut first_line = 1usize;

    let mut flush = |lines: &mut Vec<String>,
                     batch_index: &mut usize,
                     first_line: usize|
     -> anyhow::Result<()> {
        if lines.is_empty() {
            return Ok(());
        }
        let joined = lines.join("\n");
        let records = read_records(joined.as_bytes()).map_err(|e| {
            anyhow::anyhow!("batch starting at stream line {first_line}: {e}")
        })?;
        let summary = monitor.check_batch(*batch_index, &records)?;
        emit(&summary)?;
        *batch_index += 1;
        lines.clear();
        Ok(())
    };

    for line in reader.lines() {
        let line = line?;
        line_no += 1;
        if line.trim().is_empty() {
            continue;
        }
        if pending.is_empty() {
            first_line = line_no;
        }
        pending.push(line);
        if pending.len() == monitor.batch_size() {
            flush(&mut pending, &mut batch_index, first_line)?;
        }
    }
    flush(&mut pending, &mut batch_index, first_line)?;
    Ok(())
}

/// Parse `--thresholds`: one value applied to every metric, or four
/// comma-separated values in the order trace distance, fidelity, Bures
/// distance, quantum relative entropy.
pub fn parse_thresholds(raw: &str) -> anyhow::Result<ThresholdConfig> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    let values: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .with_context(|| format!("threshold {p:?} is not a number"))
        })
        .collect::<anyhow::Result<_>>()?;
    let config = match values.as_slice() {
        [t] => ThresholdConfig::uniform(*t),
        [td, fid, bures, qre] => ThresholdConfig {
            trace_distance: *td,
            fidelity: *fid,
            bures_distance: *bures,
            quantum_relative_entropy: *qre,
        },
        _ => bail!("--thresholds takes one value or four comma-separated values"),
    };
    config.validate()?;
    Ok(config)
}
