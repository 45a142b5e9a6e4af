//! The safety-monitoring procedure: partition prediction records by
//! correctness and class, aggregate each set into a density matrix, measure
//! the quantum distances between the sets, relate them to accuracy, apply
//! threshold flags, and emit structured reports. An online monitor compares
//! incoming prediction batches against the validation-time reference
//! aggregates.

use crate::exec;
use crate::linalg::ComplexMatrix;
use crate::metrics::{
    all_metrics, pearson_correlation, MetricError, MetricKind, MetricOptions, MetricValue,
};
use crate::state::{
    density_from_distribution, validate_density, DensityMatrix, StateError, StateVector,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("no records to analyze")]
    EmptyInput,
    #[error("cannot aggregate an empty record set")]
    EmptySet,
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("record {sample_id:?} has no true label; offline analysis requires one")]
    MissingTrueLabel { sample_id: String },
    #[error("record state dim {got} does not match {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("predicted class {label} is absent from the reference report")]
    UnknownClass { label: usize },
    #[error("need at least {needed} reports, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("all metric/accuracy series are constant; correlation undefined")]
    ZeroVariance,
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("batch size must be at least 1")]
    BadBatchSize,
    #[error("bad record at line {line}: {detail}")]
    RecordParse { line: usize, detail: String },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Classifier output attached to a prediction record: either the raw output
/// statevector or a basis-outcome distribution. Both validate on
/// deserialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OutputStateDto", into = "OutputStateDto")]
pub enum OutputState {
    Statevector(StateVector),
    Distribution(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum OutputStateDto {
    Statevector { amplitudes: Vec<[f64; 2]> },
    Distribution { probs: Vec<f64> },
}

impl TryFrom<OutputStateDto> for OutputState {
    type Error = StateError;

    fn try_from(dto: OutputStateDto) -> Result<Self, StateError> {
        match dto {
            OutputStateDto::Statevector { amplitudes } => {
                let amps = amplitudes
                    .into_iter()
                    .map(|[re, im]| Complex64::new(re, im))
                    .collect();
                Ok(OutputState::Statevector(StateVector::new(amps)?))
            }
            OutputStateDto::Distribution { probs } => {
                // validate via the density constructor, then keep the raw vector
                density_from_distribution(&probs)?;
                Ok(OutputState::Distribution(probs))
            }
        }
    }
}

impl From<OutputState> for OutputStateDto {
    fn from(state: OutputState) -> Self {
        match state {
            OutputState::Statevector(sv) => OutputStateDto::Statevector {
                amplitudes: sv.amplitudes().iter().map(|a| [a.re, a.im]).collect(),
            },
            OutputState::Distribution(probs) => OutputStateDto::Distribution { probs },
        }
    }
}

impl OutputState {
    pub fn dim(&self) -> usize {
        match self {
            OutputState::Statevector(sv) => sv.dim(),
            OutputState::Distribution(probs) => probs.len(),
        }
    }

    /// Density-matrix view: projector for statevectors, diagonal matrix for
    /// distributions.
    pub fn to_density(&self) -> Result<DensityMatrix, StateError> {
        match self {
            OutputState::Statevector(sv) => Ok(DensityMatrix::from_pure(sv)),
            OutputState::Distribution(probs) => density_from_distribution(probs),
        }
    }
}

/// One classified sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_label: Option<usize>,
    pub predicted_label: usize,
    #[serde(rename = "state")]
    pub output_state: OutputState,
}

/// Which label a record is grouped under in the per-class partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// Group by true label: "how does the model fail on class c".
    #[default]
    TrueLabel,
    /// Group by predicted label, as the online phase must.
    PredictedLabel,
}

/// Per-class split into correctly and incorrectly classified records.
#[derive(Debug)]
pub struct ClassPartition<'a> {
    pub class_label: usize,
    pub correct: Vec<&'a PredictionRecord>,
    pub misclassified: Vec<&'a PredictionRecord>,
}

/// Partition records by true label (the default grouping).
pub fn partition(
    records: &[PredictionRecord],
    n_classes: usize,
) -> Result<Vec<ClassPartition<'_>>, MonitorError> {
    partition_by(records, n_classes, Grouping::TrueLabel)
}

/// Partition records into exactly `n_classes` class partitions under the
/// chosen grouping. Every record lands in exactly one list of one partition.
pub fn partition_by(
    records: &[PredictionRecord],
    n_classes: usize,
    grouping: Grouping,
) -> Result<Vec<ClassPartition<'_>>, MonitorError> {
    let mut partitions: Vec<ClassPartition> = (0..n_classes)
        .map(|class_label| ClassPartition {
            class_label,
            correct: Vec::new(),
            misclassified: Vec::new(),
        })
        .collect();

    for record in records {
        let true_label = record
            .true_label
            .ok_or_else(|| MonitorError::MissingTrueLabel {
                sample_id: record.sample_id.clone(),
            })?;
        for label in [true_label, record.predicted_label] {
            if label >= n_classes {
                return Err(MonitorError::LabelOutOfRange { label, n_classes });
            }
        }
        let home = match grouping {
            Grouping::TrueLabel => true_label,
            Grouping::PredictedLabel => record.predicted_label,
        };
        if true_label == record.predicted_label {
            partitions[home].correct.push(record);
        } else {
            partitions[home].misclassified.push(record);
        }
    }
    Ok(partitions)
}

/// Uniform-weight aggregate of record output states: each record contributes
/// its density-matrix view with weight `1/N`.
pub fn aggregate<'a, I>(records: I) -> Result<DensityMatrix, MonitorError>
where
    I: IntoIterator<Item = &'a PredictionRecord>,
{
    let mut acc: Option<ComplexMatrix> = None;
    let mut count = 0usize;
    for record in records {
        let rho = record.output_state.to_density()?;
        match &mut acc {
            None => acc = Some(rho.matrix().clone()),
            Some(sum) => {
                if sum.dim() != rho.dim() {
                    return Err(MonitorError::DimMismatch {
                        expected: sum.dim(),
                        got: rho.dim(),
                    });
                }
                *sum = sum.add(rho.matrix());
            }
        }
        count += 1;
    }
    let sum = acc.ok_or(MonitorError::EmptySet)?;
    let mean = sum.scaled(1.0 / count as f64);
    validate_density(mean).map_err(|v| MonitorError::State(StateError::Invalid(v)))
}

/// Per-metric value container with a stable serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerMetric<T> {
    pub trace_distance: T,
    pub fidelity: T,
    pub bures_distance: T,
    pub quantum_relative_entropy: T,
}

impl<T> PerMetric<T> {
    pub fn build(mut f: impl FnMut(MetricKind) -> T) -> Self {
        Self {
            trace_distance: f(MetricKind::TraceDistance),
            fidelity: f(MetricKind::Fidelity),
            bures_distance: f(MetricKind::BuresDistance),
            quantum_relative_entropy: f(MetricKind::QuantumRelativeEntropy),
        }
    }

    pub fn get(&self, kind: MetricKind) -> &T {
        match kind {
            MetricKind::TraceDistance => &self.trace_distance,
            MetricKind::Fidelity => &self.fidelity,
            MetricKind::BuresDistance => &self.bures_distance,
            MetricKind::QuantumRelativeEntropy => &self.quantum_relative_entropy,
        }
    }
}

/// Serialized form of one metric value. `value: null` encodes an infinite
/// relative entropy (JSON has no infinity literal).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub value: Option<f64>,
    pub support_violation: bool,
}

impl From<&MetricValue> for MetricEntry {
    fn from(m: &MetricValue) -> Self {
        Self {
            value: m.value.is_finite().then_some(m.value),
            support_violation: m.support_violation,
        }
    }
}

impl MetricEntry {
    pub fn value_or_inf(&self) -> f64 {
        self.value.unwrap_or(f64::INFINITY)
    }
}

/// Per-metric flagging thresholds on the normalized dissimilarity scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub trace_distance: f64,
    pub fidelity: f64,
    pub bures_distance: f64,
    pub quantum_relative_entropy: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self::uniform(0.5)
    }
}

impl ThresholdConfig {
    pub fn uniform(threshold: f64) -> Self {
        Self {
            trace_distance: threshold,
            fidelity: threshold,
            bures_distance: threshold,
            quantum_relative_entropy: threshold,
        }
    }

    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::TraceDistance => self.trace_distance,
            MetricKind::Fidelity => self.fidelity,
            MetricKind::BuresDistance => self.bures_distance,
            MetricKind::QuantumRelativeEntropy => self.quantum_relative_entropy,
        }
    }

    pub fn validate(&self) -> Result<(), MonitorError> {
        for kind in MetricKind::ALL {
            let t = self.get(kind);
            if !(0.0..=1.0).contains(&t) {
                return Err(MonitorError::BadThreshold(t));
            }
        }
        Ok(())
    }
}

/// Analysis settings, echoed verbatim into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub thresholds: ThresholdConfig,
    #[serde(default)]
    pub grouping: Grouping,
    /// Opt-in smoothing for the relative entropy; `None` keeps honest
    /// infinities on support violations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qre_smoothing: Option<f64>,
    /// Aggregation rule identifier; uniform record weighting is the only
    /// supported rule.
    #[serde(default = "default_aggregation")]
    pub aggregation: String,
}

fn default_aggregation() -> String {
    "uniform".into()
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            thresholds: ThresholdConfig::default(),
            grouping: Grouping::default(),
            qre_smoothing: None,
            aggregation: default_aggregation(),
        }
    }
}

/// Serializable density matrix, stored with reports so the online phase can
/// reuse validation-time aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixData {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

impl From<&DensityMatrix> for DensityMatrixData {
    fn from(rho: &DensityMatrix) -> Self {
        Self {
            dim: rho.dim(),
            entries: rho.matrix().entries().iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl DensityMatrixData {
    pub fn to_density(&self) -> Result<DensityMatrix, MonitorError> {
        let entries = self
            .entries
            .iter()
            .map(|[re, im]| Complex64::new(*re, *im))
            .collect();
        let matrix = ComplexMatrix::new(self.dim, entries)
            .map_err(|e| MonitorError::State(StateError::Linalg(e)))?;
        validate_density(matrix).map_err(|v| MonitorError::State(StateError::Invalid(v)))
    }
}

/// Safety results for one class (or, with `class_label: None`, for the whole
/// record set). Degenerate cases carry a reason and omit metrics instead of
/// zero-filling them: an all-correct class is a success, not a zero
/// distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSafetyResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_label: Option<usize>,
    pub n_correct: usize,
    pub n_misclassified: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<PerMetric<MetricEntry>>,
    /// Metrics mapped onto the common [0, 1] dissimilarity scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<PerMetric<f64>>,
    /// Per-metric |normalized - class_accuracy|; absent for infinite values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closeness: Option<PerMetric<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flags: Option<PerMetric<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degenerate: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Aggregate of the correctly classified set; the online monitor's
    /// reference for this class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct_aggregate: Option<DensityMatrixData>,
}

impl ClassSafetyResult {
    pub fn flag_count(&self) -> usize {
        self.flags
            .as_ref()
            .map(|f| MetricKind::ALL.iter().filter(|&&k| *f.get(k)).count())
            .unwrap_or(0)
    }
}

/// Pearson correlation of one metric against accuracy across reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCorrelation {
    pub r: Option<f64>,
    pub n_used: usize,
    /// Reports dropped pairwise (missing or infinite overall metric).
    pub n_excluded: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub n_reports: usize,
    pub per_metric: PerMetric<MetricCorrelation>,
}

/// The monitor's primary output document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub schema_version: String,
    pub dataset_id: String,
    pub n_records: usize,
    pub n_correct: usize,
    /// Exactly `n_correct / n_records`.
    pub model_accuracy: f64,
    pub per_class: Vec<ClassSafetyResult>,
    pub overall: ClassSafetyResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlations: Option<CorrelationSummary>,
    pub config_echo: MonitorConfig,
}

pub const REPORT_SCHEMA_VERSION: &str = "1";

fn analyze_set(
    class_label: Option<usize>,
    correct: &[&PredictionRecord],
    misclassified: &[&PredictionRecord],
    config: &MonitorConfig,
) -> Result<ClassSafetyResult, MonitorError> {
    let n_correct = correct.len();
    let n_misclassified = misclassified.len();
    let total = n_correct + n_misclassified;

    let class_accuracy = (total > 0).then(|| n_correct as f64 / total as f64);
    let correct_aggregate = if n_correct > 0 {
        Some(aggregate(correct.iter().copied())?)
    } else {
        None
    };

    let mut result = ClassSafetyResult {
        class_label,
        n_correct,
        n_misclassified,
        class_accuracy,
        metrics: None,
        normalized: None,
        closeness: None,
        flags: None,
        degenerate: None,
        warnings: Vec::new(),
        correct_aggregate: correct_aggregate.as_ref().map(DensityMatrixData::from),
    };

    if total == 0 {
        result.degenerate = Some("no records".into());
        return Ok(result);
    }
    if n_misclassified == 0 {
        result.degenerate = Some("no misclassified samples".into());
        return Ok(result);
    }
    if n_correct == 0 {
        result.degenerate = Some("no correctly classified samples".into());
        return Ok(result);
    }

    let correct_rho = correct_aggregate.expect("nonempty correct set");
    let mis_rho = aggregate(misclassified.iter().copied())?;
    let opts = MetricOptions {
        qre_smoothing: config.qre_smoothing,
    };
    let set = all_metrics(&correct_rho, &mis_rho, opts)?;

    let accuracy = class_accuracy.expect("total > 0");
    let normalized = PerMetric::build(|k| set.get(k).normalized_dissimilarity());
    let closeness = PerMetric::build(|k| {
        let m = set.get(k);
        m.is_finite()
            .then(|| (m.normalized_dissimilarity() - accuracy).abs())
    });
    let flags = PerMetric::build(|k| *normalized.get(k) > config.thresholds.get(k));

    let qre = set.get(MetricKind::QuantumRelativeEntropy);
    if !qre.is_finite() {
        result.warnings.push(
            "quantum_relative_entropy is infinite: the compared aggregates have mismatched supports"
                .into(),
        );
    } else if qre.value > 1.0 {
        result.warnings.push(format!(
            "quantum_relative_entropy exceeds 1 ({:.4}); large divergences can also indicate malformed states",
            qre.value
        ));
    }

    result.metrics = Some(PerMetric::build(|k| MetricEntry::from(set.get(k))));
    result.normalized = Some(normalized);
    result.closeness = Some(closeness);
    result.flags = Some(flags);
    Ok(result)
}

/// Full offline analysis: per-class and pooled comparisons of correct versus
/// misclassified aggregates, with accuracy, closeness, and threshold flags.
/// Per-class computations run data-parallel and merge in class order.
///
/// ```
/// use qsafeml::monitor::{analyze, MonitorConfig, OutputState, PredictionRecord};
/// use qsafeml::state::StateVector;
///
/// let records = vec![
///     PredictionRecord {
///         sample_id: "a".into(),
///         true_label: Some(0),
///         predicted_label: 0,
///         output_state: OutputState::Statevector(StateVector::basis(2, 0)),
///     },
///     PredictionRecord {
///         sample_id: "b".into(),
///         true_label: Some(0),
///         predicted_label: 1,
///         output_state: OutputState::Statevector(StateVector::basis(2, 1)),
///     },
/// ];
/// let report = analyze(&records, 2, &MonitorConfig::default(), "demo").unwrap();
/// assert_eq!(report.model_accuracy, 0.5);
/// // orthogonal correct/misclassified aggregates breach every threshold
/// assert_eq!(report.per_class[0].flag_count(), 4);
/// ```
pub fn analyze(
    records: &[PredictionRecord],
    n_classes: usize,
    config: &MonitorConfig,
    dataset_id: &str,
) -> Result<SafetyReport, MonitorError> {
    if records.is_empty() {
        return Err(MonitorError::EmptyInput);
    }
    config.thresholds.validate()?;
    let partitions = partition_by(records, n_classes, config.grouping)?;

    let per_class: Vec<ClassSafetyResult> = {
        let results = exec::map_ordered(&partitions, |p| {
            analyze_set(Some(p.class_label), &p.correct, &p.misclassified, config)
        });
        let mut out = Vec::with_capacity(results.len());
        for r in results {
            out.push(r?);
        }
        out
    };

    let mut all_correct: Vec<&PredictionRecord> = Vec::new();
    let mut all_mis: Vec<&PredictionRecord> = Vec::new();
    for p in &partitions {
        all_correct.extend_from_slice(&p.correct);
        all_mis.extend_from_slice(&p.misclassified);
    }
    let overall = analyze_set(None, &all_correct, &all_mis, config)?;

    let n_correct = all_correct.len();
    Ok(SafetyReport {
        schema_version: REPORT_SCHEMA_VERSION.into(),
        dataset_id: dataset_id.into(),
        n_records: records.len(),
        n_correct,
        model_accuracy: n_correct as f64 / records.len() as f64,
        per_class,
        overall,
        correlations: None,
        config_echo: config.clone(),
    })
}

/// Pearson correlations between overall metric values and model accuracies
/// across several reports. Reports with a missing or infinite overall value
/// for a metric are excluded pairwise for that metric, with the exclusion
/// count reported.
pub fn correlate_reports(reports: &[SafetyReport]) -> Result<CorrelationSummary, MonitorError> {
    if reports.len() < 2 {
        return Err(MonitorError::InsufficientData {
            needed: 2,
            got: reports.len(),
        });
    }

    let mut zero_variance_everywhere = true;
    let per_metric = PerMetric::build(|kind| {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut excluded = 0usize;
        for report in reports {
            let value = report
                .overall
                .metrics
                .as_ref()
                .and_then(|m| m.get(kind).value);
            match value {
                Some(v) => {
                    xs.push(v);
                    ys.push(report.model_accuracy);
                }
                None => excluded += 1,
            }
        }
        if xs.len() < 2 {
            return MetricCorrelation {
                r: None,
                n_used: xs.len(),
                n_excluded: excluded,
                note: Some("fewer than two finite values".into()),
            };
        }
        match pearson_correlation(&xs, &ys) {
            Ok(r) => {
                zero_variance_everywhere = false;
                MetricCorrelation {
                    r: Some(r),
                    n_used: xs.len(),
                    n_excluded: excluded,
                    note: None,
                }
            }
            Err(MetricError::ZeroVariance { side }) => MetricCorrelation {
                r: None,
                n_used: xs.len(),
                n_excluded: excluded,
                note: Some(format!("zero variance in the {side} series")),
            },
            Err(e) => MetricCorrelation {
                r: None,
                n_used: xs.len(),
                n_excluded: excluded,
                note: Some(e.to_string()),
            },
        }
    });

    if zero_variance_everywhere {
        return Err(MonitorError::ZeroVariance);
    }
    Ok(CorrelationSummary {
        n_reports: reports.len(),
        per_metric,
    })
}

/// One class's check within an online batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineClassCheck {
    pub class_label: usize,
    pub n_records: usize,
    pub metrics: PerMetric<MetricEntry>,
    pub normalized: PerMetric<f64>,
    pub flags: PerMetric<bool>,
    pub n_flags: usize,
}

/// Per-batch summary emitted by the online monitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub batch_index: usize,
    pub n_records: usize,
    pub classes: Vec<OnlineClassCheck>,
    /// Reference classes with no records in this batch.
    pub skipped_classes: Vec<usize>,
    pub n_metric_checks: usize,
    pub n_flags: usize,
    pub any_flag: bool,
}

/// Online monitor: holds the validation-time correct-set aggregates and
/// checks incoming batches (grouped by predicted label) against them.
#[derive(Debug, Clone)]
pub struct OnlineMonitor {
    reference: Vec<Option<DensityMatrix>>,
    thresholds: ThresholdConfig,
    qre_smoothing: Option<f64>,
    batch_size: usize,
}

impl OnlineMonitor {
    pub fn new(
        reference: &SafetyReport,
        thresholds: ThresholdConfig,
        batch_size: usize,
        qre_smoothing: Option<f64>,
    ) -> Result<Self, MonitorError> {
        if batch_size == 0 {
            return Err(MonitorError::BadBatchSize);
        }
        thresholds.validate()?;
        let mut aggregates = Vec::with_capacity(reference.per_class.len());
        for class in &reference.per_class {
            match &class.correct_aggregate {
                Some(data) => aggregates.push(Some(data.to_density()?)),
                None => aggregates.push(None),
            }
        }
        Ok(Self {
            reference: aggregates,
            thresholds,
            qre_smoothing,
            batch_size,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Check one batch: aggregate it per predicted class, measure each class
    /// aggregate against the reference aggregate, flag threshold breaches.
    pub fn check_batch(
        &self,
        batch_index: usize,
        records: &[PredictionRecord],
    ) -> Result<BatchSummary, MonitorError> {
        let n_ref = self.reference.len();
        let mut buckets: Vec<Vec<&PredictionRecord>> = vec![Vec::new(); n_ref];
        for record in records {
            let label = record.predicted_label;
            if label >= n_ref {
                return Err(MonitorError::UnknownClass { label });
            }
            buckets[label].push(record);
        }

        let mut classes = Vec::new();
        let mut skipped = Vec::new();
        for (class_label, bucket) in buckets.iter().enumerate() {
            if bucket.is_empty() {
                skipped.push(class_label);
                continue;
            }
            let reference = self.reference[class_label]
                .as_ref()
                .ok_or(MonitorError::UnknownClass { label: class_label })?;
            let batch_rho = aggregate(bucket.iter().copied())?;
            let set = all_metrics(
                &batch_rho,
                reference,
                MetricOptions {
                    qre_smoothing: self.qre_smoothing,
                },
            )?;
            let normalized = PerMetric::build(|k| set.get(k).normalized_dissimilarity());
            let flags = PerMetric::build(|k| *normalized.get(k) > self.thresholds.get(k));
            let n_flags = MetricKind::ALL.iter().filter(|&&k| *flags.get(k)).count();
            classes.push(OnlineClassCheck {
                class_label,
                n_records: bucket.len(),
                metrics: PerMetric::build(|k| MetricEntry::from(set.get(k))),
                normalized,
                flags,
                n_flags,
            });
        }

        let n_metric_checks = classes.len() * MetricKind::ALL.len();
        let n_flags = classes.iter().map(|c| c.n_flags).sum();
        Ok(BatchSummary {
            batch_index,
            n_records: records.len(),
            classes,
            skipped_classes: skipped,
            n_metric_checks,
            n_flags,
            any_flag: n_flags > 0,
        })
    }

    /// Run over a full record stream in batches of `batch_size` (final
    /// partial batch included).
    pub fn run(&self, records: &[PredictionRecord]) -> Result<Vec<BatchSummary>, MonitorError> {
        records
            .chunks(self.batch_size)
            .enumerate()
            .map(|(i, chunk)| self.check_batch(i, chunk))
            .collect()
    }
}

/// Total flags over total metric checks across batch summaries.
pub fn flag_rate(summaries: &[BatchSummary]) -> f64 {
    let checks: usize = summaries.iter().map(|s| s.n_metric_checks).sum();
    let flags: usize = summaries.iter().map(|s| s.n_flags).sum();
    if checks == 0 {
        0.0
    } else {
        flags as f64 / checks as f64
    }
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Write records as JSON lines.
pub fn write_records<W: Write>(writer: &mut W, records: &[PredictionRecord]) -> Result<(), MonitorError> {
    for record in records {
        serde_json::to_writer(&mut *writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Read JSON-lines records, reporting the 1-based line number on failure.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<PredictionRecord>, MonitorError> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| MonitorError::RecordParse {
                line: idx + 1,
                detail: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

pub fn read_records_file(path: &Path) -> Result<Vec<PredictionRecord>, MonitorError> {
    let file = std::fs::File::open(path)?;
    read_records(std::io::BufReader::new(file))
}

pub fn write_records_file(path: &Path, records: &[PredictionRecord]) -> Result<(), MonitorError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_records(&mut file, records)?;
    file.flush()?;
    Ok(())
}

pub fn write_report_file(path: &Path, report: &SafetyReport) -> Result<(), MonitorError> {
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

pub fn read_report_file(path: &Path) -> Result<SafetyReport, MonitorError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn scope_name(result: &ClassSafetyResult) -> String {
    match result.class_label {
        Some(label) => label.to_string(),
        None => "overall".into(),
    }
}

/// Export per-class metric values and closeness as plot-ready CSV files
/// (`metrics.csv` and `closeness.csv` in `dir`).
pub fn export_plot_data(report: &SafetyReport, dir: &Path) -> Result<(), MonitorError> {
    std::fs::create_dir_all(dir)?;

    let mut metrics = csv::Writer::from_path(dir.join("metrics.csv"))?;
    metrics.write_record([
        "dataset_id",
        "class",
        "n_correct",
        "n_misclassified",
        "metric",
        "value",
        "normalized",
        "threshold",
        "flag",
        "support_violation",
    ])?;
    let mut closeness = csv::Writer::from_path(dir.join("closeness.csv"))?;
    closeness.write_record(["dataset_id", "class", "class_accuracy", "metric", "closeness"])?;

    let scopes = report.per_class.iter().chain(std::iter::once(&report.overall));
    for result in scopes {
        let scope = scope_name(result);
        if let (Some(m), Some(norm), Some(flags)) =
            (&result.metrics, &result.normalized, &result.flags)
        {
            for kind in MetricKind::ALL {
                let entry = m.get(kind);
                metrics.write_record([
                    report.dataset_id.clone(),
                    scope.clone(),
                    result.n_correct.to_string(),
                    result.n_misclassified.to_string(),
                    kind.name().to_string(),
                    entry
                        .value
                        .map(|v| v.to_string())
                        .unwrap_or_else(|| "inf".into()),
                    norm.get(kind).to_string(),
                    report.config_echo.thresholds.get(kind).to_string(),
                    flags.get(kind).to_string(),
                    entry.support_violation.to_string(),
                ])?;
            }
        }
        if let (Some(close), Some(accuracy)) = (&result.closeness, result.class_accuracy) {
            for kind in MetricKind::ALL {
                if let Some(c) = close.get(kind) {
                    closeness.write_record([
                        report.dataset_id.clone(),
                        scope.clone(),
                        accuracy.to_string(),
                        kind.name().to_string(),
                        c.to_string(),
                    ])?;
                }
            }
        }
    }
    metrics.flush()?;
    closeness.flush()?;
    Ok(())
}

/// Build a report carrying only overall metric values and an accuracy; used
/// to correlate externally supplied per-dataset results.
pub fn report_from_overall(
    dataset_id: &str,
    values: &PerMetric<f64>,
    model_accuracy: f64,
) -> SafetyReport {
    let metrics = PerMetric::build(|k| MetricEntry {
        value: Some(*values.get(k)),
        support_violation: false,
    });
    let overall = ClassSafetyResult {
        class_label: None,
        n_correct: 0,
        n_misclassified: 0,
        class_accuracy: Some(model_accuracy),
        metrics: Some(metrics),
        normalized: None,
        closeness: None,
        flags: None,
        degenerate: None,
        warnings: Vec::new(),
        correct_aggregate: None,
    };
    SafetyReport {
        schema_version: REPORT_SCHEMA_VERSION.into(),
        dataset_id: dataset_id.into(),
        n_records: 0,
        n_correct: 0,
        model_accuracy,
        per_class: Vec::new(),
        overall,
        correlations: None,
        config_echo: MonitorConfig::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::StateVector;

    fn sv_record(id: &str, true_label: usize, predicted: usize, basis: usize) -> PredictionRecord {
        PredictionRecord {
            sample_id: id.into(),
            true_label: Some(true_label),
            predicted_label: predicted,
            output_state: OutputState::Statevector(StateVector::basis(2, basis)),
        }
    }

    #[test]
    fn partition_examples() {
        let records = vec![
            sv_record("a", 0, 0, 0),
            sv_record("b", 0, 1, 1),
            sv_record("c", 1, 1, 1),
        ];
        let parts = partition(&records, 2).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].correct.len(), 1);
        assert_eq!(parts[0].misclassified.len(), 1);
        assert_eq!(parts[1].correct.len(), 1);
        assert_eq!(parts[1].misclassified.len(), 0);

        // all correct: every misclassified list empty
        let records = vec![sv_record("a", 0, 0, 0), sv_record("b", 1, 1, 1)];
        let parts = partition(&records, 2).unwrap();
        assert!(parts.iter().all(|p| p.misclassified.is_empty()));

        // predicted-label grouping moves the wrong prediction to class 1
        let records = vec![sv_record("a", 0, 1, 1)];
        let parts = partition_by(&records, 2, Grouping::PredictedLabel).unwrap();
        assert_eq!(parts[0].misclassified.len(), 0);
        assert_eq!(parts[1].misclassified.len(), 1);

        assert!(matches!(
            partition(&[sv_record("x", 5, 0, 0)], 2),
            Err(MonitorError::LabelOutOfRange { label: 5, .. })
        ));
    }

    #[test]
    fn partition_matches_confusion_matrix_tally() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let n_classes = 4;
        let records: Vec<PredictionRecord> = (0..1000)
            .map(|i| {
                let t = rng.random_range(0..n_classes);
                let p = rng.random_range(0..n_classes);
                sv_record(&format!("r{i}"), t, p, 0)
            })
            .collect();

        // independent confusion-matrix tally
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        for r in &records {
            confusion[r.true_label.unwrap()][r.predicted_label] += 1;
        }

        let parts = partition(&records, n_classes).unwrap();
        let mut total = 0;
        for (c, p) in parts.iter().enumerate() {
            let row_sum: usize = confusion[c].iter().sum();
            assert_eq!(p.correct.len(), confusion[c][c]);
            assert_eq!(p.misclassified.len(), row_sum - confusion[c][c]);
            total += p.correct.len() + p.misclassified.len();
        }
        assert_eq!(total, records.len(), "partition is lossless");
    }

    #[test]
    fn aggregate_examples() {
        let one = vec![sv_record("a", 0, 0, 0)];
        let rho = aggregate(&one).unwrap();
        assert!((rho.matrix().at(0, 0).re - 1.0).abs() < 1e-15);

        let two = vec![sv_record("a", 0, 0, 0), sv_record("b", 0, 0, 1)];
        let rho = aggregate(&two).unwrap();
        assert!((rho.matrix().at(0, 0).re - 0.5).abs() < 1e-15);
        assert!((rho.matrix().at(1, 1).re - 0.5).abs() < 1e-15);

        assert!(matches!(
            aggregate(Vec::<&PredictionRecord>::new()),
            Err(MonitorError::EmptySet)
        ));
    }

    #[test]
    fn aggregate_matches_direct_summation_oracle() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let records: Vec<PredictionRecord> = (0..50)
            .map(|i| PredictionRecord {
                sample_id: format!("r{i}"),
                true_label: Some(0),
                predicted_label: 0,
                output_state: OutputState::Statevector(StateVector::random(&mut rng, 4)),
            })
            .collect();

        // oracle: entrywise mean of projectors, hand-summed
        let mut expect = vec![Complex64::ZERO; 16];
        for r in &records {
            if let OutputState::Statevector(sv) = &r.output_state {
                let a = sv.amplitudes();
                for i in 0..4 {
                    for j in 0..4 {
                        expect[i * 4 + j] += a[i] * a[j].conj() / 50.0;
                    }
                }
            }
        }
        let rho = aggregate(&records).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((rho.matrix().at(i, j) - expect[i * 4 + j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn mixed_state_kinds_aggregate() {
        let records = vec![
            PredictionRecord {
                sample_id: "sv".into(),
                true_label: Some(0),
                predicted_label: 0,
                output_state: OutputState::Statevector(StateVector::basis(2, 0)),
            },
            PredictionRecord {
                sample_id: "dist".into(),
                true_label: Some(0),
                predicted_label: 0,
                output_state: OutputState::Distribution(vec![0.5, 0.5]),
            },
        ];
        let rho = aggregate(&records).unwrap();
        assert!((rho.matrix().at(0, 0).re - 0.75).abs() < 1e-12);
        assert!((rho.matrix().at(1, 1).re - 0.25).abs() < 1e-12);
    }

    #[test]
    fn analyze_all_correct_is_degenerate_success() {
        let records = vec![sv_record("a", 0, 0, 0), sv_record("b", 1, 1, 1)];
        let report = analyze(&records, 2, &MonitorConfig::default(), "t").unwrap();
        assert_eq!(report.model_accuracy, 1.0);
        for class in &report.per_class {
            assert_eq!(class.degenerate.as_deref(), Some("no misclassified samples"));
            assert!(class.metrics.is_none());
            assert_eq!(class.flag_count(), 0);
        }
        assert_eq!(
            report.overall.degenerate.as_deref(),
            Some("no misclassified samples")
        );
    }

    #[test]
    fn analyze_orthogonal_aggregates_flag_everything() {
        // class 0: correct set aggregates to |0><0|, misclassified to |1><1|
        let records = vec![
            sv_record("a", 0, 0, 0),
            PredictionRecord {
                sample_id: "b".into(),
                true_label: Some(0),
                predicted_label: 1,
                output_state: OutputState::Statevector(StateVector::basis(2, 1)),
            },
        ];
        let report = analyze(&records, 2, &MonitorConfig::default(), "t").unwrap();
        let class0 = &report.per_class[0];
        let metrics = class0.metrics.as_ref().unwrap();
        assert!((metrics.trace_distance.value.unwrap() - 1.0).abs() < 1e-9);
        assert!(metrics.fidelity.value.unwrap() < 1e-9);
        assert!(
            (metrics.bures_distance.value.unwrap() - std::f64::consts::SQRT_2).abs() < 1e-9
        );
        assert!(metrics.quantum_relative_entropy.value.is_none());
        assert!(metrics.quantum_relative_entropy.support_violation);
        let flags = class0.flags.as_ref().unwrap();
        assert!(MetricKind::ALL.iter().all(|&k| *flags.get(k)));
        // infinite metric: closeness undefined for the entropy only
        let closeness = class0.closeness.as_ref().unwrap();
        assert!(closeness.quantum_relative_entropy.is_none());
        assert!(closeness.trace_distance.is_some());
    }

    #[test]
    fn analyze_is_permutation_and_duplication_invariant() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let mut records: Vec<PredictionRecord> = Vec::new();
        for i in 0..30 {
            let t = i % 2;
            let p = if i % 7 == 0 { 1 - t } else { t };
            records.push(PredictionRecord {
                sample_id: format!("r{i}"),
                true_label: Some(t),
                predicted_label: p,
                output_state: OutputState::Statevector(StateVector::random(&mut rng, 2)),
            });
        }
        let cfg = MonitorConfig::default();
        let base = analyze(&records, 2, &cfg, "t").unwrap();

        let mut shuffled = records.clone();
        shuffled.shuffle(&mut rng);
        let permuted = analyze(&shuffled, 2, &cfg, "t").unwrap();
        assert_eq!(base.model_accuracy, permuted.model_accuracy);
        for (a, b) in base.per_class.iter().zip(&permuted.per_class) {
            let (ma, mb) = (a.metrics.as_ref().unwrap(), b.metrics.as_ref().unwrap());
            for kind in MetricKind::ALL {
                let (va, vb) = (ma.get(kind).value_or_inf(), mb.get(kind).value_or_inf());
                assert!(
                    (va - vb).abs() < 1e-12 || (va.is_infinite() && vb.is_infinite()),
                    "{kind} changed under permutation"
                );
            }
        }

        // duplicating every record renormalizes to the same aggregates
        let mut doubled = records.clone();
        doubled.extend(records.iter().cloned());
        let doubled_report = analyze(&doubled, 2, &cfg, "t").unwrap();
        assert!((doubled_report.model_accuracy - base.model_accuracy).abs() < 1e-15);
        for (a, b) in base.per_class.iter().zip(&doubled_report.per_class) {
            let (ma, mb) = (a.metrics.as_ref().unwrap(), b.metrics.as_ref().unwrap());
            for kind in MetricKind::ALL {
                let (va, vb) = (ma.get(kind).value_or_inf(), mb.get(kind).value_or_inf());
                assert!(
                    (va - vb).abs() < 1e-9 || (va.is_infinite() && vb.is_infinite()),
                    "{kind} changed under duplication"
                );
            }
        }
    }

    #[test]
    fn class_accuracies_reproduce_model_accuracy_exactly() {
        let records = vec![
            sv_record("a", 0, 0, 0),
            sv_record("b", 0, 1, 1),
            sv_record("c", 1, 1, 1),
            sv_record("d", 1, 1, 0),
            sv_record("e", 1, 0, 0),
        ];
        let report = analyze(&records, 2, &MonitorConfig::default(), "t").unwrap();
        // exact rational check: sum of per-class correct over total
        let num: usize = report.per_class.iter().map(|c| c.n_correct).sum();
        let den: usize = report
            .per_class
            .iter()
            .map(|c| c.n_correct + c.n_misclassified)
            .sum();
        assert_eq!(den, records.len());
        assert_eq!(num, report.n_correct);
        assert_eq!(report.model_accuracy, num as f64 / den as f64);
    }

    #[test]
    fn correlate_reports_examples() {
        // reference rows: four datasets' overall metrics and accuracies
        let rows = [
            (0.7482, 0.5000, 0.4677, 1.2396, 0.5333),
            (0.9036, 0.3701, 0.2517, 1.0000, 0.3056),
            (0.3352, 0.0535, 0.8893, 0.2424, 0.4250),
            (0.3627, 0.1299, 0.8714, 0.2823, 0.1406),
        ];
        let reports: Vec<SafetyReport> = rows
            .iter()
            .enumerate()
            .map(|(i, &(bures, td, fid, qre, acc))| {
                report_from_overall(
                    &format!("d{i}"),
                    &PerMetric {
                        trace_distance: td,
                        fidelity: fid,
                        bures_distance: bures,
                        quantum_relative_entropy: qre,
                    },
                    acc,
                )
            })
            .collect();
        let summary = correlate_reports(&reports).unwrap();
        let qre_r = summary.per_metric.quantum_relative_entropy.r.unwrap();
        let td_r = summary.per_metric.trace_distance.r.unwrap();
        assert!((qre_r - 0.54).abs() < 0.01, "qre r = {qre_r}");
        assert!((td_r - 0.48).abs() < 0.01, "td r = {td_r}");

        // identical reports: zero variance everywhere
        let twins = vec![reports[0].clone(), reports[0].clone()];
        assert!(matches!(
            correlate_reports(&twins),
            Err(MonitorError::ZeroVariance)
        ));

        // metric exactly equal to accuracy correlates perfectly
        let exact: Vec<SafetyReport> = [0.3, 0.6, 0.9]
            .iter()
            .map(|&a| {
                report_from_overall(
                    "x",
                    &PerMetric {
                        trace_distance: a,
                        fidelity: a,
                        bures_distance: a,
                        quantum_relative_entropy: a,
                    },
                    a,
                )
            })
            .collect();
        let summary = correlate_reports(&exact).unwrap();
        assert!((summary.per_metric.trace_distance.r.unwrap() - 1.0).abs() < 1e-12);

        assert!(matches!(
            correlate_reports(&reports[..1]),
            Err(MonitorError::InsufficientData { .. })
        ));
    }

    #[test]
    fn online_monitor_flags_orthogonal_stream_and_skips_missing_classes() {
        let validation = vec![
            sv_record("a", 0, 0, 0),
            PredictionRecord {
                sample_id: "b".into(),
                true_label: Some(0),
                predicted_label: 0,
                output_state: OutputState::Statevector(StateVector::basis(2, 0)),
            },
            sv_record("c", 1, 1, 1),
            PredictionRecord {
                sample_id: "d".into(),
                true_label: Some(1),
                predicted_label: 0,
                output_state: OutputState::Statevector(StateVector::basis(2, 1)),
            },
        ];
        let reference = analyze(&validation, 2, &MonitorConfig::default(), "ref").unwrap();
        let monitor =
            OnlineMonitor::new(&reference, ThresholdConfig::default(), 8, None).unwrap();

        // batch predicted class 0 but orthogonal to the class-0 reference |0><0|
        let stream = vec![PredictionRecord {
            sample_id: "x".into(),
            true_label: None,
            predicted_label: 0,
            output_state: OutputState::Statevector(StateVector::basis(2, 1)),
        }];
        let summaries = monitor.run(&stream).unwrap();
        assert_eq!(summaries.len(), 1);
        let s = &summaries[0];
        assert_eq!(s.classes.len(), 1);
        assert_eq!(s.classes[0].n_flags, 4, "all metrics flagged");
        assert_eq!(s.skipped_classes, vec![1]);
        assert!(s.any_flag);

        // in-distribution batch: identical to reference, no flags
        let stream = vec![PredictionRecord {
            sample_id: "y".into(),
            true_label: None,
            predicted_label: 0,
            output_state: OutputState::Statevector(StateVector::basis(2, 0)),
        }];
        let summaries = monitor.run(&stream).unwrap();
        assert_eq!(summaries[0].n_flags, 0);

        // unknown predicted class errors
        let stream = vec![PredictionRecord {
            sample_id: "z".into(),
            true_label: None,
            predicted_label: 7,
            output_state: OutputState::Statevector(StateVector::basis(2, 0)),
        }];
        assert!(matches!(
            monitor.run(&stream),
            Err(MonitorError::UnknownClass { label: 7 })
        ));
    }

    #[test]
    fn online_batch_size_one_gives_one_summary_per_record() {
        let validation = vec![
            sv_record("a", 0, 0, 0),
            PredictionRecord {
                sample_id: "m".into(),
                true_label: Some(0),
                predicted_label: 1,
                output_state: OutputState::Statevector(StateVector::basis(2, 1)),
            },
            sv_record("c", 1, 1, 1),
            PredictionRecord {
                sample_id: "n".into(),
                true_label: Some(1),
                predicted_label: 0,
                output_state: OutputState::Statevector(StateVector::basis(2, 0)),
            },
        ];
        let reference = analyze(&validation, 2, &MonitorConfig::default(), "ref").unwrap();
        let monitor = OnlineMonitor::new(&reference, ThresholdConfig::default(), 1, None).unwrap();
        let stream: Vec<PredictionRecord> = (0..5)
            .map(|i| PredictionRecord {
                sample_id: format!("s{i}"),
                true_label: None,
                predicted_label: i % 2,
                output_state: OutputState::Statevector(StateVector::basis(2, i % 2)),
            })
            .collect();
        let summaries = monitor.run(&stream).unwrap();
        assert_eq!(summaries.len(), 5);
        assert!(summaries.iter().all(|s| s.n_records == 1));
    }

    #[test]
    fn records_roundtrip_and_parse_errors() {
        let records = vec![
            sv_record("a", 0, 1, 0),
            PredictionRecord {
                sample_id: "d".into(),
                true_label: None,
                predicted_label: 1,
                output_state: OutputState::Distribution(vec![0.25, 0.75]),
            },
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"type\":\"statevector\""));
        assert!(text.contains("\"type\":\"distribution\""));
        assert!(!text.lines().next().unwrap().contains("true_label") || records[0].true_label.is_some());

        let parsed = read_records(&buf[..]).unwrap();
        assert_eq!(parsed, records);

        // invalid statevector norm is rejected with a line number
        let bad = br#"{"sample_id":"x","predicted_label":0,"state":{"type":"statevector","amplitudes":[[1.0,0.0],[1.0,0.0]]}}"#;
        match read_records(&bad[..]) {
            Err(MonitorError::RecordParse { line: 1, .. }) => {}
            other => panic!("expected RecordParse, got {other:?}"),
        }
    }

    #[test]
    fn report_json_roundtrip_preserves_infinity_encoding() {
        let records = vec![
            sv_record("a", 0, 0, 0),
            PredictionRecord {
                sample_id: "b".into(),
                true_label: Some(0),
                predicted_label: 1,
                output_state: OutputState::Statevector(StateVector::basis(2, 1)),
            },
        ];
        let report = analyze(&records, 2, &MonitorConfig::default(), "t").unwrap();
        let json = serde_json::to_string_pretty(&report).unwrap();
        assert!(json.contains("\"schema_version\": \"1\""));
        let back: SafetyReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        let qre = &back.per_class[0]
            .metrics
            .as_ref()
            .unwrap()
            .quantum_relative_entropy;
        assert!(qre.value.is_none());
        assert!(qre.value_or_inf().is_infinite());
    }

    #[test]
    fn plot_export_writes_expected_tables() {
        let records = vec![
            sv_record("a", 0, 0, 0),
            PredictionRecord {
                sample_id: "b".into(),
                true_label: Some(0),
                predicted_label: 1,
                output_state: OutputState::Statevector(StateVector::basis(2, 1)),
            },
            sv_record("c", 1, 1, 1),
        ];
        let report = analyze(&records, 2, &MonitorConfig::default(), "demo").unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_plot_data(&report, dir.path()).unwrap();

        let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        let lines: Vec<&str> = metrics.lines().collect();
        assert_eq!(lines[0], "dataset_id,class,n_correct,n_misclassified,metric,value,normalized,threshold,flag,support_violation");
        // class 0 (non-degenerate) and overall both export 4 metric rows
        assert_eq!(lines.len(), 1 + 8);
        assert!(metrics.contains("inf"));

        let closeness = std::fs::read_to_string(dir.path().join("closeness.csv")).unwrap();
        assert!(closeness.lines().count() > 1);
    }
}
