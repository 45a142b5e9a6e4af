//! Dataset ingestion and preparation: CSV loading with dense label
//! re-indexing, min-max feature scaling, PCA on the covariance
//! eigendecomposition, stratified splitting, synthetic blob generation, and
//! label-noise injection.

use crate::linalg::{eig_hermitian, ComplexMatrix, LinalgError};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("parse error at row {row}, column {column} ({name}): {detail}")]
    Parse {
        row: usize,
        column: usize,
        name: String,
        detail: String,
    },
    #[error("label column {0:?} not found in header")]
    MissingLabel(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("k = {k} exceeds feature count {n_features}")]
    KTooLarge { k: usize, n_features: usize },
    #[error("PCA needs at least as many samples as features ({n_samples} < {n_features})")]
    TooFewSamples {
        n_samples: usize,
        n_features: usize,
    },
    #[error("test fraction {0} outside (0, 1)")]
    BadFraction(f64),
    #[error("cannot split {0} sample(s) into nonempty train and test sides")]
    TooSmallToSplit(usize),
    #[error("feature count mismatch: dataset has {got}, transform expects {expected}")]
    FeatureMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Labeled numeric dataset. Features are row-major; labels are densely
/// re-indexed into `0..n_classes` with the original names preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    n_classes: usize,
    pub feature_names: Option<Vec<String>>,
    pub label_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self, DataError> {
        if labels.is_empty() || n_features == 0 {
            return Err(DataError::EmptyDataset);
        }
        assert_eq!(
            features.len(),
            labels.len() * n_features,
            "feature buffer does not match sample count"
        );
        assert!(
            labels.iter().all(|&l| l < n_classes),
            "label outside 0..n_classes"
        );
        assert!(
            features.iter().all(|x| x.is_finite()),
            "non-finite feature value"
        );
        Ok(Self {
            features,
            n_features,
            labels,
            n_classes,
            feature_names: None,
            label_names: None,
        })
    }

    #[inline]
    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_samples()).map(move |i| self.row(i))
    }

    /// Subset by sample indices, preserving metadata.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            n_features: self.n_features,
            labels,
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
        }
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// How to pick the label column out of a CSV header.
#[derive(Debug, Clone)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl LabelColumn {
    /// Parse a CLI-style selector: a header name, or a numeric column index.
    pub fn parse(raw: &str) -> Self {
        match raw.parse::<usize>() {
            Ok(idx) => LabelColumn::Index(idx),
            Err(_) => LabelColumn::Name(raw.to_string()),
        }
    }
}

/// Load a headered CSV. Every non-label cell must parse as a finite number;
/// labels are re-indexed densely (numeric order when all labels are
/// integers, lexicographic otherwise) with the original names kept in
/// `label_names`.
pub fn load_csv(path: &Path, label_column: &LabelColumn) -> Result<Dataset, DataError> {
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|source| DataError::Csv {
            path: path_str.clone(),
            source,
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|source| DataError::Csv {
            path: path_str.clone(),
            source,
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let label_idx = match label_column {
        LabelColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingLabel(name.clone()))?,
        LabelColumn::Index(idx) => {
            if *idx >= headers.len() {
                return Err(DataError::MissingLabel(format!("column index {idx}")));
            }
            *idx
        }
    };

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut raw_labels: Vec<String> = Vec::new();
    let mut features: Vec<f64> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|source| DataError::Csv {
            path: path_str.clone(),
            source,
        })?;
        for (col_idx, cell) in record.iter().enumerate() {
            if col_idx == label_idx {
                raw_labels.push(cell.trim().to_string());
                continue;
            }
            let value: f64 = cell.trim().parse().map_err(|_| DataError::Parse {
                row: row_idx + 2, // 1-based, counting the header line
                column: col_idx + 1,
                name: headers.get(col_idx).cloned().unwrap_or_default(),
                detail: format!("{cell:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(DataError::Parse {
                    row: row_idx + 2,
                    column: col_idx + 1,
                    name: headers.get(col_idx).cloned().unwrap_or_default(),
                    detail: "non-finite value".into(),
                });
            }
            features.push(value);
        }
    }
    if raw_labels.is_empty() {
        return Err(DataError::EmptyDataset);
    }

    // Dense re-indexing: numeric order when every label parses as an
    // integer (so synthetic files round-trip), lexicographic otherwise.
    let mut unique: Vec<String> = raw_labels.clone();
    unique.sort();
    unique.dedup();
    if unique.iter().all(|l| l.parse::<i64>().is_ok()) {
        unique.sort_by_key(|l| l.parse::<i64>().expect("checked integer label"));
    }
    let index_of = |name: &str| -> usize {
        unique
            .iter()
            .position(|u| u == name)
            .expect("label present in unique list")
    };
    let labels: Vec<usize> = raw_labels.iter().map(|l| index_of(l)).collect();
    let n_classes = unique.len();

    let n_features = headers.len() - 1;
    let mut dataset = Dataset::new(features, n_features, labels, n_classes)?;
    dataset.feature_names = Some(feature_names);
    dataset.label_names = Some(unique);
    Ok(dataset)
}

/// Write a dataset as a headered CSV (features then a `label` column holding
/// the original label names where known).
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<(), DataError> {
    let path_str = path.display().to_string();
    let mut writer = csv::Writer::from_path(path).map_err(|source| DataError::Csv {
        path: path_str.clone(),
        source,
    })?;
    let names: Vec<String> = dataset
        .feature_names
        .clone()
        .unwrap_or_else(|| (0..dataset.n_features()).map(|i| format!("f{i}")).collect());
    let mut header = names;
    header.push("label".into());
    writer
        .write_record(&header)
        .map_err(|source| DataError::Csv {
            path: path_str.clone(),
            source,
        })?;
    for i in 0..dataset.n_samples() {
        let mut record: Vec<String> = dataset.row(i).iter().map(|v| format!("{v}")).collect();
        let label = dataset.label(i);
        record.push(match &dataset.label_names {
            Some(names) => names[label].clone(),
            None => label.to_string(),
        });
        writer
            .write_record(&record)
            .map_err(|source| DataError::Csv {
                path: path_str.clone(),
                source,
            })?;
    }
    writer.flush().map_err(|source| DataError::Io {
        path: path_str,
        source,
    })
}

/// Fitted per-column min-max scaler mapping each column onto [-1, 1].
/// Constant columns map to 0 and are reported.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(dataset: &Dataset) -> Self {
        let d = dataset.n_features();
        let mut mins = vec![f64::INFINITY; d];
        let mut maxs = vec![f64::NEG_INFINITY; d];
        for row in dataset.rows() {
            for (j, &v) in row.iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        Self { mins, maxs }
    }

    /// Column indices with `min == max`.
    pub fn constant_columns(&self) -> Vec<usize> {
        self.mins
            .iter()
            .zip(&self.maxs)
            .enumerate()
            .filter(|(_, (lo, hi))| lo == hi)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn transform(&self, dataset: &Dataset) -> Result<Dataset, DataError> {
        if dataset.n_features() != self.mins.len() {
            return Err(DataError::FeatureMismatch {
                got: dataset.n_features(),
                expected: self.mins.len(),
            });
        }
        let d = dataset.n_features();
        let mut features = Vec::with_capacity(dataset.n_samples() * d);
        for row in dataset.rows() {
            for (j, &v) in row.iter().enumerate() {
                let lo = self.mins[j];
                let hi = self.maxs[j];
                let scaled = if hi > lo {
                    (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
                } else {
                    0.0
                };
                features.push(scaled);
            }
        }
        let mut out = Dataset::new(features, d, dataset.labels().to_vec(), dataset.n_classes())?;
        out.feature_names = dataset.feature_names.clone();
        out.label_names = dataset.label_names.clone();
        Ok(out)
    }
}

/// Fit-and-transform convenience: scaled dataset plus the indices of
/// constant columns (mapped to 0, warning-worthy but not an error).
pub fn scale_minmax(dataset: &Dataset) -> Result<(Dataset, Vec<usize>), DataError> {
    let scaler = MinMaxScaler::fit(dataset);
    let constant = scaler.constant_columns();
    Ok((scaler.transform(dataset)?, constant))
}

/// Fitted PCA: mean vector and an orthonormal row basis of principal
/// components sorted by explained variance.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PcaTransform {
    pub mean: Vec<f64>,
    /// `k x d` row-major.
    pub components: Vec<f64>,
    pub k: usize,
    pub d: usize,
    pub explained_variance: Vec<f64>,
}

impl PcaTransform {
    pub fn project_row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for c in 0..self.k {
            let mut acc = 0.0;
            for j in 0..self.d {
                acc += self.components[c * self.d + j] * (row[j] - self.mean[j]);
            }
            out.push(acc);
        }
    }

    /// Lift a projected row back into the original (centered) space.
    pub fn lift_row(&self, projected: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for (c, &y) in projected.iter().enumerate() {
            for j in 0..self.d {
                out[j] += self.components[c * self.d + j] * y;
            }
        }
        out
    }
}

/// Fit PCA by eigendecomposing the mean-centered covariance matrix and
/// keeping the top-`k` eigenvectors. Component signs are fixed so the first
/// entry of significant magnitude is positive.
pub fn pca_fit(dataset: &Dataset, k: usize) -> Result<PcaTransform, DataError> {
    let n = dataset.n_samples();
    let d = dataset.n_features();
    if k == 0 || k > d {
        return Err(DataError::KTooLarge { k, n_features: d });
    }
    if d > n {
        return Err(DataError::TooFewSamples {
            n_samples: n,
            n_features: d,
        });
    }

    let mut mean = vec![0.0; d];
    for row in dataset.rows() {
        for (j, &v) in row.iter().enumerate() {
            mean[j] += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    // Covariance with the n-1 denominator, symmetrized exactly.
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let mut cov = vec![0.0; d * d];
    for row in dataset.rows() {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                cov[i * d + j] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / denom;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }

    let cov = ComplexMatrix::from_real(d, &cov)?;
    let eigen = eig_hermitian(&cov)?;

    // Eigenvalues come back ascending; take the top k.
    let mut components = vec![0.0; k * d];
    let mut explained_variance = Vec::with_capacity(k);
    for c in 0..k {
        let col = d - 1 - c;
        explained_variance.push(eigen.eigenvalues[col].max(0.0));
        let mut comp: Vec<f64> = (0..d)
            .map(|row| eigen.eigenvectors.at(row, col).re)
            .collect();
        // Sign convention: first entry of significant magnitude positive.
        if let Some(&lead) = comp.iter().find(|x| x.abs() > 1e-12) {
            if lead < 0.0 {
                for x in &mut comp {
                    *x = -*x;
                }
            }
        }
        components[c * d..(c + 1) * d].copy_from_slice(&comp);
    }

    Ok(PcaTransform {
        mean,
        components,
        k,
        d,
        explained_variance,
    })
}

/// Project a dataset onto fitted principal components.
pub fn pca_apply(transform: &PcaTransform, dataset: &Dataset) -> Result<Dataset, DataError> {
    if dataset.n_features() != transform.d {
        return Err(DataError::FeatureMismatch {
            got: dataset.n_features(),
            expected: transform.d,
        });
    }
    let mut features = Vec::with_capacity(dataset.n_samples() * transform.k);
    let mut buf = Vec::with_capacity(transform.k);
    for row in dataset.rows() {
        transform.project_row(row, &mut buf);
        features.extend_from_slice(&buf);
    }
    let mut out = Dataset::new(
        features,
        transform.k,
        dataset.labels().to_vec(),
        dataset.n_classes(),
    )?;
    out.feature_names = Some((0..transform.k).map(|i| format!("pc{i}")).collect());
    out.label_names = dataset.label_names.clone();
    Ok(out)
}

/// Result of [`split`]: disjoint, exhaustive train/test subsets, with the
/// original sample indices of each side.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// False when some class was too small and the split degraded to
    /// non-stratified sampling.
    pub stratified: bool,
}

/// Deterministic train/test split, stratified by label where class sizes
/// permit (every class needs at least 2 samples).
pub fn split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitOutcome, DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::BadFraction(test_fraction));
    }
    let n = dataset.n_samples();
    if n < 2 {
        return Err(DataError::TooSmallToSplit(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let counts = dataset.class_counts();
    let stratified = counts.iter().all(|&c| c >= 2);

    let mut test_idx: Vec<usize> = Vec::new();
    let mut train_idx: Vec<usize> = Vec::new();

    if stratified {
        for class in 0..dataset.n_classes() {
            let mut members: Vec<usize> = (0..n).filter(|&i| dataset.label(i) == class).collect();
            members.shuffle(&mut rng);
            let n_c = members.len();
            let take = ((test_fraction * n_c as f64).round() as usize).clamp(1, n_c - 1);
            test_idx.extend_from_slice(&members[..take]);
            train_idx.extend_from_slice(&members[take..]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let take = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
        test_idx.extend_from_slice(&all[..take]);
        train_idx.extend_from_slice(&all[take..]);
    }

    // Keep original sample order inside each side for reproducible files.
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    Ok(SplitOutcome {
        train: dataset.select(&train_idx),
        test: dataset.select(&test_idx),
        train_indices: train_idx,
        test_indices: test_idx,
        stratified,
    })
}

/// Parameters for the synthetic Gaussian-blob generator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    /// Distance between neighbouring class centers, in noise standard
    /// deviations.
    pub separation: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// The frozen end-to-end regression scenario used across the test suite.
    pub fn scenario_s1() -> Self {
        Self {
            n_samples: 200,
            n_features: 2,
            n_classes: 2,
            separation: 3.0,
            seed: 7,
        }
    }
}

/// Generate Gaussian class blobs centered on scaled hypercube vertices
/// (class `c` maps to the vertex given by the bits of `c`, cycling when
/// classes outnumber vertices). Unit-variance noise per coordinate; labels
/// are assigned round-robin so classes stay balanced.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Dataset {
    assert!(spec.n_samples >= 1 && spec.n_features >= 1 && spec.n_classes >= 1);
    assert!(spec.separation >= 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let half = spec.separation / 2.0;
    let center = |class: usize, j: usize| -> f64 {
        if (class >> (j % usize::BITS as usize)) & 1 == 1 {
            half
        } else {
            -half
        }
    };

    let mut features = Vec::with_capacity(spec.n_samples * spec.n_features);
    let mut labels = Vec::with_capacity(spec.n_samples);
    for i in 0..spec.n_samples {
        let class = i % spec.n_classes;
        labels.push(class);
        for j in 0..spec.n_features {
            let noise: f64 = StandardNormal.sample(&mut rng);
            features.push(center(class, j) + noise);
        }
    }

    let mut dataset = Dataset::new(features, spec.n_features, labels, spec.n_classes)
        .expect("generator invariants");
    dataset.feature_names = Some((0..spec.n_features).map(|j| format!("f{j}")).collect());
    dataset.label_names = Some((0..spec.n_classes).map(|c| c.to_string()).collect());
    dataset
}

/// Flip each label independently with probability `rate` to a uniformly
/// random different class. Returns the noisy dataset and the flip mask.
pub fn inject_label_noise(dataset: &Dataset, rate: f64, seed: u64) -> (Dataset, Vec<bool>) {
    assert!((0.0..=1.0).contains(&rate), "rate outside [0, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_classes = dataset.n_classes();
    let mut labels = dataset.labels().to_vec();
    let mut mask = vec![false; labels.len()];
    if n_classes >= 2 {
        for (i, label) in labels.iter_mut().enumerate() {
            if rng.random_range(0.0..1.0) < rate {
                let offset = rng.random_range(1..n_classes);
                *label = (*label + offset) % n_classes;
                mask[i] = true;
            }
        }
    }
    let mut out = Dataset::new(
        dataset.features.clone(),
        dataset.n_features,
        labels,
        n_classes,
    )
    .expect("noise injection preserves shape");
    out.feature_names = dataset.feature_names.clone();
    out.label_names = dataset.label_names.clone();
    (out, mask)
}
