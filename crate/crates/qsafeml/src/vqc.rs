//! Trainable variational quantum classifier on top of the statevector
//! simulator: angle encoding, a layered RY + CNOT-chain ansatz, basis-state
//! class binning, cross-entropy training with finite-difference or
//! parameter-shift gradients, and a JSON checkpoint format.

use crate::circuit::{simulate, Circuit, CircuitError, Gate};
use crate::data::{Dataset, MinMaxScaler, PcaTransform};
use crate::exec;
use crate::state::StateVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Probabilities are clamped here before taking logs in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum VqcError {
    #[error("{got} features but the register has only {n_qubits} qubits")]
    TooManyFeatures { got: usize, n_qubits: usize },
    #[error("invalid model: {0}")]
    BadModel(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("loss became non-finite ({loss}) at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("checkpoint io: {0}")]
    CheckpointIo(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    CheckpointFormat(#[from] serde_json::Error),
}

/// Angle encoding: feature `j` (scaled to [-1, 1]) becomes `RY(feature_j *
/// pi)` on qubit `j`.
pub fn encode(features: &[f64], n_qubits: usize) -> Result<Circuit, VqcError> {
    if features.len() > n_qubits {
        return Err(VqcError::TooManyFeatures {
            got: features.len(),
            n_qubits,
        });
    }
    let mut circuit = Circuit::empty(n_qubits)?;
    for (qubit, &f) in features.iter().enumerate() {
        circuit.push(Gate::Ry {
            qubit,
            angle: f * std::f64::consts::PI,
        })?;
    }
    Ok(circuit)
}

/// Rule mapping basis states to class indices. Kept pluggable because no
/// single multiclass readout is canonical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassBinning {
    /// Basis state `b` belongs to class `b mod n_classes`.
    Mod,
}

impl ClassBinning {
    #[inline]
    pub fn class_of(&self, basis_state: usize, n_classes: usize) -> usize {
        match self {
            ClassBinning::Mod => basis_state % n_classes,
        }
    }
}

/// How gradients are computed during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Central differences on the loss itself.
    FiniteDifference,
    /// Exact shift rule on the probability vector, chain-ruled through the
    /// cross-entropy.
    ParameterShift,
}

/// Finite-difference step for [`GradientMode::FiniteDifference`]. Central
/// differences have truncation error O(h^2) but cancellation error O(eps/h);
/// 1e-6 keeps both far below the 1e-4 agreement bound against the shift rule
/// even when a tiny true-class probability inflates the gradient.
const FD_STEP: f64 = 1e-6;

/// Variational classifier: one RY per qubit per layer, each layer followed
/// by a linear CNOT chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcModel {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub n_classes: usize,
    pub class_binning: ClassBinning,
    /// Rotation angles, length `n_layers * n_qubits`, layer-major.
    pub params: Vec<f64>,
}

impl VqcModel {
    pub fn new(
        n_qubits: usize,
        n_layers: usize,
        n_classes: usize,
        class_binning: ClassBinning,
    ) -> Result<Self, VqcError> {
        if n_qubits == 0 || n_qubits > crate::circuit::MAX_QUBITS {
            return Err(VqcError::BadModel(format!(
                "qubit count {n_qubits} outside [1, {}]",
                crate::circuit::MAX_QUBITS
            )));
        }
        if n_layers == 0 {
            return Err(VqcError::BadModel("need at least one layer".into()));
        }
        if n_classes < 2 {
            return Err(VqcError::BadModel("need at least two classes".into()));
        }
        if n_classes > 1 << n_qubits {
            return Err(VqcError::BadModel(format!(
                "{n_classes} classes cannot be read out of {n_qubits} qubits"
            )));
        }
        Ok(Self {
            n_qubits,
            n_layers,
            n_classes,
            class_binning,
            params: vec![0.0; n_layers * n_qubits],
        })
    }

    pub fn n_params(&self) -> usize {
        self.n_layers * self.n_qubits
    }

    fn check(&self) -> Result<(), VqcError> {
        if self.params.len() != self.n_params() {
            return Err(VqcError::BadModel(format!(
                "params length {} does not match {} layers x {} qubits",
                self.params.len(),
                self.n_layers,
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// Full circuit for one sample: encoding followed by the ansatz.
    pub fn circuit_for(&self, features: &[f64]) -> Result<Circuit, VqcError> {
        self.check()?;
        let mut circuit = encode(features, self.n_qubits)?;
        for layer in 0..self.n_layers {
            for qubit in 0..self.n_qubits {
                circuit.push(Gate::Ry {
                    qubit,
                    angle: self.params[layer * self.n_qubits + qubit],
                })?;
            }
            for qubit in 0..self.n_qubits.saturating_sub(1) {
                circuit.push(Gate::Cnot {
                    control: qubit,
                    target: qubit + 1,
                })?;
            }
        }
        Ok(circuit)
    }

    /// Class probabilities and the raw output statevector for one sample.
    pub fn predict_proba(&self, features: &[f64]) -> Result<(Vec<f64>, StateVector), VqcError> {
        let circuit = self.circuit_for(features)?;
        let state = simulate(&circuit, &circuit.zero_state())?;
        let probs = self.bin_probabilities(&state);
        Ok((probs, state))
    }

    /// Bin basis-state outcome probabilities into classes and normalize.
    pub fn bin_probabilities(&self, state: &StateVector) -> Vec<f64> {
        let mut probs = vec![0.0; self.n_classes];
        for (b, p) in state.probabilities().into_iter().enumerate() {
            probs[self.class_binning.class_of(b, self.n_classes)] += p;
        }
        let total: f64 = probs.iter().sum();
        if total > 0.0 {
            for p in &mut probs {
                *p /= total;
            }
        }
        probs
    }

    /// Predicted class: argmax of class probabilities (lowest index wins
    /// ties, deterministically).
    pub fn predict_class(&self, features: &[f64]) -> Result<usize, VqcError> {
        let (probs, _) = self.predict_proba(features)?;
        Ok(argmax(&probs))
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Batch prediction over a dataset, data-parallel over samples with output
/// in sample order.
pub fn predict_batch(
    model: &VqcModel,
    dataset: &Dataset,
) -> Result<Vec<(Vec<f64>, StateVector)>, VqcError> {
    model.check()?;
    check_dataset(model, dataset)?;
    let indices: Vec<usize> = (0..dataset.n_samples()).collect();
    exec::try_map_ordered(&indices, |&i| model.predict_proba(dataset.row(i)))
}

fn check_dataset(model: &VqcModel, dataset: &Dataset) -> Result<(), VqcError> {
    if dataset.n_samples() == 0 {
        return Err(VqcError::EmptyDataset);
    }
    if let Some(&label) = dataset.labels().iter().find(|&&l| l >= model.n_classes) {
        return Err(VqcError::LabelOutOfRange {
            label,
            n_classes: model.n_classes,
        });
    }
    if dataset.n_features() > model.n_qubits {
        return Err(VqcError::TooManyFeatures {
            got: dataset.n_features(),
            n_qubits: model.n_qubits,
        });
    }
    Ok(())
}

fn sample_loss(p_true: f64) -> f64 {
    -(p_true.max(PROB_FLOOR)).ln()
}

/// Mean cross-entropy of the true-class probabilities, clamped at
/// [`PROB_FLOOR`] before the log.
pub fn loss(model: &VqcModel, dataset: &Dataset) -> Result<f64, VqcError> {
    let outputs = predict_batch(model, dataset)?;
    let mut total = 0.0;
    for (i, (probs, _)) in outputs.iter().enumerate() {
        total += sample_loss(probs[dataset.label(i)]);
    }
    Ok(total / dataset.n_samples() as f64)
}

/// Loss gradient with respect to every parameter. Per-sample terms run
/// data-parallel and are summed in sample order, so the result does not
/// depend on scheduling.
pub fn gradient(
    model: &VqcModel,
    dataset: &Dataset,
    mode: GradientMode,
) -> Result<Vec<f64>, VqcError> {
    model.check()?;
    check_dataset(model, dataset)?;
    let n_params = model.n_params();
    let indices: Vec<usize> = (0..dataset.n_samples()).collect();

    let per_sample: Vec<Vec<f64>> = exec::try_map_ordered(&indices, |&i| {
        let features = dataset.row(i);
        let label = dataset.label(i);
        let mut grad = vec![0.0; n_params];
        let mut shifted = model.clone();
        match mode {
            GradientMode::FiniteDifference => {
                for k in 0..n_params {
                    let original = model.params[k];
                    shifted.params[k] = original + FD_STEP;
                    let (plus, _) = shifted.predict_proba(features)?;
                    shifted.params[k] = original - FD_STEP;
                    let (minus, _) = shifted.predict_proba(features)?;
                    shifted.params[k] = original;
                    grad[k] =
                        (sample_loss(plus[label]) - sample_loss(minus[label])) / (2.0 * FD_STEP);
                }
            }
            GradientMode::ParameterShift => {
                let (probs, _) = model.predict_proba(features)?;
                let p_true = probs[label];
                // d/dp of -ln(max(p, floor)) is -1/p above the floor, 0 below.
                let dloss_dp = if p_true > PROB_FLOOR { -1.0 / p_true } else { 0.0 };
                let shift = std::f64::consts::FRAC_PI_2;
                for k in 0..n_params {
                    let original = model.params[k];
                    shifted.params[k] = original + shift;
                    let (plus, _) = shifted.predict_proba(features)?;
                    shifted.params[k] = original - shift;
                    let (minus, _) = shifted.predict_proba(features)?;
                    shifted.params[k] = original;
                    let dp = (plus[label] - minus[label]) / 2.0;
                    grad[k] = dloss_dp * dp;
                }
            }
        }
        Ok::<Vec<f64>, VqcError>(grad)
    })?;

    let mut grad = vec![0.0; n_params];
    for sample_grad in &per_sample {
        for (g, s) in grad.iter_mut().zip(sample_grad) {
            *g += s;
        }
    }
    let n = dataset.n_samples() as f64;
    for g in &mut grad {
        *g /= n;
    }
    Ok(grad)
}

/// Training configuration for full-batch gradient descent.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Seeds the random parameter initialization; identical seeds give
    /// bit-identical loss trajectories.
    pub seed: u64,
    pub gradient_mode: GradientMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 100,
            seed: 42,
            gradient_mode: GradientMode::FiniteDifference,
        }
    }
}

/// Result of [`train`]: updated model plus the loss before each epoch's
/// update and after the final one (`epochs + 1` entries).
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: VqcModel,
    pub loss_trajectory: Vec<f64>,
}

/// Full-batch gradient descent from a seeded random initialization. The
/// incoming model supplies the architecture; its parameters are replaced by
/// the seeded draw before descent.
pub fn train(
    model: &VqcModel,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, VqcError> {
    if cfg.learning_rate <= 0.0 || !cfg.learning_rate.is_finite() {
        return Err(VqcError::BadModel(format!(
            "learning rate {} must be positive",
            cfg.learning_rate
        )));
    }
    if cfg.epochs == 0 {
        return Err(VqcError::BadModel("need at least one epoch".into()));
    }
    model.check()?;
    check_dataset(model, dataset)?;

    let mut current = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init_bound = std::f64::consts::FRAC_PI_4;
    for p in &mut current.params {
        *p = rng.random_range(-init_bound..init_bound);
    }

    let mut trajectory = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..cfg.epochs {
        let l = loss(&current, dataset)?;
        if !l.is_finite() {
            return Err(VqcError::NonFiniteLoss { epoch, loss: l });
        }
        trajectory.push(l);
        let grad = gradient(&current, dataset, cfg.gradient_mode)?;
        for (p, g) in current.params.iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }
    }
    let final_loss = loss(&current, dataset)?;
    if !final_loss.is_finite() {
        return Err(VqcError::NonFiniteLoss {
            epoch: cfg.epochs,
            loss: final_loss,
        });
    }
    trajectory.push(final_loss);

    Ok(TrainOutcome {
        model: current,
        loss_trajectory: trajectory,
    })
}

/// Fraction of samples whose argmax prediction matches the label.
pub fn accuracy(model: &VqcModel, dataset: &Dataset) -> Result<f64, VqcError> {
    let outputs = predict_batch(model, dataset)?;
    let correct = outputs
        .iter()
        .enumerate()
        .filter(|(i, (probs, _))| argmax(probs) == dataset.label(*i))
        .count();
    Ok(correct as f64 / dataset.n_samples() as f64)
}

/// Preprocessing fitted at training time, carried in the checkpoint so
/// prediction applies the identical transforms.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Preprocessing {
    pub scaler: MinMaxScaler,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca: Option<PcaTransform>,
    pub test_fraction: f64,
    pub split_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_names: Option<Vec<String>>,
}

/// On-disk model checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: String,
    pub n_qubits: usize,
    pub n_layers: usize,
    pub n_classes: usize,
    pub class_binning: ClassBinning,
    pub params: Vec<f64>,
    /// Seed provenance: the training seed that produced `params`.
    pub train_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocessing: Option<Preprocessing>,
}

impl Checkpoint {
    pub fn from_model(
        model: &VqcModel,
        train_seed: u64,
        preprocessing: Option<Preprocessing>,
    ) -> Self {
        Self {
            schema_version: "1".into(),
            n_qubits: model.n_qubits,
            n_layers: model.n_layers,
            n_classes: model.n_classes,
            class_binning: model.class_binning,
            params: model.params.clone(),
            train_seed,
            preprocessing,
        }
    }

    pub fn to_model(&self) -> Result<VqcModel, VqcError> {
        let mut model = VqcModel::new(
            self.n_qubits,
            self.n_layers,
            self.n_classes,
            self.class_binning,
        )?;
        model.params = self.params.clone();
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), VqcError> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, VqcError> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
