//! Quantum distance metrics between density matrices: trace distance,
//! fidelity, Bures distance, and quantum relative entropy, plus the Pearson
//! correlation and closeness-to-accuracy utilities used when relating metric
//! values to classifier accuracy.

use crate::exec;
use crate::linalg::{mat_log_psd, mat_sqrt_psd, trace_norm, LinalgError, ZERO_CUT};
use crate::state::DensityMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Squared-projection mass onto the other state's kernel above which the
/// relative entropy is reported as infinite.
const SUPPORT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("dimension mismatch: {lhs} vs {rhs}")]
    DimMismatch { lhs: usize, rhs: usize },
    #[error("need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("{side} input has zero variance")]
    ZeroVariance { side: &'static str },
    #[error("metric value is infinite; closeness to accuracy is undefined")]
    InfiniteMetric,
    #[error("accuracy {0} outside [0, 1]")]
    BadAccuracy(f64),
    #[error("smoothing {0} outside (0, 1e-3]")]
    BadSmoothing(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// The four supported distance metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    TraceDistance,
    Fidelity,
    BuresDistance,
    QuantumRelativeEntropy,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::TraceDistance,
        MetricKind::Fidelity,
        MetricKind::BuresDistance,
        MetricKind::QuantumRelativeEntropy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::TraceDistance => "trace_distance",
            MetricKind::Fidelity => "fidelity",
            MetricKind::BuresDistance => "bures_distance",
            MetricKind::QuantumRelativeEntropy => "quantum_relative_entropy",
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One computed metric. `value` may be `+inf` only for quantum relative
/// entropy; `support_violation` is set when the entropy hit a support
/// violation (reported as infinite) or was evaluated with smoothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub kind: MetricKind,
    pub value: f64,
    pub support_violation: bool,
}

impl MetricValue {
    fn finite(kind: MetricKind, value: f64) -> Self {
        Self {
            kind,
            value,
            support_violation: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }

    /// Relative entropy converted from nats to bits; other metrics are
    /// dimensionless and pass through unchanged.
    pub fn value_in_bits(&self) -> f64 {
        match self.kind {
            MetricKind::QuantumRelativeEntropy => self.value / std::f64::consts::LN_2,
            _ => self.value,
        }
    }

    /// Map onto the common `[0, 1]` dissimilarity scale used for thresholding
    /// and closeness: trace distance as-is, fidelity complemented, Bures
    /// divided by sqrt(2), relative entropy clamped at 1 (infinite values map
    /// to 1, maximal dissimilarity).
    pub fn normalized_dissimilarity(&self) -> f64 {
        match self.kind {
            MetricKind::TraceDistance => self.value.clamp(0.0, 1.0),
            MetricKind::Fidelity => (1.0 - self.value).clamp(0.0, 1.0),
            MetricKind::BuresDistance => (self.value / std::f64::consts::SQRT_2).clamp(0.0, 1.0),
            MetricKind::QuantumRelativeEntropy => {
                if self.value.is_finite() {
                    self.value.clamp(0.0, 1.0)
                } else {
                    1.0
                }
            }
        }
    }
}

/// All four metrics for one pair of states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSet {
    pub trace_distance: MetricValue,
    pub fidelity: MetricValue,
    pub bures_distance: MetricValue,
    pub quantum_relative_entropy: MetricValue,
}

impl MetricSet {
    pub fn get(&self, kind: MetricKind) -> &MetricValue {
        match kind {
            MetricKind::TraceDistance => &self.trace_distance,
            MetricKind::Fidelity => &self.fidelity,
            MetricKind::BuresDistance => &self.bures_distance,
            MetricKind::QuantumRelativeEntropy => &self.quantum_relative_entropy,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &MetricValue> {
        MetricKind::ALL.iter().map(move |&k| self.get(k))
    }
}

fn check_dims(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<(), MetricError> {
    if rho.dim() != sigma.dim() {
        return Err(MetricError::DimMismatch {
            lhs: rho.dim(),
            rhs: sigma.dim(),
        });
    }
    Ok(())
}

/// Trace distance `0.5 * ||rho - sigma||_1`, in `[0, 1]`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<MetricValue, MetricError> {
    check_dims(rho, sigma)?;
    let diff = rho.matrix().sub(sigma.matrix());
    let value = 0.5 * trace_norm(&diff)?;
    Ok(MetricValue::finite(
        MetricKind::TraceDistance,
        value.clamp(0.0, 1.0),
    ))
}

/// Fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`, in `[0, 1]`.
///
/// Always evaluated through the general two-square-root route. In debug
/// builds, when one argument is (numerically) pure, the rank-1 shortcut
/// `Tr(rho sigma)` runs as a shadow cross-check.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<MetricValue, MetricError> {
    check_dims(rho, sigma)?;
    let sqrt_rho = mat_sqrt_psd(rho.matrix())?;
    let mut inner = sqrt_rho.matmul(sigma.matrix()).matmul(&sqrt_rho);
    inner.hermitize();
    let root = mat_sqrt_psd(&inner)?;
    let tr = root.trace().re;
    let value = (tr * tr).clamp(0.0, 1.0);

    #[cfg(debug_assertions)]
    {
        use crate::state::purity;
        if purity(rho) > 1.0 - 1e-12 || purity(sigma) > 1.0 - 1e-12 {
            let overlap = rho.matrix().matmul(sigma.matrix()).trace().re;
            debug_assert!(
                (value - overlap.clamp(0.0, 1.0)).abs() < 1e-9,
                "pure-state fidelity shortcut disagrees: {value} vs {overlap}"
            );
        }
    }

    Ok(MetricValue::finite(MetricKind::Fidelity, value))
}

/// Bures distance `sqrt(2 (1 - sqrt(F)))`, in `[0, sqrt(2)]`.
pub fn bures_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<MetricValue, MetricError> {
    let f = fidelity(rho, sigma)?.value;
    let value = (2.0 * (1.0 - f.sqrt())).max(0.0).sqrt();
    Ok(MetricValue::finite(MetricKind::BuresDistance, value))
}

/// Quantum relative entropy `Tr(rho log rho - rho log sigma)` in nats.
///
/// Uses the `0 log 0 = 0` convention on the kernel of `rho`. When the support
/// of `rho` is not contained in the support of `sigma` and no smoothing is
/// requested, the result is `+inf` with `support_violation` set. With
/// smoothing `eps`, `sigma` is mixed with `eps * I/dim` first and the flag
/// records that smoothing was applied. Not symmetric in its arguments.
pub fn quantum_relative_entropy(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    smoothing: Option<f64>,
) -> Result<MetricValue, MetricError> {
    check_dims(rho, sigma)?;
    let kind = MetricKind::QuantumRelativeEntropy;
    let dim = rho.dim();

    let smoothed;
    let (sigma_matrix, smoothing_applied) = match smoothing {
        Some(eps) => {
            if !(eps > 0.0 && eps <= 1e-3) {
                return Err(MetricError::BadSmoothing(eps));
            }
            let mixed = sigma
                .matrix()
                .scaled(1.0 - eps)
                .add(&crate::linalg::ComplexMatrix::identity(dim).scaled(eps / dim as f64));
            smoothed = mixed;
            (&smoothed, true)
        }
        None => (sigma.matrix(), false),
    };

    let log_rho = mat_log_psd(rho.matrix())?;
    let log_sigma = mat_log_psd(sigma_matrix)?;

    if !smoothing_applied && log_sigma.support.iter().any(|&s| !s) {
        // Squared projection of each supported eigenvector of rho onto the
        // kernel of sigma; any significant mass means the entropy diverges.
        let u = &log_rho.eigen.eigenvectors;
        let v = &log_sigma.eigen.eigenvectors;
        for (i, &r) in log_rho.eigen.eigenvalues.iter().enumerate() {
            if r <= ZERO_CUT {
                continue;
            }
            let mut kernel_mass = 0.0;
            for (j, &in_support) in log_sigma.support.iter().enumerate() {
                if in_support {
                    continue;
                }
                let mut overlap = num_complex::Complex64::ZERO;
                for row in 0..dim {
                    overlap += v.at(row, j).conj() * u.at(row, i);
                }
                kernel_mass += overlap.norm_sqr();
            }
            if kernel_mass > SUPPORT_TOL {
                return Ok(MetricValue {
                    kind,
                    value: f64::INFINITY,
                    support_violation: true,
                });
            }
        }
    }

    let diff = log_rho.matrix.sub(&log_sigma.matrix);
    let mut value = rho.matrix().matmul(&diff).trace().re;
    // Klein's inequality: the exact value is nonnegative; snap round-off.
    if value < 0.0 && value > -1e-9 {
        value = 0.0;
    }
    Ok(MetricValue {
        kind,
        value,
        support_violation: smoothing_applied,
    })
}

/// Optional settings for [`all_metrics`] / [`batch_all_metrics`].
#[derive(Debug, Clone, Copy, Default)]
pub struct MetricOptions {
    /// Smoothing for the relative entropy; `None` keeps the honest infinity.
    pub qre_smoothing: Option<f64>,
}

/// Evaluate all four metrics for one pair.
pub fn all_metrics(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    opts: MetricOptions,
) -> Result<MetricSet, MetricError> {
    Ok(MetricSet {
        trace_distance: trace_distance(rho, sigma)?,
        fidelity: fidelity(rho, sigma)?,
        bures_distance: bures_distance(rho, sigma)?,
        quantum_relative_entropy: quantum_relative_entropy(rho, sigma, opts.qre_smoothing)?,
    })
}

/// Evaluate all four metrics over many pairs. Pairs are independent, so the
/// batch runs data-parallel when the `parallel` feature is enabled; output
/// order always matches input order.
pub fn batch_all_metrics(
    pairs: &[(DensityMatrix, DensityMatrix)],
    opts: MetricOptions,
) -> Result<Vec<MetricSet>, MetricError> {
    exec::try_map_ordered(pairs, |(rho, sigma)| all_metrics(rho, sigma, opts))
}

/// Pearson correlation coefficient between two equal-length samples.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Result<f64, MetricError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(MetricError::InsufficientData {
            needed: 2,
            got: xs.len().min(ys.len()),
        });
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(MetricError::ZeroVariance { side: "first" });
    }
    if syy == 0.0 {
        return Err(MetricError::ZeroVariance { side: "second" });
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Absolute difference between a metric (on the normalized dissimilarity
/// scale) and an accuracy in `[0, 1]`. Errors on infinite metric values.
pub fn closeness_to_accuracy(metric: &MetricValue, accuracy: f64) -> Result<f64, MetricError> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(MetricError::BadAccuracy(accuracy));
    }
    if !metric.is_finite() {
        return Err(MetricError::InfiniteMetric);
    }
    Ok((metric.normalized_dissimilarity() - accuracy).abs())
}
