//! Quantum state data model: statevectors, density matrices, and mixture
//! construction. Everything downstream (metrics, monitor, simulator) works in
//! terms of these types.

use crate::linalg::{eig_hermitian, ComplexMatrix, LinalgError, HERM_TOL, PSD_CLAMP};
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

/// Max tolerated deviation of a statevector norm (or probability sum) from 1.
pub const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("statevector must have dimension >= 2, got {0}")]
    BadDimension(usize),
    #[error("non-finite amplitude at index {0}")]
    NonFiniteAmplitude(usize),
    #[error("statevector norm^2 is {norm_sqr} (must be 1 within {NORM_TOL})")]
    NotNormalized { norm_sqr: f64 },
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("density matrix rejected: {0}")]
    Invalid(#[from] DensityViolation),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Structured rejection from [`validate_density`], naming the violated
/// invariant and the measured magnitude.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityViolation {
    #[error("not Hermitian (max asymmetry {violation:.3e}, tolerance {HERM_TOL:.0e})")]
    NotHermitian { violation: f64 },
    #[error("not positive semi-definite (smallest eigenvalue {min_eigenvalue:.6e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("trace is {trace:.12} (must be 1 within {NORM_TOL})")]
    TraceNotOne { trace: f64 },
}

/// Normalized complex amplitude vector over computational basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self, StateError> {
        if amplitudes.len() < 2 {
            return Err(StateError::BadDimension(amplitudes.len()));
        }
        let mut norm_sqr = 0.0;
        for (i, a) in amplitudes.iter().enumerate() {
            if !a.re.is_finite() || !a.im.is_finite() {
                return Err(StateError::NonFiniteAmplitude(i));
            }
            norm_sqr += a.norm_sqr();
        }
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(StateError::NotNormalized { norm_sqr });
        }
        Ok(Self { amplitudes })
    }

    /// Computational basis state `|index>`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(dim >= 2 && index < dim, "basis state out of range");
        let mut amplitudes = vec![Complex64::ZERO; dim];
        amplitudes[index] = Complex64::ONE;
        Self { amplitudes }
    }

    /// Haar-ish random state: iid complex Gaussian amplitudes, normalized.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Self {
        use rand_distr::{Distribution, StandardNormal};
        assert!(dim >= 2);
        loop {
            let amplitudes: Vec<Complex64> = (0..dim)
                .map(|_| {
                    Complex64::new(
                        StandardNormal.sample(rng),
                        StandardNormal.sample(rng),
                    )
                })
                .collect();
            let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                return Self {
                    amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
                };
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in inner");
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Basis outcome probabilities `|amplitude_i|^2`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Rank-1 projector `|psi><psi|`.
    pub fn projector(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut m = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, self.amplitudes[i] * self.amplitudes[j].conj());
            }
        }
        m
    }

    pub(crate) fn from_raw_normalized(amplitudes: Vec<Complex64>) -> Self {
        debug_assert!(
            (amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0).abs() <= NORM_TOL
        );
        Self { amplitudes }
    }
}

/// Hermitian, positive semi-definite, trace-1 matrix representing a quantum
/// state. Construction always goes through validation; the stored matrix is
/// exactly Hermitian so differences of density matrices stay Hermitian too.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Pure-state density matrix `|psi><psi|`.
    pub fn from_pure(state: &StateVector) -> Self {
        let mut matrix = state.projector();
        matrix.hermitize();
        Self { matrix }
    }

    /// Maximally mixed state `I/dim`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scaled(1.0 / dim as f64),
        }
    }

    /// Random full-spectrum mixed state from a mixture of random pure states.
    pub fn random_mixed<R: Rng + ?Sized>(rng: &mut R, dim: usize, components: usize) -> Self {
        let spec = MixtureSpec::random(rng, dim, components);
        density_from_mixture(&spec).expect("random mixture is valid by construction")
    }
}

/// Probabilistic mixture of pure states: weights and states for building a
/// density matrix out of an ensemble.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    components: Vec<(f64, StateVector)>,
}

impl MixtureSpec {
    pub fn new(components: Vec<(f64, StateVector)>) -> Result<Self, StateError> {
        if components.is_empty() {
            return Err(StateError::InvalidMixture("empty component list".into()));
        }
        let dim = components[0].1.dim();
        let mut total = 0.0;
        for (i, (w, state)) in components.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(StateError::InvalidMixture(format!(
                    "weight {i} is {w} (must be a finite nonnegative number)"
                )));
            }
            if state.dim() != dim {
                return Err(StateError::InvalidMixture(format!(
                    "component {i} has dim {} but component 0 has dim {dim}",
                    state.dim()
                )));
            }
            total += w;
        }
        if (total - 1.0).abs() > NORM_TOL {
            return Err(StateError::InvalidMixture(format!(
                "weights sum to {total} (must be 1 within {NORM_TOL})"
            )));
        }
        Ok(Self { components })
    }

    /// Uniform mixture over the given states.
    pub fn uniform(states: Vec<StateVector>) -> Result<Self, StateError> {
        let n = states.len();
        if n == 0 {
            return Err(StateError::InvalidMixture("empty component list".into()));
        }
        let w = 1.0 / n as f64;
        Self::new(states.into_iter().map(|s| (w, s)).collect())
    }

    pub fn components(&self) -> &[(f64, StateVector)] {
        &self.components
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize, components: usize) -> Self {
        assert!(components >= 1);
        let mut weights: Vec<f64> = (0..components).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        // Renormalize exactly enough for the 1e-9 tolerance.
        let spill: f64 = 1.0 - weights.iter().sum::<f64>();
        weights[0] += spill;
        let components = weights
            .into_iter()
            .map(|w| (w, StateVector::random(rng, dim)))
            .collect();
        Self::new(components).expect("random mixture weights are normalized")
    }
}

/// Build the density matrix of a mixture: the weighted sum of the component
/// projectors.
pub fn density_from_mixture(spec: &MixtureSpec) -> Result<DensityMatrix, StateError> {
    let dim = spec.components[0].1.dim();
    let mut acc = ComplexMatrix::zeros(dim);
    for (w, state) in &spec.components {
        if *w == 0.0 {
            continue;
        }
        let amps = state.amplitudes();
        for i in 0..dim {
            let wi = amps[i] * *w;
            for j in 0..dim {
                let val = acc.at(i, j) + wi * amps[j].conj();
                acc.set(i, j, val);
            }
        }
    }
    acc.hermitize();
    validate_density(acc).map_err(StateError::from)
}

/// Diagonal density matrix of a basis-outcome probability distribution.
pub fn density_from_distribution(probs: &[f64]) -> Result<DensityMatrix, StateError> {
    if probs.is_empty() {
        return Err(StateError::InvalidDistribution("empty distribution".into()));
    }
    let mut total = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(StateError::InvalidDistribution(format!(
                "probability {i} is {p} (must be a finite nonnegative number)"
            )));
        }
        total += p;
    }
    if (total - 1.0).abs() > NORM_TOL {
        return Err(StateError::InvalidDistribution(format!(
            "probabilities sum to {total} (must be 1 within {NORM_TOL})"
        )));
    }
    Ok(DensityMatrix {
        matrix: ComplexMatrix::from_diag(probs),
    })
}

/// Purity `Tr(rho^2)`, in `[1/dim, 1]` up to round-off. For a Hermitian
/// matrix this is the squared Frobenius norm.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.matrix
        .entries()
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
}

/// Validate an arbitrary complex matrix as a density matrix, or report which
/// invariant it violates and by how much. Checks run in order: Hermiticity,
/// positive semi-definiteness, unit trace.
pub fn validate_density(mut m: ComplexMatrix) -> Result<DensityMatrix, DensityViolation> {
    let violation = m.hermiticity_violation();
    if violation > HERM_TOL {
        return Err(DensityViolation::NotHermitian { violation });
    }
    m.hermitize();
    let eigen = eig_hermitian(&m).map_err(|_| DensityViolation::NotHermitian { violation })?;
    let min_eigenvalue = eigen.min_eigenvalue();
    if min_eigenvalue < -PSD_CLAMP {
        return Err(DensityViolation::NotPsd { min_eigenvalue });
    }
    let trace = m.trace().re;
    if (trace - 1.0).abs() > NORM_TOL {
        return Err(DensityViolation::TraceNotOne { trace });
    }
    Ok(DensityMatrix { matrix: m })
}
