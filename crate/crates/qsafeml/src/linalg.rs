//! Dense complex-matrix kernel: Hermitian eigendecomposition via cyclic Jacobi
//! rotations, plus the matrix functions built on it (PSD square root, PSD
//! logarithm, trace norm).
//!
//! Everything here is pure and allocation-per-call; matrices are small
//! (dimension at most a few hundred), so the unconditionally stable Jacobi
//! method is preferred over a faster tridiagonalization pipeline.

use num_complex::Complex64;
use thiserror::Error;

/// Max tolerated `|m[i][j] - conj(m[j][i])|` for a matrix to count as Hermitian.
pub const HERM_TOL: f64 = 1e-10;
/// Eigenvalues in `[-PSD_CLAMP, 0)` are clamped to zero; anything below is an error.
pub const PSD_CLAMP: f64 = 1e-10;
/// Eigenvalues at or below this are treated as exact zeros of a PSD matrix.
pub const ZERO_CUT: f64 = 1e-12;

/// Jacobi sweep budget before giving up.
const MAX_SWEEPS: usize = 100;
/// Convergence: off-diagonal Frobenius mass below `OFF_TOL * dim` (on the
/// internally rescaled matrix).
const OFF_TOL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix entries ({len}) do not form a {dim}x{dim} square matrix")]
    Shape { dim: usize, len: usize },
    #[error("matrix dimension must be at least 1")]
    EmptyMatrix,
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not Hermitian (max asymmetry {violation:.3e})")]
    NotHermitian { violation: f64 },
    #[error("matrix is not positive semi-definite (eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("Jacobi iteration did not converge in {sweeps} sweeps (off-diagonal mass {off_mass:.3e})")]
    NumericalFailure { sweeps: usize, off_mass: f64 },
}

/// Square complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::EmptyMatrix);
        }
        if entries.len() != dim * dim {
            return Err(LinalgError::Shape {
                dim,
                len: entries.len(),
            });
        }
        for (k, z) in entries.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(LinalgError::NonFinite {
                    row: k / dim,
                    col: k % dim,
                });
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![Complex64::ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = Complex64::ONE;
        }
        m
    }

    /// Diagonal matrix from real entries.
    pub fn from_diag(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut m = Self::zeros(dim);
        for (i, &d) in diag.iter().enumerate() {
            m.entries[i * dim + i] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Real matrix lifted to complex, row-major.
    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self, LinalgError> {
        Self::new(
            dim,
            entries.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in add");
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            dim: self.dim,
            entries,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in sub");
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            dim: self.dim,
            entries,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in matmul");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.entries[i * n + k];
                if aik == Complex64::ZERO {
                    continue;
                }
                for j in 0..n {
                    out.entries[i * n + j] += aik * other.entries[k * n + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.entries[j * n + i] = self.entries[i * n + j].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.entries[i * self.dim + i]).sum()
    }

    /// Max `|m[i][j] - conj(m[j][i])|` over all entry pairs.
    pub fn hermiticity_violation(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.entries[i * n + j] - self.entries[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Replace the matrix by its Hermitian part `(m + m†)/2`. The result is
    /// exactly Hermitian entry-by-entry, which keeps differences of density
    /// matrices inside `HERM_TOL`.
    pub fn hermitize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            for j in i..n {
                let avg = (self.entries[i * n + j] + self.entries[j * n + i].conj()) * 0.5;
                self.entries[i * n + j] = avg;
                self.entries[j * n + i] = avg.conj();
                if i == j {
                    self.entries[i * n + i].im = 0.0;
                }
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn check_hermitian(&self) -> Result<(), LinalgError> {
        let violation = self.hermiticity_violation();
        if violation > HERM_TOL {
            Err(LinalgError::NotHermitian { violation })
        } else {
            Ok(())
        }
    }
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues sorted
/// ascending, matching eigenvector columns forming a unitary matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigen {
    /// Rebuild `V diag(f(lambda)) V^dagger` with mapped eigenvalues. Output is
    /// hermitized so round-off never leaks asymmetry downstream.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.eigenvectors.dim();
        let v = &self.eigenvectors;
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = ComplexMatrix::zeros(n);
        for k in 0..n {
            let fk = mapped[k];
            if fk == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = v.at(i, k) * fk;
                for j in 0..n {
                    let val = out.at(i, j) + vik * v.at(j, k).conj();
                    out.set(i, j, val);
                }
            }
        }
        out.hermitize();
        out
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

/// Result of [`mat_log_psd`]: the matrix logarithm on the support, together
/// with the decomposition and a per-eigenvalue support mask so callers can
/// apply the `0 log 0 = 0` convention and detect support violations.
#[derive(Debug, Clone)]
pub struct PsdLog {
    pub matrix: ComplexMatrix,
    pub eigen: HermitianEigen,
    /// `support[k]` is true iff eigenvalue `k` exceeds [`ZERO_CUT`].
    pub support: Vec<bool>,
}

/// Off-diagonal Frobenius mass, the Jacobi convergence quantity.
fn off_diagonal_mass(m: &ComplexMatrix) -> f64 {
    let n = m.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += m.at(i, j).norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// Deterministic for a fixed input: pivots are visited in a fixed cyclic
/// order and ties between degenerate eigenvalues resolve to whatever basis
/// the rotation sequence produces.
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<HermitianEigen, LinalgError> {
    m.check_hermitian()?;
    let n = m.dim();

    // Rescale so the fixed absolute convergence threshold stays meaningful
    // for inputs with large entries (e.g. raw covariance matrices). Density
    // matrices have entries bounded by 1 and are untouched.
    let scale = m.max_abs().max(1.0);
    let mut a = m.scaled(1.0 / scale);
    a.hermitize();
    let mut v = ComplexMatrix::identity(n);

    let threshold = OFF_TOL * n as f64;
    let mut converged = false;
    let mut last_off = off_diagonal_mass(&a);
    if last_off < threshold {
        converged = true;
    }

    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                let b = a.at(p, q);
                let babs = b.norm();
                if babs <= 1e-300 {
                    a.set(p, q, Complex64::ZERO);
                    a.set(q, p, Complex64::ZERO);
                    continue;
                }
                let phase = b / babs;
                let app = a.at(p, p).re;
                let aqq = a.at(q, q).re;
                let theta = (aqq - app) / (2.0 * babs);
                // Smaller root of t^2 - 2*theta*t - 1 = 0, with an overflow
                // guard for extreme theta.
                let t = if theta.abs() > 1e150 {
                    -1.0 / (2.0 * theta)
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    -sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = phase.conj() * (t * c);

                // A <- G' A G restricted to rows/cols p and q.
                for i in 0..n {
                    let aip = a.at(i, p);
                    let aiq = a.at(i, q);
                    a.set(i, p, aip * c + aiq * s);
                    a.set(i, q, aiq * c - aip * s.conj());
                }
                for j in 0..n {
                    let apj = a.at(p, j);
                    let aqj = a.at(q, j);
                    a.set(p, j, apj * c + aqj * s.conj());
                    a.set(q, j, aqj * c - apj * s);
                }
                a.set(p, q, Complex64::ZERO);
                a.set(q, p, Complex64::ZERO);
                {
                    let re_p = a.at(p, p).re;
                    let re_q = a.at(q, q).re;
                    a.set(p, p, Complex64::new(re_p, 0.0));
                    a.set(q, q, Complex64::new(re_q, 0.0));
                }
                for i in 0..n {
                    let vip = v.at(i, p);
                    let viq = v.at(i, q);
                    v.set(i, p, vip * c + viq * s);
                    v.set(i, q, viq * c - vip * s.conj());
                }
            }
        }
        sweeps += 1;
        last_off = off_diagonal_mass(&a);
        if last_off < threshold {
            converged = true;
        }
    }

    if !converged {
        return Err(LinalgError::NumericalFailure {
            sweeps,
            off_mass: last_off,
        });
    }

    // Sort ascending; stable tie-break on the original column index keeps the
    // result deterministic for degenerate spectra.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a.at(i, i)
            .re
            .partial_cmp(&a.at(j, j).re)
            .expect("eigenvalues are finite")
            .then(i.cmp(&j))
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&i| a.at(i, i).re * scale).collect();
    let mut vectors = ComplexMatrix::zeros(n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, new_col, v.at(row, old_col));
        }
    }

    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors: vectors,
    })
}

fn require_psd(eigen: &HermitianEigen) -> Result<(), LinalgError> {
    let min = eigen.min_eigenvalue();
    if min < -PSD_CLAMP {
        Err(LinalgError::NotPsd {
            min_eigenvalue: min,
        })
    } else {
        Ok(())
    }
}

/// Principal square root of a Hermitian PSD matrix. Eigenvalues at or below
/// [`ZERO_CUT`] are treated as exact zeros: the square root is not Lipschitz
/// at 0, so letting round-off-sized eigenvalues through would inject
/// `sqrt(1e-16)`-sized noise into rank-deficient results.
pub fn mat_sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let eigen = eig_hermitian(m)?;
    require_psd(&eigen)?;
    Ok(eigen.apply_fn(|l| if l > ZERO_CUT { l.sqrt() } else { 0.0 }))
}

/// Natural-log matrix logarithm of a Hermitian PSD matrix, with the kernel
/// mapped to zero and reported through [`PsdLog::support`].
pub fn mat_log_psd(m: &ComplexMatrix) -> Result<PsdLog, LinalgError> {
    let eigen = eig_hermitian(m)?;
    require_psd(&eigen)?;
    let support: Vec<bool> = eigen.eigenvalues.iter().map(|&l| l > ZERO_CUT).collect();
    let matrix = eigen.apply_fn(|l| if l > ZERO_CUT { l.ln() } else { 0.0 });
    Ok(PsdLog {
        matrix,
        eigen,
        support,
    })
}

/// Trace norm (sum of absolute eigenvalues) of a Hermitian matrix.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64, LinalgError> {
    let eigen = eig_hermitian(m)?;
    Ok(eigen.eigenvalues.iter().map(|l| l.abs()).sum())
}
