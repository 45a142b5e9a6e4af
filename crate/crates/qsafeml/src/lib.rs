//! Safety monitoring for quantum classifiers.
//!
//! The toolkit turns classifier prediction outcomes into density matrices,
//! measures quantum distances (trace distance, fidelity, Bures distance,
//! quantum relative entropy) between correctly and incorrectly classified
//! sets, relates those distances to accuracy, and raises threshold flags when
//! operation looks unsafe. A small statevector simulator with a trainable
//! variational classifier and a data pipeline make the whole flow runnable
//! end to end without any external quantum framework.
//!
//! Batch-heavy operations (metric evaluation over many pairs, per-sample
//! simulation and gradients, per-class analysis) run data-parallel under the
//! default `parallel` feature and fall back to plain iteration without it;
//! results are identical either way.
//!
//! ```
//! use qsafeml::metrics::{fidelity, trace_distance};
//! use qsafeml::state::{DensityMatrix, StateVector};
//!
//! let zero = DensityMatrix::from_pure(&StateVector::basis(2, 0));
//! let mixed = DensityMatrix::maximally_mixed(2);
//! let d = trace_distance(&zero, &mixed).unwrap();
//! assert!((d.value - 0.5).abs() < 1e-12);
//! let f = fidelity(&zero, &mixed).unwrap();
//! assert!((f.value - 0.5).abs() < 1e-9);
//! ```

pub mod circuit;
pub mod data;
pub mod exec;
pub mod linalg;
pub mod metrics;
pub mod monitor;
pub mod state;
pub mod vqc;

pub use linalg::{ComplexMatrix, HermitianEigen, LinalgError};
pub use metrics::{MetricKind, MetricSet, MetricValue};
pub use state::{DensityMatrix, MixtureSpec, StateError, StateVector};
