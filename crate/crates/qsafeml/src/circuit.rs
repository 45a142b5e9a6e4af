//! Minimal statevector circuit simulator: parameterized single-qubit
//! rotations plus CNOT/CZ entanglers, applied directly to the amplitude
//! vector. Qubit `j` corresponds to bit `j` of the basis index.

use crate::state::StateVector;
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

/// Largest supported register; statevectors stay comfortably in memory.
pub const MAX_QUBITS: usize = 10;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("qubit count {0} outside [1, {MAX_QUBITS}]")]
    BadQubitCount(usize),
    #[error("gate {gate} references qubit {qubit} but the circuit has {n_qubits} qubits")]
    QubitOutOfRange {
        gate: usize,
        qubit: usize,
        n_qubits: usize,
    },
    #[error("gate {0}: control and target must differ")]
    ControlEqualsTarget(usize),
    #[error("gate {0}: rotation angle is not finite")]
    NonFiniteAngle(usize),
    #[error("initial state has dim {state_dim}, circuit needs {expected}")]
    DimMismatch { state_dim: usize, expected: usize },
}

/// One gate application.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Rx { qubit: usize, angle: f64 },
    Ry { qubit: usize, angle: f64 },
    Rz { qubit: usize, angle: f64 },
    Cnot { control: usize, target: usize },
    Cz { control: usize, target: usize },
}

/// Ordered gate list over a fixed-width qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self, CircuitError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(CircuitError::BadQubitCount(n_qubits));
        }
        let mut circuit = Self {
            n_qubits,
            gates: Vec::new(),
        };
        for gate in gates {
            circuit.push(gate)?;
        }
        Ok(circuit)
    }

    pub fn empty(n_qubits: usize) -> Result<Self, CircuitError> {
        Self::new(n_qubits, Vec::new())
    }

    pub fn push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        let idx = self.gates.len();
        let check_qubit = |q: usize| {
            if q >= self.n_qubits {
                Err(CircuitError::QubitOutOfRange {
                    gate: idx,
                    qubit: q,
                    n_qubits: self.n_qubits,
                })
            } else {
                Ok(())
            }
        };
        match gate {
            Gate::Rx { qubit, angle } | Gate::Ry { qubit, angle } | Gate::Rz { qubit, angle } => {
                check_qubit(qubit)?;
                if !angle.is_finite() {
                    return Err(CircuitError::NonFiniteAngle(idx));
                }
            }
            Gate::Cnot { control, target } | Gate::Cz { control, target } => {
                check_qubit(control)?;
                check_qubit(target)?;
                if control == target {
                    return Err(CircuitError::ControlEqualsTarget(idx));
                }
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, other: &Circuit) -> Result<(), CircuitError> {
        for &gate in &other.gates {
            self.push(gate)?;
        }
        Ok(())
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    #[inline]
    pub fn state_dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// All-|0> register state.
    pub fn zero_state(&self) -> StateVector {
        StateVector::basis(self.state_dim(), 0)
    }

    /// Random circuit over the supported gate set, for property tests and
    /// benches.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_qubits: usize, n_gates: usize) -> Self {
        assert!(n_qubits >= 1 && n_qubits <= MAX_QUBITS);
        let mut circuit = Self::empty(n_qubits).expect("qubit count validated");
        for _ in 0..n_gates {
            let kind = if n_qubits == 1 {
                rng.random_range(0..3)
            } else {
                rng.random_range(0..5)
            };
            let gate = match kind {
                0..=2 => {
                    let qubit = rng.random_range(0..n_qubits);
                    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                    match kind {
                        0 => Gate::Rx { qubit, angle },
                        1 => Gate::Ry { qubit, angle },
                        _ => Gate::Rz { qubit, angle },
                    }
                }
                _ => {
                    let control = rng.random_range(0..n_qubits);
                    let mut target = rng.random_range(0..n_qubits - 1);
                    if target >= control {
                        target += 1;
                    }
                    if kind == 3 {
                        Gate::Cnot { control, target }
                    } else {
                        Gate::Cz { control, target }
                    }
                }
            };
            circuit.push(gate).expect("generated gate is valid");
        }
        circuit
    }
}

#[inline]
fn apply_single_qubit(amps: &mut [Complex64], qubit: usize, m: [[Complex64; 2]; 2]) {
    let stride = 1 << qubit;
    let n = amps.len();
    let mut base = 0;
    while base < n {
        for offset in 0..stride {
            let i0 = base + offset;
            let i1 = i0 + stride;
            let a0 = amps[i0];
            let a1 = amps[i1];
            amps[i0] = m[0][0] * a0 + m[0][1] * a1;
            amps[i1] = m[1][0] * a0 + m[1][1] * a1;
        }
        base += stride << 1;
    }
}

/// Run the circuit on an initial state, returning the output statevector.
pub fn simulate(circuit: &Circuit, initial: &StateVector) -> Result<StateVector, CircuitError> {
    let expected = circuit.state_dim();
    if initial.dim() != expected {
        return Err(CircuitError::DimMismatch {
            state_dim: initial.dim(),
            expected,
        });
    }
    let mut amps: Vec<Complex64> = initial.amplitudes().to_vec();
    for &gate in circuit.gates() {
        match gate {
            Gate::Rx { qubit, angle } => {
                let (half_sin, half_cos) = (angle / 2.0).sin_cos();
                let c = Complex64::new(half_cos, 0.0);
                let mis = Complex64::new(0.0, -half_sin);
                apply_single_qubit(&mut amps, qubit, [[c, mis], [mis, c]]);
            }
            Gate::Ry { qubit, angle } => {
                let (half_sin, half_cos) = (angle / 2.0).sin_cos();
                let c = Complex64::new(half_cos, 0.0);
                let s = Complex64::new(half_sin, 0.0);
                apply_single_qubit(&mut amps, qubit, [[c, -s], [s, c]]);
            }
            Gate::Rz { qubit, angle } => {
                let phase_neg = Complex64::from_polar(1.0, -angle / 2.0);
                let phase_pos = Complex64::from_polar(1.0, angle / 2.0);
                let stride = 1 << qubit;
                for (i, a) in amps.iter_mut().enumerate() {
                    *a *= if i & stride == 0 { phase_neg } else { phase_pos };
                }
            }
            Gate::Cnot { control, target } => {
                let cbit = 1 << control;
                let tbit = 1 << target;
                for i in 0..amps.len() {
                    if i & cbit != 0 && i & tbit == 0 {
                        amps.swap(i, i | tbit);
                    }
                }
            }
            Gate::Cz { control, target } => {
                let mask = (1 << control) | (1 << target);
                for (i, a) in amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *a = -*a;
                    }
                }
            }
        }
    }
    Ok(StateVector::from_raw_normalized(amps))
}
