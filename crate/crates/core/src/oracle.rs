//! Brute-force dense-unitary construction, used as an independent check on
//! the stride-indexed simulator.
//!
//! Each gate becomes a full `2^n × 2^n` matrix assembled from Kronecker
//! products of 2×2 factors, ordered from qubit `n-1` (leftmost) down to qubit
//! 0 (rightmost), matching the least-significant-bit qubit convention.

use nalgebra::{DMatrix, DVector};

use crate::circuit::{Circuit, ParameterVector};
use crate::error::{Error, Result};
use crate::sim::{GateKind, Mat2, StateVector, C64};

/// Largest register the oracle will materialize.
pub const MAX_ORACLE_QUBITS: usize = 8;

fn mat2(m: &Mat2) -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])
}

fn kron_chain(n_qubits: usize, factor: impl Fn(usize) -> DMatrix<C64>) -> DMatrix<C64> {
    let mut acc = DMatrix::<C64>::identity(1, 1);
    for q in (0..n_qubits).rev() {
        acc = acc.kronecker(&factor(q));
    }
    acc
}

/// Full matrix of one gate on an `n_qubits` register.
pub fn gate_matrix(n_qubits: usize, kind: GateKind, target: usize, control: Option<usize>, angle: f64) -> DMatrix<C64> {
    let id = DMatrix::<C64>::identity(2, 2);
    let block = mat2(&kind.matrix(angle));
    match control {
        None => kron_chain(n_qubits, |q| if q == target { block.clone() } else { id.clone() }),
        Some(c) => {
            let zero = C64::new(0.0, 0.0);
            let one = C64::new(1.0, 0.0);
            let p0 = DMatrix::from_row_slice(2, 2, &[one, zero, zero, zero]);
            let p1 = DMatrix::from_row_slice(2, 2, &[zero, zero, zero, one]);
            let idle = kron_chain(n_qubits, |q| if q == c { p0.clone() } else { id.clone() });
            let active = kron_chain(n_qubits, |q| {
                if q == c {
                    p1.clone()
                } else if q == target {
                    block.clone()
                } else {
                    id.clone()
                }
            });
            idle + active
        }
    }
}

/// The circuit's unitary as the ordered product of its gate matrices.
pub fn dense_unitary_oracle(circuit: &Circuit, params: &ParameterVector) -> Result<DMatrix<C64>> {
    let n = circuit.n_qubits();
    if n > MAX_ORACLE_QUBITS {
        return Err(Error::Capacity(format!(
            "dense oracle supports at most {MAX_ORACLE_QUBITS} qubits, circuit has {n}"
        )));
    }
    let values = circuit.bind(params)?;
    let dim = 1usize << n;
    let mut u = DMatrix::<C64>::identity(dim, dim);
    for op in circuit.ops() {
        let g = gate_matrix(n, op.kind, op.target, op.control, circuit.resolve(op, &values));
        u = g * u;
    }
    Ok(u)
}

/// `U · |initial⟩` as a plain amplitude vector.
pub fn apply_dense(u: &DMatrix<C64>, initial: &StateVector) -> Vec<C64> {
    let v = DVector::from_column_slice(initial.amplitudes());
    (u * v).iter().copied().collect()
}

/// `max |(U·U†)_ij − δ_ij|`.
pub fn unitarity_error(u: &DMatrix<C64>) -> f64 {
    let prod = u * u.adjoint();
    let id = DMatrix::<C64>::identity(u.nrows(), u.ncols());
    (prod - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
