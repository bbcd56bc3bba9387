//! Parameterized circuits over the simulator gate set.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::sim::{GateKind, StateVector, MAX_QUBITS};

/// Angle of a gate: a constant, or an index into the owning circuit's
/// `param_names`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Fixed(f64),
    Slot(usize),
}

/// Angle argument accepted by the circuit builders.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Fixed(f64),
    Named(String),
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Fixed(v)
    }
}

impl From<&str> for Param {
    fn from(name: &str) -> Self {
        Param::Named(name.to_owned())
    }
}

impl From<String> for Param {
    fn from(name: String) -> Self {
        Param::Named(name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: Angle,
}

/// Ordered gate list with named parameter slots. Every slot is referenced by
/// exactly one gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<GateOp>,
    param_names: Vec<String>,
    slot_gate: Vec<usize>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "{n_qubits} qubits requested, supported range is 1..={MAX_QUBITS}"
            )));
        }
        Ok(Circuit {
            n_qubits,
            ops: Vec::new(),
            param_names: Vec::new(),
            slot_gate: Vec::new(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    pub fn num_params(&self) -> usize {
        self.param_names.len()
    }

    /// Position in `ops` of the gate driven by `slot`.
    pub fn slot_gate_index(&self, slot: usize) -> usize {
        self.slot_gate[slot]
    }

    pub fn gate_for_slot(&self, slot: usize) -> &GateOp {
        &self.ops[self.slot_gate[slot]]
    }

    pub fn slot_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::Index {
                what: "qubit",
                index: q,
                bound: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Appends a gate. Named angles open a new slot; reusing a name is a
    /// binding error since each slot drives exactly one gate.
    pub fn push(
        &mut self,
        kind: GateKind,
        target: usize,
        control: Option<usize>,
        param: impl Into<Param>,
    ) -> Result<&mut Self> {
        self.check_qubit(target)?;
        match (kind.is_controlled(), control) {
            (true, Some(c)) => {
                self.check_qubit(c)?;
                if c == target {
                    return Err(Error::Domain(format!("{kind} control and target are both qubit {c}")));
                }
            }
            (true, None) => return Err(Error::Domain(format!("{kind} requires a control qubit"))),
            (false, Some(_)) => return Err(Error::Domain(format!("{kind} takes no control qubit"))),
            (false, None) => {}
        }
        let angle = match param.into() {
            Param::Fixed(v) => {
                if !v.is_finite() {
                    return Err(Error::Domain(format!("{kind} angle {v} is not finite")));
                }
                Angle::Fixed(v)
            }
            Param::Named(name) => {
                if self.slot_index(&name).is_some() {
                    return Err(Error::Binding(format!(
                        "parameter slot `{name}` already drives another gate"
                    )));
                }
                self.param_names.push(name);
                self.slot_gate.push(self.ops.len());
                Angle::Slot(self.param_names.len() - 1)
            }
        };
        self.ops.push(GateOp {
            kind,
            target,
            control,
            angle,
        });
        Ok(self)
    }

    pub fn rx(&mut self, q: usize, p: impl Into<Param>) -> Result<&mut Self> {
        self.push(GateKind::Rx, q, None, p)
    }

    pub fn rz(&mut self, q: usize, p: impl Into<Param>) -> Result<&mut Self> {
        self.push(GateKind::Rz, q, None, p)
    }

    pub fn crx(&mut self, control: usize, target: usize, p: impl Into<Param>) -> Result<&mut Self> {
        self.push(GateKind::Crx, target, Some(control), p)
    }

    pub fn crz(&mut self, control: usize, target: usize, p: impl Into<Param>) -> Result<&mut Self> {
        self.push(GateKind::Crz, target, Some(control), p)
    }

    pub fn x(&mut self, q: usize) -> Result<&mut Self> {
        self.push(GateKind::X, q, None, 0.0)
    }

    pub fn cnot(&mut self, control: usize, target: usize) -> Result<&mut Self> {
        self.push(GateKind::Cnot, target, Some(control), 0.0)
    }

    pub fn cz(&mut self, control: usize, target: usize) -> Result<&mut Self> {
        self.push(GateKind::Cz, target, Some(control), 0.0)
    }

    /// Appends all of `other`'s gates; its slot names must not clash with ours.
    pub fn append(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.n_qubits > self.n_qubits {
            return Err(Error::Shape(format!(
                "cannot append a {}-qubit circuit to a {}-qubit one",
                other.n_qubits, self.n_qubits
            )));
        }
        for op in &other.ops {
            let param = match op.angle {
                Angle::Fixed(v) => Param::Fixed(v),
                Angle::Slot(s) => Param::Named(other.param_names[s].clone()),
            };
            self.push(op.kind, op.target, op.control, param)?;
        }
        Ok(self)
    }

    /// Resolves every gate angle from `values`, which is aligned with
    /// `param_names`.
    pub(crate) fn resolve(&self, op: &GateOp, values: &[f64]) -> f64 {
        match op.angle {
            Angle::Fixed(v) => v,
            Angle::Slot(s) => values[s],
        }
    }

    /// Applies the circuit in place with slot-aligned angles.
    pub(crate) fn apply_slots(&self, state: &mut StateVector, values: &[f64]) {
        debug_assert_eq!(values.len(), self.param_names.len());
        for op in &self.ops {
            state.apply_unchecked(op.kind, op.target, op.control, self.resolve(op, values));
        }
    }

    pub(crate) fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::Shape(format!(
                "circuit has {} qubits, state has {}",
                self.n_qubits,
                state.n_qubits()
            )));
        }
        Ok(())
    }

    /// Slot-aligned values from a parameter vector that names every slot
    /// exactly once.
    pub fn bind(&self, params: &ParameterVector) -> Result<Vec<f64>> {
        if params.len() != self.param_names.len() {
            return Err(Error::Binding(format!(
                "circuit has {} parameter slots, {} values supplied",
                self.param_names.len(),
                params.len()
            )));
        }
        let mut values = vec![0.0; self.param_names.len()];
        for (name, &v) in params.names().iter().zip(params.values()) {
            let slot = self
                .slot_index(name)
                .ok_or_else(|| Error::Binding(format!("parameter `{name}` is not a slot of this circuit")))?;
            if !v.is_finite() {
                return Err(Error::Domain(format!("parameter `{name}` = {v} is not finite")));
            }
            values[slot] = v;
        }
        Ok(values)
    }

    /// Runs the circuit on a copy of `initial`.
    pub fn run(&self, params: &ParameterVector, initial: &StateVector) -> Result<StateVector> {
        self.check_state(initial)?;
        let values = self.bind(params)?;
        let mut state = initial.clone();
        self.apply_slots(&mut state, &values);
        Ok(state)
    }
}

/// Free-function form of [`Circuit::run`].
pub fn run_circuit(circuit: &Circuit, params: &ParameterVector, initial: &StateVector) -> Result<StateVector> {
    circuit.run(params, initial)
}

/// Ordered, uniquely named parameter values (radians).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    names: Vec<String>,
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} parameter names but {} values",
                names.len(),
                values.len()
            )));
        }
        let mut seen = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if let Some(j) = seen.insert(n.as_str(), i) {
                return Err(Error::Binding(format!(
                    "parameter name `{n}` repeated at positions {j} and {i}"
                )));
            }
        }
        Ok(ParameterVector { names, values })
    }

    pub fn empty() -> Self {
        ParameterVector {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Values for `circuit`'s slots, in slot order.
    pub fn for_circuit(circuit: &Circuit, values: Vec<f64>) -> Result<Self> {
        Self::new(circuit.param_names().to_vec(), values)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Pauli-Z on one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observable {
    pub qubit: usize,
}

impl Observable {
    pub fn z(qubit: usize) -> Self {
        Observable { qubit }
    }

    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        state.expectation_z(self.qubit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit::new(3).unwrap();
        let mut s = StateVector::new(3).unwrap();
        s.apply_gate(GateKind::Rx, 1, None, 0.7).unwrap();
        let out = c.run(&ParameterVector::empty(), &s).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn single_slot_rotation() {
        let mut c = Circuit::new(1).unwrap();
        c.rx(0, "theta").unwrap();
        let p = ParameterVector::new(vec!["theta".into()], vec![FRAC_PI_2]).unwrap();
        let out = run_circuit(&c, &p, &StateVector::new(1).unwrap()).unwrap();
        let a = out.amplitudes();
        assert!((a[0].re - FRAC_1_SQRT_2).abs() < 1e-12 && a[0].im.abs() < 1e-12);
        assert!(a[1].re.abs() < 1e-12 && (a[1].im + FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn binding_must_match_slots_exactly() {
        let mut c = Circuit::new(2).unwrap();
        c.rx(0, "a").unwrap().crz(0, 1, "b").unwrap();
        let s = StateVector::new(2).unwrap();
        let missing = ParameterVector::new(vec!["a".into()], vec![0.1]).unwrap();
        assert!(matches!(c.run(&missing, &s), Err(Error::Binding(_))));
        let wrong = ParameterVector::new(vec!["a".into(), "z".into()], vec![0.1, 0.2]).unwrap();
        assert!(matches!(c.run(&wrong, &s), Err(Error::Binding(_))));
        let extra = ParameterVector::new(vec!["a".into(), "b".into(), "c".into()], vec![0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(c.run(&extra, &s), Err(Error::Binding(_))));
        // Order of names is free.
        let swapped = ParameterVector::new(vec!["b".into(), "a".into()], vec![0.2, 0.1]).unwrap();
        assert!(c.run(&swapped, &s).is_ok());
    }

    #[test]
    fn slot_names_drive_one_gate_each() {
        let mut c = Circuit::new(2).unwrap();
        c.rx(0, "a").unwrap();
        assert!(matches!(c.rz(1, "a"), Err(Error::Binding(_))));
        assert!(ParameterVector::new(vec!["a".into(), "a".into()], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn builder_validates_indices() {
        let mut c = Circuit::new(2).unwrap();
        assert!(matches!(c.rx(2, 0.1), Err(Error::Index { .. })));
        assert!(matches!(c.cnot(1, 1), Err(Error::Domain(_))));
        assert!(matches!(c.rx(0, f64::INFINITY), Err(Error::Domain(_))));
    }
}
