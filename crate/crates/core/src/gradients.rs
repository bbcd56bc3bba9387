//! Parameter-shift gradients of single-qubit Z expectations.
//!
//! A slot driving `RX`/`RZ` uses the two-term rule
//! `∂f = [f(θ+π/2) − f(θ−π/2)] / 2`, exact because the generator `σ/2` has
//! eigenvalues ±1/2. The controlled rotations `CRX`/`CRZ` have generator
//! spectrum {0, 0, ±1/2}, so `f` carries both frequency 1/2 and frequency 1
//! and the two-term rule is biased. For those the four-term rule
//! `∂f = d₊[f(θ+π/2) − f(θ−π/2)] − d₋[f(θ+3π/2) − f(θ−3π/2)]` with
//! `d± = (√2 ± 1) / (4√2)` is exact.
//!
//! The frequency-1/2 component only survives if the control's |0⟩ and |1⟩
//! branches interfere later, which needs a subsequent gate that is
//! off-diagonal on the control qubit (the readout is Z, hence diagonal). When
//! no such gate follows, the controlled rotation contributes frequency 1 only
//! and the cheaper two-term rule is already exact; [`slot_rules`] picks the
//! rule per slot on that basis.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use crate::circuit::{Circuit, Observable, ParameterVector};
use crate::error::{Error, Result};
use crate::sim::{GateKind, StateVector};

/// `(shift, coefficient)` pairs; the derivative is
/// `Σ coefficient · [f(θ + shift) − f(θ − shift)]`.
pub type ShiftRule = &'static [(f64, f64)];

const TWO_TERM: ShiftRule = &[(FRAC_PI_2, 0.5)];

const D_PLUS: f64 = (SQRT_2 + 1.0) / (4.0 * SQRT_2);
const D_MINUS: f64 = (SQRT_2 - 1.0) / (4.0 * SQRT_2);
const FOUR_TERM: ShiftRule = &[(FRAC_PI_2, D_PLUS), (3.0 * FRAC_PI_2, -D_MINUS)];

/// Shift rule for a gate of `kind` with no knowledge of its surroundings.
pub fn shift_rule(kind: GateKind) -> Option<ShiftRule> {
    match kind {
        GateKind::Rx | GateKind::Rz => Some(TWO_TERM),
        GateKind::Crx | GateKind::Crz => Some(FOUR_TERM),
        GateKind::X | GateKind::Cnot | GateKind::Cz => None,
    }
}

fn is_diagonal(kind: GateKind) -> bool {
    matches!(kind, GateKind::Rz | GateKind::Crz | GateKind::Cz)
}

/// Rules for every slot of `circuit`, in slot order.
pub fn slot_rules(circuit: &Circuit) -> Result<Vec<ShiftRule>> {
    (0..circuit.num_params())
        .map(|s| {
            let op = circuit.gate_for_slot(s);
            let rule = shift_rule(op.kind).ok_or_else(|| Error::UnsupportedGenerator {
                slot: circuit.param_names()[s].clone(),
                gate: op.kind.name(),
            })?;
            let Some(control) = op.control else {
                return Ok(rule);
            };
            let mixes_control = circuit.ops()[circuit.slot_gate_index(s) + 1..]
                .iter()
                .any(|later| later.target == control && !is_diagonal(later.kind));
            Ok(if mixes_control { rule } else { TWO_TERM })
        })
        .collect()
}

#[inline]
pub(crate) fn expectation_at(circuit: &Circuit, values: &[f64], initial: &StateVector, qubit: usize) -> f64 {
    let mut state = initial.clone();
    circuit.apply_slots(&mut state, values);
    state.expectation_z_unchecked(qubit)
}

/// Parameter-shift derivative for slot `slot`; `values` is restored before
/// returning.
#[inline]
pub(crate) fn shift_derivative(
    circuit: &Circuit,
    values: &mut [f64],
    slot: usize,
    rule: ShiftRule,
    initial: &StateVector,
    qubit: usize,
) -> f64 {
    let theta = values[slot];
    let mut acc = 0.0;
    for &(shift, coeff) in rule {
        values[slot] = theta + shift;
        let plus = expectation_at(circuit, values, initial, qubit);
        values[slot] = theta - shift;
        let minus = expectation_at(circuit, values, initial, qubit);
        acc += coeff * (plus - minus);
    }
    values[slot] = theta;
    acc
}

fn check_observable(circuit: &Circuit, obs: &Observable) -> Result<()> {
    if obs.qubit >= circuit.n_qubits() {
        return Err(Error::Index {
            what: "observable qubit",
            index: obs.qubit,
            bound: circuit.n_qubits(),
        });
    }
    Ok(())
}

/// Gradient of `⟨obs⟩` after running `circuit` on `initial`, one entry per
/// name in `params`, in that order.
pub fn parameter_shift_grad(
    circuit: &Circuit,
    params: &ParameterVector,
    obs: &Observable,
    initial: &StateVector,
) -> Result<Vec<f64>> {
    circuit.check_state(initial)?;
    check_observable(circuit, obs)?;
    let mut values = circuit.bind(params)?;
    let rules = slot_rules(circuit)?;
    Ok(params
        .names()
        .iter()
        .map(|name| {
            // bind() guarantees every name resolves
            let slot = circuit.slot_index(name).unwrap_or_default();
            shift_derivative(circuit, &mut values, slot, rules[slot], initial, obs.qubit)
        })
        .collect())
}

/// Central differences `[f(θ+h) − f(θ−h)] / 2h`, aligned with `params`.
pub fn finite_difference_oracle(
    circuit: &Circuit,
    params: &ParameterVector,
    obs: &Observable,
    initial: &StateVector,
    h: f64,
) -> Result<Vec<f64>> {
    if !(1e-6..=1e-2).contains(&h) {
        return Err(Error::Domain(format!("step {h} outside [1e-6, 1e-2]")));
    }
    circuit.check_state(initial)?;
    check_observable(circuit, obs)?;
    let mut values = circuit.bind(params)?;
    Ok(params
        .names()
        .iter()
        .map(|name| {
            let slot = circuit.slot_index(name).unwrap_or_default();
            let theta = values[slot];
            values[slot] = theta + h;
            let plus = expectation_at(circuit, &values, initial, obs.qubit);
            values[slot] = theta - h;
            let minus = expectation_at(circuit, &values, initial, obs.qubit);
            values[slot] = theta;
            (plus - minus) / (2.0 * h)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng64;
    use std::f64::consts::PI;

    fn single_rx(theta: f64) -> (Circuit, ParameterVector) {
        let mut c = Circuit::new(1).unwrap();
        c.rx(0, "theta").unwrap();
        let p = ParameterVector::for_circuit(&c, vec![theta]).unwrap();
        (c, p)
    }

    #[test]
    fn rx_gradient_is_minus_sine() {
        let s = StateVector::new(1).unwrap();
        let (c, p) = single_rx(FRAC_PI_2);
        let g = parameter_shift_grad(&c, &p, &Observable::z(0), &s).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-12);
        let (c, p) = single_rx(0.0);
        let g = parameter_shift_grad(&c, &p, &Observable::z(0), &s).unwrap();
        assert!(g[0].abs() < 1e-12);
    }

    #[test]
    fn finite_difference_examples() {
        let s = StateVector::new(1).unwrap();
        let (c, p) = single_rx(FRAC_PI_2);
        let g = finite_difference_oracle(&c, &p, &Observable::z(0), &s, 1e-4).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-7);
        let empty = Circuit::new(1).unwrap();
        let g = finite_difference_oracle(&empty, &ParameterVector::empty(), &Observable::z(0), &s, 1e-4).unwrap();
        assert!(g.is_empty());
        assert!(matches!(
            finite_difference_oracle(&c, &p, &Observable::z(0), &s, 0.1),
            Err(Error::Domain(_))
        ));
        assert!(finite_difference_oracle(&c, &p, &Observable::z(0), &s, 1e-7).is_err());
    }

    #[test]
    fn slot_on_fixed_gate_is_unsupported() {
        let mut c = Circuit::new(2).unwrap();
        c.push(GateKind::Cnot, 1, Some(0), "oops").unwrap();
        let p = ParameterVector::for_circuit(&c, vec![0.3]).unwrap();
        let s = StateVector::new(2).unwrap();
        assert!(matches!(
            parameter_shift_grad(&c, &p, &Observable::z(1), &s),
            Err(Error::UnsupportedGenerator { .. })
        ));
    }

    #[test]
    fn gradient_follows_parameter_vector_order() {
        let mut c = Circuit::new(1).unwrap();
        c.rx(0, "a").unwrap().rz(0, "b").unwrap().rx(0, "c").unwrap();
        let s = StateVector::new(1).unwrap();
        let fwd = ParameterVector::new(vec!["a".into(), "b".into(), "c".into()], vec![0.3, 0.7, -0.4]).unwrap();
        let rev = ParameterVector::new(vec!["c".into(), "b".into(), "a".into()], vec![-0.4, 0.7, 0.3]).unwrap();
        let g1 = parameter_shift_grad(&c, &fwd, &Observable::z(0), &s).unwrap();
        let g2 = parameter_shift_grad(&c, &rev, &Observable::z(0), &s).unwrap();
        assert_eq!(g1, vec![g2[2], g2[1], g2[0]]);
    }

    #[test]
    fn two_term_rule_is_biased_for_controlled_rotations() {
        // The trailing RX on the control makes its branches interfere, so
        // f(θ) mixes frequencies 1/2 and 1.
        let mut c = Circuit::new(2).unwrap();
        c.rx(0, 1.1)
            .unwrap()
            .rx(1, 0.4)
            .unwrap()
            .crx(0, 1, "theta")
            .unwrap()
            .rx(0, 0.8)
            .unwrap();
        assert_eq!(slot_rules(&c).unwrap()[0], FOUR_TERM);
        let s = StateVector::new(2).unwrap();
        let mut rng = Rng64::seed_from_u64(11);
        let mut worst_two_term: f64 = 0.0;
        for _ in 0..20 {
            let theta = rng.uniform(-PI, PI);
            let p = ParameterVector::for_circuit(&c, vec![theta]).unwrap();
            let fd = finite_difference_oracle(&c, &p, &Observable::z(0), &s, 1e-4).unwrap()[0];
            let exact = parameter_shift_grad(&c, &p, &Observable::z(0), &s).unwrap()[0];
            assert!((exact - fd).abs() < 1e-7, "four-term {exact} vs fd {fd}");
            let mut values = vec![theta];
            let two = shift_derivative(&c, &mut values, 0, TWO_TERM, &s, 0);
            worst_two_term = worst_two_term.max((two - fd).abs());
        }
        assert!(worst_two_term > 1e-3);
    }

    #[test]
    fn idle_control_uses_two_term_rule() {
        let mut c = Circuit::new(2).unwrap();
        c.rx(0, 1.1).unwrap().crx(0, 1, "a").unwrap().crz(0, 1, "b").unwrap();
        assert_eq!(slot_rules(&c).unwrap(), vec![TWO_TERM, TWO_TERM]);
        let mut rng = Rng64::seed_from_u64(5);
        let s = StateVector::new(2).unwrap();
        for _ in 0..20 {
            let p = ParameterVector::for_circuit(&c, vec![rng.uniform(-PI, PI), rng.uniform(-PI, PI)]).unwrap();
            for q in 0..2 {
                let fd = finite_difference_oracle(&c, &p, &Observable::z(q), &s, 1e-4).unwrap();
                let ps = parameter_shift_grad(&c, &p, &Observable::z(q), &s).unwrap();
                for (a, b) in fd.iter().zip(&ps) {
                    assert!((a - b).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn unreachable_parameter_has_zero_gradient() {
        // Qubit 2 never touches qubit 0, the measured one.
        let mut c = Circuit::new(3).unwrap();
        c.rx(0, "a")
            .unwrap()
            .crx(0, 1, "b")
            .unwrap()
            .rx(2, "c")
            .unwrap()
            .crz(2, 1, "d")
            .unwrap();
        let p = ParameterVector::for_circuit(&c, vec![0.4, -1.2, 2.0, 0.9]).unwrap();
        let g = parameter_shift_grad(&c, &p, &Observable::z(0), &StateVector::new(3).unwrap()).unwrap();
        assert!(g[0].abs() > 1e-3);
        for &gi in &g[1..] {
            assert!(gi.abs() < 1e-10);
        }
    }
}
