//! Dense statevector simulation.
//!
//! Basis index convention: qubit `q` is bit `q` of the basis-state index, so
//! qubit 0 is the least-significant bit. Ket strings in comments list qubit 0
//! first: `|10⟩` is qubit 0 = 1, qubit 1 = 0, basis index `0b01`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest register the fast path accepts.
pub const MAX_QUBITS: usize = 12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A single-qubit operator as a row-major 2×2 matrix.
pub type Mat2 = [[C64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Rx,
    Rz,
    X,
    Crx,
    Crz,
    Cnot,
    Cz,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rx => "RX",
            GateKind::Rz => "RZ",
            GateKind::X => "X",
            GateKind::Crx => "CRX",
            GateKind::Crz => "CRZ",
            GateKind::Cnot => "CNOT",
            GateKind::Cz => "CZ",
        }
    }

    pub fn is_controlled(self) -> bool {
        matches!(self, GateKind::Crx | GateKind::Crz | GateKind::Cnot | GateKind::Cz)
    }

    /// Whether the gate is `exp(-iθG)` for some generator `G`, i.e. has a
    /// meaningful angle.
    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Rz | GateKind::Crx | GateKind::Crz)
    }

    /// The 2×2 block acting on the target (on the control=|1⟩ subspace for
    /// controlled kinds). Fixed gates ignore `angle`.
    pub fn matrix(self, angle: f64) -> Mat2 {
        let half = 0.5 * angle;
        match self {
            GateKind::Rx | GateKind::Crx => {
                let c = C64::new(half.cos(), 0.0);
                let s = C64::new(0.0, -half.sin());
                [[c, s], [s, c]]
            }
            GateKind::Rz | GateKind::Crz => [[C64::from_polar(1.0, -half), ZERO], [ZERO, C64::from_polar(1.0, half)]],
            GateKind::X | GateKind::Cnot => [[ZERO, ONE], [ONE, ZERO]],
            GateKind::Cz => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Normalized amplitudes over `2^n_qubits` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

fn check_register(n_qubits: usize, cap: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > cap {
        return Err(Error::Capacity(format!(
            "{n_qubits} qubits requested, supported range is 1..={cap}"
        )));
    }
    Ok(())
}

impl StateVector {
    /// The all-zero register `|0…0⟩`.
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits, MAX_QUBITS)?;
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(StateVector { n_qubits, amps })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut state = Self::new(n_qubits)?;
        if index >= state.amps.len() {
            return Err(Error::Index {
                what: "basis state",
                index,
                bound: state.amps.len(),
            });
        }
        state.amps[0] = ZERO;
        state.amps[index] = ONE;
        Ok(state)
    }

    /// Wraps caller-provided amplitudes; the vector must have length `2^n`
    /// and unit norm within 1e-10.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::Shape(format!("amplitude count {len} is not a power of two")));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_register(n_qubits, MAX_QUBITS)?;
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!(
                "amplitudes have squared norm {norm}, expected 1"
            )));
        }
        Ok(StateVector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n_qubits {
            return Err(Error::Index {
                what: "qubit",
                index: qubit,
                bound: self.n_qubits,
            });
        }
        Ok(())
    }

    /// Applies `kind` with the given angle. `control` is required exactly for
    /// controlled kinds.
    pub fn apply_gate(&mut self, kind: GateKind, target: usize, control: Option<usize>, angle: f64) -> Result<()> {
        self.check_qubit(target)?;
        match (kind.is_controlled(), control) {
            (true, Some(c)) => {
                self.check_qubit(c)?;
                if c == target {
                    return Err(Error::Domain(format!("{kind} control and target are both qubit {c}")));
                }
            }
            (true, None) => {
                return Err(Error::Domain(format!("{kind} requires a control qubit")));
            }
            (false, Some(_)) => {
                return Err(Error::Domain(format!("{kind} takes no control qubit")));
            }
            (false, None) => {}
        }
        if kind.is_rotation() && !angle.is_finite() {
            return Err(Error::Domain(format!("{kind} angle {angle} is not finite")));
        }
        self.apply_unchecked(kind, target, control, angle);
        Ok(())
    }

    /// Gate application without validation; indices must already be checked.
    pub(crate) fn apply_unchecked(&mut self, kind: GateKind, target: usize, control: Option<usize>, angle: f64) {
        let cmask = control.map_or(0, |c| 1usize << c);
        match kind {
            GateKind::Rz | GateKind::Crz => {
                let half = 0.5 * angle;
                self.apply_diagonal(target, cmask, C64::from_polar(1.0, -half), C64::from_polar(1.0, half))
            }
            GateKind::Cz => self.apply_diagonal(target, cmask, ONE, -ONE),
            GateKind::X | GateKind::Cnot => self.apply_flip(target, cmask),
            GateKind::Rx | GateKind::Crx => self.apply_mat2(target, cmask, &kind.matrix(angle)),
        }
    }

    /// Visits every amplitude pair `(i, i | 1<<target)` with bit `target`
    /// clear in `i` and all `cmask` bits set.
    #[inline]
    fn for_each_pair(&mut self, target: usize, cmask: usize, mut f: impl FnMut(&mut C64, &mut C64)) {
        let stride = 1usize << target;
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for i in base..base + stride {
                if i & cmask == cmask {
                    let (lo, hi) = self.amps.split_at_mut(i + stride);
                    f(&mut lo[i], &mut hi[0]);
                }
            }
            base += stride << 1;
        }
    }

    fn apply_mat2(&mut self, target: usize, cmask: usize, m: &Mat2) {
        let [[m00, m01], [m10, m11]] = *m;
        self.for_each_pair(target, cmask, |a0, a1| {
            let (x0, x1) = (*a0, *a1);
            *a0 = m00 * x0 + m01 * x1;
            *a1 = m10 * x0 + m11 * x1;
        });
    }

    fn apply_diagonal(&mut self, target: usize, cmask: usize, d0: C64, d1: C64) {
        self.for_each_pair(target, cmask, |a0, a1| {
            *a0 *= d0;
            *a1 *= d1;
        });
    }

    fn apply_flip(&mut self, target: usize, cmask: usize) {
        self.for_each_pair(target, cmask, std::mem::swap);
    }

    /// `⟨Z_qubit⟩ = P(0) − P(1)`.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        Ok(self.expectation_z_unchecked(qubit))
    }

    pub(crate) fn expectation_z_unchecked(&self, qubit: usize) -> f64 {
        let bit = 1usize << qubit;
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let p = a.norm_sqr();
                if i & bit == 0 {
                    p
                } else {
                    -p
                }
            })
            .sum()
    }

    /// Probability that measuring `qubit` yields `outcome`.
    pub fn measure_probability(&self, qubit: usize, outcome: u8) -> Result<f64> {
        self.check_qubit(qubit)?;
        let outcome = check_outcome(outcome)?;
        let bit = 1usize << qubit;
        let want = if outcome == 1 { bit } else { 0 };
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit == want)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Projects onto `outcome` for `qubit` and renormalizes.
    pub fn collapse(&mut self, qubit: usize, outcome: u8) -> Result<()> {
        let probability = self.measure_probability(qubit, outcome)?;
        if probability <= 1e-12 {
            return Err(Error::Collapse {
                qubit,
                outcome,
                probability,
            });
        }
        let bit = 1usize << qubit;
        let keep = if outcome == 1 { bit } else { 0 };
        let scale = 1.0 / probability.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & bit == keep {
                *a *= scale;
            } else {
                *a = ZERO;
            }
        }
        Ok(())
    }
}

fn check_outcome(outcome: u8) -> Result<u8> {
    if outcome > 1 {
        return Err(Error::Domain(format!("measurement outcome {outcome} is not a bit")));
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    fn bell() -> StateVector {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        StateVector::from_amplitudes(vec![h, ZERO, ZERO, h]).unwrap()
    }

    #[test]
    fn ground_states() {
        assert_eq!(StateVector::new(1).unwrap().amplitudes(), &[ONE, ZERO]);
        assert_eq!(StateVector::new(2).unwrap().amplitudes(), &[ONE, ZERO, ZERO, ZERO]);
        assert!(matches!(StateVector::new(13), Err(Error::Capacity(_))));
        assert!(matches!(StateVector::new(0), Err(Error::Capacity(_))));
    }

    #[test]
    fn rx_pi_flips_with_phase() {
        let mut s = StateVector::new(1).unwrap();
        s.apply_gate(GateKind::Rx, 0, None, PI).unwrap();
        assert!(close(s.amplitudes()[0], ZERO));
        assert!(close(s.amplitudes()[1], C64::new(0.0, -1.0)));
    }

    #[test]
    fn rz_is_a_phase_on_ground_state() {
        let mut s = StateVector::new(1).unwrap();
        s.apply_gate(GateKind::Rz, 0, None, 1.234).unwrap();
        assert!((s.amplitudes()[0].norm() - 1.0).abs() < 1e-15);
        assert_eq!(s.amplitudes()[1], ZERO);
    }

    #[test]
    fn cnot_truth_table() {
        // Control qubit 0 set, target qubit 1 clear: basis index 0b01.
        let mut s = StateVector::basis(2, 0b01).unwrap();
        s.apply_gate(GateKind::Cnot, 1, Some(0), 0.0).unwrap();
        assert_eq!(s, StateVector::basis(2, 0b11).unwrap());
        // Control clear: nothing happens.
        let mut s = StateVector::basis(2, 0b10).unwrap();
        s.apply_gate(GateKind::Cnot, 1, Some(0), 0.0).unwrap();
        assert_eq!(s, StateVector::basis(2, 0b10).unwrap());
    }

    #[test]
    fn gate_argument_errors() {
        let mut s = StateVector::new(2).unwrap();
        assert!(matches!(
            s.apply_gate(GateKind::Rx, 2, None, 0.1),
            Err(Error::Index { .. })
        ));
        assert!(matches!(
            s.apply_gate(GateKind::Crx, 0, Some(5), 0.1),
            Err(Error::Index { .. })
        ));
        assert!(matches!(
            s.apply_gate(GateKind::Rx, 0, None, f64::NAN),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            s.apply_gate(GateKind::Cnot, 0, Some(0), 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            s.apply_gate(GateKind::Crz, 0, None, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn z_expectation_examples() {
        assert_eq!(StateVector::new(1).unwrap().expectation_z(0).unwrap(), 1.0);
        assert!(bell().expectation_z(1).unwrap().abs() < 1e-15);
        for k in 0..100 {
            let theta = -PI + 2.0 * PI * k as f64 / 99.0;
            let mut s = StateVector::new(1).unwrap();
            s.apply_gate(GateKind::Rx, 0, None, theta).unwrap();
            assert!((s.expectation_z(0).unwrap() - theta.cos()).abs() < 1e-10);
        }
        assert!(StateVector::new(2).unwrap().expectation_z(2).is_err());
    }

    #[test]
    fn measurement_probabilities() {
        let s = StateVector::new(1).unwrap();
        assert_eq!(s.measure_probability(0, 1).unwrap(), 0.0);
        let mut s = StateVector::new(1).unwrap();
        s.apply_gate(GateKind::Rx, 0, None, FRAC_PI_2).unwrap();
        assert!((s.measure_probability(0, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!(s.measure_probability(1, 0).is_err());
        assert!(s.measure_probability(0, 2).is_err());
    }

    #[test]
    fn bell_collapse() {
        let mut s = bell();
        s.collapse(0, 1).unwrap();
        assert!(close(s.amplitudes()[3], ONE));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn impossible_collapse_is_rejected() {
        let mut s = StateVector::new(1).unwrap();
        assert!(matches!(s.collapse(0, 1), Err(Error::Collapse { .. })));
    }

    #[test]
    fn collapse_superposition_to_zero() {
        let mut s = StateVector::new(1).unwrap();
        s.apply_gate(GateKind::Rx, 0, None, FRAC_PI_2).unwrap();
        s.collapse(0, 0).unwrap();
        assert!((s.amplitudes()[0].norm() - 1.0).abs() < 1e-12);
        assert_eq!(s.amplitudes()[1], ZERO);
    }

    #[test]
    fn from_amplitudes_validates() {
        assert!(StateVector::from_amplitudes(vec![ONE, ONE]).is_err());
        assert!(StateVector::from_amplitudes(vec![ONE, ZERO, ZERO]).is_err());
    }
}
