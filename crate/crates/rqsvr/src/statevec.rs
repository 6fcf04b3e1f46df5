//! Dense statevector simulation.
//!
//! A register of `q` qubits is a complex amplitude vector of length `2^q`.
//! Qubit 0 is the *most significant* bit of the basis index, so a basis
//! state reads left to right like the ket notation: `|q0 q1 ... q_{n-1}⟩`.
//!
//! Gates are applied in place with stride arithmetic; no `2^q x 2^q`
//! matrices are materialized at runtime. Measurement sampling uses
//! inverse-CDF draws from a ChaCha stream so that results are reproducible
//! across platforms for a fixed 64-bit seed.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Modulus tolerance for diagonal gate entries.
pub const UNITARY_TOL: f64 = 1e-10;

/// Hard cap on register width; beyond this the dense representation is
/// pointless on a workstation anyway.
pub const MAX_QUBITS: usize = 26;

#[derive(Debug, Error)]
pub enum StateVecError {
    #[error("number of qubits must be in 1..={MAX_QUBITS}, got {0}")]
    BadQubitCount(usize),
    #[error("basis index {index} out of range for {num_qubits} qubits")]
    BasisIndexOutOfRange { index: usize, num_qubits: usize },
    #[error("gate touches qubit {qubit} but the register has {num_qubits} qubits")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("gate targets or controls repeat a qubit")]
    DuplicateQubit,
    #[error("diagonal gate needs 2^k entries for k targets, got {got} for {targets} targets")]
    BadDiagonalLength { got: usize, targets: usize },
    #[error("diagonal entry {index} has modulus {modulus}, not 1 within {UNITARY_TOL}")]
    NonUnitaryDiagonal { index: usize, modulus: f64 },
    #[error("gate kind {kind} takes exactly one target, got {got}")]
    BadTargetCount { kind: &'static str, got: usize },
    #[error("circuit is for {circuit} qubits, state has {state}")]
    QubitCountMismatch { circuit: usize, state: usize },
    #[error("sampling requires at least one shot")]
    ZeroShots,
}

/// What a gate does, independent of where it acts.
#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    /// Hadamard.
    H,
    /// Pauli X.
    X,
    /// Rotation about X: `exp(-i θ X / 2)`.
    Rx(f64),
    /// Rotation about Y: `exp(-i θ Y / 2)`.
    Ry(f64),
    /// Diagonal unitary over the target qubits; entries indexed by the
    /// targets' bits in target order (first target is the most significant
    /// bit of the entry index). All entries must have modulus 1.
    Diagonal(Vec<Complex64>),
}

impl GateKind {
    fn name(&self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::Rx(_) => "RX",
            GateKind::Ry(_) => "RY",
            GateKind::Diagonal(_) => "diagonal",
        }
    }
}

/// A gate placed on specific qubits, optionally conditioned on control
/// qubits being `|1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub controls: Vec<usize>,
}

impl GateOp {
    pub fn new(kind: GateKind, targets: Vec<usize>, controls: Vec<usize>) -> Result<Self, StateVecError> {
        let mut seen = targets.clone();
        seen.extend_from_slice(&controls);
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(StateVecError::DuplicateQubit);
        }
        match &kind {
            GateKind::H | GateKind::X | GateKind::Rx(_) | GateKind::Ry(_) => {
                if targets.len() != 1 {
                    return Err(StateVecError::BadTargetCount {
                        kind: kind.name(),
                        got: targets.len(),
                    });
                }
            }
            GateKind::Diagonal(entries) => {
                if targets.is_empty() || entries.len() != 1usize << targets.len() {
                    return Err(StateVecError::BadDiagonalLength {
                        got: entries.len(),
                        targets: targets.len(),
                    });
                }
                for (i, e) in entries.iter().enumerate() {
                    let m = e.norm();
                    if (m - 1.0).abs() > UNITARY_TOL {
                        return Err(StateVecError::NonUnitaryDiagonal { index: i, modulus: m });
                    }
                }
            }
        }
        Ok(GateOp { kind, targets, controls })
    }

    pub fn h(target: usize) -> Self {
        GateOp::new(GateKind::H, vec![target], vec![]).unwrap()
    }

    pub fn x(target: usize) -> Self {
        GateOp::new(GateKind::X, vec![target], vec![]).unwrap()
    }

    pub fn rx(theta: f64, target: usize) -> Self {
        GateOp::new(GateKind::Rx(theta), vec![target], vec![]).unwrap()
    }

    pub fn ry(theta: f64, target: usize) -> Self {
        GateOp::new(GateKind::Ry(theta), vec![target], vec![]).unwrap()
    }

    pub fn cx(control: usize, target: usize) -> Self {
        GateOp::new(GateKind::X, vec![target], vec![control]).unwrap()
    }

    pub fn diagonal(entries: Vec<Complex64>, targets: Vec<usize>) -> Result<Self, StateVecError> {
        GateOp::new(GateKind::Diagonal(entries), targets, vec![])
    }

    /// Same gate conditioned on additional control qubits.
    pub fn controlled_by(mut self, controls: &[usize]) -> Result<Self, StateVecError> {
        self.controls.extend_from_slice(controls);
        GateOp::new(self.kind, self.targets, self.controls)
    }

    /// The inverse gate. Controls are preserved.
    pub fn dagger(&self) -> Self {
        let kind = match &self.kind {
            GateKind::H => GateKind::H,
            GateKind::X => GateKind::X,
            GateKind::Rx(t) => GateKind::Rx(-t),
            GateKind::Ry(t) => GateKind::Ry(-t),
            GateKind::Diagonal(entries) => {
                GateKind::Diagonal(entries.iter().map(Complex64::conj).collect())
            }
        };
        GateOp {
            kind,
            targets: self.targets.clone(),
            controls: self.controls.clone(),
        }
    }

    fn max_qubit(&self) -> usize {
        self.targets
            .iter()
            .chain(self.controls.iter())
            .copied()
            .max()
            .unwrap_or(0)
    }
}

/// An ordered gate sequence on a fixed-width register.
#[derive(Debug, Clone, Default)]
pub struct Circuit {
    pub num_qubits: usize,
    pub ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self, StateVecError> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(StateVecError::BadQubitCount(num_qubits));
        }
        Ok(Circuit { num_qubits, ops: Vec::new() })
    }

    pub fn push(&mut self, op: GateOp) -> Result<(), StateVecError> {
        let q = op.max_qubit();
        if q >= self.num_qubits {
            return Err(StateVecError::QubitOutOfRange { qubit: q, num_qubits: self.num_qubits });
        }
        self.ops.push(op);
        Ok(())
    }

    pub fn extend(&mut self, ops: impl IntoIterator<Item = GateOp>) -> Result<(), StateVecError> {
        for op in ops {
            self.push(op)?;
        }
        Ok(())
    }
}

/// Complex amplitude vector of a `q`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Basis state `|basis_index⟩` on `num_qubits` qubits.
    pub fn basis(num_qubits: usize, basis_index: usize) -> Result<Self, StateVecError> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(StateVecError::BadQubitCount(num_qubits));
        }
        let dim = 1usize << num_qubits;
        if basis_index >= dim {
            return Err(StateVecError::BasisIndexOutOfRange { index: basis_index, num_qubits });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[basis_index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { num_qubits, amps })
    }

    /// Build a state from raw amplitudes; the caller is responsible for
    /// normalization (checked to 1e-6 to catch outright mistakes).
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, StateVecError> {
        let dim = amps.len();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(StateVecError::BadQubitCount(0));
        }
        let num_qubits = dim.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(StateVecError::BadQubitCount(num_qubits));
        }
        debug_assert!((amps.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-6);
        Ok(StateVector { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Bit position of `qubit` inside a basis index (qubit 0 is the MSB).
    #[inline]
    fn mask(&self, qubit: usize) -> usize {
        1usize << (self.num_qubits - 1 - qubit)
    }

    /// Apply a single gate in place.
    pub fn apply_gate(&mut self, op: &GateOp) -> Result<(), StateVecError> {
        let q = op.max_qubit();
        if q >= self.num_qubits {
            return Err(StateVecError::QubitOutOfRange { qubit: q, num_qubits: self.num_qubits });
        }
        let ctrl_mask: usize = op.controls.iter().map(|&c| self.mask(c)).sum();
        match &op.kind {
            GateKind::H => {
                let f = std::f64::consts::FRAC_1_SQRT_2;
                self.apply_1q(op.targets[0], ctrl_mask, |a, b| (f * (a + b), f * (a - b)));
            }
            GateKind::X => {
                self.apply_1q(op.targets[0], ctrl_mask, |a, b| (b, a));
            }
            GateKind::Rx(theta) => {
                let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                let mis = Complex64::new(0.0, -s);
                self.apply_1q(op.targets[0], ctrl_mask, |a, b| (c * a + mis * b, mis * a + c * b));
            }
            GateKind::Ry(theta) => {
                let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
                self.apply_1q(op.targets[0], ctrl_mask, |a, b| (c * a - s * b, s * a + c * b));
            }
            GateKind::Diagonal(entries) => {
                let masks: Vec<usize> = op.targets.iter().map(|&t| self.mask(t)).collect();
                let k = masks.len();
                for b in 0..self.amps.len() {
                    if b & ctrl_mask != ctrl_mask {
                        continue;
                    }
                    let mut key = 0usize;
                    for (t, &m) in masks.iter().enumerate() {
                        if b & m != 0 {
                            key |= 1 << (k - 1 - t);
                        }
                    }
                    self.amps[b] *= entries[key];
                }
            }
        }
        Ok(())
    }

    fn apply_1q(
        &mut self,
        target: usize,
        ctrl_mask: usize,
        f: impl Fn(Complex64, Complex64) -> (Complex64, Complex64),
    ) {
        let mask = self.mask(target);
        for b in 0..self.amps.len() {
            if b & mask != 0 || b & ctrl_mask != ctrl_mask {
                continue;
            }
            let i1 = b | mask;
            let (a0, a1) = (self.amps[b], self.amps[i1]);
            let (n0, n1) = f(a0, a1);
            self.amps[b] = n0;
            self.amps[i1] = n1;
        }
    }

    /// Apply a full circuit, gate by gate.
    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<(), StateVecError> {
        if circuit.num_qubits != self.num_qubits {
            return Err(StateVecError::QubitCountMismatch {
                circuit: circuit.num_qubits,
                state: self.num_qubits,
            });
        }
        for op in &circuit.ops {
            self.apply_gate(op)?;
        }
        Ok(())
    }

    /// Exact measurement distribution: entry `j` is `|amps[j]|^2`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Draw `shots` i.i.d. terminal measurements. Deterministic for a fixed
    /// seed; counts sum to `shots`.
    pub fn sample(&self, shots: u64, seed: u64) -> Result<MeasurementCounts, StateVecError> {
        if shots == 0 {
            return Err(StateVecError::ZeroShots);
        }
        let probs = self.probabilities();
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc);
        }
        let total = acc;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        for _ in 0..shots {
            let u: f64 = rng.random::<f64>() * total;
            let idx = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
            *counts.entry(idx).or_insert(0) += 1;
        }
        Ok(MeasurementCounts { shots, counts })
    }
}

/// Histogram of terminal measurements over basis-state indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementCounts {
    pub shots: u64,
    pub counts: BTreeMap<usize, u64>,
}

impl MeasurementCounts {
    pub fn frequency(&self, basis_index: usize) -> f64 {
        *self.counts.get(&basis_index).unwrap_or(&0) as f64 / self.shots as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn basis_states() {
        let s = StateVector::basis(1, 0).unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)]);

        let s = StateVector::basis(2, 3).unwrap();
        assert_eq!(s.amplitudes()[3], c(1.0, 0.0));
        assert_eq!(s.amplitudes().iter().filter(|a| a.norm() > 0.0).count(), 1);

        let s = StateVector::basis(3, 0).unwrap();
        assert_eq!(s.amplitudes().len(), 8);
        assert_eq!(s.amplitudes()[0], c(1.0, 0.0));
    }

    #[test]
    fn basis_index_out_of_range() {
        assert!(matches!(
            StateVector::basis(2, 4),
            Err(StateVecError::BasisIndexOutOfRange { .. })
        ));
        assert!(matches!(StateVector::basis(0, 0), Err(StateVecError::BadQubitCount(0))));
    }

    #[test]
    fn hadamard_makes_equal_superposition() {
        let mut s = StateVector::basis(1, 0).unwrap();
        s.apply_gate(&GateOp::h(0)).unwrap();
        let f = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0] - c(f, 0.0)).norm() < EPS);
        assert!((s.amplitudes()[1] - c(f, 0.0)).norm() < EPS);
    }

    #[test]
    fn cnot_flips_target_when_control_set() {
        // |10⟩ -> |11⟩ with qubit 0 as control.
        let mut s = StateVector::basis(2, 0b10).unwrap();
        s.apply_gate(&GateOp::cx(0, 1)).unwrap();
        assert!((s.amplitudes()[0b11] - c(1.0, 0.0)).norm() < EPS);
    }

    #[test]
    fn rx_full_turn_is_global_phase_minus_one() {
        // Oracle: exp(-iθX/2) computed by a brute-force matrix exponential.
        let theta = 2.0 * std::f64::consts::PI;
        let x = [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        // exp(A) by scaled Taylor series on the 2x2 A = -i θ/2 X.
        let a = [
            [x[0][0] * c(0.0, -theta / 2.0), x[0][1] * c(0.0, -theta / 2.0)],
            [x[1][0] * c(0.0, -theta / 2.0), x[1][1] * c(0.0, -theta / 2.0)],
        ];
        let mut exp = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        let mut term = exp;
        for k in 1..64 {
            let mut next = [[c(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for l in 0..2 {
                        next[i][j] += term[i][l] * a[l][j];
                    }
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    next[i][j] /= c(k as f64, 0.0);
                    exp[i][j] += next[i][j];
                }
            }
            term = next;
        }

        let mut s = StateVector::basis(1, 0).unwrap();
        s.apply_gate(&GateOp::h(0)).unwrap();
        let before = s.clone();
        s.apply_gate(&GateOp::rx(theta, 0)).unwrap();

        // Against the exponential oracle applied to the same input.
        let oracle0 = exp[0][0] * before.amplitudes()[0] + exp[0][1] * before.amplitudes()[1];
        let oracle1 = exp[1][0] * before.amplitudes()[0] + exp[1][1] * before.amplitudes()[1];
        assert!((s.amplitudes()[0] - oracle0).norm() < 1e-10);
        assert!((s.amplitudes()[1] - oracle1).norm() < 1e-10);

        // Global phase -1, probabilities unchanged.
        for (a_new, a_old) in s.amplitudes().iter().zip(before.amplitudes()) {
            assert!((a_new + a_old).norm() < 1e-10);
        }
    }

    #[test]
    fn empty_circuit_is_identity() {
        let circuit = Circuit::new(2).unwrap();
        let mut s = StateVector::basis(2, 1).unwrap();
        let before = s.clone();
        s.apply_circuit(&circuit).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn bell_state_amplitudes() {
        let mut circuit = Circuit::new(2).unwrap();
        circuit.push(GateOp::h(0)).unwrap();
        circuit.push(GateOp::cx(0, 1)).unwrap();
        let mut s = StateVector::basis(2, 0).unwrap();
        s.apply_circuit(&circuit).unwrap();
        let f = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0] - c(f, 0.0)).norm() < EPS);
        assert!((s.amplitudes()[1]).norm() < EPS);
        assert!((s.amplitudes()[2]).norm() < EPS);
        assert!((s.amplitudes()[3] - c(f, 0.0)).norm() < EPS);
    }

    #[test]
    fn three_qubit_cascade_reaches_ghz() {
        // H on q0, CNOTs fanning out, then zero-angle rotations.
        let mut circuit = Circuit::new(3).unwrap();
        circuit.push(GateOp::h(0)).unwrap();
        circuit.push(GateOp::cx(0, 1)).unwrap();
        circuit.push(GateOp::cx(0, 2)).unwrap();
        circuit.push(GateOp::rx(0.0, 1)).unwrap();
        circuit.push(GateOp::ry(0.0, 2)).unwrap();
        let mut s = StateVector::basis(3, 0).unwrap();
        s.apply_circuit(&circuit).unwrap();
        let f = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0] - c(f, 0.0)).norm() < EPS);
        assert!((s.amplitudes()[7] - c(f, 0.0)).norm() < EPS);
        for j in 1..7 {
            assert!(s.amplitudes()[j].norm() < EPS);
        }
    }

    #[test]
    fn probabilities_are_squared_moduli() {
        let f = std::f64::consts::FRAC_1_SQRT_2;
        let s = StateVector::from_amplitudes(vec![c(f, 0.0), c(0.0, -f)]).unwrap();
        let p = s.probabilities();
        assert!((p[0] - 0.5).abs() < EPS);
        assert!((p[1] - 0.5).abs() < EPS);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sampling_deterministic_distribution() {
        let s = StateVector::basis(2, 0).unwrap();
        let counts = s.sample(100, 7).unwrap();
        assert_eq!(counts.counts.get(&0), Some(&100));
        assert_eq!(counts.counts.len(), 1);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let mut s = StateVector::basis(2, 0).unwrap();
        s.apply_gate(&GateOp::h(0)).unwrap();
        s.apply_gate(&GateOp::cx(0, 1)).unwrap();
        let a = s.sample(1000, 99).unwrap();
        let b = s.sample(1000, 99).unwrap();
        assert_eq!(a, b);
        let total: u64 = a.counts.values().sum();
        assert_eq!(total, 1000);
    }

    #[test]
    fn bell_sampling_frequencies() {
        let mut s = StateVector::basis(2, 0).unwrap();
        s.apply_gate(&GateOp::h(0)).unwrap();
        s.apply_gate(&GateOp::cx(0, 1)).unwrap();
        let counts = s.sample(100_000, 4242).unwrap();
        // Binomial(1e5, 0.5): 5 sigma is ~0.0079, inside the 0.01 bound.
        assert!((counts.frequency(0) - 0.5).abs() < 0.01);
        assert!((counts.frequency(3) - 0.5).abs() < 0.01);
        assert_eq!(counts.frequency(1), 0.0);
        assert_eq!(counts.frequency(2), 0.0);
    }

    #[test]
    fn zero_shots_rejected() {
        let s = StateVector::basis(1, 0).unwrap();
        assert!(matches!(s.sample(0, 1), Err(StateVecError::ZeroShots)));
    }

    #[test]
    fn diagonal_gate_validation() {
        assert!(matches!(
            GateOp::diagonal(vec![c(1.0, 0.0); 3], vec![0, 1]),
            Err(StateVecError::BadDiagonalLength { .. })
        ));
        assert!(matches!(
            GateOp::diagonal(vec![c(0.5, 0.0), c(1.0, 0.0)], vec![0]),
            Err(StateVecError::NonUnitaryDiagonal { .. })
        ));
        assert!(matches!(
            GateOp::new(GateKind::X, vec![1], vec![1]),
            Err(StateVecError::DuplicateQubit)
        ));
    }

    #[test]
    fn circuit_rejects_out_of_range_qubits() {
        let mut circuit = Circuit::new(2).unwrap();
        assert!(matches!(
            circuit.push(GateOp::h(2)),
            Err(StateVecError::QubitOutOfRange { .. })
        ));
        let circuit3 = Circuit::new(3).unwrap();
        let mut s = StateVector::basis(2, 0).unwrap();
        assert!(matches!(
            s.apply_circuit(&circuit3),
            Err(StateVecError::QubitCountMismatch { .. })
        ));
    }

    #[test]
    fn dagger_inverts_gates() {
        let mut s = StateVector::basis(2, 0).unwrap();
        s.apply_gate(&GateOp::h(0)).unwrap();
        s.apply_gate(&GateOp::h(1)).unwrap();
        let start = s.clone();
        let ops = vec![
            GateOp::rx(0.7, 0),
            GateOp::ry(1.3, 1),
            GateOp::diagonal(vec![c(1.0, 0.0), c(0.0, 1.0)], vec![1]).unwrap(),
            GateOp::cx(0, 1),
        ];
        for op in &ops {
            s.apply_gate(op).unwrap();
        }
        for op in ops.iter().rev() {
            s.apply_gate(&op.dagger()).unwrap();
        }
        for (a, b) in s.amplitudes().iter().zip(start.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
