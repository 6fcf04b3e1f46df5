//! Inner-product estimation on the statevector simulator.
//!
//! The regressor evaluates `w·φ(x) + b` by encoding both vectors into
//! diagonal unitaries and measuring. The pieces:
//!
//! - **Sign expansion** splits a signed vector into nonnegative plus/minus
//!   parts indexed by an extra sign qubit, so magnitudes can live in
//!   measurement probabilities while signs are recovered classically.
//! - **Diagonal embedding** `Δ(v)` stores a vector in the phases of a
//!   diagonal unitary: entry `exp(-i·arccos(v_j))` has real part exactly
//!   `v_j`; padding entries are `-i` (real part zero).
//! - **Real-part extraction** `R(S)` sandwiches the select operation
//!   `|0⟩⟨0|⊗S + |1⟩⟨1|⊗S†` between Hadamards on a fresh ancilla; on the
//!   ancilla-0 branch this applies `(S + S†)/2 = Re(S)`.
//!
//! The assembled circuit acts on `⌈log₂ d⌉` index qubits, two sign qubits
//! (one for `w`, one for `φ`) and three ancillas. Outcomes whose ancilla
//! bits are all zero carry label `(-1)^(s_w ⊕ s_φ)`; everything else is
//! discarded but kept in the shot budget. The labeled probability
//! difference, scaled by a constant computed at build time, equals `w·φ`
//! exactly on exact probabilities.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureParams, PHI_DIM};
use crate::statevec::{Circuit, GateOp, StateVecError, StateVector, MAX_QUBITS};
use crate::svr::SvrFit;

/// Version tag of the serialized model document.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("vector dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("w has length {w} but phi has length {phi}")]
    LengthMismatch { w: usize, phi: usize },
    #[error("entry {index} = {value} lies outside [-1, 1]; normalize first")]
    EntryOutOfRange { index: usize, value: f64 },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("degenerate input: {0} has max-norm 0")]
    ZeroNorm(&'static str),
    #[error("dimension {dim} needs {qubits} qubits, more than the supported {MAX_QUBITS}")]
    TooManyQubits { dim: usize, qubits: usize },
    #[error("model weight vector has length {got}, feature map produces {PHI_DIM}")]
    BadModelDimension { got: usize },
    #[error(transparent)]
    Sim(#[from] StateVecError),
    #[error("unsupported model format version {got} (expected {MODEL_FORMAT_VERSION})")]
    UnsupportedFormatVersion { got: u32 },
    #[error("malformed model document: {0}")]
    MalformedModel(#[from] serde_json::Error),
}

/// A signed vector split into nonnegative parts: `v = plus - minus`,
/// with at most one part nonzero per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct SignExpanded {
    pub dim: usize,
    pub minus: Vec<f64>,
    pub plus: Vec<f64>,
    /// `[minus; plus]`, length `2 * dim`.
    pub concatenated: Vec<f64>,
}

/// Split `v ∈ [-1,1]^d` into plus/minus parts.
pub fn sign_expand(v: &[f64]) -> Result<SignExpanded, CircuitError> {
    if v.len() < 2 {
        return Err(CircuitError::DimensionTooSmall(v.len()));
    }
    for (i, &x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(CircuitError::NonFinite(i));
        }
        if x.abs() > 1.0 {
            return Err(CircuitError::EntryOutOfRange { index: i, value: x });
        }
    }
    let plus: Vec<f64> = v.iter().map(|&x| x.max(0.0)).collect();
    let minus: Vec<f64> = v.iter().map(|&x| (-x).max(0.0)).collect();
    let mut concatenated = minus.clone();
    concatenated.extend_from_slice(&plus);
    Ok(SignExpanded { dim: v.len(), minus, plus, concatenated })
}

/// A vector stored in the diagonal of a unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalEmbedding {
    pub source: Vec<f64>,
    /// `2^n` with `n = ⌈log₂ d⌉`.
    pub padded_dim: usize,
    pub entries: Vec<Complex64>,
}

/// Embed `v ∈ [-1,1]^d` as a diagonal unitary: entry `j` is
/// `exp(-i·arccos(v_j))` for `j < d` and `-i` on padding.
pub fn delta_embedding(v: &[f64]) -> Result<DiagonalEmbedding, CircuitError> {
    if v.len() < 2 {
        return Err(CircuitError::DimensionTooSmall(v.len()));
    }
    for (i, &x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(CircuitError::NonFinite(i));
        }
        if x.abs() > 1.0 {
            return Err(CircuitError::EntryOutOfRange { index: i, value: x });
        }
    }
    let n = v.len().next_power_of_two().trailing_zeros() as usize;
    let padded_dim = 1usize << n;
    let mut entries = Vec::with_capacity(padded_dim);
    for j in 0..padded_dim {
        if j < v.len() {
            entries.push(Complex64::from_polar(1.0, -v[j].acos()));
        } else {
            entries.push(Complex64::new(0.0, -1.0));
        }
    }
    Ok(DiagonalEmbedding { source: v.to_vec(), padded_dim, entries })
}

impl DiagonalEmbedding {
    pub fn num_qubits(&self) -> usize {
        self.padded_dim.trailing_zeros() as usize
    }

    /// Realize the embedding as a diagonal gate on the given qubits.
    pub fn to_gate(&self, targets: Vec<usize>) -> Result<GateOp, CircuitError> {
        Ok(GateOp::diagonal(self.entries.clone(), targets)?)
    }
}

/// Wrap a unitary (given as a circuit on `n` qubits) into its real-part
/// extractor on `n + 1` qubits: the fresh ancilla is qubit 0 and the body
/// moves to qubits `1..=n`. Applying the result to `|0⟩⊗|ψ⟩` leaves
/// `Re(S)|ψ⟩` on the ancilla-0 branch.
pub fn real_part_extractor(s: &Circuit) -> Result<Circuit, CircuitError> {
    let shifted: Vec<GateOp> = s.ops.iter().map(|op| shift_gate(op, 1)).collect();
    let mut out = Circuit::new(s.num_qubits + 1)?;
    out.extend(real_part_gates(&shifted, 0))?;
    Ok(out)
}

fn shift_gate(op: &GateOp, offset: usize) -> GateOp {
    GateOp::new(
        op.kind.clone(),
        op.targets.iter().map(|q| q + offset).collect(),
        op.controls.iter().map(|q| q + offset).collect(),
    )
    .expect("shifting preserves gate validity")
}

/// Gate sequence for `(H ⊗ I)(|0⟩⟨0|⊗S + |1⟩⟨1|⊗S†)(H ⊗ I)` where the body
/// `S` is a gate list not touching `ancilla`.
fn real_part_gates(body: &[GateOp], ancilla: usize) -> Vec<GateOp> {
    let mut gates = Vec::with_capacity(2 * body.len() + 4);
    gates.push(GateOp::h(ancilla));
    // S on the ancilla-0 sector.
    gates.push(GateOp::x(ancilla));
    for op in body {
        gates.push(op.clone().controlled_by(&[ancilla]).expect("ancilla is fresh"));
    }
    gates.push(GateOp::x(ancilla));
    // S† on the ancilla-1 sector.
    for op in body.iter().rev() {
        gates.push(op.dagger().controlled_by(&[ancilla]).expect("ancilla is fresh"));
    }
    gates.push(GateOp::h(ancilla));
    gates
}

/// Wire plan of the estimation circuit. Qubit 0 is the most significant
/// bit of a measured basis index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitLayout {
    pub feature_dim: usize,
    /// `m = ⌈log₂ d⌉`.
    pub index_qubits: usize,
    /// Outer extractor ancilla, branch-select qubit of the weight unitary,
    /// inner extractor ancilla.
    pub ancillas: [usize; 3],
    pub w_sign_qubit: usize,
    pub phi_sign_qubit: usize,
    /// First index qubit; the index register occupies the trailing qubits.
    pub index_start: usize,
    pub total_qubits: usize,
}

impl CircuitLayout {
    pub fn for_dim(feature_dim: usize) -> Result<Self, CircuitError> {
        if feature_dim < 2 {
            return Err(CircuitError::DimensionTooSmall(feature_dim));
        }
        let m = feature_dim.next_power_of_two().trailing_zeros() as usize;
        let total = m + 5;
        if total > MAX_QUBITS {
            return Err(CircuitError::TooManyQubits { dim: feature_dim, qubits: total });
        }
        Ok(CircuitLayout {
            feature_dim,
            index_qubits: m,
            ancillas: [0, 1, 2],
            w_sign_qubit: 3,
            phi_sign_qubit: 4,
            index_start: 5,
            total_qubits: total,
        })
    }

    #[inline]
    fn bit(&self, outcome: usize, qubit: usize) -> usize {
        (outcome >> (self.total_qubits - 1 - qubit)) & 1
    }

    /// Index-register value encoded in an outcome.
    #[inline]
    pub fn outcome_index(&self, outcome: usize) -> usize {
        outcome & ((1 << self.index_qubits) - 1)
    }
}

/// Classification of a measured basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeLabel {
    Plus,
    Minus,
    Discard,
}

/// Classical post-processing map: outcome labels plus the scale constant
/// that turns the labeled probability difference into `w·φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub layout: CircuitLayout,
    /// `2^(m+2) · ‖w‖∞ · ‖φ‖∞`: one factor 2 per sign-qubit Hadamard,
    /// `2^m` for the index superposition, and the two max-norms undo the
    /// embedding normalizations.
    pub scale: f64,
}

impl Reconstruction {
    /// Label of a basis outcome: a successful run has every ancilla in
    /// `|0⟩` and an in-range index; the sign qubits then decide the sign.
    pub fn label(&self, outcome: usize) -> OutcomeLabel {
        let l = &self.layout;
        if l.ancillas.iter().any(|&a| l.bit(outcome, a) != 0) {
            return OutcomeLabel::Discard;
        }
        if l.outcome_index(outcome) >= l.feature_dim {
            return OutcomeLabel::Discard;
        }
        if l.bit(outcome, l.w_sign_qubit) == l.bit(outcome, l.phi_sign_qubit) {
            OutcomeLabel::Plus
        } else {
            OutcomeLabel::Minus
        }
    }

    /// Inner product from exact outcome probabilities.
    pub fn from_probabilities(&self, probs: &[f64]) -> f64 {
        let mut signed = 0.0;
        for (outcome, &p) in probs.iter().enumerate() {
            match self.label(outcome) {
                OutcomeLabel::Plus => signed += p,
                OutcomeLabel::Minus => signed -= p,
                OutcomeLabel::Discard => {}
            }
        }
        self.scale * signed
    }

    /// Standard error a `shots`-shot estimate would have, computed from
    /// the exact outcome distribution instead of a sample.
    pub fn stderr_from_probabilities(&self, probs: &[f64], shots: u64) -> f64 {
        let mut signed = 0.0;
        let mut mass = 0.0;
        for (outcome, &p) in probs.iter().enumerate() {
            match self.label(outcome) {
                OutcomeLabel::Plus => {
                    signed += p;
                    mass += p;
                }
                OutcomeLabel::Minus => {
                    signed -= p;
                    mass += p;
                }
                OutcomeLabel::Discard => {}
            }
        }
        let variance = (mass - signed * signed).max(0.0) / shots as f64;
        self.scale * variance.sqrt()
    }

    /// Inner-product estimate and multinomial plug-in standard error from
    /// measured counts. Discarded outcomes stay in the shot budget.
    pub fn from_counts(&self, counts: &crate::statevec::MeasurementCounts) -> (f64, f64) {
        let shots = counts.shots as f64;
        let mut signed = 0.0;
        let mut mass = 0.0;
        for (&outcome, &n) in &counts.counts {
            let f = n as f64 / shots;
            match self.label(outcome) {
                OutcomeLabel::Plus => {
                    signed += f;
                    mass += f;
                }
                OutcomeLabel::Minus => {
                    signed -= f;
                    mass += f;
                }
                OutcomeLabel::Discard => {}
            }
        }
        let variance = (mass - signed * signed).max(0.0) / shots;
        (self.scale * signed, self.scale * variance.sqrt())
    }
}

/// Diagonal entries of `Δ(√(v±))` over a (sign qubit, index register)
/// block: sign sector 0 holds the minus part, sector 1 the plus part, and
/// per-sector padding is `-i`.
fn signed_sqrt_delta_entries(normalized: &[f64], index_qubits: usize) -> Vec<Complex64> {
    let block = 1usize << index_qubits;
    let mut entries = Vec::with_capacity(2 * block);
    for sector in 0..2 {
        for j in 0..block {
            if j < normalized.len() {
                let part = if sector == 0 {
                    (-normalized[j]).max(0.0)
                } else {
                    normalized[j].max(0.0)
                };
                entries.push(Complex64::from_polar(1.0, -part.sqrt().acos()));
            } else {
                entries.push(Complex64::new(0.0, -1.0));
            }
        }
    }
    entries
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))
}

/// The weight operator as a standalone circuit on `m + 2` qubits
/// (branch-select qubit, sign qubit, index register): applies the
/// embedding of `√(w±)` on the branch-0 sector and its adjoint on
/// branch 1. `w` is normalized by its max-norm internally.
pub fn weight_select_circuit(w: &[f64]) -> Result<Circuit, CircuitError> {
    if w.len() < 2 {
        return Err(CircuitError::DimensionTooSmall(w.len()));
    }
    let norm = inf_norm(w);
    if norm == 0.0 {
        return Err(CircuitError::ZeroNorm("w"));
    }
    let normalized: Vec<f64> = w.iter().map(|&x| x / norm).collect();
    let m = w.len().next_power_of_two().trailing_zeros() as usize;
    let delta = signed_sqrt_delta_entries(&normalized, m);
    let mut entries = delta.clone();
    entries.extend(delta.iter().map(Complex64::conj));
    let mut circuit = Circuit::new(m + 2)?;
    circuit.push(GateOp::diagonal(entries, (0..m + 2).collect())?)?;
    Ok(circuit)
}

/// The feature extractor as a standalone circuit on `m + 2` qubits
/// (extraction ancilla, sign qubit, index register): the real-part
/// extractor wrapped around the embedding of `√(φ± / ‖φ‖∞)`.
pub fn feature_extractor_circuit(phi: &[f64]) -> Result<Circuit, CircuitError> {
    if phi.len() < 2 {
        return Err(CircuitError::DimensionTooSmall(phi.len()));
    }
    let norm = inf_norm(phi);
    if norm == 0.0 {
        return Err(CircuitError::ZeroNorm("phi"));
    }
    let normalized: Vec<f64> = phi.iter().map(|&x| x / norm).collect();
    let m = phi.len().next_power_of_two().trailing_zeros() as usize;
    let mut inner = Circuit::new(m + 1)?;
    inner.push(GateOp::diagonal(
        signed_sqrt_delta_entries(&normalized, m),
        (0..m + 1).collect(),
    )?)?;
    real_part_extractor(&inner)
}

fn validate_pair(w: &[f64], phi: &[f64]) -> Result<(f64, f64), CircuitError> {
    if w.len() != phi.len() {
        return Err(CircuitError::LengthMismatch { w: w.len(), phi: phi.len() });
    }
    if w.len() < 2 {
        return Err(CircuitError::DimensionTooSmall(w.len()));
    }
    for (i, &x) in w.iter().enumerate() {
        if !x.is_finite() {
            return Err(CircuitError::NonFinite(i));
        }
    }
    for (i, &x) in phi.iter().enumerate() {
        if !x.is_finite() {
            return Err(CircuitError::NonFinite(i));
        }
    }
    let nw = inf_norm(w);
    let np = inf_norm(phi);
    if nw == 0.0 {
        return Err(CircuitError::ZeroNorm("w"));
    }
    if np == 0.0 {
        return Err(CircuitError::ZeroNorm("phi"));
    }
    Ok((nw, np))
}

/// Build the estimation circuit for a weight vector and a feature vector.
///
/// The circuit expects the initial state produced by [`initial_state`]:
/// ancillas and sign qubits in `|0⟩`, index register in the uniform
/// superposition. Its first gates open the sign qubits with Hadamards; the
/// rest is the real-part extractor applied to the product of the weight
/// unitary and the feature extractor.
pub fn build_rqsvr_circuit(
    w: &[f64],
    phi: &[f64],
) -> Result<(Circuit, CircuitLayout, Reconstruction), CircuitError> {
    let (norm_w, norm_phi) = validate_pair(w, phi)?;
    let layout = CircuitLayout::for_dim(w.len())?;
    let m = layout.index_qubits;

    let w_normalized: Vec<f64> = w.iter().map(|&x| x / norm_w).collect();
    let phi_normalized: Vec<f64> = phi.iter().map(|&x| x / norm_phi).collect();

    let index_targets: Vec<usize> = (0..m).map(|t| layout.index_start + t).collect();
    let [outer_anc, w_branch, inner_anc] = layout.ancillas;

    // U(x): real-part extractor around the feature embedding.
    let mut phi_targets = vec![layout.phi_sign_qubit];
    phi_targets.extend_from_slice(&index_targets);
    let phi_gate = GateOp::diagonal(signed_sqrt_delta_entries(&phi_normalized, m), phi_targets)?;
    let mut body = real_part_gates(std::slice::from_ref(&phi_gate), inner_anc);

    // W(w): branch-select between the weight embedding and its adjoint.
    let delta_w = signed_sqrt_delta_entries(&w_normalized, m);
    let mut w_entries = delta_w.clone();
    w_entries.extend(delta_w.iter().map(Complex64::conj));
    let mut w_targets = vec![w_branch, layout.w_sign_qubit];
    w_targets.extend_from_slice(&index_targets);
    body.push(GateOp::diagonal(w_entries, w_targets)?);

    let mut circuit = Circuit::new(layout.total_qubits)?;
    circuit.push(GateOp::h(layout.w_sign_qubit))?;
    circuit.push(GateOp::h(layout.phi_sign_qubit))?;
    circuit.extend(real_part_gates(&body, outer_anc))?;

    let scale = (1u64 << (m + 2)) as f64 * norm_w * norm_phi;
    let reconstruction = Reconstruction { layout: layout.clone(), scale };
    Ok((circuit, layout, reconstruction))
}

/// The state the estimation circuit expects: all ancillas and sign qubits
/// in `|0⟩`, index register in uniform superposition.
pub fn initial_state(layout: &CircuitLayout) -> StateVector {
    let dim = 1usize << layout.total_qubits;
    let block = 1usize << layout.index_qubits;
    let amp = Complex64::new(1.0 / (block as f64).sqrt(), 0.0);
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    for a in amps.iter_mut().take(block) {
        *a = amp;
    }
    StateVector::from_amplitudes(amps).expect("power-of-two length")
}

/// How a prediction or inner-product estimate is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMode {
    /// Exact outcome probabilities from the statevector.
    Exact,
    /// Finite measurement shots drawn with the given seed.
    Shots { shots: u64, seed: u64 },
}

/// An estimated inner product. `shots == 0` encodes exact mode, where the
/// standard error is zero by definition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotEstimate {
    pub value: f64,
    pub shots: u64,
    pub stderr: f64,
}

/// Estimate `w·φ` by simulating the estimation circuit.
pub fn estimate_inner_product(
    w: &[f64],
    phi: &[f64],
    mode: EstimateMode,
) -> Result<ShotEstimate, CircuitError> {
    let (circuit, layout, reconstruction) = build_rqsvr_circuit(w, phi)?;
    let mut state = initial_state(&layout);
    state.apply_circuit(&circuit)?;
    match mode {
        EstimateMode::Exact => {
            let value = reconstruction.from_probabilities(&state.probabilities());
            Ok(ShotEstimate { value, shots: 0, stderr: 0.0 })
        }
        EstimateMode::Shots { shots, seed } => {
            let counts = state.sample(shots, seed)?;
            let (value, stderr) = reconstruction.from_counts(&counts);
            Ok(ShotEstimate { value, shots, stderr })
        }
    }
}

/// A trained regressor: SVR weights and bias over the fitted feature map,
/// plus the wire plan of its estimation circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RqsvrModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub layout: CircuitLayout,
    pub features: FeatureParams,
}

/// One model evaluation; `stderr` is zero in exact mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    pub stderr: f64,
    pub shots: u64,
}

impl RqsvrModel {
    /// Assemble a model from trained weights and the feature map they were
    /// trained on.
    pub fn new(w: Vec<f64>, b: f64, features: FeatureParams) -> Result<Self, CircuitError> {
        if w.len() != PHI_DIM {
            return Err(CircuitError::BadModelDimension { got: w.len() });
        }
        let layout = CircuitLayout::for_dim(PHI_DIM)?;
        Ok(RqsvrModel { w, b, layout, features })
    }

    /// Convenience: take (w, b) straight from an SVR fit.
    pub fn from_fit(fit: &SvrFit, features: FeatureParams) -> Result<Self, CircuitError> {
        RqsvrModel::new(fit.w.clone(), fit.b, features)
    }

    pub fn norm_w(&self) -> f64 {
        inf_norm(&self.w)
    }

    /// Predict the stability limit for a raw input (speed RPM, wear cm²).
    ///
    /// A zero weight vector, or a feature vector that is identically zero,
    /// makes the inner product zero without running a circuit; the
    /// prediction collapses to the bias.
    pub fn predict(&self, x: [f64; 2], mode: EstimateMode) -> Result<Prediction, CircuitError> {
        let phi = crate::features::phi_cos(self.features.norm.normalize(x), &self.features.alpha);
        if self.norm_w() == 0.0 || inf_norm(&phi) == 0.0 {
            let shots = match mode {
                EstimateMode::Exact => 0,
                EstimateMode::Shots { shots, .. } => shots,
            };
            return Ok(Prediction { value: self.b, stderr: 0.0, shots });
        }
        let est = estimate_inner_product(&self.w, &phi, mode)?;
        Ok(Prediction { value: est.value + self.b, stderr: est.stderr, shots: est.shots })
    }

    /// Classification output: the sign of the prediction, with 0 mapping
    /// to +1.
    pub fn predict_sign(&self, x: [f64; 2], mode: EstimateMode) -> Result<i8, CircuitError> {
        let p = self.predict(x, mode)?;
        Ok(if p.value >= 0.0 { 1 } else { -1 })
    }

    /// Serialize to the versioned JSON document.
    pub fn to_json(&self) -> String {
        let doc = ModelDocument { format_version: MODEL_FORMAT_VERSION, model: self.clone() };
        serde_json::to_string_pretty(&doc).expect("model serialization cannot fail")
    }

    /// Parse a versioned JSON document; unknown versions are rejected.
    pub fn from_json(text: &str) -> Result<Self, CircuitError> {
        let version: VersionProbe = serde_json::from_str(text)?;
        if version.format_version != MODEL_FORMAT_VERSION {
            return Err(CircuitError::UnsupportedFormatVersion { got: version.format_version });
        }
        let doc: ModelDocument = serde_json::from_str(text)?;
        Ok(doc.model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    #[serde(flatten)]
    model: RqsvrModel,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}
