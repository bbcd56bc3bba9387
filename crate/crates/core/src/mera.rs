//! Reversed-MERA quantum CNN.
//!
//! A register of `n ∈ {4, 8}` qubits is shrunk to one qubit by `log2 n`
//! convolution/pooling stage pairs:
//!
//! * convolution: a CRZ(α)–CRX(β)–CRZ(γ) block on every adjacent pair of
//!   active qubits, even pairs first, then odd pairs; all blocks of a stage
//!   share `(α, β, γ)`;
//! * pooling: active qubits pair up as `(a[2i+1] → a[2i])`; the source drives
//!   a correction RZ(ρ)·RX(ξ) on the sink and becomes inactive.
//!
//! A final RZ/RX "fully connected" head acts on the surviving qubit, whose Z
//! expectation is the model output.
//!
//! In [`PoolMode::ControlledGate`] the correction is a controlled gate. In
//! [`PoolMode::MeasureCorrect`] the source is measured and the correction is
//! applied when the outcome is |1⟩. Forward passes evaluate the latter with
//! the deferred-measurement construction (the classically conditioned gate
//! becomes the same controlled gate), so both modes compile to one circuit.
//! [`qcnn_forward_branching`] evaluates the mid-circuit measurements
//! explicitly by collapsing and weighting each branch; it exists to check the
//! deferred form.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;

use crate::circuit::{Circuit, ParameterVector};
use crate::error::{Error, Result};
use crate::gradients::{self, ShiftRule};
use crate::nn::Optimizer;
use crate::rng::{Rng64, Stream};
use crate::sim::{GateKind, StateVector};

pub const CONV_PARAMS: usize = 3;
pub const POOL_PARAMS: usize = 2;
pub const HEAD_PARAMS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    ControlledGate,
    MeasureCorrect,
}

impl PoolMode {
    pub fn name(self) -> &'static str {
        match self {
            PoolMode::ControlledGate => "controlled_gate",
            PoolMode::MeasureCorrect => "measure_correct",
        }
    }
}

impl fmt::Display for PoolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PoolMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "controlled_gate" | "controlled-gate" => Ok(PoolMode::ControlledGate),
            "measure_correct" | "measure-correct" => Ok(PoolMode::MeasureCorrect),
            other => Err(Error::Usage(format!(
                "unknown pool mode `{other}` (expected controlled_gate or measure_correct)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvStageSpec {
    /// Adjacent active pairs `(lower, upper)`: even pairs, then odd pairs.
    pub pairs: Vec<(usize, usize)>,
    /// Number of leading entries of `pairs` that form the even layer.
    pub even_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolStageSpec {
    pub mode: PoolMode,
    /// `(source, sink)`; sources are inactive afterwards.
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stage {
    Conv(ConvStageSpec),
    Pool(PoolStageSpec),
}

/// Piece of the compiled circuit, used by the branching evaluator.
#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Unitary(Range<usize>),
    Pool {
        source: usize,
        sink: usize,
        ops: Range<usize>,
    },
}

#[derive(Debug, Clone)]
pub struct QcnnModel {
    n_qubits: usize,
    pool_mode: PoolMode,
    stages: Vec<Stage>,
    readout: usize,
    /// Fully expanded circuit: one slot per block gate.
    circuit: Circuit,
    /// Shared parameter names, in model order.
    param_names: Vec<String>,
    /// For every circuit slot, the shared parameter it replicates.
    slot_owner: Vec<usize>,
    rules: Vec<ShiftRule>,
    segments: Vec<Segment>,
    /// Qubit sets of block-level units, in circuit order.
    units: Vec<Vec<usize>>,
    active_trajectory: Vec<usize>,
}

fn conv_pairs(active: &[usize]) -> ConvStageSpec {
    let even: Vec<_> = active.chunks_exact(2).map(|p| (p[0], p[1])).collect();
    let even_len = even.len();
    let odd = active[1..].chunks_exact(2).map(|p| (p[0], p[1]));
    ConvStageSpec {
        pairs: even.into_iter().chain(odd).collect(),
        even_len,
    }
}

/// Builds the log-depth QCNN for `n_qubits ∈ {4, 8}`.
pub fn build_qcnn(n_qubits: usize, pool_mode: PoolMode) -> Result<QcnnModel> {
    if !matches!(n_qubits, 4 | 8) {
        return Err(Error::Capacity(format!(
            "QCNN register must be 4 or 8 qubits, got {n_qubits}"
        )));
    }
    let mut circuit = Circuit::new(n_qubits)?;
    let mut param_names = Vec::new();
    let mut slot_owner = Vec::new();
    let mut stages = Vec::new();
    let mut segments = Vec::new();
    let mut units = Vec::new();
    let mut active: Vec<usize> = (0..n_qubits).collect();
    let mut trajectory = vec![active.len()];

    let push = |circuit: &mut Circuit,
                slot_owner: &mut Vec<usize>,
                kind: GateKind,
                control: Option<usize>,
                target: usize,
                owner: usize,
                slot: String|
     -> Result<()> {
        circuit.push(kind, target, control, slot)?;
        slot_owner.push(owner);
        Ok(())
    };

    let mut stage = 0;
    while active.len() > 1 {
        let conv = conv_pairs(&active);
        let base = param_names.len();
        for name in ["alpha", "beta", "gamma"] {
            param_names.push(format!("conv{stage}.{name}"));
        }
        let start = circuit.ops().len();
        for &(a, b) in &conv.pairs {
            let tag = format!("{a}-{b}");
            push(
                &mut circuit,
                &mut slot_owner,
                GateKind::Crz,
                Some(a),
                b,
                base,
                format!("conv{stage}.alpha@{tag}"),
            )?;
            push(
                &mut circuit,
                &mut slot_owner,
                GateKind::Crx,
                Some(b),
                a,
                base + 1,
                format!("conv{stage}.beta@{tag}"),
            )?;
            push(
                &mut circuit,
                &mut slot_owner,
                GateKind::Crz,
                Some(a),
                b,
                base + 2,
                format!("conv{stage}.gamma@{tag}"),
            )?;
            units.push(vec![a, b]);
        }
        segments.push(Segment::Unitary(start..circuit.ops().len()));
        stages.push(Stage::Conv(conv));

        let pairs: Vec<(usize, usize)> = active.chunks_exact(2).map(|p| (p[1], p[0])).collect();
        let base = param_names.len();
        param_names.push(format!("pool{stage}.rz"));
        param_names.push(format!("pool{stage}.rx"));
        for &(source, sink) in &pairs {
            let tag = format!("{source}>{sink}");
            let start = circuit.ops().len();
            push(
                &mut circuit,
                &mut slot_owner,
                GateKind::Crz,
                Some(source),
                sink,
                base,
                format!("pool{stage}.rz@{tag}"),
            )?;
            push(
                &mut circuit,
                &mut slot_owner,
                GateKind::Crx,
                Some(source),
                sink,
                base + 1,
                format!("pool{stage}.rx@{tag}"),
            )?;
            segments.push(Segment::Pool {
                source,
                sink,
                ops: start..circuit.ops().len(),
            });
            units.push(vec![source, sink]);
        }
        let sources: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        active.retain(|q| !sources.contains(q));
        trajectory.push(active.len());
        stages.push(Stage::Pool(PoolStageSpec { mode: pool_mode, pairs }));
        stage += 1;
    }

    let readout = active[0];
    let base = param_names.len();
    param_names.push("head.rz".into());
    param_names.push("head.rx".into());
    let start = circuit.ops().len();
    push(
        &mut circuit,
        &mut slot_owner,
        GateKind::Rz,
        None,
        readout,
        base,
        format!("head.rz@{readout}"),
    )?;
    push(
        &mut circuit,
        &mut slot_owner,
        GateKind::Rx,
        None,
        readout,
        base + 1,
        format!("head.rx@{readout}"),
    )?;
    segments.push(Segment::Unitary(start..circuit.ops().len()));
    units.push(vec![readout]);

    let rules = gradients::slot_rules(&circuit)?;
    Ok(QcnnModel {
        n_qubits,
        pool_mode,
        stages,
        readout,
        circuit,
        param_names,
        slot_owner,
        rules,
        segments,
        units,
        active_trajectory: trajectory,
    })
}

impl QcnnModel {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn pool_mode(&self) -> PoolMode {
        self.pool_mode
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn readout(&self) -> usize {
        self.readout
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    pub fn num_params(&self) -> usize {
        self.param_names.len()
    }

    /// The compiled circuit with one slot per gate (shared values replicated).
    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    /// Active-qubit count before the first stage and after every pooling.
    pub fn active_trajectory(&self) -> &[usize] {
        &self.active_trajectory
    }

    /// ASAP layer count over block-level units (conv blocks, pool blocks and
    /// the head), each occupying the qubits it touches.
    pub fn depth(&self) -> usize {
        let mut busy = vec![0usize; self.n_qubits];
        let mut depth = 0;
        for unit in &self.units {
            let layer = 1 + unit.iter().map(|&q| busy[q]).max().unwrap_or(0);
            for &q in unit {
                busy[q] = layer;
            }
            depth = depth.max(layer);
        }
        depth
    }

    /// Small random initial parameters, `U(-π/10, π/10)`.
    pub fn init_params(&self, seed: u64) -> ParameterVector {
        let mut rng = Rng64::stream(seed, Stream::Init, self.n_qubits as u64);
        let values = (0..self.num_params())
            .map(|_| rng.uniform(-PI / 10.0, PI / 10.0))
            .collect();
        self.parameter_vector(values).expect("names are unique")
    }

    pub fn parameter_vector(&self, values: Vec<f64>) -> Result<ParameterVector> {
        ParameterVector::new(self.param_names.clone(), values)
    }

    /// Shared values in model order.
    fn shared_values(&self, params: &ParameterVector) -> Result<Vec<f64>> {
        if params.len() != self.num_params() {
            return Err(Error::Binding(format!(
                "QCNN has {} parameters, {} supplied",
                self.num_params(),
                params.len()
            )));
        }
        self.param_names
            .iter()
            .map(|n| {
                let v = params
                    .get(n)
                    .ok_or_else(|| Error::Binding(format!("missing QCNN parameter `{n}`")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Domain(format!("parameter `{n}` = {v} is not finite")))
                }
            })
            .collect()
    }

    fn expand(&self, shared: &[f64]) -> Vec<f64> {
        self.slot_owner.iter().map(|&o| shared[o]).collect()
    }

    fn check_input(&self, input: &StateVector) -> Result<()> {
        if input.n_qubits() != self.n_qubits {
            return Err(Error::Shape(format!(
                "QCNN expects {} qubits, input has {}",
                self.n_qubits,
                input.n_qubits()
            )));
        }
        Ok(())
    }

    fn forward_slots(&self, slots: &[f64], input: &StateVector) -> f64 {
        gradients::expectation_at(&self.circuit, slots, input, self.readout)
    }

    /// Gradient of the output with respect to the shared parameters: the sum
    /// of the parameter-shift derivatives of every gate a parameter drives.
    fn gradient_slots(&self, slots: &mut [f64], input: &StateVector) -> Vec<f64> {
        let mut grad = vec![0.0; self.num_params()];
        for slot in 0..slots.len() {
            grad[self.slot_owner[slot]] +=
                gradients::shift_derivative(&self.circuit, slots, slot, self.rules[slot], input, self.readout);
        }
        grad
    }
}

/// `⟨Z⟩` of the readout qubit.
pub fn qcnn_forward(model: &QcnnModel, params: &ParameterVector, input: &StateVector) -> Result<f64> {
    model.check_input(input)?;
    let slots = model.expand(&model.shared_values(params)?);
    Ok(model.forward_slots(&slots, input))
}

/// Gradient of [`qcnn_forward`], aligned with `model.param_names()`.
pub fn qcnn_gradient(model: &QcnnModel, params: &ParameterVector, input: &StateVector) -> Result<Vec<f64>> {
    model.check_input(input)?;
    let mut slots = model.expand(&model.shared_values(params)?);
    Ok(model.gradient_slots(&mut slots, input))
}

/// Readout expectation with every pooling source measured mid-circuit: each
/// outcome branch is collapsed, corrected (RZ·RX on the sink after a |1⟩)
/// and weighted by its probability.
pub fn qcnn_forward_branching(model: &QcnnModel, params: &ParameterVector, input: &StateVector) -> Result<f64> {
    model.check_input(input)?;
    let slots = model.expand(&model.shared_values(params)?);
    branch(model, &slots, input.clone(), 0)
}

fn branch(model: &QcnnModel, slots: &[f64], mut state: StateVector, from: usize) -> Result<f64> {
    let ops = model.circuit.ops();
    for (i, segment) in model.segments.iter().enumerate().skip(from) {
        match segment {
            Segment::Unitary(range) => {
                for op in &ops[range.clone()] {
                    state.apply_gate(op.kind, op.target, op.control, model.circuit.resolve(op, slots))?;
                }
            }
            Segment::Pool {
                source,
                sink,
                ops: range,
            } => {
                let mut total = 0.0;
                for outcome in [0u8, 1] {
                    let p = state.measure_probability(*source, outcome)?;
                    if p <= 1e-12 {
                        continue;
                    }
                    let mut next = state.clone();
                    next.collapse(*source, outcome)?;
                    if outcome == 1 {
                        for op in &ops[range.clone()] {
                            let uncontrolled = match op.kind {
                                GateKind::Crz => GateKind::Rz,
                                GateKind::Crx => GateKind::Rx,
                                other => other,
                            };
                            next.apply_gate(uncontrolled, *sink, None, model.circuit.resolve(op, slots))?;
                        }
                    }
                    total += p * branch(model, slots, next, i + 1)?;
                }
                return Ok(total);
            }
        }
    }
    state.expectation_z(model.readout)
}

/// One labelled input state.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub state: StateVector,
    pub label: u8,
}

/// Two-class synthetic states. Label 0: per-qubit `RX(φ)`, `φ ~ U(0, π/4)`.
/// Label 1: the same, then a ring of CZ gates and per-qubit `RX(φ')`,
/// `φ' ~ U(3π/4, π)`. Labels alternate 0, 1, 0, …
pub fn synth_dataset(n_qubits: usize, size: usize, seed: u64) -> Result<Vec<SynthSample>> {
    if !size.is_multiple_of(2) {
        return Err(Error::Domain(format!("dataset size {size} must be even")));
    }
    if n_qubits < 2 {
        return Err(Error::Capacity(format!(
            "synthetic task needs at least 2 qubits, got {n_qubits}"
        )));
    }
    let mut rng = Rng64::stream(seed, Stream::Synthetic, n_qubits as u64);
    (0..size)
        .map(|i| {
            let label = (i % 2) as u8;
            let mut state = StateVector::new(n_qubits)?;
            for q in 0..n_qubits {
                state.apply_gate(GateKind::Rx, q, None, rng.uniform(0.0, PI / 4.0))?;
            }
            if label == 1 {
                for q in 0..n_qubits {
                    let next = (q + 1) % n_qubits;
                    if n_qubits == 2 && q == 1 {
                        break;
                    }
                    state.apply_gate(GateKind::Cz, next, Some(q), 0.0)?;
                }
                for q in 0..n_qubits {
                    state.apply_gate(GateKind::Rx, q, None, rng.uniform(3.0 * PI / 4.0, PI))?;
                }
            }
            Ok(SynthSample { state, label })
        })
        .collect()
}

/// Target readout: +1 for label 0, −1 for label 1.
pub fn target(label: u8) -> f64 {
    if label == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn predict(expectation: f64) -> u8 {
    if expectation >= 0.0 {
        0
    } else {
        1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcnnEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub eval_accuracy: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct QcnnTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

pub fn qcnn_accuracy(model: &QcnnModel, params: &ParameterVector, data: &[SynthSample]) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let slots = model.expand(&model.shared_values(params)?);
    let correct = data
        .par_iter()
        .map(|s| {
            model.check_input(&s.state)?;
            Ok((predict(model.forward_slots(&slots, &s.state)) == s.label) as usize)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / data.len() as f64)
}

/// Minibatch training on the squared error `(⟨Z⟩ − target)²`. Training loss
/// and accuracy are measured on the forward passes taken during the epoch.
pub fn train_qcnn(
    model: &QcnnModel,
    params: &mut ParameterVector,
    train: &[SynthSample],
    eval: &[SynthSample],
    config: &QcnnTrainConfig,
    optimizer: &mut Optimizer,
) -> Result<Vec<QcnnEpoch>> {
    if train.is_empty() {
        return Err(Error::Domain("training set is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Domain("batch size must be positive".into()));
    }
    for s in train.iter().chain(eval) {
        model.check_input(&s.state)?;
    }
    let mut shared = model.shared_values(params)?;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        Rng64::stream(config.seed, Stream::Shuffle, epoch as u64).shuffle(&mut order);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let slots = model.expand(&shared);
            let per_example: Vec<(f64, u8, Vec<f64>)> = batch
                .par_iter()
                .map(|&i| {
                    let sample = &train[i];
                    let out = model.forward_slots(&slots, &sample.state);
                    let mut local = slots.clone();
                    let grad = model.gradient_slots(&mut local, &sample.state);
                    (out, sample.label, grad)
                })
                .collect();
            let mut grad = vec![0.0; shared.len()];
            let scale = 1.0 / batch.len() as f64;
            for (out, label, g) in &per_example {
                let err = out - target(*label);
                loss_sum += err * err;
                correct += (predict(*out) == *label) as usize;
                for (acc, gi) in grad.iter_mut().zip(g) {
                    *acc += scale * 2.0 * err * gi;
                }
            }
            if !loss_sum.is_finite() {
                return Err(Error::Divergence(format!(
                    "QCNN loss became {loss_sum} in epoch {epoch}"
                )));
            }
            optimizer.step(&mut [&mut shared], &[&grad])?;
        }
        *params = model.parameter_vector(shared.clone())?;
        history.push(QcnnEpoch {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
            eval_accuracy: qcnn_accuracy(model, params, eval)?,
        });
    }
    *params = model.parameter_vector(shared)?;
    Ok(history)
}
