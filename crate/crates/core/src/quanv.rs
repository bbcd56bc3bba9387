//! Quanvolutional layer: a 2×2 window slides over a single-channel image;
//! each window is angle-encoded into four qubits, evolved by a trainable
//! filter circuit and decoded as the Z expectation of qubit (0,0).
//!
//! Window pixel `(r, c)` lives on qubit `2r + c`:
//!
//! ```text
//! (0,0) q0 ─RX(a00)─RZ─RX─────────RZ─RX─ ⟨Z⟩
//! (0,1) q1 ─RX(a01)──●──●─────────│──│──
//! (1,0) q2 ─RX(a10)──────RZ─RX────●──●──
//! (1,1) q3 ─RX(a11)──────●──●────────────
//! ```
//!
//! The first two RZ/RX on q0 are controlled by q1, the pair on q2 by q3, and
//! the last pair on q0 by q2.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::circuit::{Circuit, ParameterVector};
use crate::error::{Error, Result};
use crate::gradients::{self, ShiftRule};
use crate::rng::Rng64;
use crate::sim::StateVector;

pub const WINDOW: usize = 2;
pub const FILTER_QUBITS: usize = 4;
pub const FILTER_PARAMS: usize = 6;
/// Qubit read out by every filter.
pub const READOUT_QUBIT: usize = 0;

/// Names of the encoding slots, in qubit order.
pub const ENCODING_SLOTS: [&str; 4] = ["a00", "a01", "a10", "a11"];

/// Names of the trainable slots, in circuit order.
pub const FILTER_SLOTS: [&str; FILTER_PARAMS] = [
    "crz_q1_q0",
    "crx_q1_q0",
    "crz_q3_q2",
    "crx_q3_q2",
    "crz_q2_q0",
    "crx_q2_q0",
];

/// Initial filter angles are drawn from `U(-INIT_SCALE, INIT_SCALE)`.
pub const INIT_SCALE: f64 = PI / 10.0;

/// `H × W × C` real tensor, row-major with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        FeatureMap {
            height,
            width,
            channels,
            values: vec![0.0; height * width * channels],
        }
    }

    pub fn from_values(height: usize, width: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "{height}×{width}×{channels} feature map needs {} values, got {}",
                height * width * channels,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("feature map value {v} is not finite")));
        }
        Ok(FeatureMap {
            height,
            width,
            channels,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.values[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let i = self.index(y, x, c);
        self.values[i] = v;
    }
}

/// Output spatial size of a 2×2 window sweep with the given stride.
pub fn output_size(input: usize, stride: usize) -> usize {
    (input - WINDOW) / stride + 1
}

/// RX angles `π·pixel` for the window, in qubit order (0,0),(0,1),(1,0),(1,1).
pub fn encode_window(pixels: [[f64; 2]; 2]) -> Result<[f64; 4]> {
    let mut angles = [0.0; 4];
    for r in 0..2 {
        for c in 0..2 {
            let p = pixels[r][c];
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("pixel ({r},{c}) = {p} outside [0, 1]")));
            }
            angles[2 * r + c] = PI * p;
        }
    }
    Ok(angles)
}

fn encoding_circuit() -> Circuit {
    let mut c = Circuit::new(FILTER_QUBITS).expect("4 qubits is in range");
    for (q, name) in ENCODING_SLOTS.iter().enumerate() {
        c.rx(q, *name).expect("valid encoding gate");
    }
    c
}

fn variational_circuit() -> Circuit {
    let mut c = Circuit::new(FILTER_QUBITS).expect("4 qubits is in range");
    let [s0, s1, s2, s3, s4, s5] = FILTER_SLOTS;
    c.crz(1, 0, s0)
        .and_then(|c| c.crx(1, 0, s1))
        .and_then(|c| c.crz(3, 2, s2))
        .and_then(|c| c.crx(3, 2, s3))
        .and_then(|c| c.crz(2, 0, s4))
        .and_then(|c| c.crx(2, 0, s5))
        .expect("valid filter gates");
    c
}

/// One trainable 4-qubit filter.
#[derive(Debug, Clone, PartialEq)]
pub struct QuanvFilter {
    encoding: Circuit,
    variational: Circuit,
    rules: Vec<ShiftRule>,
    params: [f64; FILTER_PARAMS],
}

impl QuanvFilter {
    pub fn new(params: [f64; FILTER_PARAMS]) -> Self {
        let variational = variational_circuit();
        let rules = gradients::slot_rules(&variational).expect("filter gates are rotations");
        QuanvFilter {
            encoding: encoding_circuit(),
            variational,
            rules,
            params,
        }
    }

    pub fn random(rng: &mut Rng64) -> Self {
        let mut params = [0.0; FILTER_PARAMS];
        for p in &mut params {
            *p = rng.uniform(-INIT_SCALE, INIT_SCALE);
        }
        Self::new(params)
    }

    pub fn params(&self) -> &[f64; FILTER_PARAMS] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64; FILTER_PARAMS] {
        &mut self.params
    }

    pub fn parameter_vector(&self) -> ParameterVector {
        ParameterVector::for_circuit(&self.variational, self.params.to_vec()).expect("filter slots are unique")
    }

    /// The trainable part of the circuit (six controlled rotations).
    pub fn variational(&self) -> &Circuit {
        &self.variational
    }

    /// Full circuit: four encoding RX slots followed by the trainable gates.
    pub fn template() -> Circuit {
        let mut c = encoding_circuit();
        c.append(&variational_circuit()).expect("slot names are disjoint");
        c
    }

    /// Product state after the encoding rotations.
    pub fn encode(&self, angles: &[f64; 4]) -> StateVector {
        let mut state = StateVector::new(FILTER_QUBITS).expect("4 qubits is in range");
        self.encoding.apply_slots(&mut state, angles);
        state
    }

    #[inline]
    fn forward_encoded(&self, encoded: &StateVector) -> f64 {
        gradients::expectation_at(&self.variational, &self.params, encoded, READOUT_QUBIT)
    }

    /// Accumulates `scale · ∂⟨Z⟩/∂θ` into `out`.
    #[inline]
    fn accumulate_grad(&self, encoded: &StateVector, scale: f64, out: &mut [f64; FILTER_PARAMS]) {
        let mut values = self.params;
        for (slot, g) in out.iter_mut().enumerate() {
            *g += scale
                * gradients::shift_derivative(
                    &self.variational,
                    &mut values,
                    slot,
                    self.rules[slot],
                    encoded,
                    READOUT_QUBIT,
                );
        }
    }

    /// `⟨Z⟩` of qubit (0,0) after encoding `pixels` and running the filter.
    pub fn forward(&self, pixels: [[f64; 2]; 2]) -> Result<f64> {
        let angles = encode_window(pixels)?;
        Ok(self.forward_encoded(&self.encode(&angles)))
    }

    /// Parameter-shift gradient of [`forward`](Self::forward) with respect to
    /// the six filter angles.
    pub fn gradient(&self, pixels: [[f64; 2]; 2]) -> Result<[f64; FILTER_PARAMS]> {
        let angles = encode_window(pixels)?;
        let mut g = [0.0; FILTER_PARAMS];
        self.accumulate_grad(&self.encode(&angles), 1.0, &mut g);
        Ok(g)
    }
}

/// Free-function form of [`QuanvFilter::forward`].
pub fn filter_forward(filter: &QuanvFilter, pixels: [[f64; 2]; 2]) -> Result<f64> {
    filter.forward(pixels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuanvLayer {
    filters: Vec<QuanvFilter>,
    stride: usize,
}

impl QuanvLayer {
    pub fn new(filters: Vec<QuanvFilter>, stride: usize) -> Result<Self> {
        if filters.is_empty() {
            return Err(Error::Shape("a quanv layer needs at least one filter".into()));
        }
        if stride == 0 {
            return Err(Error::Domain("stride must be positive".into()));
        }
        Ok(QuanvLayer { filters, stride })
    }

    /// `channels` filters with seeded initial angles.
    pub fn random(channels: usize, stride: usize, rng: &mut Rng64) -> Result<Self> {
        let filters = (0..channels).map(|_| QuanvFilter::random(rng)).collect();
        Self::new(filters, stride)
    }

    pub fn filters(&self) -> &[QuanvFilter] {
        &self.filters
    }

    pub fn filters_mut(&mut self) -> &mut [QuanvFilter] {
        &mut self.filters
    }

    pub fn channels(&self) -> usize {
        self.filters.len()
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn output_dims(&self, height: usize, width: usize) -> (usize, usize, usize) {
        (
            output_size(height, self.stride),
            output_size(width, self.stride),
            self.channels(),
        )
    }

    fn check_input(&self, input: &FeatureMap) -> Result<()> {
        if input.channels() != 1 {
            return Err(Error::UnsupportedInput(format!(
                "quanv input must be single-channel, got {} channels",
                input.channels()
            )));
        }
        if input.height() < WINDOW || input.width() < WINDOW {
            return Err(Error::Shape(format!(
                "{}×{} input is smaller than the 2×2 window",
                input.height(),
                input.width()
            )));
        }
        Ok(())
    }

    /// Encoded product states for every window, row-major.
    fn encoded_windows(&self, input: &FeatureMap) -> Result<Vec<StateVector>> {
        let (oh, ow, _) = self.output_dims(input.height(), input.width());
        let encoder = &self.filters[0];
        (0..oh * ow)
            .map(|w| {
                let (y, x) = (w / ow * self.stride, w % ow * self.stride);
                let pixels = [
                    [input.get(y, x, 0), input.get(y, x + 1, 0)],
                    [input.get(y + 1, x, 0), input.get(y + 1, x + 1, 0)],
                ];
                Ok(encoder.encode(&encode_window(pixels)?))
            })
            .collect()
    }

    /// `(H−2)/s+1 × (W−2)/s+1 × C` map of filter readouts.
    pub fn forward(&self, input: &FeatureMap) -> Result<FeatureMap> {
        self.check_input(input)?;
        let (oh, ow, ch) = self.output_dims(input.height(), input.width());
        let windows = self.encoded_windows(input)?;
        let values: Vec<f64> = windows
            .par_iter()
            .flat_map_iter(|encoded| self.filters.iter().map(move |f| f.forward_encoded(encoded)))
            .collect();
        FeatureMap::from_values(oh, ow, ch, values)
    }

    /// Gradient of `Σ upstream · forward(input)` with respect to every
    /// filter's parameters. Windows are summed in row-major order.
    pub fn backward(&self, input: &FeatureMap, upstream: &FeatureMap) -> Result<Vec<[f64; FILTER_PARAMS]>> {
        self.check_input(input)?;
        let expected = self.output_dims(input.height(), input.width());
        if upstream.dims() != expected {
            return Err(Error::Shape(format!(
                "upstream gradient is {:?}, layer output is {:?}",
                upstream.dims(),
                expected
            )));
        }
        let ch = self.channels();
        let windows = self.encoded_windows(input)?;
        let partials: Vec<Vec<[f64; FILTER_PARAMS]>> = windows
            .par_iter()
            .enumerate()
            .map(|(w, encoded)| {
                let up = &upstream.values()[w * ch..(w + 1) * ch];
                self.filters
                    .iter()
                    .zip(up)
                    .map(|(f, &u)| {
                        let mut g = [0.0; FILTER_PARAMS];
                        if u != 0.0 {
                            f.accumulate_grad(encoded, u, &mut g);
                        }
                        g
                    })
                    .collect()
            })
            .collect();
        let mut total = vec![[0.0; FILTER_PARAMS]; ch];
        for window in &partials {
            for (acc, g) in total.iter_mut().zip(window) {
                for (a, b) in acc.iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
        Ok(total)
    }
}

pub fn layer_forward(layer: &QuanvLayer, input: &FeatureMap) -> Result<FeatureMap> {
    layer.forward(input)
}

pub fn layer_backward(
    layer: &QuanvLayer,
    input: &FeatureMap,
    upstream: &FeatureMap,
) -> Result<Vec<[f64; FILTER_PARAMS]>> {
    layer.backward(input, upstream)
}
