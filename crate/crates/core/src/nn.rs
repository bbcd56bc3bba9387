//! Small from-scratch classical layers and optimizers.

use crate::error::{Error, Result};
use crate::quanv::{output_size, FeatureMap, WINDOW};
use crate::rng::Rng64;

fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Affine map `y = W·x + b` with `W` stored row-major `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub input: Vec<f64>,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::Shape(format!(
                "dense {out_dim}×{in_dim} needs {} weights and {out_dim} biases, got {} and {}",
                in_dim * out_dim,
                weights.len(),
                bias.len()
            )));
        }
        Ok(DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut Rng64) -> Self {
        let limit = glorot_limit(in_dim, out_dim);
        let weights = (0..in_dim * out_dim).map(|_| rng.uniform(-limit, limit)).collect();
        DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn check_len(&self, what: &str, got: usize, want: usize) -> Result<()> {
        if got != want {
            return Err(Error::Shape(format!(
                "dense {}×{}: {what} has length {got}, expected {want}",
                self.out_dim, self.in_dim
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len("input", x.len(), self.in_dim)?;
        Ok(self
            .weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect())
    }

    /// `dW = dy ⊗ x`, `db = dy`, `dx = Wᵀ·dy`.
    pub fn backward(&self, x: &[f64], dy: &[f64]) -> Result<DenseGrads> {
        self.check_len("input", x.len(), self.in_dim)?;
        self.check_len("output gradient", dy.len(), self.out_dim)?;
        let mut dw = Vec::with_capacity(self.weights.len());
        let mut dx = vec![0.0; self.in_dim];
        for (row, &g) in self.weights.chunks_exact(self.in_dim).zip(dy) {
            dw.extend(x.iter().map(|xi| g * xi));
            for (d, w) in dx.iter_mut().zip(row) {
                *d += w * g;
            }
        }
        Ok(DenseGrads {
            weights: dw,
            bias: dy.to_vec(),
            input: dx,
        })
    }
}

pub fn relu_forward(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Passes `dy` where the forward input was positive.
pub fn relu_backward(x: &[f64], dy: &[f64]) -> Vec<f64> {
    x.iter().zip(dy).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect()
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `softmax(logits)` against `label`, with its gradient
/// `softmax(logits) − onehot(label)`.
pub fn softmax_xent(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::Domain(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Single-input-channel 2×2 cross-correlation with `C_out` kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2DLayer {
    /// `C_out × 2 × 2`, row-major per kernel.
    pub kernels: Vec<f64>,
    pub bias: Vec<f64>,
    stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub kernels: Vec<f64>,
    pub bias: Vec<f64>,
}

const KERNEL_AREA: usize = WINDOW * WINDOW;

impl Conv2DLayer {
    pub fn new(kernels: Vec<f64>, bias: Vec<f64>, stride: usize) -> Result<Self> {
        if kernels.len() != bias.len() * KERNEL_AREA || bias.is_empty() {
            return Err(Error::Shape(format!(
                "{} kernel weights do not make {} 2×2 kernels",
                kernels.len(),
                bias.len()
            )));
        }
        if stride == 0 {
            return Err(Error::Domain("stride must be positive".into()));
        }
        Ok(Conv2DLayer { kernels, bias, stride })
    }

    pub fn glorot(channels: usize, stride: usize, rng: &mut Rng64) -> Result<Self> {
        let limit = glorot_limit(KERNEL_AREA, channels * KERNEL_AREA);
        let kernels = (0..channels * KERNEL_AREA)
            .map(|_| rng.uniform(-limit, limit))
            .collect();
        Self::new(kernels, vec![0.0; channels], stride)
    }

    pub fn channels(&self) -> usize {
        self.bias.len()
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    fn check_input(&self, input: &FeatureMap) -> Result<(usize, usize)> {
        if input.channels() != 1 || input.height() < WINDOW || input.width() < WINDOW {
            return Err(Error::Shape(format!(
                "conv input must be at least 2×2×1, got {:?}",
                input.dims()
            )));
        }
        Ok((
            output_size(input.height(), self.stride),
            output_size(input.width(), self.stride),
        ))
    }

    fn window(&self, input: &FeatureMap, oy: usize, ox: usize) -> [f64; KERNEL_AREA] {
        let (y, x) = (oy * self.stride, ox * self.stride);
        [
            input.get(y, x, 0),
            input.get(y, x + 1, 0),
            input.get(y + 1, x, 0),
            input.get(y + 1, x + 1, 0),
        ]
    }

    pub fn forward(&self, input: &FeatureMap) -> Result<FeatureMap> {
        let (oh, ow) = self.check_input(input)?;
        let ch = self.channels();
        let mut out = FeatureMap::zeros(oh, ow, ch);
        for oy in 0..oh {
            for ox in 0..ow {
                let win = self.window(input, oy, ox);
                for (c, k) in self.kernels.chunks_exact(KERNEL_AREA).enumerate() {
                    let v: f64 = k.iter().zip(&win).map(|(a, b)| a * b).sum::<f64>() + self.bias[c];
                    out.set(oy, ox, c, v);
                }
            }
        }
        Ok(out)
    }

    /// Kernel and bias gradients for upstream gradient `dy`.
    pub fn backward(&self, input: &FeatureMap, dy: &FeatureMap) -> Result<ConvGrads> {
        let (oh, ow) = self.check_input(input)?;
        if dy.dims() != (oh, ow, self.channels()) {
            return Err(Error::Shape(format!(
                "conv upstream gradient is {:?}, expected {:?}",
                dy.dims(),
                (oh, ow, self.channels())
            )));
        }
        let mut dk = vec![0.0; self.kernels.len()];
        let mut db = vec![0.0; self.bias.len()];
        for oy in 0..oh {
            for ox in 0..ow {
                let win = self.window(input, oy, ox);
                for (c, k) in dk.chunks_exact_mut(KERNEL_AREA).enumerate() {
                    let g = dy.get(oy, ox, c);
                    db[c] += g;
                    for (d, v) in k.iter_mut().zip(&win) {
                        *d += g * v;
                    }
                }
            }
        }
        Ok(ConvGrads { kernels: dk, bias: db })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Updates a fixed list of parameter tensors. Adam moment buffers are sized
/// on the first step.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::Domain(format!("learning rate {learning_rate} is invalid")));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = kind {
            let valid = (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0;
            if !valid {
                return Err(Error::Domain(format!(
                    "Adam hyperparameters beta1={beta1} beta2={beta2} eps={eps} are invalid"
                )));
            }
        }
        Ok(Optimizer {
            kind,
            learning_rate,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::adam(), learning_rate)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update of every tensor in `params` by the matching `grads`.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::Shape(format!(
                    "tensor {i}: {} parameters but {} gradient entries",
                    p.len(),
                    g.len()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence(format!("non-finite gradient in tensor {i}")));
            }
        }
        match self.kind {
            OptimizerKind::Sgd => {
                self.step_count += 1;
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pi, gi) in p.iter_mut().zip(g.iter()) {
                        *pi -= self.learning_rate * gi;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.first_moment.is_empty() {
                    self.first_moment = params.iter().map(|p| vec![0.0; p.len()]).collect();
                    self.second_moment = self.first_moment.clone();
                }
                let sizes_match = self.first_moment.len() == params.len()
                    && self
                        .first_moment
                        .iter()
                        .zip(params.iter())
                        .all(|(m, p)| m.len() == p.len());
                if !sizes_match {
                    return Err(Error::Shape(
                        "parameter tensors changed shape between Adam steps".into(),
                    ));
                }
                self.step_count += 1;
                let t = self.step_count as i32;
                let correction1 = 1.0 - beta1.powi(t);
                let correction2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.first_moment)
                    .zip(&mut self.second_moment)
                {
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = m[i] / correction1;
                        let v_hat = v[i] / correction2;
                        p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
