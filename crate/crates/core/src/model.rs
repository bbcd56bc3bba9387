//! The three comparison models sharing one dense head:
//!
//! * `qcnn`: quanv (C filters) → flatten → dense(64) → ReLU → dense(10)
//! * `cnn`: conv2d (C 2×2 kernels, optional ReLU) → the same head
//! * `fc`: flatten(10×10) → the same head
//!
//! All three are trained with softmax cross-entropy.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mnist::{Image, CLASSES, SIDE};
use crate::nn::{relu_backward, relu_forward, softmax_xent, Conv2DLayer, DenseLayer};
use crate::quanv::{output_size, FeatureMap, QuanvFilter, QuanvLayer, FILTER_PARAMS};
use crate::rng::{Rng64, Stream};

pub const HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Qcnn,
    Cnn,
    Fc,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Qcnn, ModelKind::Cnn, ModelKind::Fc];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Qcnn => "qcnn",
            ModelKind::Cnn => "cnn",
            ModelKind::Fc => "fc",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qcnn" => Ok(ModelKind::Qcnn),
            "cnn" => Ok(ModelKind::Cnn),
            "fc" => Ok(ModelKind::Fc),
            other => Err(Error::Usage(format!(
                "unknown model `{other}` (expected qcnn, cnn or fc)"
            ))),
        }
    }
}

/// Architecture knobs that change parameter shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub channels: usize,
    pub stride: usize,
    pub conv_relu: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: 8,
            stride: 1,
            conv_relu: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frontend {
    Quanv(QuanvLayer),
    Conv { layer: Conv2DLayer, relu: bool },
    Flatten,
}

/// Named parameter tensor, the unit of checkpointing.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Tensor {
    fn new(name: &str, shape: Vec<usize>, values: Vec<f64>) -> Self {
        Tensor {
            name: name.to_string(),
            shape,
            values,
        }
    }
}

/// Gradients split into the quantum group (quanv angles) and the classical
/// group, each aligned with [`Model::param_groups_mut`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub quantum: Vec<Vec<f64>>,
    pub classical: Vec<Vec<f64>>,
}

impl Grads {
    fn zeros_like(&self) -> Self {
        let z = |g: &Vec<Vec<f64>>| g.iter().map(|v| vec![0.0; v.len()]).collect();
        Grads {
            quantum: z(&self.quantum),
            classical: z(&self.classical),
        }
    }

    fn add_scaled(&mut self, other: &Grads, scale: f64) {
        for (a, b) in self
            .quantum
            .iter_mut()
            .chain(self.classical.iter_mut())
            .zip(other.quantum.iter().chain(&other.classical))
        {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    /// `scale · Σ items`, summed in slice order.
    pub fn mean_of(items: &[Grads]) -> Option<Grads> {
        let first = items.first()?;
        let mut total = first.zeros_like();
        let scale = 1.0 / items.len() as f64;
        for g in items {
            total.add_scaled(g, scale);
        }
        Some(total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleResult {
    pub loss: f64,
    pub prediction: usize,
    pub grads: Grads,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kind: ModelKind,
    config: ModelConfig,
    frontend: Frontend,
    hidden: DenseLayer,
    output: DenseLayer,
}

fn image_map(image: &Image) -> FeatureMap {
    FeatureMap::from_values(SIDE, SIDE, 1, image.to_vec()).expect("image shape is fixed")
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

impl Model {
    /// Seeded initialization; each layer draws from its own stream.
    pub fn new(kind: ModelKind, config: ModelConfig, seed: u64) -> Result<Self> {
        if config.channels == 0 || config.stride == 0 {
            return Err(Error::Usage("channels and stride must be positive".into()));
        }
        let rng = |i| Rng64::stream(seed, Stream::Init, i);
        let frontend = match kind {
            ModelKind::Qcnn => Frontend::Quanv(QuanvLayer::random(config.channels, config.stride, &mut rng(0))?),
            ModelKind::Cnn => Frontend::Conv {
                layer: Conv2DLayer::glorot(config.channels, config.stride, &mut rng(0))?,
                relu: config.conv_relu,
            },
            ModelKind::Fc => Frontend::Flatten,
        };
        let in_dim = Self::feature_len(kind, &config);
        Ok(Model {
            kind,
            config,
            frontend,
            hidden: DenseLayer::glorot(in_dim, HIDDEN, &mut rng(1)),
            output: DenseLayer::glorot(HIDDEN, CLASSES, &mut rng(2)),
        })
    }

    fn feature_len(kind: ModelKind, config: &ModelConfig) -> usize {
        match kind {
            ModelKind::Fc => SIDE * SIDE,
            _ => {
                let s = output_size(SIDE, config.stride);
                s * s * config.channels
            }
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn frontend(&self) -> &Frontend {
        &self.frontend
    }

    pub fn hidden(&self) -> &DenseLayer {
        &self.hidden
    }

    pub fn output(&self) -> &DenseLayer {
        &self.output
    }

    /// Shape of the frontend output (`H×W×C`), or `None` for `fc`.
    pub fn feature_dims(&self) -> Option<(usize, usize, usize)> {
        match &self.frontend {
            Frontend::Quanv(q) => Some(q.output_dims(SIDE, SIDE)),
            Frontend::Conv { layer, .. } => {
                let s = output_size(SIDE, layer.stride());
                Some((s, s, layer.channels()))
            }
            Frontend::Flatten => None,
        }
    }

    /// Frontend output and, for the conv frontend, its pre-activation.
    fn features(&self, image: &Image) -> Result<(Vec<f64>, Option<FeatureMap>)> {
        match &self.frontend {
            Frontend::Quanv(q) => Ok((q.forward(&image_map(image))?.into_values(), None)),
            Frontend::Conv { layer, relu } => {
                let pre = layer.forward(&image_map(image))?;
                let act = if *relu {
                    relu_forward(pre.values())
                } else {
                    pre.values().to_vec()
                };
                Ok((act, Some(pre)))
            }
            Frontend::Flatten => Ok((image.to_vec(), None)),
        }
    }

    pub fn logits(&self, image: &Image) -> Result<Vec<f64>> {
        let (features, _) = self.features(image)?;
        let z = self.hidden.forward(&features)?;
        self.output.forward(&relu_forward(&z))
    }

    pub fn predict(&self, image: &Image) -> Result<usize> {
        Ok(argmax(&self.logits(image)?))
    }

    /// Loss, prediction and full gradient for one labelled image.
    pub fn example(&self, image: &Image, label: u8) -> Result<ExampleResult> {
        let (features, pre) = self.features(image)?;
        let z = self.hidden.forward(&features)?;
        let h = relu_forward(&z);
        let logits = self.output.forward(&h)?;
        let (loss, dlogits) = softmax_xent(&logits, label as usize)?;
        let out_g = self.output.backward(&h, &dlogits)?;
        let dz = relu_backward(&z, &out_g.input);
        let hid_g = self.hidden.backward(&features, &dz)?;

        let mut quantum = Vec::new();
        let mut classical = Vec::new();
        match &self.frontend {
            Frontend::Quanv(q) => {
                let (oh, ow, ch) = q.output_dims(SIDE, SIDE);
                let upstream = FeatureMap::from_values(oh, ow, ch, hid_g.input)?;
                quantum = q
                    .backward(&image_map(image), &upstream)?
                    .into_iter()
                    .map(|g| g.to_vec())
                    .collect();
            }
            Frontend::Conv { layer, relu } => {
                let pre = pre.expect("conv frontend keeps its pre-activation");
                let dpre = if *relu {
                    relu_backward(pre.values(), &hid_g.input)
                } else {
                    hid_g.input
                };
                let (oh, ow, ch) = pre.dims();
                let g = layer.backward(&image_map(image), &FeatureMap::from_values(oh, ow, ch, dpre)?)?;
                classical.push(g.kernels);
                classical.push(g.bias);
            }
            Frontend::Flatten => {}
        }
        classical.extend([hid_g.weights, hid_g.bias, out_g.weights, out_g.bias]);
        Ok(ExampleResult {
            loss,
            prediction: argmax(&logits),
            grads: Grads { quantum, classical },
        })
    }

    /// Mutable parameter slices: (quantum group, classical group), in the
    /// same order as [`Grads`].
    pub fn param_groups_mut(&mut self) -> (Vec<&mut [f64]>, Vec<&mut [f64]>) {
        let mut quantum: Vec<&mut [f64]> = Vec::new();
        let mut classical: Vec<&mut [f64]> = Vec::new();
        match &mut self.frontend {
            Frontend::Quanv(q) => {
                for f in q.filters_mut() {
                    quantum.push(f.params_mut().as_mut_slice());
                }
            }
            Frontend::Conv { layer, .. } => {
                classical.push(&mut layer.kernels);
                classical.push(&mut layer.bias);
            }
            Frontend::Flatten => {}
        }
        classical.push(&mut self.hidden.weights);
        classical.push(&mut self.hidden.bias);
        classical.push(&mut self.output.weights);
        classical.push(&mut self.output.bias);
        (quantum, classical)
    }

    /// All parameters as named tensors, in checkpoint order.
    pub fn tensors(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        match &self.frontend {
            Frontend::Quanv(q) => {
                let values = q.filters().iter().flat_map(|f| f.params().iter().copied()).collect();
                out.push(Tensor::new("quanv.params", vec![q.channels(), FILTER_PARAMS], values));
            }
            Frontend::Conv { layer, .. } => {
                out.push(Tensor::new(
                    "conv.kernels",
                    vec![layer.channels(), 2, 2],
                    layer.kernels.clone(),
                ));
                out.push(Tensor::new("conv.bias", vec![layer.channels()], layer.bias.clone()));
            }
            Frontend::Flatten => {}
        }
        for (name, layer) in [("hidden", &self.hidden), ("output", &self.output)] {
            out.push(Tensor::new(
                &format!("{name}.weights"),
                vec![layer.out_dim(), layer.in_dim()],
                layer.weights.clone(),
            ));
            out.push(Tensor::new(
                &format!("{name}.bias"),
                vec![layer.out_dim()],
                layer.bias.clone(),
            ));
        }
        out
    }

    /// Rebuilds a model from tensors; names, order and shapes must match the
    /// architecture exactly.
    pub fn from_tensors(kind: ModelKind, config: ModelConfig, tensors: &[Tensor]) -> Result<Self> {
        let mut model = Model::new(kind, config, 0).map_err(|e| Error::Format(e.to_string()))?;
        let expected = model.tensors();
        if expected.len() != tensors.len() {
            return Err(Error::Format(format!(
                "{kind} model has {} tensors, checkpoint has {}",
                expected.len(),
                tensors.len()
            )));
        }
        for (want, got) in expected.iter().zip(tensors) {
            if want.name != got.name || want.shape != got.shape || got.values.len() != want.values.len() {
                return Err(Error::Format(format!(
                    "checkpoint tensor `{}` {:?} does not match model tensor `{}` {:?}",
                    got.name, got.shape, want.name, want.shape
                )));
            }
            if let Some(v) = got.values.iter().find(|v| !v.is_finite()) {
                return Err(Error::Format(format!(
                    "tensor `{}` holds non-finite value {v}",
                    got.name
                )));
            }
        }
        let mut it = tensors.iter();
        match &mut model.frontend {
            Frontend::Quanv(q) => {
                let t = it.next().expect("length checked");
                for (f, chunk) in q.filters_mut().iter_mut().zip(t.values.chunks_exact(FILTER_PARAMS)) {
                    *f = QuanvFilter::new(chunk.try_into().expect("chunk has filter width"));
                }
            }
            Frontend::Conv { layer, .. } => {
                layer.kernels = it.next().expect("length checked").values.clone();
                layer.bias = it.next().expect("length checked").values.clone();
            }
            Frontend::Flatten => {}
        }
        for layer in [&mut model.hidden, &mut model.output] {
            layer.weights = it.next().expect("length checked").values.clone();
            layer.bias = it.next().expect("length checked").values.clone();
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(seed: u64) -> Image {
        let mut rng = Rng64::seed_from_u64(seed);
        let mut img = [0.0; SIDE * SIDE];
        for p in img.iter_mut() {
            *p = rng.next_f64();
        }
        img
    }

    #[test]
    fn feature_shapes() {
        let c = ModelConfig::default();
        let q = Model::new(ModelKind::Qcnn, c, 1).unwrap();
        assert_eq!(q.feature_dims(), Some((9, 9, 8)));
        assert_eq!(q.hidden().in_dim(), 648);
        assert_eq!(q.hidden().out_dim(), 64);
        assert_eq!(q.output().out_dim(), 10);
        let cnn = Model::new(ModelKind::Cnn, c, 1).unwrap();
        assert_eq!(cnn.feature_dims(), Some((9, 9, 8)));
        let fc = Model::new(ModelKind::Fc, c, 1).unwrap();
        assert_eq!(fc.hidden().in_dim(), 100);
        let strided = Model::new(ModelKind::Qcnn, ModelConfig { stride: 2, ..c }, 1).unwrap();
        assert_eq!(strided.hidden().in_dim(), 5 * 5 * 8);
        assert_eq!(q.logits(&image(0)).unwrap().len(), 10);
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let c = ModelConfig::default();
        assert_eq!(
            Model::new(ModelKind::Qcnn, c, 5).unwrap(),
            Model::new(ModelKind::Qcnn, c, 5).unwrap()
        );
        assert_ne!(
            Model::new(ModelKind::Fc, c, 5).unwrap(),
            Model::new(ModelKind::Fc, c, 6).unwrap()
        );
    }

    fn check_gradients(kind: ModelKind, conv_relu: bool) {
        let c = ModelConfig {
            channels: 3,
            stride: 1,
            conv_relu,
        };
        let mut model = Model::new(kind, c, 11).unwrap();
        let img = image(3);
        let label = 7;
        let res = model.example(&img, label).unwrap();
        let analytic: Vec<f64> = res
            .grads
            .quantum
            .iter()
            .chain(&res.grads.classical)
            .flatten()
            .copied()
            .collect();

        let h = 1e-5;
        let n_params = analytic.len();
        let mut rng = Rng64::seed_from_u64(4);
        for _ in 0..40 {
            let k = rng.below(n_params);
            let bump = |m: &mut Model, delta: f64| {
                let (q, cl) = m.param_groups_mut();
                let mut idx = k;
                for s in q.into_iter().chain(cl) {
                    if idx < s.len() {
                        s[idx] += delta;
                        return;
                    }
                    idx -= s.len();
                }
            };
            bump(&mut model, h);
            let plus = model.example(&img, label).unwrap().loss;
            bump(&mut model, -2.0 * h);
            let minus = model.example(&img, label).unwrap().loss;
            bump(&mut model, h);
            let fd = (plus - minus) / (2.0 * h);
            let tol = 1e-6 * (1.0 + fd.abs());
            assert!(
                (fd - analytic[k]).abs() < tol,
                "{kind} param {k}: fd {fd} vs {}",
                analytic[k]
            );
        }
    }

    #[test]
    fn model_gradients_match_finite_differences() {
        check_gradients(ModelKind::Fc, false);
        check_gradients(ModelKind::Cnn, false);
        check_gradients(ModelKind::Cnn, true);
        check_gradients(ModelKind::Qcnn, false);
    }

    #[test]
    fn tensor_round_trip_and_mismatch() {
        let c = ModelConfig::default();
        for kind in ModelKind::ALL {
            let m = Model::new(kind, c, 9).unwrap();
            let back = Model::from_tensors(kind, c, &m.tensors()).unwrap();
            assert_eq!(back, m);
        }
        let q = Model::new(ModelKind::Qcnn, c, 9).unwrap();
        assert!(matches!(
            Model::from_tensors(ModelKind::Cnn, c, &q.tensors()),
            Err(Error::Format(_))
        ));
        let wide = ModelConfig { channels: 4, ..c };
        assert!(matches!(
            Model::from_tensors(ModelKind::Qcnn, wide, &q.tensors()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn mean_of_grads_is_ordered_average() {
        let a = Grads {
            quantum: vec![vec![1.0]],
            classical: vec![vec![2.0, 4.0]],
        };
        let b = Grads {
            quantum: vec![vec![3.0]],
            classical: vec![vec![0.0, 0.0]],
        };
        let m = Grads::mean_of(&[a, b]).unwrap();
        assert_eq!(m.quantum, vec![vec![2.0]]);
        assert_eq!(m.classical, vec![vec![1.0, 2.0]]);
        assert!(Grads::mean_of(&[]).is_none());
    }

    #[test]
    fn model_names_parse() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.name().parse::<ModelKind>().unwrap(), kind);
        }
        assert!(matches!("rnn".parse::<ModelKind>(), Err(Error::Usage(_))));
    }
}
