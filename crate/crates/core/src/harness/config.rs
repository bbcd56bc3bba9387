//! Flat `key = value` configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Command-line flags
//! are applied after the file through the same [`Config::set`] entry point,
//! so they always win.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `model` | `qcnn` | `qcnn`, `cnn` or `fc` (`train` only) |
//! | `epochs` | `5` | MNIST training epochs |
//! | `samples_per_epoch` | `2500` | images drawn per epoch |
//! | `batch_size` | `10` | minibatch size |
//! | `seed` | `0` | master seed |
//! | `quantum_lr` | `0.01` | Adam step for quanv angles |
//! | `classical_lr` | `0.001` | Adam step for classical weights |
//! | `channels` | `8` | quanv filters / conv kernels |
//! | `stride` | `1` | window stride |
//! | `conv_relu` | `false` | ReLU after the classical conv |
//! | `data_dir` | | MNIST IDX directory |
//! | `out` | `out` | output directory |
//! | `eval_size` | `500` | test images used for evaluation |
//! | `full_eval` | `false` | evaluate on the whole test split |
//! | `threads` | | worker thread cap |
//! | `wall_time` | `false` | write measured wall time instead of `0` |
//! | `qubits` | `4` | QCNN demo register size |
//! | `pool_mode` | `controlled_gate` | QCNN demo pooling |
//! | `qcnn_epochs` | `30` | QCNN demo epochs |
//! | `qcnn_train_size` | `200` | QCNN demo training states |
//! | `qcnn_eval_size` | `200` | QCNN demo held-out states |
//! | `qcnn_batch_size` | `10` | QCNN demo minibatch |
//! | `qcnn_lr` | `0.05` | QCNN demo Adam step |

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mera::PoolMode;
use crate::model::{ModelConfig, ModelKind};
use crate::train::TrainSettings;

pub const DATA_DIR_ENV: &str = "QUANVOLUTE_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "data/mnist";

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub model: ModelKind,
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub quantum_lr: f64,
    pub classical_lr: f64,
    pub channels: usize,
    pub stride: usize,
    pub conv_relu: bool,
    pub data_dir: Option<PathBuf>,
    pub out: PathBuf,
    pub eval_size: usize,
    pub full_eval: bool,
    pub threads: Option<usize>,
    pub wall_time: bool,
    pub qubits: usize,
    pub pool_mode: PoolMode,
    pub qcnn_epochs: usize,
    pub qcnn_train_size: usize,
    pub qcnn_eval_size: usize,
    pub qcnn_batch_size: usize,
    pub qcnn_lr: f64,
}

impl Default for Config {
    fn default() -> Self {
        let t = TrainSettings::default();
        let m = ModelConfig::default();
        Config {
            model: ModelKind::Qcnn,
            epochs: t.epochs,
            samples_per_epoch: t.samples_per_epoch,
            batch_size: t.batch_size,
            seed: t.seed,
            quantum_lr: t.quantum_lr,
            classical_lr: t.classical_lr,
            channels: m.channels,
            stride: m.stride,
            conv_relu: m.conv_relu,
            data_dir: None,
            out: PathBuf::from("out"),
            eval_size: 500,
            full_eval: false,
            threads: None,
            wall_time: false,
            qubits: 4,
            pool_mode: PoolMode::ControlledGate,
            qcnn_epochs: 30,
            qcnn_train_size: 200,
            qcnn_eval_size: 200,
            qcnn_batch_size: 10,
            qcnn_lr: 0.05,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Usage(format!("invalid value `{value}` for `{key}`")))
}

fn positive(key: &str, value: &str) -> Result<usize> {
    match parse::<usize>(key, value)? {
        0 => Err(Error::Usage(format!("`{key}` must be positive"))),
        n => Ok(n),
    }
}

fn rate(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse(key, value)?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Error::Usage(format!("`{key}` must be a finite non-negative number")))
    }
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model" => self.model = value.parse()?,
            "epochs" => self.epochs = parse(key, value)?,
            "samples_per_epoch" => self.samples_per_epoch = positive(key, value)?,
            "batch_size" => self.batch_size = positive(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "quantum_lr" => self.quantum_lr = rate(key, value)?,
            "classical_lr" => self.classical_lr = rate(key, value)?,
            "channels" => self.channels = positive(key, value)?,
            "stride" => self.stride = positive(key, value)?,
            "conv_relu" => self.conv_relu = parse(key, value)?,
            "data_dir" => self.data_dir = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "eval_size" => self.eval_size = positive(key, value)?,
            "full_eval" => self.full_eval = parse(key, value)?,
            "threads" => self.threads = Some(positive(key, value)?),
            "wall_time" => self.wall_time = parse(key, value)?,
            "qubits" => self.qubits = parse(key, value)?,
            "pool_mode" => self.pool_mode = value.parse()?,
            "qcnn_epochs" => self.qcnn_epochs = parse(key, value)?,
            "qcnn_train_size" => self.qcnn_train_size = positive(key, value)?,
            "qcnn_eval_size" => self.qcnn_eval_size = positive(key, value)?,
            "qcnn_batch_size" => self.qcnn_batch_size = positive(key, value)?,
            "qcnn_lr" => self.qcnn_lr = rate(key, value)?,
            other => return Err(Error::Usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Config::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    /// `data_dir`, else `$QUANVOLUTE_DATA_DIR`, else `data/mnist`.
    pub fn resolved_data_dir(&self) -> PathBuf {
        self.data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            channels: self.channels,
            stride: self.stride,
            conv_relu: self.conv_relu,
        }
    }

    pub fn train_settings(&self) -> TrainSettings {
        TrainSettings {
            epochs: self.epochs,
            samples_per_epoch: self.samples_per_epoch,
            batch_size: self.batch_size,
            seed: self.seed,
            quantum_lr: self.quantum_lr,
            classical_lr: self.classical_lr,
        }
    }

    /// Number of test images to evaluate on; `None` means all of them.
    pub fn eval_limit(&self) -> Option<usize> {
        (!self.full_eval).then_some(self.eval_size)
    }
}
