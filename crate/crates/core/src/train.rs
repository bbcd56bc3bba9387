//! Epoch loop for the MNIST models.
//!
//! Every epoch draws `samples_per_epoch` images with [`epoch_sample`], so all
//! models trained with one seed see the same subsets in the same order.
//! Per-example gradients of a minibatch run in parallel and are averaged in
//! example order; updates use one Adam instance per parameter group.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mnist::{epoch_sample, Dataset, CLASSES};
use crate::model::{Grads, Model};
use crate::nn::Optimizer;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub quantum_lr: f64,
    pub classical_lr: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            epochs: 5,
            samples_per_epoch: crate::mnist::SAMPLES_PER_EPOCH,
            batch_size: 10,
            seed: 0,
            quantum_lr: 1e-2,
            classical_lr: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub eval_accuracy: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: [[usize; CLASSES]; CLASSES],
}

impl Evaluation {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

pub fn evaluate(model: &Model, data: &Dataset) -> Result<Evaluation> {
    let predictions = data
        .images
        .par_iter()
        .map(|img| model.predict(img))
        .collect::<Result<Vec<_>>>()?;
    let mut confusion = [[0usize; CLASSES]; CLASSES];
    let mut correct = 0;
    for (&label, &pred) in data.labels.iter().zip(&predictions) {
        confusion[label as usize][pred] += 1;
        correct += (label as usize == pred) as usize;
    }
    let accuracy = if data.is_empty() {
        0.0
    } else {
        correct as f64 / data.len() as f64
    };
    Ok(Evaluation { accuracy, confusion })
}

pub struct Trainer {
    pub model: Model,
    settings: TrainSettings,
    quantum_opt: Optimizer,
    classical_opt: Optimizer,
}

impl Trainer {
    pub fn new(model: Model, settings: TrainSettings) -> Result<Self> {
        if settings.batch_size == 0 || settings.samples_per_epoch == 0 {
            return Err(Error::Usage("batch_size and samples_per_epoch must be positive".into()));
        }
        let quantum_opt = Optimizer::adam(settings.quantum_lr).map_err(|e| Error::Usage(e.to_string()))?;
        let classical_opt = Optimizer::adam(settings.classical_lr).map_err(|e| Error::Usage(e.to_string()))?;
        Ok(Trainer {
            model,
            settings,
            quantum_opt,
            classical_opt,
        })
    }

    fn apply(&mut self, grads: &Grads) -> Result<()> {
        let (mut quantum, mut classical) = self.model.param_groups_mut();
        let qg: Vec<&[f64]> = grads.quantum.iter().map(Vec::as_slice).collect();
        let cg: Vec<&[f64]> = grads.classical.iter().map(Vec::as_slice).collect();
        if !quantum.is_empty() {
            self.quantum_opt.step(&mut quantum, &qg)?;
        }
        self.classical_opt.step(&mut classical, &cg)
    }

    /// Runs epoch `epoch` (0-based) and evaluates on `eval`.
    pub fn run_epoch(&mut self, epoch: usize, train: &Dataset, eval: &Dataset) -> Result<MetricRecord> {
        let start = Instant::now();
        let order = epoch_sample(
            train.len(),
            self.settings.samples_per_epoch,
            self.settings.seed,
            epoch as u64,
        )
        .map_err(|e| Error::Usage(e.to_string()))?;
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(self.settings.batch_size) {
            let model = &self.model;
            let results = batch
                .par_iter()
                .map(|&i| model.example(&train.images[i], train.labels[i]))
                .collect::<Result<Vec<_>>>()?;
            let mut grads = Vec::with_capacity(results.len());
            for (r, &i) in results.into_iter().zip(batch) {
                loss_sum += r.loss;
                correct += (r.prediction == train.labels[i] as usize) as usize;
                grads.push(r.grads);
            }
            if !loss_sum.is_finite() {
                return Err(Error::Divergence(format!(
                    "training loss became {loss_sum} in epoch {}",
                    epoch + 1
                )));
            }
            let mean = Grads::mean_of(&grads).expect("batches are nonempty");
            self.apply(&mean)?;
        }
        let n = order.len() as f64;
        let eval_accuracy = evaluate(&self.model, eval)?.accuracy;
        Ok(MetricRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            eval_accuracy,
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }

    /// Trains for `settings.epochs`, calling `on_epoch` after each one.
    pub fn fit(
        &mut self,
        train: &Dataset,
        eval: &Dataset,
        mut on_epoch: impl FnMut(&MetricRecord),
    ) -> Result<Vec<MetricRecord>> {
        let mut history = Vec::with_capacity(self.settings.epochs);
        for epoch in 0..self.settings.epochs {
            let record = self.run_epoch(epoch, train, eval)?;
            on_epoch(&record);
            history.push(record);
        }
        Ok(history)
    }
}
