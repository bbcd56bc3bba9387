//! Subcommand implementations behind the `quanvolute` binary.
//!
//! Every command is a plain function of a [`Config`], so tests drive them
//! without spawning a process. Output files land in `config.out`:
//!
//! * `train`: `<model>.csv` and `<model>.ckpt`
//! * `compare`: `compare.csv` and `summary.txt`
//! * `qcnn-demo`: `qcnn_demo.csv`

pub mod checkpoint;
pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub use config::Config;

use crate::error::{Error, Result};
use crate::mera::{self, build_qcnn, synth_dataset, QcnnEpoch, QcnnTrainConfig};
use crate::mnist::{Dataset, Split, CLASSES};
use crate::model::{Model, ModelKind};
use crate::nn::Optimizer;
use crate::train::{evaluate, Evaluation, MetricRecord, Trainer};

pub const CSV_HEADER: &str = "model,epoch,train_loss,train_acc,eval_acc,wall_time_s";
pub const DEMO_CSV_HEADER: &str = "n_qubits,pool_mode,depth,epoch,train_loss,train_acc,eval_acc";

/// One CSV line (with trailing `\n`). Wall time is written as `0` unless
/// `wall_time` is set, keeping the default output a pure function of the
/// configuration.
pub fn csv_row(model: ModelKind, r: &MetricRecord, wall_time: bool) -> String {
    let wall = if wall_time { r.wall_time_s } else { 0.0 };
    format!(
        "{model},{},{},{},{},{wall}\n",
        r.epoch, r.train_loss, r.train_accuracy, r.eval_accuracy
    )
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {n} worker threads: {e}")))?
            .install(f),
    }
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Training split and the evaluation prefix of the test split.
pub fn load_data(config: &Config) -> Result<(Dataset, Dataset)> {
    let dir = config.resolved_data_dir();
    let train = Dataset::load(&dir, Split::Train, None)?;
    let eval = Dataset::load(&dir, Split::Test, config.eval_limit())?;
    Ok((train, eval))
}

fn train_one(config: &Config, kind: ModelKind, train: &Dataset, eval: &Dataset) -> Result<(Model, Vec<MetricRecord>)> {
    let model = Model::new(kind, config.model_config(), config.seed)?;
    let mut trainer = Trainer::new(model, config.train_settings())?;
    let history = trainer.fit(train, eval, |r| {
        eprintln!(
            "{kind} epoch {}: loss {:.4} train_acc {:.4} eval_acc {:.4} ({:.1}s)",
            r.epoch, r.train_loss, r.train_accuracy, r.eval_accuracy, r.wall_time_s
        )
    })?;
    Ok((trainer.model, history))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub csv_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub history: Vec<MetricRecord>,
}

pub fn cmd_train(config: &Config) -> Result<TrainOutcome> {
    with_threads(config.threads, || {
        let (train, eval) = load_data(config)?;
        let (model, history) = train_one(config, config.model, &train, &eval)?;
        create_out(&config.out)?;
        let mut csv = format!("{CSV_HEADER}\n");
        for r in &history {
            csv.push_str(&csv_row(config.model, r, config.wall_time));
        }
        let csv_path = config.out.join(format!("{}.csv", config.model));
        let checkpoint_path = config.out.join(format!("{}.ckpt", config.model));
        write(&csv_path, &csv)?;
        checkpoint::save(&model, &checkpoint_path)?;
        Ok(TrainOutcome {
            csv_path,
            checkpoint_path,
            history,
        })
    })
}

/// Accuracy line followed by the confusion matrix (rows: true label).
pub fn format_evaluation(e: &Evaluation) -> String {
    let correct: usize = (0..CLASSES).map(|c| e.confusion[c][c]).sum();
    let mut s = format!("accuracy {} ({correct}/{})\n", e.accuracy, e.total());
    s.push_str("true\\pred");
    for c in 0..CLASSES {
        write!(s, " {c:>5}").unwrap();
    }
    s.push('\n');
    for (t, row) in e.confusion.iter().enumerate() {
        write!(s, "{t:>9}").unwrap();
        for n in row {
            write!(s, " {n:>5}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn cmd_eval(config: &Config, checkpoint_path: &Path) -> Result<Evaluation> {
    with_threads(config.threads, || {
        let model = checkpoint::load(checkpoint_path)?;
        let eval = Dataset::load(&config.resolved_data_dir(), Split::Test, config.eval_limit())?;
        evaluate(&model, &eval)
    })
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    /// Final eval accuracy per model, best first.
    pub ranking: Vec<(ModelKind, f64)>,
    pub summary: String,
}

pub fn cmd_compare(config: &Config) -> Result<CompareOutcome> {
    with_threads(config.threads, || {
        let (train, eval) = load_data(config)?;
        let mut csv = format!("{CSV_HEADER}\n");
        let mut ranking = Vec::new();
        for kind in ModelKind::ALL {
            let (_, history) = train_one(config, kind, &train, &eval)?;
            for r in &history {
                csv.push_str(&csv_row(kind, r, config.wall_time));
            }
            let last = history.last();
            ranking.push((
                kind,
                last.map_or(0.0, |r| r.eval_accuracy),
                last.map_or(f64::NAN, |r| r.train_loss),
            ));
        }
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut summary = format!(
            "final results after {} epochs (seed {}, {} eval images)\nmodel  eval_acc  train_loss\n",
            config.epochs,
            config.seed,
            eval.len()
        );
        for (kind, acc, loss) in &ranking {
            writeln!(summary, "{:<5}  {acc:<8.4}  {loss:.4}", kind.name()).unwrap();
        }
        create_out(&config.out)?;
        let csv_path = config.out.join("compare.csv");
        let summary_path = config.out.join("summary.txt");
        write(&csv_path, &csv)?;
        write(&summary_path, &summary)?;
        Ok(CompareOutcome {
            csv_path,
            summary_path,
            ranking: ranking.into_iter().map(|(k, a, _)| (k, a)).collect(),
            summary,
        })
    })
}

#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub csv_path: PathBuf,
    pub depth: usize,
    pub history: Vec<QcnnEpoch>,
}

/// Trains the reversed-MERA QCNN on the synthetic state task. The first
/// `qcnn_train_size` states train, the next `qcnn_eval_size` are held out.
pub fn cmd_qcnn_demo(config: &Config) -> Result<DemoOutcome> {
    if !config.qcnn_train_size.is_multiple_of(2) || !config.qcnn_eval_size.is_multiple_of(2) {
        return Err(Error::Usage("qcnn_train_size and qcnn_eval_size must be even".into()));
    }
    with_threads(config.threads, || {
        let model = build_qcnn(config.qubits, config.pool_mode)?;
        let mut data = synth_dataset(
            config.qubits,
            config.qcnn_train_size + config.qcnn_eval_size,
            config.seed,
        )?;
        let eval = data.split_off(config.qcnn_train_size);
        let mut params = model.init_params(config.seed);
        let mut optimizer = Optimizer::adam(config.qcnn_lr).map_err(|e| Error::Usage(e.to_string()))?;
        let train_config = QcnnTrainConfig {
            epochs: config.qcnn_epochs,
            batch_size: config.qcnn_batch_size,
            seed: config.seed,
        };
        let history = mera::train_qcnn(&model, &mut params, &data, &eval, &train_config, &mut optimizer)?;
        let depth = model.depth();
        let mut csv = format!("{DEMO_CSV_HEADER}\n");
        for e in &history {
            writeln!(
                csv,
                "{},{},{depth},{},{},{},{}",
                config.qubits,
                config.pool_mode,
                e.epoch + 1,
                e.train_loss,
                e.train_accuracy,
                e.eval_accuracy
            )
            .unwrap();
        }
        create_out(&config.out)?;
        let csv_path = config.out.join("qcnn_demo.csv");
        write(&csv_path, &csv)?;
        Ok(DemoOutcome {
            csv_path,
            depth,
            history,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_row_hides_wall_time_by_default() {
        let r = MetricRecord {
            epoch: 2,
            train_loss: 0.5,
            train_accuracy: 0.75,
            eval_accuracy: 0.8,
            wall_time_s: 3.25,
        };
        assert_eq!(csv_row(ModelKind::Fc, &r, false), "fc,2,0.5,0.75,0.8,0\n");
        assert_eq!(csv_row(ModelKind::Fc, &r, true), "fc,2,0.5,0.75,0.8,3.25\n");
    }

    #[test]
    fn evaluation_report_lists_every_class() {
        let mut confusion = [[0; CLASSES]; CLASSES];
        confusion[3][3] = 4;
        confusion[3][5] = 1;
        let e = Evaluation {
            accuracy: 0.8,
            confusion,
        };
        let text = format_evaluation(&e);
        assert!(text.starts_with("accuracy 0.8 (4/5)\n"));
        assert_eq!(text.lines().count(), 2 + CLASSES);
    }

    #[test]
    fn thread_cap_runs_inside_pool() {
        let n = with_threads(Some(3), || Ok(rayon::current_num_threads())).unwrap();
        assert_eq!(n, 3);
    }
}
