use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use quanvolute::harness::{self, checkpoint, Config};
use quanvolute::Result;

#[derive(Parser)]
#[command(
    name = "quanvolute",
    version,
    about = "Quanvolutional and reversed-MERA QCNN experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model on MNIST; writes <model>.csv and <model>.ckpt.
    Train(Common),
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train qcnn, cnn and fc with one seed; writes compare.csv and summary.txt.
    Compare(Common),
    /// Train the reversed-MERA QCNN on synthetic states; writes qcnn_demo.csv.
    QcnnDemo {
        /// Register size (4 or 8).
        #[arg(long)]
        qubits: Option<String>,
        /// controlled_gate or measure_correct.
        #[arg(long)]
        pool_mode: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Flat key=value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// MNIST IDX directory (falls back to $QUANVOLUTE_DATA_DIR, then data/mnist).
    #[arg(long)]
    data_dir: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    stride: Option<String>,
    #[arg(long)]
    channels: Option<String>,
    /// Evaluate on all 10000 test images instead of the first eval_size.
    #[arg(long)]
    full_eval: bool,
    /// Record measured wall time in the CSV (makes output nondeterministic).
    #[arg(long)]
    wall_time: bool,
    /// Set any config key, e.g. --set batch_size=25. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl Common {
    fn into_config(self, epochs_key: &str) -> Result<Config> {
        let mut config = match &self.config {
            Some(path) => Config::from_file(path)?,
            None => Config::default(),
        };
        for kv in &self.sets {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| quanvolute::Error::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            config.set(k.trim(), v.trim())?;
        }
        let flags = [
            ("model", self.model),
            (epochs_key, self.epochs),
            ("seed", self.seed),
            ("data_dir", self.data_dir),
            ("out", self.out),
            ("threads", self.threads),
            ("stride", self.stride),
            ("channels", self.channels),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, &v)?;
            }
        }
        if self.full_eval {
            config.full_eval = true;
        }
        if self.wall_time {
            config.wall_time = true;
        }
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let config = common.into_config("epochs")?;
            let out = harness::cmd_train(&config)?;
            if let Some(last) = out.history.last() {
                println!("final eval_acc {}", last.eval_accuracy);
            }
            println!("metrics: {}", out.csv_path.display());
            println!("checkpoint: {}", out.checkpoint_path.display());
        }
        Command::Eval {
            checkpoint: path,
            common,
        } => {
            let config = common.into_config("epochs")?;
            let model = checkpoint::load(&path)?;
            println!("model {}", model.kind());
            let e = harness::cmd_eval(&config, &path)?;
            print!("{}", harness::format_evaluation(&e));
        }
        Command::Compare(common) => {
            let config = common.into_config("epochs")?;
            let out = harness::cmd_compare(&config)?;
            print!("{}", out.summary);
            println!("metrics: {}", out.csv_path.display());
        }
        Command::QcnnDemo {
            qubits,
            pool_mode,
            common,
        } => {
            let mut config = common.into_config("qcnn_epochs")?;
            if let Some(q) = qubits {
                config.set("qubits", &q)?;
            }
            if let Some(p) = pool_mode {
                config.set("pool_mode", &p)?;
            }
            for n in [4, 8] {
                let depth = quanvolute::mera::build_qcnn(n, config.pool_mode)?.depth();
                println!("n={n} depth={depth}");
            }
            let out = harness::cmd_qcnn_demo(&config)?;
            if let Some(last) = out.history.last() {
                println!(
                    "n={} {} depth={} final eval_acc {}",
                    config.qubits, config.pool_mode, out.depth, last.eval_accuracy
                );
            }
            println!("metrics: {}", out.csv_path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
