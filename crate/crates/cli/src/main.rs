use std::path::PathBuf;
use std::process::ExitCode;

use ae1svm::commands::{self, EvalInputs};
use ae1svm::config::{Generator, RunConfig};
use ae1svm::dataset::LabelSchema;
use ae1svm::Result;
use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};

#[derive(Parser)]
#[command(name = "ae1svm", version, about = "Autoencoder + one-class SVM anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled dataset as CSV.
    Generate {
        #[arg(long)]
        generator: Generator,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model. Flags override values from the config file.
    Train(TrainArgs),
    /// Score every row of a CSV file.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Margin gradients with respect to the raw features of selected rows.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated zero-based row indices.
        #[arg(long, value_delimiter = ',', required = true)]
        rows: Vec<usize>,
        /// Reshape each gradient to an image, e.g. 16x16.
        #[arg(long)]
        shape: Option<String>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// AUROC, AUPRC, curves and histogram for a scores file.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        /// CSV file holding the label column for the scored rows.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        normal_labels: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "-1")]
        anomaly_labels: Vec<String>,
        #[arg(long)]
        train_report: Option<PathBuf>,
        /// Defaults to the metadata file written next to the scores.
        #[arg(long)]
        score_meta: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<u64>,
    #[arg(long)]
    batch_size: Option<u64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// joint or two-stage
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, value_delimiter = ',')]
    encoder_dims: Option<Vec<u64>>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    num_features: Option<u64>,
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
    #[arg(long)]
    split: Option<f64>,
}

impl TrainArgs {
    fn overrides(&self) -> Table {
        let mut t = Table::new();
        let mut int = |k: &str, v: Option<u64>| {
            if let Some(v) = v {
                t.insert(k.into(), Value::Integer(v.min(i64::MAX as u64) as i64));
            }
        };
        int("seed", self.seed);
        int("epochs", self.epochs);
        int("batch_size", self.batch_size);
        int("num_features", self.num_features);
        for (k, v) in [
            ("learning_rate", self.learning_rate),
            ("nu", self.nu),
            ("alpha", self.alpha),
            ("sigma", self.sigma),
            ("split", self.split),
        ] {
            if let Some(v) = v {
                t.insert(k.into(), Value::Float(v));
            }
        }
        for (k, v) in [
            ("mode", &self.mode),
            ("activation", &self.activation),
            ("dataset", &self.dataset),
            ("generator", &self.generator),
            ("label_column", &self.label_column),
            ("output_dir", &self.output_dir),
        ] {
            if let Some(v) = v {
                t.insert(k.into(), Value::String(v.clone()));
            }
        }
        if let Some(d) = &self.encoder_dims {
            t.insert(
                "encoder_dims".into(),
                Value::Array(d.iter().map(|&x| Value::Integer(x.min(i64::MAX as u64) as i64)).collect()),
            );
        }
        t
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { generator, seed, out } => {
            let (rows, cols) = commands::generate(generator, seed, &out)?;
            println!("wrote {rows} rows x {cols} columns to {}", out.display());
        }
        Command::Train(args) => {
            let cfg = RunConfig::load(args.config.as_deref(), args.overrides())?;
            let outcome = commands::train(&cfg)?;
            let s = &outcome.summary;
            if let (Some(first), Some(last)) = (s.epochs.first(), s.epochs.last()) {
                println!("objective {:.6} -> {:.6} over {} epochs", first.objective, last.objective, s.epochs.len());
            }
            println!(
                "trained on {} rows in {:.3}s; model written to {}",
                s.n_train,
                s.train_seconds,
                outcome.model_path.display()
            );
        }
        Command::Score { model, data, out } => {
            let meta = commands::score(&model, &data, &out)?;
            println!("scored {} rows in {:.3}s; wrote {}", meta.n_rows, meta.score_seconds, out.display());
        }
        Command::Explain {
            model,
            data,
            rows,
            shape,
            out_dir,
        } => {
            let shape = shape.as_deref().map(commands::parse_shape).transpose()?;
            let results = commands::explain(&model, &data, &rows, shape, &out_dir)?;
            println!("wrote gradients for {} rows to {}", results.len(), out_dir.display());
        }
        Command::Eval {
            scores,
            labels,
            label_column,
            normal_labels,
            anomaly_labels,
            train_report,
            score_meta,
            bins,
            out_dir,
        } => {
            let default_meta = commands::meta_path_for(&scores);
            let score_meta = score_meta.or_else(|| default_meta.exists().then_some(default_meta));
            let m = commands::eval(&EvalInputs {
                scores: &scores,
                labels: &labels,
                label_schema: LabelSchema {
                    column: label_column,
                    normal_values: normal_labels,
                    anomaly_values: anomaly_labels,
                },
                train_report: train_report.as_deref(),
                score_meta: score_meta.as_deref(),
                bins,
                out_dir: &out_dir,
            })?;
            println!("auroc {:.6} auprc {:.6} over {} rows", m.auroc, m.auprc, m.n_test);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

