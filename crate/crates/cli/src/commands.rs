use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ae1svm_core::attribution::{end_to_end_grad, gradient_map, AttributionResult};
use ae1svm_core::data::{self, Label, LabeledDataset};
use ae1svm_core::eval::{self, ScoredSet};
use ae1svm_core::model::{Ae1SvmModel, EpochRecord};
use ae1svm_core::ocsvm::Decision;
use ae1svm_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::config::{mode_name, DataSource, Generator, RunConfig};
use crate::dataset::{self, FeatureEncoding, LabelSchema};
use crate::error::{CliError, Result};
use crate::model_file::ModelFile;
use crate::pgm;

pub const MODEL_FILE: &str = "model.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.toml";
pub const TRAIN_SPLIT_FILE: &str = "train.csv";
pub const TEST_SPLIT_FILE: &str = "test.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub mode: String,
    pub n_train: usize,
    pub train_seconds: f64,
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMeta {
    pub n_rows: usize,
    pub score_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auroc: f64,
    pub auprc: f64,
    pub n_train: Option<usize>,
    pub n_test: usize,
    pub train_seconds: Option<f64>,
    pub score_seconds: Option<f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Argument(e.to_string()))?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(path, e.to_string()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn generated(generator: Generator, seed: u64) -> LabeledDataset {
    let d = match generator {
        Generator::Gaussian => data::gen_gaussian(seed),
        Generator::Illustrative4d => data::gen_illustrative_4d(seed),
    };
    let (features, labels, _) = d.into_parts();
    let names = dataset::default_feature_names(features.cols());
    LabeledDataset::new(features, labels, Some(names)).expect("generated data is consistent")
}

/// Writes a generated dataset and returns `(rows, columns)` of the file, label included.
pub fn generate(generator: Generator, seed: u64, out: &Path) -> Result<(usize, usize)> {
    let d = generated(generator, seed);
    dataset::save_csv(out, &d)?;
    Ok((d.n_rows(), d.n_cols() + 1))
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model_path: PathBuf,
    pub summary: TrainSummary,
    pub file: ModelFile,
}

pub fn train(cfg: &RunConfig) -> Result<TrainOutcome> {
    ensure_dir(&cfg.output_dir)?;
    let (full, encoding) = match &cfg.source {
        DataSource::Csv(path) => dataset::load_csv(path, &cfg.csv_schema())?,
        DataSource::Generated(g) => {
            let d = generated(*g, cfg.train.seed);
            let enc = FeatureEncoding::numeric(d.feature_names().unwrap_or_default(), Some(cfg.label.clone()));
            (d, enc)
        }
    };

    let train_set = match cfg.split {
        Some(ratio) => {
            let (tr, te) = data::split_indices(&full, ratio, cfg.train.seed)?;
            let train_out = cfg.output_dir.join(TRAIN_SPLIT_FILE);
            let test_out = cfg.output_dir.join(TEST_SPLIT_FILE);
            match &cfg.source {
                DataSource::Csv(path) => {
                    dataset::copy_rows(path, &train_out, &tr)?;
                    dataset::copy_rows(path, &test_out, &te)?;
                }
                DataSource::Generated(_) => {
                    dataset::save_csv(&train_out, &full.select_rows(&tr))?;
                    dataset::save_csv(&test_out, &full.select_rows(&te))?;
                }
            }
            full.select_rows(&tr)
        }
        None => full,
    };

    let mut model = Ae1SvmModel::for_data(train_set.features(), &cfg.model, cfg.train.seed)?;
    let start = Instant::now();
    let report = model.fit(train_set.features(), &cfg.train)?;
    let train_seconds = start.elapsed().as_secs_f64();

    let file = ModelFile::new(model, encoding);
    let model_path = cfg.output_dir.join(MODEL_FILE);
    file.save(&model_path)?;
    let summary = TrainSummary {
        mode: mode_name(cfg.train.mode).to_string(),
        n_train: train_set.n_rows(),
        train_seconds,
        epochs: report.epochs,
    };
    write_json(&cfg.output_dir.join(TRAIN_REPORT_FILE), &summary)?;
    let cfg_path = cfg.output_dir.join(EFFECTIVE_CONFIG_FILE);
    fs::write(&cfg_path, cfg.to_toml()).map_err(|e| CliError::io(&cfg_path, e))?;
    Ok(TrainOutcome {
        model_path,
        summary,
        file,
    })
}

fn load_matching(file: &ModelFile, data_path: &Path) -> Result<LabeledDataset> {
    let d = dataset::load_csv_with(data_path, &file.encoding)?;
    if d.n_cols() != file.model.input_dim() {
        return Err(CliError::data(
            data_path,
            format!("feature width mismatch: expected {}, found {}", file.model.input_dim(), d.n_cols()),
        ));
    }
    Ok(d)
}

/// `scores.csv` becomes `scores.meta.json`.
pub fn meta_path_for(scores: &Path) -> PathBuf {
    scores.with_extension("meta.json")
}

pub fn score(model_path: &Path, data_path: &Path, out: &Path) -> Result<ScoreMeta> {
    let file = ModelFile::load(model_path)?;
    let d = load_matching(&file, data_path)?;
    let start = Instant::now();
    let scores = file.model.score(d.features())?;
    let score_seconds = start.elapsed().as_secs_f64();

    let mut w = csv::Writer::from_path(out).map_err(|e| CliError::data(out, e.to_string()))?;
    let io = |e: csv::Error| CliError::data(out, e.to_string());
    w.write_record(["row_index", "score", "decision"]).map_err(io)?;
    for (i, s) in scores.iter().enumerate() {
        let decision = Decision::from_margin(*s).as_sign();
        w.write_record([i.to_string(), s.to_string(), decision.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(out, e))?;
    let meta = ScoreMeta {
        n_rows: scores.len(),
        score_seconds,
    };
    write_json(&meta_path_for(out), &meta)?;
    Ok(meta)
}

/// Reads `(row_index, score)` pairs written by [`score`].
pub fn read_scores(path: &Path) -> Result<Vec<(usize, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::data(path, e.to_string()))?;
    let headers = r.headers().map_err(|e| CliError::data(path, e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::data(path, format!("column '{name}' not found")))
    };
    let (ri, si) = (col("row_index")?, col("score")?);
    let mut out = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::data(path, e.to_string()))?;
        let bad = || CliError::data(path, format!("line {}: malformed score row", n + 2));
        let idx: usize = rec.get(ri).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let s: f64 = rec.get(si).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        out.push((idx, s));
    }
    Ok(out)
}

pub fn parse_shape(s: &str) -> Result<(usize, usize)> {
    let bad = || CliError::Argument(format!("shape must look like HxW, got '{s}'"));
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    if h == 0 || w == 0 {
        return Err(bad());
    }
    Ok((h, w))
}

fn write_grid(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| CliError::data(path, e.to_string()))?;
    for row in m.iter_rows() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| CliError::data(path, e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Gradients of the decision margin for the selected rows, in raw feature units.
pub fn explain(
    model_path: &Path,
    data_path: &Path,
    rows: &[usize],
    shape: Option<(usize, usize)>,
    out_dir: &Path,
) -> Result<Vec<AttributionResult>> {
    let file = ModelFile::load(model_path)?;
    let d = load_matching(&file, data_path)?;
    if let Some(&bad) = rows.iter().find(|&&r| r >= d.n_rows()) {
        return Err(CliError::Argument(format!("row {bad} out of range for {} rows", d.n_rows())));
    }
    if let Some((h, w)) = shape {
        if h * w != d.n_cols() {
            return Err(CliError::Argument(format!("shape {h}x{w} does not cover {} features", d.n_cols())));
        }
    }
    ensure_dir(out_dir)?;

    let results: Vec<AttributionResult> = rows
        .iter()
        .map(|&r| end_to_end_grad(&file.model, d.features().row(r), r))
        .collect::<ae1svm_core::Result<_>>()?;

    let path = out_dir.join("gradients.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::data(&path, e.to_string()))?;
    let io = |e: csv::Error| CliError::data(&path, e.to_string());
    let mut header = vec!["row_index".to_string()];
    header.extend(file.encoding.feature_names());
    w.write_record(&header).map_err(io)?;
    for res in &results {
        let mut rec = vec![res.sample_index.to_string()];
        rec.extend(res.gradient.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    if let Some((h, wd)) = shape {
        for res in &results {
            let maps = gradient_map(res, h, wd)?;
            for (kind, m) in [("positive", &maps.positive), ("negative", &maps.negative), ("full", &maps.full)] {
                let stem = format!("row{}_{kind}", res.sample_index);
                write_grid(&out_dir.join(format!("{stem}.csv")), m)?;
                let pgm_path = out_dir.join(format!("{stem}.pgm"));
                fs::write(&pgm_path, pgm::encode(m)).map_err(|e| CliError::io(&pgm_path, e))?;
            }
        }
    }
    Ok(results)
}

#[derive(Debug, Clone)]
pub struct EvalInputs<'a> {
    pub scores: &'a Path,
    pub labels: &'a Path,
    pub label_schema: LabelSchema,
    pub train_report: Option<&'a Path>,
    pub score_meta: Option<&'a Path>,
    pub bins: usize,
    pub out_dir: &'a Path,
}

pub fn eval(inputs: &EvalInputs<'_>) -> Result<Metrics> {
    let scored = read_scores(inputs.scores)?;
    let labels = dataset::load_labels(inputs.labels, &inputs.label_schema)?;
    let mut aligned: Vec<Label> = Vec::with_capacity(scored.len());
    for &(idx, _) in &scored {
        let l = labels.get(idx).ok_or_else(|| {
            CliError::Core(ae1svm_core::Error::Metric(format!(
                "no label for scored row {idx} ({} labels available)",
                labels.len()
            )))
        })?;
        aligned.push(*l);
    }
    let set = ScoredSet::new(scored.iter().map(|s| s.1).collect(), aligned)?;
    let auroc = eval::auroc(&set)?;
    let auprc = eval::auprc(&set)?;

    ensure_dir(inputs.out_dir)?;
    let io_err = |p: &Path, e: csv::Error| CliError::data(p, e.to_string());

    let roc_path = inputs.out_dir.join("roc.csv");
    let mut w = csv::Writer::from_path(&roc_path).map_err(|e| io_err(&roc_path, e))?;
    w.write_record(["threshold", "tpr", "fpr"]).map_err(|e| io_err(&roc_path, e))?;
    for p in eval::roc_curve(&set)? {
        w.write_record([p.threshold.to_string(), p.tpr.to_string(), p.fpr.to_string()])
            .map_err(|e| io_err(&roc_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&roc_path, e))?;

    let pr_path = inputs.out_dir.join("pr.csv");
    let mut w = csv::Writer::from_path(&pr_path).map_err(|e| io_err(&pr_path, e))?;
    w.write_record(["threshold", "recall", "precision"]).map_err(|e| io_err(&pr_path, e))?;
    for p in eval::pr_curve(&set)? {
        w.write_record([p.threshold.to_string(), p.recall.to_string(), p.precision.to_string()])
            .map_err(|e| io_err(&pr_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&pr_path, e))?;

    let hist_path = inputs.out_dir.join("histogram.csv");
    let hist = eval::histogram(&set, inputs.bins)?;
    let mut w = csv::Writer::from_path(&hist_path).map_err(|e| io_err(&hist_path, e))?;
    w.write_record(["bin_left", "bin_right", "count_normal", "count_anomaly"])
        .map_err(|e| io_err(&hist_path, e))?;
    for b in 0..hist.normal.len() {
        w.write_record([
            hist.edges[b].to_string(),
            hist.edges[b + 1].to_string(),
            hist.normal[b].to_string(),
            hist.anomaly[b].to_string(),
        ])
        .map_err(|e| io_err(&hist_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&hist_path, e))?;

    let report: Option<TrainSummary> = inputs.train_report.map(read_json).transpose()?;
    let meta: Option<ScoreMeta> = inputs.score_meta.map(read_json).transpose()?;
    let metrics = Metrics {
        auroc,
        auprc,
        n_train: report.as_ref().map(|r| r.n_train),
        n_test: set.len(),
        train_seconds: report.map(|r| r.train_seconds),
        score_seconds: meta.map(|m| m.score_seconds),
    };
    write_json(&inputs.out_dir.join("metrics.json"), &metrics)?;
    Ok(metrics)
}
