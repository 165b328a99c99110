use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use ae1svm::commands::{self, EvalInputs};
use ae1svm::config::{DataSource, Generator, RunConfig};
use ae1svm::dataset::{self, CsvSchema, FeatureEncoding, LabelSchema};
use ae1svm::model_file::ModelFile;
use ae1svm_core::data::Label;
use ae1svm_core::model::{Ae1SvmModel, MinMaxScaler, ModelConfig, TrainConfig};
use ae1svm_core::nn::{Activation, DenseLayer, DenseNetwork};
use ae1svm_core::ocsvm::OcSvmHead;
use ae1svm_core::rff::RffMap;
use ae1svm_core::Matrix;
use proptest::prelude::*;
use tempfile::TempDir;

fn bin(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ae1svm")).args(args).output().unwrap();
    let text = format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    (out.status.code().unwrap_or(-1), text)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_shape(path: &Path) -> (usize, usize) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let cols = lines.next().unwrap().split(',').count();
    (lines.count(), cols)
}

fn small_config(dir: &Path, generator: Generator) -> RunConfig {
    RunConfig {
        train: TrainConfig {
            epochs: 3,
            batch_size: 16,
            ..TrainConfig::default()
        },
        model: ModelConfig {
            encoder_dims: vec![3, 2],
            num_features: 20,
            ..ModelConfig::default()
        },
        source: DataSource::Generated(generator),
        label: LabelSchema::default(),
        categorical_columns: vec![],
        output_dir: dir.to_path_buf(),
        split: Some(0.5),
    }
}

#[test]
fn generate_writes_expected_shapes_deterministically() {
    let dir = TempDir::new().unwrap();
    let g = dir.path().join("g.csv");
    let (code, out) = bin(&["generate", "--generator", "gaussian", "--seed", "1", "--out", s(&g)]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("1000 rows x 513 columns"), "{out}");
    assert_eq!(csv_shape(&g), (1000, 513));

    let i = dir.path().join("i.csv");
    assert_eq!(commands::generate(Generator::Illustrative4d, 1, &i).unwrap(), (2000, 5));
    assert_eq!(csv_shape(&i), (2000, 5));

    let g2 = dir.path().join("g2.csv");
    commands::generate(Generator::Gaussian, 1, &g2).unwrap();
    assert_eq!(fs::read(&g).unwrap(), fs::read(&g2).unwrap());

    let (code, out) = bin(&["generate", "--generator", "mnist", "--out", s(&g)]);
    assert_eq!(code, 2, "{out}");
}

#[test]
fn zero_epochs_saves_initial_weights() {
    let dir = TempDir::new().unwrap();
    let mut cfg = small_config(dir.path(), Generator::Illustrative4d);
    cfg.train.epochs = 0;
    cfg.split = None;
    let outcome = commands::train(&cfg).unwrap();
    assert!(outcome.summary.epochs.is_empty());
    let data = commands::generated(Generator::Illustrative4d, cfg.train.seed);
    let fresh = Ae1SvmModel::for_data(data.features(), &cfg.model, cfg.train.seed).unwrap();
    assert_eq!(ModelFile::load(&outcome.model_path).unwrap().model, fresh);
}

#[test]
fn training_is_reproducible_from_the_effective_config() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("a");
    let cfg = small_config(&first, Generator::Illustrative4d);
    commands::train(&cfg).unwrap();
    let model_a = fs::read(first.join(commands::MODEL_FILE)).unwrap();

    let effective = first.join(commands::EFFECTIVE_CONFIG_FILE);
    let second = dir.path().join("b");
    let (code, out) = bin(&["train", "--config", s(&effective), "--output-dir", s(&second)]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(fs::read(second.join(commands::MODEL_FILE)).unwrap(), model_a);
    for f in [commands::TRAIN_SPLIT_FILE, commands::TEST_SPLIT_FILE] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap());
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(second.join(commands::TRAIN_REPORT_FILE)).unwrap()).unwrap();
    assert_eq!(report["epochs"].as_array().unwrap().len(), 3);
    assert!(report["train_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(csv_shape(&second.join(commands::TRAIN_SPLIT_FILE)), (1000, 5));
}

#[test]
fn score_is_repeatable_and_decision_follows_sign() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), Generator::Illustrative4d);
    let outcome = commands::train(&cfg).unwrap();
    let data = dir.path().join(commands::TRAIN_SPLIT_FILE);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    commands::score(&outcome.model_path, &data, &a).unwrap();
    let (code, out) = bin(&["score", "--model", s(&outcome.model_path), "--data", s(&data), "--out", s(&b)]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let text = fs::read_to_string(&a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row_index,score,decision"));
    let mut n = 0;
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0].parse::<usize>().unwrap(), i);
        let score: f64 = cells[1].parse().unwrap();
        assert_eq!(cells[2], if score >= 0.0 { "1" } else { "-1" });
        n += 1;
    }
    assert_eq!(n, 1000);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(commands::meta_path_for(&a)).unwrap()).unwrap();
    assert_eq!(meta["n_rows"], 1000);
}

#[test]
fn width_mismatch_names_both_widths() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config(dir.path(), Generator::Illustrative4d);
    let outcome = commands::train(&cfg).unwrap();
    let other = dir.path().join("narrow.csv");
    fs::write(&other, "x1,x2,x3,label\n0,0,0,1\n").unwrap();
    let (code, out) = bin(&["score", "--model", s(&outcome.model_path), "--data", s(&other), "--out", s(&dir.path().join("o.csv"))]);
    assert_eq!(code, 3);
    assert!(out.contains("expected 4") && out.contains("found 3") && out.contains("x4"), "{out}");
}

fn identity_model(dim: usize, seed: u64) -> Ae1SvmModel {
    let id = || DenseLayer::from_parts(Matrix::identity(dim), vec![0.0; dim], Activation::Identity).unwrap();
    let encoder = DenseNetwork::from_layers(vec![id()]).unwrap();
    let decoder = DenseNetwork::from_layers(vec![id()]).unwrap();
    let rff = RffMap::sample(dim, 16, 1.5, seed).unwrap();
    let w: Vec<f64> = (0..32).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
    let head = OcSvmHead::from_parts(w, 0.1, 0.5).unwrap();
    Ae1SvmModel::from_parts(MinMaxScaler::identity(dim), encoder, decoder, rff, head, 1.0).unwrap()
}

fn read_grid(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn explain_identity_model_matches_margin_gradient() {
    let dir = TempDir::new().unwrap();
    let model = identity_model(3, 4);
    let names = dataset::default_feature_names(3);
    let path = dir.path().join("m.json");
    ModelFile::new(model.clone(), FeatureEncoding::numeric(&names, None)).save(&path).unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, "x1,x2,x3\n0.1,0.2,0.3\n-0.5,0.4,1.0\n").unwrap();
    let out = dir.path().join("ex");
    let (code, text) = bin(&["explain", "--model", s(&path), "--data", s(&data), "--rows", "1,0", "--out-dir", s(&out)]);
    assert_eq!(code, 0, "{text}");

    let csv = fs::read_to_string(out.join("gradients.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("row_index,x1,x2,x3"));
    let rows = [[-0.5, 0.4, 1.0], [0.1, 0.2, 0.3]];
    for (line, (idx, x)) in lines.zip([(1, rows[0]), (0, rows[1])]) {
        let cells: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cells[0], idx as f64);
        let expected = model.head().margin_input_grad(model.rff(), &x).unwrap();
        assert_eq!(&cells[1..], expected.as_slice());
    }
}

#[test]
fn explain_with_shape_writes_three_maps() {
    let dir = TempDir::new().unwrap();
    let model = identity_model(256, 2);
    let names = dataset::default_feature_names(256);
    let path = dir.path().join("m.json");
    ModelFile::new(model, FeatureEncoding::numeric(&names, None)).save(&path).unwrap();
    let row: Vec<String> = (0..256).map(|i| format!("{}", (i % 17) as f64 / 17.0)).collect();
    let data = dir.path().join("d.csv");
    fs::write(&data, format!("{}\n{}\n", names.join(","), row.join(","))).unwrap();

    let out = dir.path().join("maps");
    commands::explain(&path, &data, &[0], Some((16, 16)), &out).unwrap();
    for kind in ["positive", "negative", "full"] {
        let pgm = fs::read(out.join(format!("row0_{kind}.pgm"))).unwrap();
        let header = b"P5\n16 16\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(pgm.len(), header.len() + 256);
        let grid = read_grid(&out.join(format!("row0_{kind}.csv")));
        assert_eq!((grid.len(), grid[0].len()), (16, 16));
    }
    let full = read_grid(&out.join("row0_full.csv"));
    let pos = read_grid(&out.join("row0_positive.csv"));
    let neg = read_grid(&out.join("row0_negative.csv"));
    for i in 0..16 {
        for j in 0..16 {
            assert!((full[i][j] - (pos[i][j] + neg[i][j].abs())).abs() < 1e-15);
        }
    }

    let (code, text) = bin(&[
        "explain", "--model", s(&path), "--data", s(&data), "--rows", "0", "--shape", "10x10", "--out-dir", s(&out),
    ]);
    assert_eq!(code, 2, "{text}");
    let (code, _) = bin(&["explain", "--model", s(&path), "--data", s(&data), "--rows", "5", "--out-dir", s(&out)]);
    assert_eq!(code, 2);
}

fn write_scores(path: &Path, scores: &[f64]) {
    let mut text = String::from("row_index,score,decision\n");
    for (i, v) in scores.iter().enumerate() {
        text.push_str(&format!("{i},{v},{}\n", if *v >= 0.0 { 1 } else { -1 }));
    }
    fs::write(path, text).unwrap();
}

fn write_labels(path: &Path, labels: &[i8]) {
    let mut text = String::from("label\n");
    for l in labels {
        text.push_str(&format!("{l}\n"));
    }
    fs::write(path, text).unwrap();
}

fn eval_files(dir: &Path, scores: &[f64], labels: &[i8]) -> ae1svm::Result<commands::Metrics> {
    let sp = dir.join("scores.csv");
    let lp = dir.join("labels.csv");
    write_scores(&sp, scores);
    write_labels(&lp, labels);
    commands::eval(&EvalInputs {
        scores: &sp,
        labels: &lp,
        label_schema: LabelSchema::default(),
        train_report: None,
        score_meta: None,
        bins: 4,
        out_dir: &dir.join("eval"),
    })
}

#[test]
fn eval_perfect_and_constant_scores() {
    let dir = TempDir::new().unwrap();
    let m = eval_files(dir.path(), &[0.9, 0.8, -0.7, 0.5, -0.9], &[1, 1, -1, 1, -1]).unwrap();
    assert_eq!((m.auroc, m.auprc), (1.0, 1.0));
    assert_eq!(m.n_test, 5);
    assert_eq!(m.n_train, None);
    let roc = fs::read_to_string(dir.path().join("eval/roc.csv")).unwrap();
    assert!(roc.starts_with("threshold,tpr,fpr\n"));
    let pr = fs::read_to_string(dir.path().join("eval/pr.csv")).unwrap();
    assert!(pr.starts_with("threshold,recall,precision\n"));
    let hist = fs::read_to_string(dir.path().join("eval/histogram.csv")).unwrap();
    assert!(hist.starts_with("bin_left,bin_right,count_normal,count_anomaly\n"));
    assert_eq!(hist.lines().count(), 5);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("eval/metrics.json")).unwrap()).unwrap();
    for k in ["auroc", "auprc", "n_train", "n_test", "train_seconds", "score_seconds"] {
        assert!(json.get(k).is_some(), "{k}");
    }

    let m = eval_files(dir.path(), &[0.3; 4], &[1, -1, 1, -1]).unwrap();
    assert_eq!(m.auroc, 0.5);
}

#[test]
fn eval_without_labels_is_a_metric_error() {
    let dir = TempDir::new().unwrap();
    let err = eval_files(dir.path(), &[0.1, 0.2, 0.3], &[1, -1]).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let err = eval_files(dir.path(), &[0.1, 0.2], &[1, 1]).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn exit_codes_by_failure_kind() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "generator = \"gaussian\"\nnu = 2.0\nbogus = true\n").unwrap();
    let (code, out) = bin(&["train", "--config", s(&cfg)]);
    assert_eq!(code, 2);
    assert!(out.contains("nu:") && out.contains("bogus: unknown key"), "{out}");

    let data = dir.path().join("d.csv");
    fs::write(&data, "a,b,label\n1,2,1\n3,oops,-1\n").unwrap();
    let (code, out) = bin(&["train", "--dataset", s(&data), "--output-dir", s(&dir.path().join("o"))]);
    assert_eq!(code, 3, "{out}");
    assert!(out.contains("line 3"), "{out}");

    fs::write(&data, "a,b,label\n1,2,1\n3,4,-1\n5,7,1\n").unwrap();
    let (code, out) = bin(&[
        "train",
        "--dataset",
        s(&data),
        "--encoder-dims",
        "2,1",
        "--num-features",
        "4",
        "--batch-size",
        "2",
        "--epochs",
        "5",
        "--learning-rate",
        "1e308",
        "--alpha",
        "1e308",
        "--output-dir",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(code, 4, "{out}");
    assert!(out.contains("epoch"), "{out}");
}

/// 41 raw columns: 38 numeric plus protocol (3), service (66) and flag (11) categories.
fn kdd_like(path: &Path, rows: usize) {
    let mut header: Vec<String> = (0..38).map(|i| format!("n{i}")).collect();
    header.splice(1..1, ["protocol_type".to_string(), "service".to_string(), "flag".to_string()]);
    header.push("class".into());
    let mut text = header.join(",") + "\n";
    for r in 0..rows {
        let mut cells: Vec<String> = (0..38).map(|i| format!("{}", (r * 31 + i * 7) % 97)).collect();
        cells.splice(
            1..1,
            [
                ["tcp", "udp", "icmp"][r % 3].to_string(),
                format!("svc{}", r % 66),
                format!("S{}", r % 11),
            ],
        );
        cells.push(if r % 10 == 0 { "smurf." } else { "normal." }.to_string());
        text.push_str(&(cells.join(",") + "\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn kdd_like_file_encodes_to_118_features() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("kdd.csv");
    kdd_like(&p, 200);
    let schema = CsvSchema {
        label: Some(LabelSchema {
            column: "class".into(),
            normal_values: vec!["normal.".into()],
            anomaly_values: vec!["smurf.".into()],
        }),
        categorical_columns: vec!["protocol_type".into(), "service".into(), "flag".into()],
    };
    let (d, enc) = dataset::load_csv(&p, &schema).unwrap();
    assert_eq!(d.n_cols(), 118);
    assert_eq!(enc.width(), 118);
    assert_eq!(d.count(Label::Anomaly), 20);
}

#[test]
fn split_of_a_csv_source_copies_raw_rows() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("kdd.csv");
    kdd_like(&p, 120);
    let out = dir.path().join("run");
    let toml = format!(
        "dataset = \"{}\"\nlabel_column = \"class\"\nnormal_labels = [\"normal.\"]\nanomaly_labels = [\"smurf.\"]\n\
         categorical_columns = [\"protocol_type\", \"service\", \"flag\"]\nencoder_dims = [8, 2]\nnum_features = 10\n\
         epochs = 2\nsplit = 0.5\noutput_dir = \"{}\"\n",
        s(&p),
        s(&out)
    );
    let cfg_path = dir.path().join("c.toml");
    fs::write(&cfg_path, toml).unwrap();
    let (code, text) = bin(&["train", "--config", s(&cfg_path)]);
    assert_eq!(code, 0, "{text}");
    let test = out.join(commands::TEST_SPLIT_FILE);
    assert_eq!(csv_shape(&test), (60, 42));
    let scores = out.join("scores.csv");
    commands::score(&out.join(commands::MODEL_FILE), &test, &scores).unwrap();
    let (code, text) = bin(&[
        "eval",
        "--scores",
        s(&scores),
        "--labels",
        s(&test),
        "--label-column",
        "class",
        "--normal-labels",
        "normal.",
        "--anomaly-labels",
        "smurf.",
        "--train-report",
        s(&out.join(commands::TRAIN_REPORT_FILE)),
        "--out-dir",
        s(&out.join("eval")),
    ]);
    assert_eq!(code, 0, "{text}");
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("eval/metrics.json")).unwrap()).unwrap();
    assert_eq!(m["n_train"], 60);
    assert_eq!(m["n_test"], 60);
    assert!(m["score_seconds"].as_f64().is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn save_then_load_is_bit_exact(
        values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 12),
        labels in prop::collection::vec(any::<bool>(), 4),
    ) {
        let dir = TempDir::new().unwrap();
        let p: PathBuf = dir.path().join("r.csv");
        let features = Matrix::from_vec(4, 3, values).unwrap();
        let labels: Vec<Label> = labels.iter().map(|&b| if b { Label::Normal } else { Label::Anomaly }).collect();
        let d = ae1svm_core::data::LabeledDataset::new(features, Some(labels), Some(dataset::default_feature_names(3))).unwrap();
        dataset::save_csv(&p, &d).unwrap();
        let schema = CsvSchema { label: Some(LabelSchema::default()), categorical_columns: vec![] };
        let (back, _) = dataset::load_csv(&p, &schema).unwrap();
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(back.features()), bits(d.features()));
        prop_assert_eq!(back.labels(), d.labels());
    }
}
