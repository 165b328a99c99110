//! Flat TOML run configuration.
//!
//! Values resolve as built-in defaults, then the config file, then
//! command-line overrides. Validation reports every violation at once.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ae1svm_core::model::{ModelConfig, TrainConfig, TrainMode};
use ae1svm_core::nn::Activation;
use toml::{Table, Value};

use crate::dataset::{CsvSchema, LabelSchema};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Gaussian,
    Illustrative4d,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::Gaussian => "gaussian",
            Generator::Illustrative4d => "illustrative4d",
        }
    }
}

impl FromStr for Generator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian" => Ok(Generator::Gaussian),
            "illustrative4d" => Ok(Generator::Illustrative4d),
            other => Err(format!("unknown generator '{other}' (expected gaussian or illustrative4d)")),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Generated(Generator),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub source: DataSource,
    pub label: LabelSchema,
    pub categorical_columns: Vec<String>,
    pub output_dir: PathBuf,
    /// Train fraction; when set the data is split and both halves are written out.
    pub split: Option<f64>,
}

pub const KEYS: &[&str] = &[
    "seed",
    "epochs",
    "batch_size",
    "learning_rate",
    "mode",
    "encoder_dims",
    "nu",
    "alpha",
    "sigma",
    "num_features",
    "activation",
    "dataset",
    "generator",
    "label_column",
    "normal_labels",
    "anomaly_labels",
    "categorical_columns",
    "output_dir",
    "split",
];

pub fn mode_name(mode: TrainMode) -> &'static str {
    match mode {
        TrainMode::Joint => "joint",
        TrainMode::TwoStage => "two-stage",
    }
}

pub fn parse_mode(s: &str) -> std::result::Result<TrainMode, String> {
    match s {
        "joint" => Ok(TrainMode::Joint),
        "two-stage" => Ok(TrainMode::TwoStage),
        other => Err(format!("unknown mode '{other}' (expected joint or two-stage)")),
    }
}

fn activation_name(a: Activation) -> &'static str {
    match a {
        Activation::Sigmoid => "sigmoid",
        Activation::Tanh => "tanh",
        Activation::Identity => "identity",
    }
}

fn parse_activation(s: &str) -> std::result::Result<Activation, String> {
    match s {
        "sigmoid" => Ok(Activation::Sigmoid),
        "tanh" => Ok(Activation::Tanh),
        "identity" => Ok(Activation::Identity),
        other => Err(format!("unknown activation '{other}' (expected sigmoid, tanh or identity)")),
    }
}

/// Typed reads from a table that record failures instead of stopping.
struct Reader<'a> {
    table: &'a Table,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn get<T>(&mut self, key: &str, convert: impl FnOnce(&Value) -> std::result::Result<T, String>) -> Option<T> {
        let v = self.table.get(key)?;
        match convert(v) {
            Ok(x) => Some(x),
            Err(msg) => {
                self.errors.push(format!("{key}: {msg}"));
                None
            }
        }
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        self.get(key, |v| match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            Value::Integer(i) => Err(format!("must be non-negative, got {i}")),
            other => Err(format!("expected an integer, got {}", other.type_str())),
        })
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        self.get(key, |v| match v {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            other => Err(format!("expected a number, got {}", other.type_str())),
        })
    }

    fn string(&mut self, key: &str) -> Option<String> {
        self.get(key, |v| match v {
            Value::String(s) => Ok(s.clone()),
            other => Err(format!("expected a string, got {}", other.type_str())),
        })
    }

    fn strings(&mut self, key: &str) -> Option<Vec<String>> {
        self.get(key, |v| match v {
            Value::Array(items) => items
                .iter()
                .map(|x| match x {
                    Value::String(s) => Ok(s.clone()),
                    Value::Integer(i) => Ok(i.to_string()),
                    other => Err(format!("expected an array of strings, found {}", other.type_str())),
                })
                .collect(),
            other => Err(format!("expected an array, got {}", other.type_str())),
        })
    }

    fn dims(&mut self, key: &str) -> Option<Vec<usize>> {
        self.get(key, |v| match v {
            Value::Array(items) => items
                .iter()
                .map(|x| match x {
                    Value::Integer(i) if *i > 0 => Ok(*i as usize),
                    other => Err(format!("expected positive integers, found {other}")),
                })
                .collect(),
            other => Err(format!("expected an array, got {}", other.type_str())),
        })
    }
}

impl RunConfig {
    /// Parses a config file and applies `overrides` on top of it.
    pub fn load(path: Option<&Path>, overrides: Table) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                text.parse::<Table>()
                    .map_err(|e| CliError::Config(vec![format!("{}: {}", p.display(), e.message())]))?
            }
            None => Table::new(),
        };
        table.extend(overrides);
        Self::from_table(&table)
    }

    pub fn from_table(table: &Table) -> Result<Self> {
        let mut r = Reader {
            table,
            errors: Vec::new(),
        };
        for key in table.keys() {
            if !KEYS.contains(&key.as_str()) {
                r.errors.push(format!("{key}: unknown key"));
            }
        }

        let mut train = TrainConfig::default();
        let mut model = ModelConfig::default();
        let mut label = LabelSchema::default();

        if let Some(v) = r.uint("seed") {
            train.seed = v;
        }
        if let Some(v) = r.uint("epochs") {
            train.epochs = v as usize;
        }
        if let Some(v) = r.uint("batch_size") {
            train.batch_size = v as usize;
        }
        if let Some(v) = r.float("learning_rate") {
            train.learning_rate = v;
        }
        if let Some(v) = r.get("mode", |v| v.as_str().ok_or("expected a string".to_string()).and_then(parse_mode)) {
            train.mode = v;
        }
        if let Some(v) = r.dims("encoder_dims") {
            model.encoder_dims = v;
        }
        if let Some(v) = r.float("nu") {
            model.nu = v;
        }
        if let Some(v) = r.float("alpha") {
            model.alpha = v;
        }
        if let Some(v) = r.float("sigma") {
            model.sigma = v;
        }
        if let Some(v) = r.uint("num_features") {
            model.num_features = v as usize;
        }
        if let Some(v) = r.get("activation", |v| {
            v.as_str().ok_or("expected a string".to_string()).and_then(parse_activation)
        }) {
            model.activation = v;
        }
        let dataset = r.string("dataset");
        let generator = r.get("generator", |v| {
            v.as_str().ok_or("expected a string".to_string()).and_then(Generator::from_str)
        });
        if let Some(v) = r.string("label_column") {
            label.column = v;
        }
        if let Some(v) = r.strings("normal_labels") {
            label.normal_values = v;
        }
        if let Some(v) = r.strings("anomaly_labels") {
            label.anomaly_values = v;
        }
        let categorical_columns = r.strings("categorical_columns").unwrap_or_default();
        let output_dir = r.string("output_dir").map_or_else(|| PathBuf::from("out"), PathBuf::from);
        let split = r.float("split");

        let mut errors = r.errors;
        if train.batch_size == 0 {
            errors.push("batch_size: must be at least 1".into());
        }
        if !(train.learning_rate.is_finite() && train.learning_rate > 0.0) {
            errors.push(format!("learning_rate: must be positive, got {}", train.learning_rate));
        }
        if model.encoder_dims.is_empty() {
            errors.push("encoder_dims: must list at least one layer".into());
        }
        if !(model.nu > 0.0 && model.nu <= 1.0) {
            errors.push(format!("nu: must lie in (0, 1], got {}", model.nu));
        }
        if !(model.alpha.is_finite() && model.alpha >= 0.0) {
            errors.push(format!("alpha: must be a non-negative number, got {}", model.alpha));
        }
        if !(model.sigma.is_finite() && model.sigma > 0.0) {
            errors.push(format!("sigma: must be positive, got {}", model.sigma));
        }
        if model.num_features == 0 {
            errors.push("num_features: must be at least 1".into());
        }
        if let Some(s) = split {
            if !(s > 0.0 && s < 1.0) {
                errors.push(format!("split: must lie strictly between 0 and 1, got {s}"));
            }
        }
        if label.normal_values.iter().any(|v| label.anomaly_values.contains(v)) {
            errors.push("normal_labels and anomaly_labels must not share values".into());
        }
        let source = match (table.contains_key("dataset"), table.contains_key("generator")) {
            (true, true) => {
                errors.push("dataset and generator are mutually exclusive".into());
                None
            }
            (false, false) => {
                errors.push("one of dataset or generator is required".into());
                None
            }
            _ => dataset
                .map(|p| DataSource::Csv(PathBuf::from(p)))
                .or(generator.map(DataSource::Generated)),
        };

        match source {
            Some(source) if errors.is_empty() => Ok(RunConfig {
                train,
                model,
                source,
                label,
                categorical_columns,
                output_dir,
                split,
            }),
            _ => Err(CliError::Config(errors)),
        }
    }

    pub fn csv_schema(&self) -> CsvSchema {
        CsvSchema {
            label: Some(self.label.clone()),
            categorical_columns: self.categorical_columns.clone(),
        }
    }

    /// Every key with its resolved value.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new();
        let strings = |v: &[String]| Value::Array(v.iter().cloned().map(Value::String).collect());
        t.insert("seed".into(), Value::Integer(self.train.seed as i64));
        t.insert("epochs".into(), Value::Integer(self.train.epochs as i64));
        t.insert("batch_size".into(), Value::Integer(self.train.batch_size as i64));
        t.insert("learning_rate".into(), Value::Float(self.train.learning_rate));
        t.insert("mode".into(), Value::String(mode_name(self.train.mode).into()));
        t.insert(
            "encoder_dims".into(),
            Value::Array(self.model.encoder_dims.iter().map(|&d| Value::Integer(d as i64)).collect()),
        );
        t.insert("nu".into(), Value::Float(self.model.nu));
        t.insert("alpha".into(), Value::Float(self.model.alpha));
        t.insert("sigma".into(), Value::Float(self.model.sigma));
        t.insert("num_features".into(), Value::Integer(self.model.num_features as i64));
        t.insert("activation".into(), Value::String(activation_name(self.model.activation).into()));
        match &self.source {
            DataSource::Csv(p) => t.insert("dataset".into(), Value::String(p.display().to_string())),
            DataSource::Generated(g) => t.insert("generator".into(), Value::String(g.name().into())),
        };
        t.insert("label_column".into(), Value::String(self.label.column.clone()));
        t.insert("normal_labels".into(), strings(&self.label.normal_values));
        t.insert("anomaly_labels".into(), strings(&self.label.anomaly_values));
        t.insert("categorical_columns".into(), strings(&self.categorical_columns));
        t.insert("output_dir".into(), Value::String(self.output_dir.display().to_string()));
        if let Some(s) = self.split {
            t.insert("split".into(), Value::Float(s));
        }
        t
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_table()).expect("flat table of plain values serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::from_table(&text.parse::<Table>().unwrap())
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let c = parse("generator = \"gaussian\"").unwrap();
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.model, ModelConfig::default());
        assert_eq!(c.source, DataSource::Generated(Generator::Gaussian));
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn every_violation_is_reported() {
        let err = parse(
            "dataset = \"d.csv\"\ngenerator = \"gaussian\"\nnu = 1.5\nbatch_size = 0\nlearning_rate = \"fast\"\nfoo = 1\nsplit = 1.0\nmode = \"both\"",
        )
        .unwrap_err();
        let CliError::Config(list) = &err else {
            panic!("{err}")
        };
        for needle in ["foo: unknown key", "nu:", "batch_size:", "learning_rate:", "split:", "mode:", "mutually exclusive"] {
            assert!(list.iter().any(|m| m.contains(needle)), "missing {needle} in {list:?}");
        }
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_source_is_an_error() {
        let CliError::Config(list) = parse("epochs = 3").unwrap_err() else {
            panic!()
        };
        assert_eq!(list, ["one of dataset or generator is required"]);
    }

    #[test]
    fn overrides_win_and_effective_config_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "generator = \"gaussian\"\nepochs = 5\nencoder_dims = [8, 2]\nsplit = 0.5\n").unwrap();
        let mut over = Table::new();
        over.insert("epochs".into(), Value::Integer(7));
        over.insert("mode".into(), Value::String("two-stage".into()));
        let c = RunConfig::load(Some(&p), over).unwrap();
        assert_eq!(c.train.epochs, 7);
        assert_eq!(c.train.mode, TrainMode::TwoStage);
        assert_eq!(c.model.encoder_dims, [8, 2]);
        let again = RunConfig::from_table(&c.to_toml().parse::<Table>().unwrap()).unwrap();
        assert_eq!(again, c);
    }
}
