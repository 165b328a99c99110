//! Labeled datasets, synthetic generators and the stratified split.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::rng::{stream, stream_rng};
use crate::{Error, Matrix, Result};

/// Ground-truth class. Used for evaluation only, never for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Anomaly,
}

impl Label {
    pub fn as_sign(self) -> i8 {
        match self {
            Label::Normal => 1,
            Label::Anomaly => -1,
        }
    }

    pub fn from_sign(v: i64) -> Option<Self> {
        match v {
            1 => Some(Label::Normal),
            -1 => Some(Label::Anomaly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Option<Vec<Label>>,
    feature_names: Option<Vec<String>>,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Option<Vec<Label>>, feature_names: Option<Vec<String>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != features.rows() {
                return Err(Error::shape("LabeledDataset labels", features.rows(), l.len()));
            }
        }
        if let Some(n) = &feature_names {
            if n.len() != features.cols() {
                return Err(Error::shape("LabeledDataset feature names", features.cols(), n.len()));
            }
        }
        if let Some(pos) = features.as_slice().iter().position(|v| !v.is_finite()) {
            let cols = features.cols().max(1);
            return Err(Error::argument(alloc::format!(
                "non-finite feature at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(LabeledDataset {
            features,
            labels,
            feature_names,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn n_cols(&self) -> usize {
        self.features.cols()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels
            .as_ref()
            .map_or(0, |l| l.iter().filter(|&&x| x == label).count())
    }

    pub fn select_rows(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(indices),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn into_parts(self) -> (Matrix, Option<Vec<Label>>, Option<Vec<String>>) {
        (self.features, self.labels, self.feature_names)
    }
}

pub const GAUSSIAN_DIM: usize = 512;
pub const GAUSSIAN_NORMALS: usize = 950;
pub const GAUSSIAN_ANOMALIES: usize = 50;

/// Normals from `N(0, 1)`, anomalies from `N(0, 5²)`, 512 dimensions,
/// rows shuffled.
pub fn gen_gaussian(seed: u64) -> LabeledDataset {
    let mut rng = stream_rng(seed, stream::GENERATOR);
    let wide = Normal::new(0.0, 5.0).expect("valid std");
    let mut rows: Vec<(Vec<f64>, Label)> = Vec::with_capacity(GAUSSIAN_NORMALS + GAUSSIAN_ANOMALIES);
    for _ in 0..GAUSSIAN_NORMALS {
        let r = (0..GAUSSIAN_DIM).map(|_| StandardNormal.sample(&mut rng)).collect();
        rows.push((r, Label::Normal));
    }
    for _ in 0..GAUSSIAN_ANOMALIES {
        let r = (0..GAUSSIAN_DIM).map(|_| wide.sample(&mut rng)).collect();
        rows.push((r, Label::Anomaly));
    }
    rows.shuffle(&mut rng);
    from_rows(rows)
}

/// Shape parameters of the four-dimensional illustrative dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Illustrative4d {
    pub normals: usize,
    pub anomalies: usize,
    pub center: (f64, f64),
    pub radius: f64,
    /// Anomalies in dims 1–2 lie farther than `radius * exclusion` from the center.
    pub exclusion: f64,
    /// Anomaly dims 1–2 are drawn from this square before rejection.
    pub anomaly_box: (f64, f64),
    pub normal_noise: f64,
    pub anomaly_noise: f64,
}

impl Default for Illustrative4d {
    fn default() -> Self {
        Illustrative4d {
            normals: 1950,
            anomalies: 50,
            center: (0.5, 0.5),
            radius: 0.35,
            exclusion: 1.5,
            anomaly_box: (-0.5, 1.5),
            normal_noise: 0.2,
            anomaly_noise: 2.0,
        }
    }
}

/// Normals: dims 1–2 uniform in a disc, dims 3–4 uniform on `±0.2`.
/// Anomalies: dims 1–2 far from the disc, dims 3–4 uniform on `±2`.
pub fn gen_illustrative_4d(seed: u64) -> LabeledDataset {
    gen_illustrative_4d_with(&Illustrative4d::default(), seed)
}

pub fn gen_illustrative_4d_with(p: &Illustrative4d, seed: u64) -> LabeledDataset {
    let mut rng = stream_rng(seed, stream::GENERATOR);
    let (cx, cy) = p.center;
    let mut rows = Vec::with_capacity(p.normals + p.anomalies);
    for _ in 0..p.normals {
        let (x, y) = loop {
            let x = rng.random_range(cx - p.radius..=cx + p.radius);
            let y = rng.random_range(cy - p.radius..=cy + p.radius);
            if (x - cx) * (x - cx) + (y - cy) * (y - cy) <= p.radius * p.radius {
                break (x, y);
            }
        };
        let a = rng.random_range(-p.normal_noise..=p.normal_noise);
        let b = rng.random_range(-p.normal_noise..=p.normal_noise);
        rows.push((alloc::vec![x, y, a, b], Label::Normal));
    }
    let limit = p.radius * p.exclusion;
    for _ in 0..p.anomalies {
        let (x, y) = loop {
            let x = rng.random_range(p.anomaly_box.0..=p.anomaly_box.1);
            let y = rng.random_range(p.anomaly_box.0..=p.anomaly_box.1);
            if (x - cx) * (x - cx) + (y - cy) * (y - cy) > limit * limit {
                break (x, y);
            }
        };
        let a = rng.random_range(-p.anomaly_noise..=p.anomaly_noise);
        let b = rng.random_range(-p.anomaly_noise..=p.anomaly_noise);
        rows.push((alloc::vec![x, y, a, b], Label::Anomaly));
    }
    rows.shuffle(&mut rng);
    from_rows(rows)
}

fn from_rows(rows: Vec<(Vec<f64>, Label)>) -> LabeledDataset {
    let labels = rows.iter().map(|r| r.1).collect();
    let feats: Vec<&[f64]> = rows.iter().map(|r| r.0.as_slice()).collect();
    LabeledDataset::new(Matrix::from_rows(&feats).expect("equal widths"), Some(labels), None)
        .expect("generated data is finite")
}

/// Disjoint `(train, test)` partition with `ratio` of the rows in `train`.
///
/// With labels present each class is split separately so both halves keep
/// the anomaly rate. Rows keep their original relative order.
pub fn split(data: &LabeledDataset, ratio: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(data, ratio, seed)?;
    Ok((data.select_rows(&train), data.select_rows(&test)))
}

pub fn split_indices(data: &LabeledDataset, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::argument("split ratio must lie strictly between 0 and 1"));
    }
    let mut rng = stream_rng(seed, stream::SPLIT);
    let groups: Vec<Vec<usize>> = match data.labels() {
        Some(labels) => [Label::Normal, Label::Anomaly]
            .iter()
            .map(|&cls| (0..labels.len()).filter(|&i| labels[i] == cls).collect())
            .collect(),
        None => alloc::vec![(0..data.n_rows()).collect()],
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut group in groups {
        group.shuffle(&mut rng);
        let take = libm::round(ratio * group.len() as f64) as usize;
        train.extend_from_slice(&group[..take]);
        test.extend_from_slice(&group[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
