//! Ranking metrics with anomalies as the positive class.
//!
//! Scores follow the model convention: higher means more normal, so the
//! anomaly score is `−score`. Tied scores are handled as a group: AUROC
//! counts a tie as half a correct ordering and the PR curve only has points
//! between distinct score values.

use alloc::vec::Vec;

use crate::data::Label;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<Label>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::shape("ScoredSet", scores.len(), labels.len()));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::Metric("scores contain NaN".into()));
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn class_counts(&self) -> (usize, usize) {
        let anomalies = self.labels.iter().filter(|&&l| l == Label::Anomaly).count();
        (self.labels.len() - anomalies, anomalies)
    }

    fn require_both_classes(&self) -> Result<(usize, usize)> {
        let (normals, anomalies) = self.class_counts();
        if normals == 0 || anomalies == 0 {
            return Err(Error::Metric(alloc::format!(
                "need both classes, found {normals} normal and {anomalies} anomalous samples"
            )));
        }
        Ok((normals, anomalies))
    }

    /// Groups of `(score, normals, anomalies)` sorted by ascending score,
    /// i.e. from most to least anomalous.
    fn tie_groups(&self) -> Vec<(f64, usize, usize)> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]));
        let mut groups: Vec<(f64, usize, usize)> = Vec::new();
        for i in idx {
            let s = self.scores[i];
            let is_anomaly = self.labels[i] == Label::Anomaly;
            match groups.last_mut() {
                Some(g) if g.0 == s => {
                    if is_anomaly {
                        g.2 += 1
                    } else {
                        g.1 += 1
                    }
                }
                _ => groups.push((s, usize::from(!is_anomaly), usize::from(is_anomaly))),
            }
        }
        groups
    }
}

/// `P(anomaly ranked above normal) + ½ P(tie)`, via tie-grouped ranks.
pub fn auroc(s: &ScoredSet) -> Result<f64> {
    let (normals, anomalies) = s.require_both_classes()?;
    // walk from least anomalous upwards, counting normals already passed
    let mut normals_below = 0usize;
    let mut wins = 0.0;
    for &(_, n, a) in s.tie_groups().iter().rev() {
        wins += a as f64 * (normals_below as f64 + 0.5 * n as f64);
        normals_below += n;
    }
    Ok(wins / (normals as f64 * anomalies as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Samples with `score <= threshold` are flagged as anomalies.
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// ROC curve from `(0, 0)` to `(1, 1)`, one point per distinct score.
pub fn roc_curve(s: &ScoredSet) -> Result<Vec<RocPoint>> {
    let (normals, anomalies) = s.require_both_classes()?;
    let mut points = alloc::vec![RocPoint {
        threshold: f64::NEG_INFINITY,
        tpr: 0.0,
        fpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (score, n, a) in s.tie_groups() {
        tp += a;
        fp += n;
        points.push(RocPoint {
            threshold: score,
            tpr: tp as f64 / anomalies as f64,
            fpr: fp as f64 / normals as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under [`roc_curve`].
pub fn auroc_trapezoid(s: &ScoredSet) -> Result<f64> {
    let pts = roc_curve(s)?;
    Ok(pts
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * 0.5 * (w[1].tpr + w[0].tpr))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// Precision/recall at each distinct score threshold, most anomalous first.
pub fn pr_curve(s: &ScoredSet) -> Result<Vec<PrPoint>> {
    let (_, anomalies) = s.require_both_classes()?;
    let (mut tp, mut flagged) = (0usize, 0usize);
    Ok(s
        .tie_groups()
        .into_iter()
        .map(|(score, n, a)| {
            tp += a;
            flagged += a + n;
            PrPoint {
                threshold: score,
                recall: tp as f64 / anomalies as f64,
                precision: tp as f64 / flagged as f64,
            }
        })
        .collect())
}

/// Average precision: `Σ (R_i − R_{i−1}) · P_i`.
pub fn auprc(s: &ScoredSet) -> Result<f64> {
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for p in pr_curve(s)? {
        area += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    Ok(area)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` shared edges spanning `[min, max]` of all scores.
    pub edges: Vec<f64>,
    pub normal: Vec<usize>,
    pub anomaly: Vec<usize>,
}

impl Histogram {
    /// Number of bins holding samples of both classes.
    pub fn overlapping_bins(&self) -> usize {
        self.normal
            .iter()
            .zip(&self.anomaly)
            .filter(|(&n, &a)| n > 0 && a > 0)
            .count()
    }
}

pub fn histogram(s: &ScoredSet, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::argument("histogram needs at least one bin"));
    }
    if s.is_empty() {
        return Err(Error::Metric("histogram of an empty score set".into()));
    }
    let lo = s.scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut normal = alloc::vec![0usize; bins];
    let mut anomaly = alloc::vec![0usize; bins];
    for (&v, &l) in s.scores.iter().zip(&s.labels) {
        let bin = if width > 0.0 {
            (((v - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        match l {
            Label::Normal => normal[bin] += 1,
            Label::Anomaly => anomaly[bin] += 1,
        }
    }
    Ok(Histogram { edges, normal, anomaly })
}
