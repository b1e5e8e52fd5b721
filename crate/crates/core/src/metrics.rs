//! ROC curve, AUC, F1-optimal threshold search and confusion-matrix metrics.
//!
//! A sample is predicted abnormal iff `score > threshold`. Abnormal (label 1) is
//! the positive class.

use crate::error::{Error, Result};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledScore {
    pub id: String,
    pub score: f64,
    /// 0 normal, 1 abnormal.
    pub label: u8,
    /// Optional stratum; entries without a group are shared by every stratum.
    pub group: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct LabeledScores {
    pub entries: Vec<LabeledScore>,
}

impl LabeledScores {
    pub fn new(entries: Vec<LabeledScore>) -> Result<Self> {
        if let Some(e) = entries.iter().find(|e| !e.score.is_finite() || e.label > 1) {
            return Err(Error::InvalidArgument(format!(
                "entry {} has score {} and label {}",
                e.id, e.score, e.label
            )));
        }
        Ok(Self { entries })
    }

    /// Unnamed entries from parallel score/label slices.
    pub fn from_pairs(scores: &[f64], labels: &[u8]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::InvalidDimensions("scores and labels differ in length".into()));
        }
        Self::new(
            scores
                .iter()
                .zip(labels)
                .enumerate()
                .map(|(i, (&score, &label))| LabeledScore {
                    id: i.to_string(),
                    score,
                    label,
                    group: None,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn class_counts(&self) -> (usize, usize) {
        let pos = self.entries.iter().filter(|e| e.label == 1).count();
        (pos, self.entries.len() - pos)
    }

    fn require_both_classes(&self) -> Result<(usize, usize)> {
        let (pos, neg) = self.class_counts();
        if pos == 0 || neg == 0 {
            return Err(Error::SingleClass);
        }
        Ok((pos, neg))
    }

    /// Groups of equal score, ascending: `(score, positives, negatives)`.
    fn score_groups(&self) -> Vec<(f64, usize, usize)> {
        let mut sorted: Vec<(f64, u8)> = self.entries.iter().map(|e| (e.score, e.label)).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut groups: Vec<(f64, usize, usize)> = Vec::new();
        for (s, l) in sorted {
            match groups.last_mut() {
                Some(g) if g.0 == s => {
                    if l == 1 {
                        g.1 += 1
                    } else {
                        g.2 += 1
                    }
                }
                _ => groups.push((s, (l == 1) as usize, (l == 0) as usize)),
            }
        }
        groups
    }
}

/// Threshold strictly between two consecutive distinct scores.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi {
        m
    } else {
        lo
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// ROC points from threshold `+∞` (point (0,0)) down through every midpoint between
/// consecutive distinct scores to `−∞` (point (1,1)).
pub fn roc_curve(ls: &LabeledScores) -> Result<Vec<RocPoint>> {
    let (pos, neg) = ls.require_both_classes()?;
    let groups = ls.score_groups();
    let mut points = Vec::with_capacity(groups.len() + 1);
    points.push(RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    });
    let (mut tp, mut fp) = (0usize, 0usize);
    for i in (0..groups.len()).rev() {
        tp += groups[i].1;
        fp += groups[i].2;
        let threshold = if i == 0 {
            f64::NEG_INFINITY
        } else {
            midpoint(groups[i - 1].0, groups[i].0)
        };
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold,
        });
    }
    Ok(points)
}

/// Trapezoidal area under [`roc_curve`] (equal to the Mann–Whitney statistic with
/// half credit for ties).
pub fn auc(ls: &LabeledScores) -> Result<f64> {
    let pts = roc_curve(ls)?;
    Ok(pts
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// `2TP / (2TP + FP + FN)`, 0 when the denominator vanishes.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

pub fn confusion_at(ls: &LabeledScores, threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for e in &ls.entries {
        match (e.score > threshold, e.label == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

/// F1-maximizing threshold among `−∞` and the midpoints between consecutive
/// distinct scores; ties resolve to the lowest threshold.
pub fn best_f1_threshold(ls: &LabeledScores) -> Result<(f64, f64)> {
    let (pos, _) = ls.class_counts();
    if pos == 0 {
        return Err(Error::UndefinedF1);
    }
    let groups = ls.score_groups();
    // Threshold −∞: everything predicted abnormal.
    let (mut tp, mut fp) = (pos, ls.len() - pos);
    let f1 = |tp: usize, fp: usize| 2.0 * tp as f64 / (2 * tp + fp + (pos - tp)) as f64;
    let mut best = (f64::NEG_INFINITY, f1(tp, fp));
    for i in 0..groups.len().saturating_sub(1) {
        tp -= groups[i].1;
        fp -= groups[i].2;
        let candidate = f1(tp, fp);
        if candidate > best.1 {
            best = (midpoint(groups[i].0, groups[i + 1].0), candidate);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    pub accuracy: f64,
    pub f1: f64,
    pub threshold: f64,
    pub confusion: Confusion,
}

pub fn metrics_at(ls: &LabeledScores, threshold: f64) -> MetricsReport {
    let confusion = confusion_at(ls, threshold);
    MetricsReport {
        auc: auc(ls).ok(),
        accuracy: confusion.accuracy(),
        f1: confusion.f1(),
        threshold,
        confusion,
    }
}

/// Metrics per group tag; ungrouped entries are included in every group.
pub fn metrics_by_group(ls: &LabeledScores, threshold: f64) -> BTreeMap<String, MetricsReport> {
    let groups: std::collections::BTreeSet<&String> = ls.entries.iter().filter_map(|e| e.group.as_ref()).collect();
    groups
        .into_iter()
        .map(|g| {
            let subset = LabeledScores {
                entries: ls
                    .entries
                    .iter()
                    .filter(|e| e.group.as_ref().is_none_or(|x| x == g))
                    .cloned()
                    .collect(),
            };
            (g.clone(), metrics_at(&subset, threshold))
        })
        .collect()
}
