//! Gaussian kernel density scoring over standardized feature vectors.
//!
//! `A(z) = (1/N) Σᵢ exp(−‖(z − zᵢ)/h‖² / 2)` with `K(0) = 1`. The anomaly score is
//! the negative log density, min-max normalized to `[0, 1]` over a normalization
//! population, so that higher means more abnormal.

use crate::error::{Error, Result};
use crate::FeatureVector;
use std::collections::HashMap;

/// Standard deviations below this are floored.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct KdeModel {
    mean: Vec<f64>,
    std: Vec<f64>,
    references: Vec<Vec<f64>>,
    bandwidth: f64,
}

impl KdeModel {
    /// Store z-scored copies of `references`, flooring standard deviations at [`STD_FLOOR`].
    pub fn fit(references: &[FeatureVector], bandwidth: f64) -> Result<Self> {
        Self::fit_with_floor(references, bandwidth, STD_FLOOR)
    }

    /// Like [`KdeModel::fit`] with a custom standard deviation floor.
    pub fn fit_with_floor(references: &[FeatureVector], bandwidth: f64, std_floor: f64) -> Result<Self> {
        if !(std_floor > 0.0 && std_floor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "std floor must be positive, got {std_floor}"
            )));
        }
        let n = references.len();
        if n == 0 {
            return Err(Error::EmptyReferenceSet);
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        let d = references[0].len();
        if references.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidDimensions("reference vectors differ in length".into()));
        }
        if references.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("reference features must be finite".into()));
        }
        let mut mean = vec![0.0; d];
        for r in references {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for r in references {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let std: Vec<f64> = var.iter().map(|s| (s / n as f64).sqrt().max(std_floor)).collect();
        let mut model = Self {
            mean,
            std,
            references: Vec::with_capacity(n),
            bandwidth,
        };
        model.references = references.iter().map(|r| model.standardize_unchecked(r)).collect();
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.references.len()
    }

    pub fn is_empty(&self) -> bool {
        self.references.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    /// Standardized references.
    pub fn references(&self) -> &[Vec<f64>] {
        &self.references
    }

    fn standardize_unchecked(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn standardize(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::InvalidDimensions(format!(
                "query has {} components, model has {}",
                z.len(),
                self.dim()
            )));
        }
        Ok(self.standardize_unchecked(z))
    }

    /// Half squared scaled distances `‖(z − zᵢ)/h‖² / 2` to every reference.
    fn exponents(&self, z: &[f64]) -> Result<Vec<f64>> {
        let q = self.standardize(z)?;
        let inv_h2 = 1.0 / (self.bandwidth * self.bandwidth);
        Ok(self
            .references
            .iter()
            .map(|r| 0.5 * inv_h2 * r.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .collect())
    }

    /// Copy with one more reference, keeping the current standardization statistics.
    pub fn with_reference(&self, z: &[f64]) -> Result<Self> {
        let mut out = self.clone();
        out.references.push(self.standardize(z)?);
        Ok(out)
    }

    /// Kernel density `A(z)` of an unstandardized feature vector.
    pub fn density(&self, z: &[f64]) -> Result<f64> {
        let e = self.exponents(z)?;
        Ok(e.iter().map(|x| (-x).exp()).sum::<f64>() / e.len() as f64)
    }

    /// `ln A(z)` evaluated with log-sum-exp, finite even when `A(z)` underflows.
    pub fn log_density(&self, z: &[f64]) -> Result<f64> {
        let e = self.exponents(z)?;
        let min = e.iter().cloned().fold(f64::INFINITY, f64::min);
        let s: f64 = e.iter().map(|x| (min - x).exp()).sum();
        Ok(-min + s.ln() - (e.len() as f64).ln())
    }

    /// Unnormalized anomaly score `−ln A(z)`.
    pub fn raw_score(&self, z: &[f64]) -> Result<f64> {
        Ok(-self.log_density(z)?)
    }
}

/// Population defining the `[0, 1]` range of anomaly scores.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Normalization {
    /// Min and max of the scored set itself.
    #[default]
    Query,
    /// Fixed range (for example taken from a validation set); out-of-range values are clamped.
    Frozen { min: f64, max: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreEntry {
    pub id: String,
    /// `−ln A(z)`.
    pub raw: f64,
    /// Normalized anomaly score in `[0, 1]`.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreSet {
    pub entries: Vec<ScoreEntry>,
    /// `(min, max)` of raw scores used for normalization.
    pub normalization: (f64, f64),
}

impl ScoreSet {
    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).collect()
    }

    pub fn raws(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.raw).collect()
    }
}

/// Min-max normalize precomputed raw scores.
pub fn normalize_scores(ids: Vec<String>, raws: Vec<f64>, norm: Normalization) -> Result<ScoreSet> {
    if raws.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    if ids.len() != raws.len() {
        return Err(Error::InvalidDimensions("ids and scores differ in length".into()));
    }
    let (min, max) = match norm {
        Normalization::Query => raws.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        }),
        Normalization::Frozen { min, max } => (min, max),
    };
    let span = max - min;
    let entries = ids
        .into_iter()
        .zip(raws)
        .map(|(id, raw)| {
            let score = if span > 0.0 {
                ((raw - min) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
            ScoreEntry { id, raw, score }
        })
        .collect();
    Ok(ScoreSet {
        entries,
        normalization: (min, max),
    })
}

/// Score `(id, features)` queries against `model`.
pub fn anomaly_scores(model: &KdeModel, queries: &[(String, FeatureVector)], norm: Normalization) -> Result<ScoreSet> {
    if queries.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    let raws = queries
        .iter()
        .map(|(_, z)| model.raw_score(z))
        .collect::<Result<Vec<_>>>()?;
    normalize_scores(queries.iter().map(|(id, _)| id.clone()).collect(), raws, norm)
}

/// Per-id mean of normalized scores (and of raw scores). Output follows the
/// first set's order; every set must hold exactly the same ids.
pub fn ensemble_average(sets: &[ScoreSet]) -> Result<ScoreSet> {
    let first = sets
        .first()
        .ok_or_else(|| Error::MisalignedEnsemble("no score sets".into()))?;
    let mut lookups = Vec::with_capacity(sets.len());
    for (k, set) in sets.iter().enumerate() {
        if set.entries.len() != first.entries.len() {
            return Err(Error::MisalignedEnsemble(format!(
                "member {k} has {} entries, expected {}",
                set.entries.len(),
                first.entries.len()
            )));
        }
        let mut map = HashMap::with_capacity(set.entries.len());
        for e in &set.entries {
            if map.insert(e.id.as_str(), e).is_some() {
                return Err(Error::MisalignedEnsemble(format!("member {k} repeats id {}", e.id)));
            }
        }
        lookups.push(map);
    }
    let k = sets.len() as f64;
    let mut entries = Vec::with_capacity(first.entries.len());
    for e in &first.entries {
        let (mut raw, mut score) = (0.0, 0.0);
        for (m, map) in lookups.iter().enumerate() {
            let hit = map
                .get(e.id.as_str())
                .ok_or_else(|| Error::MisalignedEnsemble(format!("member {m} lacks id {}", e.id)))?;
            raw += hit.raw;
            score += hit.score;
        }
        entries.push(ScoreEntry {
            id: e.id.clone(),
            raw: raw / k,
            score: score / k,
        });
    }
    Ok(ScoreSet {
        entries,
        normalization: (0.0, 1.0),
    })
}
