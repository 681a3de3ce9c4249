//! Template verification with K-NN Euclidean distance and normalized
//! correlation.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusedTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatchMetric {
    /// Smaller is better; accept when the best distance is `<= Th`.
    KnnEuclidean,
    /// Larger is better; accept when the best similarity is `>= Th`.
    NormalizedCorrelation,
}

impl MatchMetric {
    pub const ALL: [MatchMetric; 2] = [MatchMetric::KnnEuclidean, MatchMetric::NormalizedCorrelation];

    pub fn accepts(self, score: f64, threshold: f64) -> bool {
        match self {
            MatchMetric::KnnEuclidean => score <= threshold,
            MatchMetric::NormalizedCorrelation => score >= threshold,
        }
    }

    /// Ordering that puts better scores first.
    fn rank(self, a: f64, b: f64) -> Ordering {
        let o = a.partial_cmp(&b).unwrap_or(Ordering::Equal);
        match self {
            MatchMetric::KnnEuclidean => o,
            MatchMetric::NormalizedCorrelation => o.reverse(),
        }
    }

    /// Score of `probe` against one enrolled template; `None` when undefined.
    pub fn score(self, probe: &FusedTemplate, enrolled: &FusedTemplate) -> Result<Option<f64>> {
        match self {
            MatchMetric::KnnEuclidean => euclidean_distance(probe, enrolled).map(Some),
            MatchMetric::NormalizedCorrelation => normalized_correlation(probe, enrolled),
        }
    }
}

impl fmt::Display for MatchMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMetric::KnnEuclidean => "knn",
            MatchMetric::NormalizedCorrelation => "correlation",
        })
    }
}

impl FromStr for MatchMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "knn" | "euclidean" | "knn-euclidean" => Ok(MatchMetric::KnnEuclidean),
            "correlation" | "corr" | "normalized-correlation" => Ok(MatchMetric::NormalizedCorrelation),
            other => Err(format!("unknown metric {other:?} (expected knn or correlation)")),
        }
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

pub fn euclidean_distance(f1: &FusedTemplate, f2: &FusedTemplate) -> Result<f64> {
    euclidean(&f1.values, &f2.values)
}

pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// `sum(f1 * f2) / sqrt(sum(f1^2) * sum(f2^2))`; `None` if either vector is all
/// zeros.
pub fn normalized_correlation(f1: &FusedTemplate, f2: &FusedTemplate) -> Result<Option<f64>> {
    correlation(&f1.values, &f2.values)
}

pub fn correlation(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    check_dims(a, b)?;
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Ok(None);
    }
    Ok(Some(ab / (aa * bb).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchDecision {
    pub metric: MatchMetric,
    /// Best score among the K neighbours; NaN when no score is defined.
    pub score: f64,
    pub best_subject_id: Option<String>,
    pub accepted: bool,
    pub threshold_used: f64,
    pub k_used: usize,
    /// The K best `(subject_id, score)` pairs, best first.
    pub neighbours: Vec<(String, f64)>,
}

/// Euclidean K-NN verification: accept iff the nearest of the K best gallery
/// templates lies within `threshold`.
pub fn knn_verify(probe: &FusedTemplate, gallery: &[FusedTemplate], k: usize, threshold: f64) -> Result<MatchDecision> {
    verify(MatchMetric::KnnEuclidean, probe, gallery, k, threshold)
}

/// Correlation verification: accept iff the most similar of the K best gallery
/// templates reaches `threshold`. Zero templates never match.
pub fn correlation_verify(
    probe: &FusedTemplate,
    gallery: &[FusedTemplate],
    k: usize,
    threshold: f64,
) -> Result<MatchDecision> {
    verify(MatchMetric::NormalizedCorrelation, probe, gallery, k, threshold)
}

pub fn verify(
    metric: MatchMetric,
    probe: &FusedTemplate,
    gallery: &[FusedTemplate],
    k: usize,
    threshold: f64,
) -> Result<MatchDecision> {
    if gallery.is_empty() {
        return Err(Error::EmptyGallery);
    }
    if k == 0 || k > gallery.len() {
        return Err(Error::BadK { k, gallery: gallery.len() });
    }
    let mut scored = Vec::with_capacity(gallery.len());
    for g in gallery {
        if let Some(s) = metric.score(probe, g)? {
            scored.push((g.subject_id.clone(), s));
        }
    }
    scored.sort_by(|a, b| metric.rank(a.1, b.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    let (score, best) = match scored.first() {
        Some((id, s)) => (*s, Some(id.clone())),
        None => (f64::NAN, None),
    };
    Ok(MatchDecision {
        metric,
        score,
        best_subject_id: best,
        accepted: !score.is_nan() && metric.accepts(score, threshold),
        threshold_used: threshold,
        k_used: k,
        neighbours: scored,
    })
}
