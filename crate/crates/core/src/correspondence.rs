//! Keypoint correspondences between one face cluster and one palm cluster.

use std::cmp::Ordering;

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::keypoint::{Keypoint, KeypointSet};

/// Conventional nearest/second-nearest ratio for rejecting ambiguous matches.
pub const DEFAULT_RATIO_THRESHOLD: f64 = 0.8;

/// Retained points of one cluster, tagged with their index in the source set.
#[derive(Debug, Clone)]
pub struct ClusterPoints<'a> {
    pub cluster_id: usize,
    pub points: Vec<(usize, &'a Keypoint)>,
}

impl<'a> ClusterPoints<'a> {
    pub fn retained(set: &'a KeypointSet, clustering: &Clustering, cluster: usize) -> Self {
        ClusterPoints {
            cluster_id: cluster,
            points: clustering
                .retained_members(cluster)
                .into_iter()
                .map(|i| (i, &set.points[i]))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCorrespondence {
    pub face_index: usize,
    pub palm_index: usize,
    pub pair_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correspondence {
    Matched(PointCorrespondence),
    /// Zero-descriptor sentinel at (0, 0) filling a short cluster.
    Padded,
}

impl Correspondence {
    pub fn matched(&self) -> Option<&PointCorrespondence> {
        match self {
            Correspondence::Matched(c) => Some(c),
            Correspondence::Padded => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pub face_cluster_id: usize,
    pub palm_cluster_id: usize,
    pub pairs: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn matched(&self) -> impl Iterator<Item = &PointCorrespondence> {
        self.pairs.iter().filter_map(Correspondence::matched)
    }

    pub fn padded_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.matched().is_none()).count()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// One-to-one descriptor correspondences between two clusters.
///
/// Every point of the larger cluster (the face cluster on ties) claims its
/// nearest point in the other cluster. Where several points claim the same
/// target only the claim with the smallest distance survives (ties by the
/// claimant's point index); losers are discarded, not rematched. Surviving
/// claims whose nearest/second-nearest distance ratio exceeds
/// `ratio_threshold` are rejected. Pairs are returned in ascending face index.
pub fn match_clusters(face: &ClusterPoints, palm: &ClusterPoints, ratio_threshold: f64) -> Result<CorrespondenceSet> {
    if face.is_empty() {
        return Err(Error::EmptyCluster { cluster: face.cluster_id });
    }
    if palm.is_empty() {
        return Err(Error::EmptyCluster { cluster: palm.cluster_id });
    }
    let face_queries = face.len() >= palm.len();
    let (queries, targets) = if face_queries { (face, palm) } else { (palm, face) };

    struct Claim {
        query: usize,
        target: usize,
        d1: f64,
        d2: f64,
    }
    let claims: Vec<Claim> = queries
        .points
        .iter()
        .enumerate()
        .map(|(q, (_, qp))| {
            let mut best = (usize::MAX, f64::INFINITY);
            let mut second = f64::INFINITY;
            for (t, (_, tp)) in targets.points.iter().enumerate() {
                let d = qp.descriptor().distance(tp.descriptor());
                if d < best.1 {
                    second = best.1;
                    best = (t, d);
                } else if d < second {
                    second = d;
                }
            }
            Claim {
                query: q,
                target: best.0,
                d1: best.1,
                d2: second,
            }
        })
        .collect();

    let mut winner: Vec<Option<usize>> = vec![None; targets.len()];
    for (ci, claim) in claims.iter().enumerate() {
        let slot = &mut winner[claim.target];
        let beats = match *slot {
            None => true,
            Some(w) => {
                let cur = &claims[w];
                claim.d1 < cur.d1 || (claim.d1 == cur.d1 && queries.points[claim.query].0 < queries.points[cur.query].0)
            }
        };
        if beats {
            *slot = Some(ci);
        }
    }

    let mut pairs: Vec<PointCorrespondence> = winner
        .into_iter()
        .flatten()
        .map(|ci| &claims[ci])
        .filter(|c| targets.len() < 2 || c.d1 <= ratio_threshold * c.d2)
        .map(|c| {
            let (qi, ti) = (queries.points[c.query].0, targets.points[c.target].0);
            let (face_index, palm_index) = if face_queries { (qi, ti) } else { (ti, qi) };
            PointCorrespondence {
                face_index,
                palm_index,
                pair_distance: c.d1,
            }
        })
        .collect();
    pairs.sort_by_key(|c| c.face_index);
    Ok(CorrespondenceSet {
        face_cluster_id: face.cluster_id,
        palm_cluster_id: palm.cluster_id,
        pairs: pairs.into_iter().map(Correspondence::Matched).collect(),
    })
}

/// Keeps the `p` closest pairs (ties by face index), ordered by face index, and
/// pads with sentinels up to exactly `p` pairs.
pub fn equalize(set: &CorrespondenceSet, p: usize) -> Result<CorrespondenceSet> {
    if p < 3 {
        return Err(Error::InvalidConfig(format!("points per cluster must be at least 3, got {p}")));
    }
    let mut real: Vec<PointCorrespondence> = set.matched().copied().collect();
    real.sort_by(|a, b| {
        a.pair_distance
            .partial_cmp(&b.pair_distance)
            .unwrap_or(Ordering::Equal)
            .then(a.face_index.cmp(&b.face_index))
    });
    real.truncate(p);
    real.sort_by_key(|c| c.face_index);
    let mut pairs: Vec<Correspondence> = real.into_iter().map(Correspondence::Matched).collect();
    pairs.resize(p, Correspondence::Padded);
    Ok(CorrespondenceSet {
        face_cluster_id: set.face_cluster_id,
        palm_cluster_id: set.palm_cluster_id,
        pairs,
    })
}
