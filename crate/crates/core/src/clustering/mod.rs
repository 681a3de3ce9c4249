//! PAM k-medoids partitioning of a keypoint set, pairwise silhouette scoring
//! and silhouette-based refinement.

mod dump;
mod pam;
mod silhouette;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::keypoint::{Keypoint, KeypointSet};

pub use dump::{format_cluster_dump, parse_cluster_dump, ClusterDump, ClusterDumpEntry};
pub use pam::{pam_cluster, pam_cluster_with, pam_on_matrix};
pub use silhouette::{canonical_order, refine_clusters, silhouette_scores};
pub(crate) use silhouette::silhouette_on_matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceMetric {
    Euclidean,
    /// Minkowski distance of order `p >= 1`.
    Minkowski(f64),
}

impl DistanceMetric {
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            DistanceMetric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            DistanceMetric::Minkowski(p) if p == 2.0 => DistanceMetric::Euclidean.distance(a, b),
            DistanceMetric::Minkowski(p) if p == 1.0 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            DistanceMetric::Minkowski(p) => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs().powf(p))
                .sum::<f64>()
                .powf(1.0 / p),
        }
    }
}

/// Which coordinates of a keypoint the clustering metric sees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureSpace {
    Descriptor,
    Spatial,
    /// Descriptor followed by `(w * x, w * y)`.
    DescriptorPlusSpatial(f64),
}

impl FeatureSpace {
    pub fn features(&self, kp: &Keypoint) -> Vec<f64> {
        match *self {
            FeatureSpace::Descriptor => kp.descriptor().as_slice().to_vec(),
            FeatureSpace::Spatial => vec![kp.x(), kp.y()],
            FeatureSpace::DescriptorPlusSpatial(w) => {
                let mut v = kp.descriptor().as_slice().to_vec();
                v.push(w * kp.x());
                v.push(w * kp.y());
                v
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub k: usize,
    pub metric: DistanceMetric,
    pub feature_space: FeatureSpace,
    pub max_iterations: usize,
    pub seed: u64,
    /// Points scoring strictly below this silhouette are excluded by refinement.
    pub silhouette_threshold: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k: 4,
            metric: DistanceMetric::Euclidean,
            feature_space: FeatureSpace::Descriptor,
            max_iterations: 100,
            seed: 0,
            silhouette_threshold: 0.0,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.k == 0 {
            return bad("k must be positive".into());
        }
        if let DistanceMetric::Minkowski(p) = self.metric {
            if !(p.is_finite() && p >= 1.0) {
                return bad(format!("Minkowski order must be >= 1, got {p}"));
            }
        }
        if let FeatureSpace::DescriptorPlusSpatial(w) = self.feature_space {
            if !(w.is_finite() && w >= 0.0) {
                return bad(format!("spatial weight must be finite and non-negative, got {w}"));
            }
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1".into());
        }
        if !(-1.0..=1.0).contains(&self.silhouette_threshold) {
            return bad(format!(
                "silhouette threshold must lie in [-1, 1], got {}",
                self.silhouette_threshold
            ));
        }
        Ok(())
    }
}

/// Symmetric pairwise distance matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, exec: Execution, f: impl Fn(usize, usize) -> f64 + Sync + Send) -> Self {
        let rows = exec.map_indices(n, |i| (0..n).map(|j| if i == j { 0.0 } else { f(i, j) }).collect::<Vec<_>>());
        DistanceMatrix {
            n,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// Distances between the keypoints of `set` in the configured feature space.
    pub fn for_keypoints(set: &KeypointSet, config: &ClusterConfig, exec: Execution) -> Self {
        let features: Vec<Vec<f64>> = set.points.iter().map(|kp| config.feature_space.features(kp)).collect();
        let metric = config.metric;
        DistanceMatrix::from_fn(features.len(), exec, |i, j| metric.distance(&features[i], &features[j]))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Per-point silhouette outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Silhouette {
    Scored(f64),
    /// Member of a one-point cluster; counts as 0.
    Singleton,
    /// No score: fewer than two clusters, or not yet computed.
    Unscored,
}

impl Silhouette {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Silhouette::Scored(s) => Some(s),
            Silhouette::Singleton => Some(0.0),
            Silhouette::Unscored => None,
        }
    }
}

/// A k-medoids partition of one keypoint set.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub k: usize,
    /// Medoid point indices in ascending order; cluster `c` is `medoids[c]`.
    pub medoids: Vec<usize>,
    pub assignments: Vec<usize>,
    pub total_cost: f64,
    pub silhouettes: Vec<Silhouette>,
    pub excluded: Vec<bool>,
    /// Every pairwise distance was zero; medoids are arbitrary.
    pub degenerate: bool,
    /// Number of accepted swaps.
    pub iterations: usize,
    /// Configuration cost before the first swap and after each accepted swap.
    pub cost_trace: Vec<f64>,
    /// Clusters where refinement had to rescind exclusions.
    pub rescinded_clusters: Vec<usize>,
}

impl Clustering {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignments[i] == cluster).collect()
    }

    /// Members not excluded by refinement, in point order.
    pub fn retained_members(&self, cluster: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.assignments[i] == cluster && !self.excluded[i])
            .collect()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignments {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn excluded_count(&self) -> usize {
        self.excluded.iter().filter(|&&e| e).count()
    }
}
