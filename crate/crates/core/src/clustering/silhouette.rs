use std::cmp::Ordering;

use super::{ClusterConfig, Clustering, DistanceMatrix, Silhouette};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::keypoint::KeypointSet;

/// Members of `cluster` sorted by distance to the medoid, ties by point index.
/// Consecutive entries form the scoring pairs.
pub fn canonical_order(dist: &DistanceMatrix, clustering: &Clustering, cluster: usize) -> Vec<usize> {
    let medoid = clustering.medoids[cluster];
    let mut members = clustering.members(cluster);
    members.sort_by(|&a, &b| {
        dist.get(a, medoid)
            .partial_cmp(&dist.get(b, medoid))
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    members
}

/// Pairwise silhouette scores.
///
/// Within each cluster, points are taken two at a time in canonical order. For
/// a pair `(i, i+1)`, `x` is each point's mean distance to the rest of its own
/// cluster and `y` its mean distance to the neighbouring cluster, the one with
/// the lowest combined mean distance to the pair. Both points receive
///
/// ```text
/// S = ((y(i) + y(i+1))/2 - (x(i) + x(i+1))/2) / max((x(i) + x(i+1))/2, (y(i) + y(i+1))/2)
/// ```
///
/// An odd cluster's last point is scored alone with the classical
/// `(y - x) / max(x, y)`. Points of one-point clusters are `Singleton`; with a
/// single cluster every point is `Unscored`.
pub fn silhouette_scores(set: &KeypointSet, clustering: &Clustering, config: &ClusterConfig) -> Result<Vec<Silhouette>> {
    check_shape(set, clustering)?;
    let dist = DistanceMatrix::for_keypoints(set, config, Execution::default());
    silhouette_on_matrix(&dist, clustering)
}

pub(crate) fn check_shape(set: &KeypointSet, clustering: &Clustering) -> Result<()> {
    if set.len() != clustering.len() {
        return Err(Error::InvalidConfig(format!(
            "clustering covers {} points but the set has {}",
            clustering.len(),
            set.len()
        )));
    }
    Ok(())
}

pub(crate) fn silhouette_on_matrix(dist: &DistanceMatrix, clustering: &Clustering) -> Result<Vec<Silhouette>> {
    let k = clustering.k;
    let n = clustering.len();
    let sizes = clustering.cluster_sizes();
    if let Some(c) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster { cluster: c });
    }
    let mut scores = vec![Silhouette::Unscored; n];
    if k < 2 {
        return Ok(scores);
    }

    // mean[i][c]: mean distance from point i to the members of cluster c,
    // excluding i itself.
    let mut sums = vec![vec![0.0; k]; n];
    for (i, row) in sums.iter_mut().enumerate() {
        for j in 0..n {
            if j != i {
                row[clustering.assignments[j]] += dist.get(i, j);
            }
        }
    }
    let mean = |i: usize, c: usize| {
        let count = if clustering.assignments[i] == c { sizes[c] - 1 } else { sizes[c] };
        sums[i][c] / count as f64
    };

    for c in 0..k {
        let order = canonical_order(dist, clustering, c);
        if order.len() == 1 {
            scores[order[0]] = Silhouette::Singleton;
            continue;
        }
        for pair in order.chunks(2) {
            let (a, b) = (pair[0], *pair.get(1).unwrap_or(&pair[0]));
            let neighbour = (0..k)
                .filter(|&o| o != c)
                .map(|o| (o, mean(a, o) + mean(b, o)))
                .fold((usize::MAX, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc })
                .0;
            let x = (mean(a, c) + mean(b, c)) / 2.0;
            let y = (mean(a, neighbour) + mean(b, neighbour)) / 2.0;
            let denom = x.max(y);
            let s = if denom > 0.0 { (y - x) / denom } else { 0.0 };
            for &p in pair {
                scores[p] = Silhouette::Scored(s);
            }
        }
    }
    Ok(scores)
}

/// Marks points whose silhouette is strictly below the threshold as excluded.
///
/// A cluster is never left with fewer than `min(3, size)` retained points:
/// when it would be, exclusions are rescinded best score first (ties by point
/// index) and the cluster is recorded in `rescinded_clusters`.
pub fn refine_clusters(set: &KeypointSet, clustering: &Clustering, config: &ClusterConfig) -> Result<Clustering> {
    check_shape(set, clustering)?;
    config.validate()?;
    let mut out = clustering.clone();
    out.rescinded_clusters.clear();
    for (i, s) in clustering.silhouettes.iter().enumerate() {
        out.excluded[i] = s.value().is_some_and(|v| v < config.silhouette_threshold);
    }
    for c in 0..clustering.k {
        let members = clustering.members(c);
        let required = members.len().min(3);
        let mut retained = members.iter().filter(|&&i| !out.excluded[i]).count();
        if retained >= required {
            continue;
        }
        let mut dropped: Vec<usize> = members.iter().copied().filter(|&i| out.excluded[i]).collect();
        dropped.sort_by(|&a, &b| {
            let (sa, sb) = (score_of(clustering, a), score_of(clustering, b));
            sb.partial_cmp(&sa).unwrap_or(Ordering::Equal).then(a.cmp(&b))
        });
        for i in dropped {
            if retained >= required {
                break;
            }
            out.excluded[i] = false;
            retained += 1;
        }
        out.rescinded_clusters.push(c);
    }
    Ok(out)
}

fn score_of(clustering: &Clustering, i: usize) -> f64 {
    clustering.silhouettes[i].value().unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::pam_cluster;
    use crate::keypoint::{Descriptor, Keypoint, Modality};

    fn set_from(values: &[(f64, f64)]) -> KeypointSet {
        let points = values
            .iter()
            .map(|&(a, b)| {
                let mut d = [0.0; 128];
                d[0] = a;
                d[1] = b;
                Keypoint::new(0.0, 0.0, 1.0, 0.0, Descriptor::new(&d).unwrap()).unwrap()
            })
            .collect();
        KeypointSet::new(Modality::Face, "s", "ref", points).unwrap()
    }

    fn clustering(assignments: Vec<usize>, medoids: Vec<usize>) -> Clustering {
        let n = assignments.len();
        Clustering {
            k: medoids.len(),
            medoids,
            assignments,
            total_cost: 0.0,
            silhouettes: vec![Silhouette::Unscored; n],
            excluded: vec![false; n],
            degenerate: false,
            iterations: 0,
            cost_trace: vec![],
            rescinded_clusters: vec![],
        }
    }

    #[test]
    fn duplicate_points_score_one() {
        let set = set_from(&[(0.0, 0.0), (0.0, 0.0), (10.0, 0.0), (10.0, 0.0)]);
        let cl = clustering(vec![0, 0, 1, 1], vec![0, 2]);
        let s = silhouette_scores(&set, &cl, &ClusterConfig::default()).unwrap();
        assert!(s.iter().all(|v| *v == Silhouette::Scored(1.0)), "{s:?}");
    }

    #[test]
    fn border_pair_scores_zero() {
        // Cluster 1 sits at distance 2 from both members of cluster 0, which
        // are themselves 2 apart: x sums equal y sums.
        let set = set_from(&[(0.0, 0.0), (2.0, 0.0), (1.0, 3f64.sqrt()), (1.0, 3f64.sqrt())]);
        let cl = clustering(vec![0, 0, 1, 1], vec![0, 2]);
        let s = silhouette_scores(&set, &cl, &ClusterConfig::default()).unwrap();
        let v = s[0].value().unwrap();
        assert!(v.abs() < 1e-12, "{v}");
        assert_eq!(s[0], s[1]);
        assert_eq!(s[2], Silhouette::Scored(1.0));
    }

    #[test]
    fn singleton_and_single_cluster() {
        let set = set_from(&[(0.0, 0.0), (1.0, 0.0), (9.0, 0.0)]);
        let cl = clustering(vec![0, 0, 1], vec![0, 2]);
        let s = silhouette_scores(&set, &cl, &ClusterConfig::default()).unwrap();
        assert_eq!(s[2], Silhouette::Singleton);
        let cl = clustering(vec![0, 0, 0], vec![0]);
        let s = silhouette_scores(&set, &cl, &ClusterConfig::default()).unwrap();
        assert!(s.iter().all(|v| *v == Silhouette::Unscored));
    }

    #[test]
    fn threshold_minus_one_excludes_nothing() {
        let set = set_from(&[(0.0, 0.0), (1.0, 0.0), (5.0, 0.0), (9.0, 0.0), (10.0, 0.0), (4.0, 0.0)]);
        let cfg = ClusterConfig { k: 2, silhouette_threshold: -1.0, ..Default::default() };
        let mut cl = pam_cluster(&set, &cfg).unwrap();
        cl.silhouettes = silhouette_scores(&set, &cl, &cfg).unwrap();
        let r = refine_clusters(&set, &cl, &cfg).unwrap();
        assert_eq!(r.excluded_count(), 0);
    }

    #[test]
    fn zero_score_is_retained_negative_is_excluded() {
        let set = set_from(&[(0.0, 0.0); 9]);
        let mut cl = clustering(vec![0, 0, 0, 0, 1, 1, 1, 1, 1], vec![0, 4]);
        cl.silhouettes = vec![
            Silhouette::Scored(0.0),
            Silhouette::Scored(0.0),
            Silhouette::Scored(0.5),
            Silhouette::Scored(0.5),
            Silhouette::Scored(-0.2),
            Silhouette::Scored(-0.2),
            Silhouette::Scored(0.4),
            Silhouette::Scored(0.4),
            Silhouette::Scored(0.4),
        ];
        let cfg = ClusterConfig { k: 2, ..Default::default() };
        let r = refine_clusters(&set, &cl, &cfg).unwrap();
        assert_eq!(r.excluded, vec![false, false, false, false, true, true, false, false, false]);
        assert!(r.rescinded_clusters.is_empty());
        assert_eq!(r.medoids, cl.medoids);
        assert_eq!(r.assignments, cl.assignments);
    }

    #[test]
    fn refinement_keeps_three_points() {
        let set = set_from(&[(0.0, 0.0); 6]);
        let mut cl = clustering(vec![0, 0, 0, 0, 1, 1], vec![0, 4]);
        cl.silhouettes = vec![
            Silhouette::Scored(-0.9),
            Silhouette::Scored(-0.1),
            Silhouette::Scored(-0.5),
            Silhouette::Scored(-0.3),
            Silhouette::Scored(0.2),
            Silhouette::Scored(0.2),
        ];
        let cfg = ClusterConfig { k: 2, ..Default::default() };
        let r = refine_clusters(&set, &cl, &cfg).unwrap();
        assert_eq!(r.retained_members(0), vec![1, 2, 3]);
        assert_eq!(r.rescinded_clusters, vec![0]);
        assert_eq!(r.retained_members(1), vec![4, 5]);
    }
}
