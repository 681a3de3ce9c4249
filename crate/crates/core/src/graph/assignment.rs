use itertools::Itertools;

use super::{best_mapping, graphs_from_correspondences, ClusterGraph, IsomorphicMapping, RelaxationConfig};
use crate::clustering::Clustering;
use crate::correspondence::{equalize, match_clusters, ClusterPoints, CorrespondenceSet, DEFAULT_RATIO_THRESHOLD};
use crate::error::{Error, Result, Stage};
use crate::exec::Execution;
use crate::keypoint::{KeypointSet, Modality};

/// Largest order solved by enumerating permutations.
const EXHAUSTIVE_LIMIT: usize = 8;

/// Settings for pairing face clusters with palm clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingConfig {
    pub ratio_threshold: f64,
    /// Vertices per cluster graph after equalization.
    pub points_per_cluster: usize,
    pub relaxation: RelaxationConfig,
    /// Added to a candidate's cost for every padding sentinel it needs, so
    /// clusters with real correspondences win over empty ones.
    pub padding_penalty: f64,
}

impl Default for PairingConfig {
    fn default() -> Self {
        PairingConfig {
            ratio_threshold: DEFAULT_RATIO_THRESHOLD,
            points_per_cluster: 8,
            relaxation: RelaxationConfig::default(),
            padding_penalty: 100.0,
        }
    }
}

/// A matched (face cluster, palm cluster) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPairing {
    pub face_cluster: usize,
    pub palm_cluster: usize,
    pub correspondences: CorrespondenceSet,
    pub face_graph: ClusterGraph,
    pub palm_graph: ClusterGraph,
    pub mapping: IsomorphicMapping,
    /// Distortion cost plus the padding penalty.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphPairing {
    pub face_graph: usize,
    pub palm_graph: usize,
    pub mapping: IsomorphicMapping,
}

/// Minimum-cost assignment of rows to columns of a square matrix.
/// Returns `col[row]`.
pub fn solve_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    if cost.len() <= EXHAUSTIVE_LIMIT {
        solve_assignment_exhaustive(cost)
    } else {
        solve_assignment_hungarian(cost)
    }
}

/// Enumerates all permutations; the first minimum in lexicographic order wins.
pub fn solve_assignment_exhaustive(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut best = (Vec::new(), f64::INFINITY);
    for perm in (0..n).permutations(n) {
        let total: f64 = perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        if total < best.1 || best.0.is_empty() {
            best = (perm, total);
        }
    }
    best.0
}

/// Shortest-augmenting-path Hungarian algorithm with potentials, O(n^3).
pub fn solve_assignment_hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0; n];
    for j in 1..=n {
        col[p[j] - 1] = j - 1;
    }
    col
}

/// Pairs prebuilt face graphs with palm graphs by minimum total distortion.
pub fn assign_graph_pairs(
    face_graphs: &[ClusterGraph],
    palm_graphs: &[ClusterGraph],
    config: &RelaxationConfig,
    exec: Execution,
) -> Result<Vec<GraphPairing>> {
    let k = face_graphs.len();
    if palm_graphs.len() != k {
        return Err(Error::ClusterCountMismatch {
            face: k,
            palm: palm_graphs.len(),
        });
    }
    let mut cells = exec
        .map_indices(k * k, |c| best_mapping(&face_graphs[c / k], &palm_graphs[c % k], None, config).map(Some))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| cells[i * k + j].as_ref().map_or(0.0, |m| m.distortion_cost)).collect())
        .collect();
    Ok(solve_assignment(&cost)
        .into_iter()
        .enumerate()
        .map(|(i, j)| GraphPairing {
            face_graph: i,
            palm_graph: j,
            mapping: cells[i * k + j].take().expect("each cell is taken once"),
        })
        .collect())
}

/// Pairs the k face clusters with the k palm clusters.
///
/// For every candidate (face cluster, palm cluster) the retained points are
/// matched, equalized to `points_per_cluster` pairs, turned into two complete
/// graphs and mapped by relaxation. The k x k candidate costs are then
/// assigned exactly. Pairings are returned in face-cluster order.
pub fn assign_cluster_pairs(
    face: (&KeypointSet, &Clustering),
    palm: (&KeypointSet, &Clustering),
    config: &PairingConfig,
) -> Result<Vec<ClusterPairing>> {
    assign_cluster_pairs_with(face, palm, config, Execution::default())
}

pub fn assign_cluster_pairs_with(
    (face_set, face_cl): (&KeypointSet, &Clustering),
    (palm_set, palm_cl): (&KeypointSet, &Clustering),
    config: &PairingConfig,
    exec: Execution,
) -> Result<Vec<ClusterPairing>> {
    config.relaxation.validate()?;
    if face_cl.k != palm_cl.k {
        return Err(Error::ClusterCountMismatch {
            face: face_cl.k,
            palm: palm_cl.k,
        });
    }
    let k = face_cl.k;
    let face_clusters: Vec<ClusterPoints> = (0..k).map(|c| ClusterPoints::retained(face_set, face_cl, c)).collect();
    let palm_clusters: Vec<ClusterPoints> = (0..k).map(|c| ClusterPoints::retained(palm_set, palm_cl, c)).collect();

    let candidate = |cell: usize| -> Result<ClusterPairing> {
        let (i, j) = (cell / k, cell % k);
        let matched = match_clusters(&face_clusters[i], &palm_clusters[j], config.ratio_threshold)
            .map_err(|e| e.at_stage(Stage::Correspondence, Some(Modality::Face), Some(i)))?;
        let correspondences = equalize(&matched, config.points_per_cluster)
            .map_err(|e| e.at_stage(Stage::Correspondence, Some(Modality::Face), Some(i)))?;
        let (face_graph, palm_graph) = graphs_from_correspondences(face_set, palm_set, &correspondences)
            .map_err(|e| e.at_stage(Stage::GraphMapping, Some(Modality::Face), Some(i)))?;
        let mapping = best_mapping(&face_graph, &palm_graph, Some(&correspondences), &config.relaxation)
            .map_err(|e| e.at_stage(Stage::GraphMapping, Some(Modality::Face), Some(i)))?;
        let cost = mapping.distortion_cost + config.padding_penalty * correspondences.padded_count() as f64;
        Ok(ClusterPairing {
            face_cluster: i,
            palm_cluster: j,
            correspondences,
            face_graph,
            palm_graph,
            mapping,
            cost,
        })
    };
    let mut cells: Vec<Option<ClusterPairing>> = exec
        .map_indices(k * k, candidate)
        .into_iter()
        .map(|r| r.map(Some))
        .collect::<Result<_>>()?;
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| cells[i * k + j].as_ref().map_or(0.0, |c| c.cost)).collect())
        .collect();
    Ok(solve_assignment(&cost)
        .into_iter()
        .enumerate()
        .map(|(i, j)| cells[i * k + j].take().expect("each cell is taken once"))
        .collect())
}
