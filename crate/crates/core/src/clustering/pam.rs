use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ClusterConfig, Clustering, DistanceMatrix, Silhouette};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::keypoint::KeypointSet;

/// Partitions `set` into `config.k` clusters around medoids.
///
/// Initial medoids are drawn with the configured seed. Each sweep assigns every
/// point to its nearest medoid, evaluates the total cost of every
/// (medoid, non-medoid) swap and applies the cheapest one if it lowers the
/// cost. Sweeps stop when no swap improves or after `max_iterations`.
pub fn pam_cluster(set: &KeypointSet, config: &ClusterConfig) -> Result<Clustering> {
    pam_cluster_with(set, config, Execution::default())
}

pub fn pam_cluster_with(set: &KeypointSet, config: &ClusterConfig, exec: Execution) -> Result<Clustering> {
    config.validate()?;
    if set.len() < config.k {
        return Err(Error::TooFewPoints {
            n: set.len(),
            needed: config.k,
        });
    }
    let dist = DistanceMatrix::for_keypoints(set, config, exec);
    pam_on_matrix(&dist, config.k, config.max_iterations, config.seed, exec)
}

/// PAM over a precomputed distance matrix.
pub fn pam_on_matrix(
    dist: &DistanceMatrix,
    k: usize,
    max_iterations: usize,
    seed: u64,
    exec: Execution,
) -> Result<Clustering> {
    let n = dist.len();
    if k == 0 || n < k {
        return Err(Error::TooFewPoints { n, needed: k.max(1) });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids = sample(&mut rng, n, k).into_vec();
    medoids.sort_unstable();

    let mut state = Nearest::compute(dist, &medoids);
    let mut cost_trace = vec![state.cost()];
    let mut iterations = 0;
    let mut candidates: Vec<(usize, usize)> = Vec::with_capacity(k * (n - k));
    while iterations < max_iterations {
        let is_medoid = medoid_mask(n, &medoids);
        candidates.clear();
        for slot in 0..k {
            for j in (0..n).filter(|&j| !is_medoid[j]) {
                candidates.push((slot, j));
            }
        }
        if candidates.is_empty() {
            break;
        }
        let costs = exec.map_indices(candidates.len(), |c| {
            let (slot, j) = candidates[c];
            state.swap_cost(dist, slot, j)
        });
        // First minimum in (slot, point) order.
        let (best, best_cost) = costs
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &c)| if c < acc.1 { (i, c) } else { acc });
        let current = state.cost();
        if !(best_cost < current) {
            break;
        }
        let (slot, j) = candidates[best];
        medoids[slot] = j;
        medoids.sort_unstable();
        state = Nearest::compute(dist, &medoids);
        iterations += 1;
        cost_trace.push(state.cost());
    }

    let total_cost = state.cost();
    Ok(Clustering {
        k,
        assignments: state.assignment,
        medoids,
        total_cost,
        silhouettes: vec![Silhouette::Unscored; n],
        excluded: vec![false; n],
        degenerate: dist.max() == 0.0,
        iterations,
        cost_trace,
        rescinded_clusters: Vec::new(),
    })
}

fn medoid_mask(n: usize, medoids: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &m in medoids {
        mask[m] = true;
    }
    mask
}

/// Nearest and second-nearest medoid slot per point.
struct Nearest {
    assignment: Vec<usize>,
    near: Vec<f64>,
    second: Vec<f64>,
}

impl Nearest {
    fn compute(dist: &DistanceMatrix, medoids: &[usize]) -> Self {
        let n = dist.len();
        let mut assignment = vec![0; n];
        let mut near = vec![f64::INFINITY; n];
        let mut second = vec![f64::INFINITY; n];
        for o in 0..n {
            // A medoid always belongs to its own cluster, even when another
            // medoid coincides with it.
            let own = medoids.iter().position(|&m| m == o);
            let mut best_slot = own.unwrap_or(usize::MAX);
            let mut best = if own.is_some() { 0.0 } else { f64::INFINITY };
            let mut runner = f64::INFINITY;
            for (slot, &m) in medoids.iter().enumerate() {
                if Some(slot) == own {
                    continue;
                }
                let d = dist.get(o, m);
                if d < best {
                    runner = best;
                    best = d;
                    best_slot = slot;
                } else if d < runner {
                    runner = d;
                }
            }
            assignment[o] = best_slot;
            near[o] = best;
            second[o] = runner;
        }
        Nearest {
            assignment,
            near,
            second,
        }
    }

    fn cost(&self) -> f64 {
        self.near.iter().sum()
    }

    /// Total cost after replacing the medoid in `slot` by point `j`. Summed in
    /// point order, so it equals a from-scratch recomputation bit for bit.
    fn swap_cost(&self, dist: &DistanceMatrix, slot: usize, j: usize) -> f64 {
        (0..self.near.len())
            .map(|o| {
                let others = if self.assignment[o] == slot { self.second[o] } else { self.near[o] };
                dist.get(o, j).min(others)
            })
            .sum()
    }
}
