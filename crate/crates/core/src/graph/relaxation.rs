use super::{is_isomorphism, ClusterGraph, IsomorphicMapping, RelaxationConfig};
use crate::correspondence::CorrespondenceSet;
use crate::error::{Error, Result};

/// Multiplier applied to the initial probability of pairs already proposed by
/// descriptor correspondence.
const INIT_BOOST: f64 = 2.0;

/// Probabilistic relaxation labelling of face vertices with palm vertices.
///
/// `P[v][w]` is the probability that face vertex `v` maps to palm vertex `w`.
/// Each step multiplies every entry by its support
///
/// ```text
/// q(v, w) = sum_{v' != v} sum_{w' != w} P[v'][w'] * exp(-|len(v, v') - len(w, w')| / sigma_edge)
/// ```
///
/// and renormalizes the rows.
#[derive(Debug, Clone)]
pub struct Relaxation {
    n: usize,
    p: Vec<f64>,
    /// Edge compatibilities indexed `[(v * n + v') * n * n + w * n + w']`.
    compat: Vec<f64>,
    iterations: usize,
}

impl Relaxation {
    pub fn new(
        face: &ClusterGraph,
        palm: &ClusterGraph,
        init: Option<&CorrespondenceSet>,
        config: &RelaxationConfig,
    ) -> Result<Self> {
        config.validate()?;
        let n = face.order();
        if palm.order() != n {
            return Err(Error::SizeMismatch { face: n, palm: palm.order() });
        }

        let mut desc = vec![0.0; n * n];
        for v in 0..n {
            for w in 0..n {
                desc[v * n + w] = face.vertices()[v].descriptor.distance(&palm.vertices()[w].descriptor);
            }
        }
        let mean = desc.iter().sum::<f64>() / (n * n) as f64;
        let mut p: Vec<f64> = desc
            .iter()
            .map(|&d| if mean > 0.0 { (-d / mean).exp() } else { 1.0 })
            .collect();

        if let Some(init) = init {
            for pair in init.matched() {
                let v = face.vertices().iter().position(|x| x.source == Some(pair.face_index));
                let w = palm.vertices().iter().position(|x| x.source == Some(pair.palm_index));
                if let (Some(v), Some(w)) = (v, w) {
                    p[v * n + w] *= INIT_BOOST;
                }
            }
        }
        normalize_rows(&mut p, n);

        let n2 = n * n;
        let mut compat = vec![0.0; n2 * n2];
        for v in 0..n {
            for vp in 0..n {
                let lf = face.edge_length(v, vp);
                let base = (v * n + vp) * n2;
                for w in 0..n {
                    for wp in 0..n {
                        let lp = palm.edge_length(w, wp);
                        compat[base + w * n + wp] = (-(lf - lp).abs() / config.sigma_edge).exp();
                    }
                }
            }
        }
        Ok(Relaxation {
            n,
            p,
            compat,
            iterations: 0,
        })
    }

    /// Row-major `n x n` assignment probabilities.
    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// One update; returns the largest absolute change of any probability.
    pub fn step(&mut self) -> f64 {
        let n = self.n;
        let n2 = n * n;
        let mut next = vec![0.0; n2];
        for v in 0..n {
            for w in 0..n {
                let mut q = 0.0;
                for vp in (0..n).filter(|&vp| vp != v) {
                    let base = (v * n + vp) * n2 + w * n;
                    let row = &self.p[vp * n..vp * n + n];
                    for wp in (0..n).filter(|&wp| wp != w) {
                        q += row[wp] * self.compat[base + wp];
                    }
                }
                next[v * n + w] = self.p[v * n + w] * q;
            }
        }
        normalize_rows(&mut next, n);
        let delta = next
            .iter()
            .zip(&self.p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        self.p = next;
        self.iterations += 1;
        delta
    }

    /// Greedy bijection: repeatedly fix the largest remaining probability and
    /// strike its row and column. Ties go to the lowest (row, column).
    pub fn extract(&self) -> Vec<usize> {
        let n = self.n;
        let mut mapping = vec![usize::MAX; n];
        let mut row_used = vec![false; n];
        let mut col_used = vec![false; n];
        for _ in 0..n {
            let mut best = (usize::MAX, usize::MAX, f64::NEG_INFINITY);
            for v in (0..n).filter(|&v| !row_used[v]) {
                for w in (0..n).filter(|&w| !col_used[w]) {
                    let val = self.p[v * n + w];
                    if val > best.2 {
                        best = (v, w, val);
                    }
                }
            }
            let (v, w, _) = best;
            mapping[v] = w;
            row_used[v] = true;
            col_used[w] = true;
        }
        mapping
    }
}

fn normalize_rows(p: &mut [f64], n: usize) {
    for row in p.chunks_mut(n) {
        let sum: f64 = row.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            row.iter_mut().for_each(|x| *x /= sum);
        } else {
            row.iter_mut().for_each(|x| *x = 1.0 / n as f64);
        }
    }
}

/// Edge-length disagreement over all vertex pairs plus `lambda_desc` times the
/// descriptor distance of every mapped pair.
pub fn distortion_cost(face: &ClusterGraph, palm: &ClusterGraph, mapping: &[usize], lambda_desc: f64) -> f64 {
    let edges: f64 = face
        .edges()
        .map(|(v, u, len)| (len - palm.edge_length(mapping[v], mapping[u])).abs())
        .sum();
    let desc: f64 = mapping
        .iter()
        .enumerate()
        .map(|(v, &w)| face.vertices()[v].descriptor.distance(&palm.vertices()[w].descriptor))
        .sum();
    edges + lambda_desc * desc
}

/// Runs relaxation to convergence (or `max_iters`) and extracts the mapping.
pub fn best_mapping(
    face: &ClusterGraph,
    palm: &ClusterGraph,
    init: Option<&CorrespondenceSet>,
    config: &RelaxationConfig,
) -> Result<IsomorphicMapping> {
    let mut relax = Relaxation::new(face, palm, init, config)?;
    let mut converged = false;
    while relax.iterations() < config.max_iters {
        if relax.step() < config.epsilon {
            converged = true;
            break;
        }
    }
    let mapping = relax.extract();
    debug_assert!(is_isomorphism(face, palm, &mapping));
    Ok(IsomorphicMapping {
        distortion_cost: distortion_cost(face, palm, &mapping, config.lambda_desc),
        mapping,
        converged,
        iterations_used: relax.iterations(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, Vertex};
    use crate::keypoint::Descriptor;

    fn vertex(x: f64, y: f64, d: f64) -> Vertex {
        Vertex {
            x,
            y,
            descriptor: Descriptor::unit(0, d).unwrap(),
            source: None,
        }
    }

    #[test]
    fn recovers_planted_permutation() {
        let face = vec![
            vertex(0.0, 0.0, 1.0),
            vertex(30.0, 5.0, 2.0),
            vertex(12.0, 40.0, 3.0),
            vertex(50.0, 25.0, 4.0),
            vertex(20.0, 18.0, 5.0),
        ];
        let perm = [3, 0, 4, 1, 2];
        let mut palm = vec![face[0].clone(); 5];
        for (v, &w) in perm.iter().enumerate() {
            palm[w] = face[v].clone();
        }
        let fg = build_graph(face).unwrap();
        let pg = build_graph(palm).unwrap();
        let m = best_mapping(&fg, &pg, None, &RelaxationConfig::default()).unwrap();
        assert_eq!(m.mapping, perm);
        assert_eq!(m.distortion_cost, 0.0);
    }

    #[test]
    fn congruent_identical_triangles_pick_identity() {
        let tri = vec![vertex(0.0, 0.0, 1.0), vertex(3.0, 0.0, 1.0), vertex(0.0, 4.0, 1.0)];
        let g = build_graph(tri).unwrap();
        let m = best_mapping(&g, &g, None, &RelaxationConfig::default()).unwrap();
        assert_eq!(m.mapping, vec![0, 1, 2]);
        assert_eq!(m.distortion_cost, 0.0);
    }

    #[test]
    fn rows_stay_stochastic() {
        let face: Vec<Vertex> = (0..6).map(|i| vertex((i * 7 % 11) as f64 * 5.0, (i * 3) as f64, i as f64)).collect();
        let palm: Vec<Vertex> = (0..6).map(|i| vertex((i * 5 % 7) as f64 * 6.0, (i * 4) as f64, 6.0 - i as f64)).collect();
        let (fg, pg) = (build_graph(face).unwrap(), build_graph(palm).unwrap());
        let mut r = Relaxation::new(&fg, &pg, None, &RelaxationConfig::default()).unwrap();
        for _ in 0..30 {
            r.step();
            for row in r.probabilities().chunks(6) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn unequal_orders_rejected() {
        let a = build_graph((0..3).map(|i| vertex(i as f64, 0.0, 0.0)).collect()).unwrap();
        let b = build_graph((0..4).map(|i| vertex(i as f64, 1.0, 0.0)).collect()).unwrap();
        assert!(matches!(
            best_mapping(&a, &b, None, &RelaxationConfig::default()),
            Err(Error::SizeMismatch { face: 3, palm: 4 })
        ));
    }
}
