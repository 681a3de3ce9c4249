//! Complete graphs over cluster keypoints, relaxation-labelling search for the
//! best vertex bijection between a face graph and a palm graph, and exact
//! assignment of face clusters to palm clusters.

mod assignment;
mod relaxation;

use std::fmt::Write as _;

use crate::correspondence::{Correspondence, CorrespondenceSet};
use crate::error::{Error, Result};
use crate::keypoint::{Descriptor, KeypointSet};

pub use assignment::{
    assign_cluster_pairs, assign_cluster_pairs_with, assign_graph_pairs, solve_assignment, solve_assignment_exhaustive, solve_assignment_hungarian,
    ClusterPairing, GraphPairing, PairingConfig,
};
pub use relaxation::{best_mapping, distortion_cost, Relaxation};

/// A graph vertex: a keypoint location and descriptor, or a padding sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
    pub descriptor: Descriptor,
    /// Index of the keypoint in its source set; `None` for padding.
    pub source: Option<usize>,
}

impl Vertex {
    pub fn sentinel() -> Self {
        Vertex {
            x: 0.0,
            y: 0.0,
            descriptor: Descriptor::zeros(),
            source: None,
        }
    }

    pub fn from_keypoint(set: &KeypointSet, index: usize) -> Self {
        let kp = &set.points[index];
        Vertex {
            x: kp.x(),
            y: kp.y(),
            descriptor: kp.descriptor().clone(),
            source: Some(index),
        }
    }
}

/// Complete graph with spatial edge lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGraph {
    vertices: Vec<Vertex>,
    lengths: Vec<f64>,
}

/// Builds the complete graph on `vertices`; needs at least three.
pub fn build_graph(vertices: Vec<Vertex>) -> Result<ClusterGraph> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::TooFewVertices { n });
    }
    let mut lengths = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (vertices[i].x - vertices[j].x).hypot(vertices[i].y - vertices[j].y);
            lengths[i * n + j] = d;
            lengths[j * n + i] = d;
        }
    }
    Ok(ClusterGraph { vertices, lengths })
}

impl ClusterGraph {
    pub fn order(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    #[inline]
    pub fn edge_length(&self, i: usize, j: usize) -> f64 {
        self.lengths[i * self.order() + j]
    }

    /// Unordered vertex pairs `(i, j, length)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.order();
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j, self.edge_length(i, j))))
    }

    pub fn edge_count(&self) -> usize {
        let n = self.order();
        n * (n - 1) / 2
    }

    /// Complete graphs are adjacent on every distinct pair.
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        i != j && i < self.order() && j < self.order()
    }
}

/// Face and palm graphs whose vertex `j` comes from pair `j` of an equalized
/// correspondence set.
pub fn graphs_from_correspondences(
    face: &KeypointSet,
    palm: &KeypointSet,
    pairs: &CorrespondenceSet,
) -> Result<(ClusterGraph, ClusterGraph)> {
    let (fv, pv): (Vec<Vertex>, Vec<Vertex>) = pairs
        .pairs
        .iter()
        .map(|c| match c {
            Correspondence::Matched(m) => (
                Vertex::from_keypoint(face, m.face_index),
                Vertex::from_keypoint(palm, m.palm_index),
            ),
            Correspondence::Padded => (Vertex::sentinel(), Vertex::sentinel()),
        })
        .unzip();
    Ok((build_graph(fv)?, build_graph(pv)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationConfig {
    /// Edge-length compatibility bandwidth, pixels.
    pub sigma_edge: f64,
    /// Weight of the descriptor term in the distortion cost.
    pub lambda_desc: f64,
    pub max_iters: usize,
    /// Convergence tolerance on the largest probability change.
    pub epsilon: f64,
    /// Carried for configuration compatibility; the update itself is
    /// deterministic and ties break by index.
    pub seed: u64,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        RelaxationConfig {
            sigma_edge: 10.0,
            lambda_desc: 0.5,
            max_iters: 50,
            epsilon: 1e-4,
            seed: 0,
        }
    }
}

impl RelaxationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.sigma_edge.is_finite() && self.sigma_edge > 0.0) {
            return bad("sigma_edge must be positive");
        }
        if !(self.lambda_desc.is_finite() && self.lambda_desc >= 0.0) {
            return bad("lambda_desc must be non-negative");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

/// A vertex bijection between two graphs of equal order.
#[derive(Debug, Clone, PartialEq)]
pub struct IsomorphicMapping {
    /// `mapping[v]` is the palm vertex assigned to face vertex `v`.
    pub mapping: Vec<usize>,
    pub distortion_cost: f64,
    pub converged: bool,
    pub iterations_used: usize,
}

impl IsomorphicMapping {
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.mapping.len()];
        for (v, &w) in self.mapping.iter().enumerate() {
            inv[w] = v;
        }
        inv
    }
}

/// True when `mapping` is a bijection preserving adjacency in both directions.
pub fn is_isomorphism(face: &ClusterGraph, palm: &ClusterGraph, mapping: &[usize]) -> bool {
    let n = face.order();
    if palm.order() != n || mapping.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &w in mapping {
        if w >= n || std::mem::replace(&mut seen[w], true) {
            return false;
        }
    }
    (0..n).all(|v| (0..n).all(|u| face.adjacent(v, u) == palm.adjacent(mapping[v], mapping[u])))
}

/// `.map` text: `face_vertex palm_vertex` per line, then `cost <v> converged <0|1>`.
pub fn format_mapping(m: &IsomorphicMapping) -> String {
    let mut out = String::new();
    for (v, w) in m.mapping.iter().enumerate() {
        let _ = writeln!(out, "{v} {w}");
    }
    let _ = writeln!(out, "cost {:?} converged {}", m.distortion_cost, u8::from(m.converged));
    out
}

pub fn parse_mapping(text: &str, origin: &str) -> Result<IsomorphicMapping> {
    let fail = |line: usize, message: &str| Error::Format {
        origin: origin.to_string(),
        line,
        message: message.to_string(),
    };
    let mut mapping = Vec::new();
    let mut trailer = None;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let t: Vec<&str> = line.split_whitespace().collect();
        if trailer.is_some() {
            return Err(fail(i + 1, "content after the cost line"));
        }
        match t.as_slice() {
            ["cost", c, "converged", flag] => {
                let cost: f64 = c.parse().map_err(|_| fail(i + 1, "bad cost"))?;
                let converged = match *flag {
                    "0" => false,
                    "1" => true,
                    _ => return Err(fail(i + 1, "converged flag must be 0 or 1")),
                };
                trailer = Some((cost, converged));
            }
            [v, w] => {
                let v: usize = v.parse().map_err(|_| fail(i + 1, "bad vertex"))?;
                let w: usize = w.parse().map_err(|_| fail(i + 1, "bad vertex"))?;
                if v != mapping.len() {
                    return Err(fail(i + 1, "face vertices must be listed in order"));
                }
                mapping.push(w);
            }
            _ => return Err(fail(i + 1, "expected `face_vertex palm_vertex`")),
        }
    }
    let (distortion_cost, converged) = trailer.ok_or_else(|| fail(0, "missing cost line"))?;
    Ok(IsomorphicMapping {
        mapping,
        distortion_cost,
        converged,
        iterations_used: 0,
    })
}
