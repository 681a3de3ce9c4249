//! Independent reference implementations used as oracles by the integration
//! and acceptance tests. Nothing here calls into the library's algorithms; only
//! its data types.

#![allow(dead_code)]

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kpfuse::graph::{build_graph, ClusterGraph, Vertex};
use kpfuse::{Descriptor, Keypoint, KeypointSet, Modality, DESCRIPTOR_LEN};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn descriptor_from(head: &[f64]) -> Descriptor {
    let mut v = vec![0.0; DESCRIPTOR_LEN];
    v[..head.len()].copy_from_slice(head);
    Descriptor::new(&v).unwrap()
}

pub fn random_descriptor(rng: &mut impl Rng) -> Descriptor {
    let v: Vec<f64> = (0..DESCRIPTOR_LEN)
        .map(|_| if rng.random::<f64>() < 0.3 { rng.random::<f64>() } else { 0.0 })
        .collect();
    Descriptor::new(&v).unwrap()
}

pub fn keypoint(x: f64, y: f64, d: Descriptor) -> Keypoint {
    Keypoint::new(x, y, 1.0, 0.0, d).unwrap()
}

pub fn set_of(modality: Modality, subject: &str, points: Vec<Keypoint>) -> KeypointSet {
    KeypointSet::new(modality, subject, "c0", points).unwrap()
}

/// A random set with full-length random descriptors and random locations.
pub fn random_set(rng: &mut impl Rng, n: usize, modality: Modality) -> KeypointSet {
    let points = (0..n)
        .map(|_| {
            let x = rng.random_range(0.0..256.0);
            let y = rng.random_range(0.0..256.0);
            let s = rng.random_range(0.5..4.0);
            let o = rng.random_range(0.0..std::f64::consts::TAU);
            Keypoint::new(x, y, s, o, random_descriptor(rng)).unwrap()
        })
        .collect();
    KeypointSet::new(modality, "s", "c", points).unwrap()
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]).powi(2);
    }
    s.sqrt()
}

/// Full distance matrix on descriptors.
pub fn descriptor_distances(set: &KeypointSet) -> Vec<Vec<f64>> {
    let n = set.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d[i][j] = l2(set.points[i].descriptor().as_slice(), set.points[j].descriptor().as_slice());
            }
        }
    }
    d
}

/// Cost of a medoid subset: each point pays its distance to the nearest medoid.
pub fn medoid_subset_cost(d: &[Vec<f64>], medoids: &[usize]) -> f64 {
    (0..d.len())
        .map(|i| medoids.iter().map(|&m| d[i][m]).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Minimum over all C(n, k) medoid subsets, with the minimising subset.
pub fn exhaustive_medoids(d: &[Vec<f64>], k: usize) -> (f64, Vec<usize>) {
    (0..d.len())
        .combinations(k)
        .map(|c| (medoid_subset_cost(d, &c), c))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
}

/// Closest cross-cluster point pair over the widest same-cluster pair.
pub fn separation_ratio(d: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut inter = f64::INFINITY;
    let mut intra: f64 = 0.0;
    for i in 0..d.len() {
        for j in (i + 1)..d.len() {
            if labels[i] == labels[j] {
                intra = intra.max(d[i][j]);
            } else {
                inter = inter.min(d[i][j]);
            }
        }
    }
    if intra == 0.0 {
        f64::INFINITY
    } else {
        inter / intra
    }
}

/// Pairwise silhouette coded directly from its definition.
///
/// Points of each cluster are listed by distance to the medoid (ties by index)
/// and scored two at a time; an odd leftover point is scored alone. For a pair
/// the own-cluster term X is the sum of each point's mean distance to the other
/// members, and the neighbour term Y the same sum toward the other cluster
/// minimising it. The score is (Y - X) / max(X, Y). `None` marks a singleton.
pub fn silhouette_oracle(d: &[Vec<f64>], labels: &[usize], medoids: &[usize]) -> Vec<Option<f64>> {
    let n = d.len();
    let k = medoids.len();
    let avg = |i: usize, c: usize| -> f64 {
        let others: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == c).collect();
        others.iter().map(|&j| d[i][j]).sum::<f64>() / others.len() as f64
    };
    let mut out = vec![None; n];
    for c in 0..k {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        if members.len() < 2 {
            continue;
        }
        members.sort_by(|&a, &b| d[a][medoids[c]].total_cmp(&d[b][medoids[c]]).then(a.cmp(&b)));
        let mut idx = 0;
        while idx < members.len() {
            let group: Vec<usize> = members[idx..members.len().min(idx + 2)].to_vec();
            let pair = if group.len() == 2 { (group[0], group[1]) } else { (group[0], group[0]) };
            let x = avg(pair.0, c) + avg(pair.1, c);
            let mut y = f64::INFINITY;
            for o in 0..k {
                if o != c {
                    y = y.min(avg(pair.0, o) + avg(pair.1, o));
                }
            }
            let m = x.max(y);
            let s = if m > 0.0 { (y - x) / m } else { 0.0 };
            for &p in &group {
                out[p] = Some(s);
            }
            idx += 2;
        }
    }
    out
}

/// Geometry plus descriptor disagreement of a vertex bijection.
pub fn mapping_cost(face: &[(f64, f64, Descriptor)], palm: &[(f64, f64, Descriptor)], map: &[usize], lambda: f64) -> f64 {
    let len = |v: &[(f64, f64, Descriptor)], a: usize, b: usize| ((v[a].0 - v[b].0).powi(2) + (v[a].1 - v[b].1).powi(2)).sqrt();
    let mut cost = 0.0;
    for a in 0..face.len() {
        for b in (a + 1)..face.len() {
            cost += (len(face, a, b) - len(palm, map[a], map[b])).abs();
        }
    }
    for (a, &w) in map.iter().enumerate() {
        cost += lambda * l2(face[a].2.as_slice(), palm[w].2.as_slice());
    }
    cost
}

/// Minimum bijection cost over all n! permutations.
pub fn exhaustive_mapping(face: &[(f64, f64, Descriptor)], palm: &[(f64, f64, Descriptor)], lambda: f64) -> (f64, Vec<usize>) {
    let n = face.len();
    (0..n)
        .permutations(n)
        .map(|p| (mapping_cost(face, palm, &p, lambda), p))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
}

pub fn graph_of(v: &[(f64, f64, Descriptor)]) -> ClusterGraph {
    build_graph(
        v.iter()
            .enumerate()
            .map(|(i, (x, y, d))| Vertex {
                x: *x,
                y: *y,
                descriptor: d.clone(),
                source: Some(i),
            })
            .collect(),
    )
    .unwrap()
}

/// Minimum assignment total by recursive enumeration of all k! assignments.
pub fn exhaustive_assignment(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == cost.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for c in 0..cost.len() {
            if !used[c] {
                used[c] = true;
                best = best.min(cost[row][c] + go(cost, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    go(cost, 0, &mut vec![false; cost.len()])
}

pub fn assignment_total(cost: &[Vec<f64>], cols: &[usize]) -> f64 {
    cols.iter().enumerate().map(|(r, &c)| cost[r][c]).sum()
}

/// Greedy elimination on a face x palm distance matrix: repeatedly settle the
/// globally smallest provisional claim. Each point of the querying side claims
/// its nearest target; a claim survives only if it is the smallest among the
/// claims on its target. Survivors must also pass the nearest/second-nearest
/// ratio test. Returns (face, palm) pairs sorted by face index.
pub fn greedy_elimination(d: &[Vec<f64>], ratio: f64) -> Vec<(usize, usize)> {
    let (nf, np) = (d.len(), d[0].len());
    let face_queries = nf >= np;
    let (nq, nt) = if face_queries { (nf, np) } else { (np, nf) };
    let dist = |q: usize, t: usize| if face_queries { d[q][t] } else { d[t][q] };
    // (distance, query, target, ratio ok)
    let mut claims: Vec<(f64, usize, usize, bool)> = (0..nq)
        .map(|q| {
            let mut row: Vec<(f64, usize)> = (0..nt).map(|t| (dist(q, t), t)).collect();
            row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let ok = row.len() < 2 || row[1].0 == 0.0 || row[0].0 / row[1].0 <= ratio;
            (row[0].0, q, row[0].1, ok)
        })
        .collect();
    claims.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut taken = vec![false; nt];
    let mut out = Vec::new();
    for (_, q, t, ok) in claims {
        if taken[t] {
            continue;
        }
        taken[t] = true;
        if ok {
            out.push(if face_queries { (q, t) } else { (t, q) });
        }
    }
    out.sort();
    out
}

/// Cosine similarity; `None` when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some(dot / (na * nb).sqrt())
    }
}
