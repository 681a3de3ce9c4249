//! End-to-end template construction and the global configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::clustering::{
    canonical_order, pam_on_matrix, refine_clusters, silhouette_on_matrix, ClusterConfig, Clustering, DistanceMatrix,
    DistanceMetric, FeatureSpace,
};
use crate::correspondence::DEFAULT_RATIO_THRESHOLD;
use crate::error::{Error, Result, Stage};
use crate::exec::Execution;
use crate::fusion::{concatenate, fuse_cluster, FusedTemplate};
use crate::graph::{assign_cluster_pairs_with, ClusterPairing, PairingConfig, RelaxationConfig};
use crate::keypoint::{KeypointSet, Modality, DESCRIPTOR_LEN};
use crate::matching::MatchMetric;

/// Fewest points per cluster the pipeline asks of each input set.
const MIN_POINTS_PER_CLUSTER: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Shared by both modalities.
    pub cluster: ClusterConfig,
    /// Points per cluster after equalization.
    pub p: usize,
    pub relaxation: RelaxationConfig,
    pub ratio_threshold: f64,
    pub padding_penalty: f64,
    pub match_metric: MatchMetric,
    pub knn_k: usize,
    pub execution: Execution,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let pairing = PairingConfig::default();
        PipelineConfig {
            cluster: ClusterConfig::default(),
            p: 8,
            relaxation: RelaxationConfig::default(),
            ratio_threshold: DEFAULT_RATIO_THRESHOLD,
            padding_penalty: pairing.padding_penalty,
            match_metric: MatchMetric::NormalizedCorrelation,
            knn_k: 1,
            execution: Execution::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value:?}")))
}

fn parse_metric(value: &str) -> Result<DistanceMetric> {
    match value.split_once(':') {
        None if value == "euclidean" => Ok(DistanceMetric::Euclidean),
        Some(("minkowski", p)) => Ok(DistanceMetric::Minkowski(parse_num("distance", p)?)),
        _ => Err(Error::InvalidConfig(format!(
            "distance: expected euclidean or minkowski:<p>, got {value:?}"
        ))),
    }
}

fn format_metric(m: DistanceMetric) -> String {
    match m {
        DistanceMetric::Euclidean => "euclidean".into(),
        DistanceMetric::Minkowski(p) => format!("minkowski:{p:?}"),
    }
}

fn parse_feature_space(value: &str) -> Result<FeatureSpace> {
    match value.split_once(':') {
        None if value == "descriptor" => Ok(FeatureSpace::Descriptor),
        None if value == "spatial" => Ok(FeatureSpace::Spatial),
        Some(("descriptor+spatial", w)) => Ok(FeatureSpace::DescriptorPlusSpatial(parse_num("features", w)?)),
        _ => Err(Error::InvalidConfig(format!(
            "features: expected descriptor, spatial or descriptor+spatial:<w>, got {value:?}"
        ))),
    }
}

fn format_feature_space(f: FeatureSpace) -> String {
    match f {
        FeatureSpace::Descriptor => "descriptor".into(),
        FeatureSpace::Spatial => "spatial".into(),
        FeatureSpace::DescriptorPlusSpatial(w) => format!("descriptor+spatial:{w:?}"),
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.cluster.validate()?;
        self.relaxation.validate()?;
        if self.p < 3 {
            return Err(Error::InvalidConfig(format!("p must be at least 3, got {}", self.p)));
        }
        if !(self.ratio_threshold > 0.0 && self.ratio_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "ratio_threshold must lie in (0, 1], got {}",
                self.ratio_threshold
            )));
        }
        if !(self.padding_penalty.is_finite() && self.padding_penalty >= 0.0) {
            return Err(Error::InvalidConfig("padding_penalty must be finite and non-negative".into()));
        }
        if self.knn_k == 0 {
            return Err(Error::InvalidConfig("knn_k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn pairing(&self) -> PairingConfig {
        PairingConfig {
            ratio_threshold: self.ratio_threshold,
            points_per_cluster: self.p,
            relaxation: self.relaxation.clone(),
            padding_penalty: self.padding_penalty,
        }
    }

    /// Length of every template built under this configuration.
    pub fn template_len(&self) -> usize {
        self.cluster.k * self.p * DESCRIPTOR_LEN
    }

    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "k" => self.cluster.k = parse_num(key, value)?,
            "distance" => self.cluster.metric = parse_metric(value)?,
            "features" => self.cluster.feature_space = parse_feature_space(value)?,
            "max_iterations" => self.cluster.max_iterations = parse_num(key, value)?,
            "seed" => self.cluster.seed = parse_num(key, value)?,
            "silhouette_threshold" => self.cluster.silhouette_threshold = parse_num(key, value)?,
            "p" => self.p = parse_num(key, value)?,
            "ratio_threshold" => self.ratio_threshold = parse_num(key, value)?,
            "padding_penalty" => self.padding_penalty = parse_num(key, value)?,
            "sigma_edge" => self.relaxation.sigma_edge = parse_num(key, value)?,
            "lambda_desc" => self.relaxation.lambda_desc = parse_num(key, value)?,
            "relaxation_iterations" => self.relaxation.max_iters = parse_num(key, value)?,
            "epsilon" => self.relaxation.epsilon = parse_num(key, value)?,
            "relaxation_seed" => self.relaxation.seed = parse_num(key, value)?,
            "metric" => self.match_metric = value.parse().map_err(Error::InvalidConfig)?,
            "knn_k" => self.knn_k = parse_num(key, value)?,
            "execution" => {
                self.execution = match value {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    _ => return Err(Error::InvalidConfig(format!("execution: expected parallel or sequential, got {value:?}"))),
                }
            }
            other => return Err(Error::InvalidConfig(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let format_err = |message: String| Error::Format {
                origin: origin.to_string(),
                line: n + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format_err(format!("expected key = value, got {line:?}")))?;
            self.set(key.trim(), value).map_err(|e| format_err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(text, origin)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Every key with its current value, in file order.
    pub fn snapshot(&self) -> Vec<(String, String)> {
        let execution = match self.execution {
            Execution::Parallel => "parallel",
            Execution::Sequential => "sequential",
        };
        [
            ("k", self.cluster.k.to_string()),
            ("distance", format_metric(self.cluster.metric)),
            ("features", format_feature_space(self.cluster.feature_space)),
            ("max_iterations", self.cluster.max_iterations.to_string()),
            ("seed", self.cluster.seed.to_string()),
            ("silhouette_threshold", format!("{:?}", self.cluster.silhouette_threshold)),
            ("p", self.p.to_string()),
            ("ratio_threshold", format!("{:?}", self.ratio_threshold)),
            ("padding_penalty", format!("{:?}", self.padding_penalty)),
            ("sigma_edge", format!("{:?}", self.relaxation.sigma_edge)),
            ("lambda_desc", format!("{:?}", self.relaxation.lambda_desc)),
            ("relaxation_iterations", self.relaxation.max_iters.to_string()),
            ("epsilon", format!("{:?}", self.relaxation.epsilon)),
            ("relaxation_seed", self.relaxation.seed.to_string()),
            ("metric", self.match_metric.to_string()),
            ("knn_k", self.knn_k.to_string()),
            ("execution", execution.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.snapshot() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// A fused template with the intermediate results that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateBuild {
    pub template: FusedTemplate,
    pub face: Clustering,
    pub palm: Clustering,
    /// In template order.
    pub pairings: Vec<ClusterPairing>,
    /// Padding sentinels across all pairings.
    pub padded: usize,
}

/// Clusters, scores and refines one modality.
pub fn cluster_modality(set: &KeypointSet, config: &PipelineConfig) -> Result<(Clustering, DistanceMatrix)> {
    let modality = Some(set.modality);
    let staged = |stage| move |e: Error| e.at_stage(stage, modality, None);
    config.cluster.validate().map_err(staged(Stage::Clustering))?;
    let needed = config.cluster.k * MIN_POINTS_PER_CLUSTER;
    if set.len() < needed {
        return Err(Error::TooFewPoints { n: set.len(), needed }).map_err(staged(Stage::Clustering));
    }
    let exec = config.execution;
    let dist = DistanceMatrix::for_keypoints(set, &config.cluster, exec);
    let mut cl = pam_on_matrix(&dist, config.cluster.k, config.cluster.max_iterations, config.cluster.seed, exec)
        .map_err(staged(Stage::Clustering))?;
    cl.silhouettes = silhouette_on_matrix(&dist, &cl).map_err(staged(Stage::Silhouette))?;
    let refined = refine_clusters(set, &cl, &config.cluster).map_err(staged(Stage::Refinement))?;
    Ok((refined, dist))
}

/// Cluster ids ordered by medoid position: x, then y, then id.
fn medoid_order(set: &KeypointSet, cl: &Clustering) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cl.k).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&set.points[cl.medoids[a]], &set.points[cl.medoids[b]]);
        pa.x().total_cmp(&pb.x()).then(pa.y().total_cmp(&pb.y())).then(a.cmp(&b))
    });
    order
}

/// Builds the fused template of one subject.
pub fn build_template(face: &KeypointSet, palm: &KeypointSet, config: &PipelineConfig) -> Result<FusedTemplate> {
    build_template_detailed(face, palm, config).map(|b| b.template)
}

/// [`build_template`] keeping the clusterings and pairings.
pub fn build_template_detailed(face: &KeypointSet, palm: &KeypointSet, config: &PipelineConfig) -> Result<TemplateBuild> {
    config.validate()?;
    if face.modality != Modality::Face || palm.modality != Modality::Palm {
        return Err(Error::InvalidConfig(format!(
            "expected a face set and a palm set, got {} and {}",
            face.modality, palm.modality
        )));
    }
    let (face_cl, palm_cl) = config
        .execution
        .join(|| cluster_modality(face, config), || cluster_modality(palm, config));
    let (face_cl, palm_cl) = (face_cl?.0, palm_cl?.0);

    let mut pairings = assign_cluster_pairs_with((face, &face_cl), (palm, &palm_cl), &config.pairing(), config.execution)?;
    let order = medoid_order(face, &face_cl);
    let mut rank = vec![0; face_cl.k];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    let fused = pairings.iter().map(|p| fuse_cluster(p, rank[p.face_cluster])).collect();
    let template = concatenate(&face.subject_id, fused).map_err(|e| e.at_stage(Stage::Fusion, None, None))?;
    pairings.sort_by_key(|p| rank[p.face_cluster]);
    let padded = pairings.iter().map(|p| p.correspondences.padded_count()).sum();
    Ok(TemplateBuild {
        template,
        face: face_cl,
        palm: palm_cl,
        pairings,
        padded,
    })
}

/// Single-modality template: per cluster, the `p` retained points closest to
/// the medoid (zero-padded when fewer remain), clusters ordered by medoid
/// position.
pub fn build_unimodal_template(set: &KeypointSet, config: &PipelineConfig) -> Result<FusedTemplate> {
    config.validate()?;
    let (cl, dist) = cluster_modality(set, config)?;
    let mut values = Vec::with_capacity(config.template_len());
    for c in medoid_order(set, &cl) {
        let chosen: Vec<usize> = canonical_order(&dist, &cl, c)
            .into_iter()
            .filter(|&i| !cl.excluded[i])
            .take(config.p)
            .collect();
        for &i in &chosen {
            values.extend_from_slice(set.points[i].descriptor().as_slice());
        }
        values.resize(values.len() + (config.p - chosen.len()) * DESCRIPTOR_LEN, 0.0);
    }
    Ok(FusedTemplate {
        subject_id: set.subject_id.clone(),
        k: cl.k,
        p: config.p,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.cluster.k = 3;
        cfg.cluster.metric = DistanceMetric::Minkowski(3.0);
        cfg.cluster.feature_space = FeatureSpace::DescriptorPlusSpatial(0.25);
        cfg.p = 16;
        cfg.match_metric = MatchMetric::KnnEuclidean;
        cfg.execution = Execution::Sequential;
        assert_eq!(PipelineConfig::parse(&cfg.to_text(), "t").unwrap(), cfg);
    }

    #[test]
    fn config_comments_and_defaults() {
        let cfg = PipelineConfig::parse("# comment\n\np = 5  # trailing\n", "t").unwrap();
        assert_eq!(cfg.p, 5);
        assert_eq!(cfg.cluster.k, 4);
    }

    #[test]
    fn config_errors_name_the_line() {
        match PipelineConfig::parse("k = 2\nbogus = 1\n", "cfg.txt") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(PipelineConfig::parse("k 2\n", "t").is_err());
        assert!(PipelineConfig::parse("p = 2\n", "t").is_err());
        assert!(PipelineConfig::parse("k = two\n", "t").is_err());
    }
}
