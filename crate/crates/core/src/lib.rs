//! Feature-level fusion of face and palmprint keypoint sets.
//!
//! Keypoints of each modality are partitioned with PAM k-medoids, clusters are
//! refined with a pairwise silhouette measure, face and palm clusters are paired
//! by mapping complete graphs onto each other with probabilistic relaxation,
//! and the mapped descriptors are summed and concatenated into one fixed-length
//! template. Templates are verified with K-NN Euclidean distance or normalized
//! correlation, and [`evaluation`] computes FAR/FRR/ROC over trial sets.
//!
//! The hot loops (PAM swap evaluation, the cluster-pair cost matrix, trial
//! scoring) run on rayon when the `parallel` feature is enabled. Every parallel
//! path produces results bit-identical to the sequential one; see [`Execution`].

pub mod cli;
pub mod clustering;
pub mod correspondence;
mod error;
mod exec;
pub mod evaluation;
pub mod fusion;
pub mod graph;
pub mod keypoint;
pub mod matching;
pub mod pipeline;

pub use error::{Error, Result, Stage};
pub use exec::Execution;

pub use clustering::{pam_cluster, refine_clusters, silhouette_scores, ClusterConfig, Clustering};
pub use fusion::FusedTemplate;
pub use keypoint::{Descriptor, Keypoint, KeypointSet, Modality, DESCRIPTOR_LEN};
pub use pipeline::{build_template, build_unimodal_template, PipelineConfig};
