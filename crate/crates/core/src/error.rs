use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::keypoint::Modality;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage named in [`Error::Stage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Clustering,
    Silhouette,
    Refinement,
    Correspondence,
    GraphMapping,
    Fusion,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Clustering => "clustering",
            Stage::Silhouette => "silhouette",
            Stage::Refinement => "refinement",
            Stage::Correspondence => "correspondence",
            Stage::GraphMapping => "graph mapping",
            Stage::Fusion => "fusion",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}:{line}: {message}")]
    Format {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("invalid keypoint: {0}")]
    InvalidKeypoint(String),
    #[error("invalid synthetic profile: {0}")]
    InvalidProfile(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("too few points: {n} points, need at least {needed}")]
    TooFewPoints { n: usize, needed: usize },
    #[error("cluster {cluster} has no retained points")]
    EmptyCluster { cluster: usize },
    #[error("graph needs at least 3 vertices, got {n}")]
    TooFewVertices { n: usize },
    #[error("graph order mismatch: face graph has {face} vertices, palm graph has {palm}")]
    SizeMismatch { face: usize, palm: usize },
    #[error("cluster count mismatch: {face} face clusters, {palm} palm clusters")]
    ClusterCountMismatch { face: usize, palm: usize },
    #[error("fused clusters have unequal point counts ({expected} vs {found})")]
    RaggedClusters { expected: usize, found: usize },
    #[error("template length mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("K = {k} is outside 1..={gallery}")]
    BadK { k: usize, gallery: usize },
    #[error("trial set needs at least one genuine and one impostor trial")]
    EmptyTrials,
    #[error("reports are not comparable: {0}")]
    MismatchedGrids(String),
    #[error("subject {0:?} is not enrolled")]
    UnknownSubject(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("{stage} stage failed{}: {source}", describe_site(*modality, *cluster))]
    Stage {
        stage: Stage,
        modality: Option<Modality>,
        cluster: Option<usize>,
        #[source]
        source: Box<Error>,
    },
}

fn describe_site(modality: Option<Modality>, cluster: Option<usize>) -> String {
    match (modality, cluster) {
        (Some(m), Some(c)) => format!(" ({m}, cluster {c})"),
        (Some(m), None) => format!(" ({m})"),
        (None, Some(c)) => format!(" (cluster {c})"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_stage(self, stage: Stage, modality: Option<Modality>, cluster: Option<usize>) -> Self {
        Error::Stage {
            stage,
            modality,
            cluster,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage attribution.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for malformed input files and configuration, as opposed to domain
    /// failures on well-formed input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self.root(),
            Error::Io { .. } | Error::Format { .. } | Error::InvalidConfig(_) | Error::InvalidKeypoint(_)
                | Error::InvalidProfile(_)
        )
    }
}
