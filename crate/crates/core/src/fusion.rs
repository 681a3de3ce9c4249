//! Sum-rule fusion of mapped descriptor pairs and concatenation into a
//! fixed-length template, plus the `.ftv` template format.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::ClusterPairing;
use crate::keypoint::{check_identifier, Descriptor, DESCRIPTOR_LEN};

/// `p` fused descriptors of one cluster pairing, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedCluster {
    pub values: Vec<f64>,
    /// Position of this cluster in the concatenated template.
    pub cluster_rank: usize,
}

impl FusedCluster {
    pub fn points(&self) -> usize {
        self.values.len() / DESCRIPTOR_LEN
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedTemplate {
    pub subject_id: String,
    pub k: usize,
    pub p: usize,
    pub values: Vec<f64>,
}

impl FusedTemplate {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Elementwise sums `face[j] + palm[mapping[j]]`, concatenated in face order.
pub fn fuse_descriptors(face: &[&Descriptor], palm: &[&Descriptor], mapping: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(face.len() * DESCRIPTOR_LEN);
    for (j, f) in face.iter().enumerate() {
        let p = palm[mapping[j]];
        out.extend(f.as_slice().iter().zip(p.as_slice()).map(|(a, b)| a + b));
    }
    out
}

/// Fuses one pairing; padding sentinels contribute zeros.
pub fn fuse_cluster(pairing: &ClusterPairing, cluster_rank: usize) -> FusedCluster {
    let face: Vec<&Descriptor> = pairing.face_graph.vertices().iter().map(|v| &v.descriptor).collect();
    let palm: Vec<&Descriptor> = pairing.palm_graph.vertices().iter().map(|v| &v.descriptor).collect();
    FusedCluster {
        values: fuse_descriptors(&face, &palm, &pairing.mapping.mapping),
        cluster_rank,
    }
}

/// Joins fused clusters in ascending rank.
pub fn concatenate(subject_id: &str, mut fused: Vec<FusedCluster>) -> Result<FusedTemplate> {
    let first = fused.first().ok_or(Error::RaggedClusters { expected: 1, found: 0 })?;
    let p = first.points();
    if let Some(bad) = fused
        .iter()
        .find(|c| c.points() != p || c.values.len() % DESCRIPTOR_LEN != 0)
    {
        return Err(Error::RaggedClusters {
            expected: p,
            found: bad.points(),
        });
    }
    fused.sort_by_key(|c| c.cluster_rank);
    let k = fused.len();
    Ok(FusedTemplate {
        subject_id: subject_id.to_string(),
        k,
        p,
        values: fused.into_iter().flat_map(|c| c.values).collect(),
    })
}

/// `FTV1 <subject_id> <k> <p>` header, then `k * p` lines of 128 reals.
pub fn format_template(t: &FusedTemplate) -> Result<String> {
    check_identifier("subject id", &t.subject_id)?;
    if t.values.len() != t.k * t.p * DESCRIPTOR_LEN {
        return Err(Error::DimensionMismatch {
            left: t.values.len(),
            right: t.k * t.p * DESCRIPTOR_LEN,
        });
    }
    let mut out = String::with_capacity(t.values.len() * 12);
    let _ = writeln!(out, "FTV1 {} {} {}", t.subject_id, t.k, t.p);
    for row in t.values.chunks(DESCRIPTOR_LEN) {
        let line = row.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ");
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_template(text: &str, origin: &str) -> Result<FusedTemplate> {
    let fail = |line: usize, message: String| Error::Format {
        origin: origin.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| fail(1, "empty file".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 || h[0] != "FTV1" {
        return Err(fail(1, "expected header `FTV1 <subject_id> <k> <p>`".into()));
    }
    let k: usize = h[2].parse().map_err(|_| fail(1, format!("bad k {:?}", h[2])))?;
    let p: usize = h[3].parse().map_err(|_| fail(1, format!("bad p {:?}", h[3])))?;
    let mut values = Vec::with_capacity(k * p * DESCRIPTOR_LEN);
    for (line_no, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| fail(line_no, format!("bad number {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != DESCRIPTOR_LEN {
            return Err(fail(line_no, format!("expected {DESCRIPTOR_LEN} values, found {}", row.len())));
        }
        values.extend(row);
    }
    if values.len() != k * p * DESCRIPTOR_LEN {
        return Err(fail(
            0,
            format!("expected {} values for k = {k}, p = {p}, found {}", k * p * DESCRIPTOR_LEN, values.len()),
        ));
    }
    Ok(FusedTemplate {
        subject_id: h[1].to_string(),
        k,
        p,
        values,
    })
}

pub fn save_template(t: &FusedTemplate, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_template(t)?).map_err(|e| Error::io(path, e))
}

pub fn load_template(path: impl AsRef<Path>) -> Result<FusedTemplate> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_template(&text, &path.display().to_string())
}

/// Directory of enrolled templates, one `<subject_id>.ftv` per subject.
#[derive(Debug, Clone)]
pub struct TemplateStore {
    dir: PathBuf,
}

impl TemplateStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        TemplateStore { dir: dir.into() }
    }

    pub fn path_for(&self, subject_id: &str) -> PathBuf {
        self.dir.join(format!("{subject_id}.ftv"))
    }

    pub fn contains(&self, subject_id: &str) -> bool {
        self.path_for(subject_id).is_file()
    }

    /// Writes the template, replacing any previous one. Returns true when a
    /// file was replaced.
    pub fn save(&self, t: &FusedTemplate) -> Result<bool> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path_for(&t.subject_id);
        let existed = path.exists();
        save_template(t, &path)?;
        Ok(existed)
    }

    pub fn load(&self, subject_id: &str) -> Result<FusedTemplate> {
        if !self.contains(subject_id) {
            return Err(Error::UnknownSubject(subject_id.to_string()));
        }
        load_template(self.path_for(subject_id))
    }
}
