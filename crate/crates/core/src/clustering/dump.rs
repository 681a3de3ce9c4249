use std::fmt::Write as _;

use super::{Clustering, Silhouette};
use crate::error::{Error, Result};

/// One record of a `.clu` file.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDumpEntry {
    pub index: usize,
    pub cluster: usize,
    pub silhouette: Option<f64>,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDump {
    pub k: usize,
    pub entries: Vec<ClusterDumpEntry>,
}

/// `CLU1 k n` header, then `index cluster_id silhouette excluded_flag` per
/// point. Unscored points carry `NA`.
pub fn format_cluster_dump(clustering: &Clustering) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "CLU1 {} {}", clustering.k, clustering.len());
    for i in 0..clustering.len() {
        let s = match clustering.silhouettes[i] {
            Silhouette::Unscored => "NA".to_string(),
            other => format!("{:?}", other.value().unwrap_or(0.0)),
        };
        let _ = writeln!(out, "{i} {} {s} {}", clustering.assignments[i], u8::from(clustering.excluded[i]));
    }
    out
}

pub fn parse_cluster_dump(text: &str, origin: &str) -> Result<ClusterDump> {
    let fail = |line: usize, message: &str| Error::Format {
        origin: origin.to_string(),
        line,
        message: message.to_string(),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| fail(1, "empty file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 || h[0] != "CLU1" {
        return Err(fail(1, "expected header `CLU1 k n`"));
    }
    let k: usize = h[1].parse().map_err(|_| fail(1, "bad k"))?;
    let n: usize = h[2].parse().map_err(|_| fail(1, "bad n"))?;
    let mut entries = Vec::with_capacity(n);
    for (line_no, line) in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 4 {
            return Err(fail(line_no, "expected `index cluster_id silhouette excluded_flag`"));
        }
        let index = t[0].parse().map_err(|_| fail(line_no, "bad index"))?;
        let cluster: usize = t[1].parse().map_err(|_| fail(line_no, "bad cluster id"))?;
        if cluster >= k {
            return Err(fail(line_no, "cluster id out of range"));
        }
        let silhouette = match t[2] {
            "NA" => None,
            s => Some(s.parse().map_err(|_| fail(line_no, "bad silhouette"))?),
        };
        let excluded = match t[3] {
            "0" => false,
            "1" => true,
            _ => return Err(fail(line_no, "excluded flag must be 0 or 1")),
        };
        entries.push(ClusterDumpEntry {
            index,
            cluster,
            silhouette,
            excluded,
        });
    }
    if entries.len() != n {
        return Err(fail(0, "record count does not match header"));
    }
    Ok(ClusterDump { k, entries })
}
