use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{check_identifier, Descriptor, Keypoint, KeypointSet, Modality, DESCRIPTOR_LEN};
use crate::error::{Error, Result};

const MAGIC: &str = "KPT1";
const FIELDS: usize = 4 + DESCRIPTOR_LEN;

pub fn load_keypoints(path: impl AsRef<Path>) -> Result<KeypointSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_keypoints(&text, &path.display().to_string())
}

pub fn save_keypoints(set: &KeypointSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = format_keypoints(set)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses `.kpt` text. `origin` names the source in error messages.
pub fn parse_keypoints(text: &str, origin: &str) -> Result<KeypointSet> {
    let fail = |line: usize, message: String| Error::Format {
        origin: origin.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, header) = lines.next().ok_or_else(|| fail(1, "empty file".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 5 || tokens[0] != MAGIC {
        return Err(fail(
            1,
            format!("expected header `{MAGIC} <modality> <subject_id> <capture_id> <count>`"),
        ));
    }
    let modality: Modality = tokens[1].parse().map_err(|e: String| fail(1, e))?;
    let count: usize = tokens[4]
        .parse()
        .map_err(|_| fail(1, format!("bad point count {:?}", tokens[4])))?;
    if count == 0 {
        return Err(fail(1, "keypoint set must not be empty".into()));
    }

    let mut points = Vec::with_capacity(count);
    let mut last_line = 1;
    for (line_no, line) in lines {
        last_line = line_no;
        if line.trim().is_empty() {
            continue;
        }
        if points.len() == count {
            return Err(fail(line_no, format!("more than the declared {count} records")));
        }
        let values = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| fail(line_no, format!("bad number {t:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != FIELDS {
            return Err(fail(
                line_no,
                format!(
                    "expected {FIELDS} fields (x y scale orientation + {DESCRIPTOR_LEN} descriptor entries), found {}",
                    values.len()
                ),
            ));
        }
        let descriptor = Descriptor::new(&values[4..]).map_err(|e| fail(line_no, inner_message(e)))?;
        let kp = Keypoint::new(values[0], values[1], values[2], values[3], descriptor)
            .map_err(|e| fail(line_no, inner_message(e)))?;
        points.push(kp);
    }
    if points.len() != count {
        return Err(fail(
            last_line,
            format!("header declares {count} records, found {}", points.len()),
        ));
    }
    let set = KeypointSet {
        modality,
        subject_id: tokens[2].to_string(),
        capture_id: tokens[3].to_string(),
        points,
    };
    Ok(set)
}

fn inner_message(e: Error) -> String {
    match e {
        Error::InvalidKeypoint(m) => m,
        other => other.to_string(),
    }
}

/// Renders a set as `.kpt` text. Reals use the shortest representation that
/// parses back to the identical `f64`.
pub fn format_keypoints(set: &KeypointSet) -> Result<String> {
    if set.points.is_empty() {
        return Err(Error::Format {
            origin: set.subject_id.clone(),
            line: 0,
            message: "refusing to write an empty keypoint set".into(),
        });
    }
    check_identifier("subject id", &set.subject_id)?;
    check_identifier("capture id", &set.capture_id)?;
    let mut out = String::with_capacity(set.points.len() * FIELDS * 8);
    let _ = writeln!(
        out,
        "{MAGIC} {} {} {} {}",
        set.modality,
        set.subject_id,
        set.capture_id,
        set.points.len()
    );
    for kp in &set.points {
        let _ = write!(out, "{:?} {:?} {:?} {:?}", kp.x(), kp.y(), kp.scale(), kp.orientation());
        for v in kp.descriptor().as_slice() {
            let _ = write!(out, " {v:?}");
        }
        out.push('\n');
    }
    Ok(out)
}
