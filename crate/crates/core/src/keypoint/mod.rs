//! Keypoint data model, the `.kpt` text format and the synthetic subject
//! generator.

mod io;
mod synth;

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use io::{format_keypoints, load_keypoints, parse_keypoints, save_keypoints};
pub use synth::{generate_synthetic_subject, SynthProfile, SubjectCaptures};

/// Number of entries in a SIFT descriptor.
pub const DESCRIPTOR_LEN: usize = 128;

/// A 128-entry non-negative gradient histogram.
#[derive(Clone, PartialEq)]
pub struct Descriptor(Box<[f64; DESCRIPTOR_LEN]>);

impl Descriptor {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.len() != DESCRIPTOR_LEN {
            return Err(Error::InvalidKeypoint(format!(
                "descriptor has {} entries, expected {DESCRIPTOR_LEN}",
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidKeypoint(format!(
                "descriptor entry {i} is {v}, entries must be finite and non-negative"
            )));
        }
        let mut arr = Box::new([0.0; DESCRIPTOR_LEN]);
        arr.copy_from_slice(values);
        Ok(Descriptor(arr))
    }

    pub fn zeros() -> Self {
        Descriptor(Box::new([0.0; DESCRIPTOR_LEN]))
    }

    /// Descriptor with a single non-zero entry, handy for building fixtures.
    pub fn unit(index: usize, value: f64) -> Result<Self> {
        let mut v = [0.0; DESCRIPTOR_LEN];
        if index >= DESCRIPTOR_LEN {
            return Err(Error::InvalidKeypoint(format!("descriptor index {index} out of range")));
        }
        v[index] = value;
        Descriptor::new(&v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0[..]
    }

    /// Euclidean distance between two descriptors.
    pub fn distance(&self, other: &Descriptor) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

impl fmt::Debug for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nz = self.0.iter().filter(|v| **v != 0.0).count();
        write!(f, "Descriptor({:?}.., {nz} non-zero)", &self.0[..4])
    }
}

/// One invariant feature point.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    x: f64,
    y: f64,
    scale: f64,
    orientation: f64,
    descriptor: Descriptor,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, scale: f64, orientation: f64, descriptor: Descriptor) -> Result<Self> {
        if !(x.is_finite() && x >= 0.0 && y.is_finite() && y >= 0.0) {
            return Err(Error::InvalidKeypoint(format!("location ({x}, {y}) must be finite and non-negative")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidKeypoint(format!("scale {scale} must be positive")));
        }
        if !(orientation >= 0.0 && orientation < TAU) {
            return Err(Error::InvalidKeypoint(format!("orientation {orientation} outside [0, 2pi)")));
        }
        Ok(Keypoint {
            x,
            y,
            scale,
            orientation,
            descriptor,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    pub fn spatial_distance(&self, other: &Keypoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Face,
    Palm,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Face => "face",
            Modality::Palm => "palm",
        })
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "face" => Ok(Modality::Face),
            "palm" => Ok(Modality::Palm),
            other => Err(format!("unknown modality {other:?}")),
        }
    }
}

/// All keypoints of one capture of one modality, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    pub modality: Modality,
    pub subject_id: String,
    pub capture_id: String,
    pub points: Vec<Keypoint>,
}

impl KeypointSet {
    pub fn new(
        modality: Modality,
        subject_id: impl Into<String>,
        capture_id: impl Into<String>,
        points: Vec<Keypoint>,
    ) -> Result<Self> {
        let set = KeypointSet {
            modality,
            subject_id: subject_id.into(),
            capture_id: capture_id.into(),
            points,
        };
        check_identifier("subject id", &set.subject_id)?;
        check_identifier("capture id", &set.capture_id)?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Identifiers travel in whitespace-delimited headers and file names.
pub(crate) fn check_identifier(what: &str, id: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(|c| c.is_whitespace() || c == '/' || c == '\\') {
        return Err(Error::InvalidKeypoint(format!(
            "{what} {id:?} must be non-empty and contain no whitespace or path separators"
        )));
    }
    Ok(())
}
