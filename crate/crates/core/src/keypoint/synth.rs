use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};

use super::{Descriptor, Keypoint, KeypointSet, Modality, DESCRIPTOR_LEN};
use crate::error::{Error, Result};

/// Parameters of the synthetic subject generator.
///
/// Each subject owns `face_points` latent features grouped into `groups`
/// spatial blobs laid out in jittered columns across the image. Features of a
/// group share a descriptor prototype; a feature's typicality (uniform in
/// [0, 1]) sets both its prototype weight, between 40 % and 100 % of
/// `group_mix`, and how tightly it sits around the blob centre. The face
/// capture observes every latent feature; the palm capture observes the first
/// `palm_points` of them under a per-subject rotation and a cross-modal
/// descriptor distortion. The distortion's per-feature standard deviation is
/// uniform on `cross_modal_noise * (1 +- cross_modal_spread)`, so some
/// features transfer between modalities better than others. Probes are the references with Gaussian descriptor
/// noise (`descriptor_noise`, clamped at zero), Gaussian location jitter
/// (`spatial_jitter`) and a random `drop_rate` fraction of points removed.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthProfile {
    pub face_points: usize,
    pub palm_points: usize,
    pub width: f64,
    pub height: f64,
    pub groups: usize,
    /// Standard deviation of point locations around their group centre, pixels.
    pub group_spread: f64,
    /// Weight of the group prototype in each descriptor, in [0, 1].
    pub group_mix: f64,
    pub cross_modal_noise: f64,
    /// Relative spread of the per-feature cross-modal noise, in [0, 1].
    pub cross_modal_spread: f64,
    /// Maximum absolute palm rotation, degrees.
    pub palm_rotation_deg: f64,
    pub descriptor_noise: f64,
    pub spatial_jitter: f64,
    pub drop_rate: f64,
}

impl Default for SynthProfile {
    fn default() -> Self {
        SynthProfile {
            face_points: 120,
            palm_points: 80,
            width: 256.0,
            height: 256.0,
            groups: 4,
            group_spread: 16.0,
            group_mix: 0.6,
            cross_modal_noise: 0.02,
            cross_modal_spread: 1.0,
            palm_rotation_deg: 35.0,
            descriptor_noise: 0.04,
            spatial_jitter: 1.5,
            drop_rate: 0.2,
        }
    }
}

impl SynthProfile {
    /// Profile with every probe perturbation switched off.
    pub fn noiseless() -> Self {
        SynthProfile {
            descriptor_noise: 0.0,
            spatial_jitter: 0.0,
            drop_rate: 0.0,
            ..SynthProfile::default()
        }
    }

    /// Named profile (`default`, `noiseless`) or `key = value` lines applied
    /// over the default profile.
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "default" => return Ok(SynthProfile::default()),
            "noiseless" => return Ok(SynthProfile::noiseless()),
            _ => {}
        }
        let mut profile = SynthProfile::default();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidProfile(format!("expected key = value, got {line:?}")))?;
            profile.set(key.trim(), value.trim())?;
        }
        profile.validate()?;
        Ok(profile)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidProfile(format!("{key}: cannot parse {value:?}")))
        }
        match key {
            "face_points" => self.face_points = num(key, value)?,
            "palm_points" => self.palm_points = num(key, value)?,
            "width" => self.width = num(key, value)?,
            "height" => self.height = num(key, value)?,
            "groups" => self.groups = num(key, value)?,
            "group_spread" => self.group_spread = num(key, value)?,
            "group_mix" => self.group_mix = num(key, value)?,
            "cross_modal_noise" => self.cross_modal_noise = num(key, value)?,
            "cross_modal_spread" => self.cross_modal_spread = num(key, value)?,
            "palm_rotation_deg" => self.palm_rotation_deg = num(key, value)?,
            "descriptor_noise" => self.descriptor_noise = num(key, value)?,
            "spatial_jitter" => self.spatial_jitter = num(key, value)?,
            "drop_rate" => self.drop_rate = num(key, value)?,
            other => return Err(Error::InvalidProfile(format!("unknown profile key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidProfile(m));
        if self.face_points == 0 || self.palm_points == 0 {
            return bad("point counts must be positive".into());
        }
        if self.face_points < self.palm_points {
            return bad(format!(
                "face count {} must be at least the palm count {}",
                self.face_points, self.palm_points
            ));
        }
        if self.groups == 0 {
            return bad("groups must be positive".into());
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return bad("spatial extent must be positive".into());
        }
        for (name, v) in [
            ("group_spread", self.group_spread),
            ("cross_modal_noise", self.cross_modal_noise),
            ("cross_modal_spread", self.cross_modal_spread),
            ("palm_rotation_deg", self.palm_rotation_deg),
            ("descriptor_noise", self.descriptor_noise),
            ("spatial_jitter", self.spatial_jitter),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.cross_modal_spread) {
            return bad(format!("cross_modal_spread must lie in [0, 1], got {}", self.cross_modal_spread));
        }
        if !(0.0..=1.0).contains(&self.group_mix) {
            return bad(format!("group_mix must lie in [0, 1], got {}", self.group_mix));
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return bad(format!("drop_rate must lie in [0, 1), got {}", self.drop_rate));
        }
        Ok(())
    }
}

/// Reference and probe captures of both modalities for one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectCaptures {
    pub face_ref: KeypointSet,
    pub palm_ref: KeypointSet,
    pub face_probe: KeypointSet,
    pub palm_probe: KeypointSet,
}

impl SubjectCaptures {
    pub fn rename(&mut self, subject_id: &str) {
        for set in [&mut self.face_ref, &mut self.palm_ref, &mut self.face_probe, &mut self.palm_probe] {
            set.subject_id = subject_id.to_string();
        }
    }
}

/// Deterministic synthetic subject: the output depends only on `(seed, profile)`.
pub fn generate_synthetic_subject(seed: u64, profile: &SynthProfile) -> Result<SubjectCaptures> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subject_id = format!("synth{seed}");

    let prototypes: Vec<Vec<f64>> = (0..profile.groups).map(|_| sparse_histogram(&mut rng)).collect();
    let margin = 0.1;
    let column = (1.0 - 2.0 * margin) * profile.width / profile.groups as f64;
    let centres: Vec<(f64, f64)> = (0..profile.groups)
        .map(|g| {
            let jitter = rng.random_range(-0.15..0.15);
            (
                margin * profile.width + (g as f64 + 0.5 + jitter) * column,
                rng.random_range(margin * profile.height..(1.0 - margin) * profile.height),
            )
        })
        .collect();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut face = Vec::with_capacity(profile.face_points);
    let mut transfer = Vec::with_capacity(profile.face_points);
    for i in 0..profile.face_points {
        let g = i % profile.groups;
        let typicality: f64 = rng.random();
        let mix = profile.group_mix * (0.4 + 0.6 * typicality);
        let own = sparse_histogram(&mut rng);
        let desc: Vec<f64> = prototypes[g]
            .iter()
            .zip(&own)
            .map(|(p, o)| mix * p + (1.0 - mix) * o)
            .collect();
        let (cx, cy) = centres[g];
        let spread = profile.group_spread * (1.25 - typicality);
        let x = (cx + spread * unit.sample(&mut rng)).clamp(0.0, profile.width);
        let y = (cy + spread * unit.sample(&mut rng)).clamp(0.0, profile.height);
        let scale = rng.random_range(1.0..4.0);
        let orientation = rng.random_range(0.0..TAU);
        face.push(Keypoint::new(x, y, scale, orientation, Descriptor::new(&normalized(desc))?)?);
        let u: f64 = rng.random();
        transfer.push(profile.cross_modal_noise * (1.0 + profile.cross_modal_spread * (2.0 * u - 1.0)));
    }

    let rot = profile.palm_rotation_deg.to_radians();
    let theta = if rot > 0.0 { rng.random_range(-rot..=rot) } else { 0.0 };
    let (sin, cos) = theta.sin_cos();
    let (ox, oy) = (profile.width / 2.0, profile.height / 2.0);
    let mut palm = Vec::with_capacity(profile.palm_points);
    for (kp, &sd) in face.iter().zip(&transfer).take(profile.palm_points) {
        let (dx, dy) = (kp.x() - ox, kp.y() - oy);
        let x = (ox + cos * dx - sin * dy).clamp(0.0, profile.width);
        let y = (oy + sin * dx + cos * dy).clamp(0.0, profile.height);
        let desc: Vec<f64> = kp
            .descriptor()
            .as_slice()
            .iter()
            .map(|&v| (v + sd * unit.sample(&mut rng)).max(0.0))
            .collect();
        let orientation = (kp.orientation() + theta).rem_euclid(TAU);
        let orientation = if orientation < TAU { orientation } else { 0.0 };
        palm.push(Keypoint::new(x, y, kp.scale(), orientation, Descriptor::new(&desc)?)?);
    }

    let face_ref = KeypointSet::new(Modality::Face, subject_id.clone(), "ref", face)?;
    let palm_ref = KeypointSet::new(Modality::Palm, subject_id.clone(), "ref", palm)?;
    let face_probe = perturb(&face_ref, profile, &mut rng)?;
    let palm_probe = perturb(&palm_ref, profile, &mut rng)?;
    Ok(SubjectCaptures {
        face_ref,
        palm_ref,
        face_probe,
        palm_probe,
    })
}

/// Non-negative histogram with roughly 40 % populated bins.
fn sparse_histogram(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..DESCRIPTOR_LEN)
        .map(|_| {
            let on = rng.random_bool(0.4);
            let mag: f64 = Exp1.sample(rng);
            if on {
                mag
            } else {
                0.0
            }
        })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[0] = 1.0;
    }
    normalized(v)
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn perturb(reference: &KeypointSet, profile: &SynthProfile, rng: &mut ChaCha8Rng) -> Result<KeypointSet> {
    let noise = |s: f64| Normal::new(0.0, s).map_err(|e| Error::InvalidProfile(e.to_string()));
    let desc_noise = noise(profile.descriptor_noise)?;
    let jitter = noise(profile.spatial_jitter)?;
    let mut points = Vec::with_capacity(reference.len());
    for kp in &reference.points {
        // Every point consumes the same draws so the drop rate does not shift
        // the noise seen by the survivors.
        let drop = rng.random::<f64>() < profile.drop_rate;
        let dx = jitter.sample(rng);
        let dy = jitter.sample(rng);
        let desc: Vec<f64> = kp
            .descriptor()
            .as_slice()
            .iter()
            .map(|&v| {
                let n = desc_noise.sample(rng);
                if profile.descriptor_noise == 0.0 {
                    v
                } else {
                    (v + n).max(0.0)
                }
            })
            .collect();
        if drop {
            continue;
        }
        let (x, y) = if profile.spatial_jitter == 0.0 {
            (kp.x(), kp.y())
        } else {
            ((kp.x() + dx).max(0.0), (kp.y() + dy).max(0.0))
        };
        points.push(Keypoint::new(x, y, kp.scale(), kp.orientation(), Descriptor::new(&desc)?)?);
    }
    if points.is_empty() {
        points.push(reference.points[0].clone());
    }
    KeypointSet::new(reference.modality, reference.subject_id.clone(), "probe", points)
}
