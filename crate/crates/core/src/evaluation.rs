//! Genuine/impostor verification trials, threshold sweeps and ROC reports.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fusion::FusedTemplate;
use crate::keypoint::SubjectCaptures;
use crate::matching::{verify, MatchMetric};
use crate::pipeline::{build_template, build_unimodal_template, PipelineConfig};

/// Grid size used when no thresholds are supplied.
pub const DEFAULT_GRID: usize = 200;

/// Probe templates paired with a claimed identity, plus the enrolled gallery.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub gallery: Vec<FusedTemplate>,
    pub genuine: Vec<(FusedTemplate, String)>,
    pub impostor: Vec<(FusedTemplate, String)>,
}

impl TrialSet {
    /// One genuine trial per probe against its own subject and one impostor
    /// trial per probe against every other enrolled subject.
    pub fn all_pairs(gallery: Vec<FusedTemplate>, probes: &[FusedTemplate]) -> Result<Self> {
        let mut genuine = Vec::with_capacity(probes.len());
        let mut impostor = Vec::new();
        for probe in probes {
            for g in &gallery {
                let entry = (probe.clone(), g.subject_id.clone());
                if g.subject_id == probe.subject_id {
                    genuine.push(entry);
                } else {
                    impostor.push(entry);
                }
            }
        }
        let set = TrialSet {
            gallery,
            genuine,
            impostor,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.genuine.is_empty() || self.impostor.is_empty() {
            return Err(Error::EmptyTrials);
        }
        let enrolled = |id: &str| self.gallery.iter().any(|g| g.subject_id == id);
        for (probe, claim) in &self.genuine {
            if probe.subject_id != *claim {
                return Err(Error::Dataset(format!(
                    "genuine trial for {} claims {claim}",
                    probe.subject_id
                )));
            }
            if !enrolled(claim) {
                return Err(Error::UnknownSubject(claim.clone()));
            }
        }
        for (probe, claim) in &self.impostor {
            if probe.subject_id == *claim {
                return Err(Error::Dataset(format!("impostor trial claims its own identity {claim}")));
            }
            if !enrolled(claim) {
                return Err(Error::UnknownSubject(claim.clone()));
            }
        }
        Ok(())
    }
}

/// Per-trial scores; `None` marks an undefined score, which is never accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialScores {
    pub genuine: Vec<Option<f64>>,
    pub impostor: Vec<Option<f64>>,
}

impl TrialScores {
    fn defined(&self) -> impl Iterator<Item = f64> + '_ {
        self.genuine.iter().chain(&self.impostor).flatten().copied()
    }
}

/// Scores every trial against the claimed subject's enrolled templates.
///
/// A trial's score does not depend on the threshold, so one pass serves the
/// whole sweep: at threshold `t` the trial is accepted iff its score passes
/// `t` under `metric`.
pub fn score_trials(trials: &TrialSet, metric: MatchMetric, k: usize, exec: Execution) -> Result<TrialScores> {
    trials.validate()?;
    let mut gallery: Vec<&FusedTemplate> = trials.gallery.iter().collect();
    gallery.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    let claimed = |claim: &str| -> Vec<FusedTemplate> {
        let start = gallery.partition_point(|g| g.subject_id.as_str() < claim);
        let end = gallery.partition_point(|g| g.subject_id.as_str() <= claim);
        gallery[start..end].iter().map(|g| (*g).clone()).collect()
    };
    let score = |(probe, claim): &(FusedTemplate, String)| -> Result<Option<f64>> {
        let entries = claimed(claim);
        let d = verify(metric, probe, &entries, k.min(entries.len()).max(1), 0.0)?;
        Ok((!d.score.is_nan()).then_some(d.score))
    };
    let all: Vec<&(FusedTemplate, String)> = trials.genuine.iter().chain(&trials.impostor).collect();
    let mut scores = exec
        .map_indices(all.len(), |i| score(all[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let impostor = scores.split_off(trials.genuine.len());
    Ok(TrialScores {
        genuine: scores,
        impostor,
    })
}

/// `n` evenly spaced thresholds from the smallest to the largest score,
/// endpoints included. A constant score yields a single threshold.
pub fn default_thresholds(scores: impl IntoIterator<Item = f64>, n: usize) -> Vec<f64> {
    let (lo, hi) = scores
        .into_iter()
        .filter(|s| s.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)));
    if lo > hi {
        return vec![0.0];
    }
    if lo == hi || n < 2 {
        return vec![lo];
    }
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocRow {
    pub threshold: f64,
    /// Percent of impostor trials accepted.
    pub far: f64,
    /// Percent of genuine trials rejected.
    pub frr: f64,
    /// `100 - frr`: percent of genuine trials accepted.
    pub recognition_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocReport {
    pub label: String,
    pub metric: MatchMetric,
    pub k: usize,
    pub genuine_trials: usize,
    pub impostor_trials: usize,
    pub rows: Vec<RocRow>,
    /// Equal error rate in percent.
    pub eer: f64,
    /// Area under the (FAR, 1 - FRR) curve, in [0, 1].
    pub auc: f64,
    pub config: Vec<(String, String)>,
}

/// Builds the FAR/FRR sweep from precomputed scores.
pub fn report_from_scores(scores: &TrialScores, metric: MatchMetric, thresholds: &[f64]) -> Result<RocReport> {
    if scores.genuine.is_empty() || scores.impostor.is_empty() {
        return Err(Error::EmptyTrials);
    }
    if thresholds.is_empty() || thresholds.iter().any(|t| t.is_nan()) {
        return Err(Error::InvalidConfig("threshold grid must be non-empty and free of NaN".into()));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("threshold grid must be sorted ascending".into()));
    }
    let accepted = |list: &[Option<f64>], t: f64| list.iter().flatten().filter(|&&s| metric.accepts(s, t)).count();
    let (ng, ni) = (scores.genuine.len(), scores.impostor.len());
    let rows: Vec<RocRow> = thresholds
        .iter()
        .map(|&t| {
            let far = 100.0 * accepted(&scores.impostor, t) as f64 / ni as f64;
            let frr = 100.0 * (ng - accepted(&scores.genuine, t)) as f64 / ng as f64;
            RocRow {
                threshold: t,
                far,
                frr,
                recognition_rate: 100.0 - frr,
            }
        })
        .collect();
    Ok(RocReport {
        label: String::new(),
        metric,
        k: 1,
        genuine_trials: ng,
        impostor_trials: ni,
        eer: equal_error_rate(&rows),
        auc: area_under_curve(&rows),
        rows,
        config: Vec::new(),
    })
}

/// FAR/FRR crossing, linearly interpolated between the bracketing grid points.
/// Without a crossing, the grid point where the two rates are closest.
pub fn equal_error_rate(rows: &[RocRow]) -> f64 {
    let diff = |r: &RocRow| r.far - r.frr;
    for (i, r) in rows.iter().enumerate() {
        if diff(r) == 0.0 {
            return r.far;
        }
        if let Some(next) = rows.get(i + 1) {
            let (d0, d1) = (diff(r), diff(next));
            if d0 * d1 < 0.0 {
                let a = d0 / (d0 - d1);
                let far = r.far + a * (next.far - r.far);
                let frr = r.frr + a * (next.frr - r.frr);
                return 0.5 * (far + frr);
            }
        }
    }
    rows.iter()
        .min_by(|a, b| diff(a).abs().total_cmp(&diff(b).abs()))
        .map_or(100.0, |r| 0.5 * (r.far + r.frr))
}

/// Trapezoid area under (FAR, 1 - FRR), anchored at (0, 0) and (1, 1).
pub fn area_under_curve(rows: &[RocRow]) -> f64 {
    let mut pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.far / 100.0, 1.0 - r.frr / 100.0)).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
}

/// Scores `trials` and sweeps `thresholds`, or the default grid over the
/// observed scores when `None`.
pub fn run_trials(
    trials: &TrialSet,
    metric: MatchMetric,
    k: usize,
    thresholds: Option<&[f64]>,
) -> Result<RocReport> {
    run_trials_with(trials, metric, k, thresholds, Execution::default())
}

pub fn run_trials_with(
    trials: &TrialSet,
    metric: MatchMetric,
    k: usize,
    thresholds: Option<&[f64]>,
    exec: Execution,
) -> Result<RocReport> {
    let scores = score_trials(trials, metric, k, exec)?;
    let grid = match thresholds {
        Some(t) => t.to_vec(),
        None => default_thresholds(scores.defined(), DEFAULT_GRID),
    };
    let mut report = report_from_scores(&scores, metric, &grid)?;
    report.k = k;
    Ok(report)
}

impl RocReport {
    /// The `.roc` table: header, one row per threshold, then `eer <v> auc <v>`.
    pub fn to_roc_text(&self) -> String {
        let mut out = String::from("threshold far frr recognition_rate\n");
        for r in &self.rows {
            let _ = writeln!(out, "{:?} {:?} {:?} {:?}", r.threshold, r.far, r.frr, r.recognition_rate);
        }
        let _ = writeln!(out, "eer {:?} auc {:?}", self.eer, self.auc);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub modality: String,
    pub metric: MatchMetric,
    pub auc: f64,
    pub eer: f64,
}

/// Whether the fused configuration beats one unimodal baseline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Improvement {
    pub metric: MatchMetric,
    pub baseline: String,
    pub fused_auc: f64,
    pub baseline_auc: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub improvements: Vec<Improvement>,
}

/// Tabulates face-only, palm-only and fused reports of one metric and flags
/// whether the fused AUC strictly exceeds each unimodal AUC.
pub fn compare_modalities(face_only: &RocReport, palm_only: &RocReport, fused: &RocReport) -> Result<ComparisonReport> {
    for (name, r) in [("face", face_only), ("palm", palm_only)] {
        if r.metric != fused.metric {
            return Err(Error::MismatchedGrids(format!("{name} report uses {} but fused uses {}", r.metric, fused.metric)));
        }
        if r.rows.len() != fused.rows.len() {
            return Err(Error::MismatchedGrids(format!(
                "{name} report has {} thresholds but fused has {}",
                r.rows.len(),
                fused.rows.len()
            )));
        }
        if (r.genuine_trials, r.impostor_trials) != (fused.genuine_trials, fused.impostor_trials) {
            return Err(Error::MismatchedGrids(format!("{name} report was computed on a different trial set")));
        }
    }
    let row = |modality: &str, r: &RocReport| ComparisonRow {
        modality: modality.into(),
        metric: r.metric,
        auc: r.auc,
        eer: r.eer,
    };
    let improvement = |baseline: &str, r: &RocReport| Improvement {
        metric: fused.metric,
        baseline: baseline.into(),
        fused_auc: fused.auc,
        baseline_auc: r.auc,
        improved: fused.auc > r.auc,
    };
    Ok(ComparisonReport {
        rows: vec![row("face", face_only), row("palm", palm_only), row("fused", fused)],
        improvements: vec![improvement("face", face_only), improvement("palm", palm_only)],
    })
}

impl ComparisonReport {
    pub fn merge(mut self, other: ComparisonReport) -> Self {
        self.rows.extend(other.rows);
        self.improvements.extend(other.improvements);
        self
    }

    pub fn row(&self, modality: &str, metric: MatchMetric) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.modality == modality && r.metric == metric)
    }

    /// Fused correlation AUC >= fused K-NN AUC >= every unimodal AUC, and
    /// fused correlation has the lowest EER. `None` unless all six rows exist.
    pub fn fusion_ordering_holds(&self) -> Option<bool> {
        let corr = self.row("fused", MatchMetric::NormalizedCorrelation)?;
        let knn = self.row("fused", MatchMetric::KnnEuclidean)?;
        let mut unimodal = Vec::with_capacity(4);
        for m in ["face", "palm"] {
            for metric in MatchMetric::ALL {
                unimodal.push(self.row(m, metric)?);
            }
        }
        let auc_order = corr.auc >= knn.auc && unimodal.iter().all(|u| knn.auc >= u.auc);
        let eer_min = self.rows.iter().all(|r| corr.eer <= r.eer);
        Some(auc_order && eer_min)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("modality metric auc eer\n");
        for r in &self.rows {
            let _ = writeln!(out, "{} {} {:.6} {:.4}", r.modality, r.metric, r.auc, r.eer);
        }
        for i in &self.improvements {
            let verdict = if i.improved { "improvement" } else { "no improvement" };
            let _ = writeln!(
                out,
                "fused vs {} ({}): {verdict} ({:.6} vs {:.6})",
                i.baseline, i.metric, i.fused_auc, i.baseline_auc
            );
        }
        if let Some(ok) = self.fusion_ordering_holds() {
            let _ = writeln!(out, "fused correlation ranks first: {}", if ok { "yes" } else { "no" });
        }
        out
    }
}

/// The six reports of a face/palm/fused by K-NN/correlation experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SixWayEvaluation {
    pub reports: Vec<RocReport>,
    pub comparison: ComparisonReport,
}

impl SixWayEvaluation {
    pub fn report(&self, label: &str) -> Option<&RocReport> {
        self.reports.iter().find(|r| r.label == label)
    }
}

/// Enrolls every subject's reference captures, builds probe templates from
/// the probe captures and runs all genuine/impostor trials for face-only,
/// palm-only and fused templates under both metrics.
pub fn evaluate_subjects(subjects: &[SubjectCaptures], config: &PipelineConfig) -> Result<SixWayEvaluation> {
    if subjects.len() < 2 {
        return Err(Error::Dataset(format!(
            "need at least two subjects for impostor trials, found {}",
            subjects.len()
        )));
    }
    let exec = config.execution;
    let built = exec.map_indices(subjects.len(), |i| -> Result<[FusedTemplate; 6]> {
        let s = &subjects[i];
        let inner = PipelineConfig {
            execution: Execution::Sequential,
            ..config.clone()
        };
        Ok([
            build_unimodal_template(&s.face_ref, &inner)?,
            build_unimodal_template(&s.face_probe, &inner)?,
            build_unimodal_template(&s.palm_ref, &inner)?,
            build_unimodal_template(&s.palm_probe, &inner)?,
            build_template(&s.face_ref, &s.palm_ref, &inner)?,
            build_template(&s.face_probe, &s.palm_probe, &inner)?,
        ])
    });
    let built = built.into_iter().collect::<Result<Vec<_>>>()?;
    let trials = |slot: usize| -> Result<TrialSet> {
        let gallery = built.iter().map(|t| t[slot].clone()).collect();
        let probes: Vec<FusedTemplate> = built.iter().map(|t| t[slot + 1].clone()).collect();
        TrialSet::all_pairs(gallery, &probes)
    };
    let snapshot = config.snapshot();
    let mut reports = Vec::with_capacity(6);
    let mut comparison = ComparisonReport::default();
    let sets = [("face", trials(0)?), ("palm", trials(2)?), ("fused", trials(4)?)];
    for metric in MatchMetric::ALL {
        let mut per_metric = Vec::with_capacity(3);
        for (name, set) in &sets {
            let mut r = run_trials_with(set, metric, config.knn_k, None, exec)?;
            r.label = format!("{name}-{metric}");
            r.config = snapshot.clone();
            per_metric.push(r);
        }
        comparison = comparison.merge(compare_modalities(&per_metric[0], &per_metric[1], &per_metric[2])?);
        reports.extend(per_metric);
    }
    Ok(SixWayEvaluation { reports, comparison })
}
