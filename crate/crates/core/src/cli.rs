//! Command-line front end: ingest, enroll, verify, evaluate, synth, inspect.
//!
//! Exit codes: 0 on success (a rejected verification is a success), 1 on
//! domain errors, 2 on usage and input-format errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clustering::{format_cluster_dump, parse_cluster_dump};
use crate::error::{Error, Result};
use crate::evaluation::evaluate_subjects;
use crate::fusion::{load_template, TemplateStore};
use crate::graph::parse_mapping;
use crate::keypoint::{generate_synthetic_subject, load_keypoints, save_keypoints, SubjectCaptures, SynthProfile};
use crate::matching::{verify, MatchMetric};
use crate::pipeline::{build_template, build_template_detailed, cluster_modality, PipelineConfig};

/// Seed used by `synth` when `--seed` is omitted.
pub const DEFAULT_SEED: u64 = 20_240_601;

/// File names of one subject directory in a dataset.
pub const CAPTURE_FILES: [&str; 4] = ["face_ref.kpt", "palm_ref.kpt", "face_probe.kpt", "palm_probe.kpt"];

#[derive(Debug, Parser)]
#[command(name = "kpfuse", version, about = "Face and palmprint keypoint fusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a .kpt file and print its summary.
    Ingest { file: PathBuf },
    /// Build a fused template and store it as <store-dir>/<subject_id>.ftv.
    Enroll {
        #[arg(long)]
        face: PathBuf,
        #[arg(long)]
        palm: PathBuf,
        #[arg(long, default_value = "store")]
        store_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Verify a probe against a claimed enrolled subject.
    Verify {
        #[arg(long)]
        face: PathBuf,
        #[arg(long)]
        palm: PathBuf,
        #[arg(long)]
        claim: String,
        /// knn or correlation; defaults to the configured metric.
        #[arg(long)]
        metric: Option<MatchMetric>,
        #[arg(long, allow_negative_numbers = true)]
        threshold: f64,
        #[arg(long, default_value = "store")]
        store_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the six-way face/palm/fused evaluation over a dataset directory.
    Evaluate {
        #[arg(long)]
        dataset_dir: PathBuf,
        /// Metric of the fused report written to --out.
        #[arg(long)]
        metric: Option<MatchMetric>,
        /// Fused report path; the other reports, the summary and a JSON dump
        /// are written next to it.
        #[arg(long, default_value = "report.roc")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Write a synthetic dataset.
    Synth {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        subjects: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// `default`, `noiseless`, or a file of key = value lines.
        #[arg(long, default_value = "default")]
        profile: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Summarize a .kpt, .ftv, .clu or .map file.
    Inspect {
        file: PathBuf,
        /// For .kpt files: cluster the set and print the cluster dump.
        #[arg(long)]
        cluster: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

/// Pipeline configuration: file values first, then flags.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Any configuration key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg.apply_text(&text, &path.display().to_string())?;
        }
        if let Some(k) = self.k {
            cfg.cluster.k = k;
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        for o in &self.overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("--set expects key=value, got {o:?}")))?;
            cfg.set(key.trim(), value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { file } => {
            let set = load_keypoints(&file)?;
            println!(
                "{} {} {} {} keypoints",
                set.modality,
                set.subject_id,
                set.capture_id,
                set.len()
            );
            Ok(())
        }
        Command::Enroll {
            face,
            palm,
            store_dir,
            config,
        } => {
            let cfg = config.resolve()?;
            let (face, palm) = (load_keypoints(&face)?, load_keypoints(&palm)?);
            let build = build_template_detailed(&face, &palm, &cfg)?;
            let store = TemplateStore::new(store_dir);
            let replaced = store.save(&build.template)?;
            let path = store.path_for(&build.template.subject_id);
            println!(
                "enrolled {} -> {}: template length {}, padded pairs {}",
                build.template.subject_id,
                path.display(),
                build.template.len(),
                build.padded
            );
            if replaced {
                println!("replaced previous template for {}", build.template.subject_id);
            }
            Ok(())
        }
        Command::Verify {
            face,
            palm,
            claim,
            metric,
            threshold,
            store_dir,
            config,
        } => {
            let cfg = config.resolve()?;
            let metric = metric.unwrap_or(cfg.match_metric);
            let store = TemplateStore::new(store_dir);
            let enrolled = store.load(&claim)?;
            let (face, palm) = (load_keypoints(&face)?, load_keypoints(&palm)?);
            let probe = build_template(&face, &palm, &cfg)?;
            let decision = verify(metric, &probe, &[enrolled], 1, threshold)?;
            println!(
                "{} score={:?} metric={} threshold={:?}",
                if decision.accepted { "ACCEPT" } else { "REJECT" },
                decision.score,
                metric,
                threshold
            );
            Ok(())
        }
        Command::Evaluate {
            dataset_dir,
            metric,
            out,
            config,
        } => {
            let cfg = config.resolve()?;
            let metric = metric.unwrap_or(cfg.match_metric);
            let subjects = load_dataset(&dataset_dir)?;
            let eval = evaluate_subjects(&subjects, &cfg)?;
            let dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report").to_string();
            let write = |path: PathBuf, text: String| fs::write(&path, text).map_err(|e| Error::io(&path, e));
            for r in &eval.reports {
                write(dir.join(format!("{stem}.{}.roc", r.label)), r.to_roc_text())?;
            }
            let fused = eval
                .report(&format!("fused-{metric}"))
                .expect("six-way evaluation has both fused reports");
            write(out.clone(), fused.to_roc_text())?;
            let summary = eval.comparison.to_text();
            write(dir.join(format!("{stem}.summary.txt")), summary.clone())?;
            write(
                dir.join(format!("{stem}.json")),
                serde_json::to_string_pretty(&eval).expect("evaluation serializes"),
            )?;
            print!("{summary}");
            Ok(())
        }
        Command::Synth {
            subjects,
            seed,
            profile,
            out_dir,
        } => {
            let seed = seed.unwrap_or_else(|| {
                println!("using default seed {DEFAULT_SEED}");
                DEFAULT_SEED
            });
            let profile = resolve_profile(&profile)?;
            let data = synthetic_dataset(subjects as usize, seed, &profile)?;
            write_dataset(&out_dir, &data)?;
            println!(
                "wrote {} subjects ({} files) to {}",
                data.len(),
                data.len() * CAPTURE_FILES.len(),
                out_dir.display()
            );
            Ok(())
        }
        Command::Inspect { file, cluster, config } => inspect(&file, cluster, &config),
    }
}

fn resolve_profile(arg: &str) -> Result<SynthProfile> {
    match arg {
        "default" | "noiseless" => SynthProfile::parse(arg),
        path => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            SynthProfile::parse(&text)
        }
    }
}

/// `n` subjects named `s000`, `s001`, ... with per-subject seeds drawn from
/// `seed`.
pub fn synthetic_dataset(n: usize, seed: u64, profile: &SynthProfile) -> Result<Vec<SubjectCaptures>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut s = generate_synthetic_subject(rng.random(), profile)?;
            s.rename(&format!("s{i:03}"));
            Ok(s)
        })
        .collect()
}

/// Writes `<dir>/<subject_id>/{face_ref,palm_ref,face_probe,palm_probe}.kpt`.
pub fn write_dataset(dir: &Path, subjects: &[SubjectCaptures]) -> Result<()> {
    for s in subjects {
        let sub = dir.join(&s.face_ref.subject_id);
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        for (name, set) in CAPTURE_FILES.iter().zip([&s.face_ref, &s.palm_ref, &s.face_probe, &s.palm_probe]) {
            save_keypoints(set, sub.join(name))?;
        }
    }
    Ok(())
}

/// Reads every subject directory of a dataset, in name order.
pub fn load_dataset(dir: &Path) -> Result<Vec<SubjectCaptures>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Dataset(format!("{}: {e}", dir.display())))?;
    let mut subdirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::Dataset(format!("{}: {e}", dir.display())))?;
        if entry.path().is_dir() {
            subdirs.push(entry.path());
        }
    }
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(Error::Dataset(format!("{} contains no subject directories", dir.display())));
    }
    subdirs
        .iter()
        .map(|sub| {
            let load = |name: &str| {
                let path = sub.join(name);
                if !path.is_file() {
                    return Err(Error::Dataset(format!("missing {}", path.display())));
                }
                load_keypoints(&path)
            };
            let captures = SubjectCaptures {
                face_ref: load(CAPTURE_FILES[0])?,
                palm_ref: load(CAPTURE_FILES[1])?,
                face_probe: load(CAPTURE_FILES[2])?,
                palm_probe: load(CAPTURE_FILES[3])?,
            };
            let name = sub.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            for set in [&captures.face_ref, &captures.palm_ref, &captures.face_probe, &captures.palm_probe] {
                if set.subject_id != name {
                    return Err(Error::Dataset(format!(
                        "{}: file names subject {} but directory is {name}",
                        sub.display(),
                        set.subject_id
                    )));
                }
            }
            Ok(captures)
        })
        .collect()
}

fn inspect(file: &Path, cluster: bool, config: &ConfigArgs) -> Result<()> {
    let ext = file.extension().and_then(|e| e.to_str()).unwrap_or_default();
    let read = || fs::read_to_string(file).map_err(|e| Error::io(file, e));
    let origin = file.display().to_string();
    match ext {
        "kpt" => {
            let set = load_keypoints(file)?;
            println!("{} {} {} {} keypoints", set.modality, set.subject_id, set.capture_id, set.len());
            if cluster {
                let cfg = config.resolve()?;
                let (cl, _) = cluster_modality(&set, &cfg)?;
                print!("{}", format_cluster_dump(&cl));
            }
        }
        "ftv" => {
            let t = load_template(file)?;
            let zeros = t.values.iter().filter(|&&v| v == 0.0).count();
            println!(
                "template {} k={} p={} length={} zero entries={}",
                t.subject_id,
                t.k,
                t.p,
                t.len(),
                zeros
            );
        }
        "clu" => {
            let dump = parse_cluster_dump(&read()?, &origin)?;
            let excluded = dump.entries.iter().filter(|e| e.excluded).count();
            println!("clusters k={} points={} excluded={excluded}", dump.k, dump.entries.len());
        }
        "map" => {
            let m = parse_mapping(&read()?, &origin)?;
            println!(
                "mapping order={} cost={:?} converged={}",
                m.mapping.len(),
                m.distortion_cost,
                m.converged
            );
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "cannot inspect {origin}: unknown extension {other:?}"
            )))
        }
    }
    Ok(())
}
