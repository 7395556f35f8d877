use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use intake_core::archspec::{builtin_arch, count_params, propagate_shapes};
use intake_core::detector::{detect as run_detect, tune_threshold, DetectorConfig, GridSpec, LabeledSession};
use intake_core::evaluation::{compute_metrics, evaluate_detections, EvalReport};
use intake_core::io;
use intake_core::synth::{generate_dataset, SessionConfig};
use intake_core::timeline::{downsample_labels, labels_from_annotations, AnnotationInterval, FrameEvent};
use serde::Serialize;
use serde_json::json;

use crate::output::{write_atomic, write_json, RunManifest};
use crate::svg::Plot;
use crate::{DetectArgs, EvalArgs, LabelArgs, ParamsArgs, ReportArgs, SimulateArgs, TuneArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit code 2.
    Invalid(anyhow::Error),
    /// Anything else: exit code 1.
    Internal(anyhow::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

fn invalid<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Invalid(e.into())
}

fn internal<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Internal(e.into())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(invalid)
}

fn in_file<T, E>(path: &Path, r: std::result::Result<T, E>) -> Result<T>
where
    E: std::error::Error + Send + Sync + 'static,
{
    r.with_context(|| path.display().to_string()).map_err(invalid)
}

fn read_annotations(path: &Path) -> Result<Vec<AnnotationInterval>> {
    in_file(path, io::read_annotations(open(path)?))
}

/// Frame spans of the annotations, ordered by start time.
fn frame_events(intervals: &[AnnotationInterval], fps: f64, n_frames: u64) -> Vec<FrameEvent> {
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    sorted
        .iter()
        .filter_map(|a| a.frame_span(fps, n_frames))
        .collect()
}

fn check_fps(fps: f64) -> Result<()> {
    if fps.is_finite() && fps > 0.0 {
        Ok(())
    } else {
        Err(invalid(anyhow!("--fps must be positive, got {fps}")))
    }
}

fn finish(manifest: RunManifest, primary: &Path) -> Result<()> {
    let path = manifest.write_beside(primary).map_err(internal)?;
    log::info!("manifest written to {}", path.display());
    Ok(())
}

pub fn label(a: &LabelArgs) -> Result<()> {
    check_fps(a.fps)?;
    let intervals = read_annotations(&a.annotations)?;
    let n_frames = match (a.n_frames, a.duration) {
        (Some(n), _) => n,
        (None, Some(d)) if d.is_finite() && d >= 0.0 => (d * a.fps).floor() as u64,
        (None, d) => return Err(invalid(anyhow!("invalid --duration {d:?}"))),
    };
    let mut series = labels_from_annotations(&intervals, a.fps, n_frames).map_err(invalid)?;
    if let Some(target) = a.downsample_to {
        let ratio = a.fps / target;
        let factor = ratio.round();
        if !(target > 0.0 && factor >= 1.0 && (ratio - factor).abs() < 1e-9) {
            return Err(invalid(anyhow!(
                "--downsample-to {target} must divide --fps {} into a whole factor",
                a.fps
            )));
        }
        series = downsample_labels(&series, factor as usize).map_err(invalid)?;
    }
    write_atomic(&a.out, |w| Ok(io::write_labels(w, &series)?)).map_err(internal)?;
    println!("{} frame labels written to {}", series.len(), a.out.display());
    let manifest = RunManifest::new(
        "label",
        json!({
            "fps": a.fps,
            "n_frames": n_frames,
            "downsample_to": a.downsample_to,
        }),
    )
    .input(&a.annotations)
    .output(&a.out);
    finish(manifest, &a.out)
}

pub fn detect(a: &DetectArgs) -> Result<()> {
    check_fps(a.fps)?;
    let config = DetectorConfig::new(a.threshold, a.min_dist).map_err(invalid)?;
    let probs = in_file(&a.probs, io::read_probabilities(open(&a.probs)?, a.fps))?;
    let detections = run_detect(&probs, &config).map_err(invalid)?;
    write_atomic(&a.out, |w| Ok(io::write_detections(w, &detections)?)).map_err(internal)?;
    println!("{} detections written to {}", detections.len(), a.out.display());
    let manifest = RunManifest::new(
        "detect",
        json!({ "threshold": a.threshold, "min_dist": a.min_dist, "fps": a.fps }),
    )
    .input(&a.probs)
    .output(&a.out);
    finish(manifest, &a.out)
}

/// `<stem> → path` for every `*.csv` in `dir`.
fn csv_stems(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))
        .map_err(invalid)?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(internal)?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path.clone());
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct TuneReport {
    #[serde(flatten)]
    report: EvalReport,
    grid_points: usize,
    sessions: Vec<String>,
}

pub fn tune(a: &TuneArgs) -> Result<()> {
    check_fps(a.fps)?;
    let grid = GridSpec::new(a.grid.grid_lo, a.grid.grid_hi, a.grid.grid_step).map_err(invalid)?;
    let probs = csv_stems(&a.probs_dir)?;
    let annots = csv_stems(&a.annotations_dir)?;
    let unmatched: Vec<&str> = probs
        .keys()
        .filter(|k| !annots.contains_key(*k))
        .chain(annots.keys().filter(|k| !probs.contains_key(*k)))
        .map(String::as_str)
        .collect();
    if !unmatched.is_empty() {
        return Err(invalid(anyhow!(
            "session files without a counterpart: {}",
            unmatched.join(", ")
        )));
    }
    if probs.is_empty() {
        return Err(invalid(anyhow!("no .csv sessions in {}", a.probs_dir.display())));
    }

    let mut sessions = Vec::new();
    for (stem, path) in &probs {
        let series = in_file(path, io::read_probabilities(open(path)?, a.fps))?;
        let intervals = read_annotations(&annots[stem])?;
        let events = frame_events(&intervals, a.fps, series.end_frame());
        sessions.push(LabeledSession { probs: series, events });
    }
    let outcome = tune_threshold(&sessions, &grid, a.min_dist).map_err(invalid)?;

    let mut report = EvalReport::new(outcome.counts);
    report.threshold = Some(outcome.threshold);
    println!("p_t = {} F1 = {:.4}", outcome.threshold, outcome.f1);
    println!(
        "TP {} FP1 {} FP2 {} FN {} over {} sessions, {} grid points",
        report.tp,
        report.fp1,
        report.fp2,
        report.fn_,
        sessions.len(),
        outcome.grid_points
    );
    let out = TuneReport {
        report,
        grid_points: outcome.grid_points,
        sessions: probs.keys().cloned().collect(),
    };
    write_json(&a.out, &out).map_err(internal)?;
    let mut manifest = RunManifest::new(
        "tune",
        json!({ "grid": a.grid, "min_dist": a.min_dist, "fps": a.fps }),
    )
    .output(&a.out);
    for (stem, path) in &probs {
        manifest = manifest.input(path).input(&annots[stem]);
    }
    finish(manifest, &a.out)
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    check_fps(a.fps)?;
    let detections = in_file(&a.detections, io::read_detections(open(&a.detections)?, a.fps))?;
    let intervals = read_annotations(&a.annotations)?;
    let events = frame_events(&intervals, a.fps, u64::MAX);
    let counts = evaluate_detections(&detections, &events)
        .with_context(|| a.annotations.display().to_string())
        .map_err(invalid)?;
    let m = compute_metrics(&counts);
    println!(
        "TP {} FP1 {} FP2 {} FN {}",
        counts.tp, counts.fp1, counts.fp2, counts.fn_
    );
    println!(
        "precision {:.3} recall {:.3} F1 {:.3}",
        m.precision, m.recall, m.f1
    );
    write_json(&a.out, &EvalReport::new(counts)).map_err(internal)?;
    let manifest = RunManifest::new("eval", json!({ "fps": a.fps }))
        .input(&a.detections)
        .input(&a.annotations)
        .output(&a.out);
    finish(manifest, &a.out)
}

#[derive(Serialize)]
struct ParamsExport {
    arch: String,
    total_params: u64,
    reference_params_m: Option<f64>,
    relative_error: Option<f64>,
    layers: Vec<intake_core::archspec::LayerShape>,
}

pub fn params(a: &ParamsArgs) -> Result<()> {
    let spec = builtin_arch(&a.arch).map_err(invalid)?;
    let rows = propagate_shapes(&spec).map_err(internal)?;
    let total = count_params(&spec).map_err(internal)?;
    let reference = spec.reference_params_m;
    let rel = reference.map(|r| total as f64 / (r * 1e6) - 1.0);

    let mut stdout = std::io::stdout().lock();
    let w = &mut stdout;
    let write = |w: &mut std::io::StdoutLock, line: String| writeln!(w, "{line}").map_err(internal);
    write(w, format!("{:<8} {:<16} {:<52} {:>16} {:>12}", "pathway", "layer", "kernel", "output", "params"))?;
    for r in &rows {
        write(
            w,
            format!(
                "{:<8} {:<16} {:<52} {:>16} {:>12}",
                r.pathway.as_deref().unwrap_or("-"),
                r.layer,
                r.description,
                r.output.to_string(),
                r.params
            ),
        )?;
    }
    write(w, format!("total {} ({:.2} M)", total, total as f64 / 1e6))?;
    if let (Some(r), Some(e)) = (reference, rel) {
        write(w, format!("reference {r} M, relative error {:+.2}%", e * 100.0))?;
    }

    if let Some(path) = &a.json {
        let export = ParamsExport {
            arch: spec.name.clone(),
            total_params: total,
            reference_params_m: reference,
            relative_error: rel,
            layers: rows,
        };
        write_json(path, &export).map_err(internal)?;
        let manifest = RunManifest::new("params", json!({ "arch": a.arch })).output(path);
        finish(manifest, path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SessionEntry {
    stem: String,
    seed: u64,
    events: usize,
    frames: usize,
    probs: String,
    annotations: String,
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    if a.n == 0 {
        return Err(invalid(anyhow!("--n must be at least 1")));
    }
    let config = SessionConfig {
        duration_s: a.duration,
        gesture_mean_s: a.gesture_mean,
        gesture_std_s: a.gesture_std,
        mean_gap_s: a.mean_gap,
        min_gap_s: a.min_gap,
        noise_std: a.noise_std,
        fps: a.fps,
        seed: a.seed,
    };
    let sessions = generate_dataset(a.n, a.seed, &config).map_err(invalid)?;
    let width = a.n.saturating_sub(1).to_string().len().max(4);
    let mut entries = Vec::new();
    for (k, s) in sessions.iter().enumerate() {
        let stem = format!("session_{k:0width$}");
        let probs = Path::new("probs").join(format!("{stem}.csv"));
        let annotations = Path::new("annotations").join(format!("{stem}.csv"));
        write_atomic(&a.out.join(&probs), |w| Ok(io::write_probabilities(w, &s.probs)?))
            .map_err(internal)?;
        write_atomic(&a.out.join(&annotations), |w| Ok(io::write_annotations(w, &s.events)?))
            .map_err(internal)?;
        entries.push(SessionEntry {
            stem,
            seed: s.seed,
            events: s.events.len(),
            frames: s.probs.len(),
            probs: probs.display().to_string(),
            annotations: annotations.display().to_string(),
        });
    }
    let mut manifest = RunManifest::new(
        "simulate",
        serde_json::to_value(SessionConfig { seed: a.seed, ..config }).map_err(internal)?,
    );
    manifest.seeds = sessions.iter().map(|s| s.seed).collect();
    manifest.outputs = entries
        .iter()
        .flat_map(|e| [e.probs.clone(), e.annotations.clone()])
        .collect();
    let doc = json!({
        "manifest": manifest,
        "sessions": entries,
    });
    write_json(&a.out.join("manifest.json"), &doc).map_err(internal)?;
    let total: usize = entries.iter().map(|e| e.events).sum();
    println!(
        "{} sessions ({} events) written to {}",
        entries.len(),
        total,
        a.out.display()
    );
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<()> {
    check_fps(a.fps)?;
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(invalid(anyhow!("--threshold must lie in [0, 1], got {}", a.threshold)));
    }
    let probs = in_file(&a.probs, io::read_probabilities(open(&a.probs)?, a.fps))?;
    let detections = io::read_detections(open(&a.detections)?, a.fps)
        .with_context(|| {
            format!(
                "{}: detection times do not agree with {} fps",
                a.detections.display(),
                a.fps
            )
        })
        .map_err(invalid)?;
    if let Some(&f) = detections
        .frames()
        .iter()
        .find(|&&f| f < probs.start_frame() || f >= probs.end_frame())
    {
        return Err(invalid(anyhow!(
            "detection at frame {f} lies outside the probability series (frames {}..{})",
            probs.start_frame(),
            probs.end_frame()
        )));
    }
    let intervals = read_annotations(&a.annotations)?;
    let events = frame_events(&intervals, a.fps, probs.end_frame());
    let svg = Plot {
        probs: &probs,
        detections: &detections,
        events: &events,
        threshold: a.threshold,
    }
    .render();
    write_atomic(&a.out, |w| Ok(w.write_all(svg.as_bytes())?)).map_err(internal)?;
    println!("report written to {}", a.out.display());
    let manifest = RunManifest::new("report", json!({ "threshold": a.threshold, "fps": a.fps }))
        .input(&a.probs)
        .input(&a.detections)
        .input(&a.annotations)
        .output(&a.out);
    finish(manifest, &a.out)
}
