use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn intake(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intake"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).unwrap();
    }
    fs::write(&path, content).unwrap();
    path
}

fn probs_csv(values: &[f64]) -> String {
    let mut s = String::from("frame,p_intake\n");
    for (i, v) in values.iter().enumerate() {
        s.push_str(&format!("{i},{v}\n"));
    }
    s
}

/// Annotations whose frame spans at 8 fps are exactly `spans`.
fn annotations_csv(spans: &[(u64, u64)]) -> String {
    let mut s = String::from("start_s,end_s,label\n");
    for &(a, b) in spans {
        s.push_str(&format!("{},{},intake\n", a as f64 / 8.0, b as f64 / 8.0));
    }
    s
}

fn detections_csv(frames: &[u64]) -> String {
    let mut s = String::from("frame,time_s\n");
    for &f in frames {
        s.push_str(&format!("{f},{}\n", f as f64 / 8.0));
    }
    s
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

fn spurious_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let mut v = vec![0.0; 80];
    v[10..14].fill(1.0);
    v[40] = 0.75;
    v[60..64].fill(1.0);
    write(dir, "probs/a.csv", &probs_csv(&v));
    write(dir, "annots/a.csv", &annotations_csv(&[(10, 13), (60, 63)]));
    (dir.join("probs"), dir.join("annots"))
}

#[test]
fn label_writes_csv_and_manifest() {
    let dir = TempDir::new().unwrap();
    let ann = write(dir.path(), "a.csv", "start_s,end_s,label\n0.5,1.0,intake\n");
    let out = dir.path().join("labels.csv");
    let r = intake(&["label", p(&ann), "--fps", "8", "--n-frames", "12", "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let text = fs::read_to_string(&out).unwrap();
    let intake_rows: Vec<&str> = text.lines().filter(|l| l.ends_with(",intake")).collect();
    assert_eq!(intake_rows, vec!["4,intake", "5,intake", "6,intake", "7,intake", "8,intake"]);
    let manifest = json(&dir.path().join("labels.csv.manifest.json"));
    assert_eq!(manifest["command"], "label");
    assert_eq!(manifest["config"]["n_frames"], 12);
}

#[test]
fn label_downsamples_24_to_8() {
    let dir = TempDir::new().unwrap();
    let ann = write(dir.path(), "a.csv", "start_s,end_s,label\n0.25,0.75,intake\n");
    let out = dir.path().join("labels.csv");
    let r = intake(&[
        "label", p(&ann), "--fps", "24", "--duration", "1.5", "--downsample-to", "8", "--out", p(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[0], "0,non_intake");
    assert_eq!(rows[2], "2,intake");
    assert_eq!(rows[6], "6,intake");
    assert_eq!(rows[7], "7,non_intake");

    let r = intake(&[
        "label", p(&ann), "--fps", "24", "--n-frames", "10", "--downsample-to", "7", "--out", p(&out),
    ]);
    assert_eq!(code(&r), 2);
}

#[test]
fn label_bad_row_names_line() {
    let dir = TempDir::new().unwrap();
    let ann = write(dir.path(), "a.csv", "start_s,end_s,label\n0.5,1.0,intake\n3.0,2.0,intake\n");
    let out = dir.path().join("labels.csv");
    let r = intake(&["label", p(&ann), "--n-frames", "40", "--out", p(&out)]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("line 3"), "{}", stderr(&r));
    assert!(!out.exists());

    let r = intake(&["label", p(&dir.path().join("missing.csv")), "--n-frames", "4", "--out", p(&out)]);
    assert_eq!(code(&r), 2);
}

#[test]
fn detect_defaults_and_errors() {
    let dir = TempDir::new().unwrap();
    let mut v = vec![0.0; 40];
    v[5] = 0.9;
    v[15] = 0.8; // 10 frames < 2 s at 8 fps: suppressed
    v[30] = 0.7;
    let probs = write(dir.path(), "p.csv", &probs_csv(&v));
    let out = dir.path().join("d.csv");
    let r = intake(&["detect", p(&probs), "--threshold", "0.5", "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert_eq!(fs::read_to_string(&out).unwrap(), "frame,time_s\n5,0.625\n30,3.75\n");
    let manifest = json(&dir.path().join("d.csv.manifest.json"));
    assert_eq!(manifest["config"]["min_dist"], 2.0);
    assert_eq!(manifest["config"]["fps"], 8.0);

    let empty = write(dir.path(), "empty.csv", "frame,p_intake\n");
    let r = intake(&["detect", p(&empty), "--threshold", "0.5", "--out", p(&out)]);
    assert_eq!(code(&r), 2);

    let bad = write(dir.path(), "bad.csv", "frame,p_intake\n0,0.2\n1,1.2\n");
    let r = intake(&["detect", p(&bad), "--threshold", "0.5", "--out", p(&out)]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("line 3"));

    let r = intake(&["detect", p(&probs), "--out", p(&out)]);
    assert_eq!(code(&r), 2, "missing --threshold is a usage error");
}

#[test]
fn simulated_clean_trace_gives_one_detection_per_event() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    let r = intake(&[
        "simulate", "--n", "1", "--seed", "5", "--noise-std", "0", "--min-gap", "2", "--out", p(&sim),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let probs = sim.join("probs/session_0000.csv");
    let annots = sim.join("annotations/session_0000.csv");
    let dets = dir.path().join("d.csv");
    let r = intake(&["detect", p(&probs), "--threshold", "0.5", "--out", p(&dets)]);
    assert_eq!(code(&r), 0);
    assert_eq!(data_rows(&dets), data_rows(&annots));

    let report = dir.path().join("e.json");
    let r = intake(&["eval", p(&dets), p(&annots), "--out", p(&report)]);
    assert_eq!(code(&r), 0);
    let v = json(&report);
    assert_eq!(v["f1"], 1.0);
    assert_eq!(v["fp1"], 0);
    assert_eq!(v["fp2"], 0);
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let r = intake(&["simulate", "--n", "2", "--seed", "99", "--duration", "90", "--out", p(out)]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
    }
    for f in [
        "probs/session_0000.csv",
        "probs/session_0001.csv",
        "annotations/session_0000.csv",
        "annotations/session_0001.csv",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["manifest"]["seeds"], serde_json::json!([99, 100]));
    assert_eq!(manifest["sessions"][1]["seed"], 100);
}

#[test]
fn simulate_defaults_echo_dataset_statistics() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim");
    let r = intake(&["simulate", "--n", "1", "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let config = &json(&out.join("manifest.json"))["manifest"]["config"];
    assert_eq!(config["duration_s"], 816.46);
    assert_eq!(config["gesture_mean_s"], 2.32);
    assert_eq!(config["gesture_std_s"], 1.02);
    assert_eq!(config["fps"], 8.0);
}

#[test]
fn simulate_rejects_bad_config() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim");
    assert_eq!(code(&intake(&["simulate", "--n", "0", "--out", p(&out)])), 2);
    assert_eq!(
        code(&intake(&["simulate", "--n", "1", "--noise-std", "1.5", "--out", p(&out)])),
        2
    );
    assert_eq!(
        code(&intake(&["simulate", "--n", "1", "--duration", "1", "--mean-gap", "1e9", "--out", p(&out)])),
        2
    );
}

#[test]
fn tune_finds_threshold_above_spurious_peak() {
    let dir = TempDir::new().unwrap();
    let (probs, annots) = spurious_fixture(dir.path());
    let out = dir.path().join("t.json");
    let r = intake(&["tune", p(&probs), p(&annots), "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(stdout(&r).contains("p_t = 0.751"), "{}", stdout(&r));
    let v = json(&out);
    assert_eq!(v["threshold"], 0.751);
    assert_eq!(v["f1"], 1.0);
    assert_eq!(v["grid_points"], 501);
}

#[test]
fn tune_perfect_traces_pick_lowest_threshold() {
    let dir = TempDir::new().unwrap();
    let mut v = vec![0.0; 60];
    v[10..14].fill(1.0);
    v[40..44].fill(1.0);
    write(dir.path(), "probs/s1.csv", &probs_csv(&v));
    write(dir.path(), "annots/s1.csv", &annotations_csv(&[(10, 13), (40, 43)]));
    let out = dir.path().join("t.json");
    let r = intake(&[
        "tune", p(&dir.path().join("probs")), p(&dir.path().join("annots")), "--out", p(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert_eq!(json(&out)["threshold"], 0.5);
}

#[test]
fn tune_lists_unmatched_stems() {
    let dir = TempDir::new().unwrap();
    let (probs, annots) = spurious_fixture(dir.path());
    write(dir.path(), "probs/only_probs.csv", &probs_csv(&[0.1]));
    write(dir.path(), "annots/only_annots.csv", &annotations_csv(&[(1, 2)]));
    let r = intake(&["tune", p(&probs), p(&annots), "--out", p(&dir.path().join("t.json"))]);
    assert_eq!(code(&r), 2);
    let err = stderr(&r);
    assert!(err.contains("only_probs") && err.contains("only_annots"), "{err}");
    assert!(!err.contains(" a,") && !err.ends_with(" a\n"));
}

#[test]
fn tune_custom_grid() {
    let dir = TempDir::new().unwrap();
    let (probs, annots) = spurious_fixture(dir.path());
    let out = dir.path().join("t.json");
    let r = intake(&[
        "tune", p(&probs), p(&annots), "--grid-lo", "0.6", "--grid-hi", "0.9", "--grid-step", "0.1",
        "--out", p(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let v = json(&out);
    assert_eq!(v["grid_points"], 4);
    assert_eq!(v["threshold"], 0.8);
    let r = intake(&["tune", p(&probs), p(&annots), "--grid-step", "0", "--out", p(&out)]);
    assert_eq!(code(&r), 2);
}

#[test]
fn eval_fig5_style_fixture() {
    let dir = TempDir::new().unwrap();
    let dets = write(dir.path(), "d.csv", &detections_csv(&[3, 4, 15, 21]));
    let ann = write(dir.path(), "a.csv", &annotations_csv(&[(2, 5), (10, 13), (20, 23)]));
    let out = dir.path().join("e.json");
    let r = intake(&["eval", p(&dets), p(&ann), "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(stdout(&r).contains("TP 2 FP1 1 FP2 1 FN 1"));
    let v = json(&out);
    assert_eq!((v["tp"].clone(), v["fp1"].clone(), v["fp2"].clone(), v["fn"].clone()), (2.into(), 1.into(), 1.into(), 1.into()));
}

#[test]
fn eval_reproduces_slowfast_row() {
    // 991 events of 4 frames, 10 frames apart; 824 hit, 23 of them twice; 83 misses in gaps
    let (tp, fp1, fp2, fn_) = (824u64, 23u64, 83u64, 167u64);
    let n_events = tp + fn_;
    let spans: Vec<(u64, u64)> = (0..n_events).map(|k| (10 * k, 10 * k + 3)).collect();
    let mut frames = Vec::new();
    for k in 0..n_events {
        let base = 10 * k;
        if k < tp {
            frames.push(base);
            if k < fp1 {
                frames.push(base + 2);
            }
        }
        if k < fp2 {
            frames.push(base + 6);
        }
    }
    let dir = TempDir::new().unwrap();
    let dets = write(dir.path(), "d.csv", &detections_csv(&frames));
    let ann = write(dir.path(), "a.csv", &annotations_csv(&spans));
    let out = dir.path().join("e.json");
    let r = intake(&["eval", p(&dets), p(&ann), "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let v = json(&out);
    assert_eq!(v["tp"], tp);
    assert_eq!(v["fp1"], fp1);
    assert_eq!(v["fp2"], fp2);
    assert_eq!(v["fn"], fn_);
    assert!((v["f1"].as_f64().unwrap() - 0.858).abs() < 5e-4);
    assert!(stdout(&r).contains("F1 0.858"));
}

#[test]
fn eval_empty_detections_and_overlap() {
    let dir = TempDir::new().unwrap();
    let dets = write(dir.path(), "d.csv", "frame,time_s\n");
    let ann = write(dir.path(), "a.csv", &annotations_csv(&[(2, 5), (10, 13)]));
    let out = dir.path().join("e.json");
    let r = intake(&["eval", p(&dets), p(&ann), "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert_eq!(json(&out)["recall"], 0.0);

    let overlapping = write(dir.path(), "o.csv", &annotations_csv(&[(2, 6), (5, 9)]));
    let r = intake(&["eval", p(&dets), p(&overlapping), "--out", p(&out)]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("overlap"));
}

#[test]
fn params_reports_totals() {
    let r = intake(&["params", "small_2d_cnn_frame"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let text = stdout(&r);
    assert!(text.contains("(4.26 M)"), "{text}");
    assert!(text.contains("reference 4.26 M"));
    assert!(text.contains("128²×32"));

    let dir = TempDir::new().unwrap();
    let out = dir.path().join("p.json");
    let r = intake(&["params", "resnet50_two_stream", "--json", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let v = json(&out);
    let total = v["total_params"].as_f64().unwrap() / 1e6;
    assert!((total / 47.0 - 1.0).abs() < 0.03, "{total}");
    assert!(dir.path().join("p.json.manifest.json").exists());

    let r = intake(&["params", "alexnet"]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("resnet50_slowfast"));
}

fn report_fixture(dir: &Path, det_frames: &[u64]) -> [PathBuf; 3] {
    let mut v = vec![0.05; 64];
    v[12] = 0.9;
    v[40] = 0.8;
    [
        write(dir, "p.csv", &probs_csv(&v)),
        write(dir, "d.csv", &detections_csv(det_frames)),
        write(dir, "a.csv", &annotations_csv(&[(10, 14), (38, 43)])),
    ]
}

fn elements<'a>(doc: &'a roxmltree::Document, tag: &str) -> Vec<roxmltree::Node<'a, 'a>> {
    doc.descendants().filter(|n| n.has_tag_name(tag)).collect()
}

#[test]
fn report_renders_well_formed_svg() {
    let dir = TempDir::new().unwrap();
    let [probs, dets, ann] = report_fixture(dir.path(), &[12, 40]);
    let out = dir.path().join("r.svg");
    let r = intake(&["report", p(&probs), p(&dets), p(&ann), "--threshold", "0.5", "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let text = fs::read_to_string(&out).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let polylines = elements(&doc, "polyline");
    assert_eq!(polylines.len(), 1);
    assert_eq!(polylines[0].attribute("points").unwrap().split(' ').count(), 64);
    let markers: Vec<_> = elements(&doc, "circle")
        .into_iter()
        .filter(|n| n.attribute("class") == Some("detection"))
        .collect();
    assert_eq!(markers.len(), 2);
    let bands = elements(&doc, "rect")
        .into_iter()
        .filter(|n| n.attribute("class") == Some("gt"))
        .count();
    assert_eq!(bands, 2);
    let threshold = elements(&doc, "line")
        .into_iter()
        .filter(|n| n.attribute("class") == Some("threshold"))
        .count();
    assert_eq!(threshold, 1);
}

#[test]
fn report_without_detections_has_no_markers() {
    let dir = TempDir::new().unwrap();
    let [probs, dets, ann] = report_fixture(dir.path(), &[]);
    let out = dir.path().join("r.svg");
    let r = intake(&["report", p(&probs), p(&dets), p(&ann), "--threshold", "0.95", "--out", p(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let text = fs::read_to_string(&out).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert!(elements(&doc, "circle").is_empty());
}

#[test]
fn report_input_errors() {
    let dir = TempDir::new().unwrap();
    let [probs, dets, ann] = report_fixture(dir.path(), &[12, 40]);
    let out = dir.path().join("r.svg");
    let r = intake(&[
        "report", p(&probs), p(&dets), p(&ann), "--threshold", "0.5", "--fps", "24", "--out", p(&out),
    ]);
    assert_eq!(code(&r), 2, "detections were written at 8 fps");
    assert!(stderr(&r).contains("24 fps"));

    let missing = dir.path().join("nope.csv");
    let r = intake(&["report", p(&probs), p(&missing), p(&ann), "--threshold", "0.5", "--out", p(&out)]);
    assert_eq!(code(&r), 2);
    assert!(!out.exists());
}

#[test]
fn manifest_is_enough_to_rerun() {
    let dir = TempDir::new().unwrap();
    let mut v = vec![0.0; 40];
    v[5] = 0.9;
    v[30] = 0.7;
    let probs = write(dir.path(), "p.csv", &probs_csv(&v));
    let out = dir.path().join("d.csv");
    let r = intake(&["detect", p(&probs), "--threshold", "0.6", "--min-dist", "1.5", "--out", p(&out)]);
    assert_eq!(code(&r), 0);
    let first = fs::read(&out).unwrap();
    let manifest = json(&dir.path().join("d.csv.manifest.json"));
    let args: Vec<String> = manifest["args"]
        .as_array()
        .unwrap()
        .iter()
        .skip(1)
        .map(|a| a.as_str().unwrap().to_string())
        .collect();
    fs::remove_file(&out).unwrap();
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(code(&intake(&args)), 0);
    assert_eq!(fs::read(&out).unwrap(), first);
    assert_eq!(manifest["inputs"][0], p(&probs));
}
