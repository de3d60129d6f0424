use std::fs;
use std::path::Path;

use reobj_core::dataset::{write_manifest, BBox, DetectionRecord, MaskBitmap};
use reobj_core::encoding::{write_tensor, FeatureMap};
use reobj_core::Raster;

fn reobj(args: &[&str]) -> i32 {
    let mut argv = vec!["reobj"];
    argv.extend_from_slice(args);
    reobj_cli::run(&argv)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(reobj(&["train", "--data", "x", "--no-such-flag"]), 2);
    assert_eq!(reobj(&["frobnicate"]), 2);
}

#[test]
fn missing_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(reobj(&["train", "--data", s(&dir.path().join("absent"))]), 1);
    assert_eq!(reobj(&["ingest", "--manifest", s(&dir.path().join("none.jsonl")), "--out", s(dir.path())]), 1);
}

#[test]
fn pipeline_writes_one_row_per_rank() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(reobj(&["synth", "--instances", "3", "--views", "6", "--out", s(d)]), 0);
    assert_eq!(reobj(&["features", "--data", s(d), "--extractor", "toy"]), 0);
    assert_eq!(reobj(&["train", "--mode", "concat", "--data", s(d), "--epochs", "2"]), 0);
    let model = d.join("model-concat.rmdl");
    let cmc = d.join("cmc.csv");
    assert_eq!(reobj(&["eval", "--mode", "concat", "--model", s(&model), "--data", s(d), "--cmc", s(&cmc)]), 0);

    let rows = csv_rows(&d.join("metrics.csv"));
    let ks: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(ks, ["1", "5", "20", "50"]);
    assert!(rows.iter().all(|r| r[0] == "concat" && r[6].len() == 64));

    let curve = csv_rows(&cmc);
    // two test views per instance in each of the three folds
    assert_eq!(curve.len(), 6);
    assert_eq!(curve.last().unwrap()[1], "1");

    // trained modes need a model and take no --stream
    assert_eq!(reobj(&["eval", "--mode", "full", "--data", s(d)]), 1);
    assert_eq!(reobj(&["eval", "--mode", "concat", "--stream", "fg", "--model", s(&model), "--data", s(d)]), 1);
    // a concat model cannot be evaluated as a full one
    assert_eq!(reobj(&["eval", "--mode", "full", "--model", s(&model), "--data", s(d)]), 1);
}

fn metrics_file(dir: &Path, name: &str, mode: &str, accs: &[(usize, f64)]) -> String {
    let mut text = String::from("mode,k,accuracy,probes,gallery,seed,config_digest\n");
    for (k, a) in accs {
        text.push_str(&format!("{mode},{k},{a},100,100,0,{mode}-digest\n"));
    }
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn report_reproduces_published_rank1_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let a = metrics_file(d, "a.csv", "no-train", &[(1, 0.5566), (5, 0.70), (20, 0.80), (50, 0.90)]);
    let b = metrics_file(d, "b.csv", "full", &[(1, 0.6075), (5, 0.71), (20, 0.81), (50, 0.91)]);
    let c = metrics_file(d, "c.csv", "concat", &[(1, 0.7785), (5, 0.85), (20, 0.92), (50, 0.95)]);
    let out = d.join("report");
    assert_eq!(reobj(&["report", &a, &b, &c, "--out", s(&out)]), 0);

    let rows = csv_rows(&out.join("report.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.len() == 1 + 3 + 1));
    let text = fs::read_to_string(out.join("report.txt")).unwrap();
    let rank1 = text.lines().find(|l| l.starts_with("rank-1 ")).unwrap();
    let cells: Vec<&str> = rank1.split_whitespace().skip(1).collect();
    assert_eq!(cells, ["55.66", "60.75", "77.85"]);

    let single = d.join("single");
    assert_eq!(reobj(&["report", &c, "--out", s(&single)]), 0);
    assert!(csv_rows(&single.join("report.csv")).iter().all(|r| r.len() == 3));
}

#[test]
fn report_rejects_mismatched_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let a = metrics_file(dir.path(), "a.csv", "full", &[(1, 0.5), (5, 0.7)]);
    let b = metrics_file(dir.path(), "b.csv", "concat", &[(1, 0.6)]);
    assert_eq!(reobj(&["report", &a, &b]), 1);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[synth]\ninstances = 3\nviews = 5\nimage_size = 96\nobject_radii = [12, 14]\n").unwrap();
    let out = dir.path().join("data");
    assert_eq!(reobj(&["synth", "--config", s(&cfg), "--views", "2", "--out", s(&out)]), 0);
    let lines = fs::read_to_string(out.join("manifest.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 3 * 2);
    let img = Raster::load(out.join("images/i000_v000.png")).unwrap();
    assert_eq!(img.width(), 96);

    fs::write(&cfg, "[synth]\ninstancez = 3\n").unwrap();
    assert_eq!(reobj(&["synth", "--config", s(&cfg), "--out", s(&out)]), 1);
}

fn detection(frame: &str, ordinal_box: (i64, i64), inst: &str, gt_shift: i64) -> DetectionRecord {
    let det = BBox::new(ordinal_box.0, ordinal_box.1, 10, 10).unwrap();
    DetectionRecord {
        record_id: String::new(),
        scene_id: "scene0".into(),
        frame_id: frame.into(),
        image_path: format!("{frame}.png"),
        class_label: "chair".into(),
        instance_id: inst.into(),
        det_bbox: det,
        gt_bbox: Some(BBox::new(ordinal_box.0 + gt_shift, ordinal_box.1, 10, 10).unwrap()),
        gt_label: Some("chair".into()),
        mask: MaskBitmap::filled(10, 10, true),
        score: 0.8,
    }
}

/// Mimics an external exporter: a manifest plus `<record_id>.<stream>.rten`
/// files in one directory.
#[test]
fn imported_features_flow_through_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let export = dir.path().join("export");
    fs::create_dir_all(&export).unwrap();
    let mut recs = Vec::new();
    for f in 0..3 {
        let frame = format!("frame{f}");
        Raster::filled(40, 40, [0.2, 0.4, 0.6]).save_png(export.join(format!("{frame}.png"))).unwrap();
        // the first detection of frame 0 misses its ground truth and is dropped
        recs.push(detection(&frame, (2, 2), "a", if f == 0 { 8 } else { 0 }));
        recs.push(detection(&frame, (20, 20), "b", 0));
    }
    write_manifest(export.join("manifest.jsonl"), &recs).unwrap();
    let ids = ["scene0__frame0__0", "scene0__frame0__1", "scene0__frame1__0", "scene0__frame1__1", "scene0__frame2__0", "scene0__frame2__1"];
    for (n, id) in ids.iter().enumerate() {
        for stream in ["fg", "bg", "full"] {
            let m = FeatureMap::new(7, 7, 4, (0..196).map(|i| (i * (n + 1)) as f32 * 0.01).collect()).unwrap();
            write_tensor(export.join(format!("{id}.{stream}.rten")), &m).unwrap();
        }
    }

    let data = dir.path().join("data");
    let manifest = export.join("manifest.jsonl");
    assert_eq!(reobj(&["ingest", "--manifest", s(&manifest), "--folds", "2", "--out", s(&data)]), 0);
    let kept = fs::read_to_string(data.join("records.jsonl")).unwrap();
    assert_eq!(kept.lines().count(), 5);
    // ids keep their original ordinals after the drop
    assert!(kept.contains("\"record_id\":\"scene0__frame0__1\""));
    assert!(!kept.contains("\"record_id\":\"scene0__frame0__0\""));

    assert_eq!(reobj(&["features", "--data", s(&data), "--extractor", "imported", "--channels", "4"]), 0);
    assert!(data.join("features/scene0__frame1__0.fg.rten").is_file());
    assert_eq!(reobj(&["eval", "--mode", "no-train", "--data", s(&data)]), 0);
    assert_eq!(csv_rows(&data.join("metrics.csv")).len(), 4);

    // a file with a different channel count is refused
    let m = FeatureMap::zeros(7, 7, 5);
    write_tensor(export.join("scene0__frame2__1.bg.rten"), &m).unwrap();
    assert_eq!(reobj(&["features", "--data", s(&data), "--extractor", "imported"]), 1);
}
