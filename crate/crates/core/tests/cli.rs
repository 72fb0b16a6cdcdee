use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fasthand::annotations::read_annotations;
use fasthand::heatmap::HeatmapStack;
use fasthand::image_io::load_rgb;
use fasthand::tensor::Tensor;

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");

fn fixture(name: &str) -> PathBuf {
    Path::new(FIXTURES).join(name)
}

fn fasthand(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fasthand"))
        .args(args)
        .env_remove("FASTHAND_THREADS")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tiny_model(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.fsth");
    let out = fasthand(&["init", "--config", "tiny", "--seed", "3", "--output", s(&path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn infer_then_eval_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let model = tiny_model(dir.path());
    let dets = dir.path().join("dets.txt");
    std::fs::write(&dets, "0 20 12 76 68\n").unwrap();
    let preds = dir.path().join("preds.txt");
    let overlays = dir.path().join("overlays");
    let out = fasthand(&[
        "infer", "--model", s(&model), "--config", "tiny",
        "--input", s(&fixture("synthetic_frame.ppm")),
        "--detections", s(&dets), "--output", s(&preds), "--overlay-dir", s(&overlays),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let recs = read_annotations(&preds).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!((recs[0].width, recs[0].height), (96, 72));
    assert!(recs[0].landmarks.iter().all(|(x, y)| x.is_finite() && y.is_finite()));
    assert_eq!(std::fs::read_dir(&overlays).unwrap().count(), 1);

    let out = fasthand(&["eval", "--input", s(&preds), "--ground-truth", s(&preds)]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("SSE 0.0000  EPE 0.0000  PCK@0.1 1.0000  PCK@0.2 1.0000"), "{stdout}");
}

#[test]
fn stabilization_flag_changes_only_jittered_streams() {
    let dir = tempfile::tempdir().unwrap();
    let model = tiny_model(dir.path());
    let frame = fixture("synthetic_frame.ppm");
    let run = |dets: &str, extra: &[&str]| {
        let d = dir.path().join("d.txt");
        std::fs::write(&d, dets).unwrap();
        let mut args = vec!["infer", "--model", s(&model), "--config", "tiny", "--detections", s(&d), "--input"];
        args.extend([s(&frame); 4]);
        args.extend_from_slice(extra);
        let out = fasthand(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let constant = "0 20 12 76 68\n1 20 12 76 68\n2 20 12 76 68\n3 20 12 76 68\n";
    assert_eq!(run(constant, &[]), run(constant, &["--no-stabilize"]));
    let jittered = "0 20 12 76 68\n1 26 9 80 66\n2 17 15 73 71\n3 23 10 79 64\n";
    assert_ne!(run(jittered, &[]), run(jittered, &["--no-stabilize"]));
    // determinism
    assert_eq!(run(jittered, &[]), run(jittered, &[]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.fsth");
    let out = fasthand(&["infer", "--model", s(&missing), "--input", s(&fixture("synthetic_frame.ppm"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));

    assert_eq!(fasthand(&["infer"]).status.code(), Some(1));
    assert_eq!(fasthand(&["bogus"]).status.code(), Some(1));
    let gt = fixture("eval_gt.txt");
    assert_eq!(fasthand(&["eval", "--input", s(&gt), "--ground-truth", s(&gt), "--sigma", "0"]).status.code(), Some(1));

    // prediction count mismatch is a validation failure naming the sample
    let short = dir.path().join("short.txt");
    let text = std::fs::read_to_string(fixture("eval_pred.txt")).unwrap();
    std::fs::write(&short, text.lines().take(2).collect::<Vec<_>>().join("\n")).unwrap();
    let out = fasthand(&["eval", "--input", s(&short), "--ground-truth", s(&gt)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sample 2"));

    // every frame unreadable -> failure
    let model = tiny_model(dir.path());
    let out = fasthand(&["infer", "--model", s(&model), "--config", "tiny", "--input", s(&dir.path().join("nope.png"))]);
    assert_eq!(out.status.code(), Some(2));
    // one bad frame among good ones is reported but not fatal
    let out = fasthand(&[
        "infer", "--model", s(&model), "--config", "tiny",
        "--input", s(&dir.path().join("nope.png")), s(&fixture("synthetic_frame.ppm")),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1);

    // weights for a different schedule
    let out = fasthand(&["bench", "--model", s(&model), "--iterations", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_fixture_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.txt");
    let out = fasthand(&[
        "eval", "--input", s(&fixture("eval_pred.txt")), "--ground-truth", s(&fixture("eval_gt.txt")),
        "--sigma", "0.1", "--sigma", "0.2", "--sigma", "0.3", "--output", s(&report),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&report).unwrap();
    let value = |key: &str| -> f64 {
        text.lines().find_map(|l| l.strip_prefix(&format!("{key}: "))).unwrap().parse().unwrap()
    };
    assert!((value("sse") - 0.12558).abs() <= 1e-9);
    assert!((value("epe") - 0.053173076923076906).abs() <= 1e-9);
    let rows = [value("pck@0.1"), value("pck@0.2"), value("pck@0.3")];
    assert!(rows[0] <= rows[1] && rows[1] <= rows[2]);
}

#[test]
fn bench_reports_four_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let model = tiny_model(dir.path());
    let out = fasthand(&["bench", "--model", s(&model), "--config", "tiny", "--iterations", "5", "--warmup", "1", "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let get = |k: &str| -> f64 { text.lines().find_map(|l| l.strip_prefix(&format!("{k}: "))).unwrap().parse().unwrap() };
    let (mean, median, p95, fps) = (get("mean_ms"), get("median_ms"), get("p95_ms"), get("fps"));
    assert!(mean > 0.0 && median > 0.0 && p95 >= median);
    // printed values are rounded: mean to 1e-3 ms, fps to 1e-2
    let bound = 1000.0 / (mean - 5e-4) - 1000.0 / (mean + 5e-4) + 0.01;
    assert!((fps - 1000.0 / mean).abs() <= bound, "{fps} vs {}", 1000.0 / mean);
}

#[test]
fn gen_dataset_projects_and_augments() {
    let dir = tempfile::tempdir().unwrap();
    let plain = dir.path().join("plain.txt");
    let map = fixture("synthetic_vertex_map.txt");
    let mesh = fixture("synthetic_mesh.jsonl");
    let out = fasthand(&["gen-dataset", "--input", s(&mesh), "--vertex-map", s(&map), "--output", s(&plain)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let recs = read_annotations(&plain).unwrap();
    assert_eq!(recs.len(), 1);
    assert!((recs[0].landmarks[1].0 - 42.0).abs() < 1e-6 && (recs[0].landmarks[1].1 - 52.0).abs() < 1e-6);

    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        std::fs::create_dir_all(&out_dir).unwrap();
        let ann = out_dir.join("aug.txt");
        let out = fasthand(&[
            "gen-dataset", "--input", s(&mesh), "--vertex-map", s(&map), "--output", s(&ann),
            "--augment", "10", "--seed", "9", "--threads", "3",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (out_dir, ann)
    };
    let (out_a, ann_a) = run("a");
    let (_, ann_b) = run("b");
    let recs = read_annotations(&ann_a).unwrap();
    assert_eq!(recs.len(), 10);
    for r in &recs {
        let img = load_rgb(out_a.join(&r.image)).unwrap();
        assert_eq!(img.shape(), (256, 256, 3));
    }
    assert_eq!(std::fs::read(&ann_a).unwrap(), std::fs::read(&ann_b).unwrap());

    let out = fasthand(&["gen-dataset", "--input", s(&mesh), "--vertex-map", s(&map), "--output", s(&plain), "--intrinsics", "1,2,3"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn render_delta_heatmap_lights_one_pixel() {
    let dir = tempfile::tempdir().unwrap();
    let mut t = Tensor::zeros(64, 64, 21).unwrap();
    t.set(33, 17, 8, 1.0);
    let hm = dir.path().join("delta.fsth");
    HeatmapStack::new(t).unwrap().save(&hm).unwrap();
    let png = dir.path().join("delta.png");
    let out = fasthand(&["render", "--heatmaps", s(&hm), "--output", s(&png)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let img = load_rgb(&png).unwrap();
    let lit: Vec<(usize, usize)> = (0..64)
        .flat_map(|y| (0..64).map(move |x| (y, x)))
        .filter(|&(y, x)| img.pixel(y, x).iter().any(|&v| v > 0.0))
        .collect();
    assert_eq!(lit, vec![(33, 17)]);
    assert_eq!(img.pixel(33, 17), &[1.0, 0.0, 0.0]);

    let drawn = dir.path().join("kp.png");
    let out = fasthand(&["render", "--keypoints", s(&fixture("eval_gt.txt")), "--record", "4", "--output", s(&drawn)]);
    assert!(out.status.success());
    assert_eq!(load_rgb(&drawn).unwrap().shape(), (100, 200, 3));
    let out = fasthand(&["render", "--keypoints", s(&fixture("eval_gt.txt")), "--record", "9", "--output", s(&drawn)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.fsth");
    let out = Command::new(env!("CARGO_BIN_EXE_fasthand"))
        .args(["init", "--config", "tiny", "--output", s(&path)])
        .env("FASTHAND_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_fasthand"))
        .args(["init", "--config", "tiny", "--output", s(&path)])
        .env("FASTHAND_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
