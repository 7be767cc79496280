use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use surgtrack::io::{self, synth, write_track_file, Provenance, TrackFile};

fn surgtrack(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surgtrack"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("SURGTRACK_OUT")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = surgtrack(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Demo dataset of short videos, annotated every 5 frames.
fn demo(dir: &Path) {
    ok(dir, &["demo-synth", "--duration-s", "8", "--annotate-every", "5"]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(surgtrack(d, &["--help"]).status.code(), Some(0));
    assert_eq!(surgtrack(d, &[]).status.code(), Some(1));
    assert_eq!(surgtrack(d, &["track", p(&d.join("missing.jsonl"))]).status.code(), Some(1));

    let backwards = d.join("backwards.jsonl");
    std::fs::write(&backwards, "{\"video_id\":\"a\",\"frame\":2}\n{\"video_id\":\"a\",\"frame\":1}\n").unwrap();
    assert_eq!(surgtrack(d, &["track", p(&backwards)]).status.code(), Some(2));

    let unknown = d.join("unknown.jsonl");
    std::fs::write(
        &unknown,
        "{\"video_id\":\"a\",\"frame\":0,\"class\":\"scalpel\",\"box\":[0,0,10,10],\"score\":0.9}\n",
    )
    .unwrap();
    assert_eq!(surgtrack(d, &["track", p(&unknown)]).status.code(), Some(2));

    let config = d.join("bad.toml");
    std::fs::write(&config, "[tracker]\nmax_agee = 3\n").unwrap();
    assert_eq!(surgtrack(d, &["--config", p(&config), "bench", "--frames", "5"]).status.code(), Some(1));
}

#[test]
fn ideal_tracks_score_perfect_motp() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["demo-synth", "--duration-s", "4", "--annotate-every", "1"]);
    let data = synth::demo_dataset(0, 4.0, 25.0).unwrap();
    let videos = data
        .iter()
        .map(|v| v.video.ideal_tracks())
        .collect();
    let file = TrackFile {
        provenance: Provenance::new(&"ideal", 0).unwrap(),
        videos,
    };
    let tracks = d.join("ideal.jsonl");
    write_track_file(&tracks, &file).unwrap();
    ok(d, &["evaluate", p(&tracks), p(&d.join("annotations"))]);
    let eval = json(&d.join("evaluation.json"));
    for v in eval["result"]["videos"].as_array().unwrap() {
        assert_eq!(v["motp"].as_f64(), Some(100.0), "{v}");
        assert_eq!(v["mota"].as_f64(), Some(100.0), "{v}");
    }
}

#[test]
fn pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    demo(d);
    ok(d, &["track", p(&d.join("detections.jsonl"))]);
    let summary = ok(
        d,
        &[
            "evaluate",
            p(&d.join("tracks.jsonl")),
            p(&d.join("annotations")),
            "--detections",
            p(&d.join("detections.jsonl")),
        ],
    );
    assert!(summary.starts_with("MOTA "), "{summary}");
    let eval = json(&d.join("evaluation.json"));
    assert_eq!(eval["result"]["videos"].as_array().unwrap().len(), 15);
    ok(d, &["metrics", p(&d.join("tracks.jsonl")), "--detections", p(&d.join("detections.jsonl"))]);
    let rows = io::read_metrics_csv(
        std::fs::read(d.join("metrics.csv")).unwrap().as_slice(),
        "metrics.csv",
    )
    .unwrap();
    assert_eq!(rows.len(), 15);
    ok(d, &["correlate", p(&d.join("metrics.csv")), p(&d.join("mosats.csv"))]);
    assert!(d.join("correlation.csv").is_file());
    ok(d, &["folds", p(&d.join("annotations"))]);
    let folds = json(&d.join("folds.json"));
    assert_eq!(folds["result"]["assignment"].as_object().unwrap().len(), 15);
    ok(
        d,
        &[
            "classify",
            p(&d.join("metrics.csv")),
            p(&d.join("mosats.csv")),
            "--folds",
            p(&d.join("folds.json")),
        ],
    );
    let report = json(&d.join("classification.json"));
    assert_eq!(report["result"].as_array().unwrap().len(), 8);
}

#[test]
fn planted_table_classifies() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    demo(d);
    let stdout = ok(
        d,
        &[
            "classify",
            p(&d.join("planted_metrics.csv")),
            p(&d.join("planted_mosats.csv")),
            "--task",
            "binary",
            "--model",
            "mlp",
        ],
    );
    assert!(stdout.contains("binary_skill"), "{stdout}");
    let report = json(&d.join("classification.json"));
    let exp = &report["result"][0];
    assert_eq!(exp["baseline_percent"].as_f64().map(|b| b.round()), Some(67.0));
    let acc = exp["report"]["accuracy"]["mean"].as_f64().unwrap();
    assert!(acc >= 66.7 + 25.0, "{acc}");
    let csv = std::fs::read_to_string(d.join("classification.csv")).unwrap();
    assert!(csv.starts_with("# provenance: {"));
    assert!(csv.lines().any(|l| l.starts_with("dominant_class,66.7")), "{csv}");
}

#[test]
fn stream_and_batch_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    demo(d);
    let input = d.join("detections.jsonl");
    let batch_dir = d.join("batch");
    let stream_dir = d.join("stream");
    ok(&batch_dir, &["track", p(&input)]);
    let stdout = ok(&stream_dir, &["track", "--stream", p(&input)]);
    assert_eq!(
        std::fs::read(batch_dir.join("tracks.jsonl")).unwrap(),
        std::fs::read(stream_dir.join("tracks.jsonl")).unwrap()
    );
    let lines: Vec<Value> = stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 15 * 200);
    let stats = json(&stream_dir.join("stream_stats.json"));
    assert_eq!(stats["result"]["frames"].as_u64(), Some(3000));
    assert_eq!(stats["result"]["skipped"].as_u64(), Some(0));
}

#[test]
fn reruns_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    demo(d);
    let run = |name: &str| {
        let out = d.join(name);
        ok(&out, &["--seed", "7", "track", p(&d.join("detections.jsonl"))]);
        ok(&out, &["metrics", p(&out.join("tracks.jsonl"))]);
        ok(&out, &["--seed", "7", "classify", p(&out.join("metrics.csv")), p(&d.join("mosats.csv"))]);
        ["tracks.jsonl", "metrics.csv", "classification.json", "classification.csv"]
            .map(|f| std::fs::read(out.join(f)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn config_file_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = d.join("c.toml");
    std::fs::write(&config, "seed = 3\n[tracker]\nvariant = \"sort\"\n").unwrap();
    ok(d, &["--config", p(&config), "bench", "--frames", "50"]);
    let bench = json(&d.join("bench.json"));
    assert_eq!(bench["result"]["variant"], "sort");
    assert_eq!(bench["provenance"]["seed"].as_u64(), Some(3));
    ok(d, &["--config", p(&config), "bench", "--frames", "50", "--variant", "deepsort"]);
    assert_eq!(json(&d.join("bench.json"))["result"]["variant"], "deepsort");
}
