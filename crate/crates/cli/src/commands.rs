use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use surgtrack::eval::{
    aggregate, evaluate_tracking, forward_fill, fps_benchmark, miou, EvalReport, GroundTruthFrame, MonotonicClock,
    SegmentationFrame,
};
use surgtrack::geometry::{rle_encode, Bitmap, BoundingBox, MaskRLE};
use surgtrack::io::{
    self, ingest_annotations, path_digest, read_detections_file, read_metrics_csv, read_mosats_file,
    read_track_file, read_video_counts, stream_track, synth, write_png_index_map, write_track_file, Provenance,
    TrackFile, VideoStream,
};
use surgtrack::skill::{extract_metrics, SkillMetricVector, VideoMeta};
use surgtrack::stats::{
    build_folds, correlate, cross_validate, dominant_class_baseline, stratified_folds, ClassifierKind, CvReport,
    MeanStd, Task, VideoCounts,
};
use surgtrack::tracking::{self, TrackSet, Variant};

use crate::settings::{self, Settings};
use crate::{Cli, Command, TrackerArgs};

/// Output directory plus the provenance every file in it carries.
struct Out {
    dir: PathBuf,
    provenance: Provenance,
}

impl Out {
    fn new(dir: &Path, settings: &Settings, inputs: &[(&str, &Path)]) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut provenance = Provenance::new(settings, settings.seed)?;
        for (name, path) in inputs {
            let digest = if path.as_os_str() == "-" {
                "stdin".to_string()
            } else {
                path_digest(path)?
            };
            provenance = provenance.with_input(*name, digest);
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            provenance,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn json<T: Serialize>(&self, name: &str, result: &T) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            provenance: &'a Provenance,
            result: &'a T,
        }
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        serde_json::to_writer_pretty(
            &mut w,
            &Doc {
                provenance: &self.provenance,
                result,
            },
        )?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(path)
    }

    /// CSV preceded by a `#` provenance comment line.
    fn csv(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> surgtrack::Result<()>) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(w, "# provenance: {}", serde_json::to_string(&self.provenance)?)?;
        body(&mut w)?;
        w.flush()?;
        Ok(path)
    }
}

fn load(cli: &Cli, tracker: Option<&TrackerArgs>) -> Result<Settings> {
    let variant = tracker.and_then(|t| t.variant).map(Variant::from);
    let mut s = settings::load(cli.config.as_deref(), variant, cli.seed)?;
    if let Some(n) = tracker.and_then(|t| t.detection_interval) {
        s.tracker.detection_interval = n;
        s.tracker.validate()?;
    }
    Ok(s)
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Track { input, tracker, stream } => {
            let s = load(&cli, Some(tracker))?;
            track(&s, &cli.out, input, *stream)
        }
        Command::Evaluate {
            tracks,
            annotations,
            detections,
        } => evaluate(&load(&cli, None)?, &cli.out, tracks, annotations, detections.as_deref()),
        Command::Metrics { tracks, detections } => metrics(&load(&cli, None)?, &cli.out, tracks, detections.as_deref()),
        Command::Correlate { metrics, mosats } => correlate_cmd(&load(&cli, None)?, &cli.out, metrics, mosats),
        Command::Classify {
            metrics,
            mosats,
            task,
            model,
            k,
            folds,
        } => {
            let mut s = load(&cli, None)?;
            if let Some(k) = k {
                s.k_features = *k;
            }
            classify(&s, &cli.out, metrics, mosats, task, model, folds.as_deref())
        }
        Command::Folds { input } => folds(&load(&cli, None)?, &cli.out, input),
        Command::Bench { frames, tracker } => bench(&load(&cli, Some(tracker))?, &cli.out, *frames),
        Command::DemoSynth {
            duration_s,
            annotate_every,
        } => demo_synth(&load(&cli, None)?, &cli.out, *duration_s, *annotate_every),
    }
}

fn track(s: &Settings, out_dir: &Path, input: &Path, stream: bool) -> Result<()> {
    let out = Out::new(out_dir, s, &[("detections", input)])?;
    let registry = &s.tracker.registry;
    let mut videos = if stream {
        let reader: Box<dyn BufRead + Send> = if input.as_os_str() == "-" {
            Box::new(BufReader::new(std::io::stdin()))
        } else {
            Box::new(BufReader::new(
                File::open(input).with_context(|| format!("opening {}", input.display()))?,
            ))
        };
        let outcome = stream_track(reader, std::io::stdout().lock(), &s.tracker, registry)?;
        log::info!(
            "streamed {} frames ({} skipped lines) at {:.1} FPS",
            outcome.stats.frames,
            outcome.stats.skipped,
            outcome.stats.wall_fps
        );
        out.json("stream_stats.json", &outcome.stats)?;
        outcome.track_sets
    } else {
        let streams = if input.as_os_str() == "-" {
            io::read_detection_streams(BufReader::new(std::io::stdin()), "<stdin>", registry)?
        } else {
            read_detections_file(input, registry)?
        };
        streams
            .into_iter()
            .map(|v| {
                let mut set = tracking::run(s.tracker.clone(), v.frames)?;
                set.video_id = v.video_id;
                Ok(set)
            })
            .collect::<surgtrack::Result<Vec<_>>>()?
    };
    for v in &mut videos {
        v.strip_appearance();
    }
    let file = TrackFile {
        provenance: out.provenance.clone(),
        videos,
    };
    let path = out.path("tracks.jsonl");
    write_track_file(&path, &file)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Ground truth over every frame from 0 to the last tracked or annotated one.
fn complete(frames: &[GroundTruthFrame], frame_count: Option<u64>, tracked: &TrackSet) -> Vec<GroundTruthFrame> {
    let last = frames
        .last()
        .map(|f| f.frame_index + 1)
        .max(tracked.frames.last().map(|f| f + 1))
        .unwrap_or(0);
    let n = frame_count.unwrap_or(last);
    let mut by_frame: BTreeMap<u64, &GroundTruthFrame> = frames.iter().map(|f| (f.frame_index, f)).collect();
    (0..n)
        .map(|f| by_frame.remove(&f).cloned().unwrap_or_else(|| GroundTruthFrame::unannotated(f)))
        .collect()
}

fn box_mask(b: &BoundingBox, width: u32, height: u32) -> surgtrack::Result<MaskRLE> {
    let mut bitmap = Bitmap::new(width, height)?;
    let x0 = b.left().round().clamp(0.0, f64::from(width)) as u32;
    let x1 = b.right().round().clamp(0.0, f64::from(width)) as u32;
    let y0 = b.top().round().clamp(0.0, f64::from(height)) as u32;
    let y1 = b.bottom().round().clamp(0.0, f64::from(height)) as u32;
    for y in y0..y1 {
        for x in x0..x1 {
            bitmap.set(x, y, true);
        }
    }
    Ok(rle_encode(&bitmap))
}

/// Segmentation pairs of the annotated frames; the prediction is the most
/// confident detection, its mask or else its box.
fn segmentation_frames(gt: &[GroundTruthFrame], detections: &VideoStream) -> Result<Vec<SegmentationFrame>> {
    let Some((w, h)) = gt.iter().find_map(|f| f.mask.as_ref().map(|m| (m.width(), m.height()))) else {
        return Ok(Vec::new());
    };
    let by_frame: BTreeMap<u64, _> = detections.frames.iter().map(|f| (f.frame_index, f)).collect();
    let mut out = Vec::new();
    for f in gt.iter().filter(|f| f.annotated) {
        let best = by_frame.get(&f.frame_index).and_then(|fi| {
            fi.detections
                .iter()
                .max_by(|a, b| a.confidence.total_cmp(&b.confidence))
        });
        let pred_mask = match best {
            Some(d) => match &d.mask {
                Some(m) if (m.width(), m.height()) == (w, h) => m.clone(),
                _ => box_mask(&d.bbox, w, h)?,
            },
            None => MaskRLE::empty(w, h)?,
        };
        out.push(SegmentationFrame {
            gt_class: f.class_id,
            gt_mask: f.mask.clone().map_or_else(|| MaskRLE::empty(w, h), Ok)?,
            pred_class: best.map(|d| d.class_id),
            pred_mask,
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct Evaluation {
    videos: Vec<EvalReport>,
    aggregate: surgtrack::eval::AggregateReport,
}

fn evaluate(s: &Settings, out_dir: &Path, tracks: &Path, gt_dir: &Path, detections: Option<&Path>) -> Result<()> {
    let mut inputs = vec![("tracks", tracks), ("annotations", gt_dir)];
    if let Some(d) = detections {
        inputs.push(("detections", d));
    }
    let out = Out::new(out_dir, s, &inputs)?;
    let file = read_track_file(tracks)?;
    let gt = ingest_annotations(gt_dir)?;
    let dets = match detections {
        Some(d) => read_detections_file(d, &gt.registry)?,
        None => Vec::new(),
    };
    let mut reports = Vec::new();
    for set in &file.videos {
        let video = gt
            .video(&set.video_id)
            .with_context(|| format!("no annotations for video '{}'", set.video_id))?;
        let frames = complete(&video.frames, video.frame_count, set);
        let filled = forward_fill(&frames)?;
        let e = evaluate_tracking(set, &filled, s.mot);
        let mut report = EvalReport {
            video_id: set.video_id.clone(),
            motp: e.motp,
            mota: e.mota,
            counts: e.counts,
            ..Default::default()
        };
        if let Some(d) = dets.iter().find(|d| d.video_id == set.video_id) {
            let seg = segmentation_frames(&frames, d)?;
            if !seg.is_empty() {
                let m = miou(&seg, &gt.registry)?;
                report.miou_per_class = m.per_class;
                report.miou_all = m.all_instruments;
                report.miou_background = m.background;
            }
        }
        reports.push(report);
    }
    let agg = aggregate(&reports);
    out.csv("evaluation.csv", |w| {
        let f = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
        writeln!(w, "video_id,mota,motp,miou_all,miou_background,gt,false_positives,false_negatives,id_switches")?;
        for r in &reports {
            let c = &r.counts;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.video_id,
                f(r.mota),
                f(r.motp),
                f(r.miou_all),
                f(r.miou_background),
                c.gt,
                c.false_positives,
                c.false_negatives,
                c.id_switches
            )?;
        }
        Ok(())
    })?;
    out.json(
        "evaluation.json",
        &Evaluation {
            videos: reports,
            aggregate: agg.clone(),
        },
    )?;
    let show = |m: Option<MeanStd>| m.map_or("n/a".to_string(), |m| m.to_string());
    println!("MOTA {}  MOTP {}  mIoU {}", show(agg.mota), show(agg.motp), show(agg.miou_all));
    Ok(())
}

fn metrics(s: &Settings, out_dir: &Path, tracks: &Path, detections: Option<&Path>) -> Result<()> {
    let mut inputs = vec![("tracks", tracks)];
    if let Some(d) = detections {
        inputs.push(("detections", d));
    }
    let out = Out::new(out_dir, s, &inputs)?;
    let file = read_track_file(tracks)?;
    let dets = match detections {
        Some(d) => read_detections_file(d, &s.tracker.registry)?,
        None => Vec::new(),
    };
    let mut rows = Vec::new();
    for set in &file.videos {
        let frame_count = set
            .frames
            .last()
            .map(|f| f + 1)
            .with_context(|| format!("video '{}' has no frames", set.video_id))?;
        let mut meta = VideoMeta::new(set.video_id.clone(), s.fps, frame_count)?;
        meta.registry = s.tracker.registry.clone();
        if let Some(d) = dets.iter().find(|d| d.video_id == set.video_id) {
            meta.transforms = d.frames.iter().filter_map(|f| f.transform.map(|t| (f.frame_index, t))).collect();
        }
        rows.push(extract_metrics(set, &meta, &s.skill)?);
    }
    out.csv("metrics.csv", |w| io::write_metrics_csv(w, &rows))?;
    println!("{} videos", rows.len());
    Ok(())
}

fn read_metrics(path: &Path) -> Result<Vec<SkillMetricVector>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_metrics_csv(BufReader::new(f), &path.display().to_string())?)
}

fn correlate_cmd(s: &Settings, out_dir: &Path, metrics: &Path, mosats: &Path) -> Result<()> {
    let out = Out::new(out_dir, s, &[("metrics", metrics), ("mosats", mosats)])?;
    let table = correlate(&read_metrics(metrics)?, &read_mosats_file(mosats)?)?;
    out.csv("correlation.csv", |w| io::write_correlation_csv(w, &table))?;
    out.json("correlation.json", &table)?;
    Ok(())
}

#[derive(Serialize)]
struct Experiment {
    task: Task,
    baseline_percent: Option<f64>,
    report: CvReport,
}

#[allow(clippy::too_many_arguments)]
fn classify(
    s: &Settings,
    out_dir: &Path,
    metrics: &Path,
    mosats: &Path,
    task: &str,
    model: &str,
    folds_file: Option<&Path>,
) -> Result<()> {
    let mut inputs = vec![("metrics", metrics), ("mosats", mosats)];
    if let Some(f) = folds_file {
        inputs.push(("folds", f));
    }
    let out = Out::new(out_dir, s, &inputs)?;
    let tasks = if task == "all" {
        vec![Task::MulticlassMosats, Task::BinarySkill]
    } else {
        vec![task.parse()?]
    };
    let kinds = if model == "all" {
        ClassifierKind::ALL.to_vec()
    } else {
        vec![model.parse()?]
    };
    let rows = read_metrics(metrics)?;
    let all = read_mosats_file(mosats)?;
    let assessments = rows
        .iter()
        .map(|r| {
            all.iter()
                .find(|a| a.video_id == r.video_id)
                .cloned()
                .with_context(|| format!("no assessment for video '{}'", r.video_id))
        })
        .collect::<Result<Vec<_>>>()?;
    let x = SkillMetricVector::matrix(&rows);
    let fixed_folds = match folds_file {
        Some(p) => {
            let doc: serde_json::Value = serde_json::from_reader(BufReader::new(
                File::open(p).with_context(|| format!("opening {}", p.display()))?,
            ))
            .with_context(|| format!("parsing {}", p.display()))?;
            let assignment: BTreeMap<String, usize> = serde_json::from_value(doc["result"]["assignment"].clone())
                .with_context(|| format!("{}: no fold assignment", p.display()))?;
            let folds = rows
                .iter()
                .map(|r| {
                    assignment
                        .get(&r.video_id)
                        .copied()
                        .with_context(|| format!("video '{}' has no fold", r.video_id))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(folds)
        }
        None => None,
    };
    let mut experiments = Vec::new();
    for &t in &tasks {
        let labels = t.labels(&assessments);
        let folds = fixed_folds.clone().unwrap_or_else(|| stratified_folds(&labels, s.folds.folds));
        for &kind in &kinds {
            let report = cross_validate(&x, &labels, &folds, kind, s.k_features, &s.classifier)?;
            experiments.push(Experiment {
                task: t,
                baseline_percent: dominant_class_baseline(&labels),
                report,
            });
        }
    }
    out.json("classification.json", &experiments)?;
    out.csv("classification.csv", |w| {
        write!(w, "model")?;
        for t in &tasks {
            write!(w, ",{t}")?;
        }
        writeln!(w)?;
        let cell = |t: Task, kind: ClassifierKind| {
            experiments
                .iter()
                .find(|e| e.task == t && e.report.kind == kind)
                .and_then(|e| e.report.accuracy)
                .map_or(String::new(), |m| m.to_string())
        };
        for &kind in &kinds {
            write!(w, "{kind}")?;
            for &t in &tasks {
                write!(w, ",{}", cell(t, kind))?;
            }
            writeln!(w)?;
        }
        write!(w, "dominant_class")?;
        for &t in &tasks {
            let b = dominant_class_baseline(&t.labels(&assessments));
            write!(w, ",{}", b.map_or(String::new(), |b| format!("{b:.1}")))?;
        }
        writeln!(w)?;
        Ok(())
    })?;
    for e in &experiments {
        let acc = e.report.accuracy.map_or("n/a".into(), |m| m.to_string());
        println!("{:<18} {:<7} {acc}", e.task.to_string(), e.report.kind.to_string());
    }
    Ok(())
}

fn folds(s: &Settings, out_dir: &Path, input: &Path) -> Result<()> {
    let out = Out::new(out_dir, s, &[("input", input)])?;
    let videos: Vec<VideoCounts> = if input.is_dir() {
        let set = ingest_annotations(input)?;
        set.videos
            .iter()
            .map(|v| {
                let mut counts = BTreeMap::new();
                for c in v.annotated().filter_map(|f| f.class_id) {
                    *counts.entry(c).or_insert(0) += 1;
                }
                VideoCounts {
                    video_id: v.video_id.clone(),
                    counts,
                }
            })
            .collect()
    } else {
        let f = File::open(input).with_context(|| format!("opening {}", input.display()))?;
        read_video_counts(f, &input.display().to_string(), &s.tracker.registry)?
    };
    let spec = build_folds(&videos, s.seed, &s.folds)?;
    out.json("folds.json", &spec)?;
    for (f, counts) in spec.resampled_counts().iter().enumerate() {
        let members: Vec<&str> = spec.assignment.iter().filter(|(_, &k)| k == f).map(|(v, _)| v.as_str()).collect();
        println!("fold {f}: {} videos, {counts:?}", members.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct Bench {
    variant: Variant,
    frames: u64,
    objects: usize,
    /// Wall time of batch tracking, parse excluded.
    batch_seconds: f64,
    step: surgtrack::eval::FpsReport,
    stream: surgtrack::io::StreamStats,
}

fn bench(s: &Settings, out_dir: &Path, frames: u64) -> Result<()> {
    let out = Out::new(out_dir, s, &[])?;
    let config = synth::MultiObjectConfig::default();
    let stream = synth::multi_object_stream(&config, frames, s.seed);
    let start = Instant::now();
    tracking::run(s.tracker.clone(), stream.iter().cloned())?;
    let batch_seconds = start.elapsed().as_secs_f64();
    let step = fps_benchmark(s.tracker.clone(), &stream, &mut MonotonicClock::new())?;
    let mut text = Vec::new();
    io::write_detection_records(&mut text, &synth::to_records("bench", &stream, &s.tracker.registry))?;
    let streamed = stream_track(text.as_slice(), std::io::sink(), &s.tracker, &s.tracker.registry)?;
    println!(
        "{}: {frames} frames, batch {batch_seconds:.2} s, step {:.1}±{:.1} FPS (p99 {:.2} ms), stream {:.1} FPS",
        s.tracker.variant, step.fps_mean, step.fps_std, step.latency_p99_ms, streamed.stats.wall_fps
    );
    out.json(
        "bench.json",
        &Bench {
            variant: s.tracker.variant,
            frames,
            objects: config.objects,
            batch_seconds,
            step,
            stream: streamed.stats,
        },
    )?;
    Ok(())
}

fn demo_synth(s: &Settings, out_dir: &Path, duration_s: f64, annotate_every: Option<u64>) -> Result<()> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        bail!("duration must be positive");
    }
    let out = Out::new(out_dir, s, &[])?;
    let every = annotate_every.unwrap_or(s.fps.round().max(1.0) as u64);
    let data = synth::demo_dataset(s.seed, duration_s, s.fps)?;
    let registry = &s.tracker.registry;

    let mut records = Vec::new();
    for d in &data {
        records.extend(synth::to_records(&d.video.video_id, &d.video.detections(), registry));
    }
    let path = out.path("detections.jsonl");
    io::write_detection_records(BufWriter::new(File::create(&path)?), &records)?;

    let gt = out.path("annotations");
    let mut manifest = serde_json::Map::new();
    for d in &data {
        let dir = gt.join(&d.video.video_id);
        std::fs::create_dir_all(&dir)?;
        for f in (0..d.video.frame_count).step_by(every as usize) {
            write_png_index_map(
                &dir.join(format!("{f}.png")),
                synth::FRAME_WIDTH,
                synth::FRAME_HEIGHT,
                &d.video.index_map(f),
            )?;
        }
        manifest.insert(d.video.video_id.clone(), serde_json::json!({ "frame_count": d.video.frame_count }));
    }
    let manifest = serde_json::json!({ "provenance": out.provenance, "videos": manifest });
    std::fs::write(gt.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;

    let assessments: Vec<_> = data.iter().map(|d| d.assessment.clone()).collect();
    out.csv("mosats.csv", |w| io::write_mosats(w, &assessments))?;
    let planted = synth::planted_table(s.seed, 4.0)?;
    out.csv("planted_metrics.csv", |w| io::write_metrics_csv(w, &planted.metrics))?;
    out.csv("planted_mosats.csv", |w| io::write_mosats(w, &planted.assessments))?;
    println!("wrote {} videos to {}", data.len(), out_dir.display());
    Ok(())
}
