use std::io::{BufRead, Write};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{DetectionRecord, FrameOutputLine};
use crate::classes::ClassRegistry;
use crate::error::{Error, Result};
use crate::eval::FpsReport;
use crate::tracking::{FrameInput, Tracker, TrackerConfig, TrackSet};

/// Per-frame processing budget at the native 25 FPS.
pub const FRAME_BUDGET: Duration = Duration::from_millis(40);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamStats {
    pub frames: usize,
    /// Malformed input lines that were logged and dropped.
    pub skipped: usize,
    /// Frames whose close-to-emit latency exceeded [`FRAME_BUDGET`].
    pub over_budget: usize,
    /// Close-to-emit latency of each frame; `None` for an empty stream.
    pub latency: Option<FpsReport>,
    pub wall_seconds: f64,
    pub wall_fps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutcome {
    pub stats: StreamStats,
    /// One track set per video, in order of first appearance.
    pub track_sets: Vec<TrackSet>,
}

struct Closed {
    video_id: String,
    frame: FrameInput,
    closed_at: Instant,
}

struct Emitted {
    line: FrameOutputLine,
    closed_at: Instant,
}

/// Parse stage. A video's open frame is closed when a later frame of the
/// same video arrives, or at end of input.
fn parse_stage<R: BufRead>(reader: R, registry: &ClassRegistry, tx: SyncSender<Result<Closed>>) -> usize {
    let mut open: Vec<(String, FrameInput)> = Vec::new();
    let mut skipped = 0;
    let close = |video_id: String, frame: FrameInput| {
        tx.send(Ok(Closed {
            video_id,
            frame,
            closed_at: Instant::now(),
        }))
        .is_ok()
    };
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                let _ = tx.send(Err(Error::Parse {
                    path: "<stdin>".into(),
                    line: lineno,
                    message: e.to_string(),
                }));
                return skipped;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let parsed = DetectionRecord::parse(&line).and_then(|r| r.detection(registry).map(|d| (r, d)));
        let (record, detection) = match parsed {
            Ok(x) => x,
            Err(e) if e.is_invariant_violation() => {
                log::error!("line {lineno}: {e}");
                let _ = tx.send(Err(e));
                return skipped;
            }
            Err(e) => {
                log::warn!("line {lineno}: skipped: {e}");
                skipped += 1;
                continue;
            }
        };
        let fresh = FrameInput {
            frame_index: record.frame,
            detections: detection.into_iter().collect(),
            transform: record.transform,
        };
        match open.iter_mut().find(|(v, _)| *v == record.video_id) {
            None => open.push((record.video_id, fresh)),
            Some((_, cur)) if cur.frame_index == record.frame => {
                cur.detections.extend(fresh.detections);
                if fresh.transform.is_some() {
                    cur.transform = fresh.transform;
                }
            }
            Some((_, cur)) if cur.frame_index > record.frame => {
                log::error!("line {lineno}: frame {} after frame {}", record.frame, cur.frame_index);
                let _ = tx.send(Err(Error::OutOfOrderFrame {
                    previous: cur.frame_index,
                    got: record.frame,
                }));
                return skipped;
            }
            Some((_, cur)) => {
                let done = std::mem::replace(cur, fresh);
                if !close(record.video_id, done) {
                    return skipped;
                }
            }
        }
    }
    for (video_id, frame) in open {
        if !close(video_id, frame) {
            break;
        }
    }
    skipped
}

/// Track stage: the only owner of tracker state, one tracker per video.
fn track_stage(
    config: &TrackerConfig,
    rx: Receiver<Result<Closed>>,
    tx: SyncSender<Result<Emitted>>,
) -> Vec<TrackSet> {
    let mut trackers: Vec<(String, Tracker)> = Vec::new();
    for msg in rx {
        let closed = match msg {
            Ok(c) => c,
            Err(e) => {
                let _ = tx.send(Err(e));
                break;
            }
        };
        let k = match trackers.iter().position(|(v, _)| *v == closed.video_id) {
            Some(k) => k,
            None => match Tracker::new(config.clone()) {
                Ok(t) => {
                    trackers.push((closed.video_id.clone(), t.with_video_id(closed.video_id.clone())));
                    trackers.len() - 1
                }
                Err(e) => {
                    let _ = tx.send(Err(e));
                    break;
                }
            },
        };
        let f = &closed.frame;
        let result = trackers[k].1.step(f.frame_index, &f.detections, f.transform.as_ref());
        let msg = result.map(|tracks| Emitted {
            line: FrameOutputLine {
                video_id: closed.video_id,
                frame: f.frame_index,
                tracks,
            },
            closed_at: closed.closed_at,
        });
        let failed = msg.is_err();
        if tx.send(msg).is_err() || failed {
            break;
        }
    }
    trackers.into_iter().map(|(_, t)| t.finish()).collect()
}

/// Runs parse, track and emit as three threads joined by rendezvous
/// channels, so at most three frames are in flight. Each frame produces one
/// [`FrameOutputLine`], flushed as soon as it is written. Malformed lines
/// are skipped and counted; out-of-order frames, unknown classes and
/// embedding-dimension changes abort the stream.
pub fn stream_track<R, W>(
    reader: R,
    mut writer: W,
    config: &TrackerConfig,
    registry: &ClassRegistry,
) -> Result<StreamOutcome>
where
    R: BufRead + Send,
    W: Write,
{
    config.validate()?;
    let start = Instant::now();
    let (parsed_tx, parsed_rx) = sync_channel::<Result<Closed>>(0);
    let (out_tx, out_rx) = sync_channel::<Result<Emitted>>(0);
    thread::scope(|s| {
        let parser = s.spawn(move || parse_stage(reader, registry, parsed_tx));
        let tracker = s.spawn(move || track_stage(config, parsed_rx, out_tx));

        let mut latencies = Vec::new();
        let mut failure = None;
        for msg in &out_rx {
            let emitted = match msg {
                Ok(e) => e,
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            };
            let written = serde_json::to_writer(&mut writer, &emitted.line)
                .map_err(Error::from)
                .and_then(|()| writer.write_all(b"\n").map_err(Error::from))
                .and_then(|()| writer.flush().map_err(Error::from));
            if let Err(e) = written {
                failure = Some(e);
                break;
            }
            latencies.push(emitted.closed_at.elapsed());
        }
        drop(out_rx);
        let skipped = parser.join().expect("parse stage panicked");
        let track_sets = tracker.join().expect("track stage panicked");
        if let Some(e) = failure {
            return Err(e);
        }
        let wall_seconds = start.elapsed().as_secs_f64();
        let frames = latencies.len();
        Ok(StreamOutcome {
            stats: StreamStats {
                frames,
                skipped,
                over_budget: latencies.iter().filter(|&&l| l > FRAME_BUDGET).count(),
                latency: FpsReport::from_latencies(&latencies),
                wall_seconds,
                wall_fps: if wall_seconds > 0.0 { frames as f64 / wall_seconds } else { 0.0 },
            },
            track_sets,
        })
    })
}
