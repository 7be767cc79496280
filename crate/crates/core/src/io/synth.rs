//! Synthetic inputs for tests, demos and benchmarks.
//!
//! Nothing here models real surgical video. The generators produce streams
//! whose ground truth is known by construction: bouncing boxes for tracker
//! throughput, scripted instrument visits for skill metrics, and feature
//! tables with a planted label signal for the classifiers.

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DetectionRecord;
use crate::classes::{ClassId, ClassRegistry};
use crate::error::{Error, Result};
use crate::eval::GroundTruthFrame;
use crate::geometry::BoundingBox;
use crate::skill::{SkillMetricVector, VideoMeta, METRIC_COUNT};
use crate::stats::{MosatsAssessment, SkillLabel, ASPECTS};
use crate::tracking::{Detection, FrameInput, HistoryEntry, KalmanFilter, Track, TrackSet, TrackStatus};

/// Frame size of scripted videos.
pub const FRAME_WIDTH: u32 = 1280;
pub const FRAME_HEIGHT: u32 = 720;

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiObjectConfig {
    pub objects: usize,
    pub width: f64,
    pub height: f64,
    pub embedding_dim: usize,
    /// Largest per-axis speed in pixels per frame.
    pub max_speed_px: f64,
    /// Uniform box jitter in pixels.
    pub jitter_px: f64,
    pub embedding_noise: f64,
}

impl Default for MultiObjectConfig {
    fn default() -> Self {
        Self {
            objects: 4,
            width: 1920.0,
            height: 1080.0,
            embedding_dim: 32,
            max_speed_px: 6.0,
            jitter_px: 1.5,
            embedding_noise: 0.05,
        }
    }
}

/// Boxes bouncing inside the frame, one detection per object per frame,
/// with per-object embeddings and cycling instrument classes.
pub fn multi_object_stream(config: &MultiObjectConfig, frames: u64, seed: u64) -> Vec<FrameInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    struct Obj {
        x: f64,
        y: f64,
        vx: f64,
        vy: f64,
        w: f64,
        h: f64,
        class: ClassId,
        embedding: Vec<f64>,
    }
    let mut objs: Vec<Obj> = (0..config.objects)
        .map(|i| {
            let w = rng.random_range(80.0..200.0);
            let h = rng.random_range(80.0..200.0);
            Obj {
                x: rng.random_range(0.0..config.width - w),
                y: rng.random_range(0.0..config.height - h),
                vx: rng.random_range(-config.max_speed_px..=config.max_speed_px),
                vy: rng.random_range(-config.max_speed_px..=config.max_speed_px),
                w,
                h,
                class: ClassId::INSTRUMENTS[i % ClassId::INSTRUMENTS.len()],
                embedding: unit((0..config.embedding_dim).map(|_| rng.random_range(-1.0..1.0)).collect()),
            }
        })
        .collect();
    let mut out = Vec::with_capacity(frames as usize);
    for f in 0..frames {
        let mut detections = Vec::with_capacity(objs.len());
        for o in &mut objs {
            let jx = rng.random_range(-config.jitter_px..=config.jitter_px);
            let jy = rng.random_range(-config.jitter_px..=config.jitter_px);
            let left = (o.x + jx).clamp(0.0, config.width - o.w);
            let top = (o.y + jy).clamp(0.0, config.height - o.h);
            let bbox = BoundingBox::new(left, top, left + o.w, top + o.h).expect("positive size");
            let embedding = unit(
                o.embedding
                    .iter()
                    .map(|e| e + rng.random_range(-config.embedding_noise..=config.embedding_noise))
                    .collect(),
            );
            let confidence = rng.random_range(0.6..0.99);
            detections.push(Detection::new(f, o.class, bbox, confidence).with_embedding(embedding));
            o.x += o.vx;
            o.y += o.vy;
            if o.x < 0.0 || o.x > config.width - o.w {
                o.vx = -o.vx;
                o.x = o.x.clamp(0.0, config.width - o.w);
            }
            if o.y < 0.0 || o.y > config.height - o.h {
                o.vy = -o.vy;
                o.y = o.y.clamp(0.0, config.height - o.h);
            }
        }
        out.push(FrameInput {
            frame_index: f,
            detections,
            transform: None,
        });
    }
    out
}

/// Wire records for a frame stream; frames without detections become
/// markers so that every frame appears in the file.
pub fn to_records(video_id: &str, frames: &[FrameInput], registry: &ClassRegistry) -> Vec<DetectionRecord> {
    let mut out = Vec::new();
    for f in frames {
        if f.detections.is_empty() {
            let mut m = DetectionRecord::marker(video_id, f.frame_index);
            m.transform = f.transform;
            out.push(m);
            continue;
        }
        for (i, d) in f.detections.iter().enumerate() {
            let mut r = DetectionRecord::from_detection(video_id, d, registry);
            if i == 0 {
                r.transform = f.transform;
            }
            out.push(r);
        }
    }
    out
}

/// A confirmed track reporting `boxes` on consecutive frames from `start`,
/// as if every frame had been measured.
pub fn ideal_track(track_id: u64, class_id: ClassId, start: u64, boxes: &[BoundingBox]) -> Result<Track> {
    let first = boxes
        .first()
        .ok_or_else(|| Error::InvalidInput("a track needs at least one box".into()))?;
    Ok(Track {
        track_id,
        class_id,
        kalman: KalmanFilter::default().initiate(first),
        feature: None,
        gallery: Default::default(),
        status: TrackStatus::Deleted,
        hits: boxes.len() as u32,
        age: boxes.len() as u32,
        time_since_update: 0,
        history: boxes
            .iter()
            .enumerate()
            .map(|(i, &bbox)| HistoryEntry {
                frame_index: start + i as u64,
                bbox,
                coasted: false,
                confirmed: true,
            })
            .collect(),
    })
}

/// One visit of an instrument; `end_frame` is exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptSegment {
    pub class_id: ClassId,
    pub start_frame: u64,
    pub end_frame: u64,
}

/// Knobs of a scripted operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillProfile {
    pub speed_px_s: f64,
    /// Share of the video with no instrument in view.
    pub idle_fraction: f64,
    pub switches_per_min: f64,
    pub jitter_px: f64,
    /// Largest heading change rate.
    pub turn_rad_s: f64,
}

impl SkillProfile {
    pub fn novice() -> Self {
        Self {
            speed_px_s: 120.0,
            idle_fraction: 0.35,
            switches_per_min: 6.0,
            jitter_px: 4.0,
            turn_rad_s: 3.0,
        }
    }

    pub fn expert() -> Self {
        Self {
            speed_px_s: 180.0,
            idle_fraction: 0.1,
            switches_per_min: 2.0,
            jitter_px: 1.0,
            turn_rad_s: 1.0,
        }
    }

    /// Linear blend: 0 is [`SkillProfile::novice`], 1 is [`SkillProfile::expert`].
    pub fn blend(skill: f64) -> Self {
        let (a, b) = (Self::novice(), Self::expert());
        let s = skill.clamp(0.0, 1.0);
        let mix = |x: f64, y: f64| x + (y - x) * s;
        Self {
            speed_px_s: mix(a.speed_px_s, b.speed_px_s),
            idle_fraction: mix(a.idle_fraction, b.idle_fraction),
            switches_per_min: mix(a.switches_per_min, b.switches_per_min),
            jitter_px: mix(a.jitter_px, b.jitter_px),
            turn_rad_s: mix(a.turn_rad_s, b.turn_rad_s),
        }
    }
}

/// A video reduced to its instrument script: at most one whole-pixel box per
/// frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedVideo {
    pub video_id: String,
    pub fps: f64,
    pub frame_count: u64,
    pub segments: Vec<ScriptSegment>,
    pub boxes: Vec<Option<(ClassId, BoundingBox)>>,
}

impl ScriptedVideo {
    /// Moves a box along a jittery random walk during each segment.
    pub fn from_segments(
        video_id: impl Into<String>,
        fps: f64,
        frame_count: u64,
        segments: Vec<ScriptSegment>,
        profile: &SkillProfile,
        seed: u64,
    ) -> Result<Self> {
        let video_id = video_id.into();
        VideoMeta::new(video_id.clone(), fps, frame_count)?;
        let mut prev_end = 0;
        for s in &segments {
            if s.start_frame >= s.end_frame || s.start_frame < prev_end || s.end_frame > frame_count {
                return Err(Error::InvalidInput(format!(
                    "segment {}..{} is empty, overlaps or leaves the video",
                    s.start_frame, s.end_frame
                )));
            }
            prev_end = s.end_frame;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (fw, fh) = (f64::from(FRAME_WIDTH), f64::from(FRAME_HEIGHT));
        let mut boxes = vec![None; frame_count as usize];
        for s in &segments {
            let w: f64 = rng.random_range(100.0..180.0_f64).round();
            let h: f64 = rng.random_range(140.0..240.0_f64).round();
            let (lo_x, hi_x) = (w / 2.0, fw - w / 2.0);
            let (lo_y, hi_y) = (h / 2.0, fh - h / 2.0);
            let mut x = rng.random_range(lo_x..hi_x);
            let mut y = rng.random_range(lo_y..hi_y);
            let mut heading = rng.random_range(0.0..std::f64::consts::TAU);
            let step = profile.speed_px_s / fps;
            let turn = profile.turn_rad_s / fps;
            for f in s.start_frame..s.end_frame {
                let j = profile.jitter_px;
                let (cx, cy) = if j > 0.0 {
                    (x + rng.random_range(-j..=j), y + rng.random_range(-j..=j))
                } else {
                    (x, y)
                };
                let left = (cx - w / 2.0).round().clamp(0.0, fw - w);
                let top = (cy - h / 2.0).round().clamp(0.0, fh - h);
                boxes[f as usize] = Some((s.class_id, BoundingBox::new(left, top, left + w, top + h)?));
                if turn > 0.0 {
                    heading += rng.random_range(-turn..=turn);
                }
                x += step * heading.cos();
                y += step * heading.sin();
                if !(lo_x..=hi_x).contains(&x) {
                    heading = std::f64::consts::PI - heading;
                    x = x.clamp(lo_x, hi_x);
                }
                if !(lo_y..=hi_y).contains(&y) {
                    heading = -heading;
                    y = y.clamp(lo_y, hi_y);
                }
            }
        }
        Ok(Self {
            video_id,
            fps,
            frame_count,
            segments,
            boxes,
        })
    }

    /// Draws a visit script from the profile, then the motion.
    pub fn generate(
        video_id: impl Into<String>,
        profile: &SkillProfile,
        duration_s: f64,
        fps: f64,
        seed: u64,
    ) -> Result<Self> {
        let frame_count = (duration_s * fps).round() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5c21);
        let visit = 60.0 / profile.switches_per_min.max(1e-3) * fps;
        let idle = profile.idle_fraction.clamp(0.0, 0.95);
        let gap = visit * idle / (1.0 - idle);
        let mut segments = Vec::new();
        let mut t = (gap * rng.random_range(0.0..0.5)).round() as u64;
        let mut last: Option<ClassId> = None;
        while t < frame_count {
            let len = ((visit * rng.random_range(0.5..1.5)).round() as u64).max(1);
            let choices: Vec<ClassId> = ClassId::INSTRUMENTS.into_iter().filter(|c| Some(*c) != last).collect();
            let class_id = *choices.choose(&mut rng).expect("four instruments");
            let end = (t + len).min(frame_count);
            segments.push(ScriptSegment {
                class_id,
                start_frame: t,
                end_frame: end,
            });
            last = Some(class_id);
            t = end + (gap * rng.random_range(0.5..1.5)).round() as u64;
        }
        Self::from_segments(video_id, fps, frame_count, segments, profile, seed)
    }

    pub fn meta(&self) -> VideoMeta {
        VideoMeta::new(self.video_id.clone(), self.fps, self.frame_count).expect("validated on construction")
    }

    /// One frame input per video frame; the visible instrument is detected
    /// with a class-specific embedding.
    pub fn detections(&self) -> Vec<FrameInput> {
        self.boxes
            .iter()
            .enumerate()
            .map(|(f, b)| FrameInput {
                frame_index: f as u64,
                detections: b
                    .iter()
                    .map(|&(class, bbox)| {
                        let n = ClassId::INSTRUMENTS.len();
                        let mut e = vec![0.0; n];
                        e[(class.0 as usize).saturating_sub(1) % n] = 1.0;
                        Detection::new(f as u64, class, bbox, 0.9).with_embedding(e)
                    })
                    .collect(),
                transform: None,
            })
            .collect()
    }

    /// What a perfect tracker would report: one track per segment.
    pub fn ideal_tracks(&self) -> TrackSet {
        let tracks = self
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let boxes: Vec<BoundingBox> = (s.start_frame..s.end_frame)
                    .filter_map(|f| self.boxes[f as usize].map(|(_, b)| b))
                    .collect();
                ideal_track(i as u64 + 1, s.class_id, s.start_frame, &boxes).expect("segments are non-empty")
            })
            .collect();
        TrackSet {
            video_id: self.video_id.clone(),
            frames: (0..self.frame_count).collect(),
            tracks,
        }
    }

    /// Ground truth annotated every `every` frames (1 FPS when equal to fps).
    pub fn ground_truth(&self, every: u64) -> Vec<GroundTruthFrame> {
        let every = every.max(1);
        self.boxes
            .iter()
            .enumerate()
            .map(|(f, b)| {
                let f = f as u64;
                if !f.is_multiple_of(every) {
                    return GroundTruthFrame::unannotated(f);
                }
                match b {
                    Some((c, bbox)) => GroundTruthFrame::annotated(f, Some(*c), None, Some(*bbox)),
                    None => GroundTruthFrame::annotated(f, None, None, None),
                }
            })
            .collect()
    }

    /// Row-major palette-index map of one frame at [`FRAME_WIDTH`] by
    /// [`FRAME_HEIGHT`].
    pub fn index_map(&self, frame: u64) -> Vec<u8> {
        let (w, h) = (FRAME_WIDTH as usize, FRAME_HEIGHT as usize);
        let mut map = vec![0u8; w * h];
        if let Some(Some((class, b))) = self.boxes.get(frame as usize) {
            let (x0, x1) = (b.left() as usize, (b.right() as usize).min(w));
            for y in (b.top() as usize)..(b.bottom() as usize).min(h) {
                map[y * w + x0..y * w + x1].fill(class.0 as u8);
            }
        }
        map
    }
}

/// A scripted video with its assessment.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoVideo {
    pub video: ScriptedVideo,
    pub assessment: MosatsAssessment,
    /// Latent skill in [0, 1] that drives both motion and scores.
    pub skill: f64,
}

/// Fifteen videos, ten novice and five expert, whose scores and motion
/// both follow a latent skill level.
pub fn demo_dataset(seed: u64, duration_s: f64, fps: f64) -> Result<Vec<DemoVideo>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..15)
        .map(|i| {
            let expert = i % 3 == 2;
            let skill = if expert {
                rng.random_range(0.6..1.0)
            } else {
                rng.random_range(0.0..0.5)
            };
            let mut aspects = [0u8; ASPECTS];
            for a in &mut aspects {
                *a = (1.5 + 3.2 * skill + rng.random_range(-0.6..0.6_f64)).round().clamp(1.0, 5.0) as u8;
            }
            let id = format!("video{:02}", i + 1);
            let label = if expert { SkillLabel::Expert } else { SkillLabel::Novice };
            let video = ScriptedVideo::generate(&id, &SkillProfile::blend(skill), duration_s, fps, rng.random())?;
            Ok(DemoVideo {
                video,
                assessment: MosatsAssessment::new(id, aspects, label)?,
                skill,
            })
        })
        .collect()
}

/// A metric-shaped table with label information planted in eight columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTable {
    pub metrics: Vec<SkillMetricVector>,
    pub assessments: Vec<MosatsAssessment>,
}

impl PlantedTable {
    pub fn matrix(&self) -> DMatrix<f64> {
        SkillMetricVector::matrix(&self.metrics)
    }
}

/// Fifteen videos with rounded mean scores 2 (×4), 3 (×5), 4 (×3) and
/// 5 (×3). The three fives and two of the fours are expert, the rest
/// novice. Columns 0–3 one-hot encode the rounded score and columns 4–7
/// repeat the expert flag, each scaled by `signal` over uniform noise in
/// [−1, 1]. The other columns are noise only.
pub fn planted_table(seed: u64, signal: f64) -> Result<PlantedTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores: [u8; 15] = [2, 2, 2, 2, 3, 3, 3, 3, 3, 4, 4, 4, 5, 5, 5];
    let mut order: Vec<usize> = (0..15).collect();
    order.shuffle(&mut rng);
    let mut metrics = Vec::with_capacity(15);
    let mut assessments = Vec::with_capacity(15);
    for (row, &k) in order.iter().enumerate() {
        let m = scores[k];
        let expert = k >= 10;
        let id = format!("video{:02}", row + 1);
        let mut aspects = [m; ASPECTS];
        if m < 5 {
            aspects[0] = m + 1;
            aspects[1] = m - 1;
        }
        let label = if expert { SkillLabel::Expert } else { SkillLabel::Novice };
        assessments.push(MosatsAssessment::new(&id, aspects, label)?);
        let values = (0..METRIC_COUNT)
            .map(|c| {
                let noise = rng.random_range(-1.0..1.0);
                match c {
                    0..=3 if usize::from(m) - 2 == c => signal + noise,
                    4..=7 if expert => signal + noise,
                    _ => noise * (1.0 + c as f64 / 10.0),
                }
            })
            .collect();
        metrics.push(SkillMetricVector { video_id: id, values });
    }
    Ok(PlantedTable { metrics, assessments })
}
