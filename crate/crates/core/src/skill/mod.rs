//! Time, motion and usage metrics derived from a video's tracks.
//!
//! Each frame is assigned at most one visible instrument: when tracks of
//! several classes are reported on the same frame, the class seen most
//! recently keeps the frame, otherwise the lowest class index. Runs of equal
//! labels separated by short idle gaps form [`VisibilitySegment`]s, so the
//! segments of a video never overlap.

mod kinematics;
mod metrics;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use kinematics::{kinematics, kinematics_from_positions, smooth, Kinematics};
pub use metrics::{extract_metrics, SkillMetricVector, METRIC_COUNT, METRIC_NAMES};

use crate::classes::{ClassId, ClassRegistry};
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, CameraTransform};
use crate::tracking::TrackSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub video_id: String,
    pub fps: f64,
    pub frame_count: u64,
    #[serde(default)]
    pub registry: ClassRegistry,
    /// Camera motion into each frame from the previous one.
    #[serde(default)]
    pub transforms: BTreeMap<u64, CameraTransform>,
}

impl VideoMeta {
    pub fn new(video_id: impl Into<String>, fps: f64, frame_count: u64) -> Result<Self> {
        let meta = Self {
            video_id: video_id.into(),
            fps,
            frame_count,
            registry: ClassRegistry::default(),
            transforms: BTreeMap::new(),
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidInput(format!("fps must be positive, got {}", self.fps)));
        }
        if self.frame_count == 0 {
            return Err(Error::InvalidInput("video has no frames".into()));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.frame_count as f64 / self.fps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkillConfig {
    /// Longest idle run, in frames, bridged inside a segment.
    pub gap_tolerance: u64,
    /// Centred moving-average window in frames; 1 disables smoothing.
    pub smoothing_window: usize,
}

impl Default for SkillConfig {
    fn default() -> Self {
        Self {
            gap_tolerance: 12,
            smoothing_window: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilitySegment {
    pub class_id: ClassId,
    pub start_frame: u64,
    /// Inclusive.
    pub end_frame: u64,
    pub duration_s: f64,
}

/// The instrument shown on one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct FrameLabel {
    pub frame: u64,
    pub class_id: ClassId,
    pub bbox: BoundingBox,
}

/// One label per frame that shows a confirmed track, in frame order.
pub(crate) fn frame_labels(tracks: &TrackSet, meta: &VideoMeta) -> Result<Vec<FrameLabel>> {
    let mut present: BTreeMap<u64, Vec<(ClassId, u64, BoundingBox)>> = BTreeMap::new();
    for t in tracks.tracks.iter() {
        meta.registry.check(t.class_id)?;
        for h in t.confirmed_history() {
            if h.frame_index >= meta.frame_count {
                return Err(Error::InvalidInput(format!(
                    "track {} reports frame {} beyond frame count {}",
                    t.track_id, h.frame_index, meta.frame_count
                )));
            }
            present
                .entry(h.frame_index)
                .or_default()
                .push((t.class_id, t.track_id, h.bbox));
        }
    }
    let mut labels = Vec::with_capacity(present.len());
    let mut last_class: Option<ClassId> = None;
    let mut last_track: Option<u64> = None;
    for (frame, candidates) in present {
        let class = match last_class {
            Some(c) if candidates.iter().any(|x| x.0 == c) => c,
            _ => candidates.iter().map(|x| x.0).min().expect("non-empty"),
        };
        let of_class: Vec<_> = candidates.iter().filter(|x| x.0 == class).collect();
        let chosen = of_class
            .iter()
            .find(|x| Some(x.1) == last_track)
            .or_else(|| {
                of_class.iter().max_by(|a, b| {
                    a.2.area()
                        .total_cmp(&b.2.area())
                        .then(b.2.left().total_cmp(&a.2.left()))
                        .then(b.2.top().total_cmp(&a.2.top()))
                })
            })
            .expect("class present");
        last_class = Some(class);
        last_track = Some(chosen.1);
        labels.push(FrameLabel {
            frame,
            class_id: class,
            bbox: chosen.2,
        });
    }
    Ok(labels)
}

/// Splits labelled frames into segments, bridging idle runs of at most
/// `gap_tolerance` frames between equal labels.
pub(crate) fn segments_from_labels(
    labels: &[FrameLabel],
    fps: f64,
    gap_tolerance: u64,
) -> Vec<(VisibilitySegment, std::ops::Range<usize>)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        let split = i == labels.len()
            || labels[i].class_id != labels[i - 1].class_id
            || labels[i].frame - labels[i - 1].frame - 1 > gap_tolerance;
        if split {
            let (a, b) = (&labels[start], &labels[i - 1]);
            out.push((
                VisibilitySegment {
                    class_id: a.class_id,
                    start_frame: a.frame,
                    end_frame: b.frame,
                    duration_s: (b.frame - a.frame + 1) as f64 / fps,
                },
                start..i,
            ));
            start = i;
        }
    }
    if labels.is_empty() {
        out.clear();
    }
    out
}

/// Maximal visibility runs of confirmed tracks, coasted frames included.
pub fn visibility_segments(
    tracks: &TrackSet,
    meta: &VideoMeta,
    config: &SkillConfig,
) -> Result<Vec<VisibilitySegment>> {
    meta.validate()?;
    let labels = frame_labels(tracks, meta)?;
    Ok(segments_from_labels(&labels, meta.fps, config.gap_tolerance)
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}

#[cfg(test)]
pub(crate) mod test_support {
    use crate::classes::ClassId;
    use crate::geometry::BoundingBox;
    use crate::tracking::{HistoryEntry, KalmanFilter, Track, TrackSet, TrackStatus};

    /// A confirmed track reporting `boxes` on consecutive frames from `start`.
    pub fn track_from(id: u64, class: ClassId, start: u64, boxes: &[BoundingBox]) -> Track {
        Track {
            track_id: id,
            class_id: class,
            kalman: KalmanFilter::default().initiate(&boxes[0]),
            feature: None,
            gallery: Default::default(),
            status: TrackStatus::Deleted,
            hits: 0,
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
        }
    }

    pub fn still(id: u64, class: ClassId, frames: std::ops::Range<u64>) -> Track {
        let b = BoundingBox::new(10.0, 10.0, 30.0, 50.0).unwrap();
        let n = (frames.end - frames.start) as usize;
        track_from(id, class, frames.start, &vec![b; n])
    }

    pub fn set(tracks: Vec<Track>) -> TrackSet {
        TrackSet {
            video_id: "v".into(),
            frames: Vec::new(),
            tracks,
        }
    }
}
