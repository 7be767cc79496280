use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::appearance::{check_unit, cosine_distance, ema_update, FeatureGallery};
use super::assignment::{assign, CostMatrix};
use super::kalman::{KalmanFilter, KalmanState};
use crate::classes::{ClassId, ClassRegistry};
use crate::error::{Error, Result};
use crate::geometry::{iou_box, BoundingBox, CameraTransform, MaskRLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Sort,
    DeepSort,
    StrongSort,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sort" => Ok(Variant::Sort),
            "deepsort" => Ok(Variant::DeepSort),
            "strongsort" => Ok(Variant::StrongSort),
            other => Err(Error::Config(format!("unknown tracker variant {other:?}"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Sort => "sort",
            Variant::DeepSort => "deepsort",
            Variant::StrongSort => "strongsort",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub variant: Variant,
    /// Frames `f` with `f % detection_interval == 0` consume detections; the
    /// rest coast on prediction.
    pub detection_interval: u64,
    pub max_age: u32,
    pub n_init: u32,
    pub gate_iou_min: f64,
    pub gate_mahalanobis_max: f64,
    /// Weight of appearance cost in the combined cost.
    pub appearance_weight: f64,
    pub ema_alpha: f64,
    /// DeepSORT gallery capacity; 0 disables the gallery.
    pub gallery_size: usize,
    pub confidence_noise_scaling: bool,
    pub motion_compensation: bool,
    pub seed: u64,
    pub kalman: KalmanFilter,
    pub registry: ClassRegistry,
}

impl TrackerConfig {
    pub fn new(variant: Variant) -> Self {
        let base = Self {
            variant,
            detection_interval: 5,
            max_age: 30,
            n_init: 3,
            gate_iou_min: 0.1,
            // 0.95 quantile of chi-square with 4 degrees of freedom
            gate_mahalanobis_max: 9.4877,
            appearance_weight: 0.0,
            ema_alpha: 0.9,
            gallery_size: 0,
            confidence_noise_scaling: false,
            motion_compensation: false,
            seed: 0,
            kalman: KalmanFilter::default(),
            registry: ClassRegistry::default(),
        };
        match variant {
            Variant::Sort => base,
            Variant::DeepSort => Self {
                appearance_weight: 0.25,
                gallery_size: 100,
                ..base
            },
            Variant::StrongSort => Self {
                appearance_weight: 0.25,
                confidence_noise_scaling: true,
                motion_compensation: true,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        if self.detection_interval == 0 {
            return Err(Error::Config("detection_interval must be at least 1".into()));
        }
        unit("gate_iou_min", self.gate_iou_min)?;
        unit("appearance_weight", self.appearance_weight)?;
        unit("ema_alpha", self.ema_alpha)?;
        if self.gate_mahalanobis_max.is_nan() || self.gate_mahalanobis_max < 0.0 {
            return Err(Error::Config("gate_mahalanobis_max must be non-negative".into()));
        }
        Ok(())
    }

    fn uses_appearance(&self) -> bool {
        self.variant != Variant::Sort
    }
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self::new(Variant::StrongSort)
    }
}

/// One detected instrument instance in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame_index: u64,
    pub class_id: ClassId,
    pub bbox: BoundingBox,
    pub mask: Option<MaskRLE>,
    pub confidence: f64,
    pub embedding: Option<Vec<f64>>,
}

impl Detection {
    pub fn new(frame_index: u64, class_id: ClassId, bbox: BoundingBox, confidence: f64) -> Self {
        Self {
            frame_index,
            class_id,
            bbox,
            mask: None,
            confidence,
            embedding: None,
        }
    }

    pub fn with_embedding(mut self, embedding: Vec<f64>) -> Self {
        self.embedding = Some(embedding);
        self
    }

    pub fn with_mask(mut self, mask: MaskRLE) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidDetection(format!(
                "confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        if let Some(e) = &self.embedding {
            check_unit(e)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub frame_index: u64,
    pub bbox: BoundingBox,
    /// Box is a prediction, not a measurement, on this frame.
    pub coasted: bool,
    /// Track was confirmed (and therefore reported) on this frame.
    pub confirmed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub track_id: u64,
    pub class_id: ClassId,
    pub kalman: KalmanState,
    pub feature: Option<Vec<f64>>,
    #[serde(default)]
    pub gallery: FeatureGallery,
    pub status: TrackStatus,
    pub hits: u32,
    pub age: u32,
    pub time_since_update: u32,
    pub history: Vec<HistoryEntry>,
}

impl Track {
    /// History entries on which the track was reported.
    pub fn confirmed_history(&self) -> impl Iterator<Item = &HistoryEntry> {
        self.history.iter().filter(|h| h.confirmed)
    }

    pub fn was_confirmed(&self) -> bool {
        self.history.iter().any(|h| h.confirmed)
    }

    fn set_status(&mut self, next: TrackStatus) {
        use TrackStatus::*;
        debug_assert!(
            matches!(
                (self.status, next),
                (Tentative, Confirmed) | (Tentative, Deleted) | (Confirmed, Deleted)
            ),
            "illegal transition {:?} -> {next:?}",
            self.status
        );
        self.status = next;
    }
}

/// Reported state of a confirmed track on one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackOutput {
    pub track_id: u64,
    pub class_id: ClassId,
    pub bbox: BoundingBox,
    pub coasted: bool,
}

/// Motion cost of pairing a track with a detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionCost {
    /// `1 - IoU(predicted box, detection box)`.
    pub cost: f64,
    pub iou: f64,
    pub mahalanobis: f64,
    pub in_gate: bool,
}

/// All tracks produced for one video, with full histories.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackSet {
    pub video_id: String,
    /// Every frame index stepped, in order.
    pub frames: Vec<u64>,
    /// Sorted by `track_id`.
    pub tracks: Vec<Track>,
}

impl TrackSet {
    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    /// Per-frame reported tracks, reconstructed from the histories. Every
    /// stepped frame is present, possibly with an empty list.
    pub fn frame_outputs(&self) -> BTreeMap<u64, Vec<TrackOutput>> {
        let mut out: BTreeMap<u64, Vec<TrackOutput>> =
            self.frames.iter().map(|&f| (f, Vec::new())).collect();
        for t in &self.tracks {
            for h in t.confirmed_history() {
                out.entry(h.frame_index).or_default().push(TrackOutput {
                    track_id: t.track_id,
                    class_id: t.class_id,
                    bbox: h.bbox,
                    coasted: h.coasted,
                });
            }
        }
        for v in out.values_mut() {
            v.sort_by_key(|o| o.track_id);
        }
        out
    }

    pub fn confirmed_tracks(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| t.was_confirmed())
    }

    /// Removes appearance state that is not needed to reproduce outputs.
    pub fn strip_appearance(&mut self) {
        for t in &mut self.tracks {
            t.feature = None;
            t.gallery = FeatureGallery::default();
        }
    }
}

/// Detections and optional camera motion for one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameInput {
    pub frame_index: u64,
    pub detections: Vec<Detection>,
    pub transform: Option<CameraTransform>,
}

/// Single-stream tracker. Calls to [`Tracker::step`] must be serialised.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    video_id: String,
    live: Vec<Track>,
    finished: Vec<Track>,
    next_id: u64,
    last_frame: Option<u64>,
    frames: Vec<u64>,
    embedding_dim: Option<usize>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            video_id: String::new(),
            live: Vec::new(),
            finished: Vec::new(),
            next_id: 1,
            last_frame: None,
            frames: Vec::new(),
            embedding_dim: None,
        })
    }

    pub fn with_video_id(mut self, id: impl Into<String>) -> Self {
        self.video_id = id.into();
        self
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn live_tracks(&self) -> &[Track] {
        &self.live
    }

    pub fn is_detection_frame(&self, frame_index: u64) -> bool {
        frame_index.is_multiple_of(self.config.detection_interval)
    }

    /// Motion cost of pairing `track` (already predicted to this frame) with `d`.
    pub fn motion_cost(&self, track: &Track, d: &Detection) -> MotionCost {
        let Ok(predicted) = track.kalman.to_box() else {
            return MotionCost {
                cost: 1.0,
                iou: 0.0,
                mahalanobis: f64::INFINITY,
                in_gate: false,
            };
        };
        let iou = iou_box(&predicted, &d.bbox);
        let mahalanobis = self
            .config
            .kalman
            .position_gating_distance(&track.kalman, &d.bbox);
        let in_gate = iou >= self.config.gate_iou_min
            && mahalanobis <= self.config.gate_mahalanobis_max;
        MotionCost {
            cost: 1.0 - iou,
            iou,
            mahalanobis,
            in_gate,
        }
    }

    /// Appearance cost: 0 for `sort`, gallery minimum for `deepsort`, EMA
    /// feature distance for `strongsort`. `None` when either side has no
    /// embedding.
    pub fn appearance_cost(&self, track: &Track, d: &Detection) -> Result<Option<f64>> {
        let Some(e) = d.embedding.as_deref() else {
            return Ok(None);
        };
        match self.config.variant {
            Variant::Sort => Ok(Some(0.0)),
            Variant::DeepSort => track.gallery.min_distance(e),
            Variant::StrongSort => track
                .feature
                .as_deref()
                .map(|f| cosine_distance(f, e))
                .transpose(),
        }
    }

    fn check_detections(&mut self, frame_index: u64, detections: &[Detection]) -> Result<()> {
        for d in detections {
            if d.frame_index != frame_index {
                return Err(Error::InvalidDetection(format!(
                    "detection for frame {} passed to frame {frame_index}",
                    d.frame_index
                )));
            }
            self.config.registry.check(d.class_id)?;
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(Error::InvalidDetection(format!(
                    "confidence {} outside [0, 1]",
                    d.confidence
                )));
            }
            if !self.config.uses_appearance() {
                continue;
            }
            if let Some(e) = &d.embedding {
                check_unit(e)?;
                match self.embedding_dim {
                    Some(dim) if dim != e.len() => {
                        return Err(Error::EmbeddingDimension {
                            expected: dim,
                            found: e.len(),
                        })
                    }
                    _ => {}
                }
            }
        }
        // fix the stream dimension only once the whole frame is accepted
        if self.config.uses_appearance() && self.embedding_dim.is_none() {
            let mut dims = detections
                .iter()
                .filter_map(|d| d.embedding.as_ref().map(Vec::len));
            if let Some(first) = dims.next() {
                if let Some(other) = dims.find(|&d| d != first) {
                    return Err(Error::EmbeddingDimension {
                        expected: first,
                        found: other,
                    });
                }
                self.embedding_dim = Some(first);
            }
        }
        Ok(())
    }

    /// Advances the tracker by one frame and returns the confirmed tracks.
    pub fn step(
        &mut self,
        frame_index: u64,
        detections: &[Detection],
        transform: Option<&CameraTransform>,
    ) -> Result<Vec<TrackOutput>> {
        if let Some(prev) = self.last_frame {
            if frame_index <= prev {
                return Err(Error::OutOfOrderFrame {
                    previous: prev,
                    got: frame_index,
                });
            }
        }
        self.check_detections(frame_index, detections)?;

        let compensation = transform.filter(|_| self.config.motion_compensation);
        let mut predicted = Vec::with_capacity(self.live.len());
        for t in &self.live {
            predicted.push(self.config.kalman.predict(&t.kalman, compensation)?);
        }
        for (t, k) in self.live.iter_mut().zip(predicted) {
            t.kalman = k;
            t.age += 1;
            t.time_since_update += 1;
        }

        if self.is_detection_frame(frame_index) {
            self.associate(frame_index, detections)?;
        }

        let max_age = self.config.max_age;
        for t in &mut self.live {
            if t.time_since_update > max_age && t.status != TrackStatus::Deleted {
                t.set_status(TrackStatus::Deleted);
            }
        }
        let (dead, live): (Vec<Track>, Vec<Track>) = std::mem::take(&mut self.live)
            .into_iter()
            .partition(|t| t.status == TrackStatus::Deleted);
        self.finished.extend(dead);
        self.live = live;

        let mut outputs = Vec::new();
        for t in &mut self.live {
            let bbox = t.kalman.to_box()?;
            let confirmed = t.status == TrackStatus::Confirmed;
            let coasted = t.time_since_update > 0;
            t.history.push(HistoryEntry {
                frame_index,
                bbox,
                coasted,
                confirmed,
            });
            if confirmed {
                outputs.push(TrackOutput {
                    track_id: t.track_id,
                    class_id: t.class_id,
                    bbox,
                    coasted,
                });
            }
        }
        outputs.sort_by_key(|o| o.track_id);
        self.last_frame = Some(frame_index);
        self.frames.push(frame_index);
        Ok(outputs)
    }

    fn associate(&mut self, frame_index: u64, detections: &[Detection]) -> Result<()> {
        let lambda = if self.config.uses_appearance() {
            self.config.appearance_weight
        } else {
            0.0
        };
        let mut costs = CostMatrix::new(self.live.len(), detections.len());
        for (r, t) in self.live.iter().enumerate() {
            for (c, d) in detections.iter().enumerate() {
                let motion = self.motion_cost(t, d);
                if t.class_id != d.class_id || !motion.in_gate {
                    costs.gate(r, c);
                    continue;
                }
                let cost = match self.appearance_cost(t, d)? {
                    Some(app) if lambda > 0.0 => lambda * app + (1.0 - lambda) * motion.cost,
                    _ => motion.cost,
                };
                costs.set(r, c, cost);
            }
        }
        let result = assign(&costs);

        for &(r, c) in &result.matches {
            let d = &detections[c];
            let confidence = self.config.confidence_noise_scaling.then_some(d.confidence);
            let kalman = self.config.kalman.update(&self.live[r].kalman, &d.bbox, confidence)?;
            let t = &mut self.live[r];
            t.kalman = kalman;
            t.hits += 1;
            t.time_since_update = 0;
            if let Some(e) = d.embedding.as_ref().filter(|_| self.config.uses_appearance()) {
                match self.config.variant {
                    Variant::StrongSort => {
                        t.feature = Some(match &t.feature {
                            Some(f) => ema_update(f, e, self.config.ema_alpha)?,
                            None => e.clone(),
                        });
                    }
                    Variant::DeepSort => {
                        t.gallery.push(e.clone());
                        t.feature = Some(e.clone());
                    }
                    Variant::Sort => {}
                }
            }
            if t.status == TrackStatus::Tentative && t.hits >= self.config.n_init {
                t.set_status(TrackStatus::Confirmed);
            }
        }
        for &r in &result.unmatched_rows {
            let t = &mut self.live[r];
            t.hits = 0;
            if t.status == TrackStatus::Tentative {
                t.set_status(TrackStatus::Deleted);
            }
        }
        for &c in &result.unmatched_cols {
            let d = &detections[c];
            let mut track = Track {
                track_id: self.next_id,
                class_id: d.class_id,
                kalman: self.config.kalman.initiate(&d.bbox),
                feature: None,
                gallery: FeatureGallery::new(self.config.gallery_size),
                status: TrackStatus::Tentative,
                hits: 0,
                age: 0,
                time_since_update: 0,
                history: Vec::new(),
            };
            if let Some(e) = d.embedding.as_ref().filter(|_| self.config.uses_appearance()) {
                track.feature = Some(e.clone());
                track.gallery.push(e.clone());
            }
            if self.config.n_init == 0 {
                track.set_status(TrackStatus::Confirmed);
            }
            log::trace!("frame {frame_index}: new track {}", track.track_id);
            self.next_id += 1;
            self.live.push(track);
        }
        Ok(())
    }

    /// Consumes the tracker, returning every track it ever created.
    pub fn finish(self) -> TrackSet {
        let mut tracks = self.finished;
        tracks.extend(self.live);
        tracks.sort_by_key(|t| t.track_id);
        TrackSet {
            video_id: self.video_id,
            frames: self.frames,
            tracks,
        }
    }
}

/// Runs a fresh tracker over a stream of frames. Consecutive inputs with the
/// same frame index are merged; the last transform supplied for a frame wins.
pub fn run<I>(config: TrackerConfig, stream: I) -> Result<TrackSet>
where
    I: IntoIterator<Item = FrameInput>,
{
    let mut tracker = Tracker::new(config)?;
    let mut pending: Option<FrameInput> = None;
    for frame in stream {
        match &mut pending {
            Some(p) if p.frame_index == frame.frame_index => {
                p.detections.extend(frame.detections);
                if frame.transform.is_some() {
                    p.transform = frame.transform;
                }
            }
            _ => {
                if let Some(p) = pending.replace(frame) {
                    tracker.step(p.frame_index, &p.detections, p.transform.as_ref())?;
                }
            }
        }
    }
    if let Some(p) = pending {
        tracker.step(p.frame_index, &p.detections, p.transform.as_ref())?;
    }
    Ok(tracker.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(frame: u64, cx: f64, cy: f64) -> Detection {
        Detection::new(
            frame,
            ClassId::KERRISONS,
            BoundingBox::from_xyah(cx, cy, 0.5, 40.0).unwrap(),
            0.9,
        )
    }

    fn every_frame(variant: Variant) -> TrackerConfig {
        TrackerConfig {
            detection_interval: 1,
            ..TrackerConfig::new(variant)
        }
    }

    #[test]
    fn variant_defaults() {
        let s = TrackerConfig::new(Variant::Sort);
        assert_eq!(s.appearance_weight, 0.0);
        assert!(!s.motion_compensation && !s.confidence_noise_scaling);
        let d = TrackerConfig::new(Variant::DeepSort);
        assert_eq!((d.appearance_weight, d.gallery_size), (0.25, 100));
        let g = TrackerConfig::new(Variant::StrongSort);
        assert!(g.motion_compensation && g.confidence_noise_scaling);
        assert_eq!((g.ema_alpha, g.detection_interval), (0.9, 5));
        assert_eq!((g.n_init, g.max_age), (3, 30));
    }

    #[test]
    fn single_detection_starts_tentative() {
        let mut t = Tracker::new(every_frame(Variant::Sort)).unwrap();
        let out = t.step(0, &[det(0, 100.0, 100.0)], None).unwrap();
        assert!(out.is_empty());
        assert_eq!(t.live_tracks().len(), 1);
        assert_eq!(t.live_tracks()[0].status, TrackStatus::Tentative);
    }

    #[test]
    fn stationary_object_confirms_on_frame_three() {
        let mut t = Tracker::new(every_frame(Variant::Sort)).unwrap();
        let mut first_confirmed = None;
        let mut ids = Vec::new();
        for f in 0..10 {
            let out = t.step(f, &[det(f, 100.0, 100.0)], None).unwrap();
            if !out.is_empty() && first_confirmed.is_none() {
                first_confirmed = Some(f);
            }
            ids.extend(out.iter().map(|o| o.track_id));
        }
        assert_eq!(first_confirmed, Some(3));
        assert!(ids.iter().all(|&i| i == ids[0]));
        assert_eq!(ids.len(), 7);
    }

    #[test]
    fn lost_track_coasts_then_deleted_after_max_age() {
        let mut t = Tracker::new(every_frame(Variant::Sort)).unwrap();
        for f in 0..10 {
            t.step(f, &[det(f, 100.0, 100.0)], None).unwrap();
        }
        for f in 10..40 {
            let out = t.step(f, &[], None).unwrap();
            assert_eq!(out.len(), 1, "frame {f}");
            assert!(out[0].coasted);
        }
        let out = t.step(40, &[], None).unwrap();
        assert!(out.is_empty());
        let set = t.finish();
        assert_eq!(set.tracks.len(), 1);
        assert_eq!(set.tracks[0].status, TrackStatus::Deleted);
        assert_eq!(set.tracks[0].history.last().unwrap().frame_index, 39);
    }

    #[test]
    fn unmatched_tentative_is_deleted() {
        let mut t = Tracker::new(every_frame(Variant::Sort)).unwrap();
        t.step(0, &[det(0, 100.0, 100.0)], None).unwrap();
        t.step(1, &[], None).unwrap();
        assert!(t.live_tracks().is_empty());
        assert_eq!(t.finish().tracks[0].status, TrackStatus::Deleted);
    }

    #[test]
    fn rejects_out_of_order_and_unknown_class() {
        let mut t = Tracker::new(every_frame(Variant::Sort)).unwrap();
        t.step(5, &[], None).unwrap();
        assert!(matches!(
            t.step(5, &[], None),
            Err(Error::OutOfOrderFrame { previous: 5, got: 5 })
        ));
        let mut bad = det(6, 1.0, 1.0);
        bad.class_id = ClassId(17);
        assert!(matches!(t.step(6, &[bad], None), Err(Error::UnknownClass(_))));
        // a rejected frame leaves the tracker usable
        t.step(6, &[], None).unwrap();
    }

    #[test]
    fn embedding_dimension_must_be_stable() {
        let mut t = Tracker::new(every_frame(Variant::StrongSort)).unwrap();
        t.step(0, &[det(0, 50.0, 50.0).with_embedding(vec![1.0, 0.0])], None)
            .unwrap();
        let err = t
            .step(1, &[det(1, 50.0, 50.0).with_embedding(vec![1.0, 0.0, 0.0])], None)
            .unwrap_err();
        assert!(matches!(err, Error::EmbeddingDimension { expected: 2, found: 3 }));
    }

    #[test]
    fn non_detection_frames_coast() {
        let mut cfg = TrackerConfig::new(Variant::Sort);
        cfg.detection_interval = 5;
        cfg.n_init = 1;
        let mut t = Tracker::new(cfg).unwrap();
        t.step(0, &[det(0, 100.0, 100.0)], None).unwrap();
        t.step(5, &[det(5, 100.0, 100.0)], None).unwrap();
        // detections on a non-detection frame are ignored
        let out = t.step(6, &[det(6, 300.0, 300.0)], None).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].coasted);
        assert_eq!(t.live_tracks().len(), 1);
    }

    #[test]
    fn motion_cost_cases() {
        let t = Tracker::new(every_frame(Variant::Sort)).unwrap();
        let cfg = t.config().clone();
        let d = det(0, 100.0, 100.0);
        let track = Track {
            track_id: 1,
            class_id: d.class_id,
            kalman: cfg.kalman.initiate(&d.bbox),
            feature: None,
            gallery: FeatureGallery::default(),
            status: TrackStatus::Confirmed,
            hits: 3,
            age: 3,
            time_since_update: 0,
            history: vec![],
        };
        let same = t.motion_cost(&track, &d);
        assert!(same.cost.abs() < 1e-12 && same.in_gate);
        let far = t.motion_cost(&track, &det(0, 400.0, 400.0));
        assert_eq!(far.cost, 1.0);
        assert!(!far.in_gate);
        // width 20: shifting by 10 gives intersection 10, union 30
        let third = t.motion_cost(&track, &det(0, 110.0, 100.0));
        assert!((third.cost - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn run_merges_and_matches_step() {
        let frames: Vec<FrameInput> = (0..8)
            .map(|f| FrameInput {
                frame_index: f,
                detections: vec![det(f, 100.0 + f as f64, 100.0)],
                transform: None,
            })
            .collect();
        let set = run(every_frame(Variant::Sort), frames.clone()).unwrap();
        let mut t = Tracker::new(every_frame(Variant::Sort)).unwrap();
        let mut stepped = BTreeMap::new();
        for f in &frames {
            stepped.insert(f.frame_index, t.step(f.frame_index, &f.detections, None).unwrap());
        }
        assert_eq!(set.frame_outputs(), stepped);
        assert!(run(every_frame(Variant::Sort), Vec::new()).unwrap().is_empty());
    }
}
