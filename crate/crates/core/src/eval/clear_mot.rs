use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FilledGroundTruth;
use crate::classes::ClassId;
use crate::geometry::{iou_box, BoundingBox};
use crate::tracking::{assign, CostMatrix, TrackOutput, TrackSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotConfig {
    /// Minimum box IoU for a localised match (inclusive).
    pub iou_threshold: f64,
}

impl Default for MotConfig {
    fn default() -> Self {
        Self { iou_threshold: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotCounts {
    pub gt: u64,
    pub matches: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub id_switches: u64,
    /// Matches with a box overlap, i.e. on annotated frames.
    pub localized_matches: u64,
    pub overlap_sum: f64,
}

impl MotCounts {
    /// `100 (1 - (FN + FP + IDSW) / GT)`, undefined without ground truth.
    pub fn mota(&self) -> Option<f64> {
        (self.gt > 0).then(|| {
            let errors = self.false_negatives + self.false_positives + self.id_switches;
            100.0 * (1.0 - errors as f64 / self.gt as f64)
        })
    }

    /// Mean matched IoU in percent, undefined without localised matches.
    pub fn motp(&self) -> Option<f64> {
        (self.localized_matches > 0)
            .then(|| 100.0 * self.overlap_sum / self.localized_matches as f64)
    }
}

/// A localised ground-truth object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub id: u64,
    pub class_id: ClassId,
    pub bbox: BoundingBox,
}

/// CLEAR-MOT event accumulator. Matching is class-aware and optimal on
/// `1 - IoU` among pairs at or above the IoU threshold.
#[derive(Debug, Clone, Default)]
pub struct ClearMotAccumulator {
    config: MotConfig,
    counts: MotCounts,
    last_match: BTreeMap<u64, u64>,
}

impl ClearMotAccumulator {
    pub fn new(config: MotConfig) -> Self {
        Self {
            config,
            ..Default::default()
        }
    }

    pub fn counts(&self) -> MotCounts {
        self.counts
    }

    /// Scores one localised frame; returns matched `(gt index, pred index)` pairs.
    pub fn update(&mut self, gts: &[GtObject], preds: &[TrackOutput]) -> Vec<(usize, usize)> {
        let mut cost = CostMatrix::new(gts.len(), preds.len());
        let mut ious = vec![0.0; gts.len() * preds.len()];
        for (i, g) in gts.iter().enumerate() {
            for (j, p) in preds.iter().enumerate() {
                let iou = iou_box(&g.bbox, &p.bbox);
                ious[i * preds.len() + j] = iou;
                if g.class_id != p.class_id || iou < self.config.iou_threshold {
                    cost.gate(i, j);
                } else {
                    cost.set(i, j, 1.0 - iou);
                }
            }
        }
        let a = assign(&cost);
        for &(i, j) in &a.matches {
            let g = &gts[i];
            let track = preds[j].track_id;
            self.counts.matches += 1;
            self.counts.localized_matches += 1;
            self.counts.overlap_sum += ious[i * preds.len() + j];
            if let Some(prev) = self.last_match.insert(g.id, track) {
                if prev != track {
                    self.counts.id_switches += 1;
                }
            }
        }
        self.counts.gt += gts.len() as u64;
        self.counts.false_negatives += a.unmatched_rows.len() as u64;
        self.counts.false_positives += a.unmatched_cols.len() as u64;
        a.matches
    }

    /// Scores a frame known only by its (filled) classification: any reported
    /// track of that class is a match, without overlap or identity.
    pub fn update_classification_only(&mut self, class: Option<ClassId>, preds: &[TrackOutput]) {
        let extra = preds.len() as u64;
        match class {
            Some(c) => {
                self.counts.gt += 1;
                if preds.iter().any(|p| p.class_id == c) {
                    self.counts.matches += 1;
                    self.counts.false_positives += extra - 1;
                } else {
                    self.counts.false_negatives += 1;
                    self.counts.false_positives += extra;
                }
            }
            None => self.counts.false_positives += extra,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingEval {
    pub counts: MotCounts,
    pub mota: Option<f64>,
    pub motp: Option<f64>,
}

/// Scores reported tracks against forward-filled ground truth. Annotated
/// frames are matched on boxes (the ground-truth identity is the instrument
/// class); filled frames only on classification.
pub fn evaluate_tracking(
    predictions: &TrackSet,
    gt: &FilledGroundTruth,
    config: MotConfig,
) -> TrackingEval {
    let outputs = predictions.frame_outputs();
    let mut acc = ClearMotAccumulator::new(config);
    for f in gt.frames() {
        let preds = outputs.get(&f.frame_index).map_or(&[][..], Vec::as_slice);
        match (f.annotated, f.class_id, f.gt_box()) {
            (true, Some(c), Some(bbox)) => {
                let g = GtObject {
                    id: u64::from(c.0),
                    class_id: c,
                    bbox,
                };
                acc.update(&[g], preds);
            }
            (true, None, _) => {
                acc.update(&[], preds);
            }
            // annotated class without geometry, or a filled frame
            (_, class, _) => acc.update_classification_only(class, preds),
        }
    }
    let counts = acc.counts();
    TrackingEval {
        counts,
        mota: counts.mota(),
        motp: counts.motp(),
    }
}

pub fn mota(predictions: &TrackSet, gt: &FilledGroundTruth, config: MotConfig) -> Option<f64> {
    evaluate_tracking(predictions, gt, config).mota
}

/// `None` signals that nothing matched; it is not a 0% score.
pub fn motp(predictions: &TrackSet, gt: &FilledGroundTruth, config: MotConfig) -> Option<f64> {
    evaluate_tracking(predictions, gt, config).motp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{forward_fill, GroundTruthFrame};
    use crate::geometry::BoundingBox;
    use crate::tracking::{HistoryEntry, KalmanFilter, Track, TrackStatus};

    const CLS: ClassId = ClassId::KERRISONS;

    fn bx(l: f64, t: f64, r: f64, b: f64) -> BoundingBox {
        BoundingBox::new(l, t, r, b).unwrap()
    }

    fn track(id: u64, class: ClassId, entries: &[(u64, BoundingBox)]) -> Track {
        Track {
            track_id: id,
            class_id: class,
            kalman: KalmanFilter::default().initiate(&entries[0].1),
            feature: None,
            gallery: Default::default(),
            status: TrackStatus::Confirmed,
            hits: 1,
            age: 1,
            time_since_update: 0,
            history: entries
                .iter()
                .map(|&(f, b)| HistoryEntry {
                    frame_index: f,
                    bbox: b,
                    coasted: false,
                    confirmed: true,
                })
                .collect(),
        }
    }

    fn set(frames: std::ops::Range<u64>, tracks: Vec<Track>) -> TrackSet {
        TrackSet {
            video_id: "v".into(),
            frames: frames.collect(),
            tracks,
        }
    }

    fn annotated_all(n: u64, b: BoundingBox) -> FilledGroundTruth {
        let frames: Vec<_> = (0..n)
            .map(|f| GroundTruthFrame::annotated(f, Some(CLS), None, Some(b)))
            .collect();
        forward_fill(&frames).unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let g = bx(0.0, 0.0, 10.0, 10.0);
        let entries: Vec<_> = (0..10).map(|f| (f, g)).collect();
        let preds = set(0..10, vec![track(1, CLS, &entries)]);
        let e = evaluate_tracking(&preds, &annotated_all(10, g), MotConfig::default());
        assert_eq!(e.mota, Some(100.0));
        assert_eq!(e.motp, Some(100.0));
    }

    #[test]
    fn misses_and_switch() {
        // frames 0-3 exact (track 1), 4-5 missed, 6-9 IoU 0.5 (track 2)
        let g = bx(0.0, 0.0, 10.0, 10.0);
        let half = bx(0.0, 0.0, 10.0, 20.0);
        let a: Vec<_> = (0..4).map(|f| (f, g)).collect();
        let b: Vec<_> = (6..10).map(|f| (f, half)).collect();
        let preds = set(0..10, vec![track(1, CLS, &a), track(2, CLS, &b)]);
        let e = evaluate_tracking(&preds, &annotated_all(10, g), MotConfig::default());
        assert_eq!(e.counts.false_negatives, 2);
        assert_eq!(e.counts.id_switches, 1);
        assert_eq!(e.counts.false_positives, 0);
        assert_eq!(e.mota, Some(70.0));
        assert_eq!(e.motp, Some(75.0));
    }

    #[test]
    fn no_predictions() {
        let gt = annotated_all(10, bx(0.0, 0.0, 10.0, 10.0));
        let e = evaluate_tracking(&set(0..10, vec![]), &gt, MotConfig::default());
        assert_eq!(e.mota, Some(0.0));
        assert_eq!(e.motp, None);
    }

    #[test]
    fn wrong_class_is_miss_plus_false_positive() {
        let g = bx(0.0, 0.0, 10.0, 10.0);
        let preds = set(0..1, vec![track(1, ClassId::CUP_FORCEPS, &[(0, g)])]);
        let e = evaluate_tracking(&preds, &annotated_all(1, g), MotConfig::default());
        assert_eq!((e.counts.false_negatives, e.counts.false_positives), (1, 1));
        assert_eq!(e.mota, Some(-100.0));
    }

    #[test]
    fn filled_frames_match_on_class_only() {
        let g = bx(0.0, 0.0, 10.0, 10.0);
        let mut frames: Vec<_> = (0..6).map(GroundTruthFrame::unannotated).collect();
        frames[0] = GroundTruthFrame::annotated(0, Some(CLS), None, Some(g));
        let gt = forward_fill(&frames).unwrap();
        // a far-away box of the right class still counts on filled frames
        let far = bx(100.0, 100.0, 120.0, 120.0);
        let entries: Vec<_> = (0..6).map(|f| (f, if f == 0 { g } else { far })).collect();
        let e = evaluate_tracking(&set(0..6, vec![track(1, CLS, &entries)]), &gt, MotConfig::default());
        assert_eq!(e.counts.matches, 6);
        assert_eq!(e.counts.localized_matches, 1);
        assert_eq!(e.mota, Some(100.0));
    }

    #[test]
    fn unannotated_frames_do_not_change_motp() {
        let g = bx(0.0, 0.0, 10.0, 10.0);
        let sparse: Vec<_> = (0..10)
            .map(|f| {
                if f % 5 == 0 {
                    GroundTruthFrame::annotated(f, Some(CLS), None, Some(g))
                } else {
                    GroundTruthFrame::unannotated(f)
                }
            })
            .collect();
        let shifted = bx(1.0, 0.0, 11.0, 10.0);
        let entries: Vec<_> = (0..10).map(|f| (f, shifted)).collect();
        let preds = set(0..10, vec![track(1, CLS, &entries)]);
        let dense = annotated_all(10, g);
        let a = motp(&preds, &forward_fill(&sparse).unwrap(), MotConfig::default());
        let b = motp(&preds, &dense, MotConfig::default());
        assert!((a.unwrap() - b.unwrap()).abs() < 1e-12);
    }
}
