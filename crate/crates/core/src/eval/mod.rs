//! Tracking and segmentation quality.
//!
//! Ground truth is sampled sparsely: only some frames carry annotations.
//! For MOTA the last known classification is carried forward onto the
//! frames in between ([`forward_fill`]); MOTP only uses annotated frames.

mod clear_mot;
mod segmentation;
mod throughput;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use clear_mot::{
    evaluate_tracking, mota, motp, ClearMotAccumulator, GtObject, MotConfig, MotCounts,
    TrackingEval,
};
pub use segmentation::{miou, MiouReport, SegmentationFrame};
pub use throughput::{fps_benchmark, Clock, FpsReport, ManualClock, MonotonicClock};

use crate::classes::ClassId;
use crate::error::{Error, Result};
use crate::geometry::{mask_to_box, BoundingBox, MaskRLE};
use crate::stats::MeanStd;

/// Annotation state of one video frame. At most one instrument per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFrame {
    pub frame_index: u64,
    /// `None` means no instrument (or, before filling, unknown).
    pub class_id: Option<ClassId>,
    pub mask: Option<MaskRLE>,
    pub bbox: Option<BoundingBox>,
    pub annotated: bool,
}

impl GroundTruthFrame {
    pub fn annotated(
        frame_index: u64,
        class_id: Option<ClassId>,
        mask: Option<MaskRLE>,
        bbox: Option<BoundingBox>,
    ) -> Self {
        Self {
            frame_index,
            class_id,
            mask,
            bbox,
            annotated: true,
        }
    }

    pub fn unannotated(frame_index: u64) -> Self {
        Self {
            frame_index,
            class_id: None,
            mask: None,
            bbox: None,
            annotated: false,
        }
    }

    /// Annotated box, falling back to the hull of the annotated mask.
    pub fn gt_box(&self) -> Option<BoundingBox> {
        self.bbox.or_else(|| self.mask.as_ref().and_then(mask_to_box))
    }
}

/// Ground truth whose classification is defined on every frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilledGroundTruth {
    frames: Vec<GroundTruthFrame>,
}

impl FilledGroundTruth {
    pub fn frames(&self) -> &[GroundTruthFrame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<GroundTruthFrame> {
        self.frames
    }
}

/// Carries the most recent annotated classification onto unannotated
/// frames. Frames before the first annotation are "no instrument". Masks and
/// boxes are never filled.
pub fn forward_fill(frames: &[GroundTruthFrame]) -> Result<FilledGroundTruth> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("ground truth is empty".into()));
    }
    if !frames.iter().any(|f| f.annotated) {
        return Err(Error::InvalidInput(
            "ground truth has no annotated frame".into(),
        ));
    }
    if let Some(w) = frames.windows(2).find(|w| w[1].frame_index <= w[0].frame_index) {
        return Err(Error::OutOfOrderFrame {
            previous: w[0].frame_index,
            got: w[1].frame_index,
        });
    }
    let mut last: Option<ClassId> = None;
    let frames = frames
        .iter()
        .map(|f| {
            if f.annotated {
                last = f.class_id;
                f.clone()
            } else {
                GroundTruthFrame {
                    class_id: last,
                    mask: None,
                    bbox: None,
                    ..f.clone()
                }
            }
        })
        .collect();
    Ok(FilledGroundTruth { frames })
}

/// Everything reported for one evaluated video.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub video_id: String,
    pub motp: Option<f64>,
    pub mota: Option<f64>,
    pub miou_per_class: BTreeMap<ClassId, f64>,
    pub miou_all: Option<f64>,
    pub miou_background: Option<f64>,
    pub fps_mean: Option<f64>,
    pub fps_std: Option<f64>,
    pub counts: MotCounts,
}

/// Mean ± population std of per-video (or per-fold) reports.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregateReport {
    pub videos: usize,
    pub motp: Option<MeanStd>,
    pub mota: Option<MeanStd>,
    pub miou_all: Option<MeanStd>,
    pub miou_background: Option<MeanStd>,
    pub miou_per_class: BTreeMap<ClassId, MeanStd>,
    pub fps: Option<MeanStd>,
}

pub fn aggregate(reports: &[EvalReport]) -> AggregateReport {
    let collect = |f: &dyn Fn(&EvalReport) -> Option<f64>| {
        let v: Vec<f64> = reports.iter().filter_map(f).collect();
        MeanStd::of(&v)
    };
    let mut per_class: BTreeMap<ClassId, Vec<f64>> = BTreeMap::new();
    for r in reports {
        for (&c, &v) in &r.miou_per_class {
            per_class.entry(c).or_default().push(v);
        }
    }
    AggregateReport {
        videos: reports.len(),
        motp: collect(&|r| r.motp),
        mota: collect(&|r| r.mota),
        miou_all: collect(&|r| r.miou_all),
        miou_background: collect(&|r| r.miou_background),
        miou_per_class: per_class
            .into_iter()
            .filter_map(|(c, v)| MeanStd::of(&v).map(|m| (c, m)))
            .collect(),
        fps: collect(&|r| r.fps_mean),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(f: u64, c: Option<u32>) -> GroundTruthFrame {
        GroundTruthFrame::annotated(f, c.map(ClassId), None, None)
    }

    #[test]
    fn fill_carries_last_known_class() {
        let mut frames: Vec<_> = (0..40).map(GroundTruthFrame::unannotated).collect();
        frames[0] = ann(0, Some(1));
        frames[25] = ann(25, Some(2));
        let filled = forward_fill(&frames).unwrap();
        for f in filled.frames() {
            let want = if f.frame_index < 25 { 1 } else { 2 };
            assert_eq!(f.class_id, Some(ClassId(want)));
        }
    }

    #[test]
    fn frames_before_first_annotation_are_empty() {
        let mut frames: Vec<_> = (0..10).map(GroundTruthFrame::unannotated).collect();
        frames[4] = ann(4, Some(3));
        let filled = forward_fill(&frames).unwrap();
        assert!(filled.frames()[..4].iter().all(|f| f.class_id.is_none()));
        assert!(filled.frames()[4..].iter().all(|f| f.class_id == Some(ClassId(3))));
    }

    #[test]
    fn fill_identity_and_idempotence() {
        let frames: Vec<_> = (0..5).map(|f| ann(f, Some((f % 2) as u32 + 1))).collect();
        let filled = forward_fill(&frames).unwrap();
        assert_eq!(filled.frames(), &frames[..]);

        let mut sparse: Vec<_> = (0..30).map(GroundTruthFrame::unannotated).collect();
        sparse[3] = ann(3, Some(1));
        sparse[12] = ann(12, None);
        sparse[20] = ann(20, Some(4));
        let once = forward_fill(&sparse).unwrap();
        let twice = forward_fill(once.frames()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn fill_rejects_bad_input() {
        assert!(forward_fill(&[]).is_err());
        assert!(forward_fill(&[GroundTruthFrame::unannotated(0)]).is_err());
        assert!(forward_fill(&[ann(3, None), ann(2, None)]).is_err());
    }
}
