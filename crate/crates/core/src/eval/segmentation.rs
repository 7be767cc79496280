use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classes::{ClassId, ClassRegistry};
use crate::error::Result;
use crate::geometry::{iou_mask, MaskRLE};

/// Predicted and annotated segmentation of one annotated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationFrame {
    pub gt_class: Option<ClassId>,
    pub gt_mask: MaskRLE,
    pub pred_class: Option<ClassId>,
    pub pred_mask: MaskRLE,
}

impl SegmentationFrame {
    /// Instrument mask, treated as empty when no class is present.
    fn effective(class: Option<ClassId>, mask: &MaskRLE) -> MaskRLE {
        match class {
            Some(_) => mask.clone(),
            None => MaskRLE::empty(mask.width(), mask.height()).expect("mask has valid dims"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MiouReport {
    /// Percent, only for classes that appear in a prediction or annotation.
    pub per_class: BTreeMap<ClassId, f64>,
    /// Mean over the four instrument classes that have a value.
    pub all_instruments: Option<f64>,
    /// Background ("no instrument") IoU, averaged over all frames.
    pub background: Option<f64>,
}

/// Per-class mean mask IoU in percent. A frame counts towards class `c`
/// when either side claims `c`; a misclassified frame scores 0 for both
/// classes involved.
pub fn miou(frames: &[SegmentationFrame], registry: &ClassRegistry) -> Result<MiouReport> {
    let mut sums: BTreeMap<ClassId, (f64, usize)> = BTreeMap::new();
    let mut background = (0.0, 0usize);
    for f in frames {
        let gt = SegmentationFrame::effective(f.gt_class, &f.gt_mask);
        let pred = SegmentationFrame::effective(f.pred_class, &f.pred_mask);
        let overlap = iou_mask(&pred, &gt)?;
        background.0 += iou_mask(&pred.complement(), &gt.complement())?;
        background.1 += 1;

        let mut involved: Vec<ClassId> = f.gt_class.into_iter().chain(f.pred_class).collect();
        involved.dedup();
        for c in involved {
            if !registry.contains(c) {
                continue;
            }
            let score = if f.gt_class == f.pred_class { overlap } else { 0.0 };
            let e = sums.entry(c).or_default();
            e.0 += score;
            e.1 += 1;
        }
    }
    let per_class: BTreeMap<ClassId, f64> = sums
        .into_iter()
        .map(|(c, (s, n))| (c, 100.0 * s / n as f64))
        .collect();
    let instruments: Vec<f64> = ClassId::INSTRUMENTS
        .iter()
        .filter_map(|c| per_class.get(c).copied())
        .collect();
    Ok(MiouReport {
        all_instruments: (!instruments.is_empty())
            .then(|| instruments.iter().sum::<f64>() / instruments.len() as f64),
        background: (background.1 > 0).then(|| 100.0 * background.0 / background.1 as f64),
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(counts: Vec<u32>) -> MaskRLE {
        MaskRLE::new(1, 20, counts).unwrap()
    }

    fn frame(gt: u32, pred: u32, gm: Vec<u32>, pm: Vec<u32>) -> SegmentationFrame {
        SegmentationFrame {
            gt_class: Some(ClassId(gt)),
            gt_mask: mask(gm),
            pred_class: Some(ClassId(pred)),
            pred_mask: mask(pm),
        }
    }

    #[test]
    fn perfect() {
        let frames: Vec<_> = (1..=4)
            .map(|c| frame(c, c, vec![2, 8, 10], vec![2, 8, 10]))
            .collect();
        let r = miou(&frames, &ClassRegistry::default()).unwrap();
        assert!(r.per_class.values().all(|&v| v == 100.0));
        assert_eq!(r.per_class.len(), 4);
        assert_eq!(r.all_instruments, Some(100.0));
        assert_eq!(r.background, Some(100.0));
    }

    #[test]
    fn half_overlap() {
        let frames = vec![frame(1, 1, vec![0, 10, 10], vec![0, 5, 15]); 3];
        let r = miou(&frames, &ClassRegistry::default()).unwrap();
        assert_eq!(r.per_class[&ClassId(1)], 50.0);
    }

    #[test]
    fn misclassification_scores_zero() {
        let frames = vec![
            frame(1, 2, vec![0, 10, 10], vec![0, 10, 10]),
            frame(3, 4, vec![0, 10, 10], vec![0, 10, 10]),
        ];
        let r = miou(&frames, &ClassRegistry::default()).unwrap();
        for c in 1..=4 {
            assert_eq!(r.per_class[&ClassId(c)], 0.0);
        }
        // the pixels still line up, so background is perfect
        assert_eq!(r.background, Some(100.0));
    }

    #[test]
    fn empty_prediction_on_instrument_frame() {
        let f = SegmentationFrame {
            gt_class: Some(ClassId(2)),
            gt_mask: mask(vec![0, 10, 10]),
            pred_class: None,
            pred_mask: mask(vec![20]),
        };
        let r = miou(&[f], &ClassRegistry::default()).unwrap();
        assert_eq!(r.per_class[&ClassId(2)], 0.0);
        assert_eq!(r.background, Some(50.0));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let f = SegmentationFrame {
            gt_class: Some(ClassId(2)),
            gt_mask: mask(vec![0, 10, 10]),
            pred_class: Some(ClassId(2)),
            pred_mask: MaskRLE::empty(2, 10).unwrap(),
        };
        assert!(miou(&[f], &ClassRegistry::default()).is_err());
    }
}
