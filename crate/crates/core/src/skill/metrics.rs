use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::kinematics::{centroid_runs, kinematics_from_positions, smooth};
use super::{frame_labels, segments_from_labels, SkillConfig, VideoMeta};
use crate::classes::ClassId;
use crate::error::{Error, Result};
use crate::stats::MeanStd;
use crate::tracking::TrackSet;

pub const METRIC_COUNT: usize = 34;

/// Column names, `M01` first.
pub const METRIC_NAMES: [&str; METRIC_COUNT] = [
    "M01_total_time_s",
    "M02_visible_time_s",
    "M03_total_to_visible_ratio",
    "M04_idle_time_s",
    "M05_visible_time_blunt_dissector_s",
    "M06_visible_time_cup_forceps_s",
    "M07_visible_time_kerrisons_s",
    "M08_visible_time_pituitary_rongeurs_s",
    "M09_mean_segment_duration_s",
    "M10_longest_idle_gap_s",
    "M11_median_segment_duration_s",
    "M12_idle_fraction",
    "M13_path_length_px",
    "M14_mean_speed_px_s",
    "M15_speed_std_px_s",
    "M16_mean_abs_accel_px_s2",
    "M17_mean_abs_jerk_px_s3",
    "M18_economy_of_motion",
    "M19_mean_speed_blunt_dissector_px_s",
    "M20_mean_speed_cup_forceps_px_s",
    "M21_mean_speed_kerrisons_px_s",
    "M22_mean_speed_pituitary_rongeurs_px_s",
    "M23_mean_box_area_px2",
    "M24_box_area_std_px2",
    "M25_mean_heading_change_rad_s",
    "M26_compensated_path_length_px",
    "M27_instrument_switches",
    "M28_switches_per_min",
    "M29_insertions",
    "M30_segments_blunt_dissector",
    "M31_segments_cup_forceps",
    "M32_segments_kerrisons",
    "M33_segments_pituitary_rongeurs",
    "M34_distinct_instruments",
];

/// The 34 skill metrics of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillMetricVector {
    pub video_id: String,
    /// `values[i]` is metric `M{i+1}`.
    pub values: Vec<f64>,
}

impl SkillMetricVector {
    /// Metric by its catalogue number, 1 to 34.
    pub fn m(&self, number: usize) -> f64 {
        assert!((1..=METRIC_COUNT).contains(&number), "metric number {number} out of range");
        self.values[number - 1]
    }

    pub fn column_names() -> Vec<String> {
        METRIC_NAMES.iter().map(|s| s.to_string()).collect()
    }

    /// Videos as rows, metrics as columns.
    pub fn matrix(rows: &[SkillMetricVector]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), METRIC_COUNT, |r, c| rows[r].values[c])
    }
}

fn mean(v: &[f64]) -> f64 {
    MeanStd::of(v).map_or(0.0, |m| m.mean)
}

fn std(v: &[f64]) -> f64 {
    MeanStd::of(v).map_or(0.0, |m| m.std)
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn wrap_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut w = a.rem_euclid(tau);
    if w > std::f64::consts::PI {
        w -= tau;
    }
    w
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Computes the metric catalogue. Absent classes contribute zeros, and when
/// nothing is visible M03 is `frame_count` (total time over one frame).
pub fn extract_metrics(
    tracks: &TrackSet,
    meta: &VideoMeta,
    config: &SkillConfig,
) -> Result<SkillMetricVector> {
    meta.validate()?;
    let fps = meta.fps;
    let labels = frame_labels(tracks, meta)?;
    let segments = segments_from_labels(&labels, fps, config.gap_tolerance);
    let mut m = [0.0f64; METRIC_COUNT];
    let instruments = ClassId::INSTRUMENTS;

    // time
    let total = meta.duration_s();
    let visible: f64 = segments.iter().map(|(s, _)| s.duration_s).sum();
    let durations: Vec<f64> = segments.iter().map(|(s, _)| s.duration_s).collect();
    m[0] = total;
    m[1] = visible;
    m[2] = if visible > 0.0 { total / visible } else { meta.frame_count as f64 };
    m[3] = total - visible;
    for (i, c) in instruments.iter().enumerate() {
        m[4 + i] = segments
            .iter()
            .filter(|(s, _)| s.class_id == *c)
            .map(|(s, _)| s.duration_s)
            .sum();
    }
    m[8] = mean(&durations);
    let mut idle_gaps = Vec::new();
    let mut cursor = 0u64;
    for (s, _) in &segments {
        idle_gaps.push(s.start_frame - cursor);
        cursor = s.end_frame + 1;
    }
    idle_gaps.push(meta.frame_count - cursor);
    m[9] = idle_gaps.into_iter().max().unwrap_or(0) as f64 / fps;
    m[10] = median(&durations);
    m[11] = m[3] / total;

    // motion
    let mut path = 0.0;
    let mut compensated = 0.0;
    let mut speeds = Vec::new();
    let mut accels = Vec::new();
    let mut jerks = Vec::new();
    let mut class_speeds: [Vec<f64>; 4] = Default::default();
    let mut heading_rates = Vec::new();
    let mut areas = Vec::new();
    for t in tracks.tracks.iter() {
        areas.extend(t.confirmed_history().map(|h| h.bbox.area()));
        for run in centroid_runs(t) {
            let raw: Vec<(f64, f64)> = run.iter().map(|r| r.1).collect();
            let pts = smooth(&raw, config.smoothing_window);
            for w in run.windows(2).zip(pts.windows(2)) {
                let (frames, p) = w;
                path += dist(p[1], p[0]);
                let moved = match meta.transforms.get(&frames[1].0) {
                    Some(tf) => tf.apply_point(p[0].0, p[0].1),
                    None => p[0],
                };
                compensated += dist(p[1], moved);
            }
            let k = kinematics_from_positions(&raw, fps, config.smoothing_window);
            if let Some(i) = instruments.iter().position(|c| *c == t.class_id) {
                class_speeds[i].extend(&k.speed);
            }
            for v in k.velocity.windows(2) {
                let (a, b) = (v[0], v[1]);
                if a.0.hypot(a.1) > 1e-9 && b.0.hypot(b.1) > 1e-9 {
                    let turn = wrap_angle(b.1.atan2(b.0) - a.1.atan2(a.0));
                    heading_rates.push(turn.abs() * fps);
                }
            }
            speeds.extend(k.speed);
            accels.extend(k.accel);
            jerks.extend(k.jerk);
        }
    }
    m[12] = path;
    m[13] = mean(&speeds);
    m[14] = std(&speeds);
    m[15] = mean(&accels);
    m[16] = mean(&jerks);
    let economies: Vec<f64> = segments
        .iter()
        .map(|(_, range)| {
            let pts: Vec<(f64, f64)> = labels[range.clone()].iter().map(|l| l.bbox.center()).collect();
            let length: f64 = pts.windows(2).map(|w| dist(w[1], w[0])).sum();
            if length > 0.0 {
                dist(pts[pts.len() - 1], pts[0]) / length
            } else {
                1.0
            }
        })
        .collect();
    m[17] = mean(&economies);
    for i in 0..4 {
        m[18 + i] = mean(&class_speeds[i]);
    }
    m[22] = mean(&areas);
    m[23] = std(&areas);
    m[24] = mean(&heading_rates);
    m[25] = compensated;

    // usage
    let switches = segments
        .windows(2)
        .filter(|w| w[0].0.class_id != w[1].0.class_id)
        .count();
    m[26] = switches as f64;
    m[27] = switches as f64 / (total / 60.0);
    m[28] = segments.len() as f64;
    for (i, c) in instruments.iter().enumerate() {
        m[29 + i] = segments.iter().filter(|(s, _)| s.class_id == *c).count() as f64;
    }
    m[33] = segments
        .iter()
        .map(|(s, _)| s.class_id)
        .collect::<BTreeSet<_>>()
        .len() as f64;

    if let Some(i) = m.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("metric {} is not finite", METRIC_NAMES[i])));
    }
    Ok(SkillMetricVector {
        video_id: meta.video_id.clone(),
        values: m.to_vec(),
    })
}
