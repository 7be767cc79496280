use serde::{Deserialize, Serialize};

use super::{SkillConfig, VideoMeta};
use crate::tracking::Track;

/// Magnitude series in pixels per second, per second squared and cubed.
///
/// For `N` uniformly spaced positions: speed has `N - 2` central-difference
/// points (one forward difference when `N == 2`), acceleration `N - 2`
/// second differences and jerk `N - 3` third differences. Orders without
/// enough points are empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Kinematics {
    pub speed: Vec<f64>,
    pub accel: Vec<f64>,
    pub jerk: Vec<f64>,
    /// Velocity vectors behind `speed`, px/s.
    pub velocity: Vec<(f64, f64)>,
}

impl Kinematics {
    fn extend(&mut self, other: Kinematics) {
        self.speed.extend(other.speed);
        self.accel.extend(other.accel);
        self.jerk.extend(other.jerk);
        self.velocity.extend(other.velocity);
    }
}

/// Centred moving average whose window shrinks symmetrically at the ends.
pub fn smooth(points: &[(f64, f64)], window: usize) -> Vec<(f64, f64)> {
    let half = window.max(1) / 2;
    let n = points.len();
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let span = &points[i - h..=i + h];
            let k = span.len() as f64;
            (
                span.iter().map(|p| p.0).sum::<f64>() / k,
                span.iter().map(|p| p.1).sum::<f64>() / k,
            )
        })
        .collect()
}

fn norm(x: f64, y: f64) -> f64 {
    x.hypot(y)
}

/// Derivative series of positions sampled once per frame.
pub fn kinematics_from_positions(points: &[(f64, f64)], fps: f64, window: usize) -> Kinematics {
    let p = smooth(points, window);
    let n = p.len();
    let mut k = Kinematics::default();
    if n == 2 {
        let v = ((p[1].0 - p[0].0) * fps, (p[1].1 - p[0].1) * fps);
        k.velocity.push(v);
        k.speed.push(norm(v.0, v.1));
    }
    if n >= 3 {
        for i in 1..n - 1 {
            let v = (
                (p[i + 1].0 - p[i - 1].0) * 0.5 * fps,
                (p[i + 1].1 - p[i - 1].1) * 0.5 * fps,
            );
            k.velocity.push(v);
            k.speed.push(norm(v.0, v.1));
            let ax = (p[i + 1].0 - 2.0 * p[i].0 + p[i - 1].0) * fps * fps;
            let ay = (p[i + 1].1 - 2.0 * p[i].1 + p[i - 1].1) * fps * fps;
            k.accel.push(norm(ax, ay));
        }
    }
    if n >= 4 {
        let f3 = fps * fps * fps;
        for i in 0..n - 3 {
            let jx = p[i + 3].0 - 3.0 * p[i + 2].0 + 3.0 * p[i + 1].0 - p[i].0;
            let jy = p[i + 3].1 - 3.0 * p[i + 2].1 + 3.0 * p[i + 1].1 - p[i].1;
            k.jerk.push(norm(jx, jy) * f3);
        }
    }
    k
}

/// Consecutive-frame runs of a track's confirmed centroids.
pub(crate) fn centroid_runs(track: &Track) -> Vec<Vec<(u64, (f64, f64))>> {
    let mut runs: Vec<Vec<(u64, (f64, f64))>> = Vec::new();
    for h in track.confirmed_history() {
        let c = (h.frame_index, h.bbox.center());
        match runs.last_mut() {
            Some(run) if run.last().is_some_and(|l| l.0 + 1 == h.frame_index) => run.push(c),
            _ => runs.push(vec![c]),
        }
    }
    runs
}

/// Speed, acceleration and jerk of a track's reported centroid. Runs of
/// consecutive frames are differentiated separately and concatenated.
pub fn kinematics(track: &Track, meta: &VideoMeta, config: &SkillConfig) -> Kinematics {
    let mut out = Kinematics::default();
    for run in centroid_runs(track) {
        let pts: Vec<(f64, f64)> = run.iter().map(|r| r.1).collect();
        out.extend(kinematics_from_positions(&pts, meta.fps, config.smoothing_window));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary() {
        let k = kinematics_from_positions(&[(3.0, 4.0); 10], 25.0, 5);
        assert!(k.speed.iter().chain(&k.accel).chain(&k.jerk).all(|&v| v == 0.0));
        assert_eq!((k.speed.len(), k.accel.len(), k.jerk.len()), (8, 8, 7));
    }

    #[test]
    fn uniform_motion() {
        let pts: Vec<_> = (0..20).map(|t| (2.0 * t as f64, 0.0)).collect();
        for window in [1, 5] {
            let k = kinematics_from_positions(&pts, 25.0, window);
            assert!(k.speed.iter().all(|&s| (s - 50.0).abs() < 1e-9));
            assert!(k.accel.iter().all(|&a| a.abs() < 1e-9));
        }
    }

    #[test]
    fn quadratic_has_constant_accel() {
        let pts: Vec<_> = (0..12).map(|t| ((t * t) as f64, 0.0)).collect();
        let k = kinematics_from_positions(&pts, 25.0, 1);
        assert!(k.accel.iter().all(|&a| (a - 2.0 * 625.0).abs() < 1e-9));
        assert!(k.jerk.iter().all(|&j| j.abs() < 1e-9));
    }

    #[test]
    fn short_histories() {
        let k = kinematics_from_positions(&[(0.0, 0.0), (1.0, 0.0)], 10.0, 1);
        assert_eq!(k.speed, vec![10.0]);
        assert!(k.accel.is_empty() && k.jerk.is_empty());
        assert_eq!(kinematics_from_positions(&[(0.0, 0.0)], 10.0, 1), Kinematics::default());
        let k = kinematics_from_positions(&[(0.0, 0.0), (1.0, 0.0), (4.0, 0.0)], 10.0, 1);
        assert_eq!((k.speed.len(), k.accel.len(), k.jerk.len()), (1, 1, 0));
    }

    #[test]
    fn smoothing_shrinks_at_edges() {
        let s = smooth(&[(0.0, 0.0), (10.0, 0.0), (0.0, 0.0), (0.0, 0.0)], 5);
        assert_eq!(s[0], (0.0, 0.0));
        assert!((s[1].0 - 10.0 / 3.0).abs() < 1e-12);
        assert!((s[2].0 - 10.0 / 3.0).abs() < 1e-12);
        assert_eq!(s[3], (0.0, 0.0));
    }
}
