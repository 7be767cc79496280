use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracking::{FrameInput, Tracker, TrackerConfig};

/// Source of elapsed time for benchmarks.
pub trait Clock {
    /// Time since an arbitrary fixed origin.
    fn now(&mut self) -> Duration;
}

#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&mut self) -> Duration {
        self.origin.elapsed()
    }
}

/// Clock that advances by a fixed tick on every reading.
#[derive(Debug, Clone, Copy)]
pub struct ManualClock {
    now: Duration,
    tick: Duration,
}

impl ManualClock {
    pub fn new(tick: Duration) -> Self {
        Self {
            now: Duration::ZERO,
            tick,
        }
    }
}

impl Clock for ManualClock {
    fn now(&mut self) -> Duration {
        let t = self.now;
        self.now += self.tick;
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpsReport {
    pub frames: usize,
    pub total_seconds: f64,
    /// Frames divided by total processing time.
    pub fps_mean: f64,
    /// Population std of per-frame instantaneous rates.
    pub fps_std: f64,
    pub latency_p50_ms: f64,
    pub latency_p95_ms: f64,
    pub latency_p99_ms: f64,
    pub latency_max_ms: f64,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    // nearest rank
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl FpsReport {
    /// `None` for an empty sample or zero total time.
    pub fn from_latencies(latencies: &[Duration]) -> Option<Self> {
        let secs: Vec<f64> = latencies.iter().map(Duration::as_secs_f64).collect();
        let total: f64 = secs.iter().sum();
        if secs.is_empty() || total <= 0.0 {
            return None;
        }
        let rates: Vec<f64> = secs.iter().filter(|&&s| s > 0.0).map(|s| 1.0 / s).collect();
        let fps_std = if rates.is_empty() {
            0.0
        } else {
            let m = rates.iter().sum::<f64>() / rates.len() as f64;
            (rates.iter().map(|r| (r - m).powi(2)).sum::<f64>() / rates.len() as f64).sqrt()
        };
        let mut ms: Vec<f64> = secs.iter().map(|s| s * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        Some(Self {
            frames: secs.len(),
            total_seconds: total,
            fps_mean: secs.len() as f64 / total,
            fps_std,
            latency_p50_ms: percentile(&ms, 50.0),
            latency_p95_ms: percentile(&ms, 95.0),
            latency_p99_ms: percentile(&ms, 99.0),
            latency_max_ms: ms[ms.len() - 1],
        })
    }
}

/// Times every tracker step over pre-parsed frames; parsing and I/O are
/// outside the measured region.
pub fn fps_benchmark(
    config: TrackerConfig,
    frames: &[FrameInput],
    clock: &mut dyn Clock,
) -> Result<FpsReport> {
    let mut tracker = Tracker::new(config)?;
    let mut latencies = Vec::with_capacity(frames.len());
    for f in frames {
        let start = clock.now();
        tracker.step(f.frame_index, &f.detections, f.transform.as_ref())?;
        latencies.push(clock.now().saturating_sub(start));
    }
    FpsReport::from_latencies(&latencies)
        .ok_or_else(|| Error::InvalidInput("benchmark stream is empty".into()))
}
