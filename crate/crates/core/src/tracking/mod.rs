//! SORT-family multi-object tracking.
//!
//! [`Tracker`] consumes per-frame detections and maintains identity-stable
//! tracks. The three variants share one loop and differ only in defaults:
//!
//! * `sort`: IoU-gated motion cost only.
//! * `deepsort`: adds a FIFO gallery of appearance embeddings.
//! * `strongsort`: replaces the gallery with an EMA feature, scales
//!   measurement noise by detection confidence and applies the supplied
//!   camera-motion transforms before prediction.

pub mod appearance;
pub mod assignment;
pub mod kalman;
mod tracker;

pub use appearance::{cosine_distance, ema_update, FeatureGallery};
pub use assignment::{assign, Assignment, CostMatrix};
pub use kalman::{KalmanFilter, KalmanState};
pub use tracker::{
    run, Detection, FrameInput, HistoryEntry, MotionCost, Track, TrackOutput, TrackSet,
    TrackStatus, Tracker, TrackerConfig, Variant,
};
