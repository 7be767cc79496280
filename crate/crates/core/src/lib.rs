//! Instrument tracking and surgical-skill analytics.
//!
//! The crate turns per-frame instrument detections into identity-stable
//! tracks, scores those tracks against annotations, derives a fixed catalogue
//! of time, motion and usage metrics per video, and relates the metrics to
//! skill assessments.
//!
//! | module | contents |
//! |---|---|
//! | [`geometry`] | boxes, RLE masks, camera transforms |
//! | [`tracking`] | Kalman filter, assignment, SORT / DeepSORT / StrongSORT loop |
//! | [`eval`] | MOTA, MOTP, mIoU, throughput |
//! | [`skill`] | visibility segments, kinematics, the 34-metric vector |
//! | [`stats`] | correlation, kappa, ANOVA selection, classifiers, folds |
//! | [`io`] | wire formats, annotation ingestion, streaming |

pub mod classes;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod skill;
pub mod stats;
pub mod tracking;

pub use classes::{ClassId, ClassRegistry};
pub use error::{Error, Result};
