//! The guide's code listings, compiled and run by `cargo test --doc`.
//!
//! mdbook cannot test listings that depend on workspace crates, so each
//! chapter is included here as module documentation instead. A failing
//! doc-test names the module, and the module names the chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}
#[doc = include_str!("../../../book/src/tracking.md")]
pub mod tracking {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/skill-metrics.md")]
pub mod skill_metrics {}
#[doc = include_str!("../../../book/src/statistics.md")]
pub mod statistics {}
#[doc = include_str!("../../../book/src/io.md")]
pub mod io {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
