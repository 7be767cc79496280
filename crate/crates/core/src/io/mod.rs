//! Wire formats, annotation ingestion and the streaming pipeline.
//!
//! Detections and tracks are JSON Lines; tabular reports are CSV. Every
//! output file starts with a [`Provenance`] record naming the configuration
//! hash, the seed and the digests of its inputs.

mod annotations;
mod detections;
mod mosats_csv;
mod reports;
mod stream;
pub mod synth;
mod tracks;

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use annotations::{
    ingest_annotations, write_png_index_map, AnnotationLayout, AnnotationSet, DatasetSummary,
    PngIndexLayout, VideoAnnotations,
};
pub use detections::{
    read_detection_streams, read_detections_file, write_detection_records, ClassField,
    DetectionRecord, VideoStream,
};
pub use mosats_csv::{read_mosats, read_mosats_file, write_mosats};
pub use reports::{read_metrics_csv, read_video_counts, write_correlation_csv, write_metrics_csv};
pub use stream::{stream_track, StreamOutcome, StreamStats};
pub use tracks::{
    read_track_file, read_tracks, write_frame_outputs, write_track_file, write_tracks,
    FrameOutputLine, TrackFile,
};

use crate::error::{Error, Result};

/// Identifies how an output was produced. Carries no timestamp so that
/// identical runs produce identical files.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the canonical JSON of the effective configuration.
    pub config_sha256: String,
    pub seed: u64,
    /// Input name to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new<C: Serialize>(config: &C, seed: u64) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(&serde_json::to_vec(config)?),
            seed,
            inputs: BTreeMap::new(),
        })
    }

    pub fn with_input(mut self, name: impl Into<String>, digest: impl Into<String>) -> Self {
        self.inputs.insert(name.into(), digest.into());
        self
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of a file, or of every file below a directory in path order.
pub fn path_digest(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, &mut files)?;
        files.sort();
        for f in files {
            let rel = f.strip_prefix(path).unwrap_or(&f);
            hasher.update(rel.to_string_lossy().as_bytes());
            hasher.update([0]);
            hash_file(&f, &mut hasher)?;
        }
    } else {
        hash_file(path, &mut hasher)?;
    }
    Ok(hex::encode(hasher.finalize()))
}

fn hash_file(path: &Path, hasher: &mut Sha256) -> Result<()> {
    let mut f = std::fs::File::open(path).map_err(|e| file_error(path, e))?;
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf).map_err(|e| file_error(path, e))?;
        if n == 0 {
            return Ok(());
        }
        hasher.update(&buf[..n]);
    }
}

fn collect_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| file_error(dir, e))? {
        let p = entry.map_err(|e| file_error(dir, e))?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

pub(crate) fn file_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn provenance_is_stable() {
        let a = Provenance::new(&serde_json::json!({"x": 1}), 7).unwrap();
        let b = Provenance::new(&serde_json::json!({"x": 1}), 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.config_sha256, Provenance::new(&serde_json::json!({"x": 2}), 7).unwrap().config_sha256);
    }

    #[test]
    fn directory_digest_depends_on_content() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "one").unwrap();
        let first = path_digest(dir.path()).unwrap();
        assert_eq!(first, path_digest(dir.path()).unwrap());
        std::fs::write(dir.path().join("a.txt"), "two").unwrap();
        assert_ne!(first, path_digest(dir.path()).unwrap());
    }
}
