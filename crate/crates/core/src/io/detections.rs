use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::file_error;
use crate::classes::{ClassId, ClassRegistry};
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, CameraTransform, MaskRLE};
use crate::tracking::{Detection, FrameInput};

/// Class given either by registry name or by palette index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassField {
    Index(u32),
    Name(String),
}

impl ClassField {
    pub fn resolve(&self, registry: &ClassRegistry) -> Result<ClassId> {
        match self {
            ClassField::Index(i) => registry.check(ClassId(*i)),
            ClassField::Name(n) => registry.lookup(n),
        }
    }
}

/// One line of a detection file. A record without `class` and `box` marks
/// a frame that was processed but produced no detection; it may still carry
/// a camera transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub video_id: String,
    pub frame: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<ClassField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_rle: Option<MaskRLE>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<CameraTransform>,
}

impl DetectionRecord {
    pub fn marker(video_id: impl Into<String>, frame: u64) -> Self {
        Self {
            video_id: video_id.into(),
            frame,
            class: None,
            score: None,
            bbox: None,
            mask_rle: None,
            embedding: None,
            transform: None,
        }
    }

    pub fn from_detection(video_id: impl Into<String>, d: &Detection, registry: &ClassRegistry) -> Self {
        Self {
            class: Some(match registry.name(d.class_id) {
                Some(n) => ClassField::Name(n.to_string()),
                None => ClassField::Index(d.class_id.0),
            }),
            score: Some(d.confidence),
            bbox: Some(d.bbox.to_array()),
            mask_rle: d.mask.clone(),
            embedding: d.embedding.clone(),
            ..Self::marker(video_id, d.frame_index)
        }
    }

    /// Parses and schema-checks one JSON line.
    pub fn parse(line: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(line)?;
        match (&r.class, &r.bbox) {
            (Some(_), Some(_)) => {
                let score = r.score.ok_or_else(|| Error::InvalidDetection("missing score".into()))?;
                if !(0.0..=1.0).contains(&score) {
                    return Err(Error::InvalidDetection(format!("score {score} outside [0, 1]")));
                }
            }
            (None, None) => {}
            _ => {
                return Err(Error::InvalidDetection(
                    "class and box must be given together".into(),
                ))
            }
        }
        Ok(r)
    }

    /// The detection carried by this record, `None` for a frame marker.
    pub fn detection(&self, registry: &ClassRegistry) -> Result<Option<Detection>> {
        let (Some(class), Some(b)) = (&self.class, &self.bbox) else {
            return Ok(None);
        };
        let class_id = class.resolve(registry)?;
        let bbox = BoundingBox::new(b[0], b[1], b[2], b[3])?;
        let mut d = Detection::new(self.frame, class_id, bbox, self.score.unwrap_or(1.0));
        d.mask = self.mask_rle.clone();
        d.embedding = self.embedding.clone();
        d.validate()?;
        Ok(Some(d))
    }
}

/// All frames of one video, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VideoStream {
    pub video_id: String,
    pub frames: Vec<FrameInput>,
}

impl VideoStream {
    pub fn frame_count_hint(&self) -> u64 {
        self.frames.last().map_or(0, |f| f.frame_index + 1)
    }
}

fn parse_error(path: &str, line: usize, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: e.to_string(),
    }
}

/// Reads a detection file, grouping records by video (first appearance
/// order) and merging records of the same frame. Frames must not decrease
/// within a video. Blank lines are ignored.
pub fn read_detection_streams<R: BufRead>(
    reader: R,
    path: &str,
    registry: &ClassRegistry,
) -> Result<Vec<VideoStream>> {
    let mut videos: Vec<VideoStream> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| parse_error(path, lineno, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = DetectionRecord::parse(&line).map_err(|e| parse_error(path, lineno, e))?;
        let detection = match record.detection(registry) {
            Ok(d) => d,
            // registry violations keep their kind so callers can tell them apart
            Err(e @ Error::UnknownClass(_)) => return Err(e),
            Err(e) => return Err(parse_error(path, lineno, e)),
        };
        let idx = match videos.iter().position(|v| v.video_id == record.video_id) {
            Some(i) => i,
            None => {
                videos.push(VideoStream {
                    video_id: record.video_id.clone(),
                    frames: Vec::new(),
                });
                videos.len() - 1
            }
        };
        let frames = &mut videos[idx].frames;
        match frames.last_mut() {
            Some(f) if f.frame_index == record.frame => {
                f.detections.extend(detection);
                if record.transform.is_some() {
                    f.transform = record.transform;
                }
            }
            Some(f) if f.frame_index > record.frame => {
                log::error!("{path}:{lineno}: frame {} after frame {}", record.frame, f.frame_index);
                return Err(Error::OutOfOrderFrame {
                    previous: f.frame_index,
                    got: record.frame,
                });
            }
            _ => frames.push(FrameInput {
                frame_index: record.frame,
                detections: detection.into_iter().collect(),
                transform: record.transform,
            }),
        }
    }
    Ok(videos)
}

pub fn read_detections_file(path: &Path, registry: &ClassRegistry) -> Result<Vec<VideoStream>> {
    let f = std::fs::File::open(path).map_err(|e| file_error(path, e))?;
    read_detection_streams(BufReader::new(f), &path.display().to_string(), registry)
}

pub fn write_detection_records<W: Write>(mut w: W, records: &[DetectionRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
