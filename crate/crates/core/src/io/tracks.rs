use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{file_error, Provenance};
use crate::error::{Error, Result};
use crate::tracking::{Track, TrackOutput, TrackSet};

/// Contents of a track file: a provenance header and one or more videos.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackFile {
    pub provenance: Provenance,
    pub videos: Vec<TrackSet>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Provenance(Provenance),
    Video { video_id: String, frames: Vec<u64> },
    Track { video_id: String, track: Track },
}

/// Writes the header, then per video one `video` line and one line per track.
pub fn write_tracks<W: Write>(w: W, file: &TrackFile) -> Result<()> {
    let mut w = BufWriter::new(w);
    serde_json::to_writer(&mut w, &Line::Provenance(file.provenance.clone()))?;
    w.write_all(b"\n")?;
    for set in &file.videos {
        serde_json::to_writer(
            &mut w,
            &Line::Video {
                video_id: set.video_id.clone(),
                frames: set.frames.clone(),
            },
        )?;
        w.write_all(b"\n")?;
        for t in &set.tracks {
            serde_json::to_writer(
                &mut w,
                &Line::Track {
                    video_id: set.video_id.clone(),
                    track: t.clone(),
                },
            )?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_tracks<R: BufRead>(reader: R, path: &str) -> Result<TrackFile> {
    let mut provenance = None;
    let mut videos: Vec<TrackSet> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let err = |m: String| Error::Parse {
            path: path.to_string(),
            line: lineno,
            message: m,
        };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Line>(&line).map_err(|e| err(e.to_string()))? {
            Line::Provenance(p) => {
                if lineno != 1 || provenance.is_some() {
                    return Err(err("provenance header must be the first line".into()));
                }
                provenance = Some(p);
            }
            Line::Video { video_id, frames } => videos.push(TrackSet {
                video_id,
                frames,
                tracks: Vec::new(),
            }),
            Line::Track { video_id, track } => match videos.last_mut() {
                Some(v) if v.video_id == video_id => v.tracks.push(track),
                _ => return Err(err(format!("track for video '{video_id}' outside its section"))),
            },
        }
    }
    let provenance = provenance.ok_or_else(|| Error::Parse {
        path: path.to_string(),
        line: 1,
        message: "missing provenance header".into(),
    })?;
    Ok(TrackFile { provenance, videos })
}

pub fn write_track_file(path: &Path, file: &TrackFile) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| file_error(path, e))?;
    write_tracks(f, file)
}

pub fn read_track_file(path: &Path) -> Result<TrackFile> {
    let f = std::fs::File::open(path).map_err(|e| file_error(path, e))?;
    read_tracks(BufReader::new(f), &path.display().to_string())
}

/// One line of per-frame output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameOutputLine {
    pub video_id: String,
    pub frame: u64,
    pub tracks: Vec<TrackOutput>,
}

pub fn write_frame_outputs<W: Write>(
    w: W,
    video_id: &str,
    outputs: &BTreeMap<u64, Vec<TrackOutput>>,
) -> Result<()> {
    let mut w = BufWriter::new(w);
    for (&frame, tracks) in outputs {
        serde_json::to_writer(
            &mut w,
            &FrameOutputLine {
                video_id: video_id.to_string(),
                frame,
                tracks: tracks.clone(),
            },
        )?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::ClassId;
    use crate::geometry::BoundingBox;
    use crate::tracking::{run, Detection, FrameInput, TrackerConfig, Variant};

    fn sample_set() -> TrackSet {
        let frames = (0..30).map(|f| FrameInput {
            frame_index: f,
            detections: vec![Detection::new(
                f,
                ClassId::KERRISONS,
                BoundingBox::new(10.0 + f as f64 * 0.37, 20.0, 50.0 + f as f64 * 0.37, 90.0).unwrap(),
                0.8,
            )
            .with_embedding(vec![0.6, 0.8])],
            transform: None,
        });
        let mut config = TrackerConfig::new(Variant::StrongSort);
        config.detection_interval = 1;
        let mut s = run(config, frames).unwrap();
        s.video_id = "v1".into();
        s
    }

    #[test]
    fn round_trip_is_identical() {
        let file = TrackFile {
            provenance: Provenance::new(&"cfg", 3).unwrap().with_input("in", "abc"),
            videos: vec![sample_set(), TrackSet {
                video_id: "empty".into(),
                ..Default::default()
            }],
        };
        let mut buf = Vec::new();
        write_tracks(&mut buf, &file).unwrap();
        let back = read_tracks(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, file);
        let mut again = Vec::new();
        write_tracks(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn header_required() {
        let text = "{\"type\":\"video\",\"video_id\":\"a\",\"frames\":[]}\n";
        assert!(matches!(read_tracks(text.as_bytes(), "m"), Err(Error::Parse { .. })));
    }

    #[test]
    fn frame_lines() {
        let s = sample_set();
        let mut buf = Vec::new();
        write_frame_outputs(&mut buf, "v1", &s.frame_outputs()).unwrap();
        let lines: Vec<FrameOutputLine> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 30);
        assert!(lines[..2].iter().all(|l| l.tracks.is_empty()));
        assert_eq!(lines[29].tracks[0].track_id, 1);
    }
}
