use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::file_error;
use crate::classes::{ClassId, ClassRegistry};
use crate::error::{Error, Result};
use crate::eval::GroundTruthFrame;
use crate::geometry::{mask_to_box, rle_encode, Bitmap};

/// Annotations of one video, sorted by frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoAnnotations {
    pub video_id: String,
    /// When known, unannotated frames up to this count are included.
    pub frame_count: Option<u64>,
    pub frames: Vec<GroundTruthFrame>,
}

impl VideoAnnotations {
    pub fn annotated(&self) -> impl Iterator<Item = &GroundTruthFrame> {
        self.frames.iter().filter(|f| f.annotated)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub videos: usize,
    pub images: u64,
    /// Annotated images per instrument name.
    pub per_class: BTreeMap<String, u64>,
    pub no_instrument: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub registry: ClassRegistry,
    pub videos: Vec<VideoAnnotations>,
    pub summary: DatasetSummary,
}

impl AnnotationSet {
    pub fn video(&self, id: &str) -> Option<&VideoAnnotations> {
        self.videos.iter().find(|v| v.video_id == id)
    }

    fn summarise(&mut self) {
        let mut s = DatasetSummary {
            videos: self.videos.len(),
            ..Default::default()
        };
        for f in self.videos.iter().flat_map(|v| v.annotated()) {
            s.images += 1;
            match f.class_id {
                Some(c) => {
                    let name = self.registry.name(c).map_or_else(|| c.to_string(), str::to_string);
                    *s.per_class.entry(name).or_insert(0) += 1;
                }
                None => s.no_instrument += 1,
            }
        }
        self.summary = s;
    }
}

/// A readable on-disk annotation layout.
pub trait AnnotationLayout {
    fn name(&self) -> &'static str;
    /// Cheap check whether `root` looks like this layout.
    fn matches(&self, root: &Path) -> bool;
    fn read(&self, root: &Path) -> Result<AnnotationSet>;
}

#[derive(Debug, Default, Deserialize)]
struct Manifest {
    #[serde(default)]
    classes: Option<BTreeMap<u32, String>>,
    #[serde(default)]
    videos: BTreeMap<String, ManifestVideo>,
}

#[derive(Debug, Default, Deserialize)]
struct ManifestVideo {
    frame_count: Option<u64>,
}

/// `root/<video_id>/<frame>.png` palette-index maps (0 is background, any
/// other index a class), with an optional `root/manifest.json` holding the
/// class names and per-video frame counts.
#[derive(Debug, Clone, Copy, Default)]
pub struct PngIndexLayout;

impl PngIndexLayout {
    fn decode(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
        let f = File::open(path).map_err(|e| file_error(path, e))?;
        let mut decoder = png::Decoder::new(BufReader::new(f));
        decoder.set_transformations(png::Transformations::IDENTITY);
        let mut reader = decoder.read_info().map_err(|e| file_error(path, e))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| file_error(path, "image too large"))?;
        let mut buf = vec![0u8; size];
        let info = reader.next_frame(&mut buf).map_err(|e| file_error(path, e))?;
        let bits = match (info.color_type, info.bit_depth) {
            (png::ColorType::Indexed | png::ColorType::Grayscale, d) if d != png::BitDepth::Sixteen => d as u32,
            (c, d) => return Err(file_error(path, format!("not an index map ({c:?}, {d:?})"))),
        };
        let (w, h) = (info.width, info.height);
        let mut indices = Vec::with_capacity((w * h) as usize);
        let per_byte = 8 / bits;
        let mask = ((1u16 << bits) - 1) as u8;
        for row in buf.chunks(info.line_size).take(h as usize) {
            for x in 0..w {
                let byte = row[(x / per_byte) as usize];
                let shift = 8 - bits * (x % per_byte + 1);
                indices.push((byte >> shift) & mask);
            }
        }
        Ok((w, h, indices))
    }

    fn frame(path: &Path, frame_index: u64, registry: &ClassRegistry) -> Result<GroundTruthFrame> {
        let (w, h, indices) = Self::decode(path)?;
        let mut class: Option<u8> = None;
        for &i in indices.iter().filter(|&&i| i != 0) {
            match class {
                None => {
                    if !registry.contains(ClassId(u32::from(i))) {
                        return Err(file_error(path, format!("frame {frame_index}: unknown class index {i}")));
                    }
                    class = Some(i);
                }
                Some(c) if c != i => {
                    return Err(file_error(
                        path,
                        format!("frame {frame_index}: more than one instrument ({c} and {i})"),
                    ))
                }
                _ => {}
            }
        }
        let Some(c) = class else {
            return Ok(GroundTruthFrame::annotated(frame_index, None, None, None));
        };
        let bitmap = Bitmap::from_pixels(w, h, indices.iter().map(|&i| i != 0).collect())?;
        let mask = rle_encode(&bitmap);
        let bbox = mask_to_box(&mask);
        Ok(GroundTruthFrame::annotated(frame_index, Some(ClassId(u32::from(c))), Some(mask), bbox))
    }
}

impl AnnotationLayout for PngIndexLayout {
    fn name(&self) -> &'static str {
        "png-index"
    }

    fn matches(&self, root: &Path) -> bool {
        root.is_dir()
    }

    fn read(&self, root: &Path) -> Result<AnnotationSet> {
        let manifest_path = root.join("manifest.json");
        let manifest: Manifest = if manifest_path.exists() {
            let text = std::fs::read_to_string(&manifest_path).map_err(|e| file_error(&manifest_path, e))?;
            serde_json::from_str(&text).map_err(|e| file_error(&manifest_path, e))?
        } else {
            Manifest::default()
        };
        let registry = match manifest.classes {
            Some(c) => ClassRegistry::new(c)?,
            None => ClassRegistry::default(),
        };
        let mut dirs: Vec<_> = std::fs::read_dir(root)
            .map_err(|e| file_error(root, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        dirs.sort();
        let mut videos = Vec::new();
        for dir in dirs {
            let video_id = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let mut pngs: Vec<(u64, std::path::PathBuf)> = Vec::new();
            for entry in std::fs::read_dir(&dir).map_err(|e| file_error(&dir, e))? {
                let p = entry.map_err(|e| file_error(&dir, e))?.path();
                if p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png")) {
                    let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("");
                    let frame = stem
                        .parse::<u64>()
                        .map_err(|_| file_error(&p, "file name is not a frame number"))?;
                    pngs.push((frame, p));
                }
            }
            pngs.sort();
            if let Some(w) = pngs.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(file_error(&w[1].1, format!("duplicate frame {}", w[1].0)));
            }
            let mut annotated = Vec::with_capacity(pngs.len());
            for (frame, p) in &pngs {
                annotated.push(Self::frame(p, *frame, &registry)?);
            }
            let frame_count = manifest.videos.get(&video_id).and_then(|v| v.frame_count);
            let frames = match frame_count {
                Some(n) => {
                    if let Some(last) = annotated.last().filter(|f| f.frame_index >= n) {
                        return Err(Error::InvalidInput(format!(
                            "video {video_id}: annotated frame {} beyond frame count {n}",
                            last.frame_index
                        )));
                    }
                    let mut by_frame: BTreeMap<u64, GroundTruthFrame> =
                        annotated.into_iter().map(|f| (f.frame_index, f)).collect();
                    (0..n)
                        .map(|f| by_frame.remove(&f).unwrap_or_else(|| GroundTruthFrame::unannotated(f)))
                        .collect()
                }
                None => annotated,
            };
            videos.push(VideoAnnotations {
                video_id,
                frame_count,
                frames,
            });
        }
        let mut set = AnnotationSet {
            registry,
            videos,
            summary: DatasetSummary::default(),
        };
        set.summarise();
        Ok(set)
    }
}

/// Reads an annotation directory with the first layout that recognises it.
pub fn ingest_annotations(root: &Path) -> Result<AnnotationSet> {
    let layouts: [&dyn AnnotationLayout; 1] = [&PngIndexLayout];
    for layout in layouts {
        if layout.matches(root) {
            log::debug!("reading {} as {}", root.display(), layout.name());
            return layout.read(root);
        }
    }
    Err(file_error(root, "not a recognised annotation layout"))
}

/// Writes an 8-bit palette-index PNG; `indices` is row-major.
pub fn write_png_index_map(path: &Path, width: u32, height: u32, indices: &[u8]) -> Result<()> {
    if indices.len() != (width as usize) * (height as usize) {
        return Err(Error::InvalidInput("index map size does not match dimensions".into()));
    }
    let f = File::create(path).map_err(|e| file_error(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(f), width, height);
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    let max = indices.iter().copied().max().unwrap_or(0);
    let palette: Vec<u8> = (0..=max).flat_map(|i| [i.wrapping_mul(50), i.wrapping_mul(90), i.wrapping_mul(130)]).collect();
    enc.set_palette(palette);
    let mut w = enc.write_header().map_err(|e| file_error(path, e))?;
    w.write_image_data(indices).map_err(|e| file_error(path, e))?;
    w.finish().map_err(|e| file_error(path, e))?;
    Ok(())
}
