//! Frame sequence I/O (binary PPM) and RGB to HSV conversion.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Frame;

pub const DEFAULT_FPS: f64 = 25.0;
pub const SEQ_META_FILE: &str = "seq.json";

/// Contents of `seq.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
}

#[derive(Debug, Clone)]
pub struct FrameSequence {
    pub dir: PathBuf,
    pub frames: Vec<Frame>,
    pub fps: f64,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(Frame::dims)
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.ppm")
}

fn parse_frame_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".ppm")?;
    if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Load every `frame_%06d.ppm` in `dir`, in index order starting at 0.
pub fn load_frame_sequence(dir: &Path) -> Result<FrameSequence> {
    if !dir.is_dir() {
        return Err(Error::MissingDirectory(dir.to_path_buf()));
    }
    let mut indices = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(i) = entry.file_name().to_str().and_then(parse_frame_index) {
            indices.push(i);
        }
    }
    if indices.is_empty() {
        return Err(Error::EmptySequence(dir.to_path_buf()));
    }
    indices.sort_unstable();
    for (expected, &found) in indices.iter().enumerate() {
        if expected != found {
            return Err(Error::NonContiguous { expected, found });
        }
    }

    let frames = indices.par_iter().map(|&i| load_frame(&dir.join(frame_file_name(i)))).collect::<Result<Vec<_>>>()?;
    let dims = frames[0].dims();
    if frames.iter().any(|f| f.dims() != dims) {
        return Err(Error::MixedFrameSizes(dir.to_path_buf()));
    }

    let meta_path = dir.join(SEQ_META_FILE);
    let fps = if meta_path.exists() {
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: SequenceMeta = serde_json::from_str(&text).map_err(|e| Error::json(&meta_path, e))?;
        meta.fps
    } else {
        DEFAULT_FPS
    };

    Ok(FrameSequence { dir: dir.to_path_buf(), frames, fps })
}

pub fn write_sequence_meta(dir: &Path, meta: &SequenceMeta) -> Result<()> {
    let path = dir.join(SEQ_META_FILE);
    let mut text = serde_json::to_string_pretty(meta).map_err(|e| Error::json(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn encode_ppm(frame: &Frame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.data());
    out
}

pub fn save_frame(frame: &Frame, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_ppm(frame)).map_err(|e| Error::io(path, e))
}

pub fn load_frame(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes).map_err(|reason| Error::MalformedPpm { path: path.to_path_buf(), reason })
}

/// Parse a binary P6 image with maxval 255. Header comments are allowed.
pub fn decode_ppm(bytes: &[u8]) -> std::result::Result<Frame, String> {
    let mut pos = 0;
    let mut fields = [0usize; 3];
    if bytes.get(..2) != Some(b"P6") {
        return Err("missing P6 magic".into());
    }
    pos += 2;
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(format!("expected a number at byte {start}"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("number out of range at byte {start}"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("missing whitespace after maxval".into());
    }
    pos += 1;

    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    let payload = &bytes[pos..];
    if payload.len() != width * height * 3 {
        return Err(format!("expected {} payload bytes, found {}", width * height * 3, payload.len()));
    }
    Frame::new(width, height, payload.to_vec()).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvPixel {
    /// Degrees in `[0, 360)`.
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Hexcone RGB to HSV. Achromatic inputs map to `h = 0, s = 0`.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> HsvPixel {
    let (rf, gf, bf) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let delta = max - min;
    let v = max;
    if delta == 0.0 {
        return HsvPixel { h: 0.0, s: 0.0, v };
    }
    let s = delta / max;
    let sector = if max == rf {
        ((gf - bf) / delta).rem_euclid(6.0)
    } else if max == gf {
        (bf - rf) / delta + 2.0
    } else {
        (rf - gf) / delta + 4.0
    };
    let mut h = 60.0 * sector;
    if h >= 360.0 {
        h -= 360.0;
    }
    HsvPixel { h, s, v }
}
