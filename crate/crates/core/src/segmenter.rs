//! Point-prompt segmentation.
//!
//! [`Segmenter`] returns three scored mask candidates for a foreground
//! click. [`OracleSegmenter`] answers from scene ground truth: the visible
//! silhouette under the click, plus an eroded and a dilated variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Frame, Mask};
use crate::scenario::GroundTruth;

pub const CANDIDATES: usize = 3;

pub const EXACT_SCORE: f64 = 0.95;
pub const ERODED_SCORE: f64 = 0.60;
pub const DILATED_SCORE: f64 = 0.40;

#[derive(Debug, Clone, PartialEq)]
pub struct MaskCandidate {
    pub mask: Mask,
    pub score: f64,
}

pub trait Segmenter: Send + Sync {
    /// Segment the object under `(x, y)` in frame `frame_idx`.
    fn segment(&self, frame: &Frame, frame_idx: usize, x: i64, y: i64) -> Result<[MaskCandidate; CANDIDATES]>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmenterKind {
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmenterConfig {
    pub kind: SegmenterKind,
    pub perturbation_radius: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig { kind: SegmenterKind::Oracle, perturbation_radius: 1 }
    }
}

/// Ground-truth segmenter standing in for a promptable segmentation model.
#[derive(Debug, Clone)]
pub struct OracleSegmenter {
    gt: GroundTruth,
    radius: usize,
}

impl OracleSegmenter {
    pub fn new(gt: GroundTruth, radius: usize) -> Self {
        OracleSegmenter { gt, radius }
    }

    pub fn from_config(gt: GroundTruth, cfg: &SegmenterConfig) -> Self {
        match cfg.kind {
            SegmenterKind::Oracle => OracleSegmenter::new(gt, cfg.perturbation_radius),
        }
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.gt
    }
}

fn scored(mask: Mask, score: f64) -> MaskCandidate {
    let score = if mask.is_empty() { 0.0 } else { score };
    MaskCandidate { mask, score }
}

impl Segmenter for OracleSegmenter {
    fn segment(&self, frame: &Frame, frame_idx: usize, x: i64, y: i64) -> Result<[MaskCandidate; CANDIDATES]> {
        let (w, h) = frame.dims();
        if !frame.contains(x, y) {
            return Err(Error::OutOfBounds { x, y, width: w, height: h });
        }
        let labels = self.gt.label_map(frame_idx, w, h);
        let Some(player) = labels[y as usize * w + x as usize] else {
            let none = || MaskCandidate { mask: Mask::empty(w, h), score: 0.0 };
            return Ok([none(), none(), none()]);
        };
        let bits = labels.iter().map(|&l| l == Some(player)).collect();
        let exact = Mask::from_bits(w, h, bits)?;
        let eroded = erode(&exact, self.radius);
        let dilated = dilate(&exact, self.radius);
        Ok([scored(exact, EXACT_SCORE), scored(eroded, ERODED_SCORE), scored(dilated, DILATED_SCORE)])
    }
}

/// Highest-scoring non-empty candidate; ties go to the lower index.
pub fn select_best(cands: &[MaskCandidate]) -> Result<&MaskCandidate> {
    let mut best: Option<&MaskCandidate> = None;
    for c in cands.iter().filter(|c| !c.mask.is_empty()) {
        if best.is_none_or(|b| c.score > b.score) {
            best = Some(c);
        }
    }
    best.ok_or(Error::NoMask)
}

/// Sliding-window OR (dilate) or AND (erode) along one axis. Pixels outside
/// the mask count as unset.
fn morph_axis(src: &[bool], w: usize, h: usize, r: usize, horizontal: bool, dilate: bool) -> Vec<bool> {
    let mut out = vec![false; w * h];
    let (lines, len) = if horizontal { (h, w) } else { (w, h) };
    let idx = |line: usize, i: usize| if horizontal { line * w + i } else { i * w + line };
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + src[idx(line, i)] as usize;
        }
        for i in 0..len {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(len - 1);
            let set = prefix[hi + 1] - prefix[lo];
            out[idx(line, i)] = if dilate {
                set > 0
            } else {
                // window must be fully inside and fully set
                i >= r && i + r < len && set == 2 * r + 1
            };
        }
    }
    out
}

fn morph(mask: &Mask, r: usize, dilate: bool) -> Mask {
    if r == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let rows = morph_axis(mask.bits(), w, h, r, true, dilate);
    let both = morph_axis(&rows, w, h, r, false, dilate);
    Mask::from_bits(w, h, both).expect("same dimensions")
}

/// Erosion by a `(2r+1) x (2r+1)` square.
pub fn erode(mask: &Mask, r: usize) -> Mask {
    morph(mask, r, false)
}

/// Dilation by a `(2r+1) x (2r+1)` square.
pub fn dilate(mask: &Mask, r: usize) -> Mask {
    morph(mask, r, true)
}
