//! Shared geometric and identity types.
//!
//! Boxes follow the min/max-difference convention: a mask whose set pixels
//! span columns `a..=b` yields `w = b - a`, so a box covers the inclusive
//! pixel span `[x, x + w] x [y, y + h]` and holds `(w + 1) * (h + 1)` pixels.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Owned RGB raster, row-major, 8 bits per channel.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return Err(Error::FrameSize { width, height, got: data.len() });
        }
        Ok(Frame { width, height, data })
    }

    /// A frame filled with a single colour.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "frame dimensions must be positive");
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Frame { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Luma (BT.601) of every pixel, row-major.
    pub fn to_gray(&self) -> Vec<f32> {
        self.data.chunks_exact(3).map(|p| 0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32).collect()
    }
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame").field("width", &self.width).field("height", &self.height).finish()
    }
}

/// Axis-aligned box `(x, y, w, h)` in pixels. Serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 4]", into = "[i32; 4]")]
pub struct BBox {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

impl From<[i32; 4]> for BBox {
    fn from([x, y, w, h]: [i32; 4]) -> Self {
        BBox { x, y, w, h }
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x, self.y, self.w, self.h)
    }
}

impl From<BBox> for [i32; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BBox {
    pub const fn new(x: i32, y: i32, w: i32, h: i32) -> Self {
        BBox { x, y, w, h }
    }

    /// Box of the given size whose centre (per [`bbox_center`]) is nearest `(cx, cy)`.
    pub fn from_center(cx: f64, cy: f64, w: i32, h: i32) -> Self {
        let x = (cx - w as f64 / 2.0).round() as i32;
        let y = (cy - h as f64 / 2.0).round() as i32;
        BBox { x, y, w, h }
    }

    pub fn right(&self) -> i32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> i32 {
        self.y + self.h
    }

    /// Number of pixels in the inclusive span.
    pub fn pixel_area(&self) -> i64 {
        (self.w as i64 + 1) * (self.h as i64 + 1)
    }

    pub fn is_degenerate(&self) -> bool {
        self.w <= 0 || self.h <= 0
    }

    pub fn diagonal(&self) -> f64 {
        ((self.w as f64).powi(2) + (self.h as f64).powi(2)).sqrt()
    }

    pub fn contains_pixel(&self, x: i32, y: i32) -> bool {
        x >= self.x && x <= self.right() && y >= self.y && y <= self.bottom()
    }

    /// True when the whole inclusive span lies inside a `width x height` frame.
    pub fn inside(&self, width: usize, height: usize) -> bool {
        self.x >= 0 && self.y >= 0 && (self.right() as i64) < width as i64 && (self.bottom() as i64) < height as i64
    }

    /// Shift (not shrink) the box so it lies inside the frame. Boxes larger
    /// than the frame are pinned to the top-left corner.
    pub fn shifted_inside(&self, width: usize, height: usize) -> BBox {
        let max_x = (width as i32 - 1 - self.w).max(0);
        let max_y = (height as i32 - 1 - self.h).max(0);
        BBox { x: self.x.clamp(0, max_x), y: self.y.clamp(0, max_y), ..*self }
    }

    /// Intersection with the frame, or `None` when nothing is in view.
    pub fn clipped(&self, width: usize, height: usize) -> Option<BBox> {
        let x0 = self.x.max(0);
        let y0 = self.y.max(0);
        let x1 = self.right().min(width as i32 - 1);
        let y1 = self.bottom().min(height as i32 - 1);
        (x1 >= x0 && y1 >= y0).then(|| BBox { x: x0, y: y0, w: x1 - x0, h: y1 - y0 })
    }

    pub fn translated(&self, dx: i32, dy: i32) -> BBox {
        BBox { x: self.x + dx, y: self.y + dy, ..*self }
    }
}

/// Centre of a box as real coordinates: `(x + w/2, y + h/2)`.
pub fn bbox_center(b: &BBox) -> (f64, f64) {
    (b.x as f64 + b.w as f64 / 2.0, b.y as f64 + b.h as f64 / 2.0)
}

/// Intersection over union on inclusive pixel spans.
///
/// Two degenerate boxes (zero width or height) score 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    if a.is_degenerate() && b.is_degenerate() {
        return 0.0;
    }
    let ix0 = a.x.max(b.x) as i64;
    let iy0 = a.y.max(b.y) as i64;
    let ix1 = a.right().min(b.right()) as i64;
    let iy1 = a.bottom().min(b.bottom()) as i64;
    if ix1 < ix0 || iy1 < iy0 {
        return 0.0;
    }
    let inter = (ix1 - ix0 + 1) * (iy1 - iy0 + 1);
    let union = a.pixel_area() + b.pixel_area() - inter;
    inter as f64 / union as f64
}

/// Binary frame-sized mask.
#[derive(Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl fmt::Debug for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("set", &self.count())
            .finish()
    }
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Mask { width, height, bits: vec![false; width * height] }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch { expected: (width, height), got: (bits.len(), 1) });
        }
        Ok(Mask { width, height, bits })
    }

    /// Mask with every in-frame pixel of `b` set.
    pub fn from_bbox(width: usize, height: usize, b: &BBox) -> Self {
        let mut m = Mask::empty(width, height);
        if let Some(c) = b.clipped(width, height) {
            for y in c.y..=c.bottom() {
                for x in c.x..=c.right() {
                    m.set(x as usize, y as usize, true);
                }
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Coordinates `(x, y)` of every set pixel in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| (i % w, i / w))
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

/// Bounding box of a mask: `(min_x, min_y, max_x - min_x, max_y - min_y)`.
pub fn bbox_from_mask(mask: &Mask) -> Result<BBox> {
    let mut it = mask.iter_set();
    let (x0, y0) = it.next().ok_or(Error::EmptyMask)?;
    // row-major order: the first set pixel holds min_y, the last holds max_y
    let (mut min_x, mut max_x, min_y, mut max_y) = (x0, x0, y0, y0);
    for (x, y) in it {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        max_y = y;
    }
    Ok(BBox::new(min_x as i32, min_y as i32, (max_x - min_x) as i32, (max_y - min_y) as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TeamLabel {
    Team1,
    Team2,
    Referee,
}

impl TeamLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            TeamLabel::Team1 => "team1",
            TeamLabel::Team2 => "team2",
            TeamLabel::Referee => "referee",
        }
    }
}

impl fmt::Display for TeamLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identity of a tracked player, assigned in prompt order from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlayerId(pub u32);

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A foreground click on a player, with its team.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointPrompt {
    pub x: i64,
    pub y: i64,
    pub team: TeamLabel,
}

impl PointPrompt {
    pub fn check_bounds(&self, width: usize, height: usize) -> Result<()> {
        if self.x < 0 || self.y < 0 || self.x as usize >= width || self.y as usize >= height {
            return Err(Error::OutOfBounds { x: self.x, y: self.y, width, height });
        }
        Ok(())
    }
}
