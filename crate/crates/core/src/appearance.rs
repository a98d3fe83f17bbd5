//! Jersey-colour appearance model used for re-identification.
//!
//! A player's fingerprint is a pair of 32-bin hue and saturation histograms
//! taken over the top 60% of its mask, each L1-normalised. Tracks keep the
//! last ten fingerprints and compare candidates against their mean.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::media::rgb_to_hsv;
use crate::model::{bbox_from_mask, Frame, Mask};

pub const HIST_BINS: usize = 32;
pub const WINDOW_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppearanceVector {
    pub hue: [f64; HIST_BINS],
    pub sat: [f64; HIST_BINS],
}

impl AppearanceVector {
    pub const fn zero() -> Self {
        AppearanceVector { hue: [0.0; HIST_BINS], sat: [0.0; HIST_BINS] }
    }

    /// True when both halves carry no mass (the jersey region was empty).
    pub fn is_zero(&self) -> bool {
        self.hue.iter().chain(&self.sat).all(|&v| v == 0.0)
    }

    /// Hue half followed by saturation half.
    pub fn to_vec(&self) -> Vec<f64> {
        self.hue.iter().chain(&self.sat).copied().collect()
    }
}

impl Default for AppearanceVector {
    fn default() -> Self {
        AppearanceVector::zero()
    }
}

/// Keep only the rows in the top 60% of the mask's own bounding box.
pub fn jersey_mask(mask: &Mask) -> Result<Mask> {
    let b = bbox_from_mask(mask)?;
    let span = b.h as usize + 1;
    let top = b.y as usize;
    let mut out = Mask::empty(mask.width(), mask.height());
    for (x, y) in mask.iter_set() {
        // y - top < 0.6 * span, in integers
        if 5 * (y - top) < 3 * span {
            out.set(x, y, true);
        }
    }
    Ok(out)
}

pub fn hue_bin(h: f64) -> usize {
    ((h / 360.0 * HIST_BINS as f64).floor() as usize).min(HIST_BINS - 1)
}

pub fn sat_bin(s: f64) -> usize {
    ((s * HIST_BINS as f64).floor() as usize).min(HIST_BINS - 1)
}

fn l1_normalize(hist: &mut [f64; HIST_BINS]) {
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        hist.iter_mut().for_each(|v| *v /= total);
    }
}

/// Hue/saturation histograms over the set pixels of `jmask`.
pub fn compute_appearance(frame: &Frame, jmask: &Mask) -> Result<AppearanceVector> {
    if frame.dims() != jmask.dims() {
        return Err(Error::DimensionMismatch { expected: frame.dims(), got: jmask.dims() });
    }
    let mut v = AppearanceVector::zero();
    for (x, y) in jmask.iter_set() {
        let [r, g, b] = frame.pixel(x, y);
        let p = rgb_to_hsv(r, g, b);
        v.hue[hue_bin(p.h)] += 1.0;
        v.sat[sat_bin(p.s)] += 1.0;
    }
    l1_normalize(&mut v.hue);
    l1_normalize(&mut v.sat);
    Ok(v)
}

/// Jersey appearance of a full player mask.
pub fn mask_appearance(frame: &Frame, mask: &Mask) -> Result<AppearanceVector> {
    compute_appearance(frame, &jersey_mask(mask)?)
}

/// Sliding window of the most recent appearance vectors.
#[derive(Debug, Clone)]
pub struct AppearanceWindow {
    capacity: usize,
    items: VecDeque<AppearanceVector>,
}

impl Default for AppearanceWindow {
    fn default() -> Self {
        AppearanceWindow::new(WINDOW_LEN)
    }
}

impl AppearanceWindow {
    /// Panics on a zero capacity.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "appearance window needs room for one vector");
        AppearanceWindow { capacity, items: VecDeque::with_capacity(capacity) }
    }

    pub fn push(&mut self, v: AppearanceVector) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(v);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AppearanceVector> {
        self.items.iter()
    }

    pub fn mean(&self) -> Result<AppearanceVector> {
        window_mean(self.items.iter())
    }
}

/// Element-wise arithmetic mean.
pub fn window_mean<'a>(vectors: impl IntoIterator<Item = &'a AppearanceVector>) -> Result<AppearanceVector> {
    let mut acc = AppearanceVector::zero();
    let mut n = 0usize;
    for v in vectors {
        for (a, x) in acc.hue.iter_mut().zip(&v.hue) {
            *a += x;
        }
        for (a, x) in acc.sat.iter_mut().zip(&v.sat) {
            *a += x;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyWindow);
    }
    let n = n as f64;
    acc.hue.iter_mut().chain(acc.sat.iter_mut()).for_each(|a| *a /= n);
    Ok(acc)
}

/// Bhattacharyya coefficient of two histograms.
pub fn bhattacharyya_coefficient(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum()
}

/// Hellinger-form distance `sqrt(1 - BC)`; an all-zero histogram is at distance 1.
///
/// For unit-mass histograms `1 - BC` equals half the squared distance between
/// the square-rooted bins. That form is exactly 0 for identical inputs, where
/// `1 - BC` would leave rounding noise that the square root amplifies.
fn half_distance(p: &[f64; HIST_BINS], q: &[f64; HIST_BINS]) -> f64 {
    if p.iter().all(|&v| v == 0.0) || q.iter().all(|&v| v == 0.0) {
        return 1.0;
    }
    let sq: f64 = p.iter().zip(q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
    (sq / 2.0).min(1.0).sqrt()
}

/// `1 - d`, where `d` averages the hue and saturation Bhattacharyya distances.
pub fn similarity(a: &AppearanceVector, b: &AppearanceVector) -> f64 {
    let d = (half_distance(&a.hue, &b.hue) + half_distance(&a.sat, &b.sat)) / 2.0;
    (1.0 - d).clamp(0.0, 1.0)
}
