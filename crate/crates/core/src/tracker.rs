//! Single-channel discriminative correlation filter (MOSSE-style).
//!
//! The filter lives on a square grid covering `search_scale` times the
//! target span, resampled so that the target itself spans
//! `template_size` cells. Localisation correlates the learned filter with
//! the grid around the previous position; confidence is derived from the
//! peak-to-sidelobe ratio (PSR) of the response.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{bbox_center, BBox, Frame};

/// Half-width of the square excluded around the peak when measuring sidelobes (11x11).
const PEAK_EXCLUSION: i64 = 5;
const PSR_STD_FLOOR: f64 = 1e-6;
const PSR_FLOOR: f64 = 3.0;
const PSR_RANGE: f64 = 17.0;
const MIN_TARGET_AREA: i64 = 64;
const FEATURELESS_NORM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    /// Grid cells spanned by the target along each axis.
    pub template_size: usize,
    /// Search window size relative to the target span.
    pub search_scale: f64,
    pub learning_rate: f64,
    /// Width of the desired Gaussian response, in grid cells.
    pub sigma: f64,
    /// Ridge term added to the filter denominator.
    pub regularization: f64,
    /// Online updates only happen at or above this confidence.
    pub update_threshold: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            template_size: 32,
            search_scale: 2.0,
            learning_rate: 0.1,
            sigma: 2.0,
            regularization: 0.01,
            update_threshold: 0.3,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("tracker: {m}")));
        if self.template_size < 8 {
            return bad("template_size must be at least 8");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if self.search_scale < 1.0 {
            return bad("search_scale must be at least 1");
        }
        if self.sigma <= 0.0 || self.regularization <= 0.0 {
            return bad("sigma and regularization must be positive");
        }
        Ok(())
    }

    fn grid(&self) -> usize {
        (self.template_size as f64 * self.search_scale).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerOutput {
    pub bbox: BBox,
    pub confidence: f64,
}

/// Map a peak-to-sidelobe ratio onto `[0, 1]`: 3 or less is noise, 20 or more a firm lock.
pub fn psr_to_confidence(psr: f64) -> f64 {
    ((psr - PSR_FLOOR) / PSR_RANGE).clamp(0.0, 1.0)
}

/// 2-D FFT over an `n x n` row-major buffer.
#[derive(Clone)]
struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    fn run(&self, data: &mut [Complex<f64>], forward: bool) {
        let n = self.n;
        let plan = if forward { &self.forward } else { &self.inverse };
        plan.process(data);
        let mut col = vec![Complex::default(); n];
        for x in 0..n {
            for y in 0..n {
                col[y] = data[y * n + x];
            }
            plan.process(&mut col);
            for y in 0..n {
                data[y * n + x] = col[y];
            }
        }
        if !forward {
            let scale = 1.0 / (n * n) as f64;
            data.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

#[derive(Clone)]
pub struct FilterState {
    cfg: TrackerConfig,
    grid: usize,
    fft: Fft2,
    /// Centre of the target in image coordinates.
    center: (f64, f64),
    /// Box width/height (min/max-difference convention).
    size: (i32, i32),
    /// Image pixels per grid cell along x and y.
    step: (f64, f64),
    window: Vec<f64>,
    target: Vec<Complex<f64>>,
    numerator: Vec<Complex<f64>>,
    denominator: Vec<f64>,
    last_bbox: BBox,
}

impl fmt::Debug for FilterState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FilterState")
            .field("grid", &self.grid)
            .field("center", &self.center)
            .field("size", &self.size)
            .field("last_bbox", &self.last_bbox)
            .finish()
    }
}

fn luma_at(frame: &Frame, x: usize, y: usize) -> f64 {
    let [r, g, b] = frame.pixel(x, y);
    0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64
}

/// Bilinear luma sample with edge replication.
fn sample(frame: &Frame, x: f64, y: f64) -> f64 {
    let (w, h) = frame.dims();
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = luma_at(frame, x0, y0) * (1.0 - fx) + luma_at(frame, x1, y0) * fx;
    let bottom = luma_at(frame, x0, y1) * (1.0 - fx) + luma_at(frame, x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

impl FilterState {
    pub fn last_bbox(&self) -> BBox {
        self.last_bbox
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    /// Log-compressed, zero-mean, unit-norm, windowed grid around `center`,
    /// already transformed. `None` when the window is featureless.
    fn features(&self, frame: &Frame, center: (f64, f64)) -> Option<Vec<Complex<f64>>> {
        let n = self.grid;
        let half = (n / 2) as f64;
        let mut patch: Vec<f64> = Vec::with_capacity(n * n);
        for gy in 0..n {
            let y = center.1 + (gy as f64 - half) * self.step.1;
            for gx in 0..n {
                let x = center.0 + (gx as f64 - half) * self.step.0;
                patch.push((sample(frame, x, y) + 1.0).ln());
            }
        }
        let mean = patch.iter().sum::<f64>() / patch.len() as f64;
        patch.iter_mut().for_each(|v| *v -= mean);
        let norm = patch.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < FEATURELESS_NORM {
            return None;
        }
        let mut spec: Vec<Complex<f64>> =
            patch.iter().zip(&self.window).map(|(v, w)| Complex::new(v / norm * w, 0.0)).collect();
        self.fft.run(&mut spec, true);
        Some(spec)
    }

    fn learn(&mut self, spectrum: &[Complex<f64>], rate: f64) {
        for (i, &f) in spectrum.iter().enumerate() {
            let num = self.target[i] * f.conj();
            let den = f.norm_sqr();
            self.numerator[i] = self.numerator[i] * (1.0 - rate) + num * rate;
            self.denominator[i] = self.denominator[i] * (1.0 - rate) + den * rate;
        }
    }

    fn response(&self, spectrum: &[Complex<f64>]) -> Vec<f64> {
        let lambda = self.cfg.regularization;
        let mut r: Vec<Complex<f64>> = spectrum
            .iter()
            .zip(self.numerator.iter().zip(&self.denominator))
            .map(|(f, (a, b))| f * a / (b + lambda))
            .collect();
        self.fft.run(&mut r, false);
        r.into_iter().map(|c| c.re).collect()
    }

    fn set_position(&mut self, center: (f64, f64), frame: &Frame) {
        let raw = BBox::from_center(center.0, center.1, self.size.0, self.size.1);
        let clamped = raw.shifted_inside(frame.width(), frame.height());
        self.center = (center.0 + (clamped.x - raw.x) as f64, center.1 + (clamped.y - raw.y) as f64);
        self.last_bbox = clamped;
    }
}

/// Sub-cell offset of a peak from a three-point parabola.
fn parabolic(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom.abs() < 1e-12 {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    }
}

/// Peak-to-sidelobe ratio with an 11x11 exclusion zone (wrapping).
pub fn peak_to_sidelobe(response: &[f64], n: usize, peak: (usize, usize)) -> f64 {
    let peak_value = response[peak.1 * n + peak.0];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    let wrap = |d: i64| {
        let d = d.rem_euclid(n as i64);
        d.min(n as i64 - d)
    };
    for y in 0..n {
        for x in 0..n {
            if wrap(x as i64 - peak.0 as i64) <= PEAK_EXCLUSION && wrap(y as i64 - peak.1 as i64) <= PEAK_EXCLUSION {
                continue;
            }
            let v = response[y * n + x];
            sum += v;
            sum_sq += v * v;
            count += 1;
        }
    }
    if count == 0 {
        return 0.0;
    }
    let mean = sum / count as f64;
    let std = (sum_sq / count as f64 - mean * mean).max(0.0).sqrt().max(PSR_STD_FLOOR);
    (peak_value - mean) / std
}

/// Train a new filter on `bbox` in `frame`.
pub fn tracker_init(frame: &Frame, bbox: BBox, cfg: &TrackerConfig) -> Result<FilterState> {
    cfg.validate()?;
    if bbox.is_degenerate() || bbox.pixel_area() < MIN_TARGET_AREA {
        return Err(Error::DegenerateBBox(bbox));
    }
    if !bbox.inside(frame.width(), frame.height()) {
        return Err(Error::OutOfFrame(bbox));
    }
    let n = cfg.grid();
    let t = cfg.template_size as f64;
    let half = (n / 2) as f64;
    let hann: Vec<f64> = (0..n).map(|i| (PI * i as f64 / n as f64).sin().powi(2)).collect();
    let window = (0..n * n).map(|i| hann[i % n] * hann[i / n]).collect();
    let two_sigma_sq = 2.0 * cfg.sigma * cfg.sigma;
    let mut target: Vec<Complex<f64>> = (0..n * n)
        .map(|i| {
            let dx = (i % n) as f64 - half;
            let dy = (i / n) as f64 - half;
            Complex::new((-(dx * dx + dy * dy) / two_sigma_sq).exp(), 0.0)
        })
        .collect();
    let fft = Fft2::new(n);
    fft.run(&mut target, true);

    let mut state = FilterState {
        cfg: cfg.clone(),
        grid: n,
        fft,
        center: bbox_center(&bbox),
        size: (bbox.w, bbox.h),
        step: ((bbox.w + 1) as f64 / t, (bbox.h + 1) as f64 / t),
        window,
        target,
        numerator: vec![Complex::default(); n * n],
        denominator: vec![0.0; n * n],
        last_bbox: bbox,
    };
    if let Some(spec) = state.features(frame, state.center) {
        state.learn(&spec, 1.0);
    }
    Ok(state)
}

/// Retrain on a new box. Identity and history live with the caller.
pub fn tracker_reinit(state: &FilterState, frame: &Frame, bbox: BBox) -> Result<FilterState> {
    tracker_init(frame, bbox, &state.cfg)
}

/// Localise the target in `frame` and adapt the filter when confident.
pub fn tracker_update(state: &mut FilterState, frame: &Frame) -> TrackerOutput {
    let n = state.grid;
    let Some(spectrum) = state.features(frame, state.center) else {
        return TrackerOutput { bbox: state.last_bbox, confidence: 0.0 };
    };
    let response = state.response(&spectrum);
    let (peak_idx, _) =
        response
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    let peak = (peak_idx % n, peak_idx / n);
    let confidence = psr_to_confidence(peak_to_sidelobe(&response, n, peak));

    let at = |x: usize, y: usize| response[(y % n) * n + (x % n)];
    let sub_x = parabolic(at(peak.0 + n - 1, peak.1), at(peak.0, peak.1), at(peak.0 + 1, peak.1));
    let sub_y = parabolic(at(peak.0, peak.1 + n - 1), at(peak.0, peak.1), at(peak.0, peak.1 + 1));
    // the desired response peaks at the grid centre, so the offset from it is the motion
    let half = (n / 2) as f64;
    let dx = (peak.0 as f64 - half + sub_x) * state.step.0;
    let dy = (peak.1 as f64 - half + sub_y) * state.step.1;
    let moved = (state.center.0 + dx, state.center.1 + dy);
    state.set_position(moved, frame);

    if confidence >= state.cfg.update_threshold {
        if let Some(spec) = state.features(frame, state.center) {
            let rate = state.cfg.learning_rate;
            state.learn(&spec, rate);
        }
    }
    TrackerOutput { bbox: state.last_bbox, confidence }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::texture_sign;
    use proptest::prelude::*;

    const FIELD: [u8; 3] = [58, 128, 58];

    /// Field-green frame with one textured two-tone player whose top-left is `(x, y)`.
    fn scene(x: i32, y: i32) -> Frame {
        let mut f = Frame::filled(200, 160, FIELD);
        paint(&mut f, x, y, 0.0);
        f
    }

    /// Paint the player, replacing roughly `corrupt` of its pixels with random grey noise.
    fn paint(f: &mut Frame, x: i32, y: i32, corrupt: f64) {
        for ly in 0..32usize {
            for lx in 0..16usize {
                let (px, py) = (x + lx as i32, y + ly as i32);
                if !f.contains(px as i64, py as i64) {
                    continue;
                }
                let hash = ((lx * 7919 + ly * 104_729) % 1000) as f64 / 1000.0;
                let base = if hash < corrupt {
                    [((lx * 37 + ly * 91 + (lx * ly) % 13 * 17) % 256) as u8; 3]
                } else {
                    let c: [i32; 3] = if 5 * ly < 3 * 32 { [220, 24, 24] } else { [245, 245, 245] };
                    let d = 12 * texture_sign(0, lx, ly);
                    c.map(|v| (v + d).clamp(0, 255) as u8)
                };
                f.set_pixel(px as usize, py as usize, base);
            }
        }
    }

    fn target(x: i32, y: i32) -> BBox {
        BBox::new(x, y, 15, 31)
    }

    fn center_shift(a: &BBox, b: &BBox) -> (f64, f64) {
        let (ca, cb) = (bbox_center(a), bbox_center(b));
        (cb.0 - ca.0, cb.1 - ca.1)
    }

    #[test]
    fn psr_mapping_anchors() {
        assert_eq!(psr_to_confidence(3.0), 0.0);
        assert_eq!(psr_to_confidence(20.0), 1.0);
        assert!((psr_to_confidence(8.1) - 0.3).abs() < 1e-12);
        assert_eq!(psr_to_confidence(-4.0), 0.0);
    }

    #[test]
    fn self_match_keeps_center() {
        let f = scene(90, 60);
        let mut st = tracker_init(&f, target(90, 60), &TrackerConfig::default()).unwrap();
        let out = tracker_update(&mut st, &f);
        let (dx, dy) = center_shift(&target(90, 60), &out.bbox);
        assert!(dx.abs() <= 1.0 && dy.abs() <= 1.0, "{dx} {dy}");
        assert!(out.confidence > 0.5, "{}", out.confidence);
    }

    #[test]
    fn five_pixel_shift_right() {
        let mut st = tracker_init(&scene(90, 60), target(90, 60), &TrackerConfig::default()).unwrap();
        let out = tracker_update(&mut st, &scene(95, 60));
        let (dx, dy) = center_shift(&target(90, 60), &out.bbox);
        assert!((dx - 5.0).abs() <= 1.0 && dy.abs() <= 1.0, "{dx} {dy}");
    }

    #[test]
    fn static_scene_is_stable_and_confident() {
        let f = scene(90, 60);
        let start = target(90, 60);
        let mut st = tracker_init(&f, start, &TrackerConfig::default()).unwrap();
        for _ in 0..10 {
            let out = tracker_update(&mut st, &f);
            assert!(out.confidence > 0.5, "{}", out.confidence);
        }
        let (dx, dy) = center_shift(&start, &st.last_bbox());
        assert!(dx.abs() <= 1.0 && dy.abs() <= 1.0);
    }

    #[test]
    fn background_replacement_drops_confidence() {
        let mut st = tracker_init(&scene(90, 60), target(90, 60), &TrackerConfig::default()).unwrap();
        let out = tracker_update(&mut st, &Frame::filled(200, 160, FIELD));
        assert!(out.confidence < 0.3, "{}", out.confidence);
        // a far-away copy of the player outside the search window is not found either
        let mut st = tracker_init(&scene(90, 60), target(90, 60), &TrackerConfig::default()).unwrap();
        let out = tracker_update(&mut st, &scene(5, 5));
        assert!(out.confidence < 0.3, "{}", out.confidence);
    }

    #[test]
    fn uniform_frame_is_featureless() {
        let f = Frame::filled(100, 100, [40, 40, 40]);
        let mut st = tracker_init(&f, BBox::new(30, 30, 19, 19), &TrackerConfig::default()).unwrap();
        let out = tracker_update(&mut st, &f);
        assert_eq!(out.confidence, 0.0);
        assert_eq!(out.bbox, BBox::new(30, 30, 19, 19));
    }

    #[test]
    fn psr_std_floor_on_flat_sidelobes() {
        let n = 16;
        let mut r = vec![0.0; n * n];
        r[3 * n + 3] = 1.0;
        assert_eq!(peak_to_sidelobe(&r, n, (3, 3)), 1.0 / PSR_STD_FLOOR);
    }

    #[test]
    fn confidence_falls_with_corruption() {
        let start = target(90, 60);
        let mean_conf = |corrupt: f64| {
            let mut st = tracker_init(&scene(90, 60), start, &TrackerConfig::default()).unwrap();
            let mut sum = 0.0;
            for k in 0..5 {
                let mut f = Frame::filled(200, 160, FIELD);
                paint(&mut f, 90 + k, 60, corrupt);
                sum += tracker_update(&mut st, &f).confidence;
            }
            sum / 5.0
        };
        let c = [mean_conf(0.0), mean_conf(0.25), mean_conf(0.5)];
        assert!(c[0] > c[1] && c[1] > c[2], "{c:?}");
    }

    #[test]
    fn init_errors() {
        let f = scene(90, 60);
        let cfg = TrackerConfig::default();
        assert!(matches!(tracker_init(&f, BBox::new(190, 60, 15, 31), &cfg), Err(Error::OutOfFrame(_))));
        assert!(matches!(tracker_init(&f, BBox::new(-1, 60, 15, 31), &cfg), Err(Error::OutOfFrame(_))));
        assert!(matches!(tracker_init(&f, BBox::new(10, 10, 0, 30), &cfg), Err(Error::DegenerateBBox(_))));
        assert!(matches!(tracker_init(&f, BBox::new(10, 10, 6, 6), &cfg), Err(Error::DegenerateBBox(_))));
        let bad = TrackerConfig { learning_rate: 0.0, ..TrackerConfig::default() };
        assert!(matches!(tracker_init(&f, target(90, 60), &bad), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn reinit_after_move() {
        let mut st = tracker_init(&scene(90, 60), target(90, 60), &TrackerConfig::default()).unwrap();
        let moved = scene(40, 100);
        let mut st2 = tracker_reinit(&st, &moved, target(40, 100)).unwrap();
        let out = tracker_update(&mut st2, &moved);
        assert!(out.confidence > 0.5);
        let (dx, dy) = center_shift(&target(40, 100), &out.bbox);
        assert!(dx.abs() <= 1.0 && dy.abs() <= 1.0);
        assert!(tracker_reinit(&st, &moved, BBox::new(40, 100, 0, 0)).is_err());
        // the original state is untouched
        tracker_update(&mut st, &scene(90, 60));
    }

    #[test]
    fn output_stays_inside_frame() {
        let mut st = tracker_init(&scene(2, 60), target(2, 60), &TrackerConfig::default()).unwrap();
        for k in 0..6 {
            let out = tracker_update(&mut st, &scene(2 - 3 * k, 60));
            assert!(out.bbox.inside(200, 160), "{:?}", out.bbox);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn translations_recovered(dx in -8i32..=8, dy in -8i32..=8) {
            let mut st = tracker_init(&scene(90, 60), target(90, 60), &TrackerConfig::default()).unwrap();
            let out = tracker_update(&mut st, &scene(90 + dx, 60 + dy));
            let (sx, sy) = center_shift(&target(90, 60), &out.bbox);
            prop_assert!((sx - dx as f64).abs() <= 1.0 && (sy - dy as f64).abs() <= 1.0, "{} {} vs {} {}", sx, sy, dx, dy);
        }
    }
}
