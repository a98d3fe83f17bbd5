//! Deterministic synthetic football scenes with exact ground truth.
//!
//! Players are axis-aligned two-tone rectangles (jersey over shorts) with a
//! per-player 4x4-cell luminance texture, moving along linearly interpolated
//! waypoints over a flat pitch. Because the silhouettes are rectangles, the
//! visible mask of every player can be rebuilt from its box and depth alone,
//! which is what [`GroundTruth::label_map`] does.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{frame_file_name, save_frame, write_sequence_meta, FrameSequence, SequenceMeta, DEFAULT_FPS};
use crate::model::{BBox, Frame, Mask, TeamLabel};

pub const GT_FILE: &str = "gt.jsonl";
pub const SCENARIO_FILE: &str = "scenario.json";

/// Luminance offset of the player texture, per channel.
pub const TEXTURE_AMPLITUDE: i32 = 12;
const TEXTURE_CELL: usize = 4;
const MIN_PLAYER_SIZE: (usize, usize) = (12, 24);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub frame: usize,
    /// Centre column of the player rectangle.
    pub x: f64,
    /// Centre row of the player rectangle.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerSpec {
    pub id: u32,
    pub team: TeamLabel,
    pub jersey: [u8; 3],
    pub shorts: [u8; 3],
    /// Rendered rectangle size in pixels, `(width, height)`.
    pub size: (usize, usize),
    pub waypoints: Vec<Waypoint>,
    /// Higher depth is drawn later and occludes lower depth.
    pub depth: i32,
}

impl PlayerSpec {
    /// Interpolated centre at `frame`; held constant outside the waypoint range.
    pub fn center_at(&self, frame: usize) -> (f64, f64) {
        let wps = &self.waypoints;
        let first = wps[0];
        if frame <= first.frame {
            return (first.x, first.y);
        }
        for pair in wps.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if frame <= b.frame {
                let t = (frame - a.frame) as f64 / (b.frame - a.frame) as f64;
                return (a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
            }
        }
        let last = wps[wps.len() - 1];
        (last.x, last.y)
    }

    /// Full (unclipped) silhouette box at `frame`.
    pub fn silhouette_at(&self, frame: usize) -> BBox {
        let (cx, cy) = self.center_at(frame);
        let (w, h) = self.size;
        let x = (cx - (w as f64 - 1.0) / 2.0).round() as i32;
        let y = (cy - (h as f64 - 1.0) / 2.0).round() as i32;
        BBox::new(x, y, w as i32 - 1, h as i32 - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Light,
    Heavy,
    Longterm,
    Custom,
}

impl Preset {
    pub const BUILTIN: [&'static str; 3] = ["light", "heavy", "longterm"];

    pub fn parse(name: &str) -> Option<Preset> {
        match name {
            "light" => Some(Preset::Light),
            "heavy" => Some(Preset::Heavy),
            "longterm" => Some(Preset::Longterm),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Light => "light",
            Preset::Heavy => "heavy",
            Preset::Longterm => "longterm",
            Preset::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub field: [u8; 3],
    pub players: Vec<PlayerSpec>,
    pub preset: Preset,
    #[serde(default = "default_fps")]
    pub fps: f64,
}

fn default_fps() -> f64 {
    DEFAULT_FPS
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.frames < 2 {
            return bad(format!("frame count {} is below 2", self.frames));
        }
        if self.width == 0 || self.height == 0 {
            return bad("frame dimensions must be positive".into());
        }
        if self.players.is_empty() {
            return bad("scenario has no players".into());
        }
        let mut ids: Vec<u32> = self.players.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.players.len() {
            return bad("player ids are not unique".into());
        }
        for p in &self.players {
            if p.size.0 < MIN_PLAYER_SIZE.0 || p.size.1 < MIN_PLAYER_SIZE.1 {
                return bad(format!("player {} is smaller than {:?}", p.id, MIN_PLAYER_SIZE));
            }
            if p.waypoints.is_empty() {
                return bad(format!("player {} has no waypoints", p.id));
            }
            if p.waypoints.windows(2).any(|w| w[1].frame <= w[0].frame) {
                return bad(format!("player {} waypoint frames are not strictly increasing", p.id));
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<ScenarioSpec> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: ScenarioSpec = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Players sorted into paint order: ascending depth, then ascending id.
    fn paint_order(&self) -> Vec<&PlayerSpec> {
        let mut order: Vec<&PlayerSpec> = self.players.iter().collect();
        order.sort_by_key(|p| (p.depth, p.id));
        order
    }
}

/// One ground-truth row per (frame, player).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtRow {
    pub frame: usize,
    pub player: u32,
    pub team: TeamLabel,
    /// In-frame part of the unoccluded silhouette; `None` when off-screen.
    pub bbox: Option<BBox>,
    /// Unoccluded share of the in-frame silhouette.
    pub visible: f64,
    pub on_screen: bool,
    #[serde(default)]
    pub depth: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Indexed by frame; rows within a frame sorted by player id.
    frames: Vec<Vec<GtRow>>,
}

impl GroundTruth {
    pub fn from_rows(mut rows: Vec<GtRow>) -> Result<GroundTruth> {
        rows.sort_by_key(|r| (r.frame, r.player));
        let n = rows.last().map_or(0, |r| r.frame + 1);
        let mut frames: Vec<Vec<GtRow>> = vec![Vec::new(); n];
        for r in rows {
            if let Some(prev) = frames[r.frame].last() {
                if prev.player == r.player {
                    return Err(Error::InvalidGroundTruth(format!(
                        "duplicate row for frame {} player {}",
                        r.frame, r.player
                    )));
                }
            }
            if !(0.0..=1.0).contains(&r.visible) {
                return Err(Error::InvalidGroundTruth(format!("visible fraction {} out of range", r.visible)));
            }
            frames[r.frame].push(r);
        }
        if let Some(i) = frames.iter().position(Vec::is_empty) {
            return Err(Error::InvalidGroundTruth(format!("frame {i} has no rows")));
        }
        Ok(GroundTruth { frames })
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn rows(&self, frame: usize) -> &[GtRow] {
        self.frames.get(frame).map_or(&[], Vec::as_slice)
    }

    pub fn all_rows(&self) -> impl Iterator<Item = &GtRow> {
        self.frames.iter().flatten()
    }

    pub fn row(&self, frame: usize, player: u32) -> Option<&GtRow> {
        self.rows(frame).iter().find(|r| r.player == player)
    }

    /// Sorted ids of every player appearing in the file.
    pub fn players(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.all_rows().map(|r| r.player).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Topmost visible player at every pixel of a `width x height` frame.
    pub fn label_map(&self, frame: usize, width: usize, height: usize) -> Vec<Option<u32>> {
        let mut rows: Vec<&GtRow> = self.rows(frame).iter().collect();
        rows.sort_by_key(|r| (r.depth, r.player));
        let mut labels = vec![None; width * height];
        for r in rows {
            if let Some(b) = r.bbox.and_then(|b| b.clipped(width, height)) {
                for y in b.y..=b.bottom() {
                    let row = y as usize * width;
                    labels[row + b.x as usize..=row + b.right() as usize].fill(Some(r.player));
                }
            }
        }
        labels
    }

    /// Unoccluded in-frame silhouette of `player`.
    pub fn silhouette(&self, frame: usize, player: u32, width: usize, height: usize) -> Option<Mask> {
        let b = self.row(frame, player)?.bbox?;
        Some(Mask::from_bbox(width, height, &b))
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for row in self.all_rows() {
            let line = serde_json::to_string(row).map_err(|e| Error::json(path, e))?;
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: &Path) -> Result<GroundTruth> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rows = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            rows.push(serde_json::from_str(&line).map_err(|e| Error::json(path, e))?);
        }
        GroundTruth::from_rows(rows)
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Texture sign (+1/-1) of the cell containing local pixel `(lx, ly)`.
pub fn texture_sign(player: u32, lx: usize, ly: usize) -> i32 {
    let key = (player as u64) << 40 ^ ((lx / TEXTURE_CELL) as u64) << 20 ^ (ly / TEXTURE_CELL) as u64;
    if mix64(key) & 1 == 0 {
        1
    } else {
        -1
    }
}

/// Base colour of local row `ly` in a player of height `h`: jersey for the top 60%.
pub fn is_jersey_row(ly: usize, h: usize) -> bool {
    5 * ly < 3 * h
}

fn shade(rgb: [u8; 3], delta: i32) -> [u8; 3] {
    rgb.map(|c| (c as i32 + delta).clamp(0, 255) as u8)
}

/// Render one frame and its ground-truth rows.
pub fn render_frame(spec: &ScenarioSpec, frame_idx: usize) -> Result<(Frame, Vec<GtRow>)> {
    if frame_idx >= spec.frames {
        return Err(Error::FrameIndex { index: frame_idx, len: spec.frames });
    }
    let (width, height) = (spec.width, spec.height);
    let mut frame = Frame::filled(width, height, spec.field);
    let mut labels: Vec<Option<u32>> = vec![None; width * height];

    for p in spec.paint_order() {
        let sil = p.silhouette_at(frame_idx);
        let Some(clip) = sil.clipped(width, height) else { continue };
        for y in clip.y..=clip.bottom() {
            let ly = (y - sil.y) as usize;
            let base = if is_jersey_row(ly, p.size.1) { p.jersey } else { p.shorts };
            for x in clip.x..=clip.right() {
                let lx = (x - sil.x) as usize;
                let rgb = shade(base, TEXTURE_AMPLITUDE * texture_sign(p.id, lx, ly));
                frame.set_pixel(x as usize, y as usize, rgb);
                labels[y as usize * width + x as usize] = Some(p.id);
            }
        }
    }

    let mut rows: Vec<GtRow> = spec
        .players
        .iter()
        .map(|p| {
            let clip = p.silhouette_at(frame_idx).clipped(width, height);
            let visible = match clip {
                Some(b) => {
                    let mut seen = 0usize;
                    for y in b.y..=b.bottom() {
                        for x in b.x..=b.right() {
                            seen += (labels[y as usize * width + x as usize] == Some(p.id)) as usize;
                        }
                    }
                    seen as f64 / b.pixel_area() as f64
                }
                None => 0.0,
            };
            GtRow {
                frame: frame_idx,
                player: p.id,
                team: p.team,
                bbox: clip,
                visible,
                on_screen: clip.is_some(),
                depth: p.depth,
            }
        })
        .collect();
    rows.sort_by_key(|r| r.player);
    Ok((frame, rows))
}

/// Render the whole scenario in memory.
pub fn render_all(spec: &ScenarioSpec) -> Result<(Vec<Frame>, GroundTruth)> {
    spec.validate()?;
    let rendered = (0..spec.frames).into_par_iter().map(|i| render_frame(spec, i)).collect::<Result<Vec<_>>>()?;
    let mut frames = Vec::with_capacity(spec.frames);
    let mut rows = Vec::with_capacity(spec.frames * spec.players.len());
    for (f, r) in rendered {
        frames.push(f);
        rows.extend(r);
    }
    Ok((frames, GroundTruth::from_rows(rows)?))
}

/// Write frames, `seq.json`, `gt.jsonl` and `scenario.json` into `out`.
pub fn generate(spec: &ScenarioSpec, out: &Path) -> Result<(FrameSequence, GroundTruth)> {
    let (frames, gt) = render_all(spec)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    frames.par_iter().enumerate().try_for_each(|(i, f)| save_frame(f, &out.join(frame_file_name(i))))?;
    write_sequence_meta(
        out,
        &SequenceMeta { fps: spec.fps, width: spec.width, height: spec.height, frames: spec.frames },
    )?;
    gt.write_jsonl(&out.join(GT_FILE))?;
    let spec_path = out.join(SCENARIO_FILE);
    let mut text = serde_json::to_string_pretty(spec).map_err(|e| Error::json(&spec_path, e))?;
    text.push('\n');
    fs::write(&spec_path, text).map_err(|e| Error::io(&spec_path, e))?;
    Ok((FrameSequence { dir: out.to_path_buf(), frames, fps: spec.fps }, gt))
}

const FIELD: [u8; 3] = [58, 128, 58];
const RED: [u8; 3] = [220, 24, 24];
const GREEN: [u8; 3] = [100, 230, 100];
const YELLOW: [u8; 3] = [235, 205, 40];
const ORANGE: [u8; 3] = [250, 140, 20];
const WHITE: [u8; 3] = [235, 235, 235];
const BLACK: [u8; 3] = [30, 30, 30];
const BLUE: [u8; 3] = [40, 60, 200];

fn wp(frame: usize, x: f64, y: f64) -> Waypoint {
    Waypoint { frame, x, y }
}

fn player(
    id: u32,
    team: TeamLabel,
    jersey: [u8; 3],
    shorts: [u8; 3],
    depth: i32,
    waypoints: Vec<Waypoint>,
) -> PlayerSpec {
    PlayerSpec { id, team, jersey, shorts, size: (16, 32), waypoints, depth }
}

/// Built-in scenes.
///
/// * `light`: two players; the red player overtakes the green one in front
///   of it, hiding up to 44% of the green silhouette for 12 frames.
/// * `heavy`: six players around the penalty box. A referee parks in front
///   of red player 0 and hides it completely for 12 frames while green
///   player 1 stands next to it.
/// * `longterm`: the orange goalkeeper walks off the left edge, stays out
///   for exactly 15 frames and walks back in.
pub fn preset(kind: Preset) -> Option<ScenarioSpec> {
    use TeamLabel::*;
    let spec = match kind {
        Preset::Light => ScenarioSpec {
            name: "light".into(),
            frames: 125,
            width: 320,
            height: 240,
            field: FIELD,
            preset: Preset::Light,
            fps: DEFAULT_FPS,
            players: vec![
                player(0, Team1, RED, WHITE, 1, vec![wp(0, 70.5, 130.5), wp(124, 194.5, 130.5)]),
                player(1, Team2, GREEN, BLACK, 0, vec![wp(0, 150.5, 112.5), wp(124, 155.5, 112.5)]),
            ],
        },
        Preset::Heavy => {
            let mut referee = player(
                2,
                Referee,
                YELLOW,
                BLACK,
                5,
                vec![wp(0, 250.0, 139.5), wp(30, 161.0, 139.5), wp(42, 161.0, 139.5), wp(52, 250.0, 139.5)],
            );
            referee.size = (20, 40);
            ScenarioSpec {
                name: "heavy".into(),
                frames: 125,
                width: 320,
                height: 240,
                field: FIELD,
                preset: Preset::Heavy,
                fps: DEFAULT_FPS,
                players: vec![
                    player(
                        0,
                        Team1,
                        RED,
                        WHITE,
                        1,
                        vec![wp(0, 170.5, 139.5), wp(24, 160.5, 139.5), wp(124, 160.5, 139.5)],
                    ),
                    player(1, Team2, GREEN, BLACK, 0, vec![wp(0, 140.5, 145.5), wp(124, 143.5, 145.5)]),
                    referee,
                    player(3, Team1, RED, WHITE, 2, vec![wp(0, 60.5, 60.5), wp(124, 110.5, 88.5)]),
                    player(4, Team2, GREEN, BLACK, 2, vec![wp(0, 250.5, 200.5), wp(124, 210.5, 190.5)]),
                    player(5, Team2, BLUE, WHITE, 3, vec![wp(0, 60.5, 200.5), wp(124, 100.5, 175.5)]),
                ],
            }
        }
        Preset::Longterm => ScenarioSpec {
            name: "longterm".into(),
            frames: 100,
            width: 320,
            height: 240,
            field: FIELD,
            preset: Preset::Longterm,
            fps: DEFAULT_FPS,
            players: vec![
                player(0, Team1, ORANGE, BLACK, 0, vec![wp(0, 99.5, 120.5), wp(61, -22.5, 120.5), wp(99, 53.5, 120.5)]),
                player(1, Team2, GREEN, BLACK, 0, vec![wp(0, 220.5, 90.5), wp(99, 240.5, 150.5)]),
            ],
        },
        Preset::Custom => return None,
    };
    Some(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bbox_from_mask, iou};

    fn one_player(x: f64, y: f64) -> ScenarioSpec {
        ScenarioSpec {
            name: "t".into(),
            frames: 3,
            width: 64,
            height: 64,
            field: FIELD,
            preset: Preset::Custom,
            fps: DEFAULT_FPS,
            players: vec![player(0, TeamLabel::Team1, RED, WHITE, 0, vec![wp(0, x, y)])],
        }
    }

    #[test]
    fn single_player_gt_matches_spec() {
        let spec = one_player(31.5, 31.5);
        let (_, rows) = render_frame(&spec, 0).unwrap();
        assert_eq!(rows[0].bbox, Some(BBox::new(24, 16, 15, 31)));
        assert_eq!(rows[0].visible, 1.0);
        assert!(rows[0].on_screen);
        assert!(render_frame(&spec, 3).is_err());
    }

    #[test]
    fn fully_hidden_player() {
        let mut spec = one_player(31.5, 31.5);
        let mut front = spec.players[0].clone();
        front.id = 1;
        front.depth = 1;
        front.size = (20, 40);
        spec.players.push(front);
        let (_, rows) = render_frame(&spec, 0).unwrap();
        assert_eq!(rows[0].visible, 0.0);
        assert!(rows[0].on_screen);
        assert_eq!(rows[1].visible, 1.0);
    }

    #[test]
    fn jersey_pixels_average_to_jersey_colour() {
        let spec = one_player(31.5, 31.5);
        let (frame, rows) = render_frame(&spec, 0).unwrap();
        let b = rows[0].bbox.unwrap();
        let mut sum = [0i64; 3];
        let mut n = 0i64;
        for y in b.y..=b.bottom() {
            if !is_jersey_row((y - b.y) as usize, 32) {
                continue;
            }
            for x in b.x..=b.right() {
                let px = frame.pixel(x as usize, y as usize);
                for c in 0..3 {
                    assert!((px[c] as i32 - RED[c] as i32).abs() <= TEXTURE_AMPLITUDE);
                    sum[c] += px[c] as i64;
                }
                n += 1;
            }
        }
        for c in 0..3 {
            let mean = sum[c] as f64 / n as f64;
            assert!((mean - RED[c] as f64).abs() <= TEXTURE_AMPLITUDE as f64, "channel {c}: {mean}");
        }
    }

    #[test]
    fn visibility_falls_as_overlap_grows() {
        let mut last = 1.0;
        for shift in 0..=16 {
            let mut spec = one_player(31.5, 31.5);
            let mut front = spec.players[0].clone();
            front.id = 1;
            front.depth = 1;
            front.waypoints = vec![wp(0, 31.5 + 16.0 - shift as f64, 31.5)];
            spec.players.push(front);
            let (_, rows) = render_frame(&spec, 0).unwrap();
            assert!(rows[0].visible <= last, "shift {shift}");
            last = rows[0].visible;
        }
        assert_eq!(last, 0.0);
    }

    #[test]
    fn gt_bbox_equals_mask_bbox_and_label_map_is_consistent() {
        let spec = preset(Preset::Heavy).unwrap();
        let (_, gt) = render_all(&spec).unwrap();
        for f in (0..spec.frames).step_by(7) {
            let labels = gt.label_map(f, spec.width, spec.height);
            for r in gt.rows(f) {
                let Some(b) = r.bbox else { continue };
                let mask = gt.silhouette(f, r.player, spec.width, spec.height).unwrap();
                assert_eq!(bbox_from_mask(&mask).unwrap(), b);
                let seen = labels.iter().filter(|&&l| l == Some(r.player)).count();
                assert!((seen as f64 / b.pixel_area() as f64 - r.visible).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn light_preset_stays_partially_visible() {
        let spec = preset(Preset::Light).unwrap();
        let (_, gt) = render_all(&spec).unwrap();
        let min = gt.all_rows().map(|r| r.visible).fold(1.0, f64::min);
        assert!(min > 0.4, "min visible {min}");
        let occluded = (0..spec.frames).filter(|&f| gt.rows(f).iter().any(|r| r.on_screen && r.visible < 0.7)).count();
        assert_eq!(occluded, 12);
        let rows0 = gt.rows(0);
        assert!(iou(&rows0[0].bbox.unwrap(), &rows0[1].bbox.unwrap()) == 0.0);
    }

    #[test]
    fn heavy_preset_has_long_full_occlusion() {
        let spec = preset(Preset::Heavy).unwrap();
        assert_eq!(spec.players.len(), 6);
        let (_, gt) = render_all(&spec).unwrap();
        let mut best = 0;
        for p in gt.players() {
            let mut run = 0;
            for f in 0..spec.frames {
                let r = gt.row(f, p).unwrap();
                run = if r.on_screen && r.visible == 0.0 { run + 1 } else { 0 };
                best = best.max(run);
            }
        }
        assert!(best >= 12, "longest full occlusion {best}");
    }

    #[test]
    fn longterm_preset_is_off_screen_for_fifteen_frames() {
        let spec = preset(Preset::Longterm).unwrap();
        let (_, gt) = render_all(&spec).unwrap();
        let off: Vec<usize> = (0..spec.frames).filter(|&f| !gt.row(f, 0).unwrap().on_screen).collect();
        assert_eq!(off.len(), 15);
        assert_eq!(off.last().unwrap() - off[0], 14);
        assert!(gt.all_rows().filter(|r| r.player == 1).all(|r| r.on_screen));
    }

    #[test]
    fn generate_writes_everything_deterministically() {
        let spec = preset(Preset::Light).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let (seq, gt) = generate(&spec, a.path()).unwrap();
        generate(&spec, b.path()).unwrap();
        assert_eq!(seq.len(), 125);
        assert_eq!(gt.all_rows().count(), 250);
        for name in [GT_FILE, "seq.json", SCENARIO_FILE, "frame_000000.ppm", "frame_000124.ppm"] {
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
        }
        assert_eq!(GroundTruth::read_jsonl(&a.path().join(GT_FILE)).unwrap(), gt);
        let reloaded = ScenarioSpec::from_json_file(&a.path().join(SCENARIO_FILE)).unwrap();
        assert_eq!(reloaded, spec);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mut spec = one_player(10.0, 10.0);
        spec.frames = 1;
        assert!(spec.validate().is_err());
        let mut spec = one_player(10.0, 10.0);
        spec.players[0].size = (8, 24);
        assert!(spec.validate().is_err());
        let mut spec = one_player(10.0, 10.0);
        spec.players[0].waypoints = vec![wp(3, 0.0, 0.0), wp(3, 1.0, 1.0)];
        assert!(spec.validate().is_err());
    }
}
