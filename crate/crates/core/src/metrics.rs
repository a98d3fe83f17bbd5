//! Evaluation of a [`TrackLog`] against [`GroundTruth`].
//!
//! Accuracy metrics compare boxes with ground truth frame by frame.
//! Robustness metrics follow identities and occlusion episodes over time.
//! Speed comes from per-frame timings. Every real-valued figure in the report is
//! rounded to six decimals so that reports compare byte for byte.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{iou, BBox, PlayerId};
use crate::pipeline::{EventKind, PipelineEvent, StatusKind};
use crate::scenario::GroundTruth;
use crate::tracklog::TrackLog;

/// Minimum IoU for a frame to count as tracked or as an identity match.
pub const MATCH_IOU: f64 = 0.3;
/// A player is occluded when less than this share of its silhouette shows.
pub const OCCLUDED_BELOW: f64 = 0.7;

pub const WEIGHT_RECOVERY: f64 = 0.4;
pub const WEIGHT_PERSISTENCE: f64 = 0.3;
pub const WEIGHT_IDENTITY: f64 = 0.3;

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerTsr {
    pub player: PlayerId,
    /// Ground-truth identity the track was initialised on.
    pub gt_player: Option<u32>,
    pub tracked_frames: usize,
    pub on_screen_frames: usize,
    pub tsr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerfStats {
    pub mean_frame_ms: f64,
    pub min_frame_ms: f64,
    pub max_frame_ms: f64,
    pub avg_fps: f64,
    /// Not measured.
    pub memory_mb: Option<f64>,
    /// Not measured.
    pub peak_memory_mb: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcclusionTally {
    pub total: usize,
    pub recovered: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffScreenTally {
    pub total: usize,
    pub reacquired: usize,
    pub failed: usize,
    pub avg_duration: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecoveryStats {
    pub orr: Option<f64>,
    pub avg_recovery_time: Option<f64>,
    pub occlusion_events: OcclusionTally,
    pub offscreen_events: OffScreenTally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub scenario: String,
    pub config_hash: String,
    pub frames: usize,
    pub players: usize,
    pub tsr: f64,
    pub tsr_per_player: Vec<PlayerTsr>,
    pub mean_iou: Option<f64>,
    pub bbox_stability: Option<f64>,
    pub fragmentation: f64,
    pub occlusion_frame_ratio: f64,
    pub identity_switches: usize,
    pub orr: Option<f64>,
    pub avg_recovery_time: Option<f64>,
    pub persistence: f64,
    pub normalized_persistence: f64,
    pub robustness_score: f64,
    pub performance: PerfStats,
    pub occlusion_events: OcclusionTally,
    pub offscreen_events: OffScreenTally,
}

/// Ground-truth player best overlapping `b` in `frame`, if any reaches [`MATCH_IOU`].
fn best_match(gt: &GroundTruth, frame: usize, b: &BBox) -> Option<u32> {
    let mut best: Option<(u32, f64)> = None;
    for row in gt.rows(frame) {
        let Some(g) = row.bbox else { continue };
        let v = iou(b, &g);
        if v >= MATCH_IOU && best.is_none_or(|(_, bv)| v > bv) {
            best = Some((row.player, v));
        }
    }
    best.map(|(p, _)| p)
}

/// Ground-truth identity of each track: the best match of its first boxed record.
pub fn gt_identities(log: &TrackLog, gt: &GroundTruth) -> BTreeMap<PlayerId, Option<u32>> {
    log.players()
        .into_iter()
        .map(|p| {
            let own = log
                .player_records(p)
                .find_map(|r| r.bbox.filter(|_| r.status == StatusKind::Active).map(|b| (r.frame, b)))
                .and_then(|(f, b)| best_match(gt, f, &b));
            (p, own)
        })
        .collect()
}

fn own_gt_box(gt: &GroundTruth, frame: usize, own: Option<u32>) -> Option<(BBox, bool)> {
    let row = gt.row(frame, own?)?;
    Some((row.bbox?, row.on_screen))
}

/// Per-player and aggregate tracking success rate in percent.
pub fn tsr(log: &TrackLog, gt: &GroundTruth) -> (f64, Vec<PlayerTsr>) {
    let ids = gt_identities(log, gt);
    let mut per = Vec::new();
    for (&player, &own) in &ids {
        let (mut tracked, mut on_screen) = (0, 0);
        for r in log.player_records(player) {
            let Some((g, visible)) = own_gt_box(gt, r.frame, own) else { continue };
            if !visible {
                continue;
            }
            on_screen += 1;
            if r.status == StatusKind::Active && r.bbox.is_some_and(|b| iou(&b, &g) >= MATCH_IOU) {
                tracked += 1;
            }
        }
        let rate = if on_screen == 0 { 0.0 } else { 100.0 * tracked as f64 / on_screen as f64 };
        per.push(PlayerTsr {
            player,
            gt_player: own,
            tracked_frames: tracked,
            on_screen_frames: on_screen,
            tsr: round6(rate),
        });
    }
    let counted: Vec<f64> = per
        .iter()
        .filter(|p| p.on_screen_frames > 0)
        .map(|p| 100.0 * p.tracked_frames as f64 / p.on_screen_frames as f64)
        .collect();
    let aggregate = if counted.is_empty() { 0.0 } else { counted.iter().sum::<f64>() / counted.len() as f64 };
    (round6(aggregate), per)
}

/// Mean IoU of boxed Active records against the track's own ground truth while on screen.
pub fn mean_iou(log: &TrackLog, gt: &GroundTruth) -> Option<f64> {
    let ids = gt_identities(log, gt);
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in &log.records {
        let (Some(b), StatusKind::Active) = (r.bbox, r.status) else { continue };
        let Some((g, true)) = own_gt_box(gt, r.frame, ids[&r.player]) else { continue };
        sum += iou(&b, &g);
        n += 1;
    }
    (n > 0).then(|| round6(sum / n as f64))
}

/// Mean min/max area ratio over consecutive Active frame pairs of every player.
pub fn bbox_stability(log: &TrackLog) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for p in log.players() {
        let mut prev: Option<(usize, i64)> = None;
        for r in log.player_records(p) {
            let cur = match (r.status, r.bbox) {
                (StatusKind::Active, Some(b)) => Some((r.frame, b.pixel_area())),
                _ => None,
            };
            if let (Some((pf, pa)), Some((cf, ca))) = (prev, cur) {
                if cf == pf + 1 {
                    sum += pa.min(ca) as f64 / pa.max(ca) as f64;
                    n += 1;
                }
            }
            prev = cur;
        }
    }
    (n > 0).then(|| round6(sum / n as f64))
}

/// Lengths of maximal runs of `true`.
pub fn segment_lengths(active: &[bool]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut run = 0;
    for &a in active {
        if a {
            run += 1;
        } else if run > 0 {
            out.push(run);
            run = 0;
        }
    }
    if run > 0 {
        out.push(run);
    }
    out
}

fn active_flags(log: &TrackLog, player: PlayerId) -> Vec<bool> {
    log.player_records(player).map(|r| r.status == StatusKind::Active).collect()
}

/// Mean number of maximal Active segments per player.
pub fn fragmentation(log: &TrackLog) -> f64 {
    let players = log.players();
    if players.is_empty() {
        return 0.0;
    }
    let total: usize = players.iter().map(|&p| segment_lengths(&active_flags(log, p)).len()).sum();
    round6(total as f64 / players.len() as f64)
}

/// Percent of frames where some on-screen player shows less than [`OCCLUDED_BELOW`] of itself.
pub fn occlusion_frame_ratio(gt: &GroundTruth) -> f64 {
    let n = gt.frame_count();
    if n == 0 {
        return 0.0;
    }
    let hit = (0..n).filter(|&f| gt.rows(f).iter().any(|r| r.on_screen && r.visible < OCCLUDED_BELOW)).count();
    round6(100.0 * hit as f64 / n as f64)
}

/// Number of times a track's best-matching ground-truth identity changes.
pub fn identity_switches(log: &TrackLog, gt: &GroundTruth) -> usize {
    let mut switches = 0;
    for p in log.players() {
        let mut last: Option<u32> = None;
        for r in log.player_records(p) {
            let (Some(b), StatusKind::Active) = (r.bbox, r.status) else { continue };
            let Some(m) = best_match(gt, r.frame, &b) else { continue };
            if last.is_some_and(|l| l != m) {
                switches += 1;
            }
            last = Some(m);
        }
    }
    switches
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Episode {
    Occlusion { start: usize, failed: bool },
    OffScreen { start: usize },
}

/// Recovery figures over all occlusion episodes, plus event tallies.
///
/// An occlusion episode runs from `OcclusionStart` to its `RecoverySuccess`.
/// Episodes that saw at least one `RecoveryFailure` and never recovered are
/// terminal failures; the recovery rate is undefined when no episode either
/// recovered or failed terminally.
pub fn occlusion_recovery(events: &[PipelineEvent]) -> RecoveryStats {
    let mut by_player: BTreeMap<PlayerId, Vec<&PipelineEvent>> = BTreeMap::new();
    for e in events {
        by_player.entry(e.player).or_default().push(e);
    }
    let mut occ = OcclusionTally::default();
    let mut off = OffScreenTally::default();
    let mut terminal = 0usize;
    let mut recovery_times = Vec::new();
    let mut durations = Vec::new();

    for evs in by_player.values() {
        let mut open: Option<Episode> = None;
        for e in evs {
            match (e.kind, open) {
                (EventKind::OcclusionStart, _) => {
                    if let Some(Episode::Occlusion { failed: true, .. }) = open {
                        terminal += 1;
                    }
                    occ.total += 1;
                    open = Some(Episode::Occlusion { start: e.frame, failed: false });
                }
                (EventKind::RecoveryFailure, Some(Episode::Occlusion { start, .. })) => {
                    open = Some(Episode::Occlusion { start, failed: true });
                }
                (EventKind::RecoverySuccess, Some(Episode::Occlusion { start, .. })) => {
                    occ.recovered += 1;
                    recovery_times.push((e.frame - start) as f64);
                    open = None;
                }
                (EventKind::OffScreenStart, _) => {
                    if let Some(Episode::Occlusion { failed: true, .. }) = open {
                        terminal += 1;
                    }
                    off.total += 1;
                    open = Some(Episode::OffScreen { start: e.frame });
                }
                (EventKind::OffScreenEnd, Some(Episode::OffScreen { start })) => {
                    off.reacquired += 1;
                    durations.push((e.frame - start) as f64);
                    open = None;
                }
                (EventKind::ReacquisitionFailure, Some(Episode::OffScreen { .. })) => {
                    off.failed += 1;
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(Episode::Occlusion { failed: true, .. }) = open {
            terminal += 1;
        }
    }
    occ.failed = occ.total - occ.recovered;
    let mean = |v: &[f64]| (!v.is_empty()).then(|| round6(v.iter().sum::<f64>() / v.len() as f64));
    off.avg_duration = mean(&durations);
    let decided = occ.recovered + terminal;
    RecoveryStats {
        orr: (decided > 0).then(|| round6(100.0 * occ.recovered as f64 / decided as f64)),
        avg_recovery_time: mean(&recovery_times),
        occlusion_events: occ,
        offscreen_events: off,
    }
}

/// Mean Active segment length in frames, and that length over the run length.
pub fn persistence(log: &TrackLog) -> (f64, f64) {
    let lengths: Vec<usize> = log.players().into_iter().flat_map(|p| segment_lengths(&active_flags(log, p))).collect();
    if lengths.is_empty() || log.meta.frames == 0 {
        return (0.0, 0.0);
    }
    let mean = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
    (round6(mean), round6(mean / log.meta.frames as f64))
}

/// Weighted robustness score in `[0, 100]`. An undefined recovery rate counts as 0.
pub fn robustness_score(orr: Option<f64>, normalized_persistence: f64, switches: usize, players: usize) -> f64 {
    let identity = (1.0 - switches as f64 / players.max(1) as f64).max(0.0);
    let score = WEIGHT_RECOVERY * orr.unwrap_or(0.0)
        + WEIGHT_PERSISTENCE * normalized_persistence * 100.0
        + WEIGHT_IDENTITY * identity * 100.0;
    round6(score.clamp(0.0, 100.0))
}

pub fn perf_stats(frame_ms: &[f64]) -> Result<PerfStats> {
    if frame_ms.is_empty() {
        return Err(Error::MissingTimings);
    }
    let mean = frame_ms.iter().sum::<f64>() / frame_ms.len() as f64;
    let min = frame_ms.iter().copied().fold(f64::INFINITY, f64::min);
    let max = frame_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PerfStats {
        mean_frame_ms: round6(mean),
        min_frame_ms: round6(min),
        max_frame_ms: round6(max),
        avg_fps: round6(if mean > 0.0 { 1000.0 / mean } else { 0.0 }),
        memory_mb: None,
        peak_memory_mb: None,
    })
}

/// Score a run against ground truth.
pub fn evaluate(log: &TrackLog, gt: &GroundTruth) -> Result<EvalReport> {
    if log.records.is_empty() {
        return Err(Error::InvalidLog("the track log has no records".into()));
    }
    log.validate()?;
    if log.meta.frames != gt.frame_count() {
        return Err(Error::FrameMismatch(format!(
            "log covers {} frames, ground truth {}",
            log.meta.frames,
            gt.frame_count()
        )));
    }
    let performance = perf_stats(&log.frame_ms)?;
    let players = log.players().len();
    let (tsr_all, tsr_per_player) = tsr(log, gt);
    let switches = identity_switches(log, gt);
    let rec = occlusion_recovery(&log.events);
    let (persist, norm) = persistence(log);
    Ok(EvalReport {
        scenario: log.meta.scenario.clone(),
        config_hash: log.meta.config_hash.clone(),
        frames: log.meta.frames,
        players,
        tsr: tsr_all,
        tsr_per_player,
        mean_iou: mean_iou(log, gt),
        bbox_stability: bbox_stability(log),
        fragmentation: fragmentation(log),
        occlusion_frame_ratio: occlusion_frame_ratio(gt),
        identity_switches: switches,
        orr: rec.orr,
        avg_recovery_time: rec.avg_recovery_time,
        persistence: persist,
        normalized_persistence: norm,
        robustness_score: robustness_score(rec.orr, norm, switches, players),
        performance,
        occlusion_events: rec.occlusion_events,
        offscreen_events: rec.offscreen_events,
    })
}

impl EvalReport {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
