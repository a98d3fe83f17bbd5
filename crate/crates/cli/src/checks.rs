//! Pass/fail criteria for the built-in scenarios.

use std::time::Duration;

use teamtrack_core::metrics::{gt_identities, EvalReport};
use teamtrack_core::model::{iou, BBox, PlayerId};
use teamtrack_core::pipeline::{EventKind, RecoveryConfig, StatusKind};
use teamtrack_core::scenario::{GroundTruth, Preset};
use teamtrack_core::tracklog::TrackLog;

/// Longest a `repro light` run may take.
pub const LIGHT_TIME_LIMIT: Duration = Duration::from_secs(60);
/// Minimum run of fully hidden frames that counts as a full occlusion.
pub const FULL_OCCLUSION_FRAMES: usize = 12;

/// `none` for a missing value.
fn show<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name, passed, detail: detail.into() }
    }
}

/// Everything a criterion may look at.
pub struct RunArtifacts<'a> {
    pub log: &'a TrackLog,
    pub gt: &'a GroundTruth,
    pub report: &'a EvalReport,
    pub elapsed: Duration,
}

pub fn scenario_checks(preset: Preset, run: &RunArtifacts<'_>, recovery: &RecoveryConfig) -> Vec<Check> {
    match preset {
        Preset::Light => light(run),
        Preset::Heavy => heavy(run, recovery),
        Preset::Longterm => longterm(run),
        Preset::Custom => Vec::new(),
    }
}

fn light(run: &RunArtifacts<'_>) -> Vec<Check> {
    let r = run.report;
    let stability = r.bbox_stability.unwrap_or(0.0);
    vec![
        Check::new("tsr = 100", r.tsr == 100.0, format!("tsr {}", r.tsr)),
        Check::new("identity switches = 0", r.identity_switches == 0, format!("{} switches", r.identity_switches)),
        Check::new("fragmentation = 1.0", r.fragmentation == 1.0, format!("fragmentation {}", r.fragmentation)),
        Check::new("bbox stability >= 0.95", stability >= 0.95, format!("stability {stability}")),
        Check::new(
            "no recovery-requiring occlusion",
            r.occlusion_events.total == 0,
            format!("{} occlusion events", r.occlusion_events.total),
        ),
        Check::new("robustness = 60.0", r.robustness_score == 60.0, format!("robustness {}", r.robustness_score)),
        Check::new("runtime < 60 s", run.elapsed < LIGHT_TIME_LIMIT, format!("{:.2} s", run.elapsed.as_secs_f64())),
    ]
}

/// Ground-truth players hidden completely for at least [`FULL_OCCLUSION_FRAMES`] frames in a row.
pub fn fully_occluded_players(gt: &GroundTruth) -> Vec<u32> {
    gt.players()
        .into_iter()
        .filter(|&p| {
            let mut run = 0;
            let mut best = 0;
            for f in 0..gt.frame_count() {
                let hidden = gt.row(f, p).is_some_and(|r| r.on_screen && r.visible == 0.0);
                run = if hidden { run + 1 } else { 0 };
                best = best.max(run);
            }
            best >= FULL_OCCLUSION_FRAMES
        })
        .collect()
}

/// Ground-truth player whose box overlaps `b` most.
fn best_gt_match(gt: &GroundTruth, frame: usize, b: &BBox) -> Option<u32> {
    gt.rows(frame)
        .iter()
        .filter_map(|r| r.bbox.map(|g| (r.player, iou(b, &g))))
        .filter(|&(_, v)| v > 0.0)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| p)
}

fn heavy(run: &RunArtifacts<'_>, recovery: &RecoveryConfig) -> Vec<Check> {
    let (log, gt, r) = (run.log, run.gt, run.report);
    let ids = gt_identities(log, gt);
    let hidden = fully_occluded_players(gt);
    let target: Option<(PlayerId, u32)> =
        ids.iter().find_map(|(&p, &g)| g.filter(|g| hidden.contains(g)).map(|g| (p, g)));
    let mut checks = Vec::new();
    let Some((player, own)) = target else {
        checks.push(Check::new("full occlusion present", false, "no tracked player is fully hidden for 12 frames"));
        return checks;
    };
    let events: Vec<_> = log.events.iter().filter(|e| e.player == player).collect();
    let start = events.iter().find(|e| e.kind == EventKind::OcclusionStart).map(|e| e.frame);
    checks.push(Check::new(
        "occlusion start emitted",
        start.is_some(),
        format!("player {player} (ground truth {own}), start {}", show(start)),
    ));
    let first_attempt = start
        .and_then(|s| events.iter().find(|e| e.kind == EventKind::RecoveryAttempt && e.frame > s).map(|e| e.frame - s));
    checks.push(Check::new(
        "first recovery attempt at lost duration 10",
        first_attempt == Some(recovery.loss_threshold),
        format!("lost for {} frames", show(first_attempt)),
    ));
    let success = events.iter().find(|e| e.kind == EventKind::RecoverySuccess).map(|e| e.frame);
    let post_iou = success.and_then(|f| {
        let rec = log.player_records(player).find(|r| r.frame == f)?;
        Some(iou(&rec.bbox?, &gt.row(f, own)?.bbox?))
    });
    checks.push(Check::new(
        "re-acquired own player (iou >= 0.5)",
        post_iou.is_some_and(|v| v >= 0.5),
        format!("recovered at {}, iou {}", show(success), show(post_iou.map(|v| format!("{v:.3}")))),
    ));
    let mut decoy_max: Option<f64> = None;
    for e in events.iter().filter(|e| matches!(e.kind, EventKind::RecoverySuccess | EventKind::RecoveryFailure)) {
        for c in &e.candidates {
            if best_gt_match(gt, e.frame, &c.bbox) != Some(own) {
                decoy_max = Some(decoy_max.map_or(c.similarity, |m: f64| m.max(c.similarity)));
            }
        }
    }
    checks.push(Check::new(
        "decoy similarity < 0.6",
        decoy_max.is_none_or(|m| m < recovery.similarity_threshold),
        format!("highest non-target similarity {}", show(decoy_max.map(|v| format!("{v:.4}")))),
    ));
    let orr = r.orr.unwrap_or(0.0);
    checks.push(Check::new("orr >= 50", orr >= 50.0, format!("orr {}", show(r.orr))));
    checks.push(Check::new("tsr >= 85", r.tsr >= 85.0, format!("tsr {}", r.tsr)));
    checks
}

fn longterm(run: &RunArtifacts<'_>) -> Vec<Check> {
    let (log, gt, r) = (run.log, run.gt, run.report);
    let s = &r.offscreen_events;
    let ids = gt_identities(log, gt);
    let boxed_off = log
        .records
        .iter()
        .filter(|rec| {
            let gt_off = ids[&rec.player].and_then(|g| gt.row(rec.frame, g)).is_some_and(|row| !row.on_screen);
            rec.bbox.is_some() && (rec.status == StatusKind::OffScreen || gt_off)
        })
        .count();
    vec![
        Check::new("exactly one off-screen event", s.total == 1, format!("{} off-screen events", s.total)),
        Check::new(
            "off-screen duration 15",
            s.avg_duration == Some(15.0),
            format!("duration {}", show(s.avg_duration)),
        ),
        Check::new("no bbox while off-screen", boxed_off == 0, format!("{boxed_off} boxed off-screen records")),
        Check::new("identity switches = 0", r.identity_switches == 0, format!("{} switches", r.identity_switches)),
    ]
}
