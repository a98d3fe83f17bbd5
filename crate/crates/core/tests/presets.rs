use teamtrack_core::metrics::evaluate;
use teamtrack_core::model::{bbox_center, PointPrompt};
use teamtrack_core::pipeline::{run, EventKind, PipelineConfig, StatusKind};
use teamtrack_core::scenario::{preset, render_all, GroundTruth, Preset};
use teamtrack_core::segmenter::OracleSegmenter;
use teamtrack_core::tracklog::TrackLog;

fn run_preset(kind: Preset) -> (TrackLog, GroundTruth) {
    let spec = preset(kind).unwrap();
    let (frames, gt) = render_all(&spec).unwrap();
    let prompts: Vec<PointPrompt> = gt
        .rows(0)
        .iter()
        .map(|r| {
            let (x, y) = bbox_center(&r.bbox.unwrap());
            PointPrompt { x: x as i64, y: y as i64, team: r.team }
        })
        .collect();
    let seg = OracleSegmenter::new(gt.clone(), 1);
    let out = run(&frames, &prompts, &seg, &PipelineConfig::default(), 0).unwrap();
    assert!(out.rejected.is_empty());
    (out.log, gt)
}

#[test]
fn light_scene_tracks_through_partial_occlusion() {
    let (log, gt) = run_preset(Preset::Light);
    log.validate().unwrap();
    assert!(log.events.is_empty(), "{:?}", log.events);
    let r = evaluate(&log, &gt).unwrap();
    assert!(r.tsr >= 95.0, "tsr {}", r.tsr);
    assert_eq!(r.identity_switches, 0);
}

#[test]
fn heavy_scene_recovers_on_the_grid_schedule() {
    let (log, gt) = run_preset(Preset::Heavy);
    log.validate().unwrap();
    let p0: Vec<_> = log.events.iter().filter(|e| e.player.0 == 0).collect();
    let start = p0.iter().find(|e| e.kind == EventKind::OcclusionStart).expect("occlusion start").frame;
    let success = p0.iter().find(|e| e.kind == EventKind::RecoverySuccess).expect("recovery").frame;
    for e in p0.iter().filter(|e| e.kind == EventKind::RecoveryAttempt) {
        let lost_for = e.frame - start;
        assert!(lost_for >= 10 && lost_for % 10 == 0, "attempt at {}", e.frame);
    }
    assert!(success > start && (success - start) % 10 == 0);
    for r in log.records.iter().filter(|r| r.status == StatusKind::Lost) {
        assert!(r.bbox.is_none(), "{r:?}");
    }
    // the decoy never wins a recovery
    for e in p0.iter().filter(|e| e.kind == EventKind::RecoverySuccess) {
        let own = gt.row(e.frame, 0).unwrap().bbox.unwrap();
        let got = e.candidates.iter().max_by(|a, b| a.similarity.total_cmp(&b.similarity)).unwrap();
        assert!(teamtrack_core::model::iou(&got.bbox, &own) > 0.5);
    }
    let r = evaluate(&log, &gt).unwrap();
    assert_eq!(r.identity_switches, 0);
    assert_eq!(r.orr, Some(100.0));
}

#[test]
fn longterm_scene_reacquires_after_exit() {
    let (log, gt) = run_preset(Preset::Longterm);
    log.validate().unwrap();
    let kinds: Vec<_> = log.events.iter().filter(|e| e.player.0 == 0).map(|e| (e.kind, e.frame)).collect();
    let start = kinds.iter().find(|k| k.0 == EventKind::OffScreenStart).expect("exit").1;
    let end = kinds.iter().find(|k| k.0 == EventKind::OffScreenEnd).expect("return").1;
    let gt_gone: Vec<usize> = (0..gt.frame_count()).filter(|&f| !gt.row(f, 0).unwrap().on_screen).collect();
    assert_eq!(start, gt_gone[0]);
    assert_eq!(end, gt_gone.last().unwrap() + 1);
    let r = evaluate(&log, &gt).unwrap();
    assert_eq!(r.offscreen_events.reacquired, 1);
    assert!(r.tsr >= 95.0);
}
