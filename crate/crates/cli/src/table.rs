//! Plain-text rendering of an [`EvalReport`].

use std::fmt::Write;

use teamtrack_core::metrics::EvalReport;

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.digits$}"))
}

/// One section per metric group, with event tallies last.
pub fn render(r: &EvalReport) -> String {
    let p = &r.performance;
    let o = &r.occlusion_events;
    let s = &r.offscreen_events;
    let sections: [(&str, Vec<(&str, String)>); 4] = [
        (
            "Computational Performance",
            vec![
                ("Mean Frame Time (ms)", format!("{:.2}", p.mean_frame_ms)),
                ("Min Frame Time (ms)", format!("{:.2}", p.min_frame_ms)),
                ("Max Frame Time (ms)", format!("{:.2}", p.max_frame_ms)),
                ("Average FPS", format!("{:.2}", p.avg_fps)),
                ("Memory (MB)", opt(p.memory_mb, 1)),
            ],
        ),
        (
            "Tracking Accuracy",
            vec![
                ("Tracking Success Rate (%)", format!("{:.1}", r.tsr)),
                ("Mean IoU", opt(r.mean_iou, 3)),
                ("BBox Stability (area ratio)", opt(r.bbox_stability, 3)),
                ("Track Fragmentation", format!("{:.1}", r.fragmentation)),
                ("Occlusion Frame Ratio (%)", format!("{:.1}", r.occlusion_frame_ratio)),
            ],
        ),
        (
            "Robustness",
            vec![
                ("Identity Switches", r.identity_switches.to_string()),
                ("Occlusion Recovery Rate (%)", opt(r.orr, 1)),
                ("Avg Recovery Time (frames)", opt(r.avg_recovery_time, 1)),
                ("Track Persistence (frames)", format!("{:.1}", r.persistence)),
                ("Robustness Score", format!("{:.1}", r.robustness_score)),
            ],
        ),
        (
            "Occlusion Events",
            vec![
                ("Total Occlusion Events", o.total.to_string()),
                ("Successfully Recovered", o.recovered.to_string()),
                ("Failed Recovery", o.failed.to_string()),
                ("Off-Screen Events", s.total.to_string()),
                ("Re-acquired", s.reacquired.to_string()),
                ("Avg Off-Screen Duration (frames)", opt(s.avg_duration, 1)),
            ],
        ),
    ];
    let width = sections.iter().flat_map(|(_, rows)| rows.iter().map(|(k, _)| k.len())).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "Scenario: {} ({} frames, {} players)", r.scenario, r.frames, r.players);
    for (title, rows) in sections {
        let _ = writeln!(out, "\n{title}");
        for (k, v) in rows {
            let _ = writeln!(out, "  {k:<width$}  {v:>10}");
        }
    }
    out
}
