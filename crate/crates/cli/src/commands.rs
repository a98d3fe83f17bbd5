//! Subcommand implementations. Printing goes through [`Console`] so that
//! `--quiet` silences everything except errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::anyhow;
use teamtrack_core::media::load_frame_sequence;
use teamtrack_core::metrics::{evaluate, EvalReport};
use teamtrack_core::model::{bbox_center, Frame, PointPrompt};
use teamtrack_core::pipeline::run;
use teamtrack_core::scenario::{
    generate, preset, render_all, GroundTruth, Preset, ScenarioSpec, GT_FILE, SCENARIO_FILE,
};
use teamtrack_core::segmenter::{OracleSegmenter, SegmenterKind};
use teamtrack_core::tracklog::{TrackLog, TRACK_FILE};

use crate::checks::{scenario_checks, Check, RunArtifacts};
use crate::config::{RunConfig, ScenarioSource};
use crate::table;
use crate::{CliResult, Failure};

pub const THREADS_ENV: &str = "TEAMTRACK_THREADS";
pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, Copy)]
pub struct Console {
    pub quiet: bool,
}

impl Console {
    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

/// Worker count from `TEAMTRACK_THREADS`; unset means all cores, 0 means sequential.
pub fn threads_from_env() -> CliResult<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::validation(anyhow!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn parse_preset(name: &str) -> CliResult<Preset> {
    Preset::parse(name).ok_or_else(|| {
        Failure::validation(anyhow!("unknown preset {name:?}; valid presets: {}", Preset::BUILTIN.join(", ")))
    })
}

fn builtin(name: &str) -> CliResult<ScenarioSpec> {
    Ok(preset(parse_preset(name)?).expect("built-in presets have specs"))
}

pub enum SynthSource {
    Preset(String),
    Spec(PathBuf),
}

/// Render a scene to `out` as PPM frames plus `gt.jsonl`.
pub fn synth(source: &SynthSource, out: &Path, console: Console) -> CliResult<(usize, usize)> {
    let spec = match source {
        SynthSource::Preset(name) => builtin(name)?,
        SynthSource::Spec(path) => ScenarioSpec::from_json_file(path)?,
    };
    let (seq, gt) = generate(&spec, out)?;
    let rows = gt.all_rows().count();
    console.say(format!("{}: wrote {} frames and {rows} ground-truth rows to {}", spec.name, seq.len(), out.display()));
    Ok((seq.len(), rows))
}

/// Load frames and ground truth for a run, along with the scene name.
fn load_source(cfg: &RunConfig) -> CliResult<(Vec<Frame>, GroundTruth, String)> {
    match &cfg.scenario {
        ScenarioSource::Preset(name) => {
            let spec = builtin(name)?;
            let (frames, gt) = render_all(&spec)?;
            Ok((frames, gt, spec.name))
        }
        ScenarioSource::Sequence(dir) => {
            let seq = load_frame_sequence(dir)?;
            let gt_path = dir.join(GT_FILE);
            if !gt_path.exists() {
                return Err(Failure::validation(match cfg.segmenter.kind {
                    SegmenterKind::Oracle => anyhow!(
                        "the oracle segmenter answers from ground truth, but {} does not exist",
                        gt_path.display()
                    ),
                }));
            }
            let gt = GroundTruth::read_jsonl(&gt_path)?;
            if gt.frame_count() < seq.len() {
                return Err(Failure::validation(anyhow!(
                    "{} covers {} frames but the sequence has {}",
                    gt_path.display(),
                    gt.frame_count(),
                    seq.len()
                )));
            }
            let spec_path = dir.join(SCENARIO_FILE);
            let name = if spec_path.exists() {
                ScenarioSpec::from_json_file(&spec_path)?.name
            } else {
                dir.file_name().map_or_else(|| "sequence".into(), |n| n.to_string_lossy().into_owned())
            };
            Ok((seq.frames, gt, name))
        }
    }
}

pub struct TrackOutcome {
    pub log: TrackLog,
    pub gt: GroundTruth,
}

/// Run the pipeline described by `cfg` and write its log into `cfg.output`.
pub fn track(cfg: &RunConfig, console: Console) -> CliResult<TrackOutcome> {
    let (frames, gt, name) = load_source(cfg)?;
    let (w, h) = frames.first().map(Frame::dims).ok_or_else(|| Failure::validation(anyhow!("no frames")))?;
    cfg.check_prompts(w, h)?;
    let segmenter = OracleSegmenter::from_config(gt.clone(), &cfg.segmenter);
    let out = run(&frames, &cfg.prompts, &segmenter, &cfg.pipeline(), threads_from_env()?)?;
    if !out.rejected.is_empty() {
        let list: Vec<String> = out
            .rejected
            .iter()
            .map(|r| format!("prompt {} at ({}, {}): {}", r.index, r.prompt.x, r.prompt.y, r.error))
            .collect();
        return Err(Failure::validation(anyhow!("unusable prompts: {}", list.join("; "))));
    }
    let mut log = out.log;
    log.meta.scenario = name;
    log.meta.config_hash = cfg.hash();
    log.write_dir(&cfg.output)?;
    let mean_ms = log.frame_ms.iter().sum::<f64>() / log.frame_ms.len() as f64;
    console.say(format!(
        "tracked {} players over {} frames: {} events, {mean_ms:.2} ms/frame, log in {}",
        log.players().len(),
        log.meta.frames,
        log.events.len(),
        cfg.output.display()
    ));
    Ok(TrackOutcome { log, gt })
}

fn write_report(report: &EvalReport, path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(anyhow!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, report.to_json()).map_err(|e| Failure::io(anyhow!("cannot write {}: {e}", path.display())))
}

/// Score a saved log against ground truth and write the report.
pub fn eval(track_path: &Path, gt_path: &Path, report_path: &Path, console: Console) -> CliResult<EvalReport> {
    let log = TrackLog::read(track_path)?;
    let gt = GroundTruth::read_jsonl(gt_path)?;
    let report = evaluate(&log, &gt)?;
    write_report(&report, report_path)?;
    console.say(table::render(&report).trim_end());
    Ok(report)
}

/// Default report location next to a track log.
pub fn default_report_path(track_path: &Path) -> PathBuf {
    track_path.parent().unwrap_or(Path::new("")).join(REPORT_FILE)
}

pub struct ReproOutcome {
    pub report: EvalReport,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

/// Prompts at the centre of every player visible in frame 0.
pub fn centre_prompts(gt: &GroundTruth) -> Vec<PointPrompt> {
    gt.rows(0)
        .iter()
        .filter_map(|r| {
            let b = r.bbox.filter(|_| r.on_screen && r.visible > 0.0)?;
            let (x, y) = bbox_center(&b);
            Some(PointPrompt { x: x as i64, y: y as i64, team: r.team })
        })
        .collect()
}

/// Run a built-in scenario end to end in `out`, then check its criteria.
///
/// Returns the outcome even when a criterion fails; see [`repro_exit`].
pub fn repro(name: &str, out: &Path, console: Console) -> CliResult<ReproOutcome> {
    let kind = parse_preset(name)?;
    let start = Instant::now();
    synth(&SynthSource::Preset(name.to_string()), out, console)?;
    let gt = GroundTruth::read_jsonl(&out.join(GT_FILE))?;
    let cfg = RunConfig {
        scenario: ScenarioSource::Sequence(out.to_path_buf()),
        prompts: centre_prompts(&gt),
        thresholds: Default::default(),
        recovery: Default::default(),
        segmenter: Default::default(),
        tracker: Default::default(),
        output: out.to_path_buf(),
        seed: 0,
    };
    let cfg_path = out.join(CONFIG_FILE);
    let mut text = serde_json::to_string_pretty(&cfg).expect("config serializes");
    text.push('\n');
    fs::write(&cfg_path, text).map_err(|e| Failure::io(anyhow!("cannot write {}: {e}", cfg_path.display())))?;
    let outcome = track(&cfg, console)?;
    let report = eval(&out.join(TRACK_FILE), &out.join(GT_FILE), &out.join(REPORT_FILE), console)?;
    let elapsed = start.elapsed();
    let run = RunArtifacts { log: &outcome.log, gt: &outcome.gt, report: &report, elapsed };
    let checks = scenario_checks(kind, &run, &cfg.recovery);
    console.say("");
    for c in &checks {
        console.say(format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    Ok(ReproOutcome { report, checks, elapsed })
}

/// Exit 3 naming every failed criterion.
pub fn repro_exit(outcome: &ReproOutcome) -> CliResult<()> {
    let failed: Vec<&str> = outcome.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::acceptance(anyhow!("criteria failed: {}", failed.join(", "))))
    }
}
