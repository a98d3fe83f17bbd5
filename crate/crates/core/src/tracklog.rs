//! On-disk form of a tracking run.
//!
//! `track.jsonl` holds one record per frame per player. `events.jsonl`
//! holds one pipeline event per line. `run.json` holds run metadata.
//! Per-frame timings travel in the `ms` field of every track record.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PlayerId;
use crate::pipeline::{PipelineEvent, TrackRecord};

pub const TRACK_FILE: &str = "track.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMeta {
    pub scenario: String,
    /// Hex digest of the run configuration.
    pub config_hash: String,
    pub frames: usize,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackLog {
    pub meta: RunMeta,
    /// Sorted by frame, then player.
    pub records: Vec<TrackRecord>,
    /// Sorted by frame, then player, then emission order.
    pub events: Vec<PipelineEvent>,
    /// Wall-clock milliseconds per frame.
    pub frame_ms: Vec<f64>,
}

impl TrackLog {
    /// Ids of every player with records, ascending.
    pub fn players(&self) -> Vec<PlayerId> {
        let mut ids: Vec<PlayerId> = self.records.iter().map(|r| r.player).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Records of one player in frame order.
    pub fn player_records(&self, player: PlayerId) -> impl Iterator<Item = &TrackRecord> {
        self.records.iter().filter(move |r| r.player == player)
    }

    /// Check the one-record-per-frame-per-player layout and event references.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidLog(m));
        let n = self.meta.frames;
        let mut per_player: BTreeMap<PlayerId, Vec<usize>> = BTreeMap::new();
        for r in &self.records {
            if r.frame >= n {
                return bad(format!("record at frame {} beyond the {n}-frame run", r.frame));
            }
            if !(0.0..=1.0).contains(&r.confidence) {
                return bad(format!("confidence {} out of range", r.confidence));
            }
            per_player.entry(r.player).or_default().push(r.frame);
        }
        for (player, frames) in &per_player {
            let mut sorted = frames.clone();
            sorted.sort_unstable();
            let first = sorted[0];
            if sorted.iter().enumerate().any(|(i, &f)| f != first + i) || first + sorted.len() != n {
                return bad(format!("player {player} does not have exactly one record per frame from {first}"));
            }
        }
        for e in &self.events {
            if e.frame >= n || !per_player.contains_key(&e.player) {
                return bad(format!("event {:?} refers to frame {} player {}", e.kind, e.frame, e.player));
            }
        }
        if self.frame_ms.len() != n {
            return bad(format!("{} frame timings for {n} frames", self.frame_ms.len()));
        }
        Ok(())
    }

    /// Write `track.jsonl`, `events.jsonl` and `run.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join(TRACK_FILE), &self.records)?;
        write_jsonl(&dir.join(EVENTS_FILE), &self.events)?;
        let path = dir.join(RUN_FILE);
        let mut text = serde_json::to_string_pretty(&self.meta).map_err(|e| Error::json(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Read a log given its `track.jsonl`; events and metadata are taken from the same directory.
    pub fn read(track_path: &Path) -> Result<TrackLog> {
        let dir = track_path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        let mut records: Vec<TrackRecord> = read_jsonl(track_path)?;
        let mut events: Vec<PipelineEvent> = read_jsonl(&dir.join(EVENTS_FILE))?;
        let run_path = dir.join(RUN_FILE);
        let meta = if run_path.exists() {
            let text = fs::read_to_string(&run_path).map_err(|e| Error::io(&run_path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::json(&run_path, e))?
        } else {
            RunMeta { frames: records.iter().map(|r| r.frame + 1).max().unwrap_or(0), ..RunMeta::default() }
        };
        records.sort_by_key(|r| (r.frame, r.player));
        events.sort_by_key(|e| (e.frame, e.player));
        let mut frame_ms = vec![f64::NAN; meta.frames];
        for r in &records {
            if let Some(slot) = frame_ms.get_mut(r.frame) {
                *slot = r.ms;
            }
        }
        let frame_ms = if frame_ms.iter().any(|v| v.is_nan()) { Vec::new() } else { frame_ms };
        Ok(TrackLog { meta, records, events, frame_ms })
    }
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        let line = serde_json::to_string(row).map_err(|e| Error::json(path, e))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            rows.push(serde_json::from_str(&line).map_err(|e| Error::json(path, e))?);
        }
    }
    Ok(rows)
}
