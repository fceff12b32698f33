//! Per-episode CSV files and run manifests.
//!
//! Schema: `episode,total_reward,ema_reward,steps,wall_ms`, reals rendered
//! with exactly six decimals so that parse(write(x)) reproduces the file.

use crate::agent::{AgentConfig, EpisodeRecord};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EPISODE_HEADER: &str = "episode,total_reward,ema_reward,steps,wall_ms";

/// Renders records; `wall_ms` is written as 0 unless `record_wall` so that
/// reruns are byte-identical.
pub fn records_to_csv(records: &[EpisodeRecord], record_wall: bool) -> String {
    let mut out = String::with_capacity(48 * (records.len() + 1));
    out.push_str(EPISODE_HEADER);
    out.push('\n');
    for r in records {
        let wall = if record_wall { r.wall_ms } else { 0 };
        let _ = writeln!(out, "{},{:.6},{:.6},{},{}", r.index, r.total_reward, r.ema_reward, r.steps, wall);
    }
    out
}

pub fn parse_records(text: &str) -> Result<Vec<EpisodeRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == EPISODE_HEADER => {}
        _ => return Err(Error::Parse(format!("episode CSV must start with `{EPISODE_HEADER}`"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Parse(format!("episode CSV row {}: `{line}`", i + 1));
            if f.len() != 5 {
                return Err(bad());
            }
            Ok(EpisodeRecord {
                index: f[0].parse().map_err(|_| bad())?,
                total_reward: f[1].parse().map_err(|_| bad())?,
                ema_reward: f[2].parse().map_err(|_| bad())?,
                steps: f[3].parse().map_err(|_| bad())?,
                wall_ms: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_records(&text)
}

/// Artifact index of one `train` invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: AgentConfig,
    pub seeds: Vec<u64>,
    /// Result files relative to the output directory.
    pub files: Vec<PathBuf>,
    pub version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# natgrad run manifest");
        let _ = writeln!(out, "version = {}", self.version);
        let _ = writeln!(out, "started_unix_ms = {}", self.started_unix_ms);
        let _ = writeln!(out, "finished_unix_ms = {}", self.finished_unix_ms);
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "seeds = {}", seeds.join(","));
        for f in &self.files {
            let _ = writeln!(out, "file = {}", f.display());
        }
        let _ = writeln!(out, "[config]");
        out.push_str(&self.config.to_text());
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (head, config) = text
            .split_once("[config]")
            .ok_or_else(|| Error::Parse("manifest lacks a [config] section".into()))?;
        let settings = crate::agent::parse_settings(config)?;
        let config = AgentConfig::from_settings(&settings)?;
        let mut m = RunManifest {
            config,
            seeds: Vec::new(),
            files: Vec::new(),
            version: String::new(),
            started_unix_ms: 0,
            finished_unix_ms: 0,
        };
        for line in head.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Parse(format!("manifest line `{line}`")))?;
            let num = |v: &str| v.parse::<u128>().map_err(|_| Error::Parse(format!("manifest {k}: `{v}`")));
            match k {
                "version" => m.version = v.to_string(),
                "started_unix_ms" => m.started_unix_ms = num(v)?,
                "finished_unix_ms" => m.finished_unix_ms = num(v)?,
                "seeds" => {
                    m.seeds = v
                        .split(',')
                        .filter(|s| !s.is_empty())
                        .map(|s| s.trim().parse().map_err(|_| Error::Parse(format!("manifest seed `{s}`"))))
                        .collect::<Result<_>>()?
                }
                "file" => m.files.push(PathBuf::from(v)),
                other => return Err(Error::Parse(format!("unknown manifest key `{other}`"))),
            }
        }
        Ok(m)
    }
}
