//! Run persistence: an append-only JSONL episode log with a config header,
//! a flat JSON metrics summary, and checkpoint files per evaluation point.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::metrics::{EpisodeRecord, EvalPoint, MetricsSummary};
use super::train::TrainOutput;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogLine {
    Header { config: RunConfig },
    Episode { record: EpisodeRecord },
    Eval { point: EvalPoint },
}

/// One structured line per episode, with evaluation points interleaved
/// chronologically after the episode they follow.
pub fn episode_log_string(output: &TrainOutput) -> String {
    let mut lines = Vec::with_capacity(output.episodes.len() + output.summary.eval.len() + 1);
    lines.push(
        serde_json::to_string(&LogLine::Header {
            config: output.config.clone(),
        })
        .expect("config serializes"),
    );
    let mut eval_iter = output.summary.eval.iter().peekable();
    for record in &output.episodes {
        let episode = record.episode;
        lines.push(
            serde_json::to_string(&LogLine::Episode {
                record: record.clone(),
            })
            .expect("record serializes"),
        );
        while eval_iter.peek().map(|e| e.after_episode) == Some(episode) {
            let point = *eval_iter.next().expect("peeked");
            lines.push(serde_json::to_string(&LogLine::Eval { point }).expect("point serializes"));
        }
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

/// Persist a finished run: `episodes.jsonl`, `summary.json` and
/// `checkpoints/ckpt_<episode>.bin`.
pub fn write_run(dir: impl AsRef<Path>, output: &TrainOutput) -> std::io::Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("episodes.jsonl"), episode_log_string(output))?;
    let mut summary = serde_json::to_string_pretty(&output.summary).expect("summary serializes");
    summary.push('\n');
    fs::write(dir.join("summary.json"), summary)?;
    if !output.checkpoints.is_empty() {
        let ckpt_dir = dir.join("checkpoints");
        fs::create_dir_all(&ckpt_dir)?;
        for c in &output.checkpoints {
            let mut f = fs::File::create(ckpt_dir.join(format!("ckpt_{:05}.bin", c.after_episode)))?;
            f.write_all(&c.bytes)?;
        }
    }
    Ok(())
}

#[derive(Debug)]
pub struct ParsedLog {
    pub config: RunConfig,
    pub episodes: Vec<EpisodeRecord>,
    pub evals: Vec<EvalPoint>,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("failed to read log: {0}")]
    Io(#[from] std::io::Error),
    #[error("log line {line} does not parse: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("log has no header line")]
    MissingHeader,
}

pub fn read_episode_log(path: impl AsRef<Path>) -> Result<ParsedLog, LogError> {
    let text = fs::read_to_string(path)?;
    let mut config = None;
    let mut episodes = Vec::new();
    let mut evals = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine =
            serde_json::from_str(line).map_err(|source| LogError::Parse { line: i + 1, source })?;
        match parsed {
            LogLine::Header { config: c } => config = Some(c),
            LogLine::Episode { record } => episodes.push(record),
            LogLine::Eval { point } => evals.push(point),
        }
    }
    Ok(ParsedLog {
        config: config.ok_or(LogError::MissingHeader)?,
        episodes,
        evals,
    })
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<MetricsSummary, LogError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| LogError::Parse { line: 1, source })
}

/// Default output root: the `RESETLESS_OUT` environment variable, else
/// `./runs`.
pub fn default_out_root() -> PathBuf {
    std::env::var_os("RESETLESS_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}
