//! Append-only episode log: one JSON record per line, one record per
//! knowledge-gap resolution.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RuleId;
use crate::oversight::Decision;
use crate::verify::{ResponseCategory, VerificationReport};
use crate::world::{GroundedGoal, ObjId};

pub const EPISODE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EpisodeId(pub u64);

impl fmt::Display for EpisodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ep-{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    /// `goal`, `action` or `repair`.
    pub kind: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub prompt_index: usize,
    pub text: String,
    pub report: VerificationReport,
    pub category: Option<ResponseCategory>,
    pub decision: Option<Decision>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub v: u32,
    pub id: EpisodeId,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub task: String,
    pub object: ObjId,
    /// `rule`, `llm`, `human` or `suspended`.
    pub source: String,
    pub prompts: Vec<PromptRecord>,
    pub responses: Vec<ResponseRecord>,
    pub goal: Option<GroundedGoal>,
    pub tokens_sent: u64,
    pub tokens_received: u64,
    pub rule_id: Option<RuleId>,
}

#[derive(Debug, thiserror::Error)]
pub enum EpisodeError {
    #[error("episode log I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("episode log line {line}: {source}")]
    Format {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("episode {0} not found")]
    NotFound(EpisodeId),
    #[error("unsupported episode schema version {0}")]
    Version(u32),
}

/// In-memory episode list, optionally mirrored to an NDJSON file.
#[derive(Debug, Default)]
pub struct EpisodeLog {
    records: Vec<EpisodeRecord>,
    file: Option<PathBuf>,
}

impl EpisodeLog {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open (or create) a log file, loading existing records.
    pub fn open(path: &Path) -> Result<Self, EpisodeError> {
        let records = if path.exists() {
            Self::load(path)?
        } else {
            File::create(path)?;
            Vec::new()
        };
        Ok(Self {
            records,
            file: Some(path.to_path_buf()),
        })
    }

    pub fn load(path: &Path) -> Result<Vec<EpisodeRecord>, EpisodeError> {
        let reader = BufReader::new(File::open(path)?);
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EpisodeRecord = serde_json::from_str(&line)
                .map_err(|source| EpisodeError::Format { line: i + 1, source })?;
            if rec.v != EPISODE_SCHEMA_VERSION {
                return Err(EpisodeError::Version(rec.v));
            }
            out.push(rec);
        }
        Ok(out)
    }

    pub fn next_id(&self) -> EpisodeId {
        EpisodeId(self.records.last().map_or(1, |r| r.id.0 + 1))
    }

    pub fn record(&mut self, rec: EpisodeRecord) -> Result<EpisodeId, EpisodeError> {
        if let Some(path) = &self.file {
            let mut f = OpenOptions::new().append(true).create(true).open(path)?;
            let line = serde_json::to_string(&rec).map_err(|source| EpisodeError::Format {
                line: self.records.len() + 1,
                source,
            })?;
            writeln!(f, "{line}")?;
        }
        let id = rec.id;
        self.records.push(rec);
        Ok(id)
    }

    pub fn get(&self, id: EpisodeId) -> Result<&EpisodeRecord, EpisodeError> {
        self.records
            .iter()
            .find(|r| r.id == id)
            .ok_or(EpisodeError::NotFound(id))
    }

    pub fn records(&self) -> &[EpisodeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: u64) -> EpisodeRecord {
        EpisodeRecord {
            v: EPISODE_SCHEMA_VERSION,
            id: EpisodeId(id),
            timestamp: 0,
            task: "tidy kitchen".into(),
            object: "mug".into(),
            source: "rule".into(),
            prompts: vec![],
            responses: vec![],
            goal: None,
            tokens_sent: 0,
            tokens_received: 0,
            rule_id: None,
        }
    }

    #[test]
    fn file_roundtrip_and_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("episodes.ndjson");
        let mut log = EpisodeLog::open(&path).unwrap();
        assert_eq!(log.next_id(), EpisodeId(1));
        log.record(rec(1)).unwrap();
        log.record(rec(2)).unwrap();
        assert_eq!(log.next_id(), EpisodeId(3));
        let reopened = EpisodeLog::open(&path).unwrap();
        assert_eq!(reopened.records(), log.records());
        assert!(matches!(reopened.get(EpisodeId(9)), Err(EpisodeError::NotFound(_))));
    }

    #[test]
    fn bad_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("episodes.ndjson");
        std::fs::write(&path, "\n{not json}\n").unwrap();
        match EpisodeLog::load(&path) {
            Err(EpisodeError::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
