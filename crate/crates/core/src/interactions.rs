//! Append-only log of educator interactions during a debrief.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::Phase;

#[derive(Debug, thiserror::Error)]
pub enum InteractionError {
    #[error("debrief session is closed")]
    SessionClosed,
    #[error("interaction log line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    SelectPhase,
    SelectWindow,
    SelectViz,
    Share,
    Unshare,
    PlaySnippet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    /// Wall clock, Unix milliseconds.
    pub t_wall: u64,
    pub actor: String,
    pub event: InteractionKind,
    #[serde(default)]
    pub payload: serde_json::Value,
}

impl InteractionEvent {
    /// The phase picked by a `select_phase` event.
    pub fn selected_phase(&self) -> Option<Phase> {
        if self.event != InteractionKind::SelectPhase {
            return None;
        }
        serde_json::from_value(self.payload.get("phase")?.clone()).ok()
    }
}

/// Writer for one debrief's `interactions.jsonl`.
#[derive(Debug)]
pub struct InteractionLog {
    path: PathBuf,
    file: Option<File>,
    count: usize,
}

impl InteractionLog {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, InteractionError> {
        let path = path.into();
        let io = |source| InteractionError::Io {
            path: path.clone(),
            source,
        };
        let count = if path.exists() {
            read_interactions(&path)?.len()
        } else {
            0
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io)?;
        Ok(InteractionLog {
            path,
            file: Some(file),
            count,
        })
    }

    pub fn append(&mut self, event: &InteractionEvent) -> Result<usize, InteractionError> {
        let file = self.file.as_mut().ok_or(InteractionError::SessionClosed)?;
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|source| InteractionError::Io {
                path: self.path.clone(),
                source,
            })?;
        self.count += 1;
        Ok(self.count)
    }

    pub fn close(&mut self) {
        self.file = None;
    }

    pub fn is_closed(&self) -> bool {
        self.file.is_none()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

pub fn parse_interactions(text: &str) -> Result<Vec<InteractionEvent>, InteractionError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| InteractionError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_interactions(path: &Path) -> Result<Vec<InteractionEvent>, InteractionError> {
    let file = File::open(path).map_err(|source| InteractionError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| InteractionError::Io {
            path: path.to_owned(),
            source,
        })?;
        text.push_str(&line);
        text.push('\n');
    }
    parse_interactions(&text)
}

/// Phase filters in the order they were selected.
pub fn phase_selections(events: &[InteractionEvent]) -> Vec<Phase> {
    events.iter().filter_map(InteractionEvent::selected_phase).collect()
}
