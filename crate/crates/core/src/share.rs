//! Shared-screen state and snippet ranges for the debrief room.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{Millis, TimeWindow};

pub const MAX_SHARED_ITEMS: usize = 3;
pub const SNIPPET_LEAD_MS: Millis = 5_000;
pub const SNIPPET_TAIL_MS: Millis = 15_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShareError {
    #[error("at most {MAX_SHARED_ITEMS} visualisations can be shared, got {0}")]
    TooManyItems(usize),
    #[error("share request has no items")]
    NoItems,
    #[error("unknown visualisation `{0}`")]
    UnknownViz(String),
    #[error("invalid window [{from_ms}, {to_ms})")]
    InvalidWindow { from_ms: Millis, to_ms: Millis },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VizId {
    Priority,
    Wardmap,
    Sociogram,
    Network,
    Snippet,
}

impl VizId {
    pub const ALL: [VizId; 5] = [
        VizId::Priority,
        VizId::Wardmap,
        VizId::Sociogram,
        VizId::Network,
        VizId::Snippet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VizId::Priority => "priority",
            VizId::Wardmap => "wardmap",
            VizId::Sociogram => "sociogram",
            VizId::Network => "network",
            VizId::Snippet => "snippet",
        }
    }
}

impl fmt::Display for VizId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VizId {
    type Err = ShareError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VizId::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| ShareError::UnknownViz(s.to_owned()))
    }
}

/// One shared visualisation as sent over the wire. `viz` stays a string so
/// that unknown names surface as `UnknownViz` rather than a parse failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareItem {
    pub viz: String,
    pub from_ms: Millis,
    pub to_ms: Millis,
}

impl ShareItem {
    pub fn new(viz: VizId, window: TimeWindow) -> Self {
        ShareItem {
            viz: viz.as_str().to_owned(),
            from_ms: window.from_ms,
            to_ms: window.to_ms,
        }
    }
}

/// What the shared screens show. Mutations replace the whole item list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareState {
    pub session_id: String,
    pub revision: u64,
    pub items: Vec<ShareItem>,
}

impl ShareState {
    pub fn new(session_id: impl Into<String>) -> Self {
        ShareState {
            session_id: session_id.into(),
            revision: 0,
            items: Vec::new(),
        }
    }

    /// Windows are checked against `end_ms` when the session end is known.
    pub fn apply_share(&mut self, items: &[ShareItem], end_ms: Option<Millis>) -> Result<(), ShareError> {
        if items.len() > MAX_SHARED_ITEMS {
            return Err(ShareError::TooManyItems(items.len()));
        }
        if items.is_empty() {
            return Err(ShareError::NoItems);
        }
        for item in items {
            item.viz.parse::<VizId>()?;
            let past_end = end_ms.is_some_and(|end| item.to_ms > end);
            if item.from_ms > item.to_ms || past_end {
                return Err(ShareError::InvalidWindow {
                    from_ms: item.from_ms,
                    to_ms: item.to_ms,
                });
            }
        }
        self.items = items.to_vec();
        self.revision += 1;
        Ok(())
    }

    pub fn unshare(&mut self) {
        self.items.clear();
        self.revision += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetRange {
    pub from_ms: Millis,
    pub to_ms: Millis,
}

/// Video range around a tagged moment: 5 s of lead-in and 15 s after,
/// each bound clamped to the session.
pub fn snippet_range(t_ms: Millis, end_ms: Millis) -> Result<SnippetRange, crate::model::ModelError> {
    if t_ms > end_ms {
        return Err(crate::model::ModelError::WindowOutOfRange {
            from_ms: t_ms,
            to_ms: t_ms,
            end_ms,
        });
    }
    Ok(SnippetRange {
        from_ms: t_ms.saturating_sub(SNIPPET_LEAD_MS),
        to_ms: (t_ms + SNIPPET_TAIL_MS).min(end_ms),
    })
}
