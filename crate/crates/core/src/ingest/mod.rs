//! Stream parsing, validation and the on-disk session store.

mod audio;
mod positions;
mod store;
mod utterances;
mod voice;

pub use audio::{parse_wav, run_vad, AudioFrameStream, VadParams, SUPPORTED_SAMPLE_RATES};
pub use positions::{parse_positions, write_positions, ParsedPositions, JITTER_ALLOWANCE_MS};
pub use store::{
    valid_session_id, Manifest, ManifestTimeline, SessionStatus, SessionStore, SessionSummary,
    StreamCounters, StreamInventory, ANNOTATIONS_FILE, INTERACTIONS_FILE, LAYOUT_FILE,
    MANIFEST_FILE, POSITIONS_FILE, SCENARIO_FILE, UTTERANCES_FILE, VOICE_FILE,
};
pub use utterances::{parse_utterances, write_utterances, UtteranceRecord};
pub(crate) use voice::voiced_ms_in;
pub use voice::{normalize_all, normalize_voice_segments, parse_voice, write_voice};

use crate::model::{EntityRole, Millis, ModelError};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line}: {entity} timestamp {t_ms} goes back from {prev_ms}")]
    NonMonotonic {
        line: usize,
        entity: EntityRole,
        t_ms: i64,
        prev_ms: i64,
    },
    #[error("audio stream is empty")]
    EmptyAudio,
    #[error("unsupported audio: {0}")]
    UnsupportedAudio(String),
    #[error("invalid voice segment [{from_ms}, {to_ms}) for {entity}")]
    InvalidSegment {
        entity: EntityRole,
        from_ms: Millis,
        to_ms: Millis,
    },
    #[error("session `{0}` is already sealed")]
    AlreadySealed(String),
    #[error("session `{0}` is still recording")]
    NotSealed(String),
    #[error("session `{0}` already exists")]
    AlreadyExists(String),
    #[error("invalid session id `{0}`")]
    InvalidSessionId(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Annotation(#[from] crate::annotation::AnnotationError),
    #[error(transparent)]
    Coder(#[from] crate::interaction::CoderError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

fn format_err(line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Format {
        line,
        message: message.into(),
    }
}

/// Applies a stream clock offset; `None` if the shifted time precedes the
/// session start.
fn shift(t: i64, offset_ms: i64) -> Option<Millis> {
    let shifted = t.checked_add(offset_ms)?;
    u64::try_from(shifted).ok()
}
