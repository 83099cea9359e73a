use serde::{Deserialize, Serialize};

use super::{format_err, shift, IngestError};
use crate::interaction::UtteranceCoder;
use crate::model::{CodedUtterance, CommCode, EntityRole, TimeWindow};

/// One line of `utterances.jsonl`. `code` may be absent, in which case the
/// configured coder assigns one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub entity: EntityRole,
    pub from_ms: i64,
    pub to_ms: i64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<CommCode>,
}

pub fn parse_utterances(
    bytes: &[u8],
    clock_offset_ms: i64,
    coder: &dyn UtteranceCoder,
) -> Result<Vec<CodedUtterance>, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| format_err(1, e.to_string()))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: UtteranceRecord =
            serde_json::from_str(line).map_err(|e| format_err(line_no, e.to_string()))?;
        if rec.text.trim().is_empty() {
            return Err(format_err(line_no, "utterance text is empty"));
        }
        if rec.from_ms >= rec.to_ms {
            return Err(format_err(
                line_no,
                format!("utterance window [{}, {}) is empty", rec.from_ms, rec.to_ms),
            ));
        }
        let (Some(from_ms), Some(to_ms)) = (
            shift(rec.from_ms, clock_offset_ms),
            shift(rec.to_ms, clock_offset_ms),
        ) else {
            continue;
        };
        let code = match rec.code {
            Some(code) => code,
            None => coder.code(&rec.text)?,
        };
        out.push(CodedUtterance {
            entity: rec.entity,
            window: TimeWindow { from_ms, to_ms },
            text: rec.text,
            code,
        });
    }
    out.sort_by_key(|u| u.window.from_ms);
    Ok(out)
}

/// Canonical `utterances.jsonl` with every code filled in.
pub fn write_utterances(utterances: &[CodedUtterance]) -> String {
    let mut out = String::new();
    for u in utterances {
        let rec = UtteranceRecord {
            entity: u.entity,
            from_ms: u.window.from_ms as i64,
            to_ms: u.window.to_ms as i64,
            text: u.text.clone(),
            code: Some(u.code),
        };
        out.push_str(&serde_json::to_string(&rec).expect("utterance serializes"));
        out.push('\n');
    }
    out
}
