use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{format_err, shift, IngestError};
use crate::model::{EntityRole, Millis, VoiceSegment};

#[derive(Serialize, Deserialize)]
struct VoiceRecord {
    entity: EntityRole,
    from_ms: i64,
    to_ms: i64,
}

/// Parses `voice.jsonl` into normalized per-entity segments.
pub fn parse_voice(
    bytes: &[u8],
    clock_offset_ms: i64,
) -> Result<BTreeMap<EntityRole, Vec<VoiceSegment>>, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| format_err(1, e.to_string()))?;
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: VoiceRecord =
            serde_json::from_str(line).map_err(|e| format_err(idx + 1, e.to_string()))?;
        if rec.from_ms >= rec.to_ms {
            return Err(format_err(
                idx + 1,
                format!("segment [{}, {}) is empty", rec.from_ms, rec.to_ms),
            ));
        }
        // Segments straddling the session start keep their in-session part.
        let Some(to_ms) = shift(rec.to_ms, clock_offset_ms).filter(|t| *t > 0) else {
            continue;
        };
        let from_ms = shift(rec.from_ms, clock_offset_ms).unwrap_or(0);
        raw.push(VoiceSegment {
            entity: rec.entity,
            from_ms,
            to_ms,
        });
    }
    normalize_all(raw)
}

/// Groups segments by entity and normalizes each group.
pub fn normalize_all(
    segments: Vec<VoiceSegment>,
) -> Result<BTreeMap<EntityRole, Vec<VoiceSegment>>, IngestError> {
    let mut grouped: BTreeMap<EntityRole, Vec<VoiceSegment>> = BTreeMap::new();
    for seg in segments {
        grouped.entry(seg.entity).or_default().push(seg);
    }
    grouped
        .into_iter()
        .map(|(e, segs)| Ok((e, normalize_voice_segments(&segs)?)))
        .collect()
}

/// Sorts and unions overlapping or touching segments of a single entity.
pub fn normalize_voice_segments(raw: &[VoiceSegment]) -> Result<Vec<VoiceSegment>, IngestError> {
    if let Some(bad) = raw.iter().find(|s| s.from_ms >= s.to_ms) {
        return Err(IngestError::InvalidSegment {
            entity: bad.entity,
            from_ms: bad.from_ms,
            to_ms: bad.to_ms,
        });
    }
    let mut sorted = raw.to_vec();
    sorted.sort_by_key(|s| (s.from_ms, s.to_ms));
    let mut out: Vec<VoiceSegment> = Vec::with_capacity(sorted.len());
    for seg in sorted {
        match out.last_mut() {
            Some(last) if seg.from_ms <= last.to_ms => last.to_ms = last.to_ms.max(seg.to_ms),
            _ => out.push(seg),
        }
    }
    Ok(out)
}

/// Canonical `voice.jsonl`: entity order, then time order.
pub fn write_voice(voice: &BTreeMap<EntityRole, Vec<VoiceSegment>>) -> String {
    let mut out = String::new();
    for seg in voice.values().flatten() {
        let rec = VoiceRecord {
            entity: seg.entity,
            from_ms: seg.from_ms as i64,
            to_ms: seg.to_ms as i64,
        };
        out.push_str(&serde_json::to_string(&rec).expect("voice record serializes"));
        out.push('\n');
    }
    out
}

/// Total voiced milliseconds of normalized segments inside `[from, to)`.
pub(crate) fn voiced_ms_in(segments: &[VoiceSegment], from: Millis, to: Millis) -> Millis {
    segments
        .iter()
        .map(|s| s.to_ms.min(to).saturating_sub(s.from_ms.max(from)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(from_ms: u64, to_ms: u64) -> VoiceSegment {
        VoiceSegment {
            entity: EntityRole::Pn1,
            from_ms,
            to_ms,
        }
    }

    #[test]
    fn overlapping_segments_union() {
        assert_eq!(
            normalize_voice_segments(&[seg(0, 100), seg(50, 150)]).unwrap(),
            vec![seg(0, 150)]
        );
        assert_eq!(normalize_voice_segments(&[]).unwrap(), vec![]);
    }

    #[test]
    fn adjacent_segments_join() {
        let out = normalize_voice_segments(&[seg(100, 200), seg(0, 100)]).unwrap();
        assert_eq!(out, vec![seg(0, 200)]);
        // Brute force over the ms set.
        let covered: Vec<u64> = (0..300).filter(|t| *t < 200).collect();
        let from_out: Vec<u64> = (0..300)
            .filter(|t| out.iter().any(|s| s.from_ms <= *t && *t < s.to_ms))
            .collect();
        assert_eq!(covered, from_out);
    }

    #[test]
    fn invalid_segment() {
        assert!(matches!(
            normalize_voice_segments(&[seg(10, 10)]),
            Err(IngestError::InvalidSegment { .. })
        ));
    }

    #[test]
    fn jsonl_format() {
        let text = "{\"entity\":\"PN1\",\"from_ms\":0,\"to_ms\":1500}\n{\"entity\":\"SN2\",\"from_ms\":10,\"to_ms\":20}\n";
        let voice = parse_voice(text.as_bytes(), 0).unwrap();
        assert_eq!(voice[&EntityRole::Pn1], vec![seg(0, 1500)]);
        assert_eq!(write_voice(&voice), text);
        let shifted = parse_voice(text.as_bytes(), -1000).unwrap();
        assert_eq!(shifted[&EntityRole::Pn1], vec![seg(0, 500)]);
        assert!(!shifted.contains_key(&EntityRole::Sn2));
        assert!(parse_voice(b"{\"entity\":\"PN1\",\"from_ms\":5,\"to_ms\":5}\n", 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalized_is_sorted_disjoint_and_covers_same_ms(
                raw in proptest::collection::vec((0u64..2_000, 1u64..300), 0..40)
            ) {
                let segs: Vec<_> = raw.iter().map(|(f, l)| seg(*f, f + l)).collect();
                let out = normalize_voice_segments(&segs).unwrap();
                for pair in out.windows(2) {
                    prop_assert!(pair[0].to_ms < pair[1].from_ms);
                }
                let covered = |list: &[VoiceSegment], t: u64| {
                    list.iter().any(|s| s.from_ms <= t && t < s.to_ms)
                };
                for t in 0..2_400 {
                    prop_assert_eq!(covered(&segs, t), covered(&out, t));
                }
                let total_out: u64 = out.iter().map(|s| s.len_ms()).sum();
                let total_in: u64 = segs.iter().map(|s| s.len_ms()).sum();
                prop_assert!(total_out <= total_in);
            }
        }
    }
}
