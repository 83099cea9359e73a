use std::collections::HashMap;
use std::fmt::Write as _;

use super::{format_err, shift, IngestError};
use crate::model::{normalize_yaw, EntityRole, PositionSample, WardLayout};

pub const POSITIONS_HEADER: &str = "t_ms,entity,x_mm,y_mm,yaw_deg";

/// Backwards steps up to this size are tolerated and re-sorted.
pub const JITTER_ALLOWANCE_MS: i64 = 50;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedPositions {
    pub samples: Vec<PositionSample>,
    /// Rows with at least one coordinate clamped into the room.
    pub clamped: usize,
    /// Rows that fell before the session start after the clock shift.
    pub dropped: usize,
}

/// Parses `positions.csv`, shifting timestamps by `clock_offset_ms` and
/// clamping coordinates into the room.
pub fn parse_positions(
    bytes: &[u8],
    clock_offset_ms: i64,
    layout: &WardLayout,
) -> Result<ParsedPositions, IngestError> {
    let text = std::str::from_utf8(bytes).map_err(|e| format_err(1, e.to_string()))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == POSITIONS_HEADER => {}
        Some((_, header)) => {
            return Err(format_err(1, format!("expected header `{POSITIONS_HEADER}`, got `{header}`")))
        }
        None => return Err(format_err(1, "missing header")),
    }

    let mut out = ParsedPositions::default();
    let mut latest: HashMap<EntityRole, i64> = HashMap::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let row = raw.trim_end();
        if row.is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        let [t, entity, x, y, yaw] = fields[..] else {
            return Err(format_err(line_no, format!("expected 5 fields, got {}", fields.len())));
        };
        let t: i64 = t
            .parse()
            .map_err(|_| format_err(line_no, format!("bad t_ms `{t}`")))?;
        let entity: EntityRole = entity
            .parse()
            .map_err(|e: crate::model::ModelError| format_err(line_no, e.to_string()))?;
        let x: i64 = x
            .parse()
            .map_err(|_| format_err(line_no, format!("bad x_mm `{x}`")))?;
        let y: i64 = y
            .parse()
            .map_err(|_| format_err(line_no, format!("bad y_mm `{y}`")))?;
        let yaw: f64 = yaw
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| format_err(line_no, format!("bad yaw_deg `{yaw}`")))?;

        let prev = latest.entry(entity).or_insert(t);
        if t < *prev - JITTER_ALLOWANCE_MS {
            return Err(IngestError::NonMonotonic {
                line: line_no,
                entity,
                t_ms: t,
                prev_ms: *prev,
            });
        }
        *prev = (*prev).max(t);

        let Some(t_ms) = shift(t, clock_offset_ms) else {
            out.dropped += 1;
            continue;
        };
        let (cx, cy) = layout.clamp(x as f64, y as f64);
        if cx != x as f64 || cy != y as f64 {
            out.clamped += 1;
        }
        out.samples.push(PositionSample {
            t_ms,
            entity,
            x_mm: cx,
            y_mm: cy,
            yaw_deg: normalize_yaw(yaw),
        });
    }
    out.samples.sort_by_key(|s| s.t_ms);
    Ok(out)
}

/// Canonical `positions.csv` text for already-sorted samples.
pub fn write_positions(samples: &[PositionSample]) -> String {
    let mut out = String::with_capacity(32 * (samples.len() + 1));
    out.push_str(POSITIONS_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.t_ms,
            s.entity,
            s.x_mm.round() as i64,
            s.y_mm.round() as i64,
            s.yaw_deg
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> WardLayout {
        WardLayout::standard()
    }

    #[test]
    fn well_formed_rows() {
        let csv = "t_ms,entity,x_mm,y_mm,yaw_deg\n0,PN1,100,200,0\n100,PN1,110,200,12.5\n200,PN2,300,300,359.9\n";
        let parsed = parse_positions(csv.as_bytes(), 0, &layout()).unwrap();
        assert_eq!(parsed.samples.len(), 3);
        assert_eq!(parsed.samples[1].yaw_deg, 12.5);
        assert_eq!(parsed.clamped, 0);
        assert_eq!(write_positions(&parsed.samples), csv);
    }

    #[test]
    fn out_of_bounds_is_clamped() {
        let csv = "t_ms,entity,x_mm,y_mm,yaw_deg\n0,PN1,-20,200,0\n";
        let parsed = parse_positions(csv.as_bytes(), 0, &layout()).unwrap();
        assert_eq!(parsed.samples[0].x_mm, 0.0);
        assert_eq!(parsed.clamped, 1);
    }

    #[test]
    fn decreasing_timestamps_are_rejected() {
        let csv = "t_ms,entity,x_mm,y_mm,yaw_deg\n1000,PN1,0,0,0\n900,PN1,0,0,0\n";
        let err = parse_positions(csv.as_bytes(), 0, &layout()).unwrap_err();
        assert!(matches!(err, IngestError::NonMonotonic { line: 3, .. }), "{err}");
    }

    #[test]
    fn small_jitter_is_resorted() {
        let csv = "t_ms,entity,x_mm,y_mm,yaw_deg\n1000,PN1,0,0,0\n970,PN1,5,0,0\n900,PN2,0,0,0\n";
        let parsed = parse_positions(csv.as_bytes(), 0, &layout()).unwrap();
        let times: Vec<_> = parsed.samples.iter().map(|s| s.t_ms).collect();
        assert_eq!(times, vec![900, 970, 1000]);
    }

    #[test]
    fn clock_offset_and_yaw_normalization() {
        let csv = "t_ms,entity,x_mm,y_mm,yaw_deg\n5000,PN1,0,0,-90\n5100,PN1,0,0,450\n";
        let parsed = parse_positions(csv.as_bytes(), -5050, &layout()).unwrap();
        assert_eq!(parsed.dropped, 1);
        assert_eq!(parsed.samples[0].t_ms, 50);
        assert_eq!(parsed.samples[0].yaw_deg, 90.0);
    }

    #[test]
    fn format_errors() {
        let l = layout();
        assert!(parse_positions(b"t,entity\n", 0, &l).is_err());
        assert!(parse_positions(b"", 0, &l).is_err());
        let bad_role = "t_ms,entity,x_mm,y_mm,yaw_deg\n0,NURSE,0,0,0\n";
        assert!(matches!(
            parse_positions(bad_role.as_bytes(), 0, &l),
            Err(IngestError::Format { line: 2, .. })
        ));
        let decimal_x = "t_ms,entity,x_mm,y_mm,yaw_deg\n0,PN1,1.5,0,0\n";
        assert!(parse_positions(decimal_x.as_bytes(), 0, &l).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn canonical_rows() -> impl Strategy<Value = Vec<PositionSample>> {
            proptest::collection::vec(
                (
                    0u64..1_000_000,
                    proptest::sample::select(EntityRole::TEAM.to_vec()),
                    0i64..=10_000,
                    0i64..=8_000,
                    0u32..36_000,
                ),
                0..60,
            )
            .prop_map(|mut rows| {
                rows.sort_by_key(|r| r.0);
                rows.into_iter()
                    .map(|(t, e, x, y, yaw)| PositionSample {
                        t_ms: t,
                        entity: e,
                        x_mm: x as f64,
                        y_mm: y as f64,
                        yaw_deg: yaw as f64 / 100.0,
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn canonical_text_round_trips(rows in canonical_rows()) {
                let text = write_positions(&rows);
                let parsed = parse_positions(text.as_bytes(), 0, &WardLayout::standard()).unwrap();
                prop_assert_eq!(write_positions(&parsed.samples), text);
                prop_assert_eq!(parsed.samples, rows);
            }
        }
    }
}
