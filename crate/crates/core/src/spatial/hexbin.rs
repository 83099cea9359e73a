use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{EntityRole, TimeWindow, VoiceSegment};
use crate::session::{tick_time, Session};

pub const DEFAULT_HEX_RADIUS_MM: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HexCell {
    pub entity: EntityRole,
    pub q: i64,
    pub r: i64,
    pub sample_count: u64,
    pub voice_fraction: f64,
    pub filled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WardMap {
    pub hex_radius_mm: f64,
    pub cells: Vec<HexCell>,
    pub window: TimeWindow,
}

fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

/// Pointy-top axial coordinates of the hexagon containing a point.
pub fn hex_of_point(x_mm: f64, y_mm: f64, hex_radius_mm: f64) -> (i64, i64) {
    let qf = (3f64.sqrt() / 3.0 * x_mm - y_mm / 3.0) / hex_radius_mm;
    let rf = (2.0 / 3.0 * y_mm) / hex_radius_mm;
    let sf = -qf - rf;
    let (mut q, mut r, s) = (round_half_up(qf), round_half_up(rf), round_half_up(sf));
    let (dq, dr, ds) = ((q - qf).abs(), (r - rf).abs(), (s - sf).abs());
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    (q as i64, r as i64)
}

pub fn hex_center(q: i64, r: i64, hex_radius_mm: f64) -> (f64, f64) {
    let (q, r) = (q as f64, r as f64);
    (
        hex_radius_mm * 3f64.sqrt() * (q + r / 2.0),
        hex_radius_mm * 1.5 * r,
    )
}

fn voiced_at(segments: &[VoiceSegment], cursor: &mut usize, t: u64) -> bool {
    while *cursor < segments.len() && segments[*cursor].to_ms <= t {
        *cursor += 1;
    }
    segments
        .get(*cursor)
        .is_some_and(|s| s.from_ms <= t && t < s.to_ms)
}

/// Bins every tracked tick of every tracked entity into hexagons and records
/// how often the entity was speaking there.
pub fn compute_ward_map(session: &Session, window: &TimeWindow, hex_radius_mm: f64) -> WardMap {
    let grid = session.grid();
    let ticks = grid.ticks_in(window);
    let mut cells = Vec::new();
    for entity in grid.tracked_entities() {
        let segments = session.voice_of(entity);
        let mut cursor = 0;
        let mut bins: BTreeMap<(i64, i64), (u64, u64)> = BTreeMap::new();
        for tick in ticks.clone() {
            let Some(p) = grid.point(entity, tick) else {
                continue;
            };
            let bin = bins
                .entry(hex_of_point(p.x_mm, p.y_mm, hex_radius_mm))
                .or_default();
            bin.0 += 1;
            if voiced_at(segments, &mut cursor, tick_time(tick)) {
                bin.1 += 1;
            }
        }
        cells.extend(bins.into_iter().map(|((q, r), (samples, voiced))| {
            let voice_fraction = voiced as f64 / samples as f64;
            HexCell {
                entity,
                q,
                r,
                sample_count: samples,
                voice_fraction,
                filled: voice_fraction > 0.5,
            }
        }));
    }
    WardMap {
        hex_radius_mm,
        cells,
        window: *window,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PositionSample, SessionTimeline, WardLayout};

    /// Nearest center among the 3x3 axial neighbourhood of a coarse guess.
    fn nearest_centers(x: f64, y: f64, radius: f64) -> Vec<((i64, i64), f64)> {
        let r0 = (y / (1.5 * radius)).round() as i64;
        let q0 = (x / (radius * 3f64.sqrt()) - r0 as f64 / 2.0).round() as i64;
        let mut out = Vec::new();
        for dq in -2..=2 {
            for dr in -2..=2 {
                let (q, r) = (q0 + dq, r0 + dr);
                let (cx, cy) = hex_center(q, r, radius);
                out.push(((q, r), ((x - cx).powi(2) + (y - cy).powi(2)).sqrt()));
            }
        }
        out
    }

    #[test]
    fn axial_examples() {
        assert_eq!(hex_of_point(0.0, 0.0, 500.0), (0, 0));
        assert_eq!(hex_of_point(866.0, 0.0, 500.0), (1, 0));
        assert_eq!(hex_of_point(0.0, 750.0, 500.0), (0, 1));
        let near = nearest_centers(0.0, 750.0, 500.0);
        let best = near.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let d01 = near.iter().find(|c| c.0 == (0, 1)).unwrap().1;
        assert!((d01 - best).abs() < 1e-9);
    }

    fn session_at_point(ticks: u64, voiced_ticks: u64) -> Session {
        let positions = (0..ticks)
            .map(|k| PositionSample {
                t_ms: k * 100,
                entity: EntityRole::Pn1,
                x_mm: 3000.0,
                y_mm: 3000.0,
                yaw_deg: 0.0,
            })
            .collect();
        let voice = if voiced_ticks > 0 {
            vec![VoiceSegment {
                entity: EntityRole::Pn1,
                from_ms: 0,
                to_ms: voiced_ticks * 100,
            }]
        } else {
            vec![]
        };
        Session::new("s", WardLayout::standard(), SessionTimeline::new(ticks * 100))
            .with_positions(positions)
            .with_voice(BTreeMap::from([(EntityRole::Pn1, voice)]))
    }

    #[test]
    fn strictly_more_than_half_fills() {
        let s = session_at_point(10, 6);
        let map = compute_ward_map(&s, &s.timeline().whole(), 500.0);
        assert_eq!(map.cells.len(), 1);
        assert_eq!(map.cells[0].voice_fraction, 0.6);
        assert!(map.cells[0].filled);
        let s = session_at_point(10, 5);
        let map = compute_ward_map(&s, &s.timeline().whole(), 500.0);
        assert_eq!(map.cells[0].voice_fraction, 0.5);
        assert!(!map.cells[0].filled);
    }

    #[test]
    fn untracked_entities_have_no_cells() {
        let s = session_at_point(10, 0);
        let map = compute_ward_map(&s, &TimeWindow::new(2000, 3000).unwrap(), 500.0);
        assert!(map.cells.is_empty());
        assert!(!map
            .cells
            .iter()
            .any(|c| c.entity == EntityRole::Patient));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn agrees_with_nearest_center(x in -20_000.0f64..20_000.0, y in -20_000.0f64..20_000.0, radius in 100.0f64..2000.0) {
                let got = hex_of_point(x, y, radius);
                let near = nearest_centers(x, y, radius);
                let best = near.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
                let mine = near.iter().find(|c| c.0 == got).map(|c| c.1);
                prop_assert!(mine.is_some_and(|d| d <= best + 1e-6));
            }
        }
    }
}
