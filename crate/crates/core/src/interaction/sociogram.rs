use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fformation::{detect_f_formations, FormationParams};
use crate::model::{EntityRole, Millis, TimeWindow, VoiceSegment};
use crate::session::{tick_time, Session, TICK_MS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SociogramEdge {
    pub from: EntityRole,
    pub to: EntityRole,
    pub ms: Millis,
}

/// Speaking time per entity and directed speaker-to-listener time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SociogramGraph {
    pub window: TimeWindow,
    pub nodes: BTreeMap<EntityRole, Millis>,
    pub edges: Vec<SociogramEdge>,
    pub params: FormationParams,
    pub empty: bool,
}

impl SociogramGraph {
    pub fn edge(&self, from: EntityRole, to: EntityRole) -> Millis {
        self.edges
            .iter()
            .find(|e| e.from == from && e.to == to)
            .map_or(0, |e| e.ms)
    }
}

/// Walks a sorted, disjoint segment list over increasing spans.
struct VoiceCursor<'a> {
    segments: &'a [VoiceSegment],
    idx: usize,
}

impl VoiceCursor<'_> {
    fn voiced_in(&mut self, lo: Millis, hi: Millis) -> Millis {
        while self.idx < self.segments.len() && self.segments[self.idx].to_ms <= lo {
            self.idx += 1;
        }
        self.segments[self.idx..]
            .iter()
            .take_while(|s| s.from_ms < hi)
            .map(|s| s.to_ms.min(hi).saturating_sub(s.from_ms.max(lo)))
            .sum()
    }
}

/// Each voiced millisecond of a speaker accrues to every entity it is in
/// formation with at the enclosing tick.
pub fn compute_sociogram(
    session: &Session,
    window: &TimeWindow,
    params: &FormationParams,
) -> SociogramGraph {
    let to_ms = window.to_ms.min(session.timeline().end_ms);
    let window = TimeWindow {
        from_ms: window.from_ms.min(to_ms),
        to_ms,
    };
    if window.is_empty() {
        return SociogramGraph {
            window,
            nodes: BTreeMap::new(),
            edges: Vec::new(),
            params: *params,
            empty: true,
        };
    }

    let nodes: BTreeMap<EntityRole, Millis> = session
        .cast()
        .iter()
        .map(|e| {
            let ms = crate::ingest::voiced_ms_in(session.voice_of(*e), window.from_ms, window.to_ms);
            (*e, ms)
        })
        .collect();

    let grid = session.grid();
    let mut cursors: Vec<(EntityRole, VoiceCursor)> = session
        .voice()
        .iter()
        .map(|(e, segs)| (*e, VoiceCursor { segments: segs, idx: 0 }))
        .collect();
    let mut edges: BTreeMap<(EntityRole, EntityRole), Millis> = BTreeMap::new();
    let mut voiced: BTreeMap<EntityRole, Millis> = BTreeMap::new();
    for tick in grid.spans_overlapping(&window) {
        let t = tick_time(tick);
        let (lo, hi) = (t.max(window.from_ms), (t + TICK_MS).min(window.to_ms));
        voiced.clear();
        for (entity, cursor) in cursors.iter_mut() {
            let ms = cursor.voiced_in(lo, hi);
            if ms > 0 {
                voiced.insert(*entity, ms);
            }
        }
        if voiced.is_empty() {
            continue;
        }
        for f in detect_f_formations(&grid.placed_at(tick), params) {
            if let Some(ms) = voiced.get(&f.a) {
                *edges.entry((f.a, f.b)).or_default() += ms;
            }
            if let Some(ms) = voiced.get(&f.b) {
                *edges.entry((f.b, f.a)).or_default() += ms;
            }
        }
    }

    let mut nodes = nodes;
    for (from, to) in edges.keys() {
        nodes.entry(*from).or_default();
        nodes.entry(*to).or_default();
    }
    SociogramGraph {
        window,
        nodes,
        edges: edges
            .into_iter()
            .map(|((from, to), ms)| SociogramEdge { from, to, ms })
            .collect(),
        params: *params,
        empty: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PositionSample, SessionTimeline, WardLayout};

    fn layout() -> WardLayout {
        let mut l = WardLayout::standard();
        l.fixed_entities.clear();
        l
    }

    fn still(entity: EntityRole, x: f64, y: f64, yaw: f64, until_ms: u64) -> Vec<PositionSample> {
        (0..until_ms / 100)
            .map(|k| PositionSample {
                t_ms: k * 100,
                entity,
                x_mm: x,
                y_mm: y,
                yaw_deg: yaw,
            })
            .collect()
    }

    fn voice(entity: EntityRole, from_ms: u64, to_ms: u64) -> (EntityRole, Vec<VoiceSegment>) {
        (
            entity,
            vec![VoiceSegment {
                entity,
                from_ms,
                to_ms,
            }],
        )
    }

    const A: EntityRole = EntityRole::Pn1;
    const B: EntityRole = EntityRole::Pn2;
    const C: EntityRole = EntityRole::Sn1;

    #[test]
    fn edge_accrues_only_during_formation() {
        // B faces A from 10 s on; before that B stands far away.
        let mut positions = still(A, 1000.0, 1000.0, 0.0, 30_000);
        positions.extend((0..300).map(|k| PositionSample {
            t_ms: k * 100,
            entity: B,
            x_mm: if k < 100 { 9000.0 } else { 2000.0 },
            y_mm: 1000.0,
            yaw_deg: 180.0,
        }));
        positions.sort_by_key(|p| p.t_ms);
        let session = Session::new("s", layout(), SessionTimeline::new(30_000))
            .with_positions(positions)
            .with_voice(BTreeMap::from([voice(A, 0, 30_000)]));
        let g = compute_sociogram(&session, &session.timeline().whole(), &FormationParams::default());
        assert_eq!(g.nodes[&A], 30_000);
        assert_eq!(g.edge(A, B), 20_000);
        assert_eq!(g.edge(B, A), 0);

        // Millisecond brute force over the same inputs.
        let grid = session.grid();
        let mut brute = 0;
        for ms in 0..30_000u64 {
            let tick = (ms / 100) as usize;
            let voiced = (0..30_000).contains(&ms);
            let (pa, pb) = (grid.point(A, tick).unwrap(), grid.point(B, tick).unwrap());
            let close = (pa.x_mm - pb.x_mm).abs() <= 1500.0;
            if voiced && close {
                brute += 1;
            }
        }
        assert_eq!(brute, 20_000);
    }

    #[test]
    fn no_voice_no_edges() {
        let mut positions = still(A, 1000.0, 1000.0, 0.0, 5_000);
        positions.extend(still(B, 2000.0, 1000.0, 180.0, 5_000));
        positions.sort_by_key(|p| p.t_ms);
        let session =
            Session::new("s", layout(), SessionTimeline::new(5_000)).with_positions(positions);
        let g = compute_sociogram(&session, &session.timeline().whole(), &FormationParams::default());
        assert!(g.edges.is_empty());
        assert!(g.nodes.values().all(|ms| *ms == 0));
        assert_eq!(g.nodes.len(), 2);
    }

    #[test]
    fn fan_out_to_every_partner() {
        // A at the origin facing +x; B and C stand in front of A facing back.
        let mut positions = still(A, 1000.0, 1000.0, 0.0, 10_000);
        positions.extend(still(B, 2000.0, 1200.0, 190.0, 10_000));
        positions.extend(still(C, 2000.0, 800.0, 170.0, 10_000));
        positions.sort_by_key(|p| p.t_ms);
        let session = Session::new("s", layout(), SessionTimeline::new(10_000))
            .with_positions(positions)
            .with_voice(BTreeMap::from([voice(A, 0, 10_000)]));
        let g = compute_sociogram(&session, &session.timeline().whole(), &FormationParams::default());
        assert_eq!(g.edge(A, B), 10_000);
        assert_eq!(g.edge(A, C), 10_000);
        for e in &g.edges {
            assert!(e.ms <= g.nodes[&e.from]);
        }
    }

    #[test]
    fn empty_window() {
        let session = Session::new("s", layout(), SessionTimeline::new(1_000));
        let g = compute_sociogram(&session, &TimeWindow::new(500, 500).unwrap(), &Default::default());
        assert!(g.empty && g.nodes.is_empty() && g.edges.is_empty());
    }
}
