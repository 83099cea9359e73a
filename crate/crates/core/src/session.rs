//! Immutable session snapshot consumed by the analytics, plus the fixed-rate
//! tick grid the analytics evaluate on.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::sync::OnceLock;

use crate::model::{
    CodedUtterance, EntityRole, Millis, PositionSample, SessionTimeline, TimeWindow, VoiceSegment,
    WardLayout,
};

/// Analytics resample positions onto a 10 Hz grid.
pub const TICK_MS: Millis = 100;
/// A carried-forward observation older than this leaves the tick untracked.
pub const STALE_MS: Millis = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub x_mm: f64,
    pub y_mm: f64,
    pub yaw_deg: f64,
}

/// An entity's location at one tick. Fixed entities carry no heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placed {
    pub entity: EntityRole,
    pub x_mm: f64,
    pub y_mm: f64,
    pub yaw_deg: Option<f64>,
}

/// Last-observation-carried-forward resampling of every tracked entity.
#[derive(Debug, Clone)]
pub struct TickGrid {
    n_ticks: usize,
    tracks: BTreeMap<EntityRole, Vec<Option<TrackPoint>>>,
    fixed: Vec<Placed>,
}

impl TickGrid {
    fn build(session: &Session) -> Self {
        let n_ticks = session.timeline.end_ms.div_ceil(TICK_MS) as usize;
        let mut by_entity: BTreeMap<EntityRole, Vec<&PositionSample>> = BTreeMap::new();
        for s in &session.positions {
            by_entity.entry(s.entity).or_default().push(s);
        }
        let mut tracks = BTreeMap::new();
        for (entity, samples) in by_entity {
            let mut track = Vec::with_capacity(n_ticks);
            let mut idx = 0;
            for k in 0..n_ticks {
                let t = k as Millis * TICK_MS;
                while idx < samples.len() && samples[idx].t_ms <= t {
                    idx += 1;
                }
                let point = idx
                    .checked_sub(1)
                    .map(|i| samples[i])
                    .filter(|s| t - s.t_ms <= STALE_MS)
                    .map(|s| TrackPoint {
                        x_mm: s.x_mm,
                        y_mm: s.y_mm,
                        yaw_deg: s.yaw_deg,
                    });
                track.push(point);
            }
            tracks.insert(entity, track);
        }
        let fixed = session
            .layout
            .fixed_entities
            .iter()
            .filter(|(role, _)| !tracks.contains_key(*role))
            .map(|(role, [x, y])| Placed {
                entity: *role,
                x_mm: *x,
                y_mm: *y,
                yaw_deg: None,
            })
            .collect();
        TickGrid {
            n_ticks,
            tracks,
            fixed,
        }
    }

    pub fn n_ticks(&self) -> usize {
        self.n_ticks
    }

    pub fn tracked_entities(&self) -> impl Iterator<Item = EntityRole> + '_ {
        self.tracks.keys().copied()
    }

    pub fn point(&self, entity: EntityRole, tick: usize) -> Option<TrackPoint> {
        self.tracks.get(&entity).and_then(|t| t.get(tick).copied().flatten())
    }

    /// Every entity with a location at `tick`, tracked ones first.
    pub fn placed_at(&self, tick: usize) -> Vec<Placed> {
        let mut out: Vec<Placed> = self
            .tracks
            .iter()
            .filter_map(|(entity, track)| {
                track[tick].map(|p| Placed {
                    entity: *entity,
                    x_mm: p.x_mm,
                    y_mm: p.y_mm,
                    yaw_deg: Some(p.yaw_deg),
                })
            })
            .collect();
        out.extend(self.fixed.iter().copied());
        out
    }

    /// Tick indices whose instants fall inside `window`.
    pub fn ticks_in(&self, window: &TimeWindow) -> Range<usize> {
        let first = window.from_ms.div_ceil(TICK_MS) as usize;
        let last = (window.to_ms.div_ceil(TICK_MS) as usize).min(self.n_ticks);
        first.min(last)..last
    }

    /// Tick indices whose `[t, t + TICK_MS)` span overlaps `window`.
    pub fn spans_overlapping(&self, window: &TimeWindow) -> Range<usize> {
        if window.is_empty() {
            return 0..0;
        }
        let first = (window.from_ms / TICK_MS) as usize;
        let last = (window.to_ms.div_ceil(TICK_MS) as usize).min(self.n_ticks);
        first.min(last)..last
    }
}

pub fn tick_time(tick: usize) -> Millis {
    tick as Millis * TICK_MS
}

/// A session's streams, either sealed or captured live.
#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    sealed: bool,
    layout: WardLayout,
    timeline: SessionTimeline,
    cast: Vec<EntityRole>,
    positions: Vec<PositionSample>,
    voice: BTreeMap<EntityRole, Vec<VoiceSegment>>,
    utterances: Vec<CodedUtterance>,
    grid: OnceLock<TickGrid>,
}

impl Session {
    pub fn new(id: impl Into<String>, layout: WardLayout, timeline: SessionTimeline) -> Self {
        Session {
            id: id.into(),
            sealed: true,
            layout,
            timeline,
            cast: Vec::new(),
            positions: Vec::new(),
            voice: BTreeMap::new(),
            utterances: Vec::new(),
            grid: OnceLock::new(),
        }
        .refresh_cast(&[])
    }

    /// Positions must be sorted by time.
    pub fn with_positions(mut self, positions: Vec<PositionSample>) -> Self {
        debug_assert!(positions.windows(2).all(|w| w[0].t_ms <= w[1].t_ms));
        self.positions = positions;
        self.grid = OnceLock::new();
        let cast = std::mem::take(&mut self.cast);
        self.refresh_cast(&cast)
    }

    /// Segments must already be normalized per entity.
    pub fn with_voice(mut self, voice: BTreeMap<EntityRole, Vec<VoiceSegment>>) -> Self {
        self.voice = voice;
        let cast = std::mem::take(&mut self.cast);
        self.refresh_cast(&cast)
    }

    pub fn with_utterances(mut self, mut utterances: Vec<CodedUtterance>) -> Self {
        utterances.sort_by_key(|u| u.window.from_ms);
        self.utterances = utterances;
        let cast = std::mem::take(&mut self.cast);
        self.refresh_cast(&cast)
    }

    /// Declares participants that may not appear in any stream.
    pub fn with_cast(mut self, declared: &[EntityRole]) -> Self {
        let mut cast = std::mem::take(&mut self.cast);
        cast.extend_from_slice(declared);
        self.refresh_cast(&cast)
    }

    pub fn live(mut self) -> Self {
        self.sealed = false;
        self
    }

    fn refresh_cast(mut self, declared: &[EntityRole]) -> Self {
        let mut cast: BTreeSet<EntityRole> = declared.iter().copied().collect();
        cast.extend(self.positions.iter().map(|p| p.entity));
        cast.extend(self.voice.keys().copied());
        cast.extend(self.utterances.iter().map(|u| u.entity));
        cast.extend(self.layout.fixed_entities.keys().copied());
        self.cast = cast.into_iter().collect();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn layout(&self) -> &WardLayout {
        &self.layout
    }

    pub fn timeline(&self) -> &SessionTimeline {
        &self.timeline
    }

    pub fn cast(&self) -> &[EntityRole] {
        &self.cast
    }

    pub fn team_members(&self) -> Vec<EntityRole> {
        self.cast
            .iter()
            .copied()
            .filter(|r| r.is_team_member())
            .collect()
    }

    pub fn positions(&self) -> &[PositionSample] {
        &self.positions
    }

    pub fn voice(&self) -> &BTreeMap<EntityRole, Vec<VoiceSegment>> {
        &self.voice
    }

    pub fn voice_of(&self, entity: EntityRole) -> &[VoiceSegment] {
        self.voice.get(&entity).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn utterances(&self) -> &[CodedUtterance] {
        &self.utterances
    }

    pub fn grid(&self) -> &TickGrid {
        self.grid.get_or_init(|| TickGrid::build(self))
    }

    /// Copy with all voice segments of `entity` removed.
    pub fn without_voice_of(&self, entity: EntityRole) -> Session {
        let mut voice = self.voice.clone();
        voice.remove(&entity);
        let mut copy = self.clone();
        copy.voice = voice;
        copy
    }
}
