//! Brute-force re-evaluations of the analytic definitions. Nothing here calls
//! into the engine's analytics; only raw stream data is read.

use std::collections::{BTreeMap, BTreeSet};

use debriefkit_core::model::{
    CodedUtterance, CommCode, EntityRole, Millis, PositionSample, TimeWindow, VoiceSegment,
    WardLayout,
};
use debriefkit_core::Session;

const TICK: Millis = 100;
const STALE: Millis = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleThresholds {
    pub dist_face_mm: f64,
    pub dist_side_mm: f64,
    pub angle_tol_deg: f64,
    pub speed_threshold_mm_s: f64,
    pub discussion_dist_mm: f64,
    pub hex_radius_mm: f64,
    pub network_window_size: usize,
}

impl Default for OracleThresholds {
    fn default() -> Self {
        OracleThresholds {
            dist_face_mm: 1500.0,
            dist_side_mm: 750.0,
            angle_tol_deg: 45.0,
            speed_threshold_mm_s: 600.0,
            discussion_dist_mm: 1500.0,
            hex_radius_mm: 500.0,
            network_window_size: 2,
        }
    }
}

/// Raw inputs copied out of a session.
#[derive(Debug, Clone)]
pub struct OracleInput {
    pub layout: WardLayout,
    pub end_ms: Millis,
    pub positions: Vec<PositionSample>,
    pub voice: Vec<VoiceSegment>,
    pub utterances: Vec<CodedUtterance>,
    pub cast: BTreeSet<EntityRole>,
}

impl OracleInput {
    pub fn from_session(session: &Session, declared: &[EntityRole]) -> Self {
        let positions = session.positions().to_vec();
        let voice: Vec<VoiceSegment> = session.voice().values().flatten().copied().collect();
        let utterances = session.utterances().to_vec();
        let mut cast: BTreeSet<EntityRole> = declared.iter().copied().collect();
        cast.extend(positions.iter().map(|p| p.entity));
        cast.extend(voice.iter().map(|v| v.entity));
        cast.extend(utterances.iter().map(|u| u.entity));
        cast.extend(session.layout().fixed_entities.keys().copied());
        OracleInput {
            layout: session.layout().clone(),
            end_ms: session.timeline().end_ms,
            positions,
            voice,
            utterances,
            cast,
        }
    }

    fn tick_count(&self) -> usize {
        let mut n = 0;
        while (n as Millis) * TICK < self.end_ms {
            n += 1;
        }
        n
    }

    fn tracked(&self) -> BTreeSet<EntityRole> {
        self.positions.iter().map(|p| p.entity).collect()
    }

    /// Latest fresh sample at or before each tick instant.
    fn track(&self, entity: EntityRole) -> Vec<Option<(f64, f64, f64)>> {
        let mut samples: Vec<&PositionSample> =
            self.positions.iter().filter(|p| p.entity == entity).collect();
        samples.sort_by_key(|p| p.t_ms);
        let mut out = Vec::new();
        let mut latest: Option<&PositionSample> = None;
        let mut next = 0;
        for k in 0..self.tick_count() {
            let t = k as Millis * TICK;
            while next < samples.len() && samples[next].t_ms <= t {
                latest = Some(samples[next]);
                next += 1;
            }
            out.push(
                latest
                    .filter(|s| t - s.t_ms <= STALE)
                    .map(|s| (s.x_mm, s.y_mm, s.yaw_deg)),
            );
        }
        out
    }

    fn in_window(&self, window: &TimeWindow, k: usize) -> bool {
        let t = k as Millis * TICK;
        window.from_ms <= t && t < window.to_ms && t < self.end_ms
    }
}

#[derive(Debug, Clone, Copy)]
struct Spot {
    x: f64,
    y: f64,
    yaw: Option<f64>,
}

fn circular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

fn looks_at(me: Spot, other: Spot, tol: f64) -> bool {
    match me.yaw {
        None => true,
        Some(yaw) => {
            let bearing = (other.y - me.y).atan2(other.x - me.x).to_degrees();
            circular_gap(yaw, bearing) <= tol
        }
    }
}

fn paired(a: Spot, b: Spot, th: &OracleThresholds) -> bool {
    let d2 = (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
    let tol = th.angle_tol_deg;
    if d2 <= th.dist_face_mm * th.dist_face_mm && looks_at(a, b, tol) && looks_at(b, a, tol) {
        return true;
    }
    let parallel = match (a.yaw, b.yaw) {
        (Some(x), Some(y)) => circular_gap(x, y) <= tol,
        _ => true,
    };
    d2 <= th.dist_side_mm * th.dist_side_mm && parallel
}

/// Every placed entity per tick: tracked ones from their tracks, untracked
/// fixed ones from the layout without a heading.
fn spots(input: &OracleInput) -> Vec<Vec<(EntityRole, Spot)>> {
    let tracked = input.tracked();
    let tracks: Vec<(EntityRole, Vec<Option<(f64, f64, f64)>>)> =
        tracked.iter().map(|e| (*e, input.track(*e))).collect();
    (0..input.tick_count())
        .map(|k| {
            let mut at = Vec::new();
            for (e, track) in &tracks {
                if let Some((x, y, yaw)) = track[k] {
                    at.push((*e, Spot { x, y, yaw: Some(yaw) }));
                }
            }
            for (e, p) in &input.layout.fixed_entities {
                if !tracked.contains(e) {
                    at.push((*e, Spot { x: p[0], y: p[1], yaw: None }));
                }
            }
            at
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OraclePriority {
    pub tick_count: u64,
    pub member_ticks: u64,
    pub counts: BTreeMap<&'static str, u64>,
    pub fractions: BTreeMap<&'static str, f64>,
}

pub const BEHAVIOURS: [&str; 7] = [
    "TOGETHER_PRIMARY",
    "TOGETHER_SECONDARY",
    "INDIVIDUAL_PRIMARY",
    "INDIVIDUAL_SECONDARY",
    "TRANSITIONS",
    "TEAM_DISCUSSION",
    "UNCLASSIFIED",
];

pub fn oracle_priority(input: &OracleInput, window: &TimeWindow, th: &OracleThresholds) -> OraclePriority {
    let members: Vec<EntityRole> = input
        .cast
        .iter()
        .copied()
        .filter(|e| e.is_team_member())
        .collect();
    let tracks: Vec<Vec<Option<(f64, f64, f64)>>> = members.iter().map(|m| input.track(*m)).collect();
    let inside = |x: f64, y: f64, bed: &debriefkit_core::model::Bed| {
        let (dx, dy) = (x - bed.center_mm[0], y - bed.center_mm[1]);
        dx * dx + dy * dy <= bed.radius_mm * bed.radius_mm
    };
    let step = th.speed_threshold_mm_s * TICK as f64 / 1000.0;

    let mut counts: BTreeMap<&'static str, u64> = BEHAVIOURS.iter().map(|b| (*b, 0)).collect();
    let mut ticks = 0u64;
    for k in 0..input.tick_count() {
        if !input.in_window(window, k) {
            continue;
        }
        ticks += 1;
        // 0 untracked, 1 primary, 2 secondary, 3 moving, 4 open space
        let mut kind = vec![0u8; members.len()];
        for (i, track) in tracks.iter().enumerate() {
            let Some((x, y, _)) = track[k] else { continue };
            kind[i] = if input
                .layout
                .beds
                .iter()
                .any(|b| b.id == input.layout.primary_bed_id && inside(x, y, b))
            {
                1
            } else if input
                .layout
                .beds
                .iter()
                .any(|b| b.id != input.layout.primary_bed_id && inside(x, y, b))
            {
                2
            } else {
                let moved = k > 0
                    && track[k - 1].is_some_and(|(px, py, _)| {
                        (x - px) * (x - px) + (y - py) * (y - py) > step * step
                    });
                if moved {
                    3
                } else {
                    4
                }
            };
        }
        for i in 0..members.len() {
            let same = |c: u8| kind.iter().filter(|x| **x == c).count();
            let label = match kind[i] {
                1 if same(1) > 1 => "TOGETHER_PRIMARY",
                1 => "INDIVIDUAL_PRIMARY",
                2 if same(2) > 1 => "TOGETHER_SECONDARY",
                2 => "INDIVIDUAL_SECONDARY",
                3 => "TRANSITIONS",
                4 => {
                    let (x, y, yaw) = tracks[i][k].expect("open space implies tracked");
                    let me = Spot { x, y, yaw: Some(yaw) };
                    let mut found = false;
                    for j in 0..members.len() {
                        if j == i || kind[j] != 4 {
                            continue;
                        }
                        let (ox, oy, oyaw) = tracks[j][k].expect("tracked");
                        let other = Spot { x: ox, y: oy, yaw: Some(oyaw) };
                        let d2 = (x - ox) * (x - ox) + (y - oy) * (y - oy);
                        if d2 <= th.discussion_dist_mm * th.discussion_dist_mm && paired(me, other, th) {
                            found = true;
                        }
                    }
                    if found {
                        "TEAM_DISCUSSION"
                    } else {
                        "UNCLASSIFIED"
                    }
                }
                _ => "UNCLASSIFIED",
            };
            *counts.get_mut(label).expect("seeded") += 1;
        }
    }
    let member_ticks = ticks * members.len() as u64;
    let fractions = counts
        .iter()
        .map(|(b, c)| {
            (*b, if member_ticks == 0 { 0.0 } else { *c as f64 / member_ticks as f64 })
        })
        .collect();
    OraclePriority {
        tick_count: ticks,
        member_ticks,
        counts,
        fractions,
    }
}

/// Nearest pointy-top hexagon center by exhaustive search around a coarse
/// guess.
pub fn nearest_hex(x: f64, y: f64, radius: f64) -> (i64, i64) {
    let w = radius * 3f64.sqrt();
    let r0 = (y / (1.5 * radius)).round() as i64;
    let q0 = (x / w - r0 as f64 / 2.0).round() as i64;
    let mut best = (q0, r0);
    let mut best_d = f64::INFINITY;
    for r in r0 - 2..=r0 + 2 {
        for q in q0 - 2..=q0 + 2 {
            let cx = w * (q as f64 + r as f64 / 2.0);
            let cy = 1.5 * radius * r as f64;
            let d = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            if d < best_d {
                best_d = d;
                best = (q, r);
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleWardMap {
    /// (entity, q, r) -> (samples, voiced samples)
    pub cells: BTreeMap<(EntityRole, i64, i64), (u64, u64)>,
    pub tracked_ticks: BTreeMap<EntityRole, u64>,
}

pub fn oracle_wardmap(input: &OracleInput, window: &TimeWindow, th: &OracleThresholds) -> OracleWardMap {
    let mut cells = BTreeMap::new();
    let mut tracked_ticks = BTreeMap::new();
    for e in input.tracked() {
        let track = input.track(e);
        let segments: Vec<&VoiceSegment> = input.voice.iter().filter(|v| v.entity == e).collect();
        for (k, p) in track.iter().enumerate() {
            let Some((x, y, _)) = p else { continue };
            if !input.in_window(window, k) {
                continue;
            }
            *tracked_ticks.entry(e).or_insert(0) += 1;
            let (q, r) = nearest_hex(*x, *y, th.hex_radius_mm);
            let t = k as Millis * TICK;
            let voiced = segments.iter().any(|s| s.from_ms <= t && t < s.to_ms);
            let cell = cells.entry((e, q, r)).or_insert((0, 0));
            cell.0 += 1;
            cell.1 += voiced as u64;
        }
    }
    OracleWardMap { cells, tracked_ticks }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleSociogram {
    pub nodes: BTreeMap<EntityRole, u64>,
    pub edges: BTreeMap<(EntityRole, EntityRole), u64>,
}

/// Walks every millisecond of the window.
pub fn oracle_sociogram(input: &OracleInput, window: &TimeWindow, th: &OracleThresholds) -> OracleSociogram {
    let to = window.to_ms.min(input.end_ms);
    let from = window.from_ms.min(to);
    let len = (to - from) as usize;
    let mut out = OracleSociogram::default();
    if len == 0 {
        return out;
    }
    let mut voiced: BTreeMap<EntityRole, Vec<bool>> = BTreeMap::new();
    for s in &input.voice {
        let bits = voiced.entry(s.entity).or_insert_with(|| vec![false; len]);
        for ms in s.from_ms.max(from)..s.to_ms.min(to) {
            bits[(ms - from) as usize] = true;
        }
    }
    for (e, bits) in &voiced {
        let n = bits.iter().filter(|b| **b).count() as u64;
        if n > 0 {
            out.nodes.insert(*e, n);
        }
    }
    let spots = spots(input);
    let mut tick = usize::MAX;
    let mut pairs: Vec<(EntityRole, EntityRole)> = Vec::new();
    for ms in from..to {
        let k = (ms / TICK) as usize;
        if k != tick {
            tick = k;
            pairs.clear();
            let here = &spots[k];
            for (a, sa) in here {
                for (b, sb) in here {
                    if a != b && paired(*sa, *sb, th) {
                        pairs.push((*a, *b));
                    }
                }
            }
        }
        for (a, b) in &pairs {
            if voiced.get(a).is_some_and(|bits| bits[(ms - from) as usize]) {
                *out.edges.entry((*a, *b)).or_insert(0) += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleNetwork {
    pub nodes: BTreeMap<CommCode, u64>,
    pub edges: BTreeMap<(CommCode, CommCode), u64>,
}

/// Every full run of `window_size` consecutive utterances, credited to the
/// window holding the start of its last utterance.
pub fn oracle_network(input: &OracleInput, window: &TimeWindow, th: &OracleThresholds) -> OracleNetwork {
    let mut out = OracleNetwork::default();
    let u = &input.utterances;
    for x in u {
        if window.contains(x.window.from_ms) {
            *out.nodes.entry(x.code).or_insert(0) += 1;
        }
    }
    let w = th.network_window_size;
    if u.len() < w {
        return out;
    }
    for start in 0..=u.len() - w {
        let run = &u[start..start + w];
        if !window.contains(run[w - 1].window.from_ms) {
            continue;
        }
        let mut seen = BTreeSet::new();
        for i in 0..w {
            for j in 0..w {
                let (a, b) = (run[i].code, run[j].code);
                if a < b {
                    seen.insert((a, b));
                }
            }
        }
        for pair in seen {
            *out.edges.entry(pair).or_insert(0) += 1;
        }
    }
    out
}
