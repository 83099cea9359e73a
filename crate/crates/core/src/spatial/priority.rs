use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::interaction::{formation_between, FormationParams};
use crate::model::{EntityRole, TimeWindow, WardLayout};
use crate::session::{Placed, Session, TrackPoint, TICK_MS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MemberState {
    AtPrimary,
    AtSecondary,
    Transitioning,
    TeamDiscussionCandidate,
    Other,
    Untracked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Behaviour {
    TogetherPrimary,
    TogetherSecondary,
    IndividualPrimary,
    IndividualSecondary,
    Transitions,
    TeamDiscussion,
    Unclassified,
}

impl Behaviour {
    pub const ALL: [Behaviour; 7] = [
        Behaviour::TogetherPrimary,
        Behaviour::TogetherSecondary,
        Behaviour::IndividualPrimary,
        Behaviour::IndividualSecondary,
        Behaviour::Transitions,
        Behaviour::TeamDiscussion,
        Behaviour::Unclassified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Behaviour::TogetherPrimary => "TOGETHER_PRIMARY",
            Behaviour::TogetherSecondary => "TOGETHER_SECONDARY",
            Behaviour::IndividualPrimary => "INDIVIDUAL_PRIMARY",
            Behaviour::IndividualSecondary => "INDIVIDUAL_SECONDARY",
            Behaviour::Transitions => "TRANSITIONS",
            Behaviour::TeamDiscussion => "TEAM_DISCUSSION",
            Behaviour::Unclassified => "UNCLASSIFIED",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Behaviour::TogetherPrimary => "working together for the main patient",
            Behaviour::TogetherSecondary => "working together on non-critical tasks",
            Behaviour::IndividualPrimary => "working individually for the main patient",
            Behaviour::IndividualSecondary => "working individually on non-critical tasks",
            Behaviour::Transitions => "transitions between beds",
            Behaviour::TeamDiscussion => "engaging in team discussions",
            Behaviour::Unclassified => "unclassified",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityParams {
    pub speed_threshold_mm_s: f64,
    pub discussion_dist_mm: f64,
    pub formation: FormationParams,
}

impl Default for PriorityParams {
    fn default() -> Self {
        PriorityParams {
            speed_threshold_mm_s: 600.0,
            discussion_dist_mm: 1500.0,
            formation: FormationParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityBreakdown {
    pub window: TimeWindow,
    pub tick_count: u64,
    pub member_ticks: u64,
    pub members: Vec<EntityRole>,
    pub counts: BTreeMap<Behaviour, u64>,
    pub fractions: BTreeMap<Behaviour, f64>,
    pub empty: bool,
    pub params: PriorityParams,
}

impl PriorityBreakdown {
    pub fn fraction(&self, b: Behaviour) -> f64 {
        self.fractions.get(&b).copied().unwrap_or(0.0)
    }
}

/// Individual state of one member at one tick. Members in open space come out
/// as `Other`; discussion is decided at team level.
pub fn classify_member_tick(
    point: Option<TrackPoint>,
    prev: Option<TrackPoint>,
    layout: &WardLayout,
    speed_threshold_mm_s: f64,
) -> MemberState {
    let Some(p) = point else {
        return MemberState::Untracked;
    };
    if layout.primary_bed().is_some_and(|b| b.contains(p.x_mm, p.y_mm)) {
        return MemberState::AtPrimary;
    }
    if layout.secondary_beds().any(|b| b.contains(p.x_mm, p.y_mm)) {
        return MemberState::AtSecondary;
    }
    if let Some(q) = prev {
        let dist = ((p.x_mm - q.x_mm).powi(2) + (p.y_mm - q.y_mm).powi(2)).sqrt();
        let speed = dist * 1000.0 / TICK_MS as f64;
        if speed > speed_threshold_mm_s {
            return MemberState::Transitioning;
        }
    }
    MemberState::Other
}

/// Resolves one tick's member states into behaviours, in member order.
pub fn lift_tick(
    states: &[(EntityRole, MemberState, Option<TrackPoint>)],
    params: &PriorityParams,
) -> Vec<Behaviour> {
    let count = |s: MemberState| states.iter().filter(|m| m.1 == s).count();
    let at_primary = count(MemberState::AtPrimary);
    let at_secondary = count(MemberState::AtSecondary);
    let placed = |(entity, _, p): &(EntityRole, MemberState, Option<TrackPoint>)| {
        p.map(|p| Placed {
            entity: *entity,
            x_mm: p.x_mm,
            y_mm: p.y_mm,
            yaw_deg: Some(p.yaw_deg),
        })
    };
    let in_discussion = |i: usize| {
        let Some(me) = placed(&states[i]) else {
            return false;
        };
        states.iter().enumerate().any(|(j, other)| {
            if j == i || other.1 != MemberState::Other {
                return false;
            }
            let Some(o) = placed(other) else { return false };
            let dist = ((me.x_mm - o.x_mm).powi(2) + (me.y_mm - o.y_mm).powi(2)).sqrt();
            dist <= params.discussion_dist_mm
                && formation_between(&me, &o, &params.formation).is_some()
        })
    };
    states
        .iter()
        .enumerate()
        .map(|(i, (_, state, _))| match state {
            MemberState::AtPrimary if at_primary >= 2 => Behaviour::TogetherPrimary,
            MemberState::AtPrimary => Behaviour::IndividualPrimary,
            MemberState::AtSecondary if at_secondary >= 2 => Behaviour::TogetherSecondary,
            MemberState::AtSecondary => Behaviour::IndividualSecondary,
            MemberState::Transitioning => Behaviour::Transitions,
            MemberState::Other | MemberState::TeamDiscussionCandidate if in_discussion(i) => {
                Behaviour::TeamDiscussion
            }
            _ => Behaviour::Unclassified,
        })
        .collect()
}

/// Share of team member-ticks spent in each behaviour.
pub fn compute_priority_breakdown(
    session: &Session,
    window: &TimeWindow,
    params: &PriorityParams,
) -> PriorityBreakdown {
    let grid = session.grid();
    let members = session.team_members();
    let layout = session.layout();
    let ticks = grid.ticks_in(window);
    let mut counts: BTreeMap<Behaviour, u64> = Behaviour::ALL.iter().map(|b| (*b, 0)).collect();
    let mut states = Vec::with_capacity(members.len());
    for tick in ticks.clone() {
        states.clear();
        for m in &members {
            let point = grid.point(*m, tick);
            let prev = tick.checked_sub(1).and_then(|t| grid.point(*m, t));
            let state = classify_member_tick(point, prev, layout, params.speed_threshold_mm_s);
            states.push((*m, state, point));
        }
        for b in lift_tick(&states, params) {
            *counts.get_mut(&b).expect("all behaviours seeded") += 1;
        }
    }
    let tick_count = ticks.len() as u64;
    let member_ticks = tick_count * members.len() as u64;
    let fractions = counts
        .iter()
        .map(|(b, c)| {
            let f = if member_ticks == 0 {
                0.0
            } else {
                *c as f64 / member_ticks as f64
            };
            (*b, f)
        })
        .collect();
    PriorityBreakdown {
        window: *window,
        tick_count,
        member_ticks,
        members,
        counts,
        fractions,
        empty: member_ticks == 0,
        params: *params,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bed, PositionSample, SessionTimeline};

    fn pt(x: f64, y: f64) -> Option<TrackPoint> {
        Some(TrackPoint {
            x_mm: x,
            y_mm: y,
            yaw_deg: 0.0,
        })
    }

    #[test]
    fn member_state_examples() {
        let layout = WardLayout::standard();
        assert_eq!(
            classify_member_tick(pt(7800.0, 6200.0), None, &layout, 600.0),
            MemberState::AtPrimary
        );
        assert_eq!(
            classify_member_tick(pt(5000.0, 4000.0), pt(4100.0, 4000.0), &layout, 600.0),
            MemberState::Transitioning
        );
        assert_eq!(
            classify_member_tick(pt(5000.0, 4000.0), pt(4990.0, 4000.0), &layout, 600.0),
            MemberState::Other
        );
        assert_eq!(
            classify_member_tick(None, None, &layout, 600.0),
            MemberState::Untracked
        );
    }

    #[test]
    fn primary_wins_ties() {
        // Overlapping beds are not a valid layout, so build one by hand.
        let mut layout = WardLayout::standard();
        layout.beds = vec![
            Bed {
                id: 2,
                center_mm: [4000.0, 4000.0],
                radius_mm: 1000.0,
            },
            Bed {
                id: 4,
                center_mm: [5000.0, 4000.0],
                radius_mm: 1000.0,
            },
        ];
        assert_eq!(
            classify_member_tick(pt(4500.0, 4000.0), None, &layout, 600.0),
            MemberState::AtPrimary
        );
    }

    fn still(entity: EntityRole, x: f64, y: f64, ticks: u64) -> Vec<PositionSample> {
        (0..ticks)
            .map(|k| PositionSample {
                t_ms: k * 100,
                entity,
                x_mm: x,
                y_mm: y,
                yaw_deg: 0.0,
            })
            .collect()
    }

    fn session(positions: Vec<Vec<PositionSample>>, ticks: u64, cast: &[EntityRole]) -> Session {
        let mut all: Vec<PositionSample> = positions.into_iter().flatten().collect();
        all.sort_by_key(|p| p.t_ms);
        Session::new("s", WardLayout::standard(), SessionTimeline::new(ticks * 100))
            .with_positions(all)
            .with_cast(cast)
    }

    #[test]
    fn together_at_primary() {
        let s = session(
            vec![
                still(EntityRole::Pn1, 7800.0, 6000.0, 50),
                still(EntityRole::Pn2, 7600.0, 6300.0, 50),
            ],
            50,
            &[],
        );
        let b = compute_priority_breakdown(&s, &s.timeline().whole(), &Default::default());
        assert_eq!(b.fraction(Behaviour::TogetherPrimary), 1.0);
        assert_eq!(b.tick_count, 50);
    }

    #[test]
    fn individual_split() {
        let s = session(
            vec![
                still(EntityRole::Pn1, 7800.0, 6000.0, 50),
                still(EntityRole::Pn2, 1800.0, 6200.0, 50),
            ],
            50,
            &[],
        );
        let b = compute_priority_breakdown(&s, &s.timeline().whole(), &Default::default());
        assert_eq!(b.fraction(Behaviour::IndividualPrimary), 0.5);
        assert_eq!(b.fraction(Behaviour::IndividualSecondary), 0.5);
    }

    #[test]
    fn untracked_member_is_unclassified() {
        let s = session(
            vec![
                still(EntityRole::Pn1, 7800.0, 6000.0, 100),
                still(EntityRole::Pn2, 7700.0, 6100.0, 100),
                still(EntityRole::Sn1, 1800.0, 6200.0, 100),
            ],
            100,
            &[EntityRole::Sn2],
        );
        let b = compute_priority_breakdown(&s, &s.timeline().whole(), &Default::default());
        assert_eq!(b.member_ticks, 400);
        assert_eq!(b.fraction(Behaviour::TogetherPrimary), 200.0 / 400.0);
        assert_eq!(b.fraction(Behaviour::IndividualSecondary), 100.0 / 400.0);
        assert_eq!(b.fraction(Behaviour::Unclassified), 100.0 / 400.0);
    }

    #[test]
    fn discussion_in_open_space() {
        let mut a = still(EntityRole::Pn1, 5000.0, 4000.0, 20);
        let mut b = still(EntityRole::Pn2, 6000.0, 4000.0, 20);
        b.iter_mut().for_each(|p| p.yaw_deg = 180.0);
        a.append(&mut b);
        let s = session(vec![a], 20, &[]);
        let out = compute_priority_breakdown(&s, &s.timeline().whole(), &Default::default());
        assert_eq!(out.fraction(Behaviour::TeamDiscussion), 1.0);
    }

    #[test]
    fn empty_window_is_flagged() {
        let s = session(vec![still(EntityRole::Pn1, 0.0, 0.0, 10)], 10, &[]);
        let b = compute_priority_breakdown(&s, &TimeWindow::new(300, 300).unwrap(), &Default::default());
        assert!(b.empty);
        assert_eq!(b.tick_count, 0);
        assert!(b.fractions.values().all(|f| *f == 0.0));
    }
}
