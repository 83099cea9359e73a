use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use debriefkit_core::ingest::{
    normalize_all, parse_positions, parse_utterances, parse_voice, write_positions, write_voice,
    IngestError, SessionStore, UtteranceRecord,
};
use debriefkit_core::interaction::{code_utterance, RuleCoder};
use debriefkit_core::model::{
    normalize_yaw, CommCode, EntityRole, Millis, Phase, PositionSample, SessionTimeline,
    VoiceSegment, WardLayout,
};
use debriefkit_core::Session;

use crate::script::{ScenarioScript, ScriptError, Target, Waypoint};

pub const JITTER_MM: f64 = 20.0;
pub const YAW_JITTER_DEG: f64 = 2.0;
pub const TRUTH_FILE: &str = "ground_truth.json";
pub const SCRIPT_FILE: &str = "scenario-script.json";
const SPEED_THRESHOLD_MM_S: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IntendedState {
    AtPrimary,
    AtSecondary,
    Transitioning,
    Other,
    Untracked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRun {
    pub from_ms: Millis,
    pub to_ms: Millis,
    pub state: IntendedState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntendedFormation {
    pub speaker: EntityRole,
    pub partner: EntityRole,
    pub from_ms: Millis,
    pub to_ms: Millis,
}

/// What the script meant to happen, computed from the noiseless trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub member_states: BTreeMap<EntityRole, Vec<StateRun>>,
    pub formations: Vec<IntendedFormation>,
    pub codes: Vec<CommCode>,
    pub behaviour_ticks: BTreeMap<String, u64>,
    pub member_ticks: u64,
}

impl GroundTruth {
    pub fn behaviour_fraction(&self, name: &str) -> f64 {
        if self.member_ticks == 0 {
            return 0.0;
        }
        self.behaviour_ticks.get(name).copied().unwrap_or(0) as f64 / self.member_ticks as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSession {
    pub script: ScenarioScript,
    pub layout: WardLayout,
    pub timeline: SessionTimeline,
    pub positions: Vec<PositionSample>,
    pub voice: Vec<VoiceSegment>,
    pub utterances: Vec<UtteranceRecord>,
    pub truth: GroundTruth,
}

#[derive(Debug, Clone, Copy)]
struct Pose {
    x: f64,
    y: f64,
    /// Heading and speed while walking a leg.
    moving: Option<(f64, f64)>,
    dwell: Option<Waypoint>,
}

pub fn target_point(layout: &WardLayout, target: &Target) -> (f64, f64) {
    match target {
        Target::Bed { bed, offset_mm } => {
            let b = layout
                .beds
                .iter()
                .find(|b| b.id == *bed)
                .expect("validated bed id");
            (b.center_mm[0] + offset_mm[0], b.center_mm[1] + offset_mm[1])
        }
        Target::Point { point } => (point[0], point[1]),
    }
}

fn pose_at(layout: &WardLayout, wps: &[Waypoint], t: Millis) -> Option<Pose> {
    let i = wps.partition_point(|w| w.t_ms <= t).checked_sub(1)?;
    let here = wps[i];
    let (x, y) = target_point(layout, &here.target);
    let leave = here.t_ms + here.dwell_ms;
    let Some(next) = wps.get(i + 1).filter(|_| t >= leave) else {
        return Some(Pose {
            x,
            y,
            moving: None,
            dwell: Some(here),
        });
    };
    let (nx, ny) = target_point(layout, &next.target);
    let span = (next.t_ms - leave) as f64;
    let f = (t - leave) as f64 / span;
    let (dx, dy) = (nx - x, ny - y);
    let dist = (dx * dx + dy * dy).sqrt();
    let heading = normalize_yaw(dy.atan2(dx).to_degrees());
    Some(Pose {
        x: x + dx * f,
        y: y + dy * f,
        moving: Some((heading, dist * 1000.0 / span)),
        dwell: None,
    })
}

fn facing(from: (f64, f64), to: (f64, f64)) -> f64 {
    normalize_yaw((to.1 - from.1).atan2(to.0 - from.0).to_degrees())
}

const TEMPLATES: [(CommCode, &[&str]); 6] = [
    (
        CommCode::Escalation,
        &["I'm calling a MET for bed four.", "This is an emergency, call the doctor."],
    ),
    (
        CommCode::Handover,
        &["Handover for bed four, the situation is stable.", "Background is a hip replacement two days ago."],
    ),
    (
        CommCode::TaskAllocation,
        &["Can you check the obs on bed two?", "Could you grab the oxygen mask?", "Go and get the ECG machine."],
    ),
    (
        CommCode::Questioning,
        &["What is her blood pressure now?", "When was the last dose given?", "Is the relative still here?"],
    ),
    (
        CommCode::Acknowledging,
        &["Okay, got it.", "Yes, on my way.", "Thanks."],
    ),
    (
        CommCode::SharingInformation,
        &["Her sats are dropping to ninety percent.", "Pressure is ninety on fifty.", "Bed one is asleep."],
    ),
];

pub fn template_text(code: CommCode, pick: usize) -> &'static str {
    let (_, texts) = TEMPLATES.iter().find(|(c, _)| *c == code).expect("every code has templates");
    texts[pick % texts.len()]
}

fn in_dropout(spans: Option<&Vec<[Millis; 2]>>, t: Millis) -> bool {
    spans.is_some_and(|s| s.iter().any(|[a, b]| *a <= t && t < *b))
}

pub fn generate_session(script: &ScenarioScript) -> Result<GeneratedSession, ScriptError> {
    script.validate()?;
    let layout = script.layout();
    let timeline = SessionTimeline::with_markers(
        script.markers.handover_ends_ms,
        script.markers.sn_enter_ms,
        script.markers.doctor_enter_ms,
        script.duration_ms,
    )
    .map_err(|e| ScriptError::Invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let n_ticks = (script.duration_ms / 100) as usize;

    // Noiseless poses per tracked role and tick.
    let poses: BTreeMap<EntityRole, Vec<Option<Pose>>> = script
        .waypoints
        .iter()
        .map(|(role, wps)| {
            let track = (0..n_ticks)
                .map(|k| pose_at(&layout, wps, k as Millis * 100))
                .collect();
            (*role, track)
        })
        .collect();
    let point_of = |role: EntityRole, k: usize| -> Option<(f64, f64)> {
        if let Some(track) = poses.get(&role) {
            return track[k].map(|p| (p.x, p.y));
        }
        layout.fixed_entities.get(&role).map(|p| (p[0], p[1]))
    };

    let mut speech: Vec<(EntityRole, &crate::script::SpeechItem)> = script
        .speech_plan
        .iter()
        .flat_map(|(role, items)| items.iter().map(move |s| (*role, s)))
        .collect();
    speech.sort_by_key(|(role, s)| (s.from_ms, *role));
    let talking_to = |role: EntityRole, t: Millis| -> Option<EntityRole> {
        speech
            .iter()
            .find(|(r, s)| *r == role && s.from_ms <= t && t < s.to_ms)
            .and_then(|(_, s)| s.partner)
    };
    let addressed_by = |role: EntityRole, t: Millis| -> Option<EntityRole> {
        speech
            .iter()
            .find(|(_, s)| s.partner == Some(role) && s.from_ms <= t && t < s.to_ms)
            .map(|(r, _)| *r)
    };

    let mut positions = Vec::new();
    for k in 0..n_ticks {
        let t = k as Millis * 100;
        for (role, track) in &poses {
            let Some(pose) = track[k] else { continue };
            if in_dropout(script.dropouts.get(role), t) {
                continue;
            }
            let here = (pose.x, pose.y);
            let yaw = match (pose.moving, pose.dwell) {
                (Some((heading, _)), _) => heading,
                (None, dwell) => {
                    let counterpart = talking_to(*role, t)
                        .or_else(|| addressed_by(*role, t))
                        .and_then(|other| point_of(other, k));
                    match (counterpart, dwell) {
                        (Some(p), _) => facing(here, p),
                        (None, Some(Waypoint { yaw_deg: Some(y), .. })) => y,
                        (None, Some(Waypoint {
                            target: Target::Bed { bed, offset_mm },
                            ..
                        })) if offset_mm != [0.0, 0.0] => {
                            let center = target_point(&layout, &Target::Bed { bed, offset_mm: [0.0, 0.0] });
                            facing(here, center)
                        }
                        _ => 0.0,
                    }
                }
            };
            let lag = if script.timing_jitter_ms > 0 {
                rng.random_range(0..=script.timing_jitter_ms)
            } else {
                0
            };
            let jx = rng.random_range(-JITTER_MM..=JITTER_MM);
            let jy = rng.random_range(-JITTER_MM..=JITTER_MM);
            let jyaw = rng.random_range(-YAW_JITTER_DEG..=YAW_JITTER_DEG);
            let (x, y) = layout.clamp((pose.x + jx).round(), (pose.y + jy).round());
            positions.push(PositionSample {
                t_ms: t + lag,
                entity: *role,
                x_mm: x,
                y_mm: y,
                yaw_deg: (normalize_yaw(yaw + jyaw) * 10.0).round() / 10.0 % 360.0,
            });
        }
    }
    positions.sort_by_key(|p| p.t_ms);

    let mut voice = Vec::new();
    let mut utterances = Vec::new();
    let mut codes = Vec::new();
    let mut formations = Vec::new();
    for (role, item) in &speech {
        voice.push(VoiceSegment {
            entity: *role,
            from_ms: item.from_ms,
            to_ms: item.to_ms,
        });
        let pick = rng.random_range(0..3usize);
        let (text, intended) = match (&item.text, item.code) {
            (Some(text), Some(code)) => (text.clone(), code),
            (Some(text), None) => {
                let code = code_utterance(text).map_err(|e| ScriptError::Invalid(e.to_string()))?;
                (text.clone(), code)
            }
            (None, Some(code)) => (template_text(code, pick).to_owned(), code),
            (None, None) => {
                let code = CommCode::ALL[rng.random_range(0..6usize)];
                (template_text(code, pick).to_owned(), code)
            }
        };
        utterances.push(UtteranceRecord {
            entity: *role,
            from_ms: item.from_ms as i64,
            to_ms: item.to_ms as i64,
            text,
            code: item.code,
        });
        codes.push(intended);
        if let Some(partner) = item.partner {
            formations.push(IntendedFormation {
                speaker: *role,
                partner,
                from_ms: item.from_ms,
                to_ms: item.to_ms,
            });
        }
    }

    let truth = ground_truth(script, &layout, &poses, n_ticks, formations, codes);
    Ok(GeneratedSession {
        script: script.clone(),
        layout,
        timeline,
        positions,
        voice,
        utterances,
        truth,
    })
}

fn ground_truth(
    script: &ScenarioScript,
    layout: &WardLayout,
    poses: &BTreeMap<EntityRole, Vec<Option<Pose>>>,
    n_ticks: usize,
    formations: Vec<IntendedFormation>,
    codes: Vec<CommCode>,
) -> GroundTruth {
    let members: Vec<EntityRole> = script
        .cast
        .iter()
        .copied()
        .filter(|r| r.is_team_member())
        .collect();
    let state_at = |role: EntityRole, k: usize| -> IntendedState {
        let t = k as Millis * 100;
        let pose = poses.get(&role).and_then(|track| track[k]);
        let Some(p) = pose.filter(|_| !in_dropout(script.dropouts.get(&role), t)) else {
            return IntendedState::Untracked;
        };
        if layout.primary_bed().is_some_and(|b| b.contains(p.x, p.y)) {
            IntendedState::AtPrimary
        } else if layout.secondary_beds().any(|b| b.contains(p.x, p.y)) {
            IntendedState::AtSecondary
        } else if p.moving.is_some_and(|(_, speed)| speed > SPEED_THRESHOLD_MM_S) {
            IntendedState::Transitioning
        } else {
            IntendedState::Other
        }
    };

    let mut member_states: BTreeMap<EntityRole, Vec<StateRun>> = BTreeMap::new();
    let mut behaviour_ticks: BTreeMap<String, u64> = BTreeMap::new();
    for k in 0..n_ticks {
        let t = k as Millis * 100;
        let states: Vec<(EntityRole, IntendedState)> =
            members.iter().map(|m| (*m, state_at(*m, k))).collect();
        let count = |s| states.iter().filter(|(_, x)| *x == s).count();
        for (m, s) in &states {
            let runs = member_states.entry(*m).or_default();
            match runs.last_mut() {
                Some(run) if run.state == *s && run.to_ms == t => run.to_ms = t + 100,
                _ => runs.push(StateRun {
                    from_ms: t,
                    to_ms: t + 100,
                    state: *s,
                }),
            }
            let discussing = || {
                formations.iter().any(|f| {
                    f.from_ms <= t
                        && t < f.to_ms
                        && (f.speaker == *m || f.partner == *m)
                        && states.iter().any(|(o, os)| {
                            *o != *m
                                && *os == IntendedState::Other
                                && (*o == f.speaker || *o == f.partner)
                        })
                })
            };
            let name = match s {
                IntendedState::AtPrimary if count(IntendedState::AtPrimary) >= 2 => "TOGETHER_PRIMARY",
                IntendedState::AtPrimary => "INDIVIDUAL_PRIMARY",
                IntendedState::AtSecondary if count(IntendedState::AtSecondary) >= 2 => {
                    "TOGETHER_SECONDARY"
                }
                IntendedState::AtSecondary => "INDIVIDUAL_SECONDARY",
                IntendedState::Transitioning => "TRANSITIONS",
                IntendedState::Other if discussing() => "TEAM_DISCUSSION",
                _ => "UNCLASSIFIED",
            };
            *behaviour_ticks.entry(name.to_owned()).or_default() += 1;
        }
    }
    GroundTruth {
        member_states,
        formations,
        codes,
        behaviour_ticks,
        member_ticks: (n_ticks * members.len()) as u64,
    }
}

impl GeneratedSession {
    pub fn positions_csv(&self) -> String {
        write_positions(&self.positions)
    }

    pub fn voice_jsonl(&self) -> String {
        let normalized = normalize_all(self.voice.clone()).expect("generated segments are valid");
        write_voice(&normalized)
    }

    pub fn utterances_jsonl(&self) -> String {
        self.utterances
            .iter()
            .map(|u| serde_json::to_string(u).expect("record serializes") + "\n")
            .collect()
    }

    /// The session as the engine sees it after parsing the generated files.
    pub fn to_session(&self, id: &str) -> Result<Session, IngestError> {
        let positions = parse_positions(self.positions_csv().as_bytes(), 0, &self.layout)?.samples;
        let voice = parse_voice(self.voice_jsonl().as_bytes(), 0)?;
        let utterances = parse_utterances(self.utterances_jsonl().as_bytes(), 0, &RuleCoder)?;
        Ok(Session::new(id, self.layout.clone(), self.timeline)
            .with_cast(&self.script.cast)
            .with_positions(positions)
            .with_voice(voice)
            .with_utterances(utterances))
    }

    /// Writes a recording session directory under `root`, ready for sealing.
    pub fn write_session_dir(&self, root: &Path, id: &str) -> Result<SessionStore, IngestError> {
        let mut store = SessionStore::create(root, id, self.layout.clone(), None)?;
        store.declare_cast(&self.script.cast)?;
        store.set_planned_end(self.timeline.end_ms)?;
        store.ingest_positions(self.positions_csv().as_bytes(), 0)?;
        store.ingest_voice(self.voice_jsonl().as_bytes(), 0)?;
        store.ingest_utterances(self.utterances_jsonl().as_bytes(), 0, &RuleCoder)?;
        for (phase, t) in Phase::MARKED.iter().zip(self.timeline.markers()) {
            if let Some(t) = t {
                store.tag_phase(*phase, t, "simulator", None)?;
            }
        }
        let io = |path: &Path, e| IngestError::Io {
            path: path.display().to_string(),
            source: e,
        };
        let script_path = store.dir().join(SCRIPT_FILE);
        std::fs::write(&script_path, self.script.to_json()).map_err(|e| io(&script_path, e))?;
        let truth_path = store.dir().join(TRUTH_FILE);
        let truth = serde_json::to_string_pretty(&self.truth).expect("truth serializes");
        std::fs::write(&truth_path, truth).map_err(|e| io(&truth_path, e))?;
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::{Markers, SpeechItem};

    fn script(waypoints: BTreeMap<EntityRole, Vec<Waypoint>>, duration_ms: Millis) -> ScenarioScript {
        ScenarioScript {
            seed: 42,
            duration_ms,
            cast: waypoints.keys().copied().collect(),
            layout: None,
            markers: Markers::default(),
            waypoints,
            speech_plan: BTreeMap::new(),
            dropouts: BTreeMap::new(),
            timing_jitter_ms: 0,
        }
    }

    fn at_bed(bed: u8, offset: [f64; 2], dwell_ms: Millis) -> Waypoint {
        Waypoint {
            t_ms: 0,
            target: Target::Bed {
                bed,
                offset_mm: offset,
            },
            dwell_ms,
            yaw_deg: None,
        }
    }

    #[test]
    fn two_nurses_at_primary() {
        let s = script(
            BTreeMap::from([
                (EntityRole::Pn1, vec![at_bed(4, [-300.0, 0.0], 60_000)]),
                (EntityRole::Pn2, vec![at_bed(4, [300.0, 0.0], 60_000)]),
            ]),
            60_000,
        );
        let g = generate_session(&s).unwrap();
        assert_eq!(g.truth.behaviour_fraction("TOGETHER_PRIMARY"), 1.0);
        assert_eq!(g.positions.len(), 2 * 600);
        assert!(g
            .positions
            .iter()
            .all(|p| (p.x_mm - 7500.0).abs() <= 30.0 || (p.x_mm - 8100.0).abs() <= 30.0));
    }

    #[test]
    fn same_seed_same_bytes() {
        let s = crate::random::random_script(9);
        let a = generate_session(&s).unwrap();
        let b = generate_session(&s).unwrap();
        assert_eq!(a.positions_csv(), b.positions_csv());
        assert_eq!(a.voice_jsonl(), b.voice_jsonl());
        assert_eq!(a.utterances_jsonl(), b.utterances_jsonl());
        let mut other = s.clone();
        other.seed += 1;
        assert_ne!(generate_session(&other).unwrap().positions_csv(), a.positions_csv());
    }

    #[test]
    fn walking_between_beds_transitions() {
        // Bed 1 (1800,1800) to bed 4 (7800,6000): 7324 mm in 6.1 s is ~1200 mm/s.
        let walk = vec![
            at_bed(1, [0.0, 0.0], 2_000),
            Waypoint {
                t_ms: 8_100,
                target: Target::Bed {
                    bed: 4,
                    offset_mm: [0.0, 0.0],
                },
                dwell_ms: 0,
                yaw_deg: None,
            },
        ];
        let g = generate_session(&script(BTreeMap::from([(EntityRole::Pn1, walk)]), 12_000)).unwrap();
        let runs = &g.truth.member_states[&EntityRole::Pn1];
        let moving: Millis = runs
            .iter()
            .filter(|r| r.state == IntendedState::Transitioning)
            .map(|r| r.to_ms - r.from_ms)
            .sum();
        assert!(moving >= 3_000, "{runs:?}");
        assert_eq!(runs[0].state, IntendedState::AtSecondary);
        assert_eq!(runs.last().unwrap().state, IntendedState::AtPrimary);
    }

    #[test]
    fn speech_becomes_voice_and_coded_text() {
        let mut s = script(
            BTreeMap::from([
                (EntityRole::Pn1, vec![at_bed(4, [-500.0, 0.0], 20_000)]),
                (EntityRole::Pn2, vec![at_bed(4, [500.0, 0.0], 20_000)]),
            ]),
            20_000,
        );
        s.speech_plan.insert(
            EntityRole::Pn1,
            vec![SpeechItem {
                from_ms: 1_000,
                to_ms: 3_000,
                partner: Some(EntityRole::Pn2),
                code: None,
                text: None,
            }],
        );
        let g = generate_session(&s).unwrap();
        assert_eq!(g.voice.len(), 1);
        assert_eq!(g.truth.formations.len(), 1);
        let session = g.to_session("t").unwrap();
        assert_eq!(session.utterances()[0].code, g.truth.codes[0]);
        // While speaking PN1 turns toward PN2 and PN2 toward PN1.
        let at = |e, t| g.positions.iter().find(|p| p.entity == e && p.t_ms == t).unwrap().yaw_deg;
        let d = |a: f64, b: f64| {
            let d = (a - b).abs() % 360.0;
            d.min(360.0 - d)
        };
        assert!(d(at(EntityRole::Pn1, 2_000), 0.0) <= 3.0);
        assert!(d(at(EntityRole::Pn2, 2_000), 180.0) <= 3.0);
    }

    #[test]
    fn templates_code_as_intended() {
        for (code, texts) in TEMPLATES {
            for text in texts {
                assert_eq!(code_utterance(text).unwrap(), code, "{text}");
            }
        }
    }

    #[test]
    fn writes_a_session_dir() {
        let dir = tempfile::tempdir().unwrap();
        let g = generate_session(&crate::random::random_script(3)).unwrap();
        let mut store = g.write_session_dir(dir.path(), "sim3").unwrap();
        let timeline = store.proposed_timeline().unwrap();
        assert_eq!(timeline, g.timeline);
        store.seal(&timeline).unwrap();
        let loaded = store.load().unwrap();
        assert_eq!(loaded.positions(), g.to_session("x").unwrap().positions());
        assert!(dir.path().join("sim3").join(TRUTH_FILE).exists());
    }
}
