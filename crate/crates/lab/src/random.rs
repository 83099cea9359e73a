use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use debriefkit_core::model::{CommCode, EntityRole, Millis, WardLayout};

use crate::generate::target_point;
use crate::script::{Markers, ScenarioScript, SpeechItem, Target, Waypoint};

const WALL_MARGIN_MM: f64 = 400.0;
const HUDDLE_POINTS: [[f64; 2]; 3] = [[5000.0, 4000.0], [5000.0, 2500.0], [4500.0, 5600.0]];

fn round_up(ms: f64) -> Millis {
    ((ms / 100.0).ceil() as Millis).max(1) * 100
}

fn random_target(rng: &mut ChaCha8Rng, layout: &WardLayout) -> Target {
    let roll: f64 = rng.random();
    if roll < 0.55 {
        let bed = &layout.beds[rng.random_range(0..layout.beds.len())];
        let reach = (bed.radius_mm - 150.0).max(0.0) * rng.random::<f64>().sqrt();
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        Target::Bed {
            bed: bed.id,
            offset_mm: [(reach * angle.cos()).round(), (reach * angle.sin()).round()],
        }
    } else if roll < 0.75 {
        let base = HUDDLE_POINTS[rng.random_range(0..HUDDLE_POINTS.len())];
        Target::Point {
            point: [
                base[0] + rng.random_range(-600.0f64..600.0).round(),
                base[1] + rng.random_range(-400.0f64..400.0).round(),
            ],
        }
    } else {
        Target::Point {
            point: [
                rng.random_range(WALL_MARGIN_MM..layout.width_mm() - WALL_MARGIN_MM).round(),
                rng.random_range(WALL_MARGIN_MM..layout.height_mm() - WALL_MARGIN_MM).round(),
            ],
        }
    }
}

fn random_route(
    rng: &mut ChaCha8Rng,
    layout: &WardLayout,
    start_ms: Millis,
    duration_ms: Millis,
) -> Vec<Waypoint> {
    let mut out: Vec<Waypoint> = Vec::new();
    let mut t = start_ms;
    while t < duration_ms {
        let target = random_target(rng, layout);
        if let Some(prev) = out.last() {
            let (ax, ay) = target_point(layout, &prev.target);
            let (bx, by) = target_point(layout, &target);
            let dist = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
            let speed = rng.random_range(300.0..1500.0);
            t += round_up(dist / speed * 1000.0);
            if t >= duration_ms {
                break;
            }
        }
        let dwell_ms = rng.random_range(20..600u64) * 100;
        let yaw_deg = rng
            .random_bool(0.3)
            .then(|| (rng.random_range(0.0..360.0f64) * 10.0).round() / 10.0 % 360.0);
        out.push(Waypoint {
            t_ms: t,
            target,
            dwell_ms,
            yaw_deg,
        });
        t += dwell_ms;
    }
    out
}

fn random_speech(
    rng: &mut ChaCha8Rng,
    role: EntityRole,
    cast: &[EntityRole],
    duration_ms: Millis,
) -> Vec<SpeechItem> {
    let mut out = Vec::new();
    let mut t = rng.random_range(0..200u64) * 100;
    loop {
        let len = rng.random_range(300..8000u64);
        if t + len > duration_ms {
            break;
        }
        let others: Vec<EntityRole> = cast.iter().copied().filter(|r| *r != role).collect();
        let partner = (!others.is_empty() && rng.random_bool(0.8))
            .then(|| others[rng.random_range(0..others.len())]);
        let code = rng
            .random_bool(0.6)
            .then(|| CommCode::ALL[rng.random_range(0..6usize)]);
        out.push(SpeechItem {
            from_ms: t,
            to_ms: t + len,
            partner,
            code,
            text: None,
        });
        t += len + rng.random_range(200..20_000u64);
    }
    out
}

/// Seeded ward scenario: two to four nurses, usually a doctor, the fixed
/// patient and relative, random routes, speech and tracker dropouts.
pub fn random_script(seed: u64) -> ScenarioScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = WardLayout::standard();
    let duration_ms = rng.random_range(600..=6000u64) * 100;

    let team = &EntityRole::TEAM[..rng.random_range(2..=4usize)];
    let mut cast: Vec<EntityRole> = team.to_vec();
    let with_doctor = rng.random_bool(0.7);
    if with_doctor {
        cast.push(EntityRole::Doctor);
    }
    cast.extend(layout.fixed_entities.keys().copied());

    let mut markers = Markers::default();
    let mut cuts: Vec<Millis> = (0..3)
        .map(|_| rng.random_range(1..duration_ms / 100) * 100)
        .collect();
    cuts.sort();
    cuts.dedup();
    if cuts.len() == 3 {
        // Markers are tagged in order, so only a prefix of them may be set.
        let set = [0, 1, 2, 3, 3, 3][rng.random_range(0..6usize)];
        markers.handover_ends_ms = (set > 0).then_some(cuts[0]);
        markers.sn_enter_ms = (set > 1).then_some(cuts[1]);
        markers.doctor_enter_ms = (set > 2).then_some(cuts[2]);
    }

    let mut waypoints = BTreeMap::new();
    for role in cast.iter().copied().filter(|r| r.is_trackable()) {
        let start = match role {
            EntityRole::Pn1 | EntityRole::Pn2 => 0,
            EntityRole::Sn1 | EntityRole::Sn2 => markers.sn_enter_ms.unwrap_or(0),
            _ => markers
                .doctor_enter_ms
                .unwrap_or_else(|| rng.random_range(0..duration_ms / 200) * 100),
        };
        let route = random_route(&mut rng, &layout, start, duration_ms);
        if !route.is_empty() {
            waypoints.insert(role, route);
        }
    }

    let mut speech_plan = BTreeMap::new();
    for role in cast.iter().copied().filter(|r| *r != EntityRole::Patient) {
        if role == EntityRole::Relative && rng.random_bool(0.5) {
            continue;
        }
        let items = random_speech(&mut rng, role, &cast, duration_ms);
        if !items.is_empty() {
            speech_plan.insert(role, items);
        }
    }

    let mut dropouts = BTreeMap::new();
    for role in waypoints.keys().copied() {
        if rng.random_bool(0.3) {
            let mut spans: Vec<[Millis; 2]> = (0..rng.random_range(1..=2))
                .map(|_| {
                    let from = rng.random_range(0..duration_ms / 100) * 100;
                    let len = rng.random_range(5..60u64) * 100;
                    [from, from + len]
                })
                .collect();
            spans.sort();
            dropouts.insert(role, spans);
        }
    }

    ScenarioScript {
        seed,
        duration_ms,
        cast,
        layout: None,
        markers,
        waypoints,
        speech_plan,
        dropouts,
        timing_jitter_ms: if rng.random_bool(0.5) { 49 } else { 0 },
    }
}

/// A long, fully tracked shift for load tests: every member walks from the
/// first tick to the last, with no dropouts or timing jitter. Markers split
/// the shift into quarters.
pub fn shift_script(seed: u64, duration_ms: Millis, team: &[EntityRole]) -> ScenarioScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = WardLayout::standard();
    let quarter = duration_ms / 400 * 100;
    let markers = Markers {
        handover_ends_ms: Some(quarter),
        sn_enter_ms: Some(2 * quarter),
        doctor_enter_ms: Some(3 * quarter),
    };
    let mut cast = team.to_vec();
    cast.extend(layout.fixed_entities.keys().copied());
    let waypoints = team
        .iter()
        .map(|&role| (role, random_route(&mut rng, &layout, 0, duration_ms)))
        .collect();
    let speech_plan = team
        .iter()
        .map(|&role| (role, random_speech(&mut rng, role, &cast, duration_ms)))
        .filter(|(_, items)| !items.is_empty())
        .collect();
    ScenarioScript {
        seed,
        duration_ms,
        cast,
        layout: None,
        markers,
        waypoints,
        speech_plan,
        dropouts: BTreeMap::new(),
        timing_jitter_ms: 0,
    }
}
