use serde::{Deserialize, Serialize};

use crate::model::{EntityRole, TimeWindow};
use crate::session::{tick_time, Placed, Session};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormationParams {
    pub dist_face_mm: f64,
    pub dist_side_mm: f64,
    pub angle_tol_deg: f64,
}

impl Default for FormationParams {
    fn default() -> Self {
        FormationParams {
            dist_face_mm: 1500.0,
            dist_side_mm: 750.0,
            angle_tol_deg: 45.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FormationKind {
    FaceToFace,
    SideBySide,
}

/// Two entities sharing an interaction space at one tick; `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FormationInstant {
    pub a: EntityRole,
    pub b: EntityRole,
    pub kind: FormationKind,
}

/// A formation held over consecutive ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FFormationPair {
    pub a: EntityRole,
    pub b: EntityRole,
    pub window: TimeWindow,
    pub kind: FormationKind,
}

impl FFormationPair {
    pub fn reversed(&self) -> Self {
        FFormationPair {
            a: self.b,
            b: self.a,
            ..*self
        }
    }
}

/// Smallest absolute difference between two headings, in `[0, 180]`.
pub fn angular_difference(a_deg: f64, b_deg: f64) -> f64 {
    let d = (a_deg - b_deg).abs().rem_euclid(360.0);
    d.min(360.0 - d)
}

fn bearing_deg(from: &Placed, to: &Placed) -> f64 {
    (to.y_mm - from.y_mm).atan2(to.x_mm - from.x_mm).to_degrees()
}

/// Formation between two placed entities. Orientation tests are waived for
/// entities without a heading.
pub fn formation_between(a: &Placed, b: &Placed, params: &FormationParams) -> Option<FormationKind> {
    let dx = b.x_mm - a.x_mm;
    let dy = b.y_mm - a.y_mm;
    let dist = (dx * dx + dy * dy).sqrt();
    let tol = params.angle_tol_deg;

    let faces = |me: &Placed, other: &Placed| match me.yaw_deg {
        Some(yaw) => angular_difference(yaw, bearing_deg(me, other)) <= tol,
        None => true,
    };
    if dist <= params.dist_face_mm && faces(a, b) && faces(b, a) {
        return Some(FormationKind::FaceToFace);
    }
    let aligned = match (a.yaw_deg, b.yaw_deg) {
        (Some(ya), Some(yb)) => angular_difference(ya, yb) <= tol,
        _ => true,
    };
    (dist <= params.dist_side_mm && aligned).then_some(FormationKind::SideBySide)
}

/// All formations among the entities placed at one instant.
pub fn detect_f_formations(placed: &[Placed], params: &FormationParams) -> Vec<FormationInstant> {
    let mut out = Vec::new();
    for (i, p) in placed.iter().enumerate() {
        for q in &placed[i + 1..] {
            if p.entity == q.entity {
                continue;
            }
            if let Some(kind) = formation_between(p, q, params) {
                let (a, b) = if p.entity < q.entity {
                    (p.entity, q.entity)
                } else {
                    (q.entity, p.entity)
                };
                out.push(FormationInstant { a, b, kind });
            }
        }
    }
    out.sort();
    out
}

/// Formation intervals over the ticks inside `window`, listed in both
/// orientations.
pub fn formation_intervals(
    session: &Session,
    window: &TimeWindow,
    params: &FormationParams,
) -> Vec<FFormationPair> {
    let grid = session.grid();
    let mut open: std::collections::BTreeMap<(EntityRole, EntityRole, FormationKind), u64> =
        Default::default();
    let mut out = Vec::new();
    let ticks = grid.ticks_in(window);
    for tick in ticks.clone() {
        let t = tick_time(tick);
        let now: std::collections::BTreeSet<_> = detect_f_formations(&grid.placed_at(tick), params)
            .into_iter()
            .map(|f| (f.a, f.b, f.kind))
            .collect();
        open.retain(|key, start| {
            let keep = now.contains(key);
            if !keep {
                out.push(FFormationPair {
                    a: key.0,
                    b: key.1,
                    kind: key.2,
                    window: TimeWindow {
                        from_ms: *start,
                        to_ms: t,
                    },
                });
            }
            keep
        });
        for key in now {
            open.entry(key).or_insert(t);
        }
    }
    let close = tick_time(ticks.end).min(window.to_ms);
    for (key, start) in open {
        out.push(FFormationPair {
            a: key.0,
            b: key.1,
            kind: key.2,
            window: TimeWindow {
                from_ms: start,
                to_ms: close.max(start),
            },
        });
    }
    let mut both: Vec<FFormationPair> = out.iter().flat_map(|p| [*p, p.reversed()]).collect();
    both.sort_by_key(|p| (p.window.from_ms, p.a, p.b, p.kind));
    both
}
