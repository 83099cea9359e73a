//! Domain vocabulary: roles, ward geometry, session timeline, time windows
//! and the raw stream record types.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Session-relative milliseconds.
pub type Millis = u64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid time window [{from_ms}, {to_ms})")]
    InvalidWindow { from_ms: Millis, to_ms: Millis },
    #[error("window [{from_ms}, {to_ms}) exceeds session end {end_ms}")]
    WindowOutOfRange {
        from_ms: Millis,
        to_ms: Millis,
        end_ms: Millis,
    },
    #[error("phase {0} has not been tagged")]
    PhaseUnset(Phase),
    #[error("timeline markers out of order: {0}")]
    TimelineOrder(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("unknown entity role `{0}`")]
    UnknownRole(String),
    #[error("unknown communication code `{0}`")]
    UnknownCode(String),
    #[error("unknown phase `{0}`")]
    UnknownPhase(String),
}

/// A participant in the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityRole {
    #[serde(rename = "PN1")]
    Pn1,
    #[serde(rename = "PN2")]
    Pn2,
    #[serde(rename = "SN1")]
    Sn1,
    #[serde(rename = "SN2")]
    Sn2,
    #[serde(rename = "DOCTOR")]
    Doctor,
    #[serde(rename = "PATIENT")]
    Patient,
    #[serde(rename = "RELATIVE")]
    Relative,
}

impl EntityRole {
    pub const ALL: [EntityRole; 7] = [
        EntityRole::Pn1,
        EntityRole::Pn2,
        EntityRole::Sn1,
        EntityRole::Sn2,
        EntityRole::Doctor,
        EntityRole::Patient,
        EntityRole::Relative,
    ];

    pub const TEAM: [EntityRole; 4] = [
        EntityRole::Pn1,
        EntityRole::Pn2,
        EntityRole::Sn1,
        EntityRole::Sn2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityRole::Pn1 => "PN1",
            EntityRole::Pn2 => "PN2",
            EntityRole::Sn1 => "SN1",
            EntityRole::Sn2 => "SN2",
            EntityRole::Doctor => "DOCTOR",
            EntityRole::Patient => "PATIENT",
            EntityRole::Relative => "RELATIVE",
        }
    }

    /// Whether the role can wear a positioning tag. Patient and relative are
    /// placed at fixed positions declared by the layout.
    pub fn is_trackable(self) -> bool {
        !matches!(self, EntityRole::Patient | EntityRole::Relative)
    }

    /// Nursing team members (primary and secondary nurses).
    pub fn is_team_member(self) -> bool {
        matches!(
            self,
            EntityRole::Pn1 | EntityRole::Pn2 | EntityRole::Sn1 | EntityRole::Sn2
        )
    }
}

impl fmt::Display for EntityRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityRole {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityRole::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| ModelError::UnknownRole(s.to_string()))
    }
}

/// Display color name for a role.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColorName(pub String);

impl ColorName {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ColorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Default role colors.
pub fn entity_color(role: EntityRole) -> ColorName {
    let name = match role {
        EntityRole::Pn1 => "red",
        EntityRole::Pn2 => "blue",
        EntityRole::Sn1 => "green",
        EntityRole::Sn2 => "yellow",
        EntityRole::Doctor => "purple",
        EntityRole::Patient => "grey",
        EntityRole::Relative => "brown",
    };
    ColorName(name.to_string())
}

/// Role colors with per-session overrides layered over [`entity_color`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColorMap {
    overrides: BTreeMap<EntityRole, ColorName>,
}

impl ColorMap {
    pub fn with_overrides(overrides: BTreeMap<EntityRole, String>) -> Result<Self, ModelError> {
        let map = ColorMap {
            overrides: overrides
                .into_iter()
                .map(|(r, c)| (r, ColorName(c)))
                .collect(),
        };
        let mut seen = BTreeMap::new();
        for role in EntityRole::TEAM {
            let color = map.color(role);
            if let Some(prev) = seen.insert(color.clone(), role) {
                return Err(ModelError::InvalidLayout(format!(
                    "{prev} and {role} share color {color}"
                )));
            }
        }
        Ok(map)
    }

    pub fn color(&self, role: EntityRole) -> ColorName {
        self.overrides
            .get(&role)
            .cloned()
            .unwrap_or_else(|| entity_color(role))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bed {
    pub id: u8,
    pub center_mm: [f64; 2],
    pub radius_mm: f64,
}

impl Bed {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.center_mm[0];
        let dy = y - self.center_mm[1];
        (dx * dx + dy * dy).sqrt() <= self.radius_mm
    }
}

/// Ward room geometry. Field names match the `layout.json` keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WardLayout {
    pub room_mm: [f64; 2],
    pub beds: Vec<Bed>,
    pub primary_bed_id: u8,
    #[serde(default)]
    pub fixed_entities: BTreeMap<EntityRole, [f64; 2]>,
    pub image_px: [u32; 2],
    pub mm_per_px: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colors: Option<BTreeMap<EntityRole, String>>,
}

impl WardLayout {
    pub fn width_mm(&self) -> f64 {
        self.room_mm[0]
    }

    pub fn height_mm(&self) -> f64 {
        self.room_mm[1]
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ModelError> {
        let layout: WardLayout = serde_json::from_slice(bytes)
            .map_err(|e| ModelError::InvalidLayout(e.to_string()))?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidLayout(msg));
        let [w, h] = self.room_mm;
        if !(w > 0.0 && h > 0.0) {
            return bad(format!("room size {w}x{h} must be positive"));
        }
        if !(self.mm_per_px > 0.0) {
            return bad(format!("mm_per_px {} must be positive", self.mm_per_px));
        }
        let mut ids = std::collections::BTreeSet::new();
        for bed in &self.beds {
            if !(1..=4).contains(&bed.id) {
                return bad(format!("bed id {} outside 1..4", bed.id));
            }
            if !ids.insert(bed.id) {
                return bad(format!("duplicate bed id {}", bed.id));
            }
            let [x, y] = bed.center_mm;
            if !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y) {
                return bad(format!("bed {} center outside room", bed.id));
            }
            if !(bed.radius_mm > 0.0) {
                return bad(format!("bed {} radius must be positive", bed.id));
            }
        }
        let Some(primary) = self.primary_bed() else {
            return bad(format!("primary bed {} not declared", self.primary_bed_id));
        };
        for bed in self.secondary_beds() {
            let dx = bed.center_mm[0] - primary.center_mm[0];
            let dy = bed.center_mm[1] - primary.center_mm[1];
            if (dx * dx + dy * dy).sqrt() < bed.radius_mm + primary.radius_mm {
                return bad(format!("bed {} overlaps the primary bed", bed.id));
            }
        }
        for (role, [x, y]) in &self.fixed_entities {
            if role.is_trackable() {
                return bad(format!("{role} is trackable and cannot be fixed"));
            }
            if !(0.0..=w).contains(x) || !(0.0..=h).contains(y) {
                return bad(format!("{role} fixed position outside room"));
            }
        }
        self.color_map()?;
        Ok(())
    }

    pub fn primary_bed(&self) -> Option<&Bed> {
        self.beds.iter().find(|b| b.id == self.primary_bed_id)
    }

    pub fn secondary_beds(&self) -> impl Iterator<Item = &Bed> {
        self.beds.iter().filter(move |b| b.id != self.primary_bed_id)
    }

    pub fn color_map(&self) -> Result<ColorMap, ModelError> {
        ColorMap::with_overrides(self.colors.clone().unwrap_or_default())
    }

    pub fn clamp(&self, x: f64, y: f64) -> (f64, f64) {
        (
            x.clamp(0.0, self.room_mm[0]) + 0.0,
            y.clamp(0.0, self.room_mm[1]) + 0.0,
        )
    }

    /// A four-bed ward, 10 m by 8 m, with the primary bed in the lower right.
    pub fn standard() -> Self {
        let bed = |id, x, y, r| Bed {
            id,
            center_mm: [x, y],
            radius_mm: r,
        };
        WardLayout {
            room_mm: [10000.0, 8000.0],
            beds: vec![
                bed(1, 1800.0, 1800.0, 1000.0),
                bed(2, 1800.0, 6200.0, 1000.0),
                bed(3, 8200.0, 1800.0, 1000.0),
                bed(4, 7800.0, 6000.0, 1200.0),
            ],
            primary_bed_id: 4,
            fixed_entities: BTreeMap::from([
                (EntityRole::Patient, [7800.0, 6000.0]),
                (EntityRole::Relative, [9400.0, 7400.0]),
            ]),
            image_px: [1000, 800],
            mm_per_px: 10.0,
            colors: None,
        }
    }
}

/// Phase filter options on the debrief timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "ALL")]
    All,
    #[serde(rename = "P1_HANDOVER_ENDS")]
    HandoverEnds,
    #[serde(rename = "P2_SN_ENTER")]
    SecondaryNursesEnter,
    #[serde(rename = "P3_DOCTOR_ENTER")]
    DoctorEnters,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::All,
        Phase::HandoverEnds,
        Phase::SecondaryNursesEnter,
        Phase::DoctorEnters,
    ];

    /// Phases anchored by a timeline marker, in timeline order.
    pub const MARKED: [Phase; 3] = [
        Phase::HandoverEnds,
        Phase::SecondaryNursesEnter,
        Phase::DoctorEnters,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::All => "ALL",
            Phase::HandoverEnds => "P1_HANDOVER_ENDS",
            Phase::SecondaryNursesEnter => "P2_SN_ENTER",
            Phase::DoctorEnters => "P3_DOCTOR_ENTER",
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Phase::All => "all",
            Phase::HandoverEnds => "p1",
            Phase::SecondaryNursesEnter => "p2",
            Phase::DoctorEnters => "p3",
        }
    }

    fn marker_index(self) -> Option<usize> {
        Phase::MARKED.iter().position(|p| *p == self)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = ModelError;

    /// Accepts both the wire names and the short `all|p1|p2|p3` forms.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s || p.short_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownPhase(s.to_string()))
    }
}

/// Half-open interval `[from_ms, to_ms)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeWindow {
    pub from_ms: Millis,
    pub to_ms: Millis,
}

impl TimeWindow {
    pub fn new(from_ms: Millis, to_ms: Millis) -> Result<Self, ModelError> {
        if from_ms > to_ms {
            return Err(ModelError::InvalidWindow { from_ms, to_ms });
        }
        Ok(TimeWindow { from_ms, to_ms })
    }

    /// Validates the window against a session end.
    pub fn within(from_ms: Millis, to_ms: Millis, end_ms: Millis) -> Result<Self, ModelError> {
        let w = TimeWindow::new(from_ms, to_ms)?;
        if to_ms > end_ms {
            return Err(ModelError::WindowOutOfRange {
                from_ms,
                to_ms,
                end_ms,
            });
        }
        Ok(w)
    }

    pub fn len_ms(&self) -> Millis {
        self.to_ms - self.from_ms
    }

    pub fn is_empty(&self) -> bool {
        self.from_ms == self.to_ms
    }

    pub fn contains(&self, t: Millis) -> bool {
        self.from_ms <= t && t < self.to_ms
    }

    /// Length of the overlap with `[from, to)`.
    pub fn overlap_ms(&self, from: Millis, to: Millis) -> Millis {
        let lo = self.from_ms.max(from);
        let hi = self.to_ms.min(to);
        hi.saturating_sub(lo)
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.from_ms, self.to_ms)
    }
}

/// Phase markers of one session. The session always starts at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTimeline {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handover_ends_ms: Option<Millis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sn_enter_ms: Option<Millis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doctor_enter_ms: Option<Millis>,
    pub end_ms: Millis,
}

impl SessionTimeline {
    pub fn new(end_ms: Millis) -> Self {
        SessionTimeline {
            handover_ends_ms: None,
            sn_enter_ms: None,
            doctor_enter_ms: None,
            end_ms,
        }
    }

    pub fn with_markers(
        handover_ends_ms: Option<Millis>,
        sn_enter_ms: Option<Millis>,
        doctor_enter_ms: Option<Millis>,
        end_ms: Millis,
    ) -> Result<Self, ModelError> {
        let t = SessionTimeline {
            handover_ends_ms,
            sn_enter_ms,
            doctor_enter_ms,
            end_ms,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn markers(&self) -> [Option<Millis>; 3] {
        [self.handover_ends_ms, self.sn_enter_ms, self.doctor_enter_ms]
    }

    pub fn marker(&self, phase: Phase) -> Option<Millis> {
        phase.marker_index().and_then(|i| self.markers()[i])
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let markers = self.markers();
        let mut seen_unset = None;
        let mut last = 0;
        for (phase, marker) in Phase::MARKED.iter().zip(markers) {
            match marker {
                None => seen_unset = seen_unset.or(Some(*phase)),
                Some(t) => {
                    if let Some(unset) = seen_unset {
                        return Err(ModelError::TimelineOrder(format!(
                            "{phase} is set while earlier {unset} is not"
                        )));
                    }
                    if t < last {
                        return Err(ModelError::TimelineOrder(format!(
                            "{phase} at {t} precedes the previous marker at {last}"
                        )));
                    }
                    last = t;
                }
            }
        }
        if last > self.end_ms {
            return Err(ModelError::TimelineOrder(format!(
                "marker at {last} is after session end {}",
                self.end_ms
            )));
        }
        Ok(())
    }

    /// Returns a copy with `phase`'s marker set, validating the ordering.
    pub fn with_marker(&self, phase: Phase, t_ms: Millis) -> Result<Self, ModelError> {
        let mut next = *self;
        match phase {
            Phase::All => return Err(ModelError::UnknownPhase("ALL has no marker".into())),
            Phase::HandoverEnds => next.handover_ends_ms = Some(t_ms),
            Phase::SecondaryNursesEnter => next.sn_enter_ms = Some(t_ms),
            Phase::DoctorEnters => next.doctor_enter_ms = Some(t_ms),
        }
        next.validate()?;
        Ok(next)
    }

    pub fn whole(&self) -> TimeWindow {
        TimeWindow {
            from_ms: 0,
            to_ms: self.end_ms,
        }
    }

    /// The window before the first marker (only reachable as a custom window).
    pub fn pre_handover(&self) -> TimeWindow {
        TimeWindow {
            from_ms: 0,
            to_ms: self.handover_ends_ms.unwrap_or(self.end_ms),
        }
    }
}

/// Window selected by a phase filter: a named phase spans from its marker to
/// the next set marker, or to the session end.
pub fn resolve_phase_window(
    timeline: &SessionTimeline,
    phase: Phase,
) -> Result<TimeWindow, ModelError> {
    let Some(idx) = phase.marker_index() else {
        return Ok(timeline.whole());
    };
    let markers = timeline.markers();
    let from_ms = markers[idx].ok_or(ModelError::PhaseUnset(phase))?;
    let to_ms = markers[idx + 1..]
        .iter()
        .flatten()
        .next()
        .copied()
        .unwrap_or(timeline.end_ms);
    TimeWindow::within(from_ms, to_ms, timeline.end_ms)
}

/// One timestamped reading of a tracked tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionSample {
    pub t_ms: Millis,
    pub entity: EntityRole,
    pub x_mm: f64,
    pub y_mm: f64,
    /// Heading in degrees, 0 facing +x, counterclockwise positive.
    pub yaw_deg: f64,
}

/// Maps any finite angle into `[0, 360)`.
pub fn normalize_yaw(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0) + 0.0;
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Half-open interval of detected speech for one entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VoiceSegment {
    pub entity: EntityRole,
    pub from_ms: Millis,
    pub to_ms: Millis,
}

impl VoiceSegment {
    pub fn len_ms(&self) -> Millis {
        self.to_ms.saturating_sub(self.from_ms)
    }
}

/// The six communication behaviours used to code utterances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CommCode {
    Acknowledging,
    SharingInformation,
    Questioning,
    TaskAllocation,
    Handover,
    Escalation,
}

impl CommCode {
    pub const ALL: [CommCode; 6] = [
        CommCode::Acknowledging,
        CommCode::SharingInformation,
        CommCode::Questioning,
        CommCode::TaskAllocation,
        CommCode::Handover,
        CommCode::Escalation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CommCode::Acknowledging => "ACKNOWLEDGING",
            CommCode::SharingInformation => "SHARING_INFORMATION",
            CommCode::Questioning => "QUESTIONING",
            CommCode::TaskAllocation => "TASK_ALLOCATION",
            CommCode::Handover => "HANDOVER",
            CommCode::Escalation => "ESCALATION",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CommCode::Acknowledging => "acknowledging",
            CommCode::SharingInformation => "sharing information",
            CommCode::Questioning => "questioning",
            CommCode::TaskAllocation => "task allocation",
            CommCode::Handover => "handover",
            CommCode::Escalation => "escalation",
        }
    }
}

impl fmt::Display for CommCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommCode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        CommCode::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownCode(s.to_string()))
    }
}

/// A transcribed utterance with its communication code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedUtterance {
    pub entity: EntityRole,
    pub window: TimeWindow,
    pub text: String,
    pub code: CommCode,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn timeline() -> SessionTimeline {
        SessionTimeline::with_markers(Some(300_000), Some(600_000), Some(900_000), 1_500_000)
            .unwrap()
    }

    #[test]
    fn phase_windows() {
        let t = timeline();
        assert_eq!(
            resolve_phase_window(&t, Phase::All).unwrap(),
            TimeWindow::new(0, 1_500_000).unwrap()
        );
        assert_eq!(
            resolve_phase_window(&t, Phase::SecondaryNursesEnter).unwrap(),
            TimeWindow::new(600_000, 900_000).unwrap()
        );
        assert_eq!(
            resolve_phase_window(&t, Phase::DoctorEnters).unwrap(),
            TimeWindow::new(900_000, 1_500_000).unwrap()
        );
    }

    #[test]
    fn phase_window_skips_to_next_set_marker() {
        let t = SessionTimeline::with_markers(Some(300_000), None, None, 1_000_000).unwrap();
        assert_eq!(
            resolve_phase_window(&t, Phase::HandoverEnds).unwrap(),
            TimeWindow::new(300_000, 1_000_000).unwrap()
        );
        assert_eq!(
            resolve_phase_window(&t, Phase::SecondaryNursesEnter),
            Err(ModelError::PhaseUnset(Phase::SecondaryNursesEnter))
        );
    }

    #[test]
    fn timeline_rejects_gaps_and_disorder() {
        assert!(SessionTimeline::with_markers(None, Some(10), None, 100).is_err());
        assert!(SessionTimeline::with_markers(Some(50), Some(10), None, 100).is_err());
        assert!(SessionTimeline::with_markers(Some(50), Some(60), Some(200), 100).is_err());
        assert!(SessionTimeline::with_markers(Some(50), Some(50), Some(50), 100).is_ok());
    }

    #[test]
    fn default_colors() {
        assert_eq!(entity_color(EntityRole::Sn1).as_str(), "green");
        assert_eq!(entity_color(EntityRole::Pn1).as_str(), "red");
        assert_eq!(entity_color(EntityRole::Doctor).as_str(), "purple");
    }

    #[test]
    fn configured_colors_override_defaults() {
        let map = ColorMap::with_overrides(BTreeMap::from([(
            EntityRole::Doctor,
            "teal".to_string(),
        )]))
        .unwrap();
        assert_eq!(map.color(EntityRole::Doctor).as_str(), "teal");
        assert_eq!(map.color(EntityRole::Pn2).as_str(), "blue");
    }

    #[test]
    fn team_colors_must_stay_distinct() {
        let clash = BTreeMap::from([(EntityRole::Pn1, "blue".to_string())]);
        assert!(ColorMap::with_overrides(clash).is_err());
    }

    #[test]
    fn layout_json_keys() {
        let json = r#"{"room_mm":[10000,8000],
            "beds":[{"id":4,"center_mm":[7000,6000],"radius_mm":1200},
                    {"id":2,"center_mm":[2000,6000],"radius_mm":1000}],
            "primary_bed_id":4,
            "fixed_entities":{"PATIENT":[7000,6000]},
            "image_px":[1000,800],"mm_per_px":10,
            "colors":{"DOCTOR":"black"}}"#;
        let layout = WardLayout::from_json(json.as_bytes()).unwrap();
        assert_eq!(layout.primary_bed().unwrap().radius_mm, 1200.0);
        assert_eq!(
            layout.color_map().unwrap().color(EntityRole::Doctor).as_str(),
            "black"
        );
        let back = WardLayout::from_json(layout.to_json().as_bytes()).unwrap();
        assert_eq!(back, layout);
    }

    #[test]
    fn layout_rejects_primary_overlap() {
        let mut layout = WardLayout::standard();
        layout.beds[2].center_mm = [7800.0, 4500.0];
        assert!(matches!(
            layout.validate(),
            Err(ModelError::InvalidLayout(_))
        ));
        let mut layout = WardLayout::standard();
        layout.primary_bed_id = 3;
        layout.beds.retain(|b| b.id != 3);
        assert!(layout.validate().is_err());
        assert!(WardLayout::standard().validate().is_ok());
    }

    #[test]
    fn yaw_normalization() {
        assert_eq!(normalize_yaw(-90.0), 270.0);
        assert_eq!(normalize_yaw(720.5), 0.5);
        assert_eq!(normalize_yaw(-1e-20), 0.0);
    }

    #[test]
    fn names_round_trip() {
        for r in EntityRole::ALL {
            assert_eq!(r.as_str().parse::<EntityRole>().unwrap(), r);
            assert_eq!(serde_json::to_string(&r).unwrap(), format!("\"{r}\""));
        }
        for c in CommCode::ALL {
            assert_eq!(c.as_str().parse::<CommCode>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{c}\""));
        }
        for p in Phase::ALL {
            assert_eq!(p.as_str().parse::<Phase>().unwrap(), p);
            assert_eq!(p.short_name().parse::<Phase>().unwrap(), p);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn phase_windows_partition_session(
                mut marks in proptest::collection::vec(0u64..100_000, 0..=3),
                extra in 0u64..50_000,
            ) {
                marks.sort();
                let end = marks.last().copied().unwrap_or(0) + extra;
                let get = |i: usize| marks.get(i).copied();
                let t = SessionTimeline::with_markers(get(0), get(1), get(2), end).unwrap();
                let mut parts = vec![t.pre_handover()];
                for p in Phase::MARKED {
                    if t.marker(p).is_some() {
                        parts.push(resolve_phase_window(&t, p).unwrap());
                    }
                }
                let mut cursor = 0;
                for w in &parts {
                    prop_assert_eq!(w.from_ms, cursor);
                    cursor = w.to_ms;
                }
                prop_assert_eq!(cursor, end);
                let total: u64 = parts.iter().map(|w| w.len_ms()).sum();
                prop_assert_eq!(total, resolve_phase_window(&t, Phase::All).unwrap().len_ms());
            }
        }
    }
}
