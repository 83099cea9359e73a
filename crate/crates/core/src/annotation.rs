//! Live phase and action tagging. The annotation log is append-only and is
//! the source of the session timeline markers.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{Millis, ModelError, Phase, SessionTimeline, TimeWindow};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnnotationError {
    #[error("phase tag out of order: {0}")]
    OutOfOrder(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("duplicate action id `{0}` in catalog")]
    DuplicateAction(String),
    #[error("{0} cannot be tagged")]
    NotTaggable(Phase),
    #[error("t_ms {t_ms} is after the session end {end_ms}")]
    OutOfRange { t_ms: Millis, end_ms: Millis },
    #[error("annotations line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionEntry {
    pub action_id: String,
    pub label: String,
    pub phase_hint: Phase,
}

/// Predefined actions the observer can tag, loaded per scenario.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ActionCatalog {
    entries: Vec<ActionEntry>,
}

impl ActionCatalog {
    pub fn new(entries: Vec<ActionEntry>) -> Result<Self, AnnotationError> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.action_id.as_str()) {
                return Err(AnnotationError::DuplicateAction(e.action_id.clone()));
            }
        }
        Ok(ActionCatalog { entries })
    }

    pub fn entries(&self) -> &[ActionEntry] {
        &self.entries
    }

    pub fn get(&self, action_id: &str) -> Option<&ActionEntry> {
        self.entries.iter().find(|e| e.action_id == action_id)
    }

    /// Expected actions of the deteriorating-patient ward scenario.
    pub fn ward_default() -> Self {
        let entry = |id: &str, label: &str, phase_hint| ActionEntry {
            action_id: id.to_string(),
            label: label.to_string(),
            phase_hint,
        };
        ActionCatalog::new(vec![
            entry("obs_bed4", "Observations on bed 4", Phase::HandoverEnds),
            entry("ecg", "ECG performed", Phase::SecondaryNursesEnter),
            entry("oxygen", "Oxygen applied", Phase::SecondaryNursesEnter),
            entry("met_call", "MET call placed", Phase::SecondaryNursesEnter),
            entry("isbar_doctor", "ISBAR handover to doctor", Phase::DoctorEnters),
            entry("relative_reassured", "Relative reassured", Phase::DoctorEnters),
        ])
        .expect("default catalog ids are unique")
    }
}

impl<'de> Deserialize<'de> for ActionCatalog {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let entries = Vec::<ActionEntry>::deserialize(d)?;
        ActionCatalog::new(entries).map_err(serde::de::Error::custom)
    }
}

/// Contents of `scenario.json`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub actions: ActionCatalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AnnotationKind {
    PhaseTag,
    ActionTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub id: u64,
    pub t_ms: Millis,
    pub kind: AnnotationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default)]
    pub favorite: bool,
    pub author: String,
    /// Earlier phase tag this record corrects.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct AnnotationLog {
    catalog: ActionCatalog,
    records: Vec<Annotation>,
    markers: [Option<Millis>; 3],
    marker_ids: [Option<u64>; 3],
    end_ms: Option<Millis>,
}

impl AnnotationLog {
    pub fn new(catalog: ActionCatalog) -> Self {
        AnnotationLog {
            catalog,
            ..Default::default()
        }
    }

    /// Rebuilds a log (and its markers) from stored records in append order.
    pub fn replay(catalog: ActionCatalog, records: Vec<Annotation>) -> Result<Self, AnnotationError> {
        let mut log = AnnotationLog::new(catalog);
        for rec in records {
            match rec.kind {
                AnnotationKind::PhaseTag => {
                    let phase = rec.phase.ok_or(AnnotationError::NotTaggable(Phase::All))?;
                    log.check_phase(phase, rec.t_ms)?;
                    let idx = marker_index(phase)?;
                    log.markers[idx] = Some(rec.t_ms);
                    log.marker_ids[idx] = Some(rec.id);
                }
                AnnotationKind::ActionTag => {
                    let id = rec.action_id.as_deref().unwrap_or_default();
                    if log.catalog.get(id).is_none() {
                        return Err(AnnotationError::UnknownAction(id.to_string()));
                    }
                }
            }
            log.records.push(rec);
        }
        Ok(log)
    }

    /// Bounds later tags by the session end.
    pub fn set_end(&mut self, end_ms: Millis) {
        self.end_ms = Some(end_ms);
    }

    pub fn catalog(&self) -> &ActionCatalog {
        &self.catalog
    }

    pub fn records(&self) -> &[Annotation] {
        &self.records
    }

    pub fn markers(&self) -> [Option<Millis>; 3] {
        self.markers
    }

    /// Timeline with the tagged markers and the given end.
    pub fn timeline(&self, end_ms: Millis) -> Result<SessionTimeline, ModelError> {
        let [h, s, d] = self.markers;
        SessionTimeline::with_markers(h, s, d, end_ms)
    }

    fn provisional_end(&self) -> Millis {
        self.end_ms
            .or_else(|| self.markers.iter().flatten().max().copied())
            .unwrap_or(0)
    }

    fn next_id(&self) -> u64 {
        self.records.iter().map(|r| r.id + 1).max().unwrap_or(1)
    }

    fn check_time(&self, t_ms: Millis) -> Result<(), AnnotationError> {
        match self.end_ms {
            Some(end_ms) if t_ms > end_ms => Err(AnnotationError::OutOfRange { t_ms, end_ms }),
            _ => Ok(()),
        }
    }

    fn check_phase(&self, phase: Phase, t_ms: Millis) -> Result<(), AnnotationError> {
        self.check_time(t_ms)?;
        let [h, s, d] = self.markers;
        let open = SessionTimeline {
            handover_ends_ms: h,
            sn_enter_ms: s,
            doctor_enter_ms: d,
            end_ms: Millis::MAX,
        };
        open.with_marker(phase, t_ms).map(|_| ()).map_err(|e| match e {
            ModelError::TimelineOrder(msg) => AnnotationError::OutOfOrder(msg),
            _ => AnnotationError::NotTaggable(phase),
        })
    }

    /// Sets (or corrects) a phase marker. A retag appends a new record that
    /// supersedes the previous one.
    pub fn tag_phase(
        &mut self,
        phase: Phase,
        t_ms: Millis,
        author: &str,
        note: Option<String>,
    ) -> Result<(Annotation, SessionTimeline), AnnotationError> {
        let idx = marker_index(phase)?;
        self.check_phase(phase, t_ms)?;
        let correction = self.markers[idx]
            .map(|old| format!("correction: {phase} moved from {old} to {t_ms}"));
        let note = match (note, correction) {
            (Some(n), Some(c)) => Some(format!("{n} ({c})")),
            (n, c) => n.or(c),
        };
        let rec = Annotation {
            id: self.next_id(),
            t_ms,
            kind: AnnotationKind::PhaseTag,
            phase: Some(phase),
            action_id: None,
            note,
            favorite: false,
            author: author.to_string(),
            supersedes: self.marker_ids[idx],
        };
        self.markers[idx] = Some(t_ms);
        self.marker_ids[idx] = Some(rec.id);
        self.records.push(rec.clone());
        let timeline = self
            .timeline(self.provisional_end())
            .expect("markers validated before insertion");
        Ok((rec, timeline))
    }

    pub fn tag_action(
        &mut self,
        action_id: &str,
        t_ms: Millis,
        author: &str,
        note: Option<String>,
        favorite: bool,
    ) -> Result<Annotation, AnnotationError> {
        if self.catalog.get(action_id).is_none() {
            return Err(AnnotationError::UnknownAction(action_id.to_string()));
        }
        self.check_time(t_ms)?;
        let rec = Annotation {
            id: self.next_id(),
            t_ms,
            kind: AnnotationKind::ActionTag,
            phase: None,
            action_id: Some(action_id.to_string()),
            note,
            favorite,
            author: author.to_string(),
            supersedes: None,
        };
        self.records.push(rec.clone());
        Ok(rec)
    }

    /// Records in time order, optionally restricted to a window and to
    /// favorites.
    pub fn list(&self, window: Option<&TimeWindow>, favorites_only: bool) -> Vec<&Annotation> {
        let mut out: Vec<&Annotation> = self
            .records
            .iter()
            .filter(|a| window.is_none_or(|w| w.contains(a.t_ms)))
            .filter(|a| !favorites_only || a.favorite)
            .collect();
        out.sort_by_key(|a| (a.t_ms, a.id));
        out
    }

    pub fn to_jsonl(&self) -> String {
        self.records.iter().map(annotation_line).collect()
    }

    pub fn parse_jsonl(text: &str) -> Result<Vec<Annotation>, AnnotationError> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| AnnotationError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect()
    }
}

pub fn annotation_line(a: &Annotation) -> String {
    let mut line = serde_json::to_string(a).expect("annotation serializes");
    line.push('\n');
    line
}

fn marker_index(phase: Phase) -> Result<usize, AnnotationError> {
    Phase::MARKED
        .iter()
        .position(|p| *p == phase)
        .ok_or(AnnotationError::NotTaggable(phase))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log() -> AnnotationLog {
        AnnotationLog::new(ActionCatalog::ward_default())
    }

    #[test]
    fn phases_in_order() {
        let mut log = log();
        log.tag_phase(Phase::HandoverEnds, 300_000, "edu", None).unwrap();
        let (rec, timeline) = log
            .tag_phase(Phase::SecondaryNursesEnter, 600_000, "edu", None)
            .unwrap();
        assert_eq!(timeline.sn_enter_ms, Some(600_000));
        assert_eq!(rec.kind, AnnotationKind::PhaseTag);
    }

    #[test]
    fn out_of_order_phase() {
        let mut log = log();
        log.tag_phase(Phase::HandoverEnds, 100_000, "edu", None).unwrap();
        log.tag_phase(Phase::SecondaryNursesEnter, 600_000, "edu", None).unwrap();
        assert!(matches!(
            log.tag_phase(Phase::DoctorEnters, 200_000, "edu", None),
            Err(AnnotationError::OutOfOrder(_))
        ));
        // Skipping an untagged earlier phase is also out of order.
        let mut fresh = AnnotationLog::new(ActionCatalog::ward_default());
        assert!(matches!(
            fresh.tag_phase(Phase::DoctorEnters, 200_000, "edu", None),
            Err(AnnotationError::OutOfOrder(_))
        ));
        assert!(matches!(
            fresh.tag_phase(Phase::All, 1, "edu", None),
            Err(AnnotationError::NotTaggable(Phase::All))
        ));
    }

    #[test]
    fn retag_appends_correction_and_replays() {
        let mut log = log();
        log.tag_phase(Phase::HandoverEnds, 300_000, "edu", None).unwrap();
        let (first, _) = log
            .tag_phase(Phase::SecondaryNursesEnter, 600_000, "edu", None)
            .unwrap();
        let (fix, timeline) = log
            .tag_phase(Phase::SecondaryNursesEnter, 580_000, "edu", None)
            .unwrap();
        assert_eq!(timeline.sn_enter_ms, Some(580_000));
        assert_eq!(fix.supersedes, Some(first.id));
        assert!(fix.note.as_deref().unwrap().contains("from 600000 to 580000"));
        assert_eq!(log.records().len(), 3);

        let stored = AnnotationLog::parse_jsonl(&log.to_jsonl()).unwrap();
        let replayed = AnnotationLog::replay(ActionCatalog::ward_default(), stored).unwrap();
        assert_eq!(replayed.markers(), log.markers());
        assert_eq!(replayed.records(), log.records());
    }

    #[test]
    fn actions_and_favorites() {
        let mut log = log();
        let a = log
            .tag_action("ecg", 450_000, "edu", Some("lead placement".into()), false)
            .unwrap();
        assert_eq!(a.note.as_deref(), Some("lead placement"));
        assert!(matches!(
            log.tag_action("dance", 1, "edu", None, false),
            Err(AnnotationError::UnknownAction(_))
        ));
        log.tag_action("oxygen", 500_000, "edu", None, true).unwrap();
        log.tag_action("met_call", 520_000, "edu", None, false).unwrap();
        let favs = log.list(None, true);
        let oracle: Vec<_> = log.records().iter().filter(|r| r.favorite).collect();
        assert_eq!(favs, oracle);
        assert_eq!(favs.len(), 1);
        assert_eq!(favs[0].action_id.as_deref(), Some("oxygen"));
    }

    #[test]
    fn listing_filters_by_window() {
        let mut log = log();
        assert!(log.list(None, false).is_empty());
        log.tag_action("ecg", 400_000, "edu", None, true).unwrap();
        log.tag_action("obs_bed4", 100_000, "edu", None, false).unwrap();
        let w = TimeWindow::new(0, 300_000).unwrap();
        let listed = log.list(Some(&w), false);
        assert_eq!(listed.len(), 1);
        assert_eq!(listed[0].t_ms, 100_000);
        let all: Vec<_> = log.list(None, false).iter().map(|a| a.t_ms).collect();
        assert_eq!(all, vec![100_000, 400_000]);
    }

    #[test]
    fn end_bound() {
        let mut log = log();
        log.set_end(1000);
        assert!(matches!(
            log.tag_action("ecg", 1001, "edu", None, false),
            Err(AnnotationError::OutOfRange { .. })
        ));
    }

    #[test]
    fn catalog_rejects_duplicates() {
        let json = r#"{"actions":[{"action_id":"a","label":"A","phase_hint":"ALL"},
                                  {"action_id":"a","label":"B","phase_hint":"ALL"}]}"#;
        assert!(serde_json::from_str::<ScenarioConfig>(json).is_err());
    }
}
