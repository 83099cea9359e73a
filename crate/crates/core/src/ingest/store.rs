//! Directory-backed session store.
//!
//! ```text
//! <root>/<session_id>/
//!   manifest.json      status, markers, stream inventory, counters
//!   layout.json
//!   scenario.json      action catalog
//!   positions.csv
//!   voice.jsonl
//!   utterances.jsonl
//!   annotations.jsonl  append-only
//!   interactions.jsonl append-only, written during the debrief
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::audio::{parse_wav, run_vad, VadParams};
use super::positions::{parse_positions, write_positions};
use super::utterances::{parse_utterances, write_utterances};
use super::voice::{normalize_all, parse_voice, write_voice};
use super::{shift, IngestError};
use crate::annotation::{annotation_line, Annotation, AnnotationLog, ScenarioConfig};
use crate::interaction::{RuleCoder, UtteranceCoder};
use crate::model::{
    CodedUtterance, EntityRole, Millis, Phase, PositionSample, SessionTimeline, TimeWindow,
    VoiceSegment, WardLayout,
};
use crate::session::{Session, TICK_MS};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LAYOUT_FILE: &str = "layout.json";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const POSITIONS_FILE: &str = "positions.csv";
pub const VOICE_FILE: &str = "voice.jsonl";
pub const UTTERANCES_FILE: &str = "utterances.jsonl";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const INTERACTIONS_FILE: &str = "interactions.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Recording,
    Sealed,
}

/// Timeline as stored in the manifest; the end is unknown while recording.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestTimeline {
    #[serde(default)]
    pub handover_ends_ms: Option<Millis>,
    #[serde(default)]
    pub sn_enter_ms: Option<Millis>,
    #[serde(default)]
    pub doctor_enter_ms: Option<Millis>,
    #[serde(default)]
    pub end_ms: Option<Millis>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamInventory {
    pub kind: String,
    pub file: String,
    pub rows: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamCounters {
    pub positions_clamped: usize,
    pub positions_dropped: usize,
    pub positions_truncated: usize,
    pub voice_truncated: usize,
    pub utterances_truncated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub session_id: String,
    pub status: SessionStatus,
    pub timeline: ManifestTimeline,
    #[serde(default)]
    pub cast: Vec<EntityRole>,
    #[serde(default)]
    pub streams: Vec<StreamInventory>,
    #[serde(default)]
    pub counters: StreamCounters,
    #[serde(default)]
    pub clock_offsets_ms: BTreeMap<String, i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub end_ms: Millis,
    pub streams: Vec<StreamInventory>,
    pub counters: StreamCounters,
    pub annotations: usize,
}

/// Single-writer handle on one session directory.
#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    manifest: Manifest,
    layout: WardLayout,
    annotations: AnnotationLog,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_opt(path: &Path) -> Result<Option<Vec<u8>>, IngestError> {
    match fs::read(path) {
        Ok(bytes) => Ok(Some(bytes)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path)(e)),
    }
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), IngestError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn valid_session_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        && !id.starts_with('.')
}

impl SessionStore {
    /// Creates a new recording session under `root`.
    pub fn create(
        root: &Path,
        session_id: &str,
        layout: WardLayout,
        scenario: Option<ScenarioConfig>,
    ) -> Result<Self, IngestError> {
        if !valid_session_id(session_id) {
            return Err(IngestError::InvalidSessionId(session_id.to_string()));
        }
        layout.validate()?;
        let dir = root.join(session_id);
        if dir.join(MANIFEST_FILE).exists() {
            return Err(IngestError::AlreadyExists(session_id.to_string()));
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        write_atomic(&dir.join(LAYOUT_FILE), layout.to_json().as_bytes())?;
        let scenario = scenario.unwrap_or_else(|| ScenarioConfig {
            name: None,
            actions: crate::annotation::ActionCatalog::ward_default(),
        });
        let scenario_json = serde_json::to_vec_pretty(&scenario).expect("scenario serializes");
        write_atomic(&dir.join(SCENARIO_FILE), &scenario_json)?;
        let manifest = Manifest {
            session_id: session_id.to_string(),
            status: SessionStatus::Recording,
            timeline: ManifestTimeline::default(),
            cast: Vec::new(),
            streams: Vec::new(),
            counters: StreamCounters::default(),
            clock_offsets_ms: BTreeMap::new(),
        };
        let store = SessionStore {
            dir,
            manifest,
            layout,
            annotations: AnnotationLog::new(scenario.actions),
        };
        store.write_manifest()?;
        Ok(store)
    }

    pub fn open_in(root: &Path, session_id: &str) -> Result<Self, IngestError> {
        if !valid_session_id(session_id) {
            return Err(IngestError::InvalidSessionId(session_id.to_string()));
        }
        Self::open(&root.join(session_id))
    }

    /// Opens a session directory. A raw directory without a manifest is
    /// adopted as a recording session named after the directory.
    pub fn open(dir: &Path) -> Result<Self, IngestError> {
        let layout_path = dir.join(LAYOUT_FILE);
        let layout_bytes = fs::read(&layout_path).map_err(io_err(&layout_path))?;
        let layout = WardLayout::from_json(&layout_bytes)?;
        let scenario_path = dir.join(SCENARIO_FILE);
        let scenario: ScenarioConfig = match read_opt(&scenario_path)? {
            Some(bytes) => serde_json::from_slice(&bytes).map_err(|source| IngestError::Json {
                path: scenario_path.display().to_string(),
                source,
            })?,
            None => ScenarioConfig {
                name: None,
                actions: crate::annotation::ActionCatalog::ward_default(),
            },
        };
        let annotations_path = dir.join(ANNOTATIONS_FILE);
        let records = match read_opt(&annotations_path)? {
            Some(bytes) => AnnotationLog::parse_jsonl(&String::from_utf8_lossy(&bytes))?,
            None => Vec::new(),
        };
        let mut annotations = AnnotationLog::replay(scenario.actions, records)?;

        let manifest_path = dir.join(MANIFEST_FILE);
        let (manifest, adopted) = match read_opt(&manifest_path)? {
            Some(bytes) => (
                serde_json::from_slice::<Manifest>(&bytes).map_err(|source| IngestError::Json {
                    path: manifest_path.display().to_string(),
                    source,
                })?,
                false,
            ),
            None => {
                let name = dir
                    .file_name()
                    .and_then(|n| n.to_str())
                    .filter(|n| valid_session_id(n))
                    .unwrap_or("session")
                    .to_string();
                let manifest = Manifest {
                    session_id: name,
                    status: SessionStatus::Recording,
                    timeline: ManifestTimeline::default(),
                    cast: Vec::new(),
                    streams: Vec::new(),
                    counters: StreamCounters::default(),
                    clock_offsets_ms: BTreeMap::new(),
                };
                (manifest, true)
            }
        };
        if let (SessionStatus::Sealed, Some(end)) = (manifest.status, manifest.timeline.end_ms) {
            annotations.set_end(end);
        }
        let mut store = SessionStore {
            dir: dir.to_path_buf(),
            manifest,
            layout,
            annotations,
        };
        if adopted {
            store.sync_timeline_markers();
            store.refresh_inventory()?;
            store.write_manifest()?;
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Where debrief interactions for this session are logged.
    pub fn interactions_path(&self) -> PathBuf {
        self.dir.join(INTERACTIONS_FILE)
    }

    pub fn session_id(&self) -> &str {
        &self.manifest.session_id
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn layout(&self) -> &WardLayout {
        &self.layout
    }

    pub fn status(&self) -> SessionStatus {
        self.manifest.status
    }

    pub fn annotations(&self) -> &AnnotationLog {
        &self.annotations
    }

    fn ensure_recording(&self) -> Result<(), IngestError> {
        match self.manifest.status {
            SessionStatus::Recording => Ok(()),
            SessionStatus::Sealed => Err(IngestError::AlreadySealed(self.session_id().to_string())),
        }
    }

    fn write_manifest(&self) -> Result<(), IngestError> {
        let mut json = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        json.push(b'\n');
        write_atomic(&self.dir.join(MANIFEST_FILE), &json)
    }

    fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub fn read_positions(&self) -> Result<Vec<PositionSample>, IngestError> {
        match read_opt(&self.path(POSITIONS_FILE))? {
            Some(bytes) => Ok(parse_positions(&bytes, 0, &self.layout)?.samples),
            None => Ok(Vec::new()),
        }
    }

    pub fn read_voice(&self) -> Result<BTreeMap<EntityRole, Vec<VoiceSegment>>, IngestError> {
        match read_opt(&self.path(VOICE_FILE))? {
            Some(bytes) => parse_voice(&bytes, 0),
            None => Ok(BTreeMap::new()),
        }
    }

    pub fn read_utterances(&self) -> Result<Vec<CodedUtterance>, IngestError> {
        match read_opt(&self.path(UTTERANCES_FILE))? {
            Some(bytes) => parse_utterances(&bytes, 0, &RuleCoder),
            None => Ok(Vec::new()),
        }
    }

    fn refresh_inventory(&mut self) -> Result<(), IngestError> {
        let mut streams = Vec::new();
        let mut cast: std::collections::BTreeSet<EntityRole> =
            self.manifest.cast.iter().copied().collect();
        let positions = self.read_positions()?;
        if self.path(POSITIONS_FILE).exists() {
            cast.extend(positions.iter().map(|p| p.entity));
            streams.push(StreamInventory {
                kind: "positions".into(),
                file: POSITIONS_FILE.into(),
                rows: positions.len(),
            });
        }
        if self.path(VOICE_FILE).exists() {
            let voice = self.read_voice()?;
            cast.extend(voice.keys().copied());
            streams.push(StreamInventory {
                kind: "voice".into(),
                file: VOICE_FILE.into(),
                rows: voice.values().map(Vec::len).sum(),
            });
        }
        if self.path(UTTERANCES_FILE).exists() {
            let utterances = self.read_utterances()?;
            cast.extend(utterances.iter().map(|u| u.entity));
            streams.push(StreamInventory {
                kind: "utterances".into(),
                file: UTTERANCES_FILE.into(),
                rows: utterances.len(),
            });
        }
        self.manifest.streams = streams;
        self.manifest.cast = cast.into_iter().collect();
        Ok(())
    }

    fn note_offset(&mut self, kind: &str, offset: i64) {
        if offset != 0 {
            self.manifest.clock_offsets_ms.insert(kind.to_string(), offset);
        }
    }

    /// Declares participants regardless of whether they produce streams.
    pub fn declare_cast(&mut self, cast: &[EntityRole]) -> Result<(), IngestError> {
        self.ensure_recording()?;
        self.manifest.cast.extend_from_slice(cast);
        self.manifest.cast.sort();
        self.manifest.cast.dedup();
        self.write_manifest()
    }

    /// Sets the planned session end recorded in the manifest.
    pub fn set_planned_end(&mut self, end_ms: Millis) -> Result<(), IngestError> {
        self.ensure_recording()?;
        self.manifest.timeline.end_ms = Some(end_ms);
        self.write_manifest()
    }

    pub fn ingest_positions(&mut self, bytes: &[u8], clock_offset_ms: i64) -> Result<usize, IngestError> {
        self.ensure_recording()?;
        let parsed = parse_positions(bytes, clock_offset_ms, &self.layout)?;
        let mut all = self.read_positions()?;
        let added = parsed.samples.len();
        all.extend(parsed.samples);
        all.sort_by_key(|s| s.t_ms);
        write_atomic(&self.path(POSITIONS_FILE), write_positions(&all).as_bytes())?;
        self.manifest.counters.positions_clamped += parsed.clamped;
        self.manifest.counters.positions_dropped += parsed.dropped;
        self.note_offset("positions", clock_offset_ms);
        self.refresh_inventory()?;
        self.write_manifest()?;
        Ok(added)
    }

    pub fn ingest_voice(&mut self, bytes: &[u8], clock_offset_ms: i64) -> Result<usize, IngestError> {
        self.ensure_recording()?;
        let parsed = parse_voice(bytes, clock_offset_ms)?;
        let added = parsed.values().map(Vec::len).sum();
        self.merge_voice(parsed.into_values().flatten().collect())?;
        self.note_offset("voice", clock_offset_ms);
        self.write_manifest()?;
        Ok(added)
    }

    /// Runs the detector over a WAV upload and stores the resulting segments.
    pub fn ingest_audio(
        &mut self,
        entity: EntityRole,
        wav: &[u8],
        clock_offset_ms: i64,
        params: &VadParams,
    ) -> Result<usize, IngestError> {
        self.ensure_recording()?;
        let audio = parse_wav(entity, wav)?;
        let segments: Vec<VoiceSegment> = run_vad(&audio, params)?
            .into_iter()
            .filter_map(|s| {
                let to_ms = shift(s.to_ms as i64, clock_offset_ms).filter(|t| *t > 0)?;
                let from_ms = shift(s.from_ms as i64, clock_offset_ms).unwrap_or(0);
                Some(VoiceSegment {
                    entity,
                    from_ms,
                    to_ms,
                })
            })
            .collect();
        let added = segments.len();
        self.merge_voice(segments)?;
        self.note_offset(&format!("audio:{entity}"), clock_offset_ms);
        self.write_manifest()?;
        Ok(added)
    }

    fn merge_voice(&mut self, segments: Vec<VoiceSegment>) -> Result<(), IngestError> {
        let mut all: Vec<VoiceSegment> = self.read_voice()?.into_values().flatten().collect();
        all.extend(segments);
        let normalized = normalize_all(all)?;
        write_atomic(&self.path(VOICE_FILE), write_voice(&normalized).as_bytes())?;
        self.refresh_inventory()
    }

    pub fn ingest_utterances(
        &mut self,
        bytes: &[u8],
        clock_offset_ms: i64,
        coder: &dyn UtteranceCoder,
    ) -> Result<usize, IngestError> {
        self.ensure_recording()?;
        let parsed = parse_utterances(bytes, clock_offset_ms, coder)?;
        let added = parsed.len();
        let mut all = self.read_utterances()?;
        all.extend(parsed);
        all.sort_by_key(|u| u.window.from_ms);
        write_atomic(&self.path(UTTERANCES_FILE), write_utterances(&all).as_bytes())?;
        self.note_offset("utterances", clock_offset_ms);
        self.refresh_inventory()?;
        self.write_manifest()?;
        Ok(added)
    }

    fn append_annotation(&self, rec: &Annotation) -> Result<(), IngestError> {
        let path = self.path(ANNOTATIONS_FILE);
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        file.write_all(annotation_line(rec).as_bytes())
            .map_err(io_err(&path))
    }

    fn sync_timeline_markers(&mut self) {
        let [h, s, d] = self.annotations.markers();
        self.manifest.timeline.handover_ends_ms = h;
        self.manifest.timeline.sn_enter_ms = s;
        self.manifest.timeline.doctor_enter_ms = d;
    }

    pub fn tag_phase(
        &mut self,
        phase: Phase,
        t_ms: Millis,
        author: &str,
        note: Option<String>,
    ) -> Result<(Annotation, SessionTimeline), IngestError> {
        self.ensure_recording()?;
        let (rec, timeline) = self.annotations.tag_phase(phase, t_ms, author, note)?;
        self.append_annotation(&rec)?;
        self.sync_timeline_markers();
        self.write_manifest()?;
        Ok((rec, timeline))
    }

    pub fn tag_action(
        &mut self,
        action_id: &str,
        t_ms: Millis,
        author: &str,
        note: Option<String>,
        favorite: bool,
    ) -> Result<Annotation, IngestError> {
        let rec = self
            .annotations
            .tag_action(action_id, t_ms, author, note, favorite)?;
        self.append_annotation(&rec)?;
        Ok(rec)
    }

    /// End implied by the data: one past the latest timestamp, rounded up to
    /// a whole tick.
    pub fn inferred_end_ms(&self) -> Result<Millis, IngestError> {
        let mut end = 0;
        end = end.max(self.read_positions()?.iter().map(|p| p.t_ms + 1).max().unwrap_or(0));
        end = end.max(self.read_voice()?.values().flatten().map(|s| s.to_ms).max().unwrap_or(0));
        end = end.max(
            self.read_utterances()?
                .iter()
                .map(|u| u.window.to_ms)
                .max()
                .unwrap_or(0),
        );
        end = end.max(self.annotations.records().iter().map(|a| a.t_ms).max().unwrap_or(0));
        Ok(end.div_ceil(TICK_MS) * TICK_MS)
    }

    /// Timeline from the tagged markers and the planned (or inferred) end.
    pub fn proposed_timeline(&self) -> Result<SessionTimeline, IngestError> {
        let end = match self.manifest.timeline.end_ms {
            Some(end) => end,
            None => self.inferred_end_ms()?,
        };
        Ok(self.annotations.timeline(end)?)
    }

    /// Truncates every stream to the timeline end and closes the session.
    pub fn seal(&mut self, timeline: &SessionTimeline) -> Result<SessionSummary, IngestError> {
        self.ensure_recording()?;
        timeline.validate()?;
        let end = timeline.end_ms;

        let mut positions = self.read_positions()?;
        let before = positions.len();
        positions.retain(|p| p.t_ms <= end);
        let truncated_positions = before - positions.len();
        if self.path(POSITIONS_FILE).exists() {
            write_atomic(&self.path(POSITIONS_FILE), write_positions(&positions).as_bytes())?;
        }

        let mut voice_truncated = 0;
        let voice: Vec<VoiceSegment> = self
            .read_voice()?
            .into_values()
            .flatten()
            .filter_map(|mut s| {
                if s.from_ms >= end {
                    voice_truncated += 1;
                    return None;
                }
                if s.to_ms > end {
                    voice_truncated += 1;
                    s.to_ms = end;
                }
                Some(s)
            })
            .collect();
        if self.path(VOICE_FILE).exists() {
            let voice = normalize_all(voice)?;
            write_atomic(&self.path(VOICE_FILE), write_voice(&voice).as_bytes())?;
        }

        let mut utterances_truncated = 0;
        let utterances: Vec<CodedUtterance> = self
            .read_utterances()?
            .into_iter()
            .filter_map(|mut u| {
                if u.window.from_ms >= end {
                    utterances_truncated += 1;
                    return None;
                }
                if u.window.to_ms > end {
                    utterances_truncated += 1;
                    u.window = TimeWindow {
                        from_ms: u.window.from_ms,
                        to_ms: end,
                    };
                }
                Some(u)
            })
            .collect();
        if self.path(UTTERANCES_FILE).exists() {
            write_atomic(&self.path(UTTERANCES_FILE), write_utterances(&utterances).as_bytes())?;
        }

        self.manifest.counters.positions_truncated += truncated_positions;
        self.manifest.counters.voice_truncated += voice_truncated;
        self.manifest.counters.utterances_truncated += utterances_truncated;
        self.manifest.timeline = ManifestTimeline {
            handover_ends_ms: timeline.handover_ends_ms,
            sn_enter_ms: timeline.sn_enter_ms,
            doctor_enter_ms: timeline.doctor_enter_ms,
            end_ms: Some(end),
        };
        self.refresh_inventory()?;
        self.manifest.status = SessionStatus::Sealed;
        self.annotations.set_end(end);
        self.write_manifest()?;
        Ok(SessionSummary {
            session_id: self.manifest.session_id.clone(),
            end_ms: end,
            streams: self.manifest.streams.clone(),
            counters: self.manifest.counters,
            annotations: self.annotations.records().len(),
        })
    }

    fn sealed_timeline(&self) -> Result<SessionTimeline, IngestError> {
        let t = self.manifest.timeline;
        let end = t
            .end_ms
            .ok_or_else(|| IngestError::NotSealed(self.session_id().to_string()))?;
        Ok(SessionTimeline::with_markers(
            t.handover_ends_ms,
            t.sn_enter_ms,
            t.doctor_enter_ms,
            end,
        )?)
    }

    fn build_session(&self, timeline: SessionTimeline) -> Result<Session, IngestError> {
        Ok(Session::new(self.session_id(), self.layout.clone(), timeline)
            .with_cast(&self.manifest.cast)
            .with_positions(self.read_positions()?)
            .with_voice(self.read_voice()?)
            .with_utterances(self.read_utterances()?))
    }

    /// The sealed session.
    pub fn load(&self) -> Result<Session, IngestError> {
        if self.manifest.status != SessionStatus::Sealed {
            return Err(IngestError::NotSealed(self.session_id().to_string()));
        }
        self.build_session(self.sealed_timeline()?)
    }

    /// Sealed data, or an explicit live capture of a recording session.
    pub fn snapshot(&self) -> Result<Session, IngestError> {
        match self.manifest.status {
            SessionStatus::Sealed => self.load(),
            SessionStatus::Recording => {
                let end = self.inferred_end_ms()?;
                let markers_end = self.annotations.markers().iter().flatten().max().copied();
                let end = end.max(markers_end.unwrap_or(0));
                Ok(self.build_session(self.annotations.timeline(end)?)?.live())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const POSITIONS: &str = "t_ms,entity,x_mm,y_mm,yaw_deg\n0,PN1,7800,6000,0\n100,PN2,7700,6000,180\n90000,PN1,7800,6000,0\n";
    const VOICE: &str = "{\"entity\":\"PN1\",\"from_ms\":0,\"to_ms\":1500}\n";
    const UTTERANCES: &str = "{\"entity\":\"PN1\",\"from_ms\":0,\"to_ms\":1500,\"text\":\"Okay.\"}\n";

    fn recording(root: &Path) -> SessionStore {
        let mut store = SessionStore::create(root, "s1", WardLayout::standard(), None).unwrap();
        store.ingest_positions(POSITIONS.as_bytes(), 0).unwrap();
        store.ingest_voice(VOICE.as_bytes(), 0).unwrap();
        store.ingest_utterances(UTTERANCES.as_bytes(), 0, &RuleCoder).unwrap();
        store
    }

    #[test]
    fn seal_writes_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = recording(dir.path());
        let summary = store.seal(&SessionTimeline::new(100_000)).unwrap();
        assert_eq!(summary.streams.len(), 3);
        let reopened = SessionStore::open_in(dir.path(), "s1").unwrap();
        assert_eq!(reopened.status(), SessionStatus::Sealed);
        assert_eq!(reopened.manifest().streams.len(), 3);
        let session = reopened.load().unwrap();
        assert_eq!(session.positions().len(), 3);
        assert_eq!(session.utterances()[0].code, crate::model::CommCode::Acknowledging);
    }

    #[test]
    fn seal_twice_fails() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = recording(dir.path());
        store.seal(&SessionTimeline::new(100_000)).unwrap();
        assert!(matches!(
            store.seal(&SessionTimeline::new(100_000)),
            Err(IngestError::AlreadySealed(_))
        ));
        assert!(matches!(
            store.ingest_voice(VOICE.as_bytes(), 0),
            Err(IngestError::AlreadySealed(_))
        ));
    }

    #[test]
    fn seal_truncates_past_end() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = recording(dir.path());
        let summary = store.seal(&SessionTimeline::new(50_000)).unwrap();
        assert_eq!(summary.counters.positions_truncated, 1);
        // Re-parse the stored stream to verify the count.
        let bytes = fs::read(dir.path().join("s1").join(POSITIONS_FILE)).unwrap();
        let stored = parse_positions(&bytes, 0, &WardLayout::standard()).unwrap();
        assert_eq!(stored.samples.len(), 2);
        assert!(stored.samples.iter().all(|p| p.t_ms <= 50_000));
    }

    #[test]
    fn phase_tags_drive_the_timeline() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = recording(dir.path());
        store.tag_phase(Phase::HandoverEnds, 10_000, "edu", None).unwrap();
        store.tag_action("ecg", 20_000, "edu", None, true).unwrap();
        store.set_planned_end(95_000).unwrap();
        let timeline = store.proposed_timeline().unwrap();
        assert_eq!(timeline.handover_ends_ms, Some(10_000));
        assert_eq!(timeline.end_ms, 95_000);
        let live = store.snapshot().unwrap();
        assert!(!live.is_sealed());
        assert!(store.load().is_err());
        store.seal(&timeline).unwrap();
        let reopened = SessionStore::open_in(dir.path(), "s1").unwrap();
        assert_eq!(reopened.annotations().records().len(), 2);
        assert_eq!(reopened.load().unwrap().timeline(), &timeline);
    }

    #[test]
    fn raw_directory_is_adopted() {
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("raw-7");
        fs::create_dir_all(&raw).unwrap();
        fs::write(raw.join(LAYOUT_FILE), WardLayout::standard().to_json()).unwrap();
        fs::write(raw.join(POSITIONS_FILE), POSITIONS).unwrap();
        let store = SessionStore::open(&raw).unwrap();
        assert_eq!(store.session_id(), "raw-7");
        assert_eq!(store.manifest().streams.len(), 1);
        assert_eq!(store.inferred_end_ms().unwrap(), 90_100);
    }

    #[test]
    fn rejects_bad_ids_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        assert!(SessionStore::create(dir.path(), "../x", WardLayout::standard(), None).is_err());
        SessionStore::create(dir.path(), "a", WardLayout::standard(), None).unwrap();
        assert!(matches!(
            SessionStore::create(dir.path(), "a", WardLayout::standard(), None),
            Err(IngestError::AlreadyExists(_))
        ));
    }
}
