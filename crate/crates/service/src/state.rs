use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};

use debriefkit_core::analytics::{get_analytics, AnalyticsParams};
use debriefkit_core::ingest::{valid_session_id, IngestError, SessionStatus, SessionStore};
use debriefkit_core::interaction::{ExternalCoder, RuleCoder, UtteranceCoder};
use debriefkit_core::interactions::{InteractionError, InteractionLog};
use debriefkit_core::model::{SessionTimeline, TimeWindow};
use debriefkit_core::Session;

use crate::config::ServiceConfig;
use crate::error::ApiError;
use crate::room::Room;

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

type PayloadKey = (String, TimeWindow, String);

/// One session: its single writer, the sealed data once loaded, cached
/// payloads, the debrief room and the interaction log.
pub struct SessionSlot {
    pub id: String,
    store: Mutex<SessionStore>,
    sealed: Mutex<Option<Arc<Session>>>,
    payloads: Mutex<HashMap<PayloadKey, Arc<Vec<u8>>>>,
    pub room: Room,
    log: Mutex<Option<InteractionLog>>,
}

impl SessionSlot {
    fn new(store: SessionStore) -> Self {
        let id = store.session_id().to_owned();
        let end = store.manifest().timeline.end_ms;
        SessionSlot {
            room: Room::new(&id, end),
            id,
            store: Mutex::new(store),
            sealed: Mutex::new(None),
            payloads: Mutex::new(HashMap::new()),
            log: Mutex::new(None),
        }
    }

    /// Runs `f` with exclusive access to the store.
    pub fn write<R>(&self, f: impl FnOnce(&mut SessionStore) -> Result<R, IngestError>) -> Result<R, ApiError> {
        let mut store = lock(&self.store);
        let out = f(&mut store)?;
        if store.status() == SessionStatus::Sealed {
            self.room.set_end(store.manifest().timeline.end_ms);
        }
        Ok(out)
    }

    pub fn read<R>(&self, f: impl FnOnce(&SessionStore) -> R) -> R {
        f(&lock(&self.store))
    }

    /// Sealed data is loaded once; a recording session gives a fresh live
    /// snapshot on every call.
    pub fn session(&self) -> Result<Arc<Session>, ApiError> {
        if let Some(s) = lock(&self.sealed).as_ref() {
            return Ok(s.clone());
        }
        let store = lock(&self.store);
        match store.status() {
            SessionStatus::Sealed => {
                let s = Arc::new(store.load()?);
                *lock(&self.sealed) = Some(s.clone());
                Ok(s)
            }
            SessionStatus::Recording => Ok(Arc::new(store.snapshot()?)),
        }
    }

    pub fn timeline(&self) -> Result<SessionTimeline, ApiError> {
        Ok(*self.session()?.timeline())
    }

    /// Payload bytes; cached per (viz, window, params) once sealed.
    pub fn analytics(&self, viz: &str, window: TimeWindow, params: &AnalyticsParams) -> Result<Arc<Vec<u8>>, ApiError> {
        let session = self.session()?;
        let key = (
            viz.to_owned(),
            window,
            serde_json::to_string(params).expect("params serialize"),
        );
        if session.is_sealed() {
            if let Some(hit) = lock(&self.payloads).get(&key) {
                return Ok(hit.clone());
            }
        }
        let bytes = Arc::new(get_analytics(&session, viz, &window, params)?.to_json_bytes());
        if session.is_sealed() {
            lock(&self.payloads).insert(key, bytes.clone());
        }
        Ok(bytes)
    }

    pub fn with_log<R>(
        &self,
        f: impl FnOnce(&mut InteractionLog) -> Result<R, InteractionError>,
    ) -> Result<R, ApiError> {
        let mut log = lock(&self.log);
        if log.is_none() {
            let path = self.read(|s| s.interactions_path());
            *log = Some(InteractionLog::open(path)?);
        }
        Ok(f(log.as_mut().expect("opened above"))?)
    }
}

pub struct AppState {
    pub config: ServiceConfig,
    pub coder: Arc<dyn UtteranceCoder>,
    slots: Mutex<HashMap<String, Arc<SessionSlot>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Self, ApiError> {
        let coder: Arc<dyn UtteranceCoder> = match &config.coder {
            Some(argv) => Arc::new(
                ExternalCoder::spawn(&argv[0], &argv[1..])
                    .map_err(|e| ApiError::bad_request(format!("cannot start coder: {e}")))?,
            ),
            None => Arc::new(RuleCoder),
        };
        std::fs::create_dir_all(&config.session_root).map_err(|e| {
            ApiError::bad_request(format!("{}: {e}", config.session_root.display()))
        })?;
        Ok(AppState {
            config,
            coder,
            slots: Mutex::new(HashMap::new()),
        })
    }

    pub fn insert(&self, store: SessionStore) -> Arc<SessionSlot> {
        let slot = Arc::new(SessionSlot::new(store));
        lock(&self.slots).insert(slot.id.clone(), slot.clone());
        slot
    }

    /// Looks a session up, opening it from the session root on first use.
    pub fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        let mut slots = lock(&self.slots);
        if let Some(s) = slots.get(id) {
            return Ok(s.clone());
        }
        if !valid_session_id(id) || !self.config.session_root.join(id).is_dir() {
            return Err(ApiError::not_found(format!("session `{id}`")));
        }
        let store = SessionStore::open_in(&self.config.session_root, id)?;
        let slot = Arc::new(SessionSlot::new(store));
        slots.insert(id.to_owned(), slot.clone());
        Ok(slot)
    }

    /// Directory names under the session root.
    pub fn list(&self) -> Vec<String> {
        let mut ids: Vec<String> = std::fs::read_dir(&self.config.session_root)
            .into_iter()
            .flatten()
            .flatten()
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|id| valid_session_id(id))
            .collect();
        ids.sort();
        ids
    }
}
