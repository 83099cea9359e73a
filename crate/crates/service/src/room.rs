//! Debrief rooms: the authoritative share state of one session and its
//! subscribers.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use debriefkit_core::model::Millis;
use debriefkit_core::share::{ShareError, ShareItem, ShareState, SnippetRange, SNIPPET_LEAD_MS, SNIPPET_TAIL_MS};

const CHANNEL_CAPACITY: usize = 64;

/// Client to server.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Share { items: Vec<ShareItem> },
    Unshare,
    PlaySnippet { from_ms: Millis, to_ms: Millis },
}

/// Server to clients. `State` always carries the full item list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State { revision: u64, items: Vec<ShareItem> },
    PlaySnippet { from_ms: Millis, to_ms: Millis },
    Error { code: String, message: String },
}

impl ServerMessage {
    pub fn state(s: &ShareState) -> Self {
        ServerMessage::State {
            revision: s.revision,
            items: s.items.clone(),
        }
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: code.to_owned(),
            message: message.into(),
        }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("message serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoomEvent {
    State(ShareState),
    Snippet(SnippetRange),
}

/// Every mutation happens under one lock and is published before the lock
/// is released, so the channel carries revisions in order.
#[derive(Debug)]
pub struct Room {
    state: Mutex<ShareState>,
    end_ms: Mutex<Option<Millis>>,
    tx: broadcast::Sender<RoomEvent>,
    controller: AtomicBool,
}

/// Held by the single control view of a room.
#[derive(Debug)]
pub struct ControlLease<'a> {
    room: &'a Room,
}

impl Drop for ControlLease<'_> {
    fn drop(&mut self) {
        self.room.controller.store(false, Ordering::SeqCst);
    }
}

impl Room {
    pub fn new(session_id: &str, end_ms: Option<Millis>) -> Self {
        let (tx, _) = broadcast::channel(CHANNEL_CAPACITY);
        Room {
            state: Mutex::new(ShareState::new(session_id)),
            end_ms: Mutex::new(end_ms),
            tx,
            controller: AtomicBool::new(false),
        }
    }

    fn lock(&self) -> MutexGuard<'_, ShareState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn set_end(&self, end_ms: Option<Millis>) {
        *self.end_ms.lock().unwrap_or_else(|e| e.into_inner()) = end_ms;
    }

    fn end(&self) -> Option<Millis> {
        *self.end_ms.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn current(&self) -> ShareState {
        self.lock().clone()
    }

    /// Current state plus a receiver positioned right after it.
    pub fn join(&self) -> (ShareState, broadcast::Receiver<RoomEvent>) {
        let state = self.lock();
        (state.clone(), self.tx.subscribe())
    }

    pub fn try_control(&self) -> Option<ControlLease<'_>> {
        self.controller
            .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
            .ok()
            .map(|_| ControlLease { room: self })
    }

    pub fn share(&self, items: &[ShareItem]) -> Result<ShareState, ShareError> {
        let end = self.end();
        let mut state = self.lock();
        state.apply_share(items, end)?;
        let _ = self.tx.send(RoomEvent::State(state.clone()));
        Ok(state.clone())
    }

    pub fn unshare(&self) -> ShareState {
        let mut state = self.lock();
        state.unshare();
        let _ = self.tx.send(RoomEvent::State(state.clone()));
        state.clone()
    }

    /// Relays a snippet range, at most lead plus tail long and inside the
    /// session.
    pub fn play_snippet(&self, from_ms: Millis, to_ms: Millis) -> Result<SnippetRange, ShareError> {
        let end = self.end();
        let too_long = to_ms - from_ms.min(to_ms) > SNIPPET_LEAD_MS + SNIPPET_TAIL_MS;
        if from_ms >= to_ms || too_long || end.is_some_and(|e| to_ms > e) {
            return Err(ShareError::InvalidWindow { from_ms, to_ms });
        }
        let range = SnippetRange { from_ms, to_ms };
        let _state = self.lock();
        let _ = self.tx.send(RoomEvent::Snippet(range));
        Ok(range)
    }

    pub fn subscriber_count(&self) -> usize {
        self.tx.receiver_count()
    }
}
