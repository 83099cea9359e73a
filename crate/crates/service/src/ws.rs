use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;

use debriefkit_core::interactions::{InteractionEvent, InteractionKind};

use crate::error::{share_code, ApiError};
use crate::http::now_ms;
use crate::room::{ClientMessage, RoomEvent, ServerMessage};
use crate::state::{AppState, SessionSlot};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientRole {
    Control,
    #[default]
    Screen,
}

#[derive(Debug, Deserialize)]
pub struct JoinQuery {
    #[serde(default)]
    role: ClientRole,
    token: Option<String>,
}

pub async fn room_socket(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<JoinQuery>,
    upgrade: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    if let Some(expected) = &app.config.room_token {
        if q.token.as_deref() != Some(expected.as_str()) {
            return Err(ApiError::new(StatusCode::UNAUTHORIZED, "Unauthorized", "room token required"));
        }
    }
    let slot = app.slot(&id)?;
    Ok(upgrade
        .on_upgrade(move |socket| run_client(socket, slot, q.role))
        .into_response())
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> bool {
    socket.send(Message::Text(msg.to_text().into())).await.is_ok()
}

fn log(slot: &SessionSlot, event: InteractionKind, payload: serde_json::Value) {
    let e = InteractionEvent {
        t_wall: now_ms(),
        actor: "control".into(),
        event,
        payload,
    };
    // A closed debrief still drives the screens; it just stops recording.
    let _ = slot.with_log(|log| log.append(&e));
}

fn handle(slot: &SessionSlot, text: &str) -> Option<ServerMessage> {
    let msg: ClientMessage = match serde_json::from_str(text) {
        Ok(m) => m,
        Err(e) => return Some(ServerMessage::error("BadMessage", e.to_string())),
    };
    match msg {
        ClientMessage::Share { items } => match slot.room.share(&items) {
            Ok(_) => {
                log(slot, InteractionKind::Share, json!({ "items": items }));
                None
            }
            Err(e) => Some(ServerMessage::error(share_code(&e), e.to_string())),
        },
        ClientMessage::Unshare => {
            slot.room.unshare();
            log(slot, InteractionKind::Unshare, json!({}));
            None
        }
        ClientMessage::PlaySnippet { from_ms, to_ms } => match slot.room.play_snippet(from_ms, to_ms) {
            Ok(_) => {
                log(slot, InteractionKind::PlaySnippet, json!({ "from_ms": from_ms, "to_ms": to_ms }));
                None
            }
            Err(e) => Some(ServerMessage::error(share_code(&e), e.to_string())),
        },
    }
}

/// Sends the current state on join, then every later state in order.
/// States not newer than the last one sent are dropped.
async fn run_client(mut socket: WebSocket, slot: Arc<SessionSlot>, role: ClientRole) {
    let _lease = match role {
        ClientRole::Control => match slot.room.try_control() {
            Some(lease) => Some(lease),
            None => {
                let _ = send(
                    &mut socket,
                    &ServerMessage::error("ControlTaken", "another control view is connected"),
                )
                .await;
                let _ = socket.send(Message::Close(None)).await;
                return;
            }
        },
        ClientRole::Screen => None,
    };
    let (initial, mut rx) = slot.room.join();
    let mut last = initial.revision;
    if !send(&mut socket, &ServerMessage::state(&initial)).await {
        return;
    }
    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let reply = if role == ClientRole::Control {
                    handle(&slot, text.as_str())
                } else {
                    Some(ServerMessage::error("ReadOnly", "shared screens cannot change the room"))
                };
                if let Some(reply) = reply {
                    if !send(&mut socket, &reply).await {
                        break;
                    }
                }
            }
            event = rx.recv() => {
                let msg = match event {
                    Ok(RoomEvent::State(s)) if s.revision > last => {
                        last = s.revision;
                        ServerMessage::state(&s)
                    }
                    Ok(RoomEvent::State(_)) => continue,
                    Ok(RoomEvent::Snippet(r)) => ServerMessage::PlaySnippet { from_ms: r.from_ms, to_ms: r.to_ms },
                    Err(RecvError::Lagged(_)) => {
                        let s = slot.room.current();
                        if s.revision <= last {
                            continue;
                        }
                        last = s.revision;
                        ServerMessage::state(&s)
                    }
                    Err(RecvError::Closed) => break,
                };
                if !send(&mut socket, &msg).await {
                    break;
                }
            }
        }
    }
}
