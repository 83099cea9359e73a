use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use debriefkit_core::analytics::{get_analytics, AnalyticsParams};
use debriefkit_core::interactions::read_interactions;
use debriefkit_lab::{generate_session, random_script, GeneratedSession};
use debriefkit_service::{router, AppState, ServiceConfig};

struct Api {
    app: Router,
    _dir: tempfile::TempDir,
    root: std::path::PathBuf,
}

impl Api {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = ServiceConfig {
            session_root: dir.path().to_owned(),
            ..Default::default()
        };
        Api {
            app: router(Arc::new(AppState::new(config).unwrap())),
            root: dir.path().to_owned(),
            _dir: dir,
        }
    }

    async fn call(&self, method: &str, uri: &str, body: impl Into<Body>) -> (StatusCode, Vec<u8>) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .body(body.into())
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, bytes)
    }

    async fn json(&self, method: &str, uri: &str, body: Value) -> (StatusCode, Value) {
        let (s, b) = self.call(method, uri, body.to_string()).await;
        (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
    }

    async fn get(&self, uri: &str) -> (StatusCode, Value) {
        let (s, b) = self.call("GET", uri, Body::empty()).await;
        (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
    }
}

fn scenario() -> GeneratedSession {
    let mut script = random_script(11);
    let d = script.duration_ms;
    script.markers.handover_ends_ms = Some(d / 400 * 100);
    script.markers.sn_enter_ms = Some(d / 200 * 100);
    script.markers.doctor_enter_ms = Some(d / 400 * 300);
    generate_session(&script).unwrap()
}

async fn recorded(api: &Api, g: &GeneratedSession) {
    let cast: Vec<String> = g.script.cast.iter().map(|c| c.to_string()).collect();
    let (s, _) = api
        .json("POST", "/sessions", json!({ "session_id": "s1", "cast": cast }))
        .await;
    assert_eq!(s, StatusCode::CREATED);
    for (kind, body) in [
        ("positions", g.positions_csv()),
        ("voice", g.voice_jsonl()),
        ("utterances", g.utterances_jsonl()),
    ] {
        let (s, b) = api.call("POST", &format!("/sessions/s1/streams/{kind}"), body).await;
        assert_eq!(s, StatusCode::OK, "{kind}: {}", String::from_utf8_lossy(&b));
    }
    let t = g.timeline;
    for (phase, at) in [
        ("P1_HANDOVER_ENDS", t.handover_ends_ms),
        ("P2_SN_ENTER", t.sn_enter_ms),
        ("P3_DOCTOR_ENTER", t.doctor_enter_ms),
    ] {
        let (s, v) = api
            .json(
                "POST",
                "/sessions/s1/annotations",
                json!({ "phase": phase, "t_ms": at.unwrap(), "author": "educator" }),
            )
            .await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
    }
}

#[tokio::test]
async fn session_lifecycle() {
    let api = Api::new();
    let g = scenario();
    recorded(&api, &g).await;

    let (s, v) = api.json("POST", "/sessions", json!({ "session_id": "s1" })).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "AlreadyExists");

    let (s, v) = api
        .json(
            "POST",
            "/sessions/s1/annotations",
            json!({ "action_id": "ecg", "t_ms": 1000, "author": "educator", "favorite": true }),
        )
        .await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["annotation"]["action_id"], "ecg");
    let (s, v) = api
        .json(
            "POST",
            "/sessions/s1/annotations",
            json!({ "action_id": "juggling", "t_ms": 1000, "author": "educator" }),
        )
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "UnknownAction");

    let (s, v) = api.get("/sessions/s1/timeline").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "recording");

    // A recording session still answers with a live snapshot.
    let (s, _) = api.call("GET", "/sessions/s1/analytics/priority", Body::empty()).await;
    assert_eq!(s, StatusCode::OK);

    let end = g.timeline.end_ms;
    let (s, v) = api.json("POST", "/sessions/s1/seal", json!({ "end_ms": end })).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["end_ms"], end);
    let (s, v) = api.json("POST", "/sessions/s1/seal", json!({})).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "AlreadySealed");
    let (s, v) = api
        .json(
            "POST",
            "/sessions/s1/annotations",
            json!({ "phase": "P1_HANDOVER_ENDS", "t_ms": 10, "author": "educator" }),
        )
        .await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");

    let (s, v) = api.get("/sessions/s1/timeline").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["status"], "sealed");
    assert_eq!(v["timeline"]["sn_enter_ms"], g.timeline.sn_enter_ms.unwrap());

    let (s, v) = api.get("/sessions/s1/annotations?favorites=true").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["annotations"].as_array().unwrap().len(), 1);

    let (s, v) = api.get("/sessions").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["sessions"], json!(["s1"]));
}

#[tokio::test]
async fn analytics_endpoint() {
    let api = Api::new();
    let g = scenario();
    recorded(&api, &g).await;
    let (s, _) = api.json("POST", "/sessions/s1/seal", json!({})).await;
    assert_eq!(s, StatusCode::OK);

    let expected = g.to_session("s1").unwrap();
    for viz in ["priority", "wardmap", "sociogram", "network"] {
        let uri = format!("/sessions/s1/analytics/{viz}");
        let (s, first) = api.call("GET", &uri, Body::empty()).await;
        assert_eq!(s, StatusCode::OK, "{viz}");
        let (_, second) = api.call("GET", &uri, Body::empty()).await;
        assert_eq!(first, second, "{viz} bytes differ between requests");
        let direct = get_analytics(&expected, viz, &expected.timeline().whole(), &AnalyticsParams::default())
            .unwrap()
            .to_json_bytes();
        assert_eq!(first, direct, "{viz} differs from the engine on the generated files");
    }

    let (s, v) = api.get("/sessions/s1/analytics/network?phase=p2").await;
    assert_eq!(s, StatusCode::OK);
    let t = g.timeline;
    assert_eq!(v["window"], json!({ "from_ms": t.sn_enter_ms, "to_ms": t.doctor_enter_ms }));

    let (s, v) = api.get("/sessions/s1/analytics/priority?from_ms=1000&to_ms=1000").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["data"]["empty"], true);

    let (s, v) = api.get("/sessions/s1/analytics/sociogram?hex_radius_mm=300&dist_face_mm=900").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["params"]["dist_face_mm"], 900.0);

    let (s, v) = api.get("/sessions/s1/analytics/heatmap").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "UnknownViz");
    let (s, v) = api.get("/sessions/s1/analytics/priority?from_ms=5000&to_ms=10").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "InvalidWindow");
    let (s, v) = api.get("/sessions/s1/analytics/priority?network_window_size=1").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "InvalidParams");
    let (s, _) = api.get("/sessions/nope/analytics/priority").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn phase_unset_is_reported() {
    let api = Api::new();
    let (s, _) = api
        .json("POST", "/sessions", json!({ "session_id": "bare", "planned_end_ms": 60000 }))
        .await;
    assert_eq!(s, StatusCode::CREATED);
    let (s, _) = api.json("POST", "/sessions/bare/seal", json!({})).await;
    assert_eq!(s, StatusCode::OK);
    let (s, v) = api.get("/sessions/bare/analytics/priority?phase=P2_SN_ENTER").await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "PhaseUnset");
}

#[tokio::test]
async fn snippets() {
    let api = Api::new();
    api.json("POST", "/sessions", json!({ "session_id": "s", "planned_end_ms": 1500000 }))
        .await;
    api.json("POST", "/sessions/s/seal", json!({})).await;
    for (at, from, to) in [(723000, 718000, 738000), (2000, 0, 17000), (1499000, 1494000, 1500000)] {
        let (s, v) = api.get(&format!("/sessions/s/snippet?at_ms={at}")).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v, json!({ "from_ms": from, "to_ms": to }));
    }
    let (s, _) = api.get("/sessions/s/snippet?at_ms=1600000").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn interaction_log() {
    let api = Api::new();
    api.json("POST", "/sessions", json!({ "session_id": "d" })).await;
    let (s, v) = api
        .json(
            "POST",
            "/sessions/d/interactions",
            json!({ "actor": "educator", "event": "select_phase", "payload": { "phase": "P2_SN_ENTER" } }),
        )
        .await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["count"], 1);
    for i in 1..100 {
        let (s, _) = api
            .json(
                "POST",
                "/sessions/d/interactions",
                json!({ "t_wall": i, "actor": "educator", "event": "select_viz", "payload": { "i": i } }),
            )
            .await;
        assert_eq!(s, StatusCode::CREATED);
    }
    let (s, v) = api.json("POST", "/sessions/d/interactions/close", json!({})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["count"], 100);
    let (s, v) = api
        .json("POST", "/sessions/d/interactions", json!({ "actor": "x", "event": "unshare" }))
        .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"], "SessionClosed");

    let events = read_interactions(&api.root.join("d").join("interactions.jsonl")).unwrap();
    assert_eq!(events.len(), 100);
    assert_eq!(events[0].payload, json!({ "phase": "P2_SN_ENTER" }));
    for (i, e) in events.iter().enumerate().skip(1) {
        assert_eq!(e.payload["i"], i);
    }
}

#[tokio::test]
async fn bad_uploads() {
    let api = Api::new();
    api.json("POST", "/sessions", json!({ "session_id": "u" })).await;
    let (s, v) = api.call("POST", "/sessions/u/streams/positions", "t_ms,entity\nbad").await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{}", String::from_utf8_lossy(&v));
    let (s, _) = api.call("POST", "/sessions/u/streams/video", "x").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = api.call("POST", "/sessions/u/streams/audio", "RIFF").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = api.call("POST", "/sessions", "{not json").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}
