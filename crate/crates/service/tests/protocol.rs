use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use debriefkit_core::ingest::SessionStore;
use debriefkit_core::model::WardLayout;
use debriefkit_service::config::ServiceConfig;
use debriefkit_service::Server;

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

const END_MS: u64 = 1_500_000;

fn sealed_session(root: &Path, id: &str) {
    let mut store = SessionStore::create(root, id, WardLayout::standard(), None).unwrap();
    store.set_planned_end(END_MS).unwrap();
    let timeline = store.proposed_timeline().unwrap();
    store.seal(&timeline).unwrap();
}

async fn start(config: ServiceConfig) -> (SocketAddr, tokio::sync::oneshot::Sender<()>) {
    let server = Server::bind(config).await.unwrap();
    let addr = server.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    tokio::spawn(server.run(async {
        let _ = rx.await;
    }));
    (addr, tx)
}

fn config(root: &Path) -> ServiceConfig {
    ServiceConfig {
        port: 0,
        session_root: root.to_owned(),
        ..Default::default()
    }
}

async fn join(addr: SocketAddr, id: &str, role: &str) -> Ws {
    let url = format!("ws://{addr}/ws/debrief/{id}?role={role}");
    connect_async(url).await.unwrap().0
}

async fn recv(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next())
            .await
            .expect("message within 5 s")
            .expect("stream open")
            .expect("frame");
        if let Message::Text(t) = msg {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string().into())).await.unwrap();
}

fn item(viz: &str, from: u64, to: u64) -> Value {
    json!({ "viz": viz, "from_ms": from, "to_ms": to })
}

/// Reads state messages until `target`, checking order and size on the way.
async fn follow_to(ws: &mut Ws, mut last: u64, target: u64) -> Value {
    loop {
        let v = recv(ws).await;
        if v["type"] != "state" {
            continue;
        }
        let rev = v["revision"].as_u64().unwrap();
        assert!(rev > last, "revision {rev} after {last}");
        assert!(v["items"].as_array().unwrap().len() <= 3);
        last = rev;
        if rev == target {
            return v;
        }
        assert!(rev < target, "overshot {target}");
    }
}

#[tokio::test]
async fn control_and_two_screens_converge() {
    let dir = tempfile::tempdir().unwrap();
    sealed_session(dir.path(), "room");
    let (addr, _stop) = start(config(dir.path())).await;

    let mut control = join(addr, "room", "control").await;
    let mut a = join(addr, "room", "screen").await;
    let mut b = join(addr, "room", "screen").await;
    for ws in [&mut control, &mut a, &mut b] {
        let v = recv(ws).await;
        assert_eq!(v, json!({ "type": "state", "revision": 0, "items": [] }));
    }

    send(&mut control, json!({ "type": "share", "items": [item("sociogram", 0, END_MS)] })).await;
    for ws in [&mut control, &mut a, &mut b] {
        let v = recv(ws).await;
        assert_eq!(v["revision"], 1);
        assert_eq!(v["items"], json!([item("sociogram", 0, END_MS)]));
    }

    let four = ["priority", "wardmap", "sociogram", "network"].map(|v| item(v, 0, 1000));
    send(&mut control, json!({ "type": "share", "items": four })).await;
    let err = recv(&mut control).await;
    assert_eq!(err["type"], "error");
    assert_eq!(err["code"], "TooManyItems");

    send(
        &mut control,
        json!({ "type": "share", "items": [item("priority", 100, 200), item("wardmap", 100, 200)] }),
    )
    .await;
    send(&mut control, json!({ "type": "unshare" })).await;
    for ws in [&mut a, &mut b] {
        let v = follow_to(ws, 1, 3).await;
        assert_eq!(v["items"], json!([]));
    }

    let mut late = join(addr, "room", "screen").await;
    assert_eq!(recv(&mut late).await, json!({ "type": "state", "revision": 3, "items": [] }));

    send(&mut a, json!({ "type": "unshare" })).await;
    assert_eq!(recv(&mut a).await["code"], "ReadOnly");

    let mut second = join(addr, "room", "control").await;
    assert_eq!(recv(&mut second).await["code"], "ControlTaken");

    send(&mut control, json!({ "type": "play_snippet", "from_ms": 1000, "to_ms": 21000 })).await;
    let v = recv(&mut late).await;
    assert_eq!(v, json!({ "type": "play_snippet", "from_ms": 1000, "to_ms": 21000 }));

    let log = std::fs::read_to_string(dir.path().join("room").join("interactions.jsonl")).unwrap();
    let kinds: Vec<String> = log
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["event"].as_str().unwrap().to_owned())
        .collect();
    assert_eq!(kinds, ["share", "share", "unshare", "play_snippet"]);
}

#[tokio::test]
async fn randomized_schedules_keep_revision_order() {
    let dir = tempfile::tempdir().unwrap();
    let (addr, _stop) = start(config(dir.path())).await;
    let vizzes = ["priority", "wardmap", "sociogram", "network", "snippet", "bogus"];

    for schedule in 0..100u64 {
        let id = format!("room-{schedule}");
        sealed_session(dir.path(), &id);
        let mut rng = ChaCha8Rng::seed_from_u64(schedule);
        let mut control = join(addr, &id, "control").await;
        let mut early = join(addr, &id, "screen").await;
        assert_eq!(recv(&mut control).await["revision"], 0);
        assert_eq!(recv(&mut early).await["revision"], 0);

        let steps = rng.random_range(3..20);
        let late_at = rng.random_range(0..steps);
        let mut late: Option<(Ws, u64)> = None;
        let mut expected = 0u64;
        for step in 0..steps {
            if step == late_at {
                let mut ws = join(addr, &id, "screen").await;
                let first = recv(&mut ws).await;
                assert_eq!(first["type"], "state");
                let rev = first["revision"].as_u64().unwrap();
                assert!(rev <= expected);
                late = Some((ws, rev));
            }
            let roll = rng.random_range(0..10);
            let msg = if roll < 2 {
                expected += 1;
                json!({ "type": "unshare" })
            } else {
                let n = rng.random_range(0..=4usize);
                let items: Vec<Value> = (0..n)
                    .map(|_| {
                        let from = rng.random_range(0..END_MS);
                        let to = rng.random_range(from..=END_MS + 1000);
                        item(vizzes[rng.random_range(0..vizzes.len())], from, to)
                    })
                    .collect();
                let valid = (1..=3).contains(&n)
                    && items.iter().all(|i| i["viz"] != "bogus" && i["to_ms"].as_u64().unwrap() <= END_MS);
                if valid {
                    expected += 1;
                }
                json!({ "type": "share", "items": items })
            };
            send(&mut control, msg).await;
            if rng.random_bool(0.3) {
                tokio::task::yield_now().await;
            }
        }

        // The control sees its own states and an error for each rejection.
        let mut last = 0;
        while last < expected {
            let v = recv(&mut control).await;
            if v["type"] == "state" {
                let rev = v["revision"].as_u64().unwrap();
                assert!(rev > last);
                last = rev;
            }
        }
        if expected == 0 {
            continue;
        }
        let final_early = follow_to(&mut early, 0, expected).await;
        if let Some((mut ws, from)) = late {
            if from < expected {
                let final_late = follow_to(&mut ws, from, expected).await;
                assert_eq!(final_late, final_early);
            }
        }
    }
}

#[tokio::test]
async fn room_token_is_required_when_configured() {
    let dir = tempfile::tempdir().unwrap();
    sealed_session(dir.path(), "locked");
    let mut cfg = config(dir.path());
    cfg.room_token = Some("s3cret".into());
    let (addr, _stop) = start(cfg).await;
    assert!(connect_async(format!("ws://{addr}/ws/debrief/locked")).await.is_err());
    let (mut ws, _) = connect_async(format!("ws://{addr}/ws/debrief/locked?token=s3cret"))
        .await
        .unwrap();
    assert_eq!(recv(&mut ws).await["type"], "state");
    assert!(connect_async(format!("ws://{addr}/ws/debrief/missing?token=s3cret")).await.is_err());
}
