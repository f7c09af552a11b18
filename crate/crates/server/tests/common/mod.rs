#![allow(dead_code)]

use std::sync::Arc;

use futures::{SinkExt, StreamExt};
use memorypod::narrative::SummarizerBackend;
use memorypod::pod::codec::encode_pod;
use memorypod::pod::AnnotationKind;
use memorypod::recorder::{record, simulate_capture_log, ScenarioConfig, ScenarioStep};
use memorypod::MemoryPod;
use memorypod_server::views::{Control, ServerMessage};
use memorypod_server::{router, AppState, PodStore};
use tempfile::TempDir;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

pub struct TestServer {
    pub base: String,
    pub ws_base: String,
    pub dir: TempDir,
    pub store: Arc<PodStore>,
}

pub async fn start_with(summarizer: SummarizerBackend, tick_hz: f64) -> TestServer {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(PodStore::open(dir.path()).unwrap());
    let state = AppState::new(store.clone(), summarizer, tick_hz).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    TestServer { base: format!("http://{addr}"), ws_base: format!("ws://{addr}"), dir, store }
}

pub async fn start() -> TestServer {
    start_with(SummarizerBackend::Template, 20.0).await
}

pub fn simulated(seed: u64) -> MemoryPod {
    let log = simulate_capture_log(&ScenarioConfig::hard_drive_replacement(seed)).unwrap();
    record(log.session_meta(format!("sim-{seed}")), &log.events).unwrap()
}

/// Simulated pod whose keyframes sit at 0, 10.5, 42 and 80 s.
pub fn four_keyframes() -> MemoryPod {
    let mut cfg = ScenarioConfig::hard_drive_replacement(11);
    let step = |kind, label: &str, zone: &str, offset_s| ScenarioStep { kind, label: label.into(), zone: zone.into(), offset_s };
    cfg.steps = vec![
        step(AnnotationKind::Start, "begin", "E", 0.0),
        step(AnnotationKind::Acquire, "drive", "S", 10.5),
        step(AnnotationKind::Use, "bay", "R", 42.0),
        step(AnnotationKind::End, "done", "E", 80.0),
    ];
    let log = simulate_capture_log(&cfg).unwrap();
    record(log.session_meta("four"), &log.events).unwrap()
}

pub async fn upload(server: &TestServer, pod: &MemoryPod) -> String {
    let resp = reqwest::Client::new().post(format!("{}/pods", server.base)).body(encode_pod(pod).unwrap()).send().await.unwrap();
    assert_eq!(resp.status(), 201);
    let v: serde_json::Value = resp.json().await.unwrap();
    v["pod_id"].as_str().unwrap().to_owned()
}

pub type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub async fn connect(server: &TestServer, id: &str) -> Ws {
    tokio_tungstenite::connect_async(format!("{}/pods/{id}/replay", server.ws_base)).await.unwrap().0
}

pub async fn send(ws: &mut Ws, c: &Control) {
    ws.send(Message::Text(serde_json::to_string(c).unwrap().into())).await.unwrap();
}

pub async fn send_raw(ws: &mut Ws, text: &str) {
    ws.send(Message::Text(text.to_owned().into())).await.unwrap();
}

/// Next server message, or `None` on close or after `wait_ms` of silence.
pub async fn next(ws: &mut Ws, wait_ms: u64) -> Option<ServerMessage> {
    loop {
        let msg = tokio::time::timeout(std::time::Duration::from_millis(wait_ms), ws.next()).await.ok()??.ok()?;
        match msg {
            Message::Text(t) => return Some(serde_json::from_str(t.as_str()).unwrap()),
            Message::Close(_) => return None,
            _ => continue,
        }
    }
}
