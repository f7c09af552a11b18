//! WebSocket replay stream: one [`ReplaySession`] per connection.
//!
//! The first client message must be a `mode` control. While playing, the
//! server advances the session by the measured wall time at every tick and
//! sends the resulting frame. `seek`, `keyframe` and `mode` answer with one
//! frame immediately, playing or not. A message that does not parse as a
//! control closes the connection after an error message; well-formed
//! requests that cannot be honored (a seek past the end, a zero rate) only
//! produce the error message.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::response::{IntoResponse, Response};
use memorypod::replay::{open_session, ReplaySession};
use memorypod::MemoryPod;
use tokio::time::{interval, Instant, MissedTickBehavior};

use crate::api::ApiError;
use crate::views::{Control, ServerMessage};
use crate::AppState;

pub(crate) async fn replay(State(state): State<AppState>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Response {
    let Some(pod) = state.store.pod(&id) else {
        return ApiError::not_found(&id).into_response();
    };
    let tick = state.tick;
    ws.on_upgrade(move |socket| async move {
        if let Err(e) = run(socket, pod, tick).await {
            tracing::debug!(pod_id = %id, error = %e, "replay stream ended");
        }
    })
}

enum Incoming {
    Control(Control),
    Malformed(String),
    Closed,
    Ignore,
}

fn classify(msg: Option<Result<Message, axum::Error>>) -> Incoming {
    match msg {
        None | Some(Err(_)) | Some(Ok(Message::Close(_))) => Incoming::Closed,
        Some(Ok(Message::Text(text))) => match serde_json::from_str(text.as_str()) {
            Ok(c) => Incoming::Control(c),
            Err(e) => Incoming::Malformed(e.to_string()),
        },
        Some(Ok(Message::Binary(_))) => Incoming::Malformed("binary messages are not supported".into()),
        Some(Ok(_)) => Incoming::Ignore,
    }
}

async fn send(socket: &mut WebSocket, msg: &ServerMessage) -> Result<(), axum::Error> {
    let text = serde_json::to_string(msg).expect("server messages serialize");
    socket.send(Message::Text(text.into())).await
}

async fn fail(socket: &mut WebSocket, code: &str, detail: String) -> Result<(), axum::Error> {
    send(socket, &ServerMessage::Error { code: code.into(), detail }).await?;
    socket.send(Message::Close(None)).await
}

async fn run(mut socket: WebSocket, pod: Arc<MemoryPod>, tick: Duration) -> Result<(), axum::Error> {
    let mut session: ReplaySession = loop {
        match classify(socket.recv().await) {
            Incoming::Closed => return Ok(()),
            Incoming::Ignore => continue,
            Incoming::Malformed(detail) => return fail(&mut socket, "malformed_control", detail).await,
            Incoming::Control(Control::Mode(mode)) => match open_session(pod.clone(), mode) {
                Ok(s) => break s,
                Err(e) => return fail(&mut socket, "invalid_pod", e.to_string()).await,
            },
            Incoming::Control(_) => {
                return fail(&mut socket, "expected_mode", "the first message must be a mode control".into()).await
            }
        }
    };
    send(&mut socket, &ServerMessage::Frame(session.current_frame())).await?;

    let mut ticker = interval(tick);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);
    let mut last = Instant::now();
    loop {
        tokio::select! {
            msg = socket.recv() => {
                let control = match classify(msg) {
                    Incoming::Closed => return Ok(()),
                    Incoming::Ignore => continue,
                    Incoming::Malformed(detail) => return fail(&mut socket, "malformed_control", detail).await,
                    Incoming::Control(c) => c,
                };
                let reply = match control {
                    Control::Play => {
                        session.play();
                        last = Instant::now();
                        ticker.reset();
                        None
                    }
                    Control::Pause => {
                        session.pause();
                        None
                    }
                    Control::Seek { t_us } => Some(session.seek(t_us).map_err(|e| ("out_of_range", e.to_string()))),
                    Control::Rate { rate } => session.set_rate(rate).err().map(|e| Err(("invalid_rate", e.to_string()))),
                    Control::Keyframe { direction } => Some(
                        session.jump_keyframe(direction).map(|_| session.current_frame()).map_err(|e| ("no_keyframes", e.to_string())),
                    ),
                    Control::Mode(mode) => {
                        session.set_mode(mode);
                        Some(Ok(session.current_frame()))
                    }
                };
                match reply {
                    Some(Ok(frame)) => send(&mut socket, &ServerMessage::Frame(frame)).await?,
                    Some(Err((code, detail))) => send(&mut socket, &ServerMessage::Error { code: code.into(), detail }).await?,
                    None => {}
                }
            }
            _ = ticker.tick(), if session.is_playing() => {
                let now = Instant::now();
                let dt = now.duration_since(last).as_secs_f64();
                last = now;
                let frame = session.advance(dt);
                send(&mut socket, &ServerMessage::Frame(frame)).await?;
            }
        }
    }
}
