//! HTTP front end: `GET /maps` lists shipped maps and `GET /ws` upgrades to
//! a WebSocket carrying one session per connection.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::{Json, Router};
use tokio::net::TcpListener;

use crate::manager::{shipped_maps, MapInfo, SessionManager};
use crate::session::SessionError;
use crate::wire::{ClientEnvelope, ClientMessage, Control, WireEvent, PROTOCOL_VERSION};

pub fn router(manager: Arc<SessionManager>) -> Router {
    Router::new()
        .route("/maps", get(list_maps))
        .route("/ws", get(upgrade))
        .with_state(manager)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, manager: Arc<SessionManager>) -> std::io::Result<()> {
    axum::serve(listener, router(manager)).await
}

/// Binds `addr` and serves.
pub async fn run(addr: SocketAddr, manager: Arc<SessionManager>) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    serve(listener, manager).await
}

async fn list_maps() -> Json<Vec<MapInfo>> {
    Json(shipped_maps())
}

async fn upgrade(ws: WebSocketUpgrade, State(manager): State<Arc<SessionManager>>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, manager))
}

enum Reply {
    Created(String, usize, Vec<WireEvent>),
    Events(Vec<WireEvent>),
}

fn error_text(e: &SessionError) -> String {
    serde_json::to_string(&Control::Error {
        v: PROTOCOL_VERSION,
        code: e.code().to_string(),
        message: e.to_string(),
    })
    .expect("control messages serialize")
}

fn handle(
    manager: &SessionManager,
    session: Option<&str>,
    text: &str,
) -> Result<Reply, SessionError> {
    let envelope: ClientEnvelope =
        serde_json::from_str(text).map_err(|e| SessionError::BadRequest(e.to_string()))?;
    if let Some(v) = envelope.v.filter(|&v| v != PROTOCOL_VERSION) {
        return Err(SessionError::BadRequest(format!(
            "unsupported protocol version {v}; this server speaks {PROTOCOL_VERSION}"
        )));
    }
    let current = || session.ok_or_else(|| SessionError::BadRequest("create a session first".into()));
    match envelope.message {
        ClientMessage::Create { config } => {
            if session.is_some() {
                return Err(SessionError::BadRequest(
                    "this connection already has a session".into(),
                ));
            }
            let (id, events) = manager.create(config)?;
            let hypotheses = manager.with_session(&id, |s| s.episode().belief().len())?;
            Ok(Reply::Created(id, hypotheses, events))
        }
        ClientMessage::Advance => manager.advance(current()?).map(Reply::Events),
        ClientMessage::Run => manager.run(current()?).map(Reply::Events),
        ClientMessage::Respond { choice } => manager.submit(current()?, &choice).map(Reply::Events),
    }
}

async fn connection(mut socket: WebSocket, manager: Arc<SessionManager>) {
    let mut session: Option<String> = None;
    while let Some(Ok(msg)) = socket.recv().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            Message::Binary(_) => {
                let e = SessionError::BadRequest("binary frames are not accepted".into());
                if socket.send(Message::Text(error_text(&e).into())).await.is_err() {
                    break;
                }
                continue;
            }
            _ => continue,
        };
        let mgr = Arc::clone(&manager);
        let current = session.clone();
        let reply = tokio::task::spawn_blocking(move || handle(&mgr, current.as_deref(), &text))
            .await
            .unwrap_or_else(|e| Err(SessionError::Internal(e.to_string())));
        let mut out = Vec::new();
        match reply {
            Ok(Reply::Created(id, hypotheses, events)) => {
                out.push(
                    serde_json::to_string(&Control::Created {
                        v: PROTOCOL_VERSION,
                        session: id.clone(),
                        hypotheses,
                    })
                    .expect("control messages serialize"),
                );
                out.extend(events.iter().map(|e| serde_json::to_string(e).expect("events serialize")));
                session = Some(id);
            }
            Ok(Reply::Events(events)) => {
                out.extend(events.iter().map(|e| serde_json::to_string(e).expect("events serialize")));
            }
            Err(e) => out.push(error_text(&e)),
        }
        for frame in out {
            if socket.send(Message::Text(frame.into())).await.is_err() {
                break;
            }
        }
    }
    if let Some(id) = session {
        manager.close(&id);
    }
}
