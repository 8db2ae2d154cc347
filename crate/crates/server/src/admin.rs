//! HTTP surface: the `/ws` upgrade for browser clients and the `/rooms`
//! admin endpoints used by the command line and the simulator.

use std::collections::BTreeMap;
use std::net::SocketAddr;

use axum::extract::ws::WebSocketUpgrade;
use axum::extract::{Path, Request, State};
use axum::http::StatusCode;
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Extension, Json, Router};
use classplay_core::engine::SessionConfig;
use classplay_core::ids::PlayerId;
use classplay_core::scenario::load_scenario;
use serde::{Deserialize, Serialize};

use crate::error::ServerError;
use crate::server::{OpenRoom, Server};

/// Address of the HTTP peer, attached per connection.
#[derive(Debug, Clone, Copy)]
pub struct Peer(pub SocketAddr);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpenRoomRequest {
    /// The scenario document itself.
    pub scenario: serde_json::Value,
    pub roster: Vec<PlayerId>,
    #[serde(default = "default_teacher")]
    pub teacher: PlayerId,
    pub seed: u64,
    #[serde(default)]
    pub session: SessionConfig,
}

fn default_teacher() -> PlayerId {
    PlayerId::from("teacher")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OpenRoomResponse {
    pub join_code: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestoreRequest {
    pub checkpoint: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvanceRequest {
    pub ms: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SyncRequest {
    #[serde(default)]
    pub expect: BTreeMap<PlayerId, u64>,
}

/// Error body of every failed admin request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl IntoResponse for ServerError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServerError::NoSuchRoom(_) | ServerError::NoSuchCheckpoint(_) => StatusCode::NOT_FOUND,
            ServerError::CapacityExceeded(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServerError::ClockNotManual => StatusCode::CONFLICT,
            ServerError::Session(_)
            | ServerError::Scenario(_)
            | ServerError::Checkpoint(_)
            | ServerError::UnknownIdentity(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = ErrorBody {
            code: self.code().to_owned(),
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

pub(crate) fn router(server: Server) -> Router {
    let admin = Router::new()
        .route("/rooms", get(list_rooms).post(open_room))
        .route("/rooms/{code}", get(room_summary))
        .route("/rooms/{code}/state", get(room_state))
        .route("/rooms/{code}/restore", post(restore))
        .route("/rooms/{code}/advance", post(advance))
        .route("/rooms/{code}/sync", post(sync))
        .layer(middleware::from_fn_with_state(server.clone(), local_only));
    Router::new()
        .route("/ws", get(ws_upgrade))
        .merge(admin)
        .with_state(server)
}

async fn local_only(
    State(server): State<Server>,
    Extension(Peer(peer)): Extension<Peer>,
    req: Request,
    next: Next,
) -> Response {
    if server.config().admin_remote || peer.ip().is_loopback() {
        next.run(req).await
    } else {
        StatusCode::FORBIDDEN.into_response()
    }
}

async fn ws_upgrade(State(server): State<Server>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| server.serve_ws(socket))
}

async fn list_rooms(State(server): State<Server>) -> Json<Vec<crate::server::RoomSummary>> {
    Json(server.rooms().await)
}

async fn open_room(
    State(server): State<Server>,
    Json(req): Json<OpenRoomRequest>,
) -> Result<Json<OpenRoomResponse>, ServerError> {
    let bytes = serde_json::to_vec(&req.scenario).expect("json value serializes");
    let scenario = load_scenario(&bytes).map_err(|e| ServerError::Scenario(e.to_string()))?;
    let join_code = server
        .open_room(OpenRoom {
            scenario,
            roster: req.roster,
            teacher: req.teacher,
            seed: req.seed,
            session: req.session,
        })
        .await?;
    Ok(Json(OpenRoomResponse { join_code }))
}

async fn room_summary(
    State(server): State<Server>,
    Path(code): Path<String>,
) -> Result<Json<crate::server::RoomSummary>, ServerError> {
    Ok(Json(server.summary(&code).await?))
}

async fn room_state(
    State(server): State<Server>,
    Path(code): Path<String>,
) -> Result<Json<classplay_core::engine::SessionState>, ServerError> {
    Ok(Json(server.state(&code).await?))
}

async fn restore(
    State(server): State<Server>,
    Path(code): Path<String>,
    Json(req): Json<RestoreRequest>,
) -> Result<Json<crate::room::RestoreInfo>, ServerError> {
    Ok(Json(server.restore(&code, &req.checkpoint).await?))
}

async fn advance(
    State(server): State<Server>,
    Path(code): Path<String>,
    Json(req): Json<AdvanceRequest>,
) -> Result<Json<crate::room::SyncInfo>, ServerError> {
    Ok(Json(server.advance(&code, req.ms).await?))
}

async fn sync(
    State(server): State<Server>,
    Path(code): Path<String>,
    Json(req): Json<SyncRequest>,
) -> Result<Json<crate::room::SyncInfo>, ServerError> {
    Ok(Json(server.sync(&code, req.expect).await?))
}
