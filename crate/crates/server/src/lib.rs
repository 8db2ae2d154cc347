//! Hosts classplay rooms. Each room serializes its clients' messages into
//! one deterministic session engine and persists checkpoints; clients speak
//! LF-framed JSON over TCP or over a WebSocket at `/ws` on the same port.

pub mod admin;
pub mod client;
pub mod config;
pub mod error;
mod net;
pub mod room;
pub mod server;
pub mod store;

pub use client::{AdminClient, ClientError};
pub use config::ServerConfig;
pub use error::ServerError;
pub use room::{join_code, Outbound, RestoreInfo, RoomCore, RoomSetup, SyncInfo, DEFAULT_STRIDE};
pub use server::{OpenRoom, RoomSummary, Server};
pub use store::{CheckpointStore, DirStore, MemoryStore};
