//! Client for the admin endpoints.

use std::collections::BTreeMap;

use classplay_core::engine::SessionState;
use classplay_core::ids::PlayerId;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::admin::{
    AdvanceRequest, ErrorBody, OpenRoomRequest, OpenRoomResponse, RestoreRequest, SyncRequest,
};
use crate::room::{RestoreInfo, SyncInfo};
use crate::server::RoomSummary;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server answered {status}: {code}: {message}")]
    Server {
        status: u16,
        code: String,
        message: String,
    },
}

#[derive(Debug, Clone)]
pub struct AdminClient {
    base: String,
    http: reqwest::Client,
}

impl AdminClient {
    /// `addr` is `host:port` or a full `http://` URL.
    pub fn new(addr: &str) -> Self {
        let base = if addr.starts_with("http://") {
            addr.trim_end_matches('/').to_owned()
        } else {
            format!("http://{addr}")
        };
        Self {
            base,
            http: reqwest::Client::new(),
        }
    }

    async fn parse<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let body: Option<ErrorBody> = resp.json().await.ok();
        Err(ClientError::Server {
            status: status.as_u16(),
            code: body.as_ref().map_or_else(String::new, |b| b.code.clone()),
            message: body.map_or_else(|| status.to_string(), |b| b.message),
        })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        Self::parse(self.http.get(format!("{}{path}", self.base)).send().await?).await
    }

    async fn post<B: Serialize, T: DeserializeOwned>(
        &self,
        path: &str,
        body: &B,
    ) -> Result<T, ClientError> {
        let resp = self
            .http
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .await?;
        Self::parse(resp).await
    }

    pub async fn rooms(&self) -> Result<Vec<RoomSummary>, ClientError> {
        self.get("/rooms").await
    }

    pub async fn room(&self, code: &str) -> Result<RoomSummary, ClientError> {
        self.get(&format!("/rooms/{code}")).await
    }

    pub async fn state(&self, code: &str) -> Result<SessionState, ClientError> {
        self.get(&format!("/rooms/{code}/state")).await
    }

    pub async fn open_room(&self, req: &OpenRoomRequest) -> Result<String, ClientError> {
        let r: OpenRoomResponse = self.post("/rooms", req).await?;
        Ok(r.join_code)
    }

    pub async fn restore(&self, code: &str, checkpoint: &str) -> Result<RestoreInfo, ClientError> {
        let req = RestoreRequest {
            checkpoint: checkpoint.to_owned(),
        };
        self.post(&format!("/rooms/{code}/restore"), &req).await
    }

    pub async fn advance(&self, code: &str, ms: u64) -> Result<SyncInfo, ClientError> {
        self.post(&format!("/rooms/{code}/advance"), &AdvanceRequest { ms })
            .await
    }

    pub async fn sync(
        &self,
        code: &str,
        expect: BTreeMap<PlayerId, u64>,
    ) -> Result<SyncInfo, ClientError> {
        self.post(&format!("/rooms/{code}/sync"), &SyncRequest { expect })
            .await
    }
}
