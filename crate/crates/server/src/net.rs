//! One listening port for everything: a connection whose first bytes look
//! like an HTTP request line is served over HTTP (the `/ws` upgrade and the
//! `/rooms` admin endpoints); anything else speaks LF-framed JSON directly.

use std::net::SocketAddr;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket};
use classplay_core::ids::PlayerId;
use classplay_core::protocol::{
    codes, decode, Body, DecodeError, ErrorMsg, FrameError, FrameReader, WireMessage,
};
use futures_util::{SinkExt, StreamExt};
use hyper_util::rt::TokioIo;
use hyper_util::service::TowerToHyperService;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};

use crate::admin::{router, Peer};
use crate::error::ServerError;
use crate::server::{frame_text, ConnId, ConnOut, ConnTx, RoomHandle, RoomInput, Server};

const HTTP_METHODS: [&[u8]; 7] = [
    b"GET ",
    b"POST ",
    b"PUT ",
    b"HEAD ",
    b"DELETE ",
    b"PATCH ",
    b"OPTIONS ",
];
const SNIFF_TIMEOUT: Duration = Duration::from_secs(5);

impl Server {
    /// Accepts connections until the listener fails.
    pub async fn serve(self, listener: TcpListener) -> std::io::Result<()> {
        loop {
            let (stream, peer) = listener.accept().await?;
            let server = self.clone();
            tokio::spawn(async move {
                let _ = stream.set_nodelay(true);
                match sniff_http(&stream).await {
                    Ok(true) => server.serve_http(stream, peer).await,
                    Ok(false) => server.serve_lines(stream).await,
                    Err(e) => tracing::debug!(%peer, "connection dropped before first frame: {e}"),
                }
            });
        }
    }

    async fn serve_http(self, stream: TcpStream, peer: SocketAddr) {
        let service = TowerToHyperService::new(router(self).layer(axum::Extension(Peer(peer))));
        if let Err(e) = hyper::server::conn::http1::Builder::new()
            .serve_connection(TokioIo::new(stream), service)
            .with_upgrades()
            .await
        {
            tracing::debug!(%peer, "http connection ended: {e}");
        }
    }

    async fn serve_lines(self, stream: TcpStream) {
        let (mut rd, mut wr) = stream.into_split();
        let (tx, mut rx) = mpsc::unbounded_channel();
        let mut writer = tokio::spawn(async move {
            while let Some(out) = rx.recv().await {
                match out {
                    ConnOut::Frame(line) => {
                        if wr.write_all(line.as_bytes()).await.is_err() {
                            break;
                        }
                    }
                    ConnOut::Close => break,
                }
            }
            let _ = wr.shutdown().await;
        });
        let mut conn = Conn::new(self, tx);
        let mut reader = FrameReader::default();
        let mut buf = vec![0u8; 8192];
        loop {
            tokio::select! {
                n = rd.read(&mut buf) => match n {
                    Ok(0) | Err(_) => break,
                    Ok(n) => {
                        for frame in reader.push(&buf[..n]) {
                            conn.on_frame(frame).await;
                        }
                    }
                },
                _ = &mut writer => break,
            }
        }
        conn.closed();
    }

    pub(crate) async fn serve_ws(self, socket: WebSocket) {
        let (mut sink, mut stream) = socket.split();
        let (tx, mut rx) = mpsc::unbounded_channel();
        let mut writer = tokio::spawn(async move {
            while let Some(out) = rx.recv().await {
                match out {
                    ConnOut::Frame(line) => {
                        if sink.send(Message::Text(line.into())).await.is_err() {
                            break;
                        }
                    }
                    ConnOut::Close => break,
                }
            }
            let _ = sink.close().await;
        });
        let mut conn = Conn::new(self, tx);
        let mut reader = FrameReader::default();
        loop {
            tokio::select! {
                msg = stream.next() => {
                    let bytes: Vec<u8> = match msg {
                        Some(Ok(Message::Text(t))) => t.as_str().as_bytes().to_vec(),
                        Some(Ok(Message::Binary(b))) => b.to_vec(),
                        Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                        Some(Ok(_)) => continue,
                    };
                    let mut frames = reader.push(&bytes);
                    // One message is one frame; its trailing LF is optional.
                    if reader.pending() > 0 {
                        frames.extend(reader.push(b"\n"));
                    }
                    for frame in frames {
                        conn.on_frame(frame).await;
                    }
                }
                _ = &mut writer => break,
            }
        }
        conn.closed();
    }
}

/// Waits for enough bytes to tell an HTTP request line from a JSON frame.
async fn sniff_http(stream: &TcpStream) -> std::io::Result<bool> {
    let mut buf = [0u8; 8];
    tokio::time::timeout(SNIFF_TIMEOUT, async {
        loop {
            let n = stream.peek(&mut buf).await?;
            if n == 0 {
                return Ok(false);
            }
            let head = &buf[..n];
            if HTTP_METHODS.iter().any(|m| head.starts_with(m)) {
                return Ok(true);
            }
            let could_be = HTTP_METHODS.iter().any(|m| m.starts_with(head));
            if !could_be || n == buf.len() {
                return Ok(false);
            }
            tokio::time::sleep(Duration::from_millis(2)).await;
        }
    })
    .await
    .map_err(|_| std::io::Error::new(std::io::ErrorKind::TimedOut, "no data"))?
}

struct Bound {
    code: String,
    player: PlayerId,
    room: RoomHandle,
}

/// Transport-independent state of one client connection.
struct Conn {
    server: Server,
    id: ConnId,
    tx: ConnTx,
    bound: Option<Bound>,
    last_seq: Option<u64>,
}

impl Conn {
    fn new(server: Server, tx: ConnTx) -> Self {
        let id = server.next_conn_id();
        Self {
            server,
            id,
            tx,
            bound: None,
            last_seq: None,
        }
    }

    async fn on_frame(&mut self, frame: Result<Vec<u8>, FrameError>) {
        let decoded = frame
            .map_err(|e| DecodeError::Frame(e.to_string()))
            .and_then(|bytes| decode(&bytes));
        match decoded {
            Err(e) => self.refuse(e.code(), e.to_string()),
            Ok(m) => {
                if self.last_seq.is_some_and(|last| m.seq <= last) {
                    return;
                }
                self.last_seq = Some(m.seq);
                self.on_message(m).await;
            }
        }
    }

    async fn on_message(&mut self, m: WireMessage) {
        let Some(b) = &self.bound else {
            let Body::Join(join) = &m.body else {
                self.unbound_error(&m.session, codes::UNKNOWN_IDENTITY, "send join first");
                return;
            };
            match self
                .bind(&m.session, join.player_id.clone(), m.body.clone())
                .await
            {
                Ok(bound) => self.bound = Some(bound),
                Err(e) => self.unbound_error(&m.session, e.code(), &e.to_string()),
            }
            return;
        };
        if m.session != b.code {
            let e = ServerError::NoSuchRoom(m.session.clone());
            self.refuse(
                e.code(),
                format!("this connection belongs to room {}", b.code),
            );
            return;
        }
        if let Body::Join(join) = &m.body {
            if join.player_id != b.player {
                let msg = format!("this connection is bound to {}", b.player);
                self.refuse(codes::UNKNOWN_IDENTITY, msg);
                return;
            }
        }
        let _ = b.room.send(RoomInput::Frame {
            conn: self.id,
            player: b.player.clone(),
            body: m.body,
        });
    }

    async fn bind(&self, code: &str, player: PlayerId, body: Body) -> Result<Bound, ServerError> {
        let room = self.server.room(code).await?;
        let (tx, rx) = oneshot::channel();
        room.send(RoomInput::Join {
            conn: self.id,
            player: player.clone(),
            tx: self.tx.clone(),
            body,
            bound: tx,
        })?;
        rx.await.map_err(|_| ServerError::RoomClosed)??;
        Ok(Bound {
            code: code.to_owned(),
            player,
            room,
        })
    }

    fn refuse(&self, code: &'static str, message: String) {
        match &self.bound {
            Some(b) => {
                let _ = b.room.send(RoomInput::Reject {
                    conn: self.id,
                    player: b.player.clone(),
                    code,
                    message,
                });
            }
            None => self.unbound_error("", code, &message),
        }
    }

    /// Errors before a room identity exists carry `seq` 0.
    fn unbound_error(&self, session: &str, code: &str, message: &str) {
        let msg = WireMessage::new(session.to_owned(), 0, ErrorMsg::new(code, message));
        let _ = self.tx.send(ConnOut::Frame(frame_text(&msg)));
    }

    fn closed(&self) {
        if let Some(b) = &self.bound {
            let _ = b.room.send(RoomInput::Closed {
                conn: self.id,
                player: b.player.clone(),
            });
        }
    }
}
