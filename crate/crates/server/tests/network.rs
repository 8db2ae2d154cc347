use std::time::Duration;

use classplay_core::ids::PlayerId;
use classplay_core::phase::PhaseId;
use classplay_core::protocol::{
    codes, decode, encode, Body, ErrorMsg, FacilitatorCmd, Join, RoleAck, Scan, WireMessage,
};
use classplay_core::scenario::SAMPLE_SCENARIO;
use classplay_server::admin::OpenRoomRequest;
use classplay_server::{AdminClient, ClientError, Server, ServerConfig};
use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;

const WAIT: Duration = Duration::from_secs(5);

async fn start(config: ServerConfig) -> (std::net::SocketAddr, Server) {
    let server = Server::new(config).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(server.clone().serve(listener));
    (addr, server)
}

fn manual() -> ServerConfig {
    ServerConfig {
        manual_clock: true,
        ..ServerConfig::default()
    }
}

fn open_request(n: usize, seed: u64) -> OpenRoomRequest {
    OpenRoomRequest {
        scenario: serde_json::from_str(SAMPLE_SCENARIO).unwrap(),
        roster: (1..=n)
            .map(|i| PlayerId::from(format!("s{i:02}").as_str()))
            .collect(),
        teacher: "teacher".into(),
        seed,
        session: Default::default(),
    }
}

struct LineClient {
    rd: BufReader<OwnedReadHalf>,
    wr: OwnedWriteHalf,
    session: String,
    seq: u64,
}

impl LineClient {
    async fn connect(addr: std::net::SocketAddr, session: &str) -> Self {
        let (rd, wr) = TcpStream::connect(addr).await.unwrap().into_split();
        Self {
            rd: BufReader::new(rd),
            wr,
            session: session.into(),
            seq: 0,
        }
    }

    async fn send(&mut self, body: impl Into<Body>) {
        self.seq += 1;
        let frame = encode(&WireMessage::new(self.session.clone(), self.seq, body));
        self.wr.write_all(&frame).await.unwrap();
    }

    async fn send_raw(&mut self, bytes: &[u8]) {
        self.wr.write_all(bytes).await.unwrap();
    }

    async fn recv_line(&mut self) -> Option<String> {
        let mut line = String::new();
        let n = tokio::time::timeout(WAIT, self.rd.read_line(&mut line))
            .await
            .expect("frame within timeout")
            .unwrap();
        (n > 0).then_some(line)
    }

    async fn recv(&mut self) -> WireMessage {
        let line = self.recv_line().await.expect("connection open");
        decode(line.as_bytes()).unwrap()
    }

    async fn recv_until(&mut self, ty: &str) -> WireMessage {
        loop {
            let m = self.recv().await;
            if m.body.type_name() == ty {
                return m;
            }
        }
    }

    async fn join(&mut self, id: &str) -> WireMessage {
        self.send(Join {
            player_id: id.into(),
        })
        .await;
        self.recv().await
    }
}

fn error_code(m: &WireMessage) -> &str {
    match &m.body {
        Body::Error(ErrorMsg { code, .. }) => code,
        other => panic!("expected error, got {other:?}"),
    }
}

async fn open_room(addr: std::net::SocketAddr, n: usize) -> (AdminClient, String) {
    let admin = AdminClient::new(&addr.to_string());
    let code = admin.open_room(&open_request(n, 3)).await.unwrap();
    (admin, code)
}

#[tokio::test]
async fn join_over_tcp_gets_ack_with_persona() {
    let (addr, _) = start(manual()).await;
    let (_, code) = open_room(addr, 6).await;
    assert_eq!(code.len(), 6);
    let mut c = LineClient::connect(addr, &code).await;
    let ack = c.join("s01").await;
    assert_eq!(ack.seq, 1);
    assert_eq!(ack.session, code);
    match ack.body {
        Body::JoinAck(a) => {
            assert_eq!(a.player_id.as_str(), "s01");
            assert!(!a.persona_name.is_empty());
            assert_eq!(a.phase, PhaseId::Lobby);
        }
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn wrong_code_and_unknown_identity_are_refused() {
    let (addr, _) = start(manual()).await;
    let (_, code) = open_room(addr, 6).await;
    let mut c = LineClient::connect(addr, "ZZZZZZ").await;
    let e = c.join("s01").await;
    assert_eq!(error_code(&e), codes::NO_SUCH_ROOM);
    assert_eq!(e.seq, 0);
    let mut c = LineClient::connect(addr, &code).await;
    let e = c.join("stranger").await;
    assert_eq!(error_code(&e), codes::UNKNOWN_IDENTITY);
    // The connection stays usable for a corrected join.
    let ack = c.join("s02").await;
    assert_eq!(ack.body.type_name(), "join_ack");
    let mut c = LineClient::connect(addr, &code).await;
    c.send(Scan {
        marker_id: "m1".into(),
    })
    .await;
    assert_eq!(error_code(&c.recv().await), codes::UNKNOWN_IDENTITY);
}

#[tokio::test]
async fn second_connection_supersedes_the_first() {
    let (addr, _) = start(manual()).await;
    let (_, code) = open_room(addr, 6).await;
    let mut old = LineClient::connect(addr, &code).await;
    old.join("s01").await;
    let mut new = LineClient::connect(addr, &code).await;
    new.send(Join {
        player_id: "s01".into(),
    })
    .await;
    let notice = old.recv().await;
    assert_eq!(error_code(&notice), codes::SUPERSEDED);
    assert_eq!(old.recv_line().await, None, "old connection closes");
    let ack = new.recv().await;
    assert_eq!(ack.body.type_name(), "join_ack");
    assert!(
        ack.seq > notice.seq,
        "server seq continues across connections"
    );
    assert_eq!(new.recv().await.body.type_name(), "resync");
}

#[tokio::test]
async fn duplicate_seq_is_dropped_and_bad_frames_answered() {
    let (addr, server) = start(manual()).await;
    let (_, code) = open_room(addr, 6).await;
    let mut c = LineClient::connect(addr, &code).await;
    c.join("s01").await;
    let scan = WireMessage::new(
        code.clone(),
        5,
        Scan {
            marker_id: "nowhere".into(),
        },
    );
    c.send_raw(&encode(&scan)).await;
    c.send_raw(&encode(&scan)).await;
    c.send_raw(b"{not json\n").await;
    c.send_raw(&[0xff, 0xfe, b'\n']).await;
    c.send_raw(b"{\"v\":9,\"session\":\"x\",\"seq\":9,\"type\":\"scan\",\"payload\":{}}\n")
        .await;
    c.send_raw(b"{\"v\":1,\"session\":\"x\",\"seq\":9,\"type\":\"warp\",\"payload\":{}}\n")
        .await;
    let first = c.recv().await;
    assert_eq!(error_code(&first), codes::ILLEGAL_IN_PHASE);
    assert_eq!(error_code(&c.recv().await), codes::FRAME);
    assert_eq!(error_code(&c.recv().await), codes::FRAME);
    assert_eq!(error_code(&c.recv().await), codes::VERSION);
    assert_eq!(error_code(&c.recv().await), codes::UNKNOWN_TYPE);
    let info = server
        .sync(&code, [(PlayerId::from("s01"), 6)].into())
        .await
        .unwrap();
    assert_eq!(
        info.inputs[&PlayerId::from("s01")],
        6,
        "duplicate was not counted"
    );
}

#[tokio::test]
async fn oversized_frame_is_skipped_and_stream_recovers() {
    let (addr, _) = start(manual()).await;
    let (_, code) = open_room(addr, 6).await;
    let mut c = LineClient::connect(addr, &code).await;
    c.join("s01").await;
    let mut big = vec![b'x'; 70 * 1024];
    big.push(b'\n');
    c.send_raw(&big).await;
    assert_eq!(error_code(&c.recv().await), codes::FRAME);
    c.send(RoleAck { line: 0 }).await;
    assert_eq!(error_code(&c.recv().await), codes::ILLEGAL_IN_PHASE);
}

#[tokio::test]
async fn websocket_carries_identical_frames() {
    let (addr, _) = start(manual()).await;
    let (_, code) = open_room(addr, 6).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws"))
        .await
        .unwrap();
    let join = WireMessage::new(
        code.clone(),
        1,
        Join {
            player_id: "s03".into(),
        },
    );
    // Trailing LF omitted: a message is one frame either way.
    let text = String::from_utf8(encode(&join)).unwrap();
    ws.send(Message::Text(text.trim_end().into()))
        .await
        .unwrap();
    let reply = tokio::time::timeout(WAIT, ws.next())
        .await
        .unwrap()
        .unwrap()
        .unwrap();
    let text = reply.into_text().unwrap();
    let ack = decode(text.as_bytes()).unwrap();
    assert_eq!(ack.body.type_name(), "join_ack");
    assert_eq!(
        text.as_str().as_bytes(),
        encode(&ack).as_slice(),
        "canonical frame with LF"
    );

    // A TCP client and a WS client in the same room see the same broadcast.
    let mut teacher = LineClient::connect(addr, &code).await;
    teacher.join("teacher").await;
    teacher
        .send(classplay_core::protocol::Body::FacilitatorCmd(
            FacilitatorCmd::Pause,
        ))
        .await;
    let tcp_frame = teacher.recv_line().await.unwrap();
    let ws_frame = tokio::time::timeout(WAIT, ws.next())
        .await
        .unwrap()
        .unwrap()
        .unwrap();
    let tcp_msg = decode(tcp_frame.as_bytes()).unwrap();
    let ws_msg = decode(ws_frame.into_text().unwrap().as_bytes()).unwrap();
    assert_eq!(tcp_msg.body, ws_msg.body);
    assert_eq!(tcp_msg.body.type_name(), "phase_change");
}

#[tokio::test]
async fn pause_blocks_gameplay_until_resume() {
    let (addr, server) = start(manual()).await;
    let (_, code) = open_room(addr, 6).await;
    let mut teacher = LineClient::connect(addr, &code).await;
    teacher.join("teacher").await;
    let mut students = Vec::new();
    for i in 1..=6 {
        let mut c = LineClient::connect(addr, &code).await;
        c.join(&format!("s{i:02}")).await;
        students.push(c);
    }
    teacher
        .send(Body::FacilitatorCmd(FacilitatorCmd::Start))
        .await;
    teacher
        .send(Body::FacilitatorCmd(FacilitatorCmd::Pause))
        .await;
    let s1 = &mut students[0];
    let task = s1.recv_until("puzzle_task").await;
    let line = match task.body {
        Body::PuzzleTask(t) => t.line.unwrap(),
        other => panic!("{other:?}"),
    };
    s1.send(RoleAck { line }).await;
    let e = s1.recv_until("error").await;
    assert_eq!(error_code(&e), codes::ILLEGAL_IN_PHASE);
    teacher
        .send(Body::FacilitatorCmd(FacilitatorCmd::Resume))
        .await;
    s1.send(RoleAck { line }).await;
    let info = server
        .sync(
            &code,
            [(PlayerId::from("s01"), 3), (PlayerId::from("teacher"), 4)].into(),
        )
        .await
        .unwrap();
    assert!(!info.paused);
    assert_eq!(info.phase, PhaseId::RegisterRoleplay);
}

#[tokio::test]
async fn admin_lists_advances_and_restores() {
    let (addr, _) = start(manual()).await;
    let (admin, code) = open_room(addr, 6).await;
    let (_, code2) = open_room(addr, 6).await;
    assert_ne!(code, code2, "same seed still yields distinct codes");
    let rooms = admin.rooms().await.unwrap();
    assert_eq!(rooms.len(), 2);
    assert!(rooms
        .iter()
        .all(|r| r.phase == PhaseId::Lobby && r.players == 6));

    let mut c = LineClient::connect(addr, &code).await;
    c.join("teacher").await;
    c.send(Body::FacilitatorCmd(FacilitatorCmd::Start)).await;
    c.recv_until("phase_change").await;
    let info = admin.advance(&code, 1_500).await.unwrap();
    assert_eq!(info.virtual_now, 1_500);

    let restored = admin.restore(&code, "Lobby").await.unwrap();
    assert_eq!(restored.phase, PhaseId::Lobby);
    let resync = c.recv_until("resync").await;
    match resync.body {
        Body::Resync(r) => assert_eq!(r.view.phase, PhaseId::Lobby),
        other => panic!("{other:?}"),
    }
    match admin.restore(&code, "no-such").await {
        Err(ClientError::Server { status, code, .. }) => {
            assert_eq!(status, 404);
            assert_eq!(code, codes::NO_SUCH_CHECKPOINT);
        }
        other => panic!("{other:?}"),
    }
    match admin.room("QQQQQQ").await {
        Err(ClientError::Server { status, code, .. }) => {
            assert_eq!(status, 404);
            assert_eq!(code, codes::NO_SUCH_ROOM);
        }
        other => panic!("{other:?}"),
    }
    let state = admin.state(&code).await.unwrap();
    assert_eq!(state.phase, PhaseId::Lobby);
}

#[tokio::test]
async fn facilitator_restore_command_resyncs_clients() {
    let (addr, _) = start(manual()).await;
    let (_, code) = open_room(addr, 6).await;
    let mut teacher = LineClient::connect(addr, &code).await;
    teacher.join("teacher").await;
    let mut s1 = LineClient::connect(addr, &code).await;
    s1.join("s01").await;
    teacher
        .send(Body::FacilitatorCmd(FacilitatorCmd::Start))
        .await;
    s1.recv_until("phase_change").await;
    teacher
        .send(Body::FacilitatorCmd(FacilitatorCmd::Restore {
            checkpoint: "Lobby".into(),
        }))
        .await;
    let r = s1.recv_until("resync").await;
    match r.body {
        Body::Resync(r) => assert_eq!(r.view.phase, PhaseId::Lobby),
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn invalid_scenario_and_capacity_are_reported() {
    let config = ServerConfig {
        max_rooms: 1,
        ..manual()
    };
    let (addr, _) = start(config).await;
    let admin = AdminClient::new(&addr.to_string());
    let mut req = open_request(6, 1);
    req.scenario["fragments"] = serde_json::json!([]);
    match admin.open_room(&req).await {
        Err(ClientError::Server { status, .. }) => assert_eq!(status, 422),
        other => panic!("{other:?}"),
    }
    admin.open_room(&open_request(6, 1)).await.unwrap();
    match admin.open_room(&open_request(6, 2)).await {
        Err(ClientError::Server { status, code, .. }) => {
            assert_eq!(status, 503);
            assert_eq!(code, "capacity_exceeded");
        }
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn ticking_room_advances_its_clock() {
    let config = ServerConfig {
        tick_ms: 10,
        ..ServerConfig::default()
    };
    let (addr, server) = start(config).await;
    let (admin, code) = open_room(addr, 6).await;
    tokio::time::sleep(Duration::from_millis(150)).await;
    let info = server.sync(&code, Default::default()).await.unwrap();
    assert!(info.virtual_now >= 50, "clock at {}", info.virtual_now);
    assert!(
        admin.advance(&code, 10).await.is_err(),
        "advance needs manual clock"
    );
}

#[tokio::test]
async fn restart_recovers_rooms_from_checkpoint_dir() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServerConfig {
        checkpoint_dir: Some(dir.path().to_path_buf()),
        ..manual()
    };
    let code;
    {
        let (addr, _) = start(config.clone()).await;
        let (_, c) = open_room(addr, 6).await;
        code = c;
        let mut t = LineClient::connect(addr, &code).await;
        t.join("teacher").await;
        t.send(Body::FacilitatorCmd(FacilitatorCmd::Start)).await;
        t.recv_until("phase_change").await;
    }
    let server = Server::new(config).unwrap();
    assert_eq!(server.recover().await.unwrap(), vec![code.clone()]);
    let summary = server.summary(&code).await.unwrap();
    assert_eq!(summary.phase, PhaseId::RegisterRoleplay);
    assert!(summary.connected.is_empty());
    assert!(dir.path().join(&code).join("scenario.json").is_file());
}
