use std::path::PathBuf;

use classplay_server::config::{ENV_CHECKPOINT_DIR, ENV_LISTEN};
use classplay_server::{Server, ServerConfig, ServerError};

#[test]
fn defaults_are_valid() {
    let c = ServerConfig::from_toml("").unwrap();
    assert_eq!(c.checkpoint_stride, 50);
    assert_eq!(c.tick_ms, 100);
    assert!(!c.manual_clock);
    assert!(c.rooms.is_empty());
}

#[test]
fn tick_interval_bounds_are_enforced() {
    for bad in [0, 9, 1001] {
        let e = ServerConfig::from_toml(&format!("tick_ms = {bad}")).unwrap_err();
        assert!(matches!(e, ServerError::Config(_)), "{bad}");
    }
    for ok in [10, 1000] {
        ServerConfig::from_toml(&format!("tick_ms = {ok}")).unwrap();
    }
}

#[test]
fn zero_stride_and_unknown_keys_are_rejected() {
    assert!(ServerConfig::from_toml("checkpoint_stride = 0").is_err());
    assert!(ServerConfig::from_toml("listen_port = 1").is_err());
}

#[test]
fn env_overrides_listen_and_checkpoint_dir() {
    let mut c = ServerConfig::from_toml("listen = \"127.0.0.1:1\"").unwrap();
    c.apply_env(|k| match k {
        ENV_LISTEN => Some("0.0.0.0:9000".into()),
        ENV_CHECKPOINT_DIR => Some("/tmp/cp".into()),
        _ => None,
    })
    .unwrap();
    assert_eq!(c.listen.to_string(), "0.0.0.0:9000");
    assert_eq!(c.checkpoint_dir, Some(PathBuf::from("/tmp/cp")));
    assert!(c.apply_env(|_| Some("not an address".into())).is_err());
}

#[tokio::test]
async fn rooms_from_config_file_open_with_relative_scenario() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("sample.json"),
        classplay_core::scenario::SAMPLE_SCENARIO,
    )
    .unwrap();
    let toml = r#"
        manual_clock = true

        [[room]]
        scenario = "sample.json"
        roster = ["a", "b", "c", "d", "e", "f", "g"]
        seed = 4

        [room.session]
        challenge_seconds = 60
    "#;
    let path = dir.path().join("server.toml");
    std::fs::write(&path, toml).unwrap();
    let config = ServerConfig::load(&path).unwrap();
    assert_eq!(config.rooms[0].teacher, "teacher");
    assert_eq!(config.rooms[0].session.challenge_seconds, Some(60));
    let server = Server::new(config.clone()).unwrap();
    let code = server.open_spec(&config.rooms[0]).await.unwrap();
    let summary = server.summary(&code).await.unwrap();
    assert_eq!(summary.players, 7);
}
