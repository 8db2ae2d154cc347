use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, Output, Stdio};

fn classplay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_classplay"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn core_file(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

#[test]
fn validate_accepts_the_sample() {
    let o = classplay(&["validate", &core_file("scenarios/sample.json")]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("ERROR"));
}

#[test]
fn validate_prints_one_diagnostic_per_line_and_fails() {
    let o = classplay(&["validate", &core_file("tests/fixtures/broken.json")]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("ERROR ")), "{text}");
    for line in text.lines() {
        let mut parts = line.splitn(3, ' ');
        let severity = parts.next().unwrap();
        assert!(["ERROR", "WARNING", "INFO"].contains(&severity), "{line}");
        let code = parts.next().unwrap();
        assert!(
            code.chars().all(|c| c.is_ascii_uppercase() || c == '-'),
            "{line}"
        );
        assert!(parts.next().unwrap().contains(": "), "{line}");
    }
}

#[test]
fn validate_reports_syntax_errors_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"scenario_id\": \n}").unwrap();
    let o = classplay(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("ERROR STRUCTURE "), "{}", stdout(&o));
    assert!(stdout(&o).contains("bad.json:3:1"), "{}", stdout(&o));
}

#[test]
fn sim_prints_the_digest_and_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let transcript = dir.path().join("t.jsonl");
    let o = classplay(&[
        "sim",
        "--scenario",
        &core_file("scenarios/sample.json"),
        "--players",
        "7",
        "--seed",
        "2",
        "--profile",
        "s03=slow:min=1000,max=2000",
        "--fault",
        "drop:s05@PairPuzzle+4000",
        "--report",
        report.to_str().unwrap(),
        "--transcript",
        transcript.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
    let digest = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("transcript_digest ").map(str::to_owned))
        .unwrap();
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["transcript_digest"], digest.as_str());
    assert_eq!(r["completed"], true);
    assert_eq!(r["drops"][0]["player"], "s05");
    let lines = std::fs::read_to_string(&transcript).unwrap();
    assert!(lines.lines().count() > 100);
}

#[test]
fn sim_rejects_bad_profiles() {
    let o = classplay(&["sim", "--players", "6", "--profile", "teleporting"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_refuses_unsupported_sizes() {
    let o = classplay(&["sweep", "--sizes", "5..6", "--seeds", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("5 players"));
}

#[test]
fn small_sweep_passes() {
    let o = classplay(&["sweep", "--sizes", "6,7", "--seeds", "2"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("4 runs, 0 failed"), "{}", stdout(&o));
}

#[test]
fn survey_score_emits_construct_columns() {
    let o = classplay(&[
        "survey",
        "score",
        &core_file("tests/fixtures/scores_hand.csv"),
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("respondent,sex,"));
    assert!(header.ends_with(",overall"));
    assert_eq!(header.split(',').count(), 2 + 9 + 1);
}

#[test]
fn survey_report_is_json_with_alpha_and_sex_comparisons() {
    let o = classplay(&[
        "survey",
        "report",
        &core_file("tests/fixtures/scores_hand.csv"),
    ]);
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["respondents"].as_u64().unwrap() >= 2);
    assert!(r.get("alpha").is_some());
    assert_eq!(r["sex_differences"].as_array().unwrap().len(), 10);
    assert_eq!(r["sex_differences"][0]["scale"], "overall");
}

#[test]
fn survey_rejects_a_bad_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    std::fs::write(&path, "id,sex\nr1,f\n").unwrap();
    let o = classplay(&["survey", "report", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

struct Served(Child);

impl Drop for Served {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serve_then_list_and_restore_rooms() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("server.toml");
    std::fs::write(
        &config,
        format!(
            "listen = \"127.0.0.1:1\"\n\n[[room]]\nscenario = {:?}\nroster = [\"a1\", \"a2\", \"a3\", \"a4\", \"a5\", \"a6\"]\nseed = 7\n",
            core_file("scenarios/sample.json")
        ),
    )
    .unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_classplay"))
        .args(["serve", "--config", config.to_str().unwrap()])
        // The environment overrides the listen address from the file.
        .env("CLASSPLAY_LISTEN", &addr)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let out = child.stdout.take().unwrap();
    let served = Served(child);
    let mut first = String::new();
    BufReader::new(out).read_line(&mut first).unwrap();
    let code = first
        .strip_prefix("room ")
        .and_then(|l| l.split(' ').next())
        .unwrap_or_else(|| panic!("unexpected first line {first:?}"))
        .to_owned();

    // The room is opened before the accept loop starts; poll until it answers.
    let mut listed = String::new();
    for _ in 0..100 {
        let o = classplay(&["rooms", "--server", &addr]);
        if o.status.success() {
            listed = stdout(&o);
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(50));
    }
    assert!(listed.starts_with(&code), "{listed:?}");
    assert!(listed.contains("Lobby"), "{listed}");
    assert!(listed.contains("0/6 connected"), "{listed}");

    let o = classplay(&["restore", &code, "Lobby", "--server", &addr]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("restored to"), "{}", stdout(&o));

    let o = classplay(&["restore", "NOPE00", "Lobby", "--server", &addr]);
    assert_eq!(o.status.code(), Some(2));
    drop(served);
}
