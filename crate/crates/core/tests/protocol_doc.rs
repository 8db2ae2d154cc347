mod protocol_examples;

use classplay_core::protocol::{decode, encode, encode_line, CLIENT_TYPES, SERVER_TYPES};

const DOC: &str = include_str!("../../../docs/protocol.md");

/// Frames in ```frame fenced blocks, each line exactly as written.
fn doc_frames() -> Vec<&'static str> {
    let mut out = Vec::new();
    let mut inside = false;
    for line in DOC.lines() {
        if line == "```frame" {
            inside = true;
        } else if inside && line == "```" {
            inside = false;
        } else if inside {
            out.push(line);
        }
    }
    out
}

#[test]
fn documented_frames_are_byte_exact() {
    let examples = protocol_examples::examples();
    if std::env::var_os("PRINT_FRAMES").is_some() {
        for m in &examples {
            println!("{}", encode_line(m));
        }
    }
    let frames = doc_frames();
    assert_eq!(frames.len(), examples.len());
    for (frame, msg) in frames.iter().zip(&examples) {
        assert_eq!(*frame, encode_line(msg));
        let mut bytes = frame.as_bytes().to_vec();
        bytes.push(b'\n');
        assert_eq!(&decode(&bytes).unwrap(), msg);
        assert_eq!(encode(msg), bytes);
    }
}

#[test]
fn every_type_is_documented() {
    let types: Vec<String> = protocol_examples::examples()
        .iter()
        .map(|m| m.body.type_name().to_owned())
        .collect();
    for t in CLIENT_TYPES.iter().chain(SERVER_TYPES) {
        assert!(types.iter().any(|x| x == t), "{t} has no example");
        assert!(DOC.contains(&format!("### `{t}`")), "{t} has no section");
    }
}
