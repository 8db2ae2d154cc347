use classplay_core::engine::assign::rng_for;
use classplay_core::protocol::{decode, encode, Body, FrameReader, CLIENT_TYPES, SERVER_TYPES};
use classplay_sim::corpus::{random_body, random_message};
use rand::Rng;

#[test]
fn every_catalog_type_is_generated() {
    let mut rng = rng_for(1, "corpus", 0);
    let n = CLIENT_TYPES.len() + SERVER_TYPES.len();
    let names: Vec<&str> = (0..n)
        .map(|k| random_body(&mut rng, k).type_name())
        .collect();
    let expected: Vec<&str> = CLIENT_TYPES.iter().chain(SERVER_TYPES).copied().collect();
    assert_eq!(names, expected);
}

#[test]
fn generated_messages_round_trip() {
    let mut rng = rng_for(2, "corpus", 0);
    for _ in 0..2_000 {
        let msg = random_message(&mut rng);
        let bytes = encode(&msg);
        assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 1);
        assert_eq!(decode(&bytes).unwrap(), msg);
    }
}

#[test]
fn spliced_stream_decodes_in_order() {
    let mut rng = rng_for(3, "corpus", 0);
    let msgs: Vec<_> = (0..300).map(|_| random_message(&mut rng)).collect();
    let stream: Vec<u8> = msgs.iter().flat_map(encode).collect();
    let mut reader = FrameReader::default();
    let mut got = Vec::new();
    let mut at = 0;
    while at < stream.len() {
        let step = rng.random_range(1..64).min(stream.len() - at);
        for frame in reader.push(&stream[at..at + step]) {
            got.push(decode(&frame.unwrap()).unwrap());
        }
        at += step;
    }
    assert_eq!(reader.pending(), 0);
    assert_eq!(got, msgs);
    assert!(got.iter().any(|m| matches!(m.body, Body::Resync(_))));
}
