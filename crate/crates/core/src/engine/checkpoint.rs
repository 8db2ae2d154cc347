//! Binary checkpoint container.
//!
//! Layout, all integers big-endian:
//!
//! ```text
//! magic "CLPK" | u16 version | [u8; 32] scenario sha-256 | u64 event_seq
//! | u32 payload length | payload (JSON SessionState) | u32 CRC-32 of all prior bytes
//! ```

use thiserror::Error;

use super::state::SessionState;
use crate::scenario::Scenario;

pub const MAGIC: &[u8; 4] = b"CLPK";
pub const CHECKPOINT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 32 + 8 + 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("unsupported checkpoint version {0}")]
    Version(u16),
    #[error("checkpoint belongs to scenario {found}, not {expected}")]
    HashMismatch { expected: String, found: String },
}

/// Header fields readable without a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub version: u16,
    pub scenario_hash: [u8; 32],
    pub event_seq: u64,
}

pub fn encode_checkpoint(state: &SessionState, scenario_hash: &[u8; 32]) -> Vec<u8> {
    let payload = serde_json::to_vec(state).expect("session state serializes");
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_be_bytes());
    out.extend_from_slice(scenario_hash);
    out.extend_from_slice(&state.event_seq.to_be_bytes());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_be_bytes());
    out
}

fn split(bytes: &[u8]) -> Result<(CheckpointHeader, &[u8]), CheckpointError> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(CheckpointError::Malformed(format!(
            "{} bytes is shorter than the fixed header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(CheckpointError::Malformed("bad magic".into()));
    }
    let (body, crc) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_be_bytes(crc.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(CheckpointError::Checksum { stored, computed });
    }
    let version = u16::from_be_bytes([bytes[4], bytes[5]]);
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let scenario_hash: [u8; 32] = bytes[6..38].try_into().expect("32 bytes");
    let event_seq = u64::from_be_bytes(bytes[38..46].try_into().expect("8 bytes"));
    let len = u32::from_be_bytes(bytes[46..50].try_into().expect("4 bytes")) as usize;
    if HEADER_LEN + len != body.len() {
        return Err(CheckpointError::Malformed(format!(
            "payload length {len} does not match the container"
        )));
    }
    Ok((
        CheckpointHeader {
            version,
            scenario_hash,
            event_seq,
        },
        &body[HEADER_LEN..],
    ))
}

/// Reads and integrity-checks the header.
pub fn read_header(bytes: &[u8]) -> Result<CheckpointHeader, CheckpointError> {
    split(bytes).map(|(h, _)| h)
}

/// Restores a state saved by [`encode_checkpoint`] against the same scenario.
pub fn decode_checkpoint(bytes: &[u8], s: &Scenario) -> Result<SessionState, CheckpointError> {
    let (header, payload) = split(bytes)?;
    let expected = s.content_hash();
    if header.scenario_hash != expected {
        return Err(CheckpointError::HashMismatch {
            expected: hex::encode(expected),
            found: hex::encode(header.scenario_hash),
        });
    }
    let state: SessionState = serde_json::from_slice(payload)
        .map_err(|e| CheckpointError::Malformed(format!("payload: {e}")))?;
    if state.event_seq != header.event_seq {
        return Err(CheckpointError::Malformed(
            "header and payload disagree on event_seq".into(),
        ));
    }
    Ok(state)
}
