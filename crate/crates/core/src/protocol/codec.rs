use serde_json::Value;
use thiserror::Error;

use super::message::{codes, is_known_type, WireMessage, PROTOCOL_VERSION};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("bad frame: {0}")]
    Frame(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("unknown message type \"{0}\"")]
    UnknownType(String),
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u64),
}

impl DecodeError {
    /// Error code sent back to the peer.
    pub fn code(&self) -> &'static str {
        match self {
            DecodeError::Frame(_) => codes::FRAME,
            DecodeError::Schema(_) => codes::SCHEMA,
            DecodeError::UnknownType(_) => codes::UNKNOWN_TYPE,
            DecodeError::UnsupportedVersion(_) => codes::VERSION,
        }
    }
}

/// Canonical text form: compact JSON with sorted keys, no trailing LF.
pub fn encode_line(msg: &WireMessage) -> String {
    // serde_json's map is ordered by key, so going through a Value sorts
    // every object recursively.
    let v = serde_json::to_value(msg).expect("messages serialize");
    serde_json::to_string(&v).expect("values serialize")
}

/// One LF-terminated frame.
pub fn encode(msg: &WireMessage) -> Vec<u8> {
    let mut out = encode_line(msg).into_bytes();
    out.push(b'\n');
    out
}

/// Decodes one frame. The input must be a single line ending in LF.
pub fn decode(frame: &[u8]) -> Result<WireMessage, DecodeError> {
    let Some(body) = frame.strip_suffix(b"\n") else {
        return Err(DecodeError::Frame("missing LF terminator".into()));
    };
    if body.contains(&b'\n') {
        return Err(DecodeError::Frame("embedded LF".into()));
    }
    let text =
        std::str::from_utf8(body).map_err(|e| DecodeError::Frame(format!("not UTF-8: {e}")))?;
    let value: Value =
        serde_json::from_str(text).map_err(|e| DecodeError::Frame(format!("not JSON: {e}")))?;
    let Value::Object(obj) = &value else {
        return Err(DecodeError::Schema("frame is not a JSON object".into()));
    };
    match obj.get("v") {
        Some(Value::Number(n)) => match n.as_u64() {
            Some(v) if v == u64::from(PROTOCOL_VERSION) => {}
            Some(v) => return Err(DecodeError::UnsupportedVersion(v)),
            None => {
                return Err(DecodeError::Schema(
                    "\"v\" is not an unsigned integer".into(),
                ))
            }
        },
        Some(_) => return Err(DecodeError::Schema("\"v\" is not a number".into())),
        None => return Err(DecodeError::Schema("missing \"v\"".into())),
    }
    match obj.get("type") {
        Some(Value::String(t)) if !is_known_type(t) => {
            return Err(DecodeError::UnknownType(t.clone()))
        }
        Some(Value::String(_)) => {}
        Some(_) => return Err(DecodeError::Schema("\"type\" is not a string".into())),
        None => return Err(DecodeError::Schema("missing \"type\"".into())),
    }
    serde_json::from_value(value).map_err(|e| DecodeError::Schema(e.to_string()))
}
