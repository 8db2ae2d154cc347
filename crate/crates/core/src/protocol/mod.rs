//! Wire protocol: message catalog, line codec, framing and the proximity
//! handshake check.

mod codec;
mod frame;
mod handshake;
mod message;

pub use codec::{decode, encode, encode_line, DecodeError};
pub use frame::{FrameError, FrameReader, MAX_FRAME_LEN};
pub use handshake::{verify_proximity, HandshakeError, ProximityMatch};
pub use message::*;
