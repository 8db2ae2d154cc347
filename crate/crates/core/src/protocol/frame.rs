use thiserror::Error;

/// Frames longer than this are discarded up to the next LF.
pub const MAX_FRAME_LEN: usize = 64 * 1024;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame exceeds {0} bytes")]
    TooLong(usize),
}

/// Splits a byte stream into LF-terminated frames. After an oversized frame
/// the reader skips to the next LF and carries on.
#[derive(Debug)]
pub struct FrameReader {
    buf: Vec<u8>,
    max_len: usize,
    discarding: bool,
}

impl Default for FrameReader {
    fn default() -> Self {
        Self::new(MAX_FRAME_LEN)
    }
}

impl FrameReader {
    pub fn new(max_len: usize) -> Self {
        Self {
            buf: Vec::new(),
            max_len,
            discarding: false,
        }
    }

    /// Feeds bytes; returns every frame completed by them, each including
    /// its LF.
    pub fn push(&mut self, mut bytes: &[u8]) -> Vec<Result<Vec<u8>, FrameError>> {
        let mut out = Vec::new();
        while !bytes.is_empty() {
            match bytes.iter().position(|&b| b == b'\n') {
                Some(i) => {
                    let (head, rest) = bytes.split_at(i + 1);
                    bytes = rest;
                    if self.discarding {
                        self.discarding = false;
                        continue;
                    }
                    if self.buf.len() + head.len() > self.max_len + 1 {
                        self.buf.clear();
                        out.push(Err(FrameError::TooLong(self.max_len)));
                        continue;
                    }
                    self.buf.extend_from_slice(head);
                    out.push(Ok(std::mem::take(&mut self.buf)));
                }
                None => {
                    if !self.discarding {
                        self.buf.extend_from_slice(bytes);
                        if self.buf.len() > self.max_len {
                            self.buf.clear();
                            self.discarding = true;
                            out.push(Err(FrameError::TooLong(self.max_len)));
                        }
                    }
                    bytes = &[];
                }
            }
        }
        out
    }

    /// Bytes of an incomplete trailing frame.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }
}
