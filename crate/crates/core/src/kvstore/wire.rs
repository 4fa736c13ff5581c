//! Length-prefixed binary frames.
//!
//! Every message is `[length: u32 LE][opcode: u8][request_id: u64 LE]
//! [payload]` where `length` covers everything after itself. Integers are
//! little-endian; keys and values inside payloads are `u32`-length-prefixed.
//! Every request gets exactly one response frame carrying the same
//! `request_id`; responses use the [`Opcode::Status`] opcode with a leading
//! status byte.

use std::io::{Read, Write};

use thiserror::Error;

/// Upper bound on a frame body; anything larger is rejected before
/// allocation.
pub const MAX_FRAME_LEN: u32 = 64 * 1024 * 1024;

pub const ERROR_CODE_IO: u32 = 1;
pub const ERROR_CODE_NOT_OPEN: u32 = 2;
pub const ERROR_CODE_CORRUPT: u32 = 3;
pub const ERROR_CODE_INTERNAL: u32 = 4;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown opcode {0:#04x}")]
    UnknownOpcode(u8),
    #[error("unknown status byte {0:#04x}")]
    UnknownStatus(u8),
    #[error("frame of {0} bytes exceeds the {MAX_FRAME_LEN}-byte limit")]
    TooLarge(u32),
    #[error("truncated frame: {0}")]
    Truncated(&'static str),
    #[error("connection closed")]
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    Open = 0,
    Close = 1,
    Get = 2,
    Put = 3,
    Delete = 4,
    Status = 5,
}

impl Opcode {
    pub fn from_u8(byte: u8) -> Result<Opcode, ProtocolError> {
        Ok(match byte {
            0 => Opcode::Open,
            1 => Opcode::Close,
            2 => Opcode::Get,
            3 => Opcode::Put,
            4 => Opcode::Delete,
            5 => Opcode::Status,
            other => return Err(ProtocolError::UnknownOpcode(other)),
        })
    }
}

/// Response status byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Status {
    Ok = 0,
    NotFound = 1,
    Error = 2,
}

impl Status {
    pub fn from_u8(byte: u8) -> Result<Status, ProtocolError> {
        Ok(match byte {
            0 => Status::Ok,
            1 => Status::NotFound,
            2 => Status::Error,
            other => return Err(ProtocolError::UnknownStatus(other)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub opcode: Opcode,
    pub request_id: u64,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(opcode: Opcode, request_id: u64, payload: Vec<u8>) -> Self {
        Frame {
            opcode,
            request_id,
            payload,
        }
    }

    /// Body length (opcode + request id + payload).
    fn body_len(&self) -> u32 {
        1 + 8 + self.payload.len() as u32
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.body_len() as usize);
        out.extend_from_slice(&self.body_len().to_le_bytes());
        out.push(self.opcode as u8);
        out.extend_from_slice(&self.request_id.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes one complete frame (length prefix included).
    pub fn decode(bytes: &[u8]) -> Result<Frame, ProtocolError> {
        if bytes.len() < 4 {
            return Err(ProtocolError::Truncated("length prefix"));
        }
        let len = u32::from_le_bytes(bytes[..4].try_into().unwrap());
        if len > MAX_FRAME_LEN {
            return Err(ProtocolError::TooLarge(len));
        }
        if len < 9 {
            return Err(ProtocolError::Truncated("body shorter than header"));
        }
        if bytes.len() != 4 + len as usize {
            return Err(ProtocolError::Truncated("body length mismatch"));
        }
        let opcode = Opcode::from_u8(bytes[4])?;
        let request_id = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
        Ok(Frame {
            opcode,
            request_id,
            payload: bytes[13..].to_vec(),
        })
    }
}

pub fn write_frame<W: Write>(writer: &mut W, frame: &Frame) -> Result<(), ProtocolError> {
    writer.write_all(&frame.encode())?;
    Ok(())
}

/// Reads one frame; `Err(Closed)` on a clean EOF at a frame boundary.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Frame, ProtocolError> {
    let mut len_buf = [0u8; 4];
    match reader.read_exact(&mut len_buf) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            return Err(ProtocolError::Closed)
        }
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_le_bytes(len_buf);
    if len > MAX_FRAME_LEN {
        return Err(ProtocolError::TooLarge(len));
    }
    if len < 9 {
        return Err(ProtocolError::Truncated("body shorter than header"));
    }
    let mut body = vec![0u8; len as usize];
    reader.read_exact(&mut body)?;
    let opcode = Opcode::from_u8(body[0])?;
    let request_id = u64::from_le_bytes(body[1..9].try_into().unwrap());
    Ok(Frame {
        opcode,
        request_id,
        payload: body[9..].to_vec(),
    })
}

/// Appends a `u32`-length-prefixed byte string.
pub fn put_bytes(buf: &mut Vec<u8>, bytes: &[u8]) {
    buf.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    buf.extend_from_slice(bytes);
}

/// Reads a `u32`-length-prefixed byte string, advancing the cursor.
pub fn take_bytes<'a>(buf: &mut &'a [u8]) -> Result<&'a [u8], ProtocolError> {
    if buf.len() < 4 {
        return Err(ProtocolError::Truncated("byte-string length"));
    }
    let len = u32::from_le_bytes(buf[..4].try_into().unwrap()) as usize;
    if buf.len() < 4 + len {
        return Err(ProtocolError::Truncated("byte-string body"));
    }
    let (head, rest) = buf[4..].split_at(len);
    *buf = rest;
    Ok(head)
}
