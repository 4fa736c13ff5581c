//! Blocking client for the key-value daemon. One connection per worker.

use std::io::Write;
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use thiserror::Error;

use super::engine::{StoreOptions, StoreStats};
use super::wire::{
    put_bytes, read_frame, take_bytes, Frame, Opcode, ProtocolError, Status,
};
use crate::workload::{EndpointError, KvEndpoint};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("daemon error {code}: {message}")]
    Remote { code: u32, message: String },
    #[error("response for request {got} while awaiting {expected}")]
    RequestIdMismatch { expected: u64, got: u64 },
    #[error("malformed response: {0}")]
    Malformed(String),
}

enum Reply {
    Ok(Vec<u8>),
    NotFound,
}

pub struct KvClient {
    stream: TcpStream,
    next_id: u64,
}

impl KvClient {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<KvClient, ClientError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(KvClient { stream, next_id: 1 })
    }

    /// Client-side timeout for each request/response exchange.
    pub fn set_timeout(&mut self, timeout: Option<Duration>) -> Result<(), ClientError> {
        self.stream.set_read_timeout(timeout)?;
        self.stream.set_write_timeout(timeout)?;
        Ok(())
    }

    fn exchange(&mut self, opcode: Opcode, payload: Vec<u8>) -> Result<Reply, ClientError> {
        let id = self.next_id;
        self.next_id += 1;
        let frame = Frame::new(opcode, id, payload);
        self.stream.write_all(&frame.encode())?;
        let response = read_frame(&mut self.stream)?;
        if response.request_id != id {
            return Err(ClientError::RequestIdMismatch {
                expected: id,
                got: response.request_id,
            });
        }
        let body = response.payload;
        let Some((&status_byte, rest)) = body.split_first() else {
            return Err(ClientError::Malformed("empty response payload".into()));
        };
        match Status::from_u8(status_byte)? {
            Status::Ok => Ok(Reply::Ok(rest.to_vec())),
            Status::NotFound => Ok(Reply::NotFound),
            Status::Error => {
                if rest.len() < 4 {
                    return Err(ClientError::Malformed("short error payload".into()));
                }
                let code = u32::from_le_bytes(rest[..4].try_into().unwrap());
                let mut cursor = &rest[4..];
                let message = take_bytes(&mut cursor)
                    .map(|m| String::from_utf8_lossy(m).into_owned())
                    .unwrap_or_default();
                Err(ClientError::Remote { code, message })
            }
        }
    }

    /// Opens the store on the daemon's device; returns the daemon's options
    /// digest so callers can verify every platform runs the same tuning.
    pub fn open(&mut self, options: &StoreOptions) -> Result<String, ClientError> {
        let json = serde_json::to_vec(options)
            .map_err(|e| ClientError::Malformed(e.to_string()))?;
        let mut payload = Vec::with_capacity(4 + json.len());
        put_bytes(&mut payload, &json);
        match self.exchange(Opcode::Open, payload)? {
            Reply::Ok(body) => {
                let mut cursor = body.as_slice();
                let digest = take_bytes(&mut cursor)
                    .map_err(|e| ClientError::Malformed(e.to_string()))?;
                Ok(String::from_utf8_lossy(digest).into_owned())
            }
            Reply::NotFound => Err(ClientError::Malformed("NOT_FOUND for OPEN".into())),
        }
    }

    pub fn close(&mut self) -> Result<(), ClientError> {
        self.exchange(Opcode::Close, Vec::new())?;
        Ok(())
    }

    pub fn get(&mut self, key: &[u8]) -> Result<Option<Vec<u8>>, ClientError> {
        let mut payload = Vec::with_capacity(4 + key.len());
        put_bytes(&mut payload, key);
        match self.exchange(Opcode::Get, payload)? {
            Reply::Ok(body) => {
                let mut cursor = body.as_slice();
                let value = take_bytes(&mut cursor)
                    .map_err(|e| ClientError::Malformed(e.to_string()))?;
                Ok(Some(value.to_vec()))
            }
            Reply::NotFound => Ok(None),
        }
    }

    pub fn put(&mut self, key: &[u8], value: &[u8]) -> Result<(), ClientError> {
        let mut payload = Vec::with_capacity(8 + key.len() + value.len());
        put_bytes(&mut payload, key);
        put_bytes(&mut payload, value);
        self.exchange(Opcode::Put, payload)?;
        Ok(())
    }

    /// Returns whether the key existed.
    pub fn delete(&mut self, key: &[u8]) -> Result<bool, ClientError> {
        let mut payload = Vec::with_capacity(4 + key.len());
        put_bytes(&mut payload, key);
        match self.exchange(Opcode::Delete, payload)? {
            Reply::Ok(_) => Ok(true),
            Reply::NotFound => Ok(false),
        }
    }

    /// Engine counters, including write amplification once defined.
    pub fn status(&mut self) -> Result<StoreStats, ClientError> {
        match self.exchange(Opcode::Status, Vec::new())? {
            Reply::Ok(body) => {
                let mut cursor = body.as_slice();
                let json = take_bytes(&mut cursor)
                    .map_err(|e| ClientError::Malformed(e.to_string()))?;
                serde_json::from_slice(json).map_err(|e| ClientError::Malformed(e.to_string()))
            }
            Reply::NotFound => Err(ClientError::Malformed("NOT_FOUND for STATUS".into())),
        }
    }
}

impl From<ClientError> for EndpointError {
    fn from(e: ClientError) -> EndpointError {
        match e {
            ClientError::Io(io) => EndpointError::Io(io),
            ClientError::Remote { code, message } => EndpointError::Remote { code, message },
            other => EndpointError::Other(other.to_string()),
        }
    }
}

impl KvEndpoint for KvClient {
    fn put(&mut self, key: &[u8], value: &[u8]) -> Result<(), EndpointError> {
        KvClient::put(self, key, value).map_err(Into::into)
    }

    fn get(&mut self, key: &[u8]) -> Result<Option<Vec<u8>>, EndpointError> {
        KvClient::get(self, key).map_err(Into::into)
    }

    fn delete(&mut self, key: &[u8]) -> Result<bool, EndpointError> {
        KvClient::delete(self, key).map_err(Into::into)
    }
}
