//! One daemon per storage device.
//!
//! The daemon binds a single device path. OPEN creates (or joins) the store
//! on that device — the options' `data_dir` is replaced by the daemon's
//! binding — CLOSE releases it, and the store is dropped when the last
//! handle closes. Connections are handled concurrently; the store serializes
//! writes and allows concurrent reads.

use std::io::Write;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;

use super::engine::{Engine, StoreOptions};
use super::wire::{
    put_bytes, read_frame, take_bytes, Frame, Opcode, ProtocolError, Status, ERROR_CODE_CORRUPT,
    ERROR_CODE_INTERNAL, ERROR_CODE_IO, ERROR_CODE_NOT_OPEN,
};

struct OpenState {
    store: Option<Arc<RwLock<Engine>>>,
    handles: usize,
}

struct Shared {
    device: PathBuf,
    state: Mutex<OpenState>,
}

impl Shared {
    fn open(&self, options: StoreOptions) -> Result<Arc<RwLock<Engine>>, (u32, String)> {
        let mut state = self.state.lock().unwrap();
        if state.store.is_none() {
            let mut options = options;
            options.data_dir = self.device.clone();
            options.options_digest = String::new();
            let engine = Engine::open(options.ensure_digest()).map_err(|e| {
                let code = match &e {
                    super::engine::EngineError::Corrupt(_) => ERROR_CODE_CORRUPT,
                    _ => ERROR_CODE_IO,
                };
                (code, e.to_string())
            })?;
            state.store = Some(Arc::new(RwLock::new(engine)));
        }
        state.handles += 1;
        Ok(state.store.as_ref().unwrap().clone())
    }

    fn close(&self) {
        let mut state = self.state.lock().unwrap();
        state.handles = state.handles.saturating_sub(1);
        if state.handles == 0 {
            if let Some(store) = state.store.take() {
                let _ = store.write().unwrap().close();
            }
        }
    }
}

fn ok_frame(request_id: u64, body: &[u8]) -> Frame {
    let mut payload = Vec::with_capacity(1 + body.len());
    payload.push(Status::Ok as u8);
    payload.extend_from_slice(body);
    Frame::new(Opcode::Status, request_id, payload)
}

fn not_found_frame(request_id: u64) -> Frame {
    Frame::new(Opcode::Status, request_id, vec![Status::NotFound as u8])
}

fn error_frame(request_id: u64, code: u32, message: &str) -> Frame {
    let mut payload = vec![Status::Error as u8];
    payload.extend_from_slice(&code.to_le_bytes());
    put_bytes(&mut payload, message.as_bytes());
    Frame::new(Opcode::Status, request_id, payload)
}

fn handle_connection(shared: &Shared, mut stream: TcpStream) {
    let mut opens_on_conn: usize = 0;
    let mut store: Option<Arc<RwLock<Engine>>> = None;

    loop {
        let frame = match read_frame(&mut stream) {
            Ok(f) => f,
            Err(ProtocolError::Closed) => break,
            Err(e) => {
                // Unknown opcode or malformed framing: reject and drop the
                // connection, since framing can no longer be trusted.
                let _ = stream.write_all(
                    &error_frame(0, ERROR_CODE_INTERNAL, &e.to_string()).encode(),
                );
                break;
            }
        };
        let id = frame.request_id;
        let response = match frame.opcode {
            Opcode::Open => {
                let mut cursor = frame.payload.as_slice();
                match take_bytes(&mut cursor)
                    .map_err(|e| e.to_string())
                    .and_then(|raw| {
                        serde_json::from_slice::<StoreOptions>(raw).map_err(|e| e.to_string())
                    }) {
                    Ok(options) => match shared.open(options) {
                        Ok(handle) => {
                            let digest = handle.read().unwrap().options().options_digest.clone();
                            opens_on_conn += 1;
                            store = Some(handle);
                            let mut body = Vec::new();
                            put_bytes(&mut body, digest.as_bytes());
                            ok_frame(id, &body)
                        }
                        Err((code, message)) => error_frame(id, code, &message),
                    },
                    Err(message) => error_frame(id, ERROR_CODE_INTERNAL, &message),
                }
            }
            Opcode::Close => {
                if opens_on_conn == 0 {
                    error_frame(id, ERROR_CODE_NOT_OPEN, "no open handle on this connection")
                } else {
                    opens_on_conn -= 1;
                    shared.close();
                    if opens_on_conn == 0 {
                        store = None;
                    }
                    ok_frame(id, &[])
                }
            }
            Opcode::Get => match &store {
                None => error_frame(id, ERROR_CODE_NOT_OPEN, "store not open"),
                Some(handle) => {
                    let mut cursor = frame.payload.as_slice();
                    match take_bytes(&mut cursor) {
                        Err(e) => error_frame(id, ERROR_CODE_INTERNAL, &e.to_string()),
                        Ok(key) => match handle.read().unwrap().get(key) {
                            Ok(Some(value)) => {
                                let mut body = Vec::with_capacity(4 + value.len());
                                put_bytes(&mut body, &value);
                                ok_frame(id, &body)
                            }
                            Ok(None) => not_found_frame(id),
                            Err(e) => error_frame(id, ERROR_CODE_IO, &e.to_string()),
                        },
                    }
                }
            },
            Opcode::Put => match &store {
                None => error_frame(id, ERROR_CODE_NOT_OPEN, "store not open"),
                Some(handle) => {
                    let mut cursor = frame.payload.as_slice();
                    let parsed = take_bytes(&mut cursor)
                        .and_then(|k| take_bytes(&mut cursor).map(|v| (k, v)));
                    match parsed {
                        Err(e) => error_frame(id, ERROR_CODE_INTERNAL, &e.to_string()),
                        Ok((key, value)) => match handle.write().unwrap().put(key, value) {
                            Ok(()) => ok_frame(id, &[]),
                            Err(e) => error_frame(id, ERROR_CODE_IO, &e.to_string()),
                        },
                    }
                }
            },
            Opcode::Delete => match &store {
                None => error_frame(id, ERROR_CODE_NOT_OPEN, "store not open"),
                Some(handle) => {
                    let mut cursor = frame.payload.as_slice();
                    match take_bytes(&mut cursor) {
                        Err(e) => error_frame(id, ERROR_CODE_INTERNAL, &e.to_string()),
                        Ok(key) => match handle.write().unwrap().delete(key) {
                            Ok(true) => ok_frame(id, &[]),
                            Ok(false) => not_found_frame(id),
                            Err(e) => error_frame(id, ERROR_CODE_IO, &e.to_string()),
                        },
                    }
                }
            },
            Opcode::Status => match &store {
                None => error_frame(id, ERROR_CODE_NOT_OPEN, "store not open"),
                Some(handle) => {
                    let stats = handle.read().unwrap().stats();
                    match serde_json::to_vec(&stats) {
                        Ok(json) => {
                            let mut body = Vec::with_capacity(4 + json.len());
                            put_bytes(&mut body, &json);
                            ok_frame(id, &body)
                        }
                        Err(e) => error_frame(id, ERROR_CODE_INTERNAL, &e.to_string()),
                    }
                }
            },
        };
        if stream.write_all(&response.encode()).is_err() {
            break;
        }
    }

    // Release handles the client leaked by disconnecting.
    for _ in 0..opens_on_conn {
        shared.close();
    }
}

/// A running daemon that can be shut down.
pub struct DaemonHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
}

impl DaemonHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.accept_thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for DaemonHandle {
    fn drop(&mut self) {
        if self.accept_thread.is_some() {
            self.stop();
        }
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, shutdown: Arc<AtomicBool>) {
    for stream in listener.incoming() {
        if shutdown.load(Ordering::SeqCst) {
            break;
        }
        match stream {
            Ok(stream) => {
                let shared = shared.clone();
                std::thread::spawn(move || handle_connection(&shared, stream));
            }
            Err(_) => continue,
        }
    }
}

/// Starts a daemon bound to `device` in a background thread. `listen` may
/// use port 0 to pick a free port; the bound address is on the handle.
pub fn spawn(listen: &str, device: &Path) -> std::io::Result<DaemonHandle> {
    let listener = TcpListener::bind(listen)?;
    let addr = listener.local_addr()?;
    let shared = Arc::new(Shared {
        device: device.to_path_buf(),
        state: Mutex::new(OpenState {
            store: None,
            handles: 0,
        }),
    });
    let shutdown = Arc::new(AtomicBool::new(false));
    let accept_shutdown = shutdown.clone();
    let accept_thread =
        std::thread::spawn(move || accept_loop(listener, shared, accept_shutdown));
    Ok(DaemonHandle {
        addr,
        shutdown,
        accept_thread: Some(accept_thread),
    })
}

/// Runs a daemon in the foreground until the process is killed.
pub fn serve(listen: &str, device: &Path) -> std::io::Result<()> {
    let handle = spawn(listen, device)?;
    eprintln!("mbwu-kvd: serving device {} on {}", device.display(), handle.addr());
    // Park forever; the accept loop owns the listener.
    loop {
        std::thread::park();
    }
}
