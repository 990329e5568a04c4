//! Minimal binary wire protocol plus reference server and client.
//!
//! Frame layout (big-endian):
//!
//! ```text
//! magic 0x4F 0x50 | version 0x01 | kind (1=QUERY 2=ANSWER 3=ERROR)
//! | time: u64 | body_len: u32 | body
//! ```
//!
//! QUERY body is a single bitmask byte (bit0 = A, bit1 = B); ANSWER body is
//! the requested payloads concatenated A-then-B; ERROR body is a one-byte
//! code. The time index is client-driven, so tests are deterministic without
//! real clocks. One connection is one session; messages are materialized
//! lazily per (connection, t) and never shared across connections.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crate::markov::Source;
use crate::scheme::QuerySymbol;
use crate::sim::{AnswerSource, InProcessServer, SessionConfig, SessionStats};

pub const MAGIC: [u8; 2] = [0x4F, 0x50];
pub const VERSION: u8 = 0x01;
pub const DEFAULT_PORT: u16 = 4791;
const HEADER_LEN: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("bad magic")]
    BadMagic,
    #[error("bad version {0}")]
    BadVersion(u8),
    #[error("bad frame kind {0}")]
    BadKind(u8),
    #[error("truncated frame")]
    TruncatedFrame,
    #[error("declared body length does not match buffer")]
    LengthMismatch,
    #[error("bad query mask {0}")]
    BadQueryMask(u8),
    #[error("server reported error code {0}")]
    ServerError(u8),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// ERROR frame body codes.
pub mod error_code {
    pub const BAD_MAGIC: u8 = 1;
    pub const BAD_VERSION: u8 = 2;
    pub const BAD_KIND: u8 = 3;
    pub const TRUNCATED: u8 = 4;
    pub const BAD_QUERY_MASK: u8 = 5;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Query = 1,
    Answer = 2,
    Error = 3,
}

impl FrameKind {
    fn from_byte(b: u8) -> Result<FrameKind, NetError> {
        match b {
            1 => Ok(FrameKind::Query),
            2 => Ok(FrameKind::Answer),
            3 => Ok(FrameKind::Error),
            other => Err(NetError::BadKind(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub time: u64,
    pub body: Vec<u8>,
}

impl Frame {
    pub fn query(time: u64, q: QuerySymbol) -> Frame {
        Frame {
            kind: FrameKind::Query,
            time,
            body: vec![q.mask()],
        }
    }

    pub fn answer(time: u64, payload: Vec<u8>) -> Frame {
        Frame {
            kind: FrameKind::Answer,
            time,
            body: payload,
        }
    }

    pub fn error(time: u64, code: u8) -> Frame {
        Frame {
            kind: FrameKind::Error,
            time,
            body: vec![code],
        }
    }

    /// Query symbol carried by a QUERY frame.
    pub fn query_symbol(&self) -> Result<QuerySymbol, NetError> {
        if self.body.len() != 1 {
            return Err(NetError::TruncatedFrame);
        }
        QuerySymbol::from_mask(self.body[0]).ok_or(NetError::BadQueryMask(self.body[0]))
    }
}

pub fn encode_frame(f: &Frame) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + f.body.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(f.kind as u8);
    out.extend_from_slice(&f.time.to_be_bytes());
    out.extend_from_slice(&(f.body.len() as u32).to_be_bytes());
    out.extend_from_slice(&f.body);
    out
}

/// Decodes exactly one frame from the buffer; the buffer must contain the
/// whole frame and nothing else.
pub fn decode_frame(bytes: &[u8]) -> Result<Frame, NetError> {
    if bytes.len() < HEADER_LEN {
        return Err(NetError::TruncatedFrame);
    }
    if bytes[0..2] != MAGIC {
        return Err(NetError::BadMagic);
    }
    if bytes[2] != VERSION {
        return Err(NetError::BadVersion(bytes[2]));
    }
    let kind = FrameKind::from_byte(bytes[3])?;
    let time = u64::from_be_bytes(bytes[4..12].try_into().unwrap());
    let body_len = u32::from_be_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if bytes.len() < HEADER_LEN + body_len {
        return Err(NetError::TruncatedFrame);
    }
    if bytes.len() != HEADER_LEN + body_len {
        return Err(NetError::LengthMismatch);
    }
    let frame = Frame {
        kind,
        time,
        body: bytes[HEADER_LEN..].to_vec(),
    };
    if frame.kind == FrameKind::Query {
        frame.query_symbol()?;
    }
    Ok(frame)
}

fn read_frame(stream: &mut impl Read) -> Result<Frame, NetError> {
    let mut header = [0u8; HEADER_LEN];
    stream.read_exact(&mut header)?;
    if header[0..2] != MAGIC {
        return Err(NetError::BadMagic);
    }
    if header[2] != VERSION {
        return Err(NetError::BadVersion(header[2]));
    }
    let kind = FrameKind::from_byte(header[3])?;
    let time = u64::from_be_bytes(header[4..12].try_into().unwrap());
    let body_len = u32::from_be_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut body = vec![0u8; body_len];
    stream.read_exact(&mut body)?;
    Ok(Frame { kind, time, body })
}

fn write_frame(stream: &mut impl Write, f: &Frame) -> Result<(), NetError> {
    stream.write_all(&encode_frame(f))?;
    Ok(())
}

/// Running reference server. Dropping or calling [`Server::stop`] shuts the
/// accept loop down.
pub struct Server {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl Server {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stop(mut self) {
        self.shutdown_now();
    }

    fn shutdown_now(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.shutdown_now();
    }
}

/// Binds and serves. Per connection, each QUERY at time t is answered with
/// the requested sources' fresh L-bit messages for that t; the server never
/// learns which source the user actually wants. Protocol errors are answered
/// with an ERROR frame and the connection closed.
pub fn serve(bind: impl ToSocketAddrs, message_bits: usize, seed: u64) -> Result<Server, NetError> {
    assert!(message_bits > 0 && message_bits % 8 == 0);
    let listener = TcpListener::bind(bind)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let stop = shutdown.clone();
    let conn_counter = Arc::new(AtomicU64::new(0));
    let handle = std::thread::spawn(move || {
        while !stop.load(Ordering::SeqCst) {
            match listener.accept() {
                Ok((stream, _)) => {
                    let conn_id = conn_counter.fetch_add(1, Ordering::SeqCst);
                    std::thread::spawn(move || {
                        let _ = handle_connection(stream, message_bits / 8, seed, conn_id);
                    });
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    std::thread::sleep(Duration::from_millis(10));
                }
                Err(_) => break,
            }
        }
    });
    Ok(Server {
        addr,
        shutdown,
        handle: Some(handle),
    })
}

fn handle_connection(
    mut stream: TcpStream,
    message_bytes: usize,
    seed: u64,
    conn_id: u64,
) -> Result<(), NetError> {
    stream.set_nodelay(true)?;
    let mut store = InProcessServer::new(seed.wrapping_add(conn_id), message_bytes);
    loop {
        let frame = match read_frame(&mut stream) {
            Ok(f) => f,
            Err(NetError::Io(e)) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => {
                let code = match &e {
                    NetError::BadMagic => error_code::BAD_MAGIC,
                    NetError::BadVersion(_) => error_code::BAD_VERSION,
                    NetError::BadKind(_) => error_code::BAD_KIND,
                    _ => error_code::TRUNCATED,
                };
                let _ = write_frame(&mut stream, &Frame::error(0, code));
                return Err(e);
            }
        };
        if frame.kind != FrameKind::Query {
            let _ = write_frame(&mut stream, &Frame::error(frame.time, error_code::BAD_KIND));
            return Err(NetError::BadKind(frame.kind as u8));
        }
        let q = match frame.query_symbol() {
            Ok(q) => q,
            Err(e) => {
                let _ = write_frame(
                    &mut stream,
                    &Frame::error(frame.time, error_code::BAD_QUERY_MASK),
                );
                return Err(e);
            }
        };
        let payload = store
            .answer(frame.time, q)
            .expect("in-process answer cannot fail");
        write_frame(&mut stream, &Frame::answer(frame.time, payload))?;
    }
}

/// Client-side answer source: one TCP connection per trial session.
struct WireSource {
    stream: TcpStream,
}

impl AnswerSource for WireSource {
    fn answer(&mut self, t: u64, q: QuerySymbol) -> crate::Result<Vec<u8>> {
        let io_err = |e: NetError| crate::Error::Parse(format!("wire error: {e}"));
        write_frame(&mut self.stream, &Frame::query(t, q)).map_err(io_err)?;
        let frame = read_frame(&mut self.stream).map_err(io_err)?;
        match frame.kind {
            FrameKind::Answer => Ok(frame.body),
            FrameKind::Error => Err(io_err(NetError::ServerError(
                frame.body.first().copied().unwrap_or(0),
            ))),
            FrameKind::Query => Err(io_err(NetError::BadKind(FrameKind::Query as u8))),
        }
    }

    fn expected_payload(&mut self, _t: u64, _x: Source) -> Option<Vec<u8>> {
        None
    }
}

/// Runs a live session against a server. Identical client logic (and random
/// streams) to the in-process simulator, so the same seed yields the same
/// query sequence and per-t byte counts.
pub fn fetch(server: impl ToSocketAddrs + Copy, cfg: &SessionConfig) -> crate::Result<SessionStats> {
    crate::sim::run_session_with(cfg, |_trial| {
        let stream = TcpStream::connect(server)
            .map_err(|e| crate::Error::Parse(format!("connect failed: {e}")))?;
        stream.set_nodelay(true).ok();
        Ok(WireSource { stream })
    })
}
