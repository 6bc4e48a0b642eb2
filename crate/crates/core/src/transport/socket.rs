//! TCP transport speaking a fixed little-endian wire format.
//!
//! Each frame is a 20-byte header — phase_id: u32, src: u32, dst: u32,
//! payload_bytes: u64, all little-endian — followed by the payload as
//! interleaved f64 re/im pairs, little-endian. Connections are established
//! lazily per ordered rank pair; the dialing side announces itself with a
//! zero-payload hello frame whose phase id is `u32::MAX`. A background
//! accept loop drains every inbound connection into the rank's mailbox, so
//! writes never deadlock against an unposted receive.

use std::io::{ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use super::mailbox::{ArrivalOrder, Endpoint};
use crate::comm::{CommError, Message, OpHandle, Transport, NUM_PHASES};
use crate::grid::POINT_BYTES;

pub const WIRE_HEADER_BYTES: usize = 20;

/// Connection preamble carrying the dialer's rank; never enters a mailbox.
const HELLO_PHASE: u32 = u32::MAX;

/// Refuse frames claiming more than this many payload bytes.
const MAX_PAYLOAD_BYTES: u64 = 1 << 34;

const ACCEPT_POLL: Duration = Duration::from_millis(2);
const READ_POLL: Duration = Duration::from_millis(50);
const DIAL_RETRY: Duration = Duration::from_millis(10);

pub fn encode_header(phase: u32, src: u32, dst: u32, payload_bytes: u64) -> [u8; WIRE_HEADER_BYTES] {
    let mut h = [0u8; WIRE_HEADER_BYTES];
    h[0..4].copy_from_slice(&phase.to_le_bytes());
    h[4..8].copy_from_slice(&src.to_le_bytes());
    h[8..12].copy_from_slice(&dst.to_le_bytes());
    h[12..20].copy_from_slice(&payload_bytes.to_le_bytes());
    h
}

pub fn decode_header(h: &[u8; WIRE_HEADER_BYTES]) -> (u32, u32, u32, u64) {
    (
        u32::from_le_bytes(h[0..4].try_into().unwrap()),
        u32::from_le_bytes(h[4..8].try_into().unwrap()),
        u32::from_le_bytes(h[8..12].try_into().unwrap()),
        u64::from_le_bytes(h[12..20].try_into().unwrap()),
    )
}

fn encode_frame(msg: &Message) -> Vec<u8> {
    let payload_bytes = msg.payload_bytes();
    let mut buf = Vec::with_capacity(WIRE_HEADER_BYTES + payload_bytes as usize);
    buf.extend_from_slice(&encode_header(
        msg.phase,
        msg.src as u32,
        msg.dst as u32,
        payload_bytes,
    ));
    for v in &msg.payload {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    buf
}

fn decode_payload(bytes: &[u8]) -> Vec<Complex64> {
    bytes
        .chunks_exact(POINT_BYTES)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect()
}

struct SockShared {
    rank: usize,
    np: usize,
    addrs: Vec<SocketAddr>,
    endpoint: Endpoint,
    writers: Mutex<Vec<Option<TcpStream>>>,
    sent_bytes: [AtomicU64; NUM_PHASES],
    shutdown: AtomicBool,
    connect_timeout: Duration,
}

/// Socket-backed implementation of the transport contract.
pub struct SocketTransport {
    shared: Arc<SockShared>,
    accept_thread: Option<thread::JoinHandle<()>>,
}

/// Bind `addrs[rank]` and join the mesh. Peers are dialed on first send and
/// must become reachable within `connect_timeout`.
pub fn socket_connect(
    rank: usize,
    addrs: &[SocketAddr],
    connect_timeout: Duration,
) -> Result<SocketTransport, CommError> {
    let listener = TcpListener::bind(addrs[rank]).map_err(|e| CommError::Connect {
        addr: addrs[rank].to_string(),
        detail: format!("bind failed: {e}"),
    })?;
    SocketTransport::from_listener(listener, rank, addrs.to_vec(), connect_timeout)
}

/// Pre-bound listeners on ephemeral loopback ports, plus their address
/// table. Binding everything before any worker dials removes startup races.
pub fn ephemeral_loopback_set(np: usize) -> std::io::Result<(Vec<TcpListener>, Vec<SocketAddr>)> {
    let mut listeners = Vec::with_capacity(np);
    let mut addrs = Vec::with_capacity(np);
    for _ in 0..np {
        let l = TcpListener::bind("127.0.0.1:0")?;
        addrs.push(l.local_addr()?);
        listeners.push(l);
    }
    Ok((listeners, addrs))
}

impl SocketTransport {
    pub fn from_listener(
        listener: TcpListener,
        rank: usize,
        addrs: Vec<SocketAddr>,
        connect_timeout: Duration,
    ) -> Result<Self, CommError> {
        let np = addrs.len();
        assert!(rank < np, "rank {rank} out of range for {np} addresses");
        listener
            .set_nonblocking(true)
            .map_err(|e| CommError::Connect {
                addr: addrs[rank].to_string(),
                detail: e.to_string(),
            })?;
        let shared = Arc::new(SockShared {
            rank,
            np,
            addrs,
            endpoint: Endpoint::new(),
            writers: Mutex::new((0..np).map(|_| None).collect()),
            sent_bytes: std::array::from_fn(|_| AtomicU64::new(0)),
            shutdown: AtomicBool::new(false),
            connect_timeout,
        });
        let accept_shared = Arc::clone(&shared);
        let accept_thread = thread::Builder::new()
            .name(format!("sock-accept-{rank}"))
            .spawn(move || accept_loop(listener, accept_shared))
            .expect("spawn accept thread");
        Ok(Self {
            shared,
            accept_thread: Some(accept_thread),
        })
    }

    fn dial(&self, peer: usize) -> Result<TcpStream, CommError> {
        let addr = self.shared.addrs[peer];
        let deadline = Instant::now() + self.shared.connect_timeout;
        loop {
            match TcpStream::connect_timeout(&addr, self.shared.connect_timeout) {
                Ok(stream) => {
                    stream.set_nodelay(true).ok();
                    let mut s = stream;
                    // Hello frame identifies us to the acceptor's reader.
                    let hello = encode_header(
                        HELLO_PHASE,
                        self.shared.rank as u32,
                        peer as u32,
                        0,
                    );
                    s.write_all(&hello).map_err(|e| CommError::Transport {
                        peer,
                        detail: format!("hello write failed: {e}"),
                    })?;
                    return Ok(s);
                }
                Err(e) => {
                    if Instant::now() >= deadline {
                        return Err(CommError::Connect {
                            addr: addr.to_string(),
                            detail: format!("timed out: {e}"),
                        });
                    }
                    thread::sleep(DIAL_RETRY);
                }
            }
        }
    }

    fn write_msg(&self, msg: &Message) -> Result<(), CommError> {
        let peer = msg.dst;
        let frame = encode_frame(msg);
        let mut writers = self.shared.writers.lock().unwrap();
        if writers[peer].is_none() {
            writers[peer] = Some(self.dial(peer)?);
        }
        let stream = writers[peer].as_mut().unwrap();
        stream.write_all(&frame).map_err(|e| CommError::Transport {
            peer,
            detail: format!("write failed: {e}"),
        })
    }
}

impl Transport for SocketTransport {
    fn rank(&self) -> usize {
        self.shared.rank
    }

    fn size(&self) -> usize {
        self.shared.np
    }

    fn post_send(&self, msg: Message) -> Result<OpHandle, CommError> {
        if msg.dst >= self.shared.np {
            return Err(CommError::InvalidPeer {
                peer: msg.dst,
                np: self.shared.np,
            });
        }
        if msg.phase as usize >= NUM_PHASES {
            return Err(CommError::InvalidPhase(msg.phase));
        }
        self.shared.sent_bytes[msg.phase as usize]
            .fetch_add(msg.payload_bytes(), Ordering::Relaxed);
        if msg.dst == self.shared.rank {
            self.shared.endpoint.mailbox.push(msg);
        } else {
            self.write_msg(&msg)?;
        }
        Ok(self.shared.endpoint.issue_send_handle())
    }

    fn post_recv(&self, src: usize, phase: u32) -> Result<OpHandle, CommError> {
        if src >= self.shared.np {
            return Err(CommError::InvalidPeer {
                peer: src,
                np: self.shared.np,
            });
        }
        Ok(self.shared.endpoint.issue_recv_handle(src, phase))
    }

    fn wait_all(&self, handles: &[OpHandle]) -> Result<Vec<Message>, CommError> {
        self.shared.endpoint.wait_all(handles)
    }

    fn wait_some(&self, handles: &mut Vec<OpHandle>) -> Result<Vec<Message>, CommError> {
        self.shared.endpoint.wait_some(handles, ArrivalOrder::Natural)
    }

    /// The collective decomposes into the pairwise ring schedule: step i
    /// sends to rank+i and receives from rank-i, skipping absent payloads.
    fn all_to_all_variable(
        &self,
        phase: u32,
        mut sends: Vec<Option<Message>>,
        recv_from: &[bool],
    ) -> Result<Vec<Option<Message>>, CommError> {
        let np = self.shared.np;
        let me = self.shared.rank;
        let mut out: Vec<Option<Message>> = (0..np).map(|_| None).collect();
        if let Some(msg) = sends[me].take() {
            self.shared.endpoint.mailbox.push(msg);
        }
        if recv_from.get(me).copied().unwrap_or(false) {
            out[me] = Some(self.shared.endpoint.mailbox.pop_blocking(me, phase)?);
        }
        for i in 1..np {
            let dst = (me + i) % np;
            let src = (me + np - i) % np;
            if let Some(msg) = sends[dst].take() {
                self.post_send(msg)?;
            }
            if recv_from[src] {
                out[src] = Some(self.shared.endpoint.mailbox.pop_blocking(src, phase)?);
            }
        }
        Ok(out)
    }

    fn sent_payload_bytes(&self, phase: u32) -> u64 {
        self.shared.sent_bytes[phase as usize].load(Ordering::Relaxed)
    }
}

impl Drop for SocketTransport {
    fn drop(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        // Closing the write halves lets peer reader threads see EOF.
        self.shared.writers.lock().unwrap().iter_mut().for_each(|w| {
            *w = None;
        });
        if let Some(t) = self.accept_thread.take() {
            t.join().ok();
        }
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<SockShared>) {
    let mut readers = Vec::new();
    while !shared.shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let reader_shared = Arc::clone(&shared);
                readers.push(
                    thread::Builder::new()
                        .name(format!("sock-read-{}", shared.rank))
                        .spawn(move || reader_loop(stream, reader_shared))
                        .expect("spawn reader thread"),
                );
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
            Err(_) => break,
        }
    }
    for r in readers {
        r.join().ok();
    }
}

/// Read a full buffer, tolerating the nonblocking poll timeout. Returns
/// Ok(false) on clean EOF at a frame boundary, errors on mid-frame EOF.
fn read_frame_exact(
    stream: &mut TcpStream,
    buf: &mut [u8],
    shutdown: &AtomicBool,
    at_boundary: bool,
) -> Result<bool, CommError> {
    let mut filled = 0;
    while filled < buf.len() {
        match stream.read(&mut buf[filled..]) {
            Ok(0) => {
                if at_boundary && filled == 0 {
                    return Ok(false);
                }
                return Err(CommError::Framing {
                    detail: format!("stream ended inside a frame ({filled} bytes read)"),
                });
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::WouldBlock || e.kind() == ErrorKind::TimedOut => {
                if shutdown.load(Ordering::SeqCst) {
                    return Ok(false);
                }
            }
            Err(e) => {
                return Err(CommError::Framing {
                    detail: format!("read failed: {e}"),
                })
            }
        }
    }
    Ok(true)
}

fn reader_loop(mut stream: TcpStream, shared: Arc<SockShared>) {
    stream.set_read_timeout(Some(READ_POLL)).ok();
    stream.set_nodelay(true).ok();

    let mut run = || -> Result<(), CommError> {
        let mut header = [0u8; WIRE_HEADER_BYTES];
        // First frame must be the hello announcing the dialer.
        if !read_frame_exact(&mut stream, &mut header, &shared.shutdown, true)? {
            return Ok(());
        }
        let (phase, hello_src, hello_dst, hello_len) = decode_header(&header);
        if phase != HELLO_PHASE
            || hello_len != 0
            || hello_src as usize >= shared.np
            || hello_dst as usize != shared.rank
        {
            return Err(CommError::Framing {
                detail: format!(
                    "bad hello (phase={phase:#x}, src={hello_src}, dst={hello_dst}, len={hello_len})"
                ),
            });
        }
        let conn_src = hello_src as usize;

        loop {
            if !read_frame_exact(&mut stream, &mut header, &shared.shutdown, true)? {
                return Ok(());
            }
            let (phase, src, dst, payload_bytes) = decode_header(&header);
            if phase as usize >= NUM_PHASES
                || src as usize != conn_src
                || dst as usize != shared.rank
                || payload_bytes % POINT_BYTES as u64 != 0
                || payload_bytes > MAX_PAYLOAD_BYTES
            {
                return Err(CommError::Framing {
                    detail: format!(
                        "bad header (phase={phase}, src={src}, dst={dst}, payload_bytes={payload_bytes})"
                    ),
                });
            }
            let mut payload = vec![0u8; payload_bytes as usize];
            if !read_frame_exact(&mut stream, &mut payload, &shared.shutdown, false)? {
                return Ok(());
            }
            shared.endpoint.mailbox.push(Message::new(
                phase,
                src as usize,
                dst as usize,
                decode_payload(&payload),
            ));
        }
    };

    if let Err(e) = run() {
        shared.endpoint.mailbox.poison(e);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trips() {
        let h = encode_header(1, 3, 7, 160);
        assert_eq!(decode_header(&h), (1, 3, 7, 160));
        assert_eq!(h.len(), WIRE_HEADER_BYTES);
        // Little-endian layout, field by field.
        assert_eq!(&h[0..4], &[1, 0, 0, 0]);
        assert_eq!(&h[4..8], &[3, 0, 0, 0]);
        assert_eq!(&h[8..12], &[7, 0, 0, 0]);
        assert_eq!(&h[12..20], &[160, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn frame_encoding_is_header_plus_le_pairs() {
        let msg = Message::new(0, 1, 2, vec![Complex64::new(1.5, -2.5)]);
        let frame = encode_frame(&msg);
        assert_eq!(frame.len(), WIRE_HEADER_BYTES + 16);
        assert_eq!(&frame[20..28], &1.5f64.to_le_bytes());
        assert_eq!(&frame[28..36], &(-2.5f64).to_le_bytes());
        assert_eq!(decode_payload(&frame[20..]), msg.payload);
    }
}
