//! Communication scheduling.
//!
//! A transpose's exchanges can be driven by six interchangeable strategies,
//! all of which move exactly the payloads a [`crate::plan::RankPlan`]
//! prescribes and differ only in how the sends and receives are ordered,
//! grouped, and overlapped with unpacking:
//!
//! * `WaitAll` - post every nonblocking send and receive, then wait for the
//!   whole set at once.
//! * `AllToAllVar` - a single variable-count collective step; no padding
//!   bytes are ever transmitted.
//! * `WaitAllBlock` - ranks are grouped into blocks of `b_size`; round r
//!   sends to the block r positions ahead (wrapping) and receives from the
//!   block r positions behind, waiting per round.
//! * `WaitSome` - like `WaitAll`, but each receive is unpacked the moment it
//!   completes, overlapping unpack work with the remaining transfers.
//! * `WaitSomeBlock` - the block round structure with per-arrival unpacking
//!   inside each round.
//! * `PairwiseRing` - lockstep point-to-point steps: at step i, send to
//!   rank+i and receive from rank-i (mod np). Peers without payload still
//!   exchange zero-length messages so every rank advances in step.
//!
//! Every strategy yields bit-identical receive buffers on the same plan, and
//! moves exactly `volume_of(plan)` payload bytes.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

/// Transpose phases carried in message headers.
pub const PHASE_FIRST_TRANSPOSE: u32 = 0;
pub const PHASE_SECOND_TRANSPOSE: u32 = 1;
/// Output collection onto rank 0.
pub const PHASE_GATHER: u32 = 2;
/// Small control payloads (tuning agreement).
pub const PHASE_CONTROL: u32 = 3;
pub const NUM_PHASES: usize = 4;

/// Peer-group width for the block strategies.
pub const DEFAULT_BLOCK_SIZE: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommError {
    #[error("transport failure with peer {peer}: {detail}")]
    Transport { peer: usize, detail: String },
    #[error("malformed frame: {detail}")]
    Framing { detail: String },
    #[error("invalid peer rank {peer} in a world of {np}")]
    InvalidPeer { peer: usize, np: usize },
    #[error("invalid phase {0}")]
    InvalidPhase(u32),
    #[error("unexpected message from rank {src} in phase {phase}")]
    Unexpected { src: usize, phase: u32 },
    #[error("payload from rank {peer} carries {got} points, plan expects {expected}")]
    PayloadSize {
        peer: usize,
        expected: usize,
        got: usize,
    },
    #[error("block size must be at least 1")]
    InvalidBlockSize,
    #[error("connect to {addr} failed: {detail}")]
    Connect { addr: String, detail: String },
    #[error("transport shut down: {detail}")]
    Shutdown { detail: String },
}

/// One unit of transfer between two ranks within a phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub phase: u32,
    pub src: usize,
    pub dst: usize,
    /// Packed complex samples in plan order; carries no per-point indices.
    pub payload: Vec<Complex64>,
}

impl Message {
    pub fn new(phase: u32, src: usize, dst: usize, payload: Vec<Complex64>) -> Self {
        Self {
            phase,
            src,
            dst,
            payload,
        }
    }

    pub fn payload_bytes(&self) -> u64 {
        (self.payload.len() * crate::grid::POINT_BYTES) as u64
    }
}

/// Identifier of an in-flight send or receive.
pub type OpHandle = u64;

/// Message-passing primitives the strategies are written against.
///
/// Contract: completion of a handle means the payload is fully transferred;
/// messages between a fixed (src, dst, phase) are delivered intact, exactly
/// once, and in posting order; no ordering is guaranteed across peers, so
/// strategies never rely on arrival order.
pub trait Transport: Send {
    fn rank(&self) -> usize;
    fn size(&self) -> usize;

    /// Post a nonblocking send. Never blocks on the receiver.
    fn post_send(&self, msg: Message) -> Result<OpHandle, CommError>;

    /// Post a nonblocking receive for the next message from `src` in `phase`.
    fn post_recv(&self, src: usize, phase: u32) -> Result<OpHandle, CommError>;

    /// Block until every handle completes; returns the received messages
    /// (sends complete silently).
    fn wait_all(&self, handles: &[OpHandle]) -> Result<Vec<Message>, CommError>;

    /// Block until at least one outstanding handle completes. Completed
    /// handles are removed from `handles`; messages from completed receives
    /// are returned. May return an empty vec when only sends completed.
    fn wait_some(&self, handles: &mut Vec<OpHandle>) -> Result<Vec<Message>, CommError>;

    /// Combined exchange: send `msg` and receive one message from
    /// `recv_src` in `phase`.
    fn sendrecv(&self, msg: Message, recv_src: usize, phase: u32) -> Result<Message, CommError> {
        let hs = self.post_send(msg)?;
        let hr = self.post_recv(recv_src, phase)?;
        let mut msgs = self.wait_all(&[hs, hr])?;
        msgs.pop().ok_or(CommError::Unexpected {
            src: recv_src,
            phase,
        })
    }

    /// Variable-count collective: deliver `sends[q]` to rank q for every
    /// `Some` entry and return one message per rank flagged in `recv_from`.
    fn all_to_all_variable(
        &self,
        phase: u32,
        sends: Vec<Option<Message>>,
        recv_from: &[bool],
    ) -> Result<Vec<Option<Message>>, CommError> {
        let mut handles = Vec::new();
        for msg in sends.into_iter().flatten() {
            handles.push(self.post_send(msg)?);
        }
        self.wait_all(&handles)?;
        let mut out: Vec<Option<Message>> = (0..self.size()).map(|_| None).collect();
        for (src, &expected) in recv_from.iter().enumerate() {
            if expected {
                let h = self.post_recv(src, phase)?;
                let mut msgs = self.wait_all(&[h])?;
                out[src] = msgs.pop();
            }
        }
        Ok(out)
    }

    /// Payload bytes this rank has sent so far in `phase`, zero-length
    /// lockstep messages contributing nothing.
    fn sent_payload_bytes(&self, phase: u32) -> u64;
}

/// The six concrete scheduling strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommStrategy {
    WaitAll,
    AllToAllVar,
    WaitAllBlock,
    WaitSome,
    WaitSomeBlock,
    PairwiseRing,
}

impl CommStrategy {
    pub const ALL: [CommStrategy; 6] = [
        CommStrategy::WaitAll,
        CommStrategy::AllToAllVar,
        CommStrategy::WaitAllBlock,
        CommStrategy::WaitSome,
        CommStrategy::WaitSomeBlock,
        CommStrategy::PairwiseRing,
    ];

    /// Whether received payloads are unpacked as they arrive.
    pub fn overlaps(self) -> bool {
        matches!(self, CommStrategy::WaitSome | CommStrategy::WaitSomeBlock)
    }

    pub fn name(self) -> &'static str {
        match self {
            CommStrategy::WaitAll => "waitall",
            CommStrategy::AllToAllVar => "alltoallv",
            CommStrategy::WaitAllBlock => "waitall-block",
            CommStrategy::WaitSome => "waitsome",
            CommStrategy::WaitSomeBlock => "waitsome-block",
            CommStrategy::PairwiseRing => "ring",
        }
    }
}

impl fmt::Display for CommStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CommStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        CommStrategy::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown communication method '{s}'"))
    }
}

/// Method selection: one of the six strategies, automatic tuning, or an
/// explicit user override. The default is `WaitSome`, the stable performer
/// installed when no tuning is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CommMethod {
    WaitAll,
    AllToAllVar,
    WaitAllBlock,
    #[default]
    WaitSome,
    WaitSomeBlock,
    PairwiseRing,
    Auto,
    UserSelect(CommStrategy),
}

impl CommMethod {
    /// The concrete strategy this selection names, if it is not `Auto`.
    pub fn concrete(self) -> Option<CommStrategy> {
        match self {
            CommMethod::WaitAll => Some(CommStrategy::WaitAll),
            CommMethod::AllToAllVar => Some(CommStrategy::AllToAllVar),
            CommMethod::WaitAllBlock => Some(CommStrategy::WaitAllBlock),
            CommMethod::WaitSome => Some(CommStrategy::WaitSome),
            CommMethod::WaitSomeBlock => Some(CommStrategy::WaitSomeBlock),
            CommMethod::PairwiseRing => Some(CommStrategy::PairwiseRing),
            CommMethod::UserSelect(v) => Some(v),
            CommMethod::Auto => None,
        }
    }
}

/// Contiguous per-peer segments of a packed buffer: segment i belongs to
/// `peers[i]` (ascending) and spans `bounds[i]..bounds[i+1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerSegments {
    peers: Vec<usize>,
    bounds: Vec<usize>,
}

impl PeerSegments {
    /// Build from (peer, point count) pairs sorted by ascending peer.
    pub fn new(peer_lens: &[(usize, usize)]) -> Self {
        debug_assert!(peer_lens.windows(2).all(|w| w[0].0 < w[1].0));
        let mut bounds = Vec::with_capacity(peer_lens.len() + 1);
        bounds.push(0);
        let mut acc = 0;
        for &(_, len) in peer_lens {
            acc += len;
            bounds.push(acc);
        }
        Self {
            peers: peer_lens.iter().map(|&(p, _)| p).collect(),
            bounds,
        }
    }

    pub fn count(&self) -> usize {
        self.peers.len()
    }

    pub fn peer(&self, i: usize) -> usize {
        self.peers[i]
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.bounds[i]..self.bounds[i + 1]
    }

    /// Total points across all segments.
    pub fn total(&self) -> usize {
        *self.bounds.last().unwrap()
    }

    pub fn index_of(&self, peer: usize) -> Option<usize> {
        self.peers.binary_search(&peer).ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Range<usize>)> + '_ {
        (0..self.peers.len()).map(move |i| (self.peers[i], self.range(i)))
    }
}

/// One rank's exchange layout for a phase: which peers it sends to and
/// receives from, and where each peer's payload lives in the packed buffers.
#[derive(Debug, Clone)]
pub struct ExchangePlan {
    pub phase: u32,
    pub sends: PeerSegments,
    pub recvs: PeerSegments,
}

impl ExchangePlan {
    /// Segment layout for one rank's share of a transpose plan: one send
    /// segment per peer in the send map, one receive segment per peer in
    /// the receive map, both in plan (ascending peer) order.
    pub fn from_rank_plan(phase: u32, plan: &crate::plan::RankPlan) -> Self {
        let sends: Vec<(usize, usize)> = plan
            .sends
            .iter()
            .map(|p| (p.peer, p.offsets.len()))
            .collect();
        let recvs: Vec<(usize, usize)> = plan
            .recvs
            .iter()
            .map(|p| (p.peer, p.offsets.len()))
            .collect();
        ExchangePlan {
            phase,
            sends: PeerSegments::new(&sends),
            recvs: PeerSegments::new(&recvs),
        }
    }
}

/// Per-call statistics some strategies report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CommRunStats {
    /// Rounds executed by the block strategies.
    pub block_rounds: Option<usize>,
    /// Exchange steps executed by the pairwise ring (the self step is
    /// skipped, so this is np - 1 for np > 1).
    pub ring_steps: Option<usize>,
}

/// Copy an arrived payload into its peer's receive segment.
fn deliver(
    xp: &ExchangePlan,
    recv_buf: &mut [Complex64],
    msg: &Message,
) -> Result<usize, CommError> {
    let i = xp.recvs.index_of(msg.src).ok_or(CommError::Unexpected {
        src: msg.src,
        phase: msg.phase,
    })?;
    let seg = &mut recv_buf[xp.recvs.range(i)];
    if msg.payload.len() != seg.len() {
        return Err(CommError::PayloadSize {
            peer: msg.src,
            expected: seg.len(),
            got: msg.payload.len(),
        });
    }
    seg.copy_from_slice(&msg.payload);
    Ok(i)
}

fn make_msg(t: &dyn Transport, xp: &ExchangePlan, send_buf: &[Complex64], i: usize) -> Message {
    Message::new(
        xp.phase,
        t.rank(),
        xp.sends.peer(i),
        send_buf[xp.sends.range(i)].to_vec(),
    )
}

/// Post everything, wait for the complete set once.
pub fn run_waitall(
    t: &dyn Transport,
    xp: &ExchangePlan,
    send_buf: &[Complex64],
    recv_buf: &mut [Complex64],
    handles: &mut Vec<OpHandle>,
) -> Result<(), CommError> {
    handles.clear();
    for (peer, _) in xp.recvs.iter() {
        handles.push(t.post_recv(peer, xp.phase)?);
    }
    for i in 0..xp.sends.count() {
        handles.push(t.post_send(make_msg(t, xp, send_buf, i))?);
    }
    for msg in t.wait_all(handles)? {
        deliver(xp, recv_buf, &msg)?;
    }
    Ok(())
}

/// One variable-count collective step.
pub fn run_alltoallv(
    t: &dyn Transport,
    xp: &ExchangePlan,
    send_buf: &[Complex64],
    recv_buf: &mut [Complex64],
) -> Result<(), CommError> {
    let np = t.size();
    let mut sends: Vec<Option<Message>> = (0..np).map(|_| None).collect();
    for i in 0..xp.sends.count() {
        sends[xp.sends.peer(i)] = Some(make_msg(t, xp, send_buf, i));
    }
    let mut recv_from = vec![false; np];
    for (peer, _) in xp.recvs.iter() {
        recv_from[peer] = true;
    }
    for msg in t
        .all_to_all_variable(xp.phase, sends, &recv_from)?
        .into_iter()
        .flatten()
    {
        deliver(xp, recv_buf, &msg)?;
    }
    Ok(())
}

/// Block index of a rank under block width `b_size`.
fn block_of(rank: usize, b_size: usize) -> usize {
    rank / b_size
}

/// Grouped exchange. With `nblocks = ceil(np / b_size)` rounds, round r sends
/// to the ranks of block `mine + r` and receives from block `mine - r`
/// (wrapping), so each round's receives are matched by sends posted in that
/// same round on the peer side and every nonempty pair is exchanged exactly
/// once. Returns the number of rounds executed.
pub fn run_waitall_block(
    t: &dyn Transport,
    xp: &ExchangePlan,
    send_buf: &[Complex64],
    recv_buf: &mut [Complex64],
    b_size: usize,
    handles: &mut Vec<OpHandle>,
) -> Result<usize, CommError> {
    if b_size == 0 {
        return Err(CommError::InvalidBlockSize);
    }
    let np = t.size();
    let nblocks = np.div_ceil(b_size);
    let mine = block_of(t.rank(), b_size);
    for r in 0..nblocks {
        let send_block = (mine + r) % nblocks;
        let recv_block = (mine + nblocks - r) % nblocks;
        handles.clear();
        for (peer, _) in xp.recvs.iter() {
            if block_of(peer, b_size) == recv_block {
                handles.push(t.post_recv(peer, xp.phase)?);
            }
        }
        for i in 0..xp.sends.count() {
            if block_of(xp.sends.peer(i), b_size) == send_block {
                handles.push(t.post_send(make_msg(t, xp, send_buf, i))?);
            }
        }
        for msg in t.wait_all(handles)? {
            deliver(xp, recv_buf, &msg)?;
        }
    }
    Ok(nblocks)
}

/// Post everything, then unpack each receive the moment it completes.
/// `on_arrival` is invoked exactly once per nonempty receive peer with the
/// filled segment; callers only write the arriving peer's disjoint region.
pub fn run_waitsome(
    t: &dyn Transport,
    xp: &ExchangePlan,
    send_buf: &[Complex64],
    recv_buf: &mut [Complex64],
    handles: &mut Vec<OpHandle>,
    on_arrival: &mut dyn FnMut(usize, &[Complex64]),
) -> Result<(), CommError> {
    handles.clear();
    for (peer, _) in xp.recvs.iter() {
        handles.push(t.post_recv(peer, xp.phase)?);
    }
    for i in 0..xp.sends.count() {
        handles.push(t.post_send(make_msg(t, xp, send_buf, i))?);
    }
    while !handles.is_empty() {
        for msg in t.wait_some(handles)? {
            let i = deliver(xp, recv_buf, &msg)?;
            on_arrival(xp.recvs.peer(i), &recv_buf[xp.recvs.range(i)]);
        }
    }
    Ok(())
}

/// The block round structure with per-arrival unpacking inside each round.
pub fn run_waitsome_block(
    t: &dyn Transport,
    xp: &ExchangePlan,
    send_buf: &[Complex64],
    recv_buf: &mut [Complex64],
    b_size: usize,
    handles: &mut Vec<OpHandle>,
    on_arrival: &mut dyn FnMut(usize, &[Complex64]),
) -> Result<usize, CommError> {
    if b_size == 0 {
        return Err(CommError::InvalidBlockSize);
    }
    let np = t.size();
    let nblocks = np.div_ceil(b_size);
    let mine = block_of(t.rank(), b_size);
    for r in 0..nblocks {
        let send_block = (mine + r) % nblocks;
        let recv_block = (mine + nblocks - r) % nblocks;
        handles.clear();
        for (peer, _) in xp.recvs.iter() {
            if block_of(peer, b_size) == recv_block {
                handles.push(t.post_recv(peer, xp.phase)?);
            }
        }
        for i in 0..xp.sends.count() {
            if block_of(xp.sends.peer(i), b_size) == send_block {
                handles.push(t.post_send(make_msg(t, xp, send_buf, i))?);
            }
        }
        while !handles.is_empty() {
            for msg in t.wait_some(handles)? {
                let i = deliver(xp, recv_buf, &msg)?;
                on_arrival(xp.recvs.peer(i), &recv_buf[xp.recvs.range(i)]);
            }
        }
    }
    Ok(nblocks)
}

/// Lockstep pairwise exchange: at step i, send to rank+i and receive from
/// rank-i (mod np). Pairs without plan entries exchange zero-length messages
/// so step alignment is preserved. Returns the executed step count (the
/// self step is skipped).
pub fn run_pairwise_ring(
    t: &dyn Transport,
    xp: &ExchangePlan,
    send_buf: &[Complex64],
    recv_buf: &mut [Complex64],
) -> Result<usize, CommError> {
    let np = t.size();
    let me = t.rank();
    let mut steps = 0;
    for i in 1..np {
        let dst = (me + i) % np;
        let src = (me + np - i) % np;
        let payload = match xp.sends.index_of(dst) {
            Some(si) => send_buf[xp.sends.range(si)].to_vec(),
            None => Vec::new(),
        };
        let msg = t.sendrecv(Message::new(xp.phase, me, dst, payload), src, xp.phase)?;
        if xp.recvs.index_of(src).is_some() {
            deliver(xp, recv_buf, &msg)?;
        } else if !msg.payload.is_empty() {
            return Err(CommError::PayloadSize {
                peer: src,
                expected: 0,
                got: msg.payload.len(),
            });
        }
        steps += 1;
    }
    Ok(steps)
}

/// Dispatch to the selected strategy. `on_arrival` fires during the call for
/// the overlapping strategies only; for the others the caller unpacks the
/// filled receive buffer afterwards.
#[allow(clippy::too_many_arguments)]
pub fn run_strategy(
    strategy: CommStrategy,
    t: &dyn Transport,
    xp: &ExchangePlan,
    send_buf: &[Complex64],
    recv_buf: &mut [Complex64],
    b_size: usize,
    handles: &mut Vec<OpHandle>,
    on_arrival: &mut dyn FnMut(usize, &[Complex64]),
) -> Result<CommRunStats, CommError> {
    let mut stats = CommRunStats::default();
    match strategy {
        CommStrategy::WaitAll => run_waitall(t, xp, send_buf, recv_buf, handles)?,
        CommStrategy::AllToAllVar => run_alltoallv(t, xp, send_buf, recv_buf)?,
        CommStrategy::WaitAllBlock => {
            stats.block_rounds =
                Some(run_waitall_block(t, xp, send_buf, recv_buf, b_size, handles)?);
        }
        CommStrategy::WaitSome => {
            run_waitsome(t, xp, send_buf, recv_buf, handles, on_arrival)?
        }
        CommStrategy::WaitSomeBlock => {
            stats.block_rounds = Some(run_waitsome_block(
                t, xp, send_buf, recv_buf, b_size, handles, on_arrival,
            )?);
        }
        CommStrategy::PairwiseRing => {
            stats.ring_steps = Some(run_pairwise_ring(t, xp, send_buf, recv_buf)?);
        }
    }
    Ok(stats)
}
