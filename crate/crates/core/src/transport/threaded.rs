//! In-process multi-rank simulator: every rank is a thread, messages move
//! between per-rank mailboxes without serialization, and sends complete at
//! post time. Exactly-once delivery per (src, dst, phase) follows from the
//! FIFO queues; an optional arrival-order override injects adversarial
//! completion orders for testing the overlapping strategies.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;

use thiserror::Error;

use super::mailbox::{ArrivalOrder, Endpoint};
use crate::comm::{CommError, Message, OpHandle, Transport, NUM_PHASES};

/// A delivered message, as recorded by the optional hub log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageRecord {
    pub phase: u32,
    pub src: usize,
    pub dst: usize,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HubOptions {
    pub arrival_order: ArrivalOrder,
    /// Record every delivered message; test instrumentation.
    pub log: bool,
}

struct HubShared {
    np: usize,
    endpoints: Vec<Endpoint>,
    sent_bytes: Vec<[AtomicU64; NUM_PHASES]>,
    order: ArrivalOrder,
    log: Option<std::sync::Mutex<Vec<MessageRecord>>>,
}

/// The shared fabric connecting `np` simulated ranks.
#[derive(Clone)]
pub struct ThreadedHub {
    shared: Arc<HubShared>,
}

impl ThreadedHub {
    pub fn new(np: usize) -> Self {
        Self::with_options(np, HubOptions::default())
    }

    pub fn with_options(np: usize, opts: HubOptions) -> Self {
        assert!(np >= 1, "a world needs at least one rank");
        Self {
            shared: Arc::new(HubShared {
                np,
                endpoints: (0..np).map(|_| Endpoint::new()).collect(),
                sent_bytes: (0..np)
                    .map(|_| std::array::from_fn(|_| AtomicU64::new(0)))
                    .collect(),
                order: opts.arrival_order,
                log: opts.log.then(|| std::sync::Mutex::new(Vec::new())),
            }),
        }
    }

    pub fn size(&self) -> usize {
        self.shared.np
    }

    /// The transport view for one rank. Each rank's worker holds exactly one.
    pub fn endpoint(&self, rank: usize) -> ThreadedTransport {
        assert!(rank < self.shared.np, "rank {rank} out of range");
        ThreadedTransport {
            rank,
            shared: Arc::clone(&self.shared),
        }
    }

    /// Delivered messages in send order, when logging is enabled.
    pub fn log(&self) -> Vec<MessageRecord> {
        self.shared
            .log
            .as_ref()
            .map(|l| l.lock().unwrap().clone())
            .unwrap_or_default()
    }

    /// Payload bytes rank `rank` has sent in `phase`.
    pub fn sent_payload_bytes(&self, rank: usize, phase: u32) -> u64 {
        self.shared.sent_bytes[rank][phase as usize].load(Ordering::Relaxed)
    }
}

/// One rank's handle on the hub.
pub struct ThreadedTransport {
    rank: usize,
    shared: Arc<HubShared>,
}

impl ThreadedTransport {
    fn check_msg(&self, msg: &Message) -> Result<(), CommError> {
        if msg.dst >= self.shared.np {
            return Err(CommError::InvalidPeer {
                peer: msg.dst,
                np: self.shared.np,
            });
        }
        if msg.phase as usize >= NUM_PHASES {
            return Err(CommError::InvalidPhase(msg.phase));
        }
        Ok(())
    }
}

impl Transport for ThreadedTransport {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.shared.np
    }

    fn post_send(&self, msg: Message) -> Result<OpHandle, CommError> {
        self.check_msg(&msg)?;
        self.shared.sent_bytes[self.rank][msg.phase as usize]
            .fetch_add(msg.payload_bytes(), Ordering::Relaxed);
        if let Some(log) = &self.shared.log {
            log.lock().unwrap().push(MessageRecord {
                phase: msg.phase,
                src: self.rank,
                dst: msg.dst,
                points: msg.payload.len(),
            });
        }
        let dst = msg.dst;
        self.shared.endpoints[dst].mailbox.push(msg);
        Ok(self.shared.endpoints[self.rank].issue_send_handle())
    }

    fn post_recv(&self, src: usize, phase: u32) -> Result<OpHandle, CommError> {
        if src >= self.shared.np {
            return Err(CommError::InvalidPeer {
                peer: src,
                np: self.shared.np,
            });
        }
        Ok(self.shared.endpoints[self.rank].issue_recv_handle(src, phase))
    }

    fn wait_all(&self, handles: &[OpHandle]) -> Result<Vec<Message>, CommError> {
        self.shared.endpoints[self.rank].wait_all(handles)
    }

    fn wait_some(&self, handles: &mut Vec<OpHandle>) -> Result<Vec<Message>, CommError> {
        self.shared.endpoints[self.rank].wait_some(handles, self.shared.order)
    }

    fn sent_payload_bytes(&self, phase: u32) -> u64 {
        self.shared.sent_bytes[self.rank][phase as usize].load(Ordering::Relaxed)
    }
}

#[derive(Debug, Error)]
#[error("rank worker(s) failed: {}", .failures.iter().map(|(r, m)| format!("rank {r}: {m}")).collect::<Vec<_>>().join("; "))]
pub struct SpawnError {
    pub failures: Vec<(usize, String)>,
}

/// Run `rank_main` concurrently on `np` simulated ranks and collect the
/// per-rank results. Worker panics are aggregated with their rank ids.
pub fn threaded_spawn<T, F>(np: usize, rank_main: F) -> Result<Vec<T>, SpawnError>
where
    T: Send,
    F: Fn(ThreadedTransport) -> T + Sync,
{
    threaded_spawn_with(np, HubOptions::default(), rank_main).map(|(results, _)| results)
}

/// As [`threaded_spawn`], with hub options; also returns the hub so tests
/// can inspect logs and counters.
pub fn threaded_spawn_with<T, F>(
    np: usize,
    opts: HubOptions,
    rank_main: F,
) -> Result<(Vec<T>, ThreadedHub), SpawnError>
where
    T: Send,
    F: Fn(ThreadedTransport) -> T + Sync,
{
    let hub = ThreadedHub::with_options(np, opts);
    let results = thread::scope(|s| {
        let joins: Vec<_> = (0..np)
            .map(|rank| {
                let ep = hub.endpoint(rank);
                let f = &rank_main;
                s.spawn(move || f(ep))
            })
            .collect();
        let mut ok = Vec::with_capacity(np);
        let mut failures = Vec::new();
        for (rank, j) in joins.into_iter().enumerate() {
            match j.join() {
                Ok(v) => ok.push(v),
                Err(payload) => failures.push((rank, panic_text(payload))),
            }
        }
        if failures.is_empty() {
            Ok(ok)
        } else {
            Err(SpawnError { failures })
        }
    })?;
    Ok((results, hub))
}

fn panic_text(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn single_rank_spawn_runs_once() {
        let out = threaded_spawn(1, |t| {
            assert_eq!((t.rank(), t.size()), (0, 1));
            42
        })
        .unwrap();
        assert_eq!(out, vec![42]);
    }

    #[test]
    fn ring_echo_reaches_every_rank() {
        // Every rank sends its id around the ring; all ids observed.
        let np = 8;
        let ids = threaded_spawn(np, |t| {
            let me = t.rank();
            let mut seen = vec![me];
            for i in 1..np {
                let dst = (me + i) % np;
                let src = (me + np - i) % np;
                let msg = Message::new(0, me, dst, vec![Complex64::new(me as f64, 0.0)]);
                let got = t.sendrecv(msg, src, 0).unwrap();
                seen.push(got.payload[0].re as usize);
            }
            seen.sort_unstable();
            seen
        })
        .unwrap();
        for ranks in ids {
            assert_eq!(ranks, (0..np).collect::<Vec<_>>());
        }
    }

    #[test]
    fn worker_panics_surface_with_rank_id() {
        let err = threaded_spawn(4, |t| {
            if t.rank() == 2 {
                panic!("boom");
            }
        })
        .unwrap_err();
        assert_eq!(err.failures.len(), 1);
        assert_eq!(err.failures[0].0, 2);
        assert!(err.failures[0].1.contains("boom"));
    }

    #[test]
    fn reversed_arrival_order_is_honored() {
        let opts = HubOptions {
            arrival_order: ArrivalOrder::Reversed,
            log: false,
        };
        let (orders, _) = threaded_spawn_with(4, opts, |t| {
            let me = t.rank();
            for dst in 0..4 {
                if dst != me {
                    t.post_send(Message::new(0, me, dst, vec![Complex64::new(1.0, 0.0)]))
                        .unwrap();
                }
            }
            let mut handles: Vec<OpHandle> = (0..4)
                .filter(|&s| s != me)
                .map(|s| t.post_recv(s, 0).unwrap())
                .collect();
            let mut arrival = Vec::new();
            while !handles.is_empty() {
                for m in t.wait_some(&mut handles).unwrap() {
                    arrival.push(m.src);
                }
            }
            arrival
        })
        .unwrap();
        for (me, order) in orders.into_iter().enumerate() {
            let mut expect: Vec<usize> = (0..4).filter(|&s| s != me).collect();
            expect.reverse();
            assert_eq!(order, expect, "rank {me} must observe reversed completions");
        }
    }

    #[test]
    fn counters_and_log_track_payload_bytes() {
        let opts = HubOptions {
            arrival_order: ArrivalOrder::Natural,
            log: true,
        };
        let (_, hub) = threaded_spawn_with(2, opts, |t| {
            if t.rank() == 0 {
                t.post_send(Message::new(1, 0, 1, vec![Complex64::new(0.0, 0.0); 3]))
                    .unwrap();
            } else {
                let h = t.post_recv(0, 1).unwrap();
                t.wait_all(&[h]).unwrap();
            }
        })
        .unwrap();
        assert_eq!(hub.sent_payload_bytes(0, 1), 48);
        assert_eq!(hub.sent_payload_bytes(0, 0), 0);
        let log = hub.log();
        assert_eq!(log.len(), 1);
        assert_eq!(
            log[0],
            MessageRecord {
                phase: 1,
                src: 0,
                dst: 1,
                points: 3
            }
        );
    }
}
