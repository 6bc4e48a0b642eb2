//! Shared receive-side machinery for both transports: per-rank FIFO queues
//! keyed by (source rank, phase), plus the pending-operation bookkeeping
//! behind the nonblocking handle API.

use std::collections::{HashMap, VecDeque};
use std::sync::{Condvar, Mutex};

use crate::comm::{CommError, Message, OpHandle};

/// How a transport orders completions reported by `wait_some`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ArrivalOrder {
    /// Report whatever is ready, as it becomes ready.
    #[default]
    Natural,
    /// Adversarial test mode: hold completions until every outstanding
    /// receive is ready, then release them one per call, last-posted first.
    Reversed,
}

#[derive(Default)]
struct MailboxState {
    queues: HashMap<(usize, u32), VecDeque<Message>>,
    poison: Option<CommError>,
}

/// One rank's incoming message store. Producers push from any thread; only
/// the owning rank pops.
#[derive(Default)]
pub struct Mailbox {
    state: Mutex<MailboxState>,
    ready: Condvar,
}

impl Mailbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, msg: Message) {
        let mut st = self.state.lock().unwrap();
        st.queues
            .entry((msg.src, msg.phase))
            .or_default()
            .push_back(msg);
        self.ready.notify_all();
    }

    /// Mark the mailbox failed; every pending and future wait returns `err`.
    pub fn poison(&self, err: CommError) {
        let mut st = self.state.lock().unwrap();
        if st.poison.is_none() {
            st.poison = Some(err);
        }
        self.ready.notify_all();
    }

    pub fn pop_blocking(&self, src: usize, phase: u32) -> Result<Message, CommError> {
        let mut st = self.state.lock().unwrap();
        loop {
            if let Some(err) = &st.poison {
                return Err(err.clone());
            }
            if let Some(q) = st.queues.get_mut(&(src, phase)) {
                if let Some(msg) = q.pop_front() {
                    return Ok(msg);
                }
            }
            st = self.ready.wait(st).unwrap();
        }
    }

    /// Block until at least one (Natural) or all (Reversed) of `wants` have
    /// a queued message, then pop and return (index, message) pairs: all
    /// ready ones under Natural, exactly the last-listed ready one under
    /// Reversed.
    pub fn pop_some_blocking(
        &self,
        wants: &[(usize, u32)],
        order: ArrivalOrder,
    ) -> Result<Vec<(usize, Message)>, CommError> {
        debug_assert!(!wants.is_empty());
        let mut st = self.state.lock().unwrap();
        loop {
            if let Some(err) = &st.poison {
                return Err(err.clone());
            }
            let ready: Vec<usize> = wants
                .iter()
                .enumerate()
                .filter(|(_, key)| st.queues.get(key).is_some_and(|q| !q.is_empty()))
                .map(|(i, _)| i)
                .collect();
            let release = match order {
                ArrivalOrder::Natural => !ready.is_empty(),
                ArrivalOrder::Reversed => ready.len() == wants.len(),
            };
            if release {
                let picked: Vec<usize> = match order {
                    ArrivalOrder::Natural => ready,
                    ArrivalOrder::Reversed => vec![*ready.last().unwrap()],
                };
                let out = picked
                    .into_iter()
                    .map(|i| {
                        let msg = st
                            .queues
                            .get_mut(&wants[i])
                            .and_then(|q| q.pop_front())
                            .expect("readiness checked under the same lock");
                        (i, msg)
                    })
                    .collect();
                return Ok(out);
            }
            st = self.ready.wait(st).unwrap();
        }
    }
}

enum PendingOp {
    /// Sends complete at post time on both transports.
    SendDone,
    Recv { src: usize, phase: u32 },
}

/// Handle table for one endpoint. Handles are one-shot: waiting on a handle
/// consumes it.
#[derive(Default)]
pub struct HandleTable {
    next: OpHandle,
    ops: HashMap<OpHandle, PendingOp>,
}

pub struct Endpoint {
    pub mailbox: Mailbox,
    table: Mutex<HandleTable>,
}

impl Endpoint {
    pub fn new() -> Self {
        Self {
            mailbox: Mailbox::new(),
            table: Mutex::new(HandleTable::default()),
        }
    }

    pub fn issue_send_handle(&self) -> OpHandle {
        let mut t = self.table.lock().unwrap();
        let h = t.next;
        t.next += 1;
        t.ops.insert(h, PendingOp::SendDone);
        h
    }

    pub fn issue_recv_handle(&self, src: usize, phase: u32) -> OpHandle {
        let mut t = self.table.lock().unwrap();
        let h = t.next;
        t.next += 1;
        t.ops.insert(h, PendingOp::Recv { src, phase });
        h
    }

    pub fn wait_all(&self, handles: &[OpHandle]) -> Result<Vec<Message>, CommError> {
        let mut msgs = Vec::new();
        for &h in handles {
            let op = {
                let mut t = self.table.lock().unwrap();
                t.ops.remove(&h)
            };
            match op {
                None | Some(PendingOp::SendDone) => {}
                Some(PendingOp::Recv { src, phase }) => {
                    msgs.push(self.mailbox.pop_blocking(src, phase)?);
                }
            }
        }
        Ok(msgs)
    }

    pub fn wait_some(
        &self,
        handles: &mut Vec<OpHandle>,
        order: ArrivalOrder,
    ) -> Result<Vec<Message>, CommError> {
        // Sends have already completed; retire them without blocking.
        let mut recv_keys: Vec<(usize, u32)> = Vec::with_capacity(handles.len());
        let mut recv_handles: Vec<OpHandle> = Vec::with_capacity(handles.len());
        {
            let mut t = self.table.lock().unwrap();
            let mut retired_send = false;
            handles.retain(|h| match t.ops.get(h) {
                Some(PendingOp::SendDone) | None => {
                    t.ops.remove(h);
                    retired_send = true;
                    false
                }
                Some(PendingOp::Recv { src, phase }) => {
                    recv_keys.push((*src, *phase));
                    recv_handles.push(*h);
                    true
                }
            });
            if retired_send || recv_keys.is_empty() {
                return Ok(Vec::new());
            }
        }
        let completed = self.mailbox.pop_some_blocking(&recv_keys, order)?;
        let mut done: Vec<OpHandle> = Vec::with_capacity(completed.len());
        let mut msgs = Vec::with_capacity(completed.len());
        for (i, msg) in completed {
            done.push(recv_handles[i]);
            msgs.push(msg);
        }
        {
            let mut t = self.table.lock().unwrap();
            for h in &done {
                t.ops.remove(h);
            }
        }
        handles.retain(|h| !done.contains(h));
        Ok(msgs)
    }
}

impl Default for Endpoint {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(src: usize, phase: u32, val: f64) -> Message {
        Message::new(phase, src, 0, vec![num_complex::Complex64::new(val, 0.0)])
    }

    #[test]
    fn fifo_per_channel() {
        let mb = Mailbox::new();
        mb.push(msg(1, 0, 1.0));
        mb.push(msg(1, 0, 2.0));
        mb.push(msg(1, 1, 9.0));
        assert_eq!(mb.pop_blocking(1, 0).unwrap().payload[0].re, 1.0);
        assert_eq!(mb.pop_blocking(1, 1).unwrap().payload[0].re, 9.0);
        assert_eq!(mb.pop_blocking(1, 0).unwrap().payload[0].re, 2.0);
    }

    #[test]
    fn poison_fails_pending_waits() {
        let mb = Mailbox::new();
        mb.poison(CommError::Shutdown {
            detail: "test".into(),
        });
        assert!(mb.pop_blocking(0, 0).is_err());
    }

    #[test]
    fn reversed_order_releases_last_posted_first() {
        let mb = Mailbox::new();
        mb.push(msg(1, 0, 1.0));
        mb.push(msg(2, 0, 2.0));
        mb.push(msg(3, 0, 3.0));
        let wants = [(1, 0), (2, 0), (3, 0)];
        let got = mb.pop_some_blocking(&wants, ArrivalOrder::Reversed).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].0, 2, "last-listed receive completes first");
    }
}
