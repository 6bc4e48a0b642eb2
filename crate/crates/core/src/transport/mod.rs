//! Transport implementations: an in-process threaded rank simulator (the
//! primary test vehicle) and a socket transport speaking the fixed wire
//! format. Both satisfy the same [`crate::comm::Transport`] contract and are
//! interchangeable underneath the engine.

mod mailbox;
mod socket;
mod threaded;

pub use mailbox::ArrivalOrder;
pub use socket::{
    decode_header, encode_header, ephemeral_loopback_set, socket_connect, SocketTransport,
    WIRE_HEADER_BYTES,
};
pub use threaded::{
    threaded_spawn, threaded_spawn_with, HubOptions, MessageRecord, SpawnError, ThreadedHub,
    ThreadedTransport,
};
