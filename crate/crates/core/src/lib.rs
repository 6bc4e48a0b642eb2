//! Distributed 3-D complex-to-complex FFT.
//!
//! The grid is decomposed adaptively over the ranks (whole planes while the
//! rank count allows it, whole rows beyond that), transformed one dimension
//! at a time, and redistributed between dimensions along the transpose
//! pipeline abc -> cab -> cba, which keeps most points on their owning rank.
//! The exchanges themselves run under any of six pluggable communication
//! strategies, selectable directly or through run-time auto-tuning.
//!
//! Ranks are ordinary workers talking through a [`comm::Transport`]: either
//! the in-process threaded simulator or the TCP socket transport, which are
//! interchangeable and produce identical results.

pub mod comm;
pub mod decomp;
pub mod engine;
pub mod fft;
pub mod grid;
pub mod plan;
pub mod transport;

pub use comm::{CommMethod, CommStrategy, Message, Transport, DEFAULT_BLOCK_SIZE};
pub use decomp::{slab_corners, slab_of, RankInfo, Slab, SlabForm};
pub use engine::{EngineConfig, EngineError, FftContext, TimingBreakdown, TuneReport};
pub use fft::{FftDirection, FftPlan1D};
pub use grid::{delinearize, linearize, ComplexBuf, Coord3, DimOrder, GridDims};
pub use plan::{build_plan, pipeline_plans, volume_of, TransposePlan, VolumeReport};
pub use transport::{
    socket_connect, threaded_spawn, ArrivalOrder, SocketTransport, ThreadedHub, ThreadedTransport,
};
