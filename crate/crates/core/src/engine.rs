//! The calculation engine: initialization, execution, finalization.
//!
//! `init` builds the transpose plans, fixes the communication method
//! (tuning all six when asked to), and allocates every working buffer the
//! execution phase will touch. `execute` then runs the forward 3-D
//! transform — 1-D FFTs along the innermost dimension, transpose, FFTs,
//! transpose, FFTs — reusing those buffers so repeated executions allocate
//! nothing. `finalize` releases the buffers and retires the context.
//!
//! One context serves one rank; contexts talk to each other only through
//! their transport. Every rank in a world must `init` with the same
//! dimensions and method selection.

use std::cell::Cell;
use std::time::Instant;

use num_complex::Complex64;
use thiserror::Error;

use crate::comm::{
    run_strategy, CommError, CommMethod, CommStrategy, ExchangePlan, Message, OpHandle,
    Transport, PHASE_CONTROL, PHASE_FIRST_TRANSPOSE, PHASE_GATHER, PHASE_SECOND_TRANSPOSE,
};
use crate::decomp::{slab_corners, slab_of, DecompError, RankInfo, Slab};
use crate::fft::{FftDirection, FftError, FftPlan1D};
use crate::grid::{Coord3, DimOrder, GridDims};
use crate::plan::{build_rank_plan, RankPlan};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error(transparent)]
    Fft(#[from] FftError),
    #[error("input holds {got} points, this rank's input slab holds {expected}")]
    InputSize { expected: usize, got: usize },
    #[error("output holds {got} points, this rank's output slab holds {expected}")]
    OutputSize { expected: usize, got: usize },
    #[error("context is finalized")]
    Finalized,
    #[error("auto-tuning needs tune_reps >= 1")]
    InvalidTuneReps,
}

/// Wall-clock seconds spent in each part of the execution phase.
/// `others` is whatever remains of `total` after the named categories.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TimingBreakdown {
    pub communication: f64,
    pub fft: f64,
    pub buffer_comm: f64,
    pub buffer_fft: f64,
    pub others: f64,
    pub total: f64,
}

impl TimingBreakdown {
    pub fn accumulate(&mut self, other: &TimingBreakdown) {
        self.communication += other.communication;
        self.fft += other.fft;
        self.buffer_comm += other.buffer_comm;
        self.buffer_fft += other.buffer_fft;
        self.others += other.others;
        self.total += other.total;
    }

    /// Field-wise difference; useful against an earlier snapshot.
    pub fn delta_since(&self, earlier: &TimingBreakdown) -> TimingBreakdown {
        TimingBreakdown {
            communication: self.communication - earlier.communication,
            fft: self.fft - earlier.fft,
            buffer_comm: self.buffer_comm - earlier.buffer_comm,
            buffer_fft: self.buffer_fft - earlier.buffer_fft,
            others: self.others - earlier.others,
            total: self.total - earlier.total,
        }
    }

    /// Field-wise maximum; reduces per-rank breakdowns to the slowest rank.
    pub fn component_max(&self, other: &TimingBreakdown) -> TimingBreakdown {
        TimingBreakdown {
            communication: self.communication.max(other.communication),
            fft: self.fft.max(other.fft),
            buffer_comm: self.buffer_comm.max(other.buffer_comm),
            buffer_fft: self.buffer_fft.max(other.buffer_fft),
            others: self.others.max(other.others),
            total: self.total.max(other.total),
        }
    }

    pub fn scale(&self, factor: f64) -> TimingBreakdown {
        TimingBreakdown {
            communication: self.communication * factor,
            fft: self.fft * factor,
            buffer_comm: self.buffer_comm * factor,
            buffer_fft: self.buffer_fft * factor,
            others: self.others * factor,
            total: self.total * factor,
        }
    }

    pub fn named_sum(&self) -> f64 {
        self.communication + self.fft + self.buffer_comm + self.buffer_fft
    }
}

/// Tuning outcome for one method: the across-rank worst median execution
/// time and the payload bytes this rank sent per tuning execution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodTiming {
    pub strategy: CommStrategy,
    pub median_s: f64,
    pub rank_bytes_per_exec: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneReport {
    pub per_method: Vec<MethodTiming>,
    pub winner: CommStrategy,
}

#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    pub method: CommMethod,
    /// Executions per method during auto-tuning.
    pub tune_reps: usize,
    /// Peer-group width for the block strategies.
    pub block_size: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            method: CommMethod::default(),
            tune_reps: 2,
            block_size: crate::comm::DEFAULT_BLOCK_SIZE,
        }
    }
}

/// Per-rank state for repeated forward 3-D transforms.
pub struct FftContext {
    dims: GridDims,
    rank: RankInfo,
    method: CommStrategy,
    block_size: usize,
    transport: Box<dyn Transport>,
    /// Slabs under the abc, cab, and cba orderings, in pipeline order.
    slabs: [Slab; 3],
    rank_plans: [RankPlan; 2],
    exchange: [ExchangePlan; 2],
    fft_plans: [FftPlan1D; 3],
    in_range: (Coord3, Coord3),
    out_range: (Coord3, Coord3),
    // Working storage, allocated once in init and reused by every execute.
    fft_buf: Vec<Complex64>,
    work: Vec<Complex64>,
    stage: Vec<Complex64>,
    send_buf: Vec<Complex64>,
    recv_buf: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
    handle_scratch: Vec<OpHandle>,
    timing: TimingBreakdown,
    executions: u64,
    tuning_runs: u64,
    buffer_allocs: u64,
    tune_report: Option<TuneReport>,
    finalized: bool,
}

fn scatter_recv(plan: &RankPlan, recv_idx: usize, data: &[Complex64], stage: &mut [Complex64]) {
    let offsets = &plan.recvs[recv_idx].offsets;
    debug_assert_eq!(offsets.len(), data.len());
    for (&off, v) in offsets.iter().zip(data) {
        stage[off] = *v;
    }
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

/// Index of the winning method: the smallest reduced time, ties preferring
/// `WaitSome`, then enumeration order.
fn pick_winner(times: &[f64; 6]) -> usize {
    let min = times.iter().copied().fold(f64::INFINITY, f64::min);
    let waitsome = CommStrategy::ALL
        .iter()
        .position(|&m| m == CommStrategy::WaitSome)
        .unwrap();
    if times[waitsome] == min {
        return waitsome;
    }
    times.iter().position(|&t| t == min).unwrap()
}

fn timed<R>(acc: &mut f64, f: impl FnOnce() -> R) -> R {
    let t0 = Instant::now();
    let r = f();
    *acc += t0.elapsed().as_secs_f64();
    r
}

impl FftContext {
    /// Build plans and buffers for this rank and resolve the communication
    /// method. Ranks of one world must pass identical `dims` and `cfg`;
    /// with `CommMethod::Auto` all ranks tune in lockstep and install the
    /// same winner.
    pub fn init(
        dims: GridDims,
        cfg: EngineConfig,
        transport: Box<dyn Transport>,
    ) -> Result<Self, EngineError> {
        if cfg.block_size == 0 {
            return Err(CommError::InvalidBlockSize.into());
        }
        let rank = RankInfo::new(transport.rank(), transport.size());
        let slabs = [
            slab_of(dims, DimOrder::Abc, rank)?,
            slab_of(dims, DimOrder::Cab, rank)?,
            slab_of(dims, DimOrder::Cba, rank)?,
        ];
        let rank_plans = [
            build_rank_plan(dims, rank.np, DimOrder::Abc, DimOrder::Cab, rank.rank)?,
            build_rank_plan(dims, rank.np, DimOrder::Cab, DimOrder::Cba, rank.rank)?,
        ];
        let exchange = [
            ExchangePlan::from_rank_plan(PHASE_FIRST_TRANSPOSE, &rank_plans[0]),
            ExchangePlan::from_rank_plan(PHASE_SECOND_TRANSPOSE, &rank_plans[1]),
        ];
        let fft_plans = [
            FftPlan1D::new(dims.n3(), FftDirection::Forward),
            FftPlan1D::new(dims.n2(), FftDirection::Forward),
            FftPlan1D::new(dims.n1(), FftDirection::Forward),
        ];

        let max_count = slabs.iter().map(|s| s.count).max().unwrap();
        let max_send = rank_plans.iter().map(|p| p.send_points()).max().unwrap();
        let max_recv = rank_plans.iter().map(|p| p.recv_points()).max().unwrap();
        let scratch_len = fft_plans.iter().map(|p| p.scratch_len()).max().unwrap();

        let mut buffer_allocs = 0u64;
        let (fft_buf, work, stage, send_buf, recv_buf, fft_scratch) = {
            let mut alloc = |len: usize| {
                buffer_allocs += 1;
                vec![Complex64::new(0.0, 0.0); len]
            };
            (
                alloc(max_count),
                alloc(max_count),
                alloc(max_count),
                alloc(max_send),
                alloc(max_recv),
                alloc(scratch_len),
            )
        };
        buffer_allocs += 1;
        let handle_scratch = Vec::with_capacity(2 * rank.np);

        let in_range = slab_corners(&slabs[0], dims);
        let out_range = slab_corners(&slabs[2], dims);

        let mut ctx = Self {
            dims,
            rank,
            method: CommStrategy::WaitSome,
            block_size: cfg.block_size,
            transport,
            slabs,
            rank_plans,
            exchange,
            fft_plans,
            in_range,
            out_range,
            fft_buf,
            work,
            stage,
            send_buf,
            recv_buf,
            fft_scratch,
            handle_scratch,
            timing: TimingBreakdown::default(),
            executions: 0,
            tuning_runs: 0,
            buffer_allocs,
            tune_report: None,
            finalized: false,
        };
        ctx.method = match cfg.method.concrete() {
            Some(strategy) => strategy,
            None => ctx.autotune(cfg.tune_reps)?,
        };
        Ok(ctx)
    }

    /// Forward 3-D transform of this rank's abc-ordered input slab into its
    /// cba-ordered output slab. Reusable without reallocation.
    pub fn execute(
        &mut self,
        input: &[Complex64],
        out: &mut [Complex64],
    ) -> Result<(), EngineError> {
        self.ensure_active()?;
        if input.len() != self.slabs[0].count {
            return Err(EngineError::InputSize {
                expected: self.slabs[0].count,
                got: input.len(),
            });
        }
        if out.len() != self.slabs[2].count {
            return Err(EngineError::OutputSize {
                expected: self.slabs[2].count,
                got: out.len(),
            });
        }
        self.execute_with(self.method, input, out, false)
    }

    fn execute_with(
        &mut self,
        strategy: CommStrategy,
        input: &[Complex64],
        out: &mut [Complex64],
        tuning: bool,
    ) -> Result<(), EngineError> {
        let wall_start = Instant::now();
        let mut t = TimingBreakdown::default();

        // First dimension: rows along the abc innermost axis.
        let n0 = self.slabs[0].count;
        timed(&mut t.buffer_fft, || {
            self.fft_buf[..n0].copy_from_slice(input)
        });
        timed(&mut t.fft, || {
            self.fft_plans[0].process_rows(&mut self.fft_buf[..n0], &mut self.fft_scratch)
        })?;
        timed(&mut t.buffer_fft, || {
            self.work[..n0].copy_from_slice(&self.fft_buf[..n0])
        });

        self.transpose_step(0, strategy, &mut t)?;
        std::mem::swap(&mut self.work, &mut self.stage);

        // Second dimension: rows along the cab innermost axis.
        let n1 = self.slabs[1].count;
        timed(&mut t.buffer_fft, || {
            self.fft_buf[..n1].copy_from_slice(&self.work[..n1])
        });
        timed(&mut t.fft, || {
            self.fft_plans[1].process_rows(&mut self.fft_buf[..n1], &mut self.fft_scratch)
        })?;
        timed(&mut t.buffer_fft, || {
            self.work[..n1].copy_from_slice(&self.fft_buf[..n1])
        });

        self.transpose_step(1, strategy, &mut t)?;
        std::mem::swap(&mut self.work, &mut self.stage);

        // Third dimension: rows along the cba innermost axis.
        let n2 = self.slabs[2].count;
        timed(&mut t.buffer_fft, || {
            self.fft_buf[..n2].copy_from_slice(&self.work[..n2])
        });
        timed(&mut t.fft, || {
            self.fft_plans[2].process_rows(&mut self.fft_buf[..n2], &mut self.fft_scratch)
        })?;
        timed(&mut t.buffer_fft, || {
            out.copy_from_slice(&self.fft_buf[..n2])
        });

        t.total = wall_start.elapsed().as_secs_f64();
        t.others = (t.total - t.named_sum()).max(0.0);
        self.timing.accumulate(&t);
        if tuning {
            self.tuning_runs += 1;
        } else {
            self.executions += 1;
        }
        Ok(())
    }

    /// Pack, exchange, and unpack one transpose: `work` holds the source
    /// slab, `stage` receives the destination slab.
    fn transpose_step(
        &mut self,
        phase_idx: usize,
        strategy: CommStrategy,
        t: &mut TimingBreakdown,
    ) -> Result<(), EngineError> {
        let plan = &self.rank_plans[phase_idx];
        let xp = &self.exchange[phase_idx];
        let send_total = xp.sends.total();
        let recv_total = xp.recvs.total();

        // Pack the per-peer payloads and copy the retained points across.
        {
            let pack_t0 = Instant::now();
            for (i, pb) in plan.sends.iter().enumerate() {
                let seg = &mut self.send_buf[xp.sends.range(i)];
                for (slot, &off) in seg.iter_mut().zip(&pb.offsets) {
                    *slot = self.work[off];
                }
            }
            for &(s, d) in &plan.local {
                self.stage[d] = self.work[s];
            }
            t.buffer_comm += pack_t0.elapsed().as_secs_f64();
        }

        // Exchange. The overlapping strategies unpack inside the call; that
        // time is metered by the callback and billed to buffer_comm.
        let unpack_in_comm = Cell::new(0.0);
        let comm_t0 = Instant::now();
        {
            let stage = &mut self.stage;
            let mut on_arrival = |peer: usize, data: &[Complex64]| {
                let a0 = Instant::now();
                let idx = xp.recvs.index_of(peer).expect("arrival from planned peer");
                scatter_recv(plan, idx, data, stage);
                unpack_in_comm.set(unpack_in_comm.get() + a0.elapsed().as_secs_f64());
            };
            run_strategy(
                strategy,
                self.transport.as_ref(),
                xp,
                &self.send_buf[..send_total],
                &mut self.recv_buf[..recv_total],
                self.block_size,
                &mut self.handle_scratch,
                &mut on_arrival,
            )?;
        }
        let comm_wall = comm_t0.elapsed().as_secs_f64();
        t.communication += (comm_wall - unpack_in_comm.get()).max(0.0);
        t.buffer_comm += unpack_in_comm.get();

        // Non-overlapping strategies unpack after the exchange completes.
        if !strategy.overlaps() {
            let unpack_t0 = Instant::now();
            for i in 0..plan.recvs.len() {
                scatter_recv(plan, i, &self.recv_buf[xp.recvs.range(i)], &mut self.stage);
            }
            t.buffer_comm += unpack_t0.elapsed().as_secs_f64();
        }
        Ok(())
    }

    /// Time every strategy `tune_reps` times on zero-filled scratch input,
    /// agree on one winner across ranks, and return it. Per-rank medians are
    /// reduced with max (the slowest rank gates a method) on rank 0, which
    /// broadcasts the choice so every rank installs the same strategy.
    fn autotune(&mut self, tune_reps: usize) -> Result<CommStrategy, EngineError> {
        if tune_reps == 0 {
            return Err(EngineError::InvalidTuneReps);
        }
        let zeros = vec![Complex64::new(0.0, 0.0); self.slabs[0].count];
        let mut sink = vec![Complex64::new(0.0, 0.0); self.slabs[2].count];

        let mut medians = [0f64; 6];
        let mut bytes = [0u64; 6];
        for (mi, m) in CommStrategy::ALL.into_iter().enumerate() {
            let before = self.sent_transpose_bytes();
            let mut times = Vec::with_capacity(tune_reps);
            for _ in 0..tune_reps {
                let t0 = Instant::now();
                self.execute_with(m, &zeros, &mut sink, true)?;
                times.push(t0.elapsed().as_secs_f64());
            }
            bytes[mi] = (self.sent_transpose_bytes() - before) / tune_reps as u64;
            medians[mi] = median(&mut times);
        }

        let np = self.rank.np;
        let me = self.rank.rank;
        let (reduced, winner_idx) = if np == 1 {
            (medians, pick_winner(&medians))
        } else if me == 0 {
            let mut acc = medians;
            for src in 1..np {
                let h = self.transport.post_recv(src, PHASE_CONTROL)?;
                let msg = self.recv_one(h, src, PHASE_CONTROL)?;
                for (slot, v) in acc.iter_mut().zip(&msg.payload) {
                    *slot = slot.max(v.re);
                }
            }
            let winner = pick_winner(&acc);
            let mut payload = vec![Complex64::new(winner as f64, 0.0)];
            payload.extend(acc.iter().map(|&v| Complex64::new(v, 0.0)));
            for dst in 1..np {
                let h = self
                    .transport
                    .post_send(Message::new(PHASE_CONTROL, 0, dst, payload.clone()))?;
                self.transport.wait_all(&[h])?;
            }
            (acc, winner)
        } else {
            let payload = medians.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let h = self
                .transport
                .post_send(Message::new(PHASE_CONTROL, me, 0, payload))?;
            self.transport.wait_all(&[h])?;
            let h = self.transport.post_recv(0, PHASE_CONTROL)?;
            let msg = self.recv_one(h, 0, PHASE_CONTROL)?;
            let winner = msg.payload[0].re as usize;
            let mut acc = [0f64; 6];
            for (slot, v) in acc.iter_mut().zip(&msg.payload[1..]) {
                *slot = v.re;
            }
            (acc, winner)
        };

        let per_method = CommStrategy::ALL
            .into_iter()
            .enumerate()
            .map(|(i, strategy)| MethodTiming {
                strategy,
                median_s: reduced[i],
                rank_bytes_per_exec: bytes[i],
            })
            .collect();
        let winner = CommStrategy::ALL[winner_idx];
        self.tune_report = Some(TuneReport { per_method, winner });
        Ok(winner)
    }

    fn recv_one(&self, handle: OpHandle, src: usize, phase: u32) -> Result<Message, CommError> {
        self.transport
            .wait_all(&[handle])?
            .pop()
            .ok_or(CommError::Unexpected { src, phase })
    }

    /// Collect every rank's output slab onto rank 0 in cba order. All ranks
    /// call this collectively; only rank 0 receives the global array.
    pub fn gather(&mut self, local_out: &[Complex64]) -> Result<Option<Vec<Complex64>>, EngineError> {
        self.ensure_active()?;
        if local_out.len() != self.slabs[2].count {
            return Err(EngineError::OutputSize {
                expected: self.slabs[2].count,
                got: local_out.len(),
            });
        }
        let np = self.rank.np;
        if self.rank.rank != 0 {
            let msg = Message::new(PHASE_GATHER, self.rank.rank, 0, local_out.to_vec());
            let h = self.transport.post_send(msg)?;
            self.transport.wait_all(&[h])?;
            return Ok(None);
        }
        let mut global = vec![Complex64::new(0.0, 0.0); self.dims.total()];
        global[self.slabs[2].x_range()].copy_from_slice(local_out);
        for src in 1..np {
            let h = self.transport.post_recv(src, PHASE_GATHER)?;
            let msg = self.recv_one(h, src, PHASE_GATHER)?;
            let slab = slab_of(self.dims, DimOrder::Cba, RankInfo::new(src, np))?;
            if msg.payload.len() != slab.count {
                return Err(CommError::PayloadSize {
                    peer: src,
                    expected: slab.count,
                    got: msg.payload.len(),
                }
                .into());
            }
            global[slab.x_range()].copy_from_slice(&msg.payload);
        }
        Ok(Some(global))
    }

    /// Release the working buffers and retire the context.
    pub fn finalize(&mut self) -> Result<(), EngineError> {
        self.ensure_active()?;
        self.finalized = true;
        self.fft_buf = Vec::new();
        self.work = Vec::new();
        self.stage = Vec::new();
        self.send_buf = Vec::new();
        self.recv_buf = Vec::new();
        self.fft_scratch = Vec::new();
        self.handle_scratch = Vec::new();
        Ok(())
    }

    fn ensure_active(&self) -> Result<(), EngineError> {
        if self.finalized {
            Err(EngineError::Finalized)
        } else {
            Ok(())
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn rank_info(&self) -> RankInfo {
        self.rank
    }

    /// The strategy actually installed after method resolution.
    pub fn method(&self) -> CommStrategy {
        self.method
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Points in this rank's abc input slab.
    pub fn input_count(&self) -> usize {
        self.slabs[0].count
    }

    /// Points in this rank's cba output slab.
    pub fn output_count(&self) -> usize {
        self.slabs[2].count
    }

    /// Global start/end coordinates of the input slab under abc.
    pub fn input_range(&self) -> (Coord3, Coord3) {
        self.in_range
    }

    /// Global start/end coordinates of the output slab under cba.
    pub fn output_range(&self) -> (Coord3, Coord3) {
        self.out_range
    }

    pub fn slab(&self, order: DimOrder) -> &Slab {
        match order {
            DimOrder::Abc => &self.slabs[0],
            DimOrder::Cab => &self.slabs[1],
            DimOrder::Cba => &self.slabs[2],
        }
    }

    pub fn timing(&self) -> TimingBreakdown {
        self.timing
    }

    pub fn reset_timing(&mut self) {
        self.timing = TimingBreakdown::default();
    }

    /// Completed non-tuning executions.
    pub fn execution_count(&self) -> u64 {
        self.executions
    }

    /// Executions consumed by auto-tuning.
    pub fn tuning_run_count(&self) -> u64 {
        self.tuning_runs
    }

    /// Times the engine has allocated or grown a working buffer. Constant
    /// after `init` returns; execution never allocates.
    pub fn buffer_alloc_count(&self) -> u64 {
        self.buffer_allocs
    }

    /// (pointer, capacity) of each working buffer, sorted; two snapshots
    /// compare equal iff no buffer has been reallocated in between.
    pub fn buffer_fingerprint(&self) -> Vec<(usize, usize)> {
        let mut fp = vec![
            (self.fft_buf.as_ptr() as usize, self.fft_buf.capacity()),
            (self.work.as_ptr() as usize, self.work.capacity()),
            (self.stage.as_ptr() as usize, self.stage.capacity()),
            (self.send_buf.as_ptr() as usize, self.send_buf.capacity()),
            (self.recv_buf.as_ptr() as usize, self.recv_buf.capacity()),
            (
                self.fft_scratch.as_ptr() as usize,
                self.fft_scratch.capacity(),
            ),
            (
                self.handle_scratch.as_ptr() as usize,
                self.handle_scratch.capacity(),
            ),
        ];
        fp.sort_unstable();
        fp
    }

    pub fn tune_report(&self) -> Option<&TuneReport> {
        self.tune_report.as_ref()
    }

    /// Payload bytes this rank sends through the two transposes in one
    /// execution, as derived from the plans.
    pub fn planned_transpose_bytes(&self) -> u64 {
        self.rank_plans.iter().map(|p| p.send_bytes()).sum()
    }

    /// Cumulative payload bytes this rank has actually sent in the two
    /// transpose phases (tuning runs included, gather excluded).
    pub fn sent_transpose_bytes(&self) -> u64 {
        self.transport.sent_payload_bytes(PHASE_FIRST_TRANSPOSE)
            + self.transport.sent_payload_bytes(PHASE_SECOND_TRANSPOSE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even_sets() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn winner_prefers_waitsome_on_ties() {
        // WaitSome is index 3 in enumeration order.
        assert_eq!(pick_winner(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]), 3);
        assert_eq!(pick_winner(&[0.5, 1.0, 1.0, 1.0, 1.0, 1.0]), 0);
        assert_eq!(pick_winner(&[0.5, 1.0, 1.0, 0.5, 1.0, 1.0]), 3);
        assert_eq!(pick_winner(&[1.0, 1.0, 1.0, 1.0, 1.0, 0.2]), 5);
    }

    #[test]
    fn breakdown_reductions() {
        let a = TimingBreakdown {
            communication: 1.0,
            fft: 2.0,
            buffer_comm: 3.0,
            buffer_fft: 4.0,
            others: 0.5,
            total: 10.5,
        };
        let b = TimingBreakdown {
            communication: 2.0,
            fft: 1.0,
            buffer_comm: 0.0,
            buffer_fft: 5.0,
            others: 1.0,
            total: 9.0,
        };
        let m = a.component_max(&b);
        assert_eq!(m.communication, 2.0);
        assert_eq!(m.fft, 2.0);
        assert_eq!(m.buffer_fft, 5.0);
        let d = a.delta_since(&b);
        assert!((d.communication - -1.0).abs() < 1e-12);
        assert!((d.total - 1.5).abs() < 1e-12);
    }
}
