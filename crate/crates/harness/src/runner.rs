//! Rank-world orchestration: spawn one worker per rank over the chosen
//! transport, run the engine lifecycle in each, and collect per-rank
//! measurements.

use std::net::SocketAddr;
use std::time::Duration;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slabfft::comm::Transport;
use slabfft::transport::{ephemeral_loopback_set, SocketTransport};
use slabfft::{
    slab_of, threaded_spawn, CommMethod, DimOrder, EngineConfig, FftContext, GridDims, RankInfo,
    TimingBreakdown, TuneReport,
};

use crate::HarnessError;

const SOCKET_CONNECT_TIMEOUT: Duration = Duration::from_secs(10);

/// Reproducible global input: ChaCha8 seeded with `seed_from_u64`, one
/// `re` then one `im` draw per point, each uniform in [-1, 1), in ascending
/// abc linear index order. Identical on every rank and transport.
pub fn seeded_global_input(dims: GridDims, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dims.total())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// How to wire the ranks together.
#[derive(Debug, Clone)]
pub enum TransportSetup {
    Threads,
    /// Loopback sockets on ephemeral ports when no table is given.
    Sockets { addrs: Option<Vec<SocketAddr>> },
}

/// Run `f` once per rank over the chosen transport and collect the results.
pub fn run_ranks<T, F>(setup: &TransportSetup, np: usize, f: F) -> Result<Vec<T>, HarnessError>
where
    T: Send,
    F: Fn(Box<dyn Transport>) -> Result<T, HarnessError> + Sync,
{
    match setup {
        TransportSetup::Threads => threaded_spawn(np, |ep| f(Box::new(ep)))
            .map_err(|e| HarnessError::Spawn(e.to_string()))?
            .into_iter()
            .collect(),
        TransportSetup::Sockets { addrs } => {
            let (listeners, table) = match addrs {
                Some(table) => {
                    if table.len() < np {
                        return Err(HarnessError::Invalid(format!(
                            "ranks file lists {} addresses, need {np}",
                            table.len()
                        )));
                    }
                    (None, table[..np].to_vec())
                }
                None => {
                    let (listeners, table) = ephemeral_loopback_set(np)
                        .map_err(|e| HarnessError::Spawn(format!("bind failed: {e}")))?;
                    (Some(listeners), table)
                }
            };
            std::thread::scope(|s| {
                let mut pre_bound: Vec<Option<std::net::TcpListener>> = match listeners {
                    Some(ls) => ls.into_iter().map(Some).collect(),
                    None => (0..np).map(|_| None).collect(),
                };
                let joins: Vec<_> = (0..np)
                    .map(|rank| {
                        let table = table.clone();
                        let listener = pre_bound[rank].take();
                        let f = &f;
                        s.spawn(move || -> Result<T, HarnessError> {
                            let t = match listener {
                                Some(l) => SocketTransport::from_listener(
                                    l,
                                    rank,
                                    table,
                                    SOCKET_CONNECT_TIMEOUT,
                                )?,
                                None => slabfft::socket_connect(
                                    rank,
                                    &table,
                                    SOCKET_CONNECT_TIMEOUT,
                                )?,
                            };
                            f(Box::new(t))
                        })
                    })
                    .collect();
                let mut out = Vec::with_capacity(np);
                let mut failures = Vec::new();
                for (rank, j) in joins.into_iter().enumerate() {
                    match j.join() {
                        Ok(Ok(v)) => out.push(v),
                        Ok(Err(e)) => failures.push(format!("rank {rank}: {e}")),
                        Err(_) => failures.push(format!("rank {rank}: panicked")),
                    }
                }
                if failures.is_empty() {
                    Ok(out)
                } else {
                    Err(HarnessError::Spawn(failures.join("; ")))
                }
            })
        }
    }
}

/// One job over a full rank world.
#[derive(Debug, Clone)]
pub struct JobSpec<'a> {
    pub dims: GridDims,
    pub np: usize,
    pub method: CommMethod,
    pub tune_reps: usize,
    pub block_size: usize,
    /// Timed executions after init; 0 runs init/finalize only.
    pub repeats: usize,
    /// Global abc-ordered input, identical on every rank.
    pub input: Option<&'a [Complex64]>,
    pub gather: bool,
}

/// What one rank reports back after a job.
#[derive(Debug, Clone)]
pub struct RankOutcome {
    pub rank: usize,
    pub method: slabfft::CommStrategy,
    pub executions: u64,
    pub tuning_runs: u64,
    /// Plan-derived payload bytes this rank sends per execution.
    pub planned_bytes: u64,
    /// Transport-measured payload bytes per execution (0 when repeats = 0).
    pub measured_bytes: u64,
    pub timing_per_repeat: Vec<TimingBreakdown>,
    pub tune: Option<TuneReport>,
    pub gathered: Option<Vec<Complex64>>,
}

pub struct JobResult {
    pub outcomes: Vec<RankOutcome>,
}

impl JobResult {
    /// Rank 0's gathered global output, when the job gathered.
    pub fn gathered(&self) -> Option<&[Complex64]> {
        self.outcomes[0].gathered.as_deref()
    }

    pub fn total_planned_bytes(&self) -> u64 {
        self.outcomes.iter().map(|o| o.planned_bytes).sum()
    }

    pub fn total_measured_bytes(&self) -> u64 {
        self.outcomes.iter().map(|o| o.measured_bytes).sum()
    }

    /// Per-category max across ranks, averaged over repeats.
    pub fn reduced_timing(&self) -> TimingBreakdown {
        let repeats = self.outcomes[0].timing_per_repeat.len();
        if repeats == 0 {
            return TimingBreakdown::default();
        }
        let mut acc = TimingBreakdown::default();
        for rep in 0..repeats {
            let worst = self
                .outcomes
                .iter()
                .map(|o| o.timing_per_repeat[rep])
                .reduce(|a, b| a.component_max(&b))
                .unwrap();
            acc.accumulate(&worst);
        }
        acc.scale(1.0 / repeats as f64)
    }
}

/// Run the full engine lifecycle on every rank of a world.
pub fn execute_job(setup: &TransportSetup, spec: &JobSpec) -> Result<JobResult, HarnessError> {
    let engine_cfg = EngineConfig {
        method: spec.method,
        tune_reps: spec.tune_reps,
        block_size: spec.block_size,
    };
    let outcomes = run_ranks(setup, spec.np, |transport| {
        let mut ctx = FftContext::init(spec.dims, engine_cfg, transport)?;
        let rank = ctx.rank_info();
        let mut timing_per_repeat = Vec::with_capacity(spec.repeats);
        let mut gathered = None;
        let mut measured_bytes = 0;

        if spec.repeats > 0 {
            let global = spec.input.ok_or_else(|| {
                HarnessError::Invalid("job with repeats > 0 needs input data".into())
            })?;
            let slab = slab_of(spec.dims, DimOrder::Abc, rank)?;
            let local = global[slab.x_range()].to_vec();
            let mut out = vec![Complex64::new(0.0, 0.0); ctx.output_count()];
            let bytes_before = ctx.sent_transpose_bytes();
            for _ in 0..spec.repeats {
                let before = ctx.timing();
                ctx.execute(&local, &mut out)?;
                timing_per_repeat.push(ctx.timing().delta_since(&before));
            }
            let delta = ctx.sent_transpose_bytes() - bytes_before;
            measured_bytes = delta / spec.repeats as u64;
            if spec.gather {
                gathered = ctx.gather(&out)?;
            }
        }

        let outcome = RankOutcome {
            rank: rank.rank,
            method: ctx.method(),
            executions: ctx.execution_count(),
            tuning_runs: ctx.tuning_run_count(),
            planned_bytes: ctx.planned_transpose_bytes(),
            measured_bytes,
            timing_per_repeat,
            tune: ctx.tune_report().cloned(),
            gathered,
        };
        ctx.finalize()?;
        Ok(outcome)
    })?;
    Ok(JobResult { outcomes })
}

/// Extract one rank's abc input slab from a global array.
pub fn local_input(dims: GridDims, global: &[Complex64], rank: RankInfo) -> Vec<Complex64> {
    let slab = slab_of(dims, DimOrder::Abc, rank).expect("valid rank world");
    global[slab.x_range()].to_vec()
}
