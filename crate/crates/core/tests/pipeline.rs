//! End-to-end engine behavior over the threaded transport: placement
//! metadata, determinism across rank counts and methods, buffer reuse, and
//! the init/execute/finalize lifecycle.

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use slabfft::comm::Transport;
use slabfft::transport::threaded_spawn;
use slabfft::{
    slab_corners, slab_of, CommMethod, CommStrategy, DimOrder, EngineConfig, EngineError,
    FftContext, GridDims, RankInfo,
};

fn global_input(dims: GridDims, seed: u64) -> Vec<Complex64> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..dims.total())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn slab_slice(dims: GridDims, global: &[Complex64], rank: RankInfo) -> Vec<Complex64> {
    let slab = slab_of(dims, DimOrder::Abc, rank).unwrap();
    global[slab.x_range()].to_vec()
}

/// Run the full pipeline on `np` ranks and return rank 0's gathered output.
fn run_gathered(dims: GridDims, np: usize, cfg: EngineConfig, global: &[Complex64]) -> Vec<Complex64> {
    let outs = threaded_spawn(np, |t| {
        let rank = RankInfo::new(t.rank(), t.size());
        let mut ctx = FftContext::init(dims, cfg, Box::new(t)).unwrap();
        let input = slab_slice(dims, global, rank);
        let mut out = vec![Complex64::new(0.0, 0.0); ctx.output_count()];
        ctx.execute(&input, &mut out).unwrap();
        let gathered = ctx.gather(&out).unwrap();
        ctx.finalize().unwrap();
        gathered
    })
    .unwrap();
    outs.into_iter().flatten().next().unwrap()
}

fn bits(v: &[Complex64]) -> Vec<(u64, u64)> {
    v.iter().map(|c| (c.re.to_bits(), c.im.to_bits())).collect()
}

#[test]
fn constant_input_concentrates_at_the_origin() {
    let dims = GridDims::new(4, 4, 4).unwrap();
    let ones = vec![Complex64::new(1.0, 0.0); dims.total()];
    for np in [1usize, 2, 4, 8, 16] {
        let out = run_gathered(dims, np, EngineConfig::default(), &ones);
        assert!((out[0] - Complex64::new(64.0, 0.0)).norm() < 1e-12, "np={np}");
        for (i, v) in out.iter().enumerate().skip(1) {
            assert!(v.norm() < 1e-12, "np={np}, index {i}");
        }
    }
}

#[test]
fn output_is_bitwise_invariant_across_rank_counts() {
    let dims = GridDims::new(4, 6, 8).unwrap();
    let global = global_input(dims, 9);
    let reference = run_gathered(dims, 1, EngineConfig::default(), &global);
    for np in [2usize, 3, 4, 8] {
        let out = run_gathered(dims, np, EngineConfig::default(), &global);
        assert_eq!(bits(&out), bits(&reference), "np={np}");
    }
}

#[test]
fn output_is_bitwise_invariant_across_methods() {
    let dims = GridDims::new(8, 8, 8).unwrap();
    let global = global_input(dims, 17);
    let reference = run_gathered(
        dims,
        4,
        EngineConfig {
            method: CommMethod::WaitAll,
            ..EngineConfig::default()
        },
        &global,
    );
    for strategy in CommStrategy::ALL {
        let cfg = EngineConfig {
            method: CommMethod::UserSelect(strategy),
            block_size: 2,
            ..EngineConfig::default()
        };
        let out = run_gathered(dims, 4, cfg, &global);
        assert_eq!(bits(&out), bits(&reference), "{strategy}");
    }
}

#[test]
fn repeated_executions_reuse_buffers_and_reproduce_outputs() {
    let dims = GridDims::new(8, 8, 8).unwrap();
    let global = global_input(dims, 23);
    let np = 4;
    threaded_spawn(np, |t| {
        let rank = RankInfo::new(t.rank(), t.size());
        let mut ctx = FftContext::init(dims, EngineConfig::default(), Box::new(t)).unwrap();
        let input = slab_slice(dims, &global, rank);
        let mut out = vec![Complex64::new(0.0, 0.0); ctx.output_count()];

        ctx.execute(&input, &mut out).unwrap();
        let first = out.clone();
        let allocs = ctx.buffer_alloc_count();
        let fingerprint = ctx.buffer_fingerprint();

        for _ in 0..10 {
            ctx.execute(&input, &mut out).unwrap();
            assert_eq!(bits(&out), bits(&first), "reruns reproduce bit-identical output");
        }
        assert_eq!(ctx.buffer_alloc_count(), allocs, "no new buffer allocations");
        assert_eq!(ctx.buffer_fingerprint(), fingerprint, "no buffer moved or grew");
        assert_eq!(ctx.execution_count(), 11);
    })
    .unwrap();
}

#[test]
fn lifecycle_contract_is_enforced() {
    let dims = GridDims::new(4, 4, 4).unwrap();
    threaded_spawn(1, |t| {
        let mut ctx = FftContext::init(dims, EngineConfig::default(), Box::new(t)).unwrap();
        let input = vec![Complex64::new(0.0, 0.0); ctx.input_count()];
        let mut out = vec![Complex64::new(0.0, 0.0); ctx.output_count()];

        // Wrong input length is rejected before any work happens.
        assert!(matches!(
            ctx.execute(&input[1..], &mut out),
            Err(EngineError::InputSize { .. })
        ));

        ctx.finalize().unwrap();
        assert!(matches!(ctx.finalize(), Err(EngineError::Finalized)));
        assert!(matches!(
            ctx.execute(&input, &mut out),
            Err(EngineError::Finalized)
        ));
        assert!(matches!(ctx.gather(&out), Err(EngineError::Finalized)));
    })
    .unwrap();
}

#[test]
fn init_rejects_oversubscribed_worlds() {
    let dims = GridDims::new(2, 2, 2).unwrap();
    let results = threaded_spawn(8, |t| {
        FftContext::init(dims, EngineConfig::default(), Box::new(t)).err()
    })
    .unwrap();
    for err in results {
        assert!(matches!(err, Some(EngineError::Decomp(_))));
    }
}

#[test]
fn placement_metadata_matches_the_slabs() {
    let dims = GridDims::new(4, 6, 8).unwrap();
    let np = 6;
    threaded_spawn(np, |t| {
        let rank = RankInfo::new(t.rank(), t.size());
        let ctx = FftContext::init(dims, EngineConfig::default(), Box::new(t)).unwrap();
        let abc = slab_of(dims, DimOrder::Abc, rank).unwrap();
        let cba = slab_of(dims, DimOrder::Cba, rank).unwrap();
        assert_eq!(ctx.input_count(), abc.count);
        assert_eq!(ctx.output_count(), cba.count);
        assert_eq!(ctx.input_range(), slab_corners(&abc, dims));
        assert_eq!(ctx.output_range(), slab_corners(&cba, dims));
    })
    .unwrap();
}

#[test]
fn gather_reassembles_slabs_in_place() {
    let dims = GridDims::new(4, 4, 4).unwrap();
    let np = 8;
    let gathered = threaded_spawn(np, |t| {
        let mut ctx = FftContext::init(dims, EngineConfig::default(), Box::new(t)).unwrap();
        // Mark each rank's output slab with its id.
        let marked = vec![Complex64::new(ctx.rank_info().rank as f64, 0.0); ctx.output_count()];
        ctx.gather(&marked).unwrap()
    })
    .unwrap()
    .into_iter()
    .flatten()
    .next()
    .unwrap();
    for (rank, slab) in (0..np)
        .map(|r| (r, slab_of(dims, DimOrder::Cba, RankInfo::new(r, np)).unwrap()))
    {
        for x in slab.x_range() {
            assert_eq!(gathered[x].re, rank as f64, "index {x}");
        }
    }
}

#[test]
fn user_select_bypasses_tuning() {
    let dims = GridDims::new(4, 4, 4).unwrap();
    threaded_spawn(2, |t| {
        let cfg = EngineConfig {
            method: CommMethod::UserSelect(CommStrategy::PairwiseRing),
            ..EngineConfig::default()
        };
        let ctx = FftContext::init(dims, cfg, Box::new(t)).unwrap();
        assert_eq!(ctx.method(), CommStrategy::PairwiseRing);
        assert_eq!(ctx.tuning_run_count(), 0);
        assert!(ctx.tune_report().is_none());
    })
    .unwrap();
}

#[test]
fn auto_tuning_runs_six_times_tune_reps_and_agrees() {
    let dims = GridDims::new(4, 4, 4).unwrap();
    for np in [1usize, 4] {
        let methods = threaded_spawn(np, |t| {
            let cfg = EngineConfig {
                method: CommMethod::Auto,
                tune_reps: 2,
                ..EngineConfig::default()
            };
            let ctx = FftContext::init(dims, cfg, Box::new(t)).unwrap();
            assert_eq!(ctx.tuning_run_count(), 12, "6 methods x 2 reps");
            assert_eq!(ctx.execution_count(), 0);
            let report = ctx.tune_report().unwrap().clone();
            assert_eq!(report.per_method.len(), 6);
            assert_eq!(report.winner, ctx.method());
            ctx.method()
        })
        .unwrap();
        // Every rank installs the same winner.
        assert!(methods.windows(2).all(|w| w[0] == w[1]), "np={np}");
    }
}

#[test]
fn auto_tuning_with_zero_reps_is_rejected() {
    let dims = GridDims::new(4, 4, 4).unwrap();
    threaded_spawn(1, |t| {
        let cfg = EngineConfig {
            method: CommMethod::Auto,
            tune_reps: 0,
            ..EngineConfig::default()
        };
        assert!(matches!(
            FftContext::init(dims, cfg, Box::new(t)),
            Err(EngineError::InvalidTuneReps)
        ));
    })
    .unwrap();
}

#[test]
fn timing_categories_are_contained_in_the_total() {
    let dims = GridDims::new(8, 8, 8).unwrap();
    let global = global_input(dims, 31);
    threaded_spawn(4, |t| {
        let rank = RankInfo::new(t.rank(), t.size());
        let mut ctx = FftContext::init(dims, EngineConfig::default(), Box::new(t)).unwrap();
        let input = slab_slice(dims, &global, rank);
        let mut out = vec![Complex64::new(0.0, 0.0); ctx.output_count()];
        for _ in 0..3 {
            ctx.execute(&input, &mut out).unwrap();
        }
        let timing = ctx.timing();
        assert!(timing.total > 0.0);
        assert!(timing.fft > 0.0);
        assert!(timing.named_sum() <= timing.total + 1e-9);
        let rebuilt = timing.named_sum() + timing.others;
        assert!((rebuilt - timing.total).abs() < 1e-9);
    })
    .unwrap();
}

#[test]
fn measured_transpose_bytes_match_plans_through_the_engine() {
    let dims = GridDims::new(8, 8, 8).unwrap();
    let global = global_input(dims, 41);
    for np in [2usize, 4, 8, 16] {
        threaded_spawn(np, |t| {
            let rank = RankInfo::new(t.rank(), t.size());
            let mut ctx = FftContext::init(dims, EngineConfig::default(), Box::new(t)).unwrap();
            let input = slab_slice(dims, &global, rank);
            let mut out = vec![Complex64::new(0.0, 0.0); ctx.output_count()];
            let before = ctx.sent_transpose_bytes();
            ctx.execute(&input, &mut out).unwrap();
            let measured = ctx.sent_transpose_bytes() - before;
            assert_eq!(measured, ctx.planned_transpose_bytes(), "np={np}");
        })
        .unwrap();
    }
}
