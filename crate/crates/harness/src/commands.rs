//! The four driver commands: verify, volume, bench, tune.

use slabfft::{slab_of, CommMethod, CommStrategy, DimOrder, RankInfo, TimingBreakdown};

use crate::config::{BenchConfig, MethodChoice, TransportChoice};
use crate::oracle::{dft3_naive, max_abs_err};
use crate::report::{Report, ReportConfig, ReportRow, VerifySummary};
use crate::runner::{execute_job, seeded_global_input, JobSpec, TransportSetup};
use crate::{config::parse_ranks_file, HarnessError};

/// Acceptance tolerance on the max absolute error against the direct DFT.
pub const VERIFY_TOLERANCE: f64 = 1e-10;

fn transport_setup(cfg: &BenchConfig) -> Result<TransportSetup, HarnessError> {
    Ok(match cfg.transport {
        TransportChoice::Threads => TransportSetup::Threads,
        TransportChoice::Sockets => TransportSetup::Sockets {
            addrs: cfg
                .ranks_file
                .as_deref()
                .map(parse_ranks_file)
                .transpose()?,
        },
    })
}

fn report_config(cfg: &BenchConfig, command: &str) -> ReportConfig {
    ReportConfig {
        command: command.into(),
        dims: cfg.dims.to_string(),
        np: cfg.np_list.clone(),
        method: cfg.method.to_string(),
        transport: cfg.transport.to_string(),
        repeats: cfg.repeats,
        tune_reps: cfg.tune_reps,
        seed: cfg.seed,
        block_size: cfg.block_size,
    }
}

/// Form of the input (abc) decomposition at a given rank count.
fn input_form(cfg: &BenchConfig, np: usize) -> Result<String, HarnessError> {
    Ok(slab_of(cfg.dims, DimOrder::Abc, RankInfo::new(0, np))?
        .form
        .to_string())
}

/// Run the pipeline once and compare the gathered output against the direct
/// triple-sum DFT. The report's `verify` section carries the outcome;
/// `pass == false` must surface as a nonzero exit.
pub fn cmd_verify(cfg: &BenchConfig) -> Result<(Report, bool), HarnessError> {
    let np = cfg.single_np()?;
    if cfg.dims.total() > cfg.oracle_cap {
        return Err(HarnessError::OracleCap {
            total: cfg.dims.total(),
            cap: cfg.oracle_cap,
        });
    }
    let setup = transport_setup(cfg)?;
    let global = seeded_global_input(cfg.dims, cfg.seed);
    let job = execute_job(
        &setup,
        &JobSpec {
            dims: cfg.dims,
            np,
            method: cfg.method.as_comm_method(),
            tune_reps: cfg.tune_reps,
            block_size: cfg.block_size,
            repeats: 1,
            input: Some(&global),
            gather: true,
        },
    )?;
    let gathered = job
        .gathered()
        .ok_or_else(|| HarnessError::Invalid("gather returned no data on rank 0".into()))?;
    let reference = dft3_naive(cfg.dims, &global);
    let max_err = max_abs_err(gathered, &reference);
    let pass = max_err <= VERIFY_TOLERANCE;

    let row = ReportRow::new(
        job.outcomes[0].method.to_string(),
        np,
        cfg.dims.to_string(),
        input_form(cfg, np)?,
        job.reduced_timing(),
        job.total_planned_bytes(),
        job.total_measured_bytes(),
    );
    let report = Report {
        config: report_config(cfg, "verify"),
        verify: Some(VerifySummary {
            max_abs_error: max_err,
            tolerance: VERIFY_TOLERANCE,
            pass,
        }),
        winner: None,
        rows: vec![row],
    };
    Ok((report, pass))
}

/// Sweep rank counts and compare plan-derived bytes against transport
/// counters, per rank and in total. Any disagreement flips the second
/// return to false (nonzero exit).
pub fn cmd_volume(cfg: &BenchConfig) -> Result<(Report, bool), HarnessError> {
    let setup = transport_setup(cfg)?;
    let global = seeded_global_input(cfg.dims, cfg.seed);
    let mut rows = Vec::with_capacity(cfg.np_list.len());
    let mut all_match = true;
    for &np in &cfg.np_list {
        let job = execute_job(
            &setup,
            &JobSpec {
                dims: cfg.dims,
                np,
                method: cfg.method.as_comm_method(),
                tune_reps: cfg.tune_reps,
                block_size: cfg.block_size,
                repeats: 1,
                input: Some(&global),
                gather: false,
            },
        )?;
        for o in &job.outcomes {
            if o.planned_bytes != o.measured_bytes {
                all_match = false;
            }
        }
        rows.push(ReportRow::new(
            job.outcomes[0].method.to_string(),
            np,
            cfg.dims.to_string(),
            input_form(cfg, np)?,
            job.reduced_timing(),
            job.total_planned_bytes(),
            job.total_measured_bytes(),
        ));
    }
    let report = Report {
        config: report_config(cfg, "volume"),
        verify: None,
        winner: None,
        rows,
    };
    Ok((report, all_match))
}

/// Timing breakdown per method: `repeats` executions each, reporting the
/// per-category across-rank maximum averaged over the repeats.
pub fn cmd_bench(cfg: &BenchConfig) -> Result<Report, HarnessError> {
    let np = cfg.single_np()?;
    let setup = transport_setup(cfg)?;
    let global = seeded_global_input(cfg.dims, cfg.seed);
    let strategies: Vec<CommStrategy> = match cfg.method {
        MethodChoice::One(m) => vec![m],
        MethodChoice::Auto | MethodChoice::All => CommStrategy::ALL.to_vec(),
    };
    let form = input_form(cfg, np)?;
    let mut rows = Vec::with_capacity(strategies.len());
    for strategy in strategies {
        let job = execute_job(
            &setup,
            &JobSpec {
                dims: cfg.dims,
                np,
                method: CommMethod::UserSelect(strategy),
                tune_reps: cfg.tune_reps,
                block_size: cfg.block_size,
                repeats: cfg.repeats,
                input: Some(&global),
                gather: false,
            },
        )?;
        rows.push(ReportRow::new(
            strategy.to_string(),
            np,
            cfg.dims.to_string(),
            form.clone(),
            job.reduced_timing(),
            job.total_planned_bytes(),
            job.total_measured_bytes(),
        ));
    }
    Ok(Report {
        config: report_config(cfg, "bench"),
        verify: None,
        winner: None,
        rows,
    })
}

/// Run the auto-tuning procedure and report the per-method reduced medians
/// plus the installed winner. With a concrete `--method` the tuning is
/// bypassed and the forced method is the winner, with zero tuning runs.
pub fn cmd_tune(cfg: &BenchConfig) -> Result<Report, HarnessError> {
    let np = cfg.single_np()?;
    let setup = transport_setup(cfg)?;
    let form = input_form(cfg, np)?;
    let dims_s = cfg.dims.to_string();

    if let MethodChoice::One(forced) = cfg.method {
        let job = execute_job(
            &setup,
            &JobSpec {
                dims: cfg.dims,
                np,
                method: CommMethod::UserSelect(forced),
                tune_reps: cfg.tune_reps,
                block_size: cfg.block_size,
                repeats: 0,
                input: None,
                gather: false,
            },
        )?;
        debug_assert!(job.outcomes.iter().all(|o| o.tuning_runs == 0));
        let row = ReportRow::new(
            forced.to_string(),
            np,
            dims_s,
            form,
            TimingBreakdown::default(),
            job.total_planned_bytes(),
            0,
        );
        return Ok(Report {
            config: report_config(cfg, "tune"),
            verify: None,
            winner: Some(forced.to_string()),
            rows: vec![row],
        });
    }

    let job = execute_job(
        &setup,
        &JobSpec {
            dims: cfg.dims,
            np,
            method: CommMethod::Auto,
            tune_reps: cfg.tune_reps,
            block_size: cfg.block_size,
            repeats: 0,
            input: None,
            gather: false,
        },
    )?;
    let tune = job.outcomes[0]
        .tune
        .clone()
        .ok_or_else(|| HarnessError::Invalid("auto-tuning produced no report".into()))?;
    let planned = job.total_planned_bytes();
    let rows = tune
        .per_method
        .iter()
        .map(|m| {
            // Per-method bytes actually moved in one tuning execution,
            // summed over ranks.
            let measured: u64 = job
                .outcomes
                .iter()
                .map(|o| {
                    o.tune
                        .as_ref()
                        .map(|t| {
                            t.per_method
                                .iter()
                                .find(|pm| pm.strategy == m.strategy)
                                .map(|pm| pm.rank_bytes_per_exec)
                                .unwrap_or(0)
                        })
                        .unwrap_or(0)
                })
                .sum();
            let timing = TimingBreakdown {
                total: m.median_s,
                ..TimingBreakdown::default()
            };
            ReportRow::new(
                m.strategy.to_string(),
                np,
                dims_s.clone(),
                form.clone(),
                timing,
                planned,
                measured,
            )
        })
        .collect();
    Ok(Report {
        config: report_config(cfg, "tune"),
        verify: None,
        winner: Some(tune.winner.to_string()),
        rows,
    })
}
