use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use slabfft_harness::config::{BenchConfig, MethodChoice, OutputFormat, TransportChoice};
use slabfft_harness::{cmd_bench, cmd_tune, cmd_verify, cmd_volume, Report};

#[derive(Parser)]
#[command(
    name = "slabfft",
    version,
    about = "Distributed 3-D FFT driver: verification, volume accounting, benchmarks, tuning"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Grid dimensions, e.g. 8x8x8 or 4x6x8
    #[arg(long)]
    dims: String,
    /// Rank count; `volume` accepts a comma-separated sweep like 2,4,8,16,32
    #[arg(long, default_value = "4")]
    np: String,
    /// auto | all | waitall | alltoallv | waitall-block | waitsome |
    /// waitsome-block | ring (default: waitsome; bench defaults to all)
    #[arg(long)]
    method: Option<String>,
    /// threads | sockets
    #[arg(long, default_value = "threads")]
    transport: String,
    /// Address table for the socket transport: one "rank host:port" per line
    #[arg(long)]
    ranks_file: Option<PathBuf>,
    /// Timed executions per bench row
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Executions per method during auto-tuning
    #[arg(long, default_value_t = 2)]
    tune_reps: usize,
    /// Seed for the reproducible input stream
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Peer-group width for the block methods
    #[arg(long, default_value_t = 32)]
    b_size: usize,
    /// json | csv
    #[arg(long, default_value = "json")]
    format: String,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the pipeline and check the gathered output against the direct DFT
    Verify {
        #[command(flatten)]
        common: Common,
        /// Largest dims.total() the O(total^2) oracle will accept
        #[arg(long, default_value_t = 4096)]
        oracle_cap: usize,
    },
    /// Sweep rank counts and compare plan-derived vs measured bytes
    Volume {
        #[command(flatten)]
        common: Common,
    },
    /// Timing breakdown per communication method
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Auto-tuning report: per-method medians and the chosen winner
    Tune {
        #[command(flatten)]
        common: Common,
    },
}

fn build_config(common: &Common, default_method: MethodChoice) -> Result<BenchConfig> {
    let dims = common
        .dims
        .parse()
        .with_context(|| format!("bad --dims '{}'", common.dims))?;
    let np_list: Vec<usize> = common
        .np
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad --np '{}'", common.np))?;
    if np_list.is_empty() || np_list.contains(&0) {
        bail!("--np needs one or more positive rank counts");
    }
    let method = match &common.method {
        Some(s) => s
            .parse::<MethodChoice>()
            .map_err(|e| anyhow::anyhow!(e))
            .context("bad --method")?,
        None => default_method,
    };
    let transport: TransportChoice = common
        .transport
        .parse()
        .map_err(|e: String| anyhow::anyhow!(e))?;
    let format: OutputFormat = common.format.parse().map_err(|e: String| anyhow::anyhow!(e))?;
    if common.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let mut cfg = BenchConfig::new(dims, np_list[0]);
    cfg.np_list = np_list;
    cfg.method = method;
    cfg.transport = transport;
    cfg.ranks_file = common.ranks_file.clone();
    cfg.repeats = common.repeats;
    cfg.tune_reps = common.tune_reps;
    cfg.seed = common.seed;
    cfg.block_size = common.b_size;
    cfg.format = format;
    cfg.out = common.out.clone();
    Ok(cfg)
}

fn emit(report: &Report, cfg: &BenchConfig) -> Result<()> {
    report
        .emit(cfg.format, cfg.out.as_deref())
        .context("writing report")?;
    Ok(())
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Verify { common, oracle_cap } => {
            let mut cfg = build_config(&common, MethodChoice::One(slabfft::CommStrategy::WaitSome))?;
            cfg.oracle_cap = oracle_cap;
            let (report, pass) = cmd_verify(&cfg)?;
            emit(&report, &cfg)?;
            let v = report.verify.as_ref().unwrap();
            eprintln!(
                "verify {} on {} ranks: max abs error {:.3e} (tolerance {:.1e}) -> {}",
                cfg.dims,
                cfg.np_list[0],
                v.max_abs_error,
                v.tolerance,
                if pass { "PASS" } else { "FAIL" }
            );
            Ok(pass)
        }
        Cmd::Volume { common } => {
            let cfg = build_config(&common, MethodChoice::One(slabfft::CommStrategy::WaitSome))?;
            let (report, all_match) = cmd_volume(&cfg)?;
            emit(&report, &cfg)?;
            for row in &report.rows {
                eprintln!(
                    "volume {} np={} form={}: theory {} B, measured {} B",
                    row.dims, row.np, row.form, row.bytes_theory, row.bytes_measured
                );
            }
            if !all_match {
                eprintln!("volume FAIL: measured bytes diverge from the plan");
            }
            Ok(all_match)
        }
        Cmd::Bench { common } => {
            let cfg = build_config(&common, MethodChoice::All)?;
            let report = cmd_bench(&cfg)?;
            emit(&report, &cfg)?;
            for row in &report.rows {
                eprintln!(
                    "bench {} np={} {}: total {:.6}s (comm {:.6}s, fft {:.6}s)",
                    row.dims, row.np, row.method, row.total_s, row.comm_s, row.fft_s
                );
            }
            Ok(true)
        }
        Cmd::Tune { common } => {
            let cfg = build_config(&common, MethodChoice::Auto)?;
            let report = cmd_tune(&cfg)?;
            emit(&report, &cfg)?;
            for row in &report.rows {
                eprintln!("tune {} np={} {}: median {:.6}s", row.dims, row.np, row.method, row.total_s);
            }
            if let Some(w) = &report.winner {
                eprintln!("tune winner: {w}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
