//! Driver configuration shared by the CLI subcommands.

use std::fmt;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use slabfft::{CommMethod, CommStrategy, GridDims};

use crate::HarnessError;

/// Communication method selection as it appears on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    /// Tune all six strategies at init and install the winner.
    Auto,
    /// Sweep all six strategies (bench) or tune over them (tune).
    All,
    One(CommStrategy),
}

impl MethodChoice {
    /// The engine-facing selection; `All` has no single-engine meaning and
    /// maps to `Auto`.
    pub fn as_comm_method(self) -> CommMethod {
        match self {
            MethodChoice::Auto | MethodChoice::All => CommMethod::Auto,
            MethodChoice::One(m) => CommMethod::UserSelect(m),
        }
    }
}

impl FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(MethodChoice::Auto),
            "all" => Ok(MethodChoice::All),
            other => other.parse::<CommStrategy>().map(MethodChoice::One),
        }
    }
}

impl fmt::Display for MethodChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodChoice::Auto => f.write_str("auto"),
            MethodChoice::All => f.write_str("all"),
            MethodChoice::One(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportChoice {
    Threads,
    Sockets,
}

impl FromStr for TransportChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "threads" => Ok(TransportChoice::Threads),
            "sockets" => Ok(TransportChoice::Sockets),
            other => Err(format!("unknown transport '{other}' (threads|sockets)")),
        }
    }
}

impl fmt::Display for TransportChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportChoice::Threads => "threads",
            TransportChoice::Sockets => "sockets",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(format!("unknown format '{other}' (json|csv)")),
        }
    }
}

/// Everything a subcommand needs to run one job.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub dims: GridDims,
    /// Single entry for verify/bench/tune; a sweep for volume.
    pub np_list: Vec<usize>,
    pub method: MethodChoice,
    pub transport: TransportChoice,
    pub ranks_file: Option<PathBuf>,
    pub repeats: usize,
    pub tune_reps: usize,
    pub seed: u64,
    pub block_size: usize,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
    pub oracle_cap: usize,
}

impl BenchConfig {
    pub fn new(dims: GridDims, np: usize) -> Self {
        Self {
            dims,
            np_list: vec![np],
            method: MethodChoice::One(CommStrategy::WaitSome),
            transport: TransportChoice::Threads,
            ranks_file: None,
            repeats: 10,
            tune_reps: 2,
            seed: 42,
            block_size: slabfft::DEFAULT_BLOCK_SIZE,
            format: OutputFormat::Json,
            out: None,
            oracle_cap: crate::oracle::DEFAULT_ORACLE_CAP,
        }
    }

    pub fn single_np(&self) -> Result<usize, HarnessError> {
        match self.np_list.as_slice() {
            [np] => Ok(*np),
            _ => Err(HarnessError::Invalid(
                "this command takes exactly one --np value".into(),
            )),
        }
    }
}

/// Parse a rank address table: one `rank host:port` entry per line, `#`
/// comments and blank lines ignored. Ranks must form 0..n with no gaps.
pub fn parse_ranks_file(path: &Path) -> Result<Vec<SocketAddr>, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut entries: Vec<(usize, SocketAddr)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let bad = || {
            HarnessError::Invalid(format!(
                "{}:{}: expected 'rank host:port'",
                path.display(),
                lineno + 1
            ))
        };
        let rank: usize = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let addr: SocketAddr = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        entries.push((rank, addr));
    }
    entries.sort_by_key(|&(r, _)| r);
    for (i, &(r, _)) in entries.iter().enumerate() {
        if r != i {
            return Err(HarnessError::Invalid(format!(
                "{}: ranks must cover 0..n without gaps (missing or duplicate rank {i})",
                path.display()
            )));
        }
    }
    Ok(entries.into_iter().map(|(_, a)| a).collect())
}
