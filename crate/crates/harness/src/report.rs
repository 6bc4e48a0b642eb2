//! Report emission. One row shape serves every subcommand:
//! `{method, np, dims, form, comm_s, fft_s, buf_comm_s, buf_fft_s,
//! others_s, total_s, bytes_theory, bytes_measured}` — `_s` columns are
//! seconds, `bytes_*` columns are bytes, `form` is the input decomposition
//! ("1d"/"2d") at that rank count. JSON wraps the rows with the echoed
//! config; CSV writes the same columns with a header row first.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use slabfft::TimingBreakdown;

use crate::config::OutputFormat;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub np: usize,
    pub dims: String,
    pub form: String,
    pub comm_s: f64,
    pub fft_s: f64,
    pub buf_comm_s: f64,
    pub buf_fft_s: f64,
    pub others_s: f64,
    pub total_s: f64,
    pub bytes_theory: u64,
    pub bytes_measured: u64,
}

impl ReportRow {
    pub fn new(
        method: impl Into<String>,
        np: usize,
        dims: impl Into<String>,
        form: impl Into<String>,
        timing: TimingBreakdown,
        bytes_theory: u64,
        bytes_measured: u64,
    ) -> Self {
        Self {
            method: method.into(),
            np,
            dims: dims.into(),
            form: form.into(),
            comm_s: timing.communication,
            fft_s: timing.fft,
            buf_comm_s: timing.buffer_comm,
            buf_fft_s: timing.buffer_fft,
            others_s: timing.others,
            total_s: timing.total,
            bytes_theory,
            bytes_measured,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportConfig {
    pub command: String,
    pub dims: String,
    pub np: Vec<usize>,
    pub method: String,
    pub transport: String,
    pub repeats: usize,
    pub tune_reps: usize,
    pub seed: u64,
    pub block_size: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifySummary {
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub config: ReportConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winner: Option<String>,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).expect("row serializes");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv is utf-8")
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
        }
    }

    /// Write to `out`, or stdout when no path is given.
    pub fn emit(&self, format: OutputFormat, out: Option<&Path>) -> std::io::Result<()> {
        let text = self.render(format);
        match out {
            Some(path) => std::fs::write(path, text),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                if !text.ends_with('\n') {
                    stdout.write_all(b"\n")?;
                }
                Ok(())
            }
        }
    }
}
