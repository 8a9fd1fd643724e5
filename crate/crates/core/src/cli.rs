//! Command-line front end.
//!
//! ```text
//! pvgrid run <scenario-file> [--out <csv>]
//! pvgrid case <1..5> [--out <csv>]
//! pvgrid summary <csv> --window <s>
//! pvgrid audit <csv> [--rated-kw <kW>]
//! ```
//!
//! Without `--out` the CSV goes to stdout. Exit codes are listed in [`exit`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::csv;
use crate::presets;
use crate::scenario_file;
use crate::sim::{self, Channel, Scenario, SimOutput, SimRecord};

pub mod exit {
    pub const OK: i32 = 0;
    /// A file could not be read or written.
    pub const IO: i32 = 1;
    /// Bad arguments, scenario file or CSV input.
    pub const PARSE: i32 = 2;
    /// The simulation faulted; the partial CSV was still written.
    pub const RUN_FAULT: i32 = 3;
    /// The balance audit found a violation.
    pub const AUDIT_FAILURE: i32 = 4;
}

/// Audit bound on |balance_residual| as a fraction of rated PV power.
pub const AUDIT_FRACTION: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "pvgrid", version, about = "PV-battery DC microgrid simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        /// CSV output path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the five built-in operating cases.
    Case {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=5))]
        number: u8,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Steady-state mean/min/max of every channel over a trailing window.
    Summary {
        csv: PathBuf,
        /// Trailing window (s).
        #[arg(long)]
        window: f64,
    },
    /// Check |balance_residual| against 0.1% of rated PV power.
    Audit {
        csv: PathBuf,
        /// Rated PV power the bound is taken from (kW).
        #[arg(long, default_value_t = crate::pv::DEFAULT_RATED_POWER_KW)]
        rated_kw: f64,
    },
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    let reason = if e.kind() == std::io::ErrorKind::NotFound { "file not found".to_string() } else { e.to_string() };
    fail(exit::IO, format!("{}: {reason}", path.display()))
}

/// Parse `args` (program name first) and execute; returns the exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::PARSE } else { exit::OK };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Run { scenario, out } => {
            let text = std::fs::read_to_string(&scenario).map_err(|e| io_failure(&scenario, e))?;
            let s = scenario_file::parse_scenario(&text)
                .map_err(|e| fail(exit::PARSE, format!("{}:{e}", scenario.display())))?;
            simulate(&s, out.as_deref(), stdout, stderr)
        }
        Command::Case { number, out } => {
            let s = presets::preset(number)
                .expect("clap restricts the case number")
                .map_err(|e| fail(exit::RUN_FAULT, e.to_string()))?;
            simulate(&s, out.as_deref(), stdout, stderr)
        }
        Command::Summary { csv: path, window } => {
            let records = read_csv(&path)?;
            let summary = sim::steady_state_summary(&records, window).map_err(|e| fail(exit::PARSE, e.to_string()))?;
            write_summary(stdout, &summary, &records).map_err(|e| fail(exit::IO, e.to_string()))?;
            Ok(exit::OK)
        }
        Command::Audit { csv: path, rated_kw } => {
            if !(rated_kw.is_finite() && rated_kw > 0.0) {
                return Err(fail(exit::PARSE, format!("--rated-kw must be positive, got {rated_kw}")));
            }
            let records = read_csv(&path)?;
            let report = audit(&records, rated_kw);
            let _ = writeln!(stdout, "{report}");
            Ok(if report.passed() { exit::OK } else { exit::AUDIT_FAILURE })
        }
    }
}

fn simulate(s: &Scenario, out: Option<&Path>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    let output = sim::run(s).map_err(|e| fail(exit::PARSE, e.to_string()))?;
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_failure(path, e))?;
            csv::write_records(BufWriter::new(file), &output.records).map_err(|e| io_failure(path, e))?;
        }
        None => csv::write_records(&mut *stdout, &output.records).map_err(|e| fail(exit::IO, e.to_string()))?,
    }
    let _ = writeln!(stderr, "{}", run_report(&output));
    Ok(if output.summary.fault.is_some() { exit::RUN_FAULT } else { exit::OK })
}

/// One-line account of a run.
pub fn run_report(output: &SimOutput) -> String {
    let s = &output.summary;
    let status = match &s.fault {
        Some(fault) => format!("FAULT: {fault}"),
        None => "ok".to_string(),
    };
    format!(
        "{status}; steps={} records={} max|residual|={} kW final_soc={} infeasible_periods={}",
        s.steps,
        output.records.len(),
        csv::format_sig6(s.max_abs_residual),
        csv::format_sig6(s.final_soc),
        s.infeasible_periods
    )
}

fn read_csv(path: &Path) -> Result<Vec<SimRecord>, Failure> {
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    csv::read_records(BufReader::new(file)).map_err(|e| match e {
        crate::error::CsvError::Io(io) => io_failure(path, io),
        other => fail(exit::PARSE, format!("{}: {other}", path.display())),
    })
}

/// Table of channel, mean, min, max followed by the final case label.
pub fn write_summary(
    out: &mut dyn Write,
    summary: &sim::SteadyStateSummary,
    records: &[SimRecord],
) -> std::io::Result<()> {
    writeln!(out, "window {} s, {} samples", csv::format_sig6(summary.window), summary.samples)?;
    writeln!(out, "{:<22} {:>12} {:>12} {:>12}", "channel", "mean", "min", "max")?;
    for s in &summary.stats {
        writeln!(
            out,
            "{:<22} {:>12} {:>12} {:>12}",
            s.channel.name(),
            csv::format_sig6(s.mean),
            csv::format_sig6(s.min),
            csv::format_sig6(s.max)
        )?;
    }
    if let Some(last) = records.last() {
        writeln!(out, "{:<22} {:>12}", "case_label", last.case_label.as_str())?;
        writeln!(out, "{:<22} {:>12}", "pv_mode", last.pv_mode.label())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub records: usize,
    pub bound: f64,
    pub max_abs_residual: f64,
    /// Time of the largest residual.
    pub worst_t: f64,
    pub violations: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.records > 0 && self.violations == 0
    }
}

impl std::fmt::Display for AuditReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.records == 0 {
            return write!(f, "FAIL: no records to audit");
        }
        write!(
            f,
            "{}: max |{}| = {} kW at t={} s, bound {} kW, {} of {} records over the bound",
            if self.passed() { "PASS" } else { "FAIL" },
            Channel::BalanceResidual.name(),
            csv::format_sig6(self.max_abs_residual),
            csv::format_sig6(self.worst_t),
            csv::format_sig6(self.bound),
            self.violations,
            self.records
        )
    }
}

/// Check every record's balance residual against the 0.1% bound.
pub fn audit(records: &[SimRecord], rated_kw: f64) -> AuditReport {
    let bound = AUDIT_FRACTION * rated_kw;
    let mut report = AuditReport { records: records.len(), bound, max_abs_residual: 0.0, worst_t: 0.0, violations: 0 };
    for r in records {
        let a = r.balance_residual.abs();
        // NaN counts as a violation
        if !(a <= bound) {
            report.violations += 1;
        }
        if !(a <= report.max_abs_residual) {
            report.max_abs_residual = a;
            report.worst_t = r.t;
        }
    }
    report
}
