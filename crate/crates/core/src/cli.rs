//! The `greencoll` command line.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use wait_timeout::ChildExt;

use crate::adapters::{InterfaceKind, MethodId, Registry};
use crate::advisor::{self, Weighting};
use crate::meter::{open_meter, Backend, MeasureError, MeterConfig};
use crate::profile::{self, ProfileTable, ReportFormat, ReportOptions};
use crate::runner::{self, trimmed_mean, RunConfig};
use crate::workloads::all_workloads;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "greencoll", version, about = "Energy profiling and least-energy advice for collection implementations")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Measure every (popsize, interface, implementation, method) cell.
    Bench(BenchArgs),
    /// Render a profile table as html, csv or tty text.
    Report(ReportArgs),
    /// Recommend the least-energy implementation for each usage site.
    Advise(AdviseArgs),
    /// Measure an external command repeatedly.
    Measure(MeasureArgs),
    /// List the registered implementations.
    Registry(RegistryArgs),
    /// List the workload specifications.
    Workloads(WorkloadsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeterArg {
    Mock,
    Rapl,
}

impl From<MeterArg> for Backend {
    fn from(m: MeterArg) -> Self {
        match m {
            MeterArg::Mock => Backend::Mock,
            MeterArg::Rapl => Backend::Rapl,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MeterArgs {
    /// Energy meter backend; GREENCOLL_METER overrides it.
    #[arg(long, value_enum, default_value = "rapl")]
    pub meter: MeterArg,
    /// Constant power draw of the mock meter, in watts.
    #[arg(long, default_value_t = 10.0)]
    pub mock_watts: f64,
    /// RAPL domains to sum.
    #[arg(long, value_delimiter = ',', default_value = "package")]
    pub domains: Vec<String>,
    #[arg(long, hide = true)]
    pub powercap_root: Option<PathBuf>,
}

impl MeterArgs {
    pub fn config(&self) -> Result<MeterConfig, String> {
        let mut c = MeterConfig {
            backend: self.meter.into(),
            domains: self.domains.clone(),
            mock_power_watts: self.mock_watts,
            ..MeterConfig::default()
        };
        if let Some(root) = &self.powercap_root {
            c.powercap_root = root.clone();
        }
        let c = c.with_env_override().map_err(|e| e.to_string())?;
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    parsed.map_err(|e| format!("invalid seed `{s}`: {e}"))
}

fn parse_interface(s: &str) -> Result<InterfaceKind, String> {
    s.parse().map_err(|e: crate::adapters::AdapterError| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub meter: MeterArgs,
    /// Population size; repeat for several [default: 25000, 250000, 1000000].
    #[arg(long = "popsize", value_name = "N")]
    pub popsizes: Vec<usize>,
    /// Trials per cell.
    #[arg(long, default_value_t = runner::DEFAULT_REPETITIONS)]
    pub reps: usize,
    /// Fraction of trials dropped from each tail before averaging.
    #[arg(long, default_value_t = runner::DEFAULT_TRIM_FRACTION)]
    pub trim: f64,
    /// Per-cell timeout in seconds.
    #[arg(long, default_value_t = runner::DEFAULT_CELL_TIMEOUT_SECONDS)]
    pub timeout: f64,
    /// Corpus seed (decimal or 0x-prefixed hex).
    #[arg(long, value_parser = parse_seed, default_value = "0xC0FFEE")]
    pub seed: u64,
    /// Interfaces to benchmark.
    #[arg(long, value_delimiter = ',', value_parser = parse_interface, default_value = "set,list,map")]
    pub interfaces: Vec<InterfaceKind>,
    /// Restrict to these implementation ids.
    #[arg(long, value_delimiter = ',')]
    pub impls: Vec<String>,
    /// Profile document to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Line-delimited record log [default: <out>.jsonl].
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Skip the unmeasured warm-up pass.
    #[arg(long)]
    pub no_warmup: bool,
    /// Pause between trials on the rapl backend, in milliseconds.
    #[arg(long, default_value_t = runner::DEFAULT_INTER_TRIAL_SLEEP_MS)]
    pub inter_trial_sleep_ms: u64,
    /// Register the deliberately slow test implementation.
    #[arg(long, hide = true)]
    pub test_impls: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Html,
    Csv,
    Tty,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Html => ReportFormat::Html,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Tty => ReportFormat::Tty,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Profile document to render.
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long, value_enum, default_value = "tty")]
    pub format: FormatArg,
    /// Output file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Leave a method out of every grid; repeatable or comma separated.
    #[arg(long, value_delimiter = ',')]
    pub exclude_method: Vec<String>,
    /// Omit the run timestamp.
    #[arg(long)]
    pub no_timestamp: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AdviseArgs {
    /// Profile document to consult.
    #[arg(long)]
    pub table: PathBuf,
    /// Usage document describing the program's collection sites.
    #[arg(long)]
    pub usage: PathBuf,
    /// Weigh methods by the declared call counts.
    #[arg(long)]
    pub weighted: bool,
    /// Also write the recommendations document here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MeasureArgs {
    #[command(flatten)]
    pub meter: MeterArgs,
    #[arg(long, default_value_t = runner::DEFAULT_REPETITIONS)]
    pub reps: usize,
    #[arg(long, default_value_t = runner::DEFAULT_TRIM_FRACTION)]
    pub trim: f64,
    /// Energy of the original program in joules; prints the improvement.
    #[arg(long)]
    pub baseline: Option<f64>,
    /// Kill a run that exceeds this many seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Command to run, after `--`.
    #[arg(required = true, last = true, value_name = "COMMAND")]
    pub command: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RegistryArgs {
    /// Emit descriptors as JSON.
    #[arg(long)]
    pub json: bool,
    #[arg(long, hide = true)]
    pub test_impls: bool,
}

#[derive(Debug, Clone, Args)]
pub struct WorkloadsArgs {
    /// Include operand plans and descriptions.
    #[arg(long)]
    pub describe: bool,
    #[arg(long, value_parser = parse_interface)]
    pub interface: Option<InterfaceKind>,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FATAL } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    let result = match cli.command {
        Cmd::Bench(a) => cmd_bench(&a),
        Cmd::Report(a) => cmd_report(&a),
        Cmd::Advise(a) => cmd_advise(&a),
        Cmd::Measure(a) => cmd_measure(&a),
        Cmd::Registry(a) => cmd_registry(&a),
        Cmd::Workloads(a) => cmd_workloads(&a),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_FATAL
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| e.to_string())
        }
    }
}

fn default_log_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".jsonl");
    out.with_file_name(name)
}

pub fn cmd_bench(a: &BenchArgs) -> Result<i32, String> {
    let config = RunConfig {
        popsizes: if a.popsizes.is_empty() {
            runner::DEFAULT_POPSIZES.to_vec()
        } else {
            a.popsizes.clone()
        },
        repetitions: a.reps,
        trim_fraction: a.trim,
        warmup: !a.no_warmup,
        cell_timeout_seconds: a.timeout,
        seed: a.seed,
        interfaces: a.interfaces.clone(),
        inter_trial_sleep_ms: a.inter_trial_sleep_ms,
    };
    config.validate().map_err(|e| e.to_string())?;
    let meter_config = a.meter.config()?;
    let mut registry = Registry::builtin();
    if a.test_impls {
        registry = registry.with_test_impls();
    }
    if !a.impls.is_empty() {
        registry.retain_ids(&a.impls).map_err(|e| e.to_string())?;
    }
    if !config.interfaces.iter().any(|&i| registry.for_interface(i).next().is_some()) {
        return Err("no registered implementation matches the selected interfaces".into());
    }

    let mut meter = open_meter(&meter_config).map_err(|e| e.to_string())?;
    let log_path = a.log.clone().unwrap_or_else(|| default_log_path(&a.out));
    let mut log = File::create(&log_path).map_err(|e| format!("{}: {e}", log_path.display()))?;
    let mut log_error = None;
    let table = runner::run_suite(&mut meter, &registry, &config, |record| {
        if log_error.is_none() {
            let line = profile::record_json_line(record) + "\n";
            if let Err(e) = log.write_all(line.as_bytes()) {
                log_error = Some(e);
            }
        }
    })
    .map_err(|e| e.to_string())?;
    if let Some(e) = log_error {
        warn!("record log {}: {e}", log_path.display());
    }
    table.save(&a.out).map_err(|e| e.to_string())?;
    let skipped = table.skipped_count();
    eprintln!(
        "{} cells ({} ok, {skipped} skipped) written to {}",
        table.len(),
        table.len() - skipped,
        a.out.display()
    );
    Ok(if skipped > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

fn known_method_name(name: &str) -> bool {
    InterfaceKind::ALL
        .iter()
        .any(|&i| i.roster().iter().any(|m| m.name().eq_ignore_ascii_case(name)))
}

pub fn cmd_report(a: &ReportArgs) -> Result<i32, String> {
    if let Some(bad) = a.exclude_method.iter().find(|m| !known_method_name(m)) {
        return Err(format!("--exclude-method: unknown method `{bad}`"));
    }
    let table = ProfileTable::load(&a.table).map_err(|e| e.to_string())?;
    let options = ReportOptions {
        exclude_methods: a.exclude_method.clone(),
        include_timestamp: !a.no_timestamp,
    };
    let text = profile::emit_report_with(&table, a.format.into(), &options);
    write_output(a.out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

pub fn cmd_advise(a: &AdviseArgs) -> Result<i32, String> {
    let table = ProfileTable::load(&a.table).map_err(|e| e.to_string())?;
    let usage_text = std::fs::read_to_string(&a.usage).map_err(|e| format!("{}: {e}", a.usage.display()))?;
    let usage = advisor::parse_usage(&usage_text).map_err(|e| e.to_string())?;
    let weighting = if a.weighted { Weighting::Counts } else { Weighting::Uniform };
    let results = advisor::recommend_with(&usage, &table, weighting);
    for r in results.iter().flatten() {
        for w in &r.warnings {
            warn!("{w}");
        }
    }
    print!("{}", advisor::summary(&usage, &results));
    if let Some(out) = &a.out {
        let doc = advisor::recommendations_document(&usage, &results);
        std::fs::write(out, doc).map_err(|e| format!("{}: {e}", out.display()))?;
    }
    Ok(if results.iter().any(Result::is_err) { EXIT_PARTIAL } else { EXIT_OK })
}

enum ChildFailure {
    Spawn(std::io::Error),
    Status(ExitStatus),
    TimedOut,
}

impl std::fmt::Display for ChildFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChildFailure::Spawn(e) => write!(f, "could not start command: {e}"),
            ChildFailure::Status(s) => write!(f, "command failed with {s}"),
            ChildFailure::TimedOut => f.write_str("command timed out"),
        }
    }
}

fn run_child(command: &[String], timeout: Option<Duration>) -> Result<(), ChildFailure> {
    let mut child = Command::new(&command[0])
        .args(&command[1..])
        .stdin(Stdio::null())
        .spawn()
        .map_err(ChildFailure::Spawn)?;
    let status = match timeout {
        None => child.wait().map_err(ChildFailure::Spawn)?,
        Some(limit) => match child.wait_timeout(limit).map_err(ChildFailure::Spawn)? {
            Some(s) => s,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(ChildFailure::TimedOut);
            }
        },
    };
    if status.success() {
        Ok(())
    } else {
        Err(ChildFailure::Status(status))
    }
}

pub fn cmd_measure(a: &MeasureArgs) -> Result<i32, String> {
    let check = RunConfig {
        repetitions: a.reps,
        trim_fraction: a.trim,
        ..RunConfig::default()
    };
    check.validate().map_err(|e| e.to_string())?;
    if let Some(b) = a.baseline {
        if !(b.is_finite() && b > 0.0) {
            return Err(format!("--baseline must be positive, got {b}"));
        }
    }
    let timeout = match a.timeout {
        Some(t) if !(t.is_finite() && t > 0.0) => return Err(format!("--timeout must be positive, got {t}")),
        Some(t) => Some(Duration::from_secs_f64(t)),
        None => None,
    };
    let meter_config = a.meter.config()?;
    let mut meter = open_meter(&meter_config).map_err(|e| e.to_string())?;
    let pause = meter.backend() == Backend::Rapl;

    let mut joules = Vec::with_capacity(a.reps);
    let mut millis = Vec::with_capacity(a.reps);
    for trial in 0..a.reps {
        let mut attempt = 0;
        let delta = loop {
            match meter.measure(|| run_child(&a.command, timeout)) {
                Ok(((), d)) => break d,
                Err(MeasureError::Meter(e)) => return Err(e.to_string()),
                Err(MeasureError::Action(f)) if attempt == 0 => {
                    warn!("trial {}: {f}; rerunning", trial + 1);
                    attempt += 1;
                }
                Err(MeasureError::Action(f)) => return Err(format!("trial {} failed twice: {f}", trial + 1)),
            }
        };
        info!("trial {}: {:.6} J {:.3} ms", trial + 1, delta.joules, delta.elapsed_millis);
        joules.push(delta.joules);
        millis.push(delta.elapsed_millis);
        if pause && trial + 1 < a.reps {
            std::thread::sleep(Duration::from_millis(runner::DEFAULT_INTER_TRIAL_SLEEP_MS));
        }
    }
    let e = trimmed_mean(&joules, a.trim).map_err(|e| e.to_string())?;
    let t = trimmed_mean(&millis, a.trim).map_err(|e| e.to_string())?;
    println!("energy_j: {e:.6}");
    println!("time_ms: {t:.3}");
    if let Some(b) = a.baseline {
        let f = advisor::improvement(b, e).map_err(|e| e.to_string())?;
        println!("improvement: {}", advisor::format_improvement(f));
    }
    Ok(EXIT_OK)
}

pub fn cmd_registry(a: &RegistryArgs) -> Result<i32, String> {
    let mut registry = Registry::builtin();
    if a.test_impls {
        registry = registry.with_test_impls();
    }
    let descriptors = registry.descriptors();
    let text = if a.json {
        serde_json::to_string_pretty(&descriptors).map_err(|e| e.to_string())? + "\n"
    } else {
        let w = descriptors.iter().map(|d| d.id.len()).max().unwrap_or(0);
        descriptors
            .iter()
            .map(|d| format!("{:<5} {:<w$}  {}  ({})\n", d.interface, d.id, d.display_name, d.notes))
            .collect()
    };
    write_output(None, &text)?;
    Ok(EXIT_OK)
}

pub fn cmd_workloads(a: &WorkloadsArgs) -> Result<i32, String> {
    let mut text = String::new();
    for spec in all_workloads() {
        if a.interface.is_some_and(|i| i != spec.interface) {
            continue;
        }
        let id = MethodId::to_string(&spec.method);
        if a.describe {
            text.push_str(&format!(
                "{id}\n  operands: {}\n  rounds: {}\n  {}\n",
                spec.operand_plan.as_str(),
                if spec.destructive() { crate::workloads::BULK_REPEATS } else { 1 },
                spec.description
            ));
        } else {
            text.push_str(&id);
            text.push('\n');
        }
    }
    write_output(None, &text)?;
    Ok(EXIT_OK)
}

/// Process entry point.
pub fn main() -> i32 {
    run_from(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::DEFAULT_SEED;

    #[test]
    fn seed_accepts_hex_and_decimal() {
        assert_eq!(parse_seed("0xC0FFEE").unwrap(), DEFAULT_SEED);
        assert_eq!(parse_seed("12648430").unwrap(), DEFAULT_SEED);
        assert!(parse_seed("zz").is_err());
    }

    #[test]
    fn parses_bench_flags() {
        let cli = Cli::try_parse_from([
            "greencoll", "bench", "--meter", "mock", "--popsize", "2500", "--popsize", "100", "--reps", "5",
            "--trim", "0.2", "--timeout", "2", "--seed", "7", "--interfaces", "set,map", "--impls",
            "hash-set,btree-map", "--out", "t.profile",
        ])
        .unwrap();
        let Cmd::Bench(b) = cli.command else { panic!("not bench") };
        assert_eq!(b.popsizes, [2500, 100]);
        assert_eq!(b.interfaces, [InterfaceKind::Set, InterfaceKind::Map]);
        assert_eq!(b.impls, ["hash-set", "btree-map"]);
        assert_eq!(b.meter.meter, MeterArg::Mock);
        assert_eq!(default_log_path(&b.out), PathBuf::from("t.profile.jsonl"));
    }

    #[test]
    fn invalid_flags_have_no_side_effects() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("t.profile");
        let o = out.to_str().unwrap();
        for bad in [
            vec!["greencoll", "bench", "--meter", "mock", "--reps", "2", "--trim", "0.3", "--out", o],
            vec!["greencoll", "bench", "--meter", "mock", "--popsize", "3", "--out", o],
            vec!["greencoll", "bench", "--meter", "mock", "--impls", "nope", "--out", o],
            vec!["greencoll", "bench", "--meter", "mock", "--interfaces", "queue", "--out", o],
        ] {
            assert_eq!(run_from(bad), EXIT_FATAL);
        }
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn help_lists_bench_flags() {
        let err = Cli::try_parse_from(["greencoll", "bench", "--help"]).unwrap_err();
        let help = err.to_string();
        for flag in [
            "--popsize", "--reps", "--trim", "--timeout", "--seed", "--interfaces", "--impls", "--out", "--meter",
        ] {
            assert!(help.contains(flag), "{flag} missing from help");
        }
    }
}
