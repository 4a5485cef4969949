//! Benchmark matrix execution: warm-up, repeated measured trials, trimming
//! and timeout-based discard.

use std::time::{Duration, SystemTime, UNIX_EPOCH};

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{InterfaceKind, ListMethod, MapMethod, MethodId, Operand, Registry, RegistryEntry, SetMethod};
use crate::meter::{Backend, EnergyDelta, MeasureError, Meter, MeterError};
use crate::profile::{Metadata, ProfileError, ProfileTable};
use crate::workloads::{
    workload_for, CancelToken, Corpus, FunctionalDigest, Watchdog, WorkloadError, WorkloadScript, MIN_POPSIZE,
};

pub const DEFAULT_POPSIZES: [usize; 3] = [25_000, 250_000, 1_000_000];
pub const DEFAULT_REPETITIONS: usize = 10;
pub const DEFAULT_TRIM_FRACTION: f64 = 0.2;
pub const DEFAULT_CELL_TIMEOUT_SECONDS: f64 = 300.0;
pub const DEFAULT_SEED: u64 = 0xC0FFEE;
pub const DEFAULT_INTER_TRIAL_SLEEP_MS: u64 = 100;

/// Operands consulted by the warm-up pass.
const WARMUP_PROBES: usize = 8;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("no values survive trimming")]
    EmptyAfterTrim,
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Meter(#[from] MeterError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub popsizes: Vec<usize>,
    pub repetitions: usize,
    pub trim_fraction: f64,
    pub warmup: bool,
    pub cell_timeout_seconds: f64,
    pub seed: u64,
    pub interfaces: Vec<InterfaceKind>,
    /// Pause between trials; applied on the rapl backend only.
    pub inter_trial_sleep_ms: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            popsizes: DEFAULT_POPSIZES.to_vec(),
            repetitions: DEFAULT_REPETITIONS,
            trim_fraction: DEFAULT_TRIM_FRACTION,
            warmup: true,
            cell_timeout_seconds: DEFAULT_CELL_TIMEOUT_SECONDS,
            seed: DEFAULT_SEED,
            interfaces: InterfaceKind::ALL.to_vec(),
            inter_trial_sleep_ms: DEFAULT_INTER_TRIAL_SLEEP_MS,
        }
    }
}

/// Number of values dropped from each tail.
pub fn trim_count(n: usize, trim_fraction: f64) -> usize {
    (n as f64 * trim_fraction).floor() as usize
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |msg: String| Err(RunnerError::InvalidConfig(msg));
        if self.popsizes.is_empty() {
            return bad("at least one popsize is required".into());
        }
        if let Some(p) = self.popsizes.iter().find(|&&p| p < MIN_POPSIZE) {
            return bad(format!("popsize {p} is below the minimum of {MIN_POPSIZE}"));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be positive".into());
        }
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return bad(format!("trim fraction {} outside [0, 0.5)", self.trim_fraction));
        }
        let survivors = self.repetitions - 2 * trim_count(self.repetitions, self.trim_fraction);
        if (self.repetitions as f64) * (1.0 - 2.0 * self.trim_fraction) < 1.0 || survivors < 1 {
            return bad(format!(
                "{} repetitions trimmed by {} leave no surviving trial",
                self.repetitions, self.trim_fraction
            ));
        }
        if !(self.cell_timeout_seconds.is_finite() && self.cell_timeout_seconds > 0.0) {
            return bad(format!("cell timeout {} must be positive", self.cell_timeout_seconds));
        }
        if self.interfaces.is_empty() {
            return bad("at least one interface is required".into());
        }
        Ok(())
    }
}

/// Mean after dropping `floor(n * trim_fraction)` values from each end of
/// the sorted input.
pub fn trimmed_mean(values: &[f64], trim_fraction: f64) -> Result<f64, RunnerError> {
    if values.is_empty() || !(0.0..0.5).contains(&trim_fraction) {
        return Err(RunnerError::EmptyAfterTrim);
    }
    let k = trim_count(values.len(), trim_fraction);
    if values.len() <= 2 * k {
        return Err(RunnerError::EmptyAfterTrim);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let kept = &sorted[k..sorted.len() - k];
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    // summation rounding must not push the mean outside the kept range
    Ok(mean.clamp(kept[0], kept[kept.len() - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    SkippedUnsupported,
    SkippedTimeout,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::SkippedUnsupported => "skipped_unsupported",
            CellStatus::SkippedTimeout => "skipped_timeout",
        }
    }

    pub fn is_ok(self) -> bool {
        self == CellStatus::Ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub joules: f64,
    pub millis: f64,
}

impl From<EnergyDelta> for Trial {
    fn from(d: EnergyDelta) -> Self {
        Trial {
            joules: d.joules,
            millis: d.elapsed_millis,
        }
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub impl_id: String,
    pub method: MethodId,
    pub popsize: usize,
    pub trials: Vec<Trial>,
    /// Trimmed mean energy; `None` unless `status` is ok.
    pub energy_joules: Option<f64>,
    pub time_millis: Option<f64>,
    pub status: CellStatus,
}

impl MeasurementRecord {
    pub fn interface(&self) -> InterfaceKind {
        self.method.interface()
    }

    pub fn skipped(impl_id: &str, method: MethodId, popsize: usize, status: CellStatus) -> Self {
        Self {
            impl_id: impl_id.to_string(),
            method,
            popsize,
            trials: Vec::new(),
            energy_joules: None,
            time_millis: None,
            status,
        }
    }

    /// Record summarizing `trials` by trimmed means of each metric,
    /// trimmed independently.
    pub fn from_trials(
        impl_id: &str,
        method: MethodId,
        popsize: usize,
        trials: Vec<Trial>,
        trim_fraction: f64,
    ) -> Result<Self, RunnerError> {
        let joules: Vec<f64> = trials.iter().map(|t| t.joules).collect();
        let millis: Vec<f64> = trials.iter().map(|t| t.millis).collect();
        Ok(Self {
            impl_id: impl_id.to_string(),
            method,
            popsize,
            energy_joules: Some(trimmed_mean(&joules, trim_fraction)?),
            time_millis: Some(trimmed_mean(&millis, trim_fraction)?),
            trials,
            status: CellStatus::Ok,
        })
    }
}

/// Best-effort pin of the calling thread to the CPU it is running on.
pub fn pin_to_current_cpu() -> bool {
    #[cfg(target_os = "linux")]
    unsafe {
        let cpu = libc::sched_getcpu();
        if cpu < 0 {
            return false;
        }
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(cpu as usize, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set) == 0
    }
    #[cfg(not(target_os = "linux"))]
    {
        false
    }
}

fn warmup_probe(interface: InterfaceKind) -> MethodId {
    match interface {
        InterfaceKind::Set => MethodId::Set(SetMethod::Contains),
        InterfaceKind::List => MethodId::List(ListMethod::Contains),
        InterfaceKind::Map => MethodId::Map(MapMethod::Get),
    }
}

fn warmup_traversal(interface: InterfaceKind) -> MethodId {
    match interface {
        InterfaceKind::Set => MethodId::Set(SetMethod::IterateAll),
        InterfaceKind::List => MethodId::List(ListMethod::Iterator),
        InterfaceKind::Map => MethodId::Map(MapMethod::IterateAll),
    }
}

/// Unmeasured pass: construct, populate, a few lookups and one traversal.
pub fn warmup(entry: &RegistryEntry, corpus: &Corpus) -> Result<(), WorkloadError> {
    let mut adapter = entry.construct();
    adapter.populate(&corpus.population);
    let interface = entry.descriptor.interface;
    let probe = warmup_probe(interface);
    for e in corpus.secondary.iter().take(WARMUP_PROBES) {
        std::hint::black_box(adapter.dispatch(probe, Operand::Element(e))?);
    }
    std::hint::black_box(adapter.dispatch(warmup_traversal(interface), Operand::None)?);
    Ok(())
}

/// Outcome of one cell, with the workload digest of the last trial.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub record: MeasurementRecord,
    pub digest: Option<FunctionalDigest>,
}

enum TrialFailure {
    Timeout,
    Unsupported(String),
    Meter(MeterError),
}

fn run_trial(
    meter: &mut Meter,
    entry: &RegistryEntry,
    script: &WorkloadScript,
    corpus: &Corpus,
    cancel: &CancelToken,
) -> Result<(Trial, FunctionalDigest), TrialFailure> {
    let mut adapter = entry.construct();
    adapter.populate(&corpus.population);
    let mut digest = FunctionalDigest::IDENTITY;
    let mut total = EnergyDelta::default();
    for round in script.rounds() {
        if round.repopulate {
            adapter.repopulate(&corpus.population);
        }
        if cancel.is_cancelled() {
            return Err(TrialFailure::Timeout);
        }
        match meter.measure(|| script.run_round(round, &mut adapter, &mut digest, cancel)) {
            Ok(((), d)) => total = total + d,
            Err(MeasureError::Action(WorkloadError::Cancelled)) => return Err(TrialFailure::Timeout),
            Err(MeasureError::Action(e)) => return Err(TrialFailure::Unsupported(e.to_string())),
            Err(MeasureError::Meter(e)) => return Err(TrialFailure::Meter(e)),
        }
    }
    drop(adapter);
    Ok((total.into(), digest))
}

/// Measures one (implementation, method, popsize) cell.
///
/// Every trial gets a freshly populated adapter; population, re-population
/// and teardown stay outside the measured region.
pub fn run_cell(
    meter: &mut Meter,
    entry: &RegistryEntry,
    method: MethodId,
    corpus: &Corpus,
    config: &RunConfig,
) -> Result<CellOutcome, RunnerError> {
    let id = entry.descriptor.id.as_str();
    let skipped = |status| CellOutcome {
        record: MeasurementRecord::skipped(id, method, corpus.popsize, status),
        digest: None,
    };
    if !entry.descriptor.supports(method) {
        return Ok(skipped(CellStatus::SkippedUnsupported));
    }
    let spec = workload_for(entry.descriptor.interface, method)?;
    let script = WorkloadScript::build(&spec, corpus);
    script.ensure_runnable(&entry.construct())?;

    let watchdog = Watchdog::start(Duration::from_secs_f64(config.cell_timeout_seconds));
    let pause = meter.backend() == Backend::Rapl && config.inter_trial_sleep_ms > 0;
    let mut trials = Vec::with_capacity(config.repetitions);
    let mut digest = None;
    for i in 0..config.repetitions {
        match run_trial(meter, entry, &script, corpus, watchdog.token()) {
            Ok((trial, d)) => {
                trials.push(trial);
                digest = Some(d);
            }
            Err(TrialFailure::Timeout) => {
                warn!("{id} {method} @ {}: timed out after {} trial(s)", corpus.popsize, i);
                return Ok(skipped(CellStatus::SkippedTimeout));
            }
            Err(TrialFailure::Unsupported(reason)) => {
                warn!("{id} {method} @ {}: {reason}", corpus.popsize);
                return Ok(skipped(CellStatus::SkippedUnsupported));
            }
            Err(TrialFailure::Meter(e)) => return Err(e.into()),
        }
        if watchdog.fired() {
            return Ok(skipped(CellStatus::SkippedTimeout));
        }
        if pause && i + 1 < config.repetitions {
            std::thread::sleep(Duration::from_millis(config.inter_trial_sleep_ms));
        }
    }
    let record = MeasurementRecord::from_trials(id, method, corpus.popsize, trials, config.trim_fraction)?;
    if record.energy_joules.is_some_and(|e| e <= 0.0) {
        warn!("{id} {method} @ {}: energy below meter resolution", corpus.popsize);
        return Ok(skipped(CellStatus::SkippedUnsupported));
    }
    debug!(
        "{id} {method} @ {}: {:.6} J {:.3} ms",
        corpus.popsize,
        record.energy_joules.unwrap_or_default(),
        record.time_millis.unwrap_or_default()
    );
    Ok(CellOutcome { record, digest })
}

fn host_description() -> String {
    let model = std::fs::read_to_string("/proc/cpuinfo").ok().and_then(|info| {
        info.lines()
            .find(|l| l.starts_with("model name"))
            .and_then(|l| l.split_once(':'))
            .map(|(_, v)| v.trim().to_string())
    });
    let host = std::fs::read_to_string("/etc/hostname").map(|s| s.trim().to_string()).unwrap_or_default();
    let mut parts = vec![format!("{}-{}", std::env::consts::OS, std::env::consts::ARCH)];
    if !host.is_empty() {
        parts.push(host);
    }
    if let Some(m) = model {
        parts.push(m);
    }
    parts.join("; ")
}

pub fn unix_timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Runs every (popsize, interface, implementation, method) cell in that
/// nesting order. `on_record` sees each record as soon as it exists.
///
/// Only meter failures abort the suite; everything else becomes a cell
/// status.
pub fn run_suite(
    meter: &mut Meter,
    registry: &Registry,
    config: &RunConfig,
    mut on_record: impl FnMut(&MeasurementRecord),
) -> Result<ProfileTable, RunnerError> {
    config.validate()?;
    if registry.entries().is_empty() {
        return Err(RunnerError::InvalidConfig("registry is empty".into()));
    }
    if !pin_to_current_cpu() {
        debug!("could not pin the measuring thread");
    }
    let metadata = Metadata {
        host: host_description(),
        meter_backend: meter.backend().to_string(),
        timestamp: Some(unix_timestamp()),
        seed: config.seed,
        config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
    };
    let mut table = ProfileTable::new(metadata);
    for &popsize in &config.popsizes {
        let corpus = Corpus::generate(popsize, config.seed)?;
        for &interface in &config.interfaces {
            for entry in registry.for_interface(interface) {
                let id = &entry.descriptor.id;
                let warm = if config.warmup { warmup(entry, &corpus) } else { Ok(()) };
                if let Err(e) = &warm {
                    warn!("warm-up failed for {id} @ {popsize}: {e}");
                }
                info!("{id} @ {popsize}");
                for method in interface.roster() {
                    let record = if warm.is_err() {
                        MeasurementRecord::skipped(id, method, popsize, CellStatus::SkippedUnsupported)
                    } else {
                        match run_cell(meter, entry, method, &corpus, config) {
                            Ok(outcome) => outcome.record,
                            Err(RunnerError::Meter(e)) => return Err(e.into()),
                            Err(e) => {
                                warn!("{id} {method} @ {popsize}: {e}");
                                MeasurementRecord::skipped(id, method, popsize, CellStatus::SkippedUnsupported)
                            }
                        }
                    };
                    on_record(&record);
                    table.insert(record)?;
                }
            }
        }
    }
    Ok(table)
}
