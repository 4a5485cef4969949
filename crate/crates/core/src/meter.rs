//! Energy and elapsed-time measurement around an action.
//!
//! Two backends are available: `rapl` reads the Linux powercap interface
//! (`/sys/class/powercap/intel-rapl:<n>/energy_uj`), `mock` synthesizes a
//! counter from a configured constant power draw. Sampling is two-point: one
//! reading before the action and one after.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable that overrides the configured backend.
pub const METER_ENV: &str = "GREENCOLL_METER";

pub const DEFAULT_POWERCAP_ROOT: &str = "/sys/class/powercap";

/// Counter range reported by the mock backend (a typical package-domain
/// `max_energy_range_uj`).
pub const MOCK_MAX_RANGE_UJ: u64 = 262_143_328_850;

static RAPL_HANDLE_OPEN: AtomicBool = AtomicBool::new(false);

#[derive(Debug, Error)]
pub enum MeterError {
    #[error("meter backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("failed to read energy counter {path}: {reason}")]
    ReadFailed { path: String, reason: String },
    #[error("samples come from different domains ({before} vs {after})")]
    DomainMismatch { before: String, after: String },
    #[error("invalid meter configuration: {0}")]
    InvalidConfig(String),
}

/// Failure of [`Meter::measure`]: either the meter itself or the measured action.
#[derive(Debug, Error)]
pub enum MeasureError<E> {
    #[error(transparent)]
    Meter(#[from] MeterError),
    #[error("measured action failed: {0}")]
    Action(E),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Rapl,
    Mock,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Rapl => "rapl",
            Backend::Mock => "mock",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Backend {
    type Err = MeterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rapl" => Ok(Backend::Rapl),
            "mock" => Ok(Backend::Mock),
            other => Err(MeterError::InvalidConfig(format!("unknown meter backend `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterConfig {
    pub backend: Backend,
    /// Domain identifiers to sum, matched against the zone `name` file with
    /// any trailing `-<n>` removed (`package-0` matches `package`).
    pub domains: Vec<String>,
    pub mock_power_watts: f64,
    #[serde(skip, default = "default_powercap_root")]
    pub powercap_root: PathBuf,
}

fn default_powercap_root() -> PathBuf {
    PathBuf::from(DEFAULT_POWERCAP_ROOT)
}

impl Default for MeterConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Rapl,
            domains: vec!["package".to_string()],
            mock_power_watts: 10.0,
            powercap_root: default_powercap_root(),
        }
    }
}

impl MeterConfig {
    pub fn mock(watts: f64) -> Self {
        Self {
            backend: Backend::Mock,
            mock_power_watts: watts,
            ..Self::default()
        }
    }

    pub fn rapl() -> Self {
        Self::default()
    }

    /// Applies the `GREENCOLL_METER` override, if set.
    pub fn with_env_override(mut self) -> Result<Self, MeterError> {
        if let Ok(value) = std::env::var(METER_ENV) {
            if !value.trim().is_empty() {
                self.backend = value.parse()?;
            }
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), MeterError> {
        if self.domains.is_empty() {
            return Err(MeterError::InvalidConfig("at least one domain must be selected".into()));
        }
        if self.backend == Backend::Mock
            && !(self.mock_power_watts.is_finite() && self.mock_power_watts > 0.0)
        {
            return Err(MeterError::InvalidConfig(format!(
                "mock power must be finite and positive, got {}",
                self.mock_power_watts
            )));
        }
        Ok(())
    }
}

/// One raw cumulative counter reading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnergySample {
    pub domain_id: String,
    pub cumulative_microjoules: u64,
    pub max_range_microjoules: u64,
    pub timestamp_nanos: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyDelta {
    pub joules: f64,
    pub elapsed_millis: f64,
}

impl std::ops::Add for EnergyDelta {
    type Output = EnergyDelta;

    fn add(self, rhs: Self) -> Self {
        EnergyDelta {
            joules: self.joules + rhs.joules,
            elapsed_millis: self.elapsed_millis + rhs.elapsed_millis,
        }
    }
}

/// Wraparound-corrected counter difference in microjoules.
///
/// A single wrap between the two readings is corrected; several wraps within
/// one interval cannot be detected.
pub fn delta(before: &EnergySample, after: &EnergySample) -> Result<u64, MeterError> {
    if before.domain_id != after.domain_id
        || before.max_range_microjoules != after.max_range_microjoules
    {
        return Err(MeterError::DomainMismatch {
            before: format!("{}/{}", before.domain_id, before.max_range_microjoules),
            after: format!("{}/{}", after.domain_id, after.max_range_microjoules),
        });
    }
    let range = before.max_range_microjoules;
    if range == 0 {
        return Err(MeterError::DomainMismatch {
            before: before.domain_id.clone(),
            after: "zero counter range".into(),
        });
    }
    let b = before.cumulative_microjoules % range;
    let a = after.cumulative_microjoules % range;
    Ok(if a >= b { a - b } else { range - b + a })
}

#[derive(Debug, Clone)]
struct RaplZone {
    domain_id: String,
    energy_path: PathBuf,
    max_range: u64,
}

#[derive(Debug)]
enum Source {
    Rapl(Vec<RaplZone>),
    Mock { watts: f64, domains: Vec<String> },
}

/// An open measurement handle.
///
/// Single-owner: reads and measured actions happen on the owning thread,
/// which `&mut self` on every read enforces.
#[derive(Debug)]
pub struct Meter {
    source: Source,
    origin: Instant,
    last_mock_micros: u64,
    last_timestamp: u64,
}

/// Opens a meter for the configured backend.
pub fn open_meter(config: &MeterConfig) -> Result<Meter, MeterError> {
    config.validate()?;
    let source = match config.backend {
        Backend::Mock => Source::Mock {
            watts: config.mock_power_watts,
            domains: config.domains.clone(),
        },
        Backend::Rapl => {
            let zones = discover_zones(&config.powercap_root, &config.domains)?;
            if RAPL_HANDLE_OPEN.swap(true, Ordering::SeqCst) {
                return Err(MeterError::BackendUnavailable(
                    "a RAPL meter handle is already open in this process".into(),
                ));
            }
            Source::Rapl(zones)
        }
    };
    Ok(Meter {
        source,
        origin: Instant::now(),
        last_mock_micros: 0,
        last_timestamp: 0,
    })
}

fn domain_of(zone_name: &str) -> &str {
    match zone_name.rsplit_once('-') {
        Some((head, tail)) if !tail.is_empty() && tail.chars().all(|c| c.is_ascii_digit()) => head,
        _ => zone_name,
    }
}

fn read_trimmed(path: &Path) -> Result<String, MeterError> {
    fs::read_to_string(path)
        .map(|s| s.trim().to_string())
        .map_err(|e| MeterError::ReadFailed {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
}

fn read_u64(path: &Path) -> Result<u64, MeterError> {
    let text = read_trimmed(path)?;
    text.parse::<u64>().map_err(|e| MeterError::ReadFailed {
        path: path.display().to_string(),
        reason: format!("`{text}` is not a decimal counter: {e}"),
    })
}

fn discover_zones(root: &Path, domains: &[String]) -> Result<Vec<RaplZone>, MeterError> {
    let entries = fs::read_dir(root).map_err(|e| {
        MeterError::BackendUnavailable(format!("cannot list {}: {e}", root.display()))
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .flatten()
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("intel-rapl:"))
        })
        .collect();
    dirs.sort();

    let mut zones = Vec::new();
    for dir in dirs {
        let Ok(name) = read_trimmed(&dir.join("name")) else {
            continue;
        };
        let domain = domain_of(&name);
        if !domains.iter().any(|d| d == domain) {
            continue;
        }
        let energy_path = dir.join("energy_uj");
        let max_range = read_u64(&dir.join("max_energy_range_uj"))
            .map_err(|e| MeterError::BackendUnavailable(e.to_string()))?;
        read_u64(&energy_path).map_err(|e| MeterError::BackendUnavailable(e.to_string()))?;
        if max_range == 0 {
            return Err(MeterError::BackendUnavailable(format!(
                "{} reports a zero counter range",
                dir.display()
            )));
        }
        zones.push(RaplZone {
            domain_id: name,
            energy_path,
            max_range,
        });
    }
    for wanted in domains {
        if !zones.iter().any(|z| domain_of(&z.domain_id) == wanted) {
            return Err(MeterError::BackendUnavailable(format!(
                "no readable RAPL zone for domain `{wanted}` under {}",
                root.display()
            )));
        }
    }
    Ok(zones)
}

impl Meter {
    pub fn backend(&self) -> Backend {
        match self.source {
            Source::Rapl(_) => Backend::Rapl,
            Source::Mock { .. } => Backend::Mock,
        }
    }

    /// Reads one sample per configured domain; all samples of one call share
    /// a timestamp.
    pub fn read_counters(&mut self) -> Result<Vec<EnergySample>, MeterError> {
        match &self.source {
            Source::Rapl(zones) => {
                let mut samples = Vec::with_capacity(zones.len());
                for zone in zones {
                    let value = read_u64(&zone.energy_path)?;
                    samples.push((zone.domain_id.clone(), value % zone.max_range, zone.max_range));
                }
                let ts = (self.origin.elapsed().as_nanos() as u64).max(self.last_timestamp);
                self.last_timestamp = ts;
                Ok(samples
                    .into_iter()
                    .map(|(domain_id, cumulative, range)| EnergySample {
                        domain_id,
                        cumulative_microjoules: cumulative,
                        max_range_microjoules: range,
                        timestamp_nanos: ts,
                    })
                    .collect())
            }
            Source::Mock { watts, domains } => {
                // The mock clock ticks in whole microseconds and strictly
                // advances between reads, so every interval is at least 1 µs.
                let now = self.origin.elapsed().as_micros() as u64;
                let micros = now.max(self.last_mock_micros + 1);
                self.last_mock_micros = micros;
                let ts = micros * 1_000;
                self.last_timestamp = ts;
                // W = J/s = µJ/µs
                let energy = (*watts * micros as f64).floor() as u64 % MOCK_MAX_RANGE_UJ;
                Ok(domains
                    .iter()
                    .map(|d| EnergySample {
                        domain_id: d.clone(),
                        cumulative_microjoules: energy,
                        max_range_microjoules: MOCK_MAX_RANGE_UJ,
                        timestamp_nanos: ts,
                    })
                    .collect())
            }
        }
    }

    /// Runs `action` exactly once between two counter readings.
    pub fn measure<T, E>(
        &mut self,
        action: impl FnOnce() -> Result<T, E>,
    ) -> Result<(T, EnergyDelta), MeasureError<E>> {
        let before = self.read_counters()?;
        let value = action().map_err(MeasureError::Action)?;
        let after = self.read_counters()?;
        let delta = self.interval(&before, &after)?;
        Ok((value, delta))
    }

    /// Converts a pair of readings into joules and milliseconds.
    pub fn interval(
        &self,
        before: &[EnergySample],
        after: &[EnergySample],
    ) -> Result<EnergyDelta, MeterError> {
        if before.len() != after.len() || before.is_empty() {
            return Err(MeterError::DomainMismatch {
                before: format!("{} samples", before.len()),
                after: format!("{} samples", after.len()),
            });
        }
        let mut micro = 0u128;
        for (b, a) in before.iter().zip(after) {
            micro += delta(b, a)? as u128;
        }
        let elapsed = after[0].timestamp_nanos.saturating_sub(before[0].timestamp_nanos);
        Ok(EnergyDelta {
            joules: micro as f64 / 1e6,
            elapsed_millis: elapsed as f64 / 1e6,
        })
    }
}

impl Drop for Meter {
    fn drop(&mut self) {
        if matches!(self.source, Source::Rapl(_)) {
            RAPL_HANDLE_OPEN.store(false, Ordering::SeqCst);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::time::Duration;

    fn sample(c: u64, range: u64) -> EnergySample {
        EnergySample {
            domain_id: "package-0".into(),
            cumulative_microjoules: c,
            max_range_microjoules: range,
            timestamp_nanos: 0,
        }
    }

    fn fake_powercap(dir: &Path, zones: &[(&str, &str, &str, &str)]) {
        for (zone, name, energy, range) in zones {
            let z = dir.join(zone);
            fs::create_dir_all(&z).unwrap();
            fs::write(z.join("name"), format!("{name}\n")).unwrap();
            fs::write(z.join("energy_uj"), format!("{energy}\n")).unwrap();
            fs::write(z.join("max_energy_range_uj"), format!("{range}\n")).unwrap();
        }
    }

    #[test]
    fn delta_worked_examples() {
        assert_eq!(delta(&sample(100, 1_000_000), &sample(300, 1_000_000)).unwrap(), 200);
        assert_eq!(delta(&sample(1_000_000 - 50, 1_000_000), &sample(50, 1_000_000)).unwrap(), 100);
        assert_eq!(delta(&sample(777, 1_000_000), &sample(777, 1_000_000)).unwrap(), 0);
    }

    #[test]
    fn delta_rejects_mixed_domains() {
        let mut other = sample(5, 1_000_000);
        other.domain_id = "dram".into();
        assert!(matches!(
            delta(&sample(1, 1_000_000), &other),
            Err(MeterError::DomainMismatch { .. })
        ));
        assert!(delta(&sample(1, 10), &sample(1, 11)).is_err());
    }

    proptest! {
        #[test]
        fn delta_stays_in_range(range in 1u64..u64::MAX, a in any::<u64>(), b in any::<u64>()) {
            let d = delta(&sample(a % range, range), &sample(b % range, range)).unwrap();
            prop_assert!(d < range);
        }
    }

    #[test]
    fn mock_always_constructible() {
        let mut m = open_meter(&MeterConfig::mock(10.0)).unwrap();
        assert_eq!(m.backend(), Backend::Mock);
        assert_eq!(m.read_counters().unwrap().len(), 1);
    }

    #[test]
    fn config_validation() {
        assert!(open_meter(&MeterConfig::mock(0.0)).is_err());
        assert!(open_meter(&MeterConfig::mock(f64::NAN)).is_err());
        let mut cfg = MeterConfig::mock(10.0);
        cfg.domains.clear();
        assert!(matches!(open_meter(&cfg), Err(MeterError::InvalidConfig(_))));
    }

    #[test]
    fn rapl_without_counters_is_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = MeterConfig {
            powercap_root: dir.path().join("missing"),
            ..MeterConfig::rapl()
        };
        assert!(matches!(open_meter(&cfg), Err(MeterError::BackendUnavailable(_))));
        // present root, but no package zone
        fake_powercap(dir.path(), &[("intel-rapl:0:0", "core", "1", "100")]);
        let cfg = MeterConfig {
            powercap_root: dir.path().to_path_buf(),
            ..MeterConfig::rapl()
        };
        assert!(matches!(open_meter(&cfg), Err(MeterError::BackendUnavailable(_))));
    }

    #[test]
    fn rapl_reads_powercap_files() {
        let dir = tempfile::tempdir().unwrap();
        fake_powercap(
            dir.path(),
            &[
                ("intel-rapl:0", "package-0", "123456", "262143328850"),
                ("intel-rapl:0:1", "dram", "42", "65712999613"),
            ],
        );
        let cfg = MeterConfig {
            powercap_root: dir.path().to_path_buf(),
            domains: vec!["package".into()],
            ..MeterConfig::rapl()
        };
        let mut meter = open_meter(&cfg).unwrap();
        let first = meter.read_counters().unwrap();
        assert_eq!(first.len(), 1);
        assert_eq!(first[0].domain_id, "package-0");
        assert_eq!(first[0].cumulative_microjoules, 123456);
        assert_eq!(first[0].max_range_microjoules, 262143328850);

        // wrapped counter between two reads
        fs::write(dir.path().join("intel-rapl:0/energy_uj"), "100\n").unwrap();
        let second = meter.read_counters().unwrap();
        assert!(second[0].timestamp_nanos >= first[0].timestamp_nanos);
        assert_eq!(delta(&first[0], &second[0]).unwrap(), 262143328850 - 123456 + 100);

        // handle is exclusive within the process
        assert!(matches!(open_meter(&cfg), Err(MeterError::BackendUnavailable(_))));
        drop(meter);

        let both = MeterConfig {
            domains: vec!["package".into(), "dram".into()],
            ..cfg
        };
        let mut meter = open_meter(&both).unwrap();
        let s = meter.read_counters().unwrap();
        assert_eq!(s.len(), 2);
        fs::write(dir.path().join("intel-rapl:0/energy_uj"), "2000100\n").unwrap();
        fs::write(dir.path().join("intel-rapl:0:1/energy_uj"), "1000042\n").unwrap();
        let after = meter.read_counters().unwrap();
        let d = meter.interval(&s, &after).unwrap();
        assert!((d.joules - 3.0).abs() < 1e-12);
        drop(meter);

        fs::write(dir.path().join("intel-rapl:0/energy_uj"), "garbage\n").unwrap();
        let mut meter = open_meter(&MeterConfig {
            domains: vec!["dram".into()],
            ..both
        })
        .unwrap();
        assert!(meter.read_counters().is_ok());
    }

    #[test]
    fn mock_counter_tracks_sleep() {
        let mut m = open_meter(&MeterConfig::mock(10.0)).unwrap();
        let before = m.read_counters().unwrap();
        std::thread::sleep(Duration::from_millis(500));
        let after = m.read_counters().unwrap();
        let d = delta(&before[0], &after[0]).unwrap();
        assert!((5_000_000..5_600_000).contains(&d), "advanced {d} µJ");
    }

    #[test]
    fn measure_sleep_under_mock() {
        let mut m = open_meter(&MeterConfig::mock(10.0)).unwrap();
        let ((), d) = m
            .measure(|| {
                std::thread::sleep(Duration::from_millis(100));
                Ok::<_, ()>(())
            })
            .unwrap();
        assert!(d.elapsed_millis >= 100.0 && d.elapsed_millis < 160.0, "{d:?}");
        assert!((d.joules - 10.0 * d.elapsed_millis / 1000.0).abs() <= 1e-9 * d.joules);
        assert!(d.joules >= 1.0 && d.joules < 1.6);
    }

    #[test]
    fn measure_noop_and_failure() {
        let mut m = open_meter(&MeterConfig::mock(10.0)).unwrap();
        let (v, d) = m.measure(|| Ok::<_, ()>(7)).unwrap();
        assert_eq!(v, 7);
        assert!(d.joules > 0.0 && d.elapsed_millis > 0.0 && d.elapsed_millis < 50.0);

        let mut calls = 0;
        let err = m
            .measure(|| {
                calls += 1;
                Err::<(), _>("boom")
            })
            .unwrap_err();
        assert_eq!(calls, 1);
        assert!(matches!(err, MeasureError::Action("boom")));
    }

    #[test]
    fn mock_timestamps_strictly_increase() {
        let mut m = open_meter(&MeterConfig::mock(3.0)).unwrap();
        let mut last = 0;
        for _ in 0..1000 {
            let ts = m.read_counters().unwrap()[0].timestamp_nanos;
            assert!(ts > last);
            last = ts;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn mock_energy_is_power_times_time(watts in 1u32..500, spins in 0u32..20_000) {
            let mut m = open_meter(&MeterConfig::mock(watts as f64)).unwrap();
            let (_, d) = m.measure(|| {
                let mut acc = 0u64;
                for i in 0..spins {
                    acc = std::hint::black_box(acc.wrapping_add(i as u64));
                }
                Ok::<_, ()>(acc)
            }).unwrap();
            prop_assert!(d.joules.is_finite() && d.joules > 0.0);
            let expected = watts as f64 * d.elapsed_millis / 1000.0;
            prop_assert!((d.joules - expected).abs() <= 1e-9 * expected);
        }
    }

    #[test]
    fn domain_suffix_stripping() {
        assert_eq!(domain_of("package-0"), "package");
        assert_eq!(domain_of("package-12"), "package");
        assert_eq!(domain_of("dram"), "dram");
        assert_eq!(domain_of("psys-x"), "psys-x");
    }

    #[test]
    fn backend_parse() {
        assert_eq!("MOCK".parse::<Backend>().unwrap(), Backend::Mock);
        assert!("perf".parse::<Backend>().is_err());
    }
}
