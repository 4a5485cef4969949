//! Energy-profile tables: persistence, per-row ranking and color-scaled
//! reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{InterfaceKind, MethodId};
use crate::runner::{CellStatus, MeasurementRecord, Trial};

pub const SCHEMA_VERSION: u32 = 1;

pub const GREEN: Rgb = Rgb(0x00, 0xc0, 0x00);
pub const YELLOW: Rgb = Rgb(0xff, 0xff, 0x00);
pub const RED: Rgb = Rgb(0xff, 0x00, 0x00);

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u32 },
    #[error("malformed profile document: {0}")]
    MalformedDocument(String),
    #[error("duplicate cell {0}")]
    DuplicateCell(String),
    #[error("invalid cell {key}: {reason}")]
    InvalidCell { key: String, reason: String },
    #[error("no ok cell for {interface} {method} at popsize {popsize}")]
    EmptyRow {
        interface: InterfaceKind,
        popsize: usize,
        method: MethodId,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub host: String,
    pub meter_backend: String,
    /// Unix seconds.
    pub timestamp: Option<u64>,
    pub seed: u64,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl Default for Metadata {
    fn default() -> Self {
        Self {
            host: String::new(),
            meter_backend: String::new(),
            timestamp: None,
            seed: 0,
            config: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub interface: InterfaceKind,
    pub popsize: usize,
    pub method: MethodId,
    pub impl_id: String,
}

impl CellKey {
    pub fn of(record: &MeasurementRecord) -> Self {
        Self {
            interface: record.interface(),
            popsize: record.popsize,
            method: record.method,
            impl_id: record.impl_id.clone(),
        }
    }
}

impl std::fmt::Display for CellKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}, {})", self.interface, self.popsize, self.method.name(), self.impl_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub schema_version: u32,
    pub metadata: Metadata,
    cells: BTreeMap<CellKey, MeasurementRecord>,
}

fn check_record(key: &CellKey, r: &MeasurementRecord) -> Result<(), ProfileError> {
    let invalid = |reason: &str| {
        Err(ProfileError::InvalidCell {
            key: key.to_string(),
            reason: reason.to_string(),
        })
    };
    if r.popsize == 0 {
        return invalid("popsize must be positive");
    }
    if r.impl_id.is_empty() {
        return invalid("empty implementation id");
    }
    match (r.status, r.energy_joules, r.time_millis) {
        (CellStatus::Ok, Some(e), Some(t)) => {
            if !(e.is_finite() && e > 0.0) {
                return invalid("ok cell needs finite positive energy");
            }
            if !(t.is_finite() && t >= 0.0) {
                return invalid("ok cell needs finite non-negative time");
            }
            if r.trials.is_empty() {
                return invalid("ok cell without trials");
            }
        }
        (CellStatus::Ok, _, _) => return invalid("ok cell without energy or time"),
        (_, None, None) => {}
        _ => return invalid("skipped cell carries measurements"),
    }
    if r.trials.iter().any(|t| !(t.joules.is_finite() && t.millis.is_finite())) {
        return invalid("non-finite trial");
    }
    Ok(())
}

impl ProfileTable {
    pub fn new(metadata: Metadata) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            metadata,
            cells: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, record: MeasurementRecord) -> Result<(), ProfileError> {
        let key = CellKey::of(&record);
        check_record(&key, &record)?;
        if self.cells.contains_key(&key) {
            return Err(ProfileError::DuplicateCell(key.to_string()));
        }
        self.cells.insert(key, record);
        Ok(())
    }

    pub fn get(&self, interface: InterfaceKind, popsize: usize, method: MethodId, impl_id: &str) -> Option<&MeasurementRecord> {
        self.cells.get(&CellKey {
            interface,
            popsize,
            method,
            impl_id: impl_id.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Records in key order: interface, popsize, method, implementation.
    pub fn records(&self) -> impl Iterator<Item = &MeasurementRecord> {
        self.cells.values()
    }

    pub fn records_mut(&mut self) -> impl Iterator<Item = &mut MeasurementRecord> {
        self.cells.values_mut()
    }

    pub fn interfaces(&self) -> Vec<InterfaceKind> {
        self.cells.keys().map(|k| k.interface).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Distinct popsizes, ascending; restricted to one interface if given.
    pub fn popsizes(&self, interface: Option<InterfaceKind>) -> Vec<usize> {
        self.cells
            .keys()
            .filter(|k| interface.is_none_or(|i| k.interface == i))
            .map(|k| k.popsize)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn impls(&self, interface: InterfaceKind, popsize: usize) -> Vec<String> {
        self.cells
            .keys()
            .filter(|k| k.interface == interface && k.popsize == popsize)
            .map(|k| k.impl_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn methods(&self, interface: InterfaceKind, popsize: usize) -> Vec<MethodId> {
        self.cells
            .keys()
            .filter(|k| k.interface == interface && k.popsize == popsize)
            .map(|k| k.method)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn skipped_count(&self) -> usize {
        self.records().filter(|r| !r.status.is_ok()).count()
    }

    pub fn to_document(&self) -> String {
        let doc = ProfileDocument {
            schema_version: self.schema_version,
            metadata: self.metadata.clone(),
            cells: self.records().map(CellDocument::from).collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("profile documents serialize");
        text.push('\n');
        text
    }

    pub fn from_document(text: &str) -> Result<Self, ProfileError> {
        let malformed = |e: serde_json::Error| ProfileError::MalformedDocument(e.to_string());
        let value: serde_json::Value = serde_json::from_str(text).map_err(malformed)?;
        let version = value
            .get("schema_version")
            .ok_or_else(|| ProfileError::MalformedDocument("missing schema_version".into()))?
            .as_u64()
            .ok_or_else(|| ProfileError::MalformedDocument("schema_version is not an integer".into()))?;
        if version != SCHEMA_VERSION as u64 {
            return Err(ProfileError::SchemaVersionMismatch {
                found: version,
                expected: SCHEMA_VERSION,
            });
        }
        let doc: ProfileDocument = serde_json::from_value(value).map_err(malformed)?;
        let mut table = ProfileTable::new(doc.metadata);
        for cell in doc.cells {
            let record = cell.into_record()?;
            table.insert(record).map_err(|e| ProfileError::MalformedDocument(e.to_string()))?;
        }
        Ok(table)
    }

    /// Writes the document next to `path`, then renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), ProfileError> {
        write_atomic(path, self.to_document().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_document(&text)
    }
}

pub fn save(table: &ProfileTable, path: &Path) -> Result<(), ProfileError> {
    table.save(path)
}

pub fn load(path: &Path) -> Result<ProfileTable, ProfileError> {
    ProfileTable::load(path)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ProfileError> {
    let io = |source| ProfileError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDocument {
    schema_version: u32,
    metadata: Metadata,
    cells: Vec<CellDocument>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialDocument {
    j: f64,
    ms: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellDocument {
    interface: InterfaceKind,
    popsize: usize,
    method: String,
    #[serde(rename = "impl")]
    impl_id: String,
    status: CellStatus,
    energy_j: Option<f64>,
    time_ms: Option<f64>,
    trials: Vec<TrialDocument>,
}

impl From<&MeasurementRecord> for CellDocument {
    fn from(r: &MeasurementRecord) -> Self {
        Self {
            interface: r.interface(),
            popsize: r.popsize,
            method: r.method.name().to_string(),
            impl_id: r.impl_id.clone(),
            status: r.status,
            energy_j: r.energy_joules,
            time_ms: r.time_millis,
            trials: r.trials.iter().map(|t| TrialDocument { j: t.joules, ms: t.millis }).collect(),
        }
    }
}

impl CellDocument {
    fn into_record(self) -> Result<MeasurementRecord, ProfileError> {
        let method = MethodId::parse(self.interface, &self.method)
            .map_err(|e| ProfileError::MalformedDocument(e.to_string()))?;
        Ok(MeasurementRecord {
            impl_id: self.impl_id,
            method,
            popsize: self.popsize,
            trials: self.trials.into_iter().map(|t| Trial { joules: t.j, millis: t.ms }).collect(),
            energy_joules: self.energy_j,
            time_millis: self.time_ms,
            status: self.status,
        })
    }
}

/// One cell as a single-line JSON record, in the document's cell format.
pub fn record_json_line(record: &MeasurementRecord) -> String {
    serde_json::to_string(&CellDocument::from(record)).expect("cells serialize")
}

/// Parses a line written by [`record_json_line`].
pub fn parse_record_line(line: &str) -> Result<MeasurementRecord, ProfileError> {
    let cell: CellDocument =
        serde_json::from_str(line).map_err(|e| ProfileError::MalformedDocument(e.to_string()))?;
    cell.into_record()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub impl_id: String,
    pub energy_joules: f64,
    pub time_millis: f64,
    pub color_scalar: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedRow {
    pub interface: InterfaceKind,
    pub popsize: usize,
    pub method: MethodId,
    /// Ascending energy; ties by time, then id.
    pub entries: Vec<RankedEntry>,
    pub skipped: Vec<(String, CellStatus)>,
}

impl RankedRow {
    pub fn entry(&self, impl_id: &str) -> Option<&RankedEntry> {
        self.entries.iter().find(|e| e.impl_id == impl_id)
    }
}

/// `(e - min) / (max - min)`, or 0 when the row is flat.
pub fn color_scalar(e: f64, min: f64, max: f64) -> f64 {
    if max > min {
        ((e - min) / (max - min)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn rank_row(
    table: &ProfileTable,
    interface: InterfaceKind,
    popsize: usize,
    method: MethodId,
) -> Result<RankedRow, ProfileError> {
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for r in table.records().filter(|r| r.interface() == interface && r.popsize == popsize && r.method == method) {
        match (r.status, r.energy_joules, r.time_millis) {
            (CellStatus::Ok, Some(e), Some(t)) => ok.push((r.impl_id.clone(), e, t)),
            (status, _, _) => skipped.push((r.impl_id.clone(), status)),
        }
    }
    if ok.is_empty() {
        return Err(ProfileError::EmptyRow {
            interface,
            popsize,
            method,
        });
    }
    ok.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.2.total_cmp(&b.2)).then_with(|| a.0.cmp(&b.0)));
    let min = ok[0].1;
    let max = ok[ok.len() - 1].1;
    let entries = ok
        .into_iter()
        .enumerate()
        .map(|(i, (impl_id, e, t))| RankedEntry {
            impl_id,
            energy_joules: e,
            time_millis: t,
            color_scalar: color_scalar(e, min, max),
            rank: i + 1,
        })
        .collect();
    Ok(RankedRow {
        interface,
        popsize,
        method,
        entries,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

fn lerp(a: Rgb, b: Rgb, t: f64) -> Rgb {
    let ch = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * t).round() as u8;
    Rgb(ch(a.0, b.0), ch(a.1, b.1), ch(a.2, b.2))
}

/// Green at 0, yellow at 0.5, red at 1, linear in RGB between stops.
pub fn ramp(scalar: f64) -> Rgb {
    let s = if scalar.is_nan() { 0.0 } else { scalar.clamp(0.0, 1.0) };
    if s <= 0.5 {
        lerp(GREEN, YELLOW, s * 2.0)
    } else {
        lerp(YELLOW, RED, (s - 0.5) * 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Html,
    Csv,
    Tty,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "html" => Ok(Self::Html),
            "csv" => Ok(Self::Csv),
            "tty" | "text" => Ok(Self::Tty),
            other => Err(format!("unknown report format `{other}` (expected html, csv or tty)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportOptions {
    /// Method names left out of every grid.
    pub exclude_methods: Vec<String>,
    pub include_timestamp: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            exclude_methods: Vec::new(),
            include_timestamp: true,
        }
    }
}

pub fn skipped_label(status: CellStatus) -> &'static str {
    match status {
        CellStatus::Ok => "",
        CellStatus::SkippedTimeout => "—(timeout)",
        CellStatus::SkippedUnsupported => "—(unsupported)",
    }
}

enum GridCell {
    Missing,
    Skipped(CellStatus),
    Ok { joules: f64, millis: f64, scalar: f64 },
}

struct Grid {
    interface: InterfaceKind,
    popsize: usize,
    impls: Vec<String>,
    rows: Vec<(MethodId, Vec<GridCell>)>,
}

fn grids(table: &ProfileTable, options: &ReportOptions) -> Vec<Grid> {
    let mut out = Vec::new();
    for interface in table.interfaces() {
        for popsize in table.popsizes(Some(interface)) {
            let impls = table.impls(interface, popsize);
            let mut rows = Vec::new();
            for method in table.methods(interface, popsize) {
                if options.exclude_methods.iter().any(|m| m.eq_ignore_ascii_case(method.name())) {
                    continue;
                }
                let ranked = rank_row(table, interface, popsize, method).ok();
                let cells = impls
                    .iter()
                    .map(|id| match table.get(interface, popsize, method, id) {
                        None => GridCell::Missing,
                        Some(r) if !r.status.is_ok() => GridCell::Skipped(r.status),
                        Some(r) => GridCell::Ok {
                            joules: r.energy_joules.unwrap_or_default(),
                            millis: r.time_millis.unwrap_or_default(),
                            scalar: ranked
                                .as_ref()
                                .and_then(|row| row.entry(id))
                                .map_or(0.0, |e| e.color_scalar),
                        },
                    })
                    .collect();
                rows.push((method, cells));
            }
            out.push(Grid {
                interface,
                popsize,
                impls,
                rows,
            });
        }
    }
    out
}

fn interface_title(i: InterfaceKind) -> &'static str {
    match i {
        InterfaceKind::Set => "Set",
        InterfaceKind::List => "List",
        InterfaceKind::Map => "Map",
    }
}

fn fmt_joules(j: f64) -> String {
    format!("{j:.6}")
}

fn fmt_millis(ms: f64) -> String {
    format!("{ms:.3}")
}

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

pub fn emit_report(table: &ProfileTable, format: ReportFormat) -> String {
    emit_report_with(table, format, &ReportOptions::default())
}

/// Renders the table; the output depends only on the table and options.
pub fn emit_report_with(table: &ProfileTable, format: ReportFormat, options: &ReportOptions) -> String {
    match format {
        ReportFormat::Html => html_report(table, options),
        ReportFormat::Csv => csv_report(table, options),
        ReportFormat::Tty => tty_report(table, options),
    }
}

fn html_report(table: &ProfileTable, options: &ReportOptions) -> String {
    let mut s = String::new();
    s.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    s.push_str("<title>greencoll energy profile</title>\n<style>\n");
    s.push_str(
        "body{font-family:sans-serif;margin:1.5em}\n\
         table{border-collapse:collapse;margin-bottom:2em}\n\
         th,td{border:1px solid #999;padding:2px 6px;text-align:right;font-size:0.9em}\n\
         th{background:#eee}\n\
         td.method{text-align:left;font-weight:bold}\n\
         td.skipped{text-align:center;color:#555;background:#ddd}\n\
         td.missing{background:#fff}\n",
    );
    s.push_str("</style>\n</head>\n<body>\n<h1>Energy profile</h1>\n<ul class=\"metadata\">\n");
    let m = &table.metadata;
    let _ = writeln!(s, "<li>host: {}</li>", escape_html(&m.host));
    let _ = writeln!(s, "<li>meter: {}</li>", escape_html(&m.meter_backend));
    let _ = writeln!(s, "<li>seed: {}</li>", m.seed);
    if options.include_timestamp {
        if let Some(ts) = m.timestamp {
            let _ = writeln!(s, "<li class=\"timestamp\">timestamp: {ts}</li>");
        }
    }
    s.push_str("</ul>\n");
    for g in grids(table, options) {
        let _ = writeln!(s, "<h2>{} results, population {}</h2>", interface_title(g.interface), g.popsize);
        let _ = writeln!(
            s,
            "<table class=\"grid\" data-interface=\"{}\" data-popsize=\"{}\">",
            g.interface, g.popsize
        );
        s.push_str("<tr><th rowspan=\"2\">method</th>");
        for id in &g.impls {
            let _ = write!(s, "<th colspan=\"2\">{}</th>", escape_html(id));
        }
        s.push_str("</tr>\n<tr>");
        for _ in &g.impls {
            s.push_str("<th>J</th><th>ms</th>");
        }
        s.push_str("</tr>\n");
        for (method, cells) in &g.rows {
            let _ = write!(s, "<tr><td class=\"method\">{}</td>", method.name());
            for (id, cell) in g.impls.iter().zip(cells) {
                let attrs = format!("data-impl=\"{}\" data-method=\"{}\"", escape_html(id), method.name());
                match cell {
                    GridCell::Missing => {
                        let _ = write!(s, "<td class=\"missing\" colspan=\"2\" {attrs}></td>");
                    }
                    GridCell::Skipped(status) => {
                        let _ = write!(
                            s,
                            "<td class=\"skipped\" colspan=\"2\" {attrs} data-status=\"{}\">{}</td>",
                            status.as_str(),
                            skipped_label(*status)
                        );
                    }
                    GridCell::Ok { joules, millis, scalar } => {
                        let color = ramp(*scalar).hex();
                        let _ = write!(
                            s,
                            "<td class=\"j\" {attrs} style=\"background:{color}\">{}</td>\
                             <td class=\"ms\" style=\"background:{color}\">{}</td>",
                            fmt_joules(*joules),
                            fmt_millis(*millis)
                        );
                    }
                }
            }
            s.push_str("</tr>\n");
        }
        s.push_str("</table>\n");
    }
    s.push_str("</body>\n</html>\n");
    s
}

pub const CSV_HEADER: [&str; 9] = [
    "interface",
    "popsize",
    "method",
    "impl",
    "status",
    "energy_j",
    "time_ms",
    "color_scalar",
    "rank",
];

fn csv_report(table: &ProfileTable, options: &ReportOptions) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory csv");
    let mut rows: BTreeMap<(InterfaceKind, usize, MethodId), Option<RankedRow>> = BTreeMap::new();
    for r in table.records() {
        if options.exclude_methods.iter().any(|m| m.eq_ignore_ascii_case(r.method.name())) {
            continue;
        }
        let ranked = rows
            .entry((r.interface(), r.popsize, r.method))
            .or_insert_with(|| rank_row(table, r.interface(), r.popsize, r.method).ok());
        let entry = ranked.as_ref().and_then(|row| row.entry(&r.impl_id)).filter(|_| r.status.is_ok());
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([
            r.interface().as_str().to_string(),
            r.popsize.to_string(),
            r.method.name().to_string(),
            r.impl_id.clone(),
            r.status.as_str().to_string(),
            opt(r.energy_joules),
            opt(r.time_millis),
            opt(entry.map(|e| e.color_scalar)),
            entry.map(|e| e.rank.to_string()).unwrap_or_default(),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv output is utf-8")
}

fn tty_report(table: &ProfileTable, options: &ReportOptions) -> String {
    let mut s = String::new();
    let m = &table.metadata;
    let _ = writeln!(s, "host: {}  meter: {}  seed: {}", m.host, m.meter_backend, m.seed);
    if options.include_timestamp {
        if let Some(ts) = m.timestamp {
            let _ = writeln!(s, "timestamp: {ts}");
        }
    }
    for g in grids(table, options) {
        let _ = writeln!(s, "\n{} results, population {}", interface_title(g.interface), g.popsize);
        let rendered: Vec<Vec<(String, Option<Rgb>)>> = g
            .rows
            .iter()
            .map(|(_, cells)| {
                cells
                    .iter()
                    .map(|c| match c {
                        GridCell::Missing => (String::new(), None),
                        GridCell::Skipped(st) => (skipped_label(*st).to_string(), None),
                        GridCell::Ok { joules, millis, scalar } => {
                            (format!("{} J {} ms", fmt_joules(*joules), fmt_millis(*millis)), Some(ramp(*scalar)))
                        }
                    })
                    .collect()
            })
            .collect();
        let method_w = g.rows.iter().map(|(m, _)| m.name().len()).max().unwrap_or(0).max(6);
        let widths: Vec<usize> = g
            .impls
            .iter()
            .enumerate()
            .map(|(i, id)| {
                rendered
                    .iter()
                    .map(|row| row[i].0.chars().count())
                    .max()
                    .unwrap_or(0)
                    .max(id.chars().count())
            })
            .collect();
        let _ = write!(s, "{:<method_w$}", "method");
        for (id, w) in g.impls.iter().zip(&widths) {
            let _ = write!(s, "  {id:>w$}");
        }
        s.push('\n');
        for ((method, _), row) in g.rows.iter().zip(&rendered) {
            let _ = write!(s, "{:<method_w$}", method.name());
            for ((text, color), w) in row.iter().zip(&widths) {
                let pad = w - text.chars().count();
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                match color {
                    Some(Rgb(r, g, b)) => {
                        let _ = write!(s, "\x1b[38;2;{r};{g};{b}m{text}\x1b[0m");
                    }
                    None => s.push_str(text),
                }
            }
            s.push('\n');
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{MapMethod, SetMethod};

    fn ok(impl_id: &str, method: MethodId, popsize: usize, e: f64, t: f64) -> MeasurementRecord {
        MeasurementRecord {
            impl_id: impl_id.into(),
            method,
            popsize,
            trials: vec![Trial { joules: e, millis: t }],
            energy_joules: Some(e),
            time_millis: Some(t),
            status: CellStatus::Ok,
        }
    }

    const ADD: MethodId = MethodId::Set(SetMethod::Add);

    fn row_table(energies: &[f64]) -> ProfileTable {
        let mut t = ProfileTable::new(Metadata::default());
        for (i, &e) in energies.iter().enumerate() {
            t.insert(ok(&format!("impl-{i}"), ADD, 100, e, 1.0)).unwrap();
        }
        t
    }

    #[test]
    fn rank_worked_examples() {
        let row = rank_row(&row_table(&[4.0, 6.0, 2.0]), InterfaceKind::Set, 100, ADD).unwrap();
        let scalars: Vec<f64> = row.entries.iter().map(|e| e.color_scalar).collect();
        let ranks: Vec<usize> = row.entries.iter().map(|e| e.rank).collect();
        assert_eq!(scalars, [0.0, 0.5, 1.0]);
        assert_eq!(ranks, [1, 2, 3]);
        assert_eq!(row.entries[0].impl_id, "impl-2");

        let single = rank_row(&row_table(&[3.5]), InterfaceKind::Set, 100, ADD).unwrap();
        assert_eq!((single.entries[0].color_scalar, single.entries[0].rank), (0.0, 1));

        let flat = rank_row(&row_table(&[2.0, 2.0, 2.0]), InterfaceKind::Set, 100, ADD).unwrap();
        assert!(flat.entries.iter().all(|e| e.color_scalar == 0.0));
        assert_eq!(flat.entries.iter().map(|e| e.rank).collect::<Vec<_>>(), [1, 2, 3]);
    }

    #[test]
    fn rank_ties_use_time_then_id() {
        let mut t = ProfileTable::new(Metadata::default());
        t.insert(ok("b", ADD, 10, 1.0, 5.0)).unwrap();
        t.insert(ok("a", ADD, 10, 1.0, 5.0)).unwrap();
        t.insert(ok("c", ADD, 10, 1.0, 4.0)).unwrap();
        let row = rank_row(&t, InterfaceKind::Set, 10, ADD).unwrap();
        let ids: Vec<&str> = row.entries.iter().map(|e| e.impl_id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }

    #[test]
    fn empty_row_and_skips() {
        let mut t = ProfileTable::new(Metadata::default());
        t.insert(MeasurementRecord::skipped("x", ADD, 10, CellStatus::SkippedTimeout)).unwrap();
        assert!(matches!(rank_row(&t, InterfaceKind::Set, 10, ADD), Err(ProfileError::EmptyRow { .. })));
        t.insert(ok("y", ADD, 10, 1.0, 1.0)).unwrap();
        let row = rank_row(&t, InterfaceKind::Set, 10, ADD).unwrap();
        assert_eq!(row.skipped, vec![("x".to_string(), CellStatus::SkippedTimeout)]);
    }

    #[test]
    fn table_rejects_bad_cells() {
        let mut t = ProfileTable::new(Metadata::default());
        t.insert(ok("a", ADD, 10, 1.0, 1.0)).unwrap();
        assert!(matches!(t.insert(ok("a", ADD, 10, 2.0, 1.0)), Err(ProfileError::DuplicateCell(_))));
        assert!(t.insert(ok("b", ADD, 10, 0.0, 1.0)).is_err());
        assert!(t.insert(ok("c", ADD, 10, f64::NAN, 1.0)).is_err());
    }

    #[test]
    fn ramp_stops() {
        assert_eq!(ramp(0.0).hex(), "#00c000");
        assert_eq!(ramp(0.5), YELLOW);
        assert_eq!(ramp(1.0), RED);
        assert_eq!(ramp(0.25), Rgb(0x80, 0xe0, 0x00));
    }

    fn sample_table() -> ProfileTable {
        let mut t = ProfileTable::new(Metadata {
            host: "test <host>".into(),
            meter_backend: "mock".into(),
            timestamp: Some(1_700_000_000),
            seed: 7,
            config: serde_json::json!({"reps": 10, "trim": 0.2}),
        });
        t.insert(ok("hash-map", MethodId::Map(MapMethod::Get), 100, 0.1 + 0.2, 1.0 / 3.0)).unwrap();
        t.insert(ok("btree-map", MethodId::Map(MapMethod::Get), 100, 2.5e-7, 12.0)).unwrap();
        t.insert(MeasurementRecord::skipped("slow", MethodId::Map(MapMethod::Get), 100, CellStatus::SkippedTimeout))
            .unwrap();
        t.insert(ok("hash-map", MethodId::Map(MapMethod::Put), 100, 1.0, 2.0)).unwrap();
        t
    }

    #[test]
    fn document_round_trip() {
        let t = sample_table();
        let back = ProfileTable::from_document(&t.to_document()).unwrap();
        assert_eq!(back, t);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.profile");
        save(&t, &path).unwrap();
        assert_eq!(load(&path).unwrap(), t);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn document_field_names() {
        let v: serde_json::Value = serde_json::from_str(&sample_table().to_document()).unwrap();
        let cell = &v["cells"][0];
        let mut keys: Vec<&str> = cell.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["energy_j", "impl", "interface", "method", "popsize", "status", "time_ms", "trials"]);
        assert!(cell["trials"][0].get("j").is_some() && cell["trials"][0].get("ms").is_some());
        assert_eq!(v["schema_version"], 1);
    }

    #[test]
    fn load_errors() {
        let doc = sample_table().to_document();
        let bumped = doc.replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
        assert!(matches!(
            ProfileTable::from_document(&bumped),
            Err(ProfileError::SchemaVersionMismatch { found: 99, .. })
        ));
        let truncated = &doc[..doc.len() / 2];
        assert!(matches!(ProfileTable::from_document(truncated), Err(ProfileError::MalformedDocument(_))));
        let bad_method = doc.replace("\"get\"", "\"frobnicate\"");
        assert!(matches!(ProfileTable::from_document(&bad_method), Err(ProfileError::MalformedDocument(_))));
    }

    #[test]
    fn csv_rows_and_columns() {
        let t = sample_table();
        let text = emit_report(&t, ReportFormat::Csv);
        let mut r = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
        let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), t.len());
        let slow = rows.iter().find(|row| &row[3] == "slow").unwrap();
        assert_eq!((&slow[4], &slow[5], &slow[8]), ("skipped_timeout", "", ""));
        let best = rows.iter().find(|row| &row[3] == "btree-map").unwrap();
        assert_eq!((&best[7], &best[8]), ("0", "1"));
        assert_eq!(best[5].parse::<f64>().unwrap(), 2.5e-7);
    }

    #[test]
    fn html_is_self_contained_and_colored() {
        let t = sample_table();
        let html = emit_report(&t, ReportFormat::Html);
        assert!(!html.contains("http://") && !html.contains("https://") && !html.contains("<link"));
        assert!(html.contains("data-impl=\"btree-map\" data-method=\"get\" style=\"background:#00c000\""));
        assert!(html.contains("data-impl=\"hash-map\" data-method=\"get\" style=\"background:#ff0000\""));
        assert!(html.contains("—(timeout)"));
        assert!(html.contains("test &lt;host&gt;"));
        assert_eq!(html, emit_report(&t, ReportFormat::Html));
    }

    #[test]
    fn timestamp_flag_and_exclusion() {
        let t = sample_table();
        let quiet = ReportOptions {
            include_timestamp: false,
            ..ReportOptions::default()
        };
        let mut other = t.clone();
        other.metadata.timestamp = Some(1);
        for f in [ReportFormat::Html, ReportFormat::Tty] {
            assert_ne!(emit_report(&t, f), emit_report(&other, f));
            assert_eq!(emit_report_with(&t, f, &quiet), emit_report_with(&other, f, &quiet));
        }
        let no_get = ReportOptions {
            exclude_methods: vec!["get".into()],
            ..ReportOptions::default()
        };
        let html = emit_report_with(&t, ReportFormat::Html, &no_get);
        assert!(!html.contains("data-method=\"get\"") && html.contains("data-method=\"put\""));
        let csv = emit_report_with(&t, ReportFormat::Csv, &no_get);
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn tty_marks_skips() {
        let out = emit_report(&sample_table(), ReportFormat::Tty);
        assert!(out.contains("—(timeout)") && out.contains("Map results, population 100"));
    }
}
