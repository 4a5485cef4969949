//! Least-energy implementation advice for declared collection usage.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{AdapterError, InterfaceKind, MethodId};
use crate::profile::ProfileTable;
use crate::runner::CellStatus;

pub const USAGE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdvisorError {
    #[error("malformed usage document: {0}")]
    MalformedDocument(String),
    #[error("unknown {interface} method `{method}`")]
    UnknownMethod { interface: InterfaceKind, method: String },
    #[error("unknown interface `{0}`")]
    UnknownInterface(String),
    #[error("the table has no cells{}", .0.map(|i| format!(" for {i}")).unwrap_or_default())]
    EmptyTable(Option<InterfaceKind>),
    #[error("{impl_id} lacks usable cells for {}", describe_missing(.missing))]
    IncompleteCandidate {
        impl_id: String,
        missing: Vec<(MethodId, MissingReason)>,
    },
    #[error("site {site_id}: no complete candidate ({})", .reasons.join("; "))]
    NoCompleteCandidate { site_id: String, reasons: Vec<String> },
    #[error("original energy must be positive, got {0}")]
    NonPositiveOriginal(f64),
    #[error("optimized energy must be finite and non-negative, got {0}")]
    InvalidOptimized(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingReason {
    Absent,
    SkippedUnsupported,
    SkippedTimeout,
}

impl MissingReason {
    pub fn as_str(self) -> &'static str {
        match self {
            MissingReason::Absent => "absent",
            MissingReason::SkippedUnsupported => "skipped_unsupported",
            MissingReason::SkippedTimeout => "skipped_timeout",
        }
    }
}

fn describe_missing(missing: &[(MethodId, MissingReason)]) -> String {
    missing
        .iter()
        .map(|(m, r)| format!("{} {}", m.name(), r.as_str()))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageSite {
    pub site_id: String,
    pub interface: InterfaceKind,
    pub current_impl: String,
    /// Distinct, in roster order.
    pub methods: Vec<MethodId>,
    pub counts: Option<BTreeMap<MethodId, u64>>,
    pub workload_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageProfile {
    pub sites: Vec<UsageSite>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct UsageDocument {
    schema_version: u32,
    sites: Vec<SiteDocument>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SiteDocument {
    site_id: String,
    interface: String,
    current_impl: String,
    methods: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<BTreeMap<String, u64>>,
    workload_size: usize,
}

fn adapter_error(e: AdapterError) -> AdvisorError {
    match e {
        AdapterError::UnknownInterface(i) => AdvisorError::UnknownInterface(i),
        AdapterError::UnknownMethod { interface, method } => AdvisorError::UnknownMethod { interface, method },
        other => AdvisorError::MalformedDocument(other.to_string()),
    }
}

pub fn parse_usage(document: &str) -> Result<UsageProfile, AdvisorError> {
    let malformed = |m: String| AdvisorError::MalformedDocument(m);
    let doc: UsageDocument = serde_json::from_str(document).map_err(|e| malformed(e.to_string()))?;
    if doc.schema_version != USAGE_SCHEMA_VERSION {
        return Err(malformed(format!(
            "unsupported schema version {} (expected {USAGE_SCHEMA_VERSION})",
            doc.schema_version
        )));
    }
    let mut seen = BTreeSet::new();
    let mut sites = Vec::with_capacity(doc.sites.len());
    for s in doc.sites {
        if s.site_id.is_empty() {
            return Err(malformed("empty site_id".into()));
        }
        if !seen.insert(s.site_id.clone()) {
            return Err(malformed(format!("duplicate site_id `{}`", s.site_id)));
        }
        let interface: InterfaceKind = s.interface.parse().map_err(adapter_error)?;
        if s.current_impl.is_empty() {
            return Err(malformed(format!("site {}: empty current_impl", s.site_id)));
        }
        if s.methods.is_empty() {
            return Err(malformed(format!("site {}: methods must not be empty", s.site_id)));
        }
        if s.workload_size == 0 {
            return Err(malformed(format!("site {}: workload_size must be positive", s.site_id)));
        }
        let methods: BTreeSet<MethodId> = s
            .methods
            .iter()
            .map(|m| MethodId::parse(interface, m).map_err(adapter_error))
            .collect::<Result<_, _>>()?;
        let counts = match s.counts {
            None => None,
            Some(raw) => {
                let mut counts = BTreeMap::new();
                for (name, n) in raw {
                    let m = MethodId::parse(interface, &name).map_err(adapter_error)?;
                    if n == 0 {
                        return Err(malformed(format!("site {}: count for {name} must be positive", s.site_id)));
                    }
                    if !methods.contains(&m) {
                        return Err(malformed(format!("site {}: count given for unused method {name}", s.site_id)));
                    }
                    counts.insert(m, n);
                }
                Some(counts)
            }
        };
        sites.push(UsageSite {
            site_id: s.site_id,
            interface,
            current_impl: s.current_impl,
            methods: methods.into_iter().collect(),
            counts,
            workload_size: s.workload_size,
        });
    }
    Ok(UsageProfile { sites })
}

impl UsageProfile {
    pub fn to_document(&self) -> String {
        let doc = UsageDocument {
            schema_version: USAGE_SCHEMA_VERSION,
            sites: self
                .sites
                .iter()
                .map(|s| SiteDocument {
                    site_id: s.site_id.clone(),
                    interface: s.interface.as_str().to_string(),
                    current_impl: s.current_impl.clone(),
                    methods: s.methods.iter().map(|m| m.name().to_string()).collect(),
                    counts: s
                        .counts
                        .as_ref()
                        .map(|c| c.iter().map(|(m, n)| (m.name().to_string(), *n)).collect()),
                    workload_size: s.workload_size,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("usage documents serialize") + "\n"
    }
}

/// Closest candidate; ties go to the smaller popsize.
pub fn nearest_of(popsizes: &[usize], workload_size: usize) -> Option<usize> {
    popsizes.iter().copied().min_by_key(|&p| (p.abs_diff(workload_size), p))
}

pub fn nearest_popsize(table: &ProfileTable, workload_size: usize) -> Result<usize, AdvisorError> {
    nearest_of(&table.popsizes(None), workload_size).ok_or(AdvisorError::EmptyTable(None))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Totals {
    pub joules: f64,
    pub millis: f64,
}

/// Weighted energy and time sums for one candidate. A method absent from
/// `counts` has weight 1.
pub fn candidate_totals(
    table: &ProfileTable,
    popsize: usize,
    interface: InterfaceKind,
    impl_id: &str,
    methods: &[MethodId],
    counts: Option<&BTreeMap<MethodId, u64>>,
) -> Result<Totals, AdvisorError> {
    let mut totals = Totals { joules: 0.0, millis: 0.0 };
    let mut missing = Vec::new();
    for &m in methods {
        let weight = counts.and_then(|c| c.get(&m)).copied().unwrap_or(1) as f64;
        match table.get(interface, popsize, m, impl_id) {
            Some(r) if r.status == CellStatus::Ok => {
                totals.joules += weight * r.energy_joules.unwrap_or_default();
                totals.millis += weight * r.time_millis.unwrap_or_default();
            }
            Some(r) => missing.push((
                m,
                if r.status == CellStatus::SkippedTimeout {
                    MissingReason::SkippedTimeout
                } else {
                    MissingReason::SkippedUnsupported
                },
            )),
            None => missing.push((m, MissingReason::Absent)),
        }
    }
    if missing.is_empty() {
        Ok(totals)
    } else {
        Err(AdvisorError::IncompleteCandidate {
            impl_id: impl_id.to_string(),
            missing,
        })
    }
}

/// Sum of energies over `methods`; weighted by `counts` when given.
pub fn total_energy(
    table: &ProfileTable,
    popsize: usize,
    interface: InterfaceKind,
    impl_id: &str,
    methods: &[MethodId],
    counts: Option<&BTreeMap<MethodId, u64>>,
) -> Result<f64, AdvisorError> {
    candidate_totals(table, popsize, interface, impl_id, methods, counts).map(|t| t.joules)
}

/// `(original - optimized) / original`.
pub fn improvement(original_joules: f64, optimized_joules: f64) -> Result<f64, AdvisorError> {
    if !(original_joules.is_finite() && original_joules > 0.0) {
        return Err(AdvisorError::NonPositiveOriginal(original_joules));
    }
    if !(optimized_joules.is_finite() && optimized_joules >= 0.0) {
        return Err(AdvisorError::InvalidOptimized(optimized_joules));
    }
    Ok((original_joules - optimized_joules) / original_joules)
}

/// Percentage with two decimals, e.g. `4.37%`.
pub fn format_improvement(fraction: f64) -> String {
    format!("{:.2}%", fraction * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Uniform,
    /// Weigh each method by its declared call count.
    Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCandidate {
    pub impl_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub site_id: String,
    pub interface: InterfaceKind,
    pub current_impl: String,
    pub popsize_used: usize,
    pub weighted: bool,
    pub candidate_totals: BTreeMap<String, f64>,
    pub chosen_impl: String,
    pub chosen_total: f64,
    /// `None` when the current implementation has no complete total.
    pub current_total: Option<f64>,
    pub estimated_improvement: Option<f64>,
    pub skipped_candidates: Vec<SkippedCandidate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn recommend(profile: &UsageProfile, table: &ProfileTable) -> Vec<Result<Recommendation, AdvisorError>> {
    recommend_with(profile, table, Weighting::Uniform)
}

pub fn recommend_with(
    profile: &UsageProfile,
    table: &ProfileTable,
    weighting: Weighting,
) -> Vec<Result<Recommendation, AdvisorError>> {
    profile.sites.iter().map(|s| recommend_site(s, table, weighting)).collect()
}

pub fn recommend_site(site: &UsageSite, table: &ProfileTable, weighting: Weighting) -> Result<Recommendation, AdvisorError> {
    let popsize = nearest_of(&table.popsizes(Some(site.interface)), site.workload_size)
        .ok_or(AdvisorError::EmptyTable(Some(site.interface)))?;
    let mut warnings = Vec::new();
    let counts = match (weighting, &site.counts) {
        (Weighting::Uniform, _) => None,
        (Weighting::Counts, Some(c)) => Some(c),
        (Weighting::Counts, None) => {
            warnings.push(format!("site {} declares no counts; using uniform weights", site.site_id));
            None
        }
    };
    let impls = table.impls(site.interface, popsize);
    if !impls.contains(&site.current_impl) {
        warnings.push(format!(
            "current implementation {} is not in the table at popsize {popsize}",
            site.current_impl
        ));
    }
    let mut complete: Vec<(String, Totals)> = Vec::new();
    let mut skipped = Vec::new();
    for id in &impls {
        match candidate_totals(table, popsize, site.interface, id, &site.methods, counts) {
            Ok(t) => complete.push((id.clone(), t)),
            Err(e) => skipped.push(SkippedCandidate {
                impl_id: id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    complete.sort_by(|a, b| {
        a.1.joules
            .total_cmp(&b.1.joules)
            .then(a.1.millis.total_cmp(&b.1.millis))
            .then_with(|| a.0.cmp(&b.0))
    });
    let Some((chosen_impl, chosen)) = complete.first().cloned() else {
        return Err(AdvisorError::NoCompleteCandidate {
            site_id: site.site_id.clone(),
            reasons: skipped.iter().map(|s| s.reason.clone()).collect(),
        });
    };
    let current_total = complete.iter().find(|(id, _)| *id == site.current_impl).map(|(_, t)| t.joules);
    let estimated_improvement = current_total.and_then(|c| improvement(c, chosen.joules).ok());
    Ok(Recommendation {
        site_id: site.site_id.clone(),
        interface: site.interface,
        current_impl: site.current_impl.clone(),
        popsize_used: popsize,
        weighted: counts.is_some(),
        candidate_totals: complete.iter().map(|(id, t)| (id.clone(), t.joules)).collect(),
        chosen_impl,
        chosen_total: chosen.joules,
        current_total,
        estimated_improvement,
        skipped_candidates: skipped,
        warnings,
    })
}

#[derive(Debug, Serialize)]
struct RecommendationDocument<'a> {
    schema_version: u32,
    recommendations: Vec<&'a Recommendation>,
    failures: Vec<SiteFailure>,
}

#[derive(Debug, Serialize)]
struct SiteFailure {
    site_id: String,
    reason: String,
}

/// Recommendations plus per-site failures as a canonical document.
pub fn recommendations_document(profile: &UsageProfile, results: &[Result<Recommendation, AdvisorError>]) -> String {
    let doc = RecommendationDocument {
        schema_version: USAGE_SCHEMA_VERSION,
        recommendations: results.iter().filter_map(|r| r.as_ref().ok()).collect(),
        failures: profile
            .sites
            .iter()
            .zip(results)
            .filter_map(|(s, r)| {
                r.as_ref().err().map(|e| SiteFailure {
                    site_id: s.site_id.clone(),
                    reason: e.to_string(),
                })
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("recommendation documents serialize") + "\n"
}

pub fn summary(profile: &UsageProfile, results: &[Result<Recommendation, AdvisorError>]) -> String {
    let mut out = String::new();
    for (site, result) in profile.sites.iter().zip(results) {
        match result {
            Ok(r) => {
                let change = if r.chosen_impl == r.current_impl {
                    format!("keep {}", r.chosen_impl)
                } else {
                    format!("{} -> {}", r.current_impl, r.chosen_impl)
                };
                let saving = match (r.current_total, r.estimated_improvement) {
                    (Some(c), Some(f)) => format!("{c:.6} J -> {:.6} J ({})", r.chosen_total, format_improvement(f)),
                    _ => format!("{:.6} J (improvement unavailable)", r.chosen_total),
                };
                out.push_str(&format!(
                    "{} [{} @ {}]: {change}, {saving}\n",
                    r.site_id, r.interface, r.popsize_used
                ));
                for w in &r.warnings {
                    out.push_str(&format!("  warning: {w}\n"));
                }
                for s in &r.skipped_candidates {
                    out.push_str(&format!("  skipped {}: {}\n", s.impl_id, s.reason));
                }
            }
            Err(e) => out.push_str(&format!("{}: {e}\n", site.site_id)),
        }
    }
    out
}
