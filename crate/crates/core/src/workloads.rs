//! Deterministic string corpora and per-method workload scripts.
//!
//! A [`Corpus`] holds the population used to fill the structure under test
//! and a secondary collection one tenth its size (half drawn from the
//! population, half absent from it, shuffled). A [`WorkloadSpec`] names how a
//! roster method is exercised; [`WorkloadScript`] expands it against a corpus
//! into concrete dispatch rounds.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)`, one stream per purpose (see the `STREAM_*`
//! constants). Values are reduced with plain `u64 % n`. Strings are ASCII
//! alphanumeric of length `8 + r % 25`, one draw per character from
//! [`ALPHABET`]. Any implementation following those rules reproduces the same
//! corpora.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{
    fnv1a, map_value, Adapter, AdapterError, InterfaceKind, ListMethod, MapMethod, MethodId, OpResult, Operand,
    SetMethod,
};

pub const ALPHABET: &[u8; 62] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
pub const MIN_POPSIZE: usize = 10;
pub const MIN_STRING_LEN: usize = 8;
pub const MAX_STRING_LEN: usize = 32;
/// Repetitions used by the bulk and whole-structure plans.
pub const BULK_REPEATS: usize = 5;

pub const STREAM_POPULATION: u64 = 0;
pub const STREAM_SECONDARY_PICK: u64 = 1;
pub const STREAM_SECONDARY_NEW: u64 = 2;
pub const STREAM_SECONDARY_SHUFFLE: u64 = 3;
pub const STREAM_INDEX_PROBES: u64 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkloadError {
    #[error("popsize {0} is below the minimum of {MIN_POPSIZE}")]
    PopsizeTooSmall(usize),
    #[error("unknown method `{method}` for interface {interface}")]
    UnknownMethod { interface: InterfaceKind, method: String },
    #[error("workload for {spec} cannot run on a {adapter} adapter")]
    InterfaceMismatch { spec: InterfaceKind, adapter: InterfaceKind },
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error("workload cancelled")]
    Cancelled,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

fn random_string(rng: &mut ChaCha8Rng) -> String {
    let len = MIN_STRING_LEN + below(rng, MAX_STRING_LEN - MIN_STRING_LEN + 1);
    (0..len).map(|_| ALPHABET[below(rng, ALPHABET.len())] as char).collect()
}

fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i + 1);
        items.swap(i, j);
    }
}

/// `popsize` distinct strings, deterministic in `seed`.
pub fn gen_population(popsize: usize, seed: u64) -> Result<Vec<String>, WorkloadError> {
    if popsize < MIN_POPSIZE {
        return Err(WorkloadError::PopsizeTooSmall(popsize));
    }
    let mut rng = stream_rng(seed, STREAM_POPULATION);
    let mut seen = HashSet::with_capacity(popsize);
    let mut out = Vec::with_capacity(popsize);
    while out.len() < popsize {
        let s = random_string(&mut rng);
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Secondary collection of `floor(len/10)` strings: `ceil` half taken from
/// `population`, the rest new, shuffled together.
pub fn gen_secondary(population: &[String], seed: u64) -> Vec<String> {
    let size = population.len() / 10;
    let existing = size.div_ceil(2);
    let fresh = size / 2;

    let mut pick = stream_rng(seed, STREAM_SECONDARY_PICK);
    let mut indices: Vec<usize> = (0..population.len()).collect();
    for i in 0..existing {
        let j = i + below(&mut pick, indices.len() - i);
        indices.swap(i, j);
    }
    let mut out: Vec<String> = indices[..existing].iter().map(|&i| population[i].clone()).collect();

    let present: HashSet<&str> = population.iter().map(String::as_str).collect();
    let mut made = HashSet::with_capacity(fresh);
    let mut gen = stream_rng(seed, STREAM_SECONDARY_NEW);
    while made.len() < fresh {
        let s = random_string(&mut gen);
        if !present.contains(s.as_str()) && made.insert(s.clone()) {
            out.push(s);
        }
    }

    shuffle(&mut out, &mut stream_rng(seed, STREAM_SECONDARY_SHUFFLE));
    out
}

/// Population plus secondary collection for one popsize.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub popsize: usize,
    pub population: Vec<String>,
    pub secondary: Vec<String>,
    pub seed: u64,
}

impl Corpus {
    pub fn generate(popsize: usize, seed: u64) -> Result<Self, WorkloadError> {
        let population = gen_population(popsize, seed)?;
        let secondary = gen_secondary(&population, seed);
        Ok(Self {
            popsize,
            population,
            secondary,
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperandPlan {
    /// One dispatch per secondary element.
    TenthHalfHalf,
    /// The whole secondary collection as operand, five times.
    SecondaryTimes5,
    /// Five operand-free (or range) dispatches.
    Repeat5,
    /// One full traversal.
    TraverseAll,
    /// `popsize` operand-free dispatches.
    PerElementPopsize,
    /// `popsize/10` dispatches at seeded indices.
    IndexProbeTenth,
}

impl OperandPlan {
    pub fn as_str(self) -> &'static str {
        match self {
            OperandPlan::TenthHalfHalf => "tenth_half_half",
            OperandPlan::SecondaryTimes5 => "secondary_times_5",
            OperandPlan::Repeat5 => "repeat_5",
            OperandPlan::TraverseAll => "traverse_all",
            OperandPlan::PerElementPopsize => "per_element_popsize",
            OperandPlan::IndexProbeTenth => "index_probe_tenth",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadSpec {
    pub interface: InterfaceKind,
    pub method: MethodId,
    pub operand_plan: OperandPlan,
    pub description: String,
    /// Built by analogy with the Set recipes.
    pub reconstructed: bool,
}

impl WorkloadSpec {
    /// Whether each repetition destroys the population, so the structure is
    /// re-populated (outside the measured region) before the next one.
    pub fn destructive(&self) -> bool {
        matches!(
            self.method,
            MethodId::Set(SetMethod::Clear | SetMethod::RemoveAll | SetMethod::RetainAll)
                | MethodId::List(ListMethod::Clear | ListMethod::RemoveAll | ListMethod::RetainAll)
                | MethodId::Map(MapMethod::Clear)
        )
    }
}

fn plan_of(method: MethodId) -> (OperandPlan, &'static str) {
    use OperandPlan::*;
    match method {
        MethodId::Set(m) => match m {
            SetMethod::Add => (TenthHalfHalf, "add each secondary element (popsize/10; half present, half absent)"),
            SetMethod::AddAll => (SecondaryTimes5, "addAll with the secondary collection, 5 times"),
            SetMethod::Clear => (Repeat5, "clear, 5 times, re-populating before each repetition"),
            SetMethod::Contains => (TenthHalfHalf, "contains for each secondary element"),
            SetMethod::ContainsAll => (SecondaryTimes5, "containsAll of the secondary collection, 5 times"),
            SetMethod::IterateAll => (TraverseAll, "traverse all popsize elements, hashing each"),
            SetMethod::Iterator => (PerElementPopsize, "create an iterator and take its first item, popsize times"),
            SetMethod::Remove => (TenthHalfHalf, "remove each secondary element"),
            SetMethod::RemoveAll => (SecondaryTimes5, "removeAll of the secondary collection, 5 times, re-populating"),
            SetMethod::RetainAll => (SecondaryTimes5, "retainAll of the secondary collection, 5 times, re-populating"),
            SetMethod::ToArray => (Repeat5, "copy into an array, 5 times"),
        },
        MethodId::List(m) => match m {
            ListMethod::Add => (TenthHalfHalf, "append each secondary element"),
            ListMethod::AddAll => (SecondaryTimes5, "append the secondary collection, 5 times"),
            ListMethod::AddAtIndex => (IndexProbeTenth, "insert each secondary element at a seeded index in [0, len]"),
            ListMethod::AddAllAtIndex => {
                (SecondaryTimes5, "insert the secondary collection at a seeded index in [0, len], 5 times")
            }
            ListMethod::Clear => (Repeat5, "clear, 5 times, re-populating before each repetition"),
            ListMethod::Contains => (TenthHalfHalf, "contains for each secondary element"),
            ListMethod::ContainsAll => (SecondaryTimes5, "containsAll of the secondary collection, 5 times"),
            ListMethod::Get => (IndexProbeTenth, "get at popsize/10 seeded indices"),
            ListMethod::IndexOf => (TenthHalfHalf, "indexOf for each secondary element"),
            ListMethod::Iterator => (PerElementPopsize, "create an iterator and take its first item, popsize times"),
            ListMethod::LastIndexOf => (TenthHalfHalf, "lastIndexOf for each secondary element"),
            ListMethod::ListIterator => {
                (PerElementPopsize, "create a list iterator and take its first item, popsize times")
            }
            ListMethod::ListIteratorAtIndex => {
                (IndexProbeTenth, "create a list iterator at a seeded index and take one item, popsize/10 times")
            }
            ListMethod::Remove => (TenthHalfHalf, "remove the first occurrence of each secondary element"),
            ListMethod::RemoveAll => (SecondaryTimes5, "removeAll of the secondary collection, 5 times, re-populating"),
            ListMethod::RemoveAtIndex => (IndexProbeTenth, "remove at popsize/10 seeded indices in [0, len)"),
            ListMethod::RetainAll => (SecondaryTimes5, "retainAll of the secondary collection, 5 times, re-populating"),
            ListMethod::Set => (IndexProbeTenth, "replace at popsize/10 seeded indices with secondary elements"),
            ListMethod::Sublist => (Repeat5, "take and traverse 5 seeded half-open ranges"),
            ListMethod::ToArray => (Repeat5, "copy into an array, 5 times"),
        },
        MethodId::Map(m) => match m {
            MapMethod::Clear => (Repeat5, "clear, 5 times, re-populating before each repetition"),
            MapMethod::ContainsKey => (TenthHalfHalf, "containsKey for each secondary key"),
            MapMethod::ContainsValue => (TenthHalfHalf, "containsValue for the value derived from each secondary key"),
            MapMethod::EntrySet => (Repeat5, "traverse the entry view, 5 times"),
            MapMethod::Get => (TenthHalfHalf, "get for each secondary key"),
            MapMethod::IterateAll => (TraverseAll, "traverse all keys, looking up each value"),
            MapMethod::KeySet => (Repeat5, "traverse the key view, 5 times"),
            MapMethod::Put => (TenthHalfHalf, "put each secondary key (present keys updated, absent ones inserted)"),
            MapMethod::PutAll => (SecondaryTimes5, "putAll of entries built from the secondary keys, 5 times"),
            MapMethod::Remove => (TenthHalfHalf, "remove each secondary key"),
            MapMethod::Values => (Repeat5, "traverse the value view, 5 times"),
        },
    }
}

pub fn workload_for(interface: InterfaceKind, method: MethodId) -> Result<WorkloadSpec, WorkloadError> {
    if method.interface() != interface {
        return Err(WorkloadError::UnknownMethod {
            interface,
            method: method.name().to_string(),
        });
    }
    let (operand_plan, description) = plan_of(method);
    let reconstructed = interface != InterfaceKind::Set;
    Ok(WorkloadSpec {
        interface,
        method,
        operand_plan,
        description: if reconstructed {
            format!("{description} (reconstructed)")
        } else {
            description.to_string()
        },
        reconstructed,
    })
}

pub fn workload_for_name(interface: InterfaceKind, method: &str) -> Result<WorkloadSpec, WorkloadError> {
    let id = MethodId::parse(interface, method).map_err(|_| WorkloadError::UnknownMethod {
        interface,
        method: method.to_string(),
    })?;
    workload_for(interface, id)
}

/// Every roster method of every interface.
pub fn all_workloads() -> Vec<WorkloadSpec> {
    InterfaceKind::ALL
        .iter()
        .flat_map(|&k| k.roster().into_iter().map(move |m| workload_for(k, m).expect("roster method")))
        .collect()
}

/// Value written by `put`/`putAll` workloads for `key`.
pub fn updated_value(key: &str) -> String {
    let mut v = map_value(key);
    v.push('~');
    v
}

/// Fold of every dispatch result of a workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FunctionalDigest(pub u64);

impl FunctionalDigest {
    pub const IDENTITY: FunctionalDigest = FunctionalDigest(0xcbf2_9ce4_8422_2325);

    pub fn fold(&mut self, result: &OpResult) {
        let (tag, payload): (u8, u64) = match *result {
            OpResult::Unit => (0, 0),
            OpResult::Bool(b) => (1, b as u64),
            OpResult::Size(n) => (2, n as u64),
            OpResult::Element(None) => (3, 0),
            OpResult::Element(Some(h)) => (4, h),
            OpResult::Index(None) => (5, 0),
            OpResult::Index(Some(i)) => (6, i as u64),
            OpResult::Checksum(c) => (7, c),
        };
        self.0 = fnv1a(fnv1a(self.0, &[tag]), &payload.to_le_bytes());
    }
}

impl Default for FunctionalDigest {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Cooperative cancellation flag, checked between dispatches.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Relaxed)
    }
}

/// Background timer that cancels its token once `limit` elapses. Dropping the
/// watchdog stops the timer.
#[derive(Debug)]
pub struct Watchdog {
    token: CancelToken,
    stop: Option<mpsc::Sender<()>>,
    handle: Option<thread::JoinHandle<()>>,
}

impl Watchdog {
    pub fn start(limit: Duration) -> Self {
        let token = CancelToken::new();
        let (tx, rx) = mpsc::channel::<()>();
        let signal = token.clone();
        let handle = thread::spawn(move || {
            if let Err(mpsc::RecvTimeoutError::Timeout) = rx.recv_timeout(limit) {
                signal.cancel();
            }
        });
        Self {
            token,
            stop: Some(tx),
            handle: Some(handle),
        }
    }

    pub fn token(&self) -> &CancelToken {
        &self.token
    }

    pub fn fired(&self) -> bool {
        self.token.is_cancelled()
    }
}

impl Drop for Watchdog {
    fn drop(&mut self) {
        drop(self.stop.take());
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

#[derive(Debug, Clone)]
enum StepArg {
    None,
    Element(String),
    Elements(Arc<[String]>),
    KeyValue(String, String),
    Entries(Arc<[(String, String)]>),
    /// `r % len`
    Index(u64),
    /// `r % (len + 1)`
    Position(u64),
    /// Insert at `r % (len + 1)`.
    InsertAt(u64, String),
    /// Replace at `r % len`.
    ReplaceAt(u64, String),
    InsertAllAt(u64, Arc<[String]>),
    Range(u64, u64),
}

impl StepArg {
    fn resolve(&self, len: usize) -> Operand<'_> {
        let modulo = |r: u64, n: usize| if n == 0 { 0 } else { (r % n as u64) as usize };
        match self {
            StepArg::None => Operand::None,
            StepArg::Element(e) => Operand::Element(e),
            StepArg::Elements(items) => Operand::Elements(items),
            StepArg::KeyValue(k, v) => Operand::KeyValue(k, v),
            StepArg::Entries(entries) => Operand::Entries(entries),
            StepArg::Index(r) => Operand::Index(modulo(*r, len)),
            StepArg::Position(r) => Operand::Index(modulo(*r, len + 1)),
            StepArg::InsertAt(r, e) => Operand::IndexElement(modulo(*r, len + 1), e),
            StepArg::ReplaceAt(r, e) => Operand::IndexElement(modulo(*r, len), e),
            StepArg::InsertAllAt(r, items) => Operand::IndexElements(modulo(*r, len + 1), items),
            StepArg::Range(a, b) => {
                let from = modulo(*a, len + 1);
                let to = from + modulo(*b, len - from + 1);
                Operand::Range(from, to)
            }
        }
    }
}

/// One measured region: optional re-population (unmeasured), then `steps`,
/// each dispatched `repeat` times.
#[derive(Debug, Clone)]
pub struct Round {
    pub repopulate: bool,
    steps: Vec<StepArg>,
    repeat: usize,
}

impl Round {
    fn new(steps: Vec<StepArg>) -> Self {
        Self {
            repopulate: false,
            steps,
            repeat: 1,
        }
    }

    pub fn dispatch_count(&self) -> usize {
        self.steps.len() * self.repeat
    }
}

/// A workload spec expanded against one corpus.
#[derive(Debug, Clone)]
pub struct WorkloadScript {
    spec: WorkloadSpec,
    rounds: Vec<Round>,
}

impl WorkloadScript {
    pub fn build(spec: &WorkloadSpec, corpus: &Corpus) -> Self {
        let secondary: Arc<[String]> = Arc::from(corpus.secondary.clone());
        let probes = || {
            let mut rng = stream_rng(corpus.seed, STREAM_INDEX_PROBES);
            move || rng.next_u64()
        };
        let each = |f: &dyn Fn(&String) -> StepArg| corpus.secondary.iter().map(f).collect::<Vec<_>>();
        let tenth = corpus.popsize / 10;

        let mut rounds = match spec.operand_plan {
            OperandPlan::TenthHalfHalf => {
                let steps = match spec.method {
                    MethodId::Map(MapMethod::ContainsValue) => each(&|k| StepArg::Element(map_value(k))),
                    MethodId::Map(MapMethod::Put) => each(&|k| StepArg::KeyValue(k.clone(), updated_value(k))),
                    _ => each(&|e| StepArg::Element(e.clone())),
                };
                vec![Round::new(steps)]
            }
            OperandPlan::SecondaryTimes5 => {
                let arg = match spec.method {
                    MethodId::Map(MapMethod::PutAll) => {
                        let entries: Arc<[(String, String)]> =
                            corpus.secondary.iter().map(|k| (k.clone(), updated_value(k))).collect();
                        StepArg::Entries(entries)
                    }
                    _ => StepArg::Elements(secondary.clone()),
                };
                if let MethodId::List(ListMethod::AddAllAtIndex) = spec.method {
                    let mut next = probes();
                    let steps = (0..BULK_REPEATS)
                        .map(|_| StepArg::InsertAllAt(next(), secondary.clone()))
                        .collect();
                    vec![Round::new(steps)]
                } else if spec.destructive() {
                    (0..BULK_REPEATS).map(|_| Round::new(vec![arg.clone()])).collect()
                } else {
                    vec![Round::new(vec![arg; BULK_REPEATS])]
                }
            }
            OperandPlan::Repeat5 => {
                if spec.destructive() {
                    (0..BULK_REPEATS).map(|_| Round::new(vec![StepArg::None])).collect()
                } else if let MethodId::List(ListMethod::Sublist) = spec.method {
                    let mut next = probes();
                    let steps = (0..BULK_REPEATS)
                        .map(|_| {
                            let a = next();
                            StepArg::Range(a, next())
                        })
                        .collect();
                    vec![Round::new(steps)]
                } else {
                    vec![Round::new(vec![StepArg::None; BULK_REPEATS])]
                }
            }
            OperandPlan::TraverseAll => vec![Round::new(vec![StepArg::None])],
            OperandPlan::PerElementPopsize => vec![Round {
                repopulate: false,
                steps: vec![StepArg::None],
                repeat: corpus.popsize,
            }],
            OperandPlan::IndexProbeTenth => {
                let mut next = probes();
                let steps: Vec<StepArg> = match spec.method {
                    MethodId::List(ListMethod::AddAtIndex) => {
                        corpus.secondary.iter().map(|e| StepArg::InsertAt(next(), e.clone())).collect()
                    }
                    MethodId::List(ListMethod::Set) => {
                        corpus.secondary.iter().map(|e| StepArg::ReplaceAt(next(), e.clone())).collect()
                    }
                    MethodId::List(ListMethod::ListIteratorAtIndex) => {
                        (0..tenth).map(|_| StepArg::Position(next())).collect()
                    }
                    _ => (0..tenth).map(|_| StepArg::Index(next())).collect(),
                };
                vec![Round::new(steps)]
            }
        };
        for round in rounds.iter_mut().skip(1) {
            round.repopulate = spec.destructive();
        }
        Self {
            spec: spec.clone(),
            rounds,
        }
    }

    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn dispatch_count(&self) -> usize {
        self.rounds.iter().map(Round::dispatch_count).sum()
    }

    fn check_adapter(&self, adapter: &Adapter) -> Result<(), WorkloadError> {
        if adapter.interface() != self.spec.interface {
            return Err(WorkloadError::InterfaceMismatch {
                spec: self.spec.interface,
                adapter: adapter.interface(),
            });
        }
        if !adapter.descriptor().supports(self.spec.method) {
            return Err(AdapterError::Unsupported {
                impl_id: adapter.descriptor().id.clone(),
                method: self.spec.method,
            }
            .into());
        }
        Ok(())
    }

    /// Dispatches one round's steps. Re-population is the caller's job.
    pub fn run_round(
        &self,
        round: &Round,
        adapter: &mut Adapter,
        digest: &mut FunctionalDigest,
        cancel: &CancelToken,
    ) -> Result<(), WorkloadError> {
        let method = self.spec.method;
        for _ in 0..round.repeat {
            for step in &round.steps {
                if cancel.is_cancelled() {
                    return Err(WorkloadError::Cancelled);
                }
                let operand = step.resolve(adapter.len());
                let result = adapter.dispatch(method, operand)?;
                digest.fold(&result);
            }
        }
        Ok(())
    }

    /// Runs every round in order, re-populating from `corpus` where required.
    pub fn execute(
        &self,
        adapter: &mut Adapter,
        corpus: &Corpus,
        cancel: &CancelToken,
    ) -> Result<FunctionalDigest, WorkloadError> {
        self.check_adapter(adapter)?;
        let mut digest = FunctionalDigest::IDENTITY;
        for round in &self.rounds {
            if round.repopulate {
                adapter.repopulate(&corpus.population);
            }
            self.run_round(round, adapter, &mut digest, cancel)?;
        }
        Ok(digest)
    }

    pub(crate) fn ensure_runnable(&self, adapter: &Adapter) -> Result<(), WorkloadError> {
        self.check_adapter(adapter)
    }
}

/// Executes `spec` against an adapter already populated with
/// `corpus.population`.
pub fn execute_workload(
    adapter: &mut Adapter,
    spec: &WorkloadSpec,
    corpus: &Corpus,
) -> Result<FunctionalDigest, WorkloadError> {
    WorkloadScript::build(spec, corpus).execute(adapter, corpus, &CancelToken::new())
}
