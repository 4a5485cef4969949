//! Uniform operation surface over concrete Set, List and Map implementations.
//!
//! Every implementation is wrapped in an [`Adapter`] that dispatches roster
//! methods ([`MethodId`]) with borrowed [`Operand`]s and returns a small
//! [`OpResult`] digest, so a workload can drive all implementations of one
//! interface identically and check that they agree.

mod list;
mod map;
mod methods;
mod set;
mod slow;
mod sorted_vec;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, LinkedList, VecDeque};

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use methods::{InterfaceKind, ListMethod, MapMethod, MethodId, SetMethod};
pub use slow::{SLOW_DISPATCH_DELAY, SLOW_SET_ID};
pub use sorted_vec::{SortedVecMap, SortedVecSet};

use list::ListAdapter;
use map::MapAdapter;
use set::SetAdapter;

/// Marker placed in descriptor notes for methods built inside the adapter
/// rather than delegated to a native counterpart.
pub const ADAPTER_SYNTHESIZED: &str = "adapter_synthesized";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdapterError {
    #[error("unknown implementation `{0}`")]
    UnknownImplementation(String),
    #[error("unknown interface `{0}`")]
    UnknownInterface(String),
    #[error("unknown method `{method}` for interface {interface}")]
    UnknownMethod { interface: InterfaceKind, method: String },
    #[error("{impl_id} does not support {method}")]
    Unsupported { impl_id: String, method: MethodId },
    #[error("operands do not fit {method}: {reason}")]
    OperandMismatch { method: MethodId, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImplDescriptor {
    pub id: String,
    pub interface: InterfaceKind,
    pub display_name: String,
    pub notes: String,
    /// Roster methods this implementation cannot perform; their cells are
    /// skipped.
    #[serde(default)]
    pub unsupported: Vec<String>,
}

impl ImplDescriptor {
    pub fn supports(&self, method: MethodId) -> bool {
        method.interface() == self.interface && !self.unsupported.iter().any(|m| m == method.name())
    }
}

/// Operands for one dispatch. Bulk operands are plain slices standing in for
/// the second collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand<'a> {
    None,
    Element(&'a str),
    Elements(&'a [String]),
    Index(usize),
    IndexElement(usize, &'a str),
    IndexElements(usize, &'a [String]),
    Range(usize, usize),
    KeyValue(&'a str, &'a str),
    Entries(&'a [(String, String)]),
}

/// Functional digest of one dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpResult {
    Unit,
    Bool(bool),
    Size(usize),
    /// Hash of the returned element (see [`element_hash`]).
    Element(Option<u64>),
    Index(Option<usize>),
    Checksum(u64),
}

impl OpResult {
    pub fn element(value: &str) -> OpResult {
        OpResult::Element(Some(element_hash(value)))
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a(mut state: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        state ^= *b as u64;
        state = state.wrapping_mul(FNV_PRIME);
    }
    state
}

/// 64-bit FNV-1a hash of an element.
pub fn element_hash(value: &str) -> u64 {
    fnv1a(FNV_OFFSET, value.as_bytes())
}

pub(crate) fn entry_hash(key: &str, value: &str) -> u64 {
    let h = fnv1a(FNV_OFFSET, key.as_bytes());
    fnv1a(fnv1a(h, &[0xff]), value.as_bytes())
}

/// Order-sensitive fold used for sequences.
pub(crate) fn fold_ordered(state: u64, item: u64) -> u64 {
    fnv1a(state, &item.to_le_bytes())
}

/// Value stored under `key` when a map is populated.
pub fn map_value(key: &str) -> String {
    key.chars().rev().collect()
}

/// Cross-implementation canonical form of a collection's content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CanonicalContent {
    /// Sorted elements.
    Set(Vec<String>),
    /// Elements in sequence order.
    List(Vec<String>),
    /// Sorted `(key, value)` pairs.
    Map(Vec<(String, String)>),
}

impl CanonicalContent {
    pub fn len(&self) -> usize {
        match self {
            CanonicalContent::Set(v) | CanonicalContent::List(v) => v.len(),
            CanonicalContent::Map(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Object-safe view of one concrete collection.
pub trait Collection {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn clear(&mut self);
    /// Inserts every item (Map: `item -> map_value(item)`).
    fn populate(&mut self, items: &[String]);
    fn dispatch(&mut self, method: MethodId, operand: Operand<'_>) -> Result<OpResult, AdapterError>;
    fn snapshot(&self) -> CanonicalContent;
}

pub(crate) fn mismatch(method: MethodId, operand: Operand<'_>) -> AdapterError {
    AdapterError::OperandMismatch {
        method,
        reason: format!("unexpected operand {operand:?}"),
    }
}

/// A constructed implementation behind its descriptor.
pub struct Adapter {
    descriptor: ImplDescriptor,
    inner: Box<dyn Collection>,
}

impl std::fmt::Debug for Adapter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Adapter")
            .field("id", &self.descriptor.id)
            .field("len", &self.inner.len())
            .finish()
    }
}

impl Adapter {
    pub fn descriptor(&self) -> &ImplDescriptor {
        &self.descriptor
    }

    pub fn interface(&self) -> InterfaceKind {
        self.descriptor.interface
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.len() == 0
    }

    pub fn populate(&mut self, items: &[String]) {
        self.inner.populate(items);
    }

    /// Clears and re-populates with `items`.
    pub fn repopulate(&mut self, items: &[String]) {
        self.inner.clear();
        self.inner.populate(items);
    }

    pub fn dispatch(&mut self, method: MethodId, operand: Operand<'_>) -> Result<OpResult, AdapterError> {
        if method.interface() != self.descriptor.interface {
            return Err(AdapterError::OperandMismatch {
                method,
                reason: format!("{} is a {} implementation", self.descriptor.id, self.descriptor.interface),
            });
        }
        if !self.descriptor.supports(method) {
            return Err(AdapterError::Unsupported {
                impl_id: self.descriptor.id.clone(),
                method,
            });
        }
        self.inner.dispatch(method, operand)
    }

    pub fn snapshot(&self) -> CanonicalContent {
        self.inner.snapshot()
    }
}

type Factory = fn() -> Box<dyn Collection>;

#[derive(Clone)]
pub struct RegistryEntry {
    pub descriptor: ImplDescriptor,
    factory: Factory,
}

impl RegistryEntry {
    pub fn new(descriptor: ImplDescriptor, factory: fn() -> Box<dyn Collection>) -> Self {
        Self { descriptor, factory }
    }

    pub fn construct(&self) -> Adapter {
        Adapter {
            descriptor: self.descriptor.clone(),
            inner: (self.factory)(),
        }
    }
}

impl std::fmt::Debug for RegistryEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("RegistryEntry").field(&self.descriptor.id).finish()
    }
}

/// Ordered set of constructible implementations.
#[derive(Debug, Clone)]
pub struct Registry {
    entries: Vec<RegistryEntry>,
}

const SET_SYNTH: &str = "adapter_synthesized: retainAll";
const LIST_SYNTH: &str = "adapter_synthesized: removeAll, retainAll, sublist";

fn desc(id: &str, interface: InterfaceKind, display: &str, notes: &str) -> ImplDescriptor {
    ImplDescriptor {
        id: id.to_string(),
        interface,
        display_name: display.to_string(),
        notes: notes.to_string(),
        unsupported: Vec::new(),
    }
}

impl Registry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    /// The compiled-in roster.
    pub fn builtin() -> Self {
        use InterfaceKind::*;
        let mut r = Self::empty();
        r.entries = vec![
            RegistryEntry::new(
                desc("hash-set", Set, "std::collections::HashSet", &format!("hash table; {SET_SYNTH}")),
                || Box::new(SetAdapter::<HashSet<String>>::default()),
            ),
            RegistryEntry::new(
                desc("btree-set", Set, "std::collections::BTreeSet", &format!("ordered B-tree; {SET_SYNTH}")),
                || Box::new(SetAdapter::<BTreeSet<String>>::default()),
            ),
            RegistryEntry::new(
                desc(
                    "index-set",
                    Set,
                    "indexmap::IndexSet",
                    &format!("insertion-ordered hash table, swap-remove on delete; {SET_SYNTH}"),
                ),
                || Box::new(SetAdapter::<IndexSet<String>>::default()),
            ),
            RegistryEntry::new(
                desc(
                    "sorted-vec-set",
                    Set,
                    "SortedVecSet",
                    &format!("in-repo sorted array with binary search; {SET_SYNTH}"),
                ),
                || Box::new(SetAdapter::<SortedVecSet>::default()),
            ),
            RegistryEntry::new(
                desc("vec", List, "std::vec::Vec", &format!("contiguous array; {LIST_SYNTH}")),
                || Box::new(ListAdapter::<Vec<String>>::default()),
            ),
            RegistryEntry::new(
                desc(
                    "vec-deque",
                    List,
                    "std::collections::VecDeque",
                    &format!("ring buffer; {LIST_SYNTH}"),
                ),
                || Box::new(ListAdapter::<VecDeque<String>>::default()),
            ),
            RegistryEntry::new(
                desc(
                    "linked-list",
                    List,
                    "std::collections::LinkedList",
                    "doubly linked list; index operations walk the list; \
                     adapter_synthesized: addAtIndex, addAllAtIndex, removeAtIndex, set, \
                     remove, removeAll, retainAll, sublist",
                ),
                || Box::new(ListAdapter::<LinkedList<String>>::default()),
            ),
            RegistryEntry::new(desc("hash-map", Map, "std::collections::HashMap", "hash table"), || {
                Box::new(MapAdapter::<HashMap<String, String>>::default())
            }),
            RegistryEntry::new(desc("btree-map", Map, "std::collections::BTreeMap", "ordered B-tree"), || {
                Box::new(MapAdapter::<BTreeMap<String, String>>::default())
            }),
            RegistryEntry::new(
                desc(
                    "index-map",
                    Map,
                    "indexmap::IndexMap",
                    "insertion-ordered hash table, swap-remove on delete",
                ),
                || Box::new(MapAdapter::<IndexMap<String, String>>::default()),
            ),
            RegistryEntry::new(
                desc("sorted-vec-map", Map, "SortedVecMap", "in-repo sorted array of entries with binary search"),
                || Box::new(MapAdapter::<SortedVecMap>::default()),
            ),
        ];
        r
    }

    /// Builtin roster plus a deliberately slow Set used to exercise the
    /// runner's timeout path.
    pub fn with_test_impls(mut self) -> Self {
        self.entries.push(slow::slow_hash_set_entry());
        self
    }

    pub fn push(&mut self, entry: RegistryEntry) -> Result<(), AdapterError> {
        if self.get(&entry.descriptor.id).is_some() {
            return Err(AdapterError::UnknownImplementation(format!(
                "duplicate implementation id `{}`",
                entry.descriptor.id
            )));
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn descriptors(&self) -> Vec<ImplDescriptor> {
        self.entries.iter().map(|e| e.descriptor.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&RegistryEntry> {
        self.entries.iter().find(|e| e.descriptor.id == id)
    }

    pub fn for_interface(&self, interface: InterfaceKind) -> impl Iterator<Item = &RegistryEntry> {
        self.entries.iter().filter(move |e| e.descriptor.interface == interface)
    }

    /// Keeps only the listed implementation ids, in registry order.
    pub fn retain_ids(&mut self, ids: &[String]) -> Result<(), AdapterError> {
        if let Some(missing) = ids.iter().find(|id| self.get(id).is_none()) {
            return Err(AdapterError::UnknownImplementation(missing.clone()));
        }
        self.entries.retain(|e| ids.contains(&e.descriptor.id));
        Ok(())
    }

    pub fn construct(&self, descriptor: &ImplDescriptor) -> Result<Adapter, AdapterError> {
        match self.get(&descriptor.id) {
            Some(entry) if entry.descriptor.interface == descriptor.interface => Ok(entry.construct()),
            _ => Err(AdapterError::UnknownImplementation(descriptor.id.clone())),
        }
    }
}

/// Descriptors of the compiled-in roster, in stable order.
pub fn registry() -> Vec<ImplDescriptor> {
    Registry::builtin().descriptors()
}

/// Constructs an empty adapter for a builtin descriptor.
pub fn construct(descriptor: &ImplDescriptor) -> Result<Adapter, AdapterError> {
    Registry::builtin().construct(descriptor)
}
