use std::collections::{BTreeSet, HashSet};
use std::hint::black_box;

use indexmap::IndexSet;

use super::{
    element_hash, mismatch, AdapterError, CanonicalContent, Collection, MethodId, OpResult, Operand, SetMethod,
    SortedVecSet,
};

/// Minimal set surface the adapter needs from a concrete implementation.
pub trait SetOps: Default {
    type Iter<'a>: Iterator<Item = &'a String>
    where
        Self: 'a;

    fn len(&self) -> usize;
    fn insert(&mut self, value: &str) -> bool;
    fn contains(&self, value: &str) -> bool;
    fn remove(&mut self, value: &str) -> bool;
    fn clear(&mut self);
    fn iter(&self) -> Self::Iter<'_>;
    fn retain(&mut self, keep: impl FnMut(&String) -> bool);
}

impl SetOps for HashSet<String> {
    type Iter<'a> = std::collections::hash_set::Iter<'a, String>;

    fn len(&self) -> usize {
        HashSet::len(self)
    }
    fn insert(&mut self, value: &str) -> bool {
        !HashSet::contains(self, value) && HashSet::insert(self, value.to_owned())
    }
    fn contains(&self, value: &str) -> bool {
        HashSet::contains(self, value)
    }
    fn remove(&mut self, value: &str) -> bool {
        HashSet::remove(self, value)
    }
    fn clear(&mut self) {
        HashSet::clear(self)
    }
    fn iter(&self) -> Self::Iter<'_> {
        HashSet::iter(self)
    }
    fn retain(&mut self, keep: impl FnMut(&String) -> bool) {
        HashSet::retain(self, keep)
    }
}

impl SetOps for BTreeSet<String> {
    type Iter<'a> = std::collections::btree_set::Iter<'a, String>;

    fn len(&self) -> usize {
        BTreeSet::len(self)
    }
    fn insert(&mut self, value: &str) -> bool {
        !BTreeSet::contains(self, value) && BTreeSet::insert(self, value.to_owned())
    }
    fn contains(&self, value: &str) -> bool {
        BTreeSet::contains(self, value)
    }
    fn remove(&mut self, value: &str) -> bool {
        BTreeSet::remove(self, value)
    }
    fn clear(&mut self) {
        BTreeSet::clear(self)
    }
    fn iter(&self) -> Self::Iter<'_> {
        BTreeSet::iter(self)
    }
    fn retain(&mut self, keep: impl FnMut(&String) -> bool) {
        BTreeSet::retain(self, keep)
    }
}

impl SetOps for IndexSet<String> {
    type Iter<'a> = indexmap::set::Iter<'a, String>;

    fn len(&self) -> usize {
        IndexSet::len(self)
    }
    fn insert(&mut self, value: &str) -> bool {
        !IndexSet::contains(self, value) && IndexSet::insert(self, value.to_owned())
    }
    fn contains(&self, value: &str) -> bool {
        IndexSet::contains(self, value)
    }
    fn remove(&mut self, value: &str) -> bool {
        IndexSet::swap_remove(self, value)
    }
    fn clear(&mut self) {
        IndexSet::clear(self)
    }
    fn iter(&self) -> Self::Iter<'_> {
        IndexSet::iter(self)
    }
    fn retain(&mut self, keep: impl FnMut(&String) -> bool) {
        IndexSet::retain(self, keep)
    }
}

impl SetOps for SortedVecSet {
    type Iter<'a> = std::slice::Iter<'a, String>;

    fn len(&self) -> usize {
        SortedVecSet::len(self)
    }
    fn insert(&mut self, value: &str) -> bool {
        SortedVecSet::insert(self, value)
    }
    fn contains(&self, value: &str) -> bool {
        SortedVecSet::contains(self, value)
    }
    fn remove(&mut self, value: &str) -> bool {
        SortedVecSet::remove(self, value)
    }
    fn clear(&mut self) {
        SortedVecSet::clear(self)
    }
    fn iter(&self) -> Self::Iter<'_> {
        SortedVecSet::iter(self)
    }
    fn retain(&mut self, keep: impl FnMut(&String) -> bool) {
        SortedVecSet::retain(self, keep)
    }
}

#[derive(Default)]
pub(crate) struct SetAdapter<S> {
    inner: S,
}

impl<S: SetOps> Collection for SetAdapter<S> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn clear(&mut self) {
        self.inner.clear();
    }

    fn populate(&mut self, items: &[String]) {
        for item in items {
            self.inner.insert(item);
        }
    }

    fn dispatch(&mut self, method: MethodId, operand: Operand<'_>) -> Result<OpResult, AdapterError> {
        let MethodId::Set(m) = method else {
            return Err(mismatch(method, operand));
        };
        let s = &mut self.inner;
        let result = match (m, operand) {
            (SetMethod::Add, Operand::Element(e)) => OpResult::Bool(s.insert(e)),
            (SetMethod::AddAll, Operand::Elements(items)) => {
                let mut changed = false;
                for e in items {
                    changed |= s.insert(e);
                }
                OpResult::Bool(changed)
            }
            (SetMethod::Clear, Operand::None) => {
                s.clear();
                OpResult::Unit
            }
            (SetMethod::Contains, Operand::Element(e)) => OpResult::Bool(s.contains(e)),
            (SetMethod::ContainsAll, Operand::Elements(items)) => {
                OpResult::Bool(items.iter().all(|e| s.contains(e)))
            }
            (SetMethod::IterateAll, Operand::None) => {
                let sum = s.iter().fold(0u64, |acc, e| acc.wrapping_add(element_hash(e)));
                OpResult::Checksum(sum)
            }
            (SetMethod::Iterator, Operand::None) => {
                let mut it = s.iter();
                OpResult::Bool(black_box(it.next()).is_some())
            }
            (SetMethod::Remove, Operand::Element(e)) => OpResult::Bool(s.remove(e)),
            (SetMethod::RemoveAll, Operand::Elements(items)) => {
                let mut changed = false;
                for e in items {
                    changed |= s.remove(e);
                }
                OpResult::Bool(changed)
            }
            (SetMethod::RetainAll, Operand::Elements(items)) => {
                let keep: HashSet<&str> = items.iter().map(String::as_str).collect();
                let before = s.len();
                s.retain(|e| keep.contains(e.as_str()));
                OpResult::Bool(s.len() != before)
            }
            (SetMethod::ToArray, Operand::None) => {
                let array: Vec<&String> = s.iter().collect();
                OpResult::Size(black_box(array).len())
            }
            (_, operand) => return Err(mismatch(method, operand)),
        };
        Ok(result)
    }

    fn snapshot(&self) -> CanonicalContent {
        let mut v: Vec<String> = self.inner.iter().cloned().collect();
        v.sort();
        CanonicalContent::Set(v)
    }
}
