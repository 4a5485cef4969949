use std::collections::{HashSet, LinkedList, VecDeque};
use std::hint::black_box;

use super::{
    element_hash, fold_ordered, mismatch, AdapterError, CanonicalContent, Collection, ListMethod, MethodId, OpResult,
    Operand,
};

/// Sequence surface the adapter needs. Index arguments are already
/// bounds-checked by the adapter.
pub trait ListOps: Default {
    type Iter<'a>: DoubleEndedIterator<Item = &'a String> + ExactSizeIterator
    where
        Self: 'a;

    fn len(&self) -> usize;
    fn push(&mut self, value: String);
    fn insert(&mut self, index: usize, value: String);
    fn insert_all(&mut self, index: usize, values: &[String]);
    fn get(&self, index: usize) -> Option<&String>;
    fn replace(&mut self, index: usize, value: String) -> String;
    fn remove_at(&mut self, index: usize) -> String;
    fn clear(&mut self);
    fn iter(&self) -> Self::Iter<'_>;
    /// Iterator positioned before `index` (`index <= len`).
    fn iter_from(&self, index: usize) -> Self::Iter<'_>;
    fn retain(&mut self, keep: impl FnMut(&String) -> bool);

    fn extend_from(&mut self, values: &[String]) {
        for v in values {
            self.push(v.clone());
        }
    }
}

impl ListOps for Vec<String> {
    type Iter<'a> = std::slice::Iter<'a, String>;

    fn len(&self) -> usize {
        Vec::len(self)
    }
    fn push(&mut self, value: String) {
        Vec::push(self, value)
    }
    fn insert(&mut self, index: usize, value: String) {
        Vec::insert(self, index, value)
    }
    fn insert_all(&mut self, index: usize, values: &[String]) {
        self.splice(index..index, values.iter().cloned());
    }
    fn get(&self, index: usize) -> Option<&String> {
        <[String]>::get(self, index)
    }
    fn replace(&mut self, index: usize, value: String) -> String {
        std::mem::replace(&mut self[index], value)
    }
    fn remove_at(&mut self, index: usize) -> String {
        Vec::remove(self, index)
    }
    fn clear(&mut self) {
        Vec::clear(self)
    }
    fn iter(&self) -> Self::Iter<'_> {
        <[String]>::iter(self)
    }
    fn iter_from(&self, index: usize) -> Self::Iter<'_> {
        self[index..].iter()
    }
    fn retain(&mut self, keep: impl FnMut(&String) -> bool) {
        Vec::retain(self, keep)
    }
    fn extend_from(&mut self, values: &[String]) {
        self.extend_from_slice(values)
    }
}

impl ListOps for VecDeque<String> {
    type Iter<'a> = std::collections::vec_deque::Iter<'a, String>;

    fn len(&self) -> usize {
        VecDeque::len(self)
    }
    fn push(&mut self, value: String) {
        self.push_back(value)
    }
    fn insert(&mut self, index: usize, value: String) {
        VecDeque::insert(self, index, value)
    }
    fn insert_all(&mut self, index: usize, values: &[String]) {
        let mut tail = self.split_off(index);
        self.extend(values.iter().cloned());
        self.append(&mut tail);
    }
    fn get(&self, index: usize) -> Option<&String> {
        VecDeque::get(self, index)
    }
    fn replace(&mut self, index: usize, value: String) -> String {
        std::mem::replace(&mut self[index], value)
    }
    fn remove_at(&mut self, index: usize) -> String {
        VecDeque::remove(self, index).expect("index checked by adapter")
    }
    fn clear(&mut self) {
        VecDeque::clear(self)
    }
    fn iter(&self) -> Self::Iter<'_> {
        VecDeque::iter(self)
    }
    fn iter_from(&self, index: usize) -> Self::Iter<'_> {
        self.range(index..)
    }
    fn retain(&mut self, keep: impl FnMut(&String) -> bool) {
        VecDeque::retain(self, keep)
    }
}

impl ListOps for LinkedList<String> {
    type Iter<'a> = std::collections::linked_list::Iter<'a, String>;

    fn len(&self) -> usize {
        LinkedList::len(self)
    }
    fn push(&mut self, value: String) {
        self.push_back(value)
    }
    fn insert(&mut self, index: usize, value: String) {
        let mut tail = self.split_off(index);
        self.push_back(value);
        self.append(&mut tail);
    }
    fn insert_all(&mut self, index: usize, values: &[String]) {
        let mut tail = self.split_off(index);
        self.extend(values.iter().cloned());
        self.append(&mut tail);
    }
    fn get(&self, index: usize) -> Option<&String> {
        LinkedList::iter(self).nth(index)
    }
    fn replace(&mut self, index: usize, value: String) -> String {
        let slot = self.iter_mut().nth(index).expect("index checked by adapter");
        std::mem::replace(slot, value)
    }
    fn remove_at(&mut self, index: usize) -> String {
        let mut tail = self.split_off(index);
        let removed = tail.pop_front().expect("index checked by adapter");
        self.append(&mut tail);
        removed
    }
    fn clear(&mut self) {
        LinkedList::clear(self)
    }
    fn iter(&self) -> Self::Iter<'_> {
        LinkedList::iter(self)
    }
    fn iter_from(&self, index: usize) -> Self::Iter<'_> {
        let mut it = LinkedList::iter(self);
        if index > 0 {
            it.nth(index - 1);
        }
        it
    }
    fn retain(&mut self, mut keep: impl FnMut(&String) -> bool) {
        let old = std::mem::take(self);
        *self = old.into_iter().filter(|e| keep(e)).collect();
    }
}

#[derive(Default)]
pub(crate) struct ListAdapter<L> {
    inner: L,
}

fn check_index(method: MethodId, index: usize, bound: usize) -> Result<usize, AdapterError> {
    if index < bound {
        Ok(index)
    } else {
        Err(AdapterError::OperandMismatch {
            method,
            reason: format!("index {index} out of bounds (limit {bound})"),
        })
    }
}

impl<L: ListOps> Collection for ListAdapter<L> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn clear(&mut self) {
        self.inner.clear();
    }

    fn populate(&mut self, items: &[String]) {
        self.inner.extend_from(items);
    }

    fn dispatch(&mut self, method: MethodId, operand: Operand<'_>) -> Result<OpResult, AdapterError> {
        let MethodId::List(m) = method else {
            return Err(mismatch(method, operand));
        };
        let l = &mut self.inner;
        let len = l.len();
        let result = match (m, operand) {
            (ListMethod::Add, Operand::Element(e)) => {
                l.push(e.to_owned());
                OpResult::Bool(true)
            }
            (ListMethod::AddAll, Operand::Elements(items)) => {
                l.extend_from(items);
                OpResult::Bool(!items.is_empty())
            }
            (ListMethod::AddAtIndex, Operand::IndexElement(i, e)) => {
                l.insert(check_index(method, i, len + 1)?, e.to_owned());
                OpResult::Unit
            }
            (ListMethod::AddAllAtIndex, Operand::IndexElements(i, items)) => {
                l.insert_all(check_index(method, i, len + 1)?, items);
                OpResult::Bool(!items.is_empty())
            }
            (ListMethod::Clear, Operand::None) => {
                l.clear();
                OpResult::Unit
            }
            (ListMethod::Contains, Operand::Element(e)) => OpResult::Bool(l.iter().any(|x| x == e)),
            (ListMethod::ContainsAll, Operand::Elements(items)) => {
                OpResult::Bool(items.iter().all(|e| l.iter().any(|x| x == e)))
            }
            (ListMethod::Get, Operand::Index(i)) => {
                let i = check_index(method, i, len)?;
                OpResult::Element(l.get(i).map(|e| element_hash(e)))
            }
            (ListMethod::IndexOf, Operand::Element(e)) => OpResult::Index(l.iter().position(|x| x == e)),
            (ListMethod::LastIndexOf, Operand::Element(e)) => OpResult::Index(l.iter().rposition(|x| x == e)),
            (ListMethod::Iterator | ListMethod::ListIterator, Operand::None) => {
                let mut it = l.iter();
                OpResult::Bool(black_box(it.next()).is_some())
            }
            (ListMethod::ListIteratorAtIndex, Operand::Index(i)) => {
                let mut it = l.iter_from(check_index(method, i, len + 1)?);
                OpResult::Element(black_box(it.next()).map(|e| element_hash(e)))
            }
            (ListMethod::Remove, Operand::Element(e)) => {
                let found = l.iter().position(|x| x == e);
                if let Some(i) = found {
                    black_box(l.remove_at(i));
                }
                OpResult::Bool(found.is_some())
            }
            (ListMethod::RemoveAll, Operand::Elements(items)) => {
                let drop: HashSet<&str> = items.iter().map(String::as_str).collect();
                l.retain(|e| !drop.contains(e.as_str()));
                OpResult::Bool(l.len() != len)
            }
            (ListMethod::RemoveAtIndex, Operand::Index(i)) => {
                let removed = l.remove_at(check_index(method, i, len)?);
                OpResult::element(&removed)
            }
            (ListMethod::RetainAll, Operand::Elements(items)) => {
                let keep: HashSet<&str> = items.iter().map(String::as_str).collect();
                l.retain(|e| keep.contains(e.as_str()));
                OpResult::Bool(l.len() != len)
            }
            (ListMethod::Set, Operand::IndexElement(i, e)) => {
                let previous = l.replace(check_index(method, i, len)?, e.to_owned());
                OpResult::element(&previous)
            }
            (ListMethod::Sublist, Operand::Range(from, to)) => {
                if from > to || to > len {
                    return Err(AdapterError::OperandMismatch {
                        method,
                        reason: format!("range {from}..{to} invalid for length {len}"),
                    });
                }
                let sum = l
                    .iter_from(from)
                    .take(to - from)
                    .fold(0u64, |acc, e| fold_ordered(acc, element_hash(e)));
                OpResult::Checksum(sum)
            }
            (ListMethod::ToArray, Operand::None) => {
                let array: Vec<&String> = l.iter().collect();
                OpResult::Size(black_box(array).len())
            }
            (_, operand) => return Err(mismatch(method, operand)),
        };
        Ok(result)
    }

    fn snapshot(&self) -> CanonicalContent {
        CanonicalContent::List(self.inner.iter().cloned().collect())
    }
}
