use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap;

use super::{
    element_hash, entry_hash, map_value, mismatch, AdapterError, CanonicalContent, Collection, MapMethod, MethodId,
    OpResult, Operand, SortedVecMap,
};

pub trait MapOps: Default {
    type Iter<'a>: Iterator<Item = (&'a String, &'a String)>
    where
        Self: 'a;

    fn len(&self) -> usize;
    fn get(&self, key: &str) -> Option<&String>;
    fn contains_key(&self, key: &str) -> bool;
    /// Inserts or replaces, returning the previous value.
    fn put(&mut self, key: &str, value: &str) -> Option<String>;
    fn remove(&mut self, key: &str) -> Option<String>;
    fn clear(&mut self);
    fn iter(&self) -> Self::Iter<'_>;
}

macro_rules! std_like_map {
    ($ty:ty, $iter:ty, $remove:ident) => {
        impl MapOps for $ty {
            type Iter<'a> = $iter;

            fn len(&self) -> usize {
                <$ty>::len(self)
            }
            fn get(&self, key: &str) -> Option<&String> {
                <$ty>::get(self, key)
            }
            fn contains_key(&self, key: &str) -> bool {
                <$ty>::contains_key(self, key)
            }
            fn put(&mut self, key: &str, value: &str) -> Option<String> {
                match <$ty>::get_mut(self, key) {
                    Some(slot) => Some(std::mem::replace(slot, value.to_owned())),
                    None => {
                        <$ty>::insert(self, key.to_owned(), value.to_owned());
                        None
                    }
                }
            }
            fn remove(&mut self, key: &str) -> Option<String> {
                <$ty>::$remove(self, key)
            }
            fn clear(&mut self) {
                <$ty>::clear(self)
            }
            fn iter(&self) -> Self::Iter<'_> {
                <$ty>::iter(self)
            }
        }
    };
}

std_like_map!(HashMap<String, String>, std::collections::hash_map::Iter<'a, String, String>, remove);
std_like_map!(BTreeMap<String, String>, std::collections::btree_map::Iter<'a, String, String>, remove);
std_like_map!(IndexMap<String, String>, indexmap::map::Iter<'a, String, String>, swap_remove);

type PairRef<'a> = fn(&'a (String, String)) -> (&'a String, &'a String);

fn pair_ref(entry: &(String, String)) -> (&String, &String) {
    (&entry.0, &entry.1)
}

impl MapOps for SortedVecMap {
    type Iter<'a> = std::iter::Map<std::slice::Iter<'a, (String, String)>, PairRef<'a>>;

    fn len(&self) -> usize {
        SortedVecMap::len(self)
    }
    fn get(&self, key: &str) -> Option<&String> {
        SortedVecMap::get(self, key)
    }
    fn contains_key(&self, key: &str) -> bool {
        SortedVecMap::contains_key(self, key)
    }
    fn put(&mut self, key: &str, value: &str) -> Option<String> {
        self.insert(key, value)
    }
    fn remove(&mut self, key: &str) -> Option<String> {
        SortedVecMap::remove(self, key)
    }
    fn clear(&mut self) {
        SortedVecMap::clear(self)
    }
    fn iter(&self) -> Self::Iter<'_> {
        self.entries_slice().iter().map(pair_ref as PairRef<'_>)
    }
}

#[derive(Default)]
pub(crate) struct MapAdapter<M> {
    inner: M,
}

impl<M: MapOps> Collection for MapAdapter<M> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn clear(&mut self) {
        self.inner.clear();
    }

    fn populate(&mut self, items: &[String]) {
        for key in items {
            self.inner.put(key, &map_value(key));
        }
    }

    fn dispatch(&mut self, method: MethodId, operand: Operand<'_>) -> Result<OpResult, AdapterError> {
        let MethodId::Map(m) = method else {
            return Err(mismatch(method, operand));
        };
        let map = &mut self.inner;
        let result = match (m, operand) {
            (MapMethod::Clear, Operand::None) => {
                map.clear();
                OpResult::Unit
            }
            (MapMethod::ContainsKey, Operand::Element(k)) => OpResult::Bool(map.contains_key(k)),
            (MapMethod::ContainsValue, Operand::Element(v)) => OpResult::Bool(map.iter().any(|(_, x)| x == v)),
            (MapMethod::EntrySet, Operand::None) => {
                OpResult::Checksum(map.iter().fold(0u64, |acc, (k, v)| acc.wrapping_add(entry_hash(k, v))))
            }
            (MapMethod::Get, Operand::Element(k)) => OpResult::Element(map.get(k).map(|v| element_hash(v))),
            (MapMethod::IterateAll, Operand::None) => {
                let m: &M = map;
                let sum = m.iter().fold(0u64, |acc, (k, _)| {
                    let v = m.get(k).expect("key taken from the map");
                    acc.wrapping_add(entry_hash(k, v))
                });
                OpResult::Checksum(sum)
            }
            (MapMethod::KeySet, Operand::None) => {
                OpResult::Checksum(map.iter().fold(0u64, |acc, (k, _)| acc.wrapping_add(element_hash(k))))
            }
            (MapMethod::Put, Operand::KeyValue(k, v)) => OpResult::Element(map.put(k, v).map(|p| element_hash(&p))),
            (MapMethod::PutAll, Operand::Entries(entries)) => {
                for (k, v) in entries {
                    map.put(k, v);
                }
                OpResult::Size(map.len())
            }
            (MapMethod::Remove, Operand::Element(k)) => OpResult::Element(map.remove(k).map(|p| element_hash(&p))),
            (MapMethod::Values, Operand::None) => {
                OpResult::Checksum(map.iter().fold(0u64, |acc, (_, v)| acc.wrapping_add(element_hash(v))))
            }
            (_, operand) => return Err(mismatch(method, operand)),
        };
        Ok(result)
    }

    fn snapshot(&self) -> CanonicalContent {
        let mut v: Vec<(String, String)> = self.inner.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        v.sort();
        CanonicalContent::Map(v)
    }
}
