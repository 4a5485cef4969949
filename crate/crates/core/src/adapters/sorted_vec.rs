/// Set backed by a sorted `Vec`, located by binary search.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SortedVecSet {
    items: Vec<String>,
}

impl SortedVecSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn find(&self, value: &str) -> Result<usize, usize> {
        self.items.binary_search_by(|probe| probe.as_str().cmp(value))
    }

    pub fn insert(&mut self, value: &str) -> bool {
        match self.find(value) {
            Ok(_) => false,
            Err(pos) => {
                self.items.insert(pos, value.to_owned());
                true
            }
        }
    }

    pub fn contains(&self, value: &str) -> bool {
        self.find(value).is_ok()
    }

    pub fn remove(&mut self, value: &str) -> bool {
        match self.find(value) {
            Ok(pos) => {
                self.items.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.items.iter()
    }

    pub fn retain(&mut self, keep: impl FnMut(&String) -> bool) {
        self.items.retain(keep);
    }
}

/// Map backed by a `Vec` of entries sorted by key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SortedVecMap {
    entries: Vec<(String, String)>,
}

impl SortedVecMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn find(&self, key: &str) -> Result<usize, usize> {
        self.entries.binary_search_by(|(k, _)| k.as_str().cmp(key))
    }

    pub fn get(&self, key: &str) -> Option<&String> {
        self.find(key).ok().map(|i| &self.entries[i].1)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.find(key).is_ok()
    }

    /// Inserts or replaces, returning the previous value.
    pub fn insert(&mut self, key: &str, value: &str) -> Option<String> {
        match self.find(key) {
            Ok(i) => Some(std::mem::replace(&mut self.entries[i].1, value.to_owned())),
            Err(i) => {
                self.entries.insert(i, (key.to_owned(), value.to_owned()));
                None
            }
        }
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.find(key).ok().map(|i| self.entries.remove(i).1)
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.entries.iter().map(|(k, v)| (k, v))
    }

    pub(crate) fn entries_slice(&self) -> &[(String, String)] {
        &self.entries
    }
}
