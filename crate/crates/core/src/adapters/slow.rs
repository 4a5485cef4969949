use std::collections::HashSet;
use std::time::Duration;

use super::set::SetAdapter;
use super::{AdapterError, CanonicalContent, Collection, ImplDescriptor, InterfaceKind, MethodId, OpResult, Operand};
use super::RegistryEntry;

/// Pause added before every dispatch of the slow test implementation.
pub const SLOW_DISPATCH_DELAY: Duration = Duration::from_millis(150);

pub const SLOW_SET_ID: &str = "slow-hash-set";

/// Hash set that sleeps before each dispatch. Functionally identical to
/// `hash-set`.
#[derive(Default)]
struct SlowSet {
    inner: SetAdapter<HashSet<String>>,
}

impl Collection for SlowSet {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn clear(&mut self) {
        self.inner.clear();
    }

    fn populate(&mut self, items: &[String]) {
        self.inner.populate(items);
    }

    fn dispatch(&mut self, method: MethodId, operand: Operand<'_>) -> Result<OpResult, AdapterError> {
        std::thread::sleep(SLOW_DISPATCH_DELAY);
        self.inner.dispatch(method, operand)
    }

    fn snapshot(&self) -> CanonicalContent {
        self.inner.snapshot()
    }
}

pub(crate) fn slow_hash_set_entry() -> RegistryEntry {
    RegistryEntry::new(
        ImplDescriptor {
            id: SLOW_SET_ID.to_string(),
            interface: InterfaceKind::Set,
            display_name: "SlowSet (test only)".to_string(),
            notes: format!("hash set sleeping {} ms per dispatch; timeout test fixture", SLOW_DISPATCH_DELAY.as_millis()),
            unsupported: Vec::new(),
        },
        || Box::new(SlowSet::default()),
    )
}
