use std::fmt;

use serde::{Deserialize, Serialize};

use super::AdapterError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterfaceKind {
    Set,
    List,
    Map,
}

impl InterfaceKind {
    pub const ALL: [InterfaceKind; 3] = [InterfaceKind::Set, InterfaceKind::List, InterfaceKind::Map];

    pub fn as_str(self) -> &'static str {
        match self {
            InterfaceKind::Set => "set",
            InterfaceKind::List => "list",
            InterfaceKind::Map => "map",
        }
    }

    pub fn roster(self) -> Vec<MethodId> {
        match self {
            InterfaceKind::Set => SetMethod::ALL.iter().copied().map(MethodId::Set).collect(),
            InterfaceKind::List => ListMethod::ALL.iter().copied().map(MethodId::List).collect(),
            InterfaceKind::Map => MapMethod::ALL.iter().copied().map(MethodId::Map).collect(),
        }
    }
}

impl fmt::Display for InterfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for InterfaceKind {
    type Err = AdapterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "set" => Ok(InterfaceKind::Set),
            "list" => Ok(InterfaceKind::List),
            "map" => Ok(InterfaceKind::Map),
            _ => Err(AdapterError::UnknownInterface(s.to_string())),
        }
    }
}

macro_rules! roster {
    ($name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }

            pub fn parse(token: &str) -> Option<Self> {
                match token {
                    $($token => Some($name::$variant),)+
                    _ => None,
                }
            }
        }
    };
}

roster!(SetMethod {
    Add => "add",
    AddAll => "addAll",
    Clear => "clear",
    Contains => "contains",
    ContainsAll => "containsAll",
    IterateAll => "iterateAll",
    Iterator => "iterator",
    Remove => "remove",
    RemoveAll => "removeAll",
    RetainAll => "retainAll",
    ToArray => "toArray",
});

roster!(ListMethod {
    Add => "add",
    AddAll => "addAll",
    AddAtIndex => "addAtIndex",
    AddAllAtIndex => "addAllAtIndex",
    Clear => "clear",
    Contains => "contains",
    ContainsAll => "containsAll",
    Get => "get",
    IndexOf => "indexOf",
    Iterator => "iterator",
    LastIndexOf => "lastIndexOf",
    ListIterator => "listIterator",
    ListIteratorAtIndex => "listIteratorAtIndex",
    Remove => "remove",
    RemoveAll => "removeAll",
    RemoveAtIndex => "removeAtIndex",
    RetainAll => "retainAll",
    Set => "set",
    Sublist => "sublist",
    ToArray => "toArray",
});

roster!(MapMethod {
    Clear => "clear",
    ContainsKey => "containsKey",
    ContainsValue => "containsValue",
    EntrySet => "entrySet",
    Get => "get",
    IterateAll => "iterateAll",
    KeySet => "keySet",
    Put => "put",
    PutAll => "putAll",
    Remove => "remove",
    Values => "values",
});

/// A roster method qualified by its interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodId {
    Set(SetMethod),
    List(ListMethod),
    Map(MapMethod),
}

impl MethodId {
    pub fn parse(interface: InterfaceKind, token: &str) -> Result<Self, AdapterError> {
        let found = match interface {
            InterfaceKind::Set => SetMethod::parse(token).map(MethodId::Set),
            InterfaceKind::List => ListMethod::parse(token).map(MethodId::List),
            InterfaceKind::Map => MapMethod::parse(token).map(MethodId::Map),
        };
        found.ok_or_else(|| AdapterError::UnknownMethod {
            interface,
            method: token.to_string(),
        })
    }

    pub fn interface(self) -> InterfaceKind {
        match self {
            MethodId::Set(_) => InterfaceKind::Set,
            MethodId::List(_) => InterfaceKind::List,
            MethodId::Map(_) => InterfaceKind::Map,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Set(m) => m.as_str(),
            MethodId::List(m) => m.as_str(),
            MethodId::Map(m) => m.as_str(),
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.interface(), self.name())
    }
}
