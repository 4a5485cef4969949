#![allow(dead_code)]

use std::process::Command;

use greencoll::adapters::{ListMethod, MapMethod, MethodId};
use greencoll::meter::METER_ENV;
use greencoll::profile::{Metadata, ProfileTable};
use greencoll::runner::{CellStatus, MeasurementRecord, Trial};

pub fn greencoll() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_greencoll"));
    c.env_remove(METER_ENV).env_remove("RUST_LOG");
    c
}

pub fn ok_cell(impl_id: &str, method: MethodId, popsize: usize, joules: f64, millis: f64) -> MeasurementRecord {
    MeasurementRecord {
        impl_id: impl_id.to_string(),
        method,
        popsize,
        trials: vec![Trial { joules, millis }],
        energy_joules: Some(joules),
        time_millis: Some(millis),
        status: CellStatus::Ok,
    }
}

pub const MAP_SITE_METHODS: [MapMethod; 4] = [MapMethod::ContainsKey, MapMethod::Get, MapMethod::Put, MapMethod::Values];
pub const LIST_SITE_METHODS: [ListMethod; 2] = [ListMethod::Add, ListMethod::ListIterator];

/// Hand-built table: at 25000 the hash table sums least over the Map site
/// methods (6.8 J) and the array list over the List site methods (2.4 J),
/// though neither wins every single method. At 250000 the winners differ.
pub fn fixture_table() -> ProfileTable {
    let mut t = ProfileTable::new(Metadata {
        host: "fixture".into(),
        meter_backend: "mock".into(),
        timestamp: None,
        seed: 0,
        config: serde_json::Value::Null,
    });
    let maps: [(&str, [f64; 4], f64); 4] = [
        ("hash-map", [1.2, 1.5, 2.3, 1.8], 0.4),
        ("btree-map", [1.9, 2.0, 2.6, 1.1], 0.3),
        ("index-map", [1.3, 1.6, 2.4, 1.7], 0.2),
        ("sorted-vec-map", [2.4, 2.2, 3.9, 0.9], 0.1),
    ];
    for (id, energies, clear) in maps {
        for (m, e) in MAP_SITE_METHODS.iter().zip(energies) {
            t.insert(ok_cell(id, MethodId::Map(*m), 25_000, e, e * 40.0)).unwrap();
        }
        t.insert(ok_cell(id, MethodId::Map(MapMethod::Clear), 25_000, clear, 1.0)).unwrap();
        let big = if id == "btree-map" { 3.0 } else { 9.0 };
        for m in MAP_SITE_METHODS {
            t.insert(ok_cell(id, MethodId::Map(m), 250_000, big, 10.0)).unwrap();
        }
    }
    let lists: [(&str, [f64; 2]); 3] = [
        ("vec", [1.1, 1.3]),
        ("vec-deque", [1.2, 1.4]),
        ("linked-list", [1.9, 0.8]),
    ];
    for (id, energies) in lists {
        for (m, e) in LIST_SITE_METHODS.iter().zip(energies) {
            t.insert(ok_cell(id, MethodId::List(*m), 25_000, e, e * 40.0)).unwrap();
        }
    }
    t
}

pub const PROJECT_USAGE: &str = r#"{
  "schema_version": 1,
  "sites": [
    {
      "site_id": "project1.catalog",
      "interface": "map",
      "current_impl": "btree-map",
      "methods": ["containsKey", "get", "put", "values"],
      "workload_size": 10000
    },
    {
      "site_id": "project1.history",
      "interface": "list",
      "current_impl": "linked-list",
      "methods": ["add", "listIterator"],
      "workload_size": 2000
    }
  ]
}
"#;
