use greencoll::adapters::{InterfaceKind, MapMethod, MethodId, Registry, SetMethod};
use greencoll::advisor::{recommend, UsageProfile, UsageSite};
use greencoll::meter::{open_meter, MeterConfig};
use greencoll::profile::{rank_row, ProfileTable};
use greencoll::runner::{run_suite, RunConfig};
use greencoll::workloads::{all_workloads, execute_workload, Corpus};

#[test]
fn functional_equivalence_over_sizes_and_seeds() {
    let registry = Registry::builtin();
    for (popsize, seed) in [(10, 1), (11, 2), (37, 3), (300, 0xC0FFEE)] {
        let corpus = Corpus::generate(popsize, seed).unwrap();
        for spec in all_workloads() {
            let mut outcomes = registry.for_interface(spec.interface).map(|entry| {
                let mut a = entry.construct();
                a.populate(&corpus.population);
                let digest = execute_workload(&mut a, &spec, &corpus).unwrap();
                (entry.descriptor.id.clone(), digest, a.snapshot())
            });
            let (first_id, digest, snapshot) = outcomes.next().unwrap();
            for (id, d, s) in outcomes {
                assert_eq!((d, &s), (digest, &snapshot), "{id} vs {first_id}: {} at {popsize}", spec.method);
            }
        }
    }
}

#[test]
fn suite_to_advice() {
    let mut meter = open_meter(&MeterConfig::mock(25.0)).unwrap();
    let config = RunConfig {
        popsizes: vec![60, 200],
        repetitions: 5,
        trim_fraction: 0.2,
        interfaces: vec![InterfaceKind::Set, InterfaceKind::Map],
        ..RunConfig::default()
    };
    let table = run_suite(&mut meter, &Registry::builtin(), &config, |_| {}).unwrap();
    assert_eq!(table.len(), 2 * (4 * 11 + 4 * 11));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("suite.profile");
    table.save(&path).unwrap();
    let table = ProfileTable::load(&path).unwrap();

    for r in table.records() {
        let ratio = r.energy_joules.unwrap() / r.time_millis.unwrap() * 1000.0;
        assert!((ratio / 25.0 - 1.0).abs() < 1e-9, "{ratio}");
        let row = rank_row(&table, r.interface(), r.popsize, r.method).unwrap();
        assert_eq!(row.entries.len(), 4);
    }

    let sites = vec![
        UsageSite {
            site_id: "a".into(),
            interface: InterfaceKind::Map,
            current_impl: "btree-map".into(),
            methods: vec![MethodId::Map(MapMethod::Get), MethodId::Map(MapMethod::Put)],
            counts: None,
            workload_size: 150,
        },
        UsageSite {
            site_id: "b".into(),
            interface: InterfaceKind::Set,
            current_impl: "hash-set".into(),
            methods: vec![MethodId::Set(SetMethod::Contains), MethodId::Set(SetMethod::Iterator)],
            counts: None,
            workload_size: 1,
        },
    ];
    let profile = UsageProfile { sites };
    for (site, rec) in profile.sites.iter().zip(recommend(&profile, &table)) {
        let rec = rec.unwrap();
        let popsize = if site.workload_size > 130 { 200 } else { 60 };
        assert_eq!(rec.popsize_used, popsize);
        let best = table
            .impls(site.interface, popsize)
            .into_iter()
            .map(|id| {
                let e: f64 = site
                    .methods
                    .iter()
                    .map(|&m| table.get(site.interface, popsize, m, &id).unwrap().energy_joules.unwrap())
                    .sum();
                (e, id)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        assert_eq!(rec.chosen_impl, best.1);
        assert!(rec.estimated_improvement.unwrap() >= 0.0);
    }
}
