mod common;

use std::path::Path;
use std::process::Output;

use greencoll::adapters::{ListMethod, MethodId};
use greencoll::meter::METER_ENV;
use greencoll::profile::{parse_record_line, ProfileTable, CSV_HEADER};
use greencoll::runner::CellStatus;

use common::{fixture_table, greencoll, PROJECT_USAGE};

fn run(args: &[&str]) -> Output {
    greencoll().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_bench(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("small.profile");
    let o = run(&[
        "bench", "--meter", "mock", "--popsize", "100", "--popsize", "40", "--reps", "3", "--trim", "0",
        "--impls", "hash-set,btree-set,vec,hash-map", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn bench_writes_table_and_record_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_bench(dir.path());
    let table = ProfileTable::load(&out).unwrap();
    assert_eq!(table.len(), 2 * (2 * 11 + 20 + 11));
    assert_eq!(table.popsizes(None), [40, 100]);
    assert_eq!(table.metadata.meter_backend, "mock");
    assert!(table.records().all(|r| r.status == CellStatus::Ok && r.trials.len() == 3));

    let log = std::fs::read_to_string(dir.path().join("small.profile.jsonl")).unwrap();
    let logged: Vec<_> = log.lines().map(|l| parse_record_line(l).unwrap()).collect();
    assert_eq!(logged.len(), table.len());
    for r in &logged {
        let cell = table.get(r.interface(), r.popsize, r.method, &r.impl_id).unwrap();
        assert_eq!(cell, r);
    }
}

#[test]
fn bench_rapl_without_counters_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.profile");
    let o = run(&[
        "bench", "--meter", "rapl", "--powercap-root", dir.path().join("none").to_str().unwrap(), "--popsize",
        "100", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unavailable"), "{}", stderr(&o));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn environment_overrides_meter_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.profile");
    let o = greencoll()
        .env(METER_ENV, "mock")
        .args([
            "bench", "--meter", "rapl", "--popsize", "50", "--reps", "1", "--trim", "0", "--impls", "vec",
            "--interfaces", "list", "--out", out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(ProfileTable::load(&out).unwrap().metadata.meter_backend, "mock");
}

#[test]
fn report_formats() {
    let dir = tempfile::tempdir().unwrap();
    let table_path = small_bench(dir.path());
    let table = ProfileTable::load(&table_path).unwrap();
    let t = table_path.to_str().unwrap();

    let html_path = dir.path().join("r.html");
    let o = run(&["report", "--table", t, "--format", "html", "--out", html_path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let html = std::fs::read_to_string(&html_path).unwrap();
    assert!(html.starts_with("<!DOCTYPE html>"));
    assert!(!html.contains("src=") && !html.contains("<link") && !html.contains("http"));
    assert_eq!(html.matches("<table class=\"grid\"").count(), 6);

    let csv = stdout(&run(&["report", "--table", t, "--format", "csv"]));
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
    assert_eq!(reader.records().count(), table.len());

    let trimmed = stdout(&run(&["report", "--table", t, "--format", "csv", "--exclude-method", "removeAll"]));
    let removed = csv.lines().filter(|l| l.contains(",removeAll,")).count();
    assert_eq!(removed, 2 * 3);
    assert_eq!(trimmed.lines().count(), csv.lines().count() - removed);
    assert!(!trimmed.contains(",removeAll,"));

    let a = stdout(&run(&["report", "--table", t, "--format", "html", "--no-timestamp"]));
    assert!(!a.contains("timestamp"));
    assert_eq!(a, stdout(&run(&["report", "--table", t, "--format", "html", "--no-timestamp"])));

    let tty = stdout(&run(&["report", "--table", t]));
    assert!(tty.contains("Set results, population 40"));
}

#[test]
fn report_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.profile");
    std::fs::write(&bad, "{\"schema_version\": 1, \"cells\": [").unwrap();
    let o = run(&["report", "--table", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("malformed"));
    let o = run(&["report", "--table", bad.to_str().unwrap(), "--exclude-method", "frobnicate"]);
    assert_eq!(code(&o), 1);
}

fn write_fixture(dir: &Path) -> (String, String) {
    let table = dir.join("fixture.profile");
    fixture_table().save(&table).unwrap();
    let usage = dir.join("usage.json");
    std::fs::write(&usage, PROJECT_USAGE).unwrap();
    (table.to_str().unwrap().into(), usage.to_str().unwrap().into())
}

#[test]
fn advise_project_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (table, usage) = write_fixture(dir.path());
    let out = dir.path().join("rec.json");
    let o = run(&["advise", "--table", &table, "--usage", &usage, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("btree-map -> hash-map"), "{text}");
    assert!(text.contains("linked-list -> vec"), "{text}");
    assert!(text.contains("10.53%"), "{text}");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(doc["recommendations"].as_array().unwrap().len(), 2);
    assert_eq!(doc["recommendations"][0]["chosen_impl"], "hash-map");
}

#[test]
fn advise_partial_and_weighted_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let (table, _) = write_fixture(dir.path());
    let usage = dir.path().join("set.json");
    std::fs::write(
        &usage,
        r#"{"schema_version": 1, "sites": [
            {"site_id": "s", "interface": "set", "current_impl": "hash-set", "methods": ["add"], "workload_size": 10}
        ]}"#,
    )
    .unwrap();
    let o = run(&["advise", "--table", &table, "--usage", usage.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("s: the table has no cells for set"), "{}", stdout(&o));

    let (table, usage) = write_fixture(dir.path());
    let o = run(&["advise", "--table", &table, "--usage", &usage, "--weighted"]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("uniform weights"), "{}", stderr(&o));
}

#[test]
fn measure_mock_sleep() {
    let o = run(&["measure", "--meter", "mock", "--reps", "10", "--baseline", "1.5", "--", "sleep", "0.1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let joules: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("energy_j: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.95..1.5).contains(&joules), "{joules}");
    assert!(text.lines().any(|l| l.starts_with("improvement: ") && l.ends_with('%')), "{text}");
}

#[test]
fn measure_failing_child() {
    let o = run(&["measure", "--meter", "mock", "--reps", "3", "--trim", "0", "--", "false"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("failed twice"));
    let o = run(&["measure", "--meter", "mock", "--reps", "2", "--trim", "0", "--timeout", "0.2", "--", "sleep", "5"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("timed out"));
}

#[test]
fn registry_and_workloads() {
    let o = run(&["registry", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let entries = v.as_array().unwrap();
    assert_eq!(entries.len(), 11);
    for i in ["set", "list", "map"] {
        assert!(entries.iter().filter(|e| e["interface"] == i).count() >= 3);
    }
    let o = run(&["workloads"]);
    assert_eq!(stdout(&o).lines().count(), 42);
    let described = stdout(&run(&["workloads", "--describe", "--interface", "set"]));
    assert!(described.contains("set.retainAll"));
    assert!(!described.contains("map."));
}

#[test]
fn help_enumerates_flags() {
    let cases: [(&str, &[&str]); 4] = [
        ("bench", &["--popsize", "--reps", "--trim", "--timeout", "--seed", "--interfaces", "--impls", "--out", "--meter"]),
        ("report", &["--table", "--format", "--exclude-method", "--no-timestamp", "--out"]),
        ("advise", &["--table", "--usage", "--weighted"]),
        ("measure", &["--reps", "--trim", "--baseline", "--timeout", "--meter"]),
    ];
    for (cmd, flags) in cases {
        let o = run(&[cmd, "--help"]);
        assert_eq!(code(&o), 0);
        let help = stdout(&o);
        for f in flags {
            assert!(help.contains(f), "{cmd} help lacks {f}");
        }
    }
    let top = stdout(&run(&["--help"]));
    for cmd in ["bench", "report", "advise", "measure", "registry", "workloads"] {
        assert!(top.contains(cmd));
    }
}

#[test]
fn invalid_flags_exit_fatal() {
    assert_eq!(code(&run(&["bench", "--meter", "mock", "--trim", "0.7", "--out", "/nonexistent/x"])), 1);
    assert_eq!(code(&run(&["bench", "--frobnicate"])), 1);
    assert_eq!(code(&run(&["measure", "--meter", "mock"])), 1);
}

#[test]
fn report_marks_unsupported_cells() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = fixture_table();
    table
        .insert(greencoll::runner::MeasurementRecord::skipped(
            "vec",
            MethodId::List(ListMethod::Sublist),
            25_000,
            CellStatus::SkippedUnsupported,
        ))
        .unwrap();
    let path = dir.path().join("t.profile");
    table.save(&path).unwrap();
    let html = stdout(&run(&["report", "--table", path.to_str().unwrap(), "--format", "html"]));
    assert!(html.contains(">—(unsupported)<"));
}
