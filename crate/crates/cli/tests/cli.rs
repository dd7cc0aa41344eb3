use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn segia(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segia"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path.as_ref()).unwrap()).unwrap()
}

/// Every file under `dir` except timing sidecars, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else if path.file_name().unwrap() != "timing.csv" {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

const QUICK: &str = r#"{"attack": {"iterations": 30}, "theorem1": {"n_seeds": 2}}"#;

fn quick_config(dir: &Path) -> PathBuf {
    let path = dir.join("quick.json");
    fs::write(&path, QUICK).unwrap();
    path
}

#[test]
fn reruns_are_byte_identical() {
    let cases: &[&[&str]] = &[
        &["train", "--config", "quick.json", "--out", "run"],
        &["attack", "--config", "quick.json", "--out", "run", "--n-seeds", "2", "--jobs", "2", "--save-graphs"],
        &["theorem1", "--config", "quick.json", "--out", "run"],
        &["gen-synthetic", "--config", "quick.json", "--out", "run", "--seed", "5"],
    ];
    for args in cases {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [a.path(), b.path()] {
            quick_config(d);
            ok(&segia(d, args));
        }
        let (sa, sb) = (snapshot(&a.path().join("run")), snapshot(&b.path().join("run")));
        assert!(!sa.is_empty());
        assert_eq!(sa, sb, "{args:?}");
    }
}

#[test]
fn attack_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    quick_config(dir.path());
    ok(&segia(dir.path(), &["attack", "--config", "quick.json", "--out", "a"]));
    let report = json(dir.path().join("a/report_000.json"));
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["config"]["attack"]["iterations"], 30);
    assert_eq!(report["edge_budget"], report["node_budget"]);
    for key in ["clean_rate", "attacked_rate", "defended_rate", "surviving_injected_rate", "homophily_w1"] {
        assert!(report["metrics"][key].is_number(), "{key}");
    }
    let plan = json(dir.path().join("a/plan_000.json"));
    assert_eq!(plan["anchor_map"].as_array().unwrap().len(), report["node_budget"].as_u64().unwrap() as usize);

    ok(&segia(dir.path(), &["evaluate", "--config", "quick.json", "--out", "e"]));
    let eval = json(dir.path().join("e/evaluate.json"));
    assert_eq!(eval["clean_rate"], report["metrics"]["clean_rate"]);

    ok(&segia(dir.path(), &["defend", "--config", "quick.json", "--out", "d", "--plan", "a/plan_000.json"]));
    let defense = json(dir.path().join("d/defense.json"));
    assert!(defense["report"]["injected_edges"].as_u64().unwrap() > 0);
    assert!(dir.path().join("d/defended/edges.csv").exists());
}

#[test]
fn ten_seed_batch_writes_distinct_plans_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    quick_config(dir.path());
    ok(&segia(dir.path(), &["attack", "--config", "quick.json", "--out", "b", "--n-seeds", "10", "--jobs", "4"]));
    let plans: Vec<Vec<u8>> = (0..10)
        .map(|i| fs::read(dir.path().join(format!("b/plan_{i:03}.json"))).unwrap())
        .collect();
    for i in 0..10 {
        for j in i + 1..10 {
            assert_ne!(plans[i], plans[j], "plans {i} and {j}");
        }
    }
    let summary = json(dir.path().join("b/summary.json"));
    assert_eq!(summary["succeeded"], 10);
    assert_eq!(summary["reports"].as_array().unwrap().len(), 10);
}

#[test]
fn baselines_respect_their_edge_budgets() {
    let dir = tempfile::tempdir().unwrap();
    quick_config(dir.path());
    ok(&segia(dir.path(), &["attack", "--config", "quick.json", "--out", "m", "--method", "multiedge"]));
    let report = json(dir.path().join("m/report_000.json"));
    let (nodes, edges) = (report["node_budget"].as_u64().unwrap(), report["edge_budget"].as_u64().unwrap());
    assert!(edges <= 3 * nodes && edges > nodes);
    ok(&segia(dir.path(), &["attack", "--config", "quick.json", "--out", "r", "--method", "random"]));
    let report = json(dir.path().join("r/report_000.json"));
    assert_eq!(report["edge_budget"], report["node_budget"]);
}

#[test]
fn training_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("two.json"),
        r#"{"graph": {"source": {"synthetic": {"n": 200, "c": 2, "class_sep": 3.0}}}}"#,
    )
    .unwrap();
    ok(&segia(dir.path(), &["train", "--config", "two.json", "--out", "t"]));
    let log = json(dir.path().join("t/surrogate_train.json"));
    assert!(log["final_loss"].as_f64().unwrap() < 2f64.ln());
    assert!(dir.path().join("t/surrogate.json").exists());

    fs::write(dir.path().join("zero.json"), r#"{"surrogate": {"train": {"epochs": 0}}}"#).unwrap();
    ok(&segia(dir.path(), &["train", "--config", "zero.json", "--out", "z"]));
    let ck = json(dir.path().join("z/surrogate.json"));
    assert!(ck["weights"][0].as_array().unwrap().iter().all(|w| w.as_f64() == Some(0.0)));

    ok(&segia(dir.path(), &["train", "--config", "zero.json", "--out", "v", "--role", "victim"]));
    assert_eq!(json(dir.path().join("v/victim.json"))["variant"], "gcn2");
}

#[test]
fn checkpoints_are_reused_by_later_commands() {
    let dir = tempfile::tempdir().unwrap();
    quick_config(dir.path());
    ok(&segia(dir.path(), &["train", "--config", "quick.json", "--out", "t"]));
    fs::write(
        dir.path().join("reuse.json"),
        r#"{"attack": {"iterations": 30}, "surrogate": {"checkpoint": "t/surrogate.json"}}"#,
    )
    .unwrap();
    ok(&segia(dir.path(), &["attack", "--config", "reuse.json", "--out", "a1"]));
    ok(&segia(dir.path(), &["attack", "--config", "quick.json", "--out", "a2"]));
    assert_eq!(
        fs::read(dir.path().join("a1/plan_000.json")).unwrap().len() > 0,
        fs::read(dir.path().join("a2/plan_000.json")).unwrap().len() > 0
    );
    let (r1, r2) = (json(dir.path().join("a1/report_000.json")), json(dir.path().join("a2/report_000.json")));
    assert_eq!(r1["metrics"], r2["metrics"]);
}

#[test]
fn sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("sweep.json"),
        r#"{"attack": {"iterations": 20},
            "sweep": {"alpha": [0, 1, 10], "depth": [1, 2, 3], "perturbation_rate": [0.05]}}"#,
    )
    .unwrap();
    ok(&segia(dir.path(), &["sweep", "--config", "sweep.json", "--out", "s", "--jobs", "3"]));
    let mut rdr = csv::Reader::from_path(dir.path().join("s/sweep.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 9);
    for alpha in ["0.0", "1.0", "10.0"] {
        assert_eq!(rows.iter().filter(|r| &r[col("alpha")] == alpha).count(), 3);
    }
    for r in &rows {
        assert_eq!(&r[col("status")], "ok");
        assert!(!r[col("w1_nonincreasing_in_alpha")].is_empty());
    }
    // Cost grows with depth at fixed alpha.
    let work = |depth: &str| -> u64 {
        rows.iter()
            .find(|r| &r[col("alpha")] == "1.0" && &r[col("depth")] == depth)
            .unwrap()[col("work_units")]
            .parse()
            .unwrap()
    };
    assert!(work("1") < work("2") && work("2") < work("3"));
    assert!(dir.path().join("s/timing.csv").exists());
}

#[test]
fn sweep_failures_are_recorded_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.json"),
        r#"{"attack": {"iterations": 5}, "sweep": {"alpha": [1], "depth": [1], "perturbation_rate": [0.05, 1.5]}}"#,
    )
    .unwrap();
    let out = segia(dir.path(), &["sweep", "--config", "bad.json", "--out", "s"]);
    assert_eq!(out.status.code(), Some(2));
    let table = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.lines().nth(1).unwrap().contains(",ok,"));
    assert!(table.lines().nth(2).unwrap().contains("error"));
}

#[test]
fn invalid_inputs_fail_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("empty.json"),
        r#"{"sweep": {"alpha": [], "depth": [1], "perturbation_rate": [0.05]}}"#,
    )
    .unwrap();
    let out = segia(dir.path(), &["sweep", "--config", "empty.json", "--out", "s"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));

    fs::write(dir.path().join("missing.json"), r#"{"graph": {"source": {"dir": "nowhere"}}}"#).unwrap();
    let out = segia(dir.path(), &["train", "--config", "missing.json", "--out", "t"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));

    let out = segia(dir.path(), &["train"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));
}

#[test]
fn theorem_report_schema_with_one_seed() {
    let dir = tempfile::tempdir().unwrap();
    quick_config(dir.path());
    ok(&segia(dir.path(), &["theorem1", "--config", "quick.json", "--out", "t", "--n-seeds", "1"]));
    let report = json(dir.path().join("t/theorem1.json"));
    for key in ["homophily_satisfaction_rate", "defended_loss_satisfaction_rate"] {
        assert!(report[key].is_number(), "{key}");
    }
    assert_eq!(report["report"]["seeds"].as_array().unwrap().len(), 1);
    assert_eq!(fs::read_to_string(dir.path().join("t/theorem1.csv")).unwrap().lines().count(), 2);
}

#[test]
fn loaded_graph_directory_round_trips_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    quick_config(dir.path());
    ok(&segia(dir.path(), &["gen-synthetic", "--config", "quick.json", "--out", "g"]));
    fs::write(
        dir.path().join("dir.json"),
        r#"{"graph": {"source": {"dir": "g/graph"}}, "attack": {"iterations": 30}}"#,
    )
    .unwrap();
    ok(&segia(dir.path(), &["attack", "--config", "dir.json", "--out", "x"]));
    ok(&segia(dir.path(), &["attack", "--config", "quick.json", "--out", "y"]));
    assert_eq!(
        fs::read(dir.path().join("x/plan_000.json")).unwrap(),
        fs::read(dir.path().join("y/plan_000.json")).unwrap()
    );
}
