//! End-to-end runs of the `netdilemma` binary.

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_netdilemma");

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn preset(name: &str) -> PathBuf {
    manifest_dir().join("presets").join(name)
}

fn fixture(name: &str) -> PathBuf {
    manifest_dir().join("tests/fixtures").join(name)
}

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_grid(dir: &Path, body: serde_json::Value) -> PathBuf {
    let file = dir.join("grid.json");
    fs::write(&file, body.to_string()).unwrap();
    file
}

fn read_csv(file: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(file)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn presets_validate() {
    let o = cli(&[
        "validate",
        path(&preset("ring-grid.json")),
        path(&preset("stimulus.json")),
        path(&preset("mock-dialogue.json")),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("ring-grid.json: 18 cells, 90 repetitions"));
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let mut config: serde_json::Value = serde_json::from_str(&fs::read_to_string(fixture("alternating.json")).unwrap()).unwrap();
    config["repetitons"] = 3.into();
    let file = dir.path().join("bad.json");
    fs::write(&file, config.to_string()).unwrap();

    let o = cli(&["validate", path(&file)]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("repetitons"), "{}", stdout(&o));

    let out = dir.path().join("out");
    let o = cli(&["run", "--config", path(&file), "--out", path(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("repetitons"));
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn invalid_cell_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let grid = write_grid(
        dir.path(),
        serde_json::json!({
            "k": [2, 8], "bc_ratio": [2], "rosters": ["all_c"],
            "regimes": [{"name": "r", "n": 8, "rounds": 3}],
            "repetitions": 1, "master_seed": 1
        }),
    );
    let o = cli(&["validate", path(&grid)]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("cell r-fixed_ring-all_c-k8-bc2"), "{}", stdout(&o));
}

#[test]
fn all_cooperator_grid_final_table_and_labels() {
    let dir = tempfile::tempdir().unwrap();
    let grid = write_grid(
        dir.path(),
        serde_json::json!({
            "k": [2, 4, 6], "bc_ratio": [2, 4, 6], "rosters": ["all_c"],
            "regimes": [{"name": "short", "n": 25, "rounds": 15}],
            "repetitions": 2, "master_seed": 5
        }),
    );
    let out = dir.path().join("out");
    let o = cli(&["run", "--grid", path(&grid), "--out", path(&out)]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let o = cli(&["metrics", path(&out), "--which", "final15"]);
    assert_eq!(code(&o), 0);

    let rows = read_csv(&out.join("metrics/final15.csv"));
    assert_eq!(rows.len(), 9);
    for row in &rows {
        // cell,regime,k,bc_ratio,class,round,mean,se,runs
        assert_eq!((row[5].as_str(), row[6].as_str(), row[8].as_str()), ("15", "1", "2"));
        let expected = match (row[3].as_str(), row[2].as_str()) {
            ("2", "4") => Some("b/c<k"),
            ("4", "4") => Some("b/c=k"),
            ("6", "2") => Some("b/c>k"),
            _ => None,
        };
        if let Some(label) = expected {
            assert_eq!(row[4], label);
        }
    }
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics/final15.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 9);
    assert_eq!(json[0]["class"], "b/c=k");
}

#[test]
fn rerun_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let grid = fixture("golden-grid.json");
    assert_eq!(code(&cli(&["run", "--grid", path(&grid), "--out", path(&out), "--jobs", "3"])), 0);
    let records = out.join("cells/small-fixed_ring-fermi-k2-bc6/rep-001/records.jsonl");
    let before = fs::read(&records).unwrap();
    let modified = fs::metadata(&records).unwrap().modified().unwrap();
    let manifest = fs::read(out.join("manifest.json")).unwrap();

    let o = cli(&["run", "--grid", path(&grid), "--out", path(&out)]);
    assert_eq!(code(&o), 0);
    assert!(!stdout(&o).contains("ran "));
    assert_eq!(stdout(&o).matches("skipped ").count(), 16);
    assert_eq!(fs::read(&records).unwrap(), before);
    assert_eq!(fs::metadata(&records).unwrap().modified().unwrap(), modified);
    assert_eq!(fs::read(out.join("manifest.json")).unwrap(), manifest);

    // A changed seed changes every hash, so every cell runs again.
    let o = cli(&["run", "--grid", path(&grid), "--out", path(&out), "--seed", "1"]);
    assert_eq!(stdout(&o).matches("ran ").count(), 16);
}

#[test]
fn alternating_fixture_assortment_is_minus_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["metrics", path(&fixture("alternating-run")), "--which", "assort,coop", "--out", path(dir.path())]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let rows = read_csv(&dir.path().join("assort.csv"));
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert_eq!(row[2], "-1");
    }
    for row in read_csv(&dir.path().join("coop.csv")) {
        assert_eq!(row[2], "0.5");
    }
}

#[test]
fn metrics_on_empty_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["metrics", path(dir.path())]);
    assert_eq!(code(&o), 1);
}

#[test]
fn replay_shipped_fixture_and_tampered_copy() {
    let o = cli(&["replay", path(&fixture("alternating-run"))]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("2 repetitions identical"));

    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("run");
    fs::create_dir_all(copy.join("rep-000")).unwrap();
    fs::create_dir_all(copy.join("rep-001")).unwrap();
    for file in ["config.json", "status.json"] {
        fs::copy(fixture("alternating-run").join(file), copy.join(file)).unwrap();
    }
    for rep in ["rep-000", "rep-001"] {
        for file in ["records.jsonl", "transcripts.jsonl", "events.jsonl", "status.json"] {
            fs::copy(fixture("alternating-run").join(rep).join(file), copy.join(rep).join(file)).unwrap();
        }
    }
    // Flip node 4's action in round 3 of the second repetition.
    let records = copy.join("rep-001/records.jsonl");
    let text = fs::read_to_string(&records).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[2] = lines[2].replacen(r#"["C","D","C","D","C""#, r#"["C","D","C","D","D""#, 1);
    fs::write(&records, lines.join("\n") + "\n").unwrap();

    let o = cli(&["replay", path(&copy)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("rep-001 round 3"), "{}", stdout(&o));
}

#[test]
fn failed_repetitions_exit_1_and_keep_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut config: serde_json::Value = serde_json::from_str(&fs::read_to_string(fixture("alternating.json")).unwrap()).unwrap();
    config["agents"][3] = serde_json::json!({"kind": "human"});
    config["human_timeout_secs"] = 0.05.into();
    let file = dir.path().join("human.json");
    fs::write(&file, config.to_string()).unwrap();
    let out = dir.path().join("out");
    let o = cli(&["run", "--config", path(&file), "--out", path(&out)]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).contains("0 completed, 2 failed"));
    let status = fs::read_to_string(out.join("cells/experiment/rep-000/status.json")).unwrap();
    assert!(status.contains("timeout"), "{status}");
    // Nothing usable for metrics.
    assert_eq!(code(&cli(&["metrics", path(&out)])), 1);
}

#[test]
fn serve_on_busy_port_fails() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["serve", "--port", &port, "--data", path(dir.path())]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot bind"));
}

fn check_golden(name: &str, actual: &str) {
    let file = manifest_dir().join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(file.parent().unwrap()).unwrap();
        fs::write(&file, actual).unwrap();
    }
    let expected = fs::read_to_string(&file).unwrap_or_else(|_| panic!("missing golden {name}; rerun with UPDATE_GOLDEN=1"));
    assert_eq!(actual, expected, "golden {name} differs");
}

#[test]
fn output_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = cli(&["run", "--grid", path(&fixture("golden-grid.json")), "--out", path(&out)]);
    assert_eq!(code(&o), 0);
    check_golden("run.stdout", &stdout(&o));
    let o = cli(&["metrics", path(&out)]);
    check_golden("metrics.stdout", &stdout(&o));
    check_golden("manifest.json", &fs::read_to_string(out.join("manifest.json")).unwrap());
    for file in ["coop.csv", "assort.csv", "payoffs.csv", "payoffs.json", "final15.csv"] {
        check_golden(file, &fs::read_to_string(out.join("metrics").join(file)).unwrap());
    }
    check_golden(
        "records.jsonl",
        &fs::read_to_string(out.join("cells/small-well_mixed-random-k4-bc2/rep-002/records.jsonl")).unwrap(),
    );
}
