use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn optheap(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optheap"))
        .args(args)
        .current_dir(dir)
        .env_remove("OPTHEAP_EPSILON_RATE")
        .output()
        .expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn fuzz_passes_and_writes_no_trace() {
    let dir = TempDir::new().unwrap();
    let out = optheap(&["fuzz", "--ops", "3000", "--seed", "5", "--paranoid"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).starts_with("ok: "));
    assert!(!dir.path().join("fuzz-failure.trace").exists());
}

#[test]
fn counter_scripts() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("ok.txt"), "inc 0; inc 0; inc 0\nassert-regular\nassert-value 3\n").unwrap();
    let out = optheap(&["counter", "ok.txt"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));

    fs::write(dir.path().join("bad.txt"), "dec 0\n").unwrap();
    let out = optheap(&["counter", "bad.txt"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_trace_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("t.trace"), "new 0\ninsert 0 1\ninsert 0\n").unwrap();
    let out = optheap(&["replay", "t.trace"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("line 3"), "{}", text(&out.stderr));
}

#[test]
fn missing_file_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = optheap(&["dump", "nope.trace"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replaying_a_fuzz_trace_agrees() {
    let dir = TempDir::new().unwrap();
    let ops = optheap::harness::fuzz(9, 2000, 3, Default::default(), Default::default(), 64);
    assert!(ops.verdict.is_ok());
    fs::write(dir.path().join("f.trace"), optheap::harness::format_trace(&ops.trace)).unwrap();
    let out = optheap(&["replay", "f.trace"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(text(&out.stdout), format!("ok: {} operations replayed\n", ops.trace.len()));
}

#[test]
fn replay_reports_a_wrong_handle() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("t.trace"), "new 0\ninsert 0 4\ndelete 0 7\n").unwrap();
    let out = optheap(&["replay", "t.trace"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("op 2"));
}

#[test]
fn dump_every_golden() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("t.trace"),
        "# small\nnew 0\ninsert 0 5\ninsert 0 3\ninsert 0 8\ninsert 0 1\ndeletemin 0\n",
    )
    .unwrap();
    let out = optheap(&["replay", "t.trace", "--dump-every", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let want = "\
after 3 ops
queue 0 (2 elements)
  t1 (3:1 (5:0))
after 6 ops
queue 0 (3 elements)
  t1 (3:1 (8:0) (5:0))
ok: 6 operations replayed
";
    assert_eq!(text(&out.stdout), want);
}

#[test]
fn bench_json_and_csv() {
    let dir = TempDir::new().unwrap();
    let out = optheap(&["bench", "--workload", "drain", "--n", "256", "--n", "512"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["extension"], 4);
    assert_eq!(v["epsilon"], 0.5);
    let results = v["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert_eq!(results[1]["n"], 512);
    let rows = results[0]["rows"].as_array().unwrap();
    assert!(rows.iter().any(|r| r["op"] == "deletemin"));

    let out = optheap(
        &["bench", "--workload", "sorted", "--n", "300", "--format", "csv", "--out", "b.csv", "--assert-bounds"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("workload,n,op,n_bucket,max_comparisons,mean_comparisons,max_fixes,max_edits")
    );
    assert!(lines.all(|l| l.starts_with("sorted,300,")));
}

#[test]
fn unknown_workload_and_bad_rate() {
    let dir = TempDir::new().unwrap();
    let out = optheap(&["bench", "--workload", "zigzag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_optheap"))
        .args(["fuzz", "--ops", "10"])
        .current_dir(dir.path())
        .env("OPTHEAP_EPSILON_RATE", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
