use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BOX_QP: &str = r#"{
  "format_version": 1,
  "n": 2,
  "m": 2,
  "P": {"rows": [0, 1], "cols": [0, 1], "vals": ["0x1p+0", "0x1p+0"]},
  "q": [0, 0],
  "A": {"rows": [0, 1], "cols": [0, 1], "vals": [1, 1]},
  "l": [-1, -1],
  "u": [1, 1]
}"#;

fn splitqp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splitqp")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn solve_box_qp() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("box.json");
    fs::write(&input, BOX_QP).unwrap();
    let out = splitqp(&["solve", path_str(&input)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let res = json(&out);
    assert_eq!(res["status"], "solved");
    assert_eq!(res["objective"].as_f64().unwrap(), 0.0);
    assert_eq!(res["polish"], "accepted");
}

#[test]
fn no_polish_and_high_accuracy_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("svm.json");
    let gen = splitqp(&["generate", "-c", "svm", "-d", "5", "-s", "4", "-o", path_str(&input)]);
    assert_eq!(gen.status.code(), Some(0));

    let out = splitqp(&["solve", path_str(&input), "--no-polish"]);
    let loose = json(&out);
    assert_eq!(loose["polish"], "not_run");

    let out = splitqp(&["solve", path_str(&input), "--no-polish", "--eps-abs", "1e-5", "--eps-rel", "1e-5"]);
    let tight = json(&out);
    assert_eq!(tight["status"], "solved");
    assert!(tight["iterations"].as_u64() > loose["iterations"].as_u64());
    assert!(tight["prim_res"].as_f64().unwrap() <= 1e-4);
}

#[test]
fn result_file_is_written_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.json");
    let result = dir.path().join("r.json");
    splitqp(&["generate", "-c", "portfolio", "-d", "1", "-o", path_str(&input)]);
    let out = splitqp(&["solve", path_str(&input), "-o", path_str(&result)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read(&result).unwrap(), out.stdout);
    assert_eq!(splitqp(&["check", path_str(&input), path_str(&result)]).status.code(), Some(0));

    // perturb the reported point far from optimal
    let mut res: Value = serde_json::from_slice(&out.stdout).unwrap();
    for v in res["solution"]["x"].as_array_mut().unwrap() {
        *v = Value::from(v.as_f64().unwrap() + 1.0);
    }
    fs::write(&result, serde_json::to_vec(&res).unwrap()).unwrap();
    let check = splitqp(&["check", path_str(&input), path_str(&result)]);
    assert_eq!(check.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&check.stdout).contains("FAIL"));
}

#[test]
fn sweep_writes_one_file_per_instance_with_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("corpus");
    let gen = splitqp(&["generate", "-c", "all", "-d", "1,2", "-s", "0..10", "-o", path_str(&out)]);
    assert_eq!(gen.status.code(), Some(0));
    assert_eq!(fs::read_dir(&out).unwrap().count(), 7 * 2 * 10);

    let text = fs::read_to_string(out.join("svm_2_7.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["metadata"]["class"], "svm");
    assert_eq!(v["metadata"]["dim"], 2);
    assert_eq!(v["metadata"]["seed"], 7);
    assert_eq!(v["metadata"]["name"], "svm_2_7");
}

#[test]
fn generation_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        splitqp(&["generate", "-c", "optimal_control", "-d", "3", "-s", "9", "-o", path_str(p)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn bench_trivial_corpus_has_no_failures() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir(&corpus).unwrap();
    fs::write(corpus.join("box.json"), BOX_QP).unwrap();
    let csv = dir.path().join("summary.csv");
    let records = dir.path().join("records.csv");
    let out = splitqp(&[
        "bench",
        path_str(&corpus),
        "--csv",
        path_str(&csv),
        "--records",
        path_str(&records),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("unknown"), "{table}");
    let summary = fs::read_to_string(&csv).unwrap();
    let header: Vec<&str> = summary.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    let failures = header.iter().position(|h| *h == "failures").unwrap();
    assert_eq!(row[failures], "0");
    assert!(fs::read_to_string(&records).unwrap().contains("box"));
}

#[test]
fn warm_start_mode_reports_ratios() {
    let out = splitqp(&["bench", "--warm-start", "--experiment", "control", "--dim", "4", "--steps", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("control")), "{text}");
}

#[test]
fn limits_and_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("q.json");
    splitqp(&["generate", "-c", "random_qp", "-d", "10", "-o", path_str(&input)]);

    let out = splitqp(&["solve", path_str(&input), "--max-iter", "2", "--check-termination-every", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["status"], "max_iter_reached");

    assert_eq!(splitqp(&["solve", path_str(&input), "--alpha", "2.5"]).status.code(), Some(1));
    assert_eq!(splitqp(&["solve", path_str(&input), "--ordering", "metis"]).status.code(), Some(1));
    assert_eq!(splitqp(&["solve", "/nonexistent/q.json"]).status.code(), Some(1));
    assert_eq!(splitqp(&["frobnicate"]).status.code(), Some(1));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, BOX_QP.replace(r#""l": [-1, -1]"#, r#""l": [2, -1]"#)).unwrap();
    let out = splitqp(&["solve", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 0"));
}

#[test]
fn settings_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("box.json");
    fs::write(&input, BOX_QP).unwrap();
    let settings = dir.path().join("s.json");
    fs::write(&settings, r#"{"polish": false, "max_iter": 1, "check_termination_every": 1}"#).unwrap();
    let out = splitqp(&["solve", path_str(&input), "--settings", path_str(&settings), "--max-iter", "100"]);
    let res = json(&out);
    assert_eq!(res["polish"], "not_run");
    assert_eq!(res["status"], "solved");
}
