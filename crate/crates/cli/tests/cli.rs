//! Exit codes and output of the `dlp` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn dlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlp")).args(args).env_remove("DLP_SMT").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn scripted_proof_exits_zero_and_writes_a_checkable_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let src = corpus("while_sum.dlp");
    let o = dlp(&["prove", src.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("goal sum: proved"));
    let cert = dir.path().join("while_sum.sum.cert.json");
    let c = dlp(&["check", cert.to_str().unwrap()]);
    assert_eq!(code(&c), 0, "{}", stdout(&c));
    assert!(stdout(&c).starts_with("accepted"));
}

#[test]
fn every_written_certificate_checks() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["countdown_auto.dlp", "regular_sum.dlp", "temporal_pl.dlp", "sl_heap.dlp", "lifting.dlp"] {
        let o = dlp(&["prove", corpus(f).to_str().unwrap(), "--auto", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{f}: {}", stdout(&o));
    }
    let mut n = 0;
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let p = entry.unwrap().path();
        let c = dlp(&["check", p.to_str().unwrap()]);
        assert_eq!(code(&c), 0, "{}: {}", p.display(), stdout(&c));
        n += 1;
    }
    assert_eq!(n, 7);
}

#[test]
fn render_text_prints_a_node_table() {
    let o = dlp(&["prove", corpus("lifting.dlp").to_str().unwrap(), "--render-text"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("1: {x -> t + 1} : [while y > 0")), "{out}");
    assert!(out.contains("[LiftedSeq -> 2]"), "{out}");
}

#[test]
fn missing_script_without_search_is_unknown() {
    let o = dlp(&["prove", corpus("countdown_auto.dlp").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("--auto"));
}

#[test]
fn diverging_diamond_is_unknown() {
    let o = dlp(&["prove", corpus("diverge_diamond.dlp").to_str().unwrap(), "--auto"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("termination unknown"));
}

#[test]
fn false_goal_is_disproved() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(
        dir.path(),
        "bad.dlp",
        "instantiation: wp\ngoal bad: |- {x -> t} : [x := x + 1] x > 5\ngoal good: |- {x -> 1} : [x := x + 1] x > 1\n",
    );
    let o = dlp(&["prove", src.to_str().unwrap(), "--auto"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).contains("goal bad: disproved"));
    assert!(stdout(&o).contains("goal good: proved"));
}

#[test]
fn input_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "syntax.dlp", "instantiation: wp\ngoal g: |- {x -> 1} : [x := ] x > 0\n");
    assert_eq!(code(&dlp(&["prove", bad.to_str().unwrap()])), 3);
    assert_eq!(code(&dlp(&["prove", "/nonexistent.dlp"])), 3);
    assert_eq!(code(&dlp(&["prove", corpus("lifting.dlp").to_str().unwrap(), "--oracle", "magic"])), 3);
    assert_eq!(code(&dlp(&["prove", corpus("lifting.dlp").to_str().unwrap(), "--variant", "x +"])), 3);
    assert_eq!(code(&dlp(&["frobnicate"])), 3);
    let junk = write(dir.path(), "junk.json", "{\"version\": 1}");
    assert_eq!(code(&dlp(&["check", junk.to_str().unwrap()])), 3);
    let future = write(
        dir.path(),
        "future.json",
        "{\"version\": 99, \"instantiation\": \"wp\", \"nodes\": [], \"backlinks\": [], \"obligations\": []}",
    );
    assert_eq!(code(&dlp(&["check", future.to_str().unwrap()])), 3);
}

fn shipped() -> Value {
    serde_json::from_str(&std::fs::read_to_string(corpus("while_sum.sum.cert.json")).unwrap()).unwrap()
}

fn check_value(v: &Value) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "c.json", &serde_json::to_string_pretty(v).unwrap());
    dlp(&["check", p.to_str().unwrap()])
}

#[test]
fn shipped_certificate_is_accepted() {
    let o = check_value(&shipped());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}

#[test]
fn certificate_with_a_deleted_node_is_rejected() {
    let mut v = shipped();
    let nodes = v["nodes"].as_array_mut().unwrap();
    let k = nodes.iter().position(|n| n["id"] == 12).unwrap();
    nodes.remove(k);
    let o = check_value(&v);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).starts_with("rejected"));
}

#[test]
fn forged_obligation_is_rejected() {
    // claim a false side condition as valid at the first close
    let mut v = shipped();
    let node = v["obligations"][0]["node"].as_u64().unwrap();
    let forged = "{n -> N - m, s -> (2*(N*m) - m*m + m)/2} : n >= 0 |- {n -> N - m, s -> (2*(N*m) - m*m + m)/2} : n > 0";
    v["obligations"][0]["sequent"] = Value::from(forged);
    for n in v["nodes"].as_array_mut().unwrap() {
        if n["id"].as_u64() == Some(node) {
            n["sequent"] = Value::from(forged);
        }
    }
    let o = check_value(&v);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
}

#[test]
fn recorded_verdict_must_be_valid() {
    let mut v = shipped();
    v["obligations"][1]["verdict"] = Value::from("counterexample N = 0, m = 0");
    let o = check_value(&v);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
}

#[test]
fn dropped_progress_marks_are_rejected() {
    let mut v = shipped();
    for n in v["nodes"].as_array_mut().unwrap() {
        n["progressive"] = Value::Array(Vec::new());
    }
    let o = check_value(&v);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
}

#[test]
fn exec_runs_the_sum_loop() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(
        dir.path(),
        "sum.dlp",
        "instantiation: wp\nprogram w = while n > 0 do s := s + n; n := n - 1 end\nrun w\nobserve s = 15\n",
    );
    let o = dlp(&["exec", src.to_str().unwrap(), "--world", "n=5,s=0"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("final: n: 0, s: 15"), "{out}");
    assert!(out.contains("s = 15: true"), "{out}");
    let o = dlp(&["exec", src.to_str().unwrap(), "--world", "n=5,s=0", "--budget", "3"]);
    assert_eq!(code(&o), 2);
    let o = dlp(&["exec", src.to_str().unwrap(), "--world", "n=5"]);
    assert_eq!(code(&o), 3);
    let o = dlp(&["exec", src.to_str().unwrap(), "--world", "n5"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn exec_prints_the_heap_table() {
    let o = dlp(&["exec", corpus("sl_heap.dlp").to_str().unwrap(), "--world", "x=0,y=0", "--alloc-base", "37"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("s2 | x: 37, y: 38 | h2 | 37: 1, 38: 1"), "{out}");
    assert!(out.contains("s5 | x: 37, y: 37 | h5 | 37: 1"), "{out}");
}

#[test]
fn exec_prints_the_temporal_path() {
    let o = dlp(&["exec", corpus("temporal_pl.dlp").to_str().unwrap(), "--world", "x=-1"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("path: {x: -1} {x: 0} {x: 1}"));
}

#[test]
fn oracle_verdicts_map_to_exit_codes() {
    let o = dlp(&["oracle", "{x -> t} : t >= 0 |- {x -> t} : x + 1 > 0"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let o = dlp(&["oracle", "|- {} : x > 0"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stdout(&o).trim(), "counterexample x = 0");
    let o = dlp(&["oracle", "--oracle", "smt:/nonexistent/solver", "|- {} : x > 0"]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&dlp(&["oracle", "|- {} : x >"])), 3);
    assert_eq!(code(&dlp(&["oracle", "|- {x -> 1} : [x := 2] x > 0"])), 3);
}
