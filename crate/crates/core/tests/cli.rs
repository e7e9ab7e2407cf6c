use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_lockweave");

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str], out: &Path) -> Run {
    let o = Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    Run {
        code: o.status.code().unwrap(),
        stdout: String::from_utf8(o.stdout).unwrap(),
        stderr: String::from_utf8(o.stderr).unwrap(),
    }
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn knowledge(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("knowledge").join(name)
}

/// A copy of a bundled set with one file removed or replaced.
fn altered(name: &str, file: &str, contents: Option<&str>) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let src = knowledge(name);
    for e in walk(&src) {
        let rel = e.strip_prefix(&src).unwrap();
        let dst = dir.path().join(rel);
        fs::create_dir_all(dst.parent().unwrap()).unwrap();
        fs::copy(&e, &dst).unwrap();
    }
    let target = dir.path().join(file);
    match contents {
        Some(c) => fs::write(target, c).unwrap(),
        None => fs::remove_file(target).unwrap(),
    }
    dir
}

fn walk(p: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(p).unwrap() {
        let path = e.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

#[test]
fn find_instance_on_the_list() {
    let out = tempfile::tempdir().unwrap();
    let r = run(&["find-instance", "linked_list"], out.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("instance {edge(h,x), edge(x,t)}"));
    assert!(r.stdout.contains("kh < kx < kt"));
    let j = json(out.path().join("instance.json"));
    assert_eq!(j["schema_version"], 1);
    assert_eq!(j["command"], "find-instance");
    assert_eq!(j["instance"], serde_json::json!(["edge(h,x)", "edge(x,t)"]));
    assert_eq!(j["rejected"][0]["instance"], serde_json::json!(["edge(h,t)"]));
    let lp = fs::read_to_string(out.path().join("instance.lp")).unwrap();
    assert!(lp.contains("edge(h,x).\n"));
}

#[test]
fn find_instance_from_a_directory() {
    let out = tempfile::tempdir().unwrap();
    let r = run(&["find-instance", knowledge("external_bst").to_str().unwrap()], out.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(json(out.path().join("instance.json"))["found"], true);
}

#[test]
fn zero_bound_is_not_found() {
    let out = tempfile::tempdir().unwrap();
    let r = run(&["find-instance", "linked_list", "--max-nodes", "0"], out.path());
    assert_eq!(r.code, 2);
    assert_eq!(json(out.path().join("instance.json"))["found"], false);
}

#[test]
fn parse_errors_exit_1() {
    let bad = altered("linked_list", "theory.lp", Some("list :- edge(h, X"));
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&["order", bad.path().to_str().unwrap()], out.path()).code, 1);
    assert_eq!(run(&["frobnicate", "linked_list"], out.path()).code, 1);
    assert_eq!(run(&["synth", "linked_list", "--strategy-override", "optimistic"], out.path()).code, 1);
    assert_eq!(run(&["simulate", "linked_list", "--strategy-override", "delete::nowhere=x"], out.path()).code, 1);
}

#[test]
fn missing_files_exit_4() {
    let out = tempfile::tempdir().unwrap();
    let r = run(&["synth", "/nonexistent/knowledge"], out.path());
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("theory.lp"));
}

#[test]
fn order_reports_every_block() {
    let out = tempfile::tempdir().unwrap();
    let r = run(&["order", "linked_list"], out.path());
    assert_eq!(r.code, 0);
    let j = json(out.path().join("order.json"));
    let insert = &j["blocks"][0];
    assert_eq!(insert["accepted"], serde_json::json!([["link(target,y)", "link(x,target)"]]));
    // Sets with an unorderable block exit with analysis-not-found.
    assert_eq!(run(&["order", "internal_bst"], out.path()).code, 2);
}

#[test]
fn locks_with_override() {
    let out = tempfile::tempdir().unwrap();
    let r = run(&["locks", "linked_list"], out.path());
    assert_eq!(r.code, 0);
    let j = json(out.path().join("locks.json"));
    assert!(j["bindings"].as_array().unwrap().iter().all(|b| b["adequacy"]["outcome"] == "adequate"));

    let r = run(&["locks", "linked_list", "--strategy-override", "delete::block1=x"], out.path());
    assert_eq!(r.code, 0);
    let j = json(out.path().join("locks.json"));
    let del = j["bindings"]
        .as_array()
        .unwrap()
        .iter()
        .find(|b| b["operation"] == "delete")
        .unwrap();
    assert_eq!(del["overridden"], true);
    assert_eq!(del["locks"]["nodes"], serde_json::json!(["h"]));
    assert_eq!(del["adequacy"]["outcome"], "inadequate");
}

#[test]
fn synth_writes_verdicts_code_and_provenance() {
    let out = tempfile::tempdir().unwrap();
    let r = run(&["synth", "linked_list"], out.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    let j = json(out.path().join("verdicts.json"));
    assert_eq!(j["verdict"]["strategy"], "fine_grained");
    assert_eq!(j["emitted"], serde_json::json!(["insert.cpp", "delete.cpp"]));
    let code = fs::read_to_string(out.path().join("insert.cpp")).unwrap();
    assert!(code.contains("->mtx.lock();"));
    let side = json(out.path().join("insert.provenance.json"));
    assert_eq!(side["file"], "insert.cpp");
    assert!(!side["provenance"].as_array().unwrap().is_empty());
}

#[test]
fn synth_without_templates_emits_nothing() {
    let out = tempfile::tempdir().unwrap();
    let r = run(&["synth", "external_rb"], out.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    let j = json(out.path().join("verdicts.json"));
    assert_eq!(j["emitted"], serde_json::json!([]));
    assert_eq!(j["verdict"]["order_exists"], false);
}

#[test]
fn missing_mappings_fail_codegen_but_keep_verdicts() {
    let set = altered("linked_list", "mappings.lp", None);
    let out = tempfile::tempdir().unwrap();
    let r = run(&["synth", set.path().to_str().unwrap()], out.path());
    assert_eq!(r.code, 1);
    let j = json(out.path().join("verdicts.json"));
    assert_eq!(j["verdict"]["strategy"], "fine_grained");
    assert!(j["codegen_error"].is_string());
}

#[test]
fn strategy_override_changes_emission() {
    let out = tempfile::tempdir().unwrap();
    let r = run(&["synth", "linked_list", "--strategy-override", "coarse-grained"], out.path());
    assert_eq!(r.code, 0);
    let j = json(out.path().join("verdicts.json"));
    assert_eq!(j["verdict"]["selected_strategy"], "fine_grained");
    assert_eq!(j["verdict"]["strategy"], "coarse_grained");
    assert_eq!(j["emitted"], serde_json::json!([]));
}

#[test]
fn simulate_exit_codes() {
    let out = tempfile::tempdir().unwrap();
    let r = run(&["simulate", "linked_list"], out.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(json(out.path().join("simulation.json"))["failures"], serde_json::json!([]));

    let r = run(&["simulate", "linked_list", "--strategy-override", "delete::block1=x"], out.path());
    assert_eq!(r.code, 3);
    let j = json(out.path().join("simulation.json"));
    let first = &j["failures"][0];
    assert!(first["schedule"]["steps"].as_array().is_some_and(|s| !s.is_empty()));
    assert!(r.stdout.contains("T1:"));

    let r = run(&["simulate", "linked_list", "--threads", "0"], out.path());
    assert_eq!(r.code, 0);
    let j = json(out.path().join("simulation.json"));
    assert_eq!(j["exploration"]["violations"], serde_json::json!([]));
}

#[test]
fn export_asp_horizons() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&["export-asp", "linked_list", "--horizon", "0"], out.path()).code, 0);
    let p = fs::read_to_string(out.path().join("program.lp")).unwrap();
    assert!(p.contains("edge(h,x,0)."));
    assert!(p.contains(":- time(T), not list(T)."));
    assert!(!p.contains("interfere"));

    assert_eq!(run(&["export-asp", "linked_list", "--horizon", "2"], out.path()).code, 0);
    let p = fs::read_to_string(out.path().join("program.lp")).unwrap();
    assert!(p.contains("time(0..2)."));
    assert!(p.contains("edge(h,t,T+1) :- interfere("));

    assert_eq!(run(&["export-asp", "external_bst", "--horizon", "1"], out.path()).code, 0);
    let p = fs::read_to_string(out.path().join("program.lp")).unwrap();
    assert!(p.contains("left(") && p.contains("right("));
}

#[test]
fn outputs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for args in [&["synth", "external_bst"][..], &["simulate", "linked_list", "--seed", "9"]] {
        assert_eq!(run(args, a.path()).code, 0);
        assert_eq!(run(args, b.path()).code, 0);
    }
    for f in walk(a.path()) {
        let rel = f.strip_prefix(a.path()).unwrap();
        assert_eq!(fs::read(&f).unwrap(), fs::read(b.path().join(rel)).unwrap(), "{}", rel.display());
    }
}
