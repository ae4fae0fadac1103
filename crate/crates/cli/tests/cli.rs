use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn na(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_na"))
        .args(args)
        .current_dir(dir)
        .env_remove("NA_SEED")
        .output()
        .expect("spawn na")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn parity_dfa(dir: &Path) {
    std::fs::write(dir.join("parity.dfa"), "dfa 2 0 0\n0 0 0\n0 1 1\n1 0 1\n1 1 0\n").unwrap();
}

#[test]
fn compile_verifies_and_writes_checkpoint_and_manifest() {
    let t = tempfile::tempdir().unwrap();
    parity_dfa(t.path());
    let o = na(t.path(), &["compile", "dfa2srn", "--in", "parity.dfa", "--out", "parity.ckpt", "--verify-len", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("symbolic") && s.contains("numeric") && !s.contains("FAIL"), "{s}");
    assert!(s.contains("511"));
    assert!(t.path().join("parity.ckpt").exists());
    let m: Value = serde_json::from_str(&std::fs::read_to_string(t.path().join("parity.ckpt.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "compile");
    assert_eq!(m["exit_code"], 0);
}

#[test]
fn asym_accept_follows_the_dfa() {
    let t = tempfile::tempdir().unwrap();
    parity_dfa(t.path());
    na(t.path(), &["compile", "dfa2gru", "--in", "parity.dfa", "--out", "p.ckpt"]);
    for (input, word, code) in [("1010", "accept", 0), ("100", "reject", 1), ("101", "accept", 0), ("", "accept", 0)] {
        let o = na(t.path(), &["asym", "accept", "--model", "p.ckpt", "--input", input]);
        assert_eq!(stdout(&o).trim(), word, "{input}");
        assert_eq!(o.status.code(), Some(code), "{input}");
    }
}

#[test]
fn asym_accept_reports_unstable_with_exit_two() {
    let t = tempfile::tempdir().unwrap();
    na(t.path(), &["compile", "attn-identity", "--out", "id.ckpt"]);
    let o = na(t.path(), &["asym", "accept", "--model", "id.ckpt", "--input", "01"]);
    let word = stdout(&o);
    assert!(["accept", "reject", "unstable"].contains(&word.trim()));
    let expected = match word.trim() {
        "accept" => 0,
        "reject" => 1,
        _ => 2,
    };
    assert_eq!(o.status.code(), Some(expected));
}

#[test]
fn statecomp_counter_is_linear() {
    let t = tempfile::tempdir().unwrap();
    na(t.path(), &["compile", "counter", "--out", "c.ckpt"]);
    let o = na(t.path(), &["statecomp", "--model", "c.ckpt", "--selector", "h", "--n-max", "10", "--out", "sc"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let counts: Vec<usize> = s
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(counts, (2..=11).collect::<Vec<_>>());
    assert!(s.contains("# class: Θ(n)"));
    assert!(t.path().join("sc/curve.csv").exists());
    assert!(t.path().join("sc/manifest.json").exists());
}

#[test]
fn usage_errors_exit_two() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(na(t.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(na(t.path(), &["asym", "accept", "--model", "missing.ckpt", "--input", "1"]).status.code(), Some(2));
    assert_eq!(na(t.path(), &["statecomp", "--model", "x", "--selector", "h", "--n-max", "3", "--bogus"]).status.code(), Some(2));
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(t.path().join("bad.ckpt"), "neural-automata-checkpoint 1\narch srn\n").unwrap();
    let o = na(t.path(), &["asym", "accept", "--model", "bad.ckpt", "--input", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_skip_training_runs_structural_criteria() {
    let t = tempfile::tempdir().unwrap();
    let o = na(t.path(), &["verify", "--only", "1,3,4", "--skip-training", "--out", "v"]);
    let s = stdout(&o);
    assert_eq!(s.lines().filter(|l| l.starts_with("[PASS]")).count(), 3, "{s}");
    assert_eq!(o.status.code(), Some(0));
    assert!(t.path().join("v/verify.csv").exists());
}

#[test]
fn train_counting_writes_artifacts_and_honours_config_and_seed() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(
        t.path().join("tiny.conf"),
        "# tiny run\nepochs = 2\ntrain_n = 2,6\ncurriculum =\ntrain_count = 10\nval_count = 5\ntest_n = 7,8\ntest_count = 3\n",
    )
    .unwrap();
    let run = |out: &str, seed_env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_na"));
        c.args(["train", "counting", "--arch", "gru", "--noise", "0.1", "--config", "tiny.conf", "--out", out])
            .current_dir(t.path())
            .env_remove("NA_SEED");
        if let Some(s) = seed_env {
            c.env("NA_SEED", s);
        }
        c.output().unwrap()
    };
    let o = run("a", Some("7"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["metrics.json", "metrics.csv", "model.ckpt", "config.json", "manifest.json"] {
        assert!(t.path().join("a").join(f).exists(), "{f}");
    }
    let cfg: Value = serde_json::from_str(&std::fs::read_to_string(t.path().join("a/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["seed"], 7);
    assert_eq!(cfg["epochs"], 2);
    assert_eq!(cfg["noise_sd"], 0.1);
    run("b", Some("7"));
    let read = |d: &str| std::fs::read_to_string(t.path().join(d).join("metrics.json")).unwrap();
    assert_eq!(read("a"), read("b"));
    let csv = std::fs::read_to_string(t.path().join("a/metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    let o = na(t.path(), &["report", "--runs", "a", "--out", "rep"]);
    assert_eq!(o.status.code(), Some(0));
    let table = std::fs::read_to_string(t.path().join("rep/table1.csv")).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("GRU,O(1),0.1,"), "{table}");
}

#[test]
fn train_reversal_writes_a_loadable_checkpoint() {
    let t = tempfile::tempdir().unwrap();
    std::fs::write(
        t.path().join("r.conf"),
        "hidden = 3\ntrain_count = 10\nval_count = 5\ngen_count = 3\ngen_len = 12,1\n",
    )
    .unwrap();
    let o = na(
        t.path(),
        &["train", "reversal", "--attention", "--trials", "2", "--epochs", "1", "--seed", "3", "--config", "r.conf", "--out", "r"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let ckpt = std::fs::read_to_string(t.path().join("r/model.ckpt")).unwrap();
    assert!(neural_automata_ckpt_header(&ckpt));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(t.path().join("r/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seeds"], serde_json::json!([3, 4]));
    assert_eq!(na(t.path(), &["train", "reversal", "--arch", "gru", "--out", "x"]).status.code(), Some(2));
}

fn neural_automata_ckpt_header(text: &str) -> bool {
    text.starts_with("neural-automata-seq2seq 1\n== encoder\n") && text.contains("== attention\nWc 3 6\n")
}
