//! The `fkge` binary: run directories, determinism, exit codes and the
//! accounting command.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const TINY: &str = r#"
name = "tiny"
seed = 3
model = "transe"
dim = 8
rounds = 10
local_iters = 4
batch = 8
lr = 0.05
gamma = 4.0
n_neg = 16
overlap_frac = 0.5
checkpoint_interval = 5

[dataset]
kind = "synthetic"
entities = 120
relations = 4
triples = 1200

[attacks]
kinds = ["si", "cip", "cia"]
members = 20
nonmembers = 20
"#;

fn fkge(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fkge"));
    cmd.args(args);
    match out_env {
        Some(p) => cmd.env("FKGE_OUT", p),
        None => cmd.env_remove("FKGE_OUT"),
    };
    cmd.output().expect("fkge runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}\nstderr: {}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
    })
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn train(config: &Path, root: &Path) -> PathBuf {
    let o = fkge(&["train", "--config", config.to_str().unwrap()], Some(root));
    assert_eq!(code(&o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    root.join("tiny")
}

fn files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn train_attack_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let run = train(&cfg, &tmp.path().join("a"));
    for f in ["config.toml", "manifest.json", "history.csv", "metrics.json", "observables/si.json", "observables/cip.json", "observables/cia.json"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let manifest = fs::read_to_string(run.join("checkpoints/manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 10 / 5);
    assert!(run.join("checkpoints/round-0005/global.ckpt").is_file());
    assert!(run.join("checkpoints/round-0010/client-2.ckpt").is_file());

    for kind in ["si", "cip", "cia"] {
        let o = fkge(&["attack", "--run", run.to_str().unwrap(), "--kind", kind], None);
        assert_eq!(code(&o), 0, "{kind}: {}", String::from_utf8_lossy(&o.stderr));
        let s = json(&o);
        let f1 = s["best_f1"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&f1));
        assert!(run.join(format!("attacks/{kind}.json")).is_file());
        assert!(run.join(format!("attacks/{kind}-summary.json")).is_file());
    }

    let metrics: Value = serde_json::from_str(&fs::read_to_string(run.join("metrics.json")).unwrap()).unwrap();
    let o = fkge(&["eval", "--run", run.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let e = json(&o);
    assert_eq!(e["round"], 10);
    assert_eq!(e["summary"]["mrr"], metrics["summary"]["mrr"]);
    let o = fkge(&["eval", "--run", run.to_str().unwrap(), "--round", "5"], None);
    assert_eq!(code(&o), 0);
    let o = fkge(&["eval", "--run", run.to_str().unwrap(), "--round", "7"], None);
    assert_ne!(code(&o), 0);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "tiny.toml", TINY);
    let a = train(&cfg, &tmp.path().join("a"));
    let b = train(&cfg, &tmp.path().join("b"));
    let fa = files(&a);
    assert_eq!(fa, files(&b));
    assert!(fa.len() > 10);
    for f in &fa {
        assert!(fs::read(a.join(f)).unwrap() == fs::read(b.join(f)).unwrap(), "{} differs", f.display());
    }
}

#[test]
fn configuration_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", "dim = 8\nno_such_field = 1\n");
    let o = fkge(&["train", "--config", bad.to_str().unwrap()], Some(tmp.path()));
    assert_eq!(code(&o), 2);
    let bad = write_config(tmp.path(), "bad2.toml", "clients = 1\n");
    assert_eq!(code(&fkge(&["train", "--config", bad.to_str().unwrap()], Some(tmp.path()))), 2);
    let missing = tmp.path().join("nowhere");
    assert_eq!(code(&fkge(&["attack", "--run", missing.to_str().unwrap(), "--kind", "cip"], None)), 2);
    assert_eq!(code(&fkge(&["attack", "--run", ".", "--kind", "nope"], None)), 2);
}

#[test]
fn server_inference_on_a_bilinear_model_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let text = TINY.replace("model = \"transe\"", "model = \"distmult\"").replace(r#"kinds = ["si", "cip", "cia"]"#, r#"kinds = ["si"]"#);
    let cfg = write_config(tmp.path(), "dm.toml", &text);
    let run = train(&cfg, tmp.path());
    let o = fkge(&["attack", "--run", run.to_str().unwrap(), "--kind", "si"], None);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn budget_exhausted_before_training_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{TINY}\n[defense]\nepsilon_budget = 0.5\n");
    let cfg = write_config(tmp.path(), "dp.toml", &text);
    let o = fkge(&["train", "--config", cfg.to_str().unwrap()], Some(tmp.path()));
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

fn account(args: &[&str]) -> Value {
    let mut all = vec!["account"];
    all.extend_from_slice(args);
    let o = fkge(&all, None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    json(&o)
}

#[test]
fn accounting_starts_at_zero_and_grows() {
    let zero = account(&["--q", "0.02", "--iterations", "0"]);
    assert_eq!(zero["epsilon"].as_f64().unwrap(), 0.0);
    let mut last = 0.0;
    for t in ["1", "10", "100", "1000"] {
        let e = account(&["--q", "0.02", "--iterations", t])["epsilon"].as_f64().unwrap();
        assert!(e > last, "{t}: {e} <= {last}");
        last = e;
    }
    let fewer = account(&["--q", "0.02", "--iterations", "100", "--releases", "0"])["epsilon"].as_f64().unwrap();
    let all = account(&["--q", "0.02", "--iterations", "100"])["epsilon"].as_f64().unwrap();
    assert!(fewer <= all);
    assert_eq!(code(&fkge(&["account", "--q", "2", "--iterations", "3"], None)), 2);
}

#[test]
fn accounting_matches_a_real_ledger() {
    let tmp = tempfile::tempdir().unwrap();
    let text = TINY
        .replace("rounds = 10", "rounds = 5")
        .replace("local_iters = 4", "local_iters = 20")
        .replace(r#"kinds = ["si", "cip", "cia"]"#, "kinds = []");
    let text = format!("{text}\n[defense]\nepsilon_budget = 1000.0\nadaptive = false\n");
    let cfg = write_config(tmp.path(), "dp.toml", &text);
    let run = train(&cfg, tmp.path());
    let ledgers: Value = serde_json::from_str(&fs::read_to_string(run.join("ledger.json")).unwrap()).unwrap();
    for l in ledgers.as_array().unwrap() {
        let events = l["events"].as_array().unwrap();
        let selections = events.iter().filter(|e| e["event"] == "selection").count();
        let releases = events.iter().filter(|e| e["event"] == "gradient").count();
        assert_eq!(selections, 100, "one selection event per private iteration");
        let q = events[0]["params"]["q"].as_f64().unwrap();
        let r = account(&[
            "--config",
            cfg.to_str().unwrap(),
            "--q",
            &q.to_string(),
            "--iterations",
            &selections.to_string(),
            "--releases",
            &releases.to_string(),
        ]);
        let from_ledger = l["summary"]["epsilon"].as_f64().unwrap();
        let from_account = r["epsilon"].as_f64().unwrap();
        assert!((from_ledger - from_account).abs() <= 1e-9, "{from_ledger} vs {from_account}");
    }
}
