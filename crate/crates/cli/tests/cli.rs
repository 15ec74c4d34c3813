use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_v2v-isac")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn validate_accepts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "[run]\nscenario = \"normal\"\nagent = \"a2c\"\n");
    let out = bin(&["validate", "--config", s(&good)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("scenario normal"));

    let bad = write_config(dir.path(), "[channel]\nper_probs = [0.5, 0.5]\n");
    let out = bin(&["validate", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("channel.per_probs"));

    let unknown = write_config(dir.path(), "[env]\nw9 = 1.0\n");
    assert_eq!(bin(&["validate", "--config", s(&unknown)]).status.code(), Some(1));
}

#[test]
fn missing_file_is_a_runtime_error() {
    let out = bin(&["validate", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_eval_postprocess() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[run]\nlog_interval = 10\n");
    let run = dir.path().join("run");
    let out = bin(&[
        "train", "--config", s(&cfg), "--agent", "a2c", "--scenario", "poor", "--reward", "queue", "--seed", "3",
        "--iters", "200", "--episodes", "2", "--out", s(&run),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 21);
    assert!(metrics.starts_with("episode,iteration,reward,"));

    let eval = dir.path().join("eval");
    let ckpt = run.join("checkpoint.txt");
    let out = bin(&["eval", "--config", s(&cfg), "--checkpoint", s(&ckpt), "--out", s(&eval)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(eval.join("eval_metrics.csv").exists());

    let post = dir.path().join("post.csv");
    let out = bin(&["postprocess", "--in", s(&run.join("metrics.csv")), "--out", s(&post)]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&post).unwrap();
    for line in text.lines().skip(1) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn eval_with_mismatched_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let ckpt = dir.path().join("bad.txt");
    fs::write(&ckpt, "isac-checkpoint 1\nshape input=2 hidden=3 mod=4 frames=100\nend\n").unwrap();
    let out = bin(&["eval", "--config", s(&cfg), "--checkpoint", s(&ckpt), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}
