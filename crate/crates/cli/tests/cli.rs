use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use captionlab::formats;

const TINY: &str = "\
n_train = 40
n_test = 10
hidden = 8
retriever_dim = 16
pretrain_epochs = 1
epochs = 1
batch_size = 10
mined_m = 2
max_len = 10
disc_width = 8
disc_pretrain_steps = 10
probe_steps = 5
";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_captionlab"))
        .args(args)
        .env("CAPLAB_WORKERS", "1")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tiny_config(dir: &Path) -> String {
    let p = dir.join("tiny.cfg");
    fs::write(&p, TINY).unwrap();
    p.display().to_string()
}

#[test]
fn missing_config_flag_prints_usage() {
    let o = run(&["train", "--objective", "tf"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn unreadable_or_invalid_config_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["generate", "--config", "/nonexistent/x.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot read config"));

    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "learning_rate = 3\n").unwrap();
    let o = run(&["generate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learning_rate"));

    let cfg = tiny_config(dir.path());
    let o = run(&["generate", "--config", &cfg, "--preset", "huge"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_objective_lists_the_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let o = run(&["train", "--config", &cfg, "--objective", "ppo"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for name in ["tf", "wtf", "rl", "wtf_rl", "rl_uni", "scst_disc", "rl_noreg"] {
        assert!(err.contains(name), "{name} missing from {err}");
    }
}

#[test]
fn generate_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["generate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["world.tsv", "retriever.txt", "image_embeddings.txt", "config.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let text = fs::read_to_string(a.join("world.tsv")).unwrap();
    let world = formats::world_from_str(&text).unwrap();
    assert_eq!(world.len(), 50);
    assert_eq!(formats::world_to_string(&world), text);

    let o = run(&["generate", "--config", &cfg, "--seed", "8", "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(fs::read(a.join("world.tsv")).unwrap(), fs::read(b.join("world.tsv")).unwrap());
}

#[test]
fn train_from_generated_data_and_merge_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let data = dir.path().join("data");
    assert_eq!(run(&["generate", "--config", &cfg, "--out", data.to_str().unwrap()]).status.code(), Some(0));

    let results = dir.path().join("results");
    let mut rows = 0;
    for (name, objective) in [("r1", "tf"), ("r2", "wtf_rl")] {
        let out = results.join(name);
        let o = run(&[
            "train",
            "--config",
            &cfg,
            "--objective",
            objective,
            "--data",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
        assert!(manifest.contains("status = complete"));
        let curve = fs::read_to_string(out.join("curve.csv")).unwrap();
        rows += curve.lines().filter(|l| !l.starts_with('#')).count() - 1;
        let ck = formats::Checkpoint::from_text(&fs::read_to_string(out.join("policy.ckpt")).unwrap()).unwrap();
        formats::policy_from_checkpoint(&ck).unwrap();
    }
    let merged = dir.path().join("merged.csv");
    let o = run(&["report", results.to_str().unwrap(), "--out", merged.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&merged).unwrap();
    assert_eq!(text.lines().count() - 1, rows);
    assert!(text.lines().skip(1).any(|l| l.starts_with("r2,wtf_rl,")));

    // a world that does not match the config is refused
    let other = dir.path().join("other.cfg");
    fs::write(&other, TINY.replace("n_test = 10", "n_test = 12")).unwrap();
    let o = run(&["train", "--config", other.to_str().unwrap(), "--objective", "tf", "--data", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn report_on_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no curve.csv"));
    assert_eq!(run(&["report", "/nonexistent/results"]).status.code(), Some(1));
}

#[test]
fn unwritable_output_is_an_internal_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = run(&["generate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_worker_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_captionlab"))
        .args(["report", "."])
        .env("CAPLAB_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("CAPLAB_WORKERS"));
}
