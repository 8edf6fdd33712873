use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hamkoop_cli::store::{load_dataset, load_json, Checkpoint};
use hamkoop::latentham::LatentHamiltonian;

fn hamkoop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamkoop"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hamkoop(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const SMALL_OSC: &str = r#"
system = "oscillator"
seed = 4
out = "run"

[training]
epochs = 3

[protocol]
kind = "sampled"
bounds = [[-2.0, 2.0], [-2.0, 2.0]]
energy_cap = 1.0
train_count = 4
train_grid = { t_end = 4.0, points = 20 }
test_count = 3
test_grid = { t_end = 5.0, points = 100 }
"#;

#[test]
fn pendulum_preset_dataset_shape() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-data", "--preset", "pendulum", "--out", "p"]);
    let (manifest, ds) = load_dataset(&dir.path().join("p/data")).unwrap();
    assert_eq!(manifest.n, 1);
    assert_eq!(ds.train.len(), 20);
    assert!(ds.train.iter().all(|t| t.len() == 25 && (t.times[24] - 20.0).abs() < 1e-12));
    assert_eq!(ds.test.len(), 25);
    assert!(ds.test.iter().all(|t| t.len() == 2500));
}

#[test]
fn train_writes_the_matching_latent_block() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL_OSC).unwrap();
    ok(dir.path(), &["gen-data", "--config", "c.toml"]);
    for (variant, quadratic_sos) in [("s-linear-embs", true), ("quad-embs", false)] {
        ok(dir.path(), &["train", "--config", "c.toml", "--variant", variant]);
        let ckpt: Checkpoint = load_json(&dir.path().join(format!("run/model-{variant}.json"))).unwrap();
        match (&ckpt.model.latent, quadratic_sos) {
            (LatentHamiltonian::Sos(s), true) => assert_eq!(s.kind, hamkoop::SosKind::Quadratic),
            (LatentHamiltonian::Cubic(_), false) => {}
            other => panic!("unexpected latent block {other:?}"),
        }
        let text = fs::read_to_string(dir.path().join(format!("run/model-{variant}.json"))).unwrap();
        assert!(text.contains("\"form\": \"sos\"") == quadratic_sos);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL_OSC).unwrap();
    let files = [
        "run/data/train-000.csv",
        "run/data/test-002.csv",
        "run/data/manifest.toml",
        "run/model-s-cubic-embs.json",
        "run/history-s-cubic-embs.csv",
        "run/eval-s-cubic-embs/errors.csv",
        "run/eval-s-cubic-embs/timeseries.csv",
    ];
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        for cmd in ["gen-data", "train", "eval"] {
            ok(dir.path(), &[cmd, "--config", "c.toml"]);
        }
        snapshots.push(files.map(|f| fs::read(dir.path().join(f)).unwrap()));
        fs::remove_dir_all(dir.path().join("run")).unwrap();
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn checkpoint_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL_OSC).unwrap();
    ok(dir.path(), &["gen-data", "--config", "c.toml"]);
    ok(dir.path(), &["train", "--config", "c.toml"]);
    let path = dir.path().join("run/model-s-cubic-embs.json");
    let ckpt: Checkpoint = load_json(&path).unwrap();
    let again = hamkoop_cli::store::to_json_text(&ckpt).unwrap();
    assert_eq!(again, fs::read_to_string(&path).unwrap());
    let back: Checkpoint = serde_json::from_str(&again).unwrap();
    assert_eq!(back, ckpt);
}

#[test]
fn invalid_config_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "system = \"pendulum\"\nout = \"x\"\nepochz = 1\n").unwrap();
    let out = hamkoop(dir.path(), &["gen-data", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
    fs::write(
        dir.path().join("bad2.toml"),
        "system = \"pendulum\"\nout = \"x\"\n[training]\nepochs = 0\n",
    )
    .unwrap();
    let out = hamkoop(dir.path(), &["gen-data", "--config", "bad2.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("x").exists());
}

#[test]
fn zero_pod_rank_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), "system = \"nls\"\nout = \"n\"\n[pod]\nrank = 0\n").unwrap();
    let out = hamkoop(dir.path(), &["pod", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("n").exists());
}

#[test]
fn empty_test_set_and_plot_flag() {
    let dir = tempfile::tempdir().unwrap();
    let no_test = SMALL_OSC.replace("test_count = 3", "test_count = 0");
    fs::write(dir.path().join("c.toml"), &no_test).unwrap();
    ok(dir.path(), &["gen-data", "--config", "c.toml"]);
    ok(dir.path(), &["train", "--config", "c.toml"]);
    let out = hamkoop(dir.path(), &["eval", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no test ICs"));

    fs::write(dir.path().join("c.toml"), SMALL_OSC).unwrap();
    fs::remove_dir_all(dir.path().join("run")).unwrap();
    ok(dir.path(), &["gen-data", "--config", "c.toml"]);
    ok(dir.path(), &["train", "--config", "c.toml"]);
    ok(dir.path(), &["eval", "--config", "c.toml"]);
    let eval_dir = dir.path().join("run/eval-s-cubic-embs");
    let svgs = |d: &Path| fs::read_dir(d).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg")).count();
    assert_eq!(svgs(&eval_dir), 0);
    let errors = fs::read_to_string(eval_dir.join("errors.csv")).unwrap();
    assert_eq!(errors.lines().count(), 1 + 3);
    ok(dir.path(), &["plot", "--config", "c.toml"]);
    assert_eq!(svgs(&eval_dir), 4);
    ok(dir.path(), &["rollout", "--config", "c.toml"]);
    assert!(dir.path().join("run/rollout-s-cubic-embs/bounds.csv").exists());
}

#[test]
fn missing_inputs_and_bad_flags_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hamkoop(dir.path(), &["train", "--preset", "pendulum"]).status.code(), Some(1));
    assert_eq!(hamkoop(dir.path(), &["train", "--preset", "moon"]).status.code(), Some(1));
    assert_eq!(hamkoop(dir.path(), &["eval"]).status.code(), Some(1));
    assert_eq!(hamkoop(dir.path(), &["pod", "--preset", "pendulum"]).status.code(), Some(1));
}
