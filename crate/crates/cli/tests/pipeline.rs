//! End-to-end behaviour of the `sentprobe` binary.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

const BASE_CONFIG: &str = "seed = 4\ncorpus.path = corpus.txt\ncorpus.validation = 50\nsplit.train = 300\n\
split.dev = 100\nsplit.test = 100\nencoder.0.type = cbow\nencoder.0.dims = 8\nencoder.1.type = ed\n\
encoder.1.dims = 8\ned.max_epochs = 2\nprobe.max_epochs = 10\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sentprobe"))
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    common::write_corpus(&dir.path().join("corpus.txt"), &common::toy_language(700, 20, 15, 3));
    fs::write(dir.path().join("exp.conf"), config).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().args(["--config", "exp.conf"]).args(args).current_dir(dir).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn mtime(p: PathBuf) -> std::time::SystemTime {
    fs::metadata(p).unwrap().modified().unwrap()
}

#[test]
fn rerun_skips_finished_stages() {
    let dir = setup(BASE_CONFIG);
    let first = run(dir.path(), &["run"]);
    assert!(first.status.success(), "{}", stderr(&first));
    let ckpt = dir.path().join("runs/desk/encoders/ed-8.ckpt");
    let cell = dir.path().join("runs/desk/cells/ed-8.order.json");
    let (m1, c1) = (mtime(ckpt.clone()), mtime(cell.clone()));
    let report1 = fs::read(dir.path().join("runs/desk/report/report.csv")).unwrap();

    let second = run(dir.path(), &["run"]);
    assert!(second.status.success());
    let log = stderr(&second);
    for line in ["prepare: up to date", "cbow-8: up to date", "ed-8: up to date", "ed-8.order: up to date"] {
        assert!(log.contains(line), "missing `{line}` in:\n{log}");
    }
    assert!(!log.contains("epoch"), "retrained:\n{log}");
    assert_eq!((mtime(ckpt), mtime(cell)), (m1, c1));
    assert_eq!(fs::read(dir.path().join("runs/desk/report/report.csv")).unwrap(), report1);
}

#[test]
fn changed_probe_settings_rerun_only_the_probes() {
    let dir = setup(BASE_CONFIG);
    assert!(run(dir.path(), &["run"]).status.success());
    fs::write(dir.path().join("exp.conf"), format!("{BASE_CONFIG}probe.lr = 0.02\n")).unwrap();
    let o = run(dir.path(), &["run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let log = stderr(&o);
    assert!(log.contains("ed-8: up to date") && !log.contains("ed-8.length: up to date"), "{log}");
}

#[test]
fn stages_enforce_their_preconditions() {
    let dir = setup(BASE_CONFIG);
    let o = run(dir.path(), &["run-tasks"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("prepare"), "{}", stderr(&o));
    assert!(run(dir.path(), &["prepare"]).status.success());
    let o = run(dir.path(), &["run-tasks"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("train-encoder"), "{}", stderr(&o));
    let o = run(dir.path(), &["train-encoder", "--encoder", "cbow-8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("runs/desk/encoders/cbow-8.ckpt").is_file());
    assert!(!dir.path().join("runs/desk/encoders/ed-8.ckpt").exists());
    let o = run(dir.path(), &["train-encoder", "--encoder", "ed-99"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validation_errors_exit_with_one_and_name_the_line() {
    let dir = setup(&format!("{BASE_CONFIG}probe.dropout = 2\n"));
    let o = run(dir.path(), &["prepare"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 13"), "{}", stderr(&o));
    let o = bin().args(["prepare"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin().args(["--jobs", "x", "prepare"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn report_refuses_tampered_artifacts() {
    let dir = setup(BASE_CONFIG);
    assert!(run(dir.path(), &["run"]).status.success());
    let bits = dir.path().join("runs/desk/cells/cbow-8.content.bits");
    let mut b = fs::read(&bits).unwrap();
    b[0] = if b[0] == b'0' { b'1' } else { b'0' };
    fs::write(&bits, b).unwrap();
    let o = run(dir.path(), &["report"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cbow-8.content.bits"), "{}", stderr(&o));
}

#[test]
fn report_covers_every_cell_and_the_control_grid() {
    let dir = setup(&format!(
        "{BASE_CONFIG}controls.permuted = true\ncontrols.synthetic = true\ncontrols.order_no_sentence = true\n"
    ));
    let o = run(dir.path(), &["--jobs", "2", "run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("runs/desk/report/report.csv")).unwrap();
    let cells = fs::read_dir(dir.path().join("runs/desk/cells"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "json"))
        .count();
    assert_eq!(csv.lines().count() - 1, cells);
    for task in ["length", "content", "order", "order_no_sentence", "length:permuted", "order:permuted", "length:synthetic"] {
        for enc in ["cbow", "ed"] {
            assert!(csv.lines().any(|l| l.starts_with(&format!("{task},{enc},8,"))), "no {task}/{enc} row");
        }
    }
    let sig = fs::read_to_string(dir.path().join("runs/desk/report/significance.csv")).unwrap();
    assert!(sig.lines().any(|l| l.starts_with("order,ed_vs_cbow,ed-8,cbow-8,")), "{sig}");
    assert!(dir.path().join("runs/desk/report/norm_length.csv").is_file());
    assert!(dir.path().join("runs/desk/report/content_by_length.csv").is_file());
}

#[test]
fn external_vectors_are_probed_and_labelled() {
    let dir = setup("");
    let toks = common::toy_language(700, 20, 15, 3);
    let mut sv = String::new();
    for (i, t) in toks.iter().enumerate() {
        // a crude length-aware sentence vector
        sv.push_str(&format!("{{\"id\": {i}, \"v\": [{}, {}, 1.0]}}\n", t.len(), 1.0 / t.len() as f64));
    }
    fs::write(dir.path().join("sent.jsonl"), sv).unwrap();
    fs::write(
        dir.path().join("exp.conf"),
        "seed = 4\ncorpus.path = corpus.txt\ncorpus.validation = 50\nsplit.train = 300\nsplit.dev = 100\n\
         split.test = 100\ntasks = length\nencoder.0.type = external\nencoder.0.sentences = sent.jsonl\n\
         probe.max_epochs = 10\n",
    )
    .unwrap();
    let o = run(dir.path(), &["run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("runs/desk/report/report.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("length,external,3,test,"), "{row}");
    assert!(row.ends_with(",0.821"), "{row}");
    assert!(stderr(&o).contains("significance tests skipped"));
}

#[test]
fn interrupted_training_resumes_to_the_same_model() {
    let config = BASE_CONFIG.replace("ed.max_epochs = 2", "ed.max_epochs = 8\ned.patience = 100");
    let reference = setup(&config);
    assert!(run(reference.path(), &["prepare"]).status.success());
    assert!(run(reference.path(), &["train-encoder", "--encoder", "ed-8"]).status.success());

    let dir = setup(&config);
    assert!(run(dir.path(), &["prepare"]).status.success());
    let state = dir.path().join("runs/desk/encoders/ed-8.state.ckpt");
    let mut child = bin()
        .args(["--config", "exp.conf", "train-encoder", "--encoder", "ed-8"])
        .current_dir(dir.path())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let t0 = Instant::now();
    while !state.exists() && t0.elapsed() < Duration::from_secs(60) {
        std::thread::sleep(Duration::from_millis(5));
    }
    child.kill().ok();
    child.wait().unwrap();
    assert!(state.exists(), "training finished before it could be interrupted");

    let o = run(dir.path(), &["train-encoder", "--encoder", "ed-8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let log = stderr(&o);
    assert!(log.contains("resuming after epoch"), "{log}");
    let read = |d: &Path| fs::read(d.join("runs/desk/encoders/ed-8.ckpt")).unwrap();
    assert_eq!(read(dir.path()), read(reference.path()));
    assert!(!state.exists());
}

#[test]
fn selfcheck_passes() {
    let o = bin().arg("selfcheck").output().unwrap();
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 8, "{out}");
}
