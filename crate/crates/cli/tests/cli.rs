use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn nlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlp")).args(args).env_remove("NLP_THREADS").output().unwrap()
}

fn text(o: &[u8]) -> String {
    String::from_utf8_lossy(o).into_owned()
}

fn csv_rows(dir: &Path, stem: &str) -> Vec<String> {
    let s = std::fs::read_to_string(dir.join(format!("{stem}.csv"))).unwrap();
    s.lines().skip(1).map(str::to_owned).collect()
}

#[test]
fn kernel_check_passes_with_six_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("default.toml");
    let out = nlp(&["check", "kernel", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert_eq!(csv_rows(dir.path(), "kernel").len(), 6);
    assert!(dir.path().join("kernel.json").exists());
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cfg = config("default.toml");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = nlp(&["check", "kernel", "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap(), "--threads", "1"]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("kernel.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn short_truncation_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("underresolved.toml");
    let out = nlp(&["check", "pressure", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("far field under-resolved"), "{}", text(&out.stderr));
}

#[test]
fn bad_invocations_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let out = nlp(&["check", "kernel", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let typo = dir.path().join("typo.toml");
    std::fs::write(&typo, "name = \"x\"\n[grid]\nhalf_width = 4.0\nn = 32\nnodes = 3\n").unwrap();
    let out = nlp(&["check", "kernel", "--config", typo.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = config("default.toml");
    assert_eq!(nlp(&["check", "bogus", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(nlp(&["check", "kernel"]).status.code(), Some(2));
    assert_eq!(nlp(&["field", "info", typo.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn coarse_equivalence_dumps_fields_quickly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("default.toml");
    let start = Instant::now();
    let out = nlp(&[
        "equivalence", "--config", cfg.to_str().unwrap(), "--grid", "16", "--dump-fields", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(start.elapsed() < Duration::from_secs(60));
    // the coarse grid is too coarse for the refinement rule of (b); anything but a usage error is fine
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", text(&out.stderr));
    let fields = dir.path().join("fields");
    assert!(fields.join("velocity.manifest.json").exists());
    let first = std::fs::read_dir(&fields)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "nlpf"))
        .unwrap();
    let info = nlp(&["field", "info", first.to_str().unwrap()]);
    assert_eq!(info.status.code(), Some(0));
    let s = text(&info.stdout);
    assert!(s.contains("nlp-field") && s.contains("finite     true"), "{s}");
}

#[test]
fn default_equivalence_passes_with_flagged_parasitic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("default.toml");
    let out = nlp(&["equivalence", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}{}", text(&out.stdout), text(&out.stderr));
    let rows = csv_rows(dir.path(), "equivalence");
    let row = |name: &str| rows.iter().find(|r| r.starts_with(name)).cloned().unwrap();
    assert!(row("equivalence.a_mild,").ends_with(",true"));
    assert!(row("equivalence.b_nse_dlpe,").ends_with(",true"));
    assert!(row("equivalence.c_parasitic_mild,").ends_with("expected-failure: parasitic"));
}
