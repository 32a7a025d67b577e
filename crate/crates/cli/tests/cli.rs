use std::process::Command;

fn seneca() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seneca"))
}

#[test]
fn toy_corpus_and_ingest_run_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# tiny\ntoy_size = 12\n").unwrap();
    let out = dir.path().join("run");
    for stage in ["make-toy-corpus", "ingest"] {
        let o = seneca()
            .args([stage, "--seed", "3", "--config"])
            .arg(&conf)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let raw = std::fs::read_to_string(out.join("raw.jsonl")).unwrap();
    assert_eq!(raw.lines().count(), 12);
    assert!(out.join("train.jsonl").exists());
}

#[test]
fn bad_stage_and_bad_config_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let o = seneca().arg("fly").arg("--out").arg(dir.path()).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("fly"));

    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "no_such_key = 1\n").unwrap();
    let o = seneca().arg("ingest").arg("--config").arg(&conf).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_key"));
}

#[test]
fn summarize_without_checkpoints_points_at_the_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let run = |stage: &str| seneca().args([stage, "--config"]).arg(dir.path().join("c.conf")).arg("--out").arg(&out).output().unwrap();
    std::fs::write(dir.path().join("c.conf"), "toy_size = 10\n").unwrap();
    assert!(run("make-toy-corpus").status.success());
    assert!(run("ingest").status.success());
    let o = run("summarize");
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("train-selector") || err.contains("make-labels"), "{err}");
}
