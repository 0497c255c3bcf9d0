use std::path::Path;
use std::process::{Command, Output};

fn regionscope(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regionscope"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("REGIONSCOPE_CACHE_DIR", out.join("cache"))
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn fetch_fixture_then_detect_from_merged_table() {
    let dir = tempfile::tempdir().unwrap();
    let fetched = regionscope(dir.path(), &["fetch", "--fixture", "appendix_a1"]);
    assert!(fetched.status.success(), "{}", stderr(&fetched));
    assert!(dir.path().join("data/merged.csv").is_file());

    let detected = regionscope(dir.path(), &["detect"]);
    assert!(detected.status.success(), "{}", stderr(&detected));
    let text = stdout(&detected);
    assert!(text.contains("wrote"), "{text}");
    for f in ["report.json", "flags.csv", "scores.csv", "pca_scatter.svg"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    // The merged table carries no reference votes, and nothing reaches three votes.
    assert!(!dir.path().join("heatmap.svg").exists());

    let reported = regionscope(dir.path(), &["report"]);
    assert!(reported.status.success(), "{}", stderr(&reported));
    let text = stdout(&reported);
    assert!(text.contains("Mahalanobis distance"), "{text}");
    assert!(text.contains("heatmap skipped"), "{text}");
}

#[test]
fn detect_without_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = regionscope(dir.path(), &["detect"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("regionscope fetch"));
}

#[test]
fn invalid_configuration_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &[
            "detect",
            "--fixture",
            "appendix_a1",
            "--contamination",
            "0.6",
        ][..],
        &["detect", "--fixture", "appendix_a1", "--set", "lof.k=zero"][..],
        &["detect", "--fixture", "nonexistent"][..],
        &["frobnicate"][..],
    ] {
        let o = regionscope(dir.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn offline_cold_cache_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = regionscope(dir.path(), &["fetch", "--offline"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("https://"), "{}", stderr(&o));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("regionscope.conf");
    std::fs::write(
        &config,
        "# test\nseed = 7\nvote_threshold = 2\nfixture = appendix_a1\n",
    )
    .unwrap();
    let cfg = config.to_str().unwrap();

    let o = regionscope(dir.path(), &["detect", "--config", cfg, "--seed", "9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(value["provenance"]["seed"], 9);
    assert_eq!(value["flag_table"]["threshold"], 2);
}

#[test]
fn bad_config_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "seed = 1\nnot a setting\n").unwrap();
    let o = regionscope(
        dir.path(),
        &["detect", "--config", config.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn corrupt_report_names_the_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    std::fs::write(&path, "{\n  \"methods\": [\n    oops\n").unwrap();
    let o = regionscope(dir.path(), &["report"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}
