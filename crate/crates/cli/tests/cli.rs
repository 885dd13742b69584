use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn granulom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_granulom"))
        .arg("--quiet")
        .args(args)
        .output()
        .expect("spawn granulom")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Two tiny datasets with four features; feature 1 carries the label.
fn write_datasets(dir: &Path) -> (String, String) {
    let header = "sample_id,label,f0001,f0002,f0003,f0004\n";
    let mut train = String::from(header);
    let mut test = String::from(header);
    for i in 0..12 {
        let c = i % 3;
        let noise = (i * 37 % 11) as f64;
        train.push_str(&format!("t{i:02},c{c},{},{},{noise},{}\n", c * 10, i % 2, 11.0 - noise));
        test.push_str(&format!("e{i:02},c{c},{},{},{},{noise}\n", c * 10 + 1, i % 3, noise * 0.5));
    }
    let (a, b) = (dir.join("train.csv"), dir.join("test.csv"));
    fs::write(&a, train).unwrap();
    fs::write(&b, test).unwrap();
    (s(&a), s(&b))
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&granulom(&["--help"])), 0);
    assert_eq!(code(&granulom(&["--version"])), 0);
    assert_eq!(code(&granulom(&["knn", "--help"])), 0);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&granulom(&["--bogus"])), 1);
    assert_eq!(code(&granulom(&[])), 1);
    assert_eq!(code(&granulom(&["knn", "--train", "a.csv"])), 1);
}

#[test]
fn missing_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = s(&dir.path().join("nope.csv"));
    let out = granulom(&["knn", "--train", &missing, "--test", &missing, "--report", &s(&dir.path().join("r.csv"))]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_csv_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "sample_id,label,f0001\na,x,1.0\nb,y,oops\n").unwrap();
    let out = granulom(&["knn", "--train", &s(&bad), "--test", &s(&bad), "--report", &s(&dir.path().join("r.csv"))]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out.stderr.is_empty());
}

#[test]
fn knn_accepts_mask_string_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = write_datasets(dir.path());
    let mask_file = dir.path().join("mask.txt");
    fs::write(&mask_file, "1000\n").unwrap();
    let report = s(&dir.path().join("r.csv"));
    let knn = |mask: &str| granulom(&["knn", "--train", &train, "--test", &test, "--report", &report, "--mask", mask]);
    let by_string = knn("1000");
    let by_file = knn(&s(&mask_file));
    assert_eq!(code(&by_string), 0, "{}", String::from_utf8_lossy(&by_string.stderr));
    assert_eq!(by_string.stdout, by_file.stdout);
    let text = String::from_utf8_lossy(&by_string.stdout);
    assert!(text.contains("recognition_rate = 1"), "{text}");

    assert_eq!(code(&knn("10")), 2);
}

#[test]
fn select_then_knn_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = write_datasets(dir.path());
    let mask = s(&dir.path().join("mask.txt"));
    let summary = dir.path().join("ga.txt");
    let out = granulom(&[
        "select", "--train", &train, "--eval", &test, "--pop", "8", "--gens", "10", "--seed", "3", "--out", &mask,
        "--summary", &s(&summary),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(summary).unwrap();
    assert!(summary.contains("seed = 3"));
    let report = dir.path().join("report.csv");
    let out = granulom(&["knn", "--train", &train, "--test", &test, "--mask", &mask, "--report", &s(&report)]);
    assert_eq!(code(&out), 0);
    let lines = fs::read_to_string(report).unwrap();
    assert!(lines.starts_with("sample_id,true,predicted"));
    assert_eq!(lines.lines().count(), 13);
}

#[test]
fn pipeline_without_ga_writes_no_mask() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    let corpus = dir.path().join("corpus.cfg");
    fs::write(
        &corpus,
        "[corpus]\nname = tiny\nimage_size = 32\nseed = 5\n\n\
         [A]\nsamples = 6\nradius_min = 1\nradius_max = 2\nintensity_mean = 200\nintensity_spread = 20\n\
         background = 40\ndensity = 6\ntint = 1 1 1\n\n\
         [B]\nsamples = 6\nradius_min = 4\nradius_max = 5\nintensity_mean = 120\nintensity_spread = 20\n\
         background = 60\ndensity = 3\ntint = 1 0.8 0.6\n",
    )
    .unwrap();
    fs::write(&cfg, "[run]\nseed = 9\ncorpus = corpus.cfg\ntest_count = 4\nk = 1\n\n[ga]\nenabled = false\n").unwrap();
    let out_dir = dir.path().join("run");
    let out = granulom(&["pipeline", "--config", &s(&cfg), "--out", &s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("baseline_k1_table.txt").is_file());
    assert!(out_dir.join("summary.txt").is_file());
    assert!(!out_dir.join("mask.txt").exists());
    assert!(!out_dir.join("ga_summary.txt").exists());
}

#[test]
fn pipeline_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[run]\nseed = 1\npopulation = 3\n").unwrap();
    let out_dir = dir.path().join("run");
    let out = granulom(&["pipeline", "--config", &s(&cfg), "--out", &s(&out_dir)]);
    assert_eq!(code(&out), 1);
    assert!(!out_dir.exists());
}
