use std::path::Path;
use std::process::{Command, Output};

fn replan(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_replan"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn train_smoke_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "train", "--map", "16", "--gp", "dijkstra", "--lp", "dwa", "--steps", "2000", "--seed",
            "7", "--out", out,
        ]
    };
    let a = replan(&args("a"), dir.path());
    assert_eq!(
        a.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&a.stderr)
    );
    let stdout = String::from_utf8_lossy(&a.stdout);
    assert!(stdout.starts_with("effective config:"));
    assert!(stdout.contains("step 1000/2000") && stdout.contains("step 2000/2000"));
    assert!(dir.path().join("a/weights.bin").exists());
    assert!(dir.path().join("a/config.json").exists());
    let b = replan(&args("b"), dir.path());
    assert_eq!(b.status.code(), Some(0));
    let log_a = std::fs::read(dir.path().join("a/train_log.csv")).unwrap();
    let log_b = std::fs::read(dir.path().join("b/train_log.csv")).unwrap();
    assert_eq!(log_a, log_b);
    assert!(log_a.split(|&c| c == b'\n').count() > 2);
    assert_eq!(
        std::fs::read(dir.path().join("a/weights.bin")).unwrap(),
        std::fs::read(dir.path().join("b/weights.bin")).unwrap()
    );

    // the saved config reproduces the run
    let c = replan(
        &["train", "--config", "a/config.json", "--out", "c"],
        dir.path(),
    );
    assert_eq!(c.status.code(), Some(0));
    assert_eq!(
        log_a,
        std::fs::read(dir.path().join("c/train_log.csv")).unwrap()
    );
}

#[test]
fn unwritable_output_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("blocker"), "not a directory").unwrap();
    let o = replan(
        &[
            "train",
            "--steps",
            "50",
            "--warmup-steps",
            "10",
            "--out",
            "blocker/run",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(entries.len(), 1);
}

#[test]
fn battery_time_strategy_on_nine_pillars() {
    let dir = tempfile::tempdir().unwrap();
    let o = replan(
        &[
            "battery",
            "--map",
            "9",
            "--strategy",
            "time",
            "--trials",
            "100",
            "--seed",
            "0",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let rows = csv_rows(&dir.path().join("run/report.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][..4], ["9", "dijkstra", "dwa", "time"]);
    let nr: u64 = rows[0][12].parse().unwrap();
    assert!(nr > 0);
    assert!(dir.path().join("run/report.txt").exists());
    let traces = std::fs::read_dir(dir.path().join("run/traces"))
        .unwrap()
        .count();
    let aborted: usize = rows[0][5].parse().unwrap();
    assert_eq!(traces + aborted, 100);

    // every emitted trace verifies
    let r = replan(&["replay", "run/traces", "--out", "plots"], dir.path());
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
    assert!(String::from_utf8_lossy(&r.stdout).contains(&format!("{traces} trace(s) verified")));
}

#[test]
fn drl_battery_without_weights_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = replan(
        &["battery", "--strategy", "drl", "--trials", "2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("weights"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn no_replan_battery_reports_zero_replans() {
    let dir = tempfile::tempdir().unwrap();
    let o = replan(
        &[
            "battery",
            "--strategy",
            "none",
            "--trials",
            "3",
            "--no-traces",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("run/report.csv"));
    assert_eq!(rows[0][3], "none");
    assert_eq!(rows[0][12], "0");
}

#[test]
fn replay_detects_tampering_and_marks_replans() {
    let dir = tempfile::tempdir().unwrap();
    let o = replan(
        &[
            "eval",
            "--strategy",
            "time",
            "--trials",
            "1",
            "--seed",
            "4",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let trace = dir.path().join("run/traces/time_seed000004.trace");

    let ok = replan(
        &["replay", trace.to_str().unwrap(), "--out", "plots"],
        dir.path(),
    );
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let plot = csv_rows(&dir.path().join("plots/time_seed000004.plot.csv"));
    let markers = plot.iter().filter(|r| r[0] == "replan").count();
    let eps = csv_rows(&dir.path().join("run/episodes.csv"));
    let nr: usize = eps[0][7].parse().unwrap();
    assert_eq!(markers, nr);

    // nudge the robot x of one record in the middle of the body
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let k = lines.len() / 2;
    let mut fields: Vec<String> = lines[k].split(',').map(str::to_string).collect();
    let x: f64 = fields[4].parse().unwrap();
    fields[4] = (x + 1e-6).to_string();
    lines[k] = fields.join(",");
    let bad = dir.path().join("bad.trace");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let o = replan(
        &["replay", bad.to_str().unwrap(), "--out", "plots"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains(&format!("line {}", k + 1)));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        replan(&["battery", "--map", "12"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(replan(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(replan(&["--help"], dir.path()).status.code(), Some(0));
}
