use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sentidrift"));
    cmd.env_remove("SENTIDRIFT_LEXICON");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/reference_window_scores.csv")
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn synth_corpus(dir: &Path, count: usize) -> PathBuf {
    let path = dir.join("corpus.csv");
    let out = run(&[
        "synth",
        "--count",
        &count.to_string(),
        "--seed",
        "5",
        "--output",
        p(&path),
    ]);
    assert!(out.status.success());
    path
}

/// Expands the window-score fixture into comments whose windows of 100
/// reproduce each score exactly.
fn reference_comments(dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(fixture()).unwrap();
    let mut csv = String::from("id,timestamp,text,label,topic\n");
    let mut n = 0u64;
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let net = (cells[2].parse::<f64>().unwrap() * 100.0).round() as i64;
        let (pos, neg) = if net >= 0 { (net as u64, 0) } else { (0, (-net) as u64) };
        for i in 0..100u64 {
            let label = if i < pos {
                "positive"
            } else if i < pos + neg {
                "negative"
            } else {
                "neutral"
            };
            csv.push_str(&format!("c{n},{},comment {n},{label},Late Flight\n", 1_424_044_800 + n));
            n += 1;
        }
    }
    let path = dir.join("reference_comments.csv");
    std::fs::write(&path, csv).unwrap();
    path
}

#[test]
fn help_lists_flags_with_defaults() {
    let top = run(&["--help"]);
    assert!(top.status.success());
    let top = String::from_utf8(top.stdout).unwrap();
    for sub in ["run", "score", "windows", "detect", "report", "render"] {
        assert!(top.contains(sub), "{sub} missing from top-level help");
    }
    assert!(!top.contains("synth"));

    for sub in ["run", "score", "windows", "detect", "report", "render"] {
        let out = run(&[sub, "--help"]);
        assert!(out.status.success(), "{sub} --help");
        let help = String::from_utf8(out.stdout).unwrap();
        for flag in ["--input", "--format", "--out", "--quiet"] {
            assert!(help.contains(flag), "{sub}: {flag}");
        }
        assert!(help.contains("[default: out]"), "{sub}");
    }
    let help = String::from_utf8(run(&["run", "--help"]).stdout).unwrap();
    for expected in [
        "[default: passthrough]",
        "[default: count]",
        "[default: 100]",
        "[default: 1d]",
        "[default: drop]",
        "[default: 1.5]",
        "--threshold-override",
        "--history",
        "--lexicon",
        "--all-labels",
        "--topics",
        "--include-unlabeled",
        "--stream",
    ] {
        assert!(help.contains(expected), "run help lacks {expected}");
    }
    assert!(String::from_utf8(run(&["detect", "--help"]).stdout)
        .unwrap()
        .contains("--fail-on-anomaly"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth_corpus(dir.path(), 10);
    for args in [
        vec!["run", "--input", p(&input), "--window-size", "0"],
        vec!["run", "--input", p(&input), "--no-such-flag"],
        vec!["run", "--input", p(&input), "--alpha", "0"],
        vec!["run", "--input", p(&input), "--scorer", "bert"],
        vec![
            "run",
            "--input",
            p(&input),
            "--window-mode",
            "time",
            "--window-duration",
            "0s",
        ],
        vec![
            "run",
            "--input",
            p(&input),
            "--window-mode",
            "time",
            "--origin",
            "yesterday",
        ],
        vec!["run"],
        vec!["frobnicate"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = run(&["run", "--input", p(&input), "--window-size", "0"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--window-size"));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(run(&["run", "--input", p(&missing)]).status.code(), Some(1));

    let odd = dir.path().join("data.txt");
    std::fs::write(&odd, "x").unwrap();
    let out = run(&["run", "--input", p(&odd), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--format"));

    let no_text = dir.path().join("bad.csv");
    std::fs::write(&no_text, "timestamp,label\n1,positive\n").unwrap();
    let out = run(&["run", "--input", p(&no_text), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("text"));
}

#[test]
fn happy_path_run() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth_corpus(dir.path(), 2_000);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--input",
        p(&input),
        "--window-mode",
        "count",
        "--window-size",
        "100",
        "--alpha",
        "1.5",
        "--out",
        p(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("20 windows"));
    for name in [
        "summary.json",
        "ingest_summary.json",
        "row_errors.jsonl",
        "window_scores.csv",
        "topic_scores.csv",
        "anomalies.json",
        "before_after.csv",
        "reason_distribution.csv",
        "heatmap.csv",
        "topic_trajectories.csv",
        "trajectory.svg",
        "delta.svg",
    ] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    let summary = json(&out_dir.join("summary.json"));
    assert_eq!(summary["accepted"], 2_000);
    assert_eq!(summary["windows"], 20);
    assert_eq!(summary["config_echo"]["window"]["size"], 100);
    assert_eq!(summary["config_echo"]["threshold"]["alpha"], 1.5);
    let anomalies = json(&out_dir.join("anomalies.json"));
    assert_eq!(
        anomalies["anomalies"].as_array().unwrap().len(),
        summary["anomalies"].as_u64().unwrap() as usize
    );
}

#[test]
fn quiet_silences_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth_corpus(dir.path(), 300);
    let out = run(&[
        "run",
        "--quiet",
        "--input",
        p(&input),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert!(out.status.success());
    assert!(out.stderr.is_empty());
}

#[test]
fn empty_input_is_success_with_insufficient_data() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.jsonl");
    std::fs::write(&input, "").unwrap();
    let out_dir = dir.path().join("o");
    let out = run(&["run", "--input", p(&input), "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(0));
    let summary = json(&out_dir.join("summary.json"));
    assert_eq!(summary["windows"], 0);
    assert_eq!(summary["insufficient_data"], true);
    assert!(summary["tau"].is_null());
}

#[test]
fn detect_on_reference_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "detect",
        "--input",
        p(&fixture()),
        "--threshold-override",
        "-0.1693",
        "--out",
        p(dir.path()),
        "--fail-on-anomaly",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 12);
    assert!(table.contains("57,-0.02,-0.39,-0.37"));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("before_after.csv")).unwrap(),
        table
    );

    let out = run(&[
        "detect",
        "--input",
        p(&fixture()),
        "--threshold-override=-0.1693",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));

    // A threshold below every delta flags nothing, so --fail-on-anomaly passes.
    let out = run(&[
        "detect",
        "--input",
        p(&fixture()),
        "--threshold-override",
        "-1",
        "--out",
        p(dir.path()),
        "--fail-on-anomaly",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        json(&dir.path().join("anomalies.json"))["anomalies"]
            .as_array()
            .unwrap()
            .len(),
        0
    );
}

#[test]
fn detect_history_mode_reports_per_row_tau() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "detect",
        "--input",
        p(&fixture()),
        "--history",
        "10",
        "--out",
        p(dir.path()),
    ]);
    assert!(out.status.success());
    let report = json(&dir.path().join("anomalies.json"));
    assert_eq!(report["history"], 10);
    for row in report["anomalies"].as_array().unwrap() {
        assert!(row["delta"].as_f64().unwrap() < row["tau"].as_f64().unwrap());
    }
}

#[test]
fn full_run_on_reference_comments() {
    let dir = tempfile::tempdir().unwrap();
    let input = reference_comments(dir.path());
    let out_dir = dir.path().join("o");
    let out = run(&[
        "run",
        "--quiet",
        "--input",
        p(&input),
        "--threshold-override",
        "-0.1693",
        "--out",
        p(&out_dir),
    ]);
    assert!(out.status.success());
    let summary = json(&out_dir.join("summary.json"));
    assert_eq!(summary["windows"], 141);
    assert_eq!(summary["anomalies"], 11);
    assert_eq!(summary["tau"], -0.1693);
    let expected = std::fs::read(out_dir.join("window_scores.csv")).unwrap();
    let reread = String::from_utf8(expected).unwrap();
    assert!(reread.contains("\n57,100,-0.39,false\n"));
}

#[test]
fn stream_mode_matches_batch() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth_corpus(dir.path(), 3_000);
    let batch = dir.path().join("batch");
    let stream = dir.path().join("stream");
    assert!(run(&["run", "--quiet", "--input", p(&input), "--out", p(&batch)])
        .status
        .success());
    assert!(
        run(&["run", "--quiet", "--stream", "--input", p(&input), "--out", p(&stream)])
            .status
            .success()
    );
    assert_eq!(
        std::fs::read(batch.join("anomalies.json")).unwrap(),
        std::fs::read(stream.join("anomalies.json")).unwrap()
    );
    let events = std::fs::read_to_string(stream.join("events.jsonl")).unwrap();
    assert_eq!(events.lines().count(), 30);
    let first: Value = serde_json::from_str(events.lines().next().unwrap()).unwrap();
    assert_eq!(first["event"], "window");
    assert!(first["decision"].is_null());
}

#[test]
fn lexicon_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.jsonl");
    std::fs::write(
        &input,
        concat!(
            "{\"id\": \"a\", \"timestamp\": \"2015-02-16T10:00:00Z\", \"text\": \"wonderful crew\"}\n",
            "{\"id\": \"b\", \"timestamp\": \"2015-02-16T11:00:00Z\", \"text\": \"awful crew\"}\n",
            "{\"id\": \"c\", \"timestamp\": \"2015-02-16T12:00:00Z\", \"text\": \"crew\"}\n",
        ),
    )
    .unwrap();
    let lexicon = dir.path().join("lex.txt");
    std::fs::write(&lexicon, "[positive]\nwonderful\n[negative]\nawful\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = bin()
        .args([
            "score",
            "--scorer",
            "lexicon",
            "--input",
            p(&input),
            "--out",
            p(&out_dir),
        ])
        .env("SENTIDRIFT_LEXICON", &lexicon)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let scored = std::fs::read_to_string(out_dir.join("scored_comments.csv")).unwrap();
    let labels: Vec<&str> = scored.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(labels, ["positive", "negative", "neutral"]);

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "[positive]\nfine\n[negative]\nfine\n").unwrap();
    let out = bin()
        .args([
            "score",
            "--scorer",
            "lexicon",
            "--input",
            p(&input),
            "--out",
            p(&out_dir),
        ])
        .env("SENTIDRIFT_LEXICON", &bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn windows_in_time_mode() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.csv");
    std::fs::write(
        &input,
        "timestamp,text,label\n\
         2015-02-16T01:00:00Z,a,positive\n\
         2015-02-16T23:59:59Z,b,negative\n\
         2015-02-17T00:00:00Z,c,negative\n\
         2015-02-19T08:00:00Z,d,positive\n",
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    let out = run(&[
        "windows",
        "--input",
        p(&input),
        "--window-mode",
        "time",
        "--window-duration",
        "1d",
        "--out",
        p(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let scores = std::fs::read_to_string(out_dir.join("window_scores.csv")).unwrap();
    assert_eq!(
        scores,
        "window,count,score,gap_before\n0,2,0,false\n1,1,-1,false\n2,1,1,true\n"
    );
}

#[test]
fn report_topics() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth_corpus(dir.path(), 1_000);
    let out_dir = dir.path().join("o");
    let out = run(&[
        "report",
        "--input",
        p(&input),
        "--topics",
        "Late Flight,Lost Luggage",
        "--out",
        p(&out_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traj = std::fs::read_to_string(out_dir.join("topic_trajectories.csv")).unwrap();
    assert!(traj
        .lines()
        .skip(1)
        .all(|l| l.starts_with("Late Flight,") || l.starts_with("Lost Luggage,")));
    assert!(out_dir.join("heatmap.csv").exists());
    assert!(out_dir.join("reason_distribution.csv").exists());
    assert!(!out_dir.join("trajectory.svg").exists());

    let out = run(&["report", "--input", p(&input), "--topics", "Wifi", "--out", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Wifi") && err.contains("Late Flight"), "{err}");
}

#[test]
fn render_charts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "render",
        "--input",
        p(&fixture()),
        "--threshold-override",
        "-0.1693",
        "--out",
        p(dir.path()),
    ]);
    assert!(out.status.success());
    let traj = std::fs::read_to_string(dir.path().join("trajectory.svg")).unwrap();
    assert_eq!(traj.matches("class=\"anomaly\"").count(), 11);
    let delta = std::fs::read_to_string(dir.path().join("delta.svg")).unwrap();
    assert!(delta.contains("class=\"threshold\""));

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "window,count,score\n").unwrap();
    assert_eq!(
        run(&["render", "--input", p(&empty), "--out", p(dir.path())])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn row_errors_are_reported_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.csv");
    std::fs::write(
        &input,
        "id,timestamp,text,label\n\
         a,2015-02-16T01:00:00Z,fine,positive\n\
         b,not a time,fine,positive\n\
         a,2015-02-16T01:00:00Z,fine,positive\n\
         c,2015-02-16T02:00:00Z,,negative\n\
         d,2015-02-16T03:00:00Z,ok,mixed\n",
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    let out = run(&["run", "--input", p(&input), "--window-size", "1", "--out", p(&out_dir)]);
    assert!(out.status.success());
    let summary = json(&out_dir.join("summary.json"));
    assert_eq!(
        (summary["accepted"].as_u64(), summary["skipped"].as_u64()),
        (Some(1), Some(3))
    );
    assert_eq!(summary["duplicates"], 1);
    let errors = std::fs::read_to_string(out_dir.join("row_errors.jsonl")).unwrap();
    assert_eq!(errors.lines().count(), 3);
    assert!(errors.contains("mixed"));
}
