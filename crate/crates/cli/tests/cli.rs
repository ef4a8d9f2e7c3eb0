use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tabsynth::annotate::{Dataset, SplitTag};
use tabsynth::design_space::{parse_space, DesignSpace};
use tabsynth::sampling::sample_uniform;

fn tabsynth(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tabsynth"))
        .current_dir(dir)
        .args(args)
        .env_remove("TABSYNTH_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = tabsynth(dir, args);
    assert_eq!(
        code(&o),
        0,
        "{args:?}\nstdout: {}\nstderr: {}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

fn header(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .next()
        .unwrap()
        .split(',')
        .map(String::from)
        .collect()
}

/// Labeled mix of uniform and augmented rows, written as `pool.csv`.
fn labeled_pool(dir: &Path, uniform: &str, augmented: &str) {
    ok(
        dir,
        &[
            "sample", "--method", "uniform", "--n", uniform, "--seed", "1", "--out", "r.csv",
        ],
    );
    ok(
        dir,
        &[
            "sample",
            "--method",
            "augment",
            "--parents",
            "reference",
            "--n",
            augmented,
            "--seed",
            "2",
            "--out",
            "a.csv",
        ],
    );
    ok(
        dir,
        &[
            "merge", "r.csv", "a.csv", "--out", "raw.csv", "--name", "pool",
        ],
    );
    ok(
        dir,
        &["annotate", "--input", "raw.csv", "--out", "pool.csv"],
    );
}

#[test]
fn uniform_sample_writes_rows_and_prints_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &[
            "sample",
            "--space",
            "compressor",
            "--method",
            "uniform",
            "--n",
            "1000",
            "--seed",
            "7",
            "--out",
            "u.csv",
        ],
    );
    assert!(out.contains("seed: 7"), "{out}");
    assert_eq!(data_rows(&dir.path().join("u.csv")), 1000);
    assert!(dir.path().join("u.meta.json").exists());
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("u.run.json")).unwrap()).unwrap();
    assert_eq!(run["seed"], 7);
    assert_eq!(run["method"], "uniform");
    assert_eq!(
        Dataset::read(&dir.path().join("u.csv")).unwrap().len(),
        1000
    );
}

#[test]
fn sobol_m_gives_power_of_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["sample", "--method", "sobol", "--m", "10", "--out", "s.csv"],
    );
    assert_eq!(data_rows(&dir.path().join("s.csv")), 1024);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = tabsynth(
        d,
        &[
            "sample", "--method", "augment", "--n", "10", "--out", "a.csv",
        ],
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--parents"));
    assert!(!d.join("a.csv").exists());
    for args in [
        &[
            "sample", "--method", "gaussian", "--n", "5", "--out", "x.csv",
        ][..],
        &["sample", "--method", "uniform", "--n", "5"],
        &["sample", "--method", "sobol", "--n", "5", "--out", "x.csv"],
        &[
            "sample", "--method", "uniform", "--n", "5", "--out", "x.csv", "--bound", "Ma21",
        ],
        &["sample", "--frobnicate"],
        &["split", "--input", "x.csv", "--out", "y.csv"],
        &["validate", "--input", "x.csv", "--format", "pdf"],
        &[],
    ] {
        assert_eq!(code(&tabsynth(d, args)), 1, "{args:?}");
    }
    assert_eq!(code(&tabsynth(d, &["--help"])), 0);
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        code(&tabsynth(
            d,
            &["annotate", "--input", "missing.csv", "--out", "x.csv"]
        )),
        2
    );
    assert_eq!(
        code(&tabsynth(
            d,
            &[
                "sample",
                "--space",
                "missing.space",
                "--method",
                "uniform",
                "--n",
                "5",
                "--out",
                "x.csv"
            ]
        )),
        2
    );
    fs::write(d.join("bad.csv"), "not,a,dataset\n1,2,3\n").unwrap();
    assert_eq!(
        code(&tabsynth(
            d,
            &["annotate", "--input", "bad.csv", "--out", "x.csv"]
        )),
        2
    );
    // Restricting outside the independent bounds.
    let o = tabsynth(
        d,
        &[
            "sample", "--method", "uniform", "--n", "5", "--bound", "Ma21=0:9", "--out", "x.csv",
        ],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn workers_come_from_flag_then_env() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "sample", "--method", "uniform", "--n", "50", "--out", "u.csv",
        ],
    );
    let run = |env: &str, extra: &[&str]| {
        let mut args = vec!["annotate", "--input", "u.csv", "--out", "l.csv"];
        args.extend_from_slice(extra);
        Command::new(env!("CARGO_BIN_EXE_tabsynth"))
            .current_dir(d)
            .args(&args)
            .env("TABSYNTH_WORKERS", env)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("0", &[])), 1);
    assert_eq!(code(&run("lots", &[])), 1);
    assert_eq!(code(&run("lots", &["--workers", "2"])), 0);
    assert_eq!(code(&run("3", &[])), 0);
    let recorded: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("l.run.json")).unwrap()).unwrap();
    assert_eq!(recorded["workers"], 3);
}

#[test]
fn config_file_fills_missing_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("run.toml"),
        "seed = 11\n[sample]\nmethod = \"sobol\"\nm = 4\nout = \"c.csv\"\n",
    )
    .unwrap();
    let out = ok(d, &["--config", "run.toml", "sample"]);
    assert!(out.contains("seed: 11"), "{out}");
    assert_eq!(data_rows(&d.join("c.csv")), 16);
    ok(
        d,
        &[
            "sample", "--config", "run.toml", "--m", "5", "--seed", "3", "--out", "f.csv",
        ],
    );
    assert_eq!(data_rows(&d.join("f.csv")), 32);
    assert_eq!(
        Dataset::read(&d.join("f.csv")).unwrap().provenance.segments[0].seed,
        3
    );
    fs::write(d.join("bad.toml"), "[sample]\nm = \"four\"\n").unwrap();
    assert_eq!(code(&tabsynth(d, &["--config", "bad.toml", "sample"])), 1);
    assert_eq!(
        code(&tabsynth(d, &["--config", "absent.toml", "sample"])),
        1
    );
}

#[test]
fn sampling_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (method, size) in [
        ("uniform", ["--n", "300"]),
        ("lhs", ["--n", "300"]),
        ("sobol", ["--m", "8"]),
    ] {
        ok(
            d,
            &[
                "sample", "--method", method, size[0], size[1], "--seed", "5", "--out", "one.csv",
            ],
        );
        ok(
            d,
            &[
                "sample", "--method", method, size[0], size[1], "--seed", "5", "--out", "two.csv",
            ],
        );
        assert_eq!(
            fs::read(d.join("one.csv")).unwrap(),
            fs::read(d.join("two.csv")).unwrap(),
            "{method}"
        );
        let meta = |f: &str| {
            let mut v: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(d.join(f)).unwrap()).unwrap();
            v["provenance"]["created_unix"] = serde_json::Value::Null;
            v["name"] = serde_json::Value::Null;
            v
        };
        assert_eq!(meta("one.meta.json"), meta("two.meta.json"));
    }
}

#[test]
fn annotate_adds_labels_and_reports_anomalies() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "sample", "--method", "uniform", "--n", "1000", "--seed", "4", "--out", "u.csv",
        ],
    );
    let out = ok(
        d,
        &[
            "annotate",
            "--input",
            "u.csv",
            "--out",
            "one.csv",
            "--workers",
            "1",
        ],
    );
    assert!(out.contains("anomalies:"), "{out}");
    assert!(d.join("one.anomalies.json").exists());
    let cols = header(&d.join("one.csv"));
    assert_eq!(
        &cols[cols.len() - 4..],
        ["working", "eta_tt", "pr_tt", "error"]
    );
    ok(
        d,
        &[
            "annotate",
            "--input",
            "u.csv",
            "--out",
            "eight.csv",
            "--workers",
            "8",
        ],
    );
    assert_eq!(
        fs::read(d.join("one.csv")).unwrap(),
        fs::read(d.join("eight.csv")).unwrap()
    );

    let o = tabsynth(
        d,
        &[
            "annotate",
            "--input",
            "u.csv",
            "--out",
            "x.csv",
            "--evaluator",
            "wind-turbine",
        ],
    );
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("wind-turbine"));
}

#[test]
fn annotate_reads_plain_csv_with_space_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "sample", "--method", "uniform", "--n", "20", "--out", "u.csv",
        ],
    );
    fs::remove_file(d.join("u.meta.json")).unwrap();
    ok(
        d,
        &[
            "annotate",
            "--input",
            "u.csv",
            "--space",
            "compressor",
            "--out",
            "l.csv",
        ],
    );
    assert!(Dataset::read(&d.join("l.csv")).unwrap().is_labeled());
}

#[test]
fn validate_report_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "sample", "--method", "uniform", "--n", "400", "--seed", "9", "--out", "u.csv",
        ],
    );
    ok(d, &["annotate", "--input", "u.csv", "--out", "l.csv"]);

    ok(d, &["validate", "--input", "l.csv", "--out-dir", "plain"]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("plain/u.report.json")).unwrap()).unwrap();
    assert!(report["class_balance"]["working"].is_u64());
    assert!(report["realism"].is_null());
    assert!(fs::read_to_string(d.join("plain/u.report.md"))
        .unwrap()
        .contains('|'));

    let out = ok(
        d,
        &[
            "validate",
            "--input",
            "l.csv",
            "--reference",
            "l.csv",
            "--out-dir",
            "self",
            "--format",
            "json",
        ],
    );
    assert!(out.contains("seed: 0"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("self/u.report.json")).unwrap()).unwrap();
    assert_eq!(report["realism"]["kl"], 0.0);
    assert_eq!(report["realism"]["hausdorff"], 0.0);
    assert!(!d.join("self/u.report.md").exists());
}

#[test]
fn space_round_trips_and_restricts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let doc = ok(d, &["space"]);
    assert_eq!(parse_space(&doc).unwrap(), DesignSpace::compressor());
    ok(
        d,
        &["space", "--bound", "Ma21=0.15:0.25", "--out", "box.space"],
    );
    let boxed = parse_space(&fs::read_to_string(d.join("box.space")).unwrap()).unwrap();
    assert_eq!(boxed.dim(), 23);
    ok(
        d,
        &[
            "sample",
            "--space",
            "box.space",
            "--method",
            "uniform",
            "--n",
            "200",
            "--out",
            "b.csv",
        ],
    );
    let ds = Dataset::read(&d.join("b.csv")).unwrap();
    let col = ds.space.index_of("Ma21").unwrap();
    assert!(ds.rows.iter().all(|r| (0.15..=0.25).contains(&r[col])));
}

#[test]
fn merge_checks_the_requested_space() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["space", "--bound", "Ma21=0.15:0.25", "--out", "box.space"],
    );
    ok(
        d,
        &[
            "sample", "--method", "uniform", "--n", "200", "--seed", "1", "--out", "full.csv",
        ],
    );
    ok(
        d,
        &[
            "sample",
            "--space",
            "box.space",
            "--method",
            "uniform",
            "--n",
            "50",
            "--out",
            "box.csv",
        ],
    );
    // Box rows lie in the full space but not the other way round.
    ok(
        d,
        &[
            "merge",
            "box.csv",
            "full.csv",
            "--space",
            "compressor",
            "--out",
            "m.csv",
        ],
    );
    let merged = Dataset::read(&d.join("m.csv")).unwrap();
    assert_eq!(merged.len(), 250);
    assert_eq!(merged.space, DesignSpace::compressor());
    assert_eq!(merged.provenance.segments.len(), 2);
    assert_eq!(
        code(&tabsynth(
            d,
            &[
                "merge",
                "full.csv",
                "--space",
                "box.space",
                "--out",
                "n.csv"
            ]
        )),
        2
    );
    assert_eq!(code(&tabsynth(d, &["merge", "--out", "n.csv"])), 1);
}

#[test]
fn subset_selection_methods() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "sample", "--method", "uniform", "--n", "300", "--seed", "2", "--out", "pool.csv",
        ],
    );
    ok(
        d,
        &[
            "sample",
            "--method",
            "dpp",
            "--candidates",
            "pool.csv",
            "--k",
            "20",
            "--out",
            "dpp.csv",
        ],
    );
    assert_eq!(data_rows(&d.join("dpp.csv")), 20);
    let out = ok(
        d,
        &[
            "sample",
            "--method",
            "cluster",
            "--candidates",
            "pool.csv",
            "--k",
            "20",
            "--clusters",
            "5",
            "--seed",
            "8",
            "--out",
            "cl.csv",
        ],
    );
    assert!(out.contains("seed: 8"));
    assert_eq!(data_rows(&d.join("cl.csv")), 20);
    // The label kernel needs labels.
    let o = tabsynth(
        d,
        &[
            "sample",
            "--method",
            "dpp",
            "--candidates",
            "pool.csv",
            "--k",
            "5",
            "--weight",
            "0.5",
            "--out",
            "w.csv",
        ],
    );
    assert_eq!(code(&o), 2);
    ok(
        d,
        &["annotate", "--input", "pool.csv", "--out", "lpool.csv"],
    );
    ok(
        d,
        &[
            "sample",
            "--method",
            "dpp",
            "--candidates",
            "lpool.csv",
            "--k",
            "5",
            "--weight",
            "0.5",
            "--kernel",
            "cosine",
            "--out",
            "w.csv",
        ],
    );
    assert!(Dataset::read(&d.join("w.csv")).unwrap().is_labeled());
}

#[test]
fn split_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    labeled_pool(d, "14000", "3000");
    let out = ok(
        d,
        &[
            "split",
            "--input",
            "pool.csv",
            "--uniform",
            "100",
            "--real",
            "100",
            "--specialized",
            "20",
            "--grid-points",
            "12",
            "--seed",
            "3",
            "--out",
            "split.csv",
            "--export-dir",
            "tests",
        ],
    );
    assert!(out.contains("index overlap: 0"), "{out}");
    for name in ["uniform", "real", "specialized"] {
        assert!(d.join(format!("tests/pool.{name}.csv")).exists(), "{name}");
    }
    let split = Dataset::read(&d.join("split.csv")).unwrap();
    assert_eq!(
        split.indices_with(&SplitTag::Test("uniform".into())).len(),
        200
    );
    assert_eq!(
        split
            .indices_with(&SplitTag::Test("specialized".into()))
            .len(),
        40
    );
    assert_eq!(split.len(), 17_040);

    let out = ok(
        d,
        &[
            "verify",
            "--input",
            "split.csv",
            "--sizes",
            "100,1000,10000",
            "--repeats",
            "10",
            "--importance-repeats",
            "1",
            "--out-dir",
            "v",
        ],
    );
    assert!(out.contains("index overlap: 0"), "{out}");
    assert!(out.contains("seed: 0"));
    let curve = fs::read_to_string(d.join("v/pool.curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 3 * 3);
    assert!(curve
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(4) == Some("10")));
    let importance = fs::read_to_string(d.join("v/pool.importance.csv")).unwrap();
    assert_eq!(importance.lines().count(), 1 + 23);

    // Existing test sets are kept, so asking for one of the same name fails.
    let o = tabsynth(
        d,
        &[
            "split",
            "--input",
            "split.csv",
            "--uniform",
            "5",
            "--out",
            "x.csv",
        ],
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("uniform"));
}

#[test]
fn verify_without_test_sets_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let space = DesignSpace::compressor();
    let mut ds = Dataset::from_batch("trainonly", &sample_uniform(&space, 100, 1).unwrap());
    ds.splits = vec![SplitTag::Train; ds.len()];
    ds.write(&d.join("t.csv")).unwrap();
    ok(d, &["annotate", "--input", "t.csv", "--out", "lt.csv"]);
    let o = tabsynth(d, &["verify", "--input", "lt.csv", "--sizes", "10"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no test sets"));
}
