use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const HEADER: &str = "time,icao24,lat,lon,baroaltitude,velocity,heading,vertrate,callsign,hour\n";

fn skytrace(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skytrace"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn skytrace")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// `n` reports of one aircraft every 10 s along a gently curving climb.
fn one_trajectory_csv(n: usize) -> String {
    let mut s = HEADER.to_string();
    let t0 = 1_478_872_800i64;
    for i in 0..n {
        let t = t0 + 10 * i as i64;
        let f = i as f64;
        writeln!(
            s,
            "{t},abc123,{},{},{},{},{},{},TST1,{}",
            33.5 + 0.01 * f + 0.002 * (f / 7.0).sin(),
            -84.4 + 0.012 * f + 0.003 * (f / 11.0).cos(),
            10000.0 + 20.0 * f + 50.0 * (f / 5.0).sin(),
            250.0 + 5.0 * (f / 9.0).sin(),
            90.0 + 10.0 * (f / 13.0).sin(),
            120.0 + 30.0 * (f / 6.0).cos(),
            t - t.rem_euclid(3600)
        )
        .unwrap();
    }
    s
}

#[test]
fn table_row_is_ingested_as_one_record() {
    let dir = TempDir::new().unwrap();
    let row = "1478874138,aaa83f,33.79832,-84.3711,10325.5,221.5576,348.4813,-0.32512,EJA786,1478872800\n";
    fs::write(dir.path().join("row.csv"), format!("{HEADER}{row}")).unwrap();
    let o = skytrace(dir.path(), &["ingest", "row.csv", "--out", "store.json"]);
    assert!(
        stdout(&o).starts_with("accepted 1, rejected 0,"),
        "{}",
        stdout(&o)
    );
    // One report cannot form a trajectory, so the command still fails.
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no trajectories"));
}

#[test]
fn empty_file_fails_with_no_trajectories() {
    let dir = TempDir::new().unwrap();
    for body in ["", HEADER] {
        fs::write(dir.path().join("empty.csv"), body).unwrap();
        let o = skytrace(dir.path(), &["ingest", "empty.csv", "--out", "store.json"]);
        assert!(!o.status.success());
        let err = stderr(&o);
        assert!(err.starts_with("error[insufficient-data]:"), "{err}");
        assert!(err.contains("no trajectories"));
        assert!(!dir.path().join("store.json").exists());
    }
}

#[test]
fn bad_rows_are_counted_and_reported() {
    let dir = TempDir::new().unwrap();
    let mut csv = one_trajectory_csv(20);
    let bad = [
        "1478874138,aaa83f,95.0,-84.3,1000,200,10,0,X,1478872800",
        "1478874138,aaa83f,33.0,-84.3,,200,10,0,X,1478872800",
        "1478874138,aaa83f,33.0",
        "1478874138,NOTHEX,33.0,-84.3,1000,200,10,0,X,1478872800",
    ];
    for b in bad {
        csv.push_str(b);
        csv.push('\n');
    }
    fs::write(dir.path().join("mixed.csv"), csv).unwrap();
    let o = skytrace(dir.path(), &["ingest", "mixed.csv", "--out", "store.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(
        stdout(&o).starts_with("accepted 20, rejected 4, trajectories 1,"),
        "{}",
        stdout(&o)
    );
    let rejects = fs::read_to_string(dir.path().join("store.json.rejects.tsv")).unwrap();
    let lines: Vec<&str> = rejects.lines().collect();
    assert_eq!(lines.len(), 4);
    let numbers: Vec<&str> = lines
        .iter()
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert_eq!(numbers, ["22", "23", "24", "25"]);
}

#[test]
fn one_110_step_trajectory_gives_two_samples() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("one.csv"), one_trajectory_csv(110)).unwrap();
    let o = skytrace(dir.path(), &["ingest", "one.csv", "--out", "store.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = skytrace(dir.path(), &["preprocess", "store.json", "--out", "ds.bin"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("2 samples"), "{}", stdout(&o));

    fs::write(dir.path().join("short.csv"), one_trajectory_csv(104)).unwrap();
    skytrace(dir.path(), &["ingest", "short.csv", "--out", "short.json"]);
    let o = skytrace(
        dir.path(),
        &["preprocess", "short.json", "--out", "short.bin"],
    );
    assert!(!o.status.success());
    assert!(
        stderr(&o).starts_with("error[insufficient-data]"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn dataset_manifest_records_the_preprocess_config() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("one.csv"), one_trajectory_csv(130)).unwrap();
    skytrace(dir.path(), &["ingest", "one.csv", "--out", "store.json"]);
    let args = [
        "--set",
        "preprocess.stride=3",
        "--set",
        "preprocess.window=90",
        "--set",
        "model.c3d_input=9x10x10",
        "preprocess",
        "store.json",
        "--out",
        "ds.bin",
    ];
    let o = skytrace(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = fs::read(dir.path().join("ds.bin")).unwrap();
    let head = String::from_utf8_lossy(&bytes[..bytes.len().min(2048)]).into_owned();
    for entry in [
        "preprocess.window=90",
        "preprocess.stride=3",
        "preprocess.horizon=5",
        "preprocess.period_s=10",
    ] {
        assert!(
            head.lines().any(|l| l == entry),
            "missing {entry} in\n{head}"
        );
    }
}

#[test]
fn config_errors_exit_before_work() {
    let dir = TempDir::new().unwrap();
    let o = skytrace(
        dir.path(),
        &["--epochs", "0", "train", "missing.bin", "--out", "m.ckpt"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[config]:"), "{}", stderr(&o));
    assert_eq!(stderr(&o).lines().count(), 1);

    fs::write(
        dir.path().join("bad.cfg"),
        "train.epochs=5\nmodel.wings=2\n",
    )
    .unwrap();
    let o = skytrace(
        dir.path(),
        &["--config", "bad.cfg", "synth", "--out", "x.csv"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"));
    assert!(!dir.path().join("x.csv").exists());

    let o = Command::new(env!("CARGO_BIN_EXE_skytrace"))
        .current_dir(dir.path())
        .env("SKYTRACE_THREADS", "zero")
        .args(["synth", "--out", "x.csv"])
        .output()
        .unwrap();
    assert!(stderr(&o).starts_with("error[config]:"));
}

#[test]
fn synth_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let args = |out: &'static str| {
        [
            "--seed",
            "7",
            "--set",
            "synth.trajectories=5",
            "synth",
            "--out",
            out,
        ]
    };
    assert!(skytrace(dir.path(), &args("a.csv")).status.success());
    assert!(skytrace(dir.path(), &args("b.csv")).status.success());
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    assert!(skytrace(
        dir.path(),
        &[
            "--seed",
            "8",
            "--set",
            "synth.trajectories=5",
            "synth",
            "--out",
            "c.csv"
        ]
    )
    .status
    .success());
    assert_ne!(a, fs::read(dir.path().join("c.csv")).unwrap());
}

#[test]
fn inputs_are_not_modified() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("one.csv"), one_trajectory_csv(110)).unwrap();
    let before = fs::read(dir.path().join("one.csv")).unwrap();
    skytrace(dir.path(), &["ingest", "one.csv", "--out", "store.json"]);
    let store = fs::read(dir.path().join("store.json")).unwrap();
    skytrace(dir.path(), &["preprocess", "store.json", "--out", "ds.bin"]);
    assert_eq!(before, fs::read(dir.path().join("one.csv")).unwrap());
    assert_eq!(store, fs::read(dir.path().join("store.json")).unwrap());
}
