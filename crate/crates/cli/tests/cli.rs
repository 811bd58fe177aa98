use psmlc::polar::{build_reliability_order, OrderSource};
use psmlc::transceiver::{SchemeDesign, SchemeKind};
use std::path::Path;
use std::process::{Command, Output};

fn psmlc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psmlc"))
        .args(args)
        .current_dir(dir)
        .env_remove("PSMLC_RELIABILITY_FILE")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_noise_bler_run_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let o = psmlc(
        &["bler", "--preset", "sbicm", "--snr-db", "0:5:10", "--blocks", "64", "--zero-noise", "--seed", "9", "--workers", "2", "--out", "run/b.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("run/b.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("scheme,snr_db,blocks,errors"));
    let meta = std::fs::read_to_string(dir.path().join("run/b.json")).unwrap();
    for row in &rows[1..] {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!((f[0], f[2], f[3]), ("sbicm", "64", "0"));
        assert_eq!(f[10], "9");
        assert!(meta.contains(f[9]), "hash {} missing from metadata", f[9]);
    }
    assert!(meta.contains("\"workers\": 2"));
}

#[test]
fn reruns_reproduce_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str, workers: &'static str| {
        vec!["bler", "--preset", "umlc", "--snr-db", "15", "--blocks", "96", "--seed", "4", "--workers", workers, "--out", out]
    };
    assert!(psmlc(&args("a.csv", "1"), dir.path()).status.success());
    assert!(psmlc(&args("b.csv", "2"), dir.path()).status.success());
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = psmlc(&["bler", "--preset", "umlc", "--snr-db", "18:1:16"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty"));

    let mut text = SchemeDesign::preset(SchemeKind::UMlc).to_config_string();
    text = text.replace("list_size = 8", "list_size = eight");
    std::fs::write(dir.path().join("bad.cfg"), text).unwrap();
    let o = psmlc(&["bler", "--config", "bad.cfg", "--snr-db", "10"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 10"), "{}", stderr(&o));

    let o = psmlc(&["bler", "--config", "missing.cfg", "--snr-db", "10"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = psmlc(&["bler", "--preset", "qam", "--snr-db", "10"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = psmlc(&["bler", "--preset", "umlc", "--snr-db", "10", "--blocks", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn infeasible_design_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut d = SchemeDesign::preset(SchemeKind::UMlc);
    d.n_c = 64;
    d.k = vec![4, 10, 20, 30];
    std::fs::write(dir.path().join("small.cfg"), d.to_config_string()).unwrap();
    let o = psmlc(
        &["design", "--config", "small.cfg", "--snr-db", "0", "--blocks", "200", "--rate-samples", "2000"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("levels"));
}

#[test]
fn design_writes_a_parseable_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut d = SchemeDesign::preset(SchemeKind::UMlc);
    d.n_c = 64;
    d.k = vec![0; 4];
    std::fs::write(dir.path().join("t.cfg"), d.to_config_string()).unwrap();
    let o = psmlc(
        &[
            "design", "--config", "t.cfg", "--snr-db", "18", "--target-bler", "0.1", "--total-bits", "64",
            "--blocks", "1000", "--rate-samples", "5000", "--out", "d.cfg",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let back: SchemeDesign = std::fs::read_to_string(dir.path().join("d.cfg")).unwrap().parse().unwrap();
    assert_eq!(back.k.iter().sum::<usize>(), 64);
    assert_eq!(back.operating_snr_db, Some(18.0));
    assert!(dir.path().join("d.json").exists());
}

#[test]
fn rates_and_calibrate_commands() {
    let dir = tempfile::tempdir().unwrap();
    let o = psmlc(
        &["rates", "--snr-db", "10:2:16", "--curves", "mlc-uniform", "--blocks", "20000", "--target-rate", "2", "--out", "r.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("curve,snr_db,param,I_1,I_2,I_3,I_4,R,stderr"));
    assert!(out.contains("mlc-uniform reaches 2 bits/use at"));

    let o = psmlc(&["calibrate", "--n", "64", "--p", "0.5,0.8", "--blocks", "200", "--out", "c.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("p = 0.5: s* = 0"));
    let csv = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert!(csv.starts_with("p,s_star,s,ones_fraction,stderr"));
    let o = psmlc(&["rates", "--snr-db", "10", "--curves", "qam-mb"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reliability_file_override() {
    let dir = tempfile::tempdir().unwrap();
    let order = build_reliability_order(1024, &OrderSource::PolarizationWeight).unwrap();
    let path = dir.path().join("seq.txt");
    std::fs::write(&path, order.to_file_string()).unwrap();
    let run = |file: &Path| {
        Command::new(env!("CARGO_BIN_EXE_psmlc"))
            .args(["bler", "--preset", "ubicm", "--snr-db", "0", "--blocks", "16", "--zero-noise", "--out", "o.csv"])
            .current_dir(dir.path())
            .env("PSMLC_RELIABILITY_FILE", file)
            .output()
            .unwrap()
    };
    let o = run(&path);
    assert!(o.status.success(), "{}", stderr(&o));
    let meta = std::fs::read_to_string(dir.path().join("o.json")).unwrap();
    assert!(meta.contains("order = file:"), "{meta}");
    let o = run(&dir.path().join("nope.txt"));
    assert_eq!(o.status.code(), Some(2));
}
