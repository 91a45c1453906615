use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bathcorr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bathcorr"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn bathcorr")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Column `name` of a CSV file with a header.
fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.cfg", "# molecule\nbeta = 1\nbeta_typo = 2\n");
    let out = bathcorr(dir.path(), &["correlation", "--config", "c.cfg", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("beta_typo"), "{err}");
    assert!(err.contains("line 3"), "{err}");
    assert!(!dir.path().join("o/correlation.csv").exists());

    write(dir.path(), "c.json", "{\n  \"beta\": 1,\n  \"nope\": 0\n}\n");
    let out = bathcorr(dir.path(), &["correlation", "--config", "c.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn keys_of_other_variants_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.cfg", "kind = harmonic\nepsilon = 1\n");
    let out = bathcorr(dir.path(), &["oracle", "--config", "c.cfg", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));

    write(dir.path(), "s.cfg", "beta = 2\n");
    let out = bathcorr(dir.path(), &["offset-scan", "--config", "s.cfg", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.cfg", "n_modes = two\n");
    let out = bathcorr(dir.path(), &["correlation", "--config", "c.cfg", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_modes"));

    write(dir.path(), "r.cfg", "r = 2\n");
    let out = bathcorr(dir.path(), &["correlation", "--config", "r.cfg", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3_with_payload() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.cfg", "dt = 1\n");
    let out = bathcorr(dir.path(), &["master-eq", "--config", "m.cfg", "--out", "o"]);
    assert_eq!(out.status.code(), Some(3));
    let payload = json(&dir.path().join("o/error.json"));
    assert_eq!(payload["kind"], "numerical");
    assert!(payload["detail"].as_str().unwrap().contains("StepSize"));
}

#[test]
fn spin_coherence_long_time_average() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.cfg", "n_modes = 1\nr = 0\nepsilon = 1\ndelta = 1\nbeta = 1\n");
    let out = bathcorr(dir.path(), &["correlation", "--config", "c.cfg", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lta = column(&dir.path().join("o/correlation.csv"), "long_time_average");
    assert!((lta[0] - 0.31464).abs() < 1e-4, "{}", lta[0]);
    let first = fs::read_to_string(dir.path().join("o/correlation.csv")).unwrap();
    assert!(first.starts_with("t,re_c,im_c,"));
}

#[test]
fn offset_scan_corner_ordering() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "s.cfg", "epsilon = 1\ndelta = 1\nn_modes = 1\n");
    let out = bathcorr(dir.path(), &["offset-scan", "--config", "s.cfg", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("o/offset_scan.csv");
    let (beta, r, c0) = (column(&path, "beta"), column(&path, "r"), column(&path, "c0"));
    let r_max = r.iter().copied().fold(f64::MIN, f64::max);
    let b_min = beta.iter().copied().fold(f64::MAX, f64::min);
    let b_max = beta.iter().copied().fold(f64::MIN, f64::max);
    let at = |b: f64, rr: f64| (0..c0.len()).find(|&i| beta[i] == b && r[i] == rr).map(|i| c0[i]).unwrap();
    assert!(at(b_min, r_max) > at(b_max, r_max));
    assert!(c0.iter().all(|&x| x > 0.0));
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "e.cfg", "m = 12\nsigma = 0.3\nn_fluctuators = 600\n");
    for (out_dir, jobs) in [("a", "1"), ("b", "4")] {
        let out = bathcorr(
            dir.path(),
            &["ensemble", "--config", "e.cfg", "--seed", "7", "--jobs", jobs, "--out", out_dir],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["ensemble_correlation.csv", "molecules.csv", "susceptibility.csv", "resolved_config.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let out = bathcorr(dir.path(), &["ensemble", "--config", "e.cfg", "--seed", "8", "--out", "c"]);
    assert!(out.status.success());
    assert_ne!(
        fs::read(dir.path().join("a/molecules.csv")).unwrap(),
        fs::read(dir.path().join("c/molecules.csv")).unwrap()
    );
}

#[test]
fn resolved_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "e.cfg", "seed = 3\ndims = 32, 64\nn_seeds = 4\n");
    let out = bathcorr(dir.path(), &["eth-demo", "--config", "e.cfg", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let resolved = json(&dir.path().join("o/resolved_config.json"));
    assert_eq!(resolved["schema_version"], 1);
    assert_eq!(resolved["command"], "eth-demo");
    assert_eq!(resolved["seed"], 3);
    assert_eq!(resolved["params"]["dims"], serde_json::json!([32, 64]));

    // The resolved parameters are themselves a valid JSON config.
    fs::write(
        dir.path().join("again.json"),
        serde_json::to_string(&resolved["params"]).unwrap(),
    )
    .unwrap();
    let out = bathcorr(dir.path(), &["eth-demo", "--config", "again.json", "--seed", "3", "--out", "p"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        fs::read(dir.path().join("o/eth_offsets.csv")).unwrap(),
        fs::read(dir.path().join("p/eth_offsets.csv")).unwrap()
    );
}

#[test]
fn format_selects_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = bathcorr(dir.path(), &["oracle", "--format", "json", "--out", "j"]);
    assert!(out.status.success());
    assert!(dir.path().join("j/oracle.json").exists());
    assert!(!dir.path().join("j/oracle.csv").exists());
    assert!(dir.path().join("j/resolved_config.json").exists());
    let out = bathcorr(dir.path(), &["oracle", "--format", "csv", "--out", "c"]);
    assert!(out.status.success());
    assert!(!dir.path().join("c/oracle.json").exists());
    assert!(dir.path().join("c/oracle.csv").exists());
}

#[test]
fn davies_classifies_constant_as_divergent() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "d.cfg", "source = constant\nvalue = 0.3\n");
    let out = bathcorr(dir.path(), &["davies", "--config", "d.cfg", "--out", "o"]);
    assert!(out.status.success());
    let report = json(&dir.path().join("o/davies.json"));
    assert_eq!(report["class"], "DIVERGENT");
    let out = bathcorr(dir.path(), &["davies", "--out", "e"]);
    assert!(out.status.success());
    assert_eq!(json(&dir.path().join("e/davies.json"))["class"], "CONVERGENT");
}

#[test]
fn fit_reads_its_own_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "o.cfg",
        "kind = stretched\na0 = 0.4\nomega0 = 1.3\nb0 = 0.05\na = 1.5\nc0 = 0.2\nt_max = 200\nn_t = 4001\n",
    );
    assert!(bathcorr(dir.path(), &["oracle", "--config", "o.cfg", "--out", "src"]).status.success());
    write(dir.path(), "f.cfg", "input = src/oracle.csv\ncolumn = value\nmodel = stretched\n");
    let out = bathcorr(dir.path(), &["fit", "--config", "f.cfg", "--out", "fit"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("fit/fit.json"));
    let c0 = report["stretched"]["model"]["c0"].as_f64().unwrap();
    assert!((c0 - 0.2).abs() < 1e-3, "{c0}");
    assert_eq!(report["stretched"]["t0_infinite"], true);
}

#[test]
fn master_eq_offset_moves_steady_state_off_gibbs() {
    let dir = tempfile::tempdir().unwrap();
    let mut dist = Vec::new();
    for c0 in ["0", "0.3"] {
        write(dir.path(), "m.cfg", &format!("c0 = {c0}\nt_max = 1000\n"));
        let out_dir = format!("o{c0}");
        let out = bathcorr(dir.path(), &["master-eq", "--config", "m.cfg", "--out", &out_dir]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let report = json(&dir.path().join(&out_dir).join("master_eq.json"));
        dist.push(report["steady_state"]["gibbs_distance"].as_f64().unwrap());
    }
    assert!(dist[0] < 1e-3 && dist[1] > 0.1, "{dist:?}");
}
