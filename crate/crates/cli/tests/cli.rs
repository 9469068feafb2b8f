use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn copula(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copula"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(err.trim().lines().count(), 1, "one-line error: {err}");
    serde_json::from_str(err.trim()).unwrap()
}

#[test]
fn eval_on_a_face() {
    let out = copula(&["eval", "--gallery", "example_5_7", "--point", "1,1,0.3", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    let value: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert_eq!(value, 0.3);
}

#[test]
fn kendall_grid_has_the_jump() {
    let out = copula(&["kendall", "--gallery", "example_5_7", "--grid", "256", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,kendall_cdf,level_mass");
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let mut f = l.split(',').map(|x| x.parse::<f64>().unwrap());
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 256);
    for (k, &(t, _)) in rows.iter().enumerate() {
        assert!((t - k as f64 / 255.0).abs() < 1e-15);
    }
    let jumps: Vec<(f64, f64)> = rows
        .windows(2)
        .filter(|w| w[1].1 - w[0].1 > 1e-12)
        .map(|w| (w[0].0, w[1].1 - w[0].1))
        .collect();
    assert_eq!(jumps.len(), 1);
    let (before, size) = jumps[0];
    assert!(before < 7.0 / 18.0 && before + 1.0 / 255.0 > 7.0 / 18.0);
    assert!((size - 0.125).abs() < 1e-12);
    assert!((rows[0].1 - 0.875).abs() < 1e-12);
}

#[test]
fn level_masses_default_to_atom_levels() {
    let out = copula(&["levelmass", "--gallery", "example_5_7"]);
    let rows: Vec<Value> = serde_json::from_str(&stdout(&out)).unwrap();
    let masses: Vec<f64> = rows.iter().map(|r| r["level_mass"].as_f64().unwrap()).collect();
    assert_eq!(masses.len(), 2);
    assert!((masses[0] - 0.875).abs() < 1e-12);
    assert!((masses[1] - 0.125).abs() < 1e-12);
}

#[test]
fn kernel_rows_carry_branches() {
    let out = copula(&[
        "kernel", "--gallery", "example_5_7", "--point", "0.5,0.5", "--y", "0.1,1", "--method", "psi",
    ]);
    assert!(out.status.success());
    let rows: Vec<Value> = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(rows[0]["kernel"].as_f64(), Some(0.0));
    assert_eq!(rows[1]["kernel"].as_f64(), Some(1.0));
    assert!(rows[0]["branch"].is_string());
}

#[test]
fn sampling_is_reproducible_and_binary_framed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.bin");
    let p = path.to_str().unwrap();
    let args = ["sample", "--gallery", "uniform", "--n", "50", "--seed", "9", "--format", "binary", "--out", p];
    assert!(copula(&args).status.success());
    let first = fs::read(&path).unwrap();
    assert!(copula(&args).status.success());
    assert_eq!(first, fs::read(&path).unwrap());
    assert_eq!(&first[..4], b"CPLB");
    assert_eq!(u32::from_le_bytes(first[4..8].try_into().unwrap()), 3);
    assert_eq!(u64::from_le_bytes(first[8..16].try_into().unwrap()), 50);
    assert_eq!(first.len(), 16 + 8 * 150);
    for chunk in first[16..].chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        assert!((0.0..=1.0).contains(&v));
    }

    let other = copula(&["sample", "--gallery", "uniform", "--n", "50", "--seed", "9", "--stream", "1", "--format", "csv"]);
    let csv = stdout(&other);
    assert_eq!(csv.lines().count(), 50);
    let head: f64 = csv.split(',').next().unwrap().parse().unwrap();
    assert_ne!(head, f64::from_le_bytes(first[16..24].try_into().unwrap()));
}

#[test]
fn spec_file_round_trip() {
    let emitted = copula(&["gallery", "--gallery", "example_5_7"]);
    assert!(emitted.status.success());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    fs::write(&path, &emitted.stdout).unwrap();
    let from_file = copula(&["eval", "--spec-file", path.to_str().unwrap(), "--point", "0.5,0.6,0.7"]);
    let inline = copula(&["eval", "--spec", &stdout(&emitted), "--point", "0.5,0.6,0.7"]);
    let from_gallery = copula(&["eval", "--gallery", "example_5_7", "--point", "0.5,0.6,0.7"]);
    assert!(from_file.status.success());
    assert_eq!(from_file.stdout, inline.stdout);
    assert_eq!(from_file.stdout, from_gallery.stdout);
}

#[test]
fn gallery_listing() {
    let out = copula(&["gallery", "--dim", "4"]);
    let rows: Vec<Value> = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r["d"] == 4));
}

#[test]
fn approximation_is_a_valid_spec() {
    let out = copula(&["approx", "--gallery", "example_5_7", "--flavor", "singular", "--n", "4"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["anchors"].as_array().unwrap().len(), 5);
    let spec = v["measure"].to_string();
    let again = copula(&["eval", "--spec", &spec, "--point", "1,1,0.25"]);
    assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));
}

#[test]
fn converge_reports_every_criterion() {
    let out = copula(&[
        "converge", "--gallery", "example_5_7", "--flavor", "discrete", "--stages", "4,16", "--grid", "8",
        "--samples", "30",
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let ladder = &v["ladders"][0];
    assert_eq!(ladder["stages"], serde_json::json!([4, 16]));
    let criteria = ladder["criteria"].as_object().unwrap();
    assert!(criteria.contains_key("copula_sup"));
    assert!(criteria.contains_key("kernel_mean_gap"));
    let sup = criteria["copula_sup"].as_array().unwrap();
    assert!(sup[1].as_f64().unwrap() < sup[0].as_f64().unwrap());
}

#[test]
fn check_passes_on_a_known_measure() {
    let out = copula(&[
        "check", "--gallery", "single_atom", "--samples", "2000", "--points", "40",
        "--disintegration-points", "2", "--kendall-grid", "32", "--no-ladder",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["passed"], true);
}

#[test]
fn errors_are_one_json_line() {
    let unknown = copula(&["eval", "--gallery", "nope", "--point", "1,1,1"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert_eq!(stderr_json(&unknown)["error"], "spec");

    let wrong_dim = copula(&["eval", "--gallery", "example_5_7", "--point", "0.5,0.5"]);
    assert_eq!(wrong_dim.status.code(), Some(2));
    assert_eq!(stderr_json(&wrong_dim)["error"], "domain");

    let bad_spec = copula(&["eval", "--spec", r#"{"type":"discrete","d":3,"atoms":[{"t":1,"w":0.5}]}"#, "--point", "1,1,1"]);
    assert_eq!(bad_spec.status.code(), Some(2));
    assert_eq!(stderr_json(&bad_spec)["error"], "invariant");

    let no_source = copula(&["eval", "--point", "1,1,1"]);
    assert_eq!(no_source.status.code(), Some(2));
    assert_eq!(stderr_json(&no_source)["error"], "usage");

    let bad_flag = copula(&["kendall", "--gallery", "example_5_7", "--nonsense"]);
    assert_eq!(bad_flag.status.code(), Some(2));
    stderr_json(&bad_flag);
}

#[test]
fn help_is_not_an_error() {
    let out = copula(&["--help"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("kendall"));
}
