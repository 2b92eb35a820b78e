use std::process::{Command, Output};

use dqg_core::amplitude::partition_function;
use dqg_core::Causet;
use serde_json::Value;

fn dqg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqg")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = dqg(args);
    assert!(out.status.success(), "dqg {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn mu_values(v: &Value) -> Vec<f64> {
    v["values"].as_array().unwrap().iter().map(|p| p[1].as_f64().unwrap()).collect()
}

#[test]
fn enum_level_three_offspring_row() {
    let out = dqg(&["enum", "--max-level", "3", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let offspring: Vec<String> = rdr
        .records()
        .map(|r| r.unwrap())
        .filter(|r| &r[0] == "3")
        .map(|r| r[6].to_string())
        .collect();
    assert_eq!(offspring.join(","), "4,5,6,5,8");
}

#[test]
fn enum_single_point() {
    let v = json(&["enum", "--max-level", "1"]);
    assert_eq!(v["level_sizes"], serde_json::json!([1]));
    let point = &v["levels"][0]["causets"][0];
    assert_eq!(point["offspring"], 2);
    assert_eq!(point["literal"], "1;");
    assert_eq!(point["size"], 1);
}

#[test]
fn enum_level_sizes_to_five() {
    let v = json(&["enum", "--max-level", "5"]);
    assert_eq!(v["level_sizes"], serde_json::json!([1, 2, 5, 16, 63]));
}

#[test]
fn mu_of_a_cylinder_is_a_quarter() {
    let v = json(&["mu", "--set", "cyl:1;|2;0<1", "--ap", "action"]);
    let values = mu_values(&v);
    assert!(values[1..].iter().all(|m| (m - 0.25).abs() < 1e-12), "{values:?}");
}

#[test]
fn mu_of_the_chain_site_is_a_quarter() {
    let v = json(&["mu", "--set", "site:3;0<1,1<2"]);
    let values = mu_values(&v);
    assert!(values[2..].iter().all(|m| (m - 0.25).abs() < 1e-12), "{values:?}");
}

#[test]
fn mu_of_the_chain_path_follows_partition_functions() {
    let v = json(&["mu", "--set", "path:chain", "--max-level", "8"]);
    let values = mu_values(&v);
    let mut expected = 1.0;
    for (n, m) in values.iter().enumerate() {
        assert!((m - expected).abs() < 1e-12 * expected.max(1e-300) + 1e-15, "n={}: {m} vs {expected}", n + 1);
        let z = partition_function(&Causet::chain(n + 1)).unwrap().to_complex::<f64>().norm();
        expected /= z * z;
    }
    assert!(values.windows(2).all(|w| w[1] <= w[0]));
    assert!(values[7] < values[1]);
}

#[test]
fn paper_example_passes() {
    let v = json(&["paper-example"]);
    assert_eq!(v["passed"], true);
    assert_eq!(v["comparison"]["deviations"], serde_json::json!([]));
    assert_eq!(v["values"]["mu_x5_x6"], 2.25);
}

#[test]
fn verify_suites_pass() {
    for args in [
        &["verify", "--suite", "growth", "--max-level", "6"][..],
        &["verify", "--suite", "einstein", "--N", "5", "--omega", "path:chain", "--omega-prime", "path:antichain"],
        &["verify", "--suite", "classical"],
        &["verify", "--suite", "all", "--max-level", "4", "--trials", "50"],
    ] {
        let out = dqg(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn output_is_byte_stable() {
    let args = ["verify", "--suite", "all", "--max-level", "4", "--seed", "7", "--trials", "30"];
    assert_eq!(dqg(&args).stdout, dqg(&args).stdout);
    let args = ["classical", "--max-level", "4", "--seed", "3", "--format", "csv"];
    assert_eq!(dqg(&args).stdout, dqg(&args).stdout);
}

#[test]
fn out_flag_writes_a_file() {
    let dir = std::env::temp_dir().join(format!("dqg-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("zscan.csv");
    let out = dqg(&["zscan", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("n,min_abs_z,min_witness,max_abs_z,max_witness\r\n"));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn table_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("dqg-table-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("table.json");
    let out = dqg(&["ap", "--emit", "table", "--max-level", "4", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let entries: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let first = &entries[0];
    assert_eq!(first["parent"], "1;");
    assert_eq!(first["re"], 0.5);
    let spec = format!("file:{}", path.display());
    let v = json(&["ap", "--ap", &spec, "--max-level", "4"]);
    assert_eq!(v["passed"], true);
    assert!(v["table_difference"].as_f64().unwrap() < 1e-12);
    let v = json(&["mu", "--set", "site:3;0<1,0<2+site:3;0<1", "--ap", &spec, "--max-level", "3"]);
    assert!((mu_values(&v)[2] - 2.25).abs() < 1e-12);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn invalid_table_files_are_rejected() {
    let dir = std::env::temp_dir().join(format!("dqg-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, r#"[{"parent":"1;","child":"2;","re":0.7,"im":0.0}]"#).unwrap();
    let out = dqg(&["mu", "--set", "all", "--ap", &format!("file:{}", path.display()), "--max-level", "2"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn diagonal_process_is_not_amplitude_generated() {
    let out = dqg(&["ap", "--ap", "uniform", "--process", "classical", "--max-level", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["characterization"]["rank_ok"], false);
}

#[test]
fn parse_errors_report_position() {
    let out = dqg(&["mu", "--set", "cyl:1;|2;0<"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("at byte"), "{err}");
}

#[test]
fn size_cap_is_enforced() {
    let out = dqg(&["enum", "--max-level", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn paths_lists_the_six_three_paths() {
    let v = json(&["paths", "--max-level", "3"]);
    assert_eq!(v["counts"], serde_json::json!([1, 2, 6]));
    assert_eq!(v["paths"][3]["path"], "1;|2;|3;0<1");
}

#[test]
fn einstein_dump_shape() {
    let v = json(&["einstein", "--op", "metric", "--N", "4"]);
    let first = &v[0];
    assert_eq!(first["source"].as_array().unwrap().len(), 2);
    let target = &first["targets"][0];
    assert_eq!(target["pair"].as_array().unwrap().len(), 2);
    assert!(target["re"].is_number() && target["im"].is_number());
}

#[test]
fn zscan_bounds_hold() {
    let v = json(&["zscan", "--max-level", "4"]);
    assert_eq!(v["passed"], true);
    assert_eq!(v["extremes"].as_array().unwrap().len(), 11);
    assert_eq!(v["levels"][1]["min_abs_z"], 1.0);
}

#[test]
fn strict_complement_mode_is_recorded() {
    let a = json(&["mu", "--set", "not(cyl:1;|2;0<1)", "--max-level", "4"]);
    let b = json(&["mu", "--set", "not(cyl:1;|2;0<1)", "--max-level", "4", "--strict-complement"]);
    assert_eq!(a["complement"], "computational");
    assert_eq!(b["complement"], "literal");
    assert_eq!(mu_values(&a)[1..], mu_values(&b)[1..]);
}
