use std::path::Path;
use std::process::{Command, Output};

use polarkit::sim::SimResult;
use polarkit::spectrum::DistanceSpectrum;

fn polarkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polarkit"))
        .args(args)
        .env_remove("POLARKIT_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = polarkit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str], code: i32) -> String {
    let out = polarkit(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}");
    String::from_utf8(out.stderr).unwrap()
}

#[test]
fn spectrum_json_for_pi1() {
    let text = ok(&["spectrum", "--set", "psk:5", "--pi", "0,2,4,1,3", "--role", "good", "--json"]);
    let s: DistanceSpectrum = serde_json::from_str(&text).unwrap();
    assert!((s.d_min() - 2.23607).abs() < 5e-6);
    assert_eq!(s.n_min(), 4);
    assert_eq!(s.entries().len(), 1);
}

#[test]
fn spectrum_csv_for_standard() {
    let text = ok(&["spectrum", "--set", "psk:5", "--pi", "identity"]);
    assert_eq!(text, "d_over_sqrtEs,count\n1.66251,2\n2.68999,2\n");
}

#[test]
fn search_q8_lists_known_permutation() {
    let text = ok(&["search", "--set", "psk:8", "--all-optima"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["certificate"], "almost-equidistant");
    assert_eq!(v["explored"], 5040);
    let target = serde_json::json!([0, 3, 6, 1, 4, 7, 2, 5]);
    assert!(v["optima"].as_array().unwrap().contains(&target));
}

#[test]
fn bound_csv_matches_reference() {
    let text = ok(&["bound", "--set", "psk:5", "--pi", "identity", "--snr-db", "0:14:0.5"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "snr_db,pe_bound");
    assert_eq!(lines.len(), 30);
    // 2Q(d1·sqrt(SNR/2)) + 2Q(d2·sqrt(SNR/2)) via erfc
    assert_eq!(lines[1], "0,0.296923");
    assert_eq!(lines[15], "7,0.00851462");
    assert_eq!(lines[29], "14,3.8199e-09");
}

#[test]
fn exit_codes_and_flag_names() {
    let err = fails(&["spectrum", "--set", "psk:5", "--pi", "0,2,1"], 2);
    assert!(err.contains("--pi"), "{err}");
    let err = fails(&["spectrum", "--set", "psk:5", "--pi", "0,2,2,1,3"], 2);
    assert!(err.contains("--pi"), "{err}");
    let err = fails(&["spectrum", "--set", "hex:7"], 2);
    assert!(err.contains("--set"), "{err}");
    fails(&["spectrum", "--set", "psk:5", "--frobnicate"], 2);
    let err = fails(&["search", "--set", "psk:11"], 3);
    assert!(err.contains("q=11"), "{err}");
    let err = fails(&["bound", "--set", "psk:5", "--snr-db", "3:1:1"], 2);
    assert!(err.contains("--snr-db"), "{err}");
    let err = fails(&["simulate", "--set", "psk:5", "--snr-db", "1", "--threads", "0"], 2);
    assert!(err.contains("--threads"), "{err}");
}

#[test]
fn composite_gamma_note() {
    let out = polarkit(&["kernel", "--q", "5", "--gamma", "4"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not prime"));
}

#[test]
fn signalset_designs() {
    let text = ok(&["signalset", "--design", "quad", "--json"]);
    let set: polarkit::SignalSet = serde_json::from_str(&text).unwrap();
    assert_eq!(set.q(), 4);
    let out = polarkit(&["signalset", "--design", "pam3"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("2.73205"));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("label,x\n"));
}

#[test]
fn set_from_json_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("set.json");
    std::fs::write(&path, ok(&["signalset", "--set", "psk:3", "--json"])).unwrap();
    let text = ok(&["spectrum", "--set", path.to_str().unwrap()]);
    assert_eq!(text, "d_over_sqrtEs,count\n2.44949,2\n");
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("campaign.json");
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"set": "psk:5", "pi": [0, 2, 4, 1, 3], "snr_db": "4:6:1", "trials": 3000, "seed": 5}"#,
    );
    let from_cfg = ok(&["simulate", "--config", &cfg]);
    let explicit = ok(&[
        "simulate", "--set", "psk:5", "--pi", "0,2,4,1,3", "--snr-db", "4:6:1", "--trials", "3000", "--seed", "5",
    ]);
    assert_eq!(from_cfg, explicit);
    assert_eq!(from_cfg.lines().count(), 4);

    let overridden = ok(&["simulate", "--config", &cfg, "--seed", "6", "--snr-db", "4"]);
    let direct = ok(&["simulate", "--set", "psk:5", "--pi", "0,2,4,1,3", "--snr-db", "4", "--trials", "3000", "--seed", "6"]);
    assert_eq!(overridden, direct);
}

#[test]
fn config_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"set": "psk:5", "snr": 3}"#);
    let err = fails(&["bound", "--config", &cfg], 2);
    assert!(err.contains("--config"), "{err}");
}

#[test]
fn seed_env_fallback() {
    let args = ["simulate", "--set", "psk:5", "--snr-db", "3", "--trials", "2000"];
    let with_env = Command::new(env!("CARGO_BIN_EXE_polarkit"))
        .args(args)
        .env("POLARKIT_SEED", "77")
        .output()
        .unwrap();
    assert!(with_env.status.success());
    let mut flagged = args.to_vec();
    flagged.extend(["--seed", "77"]);
    assert_eq!(String::from_utf8(with_env.stdout).unwrap(), ok(&flagged));
    assert_ne!(ok(&args), ok(&flagged));
}

#[test]
fn simulate_writes_campaign_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ok(&[
        "simulate", "--set", "psk:5", "--role", "bad", "--snr-db", "2:4:1", "--trials", "1000", "--campaign", "ex1",
        "--out", d,
    ]);
    let csv = std::fs::read_to_string(dir.path().join("ex1.bad.csv")).unwrap();
    assert!(csv.starts_with("snr_db,trials,errors,rate,ci_lo,ci_hi,bound\n"));
    assert_eq!(csv.lines().count(), 4);
    for line in csv.lines().skip(1) {
        assert!(!line.ends_with(','), "bound column is filled: {line}");
    }
}

#[test]
fn simulate_json_round_trips() {
    let text = ok(&["simulate", "--set", "psk:5", "--snr-db", "5", "--trials", "500", "--json"]);
    let r: SimResult = serde_json::from_str(&text).unwrap();
    assert_eq!(r.points.len(), 1);
    assert_eq!(r.points[0].trials, 500);
    assert!(r.bound_overlay.is_some());
    let again = serde_json::to_string_pretty(&r).unwrap() + "\n";
    assert_eq!(again, text);
}

#[test]
fn thread_count_does_not_change_output() {
    let base = ["simulate", "--set", "psk:5", "--snr-db", "0:6:2", "--trials", "20000", "--seed", "3"];
    let mut one = base.to_vec();
    one.extend(["--threads", "1"]);
    let mut three = base.to_vec();
    three.extend(["--threads", "3"]);
    assert_eq!(ok(&one), ok(&three));
}

#[test]
fn construct_and_fer() {
    let text = ok(&[
        "construct", "--set", "psk:4", "--pi", "0,2,1,3", "--stages", "3", "--snr-db", "3", "--trials", "500",
    ]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,error_rate,stderr");
    assert_eq!(lines.len(), 9);

    let text = ok(&[
        "construct", "--set", "psk:4", "--stages", "3", "--snr-db", "3", "--trials", "500", "--info", "4", "--json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["config"]["frozen"].as_array().unwrap().len(), 4);

    let text = ok(&[
        "fer", "--set", "psk:4", "--pi", "0,2,1,3", "--stages", "3", "--snr-db", "2:4:2", "--trials", "300",
        "--construct-trials", "300",
    ]);
    assert_eq!(text.lines().count(), 3);
    fails(&["fer", "--set", "psk:4", "--stages", "3", "--snr-db", "2", "--info", "9"], 2);
}
