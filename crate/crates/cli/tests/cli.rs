//! End-to-end runs of the spairy binary: exit-code contract, artifact
//! shapes, rejection paths, and bit-identical reruns.

use std::path::PathBuf;
use std::process::{Command, Output};

fn spairy(args: &[&str], out: &PathBuf) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spairy"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn tmpdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spairy-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn table_produces_tables_and_exits_zero() {
    let out = tmpdir("table");
    let o = spairy(
        &[
            "table", "--lambda", "0.5", "--t", "1", "--nmax", "6", "--digits", "30",
        ],
        &out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(out.join("recurrence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,alpha,beta,h,p1,D");
    assert_eq!(lines.len(), 8, "header + 7 rows");

    let moments: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("moments.json")).unwrap()).unwrap();
    assert_eq!(moments["lambda"], "0.5");
    assert_eq!(moments["t"], "1");
    assert_eq!(moments["digits"], 30);
    assert_eq!(moments["mu"].as_array().unwrap().len(), 14);

    let rec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("recurrence.json")).unwrap())
            .unwrap();
    assert!(rec["moment_table_hash"].as_str().unwrap().len() == 16);
    assert_eq!(rec["table"]["rows"].as_array().unwrap().len(), 7);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let out1 = tmpdir("det1");
    let out2 = tmpdir("det2");
    let args = [
        "table", "--lambda", "0.5", "--t", "0.1", "--nmax", "5", "--digits", "31",
    ];
    assert_eq!(code(&spairy(&args, &out1)), 0);
    assert_eq!(code(&spairy(&args, &out2)), 0);
    for name in ["moments.json", "recurrence.csv", "recurrence.json"] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn domain_violations_are_config_errors() {
    let out = tmpdir("reject");
    // λ must exceed -1
    let o = spairy(
        &[
            "table", "--lambda", "-1", "--t", "1", "--nmax", "5", "--digits", "30",
        ],
        &out,
    );
    assert_eq!(code(&o), 5);
    // jmax below 2 nmax + 1
    let o = spairy(
        &[
            "table", "--lambda", "0", "--t", "1", "--nmax", "20", "--jmax", "30", "--digits", "30",
        ],
        &out,
    );
    assert_eq!(code(&o), 5);
    // digits below 30
    let o = spairy(
        &[
            "table", "--lambda", "0", "--t", "1", "--nmax", "5", "--digits", "20",
        ],
        &out,
    );
    assert_eq!(code(&o), 5);
    // negative t
    let o = spairy(
        &[
            "table", "--lambda", "0", "--t", "-0.5", "--nmax", "5", "--digits", "30",
        ],
        &out,
    );
    assert_eq!(code(&o), 5);
}

#[test]
fn verify_passes_clean_and_fails_fuzzed() {
    let out = tmpdir("verify");
    let o = spairy(
        &[
            "verify", "--lambda", "0.5", "--t", "1", "--nmax", "8", "--digits", "30",
        ],
        &out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], true);

    // a 1e-6 alpha perturbation must blow through the 1e-10 budget
    let o = spairy(
        &[
            "verify", "--lambda", "0.5", "--t", "1", "--nmax", "8", "--digits", "30", "--fuzz",
            "1e-6",
        ],
        &out,
    );
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn verify_respects_n_range() {
    let out = tmpdir("range");
    let o = spairy(
        &[
            "verify",
            "--lambda",
            "0.5",
            "--t",
            "1",
            "--nmax",
            "8",
            "--digits",
            "30",
            "--n-range",
            "2:4",
        ],
        &out,
    );
    assert_eq!(code(&o), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["n_range"], serde_json::json!([2, 4]));
    for group in report["residuals"].as_array().unwrap() {
        let n = group["n"].as_u64().unwrap();
        assert!((2..=4).contains(&n), "record outside range: n = {n}");
    }
}

#[test]
fn evolve_reports_step_ratios() {
    let out = tmpdir("evolve");
    let o = spairy(
        &[
            "evolve", "--lambda", "0.5", "--t", "1", "--n", "2", "--digits", "40",
        ],
        &out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("evolve_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["pass"], true);
    let entry = &report["entries"][0];
    assert_eq!(entry["grid"].as_array().unwrap().len(), 6);
    for ratio in entry["step_ratios"].as_array().unwrap() {
        let v: f64 = ratio["ratio"].as_str().unwrap().parse().unwrap();
        assert!((v - 4.0).abs() < 0.5, "step ratio {v}");
    }
}

#[test]
fn asympt_emits_contracting_series() {
    let out = tmpdir("asympt");
    let o = spairy(
        &[
            "asympt", "--lambda", "0.5", "--t", "1", "--nmax", "24", "--digits", "30", "--n-grid",
            "6,12,24",
        ],
        &out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("asympt_series.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,alpha_ratio,beta_ratio");
    assert_eq!(lines.len(), 4);
    let series: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("asympt_series.json")).unwrap())
            .unwrap();
    let alpha_exp: f64 = series["series"]["alpha_exponent"]
        .as_str()
        .unwrap()
        .parse()
        .unwrap();
    assert!(alpha_exp < 0.0);

    // t = 0 is admitted for the asymptotic trend
    let o = spairy(
        &[
            "asympt", "--lambda", "0.5", "--t", "0", "--nmax", "24", "--digits", "30", "--n-grid",
            "6,12,24",
        ],
        &out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
