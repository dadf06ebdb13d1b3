use std::path::Path;
use std::process::{Command, Output};

fn ssm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssm"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SSM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn printed_value(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in {out}"))
        .parse()
        .unwrap()
}

#[test]
fn generate_reference_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssm(
        &[
            "generate", "--k1", "0.9855", "--k2", "0.1637", "--times", "0,1,2", "--round", "4",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "t,Ca,Cb,Cc\n0,1,0,0\n1,0.3733,0.5705,0.0562\n2,0.1393,0.6973,0.1634\n"
    );
}

#[test]
fn generate_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssm(&["generate", "--times", "0", "--out", "one.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("one.csv")).unwrap();
    assert_eq!(text, "t,Ca,Cb,Cc\n0,1,0,0\n");
}

#[test]
fn generate_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssm(&["generate", "--times", "1", "--full-precision"], dir.path());
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    let ca: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(ca, (-0.9855f64).exp());
}

#[test]
fn equal_rate_constants_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssm(
        &["generate", "--k1", "0.1637", "--k2", "0.1637", "--times", "0,1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("coincide"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ssm(&["fit", "--segment", "ss9"], dir.path()).status.code(), Some(2));
    assert_eq!(
        ssm(&["fit", "--mode", "cubic", "--segment", "ss1"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ssm(&["generate", "--k1", "-1", "--times", "0"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(ssm(&["frobnicate"], dir.path()).status.code(), Some(2));
}

#[test]
fn fit_ss2_segment() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssm(
        &["fit", "--segment", "ss2", "--degree", "5", "--out-dir", "out"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let k1 = printed_value(&stdout(&o), "k1");
    assert!((k1 - 0.98649).abs() <= 1e-3, "{k1}");
    assert!(stdout(&o).contains("k1 error = "));
    for f in ["fit_ss2.csv", "errors_ss2.csv", "curves_ss2.csv"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn fit_three_point_square() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssm(
        &["fit", "--segment", "ss1-3pt", "--degree", "4", "--mode", "square"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let k1 = printed_value(&stdout(&o), "k1");
    assert!((k1 - 0.980855).abs() <= 1e-3, "{k1}");
    let report = std::fs::read_to_string(dir.path().join("ssm-out/fit_ss1-3pt.csv")).unwrap();
    assert!(report.starts_with("field,value\n"));
    assert!(report.contains("\nmode,square\n"));
}

#[test]
fn fit_data_file_with_truth() {
    let dir = tempfile::tempdir().unwrap();
    ssm(&["generate", "--times", "3,4,5,6", "--out", "ss2.csv"], dir.path());
    let o = ssm(
        &["fit", "--data", "ss2.csv", "--degree", "5", "--truth", "0.9855,0.1637"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let k1 = printed_value(&stdout(&o), "k1");
    assert!((k1 - 0.98649).abs() <= 1e-3);
    let report = std::fs::read_to_string(dir.path().join("ssm-out/fit_ss2.csv")).unwrap();
    assert!(report.contains("k1_err_percent,"));
}

#[test]
fn two_rows_at_degree_five_is_underdetermined() {
    let dir = tempfile::tempdir().unwrap();
    ssm(&["generate", "--times", "0,1", "--out", "two.csv"], dir.path());
    let o = ssm(&["fit", "--data", "two.csv", "--degree", "5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("underdetermined"), "{}", stderr(&o));
}

#[test]
fn malformed_csv_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "time,A\n0,1\n").unwrap();
    let o = ssm(&["fit", "--data", "bad.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_file_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssm(&["fit", "--data", "absent.csv"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unwritable_output_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let o = ssm(&["fit", "--segment", "ss1", "--out-dir", "blocker/sub"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn non_convergence_exit_four_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssm(&["fit", "--segment", "ss2", "--max-iterations", "1"], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
    let report = std::fs::read_to_string(dir.path().join("ssm-out/fit_ss2.csv")).unwrap();
    assert!(report.contains("\nconverged,false\n"));
}

#[test]
fn sweep_writes_stability_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssm(
        &[
            "sweep",
            "--segment",
            "ss1",
            "--noise",
            "1,-7",
            "--jobs",
            "2",
            "--out-dir",
            ".",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("stability_ss1.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "noise_percent,k1,k2,k1_err_percent,k2_err_percent,converged");
    assert!(lines[1].starts_with("1,"));
    assert!(lines[2].starts_with("-7,"));
    assert_eq!(stdout(&o), text);
}

#[test]
fn config_file_values_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"segment": "ss1-3pt", "degree": 4, "mode": "square", "out_dir": "from-config"}"#,
    )
    .unwrap();
    let o = ssm(&["--config", "run.json", "fit"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("from-config/fit_ss1-3pt.csv").exists());

    let o = ssm(&["fit", "--config", "run.json", "--out-dir", "from-flag"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("from-flag/fit_ss1-3pt.csv").exists());
}

#[test]
fn config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), r#"{"segmnt": "ss1"}"#).unwrap();
    let o = ssm(&["--config", "run.json", "fit", "--segment", "ss1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ssm"))
        .args(["fit", "--segment", "ss1"])
        .current_dir(dir.path())
        .env("SSM_OUT_DIR", "env-out")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("env-out/fit_ss1.csv").exists());
}

#[test]
fn reproduce_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = ssm(&["reproduce", "--out-dir", "rep", "--jobs", "2"], dir.path());
    let summary = std::fs::read_to_string(dir.path().join("rep/summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "check,measured,lower,upper,reference,result");
    assert_eq!(lines.iter().filter(|l| l.starts_with("fit/")).count(), 6);
    assert!(lines.iter().filter(|l| l.starts_with("stability/")).count() >= 2);
    let k2 = lines.iter().find(|l| l.starts_with("fit/ss2/k2,")).unwrap();
    let fields: Vec<&str> = k2.split(',').collect();
    assert_eq!(fields[4], "0.16373");
    let (lo, hi): (f64, f64) = (fields[2].parse().unwrap(), fields[3].parse().unwrap());
    assert!((hi - lo - 1e-3).abs() < 1e-12);
    let failing: Vec<&&str> = lines.iter().filter(|l| l.ends_with(",fail")).collect();
    let expected = if failing.is_empty() { 0 } else { 5 };
    assert_eq!(o.status.code(), Some(expected));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        ssm(
            &["sweep", "--segment", "ss1", "--jobs", "3", "--out-dir", out],
            dir.path(),
        );
        ssm(&["fit", "--segment", "ss2", "--out-dir", out], dir.path());
    }
    for f in ["stability_ss1.csv", "fit_ss2.csv", "errors_ss2.csv", "curves_ss2.csv"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}
