use std::fs;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scaled-consensus"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bounds_prints_both_laws() {
    let o = cli(&["bounds", "--lambda2", "1", "--agents", "6"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(
        s.contains("gal") && s.contains("0.8243") && s.contains("1.9616"),
        "{s}"
    );
    assert!(
        s.contains("double-power") && s.contains("1.3583") && s.contains("4.0533"),
        "{s}"
    );
}

#[test]
fn even_exponent_is_a_usage_error() {
    let o = cli(&["bounds", "--gamma1", "2/3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("odd"));
}

#[test]
fn unknown_arguments_exit_with_one_and_help_with_zero() {
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cli(&["simulate"]).status.code(), Some(1));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(cli(&["--version"]).status.code(), Some(0));
}

#[test]
fn simulate_writes_csv_svg_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cli(&["simulate", "example1_c2_gal", "--out-dir", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("verdict = PASS"), "{s}");
    assert!(s.contains("lambda2 = 1.000000"), "{s}");
    let csv = fs::read_to_string(dir.path().join("example1_c2_gal.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5002);
    assert!(dir.path().join("example1_c2_gal.svg").exists());
    assert!(dir.path().join("example1_c2_gal.report.txt").exists());
}

#[test]
fn csv_only_skips_the_chart() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cli(&[
        "simulate",
        "example2_c4_gal",
        "-o",
        out,
        "--csv-only",
        "--horizon",
        "2",
    ]);
    assert!(o.status.success());
    assert!(dir.path().join("example2_c4_gal.csv").exists());
    assert!(!dir.path().join("example2_c4_gal.svg").exists());
}

#[test]
fn unsettled_run_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cli(&["simulate", "example1_c1_dp", "-o", out, "--horizon", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("did not settle"));
}

#[test]
fn scenario_file_with_bad_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let src =
        include_str!("../scenarios/example1_c1_gal.toml").replace("kappa1 = 1.0", "kappa1 = -1.0");
    let path = dir.path().join("bad.toml");
    fs::write(&path, src).unwrap();
    let o = cli(&[
        "simulate",
        path.to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kappa1"));
}

#[test]
fn reproduce_example2_reports_ordering_and_sign_groups() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&[
        "reproduce",
        "example2",
        "-o",
        dir.path().to_str().unwrap(),
        "--csv-only",
    ]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(s.matches("gal faster").count(), 2, "{s}");
    assert!(
        s.contains("example2_c3_gal: final x > 0 for agents {1,5,6}"),
        "{s}"
    );
    for name in [
        "example2_c3_gal",
        "example2_c3_dp",
        "example2_c4_gal",
        "example2_c4_dp",
    ] {
        assert!(dir.path().join(format!("{name}.csv")).exists());
    }
}

#[test]
fn al_ode_flags_nothing_for_default_sweep() {
    let o = cli(&["al-ode"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert_eq!(s.matches(" ok").count(), 12, "{s}");
    assert!(!s.contains("OUT OF INTERVAL"));
}
