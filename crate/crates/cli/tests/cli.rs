use std::process::{Command, Output};

fn icsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icsim")).args(args).output().unwrap()
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr);
    assert_eq!(text.trim_end().lines().count(), 1, "expected one diagnostic line, got {text:?}");
    text.trim_end().to_string()
}

#[test]
fn run_writes_header_and_one_row_to_stdout() {
    let out = icsim(&["run", "--steps", "20", "--cars", "4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# icsim run config_hash="));
    assert!(lines[1].starts_with("run_id,seed,car_count"));
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("s42-n4-r1,42,4,1,20,80,"));
}

#[test]
fn missing_scenario_file_is_one_line_error() {
    let out = icsim(&["run", "--scenario", "/definitely/not/here"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).starts_with("error: reading /definitely/not/here"));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "lane_count = 3\nwarp_factor = 9\n").unwrap();
    let out = icsim(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).contains("line 2"));
}

#[test]
fn bad_grids_are_rejected() {
    for args in [
        &["sweep-rounds", "--rounds", "4,2"][..],
        &["sweep-rounds", "--rounds", "0,1"],
        &["sweep-cars", "--counts", "2,2"],
        &["sweep-cars", "--seeds", "0"],
        &["timeline", "--interval", "0.01"],
        &["patch", "--sigma=-1", "--out", "/tmp/never.ppm"],
    ] {
        let out = icsim(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(stderr_line(&out).starts_with("error: "), "{args:?}");
    }
}

#[test]
fn usage_errors_exit_two_with_one_line() {
    for args in [&["frobnicate"][..], &["run", "--steps", "many"], &[]] {
        let out = icsim(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        stderr_line(&out);
    }
    assert!(icsim(&["--help"]).status.success());
}

#[test]
fn single_car_matches_no_comms_baseline() {
    // with no neighbours the referee knows nothing the car does not
    let out = icsim(&["sweep-cars", "--counts", "1", "--seeds", "4", "--steps", "200"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mean = text.lines().find(|l| l.starts_with("mean,")).unwrap();
    assert!(mean.contains(",1.000000"), "{mean}");
}

#[test]
fn patch_is_binary_ppm() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("green.ppm");
    let out = icsim(&["patch", "--phase", "green", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let bytes = std::fs::read(&path).unwrap();
    let header = b"P6\n24 72\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 24 * 72 * 3);
}
