use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../scenarios/{name}.toml"))
}

fn regflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regflow"))
        .args(args)
        .output()
        .unwrap()
}

fn run(sub: &str, name: &str, extra: &[&str]) -> Output {
    let path = scenario(name);
    let mut args = vec![sub, "--scenario", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    regflow(&args)
}

fn value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .to_string()
}

#[test]
fn exit_codes() {
    assert_eq!(run("check", "one_gap_rest", &[]).status.code(), Some(0));
    assert_eq!(
        run("check", "one_gap_collision", &[]).status.code(),
        Some(1)
    );
    assert_eq!(
        run("check", "central_repulsive", &[]).status.code(),
        Some(2)
    );
    assert_eq!(run("validate", "filippov", &[]).status.code(), Some(0));
    assert_eq!(run("check", "does_not_exist", &[]).status.code(), Some(3));
    assert_eq!(regflow(&["check"]).status.code(), Some(3));
    assert_eq!(regflow(&["--help"]).status.code(), Some(0));
}

#[test]
fn parse_errors_name_the_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "horizon = 1.0\nvelocity = \"x\"\n\n[domain]\nkind = \"interval\"\nlower = [0.0]\nupper = [1.0]\n\n[force]\nkind = \"bogus\"\n",
    )
    .unwrap();
    let out = regflow(&["check", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bogus") && err.contains("line 10"), "{err}");
}

#[test]
fn filippov_first_collision_near_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        "simulate",
        "filippov",
        &["--out", dir.path().to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("collisions.txt")).unwrap();
    assert_eq!(text.as_bytes(), &out.stdout[..]);
    let t: f64 = value(&text, "t_first").parse().unwrap();
    assert!((0.99..=1.01).contains(&t), "{t}");
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 2001);
}

#[test]
fn field_matches_expanding_flow() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        "field",
        "expanding",
        &["--out", dir.path().to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("field.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let (t, y, u) = (cols[0], cols[1], cols[2]);
        assert!((u - y / (1.0 + t)).abs() < 1e-8, "{line}");
        rows += 1;
    }
    assert!(rows > 100);
    let summary = fs::read_to_string(dir.path().join("field_summary.txt")).unwrap();
    assert!(summary.contains("res_euler"));
}

#[test]
fn field_stops_short_of_collision() {
    let out = run("field", "filippov", &["--grid", "201"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("note: first collision"), "{text}");
    let t_end: f64 = value(&text, "t_end").parse().unwrap();
    assert!(t_end < 1.0);
}

#[test]
fn flags_override_the_file() {
    let out = run(
        "simulate",
        "uniform_push",
        &["--grid", "17", "--horizon", "1.5"],
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(value(&text, "grid"), "17");
    assert_eq!(value(&text, "horizon"), "1.5");
    assert_eq!(
        run("simulate", "uniform_push", &["--grid", "1"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn report_lists_hypotheses() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        "report",
        "growing_force",
        &["--out", dir.path().to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("assumptions.txt")).unwrap();
    assert!(text.contains("[smooth-general]"), "{text}");
}

#[test]
fn validate_writes_one_block_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        "validate",
        "half_space_collision",
        &["--out", dir.path().to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("validation.txt")).unwrap();
    assert!(text.starts_with("== half_space_collision ==\n"));
    assert_eq!(value(&text, "agreement"), "AGREE");
}
