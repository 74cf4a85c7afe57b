use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;

use approx::assert_relative_eq;
use ultraslow::mittag_leffler::kappa;
use ultraslow::report::{reproduce_example, run, selftest, Outcome};
use ultraslow::scenario::{parse_scenario, ActuatorSpec, OutputFormat, Scenario, TargetSpec, Task};
use ultraslow::spectral::BasisKind;
use ultraslow::Error;

const SCALAR_GRAMIAN_ORACLE: f64 = 0.050813008194303338006;

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn shipped(name: &str) -> PathBuf {
    scenarios_dir().join(name)
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ultraslow"))
}

const MINIMAL: &str = r#"
task = "analyze"
alpha = 0.7
domain = [[0.0, 1.0]]
region = [[[0.2, 0.9]]]
[window]
a = 2.0
b = 4.0
"#;

fn violations(text: &str) -> Vec<String> {
    match Scenario::from_toml_str(text) {
        Err(Error::Scenario(v)) => v,
        other => panic!("expected violations, got {other:?}"),
    }
}

#[test]
fn minimal_scenario_gets_defaults() {
    let s = Scenario::from_toml_str(MINIMAL).unwrap();
    assert_eq!(s.task, Task::Analyze);
    assert_eq!(s.cutoff, 6);
    assert_eq!(s.basis, BasisKind::Canonical);
    assert_eq!(s.epsilon, None);
    assert_eq!(s.actuators, ActuatorSpec::RegionZone);
    assert_eq!(s.target, TargetSpec::Zero);
    assert_eq!(s.thresholds.positive_definite, 1e-10);
    assert_eq!(s.thresholds.minimality_trials, 50);
    assert_eq!(s.output.format, OutputFormat::Both);
}

#[test]
fn region_outside_domain_names_the_box() {
    let text = MINIMAL.replace("region = [[[0.2, 0.9]]]", "region = [[[0.2, 0.5]], [[0.6, 1.4]]]");
    let v = violations(&text);
    assert_eq!(v.len(), 1);
    assert!(v[0].starts_with("region[1]:"), "{v:?}");
}

#[test]
fn every_violation_is_reported_with_its_path() {
    let text = r#"
task = "synthesize"
alpha = 1.5
epsilon = -1.0
cutoff = 0
domain = [[0.0, 1.0]]
region = [[[0.2, 1.2]]]
initial_state = [1.0, 2.0]
[window]
a = -1.0
b = -2.0
[actuators]
kind = "list"
[[actuators.list]]
support = [[[-0.5, 0.3]]]
"#;
    let v = violations(text);
    for path in ["alpha:", "epsilon:", "cutoff:", "window.a:", "window.b:", "region[0]:", "actuators.list[0].support[0]:", "initial_state:"] {
        assert!(v.iter().any(|m| m.starts_with(path)), "missing {path} in {v:?}");
    }
}

#[test]
fn missing_fields_are_listed_together() {
    let v = violations("task = \"analyze\"\n[window]\na = 1.0\n");
    for path in ["alpha:", "domain:", "region:", "window.b:"] {
        assert!(v.iter().any(|m| m.starts_with(path)), "missing {path} in {v:?}");
    }
    assert!(matches!(Scenario::from_toml_str("alpha = = 1"), Err(Error::Toml(_))));
    assert!(matches!(Scenario::from_toml_str(&format!("unknown = 3\n{MINIMAL}")), Err(Error::Toml(_))));
    assert!(matches!(Scenario::from_toml_str(&format!("{MINIMAL}c = 3\n")), Err(Error::Toml(_))));
}

#[test]
fn shipped_worked_example_is_the_reproduction_task() {
    let s = parse_scenario(&shipped("worked_example.toml")).unwrap();
    assert_eq!(s.task, Task::ReproduceExample);
    assert_eq!(s.alpha, 0.5);
    assert_eq!((s.window.a, s.window.b), (2.0, 4.0));
    assert_eq!(s.domain, vec![[-1.0, 1.0], [-1.0, 1.0]]);
    assert_eq!(s.basis, BasisKind::PaperBasis);
    let mut builtin = Scenario::worked_example();
    builtin.name = s.name.clone();
    assert_eq!(builtin, s);
}

#[test]
fn scenarios_round_trip() {
    let mut all: Vec<Scenario> = std::fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| parse_scenario(&p).unwrap())
        .collect();
    assert!(all.len() >= 5);
    let mut rich = Scenario::from_toml_str(MINIMAL).unwrap();
    rich.epsilon = Some(0.1234567890123);
    rich.target = TargetSpec::Coefficients { values: vec![0.1, -1.0 / 3.0, 1e-17, 2.5, 7.0, PI] };
    rich.initial_state = Some(vec![1.0; 6]);
    all.push(rich);
    for s in all {
        let text = s.to_toml_string().unwrap();
        assert_eq!(Scenario::from_toml_str(&text).unwrap(), s, "{text}");
    }
}

#[test]
fn identical_runs_give_identical_reports() {
    let s = parse_scenario(&shipped("modal_bank_hum.toml")).unwrap();
    let mut s = s;
    s.cutoff = 3;
    let json = |threads: Option<usize>| {
        let mut out = ultraslow::par::with_threads(threads, || run(&s)).unwrap();
        out.report.elapsed_seconds = 0.0;
        out.report_json().unwrap()
    };
    let first = json(None);
    assert_eq!(first, json(None));
    assert_eq!(first, json(Some(1)));
}

#[test]
fn analyze_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = binary()
        .args(["analyze", "--scenario"])
        .arg(shipped("whole_domain.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("NOT controllable") && stdout.contains("min eigenvalue"), "{stdout}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let max = report["outcome"]["analyze"]["verdict"]["max_eigenvalue"].as_f64().unwrap();
    assert!(max <= 1e-20);

    // A strategic 1D zone: positive margin, exit 0.
    let scenario = dir.path().join("strategic.toml");
    std::fs::write(&scenario, MINIMAL.replace("region = [[[0.2, 0.9]]]", "region = [[[0.13, 0.41]]]").replace("alpha = 0.7", "alpha = 0.7\ncutoff = 3")).unwrap();
    let out = binary().args(["analyze", "--format", "json", "--scenario"]).arg(&scenario).arg("--out").arg(dir.path().join("s")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("s/report.json").exists());
    assert!(!dir.path().join("s/spectrum.csv").exists());
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.toml");
    std::fs::write(&scenario, MINIMAL.replace("alpha = 0.7", "alpha = 0.4")).unwrap();
    let out = binary().args(["analyze", "--scenario"]).arg(&scenario).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
    let out = binary().args(["analyze", "--epsilon", "1e-3", "--scenario"]).arg(&scenario).arg("--out").arg(dir.path()).output().unwrap();
    assert!(matches!(out.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&out.stderr));
    let out = binary().args(["synthesize"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    std::fs::write(&scenario, MINIMAL.replace("alpha = 0.7", "alpha = 0.0")).unwrap();
    let out = binary().args(["simulate", "--scenario"]).arg(&scenario).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha:"));
}

#[test]
fn synthesized_single_mode_control_matches_scalar_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = binary()
        .args(["synthesize", "--format", "csv", "--scenario"])
        .arg(shipped("single_mode.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("control.csv")).unwrap();
    // d = ∫_{0.1}^{0.6} √2 sin(πx) dx, target 0.5.
    let d = 2f64.sqrt() / PI * ((0.1 * PI).cos() - (0.6 * PI).cos());
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let (t, tau, u) = (v[0], v[1], v[2]);
        let expected = 0.5 * kappa(0.7, PI * PI, tau).unwrap() / (t * d * SCALAR_GRAMIAN_ORACLE);
        assert_relative_eq!(u, expected, max_relative = 1e-9);
        rows += 1;
    }
    assert!(rows > 100);
}

#[test]
fn simulate_and_selftest_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = binary().args(["simulate", "--scenario"]).arg(shipped("minimal_1d.toml")).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let states = std::fs::read_to_string(dir.path().join("states.csv")).unwrap();
    assert_eq!(states.lines().count(), 1 + 3 * 4);
    let out = binary().args(["selftest", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("selftest.json").exists());
    assert!(selftest().unwrap().pass);
}

#[test]
fn worked_example_report_structure() {
    let s = Scenario::worked_example();
    let r = reproduce_example(&s).unwrap();
    assert!(r.basis_note.is_none());
    assert_eq!(r.checks.len(), 4);
    assert!(r.checks[0].pass && r.checks[1].pass);
    assert_eq!(r.j_table.len(), 36);
    assert!(r.j_table_pass);
    assert_eq!(r.subregion_alpha, 0.7);

    // Truncation stability of the structural outcomes.
    let mut small = s.clone();
    small.cutoff = 2;
    let r2 = reproduce_example(&small).unwrap();
    let flags = |r: &ultraslow::report::ExampleReport| r.checks.iter().map(|c| c.pass).collect::<Vec<_>>();
    assert_eq!(flags(&r2), flags(&r));

    let mut canonical = s;
    canonical.basis = BasisKind::Canonical;
    let rc = reproduce_example(&canonical).unwrap();
    assert!(rc.basis_note.unwrap().contains("basis differs from paper"));
}

#[test]
fn run_dispatches_on_task() {
    let mut s = Scenario::from_toml_str(MINIMAL).unwrap();
    s.cutoff = 2;
    for task in [Task::Simulate, Task::Analyze, Task::Synthesize] {
        s.task = task;
        let out = run(&s).unwrap();
        let matches = matches!(
            (&out.report.outcome, task),
            (Outcome::Simulate(_), Task::Simulate) | (Outcome::Analyze(_), Task::Analyze) | (Outcome::Synthesize(_), Task::Synthesize)
        );
        assert!(matches);
        assert!(!out.tables.is_empty());
    }
}
