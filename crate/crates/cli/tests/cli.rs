use std::path::Path;
use std::process::{Command, Output};

use noether_cli::fixtures::FIXTURES;
use noether_cli::{normalize_whitespace, parse_model};

fn noether(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noether"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn every_fixture_runs_through_every_command() {
    let dir = tempfile::tempdir().unwrap();
    for (name, _) in FIXTURES {
        for cmd in ["derive", "verify", "integral", "simulate"] {
            let o = noether(&[cmd, &format!("case:{name}")], dir.path());
            assert_ne!(code(&o), 2, "{cmd} {name}: {}", String::from_utf8_lossy(&o.stderr));
            assert!(dir.path().join(format!("{name}.{cmd}.json")).exists());
            assert!(dir.path().join(format!("{name}.{cmd}.txt")).exists());
        }
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&noether(&["verify", "case:A"], dir.path())), 0);
    assert_eq!(code(&noether(&["verify", "case:B"], dir.path())), 1);
    assert_eq!(code(&noether(&["verify", "case:Z"], dir.path())), 2);
    assert_eq!(code(&noether(&["verify", "case:A", "--fixed-lapse", "x"], dir.path())), 2);
    let bad = dir.path().join("bad.model");
    std::fs::write(&bad, "[space]\nn = 1\ncoordinates = x\n\n[g]\ng.1.1 = 1\n\n[potentials]\nV0 = y\n").unwrap();
    let o = noether(&["derive", bad.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 9"));
}

#[test]
fn machine_reports_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for cmd in ["verify", "integral", "simulate"] {
        noether(&[cmd, "case:C"], a.path());
        noether(&[cmd, "case:C"], b.path());
        let file = format!("C.{cmd}.json");
        assert_eq!(std::fs::read(a.path().join(&file)).unwrap(), std::fs::read(b.path().join(&file)).unwrap());
    }
    let csv = "C.trajectory.csv";
    assert_eq!(std::fs::read(a.path().join(csv)).unwrap(), std::fs::read(b.path().join(csv)).unwrap());
}

#[test]
fn reports_match_the_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for cmd in ["verify", "integral"] {
        noether(&[cmd, "case:A"], dir.path());
        let got = std::fs::read_to_string(dir.path().join(format!("A.{cmd}.json"))).unwrap();
        let want = std::fs::read_to_string(golden.join(format!("A.{cmd}.json"))).unwrap();
        assert_eq!(got, want, "A.{cmd}.json");
    }
}

#[test]
fn machine_report_path_and_trajectory_export() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("custom.json");
    let o = Command::new(env!("CARGO_BIN_EXE_noether"))
        .args(["simulate", "case:D", "--machine-report"])
        .arg(&json)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["simulation"]["samples"], 5001);
    let csv = std::fs::read_to_string(dir.path().join("D.trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x,xdot,N,H,I:Di,lambda:Di");
    assert_eq!(lines.count(), 5001);
}

#[test]
fn seed_and_fixed_lapse_flags_reach_the_report() {
    let dir = tempfile::tempdir().unwrap();
    noether(&["verify", "case:A", "--seed", "7", "--fixed-lapse", "2", "--order", "0"], dir.path());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("A.verify.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["order"], 0);
    assert_eq!(report["fixed_lapse"], "2");
}

#[test]
fn fixtures_round_trip_through_render() {
    for (name, text) in FIXTURES {
        let doc = parse_model(text).unwrap();
        let rendered = doc.render();
        let again = parse_model(&rendered).unwrap_or_else(|d| panic!("{name}: {d}"));
        assert_eq!(again, doc, "{name}");
        assert_eq!(normalize_whitespace(&again.render()), normalize_whitespace(&rendered), "{name}");
    }
}
