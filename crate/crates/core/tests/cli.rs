use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use poissonkit::catalog;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_poissonkit"));
    c.env_remove("POISSONKIT_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn export(dir: &TempDir, name: &str) -> PathBuf {
    let path = dir.path().join(format!("{name}.json"));
    let o = run(&["catalog", "--export", name, path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    path
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let kepler = export(&dir, "kepler2_neg");
    let o = run(&["verify", s(&kepler)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("corank m = 1"));

    let pair = write(
        &dir,
        "pair.json",
        r#"{"dimension": 4, "coordinates": ["q1", "q2", "p1", "p2"], "box": [[-1,1],[-1,1],[-1,1],[-1,1]],
            "poisson": {"type": "canonical", "pairs": 2},
            "functions": {"Q": "q1", "P": "p1"},
            "system": {"kind": "completely_integrable", "generators": ["Q", "P"]}}"#,
    );
    assert_eq!(code(&run(&["verify", s(&pair)])), 2);

    let mut osc: Value = serde_json::from_str(&std::fs::read_to_string(export(&dir, "oscillator2")).unwrap()).unwrap();
    osc["system"]["kind"] = "partially_superintegrable".into();
    let undecided = write(&dir, "undecided.json", &osc.to_string());
    assert_eq!(code(&run(&["verify", s(&undecided)])), 3);

    let malformed = write(&dir, "bad.json", "{\"dimension\": 2,");
    let o = run(&["verify", s(&malformed)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("malformed"));
}

#[test]
fn catalog_entries_round_trip_through_verify() {
    let dir = TempDir::new().unwrap();
    for e in catalog::catalog() {
        let spec = export(&dir, e.name);
        let report = dir.path().join(format!("{}-report.json", e.name));
        let o = run(&["verify", s(&spec), "--json", s(&report), "--no-meta"]);
        assert!(matches!(code(&o), 0 | 2 | 3), "{}", e.name);
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        for (kind, label) in &e.expected {
            let got = doc["report"]["verdicts"][kind.name()]["status"].as_str().unwrap();
            let expected = match *label {
                "Pass" => "pass",
                "Fail" => "fail",
                "NonRegular" => "non_regular",
                _ => "not_tested",
            };
            assert_eq!(got, expected, "{} {kind}", e.name);
        }
        assert!(doc.get("meta").is_none());
    }
}

#[test]
fn json_reports_are_reproducible_and_seed_env_is_overridden_by_flag() {
    let dir = TempDir::new().unwrap();
    let spec = export(&dir, "kepler2_pos");
    let report = |name: &str, args: &[&str], env: Option<&str>| -> Vec<u8> {
        let path = dir.path().join(name);
        let mut c = bin();
        c.args(["verify", s(&spec), "--no-meta", "--json", s(&path)]).args(args);
        if let Some(seed) = env {
            c.env("POISSONKIT_SEED", seed);
        }
        assert_eq!(c.output().unwrap().status.code(), Some(0));
        std::fs::read(path).unwrap()
    };
    let a = report("a.json", &[], None);
    assert_eq!(a, report("b.json", &[], None));
    let from_env = report("c.json", &[], Some("7"));
    assert_eq!(from_env, report("d.json", &["--seed", "7"], None));
    assert_ne!(a, from_env);
    assert_eq!(a, report("e.json", &["--seed", "42"], Some("7")));

    let with_meta = dir.path().join("meta.json");
    run(&["verify", s(&spec), "--json", s(&with_meta)]);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(with_meta).unwrap()).unwrap();
    assert!(doc["meta"]["generated_at_unix"].as_u64().unwrap() > 0);
}

#[test]
fn flows() {
    let dir = TempDir::new().unwrap();
    let osc = export(&dir, "oscillator2");
    let csv = dir.path().join("osc.csv");
    let final_row = |t_end: &str| -> Vec<f64> {
        let o = run(&[
            "flow", s(&osc), "--hamiltonian", "H", "--from", "1,0,0,0", "--t-end", t_end, "--step", "1e-3",
            "--monitor", "H", "--csv", s(&csv),
        ]);
        assert_eq!(code(&o), 0);
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("t,q1,q2,p1,p2,H\n"));
        text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect()
    };
    let period = final_row("6.283185307179586");
    assert!((period[1] - 1.0).abs() < 1e-6 && period[3].abs() < 1e-6, "{period:?}");
    // the exact flow at t is (cos t, -sin t)
    let t: f64 = 6.2832;
    let row = final_row("6.2832");
    assert!((row[1] - t.cos()).abs() < 1e-6 && (row[3] + t.sin()).abs() < 1e-6, "{row:?}");

    let o = run(&["flow", s(&osc), "--hamiltonian", "H", "--from", "1,0,0,0", "--t-end", "0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 2);

    let kepler = export(&dir, "kepler2_neg");
    let o = run(&["flow", s(&kepler), "--hamiltonian", "H", "--from", "1,0,-0.2,0", "--t-end", "5"]);
    assert_eq!(code(&o), 4);
    let out = stdout(&o);
    assert!(out.lines().count() > 10);
    assert!(out.trim_end().lines().last().unwrap().starts_with("# aborted: guard exit at t="));

    assert_eq!(code(&run(&["flow", s(&osc), "--hamiltonian", "nope", "--from", "1,0,0,0", "--t-end", "1"])), 1);
    assert_eq!(code(&run(&["flow", s(&osc), "--hamiltonian", "H", "--from", "1,0", "--t-end", "1"])), 1);
    assert_eq!(
        code(&run(&["flow", s(&osc), "--hamiltonian", "H", "--from", "1,0,0,0", "--t-end", "1", "--monitor", "nope"])),
        1
    );
}

#[test]
fn fit_recursion_and_check_map() {
    let dir = TempDir::new().unwrap();
    let kepler = export(&dir, "kepler2_pos");
    let o = run(&["fit", s(&kepler)]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("{A2, A1} = -1.000000000 M"), "{out}");
    assert!(out.contains("{A1, M} = +1.000000000 A2"), "{out}");

    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let o = run(&["catalog", "--export", "bi20_model", s(&a), "--companion", s(&b)]);
    assert_eq!(code(&o), 0);
    let o = run(&["recursion", s(&a), s(&b), "--at", "0.3,-0.7,0.1,0.2,0.4"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("det R = 1.000000000"));
    let osc = export(&dir, "oscillator2");
    let zero = write(
        &dir,
        "zero.json",
        r#"{"dimension": 4, "coordinates": ["q1", "q2", "p1", "p2"], "box": [[-1,1],[-1,1],[-1,1],[-1,1]],
            "poisson": {"type": "matrix", "upper_entries": {}},
            "functions": {"Q": "q1"}, "system": {"kind": "unspecified", "generators": ["Q"]}}"#,
    );
    let o = run(&["recursion", s(&osc), s(&zero), "--at", "0,0,0,0"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("distributions differ"));

    let osc2 = dir.path().join("osc2.json");
    let map = dir.path().join("polar.json");
    run(&["catalog", "--export", "oscillator2", s(&osc2), "--map", s(&map)]);
    let polar = ["check-map", s(&osc2), "--map", s(&map), "--pattern", "symplectic-aa"];
    let o = run(&[&polar[..], &["--actions", "I1,I2", "--angles", "phi1,phi2"]].concat());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let o = run(&[&polar[..], &["--actions", "phi1,phi2", "--angles", "I1,I2"]].concat());
    assert_eq!(code(&o), 2);
    let scale = write(
        &dir,
        "scale.json",
        r#"{"target_coordinates": ["Q1", "Q2", "P1", "P2"], "forward": ["2*q1", "2*q2", "p1", "p2"]}"#,
    );
    let o = run(&[
        "check-map", s(&osc2), "--map", s(&scale), "--pattern", "poisson-aa", "--actions", "P1,P2", "--angles", "Q1,Q2",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("max deviation 1.000e0"));
    let o = run(&["check-map", s(&osc2), "--map", s(&scale), "--pattern", "bogus", "--actions", "P1", "--angles", "Q1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn catalog_command_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.json");
    assert_eq!(code(&run(&["catalog", "--export", "nope", s(&out)])), 1);
    assert_eq!(code(&run(&["catalog", "--export", "so3_rigid", s(&out), "--companion", s(&out)])), 1);
}
