use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rflow")).args(args).output().expect("spawn rflow")
}

fn scenario(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name).to_string_lossy().into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn circle_scenario_goes_extinct() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("circle");
    let o = rflow(&["run", &scenario("circle_shrink.json"), "--out", s(&out), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let events = std::fs::read_to_string(out.join("events.csv")).unwrap();
    assert!(events.starts_with("time,kind,x,y\n"));
    assert!(events.contains(",extinction,"));
    assert!(!events.contains(",pinch,"));
    let series = std::fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(series.starts_with("time,area,perimeter,min_kappa,min_kappa_r,max_kappa_r,neck_width\n"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("run_report.json")).unwrap()).unwrap();
    for f in report["files"].as_array().unwrap() {
        assert!(out.join(f.as_str().unwrap()).exists());
    }
}

#[test]
fn thin_dumbbell_scenario_pinches() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rflow(&["run", &scenario("th1_thin_dumbbell.json"), "--out", s(tmp.path()), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let events = std::fs::read_to_string(tmp.path().join("events.csv")).unwrap();
    assert!(events.contains(",pinch,"), "{events}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run_report.json")).unwrap()).unwrap();
    assert_eq!(report["components"], 2);
    assert!(report["containment"]["first_violation"].is_null());
}

#[test]
fn malformed_scenario_exits_2_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("circle_shrink.json")).unwrap().replace("\"seed\"", "\"sead\"");
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, text).unwrap();
    let out = tmp.path().join("out");
    let o = rflow(&["run", s(&bad), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 1);
}

#[test]
fn parallel_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.json");
    let b = tmp.path().join("b.json");
    let text = std::fs::read_to_string(scenario("circle_shrink.json")).unwrap();
    std::fs::write(&a, &text).unwrap();
    std::fs::write(&b, &text).unwrap();
    let out = tmp.path().join("out");
    let o = rflow(&["run", s(&a), s(&b), "--jobs", "2", "--out", s(&out), "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    let names: Vec<PathBuf> = std::fs::read_dir(out.join("a")).unwrap().map(|e| e.unwrap().path()).collect();
    let csvs: Vec<&PathBuf> = names.iter().filter(|p| p.extension().is_some_and(|e| e == "csv")).collect();
    assert!(csvs.len() > 3);
    for p in csvs {
        let twin = out.join("b").join(p.file_name().unwrap());
        assert_eq!(std::fs::read(p).unwrap(), std::fs::read(twin).unwrap());
    }
}

#[test]
fn shape_then_kappa() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("stadium.csv");
    let o = rflow(&["make-shape", "--kind", "stadium", "--params", r#"{"half_width": 0.1, "half_length": 0.5}"#, "--n", "300", "--out", s(&csv), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = rflow(&["kappa", "--curve", s(&csv), "--r", "0.2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,x,y,kappa,ext_fits,int_fits,kappa_r_plus,kappa_r_minus,kappa_r"));
    assert_eq!(lines.count(), 300);
    let o = rflow(&["make-shape", "--kind", "stadium", "--params", r#"{"half_width": 0.1}"#, "--n", "300", "--out", s(&csv)]);
    assert_eq!(o.status.code(), Some(2));
    let o = rflow(&["kappa", "--curve", s(&tmp.path().join("missing.csv")), "--r", "0.2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_barrier_prints_one_line() {
    let o = rflow(&["verify-barrier", "g", "--r", "0.01"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let fields: Vec<&str> = text.trim_end().split(',').collect();
    assert_eq!(text.lines().count(), 1);
    assert_eq!(fields.len(), 3);
    assert!(fields[0].parse::<f64>().unwrap() >= 25.0);
    assert_eq!(fields[2], "true");
}

#[test]
fn wave_outputs_and_bad_radius() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rflow(&["wave", "--r", "2", "--out", s(tmp.path()), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("wave_report.json")).unwrap()).unwrap();
    let keys: Vec<&String> = rep.as_object().unwrap().keys().collect();
    assert_eq!(keys.len(), 9);
    for k in ["r", "ell", "x_r", "x_tilde_r", "slope_at_xr", "c11_jump", "max_branch_curvature", "vb1_residual", "translation_speed"] {
        assert!(rep[k].is_f64(), "{k}");
    }
    assert!(std::fs::read_to_string(tmp.path().join("phi.csv")).unwrap().starts_with("x,phi\n"));
    assert!(std::fs::read_to_string(tmp.path().join("hstar.csv")).unwrap().starts_with("x,h\n"));
    let o = rflow(&["wave", "--r", "0.5", "--out", s(&tmp.path().join("w"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reproduce_only_one_group() {
    let o = rflow(&["reproduce", "--only", "predicates"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2);
    assert_eq!(rflow(&["reproduce", "--only", "everything"]).status.code(), Some(2));
}
