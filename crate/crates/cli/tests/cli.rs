use std::path::Path;
use std::process::{Command, Output};

use revhom::melnikov::compute_bbar2_closed;

fn revhom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revhom")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn result_json(out: &Output) -> serde_json::Value {
    let v: serde_json::Value = serde_json::from_str(&stdout(out)).unwrap();
    v["result"].clone()
}

#[test]
fn resonance_table() {
    let text = stdout(&revhom(&["resonance", "--ell", "0,1,2"]));
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# revhom resonance config={"));
    assert_eq!(lines.next(), Some("ell,beta1"));
    assert_eq!(lines.next(), Some("0,1.7071067812"));
    assert_eq!(lines.next(), Some("1,7.5355339059"));
    assert_eq!(lines.next(), Some("2,17.3639610307"));
}

#[test]
fn melnikov_pitchfork_report() {
    let r = result_json(&revhom(&["melnikov", "--mode", "pitchfork"]));
    let closed = compute_bbar2_closed(2.0, 0).unwrap();
    let bbar2 = r["bbar2"].as_f64().unwrap();
    assert!((bbar2 - closed).abs() <= 1e-6 * closed.abs());
    assert_eq!(r["classification"], "pitchfork-sub");
    assert!(r["abar2"].as_f64().unwrap() < 0.0);
}

#[test]
fn melnikov_pitchfork_with_asymmetric_term_uses_symmetric_part() {
    let r = result_json(&revhom(&["melnikov", "--mode", "pitchfork", "--beta3", "4"]));
    assert_eq!(r["classification"], "pitchfork-sub");
    assert!(r["note"].as_str().is_some_and(|n| n.contains("beta3")), "{r}");
}

#[test]
fn continuation_reports_fold() {
    let text = stdout(&revhom(&["continue", "--ell", "0", "--beta3", "4", "--max-steps", "40"]));
    assert!(text.lines().next().unwrap().starts_with("# revhom continue"));
    assert!(text.lines().any(|l| l == "index,param,x2_at_0,max_x2,min_x2,l2_norm,arclength,special"));
    let fold: Vec<&str> = text.lines().filter(|l| l.ends_with(",FOLD")).collect();
    assert_eq!(fold.len(), 1);
    let param: f64 = fold[0].split(',').nth(1).unwrap().parse().unwrap();
    assert!(param.abs() <= 1e-4);
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["melnikov", "--mode", "bogus"],
        vec!["continue", "--param", "beta1", "--range", "0,1"],
        vec!["monodromy", "--blocks", "3"],
        vec!["resonance", "--no-such-flag"],
    ] {
        let out = revhom(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"kind": "resonance", "params": {"s": 3.0, "ell": [0, 1]}}"#).unwrap();
    let p = path.to_str().unwrap();
    let from_file = stdout(&revhom(&["resonance", "--config", p]));
    let want = revhom::duffing::resonance_beta1(3.0, 1).unwrap();
    assert!(from_file.contains(&format!("1,{want:.10}")));
    let overridden = stdout(&revhom(&["resonance", "--config", p, "--s", "2"]));
    assert!(overridden.contains("1,7.5355339059"));
    assert!(!overridden.contains("2,17.36"));

    std::fs::write(&path, r#"{"kind": "resonance", "unknown_key": 1}"#).unwrap();
    assert_eq!(revhom(&["resonance", "--config", p]).status.code(), Some(2));
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn solve_writes_identical_files_into_any_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let out = revhom(&["solve", "--ell", "1", "--beta2", "-0.05", "--beta3", "4", "--svg", "--out", d.to_str().unwrap()]);
        stdout(&out);
    }
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa, fb);
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"orbit.csv") && names.contains(&"orbit.json") && names.contains(&"orbit.svg"));
    for (name, body) in &fa {
        let text = String::from_utf8(body.clone()).unwrap();
        match name.rsplit('.').next() {
            Some("csv") => assert!(text.starts_with("# revhom solve config=")),
            Some("svg") => assert!(text.contains("<!-- revhom solve config=")),
            Some("json") => {
                let v: serde_json::Value = serde_json::from_str(&text).unwrap();
                assert_eq!(v["config"]["kind"], "solve");
            }
            _ => panic!("unexpected file {name}"),
        }
    }
}

#[test]
fn monodromy_json_per_block() {
    let r = result_json(&revhom(&["monodromy", "--blocks", "2", "--epsilons", "1e-4"]));
    let text = r.to_string();
    assert!(text.contains("sigma_plus") && text.contains("sigma_minus"), "{text}");
    assert!(r["block2"][0]["common_eigenvector_angle"].as_f64().unwrap() <= 1e-5);
}
