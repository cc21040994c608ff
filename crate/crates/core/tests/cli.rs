use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn paracheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paracheck")).args(args).output().expect("binary runs")
}

fn builtin_json(name: &str) -> Value {
    serde_json::from_str(paracheck::scenario::builtin(name).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn list_checks_names_the_catalog() {
    let out = paracheck(&["list-checks"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 18);
    let thm = text.lines().find(|l| l.starts_with("thm-5.3 ")).unwrap();
    assert!(thm.contains(r"A_{ntX}Z-A_{\varphi Z}tX=-\frac{\lambda}{3}(Z\mu)X"), "{thm}");
    let killing = text.lines().find(|l| l.starts_with("prop-2.2 ")).unwrap();
    assert!(killing.contains(r"g(\widetilde\nabla_{X}\xi,Y)+g(\widetilde\nabla_{Y}\xi,X)=0"), "{killing}");
}

#[test]
fn product_scenario_passes_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = paracheck(&["run", "builtin:product-tg", "--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["schema"], 1);
    assert_eq!(r["summary"]["n_fail"], 0);
    assert_eq!(r["summary"]["n_flagged"], 0);
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = builtin_json("product-tg");
    s["checks"] = json!(["ax-phi2", "def-nearly-para-sasakian"]);
    let path = write(dir.path(), "s.json", &s);
    let o = paracheck(&["run", &path, "--points", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stdout).unwrap().contains("FAIL"));
}

#[test]
fn reference_mode_turns_failures_into_flags() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = builtin_json("product-tg");
    s["checks"] = json!([{"id": "def-nearly-para-sasakian", "mode": "reference"}]);
    let path = write(dir.path(), "s.json", &s);
    let o = paracheck(&["run", &path, "--points", "2", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["summary"]["n_fail"], 0);
    assert!(r["summary"]["n_flagged"].as_u64().unwrap() > 0);
}

#[test]
fn malformed_expression_exits_two_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = builtin_json("example-4.1");
    s["immersion"]["components"][1] = json!("v*cosh(beta");
    let path = write(dir.path(), "s.json", &s);
    let o = paracheck(&["run", &path]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("immersion.components[1]") && err.contains("offset 11"), "{err}");
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(paracheck(&["run", "builtin:nope"]).status.code(), Some(2));
    assert_eq!(paracheck(&["run", "/nonexistent/scenario.json"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let mut s = builtin_json("product-tg");
    s.as_object_mut().unwrap().remove("warp");
    s["checks"] = json!(["thm-5.1"]);
    let path = write(dir.path(), "nowarp.json", &s);
    let o = paracheck(&["run", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("warping data"));
    let mut s = builtin_json("product-tg");
    s["distributions"]["d_lambda"] = json!(["u", "zz"]);
    let path = write(dir.path(), "badname.json", &s);
    let o = paracheck(&["run", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("distributions.d_lambda[1]"));
}

#[test]
fn thread_count_does_not_change_the_report() {
    let a = paracheck(&["run", "builtin:example-4.1", "--points", "6", "--format", "json", "--threads", "1"]);
    let b = paracheck(&["run", "builtin:example-4.1", "--points", "6", "--format", "json", "--threads", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_override_changes_points_and_digest() {
    let run = |seed: &str| -> Value {
        let o = paracheck(&["run", "builtin:synthetic-slant", "--points", "3", "--seed", seed, "--format", "json"]);
        serde_json::from_slice(&o.stdout).unwrap()
    };
    let (a, b) = (run("1"), run("2"));
    assert_ne!(a["digest"], b["digest"]);
    assert_ne!(a["rows"][0]["point"], b["rows"][0]["point"]);
    assert_eq!(a["seed"], 1);
}

/// example-4.1 at (v, α, β, t) = (2, 0.3, −0.5, 1). With Z1 = ∂v, Z2 = ∂α,
/// Z3 = ∂β: G = diag(2, −v², −v², 1), tZ1 = (Z2 + Z3)/v, tZ2 = tZ3 = (v/2)Z1,
/// so t² on D_λ is [[1,0,0],[0,½,½],[0,½,½]] and ρ = (1, ½, ½). The fiber
/// block is v² diag(−1, −1), so f = |v| = 2 with f(2) = 2.
#[test]
fn example41_single_point_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = builtin_json("example-4.1");
    s["sampling"] = json!({"explicit": {"points": [[2.0, 0.3, -0.5, 1.0]]}});
    let path = write(dir.path(), "pt.json", &s);
    let o = paracheck(&["run", &path, "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let close = |v: &Value, x: f64| (v.as_f64().unwrap() - x).abs() < 1e-12;
    let g = &r["metadata"]["gram"]["matrix"];
    let want_g = [[2.0, 0.0, 0.0, 0.0], [0.0, -4.0, 0.0, 0.0], [0.0, 0.0, -4.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
    for i in 0..4 {
        for j in 0..4 {
            assert!(close(&g[i][j], want_g[i][j]), "G[{i}][{j}] = {}", g[i][j]);
        }
    }
    let t2 = &r["metadata"]["slant"]["t_squared"];
    let want_t2 = [[1.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.0, 0.5, 0.5]];
    for i in 0..3 {
        for j in 0..3 {
            assert!(close(&t2[i][j], want_t2[i][j]), "t²[{i}][{j}] = {}", t2[i][j]);
        }
    }
    let rho = &r["metadata"]["slant"]["ratios"];
    for (k, want) in [1.0, 0.5, 0.5].into_iter().enumerate() {
        assert!(close(&rho[k], want), "ρ[{k}] = {}", rho[k]);
    }
    assert!(close(&r["metadata"]["warp"]["f_values"][0], 2.0));
    assert_eq!(r["metadata"]["hypotheses"]["pr_anti_slant"], false);
}
