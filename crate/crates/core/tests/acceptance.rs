//! Acceptance gate: one PASS/FAIL line per criterion. Expected values come
//! from closed forms derived by hand for each construction, never from the
//! library under test.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;

use paracheck::ambient::{self, AmbientStructure, AXIOM_IDS};
use paracheck::expr::parse;
use paracheck::par::{probe_rng, random_vector, with_threads, Execution};
use paracheck::report::{CheckReport, Status};
use paracheck::runner;
use paracheck::scenario::{Overrides, Prepared, BUILTINS};
use paracheck::slant;
use paracheck::submanifold::unit;
use paracheck::theorems::THEOREM_IDS;
use paracheck::warped::{build_warped_metric, check_prop41, WarpedSpec};
use rand::Rng;

const TOL_AXIOM: f64 = 1e-12;
const TOL_LAMBDA: f64 = 1e-9;
const TOL_PROP3: f64 = 1e-8;
const TOL_GRAM: f64 = 1e-9;
const TOL_RATIO: f64 = 1e-9;
const TOL_EIGEN: f64 = 1e-8;
const TOL_MIXED: f64 = 1e-10;
const TOL_WARP_F: f64 = 1e-8;
const TOL_G13: f64 = 1e-10;
const TOL_PROP41: f64 = 1e-6;
const TOL_CHRISTOFFEL: f64 = 1e-9;
const TOL_PRODUCT: f64 = 1e-10;
const TOL_ALGEBRA: f64 = 1e-9;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn prepared(name: &str) -> Prepared {
    runner::load(&format!("builtin:{name}"), &Overrides::default()).expect("builtin prepares")
}

fn report(p: &Prepared) -> CheckReport {
    runner::run(p, Execution::Sequential).expect("builtin runs")
}

fn rows<'a>(r: &'a CheckReport, id: &'a str, probe: usize) -> impl Iterator<Item = &'a paracheck::report::CheckRow> + 'a {
    r.rows_for(id).filter(move |row| row.point_index.is_some() && row.probe_index == probe)
}

fn random_points(seed: u64, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    let mut rng = probe_rng(seed, "acceptance", 0);
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-scale..scale)).collect()).collect()
}

fn c1_axioms() -> Outcome {
    let mut worst = 0.0f64;
    for n in 1..=3 {
        let s = AmbientStructure::canonical_paracosymplectic(n).map_err(|e| e.to_string())?;
        let pts = random_points(n as u64, 200, 2 * n + 1, 5.0);
        let rows = ambient::check_axioms(&s, &pts, TOL_AXIOM, 1, Execution::Parallel);
        for id in AXIOM_IDS {
            let k = rows.iter().filter(|r| r.check_id == *id).count();
            ensure(k == 200, format!("n={n}: {id} has {k} rows"))?;
        }
        for r in &rows {
            ensure(r.status == Status::Pass, format!("n={n}: {} residual {:e}", r.check_id, r.residual))?;
            worst = worst.max(r.residual);
        }
    }
    Ok(format!("n = 1, 2, 3 at 200 points; max residual {worst:.1e} <= {TOL_AXIOM:e}"))
}

fn c2_nearly_killing() -> Outcome {
    let s = AmbientStructure::canonical_paracosymplectic(2).map_err(|e| e.to_string())?;
    let pts = random_points(2, 50, 5, 3.0);
    let mut worst = 0.0f64;
    for r in ambient::check_nearly_paracosymplectic(&s, &pts, TOL_AXIOM, 2, Execution::Parallel)
        .into_iter()
        .chain(ambient::check_killing_xi(&s, &pts, TOL_AXIOM, 2, Execution::Parallel))
    {
        ensure(r.status == Status::Pass, format!("{} residual {:e}", r.check_id, r.residual))?;
        worst = worst.max(r.residual);
    }
    // X = Y = ∂x1: the left side vanishes on a flat parallel structure and the
    // right side is 2g(∂x1, ∂x1)ξ = 2ξ
    let ps = ambient::check_nearly_para_sasakian(&s, &pts, TOL_AXIOM, 2, Execution::Parallel);
    let mut least = f64::INFINITY;
    for r in ps.iter().filter(|r| r.probe_index == 0) {
        ensure(r.status == Status::Fail, "nearly para-Sasakian row passed")?;
        ensure(r.lhs.abs() <= TOL_AXIOM && (r.rhs - 2.0).abs() <= TOL_AXIOM, format!("lhs {} rhs {}", r.lhs, r.rhs))?;
        least = least.min(r.residual);
    }
    ensure(least >= 1.0, format!("para-Sasakian residual {least}"))?;
    Ok(format!("nearly/Killing max residual {worst:.1e}; para-Sasakian fails with residual {least}"))
}

fn c3_slant_closed_form() -> Outcome {
    let mut rng = probe_rng(3, "acceptance/ab", 0);
    let mut worst_l = 0.0f64;
    let mut worst_p = 0.0f64;
    for k in 0..20 {
        let a_abs: f64 = rng.random_range(0.6..3.0);
        let b_abs = rng.random_range(0.5..(0.9 * a_abs).max(0.50001));
        let a = if rng.random_bool(0.5) { a_abs } else { -a_abs };
        let b = if rng.random_bool(0.5) { b_abs } else { -b_abs };
        let mut s = paracheck::scenario::Scenario::load("builtin:synthetic-slant").map_err(|e| e.to_string())?;
        s.immersion.constants.insert("a".into(), a);
        s.immersion.constants.insert("b".into(), b);
        let p = runner::prepare(s, "synthetic-slant").map_err(|e| e.to_string())?;
        let r = report(&p);
        let want = a * a / (a * a - b * b);
        let got = r.metadata["slant"]["lambda_hat"].as_f64().ok_or("no lambda_hat")?;
        ensure((got - want).abs() <= TOL_LAMBDA, format!("case {k}: a={a} b={b}: λ̂ {got} vs {want}"))?;
        worst_l = worst_l.max((got - want).abs());
        for id in ["prop-3.1", "prop-3.2"] {
            for row in r.rows_for(id) {
                ensure(row.status == Status::Pass && row.residual <= TOL_PROP3, format!("case {k}: {id} {:e}", row.residual))?;
                worst_p = worst_p.max(row.residual);
            }
        }
    }
    Ok(format!("20 (a, b): max |λ̂ − a²/(a²−b²)| {worst_l:.1e}, max prop-3.x residual {worst_p:.1e}"))
}

fn c4_example41(p: &Prepared, r: &CheckReport) -> Outcome {
    ensure(p.points.len() == 50, "expected 50 points")?;
    let mut gw = 0.0f64;
    let mut ew = 0.0f64;
    for u in &p.points {
        let v = u[0];
        let g = p.sub.gram(u).map_err(|e| e.to_string())?;
        let want = [2.0, -v * v, -v * v, 1.0];
        for i in 0..4 {
            for j in 0..4 {
                let w = if i == j { want[i] } else { 0.0 };
                gw = gw.max((g[(i, j)] - w).abs());
            }
        }
        let pd = p.sub.point_data(u).map_err(|e| e.to_string())?;
        let ts = slant::t_squared_matrix(&pd, &[0, 1, 2]);
        let mut ev: Vec<f64> = slant::eigenvalues(&ts.matrix).iter().map(|e| e.0).collect();
        ev.sort_by(f64::total_cmp);
        for (x, y) in ev.iter().zip([0.0, 1.0, 1.0]) {
            ew = ew.max((x - y).abs());
        }
    }
    ensure(gw <= TOL_GRAM, format!("Gram off by {gw:e}"))?;
    ensure(ew <= TOL_EIGEN, format!("t² eigenvalues off by {ew:e}"))?;
    let mut rw = 0.0f64;
    for (probe, want) in [(1, 1.0), (2, 0.5), (3, 0.5)] {
        let got: Vec<f64> = rows(r, "def-slant", probe).map(|row| row.lhs).collect();
        ensure(got.len() == 50, format!("ρ probe {probe}: {} rows", got.len()))?;
        for x in got {
            rw = rw.max((x - want).abs());
        }
    }
    ensure(rw <= TOL_RATIO, format!("ratios off by {rw:e}"))?;
    let flagged = r.rows_for("ref-claim").any(|row| row.probe.contains(r"\lambda=\frac{1}{2}") && row.status == Status::Flagged);
    ensure(flagged, "no FLAGGED row for the λ = 1/2 claim")?;
    Ok(format!("Gram {gw:.1e}, ratios {rw:.1e}, t² eigenvalues {ew:.1e}; λ = 1/2 claim FLAGGED"))
}

fn c5_example41_warp(p: &Prepared, r: &CheckReport) -> Outcome {
    let w = &r.metadata["warp"];
    let mixed = w["mixed_residual"].as_f64().ok_or("no mixed residual")?;
    ensure(mixed <= TOL_MIXED, format!("mixed residual {mixed:e}"))?;
    let base: Vec<&str> = w["base"].as_array().ok_or("no base")?.iter().filter_map(|x| x.as_str()).collect();
    ensure(base == ["Z4", "Z1"], format!("base {base:?}"))?;
    let f: Vec<f64> = w["f_values"].as_array().ok_or("no f")?.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect();
    ensure(f.len() == p.points.len(), "rejected points")?;
    let mut fw = 0.0f64;
    for (fv, u) in f.iter().zip(&p.points) {
        fw = fw.max((fv - u[0].abs()).abs());
    }
    ensure(fw <= TOL_WARP_F, format!("f off |v| by {fw:e}"))?;
    let flagged = r.rows_for("ref-claim").any(|row| row.probe.contains("f=v^{2}") && row.status == Status::Flagged);
    ensure(flagged, "no FLAGGED row for the f = v² claim")?;
    Ok(format!("mixed {mixed:.1e}, max |f − |v|| {fw:.1e}; f = v² claim FLAGGED"))
}

fn c6_example42(p: &Prepared, r: &CheckReport) -> Outcome {
    let mut gw = 0.0f64;
    for u in &p.points {
        let g = p.sub.gram(u).map_err(|e| e.to_string())?;
        gw = gw.max((g[(0, 2)] - 1.0).abs());
    }
    ensure(gw <= TOL_G13, format!("G13 off by {gw:e}"))?;
    let orth: Vec<Status> = rows(r, "def-pr-anti-slant", 0).map(|row| row.status).collect();
    ensure(!orth.is_empty() && orth.iter().all(|s| *s == Status::Flagged), "orthogonality rows not FLAGGED")?;
    let mut rw = 0.0f64;
    for (probe, want) in [(1, 1.0 / 3.0), (2, 0.5)] {
        let got: Vec<f64> = rows(r, "def-slant", probe).map(|row| row.lhs).collect();
        ensure(got.len() == p.points.len(), "missing ratio rows")?;
        for x in got {
            rw = rw.max((x - want).abs());
        }
    }
    ensure(rw <= TOL_RATIO, format!("ratios off by {rw:e}"))?;
    let mixed = r.metadata["warp"]["mixed_residual"].as_f64().ok_or("no mixed residual")?;
    ensure(mixed >= 0.99, format!("mixed residual {mixed}"))?;
    ensure(r.status_of("warp-detect") == Some(Status::Flagged), "warp detection not FLAGGED")?;
    Ok(format!("G13 = 1 within {gw:.1e}, orthogonality FLAGGED, ratios {rw:.1e}, detection mixed residual {mixed}"))
}

fn warped_spec(f: &str) -> WarpedSpec {
    let e = |s: &str| parse(s).unwrap();
    WarpedSpec {
        base: vec!["s".into(), "v".into()],
        g_base: vec![vec![e("1"), e("0")], vec![e("0"), e("2")]],
        fiber: vec!["alpha".into(), "beta".into()],
        g_fiber: vec![vec![e("-1"), e("0")], vec![e("0"), e("-1")]],
        f: e(f),
        constants: Default::default(),
    }
}

fn c7_prop41() -> Outcome {
    let mut rng = probe_rng(7, "acceptance/warps", 0);
    let mut warps: Vec<String> = vec!["1".into(), "v".into(), "exp(s)".into()];
    for _ in 0..10 {
        let c: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..1.5)).collect();
        warps.push(format!("{:.3} + {:.3}*v^2 + exp({:.3}*s)*cosh({:.3}*v)", c[0], c[1], c[2], c[3]));
    }
    let mut pts_rng = probe_rng(7, "acceptance/points", 0);
    let pts: Vec<Vec<f64>> = (0..50)
        .map(|_| vec![pts_rng.random_range(-2.0..2.0), pts_rng.random_range(0.5..3.0), pts_rng.random_range(-1.5..1.5), pts_rng.random_range(-1.5..1.5)])
        .collect();
    let mut worst = 0.0f64;
    for f in &warps {
        let rows = check_prop41(&warped_spec(f), &pts, TOL_PROP41, Execution::Parallel);
        ensure(rows.len() == 100, format!("f = {f}: {} rows", rows.len()))?;
        for r in rows {
            ensure(r.status == Status::Pass, format!("f = {f}: residual {:e}", r.residual))?;
            worst = worst.max(r.residual);
        }
    }
    // f = e^s: Γ^α_{sα} = ∂_s ln f = 1
    let g = build_warped_metric(&warped_spec("exp(s)")).map_err(|e| e.to_string())?;
    let mut cw = 0.0f64;
    for u in &pts {
        let gamma = g.christoffels(u).map_err(|e| e.to_string())?;
        cw = cw.max((gamma.get(2, 0, 2) - 1.0).abs()).max((gamma.get(3, 0, 3) - 1.0).abs());
    }
    ensure(cw <= TOL_CHRISTOFFEL, format!("Γ^α_(sα) off by {cw:e}"))?;
    Ok(format!("{} warps at 50 points: max residual {worst:.1e}; e^s Christoffel off by {cw:.1e}", warps.len()))
}

fn c8_product(p: &Prepared, r: &CheckReport) -> Outcome {
    let m = p.sub.dim();
    let mut hw = 0.0f64;
    for u in &p.points {
        let pd = p.sub.point_data(u).map_err(|e| e.to_string())?;
        for i in 0..m {
            for j in 0..m {
                hw = hw.max(pd.h(&unit(m, i), &unit(m, j)).norm());
            }
        }
    }
    ensure(hw <= TOL_PRODUCT, format!("h = {hw:e}"))?;
    let mut tw = 0.0f64;
    for id in THEOREM_IDS.iter().copied().chain(["prop-3.1", "prop-3.2"]) {
        let rs: Vec<_> = r.rows_for(id).collect();
        ensure(!rs.is_empty(), format!("{id} did not run"))?;
        for row in rs {
            ensure(row.status == Status::Pass && row.residual <= TOL_PRODUCT, format!("{id}: {:?} residual {:e}", row.status, row.residual))?;
            tw = tw.max(row.residual);
        }
    }
    for row in r.rows_for("prop-4.2") {
        ensure(row.lhs.abs() <= TOL_PRODUCT, format!("implied Z ln f = {}", row.lhs))?;
    }
    ensure(r.exit_code() == 0, "product-tg has failures")?;
    Ok(format!("max ‖h‖ {hw:.1e}, max theorem residual {tw:.1e}, implied Z ln f = 0"))
}

fn c9_algebra(all: &[(&str, Prepared, CheckReport)]) -> Outcome {
    let mut sw = 0.0f64;
    let mut ran = 0;
    let mut tw = 0.0f64;
    for (name, p, r) in all {
        for row in r.rows_for("lem-5.1-sum") {
            ensure(row.status == Status::Pass && row.residual <= TOL_ALGEBRA, format!("{name}: lem-5.1-sum {:e}", row.residual))?;
            sw = sw.max(row.residual);
            ran += 1;
        }
        let m = p.sub.dim();
        for (i, u) in p.points.iter().enumerate().take(10) {
            let pd = p.sub.point_data(u).map_err(|e| e.to_string())?;
            let mut rng = probe_rng(9, name, i);
            for _ in 0..10 {
                let (x, y) = (random_vector(&mut rng, m), random_vector(&mut rng, m));
                let (t, n) = pd.tn_split(&x, &y);
                tw = tw.max(pd.push(&t).norm()).max(n.norm());
            }
        }
    }
    ensure(ran > 0, "lem-5.1-sum never ran")?;
    ensure(tw <= TOL_ALGEBRA, format!("TN split {tw:e}"))?;
    Ok(format!("lem-5.1-sum over {ran} rows: {sw:.1e}; TN split {tw:.1e}"))
}

fn run_cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_paracheck")).args(args).output().map(|o| o.status.code().unwrap_or(-1)).unwrap_or(-1)
}

fn c10_determinism(all: &[(&str, Prepared, CheckReport)]) -> Outcome {
    for (name, p, r) in all {
        let a = r.to_json();
        let b = report(p).to_json();
        ensure(a == b, format!("{name}: two sequential runs differ"))?;
        let c = with_threads(4, || runner::run(p, Execution::Parallel)).map_err(|e| e.to_string())?.to_json();
        ensure(a == c, format!("{name}: 1 vs 4 threads differ"))?;
    }
    let dir = std::env::temp_dir().join(format!("paracheck-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let bad_expr = dir.join("bad.json");
    let text = paracheck::scenario::builtin("synthetic-slant").unwrap().replace("\"a*q\"", "\"a*(q\"");
    std::fs::write(&bad_expr, text).map_err(|e| e.to_string())?;
    let failing = dir.join("fail.json");
    let text = paracheck::scenario::builtin("synthetic-slant").unwrap().replace("\"def-slant\",", "\"def-slant\", \"def-nearly-para-sasakian\",");
    std::fs::write(&failing, text).map_err(|e| e.to_string())?;
    let codes = [
        run_cli(&["run", "builtin:product-tg", "--points", "3"]),
        run_cli(&["run", failing.to_str().unwrap(), "--points", "3"]),
        run_cli(&["run", bad_expr.to_str().unwrap()]),
    ];
    let _ = std::fs::remove_dir_all(&dir);
    ensure(codes == [0, 1, 2], format!("exit codes {codes:?}"))?;
    Ok(format!("{} builtins byte-identical across runs and 1 vs 4 threads; exit codes {codes:?}", all.len()))
}

fn main() {
    let mut all: Vec<(&str, Prepared, CheckReport)> = Vec::new();
    for (name, _) in BUILTINS {
        let p = prepared(name);
        let r = report(&p);
        all.push((name, p, r));
    }
    let get = |n: &str| all.iter().find(|(name, _, _)| *name == n).map(|(_, p, r)| (p, r)).unwrap();
    let (e41p, e41r) = get("example-4.1");
    let (e42p, e42r) = get("example-4.2");
    let (prp, prr) = get("product-tg");
    type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("structure axioms on the canonical ambient", Box::new(c1_axioms)),
        ("nearly paracosymplectic, Killing ξ, para-Sasakian failure", Box::new(c2_nearly_killing)),
        ("slant closed form on the synthetic plane", Box::new(c3_slant_closed_form)),
        ("example-4.1 reconstruction", Box::new(|| c4_example41(e41p, e41r))),
        ("example-4.1 warped detection", Box::new(|| c5_example41_warp(e41p, e41r))),
        ("example-4.2 reconstruction", Box::new(|| c6_example42(e42p, e42r))),
        ("warped-product connection identities", Box::new(c7_prop41)),
        ("totally geodesic product scenario", Box::new(|| c8_product(prp, prr))),
        ("internal algebraic consistency", Box::new(|| c9_algebra(&all))),
        ("determinism and exit codes", Box::new(|| c10_determinism(&all))),
    ];
    let mut failures = 0;
    for (k, (name, f)) in criteria.into_iter().enumerate() {
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match out {
            Ok(detail) => println!("PASS criterion {:>2}: {name}: {detail}", k + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {:>2}: {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} of 10 criteria pass", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
