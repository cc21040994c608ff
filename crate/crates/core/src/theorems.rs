//! Residuals of the PR-anti-slant and warped-product identities, plus
//! Frobenius and totally-geodesic-foliation checks.
//!
//! Every identity is evaluated on the frame-field combinations of its roles
//! (one row per combination) and on random constant-coefficient
//! combinations (one row with the worst of them). Rows keep their measured
//! values but are NOT-APPLICABLE when the hypotheses of the statement do
//! not hold at the point or for the scenario.

use crate::ambient::nearly_paracosymplectic_defect;
use crate::error::{Error, Result};
use crate::numlin::{Matrix, Vector};
use crate::par::{probe_rng, random_vector, Execution};
use crate::report::{collect_rows, At, CheckRow, Status};
use crate::slant::Distributions;
use crate::submanifold::{unit, PointData, Submanifold};
use crate::warped::WarpData;

/// Random role combinations per point, on top of the frame combinations.
pub const RANDOM_PROBES: usize = 20;

pub const THEOREM_IDS: &[&str] = &[
    "thm-3.1",
    "thm-3.2",
    "lem-5.1a",
    "lem-5.1b",
    "lem-5.1-sum",
    "lem-5.2",
    "thm-5.1",
    "thm-5.2",
    "thm-5.3",
    "thm-5.3-hlambda",
    "frob-integrable",
    "foliation-tg",
];

/// Ids that need warping data.
pub fn needs_warp(id: &str) -> bool {
    id.starts_with("lem-5") || id.starts_with("thm-5")
}

/// Everything a theorem residual depends on besides the point.
#[derive(Debug, Clone)]
pub struct Context<'a> {
    pub sub: &'a Submanifold,
    pub roles: &'a Distributions,
    /// λ used in the identities (declared, else measured).
    pub lambda: f64,
    pub warp: Option<&'a WarpData>,
    /// The scenario passed the PR-anti-slant conditions, including
    /// properness.
    pub pr_anti_slant: bool,
    /// The warp split was confirmed on the induced metric.
    pub warped: bool,
    pub tol: f64,
    /// Tolerance for the pointwise hypotheses (nearly paracosymplectic,
    /// mixed totally geodesic).
    pub hypothesis_tol: f64,
    pub seed: u64,
    pub exec: Execution,
}

/// A role assignment for one evaluation: frame coefficient vectors and a
/// label.
struct Probe {
    label: String,
    vecs: Vec<Vector>,
}

fn embed(m: usize, idx: &[usize], c: &Vector) -> Vector {
    let mut a = Vector::zeros(m);
    for (k, &i) in idx.iter().enumerate() {
        a[i] = c[k];
    }
    a
}

/// Frame combinations (cartesian product of the role lists) and random
/// combinations for one point.
fn role_probes(sub: &Submanifold, roles: &[&[usize]], seed: u64, id: &str, point: usize) -> (Vec<Probe>, Vec<Probe>) {
    let m = sub.dim();
    let names = sub.frame.names();
    let mut frame: Vec<Vec<usize>> = vec![Vec::new()];
    for r in roles {
        frame = frame.into_iter().flat_map(|pre| r.iter().map(move |&i| [pre.clone(), vec![i]].concat())).collect();
    }
    let frame = frame
        .into_iter()
        .map(|idx| Probe {
            label: idx.iter().map(|&i| names[i].as_str()).collect::<Vec<_>>().join(", "),
            vecs: idx.iter().map(|&i| unit(m, i)).collect(),
        })
        .collect();
    let mut rng = probe_rng(seed, id, point);
    let random = (0..RANDOM_PROBES)
        .map(|_| Probe { label: String::new(), vecs: roles.iter().map(|r| embed(m, r, &random_vector(&mut rng, r.len()))).collect() })
        .collect();
    (frame, random)
}

/// `(lhs, rhs, residual)` of one evaluation.
type Eval = (f64, f64, f64);

fn scalar(l: f64, r: f64) -> Eval {
    (l, r, (l - r).abs())
}

fn vector(l: &Vector, r: &Vector) -> Eval {
    (l.norm(), r.norm(), (l - r).norm())
}

/// One row per frame probe, then the worst random probe.
fn identity_rows(id: &str, at: &At, roles: &str, probes: (Vec<Probe>, Vec<Probe>), tol: f64, f: impl Fn(&[Vector]) -> Eval) -> Vec<CheckRow> {
    let (frame, random) = probes;
    let mut rows: Vec<CheckRow> = frame
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let (l, r, res) = f(&p.vecs);
            CheckRow::with_residual(id, at, k, format!("({roles}) = ({})", p.label), l, r, res, tol)
        })
        .collect();
    if !random.is_empty() {
        let mut worst = (0.0, 0.0, -1.0);
        for p in &random {
            let e = f(&p.vecs);
            if !(e.2 <= worst.2) {
                worst = e;
            }
        }
        rows.push(CheckRow::with_residual(
            id,
            at,
            frame.len(),
            format!("worst of {} random ({roles})", random.len()),
            worst.0,
            worst.1,
            worst.2,
            tol,
        ));
    }
    rows
}

/// Pointwise quantities shared by the identities.
struct Local<'p> {
    p: &'p PointData,
    lambda: f64,
}

impl Local<'_> {
    /// `g(A_ζ X, Z) = g(h(X, Z), ζ)`.
    fn ga(&self, zeta: &Vector, x: &Vector, z: &Vector) -> f64 {
        self.p.g().apply(&self.p.h(x, z), zeta)
    }

    fn phi(&self, a: &Vector) -> Vector {
        &self.p.amb.phi * self.p.push(a)
    }

    fn nt(&self, a: &Vector) -> Vector {
        self.p.n(&self.p.t(a))
    }

    /// Lemma terms `A = g(A_{ntX}X, Z)`, `B = g(A_{φZ}X, tX)`,
    /// `C = g(A_{nX}Z, tX)` and `K = (Z ln f) λ g(X, X)`.
    fn lemma_terms(&self, x: &Vector, z: &Vector, zlnf: f64) -> (f64, f64, f64, f64) {
        let tx = self.p.t(x);
        let a = self.ga(&self.nt(x), x, z);
        let b = self.ga(&self.phi(z), x, &tx);
        let c = self.ga(&self.p.n(x), z, &tx);
        let k = zlnf * self.lambda * self.p.inner(x, x);
        (a, b, c, k)
    }
}

fn nearly_defect(p: &PointData) -> f64 {
    let nd = p.ambient_dim();
    let pairs: Vec<(Vector, Vector)> = (0..nd).flat_map(|i| (i..nd).map(move |j| (unit(nd, i), unit(nd, j)))).collect();
    nearly_paracosymplectic_defect(&p.amb, &pairs)
}

fn mixed_defect(p: &PointData, d_lambda: &[usize], perp_xi: &[usize]) -> f64 {
    let m = p.m();
    let mut w = 0.0f64;
    for &i in d_lambda {
        for &j in perp_xi {
            w = w.max(p.h(&unit(m, i), &unit(m, j)).norm());
        }
    }
    w
}

/// Component of the frame vector `b` outside `span{Z_i : i ∈ dist}`, via a
/// Gram projection onto the distribution.
fn outside(p: &PointData, dist: &[usize], b: &Vector) -> Vector {
    let m = p.m();
    let g = p.gram.matrix();
    let gd = Matrix::from_fn(dist.len(), dist.len(), |r, c| g[(dist[r], dist[c])]);
    let rhs = Vector::from_iterator(dist.len(), dist.iter().map(|&l| p.inner(b, &unit(m, l))));
    match gd.lu().solve(&rhs) {
        Some(c) => b - embed(m, dist, &c),
        None => Vector::from_element(m, f64::NAN),
    }
}

/// Max leakage of `[Z_i, Z_j]` (or `∇_{Z_i} Z_j` when `connection`) out of
/// `dist`, as the Euclidean norm of the pushed-forward component.
fn leakage(p: &PointData, dist: &[usize], connection: bool) -> f64 {
    let m = p.m();
    let mut w = 0.0f64;
    for &i in dist {
        for &j in dist {
            if !connection && j <= i {
                continue;
            }
            let b = if connection { p.nabla(&unit(m, i), &unit(m, j)) } else { p.lie_bracket(i, j) };
            let r = p.push(&outside(p, dist, &b)).norm();
            if !(r <= w) {
                w = r;
            }
        }
    }
    w
}

/// Runs one theorem check over the points.
pub fn run_check(ctx: &Context, id: &str, points: &[Vec<f64>]) -> Result<Vec<CheckRow>> {
    if !THEOREM_IDS.contains(&id) {
        return Err(Error::Invalid { what: "check id".into(), reason: format!("`{id}` is not a theorem check") });
    }
    if needs_warp(id) && ctx.warp.is_none() {
        return Err(Error::MissingWarpData { check: id.to_string() });
    }
    let roles = ctx.roles;
    let perp_xi = roles.perp_xi();
    let d_lambda = roles.d_lambda.clone();
    let (base, fiber) = ctx.warp.map(|w| (w.base.clone(), w.fiber.clone())).unwrap_or_default();
    let xi_in_base = roles.xi.is_some_and(|x| base.contains(&x));
    let section5 = ctx.pr_anti_slant && ctx.warped && xi_in_base;
    let id_s = id.to_string();
    let rows = collect_rows(points, ctx.exec, &[id], |i, u| {
        let id = id_s.as_str();
        let at = At::point(i, u);
        let p = ctx.sub.point_data(u)?;
        let l = Local { p: &p, lambda: ctx.lambda };
        let nearly = nearly_defect(&p) <= ctx.hypothesis_tol;
        let probes = |r: &[&[usize]]| role_probes(ctx.sub, r, ctx.seed, id, i);
        let zlnf = match ctx.warp {
            Some(w) if needs_warp(id) => w.frame_dlnf(ctx.sub, &p)?,
            _ => Vector::zeros(p.m()),
        };
        let rows = match id {
            "thm-3.1" => identity_rows(id, &at, "X, Y, Z", probes(&[&d_lambda, &d_lambda, &perp_xi]), ctx.tol, |v| {
                let (x, y, z) = (&v[0], &v[1], &v[2]);
                let lhs = 2.0 * l.lambda * p.g().apply(&p.ambient_derivative(x, y), &p.push(z));
                let phz = l.phi(z);
                let rhs = l.ga(&l.nt(y), x, z) + l.ga(&l.nt(x), y, z) - l.ga(&phz, &p.t(y), x) - l.ga(&phz, &p.t(x), y);
                scalar(lhs, rhs)
            })
            .into_iter()
            .map(|r| r.gate(nearly && ctx.pr_anti_slant))
            .collect(),
            "thm-3.2" => identity_rows(id, &at, "Z, W, X", probes(&[&perp_xi, &perp_xi, &d_lambda]), ctx.tol, |v| {
                let (z, w, x) = (&v[0], &v[1], &v[2]);
                let tx = p.t(x);
                let lhs = 2.0 * l.ga(&l.nt(x), z, w);
                let rhs = l.ga(&l.phi(w), z, &tx) + l.ga(&l.phi(z), w, &tx);
                scalar(lhs, rhs)
            })
            .into_iter()
            .map(|r| r.gate(nearly && ctx.pr_anti_slant))
            .collect(),
            "lem-5.1a" | "lem-5.1b" | "lem-5.1-sum" | "lem-5.2" | "thm-5.1" | "thm-5.2" => {
                let applicable = nearly && section5;
                let mixed = mixed_defect(&p, &fiber, &base);
                let mut rows = Vec::new();
                if id == "thm-5.2" {
                    let ok = mixed <= ctx.hypothesis_tol;
                    let pre = CheckRow::with_residual(id, &at, 0, "precondition: max ‖h(X, Z)‖, X fiber, Z base", mixed, 0.0, mixed, ctx.hypothesis_tol);
                    rows.push(if ok { pre } else { pre.status(Status::NotApplicable) });
                }
                let offset = rows.len();
                let eval = |v: &[Vector]| {
                    let (x, z) = (&v[0], &v[1]);
                    let (a, b, c, k) = l.lemma_terms(x, z, zlnf.dot(z));
                    match id {
                        "lem-5.1a" => scalar(2.0 * a, b + c - k),
                        "lem-5.1b" => scalar(c, 2.0 * b - a),
                        "lem-5.1-sum" => {
                            let signed = (2.0 * a - (b + c - k)) + (c - (2.0 * b - a));
                            let combined = 3.0 * a - (3.0 * b - k);
                            scalar(signed, combined)
                        }
                        "lem-5.2" => scalar(p.inner(&p.tn_split(x, &p.t(x)).0, z), a - c),
                        "thm-5.1" => scalar(p.inner(&p.tn_split(x, &p.t(x)).0, z), 2.0 / 3.0 * k),
                        _ => scalar(b, k / 3.0),
                    }
                };
                for mut r in identity_rows(id, &at, "X, Z", probes(&[&fiber, &base]), ctx.tol, eval) {
                    r.probe_index += offset;
                    rows.push(r);
                }
                if id == "thm-5.1" {
                    let m = p.m();
                    let mut worst = 0.0f64;
                    for &x in &fiber {
                        let xv = unit(m, x);
                        let txtx = p.tn_split(&xv, &p.t(&xv)).0;
                        for &b in &base {
                            worst = worst.max(p.inner(&txtx, &unit(m, b)).abs());
                        }
                    }
                    let k = rows.len();
                    rows.push(CheckRow::with_residual(id, &at, k, "T_X tX tangent to the fiber: max |g(T_X tX, Z_b)|", worst, 0.0, worst, ctx.tol));
                }
                let gate_all = id != "lem-5.1-sum";
                let pre_ok = id != "thm-5.2" || mixed <= ctx.hypothesis_tol;
                rows.into_iter()
                    .enumerate()
                    .map(|(k, r)| if gate_all && !(k < offset) { r.gate(applicable && pre_ok) } else { r })
                    .collect()
            }
            "thm-5.3" => identity_rows(id, &at, "X, Z", probes(&[&d_lambda, &perp_xi]), ctx.tol, |v| {
                let (x, z) = (&v[0], &v[1]);
                let lhs = p.push(&(p.shape(&l.nt(x), z) - p.shape(&l.phi(z), &p.t(x))));
                let rhs = p.push(x) * (-l.lambda / 3.0 * zlnf.dot(z));
                vector(&lhs, &rhs)
            })
            .into_iter()
            .map(|r| r.gate(nearly && section5))
            .collect(),
            "thm-5.3-hlambda" => {
                let grad = &p.gram_inv * &zlnf;
                identity_rows(id, &at, "X, Y", probes(&[&d_lambda, &d_lambda]), ctx.tol, |v| {
                    let (x, y) = (&v[0], &v[1]);
                    let h = outside(&p, &d_lambda, &p.nabla(x, y));
                    let expect = &grad * (-p.inner(x, y) / 3.0);
                    vector(&p.push(&h), &p.push(&expect))
                })
                .into_iter()
                .map(|r| r.gate(nearly && section5))
                .collect()
            }
            "frob-integrable" => {
                let a = leakage(&p, &d_lambda, false);
                let b = leakage(&p, &perp_xi, false);
                vec![
                    CheckRow::with_residual(id, &at, 0, "D_λ: max leakage of [Z_i, Z_j]", a, 0.0, a, ctx.tol),
                    CheckRow::with_residual(id, &at, 1, "D⊥ ⊕ ⟨ξ⟩: max leakage of [Z_i, Z_j]", b, 0.0, b, ctx.tol),
                ]
            }
            "foliation-tg" => {
                let ia = leakage(&p, &d_lambda, false) <= ctx.tol;
                let ib = leakage(&p, &perp_xi, false) <= ctx.tol;
                let a = leakage(&p, &d_lambda, true);
                let b = leakage(&p, &perp_xi, true);
                vec![
                    CheckRow::with_residual(id, &at, 0, "D_λ: max leakage of ∇_{Z_i} Z_j", a, 0.0, a, ctx.tol).gate(ia),
                    CheckRow::with_residual(id, &at, 1, "D⊥ ⊕ ⟨ξ⟩: max leakage of ∇_{Z_i} Z_j", b, 0.0, b, ctx.tol).gate(ib),
                ]
            }
            _ => unreachable!(),
        };
        Ok(rows)
    });
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::AmbientStructure;
    use crate::expr::parse;
    use crate::submanifold::{FrameField, Immersion};
    use crate::warped::WarpSource;
    use std::collections::BTreeMap;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    /// Canonical R^7, G(s,q,u,w) = (u, √2 w, 0, 2w, 0, q, s).
    fn product() -> Submanifold {
        let amb = AmbientStructure::canonical_paracosymplectic(3).unwrap();
        let comps = ["u", "sqrt(2)*w", "0", "2*w", "0", "q", "s"].map(|s| parse(s).unwrap()).to_vec();
        let imm = Immersion::new(amb, names(&["s", "q", "u", "w"]), comps, BTreeMap::new()).unwrap();
        let f = FrameField::identity(imm.params());
        Submanifold::new(imm, f).unwrap()
    }

    fn example41() -> Submanifold {
        let amb = AmbientStructure::canonical_paracosymplectic(2).unwrap();
        let comps = ["v*cosh(alpha)", "v*cosh(beta)", "v*sinh(alpha)", "v*sinh(beta)", "t"].map(|s| parse(s).unwrap()).to_vec();
        let imm = Immersion::new(amb, names(&["v", "alpha", "beta", "t"]), comps, BTreeMap::new()).unwrap();
        let f = FrameField::identity(imm.params());
        Submanifold::new(imm, f).unwrap()
    }

    fn ctx<'a>(sub: &'a Submanifold, roles: &'a Distributions, warp: &'a WarpData, lambda: f64) -> Context<'a> {
        Context {
            sub,
            roles,
            lambda,
            warp: Some(warp),
            pr_anti_slant: true,
            warped: true,
            tol: 1e-10,
            hypothesis_tol: 1e-10,
            seed: 3,
            exec: Execution::Sequential,
        }
    }

    #[test]
    fn product_scenario_passes_everything() {
        let sub = product();
        let roles = Distributions { d_perp: vec![1], d_lambda: vec![2, 3], xi: Some(0), lambda: Some(2.0) };
        let warp = WarpData { base: vec![0, 1], fiber: vec![2, 3], source: WarpSource::Declared { f: parse("1").unwrap(), constants: BTreeMap::new() } };
        let c = ctx(&sub, &roles, &warp, 2.0);
        let pts = vec![vec![0.1, 0.2, -0.3, 0.4], vec![1.0, -1.0, 2.0, 0.5]];
        for id in THEOREM_IDS {
            for r in run_check(&c, id, &pts).unwrap() {
                assert_eq!(r.status, Status::Pass, "{r:?}");
                assert!(r.residual <= 1e-10);
            }
        }
    }

    #[test]
    fn lemma_sum_is_algebraic_on_example41() {
        let sub = example41();
        let roles = Distributions { d_perp: vec![3], d_lambda: vec![0, 1, 2], xi: Some(3), lambda: Some(0.5) };
        let warp = WarpData { base: vec![3, 0], fiber: vec![1, 2], source: WarpSource::Declared { f: parse("v").unwrap(), constants: BTreeMap::new() } };
        let mut c = ctx(&sub, &roles, &warp, 0.5);
        c.pr_anti_slant = false;
        let pts = vec![vec![2.0, 0.3, -0.5, 1.0]];
        for r in run_check(&c, "lem-5.1-sum", &pts).unwrap() {
            assert_eq!(r.status, Status::Pass, "{r:?}");
        }
        let a = run_check(&c, "lem-5.1a", &pts).unwrap();
        assert!(a.iter().all(|r| r.status == Status::NotApplicable));
        // X = Z2, Z = Z1 at v = 2: K = (1/v)·λ·(−v²) = −1 and the A-terms vanish
        let row = a.iter().find(|r| r.probe.ends_with("= (Z2, Z1)")).unwrap();
        assert!((row.residual - 1.0).abs() < 1e-9, "{row:?}");
    }

    #[test]
    fn missing_warp_is_an_error() {
        let sub = product();
        let roles = Distributions { d_perp: vec![1], d_lambda: vec![2, 3], xi: Some(0), lambda: Some(2.0) };
        let warp = WarpData { base: vec![0, 1], fiber: vec![2, 3], source: WarpSource::Detected { reference: vec![0.0; 4], f_ref: 1.0 } };
        let mut c = ctx(&sub, &roles, &warp, 2.0);
        c.warp = None;
        assert!(matches!(run_check(&c, "thm-5.1", &[vec![0.0; 4]]), Err(Error::MissingWarpData { .. })));
        assert!(run_check(&c, "thm-3.1", &[vec![0.0; 4]]).is_ok());
    }

    #[test]
    fn residuals_are_even_in_the_probes() {
        let sub = example41();
        let p = sub.point_data(&[2.0, 0.3, -0.5, 1.0]).unwrap();
        let l = Local { p: &p, lambda: 0.5 };
        let x = Vector::from_vec(vec![0.0, 0.7, -0.2, 0.0]);
        let z = Vector::from_vec(vec![0.4, 0.0, 0.0, 1.0]);
        let a = l.lemma_terms(&x, &z, 0.3);
        let b = l.lemma_terms(&-&x, &z, 0.3);
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12 && (a.2 - b.2).abs() < 1e-12 && (a.3 - b.3).abs() < 1e-12);
    }
}
