//! Slantness of tangent distributions and the PR-anti-slant conditions.
//!
//! A distribution is given as a set of frame indices. `t` is the tangential
//! part of `φ`; slant means `t² = λ(Id − η⊗ξ)` on the distribution for one
//! constant `λ`. λ is estimated by least squares over probe directions and
//! may be any real number.

use serde::Serialize;

use crate::ambient::nearly_paracosymplectic_defect;
use crate::error::{Error, Result};
use crate::numlin::{columns, Matrix, SymForm, Vector};
use crate::par::{probe_rng, random_vector, Execution};
use crate::report::{collect_rows, At, CheckRow, Status};
use crate::submanifold::{unit, PointData, Submanifold};

/// Classification threshold on `|λ̂|` and `|λ̂ − 1|`.
pub const EPS_CLASS: f64 = 1e-6;

/// `|g(X,X)|` or `|g(φX,φX)|` below this marks a null direction.
pub const NULL_TOL: f64 = 1e-8;

/// Random unit-coefficient combinations per point, besides the frame vectors.
pub const RANDOM_PROBES: usize = 10;

/// Random pairs per point for Props. 3.1/3.2.
pub const PAIR_PROBES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Invariant,
    AntiInvariant,
    ProperSlant,
    NotSlant,
}

impl Classification {
    pub fn is_slant(self) -> bool {
        self != Classification::NotSlant
    }

    pub fn classify(lambda: f64, residual: f64, tol: f64) -> Self {
        if !(residual <= tol) {
            Classification::NotSlant
        } else if lambda.abs() <= EPS_CLASS {
            Classification::AntiInvariant
        } else if (lambda - 1.0).abs() <= EPS_CLASS {
            Classification::Invariant
        } else {
            Classification::ProperSlant
        }
    }
}

/// Roles of frame fields in a PR-anti-slant decomposition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Distributions {
    pub d_perp: Vec<usize>,
    pub d_lambda: Vec<usize>,
    /// Frame index of the field identified with `ξ`.
    pub xi: Option<usize>,
    /// Declared slant coefficient.
    pub lambda: Option<f64>,
}

impl Distributions {
    /// `D^⊥ ⊕ ⟨ξ⟩` as frame indices.
    pub fn perp_xi(&self) -> Vec<usize> {
        let mut v = self.d_perp.clone();
        if let Some(x) = self.xi {
            if !v.contains(&x) {
                v.push(x);
            }
        }
        v
    }
}

/// `t²` on a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TSquared {
    /// `k x k`: column `j` is the in-distribution part of `t²Z_{d_j}`.
    pub matrix: Matrix,
    /// `(m − k) x k`: components of `t²Z_{d_j}` along frame fields outside
    /// the distribution.
    pub leakage: Matrix,
}

/// Matrix of `t²` on `span{Z_i : i ∈ dist}` in the frame.
pub fn t_squared_matrix(p: &PointData, dist: &[usize]) -> TSquared {
    let t = p.t_matrix();
    let t2 = &t * &t;
    let m = p.m();
    let outside: Vec<usize> = (0..m).filter(|i| !dist.contains(i)).collect();
    let matrix = Matrix::from_fn(dist.len(), dist.len(), |r, c| t2[(dist[r], dist[c])]);
    let leakage = Matrix::from_fn(outside.len(), dist.len(), |r, c| t2[(outside[r], dist[c])]);
    TSquared { matrix, leakage }
}

/// Eigenvalues `(re, im)` sorted by real then imaginary part.
pub fn eigenvalues(m: &Matrix) -> Vec<(f64, f64)> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<(f64, f64)> = m.clone().complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    ev
}

/// `ρ(X) = g(tX,tX)/g(φX,φX)`, `None` for null directions.
pub fn ratio(p: &PointData, a: &Vector) -> Option<f64> {
    let x = p.push(a);
    let phix = &p.amb.phi * &x;
    let gxx = p.g().apply(&x, &x);
    let gpp = p.g().apply(&phix, &phix);
    if gxx.abs() < NULL_TOL || gpp.abs() < NULL_TOL {
        return None;
    }
    let tx = p.t(a);
    Some(p.inner(&tx, &tx) / gpp)
}

/// `X − η(X)ξ` as an ambient vector.
fn horizontal(p: &PointData, a: &Vector) -> Vector {
    let x = p.push(a);
    let e = p.amb.eta.dot(&x);
    x - &p.amb.xi * e
}

/// Probe directions in a distribution: the frame vectors followed by random
/// combinations with coefficients in `[-1, 1]`.
pub fn slant_probes(m: usize, dist: &[usize], seed: u64, point: usize) -> Vec<Vector> {
    let mut out: Vec<Vector> = dist.iter().map(|&i| unit(m, i)).collect();
    let mut rng = probe_rng(seed, "slant-probes", point);
    for _ in 0..RANDOM_PROBES {
        let c = random_vector(&mut rng, dist.len());
        let mut a = Vector::zeros(m);
        for (k, &i) in dist.iter().enumerate() {
            a[i] = c[k];
        }
        out.push(a);
    }
    out
}

/// Per-point slant measurements.
#[derive(Debug, Clone, Serialize)]
pub struct PointSlant {
    pub point_index: usize,
    /// Least-squares `λ` at this point alone.
    pub lambda: f64,
    /// Max relative defect `‖t²X − λ̂(X − η(X)ξ)‖ / ‖X‖` against the global fit.
    pub residual: f64,
    /// `ρ(Z_i)` for each frame vector of the distribution.
    pub ratios: Vec<Option<f64>>,
    pub eigenvalues: Vec<(f64, f64)>,
    pub leakage: f64,
    #[serde(skip)]
    num: f64,
    #[serde(skip)]
    den: f64,
    #[serde(skip)]
    pairs: Vec<(Vector, Vector, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlantReport {
    pub dist: Vec<String>,
    pub lambda_hat: f64,
    pub residual: f64,
    pub classification: Classification,
    /// Variance of the per-point λ estimates.
    pub lambda_variance: f64,
    /// `t²` on the distribution at the first admissible point.
    pub t_squared: Vec<Vec<f64>>,
    pub points: Vec<PointSlant>,
    /// Indices of points where the geometry could not be evaluated.
    pub rejected: Vec<usize>,
}

fn point_slant(p: &PointData, dist: &[usize], i: usize, seed: u64) -> PointSlant {
    let m = p.m();
    let t = p.t_matrix();
    let t2 = &t * &t;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut pairs = Vec::new();
    for a in slant_probes(m, dist, seed, i) {
        let lhs = p.push(&(&t2 * &a));
        let w = horizontal(p, &a);
        num += lhs.dot(&w);
        den += w.dot(&w);
        let scale = p.push(&a).norm();
        pairs.push((lhs, w, scale));
    }
    let ts = t_squared_matrix(p, dist);
    PointSlant {
        point_index: i,
        lambda: if den > 0.0 { num / den } else { f64::NAN },
        residual: f64::NAN,
        ratios: dist.iter().map(|&j| ratio(p, &unit(m, j))).collect(),
        eigenvalues: eigenvalues(&ts.matrix),
        leakage: if ts.leakage.is_empty() { 0.0 } else { ts.leakage.amax() },
        num,
        den,
        pairs,
    }
}

/// Aggregated slant report over the admissible points.
pub fn slant_coefficient(
    sub: &Submanifold,
    dist: &[usize],
    points: &[Vec<f64>],
    tol: f64,
    seed: u64,
    exec: Execution,
) -> Result<SlantReport> {
    let per = exec.map(points, |i, u| sub.point_data(u).map(|p| (point_slant(&p, dist, i, seed), p)));
    let mut rejected = Vec::new();
    let mut ok = Vec::new();
    for (i, r) in per.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(_) => rejected.push(i),
        }
    }
    if ok.is_empty() {
        return Err(Error::NoAdmissiblePoints);
    }
    let num: f64 = ok.iter().map(|(s, _)| s.num).sum();
    let den: f64 = ok.iter().map(|(s, _)| s.den).sum();
    let lambda_hat = if den > 0.0 { num / den } else { f64::NAN };
    let mut residual = 0.0f64;
    for (s, _) in ok.iter_mut() {
        let r = s
            .pairs
            .iter()
            .map(|(l, w, scale)| (l - w * lambda_hat).norm() / scale.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        s.residual = r;
        residual = residual.max(r);
    }
    let k = ok.len() as f64;
    let mean = ok.iter().map(|(s, _)| s.lambda).sum::<f64>() / k;
    let lambda_variance = ok.iter().map(|(s, _)| (s.lambda - mean).powi(2)).sum::<f64>() / k;
    let ts = t_squared_matrix(&ok[0].1, dist);
    let t_squared = ts.matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(SlantReport {
        dist: dist.iter().map(|&i| sub.frame.names()[i].clone()).collect(),
        lambda_hat,
        residual,
        classification: Classification::classify(lambda_hat, residual, tol),
        lambda_variance,
        t_squared,
        points: ok.into_iter().map(|(s, _)| s).collect(),
        rejected,
    })
}

/// `def-slant` rows: one aggregate row for the spread of per-point λ, one
/// FLAGGED-if-negative row for `λ̂ ≥ 0`, then per point the slant defect
/// (probe 0) and `ρ(Z_i)` against `λ̂` (probes 1..).
pub fn slant_rows(id: &str, rep: &SlantReport, points: &[Vec<f64>], tol: f64) -> Vec<CheckRow> {
    let g = At::global();
    let (lo, hi) = rep.points.iter().map(|s| s.lambda).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let mut rows = vec![CheckRow::with_residual(id, &g, 0, "spread of per-point λ", hi, lo, hi - lo, tol)];
    let neg = CheckRow::with_residual(id, &g, 1, "λ̂ ≥ 0", rep.lambda_hat, 0.0, (-rep.lambda_hat).max(0.0), 0.0);
    rows.push(if neg.status == Status::Fail { neg.status(Status::Flagged) } else { neg });
    for s in &rep.points {
        let at = At::point(s.point_index, &points[s.point_index]);
        rows.push(CheckRow::with_residual(
            id,
            &at,
            0,
            "max ‖t²X − λ̂(X − η(X)ξ)‖/‖X‖",
            s.lambda,
            rep.lambda_hat,
            s.residual,
            tol,
        ));
        for (k, r) in s.ratios.iter().enumerate() {
            let name = &rep.dist[k];
            rows.push(match r {
                Some(r) => CheckRow::scalar(id, &at, k + 1, format!("ρ({name}) vs λ̂"), *r, rep.lambda_hat, tol),
                None => CheckRow::with_residual(id, &at, k + 1, format!("ρ({name}): null direction"), f64::NAN, rep.lambda_hat, f64::NAN, tol)
                    .status(Status::NotApplicable),
            });
        }
    }
    for &i in &rep.rejected {
        rows.push(CheckRow::error(id, &At::point(i, &points[i]), "point rejected"));
    }
    rows
}

fn dist_pairs(m: usize, dist: &[usize], seed: u64, id: &str, point: usize) -> Vec<(Vector, Vector)> {
    let mut rng = probe_rng(seed, id, point);
    let embed = |c: Vector| {
        let mut a = Vector::zeros(m);
        for (k, &i) in dist.iter().enumerate() {
            a[i] = c[k];
        }
        a
    };
    let mut out: Vec<(Vector, Vector)> = dist.iter().map(|&i| (unit(m, i), unit(m, i))).collect();
    for _ in 0..PAIR_PROBES {
        let x = embed(random_vector(&mut rng, dist.len()));
        let y = embed(random_vector(&mut rng, dist.len()));
        out.push((x, y));
    }
    out
}

fn worst(id: &str, at: &At, probe_index: usize, probe: &str, items: impl Iterator<Item = (f64, f64, f64)>, tol: f64) -> CheckRow {
    let mut w = (0.0, 0.0, -1.0);
    for it in items {
        if !(it.2 <= w.2) {
            w = it;
        }
    }
    CheckRow::with_residual(id, at, probe_index, probe, w.0, w.1, w.2.max(0.0), tol)
}

/// `g(tX,tY) = λ g(φX,φY)` (probe 0) and `g(nX,nY) = (1−λ) g(φX,φY)`
/// (probe 1). NOT-APPLICABLE when the distribution is not slant.
#[allow(clippy::too_many_arguments)]
pub fn check_prop31(
    sub: &Submanifold,
    dist: &[usize],
    points: &[Vec<f64>],
    lambda: f64,
    applicable: bool,
    tol: f64,
    seed: u64,
    exec: Execution,
) -> Vec<CheckRow> {
    const ID: &str = "prop-3.1";
    collect_rows(points, exec, &[ID], |i, u| {
        let at = At::point(i, u);
        let p = sub.point_data(u)?;
        let g = p.g();
        let pairs = dist_pairs(p.m(), dist, seed, ID, i);
        let phi = |a: &Vector| &p.amb.phi * p.push(a);
        let r0 = worst(
            ID,
            &at,
            0,
            "max over pairs: g(tX,tY) vs λ g(φX,φY)",
            pairs.iter().map(|(x, y)| {
                let l = p.inner(&p.t(x), &p.t(y));
                let r = lambda * g.apply(&phi(x), &phi(y));
                (l, r, (l - r).abs())
            }),
            tol,
        );
        let r1 = worst(
            ID,
            &at,
            1,
            "max over pairs: g(nX,nY) vs (1−λ) g(φX,φY)",
            pairs.iter().map(|(x, y)| {
                let l = g.apply(&p.n(x), &p.n(y));
                let r = (1.0 - lambda) * g.apply(&phi(x), &phi(y));
                (l, r, (l - r).abs())
            }),
            tol,
        );
        Ok(vec![r0.gate(applicable), r1.gate(applicable)])
    })
}

/// `t'nX = (1−λ)(X − η(X)ξ)` (probe 0) and `n'nX = −ntX` (probe 1).
#[allow(clippy::too_many_arguments)]
pub fn check_prop32(
    sub: &Submanifold,
    dist: &[usize],
    points: &[Vec<f64>],
    lambda: f64,
    applicable: bool,
    tol: f64,
    seed: u64,
    exec: Execution,
) -> Vec<CheckRow> {
    const ID: &str = "prop-3.2";
    collect_rows(points, exec, &[ID], |i, u| {
        let at = At::point(i, u);
        let p = sub.point_data(u)?;
        let xs: Vec<Vector> = dist_pairs(p.m(), dist, seed, ID, i).into_iter().map(|(x, _)| x).collect();
        let r0 = worst(
            ID,
            &at,
            0,
            "max over X: ‖t'nX − (1−λ)(X − η(X)ξ)‖",
            xs.iter().map(|x| {
                let l = p.push(&p.t1n1(&p.n(x)).0);
                let r = horizontal(&p, x) * (1.0 - lambda);
                (l.norm(), r.norm(), (l - r).norm())
            }),
            tol,
        );
        let r1 = worst(
            ID,
            &at,
            1,
            "max over X: ‖n'nX + ntX‖",
            xs.iter().map(|x| {
                let l = p.t1n1(&p.n(x)).1;
                let r = -p.n(&p.t(x));
                (l.norm(), r.norm(), (l - r).norm())
            }),
            tol,
        );
        Ok(vec![r0.gate(applicable), r1.gate(applicable)])
    })
}

/// Per-point outcome of the PR-anti-slant conditions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PrAntiSlantPoint {
    pub orthogonality: f64,
    pub min_det_ratio: f64,
    pub anti_invariance: f64,
    pub decomposition: f64,
    pub mixed_tg: f64,
    pub nearly_paracosymplectic: f64,
}

/// Measures the PR-anti-slant conditions at one point.
pub fn pr_anti_slant_point(p: &PointData, roles: &Distributions) -> PrAntiSlantPoint {
    let m = p.m();
    let gm = p.gram.matrix();
    let xi: Vec<usize> = roles.xi.into_iter().collect();
    let blocks: [&[usize]; 3] = [&roles.d_perp, &roles.d_lambda, &xi];
    let mut orth = 0.0f64;
    for (bi, a) in blocks.iter().enumerate() {
        for b in blocks.iter().skip(bi + 1) {
            for &i in a.iter() {
                for &j in b.iter().filter(|&&j| j != i) {
                    orth = orth.max(gm[(i, j)].abs());
                }
            }
        }
    }
    let mut min_det_ratio = f64::INFINITY;
    for b in blocks.iter().filter(|b| !b.is_empty()) {
        let sub = SymForm::new(Matrix::from_fn(b.len(), b.len(), |r, c| gm[(b[r], b[c])])).expect("principal block of a symmetric matrix");
        let thr = sub.degeneracy_threshold();
        let ratio = if thr > 0.0 { sub.matrix().determinant().abs() / thr } else { 0.0 };
        min_det_ratio = min_det_ratio.min(ratio);
    }
    let anti_invariance =
        roles.d_perp.iter().map(|&i| p.push(&p.t(&unit(m, i))).norm() / p.push(&unit(m, i)).norm()).fold(0.0, f64::max);
    // TM = D⊥ ⊕ Dλ ⊕ ⟨ξ⟩ with the ξ field equal to the structure vector
    let all = roles.perp_xi().into_iter().chain(roles.d_lambda.iter().copied()).collect::<std::collections::BTreeSet<_>>();
    let cols: Vec<Vector> = all.iter().map(|&i| unit(m, i)).collect();
    let span_defect = (m - crate::numlin::rank(&columns(&cols, m), 1e-9)) as f64;
    let xi_defect = match roles.xi {
        Some(k) => (p.push(&unit(m, k)) - &p.amb.xi).norm(),
        None => p.normal_part(&p.amb.xi).norm(),
    };
    let overlap = if roles.xi.is_some_and(|k| roles.d_perp.contains(&k) || roles.d_lambda.contains(&k)) { 1.0 } else { 0.0 };
    let decomposition = span_defect + xi_defect + overlap;
    let mut mixed = 0.0f64;
    for &i in &roles.d_lambda {
        for j in roles.perp_xi() {
            mixed = mixed.max(p.h(&unit(m, i), &unit(m, j)).norm());
        }
    }
    let pairs: Vec<(Vector, Vector)> = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| (p.push(&unit(m, i)), p.push(&unit(m, j)))).collect();
    PrAntiSlantPoint {
        orthogonality: orth,
        min_det_ratio,
        anti_invariance,
        decomposition,
        mixed_tg: mixed,
        nearly_paracosymplectic: nearly_paracosymplectic_defect(&p.amb, &pairs),
    }
}

impl PrAntiSlantPoint {
    /// Orthogonality, non-degeneracy, anti-invariance of `D^⊥` and the
    /// decomposition, at tolerance `tol`.
    pub fn structural(&self, tol: f64) -> bool {
        self.orthogonality <= tol && self.min_det_ratio > 1.0 && self.anti_invariance <= tol && self.decomposition <= tol
    }
}

/// Properness: `D^⊥ ≠ 0`, `D_λ ≠ 0`, `λ ∉ {0, 1}`.
pub fn is_proper(roles: &Distributions, lambda: f64) -> bool {
    !roles.d_perp.is_empty() && !roles.d_lambda.is_empty() && lambda.abs() > EPS_CLASS && (lambda - 1.0).abs() > EPS_CLASS
}

/// `def-pr-anti-slant` rows. Aggregate probe 0 is properness; per point:
/// orthogonality (0), non-degeneracy (1), anti-invariance of `D^⊥` (2),
/// decomposition `TM = D^⊥ ⊕ D_λ ⊕ ⟨ξ⟩` (3), slant defect of `D_λ` (4).
pub fn validate_pr_anti_slant(
    sub: &Submanifold,
    roles: &Distributions,
    slant: &SlantReport,
    points: &[Vec<f64>],
    tol: f64,
    exec: Execution,
) -> Vec<CheckRow> {
    const ID: &str = "def-pr-anti-slant";
    let lambda = roles.lambda.unwrap_or(slant.lambda_hat);
    let proper = is_proper(roles, lambda) && slant.classification == Classification::ProperSlant;
    let mut rows = vec![CheckRow::with_residual(
        ID,
        &At::global(),
        0,
        format!("proper: D⊥ ≠ 0, Dλ ≠ 0, λ ∉ {{0,1}}, Dλ {:?}", slant.classification),
        lambda,
        slant.lambda_hat,
        if proper { 0.0 } else { 1.0 },
        0.0,
    )];
    let slant_at = |i: usize| slant.points.iter().find(|s| s.point_index == i).map(|s| s.residual).unwrap_or(f64::NAN);
    rows.extend(collect_rows(points, exec, &[ID], |i, u| {
        let at = At::point(i, u);
        let p = sub.point_data(u)?;
        let s = pr_anti_slant_point(&p, roles);
        let nondeg = if s.min_det_ratio > 1.0 { 0.0 } else { 1.0 };
        Ok(vec![
            CheckRow::with_residual(ID, &at, 0, "max |g| between D⊥, Dλ, ⟨ξ⟩", s.orthogonality, 0.0, s.orthogonality, tol),
            CheckRow::with_residual(ID, &at, 1, "min |det G_block| / threshold", s.min_det_ratio, 1.0, nondeg, 0.0),
            CheckRow::with_residual(ID, &at, 2, "max ‖tZ‖/‖Z‖ for Z ∈ D⊥", s.anti_invariance, 0.0, s.anti_invariance, tol),
            CheckRow::with_residual(ID, &at, 3, "span defect + ‖ξ field − ξ‖ + role overlap", s.decomposition, 0.0, s.decomposition, tol),
            CheckRow::with_residual(ID, &at, 4, "Dλ slant defect", slant_at(i), 0.0, slant_at(i), tol),
        ])
    }));
    rows
}

/// `def-mixed-tg`: max `‖h(X, Z)‖` over `X ∈ D_λ`, `Z ∈ D^⊥ ⊕ ⟨ξ⟩`.
pub fn check_mixed_tg(sub: &Submanifold, roles: &Distributions, points: &[Vec<f64>], tol: f64, exec: Execution) -> Vec<CheckRow> {
    const ID: &str = "def-mixed-tg";
    collect_rows(points, exec, &[ID], |i, u| {
        let p = sub.point_data(u)?;
        let s = pr_anti_slant_point(&p, roles);
        Ok(vec![CheckRow::with_residual(ID, &At::point(i, u), 0, "max ‖h(X,Z)‖, X ∈ Dλ, Z ∈ D⊥⊕ξ", s.mixed_tg, 0.0, s.mixed_tg, tol)])
    })
}
