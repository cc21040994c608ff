//! Warped product metrics `g_B + f² g_F` and warped structure of induced
//! metrics.
//!
//! Detection pairs frame field `k` with parameter `k`: a base/fiber split of
//! the frame is also a split of the parameters, and `f` is recovered as a
//! function of the base parameters, up to a positive constant fixed by a
//! reference point.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diffcalc::MetricField;
use crate::error::{Error, Result};
use crate::expr::{Expr, VarEnv};
use crate::jet::Jet1;
use crate::numlin::{Matrix, SymForm, Vector};
use crate::par::Execution;
use crate::report::{collect_rows, At, CheckRow, Status};
use crate::submanifold::{unit, PointData, Submanifold};

/// A warped product `B ×_f F` in coordinates: base coordinates first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpedSpec {
    pub base: Vec<String>,
    pub g_base: Vec<Vec<Expr>>,
    pub fiber: Vec<String>,
    pub g_fiber: Vec<Vec<Expr>>,
    pub f: Expr,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

fn unknown(e: &Expr, names: &[String], constants: &BTreeMap<String, f64>) -> Option<String> {
    e.free_vars().into_iter().find(|v| !names.contains(v) && !constants.contains_key(v))
}

impl WarpedSpec {
    /// Checks shapes and that `f`, `g_B`, `g_F` only use their own
    /// coordinates.
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::Invalid { what: "warped spec".into(), reason };
        let (b, k) = (self.base.len(), self.fiber.len());
        if b == 0 || k == 0 {
            return Err(invalid("base and fiber must be non-empty".into()));
        }
        if self.g_base.len() != b || self.g_base.iter().any(|r| r.len() != b) {
            return Err(Error::Dimension(format!("g_base must be {b}x{b}")));
        }
        if self.g_fiber.len() != k || self.g_fiber.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension(format!("g_fiber must be {k}x{k}")));
        }
        if let Some(v) = unknown(&self.f, &self.base, &self.constants) {
            return Err(invalid(format!("f uses `{v}`, which is not a base coordinate")));
        }
        for e in self.g_base.iter().flatten() {
            if let Some(v) = unknown(e, &self.base, &self.constants) {
                return Err(invalid(format!("g_base entry `{e}` uses `{v}`")));
            }
        }
        for e in self.g_fiber.iter().flatten() {
            if let Some(v) = unknown(e, &self.fiber, &self.constants) {
                return Err(invalid(format!("g_fiber entry `{e}` uses `{v}`")));
            }
        }
        Ok(())
    }

    pub fn coords(&self) -> Vec<String> {
        self.base.iter().chain(&self.fiber).cloned().collect()
    }

    pub fn dim(&self) -> usize {
        self.base.len() + self.fiber.len()
    }

    /// `f` and `∂_a ln f` at the base part of a product point. Fails with
    /// [`Error::NonPositiveWarp`] unless `f > 0`.
    pub fn warp_at(&self, point: &[f64]) -> Result<(f64, Vector)> {
        let b = self.base.len();
        if point.len() < b {
            return Err(Error::Dimension(format!("point has {} coordinates, base has {b}", point.len())));
        }
        let vars: Vec<Jet1> = point[..b].iter().enumerate().map(|(i, &x)| Jet1::variable(x, i, b)).collect();
        let env = VarEnv { names: &self.base, values: &vars, constants: &self.constants };
        let f: Jet1 = self.f.eval(&env)?;
        if !(f.v > 0.0) {
            return Err(Error::NonPositiveWarp { value: f.v, at: format!("{:?}", &point[..b]) });
        }
        Ok((f.v, Vector::from_iterator(b, (0..b).map(|i| f.d(i) / f.v))))
    }

    /// `∂ ln f` as a base covector and its `g_B`-gradient.
    pub fn grad_ln_f(&self, base_point: &[f64]) -> Result<(Vector, Vector)> {
        let (_, dlnf) = self.warp_at(base_point)?;
        let gb = MetricField::new(self.base.clone(), self.g_base.clone(), self.constants.clone())?.at(&base_point[..self.base.len()])?;
        let grad = gb.inverse()? * &dlnf;
        Ok((dlnf, grad))
    }
}

/// The product metric `g_B ⊕ f² g_F` on `base ++ fiber` coordinates.
pub fn build_warped_metric(spec: &WarpedSpec) -> Result<MetricField> {
    spec.validate()?;
    let (b, k) = (spec.base.len(), spec.fiber.len());
    let d = b + k;
    let zero = Expr::num(0.0);
    let mut entries = vec![vec![zero.clone(); d]; d];
    for i in 0..b {
        for j in 0..b {
            entries[i][j] = spec.g_base[i][j].clone();
        }
    }
    for i in 0..k {
        for j in 0..k {
            let gf = &spec.g_fiber[i][j];
            entries[b + i][b + j] = if gf.is_zero() { zero.clone() } else { crate::expr::parse(&format!("({})^2*({gf})", spec.f))? };
        }
    }
    MetricField::new(spec.coords(), entries, spec.constants.clone())
}

/// `prop-4.1` rows per point: probe 0 is the largest fiber component of
/// `∇_X Y` over base coordinate pairs, probe 1 the largest
/// `‖∇_X Z − X(ln f) Z‖` over base `X`, fiber `Z`.
pub fn check_prop41(spec: &WarpedSpec, points: &[Vec<f64>], tol: f64, exec: Execution) -> Vec<CheckRow> {
    const ID: &str = "prop-4.1";
    let metric = match build_warped_metric(spec) {
        Ok(m) => m,
        Err(e) => return vec![CheckRow::error(ID, &At::global(), &e.to_string())],
    };
    let b = spec.base.len();
    let d = spec.dim();
    collect_rows(points, exec, &[ID], |i, u| {
        let at = At::point(i, u);
        let (_, dlnf) = spec.warp_at(u)?;
        let gamma = metric.christoffels(u)?;
        let mut base_leak = 0.0f64;
        for x in 0..b {
            for y in 0..b {
                let v = ((b..d).map(|k| gamma.get(k, x, y).powi(2)).sum::<f64>()).sqrt();
                base_leak = base_leak.max(v);
            }
        }
        let mut mixed = (0.0, 0.0, 0.0f64);
        for x in 0..b {
            for z in b..d {
                let nabla = Vector::from_iterator(d, (0..d).map(|k| gamma.get(k, x, z)));
                let expect = unit(d, z) * dlnf[x];
                let r = (&nabla - &expect).norm();
                if r >= mixed.2 {
                    mixed = (nabla.norm(), expect.norm(), r);
                }
            }
        }
        Ok(vec![
            CheckRow::with_residual(ID, &at, 0, "max over base X,Y: ‖fiber part of ∇_X Y‖", base_leak, 0.0, base_leak, tol),
            CheckRow::with_residual(ID, &at, 1, "max over base X, fiber Z: ‖∇_X Z − X(ln f) Z‖", mixed.0, mixed.1, mixed.2, tol),
        ])
    })
}

/// Fiber block of `G` (rows/columns in `fiber`).
fn block(g: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |r, c| g[(rows[r], cols[c])])
}

/// `u` with the coordinates in `idx` replaced by those of `from`.
fn splice(u: &[f64], from: &[f64], idx: &[usize]) -> Vec<f64> {
    let mut out = u.to_vec();
    for &i in idx {
        out[i] = from[i];
    }
    out
}

/// Per-point warped-structure measurements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarpPoint {
    pub point_index: usize,
    /// `max |G_{bf}|` over base/fiber pairs.
    pub mixed: f64,
    /// `s = tr(M⁻¹ G_F(u)) / k` with `M = G_F` at the reference base point.
    pub s: f64,
    /// The same ratio with the fiber coordinates frozen at the reference.
    pub s_frozen: f64,
    /// `max(‖M⁻¹G_F(u) − s Id‖, |s − s_frozen|)`.
    pub consistency: f64,
    /// `f = f_ref √s`.
    pub f: f64,
    /// `∂_a ln f` per parameter (zero on fiber parameters).
    pub dlnf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarpDetection {
    pub base: Vec<usize>,
    pub fiber: Vec<usize>,
    pub reference: Vec<f64>,
    pub f_ref: f64,
    pub mixed_residual: f64,
    pub f_consistency_residual: f64,
    pub points: Vec<WarpPoint>,
    pub rejected: Vec<usize>,
}

impl WarpDetection {
    pub fn f_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.f).collect()
    }
}

/// Measures one point against the reference. `p` supplies `∂_a G`.
fn warp_point(sub: &Submanifold, p: &PointData, base: &[usize], fiber: &[usize], reference: &[f64], f_ref: f64, i: usize) -> Result<WarpPoint> {
    let u = &p.u;
    let g = p.gram.matrix();
    let k = fiber.len() as f64;
    let mixed = block(g, base, fiber).amax();
    let gf = block(g, fiber, fiber);
    let m_ref = block(&sub.gram(&splice(u, reference, base))?, fiber, fiber);
    let m_inv = SymForm::new(m_ref)?.inverse()?;
    let r = &m_inv * &gf;
    let s = r.trace() / k;
    let frozen_ref = block(&sub.gram(reference)?, fiber, fiber);
    let frozen = block(&sub.gram(&splice(u, reference, fiber))?, fiber, fiber);
    let s_frozen = (SymForm::new(frozen_ref)?.inverse()? * frozen).trace() / k;
    let consistency = (r - Matrix::identity(fiber.len(), fiber.len()) * s).amax().max((s - s_frozen).abs());
    if !(s > 0.0) {
        return Err(Error::NonPositiveWarp { value: s, at: format!("{u:?}") });
    }
    let mut dlnf = vec![0.0; u.len()];
    for &a in base {
        let dgf = block(&p.d_gram[a], fiber, fiber);
        dlnf[a] = (&m_inv * dgf).trace() / (2.0 * s * k);
    }
    Ok(WarpPoint { point_index: i, mixed, s, s_frozen, consistency, f: f_ref * s.sqrt(), dlnf })
}

/// Tests the induced metric for the form `G_B ⊕ f(u_B)² C(u_F)` and
/// extracts `f`, normalized so `f(reference) = f_ref`.
pub fn detect_warped_structure(
    sub: &Submanifold,
    base: &[usize],
    fiber: &[usize],
    points: &[Vec<f64>],
    reference: &[f64],
    f_ref: f64,
    exec: Execution,
) -> Result<WarpDetection> {
    let m = sub.dim();
    let mut seen: Vec<usize> = base.iter().chain(fiber).copied().collect();
    seen.sort_unstable();
    if seen != (0..m).collect::<Vec<_>>() {
        return Err(Error::Invalid { what: "warp split".into(), reason: format!("base {base:?} and fiber {fiber:?} must partition 0..{m}") });
    }
    if reference.len() != m {
        return Err(Error::Dimension(format!("reference point has {} coordinates, expected {m}", reference.len())));
    }
    if !(f_ref > 0.0) {
        return Err(Error::NonPositiveWarp { value: f_ref, at: format!("{reference:?}") });
    }
    let per = exec.map(points, |i, u| sub.point_data(u).and_then(|p| warp_point(sub, &p, base, fiber, reference, f_ref, i)));
    let mut out = WarpDetection {
        base: base.to_vec(),
        fiber: fiber.to_vec(),
        reference: reference.to_vec(),
        f_ref,
        mixed_residual: 0.0,
        f_consistency_residual: 0.0,
        points: Vec::new(),
        rejected: Vec::new(),
    };
    for (i, r) in per.into_iter().enumerate() {
        match r {
            Ok(w) => {
                out.mixed_residual = out.mixed_residual.max(w.mixed);
                out.f_consistency_residual = out.f_consistency_residual.max(w.consistency);
                out.points.push(w);
            }
            Err(_) => out.rejected.push(i),
        }
    }
    if out.points.is_empty() {
        return Err(Error::NoAdmissiblePoints);
    }
    Ok(out)
}

/// Warping data consumed by the warped-product identities.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpData {
    /// Frame indices of the base `F` and the fiber `N_λ`.
    pub base: Vec<usize>,
    pub fiber: Vec<usize>,
    pub source: WarpSource,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WarpSource {
    /// `f` as an expression in the immersion parameters.
    Declared { f: Expr, constants: BTreeMap<String, f64> },
    /// `f` extracted from the induced metric.
    Detected { reference: Vec<f64>, f_ref: f64 },
}

impl WarpData {
    /// `f` and `∂_a ln f` per parameter at `p`.
    pub fn warp_at(&self, sub: &Submanifold, p: &PointData) -> Result<(f64, Vector)> {
        match &self.source {
            WarpSource::Declared { f, constants } => {
                let m = p.u.len();
                let vars: Vec<Jet1> = p.u.iter().enumerate().map(|(i, &x)| Jet1::variable(x, i, m)).collect();
                let env = VarEnv { names: sub.imm.params(), values: &vars, constants };
                let fv: Jet1 = f.eval(&env)?;
                if !(fv.v > 0.0) {
                    return Err(Error::NonPositiveWarp { value: fv.v, at: format!("{:?}", p.u) });
                }
                Ok((fv.v, Vector::from_iterator(m, (0..m).map(|i| fv.d(i) / fv.v))))
            }
            WarpSource::Detected { reference, f_ref } => {
                let w = warp_point(sub, p, &self.base, &self.fiber, reference, *f_ref, 0)?;
                Ok((w.f, Vector::from_vec(w.dlnf)))
            }
        }
    }

    /// `Z(ln f)` per frame field: `(∂ ln f)·C`.
    pub fn frame_dlnf(&self, sub: &Submanifold, p: &PointData) -> Result<Vector> {
        let (_, d) = self.warp_at(sub, p)?;
        Ok(p.frame.transpose() * d)
    }
}

/// `warp-detect` rows per point: mixed block (0), fiber-block consistency
/// (1), and with a declared `f` the detected against the declared value (2).
pub fn warp_rows(sub: &Submanifold, warp: &WarpData, det: &WarpDetection, points: &[Vec<f64>], tol: f64) -> Vec<CheckRow> {
    const ID: &str = "warp-detect";
    let mut rows = Vec::new();
    for w in &det.points {
        let u = &points[w.point_index];
        let at = At::point(w.point_index, u);
        rows.push(CheckRow::with_residual(ID, &at, 0, "max |g(Z_b, Z_f)|, base b, fiber f", w.mixed, 0.0, w.mixed, tol));
        rows.push(CheckRow::scalar(ID, &at, 1, "fiber block ∝ f²: s vs s at frozen fiber", w.s, w.s_frozen, tol).with_residual_value(w.consistency));
        if let WarpSource::Declared { .. } = warp.source {
            let declared = sub.point_data(u).and_then(|p| warp.warp_at(sub, &p)).map(|x| x.0).unwrap_or(f64::NAN);
            rows.push(CheckRow::scalar(ID, &at, 2, "detected f vs declared f", w.f, declared, tol));
        }
    }
    for &i in &det.rejected {
        rows.push(CheckRow::error(ID, &At::point(i, &points[i]), "point rejected"));
    }
    rows
}

/// `prop-4.2`: with `ξ` tangent, `g(∇_Z ξ, ξ)/g(ξ, ξ)` is the `Z(ln f)` that
/// a fiber containing `ξ` would force; it must vanish. Probe `k` is base
/// field `k`. When `ξ` is in the fiber and warp data is given, the scenario's
/// own `Z(ln f)` is compared too (probes offset by the base size), FLAGGED
/// when nonzero.
#[allow(clippy::too_many_arguments)]
pub fn check_nonexistence(
    sub: &Submanifold,
    xi: usize,
    base: &[usize],
    fiber: &[usize],
    warp: Option<&WarpData>,
    points: &[Vec<f64>],
    tol: f64,
    exec: Execution,
) -> Vec<CheckRow> {
    const ID: &str = "prop-4.2";
    let xi_in_fiber = fiber.contains(&xi);
    collect_rows(points, exec, &[ID], |i, u| {
        let at = At::point(i, u);
        let p = sub.point_data(u)?;
        let m = p.m();
        let e = unit(m, xi);
        let gxx = p.inner(&e, &e);
        let mut rows = Vec::new();
        for (k, &z) in base.iter().enumerate() {
            let implied = p.inner(&p.nabla(&unit(m, z), &e), &e) / gxx;
            rows.push(CheckRow::with_residual(
                ID,
                &at,
                k,
                format!("implied {}(ln f) = g(∇_Z ξ, ξ)/g(ξ, ξ)", sub.frame.names()[z]),
                implied,
                0.0,
                implied.abs(),
                tol,
            ));
        }
        if let (true, Some(w)) = (xi_in_fiber, warp) {
            let d = w.frame_dlnf(sub, &p)?;
            for (k, &z) in base.iter().enumerate() {
                let r = CheckRow::with_residual(
                    ID,
                    &at,
                    base.len() + k,
                    format!("scenario {}(ln f) with ξ in the fiber", sub.frame.names()[z]),
                    d[z],
                    0.0,
                    d[z].abs(),
                    tol,
                );
                rows.push(if r.status == Status::Fail { r.status(Status::Flagged) } else { r });
            }
        }
        Ok(rows)
    })
}

impl CheckRow {
    fn with_residual_value(mut self, residual: f64) -> Self {
        self.residual = residual;
        self.status = Status::from_residual(residual, self.tol);
        self
    }
}
