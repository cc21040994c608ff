//! Extrinsic geometry of an immersion `F: U ⊂ R^m → R^{2n+1}`.
//!
//! Tangent fields are constant-coefficient combinations `X = Σ a_i Z_i` of a
//! frame field `Z_1..Z_m` whose coefficients are expressions in the
//! parameters; tangent vectors are passed around as those coefficient
//! vectors `a`. Normal vectors are ambient vectors. Projections always go
//! through Gram solves, never through orthonormalization.

use std::collections::BTreeMap;

use crate::ambient::{nearly_paracosymplectic_defect, AmbientPoint, AmbientStructure};
use crate::diffcalc::JetMap;
use crate::error::{Error, Result};
use crate::expr::{Expr, VarEnv};
use crate::jet::Jet1;
use crate::numlin::{rank, Matrix, SymForm, Vector};
use crate::par::{probe_rng, random_vector, Execution};
use crate::report::{collect_rows, At, CheckRow, Status};

/// Random probes per point for the structural identities.
pub const PROBES_PER_POINT: usize = 50;

/// Relative singular value cutoff for pushforward and frame rank.
pub const RANK_REL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Immersion {
    ambient: AmbientStructure,
    map: JetMap,
}

impl Immersion {
    pub fn new(ambient: AmbientStructure, params: Vec<String>, components: Vec<Expr>, constants: BTreeMap<String, f64>) -> Result<Self> {
        if components.len() != ambient.dim() {
            return Err(Error::Dimension(format!(
                "immersion has {} components, ambient dimension is {}",
                components.len(),
                ambient.dim()
            )));
        }
        if params.is_empty() || params.len() >= ambient.dim() {
            return Err(Error::Dimension(format!("submanifold dimension {} must be in 1..{}", params.len(), ambient.dim())));
        }
        Ok(Immersion { ambient, map: JetMap::new(params, components, constants)? })
    }

    pub fn ambient(&self) -> &AmbientStructure {
        &self.ambient
    }

    pub fn params(&self) -> &[String] {
        self.map.names()
    }

    pub fn dim(&self) -> usize {
        self.map.input_dim()
    }

    pub fn map(&self) -> &JetMap {
        &self.map
    }
}

/// `m` tangent fields; field `j` has `m` coefficient expressions with respect
/// to the coordinate frame `∂/∂u_k`.
#[derive(Debug, Clone)]
pub struct FrameField {
    names: Vec<String>,
    params: Vec<String>,
    coeffs: Vec<Vec<Expr>>,
    constants: BTreeMap<String, f64>,
}

impl FrameField {
    /// The coordinate frame, named `Z1..Zm`.
    pub fn identity(params: &[String]) -> Self {
        let m = params.len();
        let coeffs = (0..m).map(|j| (0..m).map(|k| Expr::num(if j == k { 1.0 } else { 0.0 })).collect()).collect();
        FrameField {
            names: (1..=m).map(|j| format!("Z{j}")).collect(),
            params: params.to_vec(),
            coeffs,
            constants: BTreeMap::new(),
        }
    }

    pub fn new(names: Vec<String>, params: Vec<String>, coeffs: Vec<Vec<Expr>>, constants: BTreeMap<String, f64>) -> Result<Self> {
        let m = params.len();
        if names.len() != m || coeffs.len() != m || coeffs.iter().any(|c| c.len() != m) {
            return Err(Error::Dimension(format!("frame must have {m} fields with {m} coefficients each")));
        }
        for e in coeffs.iter().flatten() {
            for v in e.free_vars() {
                if !params.contains(&v) && !constants.contains_key(&v) {
                    return Err(Error::Invalid { what: "frame".into(), reason: format!("`{e}` uses unknown name `{v}`") });
                }
            }
        }
        Ok(FrameField { names, params, coeffs, constants })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coeffs(&self) -> &[Vec<Expr>] {
        &self.coeffs
    }

    /// Coefficient matrix `C` (column `j` is `Z_j` in parameter coordinates)
    /// and its partial derivatives `∂_a C`.
    pub fn at(&self, u: &[f64]) -> Result<(Matrix, Vec<Matrix>)> {
        let m = self.params.len();
        if u.len() != m {
            return Err(Error::Dimension(format!("frame point has {} coordinates, expected {m}", u.len())));
        }
        let vars: Vec<Jet1> = u.iter().enumerate().map(|(i, &x)| Jet1::variable(x, i, m)).collect();
        let env = VarEnv { names: &self.params, values: &vars, constants: &self.constants };
        let mut c = Matrix::zeros(m, m);
        let mut dc = vec![Matrix::zeros(m, m); m];
        for (j, field) in self.coeffs.iter().enumerate() {
            for (k, e) in field.iter().enumerate() {
                let v: Jet1 = e.eval(&env)?;
                c[(k, j)] = v.v;
                for (a, d) in dc.iter_mut().enumerate() {
                    d[(k, j)] = v.d(a);
                }
            }
        }
        Ok((c, dc))
    }
}

/// An immersion together with the frame used to probe it.
#[derive(Debug, Clone)]
pub struct Submanifold {
    pub imm: Immersion,
    pub frame: FrameField,
}

impl Submanifold {
    pub fn new(imm: Immersion, frame: FrameField) -> Result<Self> {
        if frame.len() != imm.dim() {
            return Err(Error::Dimension(format!("frame has {} fields, submanifold dimension is {}", frame.len(), imm.dim())));
        }
        Ok(Submanifold { imm, frame })
    }

    pub fn dim(&self) -> usize {
        self.imm.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.imm.ambient().dim()
    }

    pub fn point_data(&self, u: &[f64]) -> Result<PointData> {
        point_data(&self.imm, &self.frame, u)
    }

    /// Induced Gram matrix of the frame at `u`, without the rest of
    /// [`PointData`].
    pub fn gram(&self, u: &[f64]) -> Result<Matrix> {
        let jac = self.imm.map.jacobian(u)?;
        let x = self.imm.map.value(u)?;
        let g = self.imm.ambient().values(x.as_slice())?.g;
        let (c, _) = self.frame.at(u)?;
        let t = jac * c;
        Ok(t.transpose() * g.matrix() * t)
    }
}

/// Everything extrinsic about the immersion at one parameter point.
#[derive(Debug, Clone)]
pub struct PointData {
    pub u: Vec<f64>,
    /// `F(u)`.
    pub x: Vector,
    /// Pushforward `∂F/∂u`, `N x m`.
    pub jac: Matrix,
    /// `∂²F^K/∂u_a∂u_b` per ambient component.
    pub hess: Vec<Matrix>,
    pub amb: AmbientPoint,
    /// Frame coefficients `C` and derivatives `∂_a C`.
    pub frame: Matrix,
    pub dframe: Vec<Matrix>,
    /// `T = J C`: column `j` is `F_* Z_j`.
    pub tangent: Matrix,
    pub gram: SymForm,
    pub gram_inv: Matrix,
    /// Columns span the normal space.
    pub normal: Matrix,
    pub normal_gram: SymForm,
    /// `D_{Z_i}(F_* Z_j)`, the ambient derivative along the immersion.
    pub dzz: Vec<Vec<Vector>>,
    /// `∂_a T`.
    pub d_tangent: Vec<Matrix>,
    /// `∂_a (g ∘ F)`.
    pub d_metric: Vec<Matrix>,
    /// `∂_a G` of the induced Gram matrix.
    pub d_gram: Vec<Matrix>,
}

/// Builds [`PointData`] at `u`.
pub fn point_data(imm: &Immersion, frame: &FrameField, u: &[f64]) -> Result<PointData> {
    let so = imm.map.second_order(u)?;
    let m = imm.dim();
    let nd = imm.ambient().dim();
    let r = rank(&so.jacobian, RANK_REL);
    if r < m {
        return Err(Error::RankDeficient { what: "pushforward".into(), rank: r, expected: m });
    }
    let (c, dc) = frame.at(u)?;
    let rc = rank(&c, RANK_REL);
    if rc < m {
        return Err(Error::RankDeficient { what: "frame".into(), rank: rc, expected: m });
    }
    let x = so.value.clone();
    let amb = imm.ambient().at(x.as_slice())?;
    let g = amb.g.matrix();
    let tangent = &so.jacobian * &c;
    let gram = SymForm::new(tangent.transpose() * g * &tangent)?;
    let gram_inv = gram.inverse()?;

    // P_T = T G⁻¹ Tᵀ g
    let proj_t = &tangent * &gram_inv * tangent.transpose() * g;
    let cand = Matrix::identity(nd, nd) - &proj_t;
    let normal = select_columns(&cand, nd - m)?;
    let normal_gram = SymForm::new(normal.transpose() * g * &normal)?;
    normal_gram.check_nondegenerate()?;

    // ∂_a T = H_a C + J ∂_a C
    let mut d_tangent = Vec::with_capacity(m);
    let mut d_metric = Vec::with_capacity(m);
    for a in 0..m {
        let mut ha = Matrix::zeros(nd, m);
        for k in 0..nd {
            for b in 0..m {
                ha[(k, b)] = so.hessian[k][(a, b)];
            }
        }
        d_tangent.push(&ha * &c + &so.jacobian * &dc[a]);
        let mut dm = Matrix::zeros(nd, nd);
        for (l, dgl) in amb.dg.iter().enumerate() {
            let s = so.jacobian[(l, a)];
            if s != 0.0 {
                dm += dgl * s;
            }
        }
        d_metric.push(dm);
    }
    let d_gram = (0..m)
        .map(|a| {
            let x = d_tangent[a].transpose() * g * &tangent;
            &x + x.transpose() + tangent.transpose() * &d_metric[a] * &tangent
        })
        .collect();

    let mut dzz = vec![vec![Vector::zeros(nd); m]; m];
    for i in 0..m {
        let xi = c.column(i).into_owned();
        let jx = &so.jacobian * &xi;
        for j in 0..m {
            let eta = c.column(j).into_owned();
            // X(η^k): derivative of the coefficients of Z_j along Z_i
            let mut x_eta = Vector::zeros(m);
            for a in 0..m {
                if xi[a] != 0.0 {
                    x_eta += dc[a].column(j) * xi[a];
                }
            }
            let mut v = &so.jacobian * x_eta;
            for (k, hk) in so.hessian.iter().enumerate() {
                v[k] += xi.dot(&(hk * &eta));
            }
            v += amb.gamma.contract(&jx, &(&so.jacobian * &eta));
            dzz[i][j] = v;
        }
    }

    Ok(PointData {
        u: u.to_vec(),
        x,
        jac: so.jacobian,
        hess: so.hessian,
        amb,
        frame: c,
        dframe: dc,
        tangent,
        gram,
        gram_inv,
        normal,
        normal_gram,
        dzz,
        d_tangent,
        d_metric,
        d_gram,
    })
}

/// Greedily picks `k` columns of `cand` that are furthest from the span of
/// those already picked (Euclidean, used for selection only).
fn select_columns(cand: &Matrix, k: usize) -> Result<Matrix> {
    let nd = cand.nrows();
    let scale = cand.column_iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    let mut chosen: Vec<usize> = Vec::new();
    let mut ortho: Vec<Vector> = Vec::new();
    for _ in 0..k {
        let mut best: Option<(usize, f64, Vector)> = None;
        for col in 0..nd {
            if chosen.contains(&col) {
                continue;
            }
            let mut r = cand.column(col).into_owned();
            for q in &ortho {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
            let nrm = r.norm();
            if best.as_ref().is_none_or(|b| nrm > b.1) {
                best = Some((col, nrm, r));
            }
        }
        let (col, nrm, r) = best.ok_or(Error::RankDeficient { what: "normal space".into(), rank: chosen.len(), expected: k })?;
        if nrm <= 1e-9 * scale {
            return Err(Error::RankDeficient { what: "normal space".into(), rank: chosen.len(), expected: k });
        }
        chosen.push(col);
        ortho.push(r / nrm);
    }
    let mut out = Matrix::zeros(nd, k);
    for (j, &col) in chosen.iter().enumerate() {
        out.set_column(j, &cand.column(col));
    }
    Ok(out)
}

/// Tangential/normal splitting of an ambient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    /// Frame coefficients of the tangential part.
    pub coeffs: Vector,
    pub tangential: Vector,
    pub normal: Vector,
}

impl PointData {
    pub fn m(&self) -> usize {
        self.tangent.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.tangent.nrows()
    }

    pub fn g(&self) -> &SymForm {
        &self.amb.g
    }

    /// `F_* X` for frame coefficients `a`.
    pub fn push(&self, a: &Vector) -> Vector {
        &self.tangent * a
    }

    /// Induced metric on frame coefficients.
    pub fn inner(&self, a: &Vector, b: &Vector) -> f64 {
        self.gram.apply(a, b)
    }

    /// Frame coefficients of the tangential part of `w`.
    pub fn coeffs_of(&self, w: &Vector) -> Vector {
        &self.gram_inv * (self.tangent.transpose() * self.amb.g.lower(w))
    }

    pub fn split(&self, w: &Vector) -> Split {
        let coeffs = self.coeffs_of(w);
        let tangential = self.push(&coeffs);
        let normal = w - &tangential;
        Split { coeffs, tangential, normal }
    }

    pub fn normal_part(&self, w: &Vector) -> Vector {
        self.split(w).normal
    }

    /// `D_X(F_* Y) = ∇̃_X Y` for constant-coefficient fields.
    pub fn ambient_derivative(&self, a: &Vector, b: &Vector) -> Vector {
        let mut out = Vector::zeros(self.ambient_dim());
        for (i, row) in self.dzz.iter().enumerate() {
            if a[i] == 0.0 {
                continue;
            }
            for (j, v) in row.iter().enumerate() {
                let c = a[i] * b[j];
                if c != 0.0 {
                    out.axpy(c, v, 1.0);
                }
            }
        }
        out
    }

    /// Second fundamental form `h(X, Y)` (normal part of `∇̃_X Y`).
    pub fn h(&self, a: &Vector, b: &Vector) -> Vector {
        self.split(&self.ambient_derivative(a, b)).normal
    }

    /// Induced connection `∇_X Y` as frame coefficients.
    pub fn nabla(&self, a: &Vector, b: &Vector) -> Vector {
        self.coeffs_of(&self.ambient_derivative(a, b))
    }

    /// Shape operator `A_ζ X` as frame coefficients, solved from
    /// `g(A_ζ X, Z_j) = g(h(X, Z_j), ζ)`. Only the normal part of `ζ`
    /// contributes.
    pub fn shape(&self, zeta: &Vector, a: &Vector) -> Vector {
        let m = self.m();
        let rhs = Vector::from_iterator(m, (0..m).map(|j| self.amb.g.apply(&self.h(a, &unit(m, j)), zeta)));
        &self.gram_inv * rhs
    }

    /// Matrix of `A_ζ` in the frame (column `j` is `A_ζ Z_j`).
    pub fn shape_matrix(&self, zeta: &Vector) -> Matrix {
        let m = self.m();
        let mut s = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                s[(i, j)] = self.amb.g.apply(&self.h(&unit(m, i), &unit(m, j)), zeta);
            }
        }
        &self.gram_inv * s
    }

    /// `φX = tX + nX`: frame coefficients of `tX` and the ambient `nX`.
    pub fn tn(&self, a: &Vector) -> (Vector, Vector) {
        let s = self.split(&(&self.amb.phi * self.push(a)));
        (s.coeffs, s.normal)
    }

    pub fn t(&self, a: &Vector) -> Vector {
        self.tn(a).0
    }

    pub fn n(&self, a: &Vector) -> Vector {
        self.tn(a).1
    }

    /// `φζ = t'ζ + n'ζ` for a normal `ζ`.
    pub fn t1n1(&self, zeta: &Vector) -> (Vector, Vector) {
        let s = self.split(&(&self.amb.phi * zeta));
        (s.coeffs, s.normal)
    }

    /// Matrix of `t` in the frame: `G⁻¹ Tᵀ g φ T`.
    pub fn t_matrix(&self) -> Matrix {
        &self.gram_inv * self.tangent.transpose() * self.amb.g.matrix() * &self.amb.phi * &self.tangent
    }

    /// `(∇̃_Xφ)Y` along the immersion.
    pub fn nabla_phi(&self, a: &Vector, b: &Vector) -> Vector {
        self.amb.nabla_phi(&self.push(a), &self.push(b))
    }

    /// `(∇̃_Xφ)Y = T_X Y + N_X Y`: frame coefficients of `T_X Y` and the
    /// ambient `N_X Y`.
    pub fn tn_split(&self, a: &Vector, b: &Vector) -> (Vector, Vector) {
        let s = self.split(&self.nabla_phi(a, b));
        (s.coeffs, s.normal)
    }

    /// Mean curvature `H = (1/m) Σ g^{ij} h(Z_i, Z_j)`.
    pub fn mean_curvature(&self) -> Vector {
        let m = self.m();
        let mut hsum = Vector::zeros(self.ambient_dim());
        for i in 0..m {
            for j in 0..m {
                let c = self.gram_inv[(i, j)];
                if c != 0.0 {
                    hsum.axpy(c, &self.h(&unit(m, i), &unit(m, j)), 1.0);
                }
            }
        }
        hsum / m as f64
    }

    /// Best `δ` with `A_ζ ≈ δ Id` and the max-entry defect `‖A_ζ − δ Id‖`.
    pub fn umbilicity(&self, zeta: &Vector) -> (f64, f64) {
        let a = self.shape_matrix(zeta);
        let m = self.m();
        let delta = a.trace() / m as f64;
        (delta, (a - Matrix::identity(m, m) * delta).amax())
    }

    /// `[Z_i, Z_j]` in parameter coordinates.
    pub fn lie_bracket_params(&self, i: usize, j: usize) -> Vector {
        lie_bracket(&self.frame, &self.dframe, i, j)
    }

    /// `[Z_i, Z_j]` as frame coefficients.
    pub fn lie_bracket(&self, i: usize, j: usize) -> Vector {
        let br = self.lie_bracket_params(i, j);
        self.frame.clone().lu().solve(&br).unwrap_or_else(|| Vector::from_element(self.m(), f64::NAN))
    }

    /// Weingarten defect `g(∇̃_X ζ, Z_j) + g(A_ζ X, Z_j)` for each `j`, where
    /// `ζ` is extended as the normal projection of the constant ambient
    /// vector `zeta0`.
    pub fn weingarten_defect(&self, zeta0: &Vector, a: &Vector) -> Vector {
        let nd = self.ambient_dim();
        let g = self.amb.g.matrix();
        let t = &self.tangent;
        let gi = &self.gram_inv;
        // ∂_a ζ̂ = −∂_a(T G⁻¹ Tᵀ g) ζ0
        let xparam = &self.frame * a;
        let mut dz = Vector::zeros(nd);
        for (p, &w) in xparam.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let dt = &self.d_tangent[p];
            let dgi = -(gi * &self.d_gram[p] * gi);
            let dp = dt * gi * t.transpose() * g
                + t * dgi * t.transpose() * g
                + t * gi * dt.transpose() * g
                + t * gi * t.transpose() * &self.d_metric[p];
            dz -= (dp * zeta0) * w;
        }
        let zeta = self.normal_part(zeta0);
        let d = dz + self.amb.gamma.contract(&self.push(a), &zeta);
        let lhs = self.tangent.transpose() * self.amb.g.lower(&d);
        let shape = self.gram.matrix() * self.shape(&zeta, a);
        lhs + shape
    }
}

/// `[Z_i, Z_j]^k = Z_i(C_kj) − Z_j(C_ki)` from coefficients and derivatives.
pub fn lie_bracket(c: &Matrix, dc: &[Matrix], i: usize, j: usize) -> Vector {
    let m = c.nrows();
    let mut out = Vector::zeros(m);
    for (a, d) in dc.iter().enumerate() {
        out += d.column(j) * c[(a, i)] - d.column(i) * c[(a, j)];
    }
    out
}

pub fn unit(m: usize, i: usize) -> Vector {
    let mut v = Vector::zeros(m);
    v[i] = 1.0;
    v
}

fn probes(seed: u64, id: &str, point: usize, m: usize, count: usize) -> Vec<Vector> {
    let mut rng = probe_rng(seed, id, point);
    (0..count).map(|_| random_vector(&mut rng, m)).collect()
}

fn worst_row(id: &str, at: &At, probe: &str, items: impl Iterator<Item = (f64, f64, f64)>, tol: f64) -> CheckRow {
    let mut worst = (0.0, 0.0, -1.0);
    for it in items {
        if !(it.2 <= worst.2) {
            worst = it;
        }
    }
    CheckRow::with_residual(id, at, 0, probe, worst.0, worst.1, worst.2.max(0.0), tol)
}

/// Structural identities that hold on every immersion, evaluated at each
/// parameter point over random probes.
pub fn check_structure(sub: &Submanifold, points: &[Vec<f64>], ids: &[&str], tol: f64, seed: u64, exec: Execution) -> Vec<CheckRow> {
    let ids: Vec<&str> = ids.iter().copied().filter(|id| STRUCTURE_IDS.contains(id)).collect();
    collect_rows(points, exec, &ids, |i, u| {
        let at = At::point(i, u);
        let p = sub.point_data(u)?;
        let m = p.m();
        let nd = p.ambient_dim();
        let g = p.g();
        let mut rows = Vec::new();
        for &id in &ids {
            let xs = probes(seed, id, i, m, PROBES_PER_POINT);
            let ys = probes(seed, &format!("{id}/y"), i, m, PROBES_PER_POINT);
            let row = match id {
                "sub-h-symmetric" => worst_row(
                    id,
                    &at,
                    "max over random pairs ‖h(X,Y) − h(Y,X)‖",
                    xs.iter().zip(&ys).map(|(x, y)| {
                        let (a, b) = (p.h(x, y), p.h(y, x));
                        (a.norm(), b.norm(), (a - b).norm())
                    }),
                    tol,
                ),
                "sub-shape-selfadjoint" => {
                    let zs = probes(seed, &format!("{id}/z"), i, nd, PROBES_PER_POINT);
                    worst_row(
                        id,
                        &at,
                        "max over random (ζ,X,Y): g(A_ζX,Y) vs g(X,A_ζY)",
                        xs.iter().zip(&ys).zip(&zs).map(|((x, y), z)| {
                            let z = p.normal_part(z);
                            let l = p.inner(&p.shape(&z, x), y);
                            let r = p.inner(x, &p.shape(&z, y));
                            (l, r, (l - r).abs())
                        }),
                        tol,
                    )
                }
                "sub-weingarten" => {
                    let zs = probes(seed, &format!("{id}/z"), i, nd, PROBES_PER_POINT);
                    worst_row(
                        id,
                        &at,
                        "max over random (ζ,X): ‖g(∇̃_Xζ,·) + g(A_ζX,·)‖ on the frame",
                        xs.iter().zip(&zs).map(|(x, z)| {
                            let d = p.weingarten_defect(z, x);
                            (d.norm(), 0.0, d.norm())
                        }),
                        tol,
                    )
                }
                "sub-t-antisym" => worst_row(
                    id,
                    &at,
                    "max over random pairs: g(X,tY) vs −g(tX,Y)",
                    xs.iter().zip(&ys).map(|(x, y)| {
                        let l = p.inner(x, &p.t(y));
                        let r = -p.inner(&p.t(x), y);
                        (l, r, (l - r).abs())
                    }),
                    tol,
                ),
                "sub-TN-antisym" => {
                    let pairs: Vec<_> = xs.iter().zip(&ys).map(|(x, y)| (p.push(x), p.push(y))).collect();
                    let hyp = nearly_paracosymplectic_defect(&p.amb, &pairs[..pairs.len().min(20)]) <= tol;
                    let row = worst_row(
                        id,
                        &at,
                        "max over random pairs ‖T_XY + T_YX‖ + ‖N_XY + N_YX‖",
                        xs.iter().zip(&ys).map(|(x, y)| {
                            let (t1, n1) = p.tn_split(x, y);
                            let (t2, n2) = p.tn_split(y, x);
                            let r = p.push(&(t1 + t2)).norm() + (n1 + n2).norm();
                            (r, 0.0, r)
                        }),
                        tol,
                    );
                    if hyp {
                        row
                    } else {
                        row.status(Status::NotApplicable)
                    }
                }
                "sub-T-duality" => {
                    let ws = probes(seed, &format!("{id}/w"), i, m, PROBES_PER_POINT);
                    worst_row(
                        id,
                        &at,
                        "max over random (X,Y,W): g(T_XY,W) vs −g(Y,T_XW)",
                        xs.iter().zip(&ys).zip(&ws).map(|((x, y), w)| {
                            let l = p.inner(&p.tn_split(x, y).0, w);
                            let r = -p.inner(y, &p.tn_split(x, w).0);
                            (l, r, (l - r).abs())
                        }),
                        tol,
                    )
                }
                "sub-tangent-normal" => {
                    let r = (p.tangent.transpose() * g.matrix() * &p.normal).amax();
                    CheckRow::with_residual(id, &at, 0, "max |g(F_*Z_i, ν_k)|", r, 0.0, r, tol)
                }
                _ => unreachable!("filtered above"),
            };
            rows.push(row);
        }
        Ok(rows)
    })
}

pub const STRUCTURE_IDS: &[&str] =
    &["sub-h-symmetric", "sub-shape-selfadjoint", "sub-weingarten", "sub-t-antisym", "sub-TN-antisym", "sub-T-duality", "sub-tangent-normal"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn exprs(v: &[&str]) -> Vec<Expr> {
        v.iter().map(|s| parse(s).unwrap()).collect()
    }

    pub(crate) fn example41() -> Submanifold {
        let amb = AmbientStructure::canonical_paracosymplectic(2).unwrap();
        let imm = Immersion::new(
            amb,
            names(&["v", "alpha", "beta", "t"]),
            exprs(&["v*cosh(alpha)", "v*cosh(beta)", "v*sinh(alpha)", "v*sinh(beta)", "t"]),
            BTreeMap::new(),
        )
        .unwrap();
        let frame = FrameField::identity(imm.params());
        Submanifold::new(imm, frame).unwrap()
    }

    fn plane() -> Submanifold {
        // x1 = p, y2 = q: an affine plane in canonical R^5
        let amb = AmbientStructure::canonical_paracosymplectic(2).unwrap();
        let imm = Immersion::new(amb, names(&["p", "q"]), exprs(&["p", "1", "0", "q", "2"]), BTreeMap::new()).unwrap();
        let frame = FrameField::identity(imm.params());
        Submanifold::new(imm, frame).unwrap()
    }

    #[test]
    fn example41_gram_is_diagonal() {
        let s = example41();
        let p = s.point_data(&[2.0, 0.3, -0.5, 1.0]).unwrap();
        let expect = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, -4.0, -4.0, 1.0]));
        assert!((p.gram.matrix() - expect).amax() < 1e-12);
        assert!((p.tangent.transpose() * p.g().matrix() * &p.normal).amax() < 1e-12);
        assert_eq!(p.normal.ncols(), 1);
    }

    #[test]
    fn example41_second_fundamental_form() {
        let (v, al, be) = (2.0f64, 0.3f64, -0.5f64);
        let s = example41();
        let p = s.point_data(&[v, al, be, 1.0]).unwrap();
        let nvec = Vector::from_vec(vec![al.cosh(), -be.cosh(), al.sinh(), -be.sinh(), 0.0]);
        let e = |i| unit(4, i);
        let h22 = p.h(&e(1), &e(1));
        assert!((&h22 - &nvec * (v / 2.0)).norm() < 1e-12, "{h22}");
        assert!((p.h(&e(2), &e(2)) + &nvec * (v / 2.0)).norm() < 1e-12);
        assert!(p.h(&e(0), &e(1)).norm() < 1e-12);
        assert!(p.h(&e(3), &e(3)).norm() < 1e-12);
        let a2 = p.shape(&nvec, &e(1));
        assert!((&a2 - &e(1) * (-1.0 / v)).norm() < 1e-12);
        // nZ1 = 0, tZ1 = (Z2 + Z3)/v, tZ2 = (v/2) Z1
        let (t1, n1) = p.tn(&e(0));
        assert!(n1.norm() < 1e-12);
        assert!((t1 - (e(1) + e(2)) / v).norm() < 1e-12);
        assert!((p.t(&e(1)) - e(0) * (v / 2.0)).norm() < 1e-12);
        assert!((p.n(&e(1)) - &nvec * (v / 2.0)).norm() < 1e-12);
    }

    #[test]
    fn plane_is_totally_geodesic() {
        let s = plane();
        let p = s.point_data(&[0.4, -1.2]).unwrap();
        let x = Vector::from_vec(vec![0.3, 0.7]);
        let y = Vector::from_vec(vec![-1.0, 0.2]);
        assert_eq!(p.h(&x, &y).norm(), 0.0);
        assert_eq!(p.mean_curvature().norm(), 0.0);
        let z = p.normal.column(0).into_owned();
        assert_eq!(p.shape(&z, &x).norm(), 0.0);
        // normal basis is the remaining coordinate directions
        for col in p.normal.column_iter() {
            assert_eq!(col.iter().filter(|&&c| c != 0.0).count(), 1);
            assert!(col[0] == 0.0 && col[3] == 0.0);
        }
        // φ∂y1 = ∂x1 is tangent
        let mut dy1 = Vector::zeros(5);
        dy1[2] = 1.0;
        let (tp, np) = p.t1n1(&dy1);
        assert!(np.norm() == 0.0);
        assert_eq!(tp[0], 1.0);
    }

    #[test]
    fn structure_checks_pass_on_example41() {
        let s = example41();
        let pts = vec![vec![2.0, 0.3, -0.5, 1.0], vec![-1.3, -0.7, 1.1, 0.0]];
        let rows = check_structure(&s, &pts, STRUCTURE_IDS, 1e-8, 11, Execution::Sequential);
        assert_eq!(rows.len(), 2 * STRUCTURE_IDS.len());
        for r in &rows {
            assert_eq!(r.status, Status::Pass, "{r:?}");
        }
    }

    #[test]
    fn mean_curvature_is_frame_invariant() {
        let s = example41();
        let u = [1.7, 0.2, 0.4, -0.3];
        let h1 = s.point_data(&u).unwrap().mean_curvature();
        let coeffs: Vec<Vec<Expr>> =
            (0..4).map(|j| (0..4).map(|k| Expr::num(if j == k { 2.0 } else { 0.0 })).collect()).collect();
        let frame = FrameField::new(names(&["A", "B", "C", "D"]), s.imm.params().to_vec(), coeffs, BTreeMap::new()).unwrap();
        let s2 = Submanifold::new(s.imm.clone(), frame).unwrap();
        let h2 = s2.point_data(&u).unwrap().mean_curvature();
        assert!((h1 - h2).norm() < 1e-12);
    }

    #[test]
    fn lie_bracket_of_twisted_frame() {
        // Z1 = ∂u, Z2 = u ∂w + ∂q on (u, w, q): [Z1, Z2] = ∂w
        let params = names(&["u", "w", "q"]);
        let frame = FrameField::new(
            names(&["Z1", "Z2", "Z3"]),
            params.clone(),
            vec![exprs(&["1", "0", "0"]), exprs(&["0", "u", "1"]), exprs(&["0", "0", "1"])],
            BTreeMap::new(),
        )
        .unwrap();
        let (c, dc) = frame.at(&[0.5, 0.0, 0.0]).unwrap();
        assert_eq!(lie_bracket(&c, &dc, 0, 1), Vector::from_vec(vec![0.0, 1.0, 0.0]));
        assert_eq!(lie_bracket(&c, &dc, 1, 0), Vector::from_vec(vec![0.0, -1.0, 0.0]));
        let id = FrameField::identity(&params);
        let (c, dc) = id.at(&[0.5, 0.0, 0.0]).unwrap();
        assert_eq!(lie_bracket(&c, &dc, 0, 1).norm(), 0.0);
    }

    #[test]
    fn singular_points_are_rejected() {
        let s = example41();
        assert!(matches!(s.point_data(&[0.0, 0.1, 0.2, 0.0]), Err(Error::RankDeficient { .. } | Error::DegenerateMetric { .. })));
    }
}
