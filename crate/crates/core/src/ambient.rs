//! Almost paracontact metric structures `(φ, ξ, η, g)` on `R^{2n+1}`.
//!
//! Matrix convention: `phi[k][j]` is `φ^k_j`, so column `j` of the evaluated
//! matrix is `φ∂_j`. Vector arguments of derivative checks are extended as
//! coordinate-constant fields; every identity checked here is tensorial.

use std::collections::BTreeMap;

use crate::diffcalc::{Christoffel, MetricField};
use crate::error::{Error, Result};
use crate::expr::{Expr, VarEnv};
use crate::jet::Jet1;
use crate::numlin::{rank, signature, Matrix, SymForm, Vector, SIGNATURE_TOL};
use crate::par::{probe_rng, random_vector, Execution};
use crate::report::{collect_rows, At, CheckRow};

/// Random vector pairs drawn per point for pairwise identities.
pub const PAIRS_PER_POINT: usize = 20;

/// Relative singular value cutoff for the rank of `φ`.
pub const RANK_REL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct AmbientStructure {
    n: usize,
    coords: Vec<String>,
    phi: Vec<Vec<Expr>>,
    xi: Vec<Expr>,
    eta: Vec<Expr>,
    metric: MetricField,
    constants: BTreeMap<String, f64>,
    constant: bool,
}

/// Pointwise values of the structure tensors (no derivatives).
#[derive(Debug, Clone)]
pub struct StructureValues {
    pub phi: Matrix,
    pub xi: Vector,
    pub eta: Vector,
    pub g: SymForm,
}

/// Structure tensors, their first derivatives and the Levi-Civita connection
/// at one point.
#[derive(Debug, Clone)]
pub struct AmbientPoint {
    pub phi: Matrix,
    /// `dphi[l] = ∂_l φ`.
    pub dphi: Vec<Matrix>,
    pub xi: Vector,
    /// Column `l` is `∂_l ξ`.
    pub dxi: Matrix,
    pub eta: Vector,
    /// Column `l` is `∂_l η`.
    pub deta: Matrix,
    pub g: SymForm,
    /// `dg[l] = ∂_l g`.
    pub dg: Vec<Matrix>,
    pub ginv: Matrix,
    pub gamma: Christoffel,
}

fn coord_names(n: usize) -> Vec<String> {
    let mut c: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    c.extend((1..=n).map(|i| format!("y{i}")));
    c.push("t".into());
    c
}

impl AmbientStructure {
    /// Flat structure on `R^{2n+1}` with coordinates `(x1..xn, y1..yn, t)`,
    /// `φ∂x_i = ∂y_i`, `φ∂y_i = ∂x_i`, `φ∂t = 0`, `ξ = ∂t`, `η = dt` and
    /// `g = Σdx² − Σdy² + dt²`.
    pub fn canonical_paracosymplectic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid { what: "ambient".into(), reason: "n must be at least 1".into() });
        }
        let d = 2 * n + 1;
        let num = |x: f64| Expr::num(x);
        let mut phi = vec![vec![num(0.0); d]; d];
        for i in 0..n {
            phi[n + i][i] = num(1.0);
            phi[i][n + i] = num(1.0);
        }
        let mut xi = vec![num(0.0); d];
        xi[2 * n] = num(1.0);
        let eta = xi.clone();
        let mut g = vec![vec![num(0.0); d]; d];
        for (i, row) in g.iter_mut().enumerate() {
            row[i] = num(if i < n || i == 2 * n { 1.0 } else { -1.0 });
        }
        Self::new(coord_names(n), phi, xi, eta, g, BTreeMap::new())
    }

    /// Expression-defined structure. The dimension must be odd.
    pub fn new(
        coords: Vec<String>,
        phi: Vec<Vec<Expr>>,
        xi: Vec<Expr>,
        eta: Vec<Expr>,
        g: Vec<Vec<Expr>>,
        constants: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let d = coords.len();
        if d < 3 || d.is_multiple_of(2) {
            return Err(Error::Dimension(format!("ambient dimension must be 2n+1 with n >= 1, got {d}")));
        }
        if phi.len() != d || phi.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension(format!("phi must be {d}x{d}")));
        }
        if xi.len() != d || eta.len() != d {
            return Err(Error::Dimension(format!("xi and eta must have {d} components")));
        }
        let metric = MetricField::new(coords.clone(), g, constants.clone())?;
        let all: Vec<&Expr> = phi.iter().flatten().chain(&xi).chain(&eta).collect();
        for e in &all {
            for v in e.free_vars() {
                if !coords.contains(&v) && !constants.contains_key(&v) {
                    return Err(Error::Invalid {
                        what: "ambient structure".into(),
                        reason: format!("`{e}` uses unknown name `{v}`"),
                    });
                }
            }
        }
        let constant = metric.is_constant() && all.iter().all(|e| e.free_vars().iter().all(|v| constants.contains_key(v)));
        Ok(AmbientStructure { n: (d - 1) / 2, coords, phi, xi, eta, metric, constants, constant })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn phi_exprs(&self) -> &[Vec<Expr>] {
        &self.phi
    }

    pub fn xi_exprs(&self) -> &[Expr] {
        &self.xi
    }

    pub fn eta_exprs(&self) -> &[Expr] {
        &self.eta
    }

    pub fn constants(&self) -> &BTreeMap<String, f64> {
        &self.constants
    }

    /// True when every entry is constant.
    pub fn is_constant(&self) -> bool {
        self.constant
    }

    /// Axiom tolerance suggested for this structure.
    pub fn default_axiom_tol(&self) -> f64 {
        if self.constant {
            1e-12
        } else {
            1e-8
        }
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::Dimension(format!("ambient point has {} coordinates, expected {}", p.len(), self.dim())));
        }
        Ok(())
    }

    /// Tensor values at `p`; does not require a non-degenerate metric.
    pub fn values(&self, p: &[f64]) -> Result<StructureValues> {
        self.check_point(p)?;
        let d = self.dim();
        let env = VarEnv { names: &self.coords, values: p, constants: &self.constants };
        let mut phi = Matrix::zeros(d, d);
        for k in 0..d {
            for j in 0..d {
                phi[(k, j)] = self.phi[k][j].eval::<f64, _>(&env)?;
            }
        }
        let vec = |es: &[Expr]| -> Result<Vector> {
            let v = es.iter().map(|e| e.eval::<f64, _>(&env)).collect::<Result<Vec<_>, _>>()?;
            Ok(Vector::from_vec(v))
        };
        let mut g = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                g[(i, j)] = self.metric.entries()[i][j].eval::<f64, _>(&env)?;
            }
        }
        Ok(StructureValues { phi, xi: vec(&self.xi)?, eta: vec(&self.eta)?, g: SymForm::new(g)? })
    }

    /// Tensors with first derivatives and Christoffel symbols at `p`.
    pub fn at(&self, p: &[f64]) -> Result<AmbientPoint> {
        self.check_point(p)?;
        let d = self.dim();
        let (g, dg) = self.metric.with_derivatives(p)?;
        let ginv = g.inverse()?;
        let gamma = Christoffel::from_metric(&ginv, &dg);
        let vars: Vec<Jet1> = p.iter().enumerate().map(|(i, &x)| Jet1::variable(x, i, d)).collect();
        let env = VarEnv { names: &self.coords, values: &vars, constants: &self.constants };
        let mut phi = Matrix::zeros(d, d);
        let mut dphi = vec![Matrix::zeros(d, d); d];
        for k in 0..d {
            for j in 0..d {
                let e: Jet1 = self.phi[k][j].eval(&env)?;
                phi[(k, j)] = e.v;
                for (l, m) in dphi.iter_mut().enumerate() {
                    m[(k, j)] = e.d(l);
                }
            }
        }
        let field = |es: &[Expr]| -> Result<(Vector, Matrix)> {
            let mut v = Vector::zeros(d);
            let mut dv = Matrix::zeros(d, d);
            for (k, e) in es.iter().enumerate() {
                let j: Jet1 = e.eval(&env)?;
                v[k] = j.v;
                for l in 0..d {
                    dv[(k, l)] = j.d(l);
                }
            }
            Ok((v, dv))
        };
        let (xi, dxi) = field(&self.xi)?;
        let (eta, deta) = field(&self.eta)?;
        Ok(AmbientPoint { phi, dphi, xi, dxi, eta, deta, g, dg, ginv, gamma })
    }

    /// `(∇̃_Xφ)Y` at `p`.
    pub fn nabla_phi(&self, p: &[f64], x: &Vector, y: &Vector) -> Result<Vector> {
        Ok(self.at(p)?.nabla_phi(x, y))
    }
}

impl AmbientPoint {
    pub fn dim(&self) -> usize {
        self.phi.nrows()
    }

    /// `(∇̃_Xφ)Y = ∇̃_X(φY) − φ∇̃_XY` for coordinate-constant `Y`.
    pub fn nabla_phi(&self, x: &Vector, y: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim());
        for (l, dp) in self.dphi.iter().enumerate() {
            if x[l] != 0.0 {
                out += (dp * y) * x[l];
            }
        }
        out + self.gamma.contract(x, &(&self.phi * y)) - &self.phi * self.gamma.contract(x, y)
    }

    /// `∇̃_Xξ`.
    pub fn nabla_xi(&self, x: &Vector) -> Vector {
        &self.dxi * x + self.gamma.contract(x, &self.xi)
    }

    /// `(∇̃_Xη)Y`.
    pub fn nabla_eta(&self, x: &Vector, y: &Vector) -> f64 {
        (&self.deta * x).dot(y) - self.eta.dot(&self.gamma.contract(x, y))
    }

    /// Covariant derivative of a coordinate-constant vector `y` along `x`.
    pub fn nabla_const(&self, x: &Vector, y: &Vector) -> Vector {
        self.gamma.contract(x, y)
    }

    /// Fundamental 2-form `Φ(X, Y) = g(X, φY)`.
    pub fn fundamental(&self, x: &Vector, y: &Vector) -> f64 {
        self.g.apply(x, &(&self.phi * y))
    }
}

fn pair_rows(
    id: &str,
    at: &At,
    probe_index: usize,
    probe: &str,
    pairs: impl Iterator<Item = (f64, f64)>,
    tol: f64,
) -> CheckRow {
    let mut worst = (0.0, 0.0, -1.0);
    for (l, r) in pairs {
        let res = (l - r).abs();
        if !(res <= worst.2) {
            worst = (l, r, res);
        }
    }
    CheckRow::with_residual(id, at, probe_index, probe, worst.0, worst.1, worst.2.max(0.0), tol)
}

fn draw_pairs(seed: u64, id: &str, point: usize, d: usize) -> Vec<(Vector, Vector)> {
    let mut rng = probe_rng(seed, id, point);
    (0..PAIRS_PER_POINT).map(|_| (random_vector(&mut rng, d), random_vector(&mut rng, d))).collect()
}

/// Structure axioms at each ambient point: one row per axiom per point.
pub fn check_axioms(s: &AmbientStructure, points: &[Vec<f64>], tol: f64, seed: u64, exec: Execution) -> Vec<CheckRow> {
    collect_rows(points, exec, AXIOM_IDS, |i, p| {
        let at = At::point(i, p);
        let v = s.values(p)?;
        let d = s.dim();
        let n = s.n();
        let mut rows = Vec::new();

        let target = Matrix::identity(d, d) - &v.xi * v.eta.transpose();
        let phi2 = &v.phi * &v.phi;
        let res = (&phi2 - &target).amax();
        rows.push(CheckRow::with_residual("ax-phi2", &at, 0, "max entry of φ² − (Id − η⊗ξ)", phi2.amax(), target.amax(), res, tol));

        rows.push(CheckRow::scalar("ax-eta-xi", &at, 0, "η(ξ)", v.eta.dot(&v.xi), 1.0, tol));

        let phixi = &v.phi * &v.xi;
        rows.push(CheckRow::with_residual("ax-phi-xi", &at, 0, "‖φξ‖", phixi.norm(), 0.0, phixi.norm(), tol));

        let etaphi = v.phi.transpose() * &v.eta;
        rows.push(CheckRow::with_residual("ax-eta-phi", &at, 0, "‖η∘φ‖", etaphi.norm(), 0.0, etaphi.norm(), tol));

        let r = rank(&v.phi, RANK_REL);
        rows.push(CheckRow::scalar("ax-rank-phi", &at, 0, "rank φ", r as f64, (2 * n) as f64, 0.0));

        let (pp, q, z) = signature(&v.g, SIGNATURE_TOL);
        let sig_res = (pp as f64 - (n + 1) as f64).abs() + (q as f64 - n as f64).abs() + z as f64;
        rows.push(CheckRow::with_residual(
            "ax-signature",
            &at,
            0,
            format!("signature ({pp},{q},{z}) vs ({},{n},0)", n + 1),
            pp as f64,
            (n + 1) as f64,
            sig_res,
            0.0,
        ));

        let pairs = draw_pairs(seed, "ax-pairs", i, d);
        let g = &v.g;
        rows.push(pair_rows(
            "ax-metric",
            &at,
            0,
            "max over random pairs: g(X,Y) vs −g(φX,φY) + η(X)η(Y)",
            pairs.iter().map(|(x, y)| (g.apply(x, y), -g.apply(&(&v.phi * x), &(&v.phi * y)) + v.eta.dot(x) * v.eta.dot(y))),
            tol,
        ));
        rows.push(pair_rows(
            "ax-eta-dual",
            &at,
            0,
            "max over random X: g(X,ξ) vs η(X)",
            pairs.iter().map(|(x, _)| (g.apply(x, &v.xi), v.eta.dot(x))),
            tol,
        ));
        rows.push(pair_rows(
            "ax-phi-antisym",
            &at,
            0,
            "max over random pairs: g(φX,Y) vs −g(X,φY)",
            pairs.iter().map(|(x, y)| (g.apply(&(&v.phi * x), y), -g.apply(x, &(&v.phi * y)))),
            tol,
        ));
        let fundamental = |x: &Vector, y: &Vector| g.apply(x, &(&v.phi * y));
        rows.push(pair_rows(
            "ax-fundamental-form",
            &at,
            0,
            "max over random pairs: Φ(X,Y) vs −Φ(Y,X)",
            pairs.iter().map(|(x, y)| (fundamental(x, y), -fundamental(y, x))),
            tol,
        ));
        Ok(rows)
    })
}

pub const AXIOM_IDS: &[&str] = &[
    "ax-phi2",
    "ax-eta-xi",
    "ax-phi-xi",
    "ax-eta-phi",
    "ax-rank-phi",
    "ax-signature",
    "ax-metric",
    "ax-eta-dual",
    "ax-phi-antisym",
    "ax-fundamental-form",
];

/// `∇φ = 0` and `∇η = 0`: max of `‖(∇̃_Xφ)Y‖` and `|(∇̃_Xη)Y|` over pairs.
pub fn check_paracosymplectic(s: &AmbientStructure, points: &[Vec<f64>], tol: f64, seed: u64, exec: Execution) -> Vec<CheckRow> {
    const ID: &str = "def-paracosymplectic";
    collect_rows(points, exec, &[ID], |i, p| {
        let at = At::point(i, p);
        let a = s.at(p)?;
        let pairs = draw_pairs(seed, ID, i, s.dim());
        Ok(vec![
            pair_rows(ID, &at, 0, "max ‖(∇̃_Xφ)Y‖", pairs.iter().map(|(x, y)| (a.nabla_phi(x, y).norm(), 0.0)), tol),
            pair_rows(ID, &at, 1, "max |(∇̃_Xη)Y|", pairs.iter().map(|(x, y)| (a.nabla_eta(x, y), 0.0)), tol),
        ])
    })
}

/// Max over pairs of `‖(∇̃_Xφ)Y + (∇̃_Yφ)X‖` at one point.
pub fn nearly_paracosymplectic_defect(a: &AmbientPoint, pairs: &[(Vector, Vector)]) -> f64 {
    pairs.iter().map(|(x, y)| (a.nabla_phi(x, y) + a.nabla_phi(y, x)).norm()).fold(0.0, f64::max)
}

pub fn check_nearly_paracosymplectic(
    s: &AmbientStructure,
    points: &[Vec<f64>],
    tol: f64,
    seed: u64,
    exec: Execution,
) -> Vec<CheckRow> {
    const ID: &str = "def-nearly-paracosymplectic";
    collect_rows(points, exec, &[ID], |i, p| {
        let at = At::point(i, p);
        let a = s.at(p)?;
        let pairs = draw_pairs(seed, ID, i, s.dim());
        let worst = nearly_paracosymplectic_defect(&a, &pairs);
        Ok(vec![CheckRow::with_residual(ID, &at, 0, "max ‖(∇̃_Xφ)Y + (∇̃_Yφ)X‖", worst, 0.0, worst, tol)])
    })
}

fn para_sasakian_sides(a: &AmbientPoint, x: &Vector, y: &Vector) -> (Vector, Vector) {
    let lhs = a.nabla_phi(x, y) + a.nabla_phi(y, x);
    let rhs = &a.xi * (2.0 * a.g.apply(x, y)) + y * a.eta.dot(x) + x * a.eta.dot(y);
    (lhs, rhs)
}

/// Probe 0 is `X = Y = ∂_1`; probe 1 is the worst of the random pairs.
pub fn check_nearly_para_sasakian(
    s: &AmbientStructure,
    points: &[Vec<f64>],
    tol: f64,
    seed: u64,
    exec: Execution,
) -> Vec<CheckRow> {
    const ID: &str = "def-nearly-para-sasakian";
    collect_rows(points, exec, &[ID], |i, p| {
        let at = At::point(i, p);
        let a = s.at(p)?;
        let d = s.dim();
        let mut e1 = Vector::zeros(d);
        e1[0] = 1.0;
        let (l, r) = para_sasakian_sides(&a, &e1, &e1);
        let mut rows = vec![CheckRow::vector(ID, &at, 0, "X = Y = ∂_1", l.as_slice(), r.as_slice(), tol)];
        let pairs = draw_pairs(seed, ID, i, d);
        let worst = pairs
            .iter()
            .map(|(x, y)| para_sasakian_sides(&a, x, y))
            .max_by(|u, v| (&u.0 - &u.1).norm().total_cmp(&(&v.0 - &v.1).norm()))
            .expect("pairs are non-empty");
        rows.push(CheckRow::vector(ID, &at, 1, "worst random pair", worst.0.as_slice(), worst.1.as_slice(), tol));
        Ok(rows)
    })
}

/// Killing equation for `ξ`. Rows are NOT-APPLICABLE at points where the
/// structure is not nearly paracosymplectic.
pub fn check_killing_xi(s: &AmbientStructure, points: &[Vec<f64>], tol: f64, seed: u64, exec: Execution) -> Vec<CheckRow> {
    const ID: &str = "prop-2.2";
    collect_rows(points, exec, &[ID], |i, p| {
        let at = At::point(i, p);
        let a = s.at(p)?;
        let pairs = draw_pairs(seed, ID, i, s.dim());
        let hyp = nearly_paracosymplectic_defect(&a, &pairs) <= tol;
        let killing = |x: &Vector, y: &Vector| a.g.apply(&a.nabla_xi(x), y) + a.g.apply(&a.nabla_xi(y), x);
        let r0 = pair_rows(ID, &at, 0, "max |g(∇̃_Xξ,Y) + g(∇̃_Yξ,X)|", pairs.iter().map(|(x, y)| (killing(x, y), 0.0)), tol);
        let xx = a.g.apply(&a.nabla_xi(&a.xi), &a.xi);
        let r1 = CheckRow::scalar(ID, &at, 1, "g(∇̃_ξξ, ξ)", xx, 0.0, tol);
        let gate = |r: CheckRow| if hyp { r } else { r.status(crate::report::Status::NotApplicable) };
        Ok(vec![gate(r0), gate(r1)])
    })
}
