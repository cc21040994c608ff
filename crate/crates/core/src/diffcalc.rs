//! First and second derivatives of expression-defined maps and the
//! Levi-Civita connection of expression-defined metrics.
//!
//! All derivatives come from jet arithmetic. Finite differences appear only
//! in tests, as an independent cross-check.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{Expr, VarEnv};
use crate::jet::{Jet1, Jet2};
use crate::numlin::{Matrix, SymForm, Vector};

fn check_bound(exprs: &[&Expr], names: &[String], constants: &BTreeMap<String, f64>, what: &str) -> Result<()> {
    for e in exprs {
        for v in e.free_vars() {
            if !names.contains(&v) && !constants.contains_key(&v) {
                return Err(Error::Invalid {
                    what: what.to_string(),
                    reason: format!("`{e}` uses `{v}`, which is neither a coordinate nor a constant"),
                });
            }
        }
    }
    Ok(())
}

fn seed1(u: &[f64]) -> Vec<Jet1> {
    u.iter().enumerate().map(|(i, &x)| Jet1::variable(x, i, u.len())).collect()
}

fn seed2(u: &[f64]) -> Vec<Jet2> {
    u.iter().enumerate().map(|(i, &x)| Jet2::variable(x, i, u.len())).collect()
}

/// Value, Jacobian and Hessian of a map at one point.
#[derive(Debug, Clone)]
pub struct SecondOrder {
    pub value: Vector,
    /// `N x m`.
    pub jacobian: Matrix,
    /// One symmetric `m x m` matrix per component.
    pub hessian: Vec<Matrix>,
}

/// A map `R^m -> R^N` given by `N` expression components.
#[derive(Debug, Clone)]
pub struct JetMap {
    names: Vec<String>,
    components: Vec<Expr>,
    constants: BTreeMap<String, f64>,
}

impl JetMap {
    pub fn new(names: Vec<String>, components: Vec<Expr>, constants: BTreeMap<String, f64>) -> Result<Self> {
        check_bound(&components.iter().collect::<Vec<_>>(), &names, &constants, "map component")?;
        Ok(JetMap { names, components, constants })
    }

    pub fn input_dim(&self) -> usize {
        self.names.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn constants(&self) -> &BTreeMap<String, f64> {
        &self.constants
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.names.len() {
            return Err(Error::Dimension(format!("point has {} coordinates, map takes {}", u.len(), self.names.len())));
        }
        Ok(())
    }

    pub fn value(&self, u: &[f64]) -> Result<Vector> {
        self.check_point(u)?;
        let env = VarEnv { names: &self.names, values: u, constants: &self.constants };
        let vals = self.components.iter().map(|c| c.eval::<f64, _>(&env)).collect::<Result<Vec<_>, _>>()?;
        Ok(Vector::from_vec(vals))
    }

    pub fn jacobian(&self, u: &[f64]) -> Result<Matrix> {
        self.check_point(u)?;
        let vars = seed1(u);
        let env = VarEnv { names: &self.names, values: &vars, constants: &self.constants };
        let m = u.len();
        let mut jac = Matrix::zeros(self.components.len(), m);
        for (a, c) in self.components.iter().enumerate() {
            let j: Jet1 = c.eval(&env)?;
            for i in 0..m {
                jac[(a, i)] = j.d(i);
            }
        }
        Ok(jac)
    }

    pub fn hessian(&self, u: &[f64]) -> Result<Vec<Matrix>> {
        Ok(self.second_order(u)?.hessian)
    }

    pub fn second_order(&self, u: &[f64]) -> Result<SecondOrder> {
        self.check_point(u)?;
        let vars = seed2(u);
        let env = VarEnv { names: &self.names, values: &vars, constants: &self.constants };
        let m = u.len();
        let n = self.components.len();
        let mut value = Vector::zeros(n);
        let mut jacobian = Matrix::zeros(n, m);
        let mut hessian = Vec::with_capacity(n);
        for (a, c) in self.components.iter().enumerate() {
            let j: Jet2 = c.eval(&env)?;
            value[a] = j.v;
            let mut h = Matrix::zeros(m, m);
            for i in 0..m {
                jacobian[(a, i)] = j.d(i);
                for k in 0..m {
                    h[(i, k)] = j.dd(i, k);
                }
            }
            hessian.push(h);
        }
        Ok(SecondOrder { value, jacobian, hessian })
    }
}

/// Christoffel symbols `Γ^k_ij`, stored per upper index.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    /// `gamma[k][(i, j)]`.
    pub gamma: Vec<Matrix>,
}

impl Christoffel {
    pub fn zero(dim: usize) -> Self {
        Christoffel { gamma: vec![Matrix::zeros(dim, dim); dim] }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[k][(i, j)]
    }

    /// `Γ(x, y)^k = Γ^k_ij x^i y^j`.
    pub fn contract(&self, x: &Vector, y: &Vector) -> Vector {
        Vector::from_iterator(self.dim(), self.gamma.iter().map(|gk| x.dot(&(gk * y))))
    }

    pub fn is_zero(&self) -> bool {
        self.gamma.iter().all(|m| m.iter().all(|&x| x == 0.0))
    }

    /// Builds `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)` from the
    /// inverse metric and `dg[l] = ∂_l g`.
    pub fn from_metric(ginv: &Matrix, dg: &[Matrix]) -> Self {
        let d = ginv.nrows();
        if dg.iter().all(|m| m.iter().all(|&x| x == 0.0)) {
            return Christoffel::zero(d);
        }
        // lowered symbols Γ_{l,ij}
        let mut lower = vec![Matrix::zeros(d, d); d];
        for (l, low) in lower.iter_mut().enumerate() {
            for i in 0..d {
                for j in i..d {
                    let x = 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    low[(i, j)] = x;
                    low[(j, i)] = x;
                }
            }
        }
        let mut gamma = vec![Matrix::zeros(d, d); d];
        for (k, gk) in gamma.iter_mut().enumerate() {
            for (l, low) in lower.iter().enumerate() {
                let c = ginv[(k, l)];
                if c != 0.0 {
                    *gk += low * c;
                }
            }
        }
        Christoffel { gamma }
    }
}

/// A metric tensor field given by expression entries over named coordinates.
#[derive(Debug, Clone)]
pub struct MetricField {
    names: Vec<String>,
    entries: Vec<Vec<Expr>>,
    constants: BTreeMap<String, f64>,
}

impl MetricField {
    /// `entries` must be square with dimension matching `names` and
    /// structurally symmetric.
    pub fn new(names: Vec<String>, entries: Vec<Vec<Expr>>, constants: BTreeMap<String, f64>) -> Result<Self> {
        let d = names.len();
        if entries.len() != d || entries.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension(format!("metric must be {d}x{d}")));
        }
        for i in 0..d {
            for j in 0..i {
                if entries[i][j] != entries[j][i] {
                    return Err(Error::Invalid {
                        what: "metric".into(),
                        reason: format!("entries ({i},{j}) and ({j},{i}) differ"),
                    });
                }
            }
        }
        check_bound(&entries.iter().flatten().collect::<Vec<_>>(), &names, &constants, "metric entry")?;
        Ok(MetricField { names, entries, constants })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn entries(&self) -> &[Vec<Expr>] {
        &self.entries
    }

    pub fn constants(&self) -> &BTreeMap<String, f64> {
        &self.constants
    }

    pub fn is_constant(&self) -> bool {
        self.entries.iter().flatten().all(|e| e.free_vars().iter().all(|v| self.constants.contains_key(v)))
    }

    pub fn at(&self, u: &[f64]) -> Result<SymForm> {
        Ok(self.with_derivatives(u)?.0)
    }

    /// Metric value and `∂_l g` for each coordinate `l`.
    pub fn with_derivatives(&self, u: &[f64]) -> Result<(SymForm, Vec<Matrix>)> {
        let d = self.dim();
        if u.len() != d {
            return Err(Error::Dimension(format!("point has {} coordinates, metric has {d}", u.len())));
        }
        let vars = seed1(u);
        let env = VarEnv { names: &self.names, values: &vars, constants: &self.constants };
        let mut g = Matrix::zeros(d, d);
        let mut dg = vec![Matrix::zeros(d, d); d];
        for i in 0..d {
            for j in i..d {
                let e: Jet1 = self.entries[i][j].eval(&env)?;
                g[(i, j)] = e.v;
                g[(j, i)] = e.v;
                for (l, dgl) in dg.iter_mut().enumerate() {
                    dgl[(i, j)] = e.d(l);
                    dgl[(j, i)] = e.d(l);
                }
            }
        }
        Ok((SymForm::new(g)?, dg))
    }

    pub fn christoffels(&self, u: &[f64]) -> Result<Christoffel> {
        let (g, dg) = self.with_derivatives(u)?;
        let ginv = g.inverse()?;
        Ok(Christoffel::from_metric(&ginv, &dg))
    }
}

/// Christoffel symbols of `g` at `u`.
pub fn christoffels(g: &MetricField, u: &[f64]) -> Result<Christoffel> {
    g.christoffels(u)
}

/// Largest `|∇_k g_ij|` at `u`, i.e. the metric-compatibility defect of the
/// connection returned by [`christoffels`].
pub fn metric_compatibility_residual(g: &MetricField, u: &[f64]) -> Result<f64> {
    let (gv, dg) = g.with_derivatives(u)?;
    let gamma = Christoffel::from_metric(&gv.inverse()?, &dg);
    let gm = gv.matrix();
    let d = g.dim();
    let mut worst = 0.0f64;
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let mut r = dg[k][(i, j)];
                for l in 0..d {
                    r -= gamma.get(l, k, i) * gm[(l, j)] + gamma.get(l, k, j) * gm[(i, l)];
                }
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}
