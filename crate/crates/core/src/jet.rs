//! Numeric carriers for expression evaluation.
//!
//! [`Scalar`] is the arithmetic contract the expression evaluator is generic
//! over. Three carriers implement it: plain `f64`, [`Jet1`] (value and
//! gradient) and [`Jet2`] (value, gradient and Hessian). Jets carry their
//! derivative storage dynamically; an empty gradient or Hessian stands for
//! an identically zero one, so constants never need to know how many
//! variables are in play.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic carrier accepted by [`crate::expr::Expr::eval`].
pub trait Scalar:
    Sized
    + Clone
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Highest derivative order carried (0 for plain scalars).
    const ORDER: usize;

    fn constant(x: f64) -> Self;

    /// Scalar part.
    fn value(&self) -> f64;

    /// Applies a univariate function given its value `f0` and first two
    /// derivatives `f1`, `f2` at `self.value()`.
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self;

    fn recip(&self) -> Self {
        let x = self.value();
        self.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }
}

impl Scalar for f64 {
    const ORDER: usize = 0;

    fn constant(x: f64) -> Self {
        x
    }

    fn value(&self) -> f64 {
        *self
    }

    fn chain(&self, f0: f64, _f1: f64, _f2: f64) -> Self {
        f0
    }

    fn recip(&self) -> Self {
        1.0 / self
    }
}

/// First-order jet: value plus gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet1 {
    pub v: f64,
    /// Gradient; empty means zero.
    pub g: Vec<f64>,
}

impl Jet1 {
    /// The `index`-th of `n` independent variables, evaluated at `value`.
    pub fn variable(value: f64, index: usize, n: usize) -> Self {
        let mut g = vec![0.0; n];
        g[index] = 1.0;
        Jet1 { v: value, g }
    }

    /// Partial derivative with respect to variable `i`.
    pub fn d(&self, i: usize) -> f64 {
        self.g.get(i).copied().unwrap_or(0.0)
    }

    fn zip(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        match (a.is_empty(), b.is_empty()) {
            (true, true) => Vec::new(),
            (false, true) => a.iter().map(|&x| f(x, 0.0)).collect(),
            (true, false) => b.iter().map(|&y| f(0.0, y)).collect(),
            (false, false) => {
                debug_assert_eq!(a.len(), b.len(), "jet dimension mismatch");
                a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
            }
        }
    }
}

impl Add for Jet1 {
    type Output = Jet1;
    fn add(self, rhs: Jet1) -> Jet1 {
        Jet1 { v: self.v + rhs.v, g: Jet1::zip(&self.g, &rhs.g, |a, b| a + b) }
    }
}

impl Sub for Jet1 {
    type Output = Jet1;
    fn sub(self, rhs: Jet1) -> Jet1 {
        Jet1 { v: self.v - rhs.v, g: Jet1::zip(&self.g, &rhs.g, |a, b| a - b) }
    }
}

impl Mul for Jet1 {
    type Output = Jet1;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Jet1) -> Jet1 {
        let (av, bv) = (self.v, rhs.v);
        Jet1 { v: av * bv, g: Jet1::zip(&self.g, &rhs.g, |a, b| a * bv + av * b) }
    }
}

impl Div for Jet1 {
    type Output = Jet1;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet1) -> Jet1 {
        self * rhs.recip()
    }
}

impl Neg for Jet1 {
    type Output = Jet1;
    fn neg(self) -> Jet1 {
        Jet1 { v: -self.v, g: self.g.into_iter().map(|x| -x).collect() }
    }
}

impl Scalar for Jet1 {
    const ORDER: usize = 1;

    fn constant(x: f64) -> Self {
        Jet1 { v: x, g: Vec::new() }
    }

    fn value(&self) -> f64 {
        self.v
    }

    fn chain(&self, f0: f64, f1: f64, _f2: f64) -> Self {
        Jet1 { v: f0, g: self.g.iter().map(|&x| f1 * x).collect() }
    }
}

/// Second-order jet: value, gradient and (row-major, symmetric) Hessian.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    /// Gradient; empty means zero.
    pub g: Vec<f64>,
    /// Row-major `n x n` Hessian; empty means zero.
    pub h: Vec<f64>,
}

impl Jet2 {
    pub fn variable(value: f64, index: usize, n: usize) -> Self {
        let mut g = vec![0.0; n];
        g[index] = 1.0;
        Jet2 { v: value, g, h: Vec::new() }
    }

    pub fn d(&self, i: usize) -> f64 {
        self.g.get(i).copied().unwrap_or(0.0)
    }

    pub fn dd(&self, i: usize, j: usize) -> f64 {
        if self.h.is_empty() {
            return 0.0;
        }
        let n = self.g.len();
        self.h[i * n + j]
    }

    fn dim(&self) -> usize {
        self.g.len()
    }

    /// Symmetric sum `a ⊗ b + b ⊗ a` scaled by `c`, plus optional `h` terms,
    /// built on the upper triangle and mirrored so the result is exactly
    /// symmetric.
    fn hess(n: usize, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let x = f(i, j);
                h[i * n + j] = x;
                h[j * n + i] = x;
            }
        }
        h
    }
}

fn get(v: &[f64], i: usize) -> f64 {
    v.get(i).copied().unwrap_or(0.0)
}

fn get_h(h: &[f64], n: usize, i: usize, j: usize) -> f64 {
    if h.is_empty() {
        0.0
    } else {
        h[i * n + j]
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, rhs: Jet2) -> Jet2 {
        let n = self.dim().max(rhs.dim());
        let g = Jet1::zip(&self.g, &rhs.g, |a, b| a + b);
        let h = if self.h.is_empty() && rhs.h.is_empty() {
            Vec::new()
        } else {
            Jet2::hess(n, |i, j| get_h(&self.h, n, i, j) + get_h(&rhs.h, n, i, j))
        };
        Jet2 { v: self.v + rhs.v, g, h }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        self + (-rhs)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        let n = self.dim().max(rhs.dim());
        let (av, bv) = (self.v, rhs.v);
        let g = Jet1::zip(&self.g, &rhs.g, |a, b| a * bv + av * b);
        let h = if n == 0 {
            Vec::new()
        } else {
            Jet2::hess(n, |i, j| {
                get_h(&self.h, n, i, j) * bv
                    + get_h(&rhs.h, n, i, j) * av
                    + (get(&self.g, i) * get(&rhs.g, j) + get(&rhs.g, i) * get(&self.g, j))
            })
        };
        Jet2 { v: av * bv, g, h }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet2) -> Jet2 {
        self * rhs.recip()
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 {
            v: -self.v,
            g: self.g.into_iter().map(|x| -x).collect(),
            h: self.h.into_iter().map(|x| -x).collect(),
        }
    }
}

impl Scalar for Jet2 {
    const ORDER: usize = 2;

    fn constant(x: f64) -> Self {
        Jet2 { v: x, g: Vec::new(), h: Vec::new() }
    }

    fn value(&self) -> f64 {
        self.v
    }

    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let n = self.dim();
        let g = self.g.iter().map(|&x| f1 * x).collect();
        let h = if n == 0 {
            Vec::new()
        } else {
            Jet2::hess(n, |i, j| f1 * get_h(&self.h, n, i, j) + f2 * (self.g[i] * self.g[j]))
        };
        Jet2 { v: f0, g, h }
    }
}
