//! Linear algebra for indefinite (semi-Riemannian) bilinear forms.
//!
//! Frames are never orthonormalized: with an indefinite metric Gram-Schmidt
//! breaks down near null directions, so every projection goes through a
//! Gram solve instead.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Default eigenvalue tolerance for [`signature`].
pub const SIGNATURE_TOL: f64 = 1e-9;

/// Relative determinant threshold below which a form counts as degenerate.
pub const DEGENERACY_REL: f64 = 1e-10;

/// Symmetric bilinear form at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct SymForm(Matrix);

impl SymForm {
    /// Wraps `m`, which must be square, non-empty and symmetric to 1e-12.
    /// The stored matrix is the exact symmetrization of `m`.
    pub fn new(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::Dimension(format!("form must be square and non-empty, got {}x{}", m.nrows(), m.ncols())));
        }
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-12 {
            return Err(Error::Invalid { what: "symmetric form".into(), reason: format!("asymmetry {asym:e}") });
        }
        Ok(SymForm((&m + m.transpose()) * 0.5))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymForm(Matrix::from_diagonal(&Vector::from_column_slice(d)))
    }

    pub fn identity(d: usize) -> Self {
        SymForm(Matrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// `g(x, y)`.
    pub fn apply(&self, x: &Vector, y: &Vector) -> f64 {
        x.dot(&(&self.0 * y))
    }

    /// `g(x, ·)` as a covector.
    pub fn lower(&self, x: &Vector) -> Vector {
        &self.0 * x
    }

    /// Degeneracy threshold `1e-10 * (max row norm)^d`.
    pub fn degeneracy_threshold(&self) -> f64 {
        let max_row = self.0.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
        DEGENERACY_REL * max_row.powi(self.dim() as i32)
    }

    /// Fails with [`Error::DegenerateMetric`] when `|det| <= threshold`.
    pub fn check_nondegenerate(&self) -> Result<()> {
        let det = self.0.determinant();
        let threshold = self.degeneracy_threshold();
        if !(det.abs() > threshold) {
            return Err(Error::DegenerateMetric { det, threshold });
        }
        Ok(())
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.check_nondegenerate()?;
        let inv = self.0.clone().lu().try_inverse().ok_or(Error::DegenerateMetric { det: 0.0, threshold: 0.0 })?;
        Ok((&inv + inv.transpose()) * 0.5)
    }
}

/// Counts of eigenvalues above `tol`, below `-tol`, and within `±tol`.
pub fn signature(g: &SymForm, tol: f64) -> (usize, usize, usize) {
    let eig = g.0.clone().symmetric_eigenvalues();
    let p = eig.iter().filter(|&&e| e > tol).count();
    let q = eig.iter().filter(|&&e| e < -tol).count();
    (p, q, g.dim() - p - q)
}

/// Solves `G c = b` by LU with one step of iterative refinement.
pub fn solve(g: &SymForm, b: &Vector) -> Result<Vector> {
    if b.len() != g.dim() {
        return Err(Error::Dimension(format!("rhs has length {}, form is {}", b.len(), g.dim())));
    }
    g.check_nondegenerate()?;
    let lu = g.0.clone().lu();
    let mut x = lu.solve(b).ok_or(Error::DegenerateMetric { det: 0.0, threshold: 0.0 })?;
    let r = b - &g.0 * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(x)
}

/// Gram matrix `G_ij = g(v_i, v_j)`.
pub fn gram(vectors: &[Vector], g: &SymForm) -> SymForm {
    let k = vectors.len();
    let lowered: Vec<Vector> = vectors.iter().map(|v| g.lower(v)).collect();
    let mut m = Matrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let x = vectors[i].dot(&lowered[j]);
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    SymForm(m)
}

/// Result of splitting a vector against a non-degenerate subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Coefficients of the tangential part in the given basis.
    pub coeffs: Vector,
    pub tangential: Vector,
    pub normal: Vector,
}

/// Splits `v` into its `g`-orthogonal projection onto `span(basis)` and the
/// remainder.
pub fn project(v: &Vector, basis: &[Vector], g: &SymForm) -> Result<Projection> {
    let gr = gram(basis, g);
    let rhs = Vector::from_iterator(basis.len(), basis.iter().map(|b| g.apply(v, b)));
    let coeffs = solve(&gr, &rhs)?;
    let tangential = combine(basis, &coeffs, v.len());
    let normal = v - &tangential;
    Ok(Projection { coeffs, tangential, normal })
}

/// `Σ c_i v_i`.
pub fn combine(vectors: &[Vector], coeffs: &Vector, dim: usize) -> Vector {
    let mut out = Vector::zeros(dim);
    for (v, &c) in vectors.iter().zip(coeffs.iter()) {
        out.axpy(c, v, 1.0);
    }
    out
}

/// Numerical rank: singular values above `rel * max singular value`.
pub fn rank(m: &Matrix, rel: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel * max).count()
}

/// Matrix whose columns are the given vectors.
pub fn columns(vectors: &[Vector], dim: usize) -> Matrix {
    let mut m = Matrix::zeros(dim, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signature_of_paracontact_metric() {
        let g = SymForm::from_diagonal(&[1.0, 1.0, -1.0, -1.0, 1.0]);
        assert_eq!(signature(&g, SIGNATURE_TOL), (3, 2, 0));
        assert_eq!(signature(&SymForm::from_diagonal(&[0.0; 4]), SIGNATURE_TOL), (0, 0, 4));
        let v: f64 = 2.0;
        assert_eq!(signature(&SymForm::from_diagonal(&[2.0, -v * v, -v * v, 1.0]), SIGNATURE_TOL), (2, 2, 0));
    }

    #[test]
    fn solves_gram_systems() {
        let b = Vector::from_vec(vec![1.0, -2.0, 3.0]);
        assert_eq!(solve(&SymForm::identity(3), &b).unwrap(), b);

        let u = 1.7;
        let g = SymForm::new(Matrix::from_row_slice(2, 2, &[1.5, 1.0, 1.0, 2.0])).unwrap();
        let c = solve(&g, &Vector::from_vec(vec![u / 2.0, 0.0])).unwrap();
        assert!((c[0] - u / 2.0).abs() < 1e-14 && (c[1] + u / 4.0).abs() < 1e-14);

        let v = 2.5;
        let g = SymForm::from_diagonal(&[2.0, -v * v]);
        let c = solve(&g, &Vector::from_vec(vec![v, 0.0])).unwrap();
        assert!((c[0] - v / 2.0).abs() < 1e-15 && c[1] == 0.0);
    }

    #[test]
    fn degenerate_forms_are_rejected() {
        let g = SymForm::new(Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert!(matches!(solve(&g, &Vector::zeros(2)), Err(Error::DegenerateMetric { .. })));
        let z = SymForm::from_diagonal(&[0.0, 0.0]);
        assert!(matches!(z.check_nondegenerate(), Err(Error::DegenerateMetric { .. })));
        // a null vector alone spans a degenerate line
        let g = SymForm::from_diagonal(&[1.0, -1.0]);
        let null = Vector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(project(&Vector::from_vec(vec![1.0, 0.0]), &[null], &g), Err(Error::DegenerateMetric { .. })));
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(SymForm::new(m).is_err());
    }

    #[test]
    fn projection_onto_span() {
        let g = SymForm::from_diagonal(&[1.0, -1.0, 1.0]);
        let basis = vec![Vector::from_vec(vec![1.0, 0.0, 0.0]), Vector::from_vec(vec![0.0, 1.0, 0.0])];
        let v = Vector::from_vec(vec![2.0, 3.0, 0.0]);
        let p = project(&v, &basis, &g).unwrap();
        assert!(p.normal.norm() < 1e-15);
        assert!((p.coeffs[0] - 2.0).abs() < 1e-15 && (p.coeffs[1] - 3.0).abs() < 1e-15);
    }
}
