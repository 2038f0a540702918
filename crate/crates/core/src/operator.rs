//! Linear operators acting on matrices.
//!
//! An operator A : R^{n1 x n2} -> R^m is stored in matricized form: an
//! m x (n1*n2) matrix applied to the column-major vectorization of its input.
//! With column-major stacking, vec(u v^T) = v (kron) u, so the column of the
//! matricized operator hit by entry (i, j) of the input has index j*n1 + i.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, DenseVector};

/// Column-major vectorization of a matrix.
pub fn vec_col_major(x: &DenseMatrix) -> DenseVector {
    DenseVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec_col_major`]: reshape a length n1*n2 vector into n1 x n2.
pub fn mat_from_vec(v: &DenseVector, n1: usize, n2: usize) -> Result<DenseMatrix> {
    if v.len() != n1 * n2 {
        return Err(Error::Argument(format!(
            "cannot reshape a length-{} vector into {n1}x{n2}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(n1, n2, v.as_slice()))
}

/// A measurement operator on n1 x n2 matrices with m outputs.
#[derive(Clone, Debug)]
pub struct MatrixOperator {
    n1: usize,
    n2: usize,
    matricized: DenseMatrix,
}

impl MatrixOperator {
    /// Wrap an m x (n1*n2) matrix as an operator on n1 x n2 matrices.
    pub fn new(n1: usize, n2: usize, matricized: DenseMatrix) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::Argument("operator dimensions must be positive".into()));
        }
        if matricized.ncols() != n1 * n2 {
            return Err(Error::Argument(format!(
                "matricized operator has {} columns, expected n1*n2 = {}",
                matricized.ncols(),
                n1 * n2
            )));
        }
        if matricized.nrows() == 0 {
            return Err(Error::Argument("operator must have at least one output".into()));
        }
        if !matricized.iter().all(|v| v.is_finite()) {
            return Err(Error::Argument("operator contains non-finite entries".into()));
        }
        Ok(Self { n1, n2, matricized })
    }

    /// The identity operator X -> vec(X); m = n1*n2 and every constant is
    /// exactly an isometry's.
    pub fn vectorization(n1: usize, n2: usize) -> Self {
        Self {
            n1,
            n2,
            matricized: DMatrix::identity(n1 * n2, n1 * n2),
        }
    }

    /// Orthogonal rotation of the vectorization: X -> Q vec(X) with Q drawn
    /// Haar-ish from O(n1*n2). Exact isometry, so every restricted-isometry
    /// constant is 0 and the smallest restricted singular value is 1.
    pub fn rotated_vectorization<R: Rng + ?Sized>(n1: usize, n2: usize, rng: &mut R) -> Self {
        let q = linalg::random_orthogonal(n1 * n2, rng);
        Self {
            n1,
            n2,
            matricized: q,
        }
    }

    /// sqrt(n1*n2/m) * M with M having orthonormal rows (a scaled partial
    /// isometry). For this family ||A(X)||^2 <= (n1*n2/m) ||X||_F^2 with
    /// equality attained, so the order-1 isometry defect is exactly
    /// n1*n2/m - 1.
    pub fn scaled_partial_isometry<R: Rng + ?Sized>(
        n1: usize,
        n2: usize,
        m: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let d = n1 * n2;
        if m == 0 || m > d {
            return Err(Error::Argument(format!(
                "partial isometry needs 1 <= m <= n1*n2, got m = {m}, n1*n2 = {d}"
            )));
        }
        let g = DMatrix::from_fn(d, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = g.qr().q(); // d x m, orthonormal columns
        let scale = (d as f64 / m as f64).sqrt();
        Self::new(n1, n2, q.transpose() * scale)
    }

    /// Isometry on the orthogonal complement of a planted matrix direction.
    ///
    /// Draws M0 = U diag(s) V^T with U, V random orthogonal and the given
    /// nonnegative singular values s, then returns the operator whose
    /// matricized form has n1*n2 - 1 orthonormal rows spanning the
    /// complement of vec(M0), together with M0 itself. By construction
    ///
    ///   ||A(X)||^2 = ||X||_F^2 - <X, M0 / ||M0||_F>^2,
    ///
    /// so the extreme squared-norm ratio over unit-norm inputs of rank at
    /// most r is known in closed form: 1 at the top and 1 minus
    /// [`punctured_rank_defect`] at the bottom, with both extremes attained
    /// by explicit inputs built from the singular triplets of M0.
    pub fn punctured_isometry<R: Rng + ?Sized>(
        n1: usize,
        n2: usize,
        singular_values: &[f64],
        rng: &mut R,
    ) -> Result<(Self, DenseMatrix)> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::Argument("operator dimensions must be positive".into()));
        }
        let d = n1 * n2;
        if d < 2 {
            return Err(Error::Argument(
                "a punctured isometry needs n1*n2 >= 2 so the complement is nonempty".into(),
            ));
        }
        let k = n1.min(n2);
        if singular_values.len() != k {
            return Err(Error::Argument(format!(
                "expected {k} singular values for a {n1}x{n2} planted matrix, got {}",
                singular_values.len()
            )));
        }
        if !singular_values.iter().all(|s| s.is_finite() && *s >= 0.0) {
            return Err(Error::Argument(
                "planted singular values must be finite and nonnegative".into(),
            ));
        }
        if singular_values.iter().all(|s| *s == 0.0) {
            return Err(Error::Argument("planted matrix must be nonzero".into()));
        }
        let mut s = singular_values.to_vec();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let u = linalg::random_orthogonal(n1, rng);
        let v = linalg::random_orthogonal(n2, rng);
        let mut diag = DMatrix::zeros(n1, n2);
        for (i, si) in s.iter().enumerate() {
            diag[(i, i)] = *si;
        }
        let m0 = &u * diag * v.transpose();
        let row = DMatrix::from_row_slice(1, d, vec_col_major(&m0).as_slice());
        let basis = linalg::null_space_basis(&row);
        if basis.ncols() != d - 1 {
            return Err(Error::Numerical(format!(
                "complement basis came back with {} of {} directions",
                basis.ncols(),
                d - 1
            )));
        }
        let op = Self::new(n1, n2, basis.transpose())?;
        Ok((op, m0))
    }

    /// Gaussian operator with iid N(0, 1/m) entries.
    pub fn gaussian<R: Rng + ?Sized>(n1: usize, n2: usize, m: usize, rng: &mut R) -> Result<Self> {
        if m == 0 {
            return Err(Error::Argument("operator must have at least one output".into()));
        }
        let std = (1.0 / m as f64).sqrt();
        let matricized = DMatrix::from_fn(m, n1 * n2, |_, _| {
            std * rng.sample::<f64, _>(StandardNormal)
        });
        Self::new(n1, n2, matricized)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Number of measurements.
    pub fn m(&self) -> usize {
        self.matricized.nrows()
    }

    /// min(n1, n2): the scale every rank-based bound is expressed in.
    pub fn dim_min(&self) -> usize {
        self.n1.min(self.n2)
    }

    pub fn matricized(&self) -> &DenseMatrix {
        &self.matricized
    }

    /// Apply the operator to a matrix.
    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseVector> {
        if x.nrows() != self.n1 || x.ncols() != self.n2 {
            return Err(Error::Argument(format!(
                "operator expects a {}x{} input, got {}x{}",
                self.n1,
                self.n2,
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(&self.matricized * vec_col_major(x))
    }

    /// Apply to an already-vectorized input (no shape check beyond length).
    pub fn apply_vec(&self, v: &DenseVector) -> Result<DenseVector> {
        if v.len() != self.n1 * self.n2 {
            return Err(Error::Argument(format!(
                "operator expects a length-{} vector, got {}",
                self.n1 * self.n2,
                v.len()
            )));
        }
        Ok(&self.matricized * v)
    }

    /// Adjoint applied to a measurement vector, reshaped to n1 x n2.
    pub fn adjoint_apply(&self, y: &DenseVector) -> Result<DenseMatrix> {
        if y.len() != self.m() {
            return Err(Error::Argument(format!(
                "adjoint expects a length-{} vector, got {}",
                self.m(),
                y.len()
            )));
        }
        let v = self.matricized.transpose() * y;
        mat_from_vec(&v, self.n1, self.n2)
    }

    /// Largest singular value of the matricized operator: the Lipschitz
    /// constant of X -> A(X) in Frobenius norm.
    pub fn operator_norm(&self) -> Result<f64> {
        linalg::spectral_norm(&self.matricized)
    }

    /// Orthonormal basis of {X : A(X) = 0}, vectorized, one per column.
    pub fn null_space_basis(&self) -> DenseMatrix {
        linalg::null_space_basis(&self.matricized)
    }
}

/// Exact restricted isometry defect of a punctured isometry.
///
/// For [`MatrixOperator::punctured_isometry`] built from the given planted
/// singular values, the worst unit-norm input of rank at most r loses
/// exactly (s_1^2 + .. + s_r^2) / (s_1^2 + .. + s_k^2) of its squared norm
/// (values taken in decreasing order): the best rank-r alignment with the
/// planted direction is the top-r part of its singular value profile, and
/// nothing of rank r correlates better. The defect is therefore this ratio,
/// on both sides of the restricted singular interval: sigma_max^2 = 1 and
/// sigma_min^2 = 1 - ratio over rank-r inputs.
pub fn punctured_rank_defect(singular_values: &[f64], r: usize) -> Result<f64> {
    if singular_values.is_empty() {
        return Err(Error::Argument("no singular values given".into()));
    }
    if !singular_values.iter().all(|s| s.is_finite() && *s >= 0.0) {
        return Err(Error::Argument(
            "planted singular values must be finite and nonnegative".into(),
        ));
    }
    if r == 0 || r > singular_values.len() {
        return Err(Error::Argument(format!(
            "rank must satisfy 1 <= r <= {}, got {r}",
            singular_values.len()
        )));
    }
    let mut s = singular_values.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = s.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Err(Error::Argument("planted matrix must be nonzero".into()));
    }
    let head: f64 = s[..r].iter().map(|v| v * v).sum();
    Ok(head / total)
}
