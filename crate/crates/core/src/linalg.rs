//! Dense linear algebra helpers and matrix file I/O.
//!
//! Thin layer over nalgebra that pins down the contracts the rest of the crate
//! relies on: descending singular values, reconstruction-quality SVD splits,
//! strict CSV parsing (rectangular, finite) and a QR-based null-space basis.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type DenseVector = DVector<f64>;

/// Iteration cap for the SVD; exceeding it is reported as a numerical failure.
const SVD_MAX_ITER: usize = 4000;

/// Singular value decomposition with singular values sorted in descending
/// order and `u`/`v_t` permuted to match.
pub struct SvdResult {
    pub u: DenseMatrix,
    pub singular_values: DenseVector,
    pub v_t: DenseMatrix,
}

impl SvdResult {
    /// `u * diag(singular_values) * v_t`, for reconstruction checks.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut scaled = self.u.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.singular_values[j];
        }
        scaled * &self.v_t
    }
}

fn ensure_finite(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Argument(format!("{what} contains non-finite entries")))
    }
}

/// Thin SVD of `m` with descending singular values.
pub fn svd(m: &DenseMatrix) -> Result<SvdResult> {
    ensure_finite(m, "matrix")?;
    let decomp = m
        .clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "SVD of a {}x{} matrix did not converge within {SVD_MAX_ITER} iterations",
                m.nrows(),
                m.ncols()
            ))
        })?;
    let u = decomp.u.expect("u requested");
    let v_t = decomp.v_t.expect("v_t requested");
    let sv = decomp.singular_values;

    // nalgebra does not guarantee an ordering; sort explicitly and permute the
    // singular vectors the same way. Ties keep their original relative order.
    let mut perm: Vec<usize> = (0..sv.len()).collect();
    perm.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).expect("finite singular values"));

    let sorted = DVector::from_iterator(sv.len(), perm.iter().map(|&i| sv[i]));
    let u_sorted = DMatrix::from_columns(&perm.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let vt_sorted = DMatrix::from_rows(&perm.iter().map(|&i| v_t.row(i)).collect::<Vec<_>>());

    Ok(SvdResult {
        u: u_sorted,
        singular_values: sorted,
        v_t: vt_sorted,
    })
}

/// Singular values of `m` in descending order.
pub fn singular_values_desc(m: &DenseMatrix) -> Result<DenseVector> {
    ensure_finite(m, "matrix")?;
    let mut sv: Vec<f64> = m
        .clone()
        .try_svd(false, false, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "singular values of a {}x{} matrix did not converge",
                m.nrows(),
                m.ncols()
            ))
        })?
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    Ok(DVector::from_vec(sv))
}

/// Largest singular value.
pub fn spectral_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(singular_values_desc(m)?[0])
}

/// Smallest and largest singular value in one pass, without sorting.
pub fn singular_extremes(m: &DenseMatrix) -> Result<(f64, f64)> {
    let sv = m
        .clone()
        .try_svd(false, false, f64::EPSILON, SVD_MAX_ITER)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "singular values of a {}x{} matrix did not converge",
                m.nrows(),
                m.ncols()
            ))
        })?
        .singular_values;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &s in sv.iter() {
        min = min.min(s);
        max = max.max(s);
    }
    Ok((min, max))
}

/// Split `m` into its best rank-`r` approximation and the residual tail,
/// `m = head + tail` exactly (the sum is formed by subtraction).
pub fn svd_split(m: &DenseMatrix, r: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    let min_dim = m.nrows().min(m.ncols());
    if r > min_dim {
        return Err(Error::Argument(format!(
            "split rank {r} exceeds min dimension {min_dim}"
        )));
    }
    if r == 0 {
        return Ok((DMatrix::zeros(m.nrows(), m.ncols()), m.clone()));
    }
    let dec = svd(m)?;
    let mut head = DMatrix::zeros(m.nrows(), m.ncols());
    for i in 0..r {
        let scale = dec.singular_values[i];
        // head += sigma_i * u_i * v_i^T
        head.gemm(scale, &dec.u.column(i), &dec.v_t.row(i), 1.0);
    }
    let tail = m - &head;
    Ok((head, tail))
}

/// Absolute values of `x`, sorted descending (stable, so ties keep input order).
pub fn sorted_magnitudes(x: &[f64]) -> Vec<f64> {
    assert!(
        x.iter().all(|v| v.is_finite()),
        "sorted_magnitudes requires finite entries"
    );
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).expect("finite magnitudes"));
    mags
}

/// Columns `idx` of `m`, in ascending index order regardless of input order.
pub fn submatrix_columns(m: &DenseMatrix, idx: &[usize]) -> Result<DenseMatrix> {
    let mut sorted: Vec<usize> = idx.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(Error::Argument(format!("duplicate column index {}", w[0])));
        }
    }
    if let Some(&bad) = sorted.iter().find(|&&i| i >= m.ncols()) {
        return Err(Error::Argument(format!(
            "column index {bad} out of range for a matrix with {} columns",
            m.ncols()
        )));
    }
    let mut out = DMatrix::zeros(m.nrows(), sorted.len());
    for (j, &c) in sorted.iter().enumerate() {
        out.set_column(j, &m.column(c));
    }
    Ok(out)
}

/// Largest Euclidean column norm.
pub fn max_column_norm(m: &DenseMatrix) -> f64 {
    m.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Orthonormal basis of the null space of `a`, one basis vector per column
/// (possibly zero columns). QR-based: a thin QR of `a^T` spans the row space,
/// and standard basis vectors are Gram-Schmidt-completed against it.
pub fn null_space_basis(a: &DenseMatrix) -> DenseMatrix {
    let cols = a.ncols();
    let qr = a.transpose().qr();
    let q = qr.q();
    let r = qr.r();
    // Rank from the R diagonal. Without column pivoting this is only reliable
    // for well-conditioned inputs, which covers every ensemble generated here;
    // for anything else the produced vectors are still exact null vectors,
    // the basis is merely allowed to be incomplete.
    let r_scale = r
        .diagonal()
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max);
    let tol = 1e-12 * r_scale.max(1.0);
    let rank = r.diagonal().iter().filter(|v| v.abs() > tol).count();
    let target = cols - rank;

    let mut basis: Vec<DenseVector> = Vec::with_capacity(target);
    for i in 0..cols {
        if basis.len() == target {
            break;
        }
        let mut v = DVector::zeros(cols);
        v[i] = 1.0;
        // Two Gram-Schmidt passes for numerical orthogonality.
        for _ in 0..2 {
            let coeffs = q.transpose() * &v;
            v -= &q * coeffs;
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let n = v.norm();
        if n > 1e-8 {
            basis.push(v / n);
        }
    }

    if basis.is_empty() {
        DMatrix::zeros(cols, 0)
    } else {
        DMatrix::from_columns(&basis.iter().map(|b| b.column(0)).collect::<Vec<_>>())
    }
}

/// Haar-ish random orthogonal matrix: QR of a Gaussian square matrix with the
/// sign convention diag(R) > 0.
pub fn random_orthogonal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DenseMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

// ---------------------------------------------------------------------------
// CSV I/O
//
// Format: one matrix row per line, comma-separated decimal floats. No header.
// Blank lines are ignored; ragged or non-finite input is rejected.
// ---------------------------------------------------------------------------

/// Parse a matrix from CSV text. `origin` is used in error messages only.
pub fn parse_matrix_csv(text: &str, origin: &Path) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let field = field.trim();
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                path: origin.to_path_buf(),
                line: lineno + 1,
                msg: format!("cannot parse {field:?} as a decimal number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: lineno + 1,
                    msg: format!("non-finite entry {value}"),
                });
            }
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: lineno + 1,
                    msg: format!("ragged row: expected {w} fields, found {}", row.len()),
                });
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            msg: "no data rows".into(),
        });
    }
    let (nrows, ncols) = (rows.len(), width.unwrap());
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix_csv(&text, path)
}

/// Read a vector: a single CSV row, a single column, or any matrix with one
/// of its dimensions equal to 1.
pub fn read_vector_csv(path: &Path) -> Result<DenseVector> {
    let m = read_matrix_csv(path)?;
    if m.nrows() == 1 {
        Ok(DVector::from_iterator(m.ncols(), m.row(0).iter().copied()))
    } else if m.ncols() == 1 {
        Ok(m.column(0).clone_owned())
    } else {
        Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("expected a vector, found a {}x{} matrix", m.nrows(), m.ncols()),
        })
    }
}

/// Serialize a matrix as CSV with full f64 round-trip precision.
pub fn matrix_to_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, m: &DenseMatrix) -> Result<()> {
    std::fs::write(path, matrix_to_csv(m)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn random_matrix(nrows: usize, ncols: usize, seed: u64) -> DenseMatrix {
        let mut rng = stream_rng(seed, 0);
        DMatrix::from_fn(nrows, ncols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn svd_identity() {
        let m = DMatrix::<f64>::identity(3, 3);
        let dec = svd(&m).unwrap();
        for i in 0..3 {
            assert!((dec.singular_values[i] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn svd_diagonal_is_sorted_desc() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, 5.0, 0.2]));
        let dec = svd(&m).unwrap();
        let sv: Vec<f64> = dec.singular_values.iter().copied().collect();
        assert!((sv[0] - 5.0).abs() < 1e-14);
        assert!((sv[1] - 0.3).abs() < 1e-14);
        assert!((sv[2] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn svd_rank_one_ones() {
        let m = DMatrix::from_element(2, 2, 1.0);
        let dec = svd(&m).unwrap();
        assert!((dec.singular_values[0] - 2.0).abs() < 1e-14);
        assert!(dec.singular_values[1].abs() < 1e-14);
    }

    #[test]
    fn svd_reconstructs_random_matrices() {
        for seed in 0..100 {
            let (nr, nc) = (3 + (seed as usize % 4), 3 + (seed as usize % 5));
            let m = random_matrix(nr, nc, seed);
            let dec = svd(&m).unwrap();
            let err = (dec.reconstruct() - &m).norm();
            assert!(
                err <= 1e-10 * m.norm().max(1.0),
                "seed {seed}: reconstruction error {err}"
            );
            // descending order
            for i in 1..dec.singular_values.len() {
                assert!(dec.singular_values[i - 1] >= dec.singular_values[i]);
            }
        }
    }

    #[test]
    fn svd_split_contract() {
        let m = random_matrix(5, 7, 11);
        let (head, tail) = svd_split(&m, 0).unwrap();
        assert_eq!(head, DMatrix::zeros(5, 7));
        assert_eq!(tail, m);

        let (head, tail) = svd_split(&m, 2).unwrap();
        assert!((head.clone() + &tail - &m).norm() < 1e-12);
        // head is the best rank-2 approximation: its singular values match the
        // top 2 of m, the tail carries the rest.
        let sv = singular_values_desc(&m).unwrap();
        let sv_head = singular_values_desc(&head).unwrap();
        assert!((sv_head[0] - sv[0]).abs() < 1e-10);
        assert!((sv_head[1] - sv[1]).abs() < 1e-10);
        let sv_tail = singular_values_desc(&tail).unwrap();
        assert!((sv_tail[0] - sv[2]).abs() < 1e-10);

        assert!(svd_split(&m, 6).is_err());
    }

    #[test]
    fn sorted_magnitudes_orders_by_abs() {
        assert_eq!(
            sorted_magnitudes(&[-3.0, 1.0, 2.0, -0.5]),
            vec![3.0, 2.0, 1.0, 0.5]
        );
        assert_eq!(sorted_magnitudes(&[]), Vec::<f64>::new());
    }

    #[test]
    fn submatrix_columns_sorts_and_validates() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let s = submatrix_columns(&m, &[2, 0]).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 4.0, 6.0]));
        assert!(submatrix_columns(&m, &[0, 3]).is_err());
        assert!(submatrix_columns(&m, &[1, 1]).is_err());
    }

    #[test]
    fn null_space_basis_is_orthonormal_and_annihilated() {
        for seed in 0..20 {
            let a = random_matrix(4, 9, 100 + seed);
            let basis = null_space_basis(&a);
            assert_eq!(basis.nrows(), 9);
            assert_eq!(basis.ncols(), 5);
            let gram = basis.transpose() * &basis;
            assert!((gram - DMatrix::identity(5, 5)).norm() < 1e-10);
            assert!((&a * &basis).norm() < 1e-10);
        }
        // Square invertible matrix: trivial null space.
        let square = random_matrix(5, 5, 1000);
        assert_eq!(null_space_basis(&square).ncols(), 0);
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = stream_rng(3, 0);
        let q = random_orthogonal(6, &mut rng);
        let gram = q.transpose() * &q;
        assert!((gram - DMatrix::identity(6, 6)).norm() < 1e-10);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = random_matrix(4, 3, 42);
        let text = matrix_to_csv(&m);
        let back = parse_matrix_csv(&text, Path::new("mem")).unwrap();
        assert_eq!(m.as_slice(), back.as_slice());
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let err = parse_matrix_csv("1,2,3\n4,5\n", Path::new("bad.csv")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_rejects_garbage_and_empty() {
        assert!(parse_matrix_csv("1,x\n", Path::new("p")).is_err());
        assert!(parse_matrix_csv("", Path::new("p")).is_err());
        assert!(parse_matrix_csv("1,inf\n", Path::new("p")).is_err());
    }

    #[test]
    fn vector_reader_accepts_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let row = dir.path().join("row.csv");
        std::fs::write(&row, "1.0, 2.0, 3.0\n").unwrap();
        let v = read_vector_csv(&row).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0]);

        let col = dir.path().join("col.csv");
        std::fs::write(&col, "1.0\n2.0\n").unwrap();
        let v = read_vector_csv(&col).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 2.0]);

        let mat = dir.path().join("mat.csv");
        std::fs::write(&mat, "1,2\n3,4\n").unwrap();
        assert!(read_vector_csv(&mat).is_err());
    }

    #[test]
    fn max_column_norm_example() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 4.0, 1.0]);
        assert!((max_column_norm(&m) - 5.0).abs() < 1e-15);
    }
}
