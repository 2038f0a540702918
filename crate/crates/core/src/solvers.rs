//! Candidate-producing solvers and synthetic instance generation.
//!
//! The bounds in [`crate::bounds`] are algorithm-agnostic: they apply to any
//! candidate with a small tail and a small residual, however it was
//! produced. This module supplies realistic producers for each regime — a
//! greedy pursuit (exactly sparse supports, possibly overestimated), a
//! proximal l1 solver (approximately sparse iterates), a hard-thresholding
//! baseline (exactly k-sparse), and a singular-value thresholding solver
//! (approximately low-rank) — plus seeded random instances matching the
//! measurement models the bounds assume. Solvers are deterministic given
//! their inputs; all randomness lives in instance generation, streamed per
//! logical component so instances are bit-reproducible.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bounds::matrix::MatrixCandidate;
use crate::bounds::vector::{VectorCandidate, VectorProblem};
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, DenseVector};
use crate::operator::MatrixOperator;
use crate::rng::stream_rng;

/// Random matrix models for sensing matrices and matricized operators.
/// The normalizing dimension is the number of rows (measurements), so
/// columns have expected unit norm under the first two models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ensemble {
    /// iid N(0, 1/rows) entries.
    #[serde(rename = "gaussian_1_over_n")]
    GaussianOneOverN,
    /// iid standard normal entries with every column rescaled to norm 1.
    #[serde(rename = "gaussian_unit_columns")]
    GaussianUnitColumns,
    /// iid signs, +-1/sqrt(rows).
    #[serde(rename = "bernoulli")]
    Bernoulli,
}

/// Parameters of a synthetic recovery instance.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    Vector {
        n: usize,
        m: usize,
        k: usize,
        noise_sigma: f64,
        ensemble: Ensemble,
        seed: u64,
    },
    Matrix {
        n1: usize,
        n2: usize,
        m: usize,
        r: usize,
        noise_sigma: f64,
        ensemble: Ensemble,
        seed: u64,
    },
}

/// A generated sparse-recovery instance: b = A x0 + e with ||x0||_0 = k.
#[derive(Clone, Debug)]
pub struct VectorInstance {
    /// The problem as handed to solvers; its epsilon is exactly ||noise||.
    pub problem: VectorProblem,
    pub ground_truth: DenseVector,
    pub noise: DenseVector,
}

/// A generated low-rank recovery instance: b = A(X0) + e with rank(X0) = r.
#[derive(Clone, Debug)]
pub struct MatrixInstance {
    pub operator: MatrixOperator,
    pub b: DenseVector,
    pub ground_truth: DenseMatrix,
    pub noise: DenseVector,
    /// ||noise||, recorded for use as the noise cap.
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub enum GeneratedInstance {
    Vector(VectorInstance),
    Matrix(MatrixInstance),
}

/// Draw an n x m matrix from the given ensemble.
pub fn sensing_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    ensemble: Ensemble,
    rng: &mut R,
) -> Result<DenseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::Argument("matrix dimensions must be positive".into()));
    }
    match ensemble {
        Ensemble::GaussianOneOverN => {
            let std = (1.0 / rows as f64).sqrt();
            Ok(DenseMatrix::from_fn(rows, cols, |_, _| {
                std * rng.sample::<f64, _>(StandardNormal)
            }))
        }
        Ensemble::GaussianUnitColumns => {
            let mut a = DenseMatrix::from_fn(rows, cols, |_, _| {
                rng.sample::<f64, _>(StandardNormal)
            });
            for mut c in a.column_iter_mut() {
                let norm = c.norm();
                if norm < 1e-300 {
                    return Err(Error::Numerical("drew an all-zero column".into()));
                }
                c /= norm;
            }
            Ok(a)
        }
        Ensemble::Bernoulli => {
            let scale = (1.0 / rows as f64).sqrt();
            Ok(DenseMatrix::from_fn(rows, cols, |_, _| {
                if rng.random::<u64>() & 1 == 0 {
                    scale
                } else {
                    -scale
                }
            }))
        }
    }
}

/// Exactly k-sparse vector: support uniform over subsets, amplitudes iid
/// standard normal.
pub fn sparse_ground_truth<R: Rng + ?Sized>(
    m: usize,
    k: usize,
    rng: &mut R,
) -> Result<DenseVector> {
    if k > m {
        return Err(Error::Argument(format!(
            "sparsity {k} exceeds dimension {m}"
        )));
    }
    let mut x = DenseVector::zeros(m);
    if k == 0 {
        return Ok(x);
    }
    let support = rand::seq::index::sample(rng, m, k);
    for i in support.iter() {
        x[i] = rng.sample::<f64, _>(StandardNormal);
    }
    Ok(x)
}

/// Exactly rank-r matrix G H^T with iid standard normal factors.
pub fn low_rank_ground_truth<R: Rng + ?Sized>(
    n1: usize,
    n2: usize,
    r: usize,
    rng: &mut R,
) -> Result<DenseMatrix> {
    if r > n1.min(n2) {
        return Err(Error::Argument(format!(
            "rank {r} exceeds min({n1}, {n2})"
        )));
    }
    if r == 0 {
        return Ok(DenseMatrix::zeros(n1, n2));
    }
    let g = DenseMatrix::from_fn(n1, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    let h = DenseMatrix::from_fn(n2, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(g * h.transpose())
}

/// Noise vector with exactly the target norm: an iid normal draw rescaled.
pub fn scaled_noise<R: Rng + ?Sized>(
    len: usize,
    target_norm: f64,
    rng: &mut R,
) -> Result<DenseVector> {
    if !(target_norm.is_finite() && target_norm >= 0.0) {
        return Err(Error::Argument(format!(
            "noise norm must be finite and nonnegative, got {target_norm}"
        )));
    }
    if target_norm == 0.0 {
        return Ok(DenseVector::zeros(len));
    }
    let g = DenseVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = g.norm();
    if norm < 1e-300 {
        return Err(Error::Numerical("drew an all-zero noise vector".into()));
    }
    Ok(g * (target_norm / norm))
}

/// Generate a complete instance from its spec. Randomness is streamed per
/// component (0: measurement matrix/operator, 1: ground truth, 2: noise), so
/// the same seed is bit-reproducible regardless of call order elsewhere.
pub fn generate_instance(spec: &InstanceSpec) -> Result<GeneratedInstance> {
    match *spec {
        InstanceSpec::Vector {
            n,
            m,
            k,
            noise_sigma,
            ensemble,
            seed,
        } => {
            let a = sensing_matrix(n, m, ensemble, &mut stream_rng(seed, 0))?;
            let x0 = sparse_ground_truth(m, k, &mut stream_rng(seed, 1))?;
            let e = scaled_noise(n, noise_sigma, &mut stream_rng(seed, 2))?;
            let b = &a * &x0 + &e;
            let epsilon = e.norm();
            let problem = VectorProblem::new(a, b, epsilon)?;
            Ok(GeneratedInstance::Vector(VectorInstance {
                problem,
                ground_truth: x0,
                noise: e,
            }))
        }
        InstanceSpec::Matrix {
            n1,
            n2,
            m,
            r,
            noise_sigma,
            ensemble,
            seed,
        } => {
            let matricized = sensing_matrix(m, n1 * n2, ensemble, &mut stream_rng(seed, 0))?;
            let operator = MatrixOperator::new(n1, n2, matricized)?;
            let x0 = low_rank_ground_truth(n1, n2, r, &mut stream_rng(seed, 1))?;
            let e = scaled_noise(m, noise_sigma, &mut stream_rng(seed, 2))?;
            let b = operator.apply(&x0)? + &e;
            let epsilon = e.norm();
            Ok(GeneratedInstance::Matrix(MatrixInstance {
                operator,
                b,
                ground_truth: x0,
                noise: e,
                epsilon,
            }))
        }
    }
}

/// A solver result: the candidate plus diagnostics.
#[derive(Clone, Debug)]
pub struct VectorSolve {
    pub candidate: VectorCandidate,
    /// True when the least-squares system on the selected support was
    /// numerically rank-deficient and a truncated pseudo-inverse was used.
    pub rank_deficient: bool,
    /// Final objective value: 1/2 ||Ax - b||^2, plus lambda ||x||_1 for the
    /// proximal solver.
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct MatrixSolve {
    pub candidate: MatrixCandidate,
    /// Final 1/2 ||A(X) - b||^2 + tau ||X||_* value.
    pub objective: f64,
}

/// Least squares min ||a_sel c - b|| via SVD with truncation at
/// 1e-12 * sigma_max; returns the coefficients and whether truncation fired.
fn least_squares(a_sel: &DenseMatrix, b: &DenseVector) -> Result<(DenseVector, bool)> {
    let svd = linalg::svd(a_sel)?;
    let smax = svd.singular_values[0];
    let eps = 1e-12 * smax;
    let mut coeffs = DenseVector::zeros(a_sel.ncols());
    let mut deficient = false;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= eps {
            deficient = true;
            continue;
        }
        let proj = svd.u.column(i).dot(b) / s;
        coeffs += svd.v_t.row(i).transpose() * proj;
    }
    Ok((coeffs, deficient))
}

/// Greedy pursuit: repeatedly select the column most correlated (after
/// normalization) with the residual, breaking exact ties toward the lowest
/// index, then refit by least squares on the selected set. Stops early when
/// the residual norm drops below 1e-12 ||b|| or no column correlates. The
/// returned candidate uses `steps` as its sparsity split, so its tail bound
/// is 0; callers evaluating a different split should rebuild the candidate.
pub fn omp_solve(problem: &VectorProblem, steps: usize) -> Result<VectorSolve> {
    let m = problem.m();
    let n = problem.n();
    if steps == 0 || steps > n {
        return Err(Error::Argument(format!(
            "selection count must satisfy 1 <= steps <= n = {n}, got {steps}"
        )));
    }
    let col_norms: Vec<f64> = problem.a.column_iter().map(|c| c.norm()).collect();
    let mut support: Vec<usize> = Vec::with_capacity(steps);
    let mut selected = vec![false; m];
    let mut residual = problem.b.clone();
    let mut coeffs = DenseVector::zeros(0);
    let mut rank_deficient = false;
    let b_norm = problem.b.norm();

    for _ in 0..steps {
        let mut best = 0.0;
        let mut best_idx = None;
        for j in 0..m {
            if selected[j] || col_norms[j] < 1e-300 {
                continue;
            }
            let corr = problem.a.column(j).dot(&residual).abs() / col_norms[j];
            if corr > best {
                best = corr;
                best_idx = Some(j);
            }
        }
        let Some(j) = best_idx else { break };
        selected[j] = true;
        support.push(j);
        let a_sel = linalg::submatrix_columns(&problem.a, &support)?;
        let (c, deficient) = least_squares(&a_sel, &problem.b)?;
        rank_deficient |= deficient;
        residual = &problem.b - &a_sel * &c;
        coeffs = c;
        if residual.norm() <= 1e-12 * b_norm {
            break;
        }
    }

    // submatrix_columns works in sorted index order; scatter accordingly.
    let mut sorted = support.clone();
    sorted.sort_unstable();
    let mut x = DenseVector::zeros(m);
    for (pos, &j) in sorted.iter().enumerate() {
        x[j] = coeffs[pos];
    }
    let objective = 0.5 * residual.norm_squared();
    let candidate = VectorCandidate::new(problem, x, steps)?;
    Ok(VectorSolve {
        candidate,
        rank_deficient,
        objective,
    })
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Proximal-gradient l1 solver for 1/2 ||Ax - b||^2 + lambda ||x||_1 at
/// fixed step 1/sigma_max(A)^2. The objective is non-increasing across
/// iterations (asserted); iteration stops early once it is numerically flat.
/// The returned candidate uses split 0 (its iterates are dense), so callers
/// evaluating a split k should rebuild the candidate at that k.
pub fn ista_solve(problem: &VectorProblem, lambda: f64, iters: usize) -> Result<VectorSolve> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Argument(format!(
            "regularization weight must be positive, got {lambda}"
        )));
    }
    if iters == 0 {
        return Err(Error::Argument("iteration count must be positive".into()));
    }
    let smax = linalg::spectral_norm(&problem.a)?;
    if smax <= 0.0 {
        return Err(Error::Numerical("sensing matrix is zero".into()));
    }
    let step = 1.0 / (smax * smax);
    let mut x = DenseVector::zeros(problem.m());
    let objective = |x: &DenseVector| -> f64 {
        0.5 * (&problem.a * x - &problem.b).norm_squared() + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    };
    let mut prev = objective(&x);
    for _ in 0..iters {
        let grad = problem.a.transpose() * (&problem.a * &x - &problem.b);
        for i in 0..x.len() {
            x[i] = soft_threshold(x[i] - step * grad[i], lambda * step);
        }
        let obj = objective(&x);
        assert!(
            obj <= prev * (1.0 + 1e-12) + 1e-15,
            "objective increased: {prev} -> {obj}"
        );
        if (prev - obj).abs() < 1e-12 * prev.max(1.0) {
            prev = obj;
            break;
        }
        prev = obj;
    }
    let objective = prev;
    let candidate = VectorCandidate::new(problem, x, 0)?;
    Ok(VectorSolve {
        candidate,
        rank_deficient: false,
        objective,
    })
}

/// Keep the k largest-magnitude entries (ties toward the lowest index),
/// zeroing the rest.
fn hard_threshold(x: &mut DenseVector, k: usize) {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| {
        x[j].abs()
            .partial_cmp(&x[i].abs())
            .expect("finite iterates")
            .then(i.cmp(&j))
    });
    for &i in order.iter().skip(k) {
        x[i] = 0.0;
    }
}

/// Projected-gradient hard-thresholding: gradient steps at 1/sigma_max^2
/// followed by projection onto exactly-k-sparse vectors. The output is
/// exactly k-sparse, so its tail bound at split k is identically 0.
pub fn iht_solve(problem: &VectorProblem, k: usize, iters: usize) -> Result<VectorSolve> {
    let m = problem.m();
    if k == 0 || k >= m {
        return Err(Error::Argument(format!(
            "sparsity must satisfy 1 <= k < m = {m}, got {k}"
        )));
    }
    if iters == 0 {
        return Err(Error::Argument("iteration count must be positive".into()));
    }
    let smax = linalg::spectral_norm(&problem.a)?;
    if smax <= 0.0 {
        return Err(Error::Numerical("sensing matrix is zero".into()));
    }
    let step = 1.0 / (smax * smax);
    let mut x = DenseVector::zeros(m);
    let mut prev = f64::INFINITY;
    for _ in 0..iters {
        let grad = problem.a.transpose() * (&problem.a * &x - &problem.b);
        x -= grad * step;
        hard_threshold(&mut x, k);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("iterates diverged".into()));
        }
        let obj = 0.5 * (&problem.a * &x - &problem.b).norm_squared();
        if (prev - obj).abs() < 1e-12 * prev.max(1.0) {
            break;
        }
        prev = obj;
    }
    let objective = 0.5 * (&problem.a * &x - &problem.b).norm_squared();
    let candidate = VectorCandidate::new(problem, x, k)?;
    Ok(VectorSolve {
        candidate,
        rank_deficient: false,
        objective,
    })
}

/// Proximal-gradient nuclear-norm solver for 1/2 ||A(X) - b||^2 + tau ||X||_*
/// at fixed step 1/sigma_max(matricized)^2: gradient steps followed by
/// soft-thresholding of the singular values by tau * step. The objective is
/// non-increasing (asserted). The candidate's tail bound is sigma_{r+1} at
/// the requested split r.
pub fn svt_solve(
    op: &MatrixOperator,
    b: &DenseVector,
    tau: f64,
    iters: usize,
    r: usize,
) -> Result<MatrixSolve> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Argument(format!(
            "nuclear-norm weight must be positive, got {tau}"
        )));
    }
    if iters == 0 {
        return Err(Error::Argument("iteration count must be positive".into()));
    }
    if b.len() != op.m() {
        return Err(Error::Argument(format!(
            "measurement vector has length {}, expected {}",
            b.len(),
            op.m()
        )));
    }
    let smax = op.operator_norm()?;
    if smax <= 0.0 {
        return Err(Error::Numerical("operator is zero".into()));
    }
    let step = 1.0 / (smax * smax);
    let mut x = DenseMatrix::zeros(op.n1(), op.n2());
    let objective = |x: &DenseMatrix| -> Result<f64> {
        let fit = 0.5 * (op.apply(x)? - b).norm_squared();
        let nuclear: f64 = linalg::singular_values_desc(x)?.iter().sum();
        Ok(fit + tau * nuclear)
    };
    let mut prev = objective(&x)?;
    for _ in 0..iters {
        let grad = op.adjoint_apply(&(op.apply(&x)? - b))?;
        let y = &x - grad * step;
        let svd = linalg::svd(&y)?;
        let shrunk =
            DenseVector::from_iterator(svd.singular_values.len(), svd.singular_values.iter().map(|&s| (s - tau * step).max(0.0)));
        let mut next = DenseMatrix::zeros(op.n1(), op.n2());
        for i in 0..shrunk.len() {
            if shrunk[i] > 0.0 {
                let u = svd.u.column(i);
                let vt = svd.v_t.row(i);
                next += u * vt * shrunk[i];
            }
        }
        x = next;
        let obj = objective(&x)?;
        assert!(
            obj <= prev * (1.0 + 1e-12) + 1e-15,
            "objective increased: {prev} -> {obj}"
        );
        if (prev - obj).abs() < 1e-12 * prev.max(1.0) {
            prev = obj;
            break;
        }
        prev = obj;
    }
    let objective = prev;
    let candidate = MatrixCandidate::new(op, b, x, r)?;
    Ok(MatrixSolve {
        candidate,
        objective,
    })
}
