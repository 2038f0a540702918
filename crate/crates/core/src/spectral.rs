//! Spectral certificates: the quantities every error bound is conditioned on.
//!
//! A certificate records a scalar (spark, a restricted smallest singular
//! value, or an isometry-defect constant), the order it was computed at, and
//! the epistemic status of the number:
//!
//! * `exact` — obtained by exhaustive enumeration of column subsets;
//! * `sampled` — an extremum over randomly drawn subsets or probes; an
//!   estimate on the optimistic side, never a certificate;
//! * `probabilistic` — an analytic bound that holds except with a reported
//!   failure probability;
//! * `analytic_upper` — a closed-form bound that holds deterministically.
//!
//! Downstream bounds are *certified* exactly when their certificates are
//! `exact` or `analytic_upper`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, CombinationCursor};
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, DenseVector};
use crate::operator::MatrixOperator;
use crate::rng::stream_rng;
use rand::Rng;
use rand_distr::StandardNormal;

/// Default ceiling on the number of subsets an exact enumeration may visit.
pub const DEFAULT_MAX_SUBSETS: u64 = 2_000_000;

/// A submatrix counts as rank-deficient when its smallest singular value is
/// at most this factor times the full matrix's largest singular value.
pub const RANK_TOL_FACTOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralQuantity {
    /// Smallest number of linearly dependent columns.
    Spark,
    /// Smallest singular value over all column subsets of a given size.
    SigmaMinP,
    /// Worst-case isometry defect over sparse supports of a given size.
    DeltaKVector,
    /// Isometry defect of a matrix operator over low-rank inputs.
    DeltaROperator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMode {
    Exact,
    Sampled,
    Probabilistic,
    AnalyticUpper,
}

/// A scalar spectral quantity together with how it was established.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralCertificate {
    pub quantity: SpectralQuantity,
    /// Subset size / sparsity / rank the quantity refers to.
    pub order: usize,
    pub value: f64,
    pub mode: CertificateMode,
    /// Probability the claim fails; 0 unless mode is `probabilistic`.
    #[serde(default)]
    pub failure_probability: f64,
    /// Number of random probes taken; 0 unless mode is `sampled`.
    #[serde(default)]
    pub trials: u64,
    /// Root seed of the probe stream, for `sampled` mode.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SpectralCertificate {
    pub fn exact(quantity: SpectralQuantity, order: usize, value: f64) -> Self {
        Self {
            quantity,
            order,
            value,
            mode: CertificateMode::Exact,
            failure_probability: 0.0,
            trials: 0,
            seed: None,
        }
    }

    pub fn sampled(
        quantity: SpectralQuantity,
        order: usize,
        value: f64,
        trials: u64,
        seed: u64,
    ) -> Self {
        Self {
            quantity,
            order,
            value,
            mode: CertificateMode::Sampled,
            failure_probability: 0.0,
            trials,
            seed: Some(seed),
        }
    }

    /// A bound that holds deterministically by a closed-form argument, or a
    /// constant the caller knows analytically (e.g. isometries). The caller
    /// attests to its validity.
    pub fn analytic_upper(quantity: SpectralQuantity, order: usize, value: f64) -> Self {
        Self {
            quantity,
            order,
            value,
            mode: CertificateMode::AnalyticUpper,
            failure_probability: 0.0,
            trials: 0,
            seed: None,
        }
    }

    /// Whether bounds conditioned on this certificate are certified rather
    /// than estimated.
    pub fn is_certified(&self) -> bool {
        matches!(
            self.mode,
            CertificateMode::Exact | CertificateMode::AnalyticUpper
        )
    }

    /// Validate that this certificate speaks about the expected quantity at
    /// the expected order.
    pub fn expect(&self, quantity: SpectralQuantity, order: usize) -> Result<()> {
        if self.quantity != quantity {
            return Err(Error::Argument(format!(
                "certificate is for {:?}, expected {:?}",
                self.quantity, quantity
            )));
        }
        if self.order != order {
            return Err(Error::Argument(format!(
                "certificate order {} does not match required order {order}",
                self.order
            )));
        }
        Ok(())
    }
}

/// Guard rails for exhaustive subset enumeration.
#[derive(Clone, Copy, Debug)]
pub struct EnumerationBudget {
    /// Enumeration refuses to start if it would visit more subsets than this.
    pub max_subsets: u64,
    /// Worker threads for the enumeration; results are worker-count-invariant.
    pub worker_count: usize,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self {
            max_subsets: DEFAULT_MAX_SUBSETS,
            worker_count: 1,
        }
    }
}

impl EnumerationBudget {
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.worker_count = workers.max(1);
        self
    }

    pub fn with_max_subsets(mut self, max_subsets: u64) -> Self {
        self.max_subsets = max_subsets;
        self
    }
}

/// Number of subsets to visit for size `p`, or a budget error.
fn check_budget(m: usize, p: usize, budget: &EnumerationBudget) -> Result<u128> {
    let total = binomial(m, p);
    match total {
        Some(t) if t <= budget.max_subsets as u128 => Ok(t),
        _ => Err(Error::Budget {
            subset_size: p,
            subsets: total,
            max_subsets: budget.max_subsets,
        }),
    }
}

/// Smallest subset singular value and largest isometry defect over all
/// C(m, p) column subsets, in one enumeration pass.
fn subset_extremes(
    a: &DenseMatrix,
    p: usize,
    budget: &EnumerationBudget,
) -> Result<(f64, f64)> {
    let m = a.ncols();
    if p == 0 {
        return Err(Error::Argument("subset size must be at least 1".into()));
    }
    if p > m {
        return Err(Error::Argument(format!(
            "subset size {p} exceeds the number of columns {m}"
        )));
    }
    check_budget(m, p, budget)?;
    let workers = budget.worker_count.max(1);
    let cursors = CombinationCursor::split(m, p, workers)?;
    let partials: Vec<Result<(f64, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cursors
            .into_iter()
            .map(|mut cursor| {
                scope.spawn(move || -> Result<(f64, f64)> {
                    let mut min_sigma = f64::INFINITY;
                    let mut max_defect = f64::NEG_INFINITY;
                    let mut buf = DMatrix::zeros(a.nrows(), p);
                    while let Some(idx) = cursor.next_subset() {
                        for (j, &c) in idx.iter().enumerate() {
                            buf.set_column(j, &a.column(c));
                        }
                        let (lo, hi) = linalg::singular_extremes(&buf)?;
                        min_sigma = min_sigma.min(lo);
                        max_defect = max_defect.max((hi * hi - 1.0).max(1.0 - lo * lo));
                    }
                    Ok((min_sigma, max_defect))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("enumeration worker panicked"))
            .collect()
    });
    // min/max folds over f64 are exact, so the merge is worker-count-invariant.
    let mut min_sigma = f64::INFINITY;
    let mut max_defect = f64::NEG_INFINITY;
    for partial in partials {
        let (lo, defect) = partial?;
        min_sigma = min_sigma.min(lo);
        max_defect = max_defect.max(defect);
    }
    Ok((min_sigma, max_defect))
}

/// True if some column subset of size `p` is linearly dependent (smallest
/// singular value at most `tol`). Workers stop early on a hit.
fn any_dependent_subset(
    a: &DenseMatrix,
    p: usize,
    tol: f64,
    budget: &EnumerationBudget,
) -> Result<bool> {
    check_budget(a.ncols(), p, budget)?;
    let workers = budget.worker_count.max(1);
    let cursors = CombinationCursor::split(a.ncols(), p, workers)?;
    let partials: Vec<Result<bool>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cursors
            .into_iter()
            .map(|mut cursor| {
                scope.spawn(move || -> Result<bool> {
                    let mut buf = DMatrix::zeros(a.nrows(), p);
                    while let Some(idx) = cursor.next_subset() {
                        for (j, &c) in idx.iter().enumerate() {
                            buf.set_column(j, &a.column(c));
                        }
                        let (lo, _) = linalg::singular_extremes(&buf)?;
                        if lo <= tol {
                            return Ok(true);
                        }
                    }
                    Ok(false)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("enumeration worker panicked"))
            .collect()
    });
    let mut any = false;
    for partial in partials {
        any |= partial?;
    }
    Ok(any)
}

/// Spark: the smallest number of linearly dependent columns, decided by
/// exhaustive enumeration with rank tolerance `RANK_TOL_FACTOR * sigma_max(A)`.
///
/// Returns `min(n, m) + 1` when every subset of size up to min(n, m) is
/// independent; for wide matrices (m > n) that value is n + 1, the true spark.
pub fn spark(a: &DenseMatrix, budget: &EnumerationBudget) -> Result<SpectralCertificate> {
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::Argument("matrix contains non-finite entries".into()));
    }
    let limit = a.nrows().min(a.ncols());
    let tol = RANK_TOL_FACTOR * linalg::spectral_norm(a)?;
    for p in 1..=limit {
        if any_dependent_subset(a, p, tol, budget)? {
            return Ok(SpectralCertificate::exact(SpectralQuantity::Spark, p, p as f64));
        }
    }
    let spark = limit + 1;
    Ok(SpectralCertificate::exact(
        SpectralQuantity::Spark,
        spark,
        spark as f64,
    ))
}

/// Exact smallest singular value over all column subsets of size `p`.
///
/// Errors with a domain error when the minimum is numerically zero (p at or
/// above the spark), because every bound dividing by it would be vacuous.
pub fn sigma_min_p_exact(
    a: &DenseMatrix,
    p: usize,
    budget: &EnumerationBudget,
) -> Result<SpectralCertificate> {
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::Argument("matrix contains non-finite entries".into()));
    }
    let (min_sigma, _) = subset_extremes(a, p, budget)?;
    let tol = RANK_TOL_FACTOR * linalg::spectral_norm(a)?;
    if min_sigma <= tol {
        return Err(Error::Domain(format!(
            "smallest singular value over subsets of size {p} is numerically zero \
             ({min_sigma:.3e}): some {p} columns are linearly dependent, so the \
             quantity is only defined below the spark"
        )));
    }
    Ok(SpectralCertificate::exact(
        SpectralQuantity::SigmaMinP,
        p,
        min_sigma,
    ))
}

/// Exact sparse isometry defect of order `k`: the smallest value delta such
/// that (1-delta)||x||^2 <= ||Ax||^2 <= (1+delta)||x||^2 for all k-sparse x.
/// Equals max over subsets of max(sigma_max^2 - 1, 1 - sigma_min^2).
pub fn delta_k_vector_exact(
    a: &DenseMatrix,
    k: usize,
    budget: &EnumerationBudget,
) -> Result<SpectralCertificate> {
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::Argument("matrix contains non-finite entries".into()));
    }
    let (_, max_defect) = subset_extremes(a, k, budget)?;
    Ok(SpectralCertificate::exact(
        SpectralQuantity::DeltaKVector,
        k,
        max_defect.max(0.0),
    ))
}

/// Smallest singular value over `trials` randomly sampled subsets of size `p`.
/// An optimistic estimate: always at least the exact value, never certified.
pub fn sigma_min_p_sampled(
    a: &DenseMatrix,
    p: usize,
    trials: u64,
    seed: u64,
) -> Result<SpectralCertificate> {
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::Argument("matrix contains non-finite entries".into()));
    }
    let m = a.ncols();
    if p == 0 || p > m {
        return Err(Error::Argument(format!(
            "subset size must satisfy 1 <= p <= {m}, got {p}"
        )));
    }
    if trials == 0 {
        return Err(Error::Argument("at least one sampling trial is required".into()));
    }
    let mut min_sigma = f64::INFINITY;
    let mut buf = DMatrix::zeros(a.nrows(), p);
    for t in 0..trials {
        let mut rng = stream_rng(seed, t);
        // Sorted so each sampled submatrix is laid out exactly as the
        // exhaustive enumerator would build it: a fully-covering sample then
        // reproduces the exact certificate bit for bit.
        let mut idx = rand::seq::index::sample(&mut rng, m, p).into_vec();
        idx.sort_unstable();
        for (j, &c) in idx.iter().enumerate() {
            buf.set_column(j, &a.column(c));
        }
        let (lo, _) = linalg::singular_extremes(&buf)?;
        min_sigma = min_sigma.min(lo);
    }
    Ok(SpectralCertificate::sampled(
        SpectralQuantity::SigmaMinP,
        p,
        min_sigma,
        trials,
        seed,
    ))
}

/// Concentration bound for matrices with iid N(0, 1/n) entries and n rows:
/// any fixed n x p submatrix has sigma_min >= 1 - sqrt(p/n) - t except with
/// probability at most exp(-n t^2 / 2).
///
/// The failure probability is per submatrix; a guarantee over all C(m, p)
/// subsets needs a union bound on the caller's side.
pub fn sigma_min_gaussian_probabilistic(
    n: usize,
    p: usize,
    t: f64,
) -> Result<SpectralCertificate> {
    if n == 0 || p == 0 {
        return Err(Error::Argument("dimensions must be positive".into()));
    }
    if p >= n {
        return Err(Error::Argument(format!(
            "the concentration bound needs p < n, got p = {p}, n = {n}"
        )));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Argument(format!("t must be positive and finite, got {t}")));
    }
    let value = 1.0 - (p as f64 / n as f64).sqrt() - t;
    if value <= 0.0 {
        return Err(Error::Domain(format!(
            "probabilistic lower bound 1 - sqrt(p/n) - t = {value:.3e} is not positive; \
             decrease t or increase n"
        )));
    }
    let failure_probability = (-(n as f64) * t * t / 2.0).exp();
    Ok(SpectralCertificate {
        quantity: SpectralQuantity::SigmaMinP,
        order: p,
        value,
        mode: CertificateMode::Probabilistic,
        failure_probability,
        trials: 0,
        seed: None,
    })
}

/// Asymptotic limit of the smallest singular value of an n x p Gaussian
/// matrix with variance 1/n, as p/n -> c in (0, 1): returns 1 - sqrt(c).
/// A scale reference, not a certificate.
pub fn sigma_min_bai_yin_estimate(aspect: f64) -> Result<f64> {
    if !(aspect > 0.0 && aspect < 1.0) {
        return Err(Error::Argument(format!(
            "aspect ratio must lie strictly between 0 and 1, got {aspect}"
        )));
    }
    Ok(1.0 - aspect.sqrt())
}

/// Lower bound on the restricted smallest singular value implied by a sparse
/// isometry-defect certificate: sigma_min_p >= sqrt(1 - delta_p).
pub fn sigma_min_lower_bound_from_ric(cert: &SpectralCertificate) -> Result<f64> {
    if cert.quantity != SpectralQuantity::DeltaKVector {
        return Err(Error::Argument(format!(
            "expected a sparse isometry-defect certificate, got {:?}",
            cert.quantity
        )));
    }
    if !(cert.value >= 0.0 && cert.value.is_finite()) {
        return Err(Error::Argument(format!(
            "defect value must be finite and non-negative, got {}",
            cert.value
        )));
    }
    if cert.value >= 1.0 {
        return Err(Error::Domain(format!(
            "defect {} >= 1 implies no lower bound on the restricted singular value",
            cert.value
        )));
    }
    Ok((1.0 - cert.value).sqrt())
}

// ---------------------------------------------------------------------------
// Operator isometry defects
// ---------------------------------------------------------------------------

/// ||A(G H^T / ||G H^T||_F)||^2 - 1 in absolute value; 0 for degenerate probes.
fn rank_probe_defect(op: &MatrixOperator, g: &DenseMatrix, h: &DenseMatrix) -> f64 {
    let x = g * h.transpose();
    let norm = x.norm();
    if norm < 1e-300 {
        return 0.0;
    }
    let y = op
        .apply_vec(&(crate::operator::vec_col_major(&x) / norm))
        .expect("probe has operator dimensions");
    (y.norm_squared() - 1.0).abs()
}

/// Upper bound on the order-1 inflation constant of a matrix operator.
///
/// The returned value is max of two terms: `sigma_max(matricized)^2 - 1`,
/// which deterministically dominates `||A(X)||^2 - 1` over all unit-Frobenius
/// X (rank-one included), and the best two-sided defect |‖A(X)‖^2 - 1| found
/// by alternating maximization over unit rank-one probes. Every bound in this
/// crate consumes the order-1 constant only through the factor (1 + delta),
/// for which the first term alone is sound; the second term only raises the
/// reported value when the search witnesses a larger two-sided defect.
pub fn delta_one_operator_upper(op: &MatrixOperator) -> Result<SpectralCertificate> {
    let sigma_max = op.operator_norm()?;
    let mut best = sigma_max * sigma_max - 1.0;

    // Alternating maximization of |u^T B_v^T B_v u - 1| over unit u, v, where
    // B_v[:, i] = M[:, column of entry (i, j)] summed against v. Each half-step
    // is solved exactly by a symmetric eigendecomposition, so the objective is
    // non-decreasing along the iteration.
    const RESTARTS: u64 = 8;
    const ITERS: usize = 50;
    const SEED: u64 = 0xC0FFEE;
    let (n1, n2) = (op.n1(), op.n2());
    let m = op.matricized();
    for restart in 0..RESTARTS {
        let mut rng = stream_rng(SEED, restart);
        let mut v =
            DenseVector::from_fn(n2, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..ITERS {
            // Best u for fixed v.
            let mut b_v = DMatrix::zeros(m.nrows(), n1);
            for i in 0..n1 {
                let mut col = DenseVector::zeros(m.nrows());
                for j in 0..n2 {
                    col.axpy(v[j], &m.column(j * n1 + i).clone_owned(), 1.0);
                }
                b_v.set_column(i, &col);
            }
            let u = extreme_defect_eigvec(&(b_v.transpose() * &b_v));

            // Best v for fixed u.
            let mut b_u = DMatrix::zeros(m.nrows(), n2);
            for j in 0..n2 {
                let mut col = DenseVector::zeros(m.nrows());
                for i in 0..n1 {
                    col.axpy(u[i], &m.column(j * n1 + i).clone_owned(), 1.0);
                }
                b_u.set_column(j, &col);
            }
            let gram = b_u.transpose() * &b_u;
            v = extreme_defect_eigvec(&gram);
            let score = ((&gram * &v).dot(&v) - 1.0).abs();
            best = best.max(score);
            if (score - prev).abs() < 1e-13 {
                break;
            }
            prev = score;
        }
    }
    Ok(SpectralCertificate::analytic_upper(
        SpectralQuantity::DeltaROperator,
        1,
        best.max(0.0),
    ))
}

/// Unit eigenvector of a symmetric PSD matrix whose eigenvalue maximizes
/// |lambda - 1|.
fn extreme_defect_eigvec(gram: &DenseMatrix) -> DenseVector {
    let eig = SymmetricEigen::new(gram.clone());
    let mut best_idx = 0;
    let mut best_defect = f64::NEG_INFINITY;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        let defect = (lambda - 1.0).abs();
        if defect > best_defect {
            best_defect = defect;
            best_idx = i;
        }
    }
    eig.eigenvectors.column(best_idx).clone_owned().normalize()
}

/// Sampled lower estimate of the rank-r isometry defect of an operator:
/// random unit rank-r probes refined by local gradient ascent on
/// |‖A(X/‖X‖_F)‖^2 - 1|. Never certified; monotone in `trials` for a fixed
/// seed because the per-trial probe streams are independent of trial count.
pub fn delta_r_operator_estimate(
    op: &MatrixOperator,
    r: usize,
    trials: u64,
    seed: u64,
) -> Result<SpectralCertificate> {
    let min_dim = op.dim_min();
    if r == 0 || r > min_dim {
        return Err(Error::Argument(format!(
            "rank must satisfy 1 <= r <= min(n1, n2) = {min_dim}, got {r}"
        )));
    }
    if trials == 0 {
        return Err(Error::Argument("at least one probe trial is required".into()));
    }
    const ASCENT_STEPS: usize = 50;
    const STEP_SCALE: f64 = 0.1;
    const FD_STEP: f64 = 1e-6;
    let (n1, n2) = (op.n1(), op.n2());
    let mut best = 0.0f64;
    for t in 0..trials {
        let mut rng = stream_rng(seed, t);
        let mut g = DMatrix::from_fn(n1, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut h = DMatrix::from_fn(n2, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut score = rank_probe_defect(op, &g, &h);
        best = best.max(score);
        for _ in 0..ASCENT_STEPS {
            // Forward-difference gradient in the (G, H) parameterization.
            let mut grad_g = DMatrix::zeros(n1, r);
            let mut grad_h = DMatrix::zeros(n2, r);
            for i in 0..n1 {
                for j in 0..r {
                    let orig = g[(i, j)];
                    g[(i, j)] = orig + FD_STEP;
                    grad_g[(i, j)] = (rank_probe_defect(op, &g, &h) - score) / FD_STEP;
                    g[(i, j)] = orig;
                }
            }
            for i in 0..n2 {
                for j in 0..r {
                    let orig = h[(i, j)];
                    h[(i, j)] = orig + FD_STEP;
                    grad_h[(i, j)] = (rank_probe_defect(op, &g, &h) - score) / FD_STEP;
                    h[(i, j)] = orig;
                }
            }
            let grad_norm = (grad_g.norm_squared() + grad_h.norm_squared()).sqrt();
            if grad_norm < 1e-10 {
                break;
            }
            let scale = STEP_SCALE / grad_norm;
            g += grad_g * scale;
            h += grad_h * scale;
            score = rank_probe_defect(op, &g, &h);
            best = best.max(score);
        }
    }
    Ok(SpectralCertificate::sampled(
        SpectralQuantity::DeltaROperator,
        r,
        best,
        trials,
        seed,
    ))
}
