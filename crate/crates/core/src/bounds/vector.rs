//! Error bounds for sparse recovery from underdetermined linear systems.
//!
//! Setting: A is n x m with m > n, b = A x0 (+ noise e with ||e|| <= epsilon),
//! and x0 is k-sparse with 2k below the spark of A, so x0 is the unique
//! sparsest solution. Any candidate x_tilde whose (k+1)-th largest magnitude
//! is at most alpha and whose residual ||A x_tilde - b|| is at most Delta
//! then sits provably close to x0, with the distance controlled by the
//! smallest restricted singular value over 2k-column submatrices. This
//! module evaluates those closed-form bounds, the looser column-normalized
//! baselines they improve on, their isometry-defect restatements, and the
//! two null-space/residual inequalities that drive the proofs.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, DenseVector};
use crate::spectral::{
    sigma_min_p_exact, CertificateMode, EnumerationBudget, SpectralCertificate, SpectralQuantity,
};

use super::InequalityCheck;

/// An underdetermined measurement system b = A x (+ e) with a noise cap.
#[derive(Clone, Debug)]
pub struct VectorProblem {
    /// n x m sensing matrix with m > n.
    pub a: DenseMatrix,
    /// Length-n measurement vector.
    pub b: DenseVector,
    /// Cap on the measurement-noise norm, >= 0 (0 for noiseless data).
    pub epsilon: f64,
}

impl VectorProblem {
    pub fn new(a: DenseMatrix, b: DenseVector, epsilon: f64) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() <= a.nrows() {
            return Err(Error::Argument(format!(
                "sensing matrix must be n x m with m > n >= 1, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.len() != a.nrows() {
            return Err(Error::Argument(format!(
                "measurement vector has length {}, expected {}",
                b.len(),
                a.nrows()
            )));
        }
        if !a.iter().all(|v| v.is_finite()) || !b.iter().all(|v| v.is_finite()) {
            return Err(Error::Argument("problem data must be finite".into()));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::Argument(format!(
                "noise cap must be finite and nonnegative, got {epsilon}"
            )));
        }
        Ok(Self { a, b, epsilon })
    }

    /// Number of measurements (rows).
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Number of unknowns (columns).
    pub fn m(&self) -> usize {
        self.a.ncols()
    }

    /// ||A x - b|| for a candidate x.
    pub fn residual(&self, x: &DenseVector) -> Result<f64> {
        if x.len() != self.m() {
            return Err(Error::Argument(format!(
                "candidate has length {}, expected {}",
                x.len(),
                self.m()
            )));
        }
        Ok((&self.a * x - &self.b).norm())
    }
}

/// Tightest admissible tail bound for a sparsity split at k: the (k+1)-th
/// largest magnitude of x (so 0 exactly when x is k-sparse).
pub fn alpha_of(x: &DenseVector, k: usize) -> Result<f64> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Argument("vector must be finite".into()));
    }
    if k >= x.len() {
        return Err(Error::Argument(format!(
            "sparsity split k = {k} out of range for a length-{} vector",
            x.len()
        )));
    }
    Ok(linalg::sorted_magnitudes(x.as_slice())[k])
}

/// A recovery candidate together with its sparsity split.
#[derive(Clone, Debug)]
pub struct VectorCandidate {
    pub x: DenseVector,
    /// Sparsity split: the bound treats the top-k magnitudes as signal.
    pub k: usize,
    /// Tail bound, always >= the (k+1)-th largest magnitude of `x`.
    pub alpha: f64,
    /// ||A x - b|| against the problem the candidate was built for.
    pub delta_resid: f64,
}

impl VectorCandidate {
    /// Build a candidate with the tightest admissible tail bound.
    pub fn new(problem: &VectorProblem, x: DenseVector, k: usize) -> Result<Self> {
        let alpha = alpha_of(&x, k)?;
        let delta_resid = problem.residual(&x)?;
        Ok(Self {
            x,
            k,
            alpha,
            delta_resid,
        })
    }

    /// Build a candidate with a caller-supplied tail bound. The claim is
    /// accepted only if it does not undercut the computed (k+1)-th largest
    /// magnitude (up to 1e-12 relative), since a smaller value would void
    /// every bound evaluated from it.
    pub fn with_claimed_alpha(
        problem: &VectorProblem,
        x: DenseVector,
        k: usize,
        alpha: f64,
    ) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Argument(format!(
                "tail bound must be finite and nonnegative, got {alpha}"
            )));
        }
        let computed = alpha_of(&x, k)?;
        if alpha < computed * (1.0 - 1e-12) {
            return Err(Error::Precondition(format!(
                "claimed tail bound {alpha} undercuts the candidate's actual \
                 (k+1)-th largest magnitude {computed}"
            )));
        }
        let delta_resid = problem.residual(&x)?;
        Ok(Self {
            x,
            k,
            alpha,
            delta_resid,
        })
    }
}

/// An evaluated error bound plus everything needed to audit it.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct VectorBoundReport {
    /// l2-error bound. For the feasible-candidate (noiseless) form this is
    /// the square root of `bound_squared`, provided for display.
    pub bound: f64,
    /// The squared form, present only for the noiseless bound, which is
    /// naturally stated in squared form.
    pub bound_squared: Option<f64>,
    /// Loose column-normalized baseline, filled in by the caller via
    /// [`loose_bound_noiseless`]/[`loose_bound_noisy`] when applicable.
    pub baseline_loose: Option<f64>,
    /// Isometry-defect restatement, filled in via [`ric_form_noiseless`]/
    /// [`ric_form_noisy`] when a defect certificate is available.
    pub ric_form: Option<f64>,
    /// True iff the restricted-singular-value certificate is exact or
    /// analytic; sampled and probabilistic certificates give estimates that
    /// may over-state sigma and hence under-state the bound.
    pub certified: bool,
    pub notes: Vec<String>,
    pub m: usize,
    pub k: usize,
    pub alpha: f64,
    pub max_col_norm: f64,
    pub delta_resid: Option<f64>,
    pub epsilon: Option<f64>,
    pub sigma: SpectralCertificate,
}

fn validate_bound_args(
    m: usize,
    k: usize,
    alpha: f64,
    sigma: &SpectralCertificate,
    max_col_norm: f64,
) -> Result<()> {
    sigma.expect(SpectralQuantity::SigmaMinP, 2 * k)?;
    if m <= 2 * k {
        return Err(Error::Domain(format!(
            "the bound needs m > 2k, got m = {m}, k = {k}"
        )));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Argument(format!(
            "tail bound must be finite and nonnegative, got {alpha}"
        )));
    }
    if !(max_col_norm.is_finite() && max_col_norm >= 0.0) {
        return Err(Error::Argument(format!(
            "column norm must be finite and nonnegative, got {max_col_norm}"
        )));
    }
    if !(sigma.value.is_finite() && sigma.value > 0.0) {
        return Err(Error::Domain(format!(
            "restricted singular value must be positive, got {}",
            sigma.value
        )));
    }
    Ok(())
}

fn certification_notes(sigma: &SpectralCertificate, notes: &mut Vec<String>) {
    match sigma.mode {
        CertificateMode::Sampled => notes.push(
            "sigma certificate is sampled: it can only over-estimate the true minimum, \
             so the reported bound may be smaller than a certified one"
                .into(),
        ),
        CertificateMode::Probabilistic => notes.push(format!(
            "sigma certificate is probabilistic: the bound is valid except with \
             probability at most {:.3e}",
            sigma.failure_probability
        )),
        CertificateMode::Exact | CertificateMode::AnalyticUpper => {}
    }
}

/// Squared-error bound for a data-consistent candidate: with t = m - 2k,
///
///   ||x0 - x_tilde||^2 <= (1 + t * max_col_norm^2 / sigma^2) * t * alpha^2.
///
/// `sigma` must certify the smallest restricted singular value at order 2k.
pub fn vector_bound_noiseless(
    m: usize,
    k: usize,
    alpha: f64,
    sigma: &SpectralCertificate,
    max_col_norm: f64,
) -> Result<VectorBoundReport> {
    validate_bound_args(m, k, alpha, sigma, max_col_norm)?;
    let t = (m - 2 * k) as f64;
    let s2 = sigma.value * sigma.value;
    let bound_squared = (1.0 + t * max_col_norm * max_col_norm / s2) * t * alpha * alpha;
    let mut notes = Vec::new();
    certification_notes(sigma, &mut notes);
    Ok(VectorBoundReport {
        bound: bound_squared.sqrt(),
        bound_squared: Some(bound_squared),
        baseline_loose: None,
        ric_form: None,
        certified: sigma.is_certified(),
        notes,
        m,
        k,
        alpha,
        max_col_norm,
        delta_resid: None,
        epsilon: None,
        sigma: sigma.clone(),
    })
}

/// l2-error bound for a candidate with residual at most `delta_resid` on
/// data with noise norm at most `epsilon`: with t = m - 2k,
///
///   ||x0 - x_tilde|| <= (1 + sqrt(t) * max_col_norm / sigma) * sqrt(t) * alpha
///                       + (delta_resid + epsilon) / sigma.
pub fn vector_bound_noisy(
    m: usize,
    k: usize,
    alpha: f64,
    sigma: &SpectralCertificate,
    max_col_norm: f64,
    delta_resid: f64,
    epsilon: f64,
) -> Result<VectorBoundReport> {
    validate_bound_args(m, k, alpha, sigma, max_col_norm)?;
    for (name, v) in [("residual cap", delta_resid), ("noise cap", epsilon)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Argument(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
    }
    let t = ((m - 2 * k) as f64).sqrt();
    let bound =
        (1.0 + t * max_col_norm / sigma.value) * t * alpha + (delta_resid + epsilon) / sigma.value;
    let mut notes = Vec::new();
    certification_notes(sigma, &mut notes);
    Ok(VectorBoundReport {
        bound,
        bound_squared: None,
        baseline_loose: None,
        ric_form: None,
        certified: sigma.is_certified(),
        notes,
        m,
        k,
        alpha,
        max_col_norm,
        delta_resid: Some(delta_resid),
        epsilon: Some(epsilon),
        sigma: sigma.clone(),
    })
}

fn require_unit_columns(a: &DenseMatrix) -> Result<()> {
    for (j, col) in a.column_iter().enumerate() {
        let norm = col.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Applicability(format!(
                "the loose baseline assumes unit-norm columns; column {j} has norm {norm}"
            )));
        }
    }
    Ok(())
}

/// Loose baseline bound (1 + 1/sigma) * m * alpha. Valid only for matrices
/// with unit-norm columns (checked to 1e-8); `sigma` certifies the order-2k
/// restricted singular value. Not squared: this baseline bounds the l2 error.
pub fn loose_bound_noiseless(
    a: &DenseMatrix,
    k: usize,
    alpha: f64,
    sigma: &SpectralCertificate,
) -> Result<f64> {
    require_unit_columns(a)?;
    validate_bound_args(a.ncols(), k, alpha, sigma, 1.0)?;
    Ok((1.0 + 1.0 / sigma.value) * a.ncols() as f64 * alpha)
}

/// Noisy loose baseline: the noiseless form plus (delta_resid + epsilon)/sigma.
pub fn loose_bound_noisy(
    a: &DenseMatrix,
    k: usize,
    alpha: f64,
    sigma: &SpectralCertificate,
    delta_resid: f64,
    epsilon: f64,
) -> Result<f64> {
    let base = loose_bound_noiseless(a, k, alpha, sigma)?;
    for (name, v) in [("residual cap", delta_resid), ("noise cap", epsilon)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Argument(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
    }
    Ok(base + (delta_resid + epsilon) / sigma.value)
}

fn validate_defect(delta2k: &SpectralCertificate, k: usize) -> Result<f64> {
    delta2k.expect(SpectralQuantity::DeltaKVector, 2 * k)?;
    if !(delta2k.value.is_finite() && delta2k.value >= 0.0) {
        return Err(Error::Argument(format!(
            "isometry defect must be finite and nonnegative, got {}",
            delta2k.value
        )));
    }
    if delta2k.value >= 1.0 {
        return Err(Error::Domain(format!(
            "the defect form needs delta < 1, got {}",
            delta2k.value
        )));
    }
    Ok(delta2k.value)
}

/// Squared-error bound restated through the order-2k isometry defect, with
/// 1 - delta in place of sigma^2:
///
///   (1 + (m-2k) * max_col_norm^2 / (1 - delta)) * (m-2k) * alpha^2.
///
/// Always >= the sigma-form on the same matrix, since sigma^2 >= 1 - delta.
pub fn ric_form_noiseless(
    m: usize,
    k: usize,
    alpha: f64,
    delta2k: &SpectralCertificate,
    max_col_norm: f64,
) -> Result<f64> {
    let delta = validate_defect(delta2k, k)?;
    if m <= 2 * k {
        return Err(Error::Domain(format!(
            "the bound needs m > 2k, got m = {m}, k = {k}"
        )));
    }
    if !(alpha.is_finite() && alpha >= 0.0) || !(max_col_norm.is_finite() && max_col_norm >= 0.0) {
        return Err(Error::Argument(
            "tail bound and column norm must be finite and nonnegative".into(),
        ));
    }
    let t = (m - 2 * k) as f64;
    Ok((1.0 + t * max_col_norm * max_col_norm / (1.0 - delta)) * t * alpha * alpha)
}

/// Noisy-form bound restated through the defect, with sqrt(1 - delta) in
/// place of sigma.
pub fn ric_form_noisy(
    m: usize,
    k: usize,
    alpha: f64,
    delta2k: &SpectralCertificate,
    max_col_norm: f64,
    delta_resid: f64,
    epsilon: f64,
) -> Result<f64> {
    let delta = validate_defect(delta2k, k)?;
    if m <= 2 * k {
        return Err(Error::Domain(format!(
            "the bound needs m > 2k, got m = {m}, k = {k}"
        )));
    }
    if !(alpha.is_finite() && alpha >= 0.0) || !(max_col_norm.is_finite() && max_col_norm >= 0.0) {
        return Err(Error::Argument(
            "tail bound and column norm must be finite and nonnegative".into(),
        ));
    }
    for (name, v) in [("residual cap", delta_resid), ("noise cap", epsilon)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Argument(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
    }
    let t = ((m - 2 * k) as f64).sqrt();
    let s = (1.0 - delta).sqrt();
    Ok((1.0 + t * max_col_norm / s) * t * alpha + (delta_resid + epsilon) / s)
}

fn validate_kept_indices(keep: &[usize], m: usize, p: usize) -> Result<()> {
    if p == 0 || p > m {
        return Err(Error::Argument(format!(
            "subset order must satisfy 1 <= p <= {m}, got {p}"
        )));
    }
    if keep.len() != m - p {
        return Err(Error::Argument(format!(
            "kept index set must have m - p = {} entries, got {}",
            m - p,
            keep.len()
        )));
    }
    let mut seen = vec![false; m];
    for &i in keep {
        if i >= m {
            return Err(Error::Argument(format!("index {i} out of range for m = {m}")));
        }
        if seen[i] {
            return Err(Error::Argument(format!("duplicate index {i}")));
        }
        seen[i] = true;
    }
    Ok(())
}

fn kept_norm(x: &DenseVector, keep: &[usize]) -> f64 {
    keep.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt()
}

/// Null-space energy inequality: for any x with A x = 0 and any kept index
/// set I of size m - p,
///
///   ||x||^2 <= (1 + (m-p) * max_col_norm^2 / sigma_min_p^2) * ||x_I||^2,
///
/// evaluated with the exact order-p restricted singular value. Errors if x
/// is not numerically in the null space (residual above 1e-9 * ||A||_2 *
/// ||x||) or if some p columns of A are dependent.
pub fn null_vector_energy_check(
    a: &DenseMatrix,
    x: &DenseVector,
    keep: &[usize],
    p: usize,
    budget: &EnumerationBudget,
) -> Result<InequalityCheck> {
    let m = a.ncols();
    if x.len() != m {
        return Err(Error::Argument(format!(
            "vector has length {}, expected {m}",
            x.len()
        )));
    }
    validate_kept_indices(keep, m, p)?;
    let spectral_norm = linalg::spectral_norm(a)?;
    let resid = (a * x).norm();
    if resid > 1e-9 * spectral_norm * x.norm() {
        return Err(Error::Precondition(format!(
            "x is not in the null space: ||Ax|| = {resid:.3e} exceeds the tolerance"
        )));
    }
    let sigma = sigma_min_p_exact(a, p, budget)?;
    let maxcol = linalg::max_column_norm(a);
    let t = (m - p) as f64;
    let kept = kept_norm(x, keep);
    let rhs = (1.0 + t * maxcol * maxcol / (sigma.value * sigma.value)) * kept * kept;
    Ok(InequalityCheck::evaluate(x.norm_squared(), rhs, true))
}

/// Bounded-residual inequality: for any x with ||A x|| <= eta and any kept
/// index set I of size m - p,
///
///   ||x|| <= (1 + sqrt(m-p) * max_col_norm / sigma_min_p) * ||x_I|| + eta / sigma_min_p.
pub fn bounded_residual_vector_check(
    a: &DenseMatrix,
    x: &DenseVector,
    eta: f64,
    keep: &[usize],
    p: usize,
    budget: &EnumerationBudget,
) -> Result<InequalityCheck> {
    let m = a.ncols();
    if x.len() != m {
        return Err(Error::Argument(format!(
            "vector has length {}, expected {m}",
            x.len()
        )));
    }
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::Argument(format!(
            "residual cap must be finite and nonnegative, got {eta}"
        )));
    }
    validate_kept_indices(keep, m, p)?;
    let resid = (a * x).norm();
    if resid > eta * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "||Ax|| = {resid:.6e} exceeds the claimed cap {eta:.6e}"
        )));
    }
    let sigma = sigma_min_p_exact(a, p, budget)?;
    let maxcol = linalg::max_column_norm(a);
    let t = ((m - p) as f64).sqrt();
    let rhs = (1.0 + t * maxcol / sigma.value) * kept_norm(x, keep) + eta / sigma.value;
    Ok(InequalityCheck::evaluate(x.norm(), rhs, true))
}

/// Draw a data-consistent candidate x0 + nu with nu in the null space of A:
/// coefficients on an orthonormal null basis are iid N(0, scale^2). The
/// returned candidate carries the tightest tail bound at the given split,
/// so the tail constraint binds by construction.
pub fn null_space_candidate<R: Rng + ?Sized>(
    problem: &VectorProblem,
    x0: &DenseVector,
    k: usize,
    scale: f64,
    rng: &mut R,
) -> Result<VectorCandidate> {
    if x0.len() != problem.m() {
        return Err(Error::Argument(format!(
            "ground truth has length {}, expected {}",
            x0.len(),
            problem.m()
        )));
    }
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::Argument(format!(
            "perturbation scale must be finite and nonnegative, got {scale}"
        )));
    }
    let basis = linalg::null_space_basis(&problem.a);
    if basis.ncols() == 0 {
        return Err(Error::Numerical(
            "sensing matrix appears to have a trivial null space".into(),
        ));
    }
    let coeffs = DenseVector::from_fn(basis.ncols(), |_, _| {
        scale * rng.sample::<f64, _>(StandardNormal)
    });
    let x = x0 + basis * coeffs;
    VectorCandidate::new(problem, x, k)
}
