//! Error bounds for low-rank recovery under linear matrix measurements.
//!
//! Setting: a linear operator A maps n1 x n2 matrices to m measurements,
//! b = A(X0) (+ noise e with ||e|| <= epsilon), and X0 has rank r. Any
//! candidate X_tilde with (r+1)-th singular value at most alpha and residual
//! ||b - A(X_tilde)|| at most Delta sits provably close to X0 in Frobenius
//! norm, with the distance controlled by two restricted isometry defects:
//! delta_1 (rank-one inputs, entering as a 1 + delta_1 inflation) and
//! delta_2r (rank-2r inputs, entering as a 1 - delta_2r deflation). All
//! bounds are expressed in n = min(n1, n2). As in the vector module, the
//! constants arrive as certificates and their modes decide whether a report
//! is certified or estimate-only.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, DenseVector};
use crate::operator::{mat_from_vec, MatrixOperator};
use crate::spectral::{CertificateMode, SpectralCertificate, SpectralQuantity};

use super::InequalityCheck;

/// A low-rank recovery candidate together with its rank split.
#[derive(Clone, Debug)]
pub struct MatrixCandidate {
    pub x: DenseMatrix,
    /// Rank split: the bound treats the top-r singular directions as signal.
    pub r: usize,
    /// Tail bound, always >= the (r+1)-th singular value of `x`.
    pub alpha: f64,
    /// ||b - A(x)|| against the measurements the candidate was built for.
    pub delta_resid: f64,
}

impl MatrixCandidate {
    /// Build a candidate with the tightest admissible tail bound
    /// alpha = sigma_{r+1}(x).
    pub fn new(
        op: &MatrixOperator,
        b: &DenseVector,
        x: DenseMatrix,
        r: usize,
    ) -> Result<Self> {
        let alpha = tail_singular_value(&x, r)?;
        let delta_resid = residual(op, b, &x)?;
        Ok(Self {
            x,
            r,
            alpha,
            delta_resid,
        })
    }

    /// Build a candidate with a caller-supplied tail bound, accepted only if
    /// it does not undercut the computed (r+1)-th singular value (up to
    /// 1e-12 relative).
    pub fn with_claimed_alpha(
        op: &MatrixOperator,
        b: &DenseVector,
        x: DenseMatrix,
        r: usize,
        alpha: f64,
    ) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Argument(format!(
                "tail bound must be finite and nonnegative, got {alpha}"
            )));
        }
        let computed = tail_singular_value(&x, r)?;
        if alpha < computed * (1.0 - 1e-12) {
            return Err(Error::Precondition(format!(
                "claimed tail bound {alpha} undercuts the candidate's actual \
                 (r+1)-th singular value {computed}"
            )));
        }
        let delta_resid = residual(op, b, &x)?;
        Ok(Self {
            x,
            r,
            alpha,
            delta_resid,
        })
    }
}

/// sigma_{r+1}(x), the tightest admissible tail bound at rank split r
/// (0 exactly when rank(x) <= r).
pub fn tail_singular_value(x: &DenseMatrix, r: usize) -> Result<f64> {
    let n = x.nrows().min(x.ncols());
    if r >= n {
        return Err(Error::Argument(format!(
            "rank split r = {r} out of range for a {}x{} matrix",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(linalg::singular_values_desc(x)?[r])
}

fn residual(op: &MatrixOperator, b: &DenseVector, x: &DenseMatrix) -> Result<f64> {
    if b.len() != op.m() {
        return Err(Error::Argument(format!(
            "measurement vector has length {}, expected {}",
            b.len(),
            op.m()
        )));
    }
    Ok((op.apply(x)? - b).norm())
}

/// An evaluated Frobenius-error bound plus everything needed to audit it.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct MatrixBoundReport {
    /// Frobenius-error bound. For the feasible-candidate (noiseless) form
    /// this is the square root of `bound_squared`, provided for display.
    pub bound: f64,
    /// The squared form, present only for the noiseless bound.
    pub bound_squared: Option<f64>,
    /// Noisy bound with the residual term divided by sqrt(1 - delta_2r)
    /// instead of 1 - delta_2r. The two variants circulate because the
    /// engine inequality naturally yields the square-root denominator while
    /// the headline bound is printed with the plain one; the plain form is
    /// never smaller, so `bound` is the safe default and this tighter
    /// variant is surfaced for comparison.
    pub bound_alt_noise_term: Option<f64>,
    /// True iff both defect certificates are exact or analytic upper bounds.
    /// A sampled defect can under-state the true value and hence the bound.
    pub certified: bool,
    pub notes: Vec<String>,
    /// min(n1, n2), the scale every rank-based quantity is expressed in.
    pub n: usize,
    pub r: usize,
    pub alpha: f64,
    pub delta_resid: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta1: SpectralCertificate,
    pub delta2r: SpectralCertificate,
}

struct DefectPair {
    delta1: f64,
    delta2r: f64,
    certified: bool,
    notes: Vec<String>,
}

fn validate_defects(
    n: usize,
    r: usize,
    alpha: f64,
    delta2r: &SpectralCertificate,
    delta1: &SpectralCertificate,
) -> Result<DefectPair> {
    delta2r.expect(SpectralQuantity::DeltaROperator, 2 * r)?;
    delta1.expect(SpectralQuantity::DeltaROperator, 1)?;
    if n <= 2 * r {
        return Err(Error::Domain(format!(
            "the bound needs n > 2r, got n = {n}, r = {r}"
        )));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Argument(format!(
            "tail bound must be finite and nonnegative, got {alpha}"
        )));
    }
    if !(delta1.value.is_finite() && delta1.value >= 0.0) {
        return Err(Error::Argument(format!(
            "rank-one defect must be finite and nonnegative, got {}",
            delta1.value
        )));
    }
    if !(delta2r.value.is_finite() && delta2r.value >= 0.0) {
        return Err(Error::Argument(format!(
            "rank-2r defect must be finite and nonnegative, got {}",
            delta2r.value
        )));
    }
    if delta2r.value >= 1.0 {
        return Err(Error::Domain(format!(
            "the bound needs delta_2r < 1, got {}",
            delta2r.value
        )));
    }
    let mut notes = Vec::new();
    if delta2r.value == 0.0 {
        notes.push(
            "rank-2r defect is exactly 0 (perfect restricted isometry); accepted as the \
             degenerate limit of the strict-inequality hypothesis"
                .into(),
        );
    }
    for (name, cert) in [("rank-2r", delta2r), ("rank-one", delta1)] {
        match cert.mode {
            CertificateMode::Sampled => notes.push(format!(
                "{name} defect certificate is sampled: it can under-state the true defect, \
                 so the report is estimate-only"
            )),
            CertificateMode::Probabilistic => notes.push(format!(
                "{name} defect certificate is probabilistic: valid except with probability \
                 at most {:.3e}",
                cert.failure_probability
            )),
            CertificateMode::Exact | CertificateMode::AnalyticUpper => {}
        }
    }
    Ok(DefectPair {
        delta1: delta1.value,
        delta2r: delta2r.value,
        certified: delta1.is_certified() && delta2r.is_certified(),
        notes,
    })
}

/// Squared Frobenius-error bound for a data-consistent candidate: with
/// t = n - 2r and n = min(n1, n2),
///
///   ||X0 - X_tilde||_F^2 <= (1 + t * (1 + delta_1) / (1 - delta_2r)) * t * alpha^2.
pub fn matrix_bound_noiseless(
    n: usize,
    r: usize,
    alpha: f64,
    delta2r: &SpectralCertificate,
    delta1: &SpectralCertificate,
) -> Result<MatrixBoundReport> {
    let d = validate_defects(n, r, alpha, delta2r, delta1)?;
    let t = (n - 2 * r) as f64;
    let bound_squared = (1.0 + t * (1.0 + d.delta1) / (1.0 - d.delta2r)) * t * alpha * alpha;
    Ok(MatrixBoundReport {
        bound: bound_squared.sqrt(),
        bound_squared: Some(bound_squared),
        bound_alt_noise_term: None,
        certified: d.certified,
        notes: d.notes,
        n,
        r,
        alpha,
        delta_resid: None,
        epsilon: None,
        delta1: delta1.clone(),
        delta2r: delta2r.clone(),
    })
}

/// Frobenius-error bound for a candidate with residual at most `delta_resid`
/// on data with noise norm at most `epsilon`: with t = n - 2r,
///
///   ||X0 - X_tilde||_F <= (1 + sqrt(t * (1 + delta_1) / (1 - delta_2r))) * sqrt(t) * alpha
///                         + (delta_resid + epsilon) / (1 - delta_2r).
///
/// The report also carries the variant whose last term divides by
/// sqrt(1 - delta_2r); see [`MatrixBoundReport::bound_alt_noise_term`].
pub fn matrix_bound_noisy(
    n: usize,
    r: usize,
    alpha: f64,
    delta2r: &SpectralCertificate,
    delta1: &SpectralCertificate,
    delta_resid: f64,
    epsilon: f64,
) -> Result<MatrixBoundReport> {
    let d = validate_defects(n, r, alpha, delta2r, delta1)?;
    for (name, v) in [("residual cap", delta_resid), ("noise cap", epsilon)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Argument(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
    }
    let t = (n - 2 * r) as f64;
    let first = (1.0 + (t * (1.0 + d.delta1) / (1.0 - d.delta2r)).sqrt()) * t.sqrt() * alpha;
    let bound = first + (delta_resid + epsilon) / (1.0 - d.delta2r);
    let alt = first + (delta_resid + epsilon) / (1.0 - d.delta2r).sqrt();
    Ok(MatrixBoundReport {
        bound,
        bound_squared: None,
        bound_alt_noise_term: Some(alt),
        certified: d.certified,
        notes: d.notes,
        n,
        r,
        alpha,
        delta_resid: Some(delta_resid),
        epsilon: Some(epsilon),
        delta1: delta1.clone(),
        delta2r: delta2r.clone(),
    })
}

/// Singular-value interlacing step: sigma_{2r+1}(X0 - X_tilde) <=
/// sigma_{r+1}(X0) + sigma_{r+1}(X_tilde). This is the one proof ingredient
/// checkable without any isometry constants; the verdict allows 1e-10
/// relative slack on the singular-value scale.
pub fn weyl_tail_bound(
    x0: &DenseMatrix,
    x_tilde: &DenseMatrix,
    r: usize,
) -> Result<InequalityCheck> {
    if x0.nrows() != x_tilde.nrows() || x0.ncols() != x_tilde.ncols() {
        return Err(Error::Argument(format!(
            "shape mismatch: {}x{} vs {}x{}",
            x0.nrows(),
            x0.ncols(),
            x_tilde.nrows(),
            x_tilde.ncols()
        )));
    }
    let n = x0.nrows().min(x0.ncols());
    if 2 * r + 1 > n {
        return Err(Error::Argument(format!(
            "need 2r + 1 <= min dimension, got r = {r} with min dimension {n}"
        )));
    }
    let sv_diff = linalg::singular_values_desc(&(x0 - x_tilde))?;
    let sv0 = linalg::singular_values_desc(x0)?;
    let svt = linalg::singular_values_desc(x_tilde)?;
    let lhs = sv_diff[2 * r];
    let rhs = sv0[r] + svt[r];
    let scale = (sv0[0] + svt[0]).max(1.0);
    Ok(InequalityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-10 * scale,
        certified: true,
    })
}

/// Frobenius norm of everything past the top-r singular directions.
fn tail_norm(x: &DenseMatrix, r: usize) -> Result<f64> {
    let n = x.nrows().min(x.ncols());
    if r == 0 || r > n {
        return Err(Error::Argument(format!(
            "rank split must satisfy 1 <= r <= {n}, got {r}"
        )));
    }
    let sv = linalg::singular_values_desc(x)?;
    Ok(sv.iter().skip(r).map(|s| s * s).sum::<f64>().sqrt())
}

/// Null-space energy inequality for matrices: for any X with A(X) = 0 and
/// tail X_(-r) past the top-r singular directions,
///
///   ||X||_F^2 <= (1 + (n - r) * (1 + delta_1) / (1 - delta_r)) * ||X_(-r)||_F^2.
///
/// Errors if X is not numerically in the null space (residual above
/// 1e-9 * sigma_max * ||X||_F). The verdict is certified only when both
/// defect certificates are; with a sampled delta_r the check still runs but
/// is marked estimate-only through the flag.
pub fn null_matrix_energy_check(
    op: &MatrixOperator,
    x: &DenseMatrix,
    r: usize,
    delta1: &SpectralCertificate,
    delta_r: &SpectralCertificate,
) -> Result<InequalityCheck> {
    delta_r.expect(SpectralQuantity::DeltaROperator, r)?;
    delta1.expect(SpectralQuantity::DeltaROperator, 1)?;
    if delta_r.value >= 1.0 {
        return Err(Error::Domain(format!(
            "the inequality needs delta_r < 1, got {}",
            delta_r.value
        )));
    }
    if !(delta_r.value >= 0.0 && delta1.value >= 0.0)
        || !delta_r.value.is_finite()
        || !delta1.value.is_finite()
    {
        return Err(Error::Argument("defects must be finite and nonnegative".into()));
    }
    let resid = op.apply(x)?.norm();
    let scale = op.operator_norm()? * x.norm();
    if resid > 1e-9 * scale {
        return Err(Error::Precondition(format!(
            "X is not in the null space: ||A(X)|| = {resid:.3e} exceeds the tolerance"
        )));
    }
    let n = op.dim_min();
    let tail = tail_norm(x, r)?;
    let rhs = (1.0 + (n - r) as f64 * (1.0 + delta1.value) / (1.0 - delta_r.value)) * tail * tail;
    let certified = delta1.is_certified() && delta_r.is_certified();
    Ok(InequalityCheck::evaluate(x.norm_squared(), rhs, certified))
}

/// Bounded-residual inequality for matrices: for any X with ||A(X)|| <= eta,
///
///   ||X||_F <= (1 + sqrt((n - r) * (1 + delta_1) / (1 - delta_r))) * ||X_(-r)||_F
///              + eta / sqrt(1 - delta_r).
///
/// Note the square-root denominator on the residual term: this engine form
/// is tighter than the headline noisy bound's plain denominator.
pub fn bounded_residual_matrix_check(
    op: &MatrixOperator,
    x: &DenseMatrix,
    eta: f64,
    r: usize,
    delta1: &SpectralCertificate,
    delta_r: &SpectralCertificate,
) -> Result<InequalityCheck> {
    delta_r.expect(SpectralQuantity::DeltaROperator, r)?;
    delta1.expect(SpectralQuantity::DeltaROperator, 1)?;
    if delta_r.value >= 1.0 {
        return Err(Error::Domain(format!(
            "the inequality needs delta_r < 1, got {}",
            delta_r.value
        )));
    }
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::Argument(format!(
            "residual cap must be finite and nonnegative, got {eta}"
        )));
    }
    let resid = op.apply(x)?.norm();
    if resid > eta * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "||A(X)|| = {resid:.6e} exceeds the claimed cap {eta:.6e}"
        )));
    }
    let n = op.dim_min();
    let tail = tail_norm(x, r)?;
    let root = (1.0 - delta_r.value).sqrt();
    let rhs = (1.0 + ((n - r) as f64 * (1.0 + delta1.value)).sqrt() / root) * tail + eta / root;
    let certified = delta1.is_certified() && delta_r.is_certified();
    Ok(InequalityCheck::evaluate(x.norm(), rhs, certified))
}

/// Draw a data-consistent candidate X0 + N with N in the null space of the
/// operator: coefficients on an orthonormal kernel basis are iid
/// N(0, scale^2), reshaped to n1 x n2. Operators with a trivial kernel
/// (e.g. rotated vectorizations) admit exactly one consistent candidate, so
/// the ground truth itself is returned.
pub fn null_space_matrix_candidate<R: Rng + ?Sized>(
    op: &MatrixOperator,
    b: &DenseVector,
    x0: &DenseMatrix,
    r: usize,
    scale: f64,
    rng: &mut R,
) -> Result<MatrixCandidate> {
    if x0.nrows() != op.n1() || x0.ncols() != op.n2() {
        return Err(Error::Argument(format!(
            "ground truth is {}x{}, expected {}x{}",
            x0.nrows(),
            x0.ncols(),
            op.n1(),
            op.n2()
        )));
    }
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::Argument(format!(
            "perturbation scale must be finite and nonnegative, got {scale}"
        )));
    }
    let basis = op.null_space_basis();
    if basis.ncols() == 0 {
        return MatrixCandidate::new(op, b, x0.clone(), r);
    }
    let coeffs = DenseVector::from_fn(basis.ncols(), |_, _| {
        scale * rng.sample::<f64, _>(StandardNormal)
    });
    let x = x0 + mat_from_vec(&(basis * coeffs), op.n1(), op.n2())?;
    MatrixCandidate::new(op, b, x, r)
}
