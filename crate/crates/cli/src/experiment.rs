//! Monte-Carlo validation campaigns: generate instances, run a solver (or a
//! direct null-space perturbation), evaluate the certified bound on every
//! trial, and record whether any certified bound was ever violated.
//!
//! Determinism contract: every trial derives its randomness from
//! `mix_seed(seed, trial_index)`, so the emitted CSV is byte-identical for
//! any worker count.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use certbound_core::bounds::matrix::{
    matrix_bound_noiseless, matrix_bound_noisy, null_space_matrix_candidate, MatrixCandidate,
};
use certbound_core::bounds::vector::{
    loose_bound_noiseless, loose_bound_noisy, null_space_candidate, ric_form_noiseless,
    ric_form_noisy, vector_bound_noiseless, vector_bound_noisy, VectorCandidate, VectorProblem,
};
use certbound_core::linalg;
use certbound_core::operator::MatrixOperator;
use certbound_core::parallel::parallel_map_indexed;
use certbound_core::rng::{mix_seed, stream_rng};
use certbound_core::solvers::{
    ista_solve, iht_solve, low_rank_ground_truth, omp_solve, scaled_noise, sensing_matrix,
    sparse_ground_truth, svt_solve, Ensemble, InstanceSpec,
};
use certbound_core::spectral::{
    delta_k_vector_exact, delta_one_operator_upper, delta_r_operator_estimate, sigma_min_p_exact,
    sigma_min_p_sampled, CertificateMode, EnumerationBudget, SpectralCertificate,
    SpectralQuantity,
};
use certbound_core::{DenseMatrix, Error, Result};
use serde::{Deserialize, Serialize};

use crate::report::SCHEMA_VERSION;

/// Relative residual below which a candidate counts as data-consistent and
/// the tighter feasible-candidate (squared) bound applies.
const CONSISTENCY_TOL: f64 = 1e-9;

/// Stream tags that never collide with per-trial streams 0..=3.
const SIGMA_PROBE_TAG: u64 = 0x5147_4d41;
const DEFECT_PROBE_TAG: u64 = 0x4445_4643;

fn default_true() -> bool {
    true
}
fn default_sigma_trials() -> u64 {
    1000
}
fn default_defect_trials() -> u64 {
    20
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    #[default]
    Exact,
    Sampled,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorFamily {
    /// Matricized operator drawn from the instance's random ensemble.
    #[default]
    Ensemble,
    /// Randomly rotated vectorization: an exact isometry, all defects zero.
    RotatedVectorization,
    /// Random rows of a rotation, rescaled to unit expected energy.
    ScaledPartialIsometry,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverSpec {
    /// Add a random null-space element to the planted truth; the candidate
    /// stays data-consistent by construction.
    NullPerturb { scale: f64 },
    /// Orthogonal matching pursuit with a fixed step count.
    Omp { steps: usize },
    /// Proximal-gradient l1 minimization.
    Ista { lambda: f64, iters: usize },
    /// Iterative hard thresholding at the instance sparsity.
    Iht { iters: usize },
    /// Singular value thresholding for the matrix problem.
    Svt { tau: f64, iters: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub solver: SolverSpec,
    pub trials: u64,
    /// Reuse one sensing matrix / operator across all trials (the spectral
    /// certificate is then computed once). When false, every trial draws a
    /// fresh matrix and pays for its own certificate.
    #[serde(default = "default_true")]
    pub shared_matrix: bool,
    /// How to certify sigma_min over 2k-column submatrices (vector kinds).
    #[serde(default)]
    pub sigma_mode: SigmaMode,
    #[serde(default = "default_sigma_trials")]
    pub sigma_trials: u64,
    /// Operator construction for matrix kinds.
    #[serde(default)]
    pub operator_family: OperatorFamily,
    /// Caller-asserted rank-one defect upper bound (matrix kinds).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_delta1: Option<f64>,
    /// Caller-asserted order-2r defect upper bound (matrix kinds).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_delta2r: Option<f64>,
    /// Ascent restarts per probed defect estimate.
    #[serde(default = "default_defect_trials")]
    pub defect_trials: u64,
    /// Also evaluate the isometry-defect restatement (vector kinds; exact
    /// enumeration of the defect).
    #[serde(default)]
    pub evaluate_ric_form: bool,
    /// Also evaluate the loose column-normalized baseline (vector kinds;
    /// requires unit columns).
    #[serde(default)]
    pub evaluate_loose: bool,
    /// Cap on exact-enumeration work, in visited subsets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Error,
    Panic,
}

impl TrialStatus {
    fn as_str(self) -> &'static str {
        match self {
            TrialStatus::Ok => "ok",
            TrialStatus::Error => "error",
            TrialStatus::Panic => "panic",
        }
    }
}

/// One row of the campaign CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub status: TrialStatus,
    pub actual_error: Option<f64>,
    pub bound: Option<f64>,
    pub ric_form: Option<f64>,
    pub loose: Option<f64>,
    pub tightness_ratio: Option<f64>,
    pub sigma_mode: Option<CertificateMode>,
    pub certified: Option<bool>,
    pub violation: bool,
    /// Error detail for failed trials; carried in the summary, not the CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

struct TrialEval {
    actual: f64,
    bound: f64,
    ric_form: Option<f64>,
    loose: Option<f64>,
    sigma_mode: CertificateMode,
    certified: bool,
}

impl TrialRecord {
    fn from_eval(trial: u64, eval: TrialEval) -> Self {
        let violation = eval.certified && eval.actual > eval.bound * (1.0 + 1e-9);
        let tightness_ratio = if eval.actual > 0.0 {
            Some(eval.bound / eval.actual)
        } else {
            None
        };
        Self {
            trial,
            status: TrialStatus::Ok,
            actual_error: Some(eval.actual),
            bound: Some(eval.bound),
            ric_form: eval.ric_form,
            loose: eval.loose,
            tightness_ratio,
            sigma_mode: Some(eval.sigma_mode),
            certified: Some(eval.certified),
            violation,
            message: None,
        }
    }

    fn failed(trial: u64, status: TrialStatus, message: String) -> Self {
        Self {
            trial,
            status,
            actual_error: None,
            bound: None,
            ric_form: None,
            loose: None,
            tightness_ratio: None,
            sigma_mode: None,
            certified: None,
            violation: false,
            message: Some(message),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TightnessQuantiles {
    pub count: u64,
    pub min: f64,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialErrorSummary {
    pub trial: u64,
    pub message: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub config_sha256: String,
    pub trials: u64,
    pub ok_trials: u64,
    pub error_trials: u64,
    pub panic_trials: u64,
    pub violations: u64,
    /// Quantiles of bound/actual over successful trials with positive error.
    pub tightness: Option<TightnessQuantiles>,
    pub wall_time_seconds: f64,
    pub workers: usize,
    /// First few failure messages, for diagnosis without re-running.
    pub errors: Vec<TrialErrorSummary>,
    pub config: ExperimentConfig,
}

pub struct ExperimentOutcome {
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Argument("trials must be at least 1".into()));
        }
        if self.sigma_trials == 0 || self.defect_trials == 0 {
            return Err(Error::Argument(
                "sigma_trials and defect_trials must be at least 1".into(),
            ));
        }
        match self.instance {
            InstanceSpec::Vector { n, m, k, .. } => {
                match self.solver {
                    SolverSpec::NullPerturb { .. }
                    | SolverSpec::Omp { .. }
                    | SolverSpec::Ista { .. }
                    | SolverSpec::Iht { .. } => {}
                    SolverSpec::Svt { .. } => {
                        return Err(Error::Argument(
                            "svt solves the matrix problem, not the vector one".into(),
                        ));
                    }
                }
                if self.operator_family != OperatorFamily::Ensemble {
                    return Err(Error::Argument(
                        "operator_family applies to matrix instances only".into(),
                    ));
                }
                if m <= 2 * k {
                    return Err(Error::Argument(format!(
                        "the bound needs m > 2k, got m = {m}, k = {k}"
                    )));
                }
                if m <= n {
                    return Err(Error::Argument(format!(
                        "expected an underdetermined system, got n = {n}, m = {m}"
                    )));
                }
            }
            InstanceSpec::Matrix { n1, n2, m, r, .. } => {
                match self.solver {
                    SolverSpec::NullPerturb { .. } | SolverSpec::Svt { .. } => {}
                    _ => {
                        return Err(Error::Argument(
                            "matrix instances support the null_perturb and svt solvers".into(),
                        ));
                    }
                }
                if self.evaluate_ric_form || self.evaluate_loose {
                    return Err(Error::Argument(
                        "ric_form and loose baselines are vector-instance evaluations".into(),
                    ));
                }
                let n = n1.min(n2);
                if n <= 2 * r {
                    return Err(Error::Argument(format!(
                        "the bound needs min(n1, n2) > 2r, got {n1}x{n2}, r = {r}"
                    )));
                }
                if self.operator_family == OperatorFamily::RotatedVectorization && m != n1 * n2 {
                    return Err(Error::Argument(format!(
                        "a rotated vectorization has exactly n1*n2 = {} outputs, got m = {m}",
                        n1 * n2
                    )));
                }
                for (name, v) in [("known_delta1", self.known_delta1), ("known_delta2r", self.known_delta2r)] {
                    if let Some(v) = v {
                        if !(v.is_finite() && v >= 0.0) {
                            return Err(Error::Argument(format!(
                                "{name} must be finite and nonnegative, got {v}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn base_seed(&self) -> u64 {
        match self.instance {
            InstanceSpec::Vector { seed, .. } => seed,
            InstanceSpec::Matrix { seed, .. } => seed,
        }
    }

    fn enumeration_budget(&self, workers: usize) -> EnumerationBudget {
        let mut budget = EnumerationBudget::default();
        if let Some(max) = self.budget {
            budget.max_subsets = max;
        }
        budget.worker_count = workers;
        budget
    }
}

struct VectorContext {
    a: DenseMatrix,
    max_col_norm: f64,
    sigma: SpectralCertificate,
    delta2k: Option<SpectralCertificate>,
}

struct MatrixContext {
    op: MatrixOperator,
    delta1: SpectralCertificate,
    delta2r: SpectralCertificate,
}

fn build_vector_context(
    cfg: &ExperimentConfig,
    n: usize,
    m: usize,
    k: usize,
    ensemble: Ensemble,
    seed: u64,
    budget: &EnumerationBudget,
) -> Result<VectorContext> {
    let a = sensing_matrix(n, m, ensemble, &mut stream_rng(seed, 0))?;
    let sigma = match cfg.sigma_mode {
        SigmaMode::Exact => sigma_min_p_exact(&a, 2 * k, budget)?,
        SigmaMode::Sampled => {
            sigma_min_p_sampled(&a, 2 * k, cfg.sigma_trials, mix_seed(seed, SIGMA_PROBE_TAG))?
        }
    };
    let delta2k = if cfg.evaluate_ric_form {
        Some(delta_k_vector_exact(&a, 2 * k, budget)?)
    } else {
        None
    };
    let max_col_norm = linalg::max_column_norm(&a);
    Ok(VectorContext {
        a,
        max_col_norm,
        sigma,
        delta2k,
    })
}

fn build_matrix_context(
    cfg: &ExperimentConfig,
    n1: usize,
    n2: usize,
    m: usize,
    r: usize,
    ensemble: Ensemble,
    seed: u64,
) -> Result<MatrixContext> {
    let op = match cfg.operator_family {
        OperatorFamily::Ensemble => {
            let matricized = sensing_matrix(m, n1 * n2, ensemble, &mut stream_rng(seed, 0))?;
            MatrixOperator::new(n1, n2, matricized)?
        }
        OperatorFamily::RotatedVectorization => {
            MatrixOperator::rotated_vectorization(n1, n2, &mut stream_rng(seed, 0))
        }
        OperatorFamily::ScaledPartialIsometry => {
            MatrixOperator::scaled_partial_isometry(n1, n2, m, &mut stream_rng(seed, 0))?
        }
    };

    let exact_isometry = cfg.operator_family == OperatorFamily::RotatedVectorization;
    let delta1 = match cfg.known_delta1 {
        Some(v) => SpectralCertificate::analytic_upper(SpectralQuantity::DeltaROperator, 1, v),
        None if exact_isometry => {
            SpectralCertificate::exact(SpectralQuantity::DeltaROperator, 1, 0.0)
        }
        None => delta_one_operator_upper(&op)?,
    };
    let delta2r = match cfg.known_delta2r {
        Some(v) => SpectralCertificate::analytic_upper(SpectralQuantity::DeltaROperator, 2 * r, v),
        None if exact_isometry => {
            SpectralCertificate::exact(SpectralQuantity::DeltaROperator, 2 * r, 0.0)
        }
        None => delta_r_operator_estimate(
            &op,
            2 * r,
            cfg.defect_trials,
            mix_seed(seed, DEFECT_PROBE_TAG),
        )?,
    };
    Ok(MatrixContext {
        op,
        delta1,
        delta2r,
    })
}

fn vector_trial(
    cfg: &ExperimentConfig,
    shared: Option<&VectorContext>,
    trial: u64,
    budget: &EnumerationBudget,
) -> Result<TrialEval> {
    let (n, m, k, noise_sigma, ensemble) = match cfg.instance {
        InstanceSpec::Vector {
            n,
            m,
            k,
            noise_sigma,
            ensemble,
            ..
        } => (n, m, k, noise_sigma, ensemble),
        InstanceSpec::Matrix { .. } => {
            unreachable!("vector_trial is only called for vector instances")
        }
    };
    let trial_seed = mix_seed(cfg.base_seed(), trial);

    let local;
    let ctx = match shared {
        Some(c) => c,
        None => {
            local = build_vector_context(cfg, n, m, k, ensemble, trial_seed, budget)?;
            &local
        }
    };

    let x0 = sparse_ground_truth(m, k, &mut stream_rng(trial_seed, 1))?;
    let e = scaled_noise(n, noise_sigma, &mut stream_rng(trial_seed, 2))?;
    let b = &ctx.a * &x0 + &e;
    let epsilon = e.norm();
    let problem = VectorProblem::new(ctx.a.clone(), b, epsilon)?;

    let cand = match cfg.solver {
        SolverSpec::NullPerturb { scale } => {
            null_space_candidate(&problem, &x0, k, scale, &mut stream_rng(trial_seed, 3))?
        }
        SolverSpec::Omp { steps } => {
            let solve = omp_solve(&problem, steps)?;
            VectorCandidate::new(&problem, solve.candidate.x.clone(), k)?
        }
        SolverSpec::Ista { lambda, iters } => {
            let solve = ista_solve(&problem, lambda, iters)?;
            VectorCandidate::new(&problem, solve.candidate.x.clone(), k)?
        }
        SolverSpec::Iht { iters } => iht_solve(&problem, k, iters)?.candidate,
        SolverSpec::Svt { .. } => unreachable!("rejected by validate"),
    };

    let actual = (&cand.x - &x0).norm();
    let consistent =
        epsilon == 0.0 && cand.delta_resid <= CONSISTENCY_TOL * problem.b.norm().max(1.0);

    let report = if consistent {
        vector_bound_noiseless(m, k, cand.alpha, &ctx.sigma, ctx.max_col_norm)?
    } else {
        vector_bound_noisy(
            m,
            k,
            cand.alpha,
            &ctx.sigma,
            ctx.max_col_norm,
            cand.delta_resid,
            epsilon,
        )?
    };

    let ric_form = match &ctx.delta2k {
        None => None,
        Some(delta2k) => Some(if consistent {
            ric_form_noiseless(m, k, cand.alpha, delta2k, ctx.max_col_norm)?
        } else {
            ric_form_noisy(
                m,
                k,
                cand.alpha,
                delta2k,
                ctx.max_col_norm,
                cand.delta_resid,
                epsilon,
            )?
        }),
    };

    let loose = if cfg.evaluate_loose {
        let attempt = if consistent {
            loose_bound_noiseless(&ctx.a, k, cand.alpha, &ctx.sigma)
        } else {
            loose_bound_noisy(
                &ctx.a,
                k,
                cand.alpha,
                &ctx.sigma,
                cand.delta_resid,
                epsilon,
            )
        };
        match attempt {
            Ok(v) => Some(v),
            Err(Error::Applicability(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    Ok(TrialEval {
        actual,
        bound: report.bound,
        ric_form,
        loose,
        sigma_mode: ctx.sigma.mode,
        certified: report.certified,
    })
}

fn matrix_trial(
    cfg: &ExperimentConfig,
    shared: Option<&MatrixContext>,
    trial: u64,
) -> Result<TrialEval> {
    let (n1, n2, m, r, noise_sigma, ensemble) = match cfg.instance {
        InstanceSpec::Matrix {
            n1,
            n2,
            m,
            r,
            noise_sigma,
            ensemble,
            ..
        } => (n1, n2, m, r, noise_sigma, ensemble),
        InstanceSpec::Vector { .. } => {
            unreachable!("matrix_trial is only called for matrix instances")
        }
    };
    let trial_seed = mix_seed(cfg.base_seed(), trial);

    let local;
    let ctx = match shared {
        Some(c) => c,
        None => {
            local = build_matrix_context(cfg, n1, n2, m, r, ensemble, trial_seed)?;
            &local
        }
    };

    let x0 = low_rank_ground_truth(n1, n2, r, &mut stream_rng(trial_seed, 1))?;
    let e = scaled_noise(ctx.op.m(), noise_sigma, &mut stream_rng(trial_seed, 2))?;
    let b = ctx.op.apply(&x0)? + &e;
    let epsilon = e.norm();

    let cand: MatrixCandidate = match cfg.solver {
        SolverSpec::NullPerturb { scale } => {
            null_space_matrix_candidate(&ctx.op, &b, &x0, r, scale, &mut stream_rng(trial_seed, 3))?
        }
        SolverSpec::Svt { tau, iters } => svt_solve(&ctx.op, &b, tau, iters, r)?.candidate,
        _ => unreachable!("rejected by validate"),
    };

    let actual = (&cand.x - &x0).norm();
    let consistent = epsilon == 0.0 && cand.delta_resid <= CONSISTENCY_TOL * b.norm().max(1.0);
    let n = n1.min(n2);

    let report = if consistent {
        matrix_bound_noiseless(n, r, cand.alpha, &ctx.delta2r, &ctx.delta1)?
    } else {
        matrix_bound_noisy(
            n,
            r,
            cand.alpha,
            &ctx.delta2r,
            &ctx.delta1,
            cand.delta_resid,
            epsilon,
        )?
    };

    Ok(TrialEval {
        actual,
        bound: report.bound,
        ric_form: None,
        loose: None,
        sigma_mode: ctx.delta2r.mode,
        certified: report.certified,
    })
}

fn panic_text(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "trial panicked".to_string()
    }
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    config_sha256: String,
    workers: usize,
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let start = Instant::now();

    // Shared spectral work runs once, outside the trial pool, and may use
    // every worker; per-trial enumeration stays single-threaded so the trial
    // pool is the only source of parallelism.
    let shared_budget = cfg.enumeration_budget(workers);
    let trial_budget = cfg.enumeration_budget(1);
    let base_seed = cfg.base_seed();

    let mut vector_ctx: Option<VectorContext> = None;
    let mut matrix_ctx: Option<MatrixContext> = None;
    if cfg.shared_matrix {
        match cfg.instance {
            InstanceSpec::Vector {
                n, m, k, ensemble, ..
            } => {
                vector_ctx = Some(build_vector_context(
                    cfg,
                    n,
                    m,
                    k,
                    ensemble,
                    base_seed,
                    &shared_budget,
                )?);
            }
            InstanceSpec::Matrix {
                n1,
                n2,
                m,
                r,
                ensemble,
                ..
            } => {
                matrix_ctx = Some(build_matrix_context(cfg, n1, n2, m, r, ensemble, base_seed)?);
            }
        }
    }

    let is_vector = matches!(cfg.instance, InstanceSpec::Vector { .. });
    let records = parallel_map_indexed(cfg.trials as usize, workers, |i| {
        let trial = i as u64;
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            if is_vector {
                vector_trial(cfg, vector_ctx.as_ref(), trial, &trial_budget)
            } else {
                matrix_trial(cfg, matrix_ctx.as_ref(), trial)
            }
        }));
        match outcome {
            Ok(Ok(eval)) => TrialRecord::from_eval(trial, eval),
            Ok(Err(e)) => TrialRecord::failed(trial, TrialStatus::Error, e.to_string()),
            Err(payload) => TrialRecord::failed(trial, TrialStatus::Panic, panic_text(payload)),
        }
    });

    let ok_trials = records
        .iter()
        .filter(|r| r.status == TrialStatus::Ok)
        .count() as u64;
    let error_trials = records
        .iter()
        .filter(|r| r.status == TrialStatus::Error)
        .count() as u64;
    let panic_trials = records
        .iter()
        .filter(|r| r.status == TrialStatus::Panic)
        .count() as u64;
    let violations = records.iter().filter(|r| r.violation).count() as u64;

    if ok_trials == 0 {
        // A campaign with zero successful trials is a failed command, not an
        // empty success; surface the first failure.
        let first = records
            .iter()
            .find_map(|r| r.message.clone())
            .unwrap_or_else(|| "no trials ran".to_string());
        return Err(Error::Argument(format!(
            "all {} trials failed; first failure: {first}",
            records.len()
        )));
    }

    let mut ratios: Vec<f64> = records
        .iter()
        .filter_map(|r| r.tightness_ratio)
        .filter(|v| v.is_finite())
        .collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tightness = if ratios.is_empty() {
        None
    } else {
        let q = |p: f64| ratios[((p * (ratios.len() - 1) as f64).round()) as usize];
        Some(TightnessQuantiles {
            count: ratios.len() as u64,
            min: ratios[0],
            p10: q(0.10),
            p50: q(0.50),
            p90: q(0.90),
            max: ratios[ratios.len() - 1],
        })
    };

    let errors: Vec<TrialErrorSummary> = records
        .iter()
        .filter(|r| r.status != TrialStatus::Ok)
        .take(20)
        .map(|r| TrialErrorSummary {
            trial: r.trial,
            message: r.message.clone().unwrap_or_default(),
        })
        .collect();

    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        config_sha256,
        trials: cfg.trials,
        ok_trials,
        error_trials,
        panic_trials,
        violations,
        tightness,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        workers,
        errors,
        config: cfg.clone(),
    };

    Ok(ExperimentOutcome { records, summary })
}

pub const CSV_HEADER: &str =
    "trial,status,actual_error,bound,ric_form,loose,tightness_ratio,sigma_mode,certified,violation";

fn push_opt_float(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        out.push_str(&format!("{v:.16e}"));
    }
}

fn mode_str(mode: CertificateMode) -> &'static str {
    match mode {
        CertificateMode::Exact => "exact",
        CertificateMode::Sampled => "sampled",
        CertificateMode::Probabilistic => "probabilistic",
        CertificateMode::AnalyticUpper => "analytic_upper",
    }
}

/// Render the campaign as CSV. Floats carry 17 significant digits so the
/// file round-trips bit-faithfully.
pub fn records_to_csv(records: &[TrialRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.trial.to_string());
        out.push(',');
        out.push_str(r.status.as_str());
        out.push(',');
        push_opt_float(&mut out, r.actual_error);
        out.push(',');
        push_opt_float(&mut out, r.bound);
        out.push(',');
        push_opt_float(&mut out, r.ric_form);
        out.push(',');
        push_opt_float(&mut out, r.loose);
        out.push(',');
        push_opt_float(&mut out, r.tightness_ratio);
        out.push(',');
        if let Some(mode) = r.sigma_mode {
            out.push_str(mode_str(mode));
        }
        out.push(',');
        if let Some(c) = r.certified {
            out.push_str(if c { "true" } else { "false" });
        }
        out.push(',');
        out.push_str(if r.violation { "true" } else { "false" });
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vector_config(trials: u64, noise: f64, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            instance: InstanceSpec::Vector {
                n: 10,
                m: 20,
                k: 2,
                noise_sigma: noise,
                ensemble: Ensemble::GaussianOneOverN,
                seed,
            },
            solver: SolverSpec::NullPerturb { scale: 0.1 },
            trials,
            shared_matrix: true,
            sigma_mode: SigmaMode::Exact,
            sigma_trials: 1000,
            operator_family: OperatorFamily::Ensemble,
            known_delta1: None,
            known_delta2r: None,
            defect_trials: 20,
            evaluate_ric_form: false,
            evaluate_loose: false,
            budget: None,
        }
    }

    #[test]
    fn noiseless_campaign_has_zero_violations_and_sound_tightness() {
        let cfg = vector_config(50, 0.0, 7);
        let outcome = run_experiment(&cfg, "cfg".into(), 1).unwrap();
        assert_eq!(outcome.summary.ok_trials, 50);
        assert_eq!(outcome.summary.violations, 0);
        let tightness = outcome.summary.tightness.unwrap();
        assert!(tightness.min >= 1.0 - 1e-9);
        assert!(tightness.min <= tightness.p50 && tightness.p50 <= tightness.max);
        for r in &outcome.records {
            assert_eq!(r.certified, Some(true));
            assert_eq!(r.sigma_mode, Some(CertificateMode::Exact));
        }
    }

    #[test]
    fn csv_is_identical_across_worker_counts() {
        let cfg = vector_config(24, 0.05, 11);
        let base = records_to_csv(&run_experiment(&cfg, "cfg".into(), 1).unwrap().records);
        for workers in [2usize, 4, 8] {
            let other =
                records_to_csv(&run_experiment(&cfg, "cfg".into(), workers).unwrap().records);
            assert_eq!(base, other, "CSV differs at {workers} workers");
        }
        assert!(base.starts_with(CSV_HEADER));
        // Spot-check the float format: 17 significant digits in e-notation.
        let second_line = base.lines().nth(1).unwrap();
        let field = second_line.split(',').nth(2).unwrap();
        assert!(field.contains('e') && field.contains('.'));
        assert_eq!(field.split(['.', 'e']).nth(1).unwrap().len(), 16);
    }

    #[test]
    fn shared_and_fresh_matrices_agree_on_trial_zero_matrix() {
        // Trial randomness is (mix_seed(seed, t), stream) in both paths; the
        // only difference is which matrix the trial sees.
        let mut cfg = vector_config(3, 0.0, 13);
        cfg.shared_matrix = false;
        let outcome = run_experiment(&cfg, "cfg".into(), 1).unwrap();
        assert_eq!(outcome.summary.ok_trials, 3);
        assert_eq!(outcome.summary.violations, 0);
    }

    #[test]
    fn sampled_sigma_marks_trials_uncertified() {
        let mut cfg = vector_config(10, 0.0, 17);
        cfg.sigma_mode = SigmaMode::Sampled;
        cfg.sigma_trials = 200;
        let outcome = run_experiment(&cfg, "cfg".into(), 1).unwrap();
        for r in &outcome.records {
            assert_eq!(r.certified, Some(false));
            assert_eq!(r.sigma_mode, Some(CertificateMode::Sampled));
            assert!(!r.violation, "uncertified trials never raise violations");
        }
    }

    #[test]
    fn ric_and_loose_columns_fill_on_unit_ensemble() {
        // k = 1 with near-orthogonal unit columns keeps the order-2 defect
        // below 1, so the defect restatement stays evaluable.
        let mut cfg = vector_config(8, 0.0, 19);
        cfg.instance = InstanceSpec::Vector {
            n: 12,
            m: 20,
            k: 1,
            noise_sigma: 0.0,
            ensemble: Ensemble::GaussianUnitColumns,
            seed: 19,
        };
        cfg.evaluate_ric_form = true;
        cfg.evaluate_loose = true;
        let outcome = run_experiment(&cfg, "cfg".into(), 2).unwrap();
        for r in &outcome.records {
            let bound = r.bound.unwrap();
            let ric = r.ric_form.unwrap();
            let loose = r.loose.unwrap();
            assert!(bound <= ric * (1.0 + 1e-12), "{bound} > ric {ric}");
            assert!(bound < loose, "{bound} !< loose {loose}");
        }
    }

    #[test]
    fn matrix_campaign_with_exact_isometry_is_certified_and_sound() {
        let cfg = ExperimentConfig {
            instance: InstanceSpec::Matrix {
                n1: 4,
                n2: 4,
                m: 16,
                r: 1,
                noise_sigma: 0.05,
                ensemble: Ensemble::GaussianOneOverN,
                seed: 23,
            },
            solver: SolverSpec::Svt {
                tau: 0.05,
                iters: 200,
            },
            trials: 12,
            shared_matrix: true,
            sigma_mode: SigmaMode::Exact,
            sigma_trials: 1000,
            operator_family: OperatorFamily::RotatedVectorization,
            known_delta1: None,
            known_delta2r: None,
            defect_trials: 20,
            evaluate_ric_form: false,
            evaluate_loose: false,
            budget: None,
        };
        let outcome = run_experiment(&cfg, "cfg".into(), 1).unwrap();
        assert_eq!(outcome.summary.ok_trials, 12);
        assert_eq!(outcome.summary.violations, 0);
        for r in &outcome.records {
            assert_eq!(r.certified, Some(true));
            assert_eq!(r.sigma_mode, Some(CertificateMode::Exact));
        }
    }

    #[test]
    fn invalid_configs_are_rejected_before_running() {
        let mut zero = vector_config(0, 0.0, 1);
        zero.trials = 0;
        assert!(zero.validate().is_err());

        let mut wrong_solver = vector_config(1, 0.0, 1);
        wrong_solver.solver = SolverSpec::Svt {
            tau: 0.1,
            iters: 10,
        };
        assert!(wrong_solver.validate().is_err());

        let mut tight = vector_config(1, 0.0, 1);
        tight.instance = InstanceSpec::Vector {
            n: 10,
            m: 20,
            k: 10,
            noise_sigma: 0.0,
            ensemble: Ensemble::GaussianOneOverN,
            seed: 1,
        };
        assert!(tight.validate().is_err());
    }

    #[test]
    fn config_json_round_trips_with_defaults() {
        let text = r#"{
            "instance": {"kind": "vector", "n": 10, "m": 20, "k": 2,
                         "noise_sigma": 0.0, "ensemble": "gaussian_1_over_n", "seed": 3},
            "solver": {"kind": "omp", "steps": 4},
            "trials": 5
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert!(cfg.shared_matrix);
        assert_eq!(cfg.sigma_mode, SigmaMode::Exact);
        assert_eq!(cfg.sigma_trials, 1000);
        let back = serde_json::to_string(&cfg).unwrap();
        let again: ExperimentConfig = serde_json::from_str(&back).unwrap();
        assert_eq!(again.trials, 5);

        let bad = r#"{"instance": {"kind": "vector", "n": 10, "m": 20, "k": 2,
                       "noise_sigma": 0.0, "ensemble": "gaussian_1_over_n", "seed": 3},
                      "solver": {"kind": "omp", "steps": 4},
                      "trials": 5, "unknown_knob": true}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(bad).is_err());
    }
}
