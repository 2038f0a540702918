//! `certbound`: certificates and certified recovery-error bounds from the
//! command line.
//!
//! Exit codes: 0 success, 1 input error (missing/unreadable/unparsable
//! files, bad flags), 2 enumeration budget exceeded, 3 domain/precondition
//! violations, 4 a certified bound was violated in an experiment.

use certbound_cli::{experiment, files, report};

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use certbound_core::bounds::matrix as mbounds;
use certbound_core::bounds::vector as vbounds;
use certbound_core::linalg;
use certbound_core::spectral::{
    self, EnumerationBudget, SpectralCertificate, SpectralQuantity, DEFAULT_MAX_SUBSETS,
};
use certbound_core::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use certbound_cli::report::SCHEMA_VERSION;

#[derive(Parser)]
#[command(
    name = "certbound",
    version,
    about = "Certified error bounds for sparse-vector and low-rank-matrix recovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a spectral certificate (restricted singular value, isometry
    /// defect, or spark) for a sensing matrix.
    Spectral(SpectralArgs),
    /// Evaluate the certified error bound for a concrete candidate.
    #[command(subcommand)]
    Certify(CertifyCommand),
    /// Run a Monte-Carlo validation campaign described by a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum CertifyCommand {
    /// Bound the l2 distance from a sparse ground truth.
    Vector(CertifyVectorArgs),
    /// Bound the Frobenius distance from a low-rank ground truth.
    Matrix(CertifyMatrixArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QuantityArg {
    /// Smallest singular value over all p-column submatrices.
    SigmaMin,
    /// Worst isometry defect over k-column submatrices.
    DeltaK,
    /// Smallest number of linearly dependent columns.
    Spark,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    /// Exhaustive enumeration; the certificate is exact.
    Exact,
    /// Random subset probes; over-estimates, not certified.
    Sampled,
    /// Closed-form tail bound for gaussian 1/n ensembles; holds with the
    /// reported failure probability.
    Gaussian,
}

impl QuantityArg {
    fn as_str(self) -> &'static str {
        match self {
            QuantityArg::SigmaMin => "sigma-min",
            QuantityArg::DeltaK => "delta-k",
            QuantityArg::Spark => "spark",
        }
    }
}

impl ModeArg {
    fn as_str(self) -> &'static str {
        match self {
            ModeArg::Exact => "exact",
            ModeArg::Sampled => "sampled",
            ModeArg::Gaussian => "gaussian",
        }
    }
}

#[derive(Args)]
struct SpectralArgs {
    /// Sensing matrix (CSV). Required for exact and sampled modes.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, value_enum)]
    quantity: QuantityArg,
    /// Column-subset size (sigma-min).
    #[arg(long)]
    p: Option<usize>,
    /// Support size (delta-k).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    /// Random probes for sampled mode.
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Max subsets exact enumeration may visit before refusing.
    #[arg(long, default_value_t = DEFAULT_MAX_SUBSETS)]
    budget: u64,
    /// Measurement count for the gaussian tail bound.
    #[arg(long)]
    n: Option<usize>,
    /// Deviation parameter for the gaussian tail bound.
    #[arg(long)]
    t: Option<f64>,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyVectorArgs {
    /// Sensing matrix A (n x m CSV, m > n).
    #[arg(long)]
    matrix: PathBuf,
    /// Candidate vector (length m CSV).
    #[arg(long)]
    candidate: PathBuf,
    /// Measurements (length n CSV). Omitted: the candidate is certified as
    /// exactly data-consistent, b := A x.
    #[arg(long)]
    b: Option<PathBuf>,
    /// Sparsity of the ground truth being compared against.
    #[arg(long)]
    k: usize,
    /// Noise-level bound on the true measurements.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Residual bound for the candidate; defaults to its measured residual.
    #[arg(long)]
    delta: Option<f64>,
    /// How to certify the restricted singular value.
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Deviation parameter when --mode gaussian.
    #[arg(long)]
    t: Option<f64>,
    /// Also evaluate the isometry-defect restatement (exact enumeration).
    #[arg(long)]
    ric: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_SUBSETS)]
    budget: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyMatrixArgs {
    /// Matricized operator (m x n1*n2 CSV, column-major vectorization).
    #[arg(long)]
    operator: PathBuf,
    /// Shape sidecar JSON {"n1":..,"n2":..,"m":..}; defaults to
    /// <operator>.meta.json.
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Candidate matrix (n1 x n2 CSV).
    #[arg(long)]
    candidate: PathBuf,
    /// Measurements (length m CSV). Omitted: b := A(X).
    #[arg(long)]
    b: Option<PathBuf>,
    /// Rank of the ground truth being compared against.
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long)]
    delta: Option<f64>,
    /// Known upper bound on the rank-one defect; certified as supplied.
    #[arg(long)]
    delta1: Option<f64>,
    /// Known upper bound on the order-2r defect; certified as supplied.
    #[arg(long)]
    delta2r: Option<f64>,
    /// Ascent restarts per probed defect when constants are not supplied.
    #[arg(long, default_value_t = 20)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Campaign description (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for trials.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(violations) if violations > 0 => {
            eprintln!("error: {violations} certified bound violation(s) recorded");
            ExitCode::from(4)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Budget { .. }) {
                eprintln!(
                    "hint: raise --budget, or use --mode sampled for an uncertified estimate"
                );
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Parse { .. } => 1,
        Error::Budget { .. } => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<u64> {
    match cli.command {
        Command::Spectral(args) => cmd_spectral(args).map(|()| 0),
        Command::Certify(CertifyCommand::Vector(args)) => cmd_certify_vector(args).map(|()| 0),
        Command::Certify(CertifyCommand::Matrix(args)) => cmd_certify_matrix(args).map(|()| 0),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("reports always serialize");
    println!("{text}");
    if let Some(path) = out {
        files::write_json(path, value)?;
    }
    Ok(())
}

fn cmd_spectral(args: SpectralArgs) -> Result<()> {
    let workers = files::workers_from_env()?;
    let mut inputs = Vec::new();

    let certificate = match args.mode {
        ModeArg::Gaussian => {
            if args.quantity != QuantityArg::SigmaMin {
                return Err(Error::Argument(
                    "the gaussian tail bound applies to sigma-min only".into(),
                ));
            }
            let n = args
                .n
                .ok_or_else(|| Error::Argument("--n is required for gaussian mode".into()))?;
            let p = args
                .p
                .ok_or_else(|| Error::Argument("--p is required for gaussian mode".into()))?;
            let t = args
                .t
                .ok_or_else(|| Error::Argument("--t is required for gaussian mode".into()))?;
            spectral::sigma_min_gaussian_probabilistic(n, p, t)?
        }
        ModeArg::Exact | ModeArg::Sampled => {
            let path = args.matrix.as_ref().ok_or_else(|| {
                Error::Argument("--matrix is required for exact and sampled modes".into())
            })?;
            inputs.push(files::digest("matrix", path)?);
            let a = files::read_matrix(path)?;
            let budget = EnumerationBudget {
                max_subsets: args.budget,
                worker_count: workers,
            };
            match (args.quantity, args.mode) {
                (QuantityArg::SigmaMin, ModeArg::Exact) => {
                    let p = args
                        .p
                        .ok_or_else(|| Error::Argument("--p is required for sigma-min".into()))?;
                    spectral::sigma_min_p_exact(&a, p, &budget)?
                }
                (QuantityArg::SigmaMin, ModeArg::Sampled) => {
                    let p = args
                        .p
                        .ok_or_else(|| Error::Argument("--p is required for sigma-min".into()))?;
                    spectral::sigma_min_p_sampled(&a, p, args.trials, args.seed)?
                }
                (QuantityArg::DeltaK, ModeArg::Exact) => {
                    let k = args
                        .k
                        .ok_or_else(|| Error::Argument("--k is required for delta-k".into()))?;
                    spectral::delta_k_vector_exact(&a, k, &budget)?
                }
                (QuantityArg::Spark, ModeArg::Exact) => spectral::spark(&a, &budget)?,
                (QuantityArg::DeltaK | QuantityArg::Spark, ModeArg::Sampled) => {
                    return Err(Error::Argument(
                        "sampled mode is available for sigma-min only".into(),
                    ));
                }
                (_, ModeArg::Gaussian) => unreachable!("handled above"),
            }
        }
    };

    let report = report::SpectralReport {
        schema_version: SCHEMA_VERSION,
        command: "spectral".into(),
        argv: report::argv(),
        inputs,
        params: report::SpectralParams {
            quantity: args.quantity.as_str().into(),
            mode: args.mode.as_str().into(),
            p: args.p,
            k: args.k,
            trials: (args.mode == ModeArg::Sampled).then_some(args.trials),
            seed: (args.mode == ModeArg::Sampled).then_some(args.seed),
            budget: (args.mode == ModeArg::Exact).then_some(args.budget),
            n: args.n,
            t: args.t,
        },
        certificate,
    };
    emit(&report, args.out.as_deref())
}

/// Residual bound actually used: the caller's --delta when it covers the
/// measured residual, otherwise the measured residual itself.
fn resolve_delta(measured: f64, claimed: Option<f64>) -> Result<f64> {
    match claimed {
        None => Ok(measured),
        Some(d) => {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Argument(format!(
                    "--delta must be finite and nonnegative, got {d}"
                )));
            }
            if d < measured * (1.0 - 1e-12) {
                return Err(Error::Precondition(format!(
                    "--delta {d} is below the candidate's measured residual {measured}; \
                     the bound would not cover the candidate"
                )));
            }
            Ok(d)
        }
    }
}

/// A candidate counts as exactly data-consistent (and gets the tighter
/// squared-form bound) when its residual is negligible next to b.
fn is_consistent(epsilon: f64, delta_used: f64, b_norm: f64) -> bool {
    epsilon == 0.0 && delta_used <= 1e-9 * b_norm.max(1.0)
}

fn cmd_certify_vector(args: CertifyVectorArgs) -> Result<()> {
    let workers = files::workers_from_env()?;
    let mut inputs = vec![
        files::digest("matrix", &args.matrix)?,
        files::digest("candidate", &args.candidate)?,
    ];
    let a = files::read_matrix(&args.matrix)?;
    let x = files::read_vector(&args.candidate)?;
    let b = match &args.b {
        Some(path) => {
            inputs.push(files::digest("b", path)?);
            files::read_vector(path)?
        }
        None => &a * &x,
    };

    let problem = vbounds::VectorProblem::new(a, b, args.epsilon)?;
    let cand = vbounds::VectorCandidate::new(&problem, x, args.k)?;
    let delta_used = resolve_delta(cand.delta_resid, args.delta)?;

    let budget = EnumerationBudget {
        max_subsets: args.budget,
        worker_count: workers,
    };
    let (n, m, k) = (problem.n(), problem.m(), args.k);
    let sigma = match args.mode {
        ModeArg::Exact => spectral::sigma_min_p_exact(&problem.a, 2 * k, &budget)?,
        ModeArg::Sampled => {
            spectral::sigma_min_p_sampled(&problem.a, 2 * k, args.trials, args.seed)?
        }
        ModeArg::Gaussian => {
            let t = args
                .t
                .ok_or_else(|| Error::Argument("--t is required for gaussian mode".into()))?;
            spectral::sigma_min_gaussian_probabilistic(n, 2 * k, t)?
        }
    };
    let max_col_norm = linalg::max_column_norm(&problem.a);
    let consistent = is_consistent(args.epsilon, delta_used, problem.b.norm());

    let mut rep = if consistent {
        vbounds::vector_bound_noiseless(m, k, cand.alpha, &sigma, max_col_norm)?
    } else {
        vbounds::vector_bound_noisy(
            m,
            k,
            cand.alpha,
            &sigma,
            max_col_norm,
            delta_used,
            args.epsilon,
        )?
    };

    let loose = if consistent {
        vbounds::loose_bound_noiseless(&problem.a, k, cand.alpha, &sigma)
    } else {
        vbounds::loose_bound_noisy(&problem.a, k, cand.alpha, &sigma, delta_used, args.epsilon)
    };
    match loose {
        Ok(v) => rep.baseline_loose = Some(v),
        Err(Error::Applicability(_)) => {}
        Err(e) => return Err(e),
    }

    if args.ric {
        let delta2k = spectral::delta_k_vector_exact(&problem.a, 2 * k, &budget)?;
        rep.ric_form = Some(if consistent {
            vbounds::ric_form_noiseless(m, k, cand.alpha, &delta2k, max_col_norm)?
        } else {
            vbounds::ric_form_noisy(
                m,
                k,
                cand.alpha,
                &delta2k,
                max_col_norm,
                delta_used,
                args.epsilon,
            )?
        });
    }

    let report = report::VectorCertifyReport {
        schema_version: SCHEMA_VERSION,
        command: "certify-vector".into(),
        argv: report::argv(),
        inputs,
        n,
        k,
        epsilon: args.epsilon,
        delta_resid_measured: cand.delta_resid,
        delta_used,
        sigma_mode: args.mode.as_str().into(),
        bound_below_loose: rep.baseline_loose.map(|l| rep.bound < l),
        report: rep,
    };
    emit(&report, args.out.as_deref())
}

fn cmd_certify_matrix(args: CertifyMatrixArgs) -> Result<()> {
    let meta_path = args.meta.clone().unwrap_or_else(|| {
        let mut os = args.operator.clone().into_os_string();
        os.push(".meta.json");
        PathBuf::from(os)
    });
    let mut inputs = vec![
        files::digest("operator", &args.operator)?,
        files::digest("meta", &meta_path)?,
        files::digest("candidate", &args.candidate)?,
    ];
    let (op, meta) = files::read_operator(&args.operator, &meta_path)?;
    let x = files::read_matrix(&args.candidate)?;
    let b = match &args.b {
        Some(path) => {
            inputs.push(files::digest("b", path)?);
            files::read_vector(path)?
        }
        None => op.apply(&x)?,
    };

    let cand = mbounds::MatrixCandidate::new(&op, &b, x, args.r)?;
    let delta_used = resolve_delta(cand.delta_resid, args.delta)?;
    let constants_supplied = args.delta1.is_some() || args.delta2r.is_some();

    let delta1 = match args.delta1 {
        Some(v) => SpectralCertificate::analytic_upper(SpectralQuantity::DeltaROperator, 1, v),
        None => spectral::delta_one_operator_upper(&op)?,
    };
    let delta2r = match args.delta2r {
        Some(v) => {
            SpectralCertificate::analytic_upper(SpectralQuantity::DeltaROperator, 2 * args.r, v)
        }
        None => spectral::delta_r_operator_estimate(&op, 2 * args.r, args.trials, args.seed)?,
    };

    let n = meta.n1.min(meta.n2);
    let consistent = is_consistent(args.epsilon, delta_used, b.norm());
    let mut rep = if consistent {
        mbounds::matrix_bound_noiseless(n, args.r, cand.alpha, &delta2r, &delta1)?
    } else {
        mbounds::matrix_bound_noisy(
            n,
            args.r,
            cand.alpha,
            &delta2r,
            &delta1,
            delta_used,
            args.epsilon,
        )?
    };
    if constants_supplied {
        rep.notes.push(
            "defect constants supplied by the caller; the certification is conditional on them"
                .into(),
        );
    }

    let report = report::MatrixCertifyReport {
        schema_version: SCHEMA_VERSION,
        command: "certify-matrix".into(),
        argv: report::argv(),
        inputs,
        n1: meta.n1,
        n2: meta.n2,
        m: meta.m,
        r: args.r,
        epsilon: args.epsilon,
        delta_resid_measured: cand.delta_resid,
        delta_used,
        constants_supplied,
        report: rep,
    };
    emit(&report, args.out.as_deref())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<u64> {
    let workers = files::workers_from_env()?;
    let config_digest = files::digest("config", &args.config)?;
    let cfg: experiment::ExperimentConfig = files::read_json(&args.config)?;
    let outcome = experiment::run_experiment(&cfg, config_digest.sha256, workers)?;

    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.clone(),
        source: e,
    })?;
    let csv_path = args.out.join("trials.csv");
    std::fs::write(&csv_path, experiment::records_to_csv(&outcome.records)).map_err(|e| {
        Error::Io {
            path: csv_path.clone(),
            source: e,
        }
    })?;
    files::write_json(&args.out.join("summary.json"), &outcome.summary)?;

    let text =
        serde_json::to_string_pretty(&outcome.summary).expect("summaries always serialize");
    println!("{text}");
    Ok(outcome.summary.violations)
}
