//! Deterministic end-to-end orchestration and report persistence.
//!
//! The runner turns one JSON-friendly [`ExperimentConfig`] into a resolved
//! [`ExperimentPlan`] (instance, discretization scales, tolerance, gradient
//! ladder), checks feasibility against the oracle's domain caps *before*
//! any work starts, and then drives the two-stage pipeline:
//!
//! 1. amplified Fourier-sampling period recovery per coordinate, inverted
//!    to the direction estimate `ŵ`;
//! 2. gradient descent on the squared loss for the harmonic weights `β̂`.
//!
//! Every random draw derives from the one root seed, so identical configs
//! produce byte-identical reports. Wall-clock time is recorded on the
//! report struct but deliberately excluded from serialization — it is the
//! one field that would break reproducibility; the command-line driver
//! prints it instead.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beta_learner::{
    fit_beta, theorem_radius, BetaError, GdConfig, LossTraceRow,
};
use crate::concepts::{
    make_instance, sample_beta_star, sample_w_star, ConceptError, ConceptInstance,
    DistributionKind, DistributionSpec,
};
use crate::discretizer::{DiscretizationParams, DiscretizerError, TruncationMode};
use crate::jsonfmt::{to_string_precise, write_json_atomic};
use crate::period_finder::{
    find_period_all, fourier_scale, min_sampling_radius, min_single_query_radius,
    nonuniform_thresholds, reconstruct_w, uniform_thresholds, verification_r_tilde,
    AmplificationOptions, AttemptRecord, PeriodError, PeriodFindingResult, PeriodVerifier,
    SamplingMode,
};
use crate::qsq_oracle::{Backend, NoiseMode, NoiseModel, OracleConfig, OracleError, QsqOracle};

/// Version stamp written into every report.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

// =======================================================================
// Errors
// =======================================================================

/// Errors from planning, running, or persisting an experiment.
#[derive(Debug, Error)]
pub enum RunnerError {
    /// The configuration is malformed or incomplete.
    #[error("configuration: {0}")]
    Config(String),
    /// The derived scales exceed a backend budget; reports the smallest
    /// violating quantity.
    #[error("infeasible: {quantity} = {value:.3e} exceeds budget {budget:.3e}")]
    Infeasible {
        /// Human-readable name of the violating quantity.
        quantity: String,
        /// The derived value.
        value: f64,
        /// The configured cap it exceeds.
        budget: f64,
    },
    /// Instance construction or sampling failed.
    #[error("instance stage: {0}")]
    Instance(#[from] ConceptError),
    /// Discretization-parameter derivation failed.
    #[error("discretization stage: {0}")]
    Discretize(#[from] DiscretizerError),
    /// Oracle construction or a query failed.
    #[error("oracle stage: {0}")]
    Oracle(#[from] OracleError),
    /// Period finding failed.
    #[error("period-finding stage: {0}")]
    PeriodFinding(#[from] PeriodError),
    /// Weight fitting failed.
    #[error("fit stage: {0}")]
    Fit(#[from] BetaError),
    /// Report persistence failed.
    #[error("report io: {0}")]
    Io(#[from] std::io::Error),
    /// Report table persistence failed.
    #[error("report io: {0}")]
    Csv(#[from] csv::Error),
    /// Report (de)serialization failed.
    #[error("report json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Convenience alias for runner results.
pub type RunnerResult<T> = Result<T, RunnerError>;

/// True when the error is a probabilistic failure (amplification or descent
/// ran out of budget) rather than a structural one; the command-line driver
/// maps these to a distinct exit code.
pub fn is_probabilistic_failure(err: &RunnerError) -> bool {
    matches!(
        err,
        RunnerError::PeriodFinding(PeriodError::AmplificationExhausted { .. })
            | RunnerError::Fit(BetaError::NonConvergence { .. })
    )
}

// =======================================================================
// Configuration
// =======================================================================

/// How the hidden instance is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    /// Explicit direction and weights (validated on resolution).
    Explicit {
        /// Hidden direction `w*`.
        w_star: Vec<f64>,
        /// Harmonic weights `β*`.
        beta_star: Vec<f64>,
    },
    /// Draw `w*` and `β*` deterministically from this seed.
    Seeded {
        /// Seed for the instance draw (independent of the run seed).
        instance_seed: u64,
    },
}

/// Input-distribution family; truncation radii are stage-derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionFamily {
    /// Uniform density over the truncated box.
    Uniform,
    /// Isotropic Gaussian with per-coordinate density standard deviation σ.
    Gaussian {
        /// Density standard deviation per coordinate.
        sigma: f64,
    },
}

impl DistributionFamily {
    /// True for the uniform family (selects the uniform guarantee
    /// constants).
    pub fn is_uniform(&self) -> bool {
        matches!(self, DistributionFamily::Uniform)
    }

    /// Materializes the family at dimension `d` and truncation `R`.
    ///
    /// The Gaussian amplitude profile is parameterized so that the squared
    /// density has standard deviation σ.
    pub fn spec(&self, d: usize, truncation_r: u64) -> RunnerResult<DistributionSpec> {
        let kind = match *self {
            DistributionFamily::Uniform => DistributionKind::Uniform,
            DistributionFamily::Gaussian { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(RunnerError::Config(format!(
                        "sigma = {sigma} must be positive and finite"
                    )));
                }
                DistributionKind::Gaussian {
                    sigma: vec![sigma * std::f64::consts::SQRT_2; d],
                }
            }
        };
        Ok(DistributionSpec::new(kind, d, truncation_r)?)
    }
}

/// Scale-parameter mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ParameterMode {
    /// Every scale derived from the guarantee formulas and the target
    /// accuracy.
    Theorem,
    /// Raw scales supplied directly; requires the `unsafe_params`
    /// acknowledgment and runs the self-calibrated verifier.
    Free {
        /// Argument scale `M₁`.
        #[serde(rename = "M1")]
        m1: u64,
        /// Output grid density `M₂`.
        #[serde(rename = "M2")]
        m2: u64,
        /// Truncation radius used for both sampling and verification.
        #[serde(rename = "R_tilde")]
        r_tilde: u64,
        /// Query tolerance τ.
        tau: f64,
    },
}

/// Noise injected into oracle responses (names match the CLI flag).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Responses exact; τ only budgets backend approximation.
    Zero,
    /// Seeded uniform perturbation within the tolerance.
    Random,
    /// Worst-case signed perturbation within the tolerance.
    Adversarial,
}

fn default_eta() -> f64 {
    0.5
}

fn default_constant() -> f64 {
    2.0
}

/// One experiment, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Input dimension.
    pub d: usize,
    /// Number of harmonics.
    #[serde(rename = "D")]
    pub cap_d: usize,
    /// Radius of the sphere carrying `w*`.
    #[serde(rename = "R_w")]
    pub r_w: f64,
    /// Hidden-instance source.
    pub instance: InstanceSpec,
    /// Input-distribution family.
    pub dist: DistributionFamily,
    /// Parameter mode (guarantee-derived or raw).
    pub mode: ParameterMode,
    /// Oracle noise kind.
    pub noise: NoiseKind,
    /// Target loss ε.
    pub eps: f64,
    /// Failure budget δ for period finding.
    pub delta: f64,
    /// Gradient-descent step size η (default ½).
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Trials to run (each with a seed derived from the root).
    pub trials: u64,
    /// Root seed.
    pub seed: u64,
    /// Verification-query backend.
    pub backend: Backend,
    /// Fourier samples per amplification attempt.
    pub sampling: SamplingMode,
    /// Amplification budget constant `C`.
    #[serde(default = "default_constant")]
    pub amplification_constant: f64,
    /// Optional hard cap on amplification attempts.
    #[serde(default)]
    pub max_attempts: Option<u64>,
    /// Acknowledgment required by free mode.
    #[serde(default)]
    pub unsafe_params: bool,
}

// =======================================================================
// Planning and feasibility
// =======================================================================

/// A fully resolved experiment: the instance plus every derived scale.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    /// Validated hidden instance.
    pub instance: ConceptInstance,
    /// Fourier-sampling discretization (radius mode).
    pub sampling_params: DiscretizationParams,
    /// Verification discretization (per-`M₁ₘ` half-width mode).
    pub verification_params: DiscretizationParams,
    /// Query tolerance τ (at the guarantee bound in theorem mode).
    pub tau: f64,
    /// Direction accuracy `ε₁` the period stage guarantees.
    pub eps1: f64,
    /// Gradient-descent configuration.
    pub gd: GdConfig,
    /// Truncation radius for the gradient stage.
    pub gd_radius: u64,
    /// The scale `A = M₁d²/R_w`.
    pub scale_a: f64,
}

/// Resolves the hidden instance from its spec.
pub fn resolve_instance(config: &ExperimentConfig) -> RunnerResult<ConceptInstance> {
    match &config.instance {
        InstanceSpec::Explicit { w_star, beta_star } => Ok(make_instance(
            config.d,
            config.r_w,
            config.cap_d,
            w_star.clone(),
            beta_star.clone(),
        )?),
        InstanceSpec::Seeded { instance_seed } => {
            let w_star = sample_w_star(config.d, config.r_w, *instance_seed)?;
            let beta_star = sample_beta_star(config.cap_d, instance_seed.wrapping_add(1))?;
            Ok(make_instance(config.d, config.r_w, config.cap_d, w_star, beta_star)?)
        }
    }
}

/// Worst-case query budget of the guarantee,
/// `dD·ln(1/δ)·ln⁵(A)` with `A = M₁d²/R_w`.
pub fn query_budget_formula(d: usize, cap_d: usize, delta: f64, scale_a: f64) -> f64 {
    let ln_a = scale_a.ln().max(1.0);
    let ln_delta = (1.0 / delta).ln().max(1.0);
    d as f64 * cap_d as f64 * ln_delta * ln_a.powi(5)
}

/// Derives the full plan and checks it against the oracle budgets.
///
/// Theorem mode derives `ε₁`, `M₁`, `M₂`, τ, and all radii from the
/// guarantee formulas; free mode wraps the supplied scales (after the
/// `unsafe_params` acknowledgment) and reports the accuracy `ε₁ = R_w²/M₁`
/// they imply. Feasibility violations name the smallest offending quantity
/// rather than failing deep inside a backend.
pub fn plan_experiment(config: &ExperimentConfig) -> RunnerResult<ExperimentPlan> {
    validate_config(config)?;
    let instance = resolve_instance(config)?;
    let (d, cap_d, r_w) = (config.d, config.cap_d, config.r_w);

    let plan = match config.mode {
        ParameterMode::Theorem => {
            let gd = GdConfig::theorem(config.eta, d, cap_d, r_w, config.eps)
                .map_err(|e| RunnerError::Config(e.to_string()))?;
            let uniform = config.dist.is_uniform();
            // M₁/M₂ do not depend on the radius; derive them first with a
            // placeholder, then rebuild with the stage radii.
            let provisional = DiscretizationParams::theorem(
                d,
                cap_d,
                r_w,
                gd.eps1,
                uniform,
                1,
                1,
                TruncationMode::FourierSampling,
            )?;
            let thresholds = if uniform {
                uniform_thresholds(provisional.m1, provisional.m2, cap_d, r_w)
            } else {
                nonuniform_thresholds(provisional.m1, provisional.m2, cap_d, r_w)
            };
            let tau = thresholds.tau_bound;
            if !(tau > 0.0) {
                return Err(RunnerError::Infeasible {
                    quantity: "verification tolerance tau".into(),
                    value: tau,
                    budget: 0.0,
                });
            }
            let min_radius = match config.sampling {
                SamplingMode::PairQuery => min_sampling_radius(provisional.m1, d, r_w, tau),
                SamplingMode::SingleQuery => {
                    min_single_query_radius(provisional.m1, d, r_w, tau)
                }
            };
            if !(min_radius < 9.0e15) {
                return Err(RunnerError::Infeasible {
                    quantity: "sampling radius R".into(),
                    value: min_radius,
                    budget: 9.0e15,
                });
            }
            let sampling_params = DiscretizationParams::theorem(
                d,
                cap_d,
                r_w,
                gd.eps1,
                uniform,
                min_radius.ceil() as u64,
                1,
                TruncationMode::FourierSampling,
            )?;
            let verification_params = DiscretizationParams::theorem(
                d,
                cap_d,
                r_w,
                gd.eps1,
                uniform,
                verification_r_tilde(d, cap_d, r_w),
                1,
                TruncationMode::Verification,
            )?;
            let gd_radius = theorem_radius(config.eta, d, cap_d, r_w, config.eps).ceil();
            if !(gd_radius < 9.0e15) {
                return Err(RunnerError::Infeasible {
                    quantity: "gradient-stage radius".into(),
                    value: gd_radius,
                    budget: 9.0e15,
                });
            }
            ExperimentPlan {
                scale_a: fourier_scale(sampling_params.m1, d, r_w),
                instance,
                sampling_params,
                verification_params,
                tau,
                eps1: gd.eps1,
                gd,
                gd_radius: gd_radius as u64,
            }
        }
        ParameterMode::Free { m1, m2, r_tilde, tau } => {
            if !config.unsafe_params {
                return Err(RunnerError::Config(
                    "free parameter mode requires the unsafe_params acknowledgment".into(),
                ));
            }
            if !(tau >= 0.0 && tau.is_finite()) {
                return Err(RunnerError::Config(format!(
                    "tau = {tau} must be nonnegative and finite"
                )));
            }
            let eps1 = r_w * r_w / m1 as f64;
            let eps3 = config.eps.sqrt();
            let eps2 = crate::beta_learner::required_eps2(config.eta, cap_d, eps3);
            let gd_radius =
                crate::beta_learner::gradient_accuracy_radius(cap_d, d, r_w, eps2).ceil();
            let gd = GdConfig::free(config.eta, 10_000, config.eps, eps1, eps2, eps3)
                .map_err(|e| RunnerError::Config(e.to_string()))?;
            let sampling_params = DiscretizationParams::free(
                m1,
                m2,
                r_tilde,
                1,
                TruncationMode::FourierSampling,
            )?;
            let verification_params =
                DiscretizationParams::free(m1, m2, r_tilde, 1, TruncationMode::Verification)?;
            ExperimentPlan {
                scale_a: fourier_scale(m1, d, r_w),
                instance,
                sampling_params,
                verification_params,
                tau,
                eps1,
                gd,
                gd_radius: gd_radius as u64,
            }
        }
    };
    check_feasibility(config, &plan, &OracleConfig::default())?;
    Ok(plan)
}

fn validate_config(config: &ExperimentConfig) -> RunnerResult<()> {
    if config.d == 0 || config.cap_d == 0 {
        return Err(RunnerError::Config("d and D must be positive".into()));
    }
    if !(config.r_w > 0.0 && config.r_w.is_finite()) {
        return Err(RunnerError::Config(format!(
            "R_w = {} must be positive and finite",
            config.r_w
        )));
    }
    for (name, v) in [("eps", config.eps), ("delta", config.delta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(RunnerError::Config(format!("{name} = {v} must lie in (0, 1)")));
        }
    }
    if !(config.eta > 0.0 && config.eta < 1.0) {
        return Err(RunnerError::Config(format!("eta = {} must lie in (0, 1)", config.eta)));
    }
    if !(config.amplification_constant > 0.0) {
        return Err(RunnerError::Config("amplification constant must be positive".into()));
    }
    Ok(())
}

/// Checks a resolved plan against the oracle's static domain caps.
///
/// The per-query cost model is exactly the set of backend caps: the Fourier
/// dimension `q = 2R` against the structured sampler, the verification
/// point count against the brute backend (when selected), and the analytic
/// exponential-sum length for non-uniform distributions. Attempt budgets
/// are logarithmic in `A` and never dominate.
pub fn check_feasibility(
    config: &ExperimentConfig,
    plan: &ExperimentPlan,
    oracle_config: &OracleConfig,
) -> RunnerResult<()> {
    // Mirror the sampler's engine dispatch: small q runs the grouped DFT
    // (work-capped by q times the output-level count), larger q runs the
    // structured sampler, which only covers the uniform distribution.
    let q = 2.0 * plan.sampling_params.radius()? as f64;
    if q <= oracle_config.grouped_q_cap as f64 {
        let levels = (2.0 * plan.sampling_params.m2 as f64 + 1.0).min(q);
        let work = q * levels;
        if work > oracle_config.grouped_work_cap as f64 {
            return Err(RunnerError::Infeasible {
                quantity: "grouped-sampler work q·levels".into(),
                value: work,
                budget: oracle_config.grouped_work_cap as f64,
            });
        }
    } else if config.dist.is_uniform() {
        if q > oracle_config.structured_q_cap as f64 {
            return Err(RunnerError::Infeasible {
                quantity: "fourier dimension q".into(),
                value: q,
                budget: oracle_config.structured_q_cap as f64,
            });
        }
    } else {
        return Err(RunnerError::Infeasible {
            quantity: "fourier dimension q (non-uniform sampling)".into(),
            value: q,
            budget: oracle_config.grouped_q_cap as f64,
        });
    }
    // Verification queries go up to harmonic m = D; the brute backend
    // enumerates the full d-dimensional lattice at the widest radius.
    let max_m1m = plan.verification_params.m1 as f64
        * plan.verification_params.harmonic_index as f64
        * config.cap_d as f64;
    let verify_width = 2.0 * plan.verification_params.r_tilde as f64 * max_m1m + 1.0;
    match config.backend {
        Backend::Brute => {
            let points = verify_width.powi(config.d as i32);
            if points > oracle_config.brute_point_cap as f64 {
                return Err(RunnerError::Infeasible {
                    quantity: "brute-force verification points".into(),
                    value: points,
                    budget: oracle_config.brute_point_cap as f64,
                });
            }
        }
        Backend::Analytic => {
            if !config.dist.is_uniform() && verify_width > oracle_config.analytic_sum_cap as f64 {
                return Err(RunnerError::Infeasible {
                    quantity: "analytic exponential-sum length".into(),
                    value: verify_width,
                    budget: oracle_config.analytic_sum_cap as f64,
                });
            }
        }
    }
    if plan.gd_radius as f64 >= 9.0e15 {
        return Err(RunnerError::Infeasible {
            quantity: "gradient-stage radius".into(),
            value: plan.gd_radius as f64,
            budget: 9.0e15,
        });
    }
    Ok(())
}

// =======================================================================
// Pipeline
// =======================================================================

/// Master report of one end-to-end run.
///
/// `wall_time_ms` is intentionally skipped during serialization so that
/// identical configs and seeds produce byte-identical report files; the
/// command-line driver surfaces timing separately.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnReport {
    /// Report schema version.
    pub schema_version: u32,
    /// Input dimension.
    pub d: usize,
    /// Number of harmonics.
    #[serde(rename = "D")]
    pub cap_d: usize,
    /// Sphere radius.
    #[serde(rename = "R_w")]
    pub r_w: f64,
    /// Root seed of this run.
    pub seed: u64,
    /// True when every scale came from the guarantee formulas.
    pub theorem_mode: bool,
    /// Argument scale.
    #[serde(rename = "M1")]
    pub m1: u64,
    /// Output grid density.
    #[serde(rename = "M2")]
    pub m2: u64,
    /// Verification truncation multiplier.
    #[serde(rename = "R_tilde")]
    pub r_tilde: u64,
    /// Fourier-sampling truncation radius.
    pub sampling_radius: u64,
    /// Gradient-stage truncation radius.
    pub gd_radius: u64,
    /// Query tolerance.
    pub tau: f64,
    /// Target loss.
    pub eps: f64,
    /// Direction accuracy guaranteed by the period stage.
    pub eps1: f64,
    /// Period-finding failure budget.
    pub delta: f64,
    /// Hidden direction (desk-scale simulator: the truth is known).
    pub w_star: Vec<f64>,
    /// Hidden weights.
    pub beta_star: Vec<f64>,
    /// Recovered direction.
    pub w_hat: Vec<f64>,
    /// Recovered weights.
    pub beta_hat: Vec<f64>,
    /// `‖ŵ − w*‖∞`.
    pub w_inf_error: f64,
    /// Loss at the returned weights.
    pub final_loss: f64,
    /// True when `‖ŵ − w*‖∞ ≤ ε₁` and `final_loss ≤ ε`.
    pub success: bool,
    /// Total QSQs issued (Fourier plus shift-correlation), from the
    /// oracles' own counters.
    pub qsq_count: u64,
    /// Fourier-sampling queries.
    pub qsq_fourier: u64,
    /// Shift-correlation queries.
    pub qsq_shift: u64,
    /// The guarantee's worst-case budget `dD·ln(1/δ)·ln⁵(M₁d²/R_w)`.
    pub query_budget_formula: f64,
    /// Gradient steps taken.
    pub gd_iterations: u64,
    /// Per-coordinate period outcomes.
    pub periods: Vec<PeriodFindingResult>,
    /// Full amplification attempt trace.
    pub attempts: Vec<AttemptRecord>,
    /// Per-iteration descent trace.
    pub loss_trace: Vec<LossTraceRow>,
    /// Wall-clock duration (not serialized; see type-level note).
    #[serde(skip)]
    pub wall_time_ms: u64,
}

fn noise_model(kind: NoiseKind, tau: f64, seed: u64) -> NoiseModel {
    match kind {
        NoiseKind::Zero => NoiseModel::exact(tau),
        NoiseKind::Random => NoiseModel::uniform(tau, seed),
        NoiseKind::Adversarial => {
            NoiseModel { tau, mode: NoiseMode::AdversarialSign, seed }
        }
    }
}

/// Runs the full pipeline once under `config.seed`.
///
/// The feasibility pre-check runs before any oracle is built; stage
/// failures propagate with their stage tag. Period verification uses the
/// guaranteed threshold test in theorem mode and the self-calibrated
/// two-query test in free mode (whose desk-scale parameters the thresholds
/// do not cover).
pub fn run_end_to_end(config: &ExperimentConfig) -> RunnerResult<LearnReport> {
    let started = Instant::now();
    let plan = plan_experiment(config)?;
    let noise = noise_model(config.noise, plan.tau, config.seed);

    let sampler = QsqOracle::new(
        plan.instance.clone(),
        config.dist.spec(config.d, plan.sampling_params.radius()?)?,
        plan.sampling_params,
        noise,
    )?;
    let verifier = QsqOracle::new(
        plan.instance.clone(),
        config.dist.spec(config.d, plan.verification_params.radius()?)?,
        plan.verification_params,
        noise,
    )?;

    let opts = AmplificationOptions {
        constant: config.amplification_constant,
        max_attempts: config.max_attempts,
        verifier: match config.mode {
            ParameterMode::Theorem => PeriodVerifier::Threshold,
            ParameterMode::Free { .. } => PeriodVerifier::ExactPeriodicity,
        },
        backend: config.backend,
        sampling: config.sampling,
    };
    let (periods, attempts) =
        find_period_all(&sampler, &verifier, config.delta, &opts, config.seed)?;
    let w_hat = reconstruct_w(&periods, config.d, plan.sampling_params.m1)?;

    let gd_dist = config.dist.spec(config.d, plan.gd_radius)?;
    let outcome = fit_beta(&plan.instance, &w_hat, &gd_dist, &plan.gd)?;

    let w_inf_error = w_hat
        .iter()
        .zip(&plan.instance.w_star)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    let final_loss = outcome.trace.last().map(|row| row.loss).unwrap_or(f64::NAN);
    let sampler_counts = sampler.query_counts();
    let verifier_counts = verifier.query_counts();
    let qsq_fourier = sampler_counts.fourier + verifier_counts.fourier;
    let qsq_shift = sampler_counts.shift + verifier_counts.shift;

    Ok(LearnReport {
        schema_version: REPORT_SCHEMA_VERSION,
        d: config.d,
        cap_d: config.cap_d,
        r_w: config.r_w,
        seed: config.seed,
        theorem_mode: matches!(config.mode, ParameterMode::Theorem),
        m1: plan.sampling_params.m1,
        m2: plan.sampling_params.m2,
        r_tilde: plan.verification_params.r_tilde,
        sampling_radius: plan.sampling_params.radius()?,
        gd_radius: plan.gd_radius,
        tau: plan.tau,
        eps: config.eps,
        eps1: plan.eps1,
        delta: config.delta,
        w_star: plan.instance.w_star.clone(),
        beta_star: plan.instance.beta_star.clone(),
        w_inf_error,
        success: w_inf_error <= plan.eps1 && final_loss <= config.eps,
        w_hat,
        beta_hat: outcome.beta_hat,
        final_loss,
        qsq_count: qsq_fourier + qsq_shift,
        qsq_fourier,
        qsq_shift,
        query_budget_formula: query_budget_formula(
            config.d,
            config.cap_d,
            config.delta,
            plan.scale_a,
        ),
        gd_iterations: outcome.iterations,
        periods,
        attempts,
        loss_trace: outcome.trace,
        wall_time_ms: started.elapsed().as_millis() as u64,
    })
}

/// Runs `config.trials` independent trials in a worker pool.
///
/// Trial `t` reruns the pipeline with seed `seed + t`; results come back in
/// trial order. The first structural error aborts the batch; probabilistic
/// failures are returned per-trial so the caller can count successes.
pub fn run_trials(config: &ExperimentConfig) -> Vec<RunnerResult<LearnReport>> {
    (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let mut trial_config = config.clone();
            trial_config.seed = config.seed.wrapping_add(t);
            run_end_to_end(&trial_config)
        })
        .collect()
}

// =======================================================================
// Persistence
// =======================================================================

/// Flattened amplification attempt for the CSV table (candidate lists are
/// joined with `|`).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct AttemptCsvRow {
    coordinate: usize,
    attempt: u64,
    alpha: u64,
    beta: String,
    candidates: String,
    qsq_count: u64,
    accepted: String,
}

impl From<&AttemptRecord> for AttemptCsvRow {
    fn from(record: &AttemptRecord) -> Self {
        AttemptCsvRow {
            coordinate: record.coordinate,
            attempt: record.attempt,
            alpha: record.alpha,
            beta: record.beta.map(|b| b.to_string()).unwrap_or_default(),
            candidates: record
                .candidates
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join("|"),
            qsq_count: record.qsq_count,
            accepted: record.accepted.map(|a| a.to_string()).unwrap_or_default(),
        }
    }
}

/// Writes the master report and its tables into `out_dir`.
///
/// Files (schema fixed, columns in declaration order):
/// - `report.json` — the [`LearnReport`], floats at 17 significant digits;
/// - `loss_trace.csv` — `iteration,loss,beta_error`;
/// - `period_attempts.csv` —
///   `coordinate,attempt,alpha,beta,candidates,qsq_count,accepted`.
///
/// Returns the paths written. Empty traces produce header-only tables.
pub fn emit_report(report: &LearnReport, out_dir: &Path) -> RunnerResult<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let report_path = out_dir.join("report.json");
    write_json_atomic(&report_path, report)?;
    written.push(report_path);

    let loss_path = out_dir.join("loss_trace.csv");
    let mut writer = csv::Writer::from_path(&loss_path)?;
    for row in &report.loss_trace {
        writer.serialize(row)?;
    }
    // Header-only files still need the schema line.
    if report.loss_trace.is_empty() {
        writer.write_record(["iteration", "loss", "beta_error"])?;
    }
    writer.flush().map_err(csv::Error::from)?;
    written.push(loss_path);

    let attempts_path = out_dir.join("period_attempts.csv");
    let mut writer = csv::Writer::from_path(&attempts_path)?;
    for record in &report.attempts {
        writer.serialize(AttemptCsvRow::from(record))?;
    }
    if report.attempts.is_empty() {
        writer.write_record([
            "coordinate",
            "attempt",
            "alpha",
            "beta",
            "candidates",
            "qsq_count",
            "accepted",
        ])?;
    }
    writer.flush().map_err(csv::Error::from)?;
    written.push(attempts_path);

    Ok(written)
}

/// Parses a previously emitted `report.json`.
pub fn read_report(path: &Path) -> RunnerResult<LearnReport> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Serializes a report to its canonical (deterministic) JSON text.
pub fn report_to_json(report: &LearnReport) -> RunnerResult<String> {
    Ok(to_string_precise(report)?)
}

// =======================================================================
// Tests
// =======================================================================
