//! Period recovery from Fourier-sampling QSQs, coordinate by coordinate.
//!
//! The learner draws outcomes of the QFT measurement on one coordinate,
//! expands them into continued-fraction convergents, turns the convergents
//! into candidate periods, and verifies candidates with shift-correlation
//! QSQs. Failed rounds are retried up to an amplification budget; accepted
//! candidates `a ≈ M₁/w*_j` invert to the hidden direction via
//! `ŵ_j = M₁/a_j`.
//!
//! Two sampling modes are available. [`SamplingMode::PairQuery`] draws two
//! samples per attempt and expands their ratio `α/β`, which handles
//! non-integer periods (the denominator `q` of the measured frequency never
//! divides the period exactly, so candidates come from both roundings of
//! `b·q/α`). [`SamplingMode::SingleQuery`] draws one sample per attempt and
//! expands `α/q` directly; it is the cheaper path for exactly periodic
//! targets (every `M₁/w*_j` an integer), works under a weaker truncation
//! precondition, and recovers the period with constant probability from a
//! single query per coordinate.
//!
//! Two verifiers are available: [`PeriodVerifier::Threshold`] implements the
//! `D`-query acceptance test whose constants come with a correctness
//! guarantee at theorem-scale parameters, and
//! [`PeriodVerifier::ExactPeriodicity`] is a two-query self-calibrated test
//! for desk-scale demonstrations where those constants are vacuous.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{audit_assumptions, DistributionKind};
use crate::discretizer::TruncationMode;
use crate::qsq_oracle::{Backend, OracleError, QsqOracle};

// =======================================================================
// Errors
// =======================================================================

/// Errors from period finding and verification.
#[derive(Debug, Error)]
pub enum PeriodError {
    /// Continued fractions of `b/0` are undefined.
    #[error("continued fraction denominator is zero")]
    ZeroDenominator,
    /// The oracle tolerance exceeds the verification precondition.
    #[error("tolerance τ = {tau:.6e} exceeds the verification bound {bound:.6e}")]
    ToleranceTooLarge {
        /// The oracle's additive tolerance.
        tau: f64,
        /// The largest admissible tolerance for this parameter set.
        bound: f64,
    },
    /// The input distribution failed its assumption audit.
    #[error("distribution failed the assumption audit: {0}")]
    AssumptionAuditFailed(String),
    /// No candidate was accepted within the amplification budget.
    #[error("coordinate {coordinate}: no candidate accepted in {attempts} attempts")]
    AmplificationExhausted {
        /// Coordinate that failed.
        coordinate: usize,
        /// Number of attempts consumed.
        attempts: u64,
        /// Full per-attempt trace for postmortems.
        trace: Vec<AttemptRecord>,
    },
    /// Reconstruction was asked for a coordinate with no accepted result.
    #[error("coordinate {0} has no accepted period-finding result")]
    MissingCoordinate(usize),
    /// Parameters violate a stage precondition.
    #[error("infeasible period-finding parameters: {0}")]
    Infeasible(String),
    /// An oracle query failed.
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Result alias for this module.
pub type PeriodResult<T> = Result<T, PeriodError>;

// =======================================================================
// Continued fractions
// =======================================================================

/// One convergent `numerator/denominator` of a continued-fraction expansion.
///
/// Numerator and denominator are coprime; denominators never decrease with
/// `index` and increase strictly from the second step onward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Convergent {
    /// Convergent numerator `b_i`.
    pub numerator: BigUint,
    /// Convergent denominator `c_i`.
    pub denominator: BigUint,
    /// Position in the expansion, starting at 0.
    pub index: usize,
}

/// All continued-fraction convergents of `b/c`, via Euclid's algorithm.
///
/// Requires `c > 0`; `b = 0` yields the single convergent `0/1`.
pub fn continued_fraction_convergents(b: &BigUint, c: &BigUint) -> PeriodResult<Vec<Convergent>> {
    if c.is_zero() {
        return Err(PeriodError::ZeroDenominator);
    }
    let mut quotients: Vec<BigUint> = Vec::new();
    let mut num = b.clone();
    let mut den = c.clone();
    while !den.is_zero() {
        quotients.push(&num / &den);
        let rem = num % &den;
        num = den;
        den = rem;
    }
    // Wallis recurrence: p_k = a_k p_{k-1} + p_{k-2}, q_k likewise.
    let mut out = Vec::with_capacity(quotients.len());
    let (mut p_prev2, mut p_prev1) = (BigUint::zero(), BigUint::from(1u32));
    let (mut q_prev2, mut q_prev1) = (BigUint::from(1u32), BigUint::zero());
    for (index, a) in quotients.iter().enumerate() {
        let p = a * &p_prev1 + &p_prev2;
        let q = a * &q_prev1 + &q_prev2;
        out.push(Convergent { numerator: p.clone(), denominator: q.clone(), index });
        p_prev2 = std::mem::replace(&mut p_prev1, p);
        q_prev2 = std::mem::replace(&mut q_prev1, q);
    }
    Ok(out)
}

/// Candidate periods from a convergent list: for each convergent numerator
/// `b_i`, both `⌊b_i·q/alpha⌋` and `⌈b_i·q/alpha⌉`, deduplicated, kept inside
/// `[1, domain_radius]`, ascending.
///
/// `alpha` must be positive.
pub fn candidate_periods(
    convergents: &[Convergent],
    alpha: u64,
    q: u64,
    domain_radius: u64,
) -> Vec<u64> {
    assert!(alpha > 0, "candidate generation requires a positive sample");
    let q_big = BigUint::from(q);
    let alpha_big = BigUint::from(alpha);
    let mut seen: BTreeSet<u64> = BTreeSet::new();
    for conv in convergents {
        let prod = &conv.numerator * &q_big;
        let floor = &prod / &alpha_big;
        let exact = (&prod % &alpha_big).is_zero();
        let mut push = |t: &BigUint| {
            if let Some(v) = t.to_u64() {
                if v >= 1 && v <= domain_radius {
                    seen.insert(v);
                }
            }
        };
        push(&floor);
        if !exact {
            push(&(floor + 1u32));
        }
    }
    seen.into_iter().collect()
}

/// Candidate periods for single-query mode: the convergent denominators of
/// `α/q`, deduplicated, ascending, restricted to `[1, period_cap]`.
///
/// When the sample sits on a peak `α = kq/S` the reduced fraction `k'/S'`
/// with `S' = S/gcd(k, S)` is the final convergent, so the true period
/// itself appears whenever `gcd(k, S) = 1` — a constant fraction of peaks.
pub fn candidate_periods_single(convergents: &[Convergent], period_cap: u64) -> Vec<u64> {
    let mut seen: BTreeSet<u64> = BTreeSet::new();
    for conv in convergents {
        if let Some(c) = conv.denominator.to_u64() {
            if c >= 1 && c <= period_cap {
                seen.insert(c);
            }
        }
    }
    seen.into_iter().collect()
}

// =======================================================================
// Verification thresholds
// =======================================================================

/// Acceptance thresholds for the shift-correlation verification test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationThresholds {
    /// Largest admissible query tolerance τ.
    pub tau_bound: f64,
    /// Acceptance floor on the first-harmonic response α₁.
    pub alpha1_min: f64,
    /// Acceptance cap on Σₘ αₘ over harmonics m = 1…D.
    pub sum_max: f64,
}

/// Shared second-arm core `u − (1/8)(2πR_w/M₁)² + v·D²/M₂` of the threshold
/// formulas.
fn second_arm_core(m1: f64, m2: f64, dd: f64, r_w: f64, u: f64, v: f64) -> f64 {
    let t = 2.0 * std::f64::consts::PI * r_w / m1;
    u - t * t / 8.0 + v * dd * dd / m2
}

/// Thresholds for the uniform-distribution verifier.
///
/// All three quantities live on the response scale of the observable (which
/// carries a `1/M₂²` prefactor) and use the base `M₁, M₂` — harmonic queries
/// scale the discretization internally but the test is stated at `m = 1`.
pub fn uniform_thresholds(m1: u64, m2: u64, cap_d: usize, r_w: f64) -> VerificationThresholds {
    let m1 = m1 as f64;
    let m2 = m2 as f64;
    let dd = cap_d as f64;
    let m2sq = m2 * m2;
    let core = second_arm_core(m1, m2, dd, r_w, 2.0 / 15.0, 2.0);
    VerificationThresholds {
        tau_bound: ((7.0 / (40.0 * dd) - 1.0 / m2) / m2sq)
            .min(core / (2.0 * dd * dd * m2sq)),
        alpha1_min: (21.0 / (40.0 * dd) - 3.0 / m2) / m2sq,
        sum_max: ((20.0 / 39.0) * dd + core / (2.0 * dd)) / m2sq,
    }
}

/// Thresholds for the non-uniform verifier (flat product distributions that
/// pass the assumption audit).
///
/// The first-harmonic floor uses the `D`-dependent constant `5/(14D)` whose
/// derivation carries the guarantee; see the module's acceptance tests.
pub fn nonuniform_thresholds(m1: u64, m2: u64, cap_d: usize, r_w: f64) -> VerificationThresholds {
    let m1 = m1 as f64;
    let m2 = m2 as f64;
    let dd = cap_d as f64;
    let m2sq = m2 * m2;
    let core = second_arm_core(m1, m2, dd, r_w, 2.0 / 9.0, 3.0);
    VerificationThresholds {
        tau_bound: ((5.0 / (42.0 * dd) - 3.0 / (2.0 * m2)) / m2sq)
            .min(core / (2.0 * dd * dd * m2sq)),
        alpha1_min: (5.0 / (14.0 * dd) - 9.0 / (2.0 * m2)) / m2sq,
        sum_max: ((13.0 / 25.0) * dd + core / (2.0 * dd)) / m2sq,
    }
}

/// Detailed outcome of one verification run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationOutcome {
    /// Whether both acceptance conditions held.
    pub accepted: bool,
    /// The D shift-correlation responses α₁…α_D.
    pub alphas: Vec<f64>,
    /// The thresholds the responses were tested against.
    pub thresholds: VerificationThresholds,
}

/// Runs the D-query threshold test for candidate shift `t` along
/// `coordinate`, against explicit thresholds.
fn verify_with_thresholds(
    oracle: &QsqOracle,
    coordinate: usize,
    t: i64,
    thresholds: VerificationThresholds,
    backend: Backend,
    seed: u64,
) -> PeriodResult<VerificationOutcome> {
    let tau = oracle.noise().tau;
    if tau > thresholds.tau_bound {
        return Err(PeriodError::ToleranceTooLarge { tau, bound: thresholds.tau_bound });
    }
    let cap_d = oracle.instance().cap_d;
    let mut alphas = Vec::with_capacity(cap_d);
    for m in 1..=cap_d as u32 {
        let response = oracle.shift_correlation(coordinate, t, m, backend, mix(seed, m as u64))?;
        alphas.push(response.alpha);
    }
    let sum: f64 = alphas.iter().sum();
    let accepted = alphas[0] >= thresholds.alpha1_min && sum <= thresholds.sum_max;
    Ok(VerificationOutcome { accepted, alphas, thresholds })
}

/// Threshold verification for the uniform input distribution: `D`
/// shift-correlation queries at harmonics m = 1…D, accepted iff
/// `α₁ ≥ alpha1_min` and `Σ αₘ ≤ sum_max`.
///
/// At theorem-scale parameters with τ within [`VerificationThresholds::tau_bound`],
/// acceptance is equivalent to `|T − ℓM₁/w*_k| ≤ 1` for some integer `ℓ`.
pub fn verify_period_uniform(
    oracle: &QsqOracle,
    coordinate: usize,
    t: i64,
    backend: Backend,
    seed: u64,
) -> PeriodResult<VerificationOutcome> {
    let params = oracle.params();
    let instance = oracle.instance();
    let thresholds = uniform_thresholds(params.m1, params.m2, instance.cap_d, instance.r_w);
    verify_with_thresholds(oracle, coordinate, t, thresholds, backend, seed)
}

/// Threshold verification for non-uniform product distributions.
///
/// Audits the distribution assumptions first and refuses to certify anything
/// when the audit fails; otherwise runs the same D-query test with the
/// non-uniform constants.
pub fn verify_period_nonuniform(
    oracle: &QsqOracle,
    coordinate: usize,
    t: i64,
    backend: Backend,
    seed: u64,
) -> PeriodResult<VerificationOutcome> {
    let params = oracle.params();
    let instance = oracle.instance();
    let audit = audit_assumptions(
        oracle.distribution(),
        params.m1m(),
        instance.cap_d,
        instance.r_w,
        AUDIT_GRID_RESOLUTION,
    );
    if !audit.numeric_pass() {
        return Err(PeriodError::AssumptionAuditFailed(
            "grid audit of the flatness/symmetry/derivative assumptions failed".into(),
        ));
    }
    let thresholds = nonuniform_thresholds(params.m1, params.m2, instance.cap_d, instance.r_w);
    verify_with_thresholds(oracle, coordinate, t, thresholds, backend, seed)
}

/// Grid resolution used by the in-line assumption audit.
const AUDIT_GRID_RESOLUTION: usize = 2001;

// =======================================================================
// Amplified period finding
// =======================================================================

/// How candidate periods are verified inside the amplification loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeriodVerifier {
    /// The guaranteed D-query threshold test (theorem-scale parameters;
    /// picks the uniform or non-uniform constants from the distribution).
    Threshold,
    /// Self-calibrated two-query test: accept `T` when the `T`-shift
    /// correlation retains at least half the zero-shift correlation. For
    /// desk-scale demonstrations where the threshold constants are vacuous.
    ExactPeriodicity,
}

/// How many Fourier samples each amplification attempt draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingMode {
    /// One sample per attempt; candidates are the convergent denominators
    /// of `α/q`. Sound when every `M₁/w*_j` is an integer, under the
    /// truncation precondition `R ≥ (1 + 2τ)A²`
    /// ([`min_single_query_radius`]).
    SingleQuery,
    /// Two samples per attempt; candidates come from the convergents of
    /// `α/β`. Handles non-integer periods, under the stronger precondition
    /// `R ≥ 6(1/2 + τ)A²` ([`min_sampling_radius`]).
    PairQuery,
}

/// Options for the amplification loop.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AmplificationOptions {
    /// Multiplicative constant `C` in the attempt budget
    /// `⌈C·ln(1/δ)·ln⁴(A)⌉` (calibrated default 2).
    pub constant: f64,
    /// Hard cap on attempts, overriding the budget formula.
    pub max_attempts: Option<u64>,
    /// Candidate verifier.
    pub verifier: PeriodVerifier,
    /// Backend answering verification queries.
    pub backend: Backend,
    /// Fourier samples drawn per attempt.
    pub sampling: SamplingMode,
}

impl Default for AmplificationOptions {
    fn default() -> Self {
        AmplificationOptions {
            constant: 2.0,
            max_attempts: None,
            verifier: PeriodVerifier::Threshold,
            backend: Backend::Analytic,
            sampling: SamplingMode::PairQuery,
        }
    }
}

/// One amplification attempt, exportable as a JSON line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttemptRecord {
    /// Coordinate being recovered.
    pub coordinate: usize,
    /// 1-based attempt number.
    pub attempt: u64,
    /// First Fourier sample.
    pub alpha: u64,
    /// Second Fourier sample (absent in single-query mode).
    pub beta: Option<u64>,
    /// Candidates tested, in the order verified.
    pub candidates: Vec<u64>,
    /// QSQs consumed by this attempt.
    pub qsq_count: u64,
    /// The accepted candidate, when one passed.
    pub accepted: Option<u64>,
}

/// Outcome of amplified period finding on one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodFindingResult {
    /// Coordinate index `j`.
    pub coordinate: usize,
    /// Accepted candidate `a` with `|a − M₁/w*_j| ≤ 1` under the guarantee.
    pub candidate: u64,
    /// Always true on success; failures surface as
    /// [`PeriodError::AmplificationExhausted`].
    pub accepted: bool,
    /// Attempts consumed, including the successful one.
    pub attempts: u64,
    /// Total QSQs issued for this coordinate.
    pub qsq_count: u64,
}

/// The scale parameter `A = M₁d²/R_w` controlling radii and budgets.
pub fn fourier_scale(m1: u64, d: usize, r_w: f64) -> f64 {
    m1 as f64 * (d as f64) * (d as f64) / r_w
}

/// Smallest admissible Fourier-sampling truncation for pair-query mode,
/// `6(1/2 + τ)A²`.
pub fn min_sampling_radius(m1: u64, d: usize, r_w: f64, tau: f64) -> f64 {
    let a = fourier_scale(m1, d, r_w);
    6.0 * (0.5 + tau) * a * a
}

/// Smallest admissible Fourier-sampling truncation for single-query mode,
/// `(1 + 2τ)A²`. At this radius a measured peak `α ≈ kq/S` satisfies
/// `|α/q − k/S| ≤ 1/(2A²)`, so the fraction `k/S` is recovered among the
/// continued-fraction convergents of `α/q`.
pub fn min_single_query_radius(m1: u64, d: usize, r_w: f64, tau: f64) -> f64 {
    let a = fourier_scale(m1, d, r_w);
    (1.0 + 2.0 * tau) * a * a
}

/// Verification-stage truncation multiplier
/// `R̃ = ⌈max(39√d/(4πR_w), 54D²√d/(πR_w))⌉`.
pub fn verification_r_tilde(d: usize, cap_d: usize, r_w: f64) -> u64 {
    let pi = std::f64::consts::PI;
    let sqrt_d = (d as f64).sqrt();
    let dd = cap_d as f64;
    let bound = (39.0 * sqrt_d / (4.0 * pi * r_w)).max(54.0 * dd * dd * sqrt_d / (pi * r_w));
    bound.ceil().max(1.0) as u64
}

/// Attempt budget `⌈C·ln(1/δ)·ln⁴(A)⌉`, floored at one attempt.
pub fn amplification_budget(scale_a: f64, delta: f64, constant: f64) -> u64 {
    let ln_a = scale_a.ln().max(1.0);
    let ln_delta = (1.0 / delta).ln().max(1.0);
    (constant * ln_delta * ln_a.powi(4)).ceil().max(1.0) as u64
}

/// SplitMix64-style seed mixer for per-query derivation.
fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix3(seed: u64, a: u64, b: u64) -> u64 {
    mix(mix(seed, a.wrapping_add(0x517c_c1b7_2722_0a95)), b)
}

/// Per-find verifier state (caches the self-calibration query).
struct CandidateVerifier<'a> {
    oracle: &'a QsqOracle,
    verifier: PeriodVerifier,
    backend: Backend,
    uniform: bool,
    /// Zero-shift baseline for [`PeriodVerifier::ExactPeriodicity`].
    baseline: Option<f64>,
    /// QSQs spent outside individual candidate checks (baseline query).
    overhead: u64,
}

impl<'a> CandidateVerifier<'a> {
    fn new(oracle: &'a QsqOracle, opts: &AmplificationOptions) -> Self {
        let uniform = matches!(oracle.distribution().kind, DistributionKind::Uniform);
        CandidateVerifier {
            oracle,
            verifier: opts.verifier,
            backend: opts.backend,
            uniform,
            baseline: None,
            overhead: 0,
        }
    }

    /// Verifies one candidate; returns (accepted, queries spent).
    fn check(&mut self, coordinate: usize, t: i64, seed: u64) -> PeriodResult<(bool, u64)> {
        match self.verifier {
            PeriodVerifier::Threshold => {
                let outcome = if self.uniform {
                    verify_period_uniform(self.oracle, coordinate, t, self.backend, seed)?
                } else {
                    verify_period_nonuniform(self.oracle, coordinate, t, self.backend, seed)?
                };
                Ok((outcome.accepted, self.oracle.instance().cap_d as u64))
            }
            PeriodVerifier::ExactPeriodicity => {
                let baseline = match self.baseline {
                    Some(b) => b,
                    None => {
                        let b = self
                            .oracle
                            .shift_correlation(coordinate, 0, 1, self.backend, mix(seed, 0xBA5E))?
                            .alpha;
                        self.overhead += 1;
                        self.baseline = Some(b);
                        b
                    }
                };
                let alpha = self
                    .oracle
                    .shift_correlation(coordinate, t, 1, self.backend, seed)?
                    .alpha;
                Ok((baseline > 0.0 && alpha >= 0.5 * baseline, 1))
            }
        }
    }
}

/// Recovers the scaled inverse period of one coordinate by amplified
/// Fourier sampling.
///
/// `sampler` must be in Fourier-sampling truncation mode with radius at
/// least [`min_sampling_radius`] (pair-query mode) or
/// [`min_single_query_radius`] (single-query mode); `verifier_oracle` must
/// be in verification mode over the same instance. Returns the result
/// together with the full attempt trace.
pub fn find_period_coordinate(
    sampler: &QsqOracle,
    verifier_oracle: &QsqOracle,
    coordinate: usize,
    delta: f64,
    opts: &AmplificationOptions,
    seed: u64,
) -> PeriodResult<(PeriodFindingResult, Vec<AttemptRecord>)> {
    let instance = sampler.instance();
    if coordinate >= instance.d {
        return Err(PeriodError::Infeasible(format!(
            "coordinate {coordinate} out of range for d = {}",
            instance.d
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PeriodError::Infeasible(format!(
            "failure budget delta = {delta} must lie in (0, 1)"
        )));
    }
    let params = sampler.params();
    if params.truncation_mode != TruncationMode::FourierSampling {
        return Err(PeriodError::Infeasible(
            "sampling oracle must use Fourier-sampling truncation".into(),
        ));
    }
    let radius = params.radius().map_err(OracleError::from)?;
    let min_radius = match opts.sampling {
        SamplingMode::PairQuery => {
            min_sampling_radius(params.m1m(), instance.d, instance.r_w, sampler.noise().tau)
        }
        SamplingMode::SingleQuery => {
            min_single_query_radius(params.m1m(), instance.d, instance.r_w, sampler.noise().tau)
        }
    };
    if (radius as f64) < min_radius {
        return Err(PeriodError::Infeasible(format!(
            "sampling truncation R = {radius} below the required {min_radius:.3e}"
        )));
    }
    let q = radius.checked_mul(2).ok_or_else(|| {
        PeriodError::Infeasible(format!("Fourier dimension 2R overflows u64 at R = {radius}"))
    })?;
    let domain_radius = verifier_oracle.params().radius().map_err(OracleError::from)?;

    let scale_a = fourier_scale(params.m1m(), instance.d, instance.r_w);
    let budget = opts
        .max_attempts
        .unwrap_or_else(|| amplification_budget(scale_a, delta, opts.constant));

    let mut verifier = CandidateVerifier::new(verifier_oracle, opts);
    let mut trace: Vec<AttemptRecord> = Vec::new();
    let mut total_qsq = 0u64;

    for attempt in 1..=budget {
        let attempt_seed = mix3(seed, coordinate as u64, attempt);
        let alpha = sampler.fourier_sample(coordinate, mix(attempt_seed, 1))?;
        let (beta, candidates) = match opts.sampling {
            SamplingMode::PairQuery => {
                let beta = sampler.fourier_sample(coordinate, mix(attempt_seed, 2))?;
                let candidates = if alpha > 0 && beta > 0 {
                    let convergents = continued_fraction_convergents(
                        &BigUint::from(alpha),
                        &BigUint::from(beta),
                    )?;
                    candidate_periods(&convergents, alpha, q, domain_radius)
                } else {
                    Vec::new()
                };
                (Some(beta), candidates)
            }
            SamplingMode::SingleQuery => {
                let candidates = if alpha > 0 {
                    let convergents = continued_fraction_convergents(
                        &BigUint::from(alpha),
                        &BigUint::from(q),
                    )?;
                    // Single-query candidates are capped by the period bound
                    // A as well as the verifier's shift domain.
                    let cap = domain_radius.min(scale_a.floor() as u64);
                    candidate_periods_single(&convergents, cap)
                } else {
                    Vec::new()
                };
                (None, candidates)
            }
        };
        let mut qsq = 1 + beta.is_some() as u64;
        let mut tested: Vec<u64> = Vec::new();
        let mut accepted: Option<u64> = None;

        // The hidden component obeys R_w/d² ≤ w*_j ≤ R_w, so the true
        // period M₁ₘ/w*_j lies in [A/d², A]; candidates outside that band
        // (±1 for rounding) are structurally impossible and never tested.
        // Verification runs largest-first: when the two samples share no
        // common factor, the full-precision convergent sits within 1 of the
        // period and is tested before any lower-precision convergent whose
        // small phase offset could also slip past the threshold test.
        let period_floor = ((scale_a / (instance.d * instance.d) as f64).ceil() as u64)
            .saturating_sub(1)
            .max(2);
        let period_cap = (scale_a.floor() as u64).saturating_add(1);
        for (index, &t) in candidates
            .iter()
            .rev()
            .filter(|&&t| t >= period_floor && t <= period_cap)
            .enumerate()
        {
            tested.push(t);
            let (ok, cost) =
                verifier.check(coordinate, t as i64, mix(attempt_seed, 0x100 + index as u64))?;
            qsq += cost;
            if ok {
                accepted = Some(t);
                break;
            }
        }

        total_qsq += qsq;
        trace.push(AttemptRecord {
            coordinate,
            attempt,
            alpha,
            beta,
            candidates: tested,
            qsq_count: qsq,
            accepted,
        });
        if let Some(candidate) = accepted {
            return Ok((
                PeriodFindingResult {
                    coordinate,
                    candidate,
                    accepted: true,
                    attempts: attempt,
                    qsq_count: total_qsq + verifier.overhead,
                },
                trace,
            ));
        }
    }
    Err(PeriodError::AmplificationExhausted { coordinate, attempts: budget, trace })
}

/// Runs [`find_period_coordinate`] on every coordinate in parallel.
///
/// Returns per-coordinate results in coordinate order plus the concatenated
/// attempt traces (sorted by coordinate, then attempt).
pub fn find_period_all(
    sampler: &QsqOracle,
    verifier_oracle: &QsqOracle,
    delta: f64,
    opts: &AmplificationOptions,
    seed: u64,
) -> PeriodResult<(Vec<PeriodFindingResult>, Vec<AttemptRecord>)> {
    let d = sampler.instance().d;
    // Each coordinate must succeed with budget δ/d for a union bound over
    // the whole direction.
    let per_coordinate_delta = delta / d as f64;
    let outcomes: Vec<PeriodResult<(PeriodFindingResult, Vec<AttemptRecord>)>> = (0..d)
        .into_par_iter()
        .map(|j| find_period_coordinate(sampler, verifier_oracle, j, per_coordinate_delta, opts, seed))
        .collect();
    let mut results = Vec::with_capacity(d);
    let mut traces = Vec::new();
    for outcome in outcomes {
        let (result, mut trace) = outcome?;
        results.push(result);
        traces.append(&mut trace);
    }
    traces.sort_by_key(|r| (r.coordinate, r.attempt));
    Ok((results, traces))
}

/// Inverts accepted periods to the direction estimate, `ŵ_j = M₁/a_j`.
///
/// Every coordinate `0…d-1` must appear with an accepted result; with
/// `M₁ ≥ R_w²/ε₁` and `|a_j − M₁/w*_j| ≤ 1` this guarantees
/// `‖ŵ − w*‖_∞ ≤ ε₁`.
pub fn reconstruct_w(
    results: &[PeriodFindingResult],
    d: usize,
    m1: u64,
) -> PeriodResult<Vec<f64>> {
    let mut out: Vec<Option<f64>> = vec![None; d];
    for result in results {
        if result.accepted && result.coordinate < d {
            out[result.coordinate] = Some(m1 as f64 / result.candidate as f64);
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(j, v)| v.ok_or(PeriodError::MissingCoordinate(j)))
        .collect()
}

// =======================================================================
// Tests
// =======================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::{make_instance, sample_w_star, DistributionKind, DistributionSpec};
    use crate::discretizer::DiscretizationParams;
    use crate::qsq_oracle::NoiseModel;
    use proptest::prelude::*;

    fn convergents_u64(b: u64, c: u64) -> Vec<(u64, u64)> {
        continued_fraction_convergents(&BigUint::from(b), &BigUint::from(c))
            .unwrap()
            .into_iter()
            .map(|cv| (cv.numerator.to_u64().unwrap(), cv.denominator.to_u64().unwrap()))
            .collect()
    }

    #[test]
    fn convergents_match_euclid_traces() {
        assert_eq!(convergents_u64(1, 1), vec![(1, 1)]);
        assert_eq!(convergents_u64(355, 113), vec![(3, 1), (22, 7), (355, 113)]);
        assert_eq!(convergents_u64(8, 5), vec![(1, 1), (2, 1), (3, 2), (8, 5)]);
    }

    #[test]
    fn zero_denominator_is_rejected() {
        let err = continued_fraction_convergents(&BigUint::from(3u32), &BigUint::zero());
        assert!(matches!(err, Err(PeriodError::ZeroDenominator)));
    }

    proptest! {
        #[test]
        fn convergent_invariants_hold(b in 1u64..10_000, c in 1u64..10_000) {
            let convs = convergents_u64(b, c);
            prop_assert!(!convs.is_empty());
            // Final convergent reproduces b/c in lowest terms.
            let g = num_integer::gcd(b, c);
            let (pn, qn) = *convs.last().unwrap();
            prop_assert_eq!((pn, qn), (b / g, c / g));
            for (i, &(p, q)) in convs.iter().enumerate() {
                prop_assert_eq!(num_integer::gcd(p.max(1), q), 1);
                if i > 0 {
                    let (_, q_prev) = convs[i - 1];
                    // Denominators never decrease; strictly increase after
                    // the second convergent.
                    if i == 1 {
                        prop_assert!(q >= q_prev);
                    } else {
                        prop_assert!(q > q_prev);
                    }
                }
            }
        }

        #[test]
        fn convergents_are_best_approximations(b in 1u64..10_000, c in 2u64..300) {
            // Any fraction e/f with f < c_i approximates b/c no better than
            // the i-th convergent (i ≥ 1), by exact cross multiplication:
            // |b/c − e/f| ≥ |b/c − p/q| ⟺ |bf − ce|·q ≥ |bq − cp|·f.
            let convs = convergents_u64(b, c);
            for (i, &(p, q)) in convs.iter().enumerate() {
                if i == 0 || q < 2 {
                    continue;
                }
                let lhs_base = (i128::from(b) * i128::from(q) - i128::from(c) * i128::from(p)).abs();
                for f in 1..q {
                    // Best e for this f is one of the two roundings of bf/c.
                    for e in [b * f / c, b * f / c + 1] {
                        let rival = (i128::from(b) * i128::from(f) - i128::from(c) * i128::from(e)).abs();
                        prop_assert!(
                            rival * i128::from(q) >= lhs_base * i128::from(f),
                            "convergent {p}/{q} of {b}/{c} beaten by {e}/{f}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn candidate_lists_dedup_filter_and_sort() {
        // Single convergent 1/1 with alpha = q: b·q/alpha = 1 exactly.
        let convs = continued_fraction_convergents(&BigUint::from(1u32), &BigUint::from(1u32)).unwrap();
        assert_eq!(candidate_periods(&convs, 64, 64, 100), vec![1]);
        // Integral ratios are emitted once; everything stays in range, ascending.
        let convs = convergents_to(vec![(3, 1), (22, 7), (355, 113)]);
        let cands = candidate_periods(&convs, 71, 1000, 4000);
        let mut sorted = cands.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(cands, sorted);
        assert!(cands.iter().all(|&t| (1..=4000).contains(&t)));
    }

    fn convergents_to(pairs: Vec<(u64, u64)>) -> Vec<Convergent> {
        pairs
            .into_iter()
            .enumerate()
            .map(|(index, (p, q))| Convergent {
                numerator: BigUint::from(p),
                denominator: BigUint::from(q),
                index,
            })
            .collect()
    }

    #[test]
    fn candidate_list_contains_true_period_for_coprime_peaks() {
        // Peaks alpha ≈ kq/S, beta ≈ lq/S with gcd(k, l) = 1: the convergent
        // k/l of alpha/beta recovers a candidate within 1 of S.
        let q: u64 = 1 << 20;
        let s = 337.0_f64; // true period, integer here so "within 1" is checkable
        for (k, l) in [(3u64, 5u64), (7, 4), (11, 13), (2, 9)] {
            let alpha = ((k as f64) * q as f64 / s).round() as u64;
            let beta = ((l as f64) * q as f64 / s).round() as u64;
            let convs =
                continued_fraction_convergents(&BigUint::from(alpha), &BigUint::from(beta)).unwrap();
            let cands = candidate_periods(&convs, alpha, q, q);
            assert!(
                cands.iter().any(|&t| (t as f64 - s).abs() <= 1.0),
                "no candidate near S = {s} for peaks k={k}, l={l}: {cands:?}"
            );
        }
    }

    // === Threshold verification on a theorem-scale uniform instance ===

    fn uniform_theorem_oracle(seed: u64) -> QsqOracle {
        let d = 6;
        let cap_d = 1;
        let r_w = 1.0;
        let w = sample_w_star(d, r_w, seed).unwrap();
        let instance = make_instance(d, r_w, cap_d, w, vec![1.0]).unwrap();
        let r_tilde = verification_r_tilde(d, cap_d, r_w);
        let params = DiscretizationParams::theorem(
            d,
            cap_d,
            r_w,
            1.0,
            true,
            r_tilde,
            1,
            TruncationMode::Verification,
        )
        .unwrap();
        let radius = params.radius().unwrap();
        let dist = DistributionSpec::new(DistributionKind::Uniform, d, radius).unwrap();
        let thresholds = uniform_thresholds(params.m1, params.m2, cap_d, r_w);
        QsqOracle::new(instance, dist, params, NoiseModel::exact(thresholds.tau_bound)).unwrap()
    }

    #[test]
    fn uniform_verification_separates_multiples_from_offsets() {
        for seed in [11u64, 29, 47] {
            let oracle = uniform_theorem_oracle(seed);
            let m1 = oracle.params().m1;
            for k in [0usize, 3, 5] {
                let s = m1 as f64 / oracle.instance().w_star[k];
                let near = s.round() as i64;
                let outcome =
                    verify_period_uniform(&oracle, k, near, Backend::Analytic, 7 * seed).unwrap();
                assert!(outcome.accepted, "T = {near} near S = {s:.2} rejected (seed {seed})");
                // 0.75·S is S/4 from both enclosing multiples and stays
                // inside the shift domain even for the smallest w_k.
                let far = (0.75 * s).round() as i64;
                let outcome =
                    verify_period_uniform(&oracle, k, far, Backend::Analytic, 9 * seed).unwrap();
                assert!(!outcome.accepted, "T = {far} off S = {s:.2} accepted (seed {seed})");
            }
        }
    }

    #[test]
    fn oversized_tolerance_is_rejected() {
        let oracle = uniform_theorem_oracle(3);
        let thresholds =
            uniform_thresholds(oracle.params().m1, oracle.params().m2, 1, oracle.instance().r_w);
        let loose = QsqOracle::new(
            oracle.instance().clone(),
            oracle.distribution().clone(),
            *oracle.params(),
            NoiseModel::exact(thresholds.tau_bound * 2.0),
        )
        .unwrap();
        let err = verify_period_uniform(&loose, 0, 100, Backend::Analytic, 0);
        assert!(matches!(err, Err(PeriodError::ToleranceTooLarge { .. })));
    }

    #[test]
    fn threshold_formulas_are_frozen() {
        // M1 = 1320, M2 = 52 (d = 6, D = 1, R_w = 1 in theorem mode).
        let thr = uniform_thresholds(1320, 52, 1, 1.0);
        assert_eq!(thr.tau_bound, 3.176_627_951_333_535_64e-5);
        assert_eq!(thr.alpha1_min, 1.728_208_921_256_258_57e-4);
        assert_eq!(thr.sum_max, 2.214_188_360_297_971_76e-4);
        // Gaussian-family scales (d = 3, D = 1, R_w = 1 in theorem mode).
        let non = nonuniform_thresholds(1980, 78, 1, 1.0);
        assert_eq!(non.tau_bound, 1.640_645_131_769_391_89e-5);
        assert_eq!(non.alpha1_min, 4.921_935_395_308_176_01e-5);
        assert_eq!(non.sum_max, 1.068_936_967_401_456_48e-4);
    }

    // === Desk-scale end-to-end find on an exactly periodic instance ===

    fn desk_scale_oracles(tau: f64) -> (QsqOracle, QsqOracle) {
        // w* = 1/3, M1 = 1: the discretized target has exact period 3.
        let instance = make_instance(1, 1.0 / 3.0, 1, vec![1.0 / 3.0], vec![1.0]).unwrap();
        let sampler_params =
            DiscretizationParams::free(1, 1, 32, 1, TruncationMode::FourierSampling).unwrap();
        let sampler_dist = DistributionSpec::new(DistributionKind::Uniform, 1, 32).unwrap();
        let sampler = QsqOracle::new(
            instance.clone(),
            sampler_dist,
            sampler_params,
            NoiseModel::exact(tau),
        )
        .unwrap();
        let verifier_params =
            DiscretizationParams::free(1, 1, 12, 1, TruncationMode::Verification).unwrap();
        let verifier_dist = DistributionSpec::new(DistributionKind::Uniform, 1, 12).unwrap();
        let verifier = QsqOracle::new(
            instance,
            verifier_dist,
            verifier_params,
            NoiseModel::exact(tau),
        )
        .unwrap();
        (sampler, verifier)
    }

    #[test]
    fn desk_scale_find_recovers_the_period() {
        let (sampler, verifier) = desk_scale_oracles(0.01);
        let opts = AmplificationOptions {
            verifier: PeriodVerifier::ExactPeriodicity,
            backend: Backend::Brute,
            ..AmplificationOptions::default()
        };
        let (result, trace) = find_period_coordinate(&sampler, &verifier, 0, 0.05, &opts, 424_242)
            .expect("amplified find should succeed");
        assert!(result.accepted);
        assert_eq!(result.candidate, 3, "smallest accepted candidate is the true period");
        assert_eq!(result.attempts as usize, trace.len());
        // Bookkeeping: every attempt spends 2 sampling QSQs plus one per
        // candidate tested (ExactPeriodicity), plus one baseline overall.
        let expected: u64 =
            trace.iter().map(|a| 2 + a.candidates.len() as u64).sum::<u64>() + 1;
        assert_eq!(result.qsq_count, expected);
        // Replay: the accepted candidate re-verifies.
        let base = verifier
            .shift_correlation(0, 0, 1, Backend::Brute, 1)
            .unwrap()
            .alpha;
        let corr = verifier
            .shift_correlation(0, result.candidate as i64, 1, Backend::Brute, 2)
            .unwrap()
            .alpha;
        assert!(corr >= 0.5 * base);
    }

    // === Single-query mode on the same exactly periodic instance ===

    /// Sampler at the single-query radius bound: A = 3, so R ≥ 1.02·9 = 9.18
    /// admits R = 12 (q = 24, a multiple of the period — the spectrum has
    /// exact peaks at 0, 8, 16 with weights 5/9, 2/9, 2/9).
    fn single_query_oracles(tau: f64) -> (QsqOracle, QsqOracle) {
        let instance = make_instance(1, 1.0 / 3.0, 1, vec![1.0 / 3.0], vec![1.0]).unwrap();
        let sampler_params =
            DiscretizationParams::free(1, 1, 12, 1, TruncationMode::FourierSampling).unwrap();
        let sampler_dist = DistributionSpec::new(DistributionKind::Uniform, 1, 12).unwrap();
        let sampler = QsqOracle::new(
            instance.clone(),
            sampler_dist,
            sampler_params,
            NoiseModel::exact(tau),
        )
        .unwrap();
        let verifier_params =
            DiscretizationParams::free(1, 1, 12, 1, TruncationMode::Verification).unwrap();
        let verifier_dist = DistributionSpec::new(DistributionKind::Uniform, 1, 12).unwrap();
        let verifier = QsqOracle::new(
            instance,
            verifier_dist,
            verifier_params,
            NoiseModel::exact(tau),
        )
        .unwrap();
        (sampler, verifier)
    }

    fn single_query_opts(max_attempts: Option<u64>) -> AmplificationOptions {
        AmplificationOptions {
            max_attempts,
            verifier: PeriodVerifier::ExactPeriodicity,
            backend: Backend::Brute,
            sampling: SamplingMode::SingleQuery,
            ..AmplificationOptions::default()
        }
    }

    #[test]
    fn single_query_candidates_are_convergent_denominators() {
        // q = 24: sample 8 → 8/24 = [0; 3] → denominators {1, 3};
        // sample 16 → 16/24 = [0; 1, 2] → {1, 3};
        // off-peak 7 → 7/24 = [0; 3, 2, 3] → {1, 3, 7, 24}, capped at 3.
        for alpha in [8u64, 16, 7] {
            let convs = continued_fraction_convergents(
                &BigUint::from(alpha),
                &BigUint::from(24u64),
            )
            .unwrap();
            assert_eq!(candidate_periods_single(&convs, 3), vec![1, 3], "alpha = {alpha}");
        }
        // A zero sample yields only the trivial convergent 0/1.
        let convs =
            continued_fraction_convergents(&BigUint::zero(), &BigUint::from(24u64)).unwrap();
        assert_eq!(candidate_periods_single(&convs, 3), vec![1]);
    }

    #[test]
    fn single_query_recovers_with_constant_probability() {
        // One Fourier QSQ per attempt: the exact peak weights make any
        // nonzero sample recover the period, so the single-shot success
        // rate is 4/9 ≈ 0.444 (expect ≈ 267 of 600 seeds; ±3σ ≈ ±37).
        let (sampler, verifier) = single_query_oracles(0.01);
        let opts = single_query_opts(Some(1));
        let mut hits = 0usize;
        for seed in 0..600u64 {
            match find_period_coordinate(&sampler, &verifier, 0, 0.5, &opts, seed) {
                Ok((result, trace)) => {
                    assert_eq!(result.candidate, 3, "seed {seed} accepted a wrong period");
                    assert_eq!(trace.len(), 1);
                    assert!(trace[0].beta.is_none());
                    hits += 1;
                }
                Err(PeriodError::AmplificationExhausted { .. }) => {}
                Err(other) => panic!("unexpected failure: {other}"),
            }
        }
        assert!(
            (230..=304).contains(&hits),
            "{hits}/600 single-shot successes, expected about 4/9 of 600"
        );
    }

    #[test]
    fn single_query_amplification_reaches_high_confidence() {
        // With budget ⌈2·ln(1000)·1⁴⌉… = 21 attempts the per-seed failure
        // probability is (5/9)^21 ≈ 4e-6; all 60 seeds must succeed.
        let (sampler, verifier) = single_query_oracles(0.01);
        let opts = single_query_opts(None);
        for seed in 0..60u64 {
            let (result, trace) =
                find_period_coordinate(&sampler, &verifier, 0, 1.0e-3, &opts, seed)
                    .unwrap_or_else(|e| panic!("seed {seed} failed: {e}"));
            assert_eq!(result.candidate, 3);
            // One sampling QSQ per attempt plus one per candidate tested,
            // plus the single baseline query.
            let expected: u64 =
                trace.iter().map(|a| 1 + a.candidates.len() as u64).sum::<u64>() + 1;
            assert_eq!(result.qsq_count, expected);
        }
    }

    #[test]
    fn single_query_radius_precondition_is_enforced() {
        // R = 8 sits below (1 + 2τ)A² = 9.18.
        let instance = make_instance(1, 1.0 / 3.0, 1, vec![1.0 / 3.0], vec![1.0]).unwrap();
        let params =
            DiscretizationParams::free(1, 1, 8, 1, TruncationMode::FourierSampling).unwrap();
        let dist = DistributionSpec::new(DistributionKind::Uniform, 1, 8).unwrap();
        let sampler = QsqOracle::new(instance, dist, params, NoiseModel::exact(0.01)).unwrap();
        let (_, verifier) = single_query_oracles(0.01);
        let err =
            find_period_coordinate(&sampler, &verifier, 0, 0.1, &single_query_opts(None), 1);
        assert!(matches!(err, Err(PeriodError::Infeasible(_))));
    }

    #[test]
    fn sampling_radius_precondition_is_enforced() {
        // Same instance, but a sampler radius below 6(1/2+τ)A² = 27.54.
        let instance = make_instance(1, 1.0 / 3.0, 1, vec![1.0 / 3.0], vec![1.0]).unwrap();
        let params =
            DiscretizationParams::free(1, 1, 16, 1, TruncationMode::FourierSampling).unwrap();
        let dist = DistributionSpec::new(DistributionKind::Uniform, 1, 16).unwrap();
        let sampler = QsqOracle::new(instance, dist, params, NoiseModel::exact(0.01)).unwrap();
        let (_, verifier) = desk_scale_oracles(0.01);
        let err = find_period_coordinate(
            &sampler,
            &verifier,
            0,
            0.1,
            &AmplificationOptions::default(),
            1,
        );
        assert!(matches!(err, Err(PeriodError::Infeasible(_))));
    }

    #[test]
    fn reconstruction_inverts_and_reports_gaps() {
        let results = vec![
            PeriodFindingResult { coordinate: 0, candidate: 3, accepted: true, attempts: 1, qsq_count: 4 },
            PeriodFindingResult { coordinate: 1, candidate: 6, accepted: true, attempts: 2, qsq_count: 9 },
        ];
        let w = reconstruct_w(&results, 2, 12).unwrap();
        assert_eq!(w, vec![4.0, 2.0]);
        let err = reconstruct_w(&results[..1], 2, 12);
        assert!(matches!(err, Err(PeriodError::MissingCoordinate(1))));
    }

    #[test]
    fn amplification_budget_matches_formula() {
        let a = 14_076.0_f64;
        let expected = (2.0 * (1.0f64 / 0.1).ln() * a.ln().powi(4)).ceil() as u64;
        assert_eq!(amplification_budget(a, 0.1, 2.0), expected);
        assert_eq!(amplification_budget(1.0, 0.9, 0.0), 1);
    }

    #[test]
    fn parallel_find_covers_every_coordinate() {
        let (sampler, verifier) = desk_scale_oracles(0.01);
        let opts = AmplificationOptions {
            verifier: PeriodVerifier::ExactPeriodicity,
            backend: Backend::Brute,
            ..AmplificationOptions::default()
        };
        let (results, trace) = find_period_all(&sampler, &verifier, 0.05, &opts, 77).unwrap();
        assert_eq!(results.len(), 1);
        assert!(results[0].accepted);
        assert!(!trace.is_empty());
        let w = reconstruct_w(&results, 1, sampler.params().m1).unwrap();
        assert!((w[0] - 1.0 / 3.0).abs() <= 1.0 / 3.0 - 0.25);
    }
}

