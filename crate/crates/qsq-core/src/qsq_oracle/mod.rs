//! Simulated quantum-statistical-query (QSQ) oracle.
//!
//! A QSQ oracle holds a quantum example state that encodes the discretized
//! target `h` over the truncated input box and answers two families of
//! queries about it, each within an additive tolerance `τ`:
//!
//! - **Fourier sampling** ([`QsqOracle::fourier_sample`]): measure the
//!   quantum Fourier transform of the chosen input coordinate, returning an
//!   integer outcome `y ∈ [0, q)` with `q = 2R`. The outcome distribution
//!   concentrates near multiples of `q/S`, where `S = M₁/w*_j` is the
//!   pseudo-period of `h` along coordinate `j`.
//! - **Shift correlation** ([`QsqOracle::shift_correlation`]): the
//!   expectation of the observable that compares `h` with a copy of itself
//!   shifted by `T` steps along one coordinate, used by period verification.
//!
//! Everything is classical simulation: outcome distributions are computed
//! exactly (grouped DFT over level sets, or an exact arithmetic sampler for
//! domains too large to enumerate), expectations are computed either by full
//! enumeration (`Brute`) or through closed-form cosine expansions
//! (`Analytic`) whose declared error budget is charged against `τ`.
//! Responses are perturbed by a seeded noise model and rounded to dyadic
//! rationals with 64 fractional bits; the rounding is also charged to `τ`,
//! so `|response − truth| ≤ τ` holds in every mode.

mod analytic;
mod brute;
mod expsum;
mod grouped;
mod structured;

pub use expsum::{exp_sum_1d, SumMode};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{ConceptError, ConceptInstance, DistributionKind, DistributionSpec};
use crate::discretizer::{DiscretizationParams, Discretizer, DiscretizerError, TruncationMode};
use crate::exact::ExactError;

/// Errors surfaced by oracle queries.
#[derive(Debug, Error)]
pub enum OracleError {
    /// The requested computation exceeds the configured scale budget.
    #[error("infeasible scale: {0}")]
    InfeasibleScale(String),
    /// The backend's own approximation error does not fit inside τ/2.
    #[error("backend error budget {budget:.3e} exceeds τ/2 = {half_tau:.3e}")]
    BackendBudgetExceeded { budget: f64, half_tau: f64 },
    /// A query was malformed (wrong truncation mode, shift out of range, …).
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    /// Discretization failure.
    #[error(transparent)]
    Discretizer(#[from] DiscretizerError),
    /// Instance/distribution failure.
    #[error(transparent)]
    Concept(#[from] ConceptError),
    /// Exact-arithmetic scale failure.
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// Convenience alias.
pub type OracleResult<T> = Result<T, OracleError>;

/// How responses are perturbed inside the tolerance window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Return the backend value unchanged.
    Zero,
    /// Add a uniform draw from `[-a, a]`, where `a` is the tolerance left
    /// after the backend's declared budget. Integer outcomes shift by the
    /// truncated draw.
    UniformRandom,
    /// Always use the full remaining tolerance, signed to work against the
    /// consumer: expectations are pushed toward zero (toward rejecting a
    /// true period), Fourier outcomes are pushed away from the nearest peak.
    AdversarialSign,
}

/// Noise model attached to an oracle: tolerance, mode, and seed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Query tolerance τ ≥ 0.
    pub tau: f64,
    /// Perturbation mode.
    pub mode: NoiseMode,
    /// Seed mixed into every per-query RNG stream.
    pub seed: u64,
}

impl NoiseModel {
    /// Noiseless model (τ = 0).
    pub fn zero() -> Self {
        NoiseModel { tau: 0.0, mode: NoiseMode::Zero, seed: 0 }
    }

    /// Uniform noise within `tau`.
    pub fn uniform(tau: f64, seed: u64) -> Self {
        NoiseModel { tau, mode: NoiseMode::UniformRandom, seed }
    }

    /// Noise-free responses under an explicit tolerance budget `tau`
    /// (backends may still spend up to `tau/2` on approximation).
    pub fn exact(tau: f64) -> Self {
        NoiseModel { tau, mode: NoiseMode::Zero, seed: 0 }
    }
}

/// Which expectation backend to use for shift-correlation queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Exact full enumeration of the truncated box (small domains only).
    Brute,
    /// Closed-form cosine expansion with a declared error budget.
    Analytic,
}

/// The two observable families the learner uses, as recorded in traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservableKind {
    /// QFT measurement on one input coordinate.
    FourierSample {
        /// Coordinate index `j ∈ [0, d)`.
        coordinate: usize,
        /// Fourier dimension `q = 2R`.
        q: u64,
    },
    /// Correlation of `h` with its `T`-shifted copy along one coordinate.
    ShiftCorrelation {
        /// Coordinate index `k ∈ [0, d)`.
        coordinate: usize,
        /// Integer shift `T`.
        shift: i64,
        /// Harmonic index `m ≥ 1` (scales `M₁, M₂, R` by `m`).
        harmonic: u32,
    },
}

/// A query as issued to the oracle (observable plus tolerance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QsqQuery {
    /// The observable being measured.
    pub observable: ObservableKind,
    /// Additive tolerance for this query.
    pub tau: f64,
}

/// Response to a shift-correlation query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QsqResponse {
    /// The returned estimate: a dyadic rational with at most 64 fractional
    /// bits whenever the rounding fits inside the tolerance.
    pub alpha: f64,
    /// Backend that produced the underlying value.
    pub backend: Backend,
    /// The backend's declared approximation error (must be ≤ τ/2).
    pub error_budget: f64,
}

/// One line of the query trace (JSON-lines exportable).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QsqTraceRecord {
    /// Monotone query index (per oracle).
    pub index: u64,
    /// The query.
    #[serde(flatten)]
    pub query: QsqQuery,
    /// Returned value: `y` as f64 for Fourier samples, α for correlations.
    pub value: f64,
    /// Engine/backend label.
    pub backend: String,
    /// Declared backend error budget.
    pub error_budget: f64,
    /// Per-query seed supplied by the caller.
    pub seed: u64,
}

/// Scale budgets for the oracle engines.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Largest Fourier dimension handled by the grouped-DFT engine.
    pub grouped_q_cap: u64,
    /// Cap on `q · (number of distinct output levels)` for the grouped engine.
    pub grouped_work_cap: u128,
    /// Point cap for brute-force enumeration.
    pub brute_point_cap: u64,
    /// Per-coordinate cap on direct exponential-sum length in the analytic
    /// backend (non-uniform distributions only; uniform sums are closed form).
    pub analytic_sum_cap: u64,
    /// Number of low-order outcome bits resolved by the final dense scan of
    /// the structured sampler; larger values shift work from exact lag
    /// counting to the scan.
    pub structured_scan_bits: u32,
    /// Largest Fourier dimension the structured sampler accepts.
    pub structured_q_cap: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            grouped_q_cap: 1 << 26,
            grouped_work_cap: 1 << 31,
            brute_point_cap: 10_000_000,
            analytic_sum_cap: 1 << 27,
            structured_scan_bits: 19,
            structured_q_cap: 1 << 40,
        }
    }
}

/// Counts of queries issued so far, by family.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct QueryCounts {
    /// Fourier-sampling queries.
    pub fourier: u64,
    /// Shift-correlation queries.
    pub shift: u64,
}

impl QueryCounts {
    /// Total QSQs issued.
    pub fn total(&self) -> u64 {
        self.fourier + self.shift
    }
}

/// Simulated QSQ oracle over one `(instance, distribution, params)` triple.
///
/// The oracle is immutable after construction; queries are pure functions of
/// `(query, seed)` apart from the trace and counters, so they may run from
/// multiple threads.
pub struct QsqOracle {
    instance: ConceptInstance,
    dist: DistributionSpec,
    params: DiscretizationParams,
    noise: NoiseModel,
    config: OracleConfig,
    fourier_count: AtomicU64,
    shift_count: AtomicU64,
    trace: Option<Mutex<Vec<QsqTraceRecord>>>,
    level_arcs: OnceLock<structured::LevelArcs>,
}

impl QsqOracle {
    /// Creates an oracle with default scale budgets and no trace.
    pub fn new(
        instance: ConceptInstance,
        dist: DistributionSpec,
        params: DiscretizationParams,
        noise: NoiseModel,
    ) -> OracleResult<Self> {
        Self::with_config(instance, dist, params, noise, OracleConfig::default(), false)
    }

    /// Creates an oracle with explicit budgets and optional query tracing.
    pub fn with_config(
        instance: ConceptInstance,
        dist: DistributionSpec,
        params: DiscretizationParams,
        noise: NoiseModel,
        config: OracleConfig,
        trace: bool,
    ) -> OracleResult<Self> {
        if let Some(dist_dim) = dist.dim() {
            if dist_dim != instance.d {
                return Err(OracleError::InvalidQuery(format!(
                    "distribution dimension {dist_dim} != instance dimension {}",
                    instance.d
                )));
            }
        }
        if !(noise.tau.is_finite() && noise.tau >= 0.0) {
            return Err(OracleError::InvalidQuery(format!("tolerance must be finite and ≥ 0, got {}", noise.tau)));
        }
        Ok(QsqOracle {
            instance,
            dist,
            params,
            noise,
            config,
            fourier_count: AtomicU64::new(0),
            shift_count: AtomicU64::new(0),
            trace: trace.then(|| Mutex::new(Vec::new())),
            level_arcs: OnceLock::new(),
        })
    }

    /// The instance this oracle encodes.
    pub fn instance(&self) -> &ConceptInstance {
        &self.instance
    }

    /// The input distribution.
    pub fn distribution(&self) -> &DistributionSpec {
        &self.dist
    }

    /// Base discretization parameters (harmonic index 1).
    pub fn params(&self) -> &DiscretizationParams {
        &self.params
    }

    /// The noise model.
    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// Query counts so far.
    pub fn query_counts(&self) -> QueryCounts {
        QueryCounts {
            fourier: self.fourier_count.load(Ordering::Relaxed),
            shift: self.shift_count.load(Ordering::Relaxed),
        }
    }

    /// Drains the query trace (empty if tracing is disabled).
    pub fn take_trace(&self) -> Vec<QsqTraceRecord> {
        match &self.trace {
            Some(m) => std::mem::take(&mut *m.lock().expect("trace lock")),
            None => Vec::new(),
        }
    }

    fn record_trace(&self, record: QsqTraceRecord) {
        if let Some(m) = &self.trace {
            m.lock().expect("trace lock").push(record);
        }
    }

    fn params_for_harmonic(&self, m: u32) -> OracleResult<DiscretizationParams> {
        if m == 0 {
            return Err(OracleError::InvalidQuery("harmonic index must be ≥ 1".into()));
        }
        let mut p = self.params;
        p.harmonic_index = m;
        p.radius().map_err(OracleError::from)?;
        Ok(p)
    }

    // ===================================================================
    // Fourier sampling
    // ===================================================================

    /// Draws one outcome `y ∈ [0, q)` of the QFT measurement on coordinate
    /// `j`, then applies the noise model (integer shift, circular in `Z_q`).
    ///
    /// For `d ≥ 2` the remaining coordinates are marginalized by drawing them
    /// from the input distribution and sampling the induced 1-D slice, which
    /// realizes exactly the distribution of the full measurement.
    pub fn fourier_sample(&self, j: usize, seed: u64) -> OracleResult<u64> {
        let (y, q, engine) = self.fourier_sample_inner(j, seed)?;
        let noisy = self.apply_integer_noise(y, q, j, seed);
        self.fourier_count.fetch_add(1, Ordering::Relaxed);
        self.record_trace(QsqTraceRecord {
            index: self.query_counts().total(),
            query: QsqQuery {
                observable: ObservableKind::FourierSample { coordinate: j, q },
                tau: self.noise.tau,
            },
            value: noisy as f64,
            backend: engine.into(),
            error_budget: 0.0,
            seed,
        });
        Ok(noisy)
    }

    fn fourier_sample_inner(&self, j: usize, seed: u64) -> OracleResult<(u64, u64, &'static str)> {
        let params = self.require_fourier_mode()?;
        if j >= self.instance.d {
            return Err(OracleError::InvalidQuery(format!("coordinate {j} out of range for d = {}", self.instance.d)));
        }
        let radius = params.radius()?;
        let q = 2 * radius;
        let mut rng = self.query_rng(0x464f_5552, j as u64, seed);
        let others = self.draw_slice(j, &mut rng)?;
        if q <= self.config.grouped_q_cap {
            let disc = Discretizer::new(&self.instance, params)?;
            let probs = grouped::slice_distribution(&disc, &self.dist, j, &others, &self.config)?;
            let y = sample_index(&probs, &mut rng);
            Ok((y as u64, q, "grouped"))
        } else if matches!(self.dist.kind, DistributionKind::Uniform) {
            if q > self.config.structured_q_cap {
                return Err(OracleError::InfeasibleScale(format!(
                    "q = {q} exceeds the structured sampler cap {}",
                    self.config.structured_q_cap
                )));
            }
            let disc = Discretizer::new(&self.instance, params)?;
            let arcs = self.structured_arcs(&disc);
            let y = structured::sample_uniform_slice(&disc, j, &others, arcs, &self.config, &mut rng)?;
            Ok((y, q, "structured"))
        } else {
            Err(OracleError::InfeasibleScale(format!(
                "q = {q} exceeds the grouped-DFT cap {} and the distribution is not uniform",
                self.config.grouped_q_cap
            )))
        }
    }

    /// Level-arc table for the structured sampler, built on first use. The
    /// table depends only on the instance and discretization, both fixed for
    /// the oracle's lifetime, so one table serves every query.
    fn structured_arcs(&self, disc: &Discretizer) -> &structured::LevelArcs {
        if let Some(arcs) = self.level_arcs.get() {
            return arcs;
        }
        let built = structured::LevelArcs::build(disc);
        self.level_arcs.get_or_init(|| built)
    }

    /// The exact outcome distribution of the sliced measurement on
    /// coordinate `j` (diagnostics; grouped engine only). The slice for the
    /// non-`j` coordinates is drawn from `seed` exactly as in
    /// [`Self::fourier_sample`]. Returns `(probabilities, slice)`.
    pub fn fourier_slice_distribution(&self, j: usize, seed: u64) -> OracleResult<(Vec<f64>, Vec<i64>)> {
        let params = self.require_fourier_mode()?;
        let mut rng = self.query_rng(0x464f_5552, j as u64, seed);
        let others = self.draw_slice(j, &mut rng)?;
        let disc = Discretizer::new(&self.instance, params)?;
        let probs = grouped::slice_distribution(&disc, &self.dist, j, &others, &self.config)?;
        Ok((probs, others))
    }

    /// Diagnostic expectation mode for the Fourier observable: `E[y]/q`
    /// under the exact outcome distribution (the eigenvalue of outcome `y`
    /// is `y/q`).
    pub fn fourier_expectation(&self, j: usize, seed: u64) -> OracleResult<f64> {
        let (probs, _) = self.fourier_slice_distribution(j, seed)?;
        let q = probs.len() as f64;
        Ok(probs.iter().enumerate().map(|(y, p)| (y as f64 / q) * p).sum())
    }

    fn require_fourier_mode(&self) -> OracleResult<DiscretizationParams> {
        if self.params.truncation_mode != TruncationMode::FourierSampling {
            return Err(OracleError::InvalidQuery(
                "fourier_sample requires FourierSampling truncation mode".into(),
            ));
        }
        self.params_for_harmonic(1)
    }

    /// Draws the non-`j` coordinates from the input distribution (uniform on
    /// the box, or flat-amplitude rejection sampling for non-uniform kinds).
    fn draw_slice(&self, j: usize, rng: &mut ChaCha8Rng) -> OracleResult<Vec<i64>> {
        let radius = self.params_for_harmonic(1)?.radius()? as i64;
        let d = self.instance.d;
        let mut slice = vec![0i64; d];
        for i in 0..d {
            if i == j {
                continue;
            }
            slice[i] = match self.dist.kind {
                DistributionKind::Uniform => rng.gen_range(-radius..radius),
                _ => loop {
                    // p² ≥ 0 is bounded by 1 (audited), so plain rejection
                    // against the uniform envelope terminates quickly for the
                    // flat profiles the theorems require.
                    let t = rng.gen_range(-radius..radius);
                    let accept: f64 = rng.gen();
                    let p = self.dist.amplitude(i, t as f64);
                    if accept < p * p {
                        break t;
                    }
                },
            };
        }
        Ok(slice)
    }

    fn apply_integer_noise(&self, y: u64, q: u64, j: usize, seed: u64) -> u64 {
        let tau = self.noise.tau;
        if tau < 1.0 {
            // Integer outcomes cannot move by less than one step.
            return y;
        }
        let shift: i64 = match self.noise.mode {
            NoiseMode::Zero => 0,
            NoiseMode::UniformRandom => {
                let mut rng = self.query_rng(0x4e4f_4953, j as u64, seed);
                let u: f64 = rng.gen_range(-tau..=tau);
                u.trunc() as i64
            }
            NoiseMode::AdversarialSign => {
                // Push away from the nearest pseudo-period peak y ≈ a·q/S.
                let s = self.params.m1m() as f64 / self.instance.w_star[j];
                let peak_spacing = q as f64 / s;
                let nearest = (y as f64 / peak_spacing).round() * peak_spacing;
                let dir = if (y as f64) >= nearest { 1 } else { -1 };
                dir * tau.floor() as i64
            }
        };
        (y as i64 + shift).rem_euclid(q as i64) as u64
    }

    // ===================================================================
    // Shift correlation
    // ===================================================================

    /// Answers the shift-correlation query `⟨O_{k,m}⟩` for shift `T` along
    /// coordinate `k` at harmonic `m`, through the chosen backend, with
    /// noise and dyadic rounding applied inside the tolerance.
    pub fn shift_correlation(
        &self,
        k: usize,
        shift: i64,
        harmonic: u32,
        backend: Backend,
        seed: u64,
    ) -> OracleResult<QsqResponse> {
        if self.params.truncation_mode != TruncationMode::Verification {
            return Err(OracleError::InvalidQuery(
                "shift_correlation requires Verification truncation mode".into(),
            ));
        }
        if k >= self.instance.d {
            return Err(OracleError::InvalidQuery(format!("coordinate {k} out of range for d = {}", self.instance.d)));
        }
        let params = self.params_for_harmonic(harmonic)?;
        let radius = params.radius()?;
        if shift.unsigned_abs() > radius {
            return Err(OracleError::InvalidQuery(format!(
                "shift T = {shift} outside the truncated domain (radius {radius})"
            )));
        }
        let (value, budget) = match backend {
            Backend::Brute => {
                let v = brute::shift_correlation_exact(
                    &self.instance,
                    &self.dist,
                    params,
                    k,
                    shift,
                    self.config.brute_point_cap,
                )?;
                (v, 0.0)
            }
            Backend::Analytic => analytic::shift_correlation_analytic(
                &self.instance,
                &self.dist,
                params,
                k,
                shift,
                &self.config,
            )?,
        };
        let tau = self.noise.tau;
        if budget > tau / 2.0 {
            return Err(OracleError::BackendBudgetExceeded { budget, half_tau: tau / 2.0 });
        }
        let alpha = self.perturb_real(value, budget, k, shift, harmonic, seed);
        self.shift_count.fetch_add(1, Ordering::Relaxed);
        let response = QsqResponse { alpha, backend, error_budget: budget };
        self.record_trace(QsqTraceRecord {
            index: self.query_counts().total(),
            query: QsqQuery {
                observable: ObservableKind::ShiftCorrelation { coordinate: k, shift, harmonic },
                tau,
            },
            value: alpha,
            backend: match backend {
                Backend::Brute => "brute".into(),
                Backend::Analytic => "analytic".into(),
            },
            error_budget: budget,
            seed,
        });
        Ok(response)
    }

    /// Exact expectation via full enumeration — the reference oracle used to
    /// validate both production backends and the Fourier distribution.
    pub fn brute_force_expectation(&self, observable: &ObservableKind) -> OracleResult<f64> {
        match *observable {
            ObservableKind::ShiftCorrelation { coordinate, shift, harmonic } => {
                let params = self.params_for_harmonic(harmonic)?;
                brute::shift_correlation_exact(
                    &self.instance,
                    &self.dist,
                    params,
                    coordinate,
                    shift,
                    self.config.brute_point_cap,
                )
            }
            ObservableKind::FourierSample { coordinate: _, q } => {
                let params = self.require_fourier_mode()?;
                let radius = params.radius()?;
                if q != 2 * radius {
                    return Err(OracleError::InvalidQuery(format!(
                        "q = {q} does not match 2R = {}",
                        2 * radius
                    )));
                }
                if self.instance.d != 1 {
                    return Err(OracleError::InvalidQuery(
                        "brute Fourier expectation is defined for d = 1 (slices are seeded)".into(),
                    ));
                }
                let disc = Discretizer::new(&self.instance, params)?;
                let probs =
                    brute::fourier_distribution_naive(&disc, &self.dist, 0, &[0], self.config.brute_point_cap)?;
                Ok(probs.iter().enumerate().map(|(y, p)| (y as f64 / q as f64) * p).sum())
            }
        }
    }

    /// Exact slice distribution by naive O(q²) summation (tiny `q` only) —
    /// an independent check of the grouped engine.
    pub fn fourier_distribution_naive(&self, j: usize, seed: u64) -> OracleResult<Vec<f64>> {
        let params = self.require_fourier_mode()?;
        let mut rng = self.query_rng(0x464f_5552, j as u64, seed);
        let others = self.draw_slice(j, &mut rng)?;
        let disc = Discretizer::new(&self.instance, params)?;
        brute::fourier_distribution_naive(&disc, &self.dist, j, &others, self.config.brute_point_cap)
    }

    // ===================================================================
    // Noise plumbing
    // ===================================================================

    fn query_rng(&self, tag: u64, a: u64, seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(mix(mix(self.noise.seed, tag), mix(a, seed)))
    }

    fn perturb_real(&self, value: f64, budget: f64, k: usize, shift: i64, m: u32, seed: u64) -> f64 {
        let avail = (self.noise.tau - budget).max(0.0);
        let noisy = match self.noise.mode {
            NoiseMode::Zero => value,
            NoiseMode::UniformRandom => {
                if avail > 0.0 {
                    let mut rng =
                        self.query_rng(0x5348_4946, mix(k as u64, shift as u64), mix(m as u64, seed));
                    value + rng.gen_range(-avail..=avail)
                } else {
                    value
                }
            }
            NoiseMode::AdversarialSign => {
                // Push toward zero: the direction that fights the Step-3
                // lower-bound check on true periods.
                if value >= 0.0 {
                    value - avail
                } else {
                    value + avail
                }
            }
        };
        // Keep |noisy - value| ≤ avail strictly despite rounding.
        let noisy = noisy.clamp(value - avail, value + avail);
        dyadic_round_within(noisy, value, avail)
    }
}

/// Rounds `x` to the nearest multiple of 2⁻⁶⁴ when that keeps the total
/// perturbation from `anchor` within `avail`; otherwise returns `x`
/// unchanged (every finite f64 is itself a dyadic rational).
fn dyadic_round_within(x: f64, anchor: f64, avail: f64) -> f64 {
    const TWO64: f64 = 18_446_744_073_709_551_616.0;
    let scaled = x * TWO64;
    if !scaled.is_finite() || scaled.abs() >= 9.0e15 {
        // Spacing already coarser than 2⁻⁶⁴; x is a 64-bit dyadic as-is.
        return x;
    }
    let rounded = scaled.round() / TWO64;
    if (rounded - anchor).abs() <= avail || rounded == x {
        rounded
    } else {
        x
    }
}

/// Stable 64-bit mixing for seed derivation.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.rotate_left(23) ^ 0x9E37_79B9_7F4A_7C15;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inverse-CDF draw from a probability vector.
fn sample_index(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

// =======================================================================
// Tests
// =======================================================================
