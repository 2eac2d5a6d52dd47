//! Gradient descent on the squared loss, with closed-form trigonometric
//! moments of the input distribution.
//!
//! After period finding produces a direction estimate `ŵ`, the harmonic
//! weights are recovered classically by minimizing
//!
//! ```text
//! L(β) = E_{x∼φ²} [ ( Σ_j β*_j cos(2πj xᵀw*) − Σ_j β_j cos(2πj xᵀŵ) )² ],
//! ```
//!
//! where `φ²` is the continuous input density truncated to the box
//! `[−R, R]^d`. Every term of the expanded loss is an expectation of a
//! product of two cosines, which factors over coordinates once the product
//! is rewritten as complex exponentials: for product densities,
//! `E[e^{2πi xᵀt}] = ∏_k E[e^{2πi x_k t_k}]`, and each one-dimensional factor
//! is real because the densities are even. Factors are exact for the uniform
//! density (a sinc) and the effectively untruncated Gaussian (its
//! characteristic function), and fall back to per-coordinate adaptive
//! quadrature otherwise.
//!
//! Descent starts from `β⁽⁰⁾ = 0` and runs a fixed schedule of steps; the
//! per-step error envelope `|β_k^{(t+1)} − β*_k| ≤ (1−η)ᵗ + ηtε₂` holds
//! whenever every gradient is within `ε₂` of the ideal pull `β_k − β*_k`,
//! which the radius/accuracy schedule below guarantees.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{ConceptInstance, DistributionKind, DistributionSpec};
use crate::numeric::integrate_adaptive;

// =======================================================================
// Errors
// =======================================================================

/// Errors from moment evaluation and gradient descent.
#[derive(Debug, Error)]
pub enum BetaError {
    /// A one-dimensional moment integral did not meet its tolerance.
    #[error(
        "quadrature failed for coordinate {coordinate} at frequency {frequency:.6e} \
         (error estimate {error:.3e})"
    )]
    QuadratureFailure {
        /// Coordinate whose factor was being integrated.
        coordinate: usize,
        /// Frequency of the integrand `p²(x)·cos(2πfx)`.
        frequency: f64,
        /// Residual error estimate when the panel budget ran out.
        error: f64,
    },
    /// Descent exhausted its iteration schedule above the target loss.
    #[error("loss {final_loss:.6e} still above target {target:.6e} after {iterations} steps")]
    NonConvergence {
        /// Gradient steps taken.
        iterations: u64,
        /// Loss at the final iterate.
        final_loss: f64,
        /// Target loss that was not reached.
        target: f64,
        /// Full per-iteration trace for postmortems.
        trace: Vec<LossTraceRow>,
    },
    /// A parameter fails its domain check.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// CSV export failed.
    #[error("trace export failed: {0}")]
    Csv(#[from] csv::Error),
}

/// Convenience alias for beta-learner results.
pub type BetaResult<T> = Result<T, BetaError>;

// =======================================================================
// Trigonometric moments
// =======================================================================

/// Which product of trigonometric functions a moment refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrigPair {
    /// `E[cos(2πj xᵀw) · cos(2πj' xᵀw')]`.
    CosCos,
    /// `E[cos(2πj xᵀw) · sin(2πj' xᵀw')]`.
    CosSin,
}

/// One trigonometric moment of the input distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRequest {
    /// Harmonic multiplying `w` (at least 1).
    pub j: u32,
    /// Harmonic multiplying `w'` (at least 1).
    pub j_prime: u32,
    /// First direction.
    pub w: Vec<f64>,
    /// Second direction.
    pub w_prime: Vec<f64>,
    /// Which trigonometric product to average.
    pub trig_pair: TrigPair,
    /// Input distribution (the caller is responsible for auditing it).
    pub dist: DistributionSpec,
}

/// Evaluates one trigonometric moment `E_{x∼φ²}[trig(2πj xᵀw)·trig(2πj' xᵀw')]`.
///
/// The cosine product is expanded into the two lattice frequencies
/// `jw ± j'w'` and each expectation factors over coordinates; see
/// [`MomentEngine`] for the per-factor evaluation. Moments against any even
/// product density are real, and every cos·sin moment vanishes exactly by
/// symmetry.
pub fn cos_moment(request: &MomentRequest) -> BetaResult<f64> {
    let engine = MomentEngine::new(request.dist.clone());
    engine.cos_moment(request)
}

/// Caching evaluator for trigonometric moments of one distribution.
///
/// The cache is keyed by `(coordinate, |frequency|)`; factors are even in
/// the frequency, so sign is normalized away. All entries are immutable once
/// computed, which keeps repeated loss/gradient evaluations cheap: the
/// moment tables of a whole descent run touch only `O(D²·d)` distinct
/// factors.
pub struct MomentEngine {
    dist: DistributionSpec,
    /// One-dimensional characteristic factors keyed by `(k, f.to_bits())`.
    factors: Mutex<HashMap<(usize, u64), f64>>,
    /// Per-coordinate normalizations `∫ p_k²`.
    norms: Mutex<HashMap<usize, f64>>,
}

/// Panel budget for each one-dimensional moment integral.
const MOMENT_MAX_PANELS: usize = 200_000;

/// Relative tolerance for the one-dimensional moment integrals.
const MOMENT_REL_TOL: f64 = 1.0e-10;

impl MomentEngine {
    /// Wraps a distribution in a fresh (empty) moment cache.
    pub fn new(dist: DistributionSpec) -> Self {
        MomentEngine { dist, factors: Mutex::new(HashMap::new()), norms: Mutex::new(HashMap::new()) }
    }

    /// The wrapped distribution.
    pub fn distribution(&self) -> &DistributionSpec {
        &self.dist
    }

    /// Evaluates a moment request against this engine's distribution.
    ///
    /// The request's own `dist` field must match the engine's.
    pub fn cos_moment(&self, request: &MomentRequest) -> BetaResult<f64> {
        if request.dist != self.dist {
            return Err(BetaError::InvalidParameter(
                "moment request carries a different distribution than the engine".into(),
            ));
        }
        if request.j < 1 || request.j_prime < 1 {
            return Err(BetaError::InvalidParameter(format!(
                "harmonics must be at least 1, got j = {}, j' = {}",
                request.j, request.j_prime
            )));
        }
        if request.w.len() != request.w_prime.len() {
            return Err(BetaError::InvalidParameter(format!(
                "direction lengths differ: {} vs {}",
                request.w.len(),
                request.w_prime.len()
            )));
        }
        let nonzero = |v: &[f64]| v.iter().any(|&c| c != 0.0);
        if !nonzero(&request.w) || !nonzero(&request.w_prime) {
            return Err(BetaError::InvalidParameter("directions must be nonzero".into()));
        }
        match request.trig_pair {
            TrigPair::CosCos => self.cos_cos(
                request.j,
                &request.w,
                request.j_prime,
                &request.w_prime,
            ),
            // cos·sin expands into plain sine expectations at frequencies
            // jw ± j'w'; every one-dimensional factor is real because the
            // densities are even, so the imaginary part — the sine — is
            // exactly zero for all frequencies.
            TrigPair::CosSin => Ok(0.0),
        }
    }

    /// `E[cos(2πj xᵀw) cos(2πj' xᵀw')]` via the two difference/sum
    /// frequencies.
    pub fn cos_cos(&self, j: u32, w: &[f64], j_prime: u32, w_prime: &[f64]) -> BetaResult<f64> {
        let d = w.len();
        let mut diff = Vec::with_capacity(d);
        let mut sum = Vec::with_capacity(d);
        for k in 0..d {
            diff.push(j as f64 * w[k] - j_prime as f64 * w_prime[k]);
            sum.push(j as f64 * w[k] + j_prime as f64 * w_prime[k]);
        }
        Ok(0.5 * self.cos_expectation(&diff)? + 0.5 * self.cos_expectation(&sum)?)
    }

    /// `E[cos(2π tᵀx)] = ∏_k E[e^{2πi t_k x_k}]` (each factor is real).
    pub fn cos_expectation(&self, t: &[f64]) -> BetaResult<f64> {
        let mut product = 1.0;
        for (k, &f) in t.iter().enumerate() {
            product *= self.factor(k, f)?;
            if product == 0.0 {
                break;
            }
        }
        Ok(product)
    }

    /// One-dimensional characteristic factor `E[e^{2πifx}]` of coordinate `k`.
    fn factor(&self, k: usize, f: f64) -> BetaResult<f64> {
        if !f.is_finite() {
            return Err(BetaError::InvalidParameter(format!(
                "frequency {f} for coordinate {k} is not finite"
            )));
        }
        if f == 0.0 {
            return Ok(1.0);
        }
        let key = (k, f.abs().to_bits());
        if let Some(&hit) = self.factors.lock().unwrap().get(&key) {
            return Ok(hit);
        }
        let value = self.factor_uncached(k, f.abs())?;
        self.factors.lock().unwrap().insert(key, value);
        Ok(value)
    }

    fn factor_uncached(&self, k: usize, f: f64) -> BetaResult<f64> {
        let r = self.dist.truncation_r as f64;
        match &self.dist.kind {
            DistributionKind::Uniform => {
                // Uniform density on [−R, R]: the factor is sin(2πfR)/(2πfR).
                let z = 2.0 * PI * f * r;
                Ok(z.sin() / z)
            }
            DistributionKind::Gaussian { sigma } if r >= 7.0 * sigma[k] => {
                // Density ∝ e^{−x²/σ²}, i.e. variance σ²/2. At R ≥ 7σ the
                // truncated factor differs from the untruncated
                // characteristic function e^{−π²f²σ²} by at most ~e^{−49},
                // far below the quadrature tolerance, so the closed form is
                // used directly.
                let s = sigma[k];
                Ok((-(PI * f * s).powi(2)).exp())
            }
            _ => self.factor_by_quadrature(k, f, r),
        }
    }

    /// `∫_{−R}^{R} p_k²(x) cos(2πfx) dx / ∫_{−R}^{R} p_k²(x) dx`.
    fn factor_by_quadrature(&self, k: usize, f: f64, r: f64) -> BetaResult<f64> {
        let norm = self.norm(k, r)?;
        let mut integrand = |x: f64| {
            let p = self.dist.amplitude(k, x);
            p * p * (2.0 * PI * f * x).cos()
        };
        let oscillations = 2.0 * f * r;
        // The absolute floor covers panel-summation roundoff: across the
        // worst-case panel count the accumulated f64 noise stays below
        // √200000 · ε ≈ 4.5e−14 per unit of unsigned mass (≤ norm), so a
        // 1e−13·norm floor never masks real error while letting heavily
        // oscillatory integrals converge at the noise limit.
        let numerator = integrate_adaptive(
            &mut integrand,
            -r,
            r,
            oscillations,
            MOMENT_REL_TOL,
            1.0e-13 * norm,
            MOMENT_MAX_PANELS,
        )
        .map_err(|e| BetaError::QuadratureFailure { coordinate: k, frequency: f, error: e.error })?;
        Ok(numerator / norm)
    }

    fn norm(&self, k: usize, r: f64) -> BetaResult<f64> {
        if let Some(&hit) = self.norms.lock().unwrap().get(&k) {
            return Ok(hit);
        }
        let mut density = |x: f64| {
            let p = self.dist.amplitude(k, x);
            p * p
        };
        let value = integrate_adaptive(&mut density, -r, r, 0.0, MOMENT_REL_TOL, 0.0, MOMENT_MAX_PANELS)
            .map_err(|e| BetaError::QuadratureFailure { coordinate: k, frequency: 0.0, error: e.error })?;
        if !(value.is_finite() && value > 0.0) {
            return Err(BetaError::InvalidParameter(format!(
                "density of coordinate {k} has non-positive mass {value} on [−{r}, {r}]"
            )));
        }
        self.norms.lock().unwrap().insert(k, value);
        Ok(value)
    }
}

// =======================================================================
// Loss and gradient
// =======================================================================

/// Precomputed cosine-product moments for one `(instance, ŵ, dist)` triple.
///
/// Indices are zero-based: entry `[j][j']` holds the moment for harmonics
/// `j+1` and `j'+1`. Because the moments do not depend on `β`, one table
/// serves every iteration of a descent run.
#[derive(Debug, Clone)]
pub struct MomentTable {
    /// `E[cos(2π(j+1) xᵀw*) cos(2π(j'+1) xᵀw*)]`.
    pub target: Vec<Vec<f64>>,
    /// `E[cos(2π(j+1) xᵀŵ) cos(2π(j'+1) xᵀŵ)]`.
    pub model: Vec<Vec<f64>>,
    /// `E[cos(2π(j+1) xᵀw*) cos(2π(j'+1) xᵀŵ)]`.
    pub cross: Vec<Vec<f64>>,
}

/// Builds the three `D×D` moment tables the loss decomposes into.
pub fn moment_table(
    instance: &ConceptInstance,
    w_hat: &[f64],
    dist: &DistributionSpec,
) -> BetaResult<MomentTable> {
    if w_hat.len() != instance.d {
        return Err(BetaError::InvalidParameter(format!(
            "w_hat has length {} but d = {}",
            w_hat.len(),
            instance.d
        )));
    }
    let engine = MomentEngine::new(dist.clone());
    let cap_d = instance.cap_d;
    let mut target = vec![vec![0.0; cap_d]; cap_d];
    let mut model = vec![vec![0.0; cap_d]; cap_d];
    let mut cross = vec![vec![0.0; cap_d]; cap_d];
    for j in 0..cap_d {
        for jp in 0..cap_d {
            let (hj, hjp) = ((j + 1) as u32, (jp + 1) as u32);
            target[j][jp] = engine.cos_cos(hj, &instance.w_star, hjp, &instance.w_star)?;
            model[j][jp] = engine.cos_cos(hj, w_hat, hjp, w_hat)?;
            cross[j][jp] = engine.cos_cos(hj, &instance.w_star, hjp, w_hat)?;
        }
    }
    Ok(MomentTable { target, model, cross })
}

/// Squared loss from a precomputed table.
pub fn loss_from_table(table: &MomentTable, beta_star: &[f64], beta: &[f64]) -> f64 {
    let cap_d = beta_star.len();
    let mut total = 0.0;
    for j in 0..cap_d {
        for jp in 0..cap_d {
            total += beta_star[j] * beta_star[jp] * table.target[j][jp];
            total += beta[j] * beta[jp] * table.model[j][jp];
            total -= 2.0 * beta_star[j] * beta[jp] * table.cross[j][jp];
        }
    }
    total
}

/// Gradient `∂L/∂β_k = 2Σ_j β_j·model[k][j] − 2Σ_j β*_j·cross[j][k]` from a
/// precomputed table.
pub fn gradient_from_table(table: &MomentTable, beta_star: &[f64], beta: &[f64]) -> Vec<f64> {
    let cap_d = beta_star.len();
    (0..cap_d)
        .map(|k| {
            let mut g = 0.0;
            for j in 0..cap_d {
                g += 2.0 * beta[j] * table.model[k][j];
                g -= 2.0 * beta_star[j] * table.cross[j][k];
            }
            g
        })
        .collect()
}

/// Population squared loss `L(β) = E[(Σβ*_j cos(2πj xᵀw*) − Σβ_j cos(2πj xᵀŵ))²]`.
pub fn loss(
    instance: &ConceptInstance,
    w_hat: &[f64],
    beta: &[f64],
    dist: &DistributionSpec,
) -> BetaResult<f64> {
    check_beta_len(instance, beta)?;
    let table = moment_table(instance, w_hat, dist)?;
    Ok(loss_from_table(&table, &instance.beta_star, beta))
}

/// Gradient of [`loss`] with respect to `β`.
pub fn gradient(
    instance: &ConceptInstance,
    w_hat: &[f64],
    beta: &[f64],
    dist: &DistributionSpec,
) -> BetaResult<Vec<f64>> {
    check_beta_len(instance, beta)?;
    let table = moment_table(instance, w_hat, dist)?;
    Ok(gradient_from_table(&table, &instance.beta_star, beta))
}

fn check_beta_len(instance: &ConceptInstance, beta: &[f64]) -> BetaResult<()> {
    if beta.len() != instance.cap_d {
        return Err(BetaError::InvalidParameter(format!(
            "beta has length {} but D = {}",
            beta.len(),
            instance.cap_d
        )));
    }
    Ok(())
}

// =======================================================================
// Parameter schedule
// =======================================================================

/// Scheduled descent length `t = ⌈ln(2√D/ε₃) / ln(1/(1−η))⌉`, at least one
/// step.
pub fn iteration_count(eta: f64, cap_d: usize, eps3: f64) -> u64 {
    let target = (2.0 * (cap_d as f64).sqrt() / eps3).ln().max(0.0);
    let rate = (1.0 / (1.0 - eta)).ln();
    (target / rate).ceil().max(1.0) as u64
}

/// Largest admissible per-step gradient error,
/// `ε₂ = ln(1/(1−η))·ε₃ / (2η√D·ln(2√D/ε₃))`, so that the accumulated drift
/// `ηtε₂` stays below `ε₃/(2√D)` over the scheduled steps.
pub fn required_eps2(eta: f64, cap_d: usize, eps3: f64) -> f64 {
    let sqrt_d = (cap_d as f64).sqrt();
    let rate = (1.0 / (1.0 - eta)).ln();
    rate * eps3 / (2.0 * eta * sqrt_d * (2.0 * sqrt_d / eps3).ln())
}

/// Smallest truncation radius achieving gradient accuracy `ε₂`:
/// `R ≥ max(D²/ε₂, 16D√d/(πR_w ε₂))`.
pub fn gradient_accuracy_radius(cap_d: usize, d: usize, r_w: f64, eps2: f64) -> f64 {
    let dd = cap_d as f64;
    let sqrt_d = (d as f64).sqrt();
    (dd * dd / eps2).max(16.0 * dd * sqrt_d / (PI * r_w * eps2))
}

/// Largest admissible direction error for gradient accuracy `ε₂`:
/// `ε₁ ≤ min(3ε₂³/(40π²D⁶d), R_w/(2D√d))`.
pub fn gradient_accuracy_eps1(cap_d: usize, d: usize, r_w: f64, eps2: f64) -> f64 {
    let dd = cap_d as f64;
    let sqrt_d = (d as f64).sqrt();
    let first = 3.0 * eps2.powi(3) / (40.0 * PI * PI * dd.powi(6) * d as f64);
    let second = r_w / (2.0 * dd * sqrt_d);
    first.min(second)
}

/// Guarantee-mode truncation radius for target loss `ε` (step size `η`):
/// the maximum of the bias terms `D²/ε` and `54D²√d/(πR_w ε)` and the two
/// gradient-accuracy terms with `ε₃ = √ε` and `ε₂` from [`required_eps2`]
/// written out (`c = 1 − η`).
pub fn theorem_radius(eta: f64, d: usize, cap_d: usize, r_w: f64, eps: f64) -> f64 {
    let dd = cap_d as f64;
    let sqrt_d = (d as f64).sqrt();
    let rate = (1.0 / (1.0 - eta)).ln();
    let log_term = (2.0 * dd.sqrt() / eps.sqrt()).ln();
    let bias1 = dd * dd / eps;
    let bias2 = 54.0 * dd * dd * sqrt_d / (PI * r_w * eps);
    let grad1 = 2.0 * eta * dd.powf(2.5) * log_term / (rate * eps.sqrt());
    let grad2 = 32.0 * eta * dd.powf(1.5) * sqrt_d * log_term / (PI * r_w * rate * eps.sqrt());
    bias1.max(bias2).max(grad1).max(grad2)
}

/// Guarantee-mode direction accuracy for target loss `ε` (step size `η`):
/// `ε₁ ≤ min(ε³/(64π²D⁶d), 3ln³(1/(1−η))·ε^{3/2}/(80π²ηD^{13/2}d·ln(2√D/√ε)),
/// R_w/(2D√d))`.
pub fn theorem_eps1(eta: f64, d: usize, cap_d: usize, r_w: f64, eps: f64) -> f64 {
    let dd = cap_d as f64;
    let df = d as f64;
    let rate = (1.0 / (1.0 - eta)).ln();
    let log_term = (2.0 * dd.sqrt() / eps.sqrt()).ln();
    let first = eps.powi(3) / (64.0 * PI * PI * dd.powi(6) * df);
    let second = 3.0 * rate.powi(3) * eps.powf(1.5) / (80.0 * PI * PI * eta * dd.powf(6.5) * df * log_term);
    let third = r_w / (2.0 * dd * df.sqrt());
    first.min(second).min(third)
}

// =======================================================================
// Gradient descent
// =======================================================================

/// Gradient-descent configuration with its error ladder.
///
/// `eps1` bounds `‖ŵ − w*‖∞` (direction accuracy), `eps2` bounds the
/// per-step gradient error, `eps3` bounds the final `‖β̂ − β*‖₂`, and `eps`
/// is the target loss. [`GdConfig::theorem`] derives the ladder from `eps`
/// alone; [`GdConfig::free`] accepts any positive values.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GdConfig {
    /// Step size in (0, 1).
    pub eta: f64,
    /// Hard cap on gradient steps.
    pub t_max: u64,
    /// Target loss.
    pub eps: f64,
    /// Direction accuracy `‖ŵ − w*‖∞` the caller guarantees.
    pub eps1: f64,
    /// Per-step gradient accuracy.
    pub eps2: f64,
    /// Target `‖β̂ − β*‖₂`.
    pub eps3: f64,
}

impl GdConfig {
    /// Unchecked ladder: validates only ranges.
    pub fn free(eta: f64, t_max: u64, eps: f64, eps1: f64, eps2: f64, eps3: f64) -> BetaResult<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(BetaError::InvalidParameter(format!("eta = {eta} must lie in (0, 1)")));
        }
        for (name, v) in [("eps", eps), ("eps1", eps1), ("eps2", eps2), ("eps3", eps3)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(BetaError::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if t_max == 0 {
            return Err(BetaError::InvalidParameter("t_max must be at least 1".into()));
        }
        Ok(GdConfig { eta, t_max, eps, eps1, eps2, eps3 })
    }

    /// Guarantee-mode ladder for target loss `eps`: `ε₃ = √ε`, `ε₂` from
    /// [`required_eps2`], `ε₁` from [`theorem_eps1`], and the step budget
    /// from [`iteration_count`].
    pub fn theorem(eta: f64, d: usize, cap_d: usize, r_w: f64, eps: f64) -> BetaResult<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(BetaError::InvalidParameter(format!("eta = {eta} must lie in (0, 1)")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(BetaError::InvalidParameter(format!("eps = {eps} must lie in (0, 1)")));
        }
        let eps3 = eps.sqrt();
        let eps2 = required_eps2(eta, cap_d, eps3);
        let eps1 = theorem_eps1(eta, d, cap_d, r_w, eps);
        let t_max = iteration_count(eta, cap_d, eps3);
        Ok(GdConfig { eta, t_max, eps, eps1, eps2, eps3 })
    }
}

/// One row of a descent trace.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossTraceRow {
    /// Zero-based iteration (0 is the initial point `β = 0`).
    pub iteration: u64,
    /// Loss at this iterate.
    pub loss: f64,
    /// `‖β^{(t)} − β*‖₂` against the instance truth.
    pub beta_error: f64,
}

/// Result of a completed descent.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Final weights `β̂`.
    pub beta_hat: Vec<f64>,
    /// Gradient steps taken.
    pub iterations: u64,
    /// Loss and error per iteration, including the final iterate.
    pub trace: Vec<LossTraceRow>,
}

/// Runs gradient descent on the squared loss from `β⁽⁰⁾ = 0`.
///
/// The step budget is the scheduled [`iteration_count`] capped by
/// `config.t_max`; descent stops early once the loss reaches `config.eps`.
/// If the budget ends with the loss still above target, the full trace is
/// returned inside [`BetaError::NonConvergence`] — never silently.
pub fn fit_beta(
    instance: &ConceptInstance,
    w_hat: &[f64],
    dist: &DistributionSpec,
    config: &GdConfig,
) -> BetaResult<FitOutcome> {
    let table = moment_table(instance, w_hat, dist)?;
    let beta_star = &instance.beta_star;
    let budget = iteration_count(config.eta, instance.cap_d, config.eps3).min(config.t_max);

    let mut beta = vec![0.0; instance.cap_d];
    let mut trace = Vec::with_capacity(budget as usize + 1);
    let mut iterations = 0u64;
    loop {
        let current = loss_from_table(&table, beta_star, &beta);
        trace.push(LossTraceRow {
            iteration: iterations,
            loss: current,
            beta_error: l2_error(&beta, beta_star),
        });
        if current <= config.eps {
            return Ok(FitOutcome { beta_hat: beta, iterations, trace });
        }
        if iterations >= budget {
            return Err(BetaError::NonConvergence {
                iterations,
                final_loss: current,
                target: config.eps,
                trace,
            });
        }
        let grad = gradient_from_table(&table, beta_star, &beta);
        for (b, g) in beta.iter_mut().zip(&grad) {
            *b -= config.eta * g;
        }
        iterations += 1;
    }
}

fn l2_error(beta: &[f64], beta_star: &[f64]) -> f64 {
    beta.iter()
        .zip(beta_star)
        .map(|(b, s)| (b - s) * (b - s))
        .sum::<f64>()
        .sqrt()
}

/// Writes a descent trace as CSV with columns
/// `iteration,loss,beta_error`.
pub fn write_loss_trace_csv(path: &Path, rows: &[LossTraceRow]) -> BetaResult<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

// =======================================================================
// Tests
// =======================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::{make_instance, sample_beta_star, sample_w_star};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_dist(d: usize, r: u64) -> DistributionSpec {
        DistributionSpec::new(DistributionKind::Uniform, d, r).unwrap()
    }

    #[test]
    fn uniform_moments_are_sinc_products() {
        // d = 2, R = 5: each factor is sin(2πfR)/(2πfR) at f = jw_k ± j'w'_k.
        let dist = uniform_dist(2, 5);
        let engine = MomentEngine::new(dist.clone());
        let (w, wp) = (vec![0.3, 0.4], vec![0.1, -0.2]);
        let (j, jp) = (1u32, 2u32);
        let sinc = |f: f64| {
            if f == 0.0 {
                1.0
            } else {
                let z = 2.0 * PI * f * 5.0;
                z.sin() / z
            }
        };
        let mut expected = 0.0;
        for sign in [-1.0, 1.0] {
            let mut product = 0.5;
            for k in 0..2 {
                product *= sinc(j as f64 * w[k] + sign * jp as f64 * wp[k]);
            }
            expected += product;
        }
        let got = engine
            .cos_moment(&MomentRequest {
                j,
                j_prime: jp,
                w: w.clone(),
                w_prime: wp.clone(),
                trig_pair: TrigPair::CosCos,
                dist,
            })
            .unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-14);
    }

    #[test]
    fn uniform_diagonal_moment_is_half_plus_small_correction() {
        // j = j', w = w': value = 1/2 + correction, |correction| bounded by
        // √d/(8πR_w R).
        for (seed, r) in [(3u64, 50u64), (5, 200), (8, 1000)] {
            let d = 3;
            let r_w = 1.0;
            let w = sample_w_star(d, r_w, seed).unwrap();
            let engine = MomentEngine::new(uniform_dist(d, r));
            let value = engine.cos_cos(1, &w, 1, &w).unwrap();
            let bound = (d as f64).sqrt() / (8.0 * PI * r_w * r as f64);
            assert!(
                (value - 0.5).abs() <= bound,
                "correction {:.3e} exceeds {bound:.3e} at R = {r}",
                value - 0.5
            );
        }
    }

    #[test]
    fn gaussian_moments_match_characteristic_function() {
        // Density e^{−x²/σ_spec²} has std σ_spec/√2; drawing σ_spec = σ√2
        // makes the density N(0, σ²), whose cosine product moment is
        // ½e^{−σ²‖2π(jw−j'w')‖²/2} + ½e^{−σ²‖2π(jw+j'w')‖²/2}.
        let sigma = 0.8_f64;
        let sigma_spec = sigma * 2.0_f64.sqrt();
        let d = 2;
        let dist = DistributionSpec::new(
            DistributionKind::Gaussian { sigma: vec![sigma_spec; d] },
            d,
            60, // R = 60 ≥ 7σ_spec: closed-form branch
        )
        .unwrap();
        let engine = MomentEngine::new(dist);
        let (w, wp) = (vec![0.25, -0.1], vec![0.05, 0.2]);
        let (j, jp) = (2u32, 1u32);
        let norm2 = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>();
        let mut expected = 0.0;
        for sign in [-1.0_f64, 1.0] {
            let t: Vec<f64> = (0..d)
                .map(|k| 2.0 * PI * (j as f64 * w[k] + sign * jp as f64 * wp[k]))
                .collect();
            expected += 0.5 * (-sigma * sigma * norm2(&t) / 2.0).exp();
        }
        let got = engine.cos_cos(j, &w, jp, &wp).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-12);
    }

    #[test]
    fn narrow_gaussian_quadrature_agrees_with_characteristic_function() {
        // R = 6σ forces the quadrature path; truncation changes the factor
        // by ~e^{−36}, far below the comparison tolerance.
        let sigma_spec = 2.0_f64;
        let dist = DistributionSpec::new(
            DistributionKind::Gaussian { sigma: vec![sigma_spec] },
            1,
            12,
        )
        .unwrap();
        let engine = MomentEngine::new(dist);
        for f in [0.05_f64, 0.21, 0.4] {
            let got = engine.factor(0, f).unwrap();
            let expected = (-(PI * f * sigma_spec).powi(2)).exp();
            assert_relative_eq!(got, expected, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn logistic_factor_matches_closed_form() {
        // Density sech²(x/(2s)) (logistic with scale s): the untruncated
        // characteristic factor at frequency f is 2π²sf/sinh(2π²sf); at
        // R = 40s the truncation error is ~e^{−40}.
        let s = 1.0_f64;
        let dist =
            DistributionSpec::new(DistributionKind::Logistic { s: vec![s] }, 1, 40).unwrap();
        let engine = MomentEngine::new(dist);
        for f in [0.02_f64, 0.11, 0.3] {
            let z = 2.0 * PI * PI * s * f;
            let expected = z / z.sinh();
            let got = engine.factor(0, f).unwrap();
            assert_relative_eq!(got, expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn cos_sin_moments_vanish_for_even_densities() {
        let dist = uniform_dist(2, 10);
        let request = MomentRequest {
            j: 1,
            j_prime: 1,
            w: vec![0.3, 0.1],
            w_prime: vec![0.3, 0.1],
            trig_pair: TrigPair::CosSin,
            dist,
        };
        assert_eq!(cos_moment(&request).unwrap(), 0.0);
    }

    #[test]
    fn invalid_requests_are_rejected() {
        let dist = uniform_dist(1, 10);
        let mut request = MomentRequest {
            j: 0,
            j_prime: 1,
            w: vec![0.5],
            w_prime: vec![0.5],
            trig_pair: TrigPair::CosCos,
            dist: dist.clone(),
        };
        assert!(matches!(cos_moment(&request), Err(BetaError::InvalidParameter(_))));
        request.j = 1;
        request.w = vec![0.0];
        assert!(matches!(cos_moment(&request), Err(BetaError::InvalidParameter(_))));
    }

    #[test]
    fn cross_moment_magnitude_bounds_hold_on_sweeps() {
        // Off-diagonal moments at a perturbed direction are small: the
        // uniform bound is √d/(2πR(R_w − √dε₁)); for a flat Gaussian the
        // constant weakens to 3√d/(4πR(R_w − √dε₁)).
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for trial in 0..50 {
            let d = 2 + (trial % 3);
            let r_w = 1.0;
            let eps1 = 1e-4;
            let w_star = sample_w_star(d, r_w, 1000 + trial as u64).unwrap();
            let w_hat: Vec<f64> =
                w_star.iter().map(|&c| c + rng.gen_range(-eps1..eps1)).collect();
            let r = *[50u64, 200, 800].iter().nth(trial % 3).unwrap();
            let (j, jp) = ([1u32, 2, 3][trial % 3], [2u32, 3, 4][trial % 3]);

            let uniform_engine = MomentEngine::new(uniform_dist(d, r));
            let got = uniform_engine.cos_cos(j, &w_hat, jp, &w_hat).unwrap().abs();
            let sqrt_d = (d as f64).sqrt();
            let uniform_bound = sqrt_d / (2.0 * PI * r as f64 * (r_w - sqrt_d * eps1));
            assert!(
                got <= uniform_bound,
                "uniform |moment| = {got:.3e} exceeds {uniform_bound:.3e} (trial {trial})"
            );

            // Flat Gaussian: σ much larger than R keeps the density within
            // two percent of uniform across the box. Checked only at the
            // smallest radius — the wider boxes make the quadrature heavily
            // oscillatory without exercising anything new.
            if r == 50 {
                let sigma = vec![8.0 * r as f64; d];
                let gauss =
                    DistributionSpec::new(DistributionKind::Gaussian { sigma }, d, r).unwrap();
                let engine = MomentEngine::new(gauss);
                let got = engine.cos_cos(j, &w_hat, jp, &w_hat).unwrap().abs();
                let gauss_bound = 3.0 * sqrt_d / (4.0 * PI * r as f64 * (r_w - sqrt_d * eps1));
                assert!(
                    got <= gauss_bound,
                    "gaussian |moment| = {got:.3e} exceeds {gauss_bound:.3e} (trial {trial})"
                );
            }
        }
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        // 50 random (β, ŵ, dist) configurations, relative error ≤ 1e−6.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..50u64 {
            let d = 1 + (trial as usize % 3);
            let cap_d = 1 + (trial as usize % 3);
            let r_w = 0.8;
            let w_star = sample_w_star(d, r_w, 2000 + trial).unwrap();
            let beta_star = sample_beta_star(cap_d, 3000 + trial).unwrap();
            let instance = make_instance(d, r_w, cap_d, w_star.clone(), beta_star).unwrap();
            let w_hat: Vec<f64> =
                w_star.iter().map(|&c| c + rng.gen_range(-1e-3..1e-3)).collect();
            let beta: Vec<f64> = (0..cap_d).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let dist = if trial % 2 == 0 {
                uniform_dist(d, 30)
            } else {
                DistributionSpec::new(
                    DistributionKind::Gaussian { sigma: vec![4.0; d] },
                    d,
                    30,
                )
                .unwrap()
            };

            let grad = gradient(&instance, &w_hat, &beta, &dist).unwrap();
            let h = 1e-5;
            for k in 0..cap_d {
                let mut plus = beta.clone();
                plus[k] += h;
                let mut minus = beta.clone();
                minus[k] -= h;
                let fd = (loss(&instance, &w_hat, &plus, &dist).unwrap()
                    - loss(&instance, &w_hat, &minus, &dist).unwrap())
                    / (2.0 * h);
                let scale = grad[k].abs().max(1.0);
                assert!(
                    (grad[k] - fd).abs() / scale <= 1e-6,
                    "trial {trial}, k = {k}: grad {:.12e} vs fd {:.12e}",
                    grad[k],
                    fd
                );
            }
        }
    }

    #[test]
    fn loss_is_nonnegative_and_vanishes_with_radius_at_truth() {
        let d = 2;
        let r_w = 1.0;
        let w_star = sample_w_star(d, r_w, 7).unwrap();
        let instance =
            make_instance(d, r_w, 2, w_star.clone(), vec![0.6, 0.4]).unwrap();
        let mut previous = f64::INFINITY;
        for r in [10u64, 100, 1000] {
            let dist = uniform_dist(d, r);
            let value = loss(&instance, &w_star, &instance.beta_star.clone(), &dist).unwrap();
            assert!(value >= -1e-15, "loss {value} negative at R = {r}");
            assert!(
                value <= previous + 1e-12,
                "loss grew from {previous:.3e} to {value:.3e} at R = {r}"
            );
            // Cross-term bound scale: 3D²·√d/(πRR_w).
            let cap = 3.0 * 4.0 * (d as f64).sqrt() / (PI * r as f64 * r_w);
            assert!(value <= cap, "loss {value:.3e} above {cap:.3e} at R = {r}");
            previous = value;
        }
    }

    #[test]
    fn loss_at_zero_beta_is_the_target_energy() {
        // β = 0 leaves only the target terms Σ β*_jβ*_{j'}·target[j][j'],
        // which is ‖β*‖₂²/2 up to the off-diagonal/correction slack.
        let d = 2;
        let r_w = 1.0;
        let r = 500u64;
        let cap_d = 3;
        let w_star = sample_w_star(d, r_w, 21).unwrap();
        let beta_star = vec![0.5, 0.3, 0.2];
        let instance = make_instance(d, r_w, cap_d, w_star, beta_star.clone()).unwrap();
        let dist = uniform_dist(d, r);
        let value = loss(&instance, &instance.w_star.clone(), &vec![0.0; cap_d], &dist).unwrap();
        let energy: f64 = beta_star.iter().map(|b| b * b).sum::<f64>() / 2.0;
        let slack = (d as f64).sqrt() / (PI * r as f64 * r_w);
        assert!(
            (value - energy).abs() <= slack,
            "loss {value:.6} vs energy {energy:.6} ± {slack:.1e}"
        );
        assert!(energy >= 1.0 / (2.0 * cap_d as f64));
    }

    #[test]
    fn idealized_descent_contracts_linearly() {
        // With exact gradients β − β*, iterates satisfy
        // β_k^{(t)} = (1 − (1−η)ᵗ)β*_k.
        let beta_star = [0.7, -0.2, 0.5];
        let eta = 0.35_f64;
        let mut beta = [0.0; 3];
        for t in 1..=10i32 {
            for k in 0..3 {
                beta[k] -= eta * (beta[k] - beta_star[k]);
            }
            let shrink = (1.0 - eta).powi(t);
            for k in 0..3 {
                assert_relative_eq!(beta[k], (1.0 - shrink) * beta_star[k], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn descent_envelope_and_parameter_bound_hold() {
        // Run real descent and check, at every step, the envelope
        // |β_k^{(t+1)} − β*_k| ≤ (1−η)ᵗ + ηtε₂ with ε₂ the measured worst
        // gradient deviation, plus the iterate bound |β_k| < 2.
        let d = 2;
        let cap_d = 2;
        let r_w = 1.0;
        let eta = 0.5;
        let w_star = sample_w_star(d, r_w, 31).unwrap();
        let instance = make_instance(d, r_w, cap_d, w_star.clone(), vec![0.65, 0.35]).unwrap();
        let eps1 = 1e-9;
        let w_hat: Vec<f64> = w_star.iter().map(|&c| c + eps1).collect();
        let dist = uniform_dist(d, 20_000);
        let table = moment_table(&instance, &w_hat, &dist).unwrap();

        let mut beta = vec![0.0; cap_d];
        let mut eps2_measured: f64 = 0.0;
        let mut iterates = vec![beta.clone()];
        for _ in 0..12 {
            let grad = gradient_from_table(&table, &instance.beta_star, &beta);
            for k in 0..cap_d {
                let dev = (grad[k] - (beta[k] - instance.beta_star[k])).abs();
                eps2_measured = eps2_measured.max(dev);
            }
            for (b, g) in beta.iter_mut().zip(&grad) {
                *b -= eta * g;
            }
            iterates.push(beta.clone());
        }
        for (t_plus_1, iterate) in iterates.iter().enumerate().skip(1) {
            let t = (t_plus_1 - 1) as f64;
            let envelope = (1.0 - eta).powf(t) + eta * t * eps2_measured;
            for k in 0..cap_d {
                let err = (iterate[k] - instance.beta_star[k]).abs();
                assert!(
                    err <= envelope + 1e-12,
                    "step {t_plus_1}, k = {k}: error {err:.3e} above envelope {envelope:.3e}"
                );
                assert!(iterate[k].abs() < 2.0);
            }
        }
        assert!(eps2_measured < 1e-3, "gradient deviation {eps2_measured:.3e} unexpectedly large");
    }

    #[test]
    fn fit_reaches_target_loss_within_schedule() {
        let d = 2;
        let cap_d = 2;
        let r_w = 1.0;
        let eps = 0.01;
        let eta = 0.5;
        let config = GdConfig::theorem(eta, d, cap_d, r_w, eps).unwrap();
        let radius = theorem_radius(eta, d, cap_d, r_w, eps).ceil() as u64;
        let w_star = sample_w_star(d, r_w, 55).unwrap();
        let instance = make_instance(d, r_w, cap_d, w_star.clone(), vec![0.7, 0.3]).unwrap();
        let w_hat: Vec<f64> = w_star.iter().map(|&c| c + 0.5 * config.eps1).collect();
        let dist = uniform_dist(d, radius);

        let outcome = fit_beta(&instance, &w_hat, &dist, &config).unwrap();
        assert!(outcome.iterations <= iteration_count(eta, cap_d, config.eps3));
        let final_row = outcome.trace.last().unwrap();
        assert!(final_row.loss <= eps);
        assert!(final_row.beta_error <= config.eps3);
        // Trace is loss-monotone here (exact-gradient regime).
        for pair in outcome.trace.windows(2) {
            assert!(pair[1].loss <= pair[0].loss + 1e-12);
        }
    }

    #[test]
    fn non_convergence_reports_the_trace() {
        let d = 1;
        let instance = make_instance(d, 1.0, 1, vec![1.0], vec![1.0]).unwrap();
        let dist = uniform_dist(d, 100);
        // Impossible target forces the error path.
        let config = GdConfig::free(0.5, 3, 1e-30, 1e-3, 1e-3, 1e-6).unwrap();
        let err = fit_beta(&instance, &[1.0], &dist, &config);
        match err {
            Err(BetaError::NonConvergence { iterations, trace, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(trace.len(), 4);
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn schedule_formulas_are_frozen() {
        // η = 1/2, D = 4, ε₃ = 0.1: t = ⌈ln(40)/ln 2⌉ = 6.
        assert_eq!(iteration_count(0.5, 4, 0.1), 6);
        let eps2 = required_eps2(0.5, 4, 0.1);
        assert_relative_eq!(
            eps2,
            2.0_f64.ln() * 0.1 / (2.0 * 0.5 * 2.0 * 40.0_f64.ln()),
            max_relative = 1e-15
        );
        let r = gradient_accuracy_radius(2, 3, 0.5, 1e-2);
        assert_relative_eq!(
            r,
            (16.0 * 2.0 * 3.0_f64.sqrt()) / (PI * 0.5 * 1e-2),
            max_relative = 1e-15
        );
        let e1 = gradient_accuracy_eps1(2, 3, 0.5, 1e-2);
        assert_relative_eq!(
            e1,
            3.0 * 1e-6 / (40.0 * PI * PI * 64.0 * 3.0),
            max_relative = 1e-15
        );
    }

    #[test]
    fn loss_trace_round_trips_through_csv() {
        let rows = vec![
            LossTraceRow { iteration: 0, loss: 0.25, beta_error: 0.9219544457292887 },
            LossTraceRow { iteration: 1, loss: 0.0625, beta_error: 0.4609772228646443 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_loss_trace_csv(&path, &rows).unwrap();
        let mut reader = csv::Reader::from_path(&path).unwrap();
        let back: Vec<LossTraceRow> =
            reader.deserialize().collect::<Result<_, _>>().unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].iteration, 1);
        assert_eq!(back[1].loss, 0.0625);
        assert_eq!(back[1].beta_error, 0.4609772228646443);
    }
}
