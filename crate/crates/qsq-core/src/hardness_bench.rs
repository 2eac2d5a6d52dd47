//! Classical-hardness measurements at desk scale.
//!
//! A correlational statistical-query learner sees the concept class only
//! through averages `E[cos(2πxᵀw)·q(x)]`. Over a Gaussian input the closed
//! form of those averages decays exponentially in the separation of the
//! directions, so a packing net on the constrained sphere gives a family of
//! targets that are nearly indistinguishable to such a learner. This module
//! measures the quantities behind that argument:
//!
//! - pairwise and average correlations over a packing net, with the
//!   closed-form Gaussian bound each off-diagonal pair must satisfy;
//! - a threshold-counting proxy for the statistical dimension (the largest
//!   tested subset whose average correlation stays below a threshold) —
//!   a lower-bound certificate only, since the exact maximal-subset search
//!   is exponential;
//! - the gradient-concentration experiment: the variance, across packing-net
//!   targets, of one loss-gradient coordinate at a fixed hypothesis.
//!
//! All Gaussian formulas below are stated for inputs `X ∼ N(0, σ²I)` with
//! `σ` the per-coordinate standard deviation of the *density*.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beta_learner::{BetaError, MomentEngine};
use crate::concepts::{build_packing_net, ConceptError, DistributionKind, DistributionSpec};

// =======================================================================
// Errors
// =======================================================================

/// Errors from hardness measurements.
#[derive(Debug, Error)]
pub enum HardnessError {
    /// A parameter fails its domain check.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Packing-net construction failed.
    #[error("packing net: {0}")]
    Concept(#[from] ConceptError),
    /// Moment evaluation failed.
    #[error("moment evaluation: {0}")]
    Moment(#[from] BetaError),
    /// CSV export failed.
    #[error("table export failed: {0}")]
    Csv(#[from] csv::Error),
}

/// Convenience alias for hardness-bench results.
pub type HardnessResult<T> = Result<T, HardnessError>;

// =======================================================================
// Gaussian correlation closed forms
// =======================================================================

/// `E[cos(tᵀX)] = e^{−σ²‖t‖²/2}` for `X ∼ N(0, σ²I)`.
pub fn gaussian_cos_expectation(t: &[f64], sigma: f64) -> HardnessResult<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(HardnessError::InvalidParameter(format!(
            "sigma = {sigma} must be positive and finite"
        )));
    }
    let norm2: f64 = t.iter().map(|c| c * c).sum();
    Ok((-sigma * sigma * norm2 / 2.0).exp())
}

/// `E[cos(2πxᵀw)cos(2πxᵀv)]` under `N(0, σ²I)`:
/// `½e^{−σ²‖2π(w−v)‖²/2} + ½e^{−σ²‖2π(w+v)‖²/2}`.
///
/// The product expands into cosines at the difference and sum frequencies;
/// each is a Gaussian characteristic-function value, so the result is
/// positive. The diagonal case `v = w` reduces to
/// `E[cos²] = ½(1 + e^{−σ²‖4πw‖²/2})`.
pub fn pair_correlation(w: &[f64], v: &[f64], sigma: f64) -> HardnessResult<f64> {
    if w.len() != v.len() {
        return Err(HardnessError::InvalidParameter(format!(
            "direction lengths differ: {} vs {}",
            w.len(),
            v.len()
        )));
    }
    let diff: Vec<f64> = w.iter().zip(v).map(|(a, b)| 2.0 * PI * (a - b)).collect();
    let sum: Vec<f64> = w.iter().zip(v).map(|(a, b)| 2.0 * PI * (a + b)).collect();
    Ok(0.5 * gaussian_cos_expectation(&diff, sigma)?
        + 0.5 * gaussian_cos_expectation(&sum, sigma)?)
}

/// Closed-form bound every off-diagonal packing-net pair satisfies:
/// `e^{−½σ²(4πR_w)²sin²(0.255)}`.
///
/// Net points are separated by a geodesic angle of at least `0.51`, so both
/// the difference `‖w−v‖ ≥ 2R_w·sin(0.255)` and (in the positive orthant)
/// the sum `‖w+v‖ ≥ √2·R_w` clear the same exponent.
pub fn pair_bound(sigma: f64, r_w: f64) -> f64 {
    let exponent = 0.5 * sigma * sigma * (4.0 * PI * r_w).powi(2) * (0.255_f64).sin().powi(2);
    (-exponent).exp()
}

// =======================================================================
// Average correlation over a packing net
// =======================================================================

/// One evaluated direction pair (for the correlations table).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorrelationRow {
    /// Index of the first direction in the net.
    pub w_index: usize,
    /// Index of the second direction in the net.
    pub v_index: usize,
    /// `|E[cos(2πxᵀw)cos(2πxᵀv)]|`.
    pub value: f64,
    /// The off-diagonal bound [`pair_bound`] (diagonal rows repeat it for
    /// reference; the bound constrains only `w ≠ v`).
    pub bound: f64,
}

/// Summary of the pairwise correlations over one direction set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// Number of directions.
    pub set_size: usize,
    /// Largest `|E[cc']|` over distinct pairs (0 for singleton sets).
    pub max_off_diagonal: f64,
    /// Average correlation `ρ = (1/|C|²)·Σ_{w,v} |E[cc']|`, diagonal
    /// included; always at most `1/|C| + max_off_diagonal`.
    pub rho: f64,
    /// Off-diagonal closed-form bound [`pair_bound`].
    pub bound: f64,
    /// Distinct pairs whose correlation exceeds the bound (zero for any
    /// valid packing net).
    pub violations: usize,
}

/// Evaluates every ordered pair `(w, v)` of the set, diagonal included.
pub fn pair_correlations(
    w_set: &[Vec<f64>],
    sigma: f64,
    r_w: f64,
) -> HardnessResult<Vec<CorrelationRow>> {
    let bound = pair_bound(sigma, r_w);
    let mut rows = Vec::with_capacity(w_set.len() * w_set.len());
    for (i, w) in w_set.iter().enumerate() {
        for (j, v) in w_set.iter().enumerate() {
            rows.push(CorrelationRow {
                w_index: i,
                v_index: j,
                value: pair_correlation(w, v, sigma)?.abs(),
                bound,
            });
        }
    }
    Ok(rows)
}

/// Average correlation of a direction set under `N(0, σ²I)`, with the
/// per-pair bound check.
pub fn average_correlation(
    w_set: &[Vec<f64>],
    sigma: f64,
    r_w: f64,
) -> HardnessResult<CorrelationReport> {
    if w_set.is_empty() {
        return Err(HardnessError::InvalidParameter("direction set is empty".into()));
    }
    let rows = pair_correlations(w_set, sigma, r_w)?;
    let n = w_set.len();
    let bound = pair_bound(sigma, r_w);
    let mut total = 0.0;
    let mut max_off = 0.0_f64;
    let mut violations = 0usize;
    for row in &rows {
        total += row.value;
        if row.w_index != row.v_index {
            max_off = max_off.max(row.value);
            if row.value > bound {
                violations += 1;
            }
        }
    }
    Ok(CorrelationReport {
        set_size: n,
        max_off_diagonal: max_off,
        rho: total / (n as f64 * n as f64),
        bound,
        violations,
    })
}

/// Threshold-counting proxy for the statistical dimension: the largest
/// prefix of the (already constructed) net whose average correlation stays
/// at or below `gamma`.
///
/// The true statistical dimension maximizes over *all* subsets, which is
/// exponential; a prefix scan yields a lower-bound certificate only.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThresholdCertificate {
    /// The threshold the prefix was tested against.
    pub gamma: f64,
    /// Largest prefix length with `ρ ≤ γ` (0 if even the singleton fails).
    pub subset_size: usize,
    /// Average correlation of that prefix (0 when `subset_size = 0`).
    pub rho: f64,
}

/// Scans prefixes of `w_set` and certifies the largest one with `ρ ≤ γ`.
pub fn threshold_certificate(
    w_set: &[Vec<f64>],
    sigma: f64,
    gamma: f64,
) -> HardnessResult<ThresholdCertificate> {
    let mut total = 0.0; // running Σ over the n×n pair table
    let mut best = ThresholdCertificate { gamma, subset_size: 0, rho: 0.0 };
    for n in 1..=w_set.len() {
        let new = &w_set[n - 1];
        // Adding one direction appends its diagonal entry plus both ordered
        // pairs against every earlier direction.
        total += pair_correlation(new, new, sigma)?.abs();
        for earlier in &w_set[..n - 1] {
            total += 2.0 * pair_correlation(earlier, new, sigma)?.abs();
        }
        let rho = total / (n as f64 * n as f64);
        if rho <= gamma {
            best = ThresholdCertificate { gamma, subset_size: n, rho };
        }
    }
    Ok(best)
}

// =======================================================================
// Gradient concentration across targets
// =======================================================================

/// Input-distribution template replicated across coordinates, so one
/// experiment can sweep the dimension.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum IsotropicDistribution {
    /// Uniform density on `[−R, R]^d`.
    Uniform {
        /// Truncation half-width `R`.
        truncation_r: u64,
    },
    /// Gaussian density `N(0, σ²)` per coordinate, truncated to `[−R, R]`.
    Gaussian {
        /// Per-coordinate standard deviation of the density.
        sigma: f64,
        /// Truncation half-width `R`.
        truncation_r: u64,
    },
}

impl IsotropicDistribution {
    /// Materializes the template at dimension `d`.
    ///
    /// The Gaussian amplitude profile is parameterized so that its squared
    /// density has standard deviation `σ`, matching the closed forms above.
    pub fn spec(&self, d: usize) -> HardnessResult<DistributionSpec> {
        let spec = match *self {
            IsotropicDistribution::Uniform { truncation_r } => {
                DistributionSpec::new(DistributionKind::Uniform, d, truncation_r)
            }
            IsotropicDistribution::Gaussian { sigma, truncation_r } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(HardnessError::InvalidParameter(format!(
                        "sigma = {sigma} must be positive and finite"
                    )));
                }
                DistributionSpec::new(
                    DistributionKind::Gaussian { sigma: vec![sigma * std::f64::consts::SQRT_2; d] },
                    d,
                    truncation_r,
                )
            }
        }?;
        Ok(spec)
    }
}

/// One dimension's row of the concentration table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConcentrationRow {
    /// Input dimension.
    pub d: usize,
    /// Variance, across packing-net targets, of `∂L/∂β₁` at the fixed
    /// hypothesis.
    pub variance: f64,
    /// Number of targets the net yielded at this dimension.
    pub n: usize,
}

/// Measures how little one gradient coordinate varies across targets.
///
/// For each `d` in `d_list`, a packing net of up to `trials` directions is
/// built (seeded deterministically); every net point is a target `w*` with
/// uniform harmonic weights `β*_j = 1/D`, and the net's first point doubles
/// as the fixed hypothesis direction. The row records the variance across
/// targets of `∂L/∂β₁` at that hypothesis with weights `hypothesis_beta`.
///
/// Only the cross moments depend on the target, and they are exponentially
/// small except for the one target the hypothesis coincides with — a
/// gradient query "hits" at most one member of a well-separated class. The
/// variance therefore scales like `(n−1)/n²` in the net size `n`, falling
/// as the packing grows with dimension: the quantity behind the classical
/// lower bound.
pub fn gradient_concentration_experiment(
    d_list: &[usize],
    r_w: f64,
    cap_d: usize,
    dist: IsotropicDistribution,
    hypothesis_beta: &[f64],
    trials: usize,
    seed: u64,
) -> HardnessResult<Vec<ConcentrationRow>> {
    if hypothesis_beta.len() != cap_d {
        return Err(HardnessError::InvalidParameter(format!(
            "hypothesis beta has length {} but D = {cap_d}",
            hypothesis_beta.len()
        )));
    }
    if cap_d == 0 || trials == 0 {
        return Err(HardnessError::InvalidParameter(
            "harmonic count and trials must be positive".into(),
        ));
    }
    let beta_star = vec![1.0 / cap_d as f64; cap_d];
    let mut table = Vec::with_capacity(d_list.len());
    for &d in d_list {
        let net = build_packing_net(d, r_w, PACKING_MIN_ANGLE, trials, seed ^ d as u64)?;
        let hypothesis = &net[0];
        let engine = MomentEngine::new(dist.spec(d)?);
        // Hypothesis-only term, shared by every target.
        let mut model_term = 0.0;
        for (j, beta_j) in hypothesis_beta.iter().enumerate() {
            model_term +=
                2.0 * beta_j * engine.cos_cos(1, hypothesis, (j + 1) as u32, hypothesis)?;
        }
        let mut gradients = Vec::with_capacity(net.len());
        for w_star in &net {
            let mut cross_term = 0.0;
            for (j, beta_j) in beta_star.iter().enumerate() {
                cross_term +=
                    2.0 * beta_j * engine.cos_cos((j + 1) as u32, w_star, 1, hypothesis)?;
            }
            gradients.push(model_term - cross_term);
        }
        table.push(ConcentrationRow { d, variance: variance(&gradients), n: net.len() });
    }
    Ok(table)
}

/// Geodesic separation used for every packing net in this module (the same
/// angle the pair bound's `sin²(0.255)` exponent assumes).
pub const PACKING_MIN_ANGLE: f64 = 0.51;

fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

// =======================================================================
// Tables
// =======================================================================

/// Writes the pairwise-correlation table as CSV with columns
/// `w_index,v_index,value,bound`.
pub fn write_correlations_csv(path: &Path, rows: &[CorrelationRow]) -> HardnessResult<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes the concentration table as CSV with columns `d,variance,n`.
pub fn write_concentration_csv(path: &Path, rows: &[ConcentrationRow]) -> HardnessResult<()> {
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
