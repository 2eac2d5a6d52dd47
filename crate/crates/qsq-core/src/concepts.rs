//! Problem instances, input distributions, the constrained sphere and its
//! packing net, and distribution-assumption audits.
//!
//! A learning instance is a hidden direction `w*` on the radius-`R_w` sphere,
//! restricted to the well-separated positive orthant (`w_j ≥ R_w/d²`), plus
//! harmonic weights `β*` with unit 1-norm. The target is the periodic neuron
//!
//! ```text
//! g_{w*}(x) = Σ_{j=1}^{D} β*_j cos(2πj · xᵀw*).
//! ```
//!
//! Input distributions are coordinate-wise products with amplitude profiles
//! `p_j : ℝ → [0,1]`; the assumption audit measures, on a dense grid, the
//! properties the verification and hardness analyses rely on (pointwise
//! flatness of `p²`, boundedness, evenness, a derivative bound, and a bounded
//! critical-point count), alongside the closed-form sufficient conditions on
//! the scale parameters.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from instance construction and sampling.
#[derive(Debug, Error)]
pub enum ConceptError {
    /// A structural parameter (dimension, harmonic count, radius, lengths)
    /// is out of domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// `‖w‖₂` differs from `R_w` by more than relative 1e-12.
    #[error("norm mismatch: ‖w‖₂ = {norm} but R_w = {expected}")]
    NormMismatch { norm: f64, expected: f64 },
    /// Some coordinate of `w` lies below the orthant floor `R_w/d²`.
    #[error("orthant violation: w[{index}] = {value} < {floor}")]
    OrthantViolation { index: usize, value: f64, floor: f64 },
    /// `‖β‖₁` differs from 1 by more than 1e-12.
    #[error("beta norm violation: ‖β‖₁ = {norm} ≠ 1")]
    BetaNormViolation { norm: f64 },
    /// Rejection sampling hit its attempt budget with estimated acceptance
    /// below 1e-6.
    #[error("rejection budget exceeded after {attempts} attempts (d = {d})")]
    RejectionBudgetExceeded { attempts: u64, d: usize },
    /// The requested distribution kind has no classical-hardness bound.
    #[error("unsupported distribution kind for this query: {0}")]
    UnsupportedKind(String),
}

/// Result alias for this module.
pub type ConceptResult<T> = Result<T, ConceptError>;

/// Relative tolerance on `‖w‖₂ = R_w`.
pub const NORM_REL_TOL: f64 = 1e-12;
/// Absolute tolerance on `‖β‖₁ = 1`.
pub const BETA_ABS_TOL: f64 = 1e-12;
/// Attempt budget for rejection sampling; exhausting it with zero acceptances
/// indicates an acceptance rate below roughly 1e-6.
pub const REJECTION_BUDGET: u64 = 4_000_000;

// === Concept instances ===

/// A validated learning instance: the hidden direction and harmonic weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConceptInstance {
    /// Input dimension `d ≥ 1`.
    pub d: usize,
    /// Radius of the sphere carrying `w*`.
    pub r_w: f64,
    /// Hidden direction, `‖w*‖₂ = R_w`, `w*_j ≥ R_w/d²`.
    pub w_star: Vec<f64>,
    /// Number of harmonics `D ≥ 1`.
    pub cap_d: usize,
    /// Harmonic weights, `‖β*‖₁ = 1`.
    pub beta_star: Vec<f64>,
}

/// Validates and constructs a [`ConceptInstance`]; rejects violations rather
/// than silently normalizing.
pub fn make_instance(
    d: usize,
    r_w: f64,
    cap_d: usize,
    w_star: Vec<f64>,
    beta_star: Vec<f64>,
) -> ConceptResult<ConceptInstance> {
    if d == 0 || cap_d == 0 {
        return Err(ConceptError::InvalidParameter(
            "dimension and harmonic count must be positive".into(),
        ));
    }
    if !(r_w.is_finite() && r_w > 0.0) {
        return Err(ConceptError::InvalidParameter(format!(
            "R_w = {r_w} must be finite and positive"
        )));
    }
    if w_star.len() != d {
        return Err(ConceptError::InvalidParameter(format!(
            "w has length {} but d = {d}",
            w_star.len()
        )));
    }
    if beta_star.len() != cap_d {
        return Err(ConceptError::InvalidParameter(format!(
            "beta has length {} but D = {cap_d}",
            beta_star.len()
        )));
    }
    let norm = w_star.iter().map(|w| w * w).sum::<f64>().sqrt();
    if (norm - r_w).abs() > NORM_REL_TOL * r_w {
        return Err(ConceptError::NormMismatch { norm, expected: r_w });
    }
    let floor = r_w / (d as f64 * d as f64);
    for (index, &value) in w_star.iter().enumerate() {
        if !(value.is_finite() && value >= floor) {
            return Err(ConceptError::OrthantViolation { index, value, floor });
        }
    }
    let beta_norm: f64 = beta_star.iter().map(|b| b.abs()).sum();
    if !beta_norm.is_finite() || (beta_norm - 1.0).abs() > BETA_ABS_TOL {
        return Err(ConceptError::BetaNormViolation { norm: beta_norm });
    }
    Ok(ConceptInstance { d, r_w, w_star, cap_d, beta_star })
}

impl ConceptInstance {
    /// The scalar profile `g̃(y) = Σ_j β_j cos(2πj y)`.
    pub fn eval_profile(&self, y: f64) -> f64 {
        profile(&self.beta_star, y)
    }

    /// The target value `g_{w*}(x) = g̃(xᵀw*)`.
    pub fn eval_target(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        let dot: f64 = x.iter().zip(&self.w_star).map(|(xi, wi)| xi * wi).sum();
        self.eval_profile(dot)
    }
}

/// Evaluates `Σ_j β_j cos(2πj y)` for arbitrary weights.
pub fn profile(beta: &[f64], y: f64) -> f64 {
    beta.iter()
        .enumerate()
        .map(|(idx, &b)| b * (std::f64::consts::TAU * (idx as f64 + 1.0) * y).cos())
        .sum()
}

// === Sampling the constrained sphere ===

/// Draws a uniform sample from the constrained sphere
/// `{w : ‖w‖₂ = R_w, w_j ≥ R_w/d²}`, deterministically in `seed`.
///
/// Samples the full sphere via normalized Gaussians, folds into the positive
/// orthant by taking absolute values (the constraint set is symmetric under
/// sign flips, and raw orthant rejection would cost 2^d), then rejects on the
/// per-coordinate floor.
pub fn sample_w_star(d: usize, r_w: f64, seed: u64) -> ConceptResult<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_w_star_with(d, r_w, &mut rng)
}

/// As [`sample_w_star`], drawing from a caller-owned generator.
pub fn sample_w_star_with<R: Rng>(d: usize, r_w: f64, rng: &mut R) -> ConceptResult<Vec<f64>> {
    if d == 0 {
        return Err(ConceptError::InvalidParameter("d must be positive".into()));
    }
    if !(r_w.is_finite() && r_w > 0.0) {
        return Err(ConceptError::InvalidParameter(format!(
            "R_w = {r_w} must be finite and positive"
        )));
    }
    let floor = r_w / (d as f64 * d as f64);
    for attempt in 0..REJECTION_BUDGET {
        let mut v: Vec<f64> = (0..d)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal).abs())
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        for x in &mut v {
            *x *= r_w / norm;
        }
        if v.iter().all(|&x| x >= floor) {
            let _ = attempt;
            return Ok(v);
        }
    }
    Err(ConceptError::RejectionBudgetExceeded { attempts: REJECTION_BUDGET, d })
}

/// Draws harmonic weights on the unit simplex (`β_j > 0`, `Σ β_j = 1`)
/// uniformly, deterministically in `seed`.
pub fn sample_beta_star(cap_d: usize, seed: u64) -> ConceptResult<Vec<f64>> {
    if cap_d == 0 {
        return Err(ConceptError::InvalidParameter("D must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Exponential spacings normalize to a uniform simplex point.
    let gaps: Vec<f64> = (0..cap_d)
        .map(|_| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            -u.ln()
        })
        .collect();
    let total: f64 = gaps.iter().sum();
    let mut beta: Vec<f64> = gaps.iter().map(|g| g / total).collect();
    // Force the 1-norm to land within the validation tolerance exactly.
    let norm: f64 = beta.iter().sum();
    for b in &mut beta {
        *b /= norm;
    }
    Ok(beta)
}

/// Builds a greedy first-fit packing of the constrained sphere: keeps each
/// rejection-sampled point whose geodesic angle to every kept point is at
/// least `min_angle` (radians), until `budget` points are kept or the
/// candidate stream is exhausted.
///
/// Any valid packing is acceptable downstream; the construction makes no
/// maximality claim beyond greedy saturation.
pub fn build_packing_net(
    d: usize,
    r_w: f64,
    min_angle: f64,
    budget: usize,
    seed: u64,
) -> ConceptResult<Vec<Vec<f64>>> {
    if !(min_angle > 0.0 && min_angle < std::f64::consts::FRAC_PI_2) {
        return Err(ConceptError::InvalidParameter(format!(
            "min_angle = {min_angle} must lie in (0, π/2)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net: Vec<Vec<f64>> = Vec::new();
    // Stop after this many consecutive rejected candidates: the net is then
    // saturated for all practical purposes.
    let stall_limit = 2_000usize.max(200 * budget.min(1_000));
    let mut stall = 0usize;
    while net.len() < budget && stall < stall_limit {
        let candidate = sample_w_star_with(d, r_w, &mut rng)?;
        let fits = net
            .iter()
            .all(|kept| geodesic_angle(kept, &candidate, r_w) >= min_angle);
        if fits {
            net.push(candidate);
            stall = 0;
        } else {
            stall += 1;
        }
    }
    Ok(net)
}

/// Geodesic angle between two points of the radius-`r` sphere.
pub fn geodesic_angle(u: &[f64], v: &[f64], r: f64) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    (dot / (r * r)).clamp(-1.0, 1.0).acos()
}

// === Input distributions ===

/// Distribution family of one product input distribution.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family")]
pub enum DistributionKind {
    /// `p ≡ 1` on the truncated box.
    Uniform,
    /// `p_j(x) = exp(−x²/(2σ_j²))`.
    Gaussian {
        /// Per-coordinate standard deviations.
        sigma: Vec<f64>,
    },
    /// `p_j²(x) = exp(−(x/s_j)^{α_j})` with even shape `α_j ≥ 2`.
    GeneralizedGaussian {
        /// Per-coordinate even shape parameters.
        alpha: Vec<u32>,
        /// Per-coordinate scale parameters.
        s: Vec<f64>,
    },
    /// `p_j²(x) = sech²(x/(2s_j))`.
    Logistic {
        /// Per-coordinate scale parameters.
        s: Vec<f64>,
    },
}

impl DistributionKind {
    /// Short lowercase name of the family.
    pub fn name(&self) -> &'static str {
        match self {
            DistributionKind::Uniform => "uniform",
            DistributionKind::Gaussian { .. } => "gaussian",
            DistributionKind::GeneralizedGaussian { .. } => "generalized-gaussian",
            DistributionKind::Logistic { .. } => "logistic",
        }
    }
}

/// A product input distribution over the truncated integer box
/// `[-R, R-1]^d`, described by amplitude profiles `p_j`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DistributionSpec {
    /// Distribution family and per-coordinate parameters.
    pub kind: DistributionKind,
    /// Truncation half-width `R` (the box is `[-R, R-1]^d ∩ ℤ^d`).
    pub truncation_r: u64,
}

impl DistributionSpec {
    /// Builds and validates a spec: parameter vectors must have length `d`
    /// and positive finite entries; shapes must be even and at least 2.
    pub fn new(kind: DistributionKind, d: usize, truncation_r: u64) -> ConceptResult<Self> {
        if truncation_r == 0 {
            return Err(ConceptError::InvalidParameter(
                "truncation radius must be positive".into(),
            ));
        }
        let check_scales = |s: &[f64], label: &str| -> ConceptResult<()> {
            if s.len() != d {
                return Err(ConceptError::InvalidParameter(format!(
                    "{label} has length {} but d = {d}",
                    s.len()
                )));
            }
            for (j, &v) in s.iter().enumerate() {
                if !(v.is_finite() && v > 0.0) {
                    return Err(ConceptError::InvalidParameter(format!(
                        "{label}[{j}] = {v} must be finite and positive"
                    )));
                }
            }
            Ok(())
        };
        match &kind {
            DistributionKind::Uniform => {}
            DistributionKind::Gaussian { sigma } => check_scales(sigma, "sigma")?,
            DistributionKind::GeneralizedGaussian { alpha, s } => {
                check_scales(s, "s")?;
                if alpha.len() != d {
                    return Err(ConceptError::InvalidParameter(format!(
                        "alpha has length {} but d = {d}",
                        alpha.len()
                    )));
                }
                for (j, &a) in alpha.iter().enumerate() {
                    if a < 2 || a % 2 != 0 {
                        return Err(ConceptError::InvalidParameter(format!(
                            "alpha[{j}] = {a} must be an even integer ≥ 2"
                        )));
                    }
                }
            }
            DistributionKind::Logistic { s } => check_scales(s, "s")?,
        }
        Ok(Self { kind, truncation_r })
    }

    /// Number of coordinates the parameter vectors cover (any `d` for the
    /// uniform family).
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            DistributionKind::Uniform => None,
            DistributionKind::Gaussian { sigma } => Some(sigma.len()),
            DistributionKind::GeneralizedGaussian { s, .. } => Some(s.len()),
            DistributionKind::Logistic { s } => Some(s.len()),
        }
    }

    /// The amplitude profile `p_j(x)` of coordinate `j`.
    pub fn amplitude(&self, j: usize, x: f64) -> f64 {
        match &self.kind {
            DistributionKind::Uniform => 1.0,
            DistributionKind::Gaussian { sigma } => {
                let z = x / sigma[j];
                (-z * z / 2.0).exp()
            }
            DistributionKind::GeneralizedGaussian { alpha, s } => {
                let z = x / s[j];
                (-z.powi(alpha[j] as i32) / 2.0).exp()
            }
            DistributionKind::Logistic { s } => {
                let z = x / (2.0 * s[j]);
                1.0 / z.cosh()
            }
        }
    }

    /// The full product amplitude `p(x) = ∏_j p_j(x_j)`.
    pub fn amplitude_vec(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(j, &xj)| self.amplitude(j, xj))
            .product()
    }

    /// Closed-form derivative `p_j'(x)` of the amplitude profile.
    pub fn amplitude_deriv(&self, j: usize, x: f64) -> f64 {
        match &self.kind {
            DistributionKind::Uniform => 0.0,
            DistributionKind::Gaussian { sigma } => {
                let s2 = sigma[j] * sigma[j];
                -(x / s2) * (-(x * x) / (2.0 * s2)).exp()
            }
            DistributionKind::GeneralizedGaussian { alpha, s } => {
                let a = alpha[j] as i32;
                let z = x / s[j];
                -(a as f64 / 2.0) * z.powi(a - 1) / s[j] * (-z.powi(a) / 2.0).exp()
            }
            DistributionKind::Logistic { s } => {
                let z = x / (2.0 * s[j]);
                -z.tanh() / z.cosh() / (2.0 * s[j])
            }
        }
    }
}

// === Assumption audit ===

/// One audited property: pass/fail plus the worst-case margin over the grid
/// (nonnegative margins certify the property up to grid resolution).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AuditCheck {
    /// Whether the property held everywhere on the audit grid.
    pub pass: bool,
    /// Worst-case slack; positive means the property held with room to
    /// spare, negative quantifies the worst violation.
    pub margin: f64,
}

/// Grid-based audit of the distribution assumptions used by verification and
/// hardness analyses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionAudit {
    /// Pointwise flatness: `|1 − p_j²(x)| ≤ 1/10` on the truncated domain.
    pub pointwise_flatness: AuditCheck,
    /// Boundedness: `p_j(x) ∈ [0, 1]`.
    pub bounded_by_one: AuditCheck,
    /// Evenness of `p²` (margin is minus the largest asymmetry).
    pub even_symmetry: AuditCheck,
    /// Derivative bound `|p_j'(x)| ≤ πDR_w/(2M₁)` over the truncated domain.
    pub derivative_bound: AuditCheck,
    /// Critical-point count of `p²`: sign changes of a numeric derivative,
    /// capped at 8 (margin = 8 − count).
    pub critical_points: AuditCheck,
    /// Closed-form sufficient condition on the scale parameters
    /// (`σ_j ≥ 2R√π`, `s_j ≥ 2R√π`, or `s_j ≥ max(4πR, M₁/(πDR_w))`);
    /// absent for the uniform family.
    pub scale_condition: Option<AuditCheck>,
    /// Known Fourier-concentration rate `ε(r)` of the family, when the
    /// closed form is established.
    pub epsilon_r_formula: Option<String>,
    /// Number of grid points per coordinate used for the audit.
    pub grid_resolution: usize,
}

impl AssumptionAudit {
    /// True when every numeric assumption (flatness, boundedness, evenness,
    /// derivative bound, critical points) passed.
    pub fn numeric_pass(&self) -> bool {
        self.pointwise_flatness.pass
            && self.bounded_by_one.pass
            && self.even_symmetry.pass
            && self.derivative_bound.pass
            && self.critical_points.pass
    }
}

/// Tolerance below which grid asymmetry of `p²` counts as exactly even.
const EVEN_TOL: f64 = 1e-12;
/// Maximum derivative sign changes accepted as "constantly many critical
/// points".
const MAX_SIGN_CHANGES: usize = 8;

/// Audits distribution assumptions on a uniform grid of `grid_resolution`
/// points per coordinate (endpoints included) spanning `[-R, R]`.
///
/// Reports failures in the returned audit rather than erroring. Margins are
/// worst cases over the grid, hence lower bounds on the true margins.
pub fn audit_assumptions(
    dist: &DistributionSpec,
    m1: u64,
    cap_d: usize,
    r_w: f64,
    grid_resolution: usize,
) -> AssumptionAudit {
    let n = grid_resolution.max(1001);
    let d = dist.dim().unwrap_or(1);
    let r = dist.truncation_r as f64;
    let deriv_cap = std::f64::consts::PI * cap_d as f64 * r_w / (2.0 * m1 as f64);

    let mut worst_flatness: f64 = 0.0;
    let mut min_p = f64::INFINITY;
    let mut max_p = f64::NEG_INFINITY;
    let mut worst_asym: f64 = 0.0;
    let mut worst_deriv: f64 = 0.0;
    let mut max_changes = 0usize;

    for j in 0..d {
        let mut p2_grid = Vec::with_capacity(n);
        for i in 0..n {
            let t = 2.0 * r * i as f64 / (n - 1) as f64;
            let x = t - r;
            let p = dist.amplitude(j, x);
            let p_neg = dist.amplitude(j, r - t);
            min_p = min_p.min(p);
            max_p = max_p.max(p);
            worst_flatness = worst_flatness.max((1.0 - p * p).abs());
            worst_asym = worst_asym.max((p * p - p_neg * p_neg).abs());
            worst_deriv = worst_deriv.max(dist.amplitude_deriv(j, x).abs());
            p2_grid.push(p * p);
        }
        // Sign changes of the centered numeric derivative of p² (zeros from
        // flat stretches do not count as changes).
        let tol = 1e-14 * p2_grid.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
        let mut last_sign = 0i8;
        let mut changes = 0usize;
        for i in 1..n - 1 {
            let slope = p2_grid[i + 1] - p2_grid[i - 1];
            let sign = if slope > tol {
                1i8
            } else if slope < -tol {
                -1i8
            } else {
                0i8
            };
            if sign != 0 {
                if last_sign != 0 && sign != last_sign {
                    changes += 1;
                }
                last_sign = sign;
            }
        }
        max_changes = max_changes.max(changes);
    }

    let scale_condition = match &dist.kind {
        DistributionKind::Uniform => None,
        DistributionKind::Gaussian { sigma } => {
            let bound = 2.0 * r * std::f64::consts::PI.sqrt();
            let margin = sigma.iter().cloned().fold(f64::INFINITY, f64::min) - bound;
            Some(AuditCheck { pass: margin >= 0.0, margin })
        }
        DistributionKind::GeneralizedGaussian { s, .. } => {
            let bound = 2.0 * r * std::f64::consts::PI.sqrt();
            let margin = s.iter().cloned().fold(f64::INFINITY, f64::min) - bound;
            Some(AuditCheck { pass: margin >= 0.0, margin })
        }
        DistributionKind::Logistic { s } => {
            let bound = (4.0 * std::f64::consts::PI * r)
                .max(m1 as f64 / (std::f64::consts::PI * cap_d as f64 * r_w));
            let margin = s.iter().cloned().fold(f64::INFINITY, f64::min) - bound;
            Some(AuditCheck { pass: margin >= 0.0, margin })
        }
    };

    let epsilon_r_formula = match &dist.kind {
        DistributionKind::Uniform => None,
        DistributionKind::Gaussian { .. } => Some("exp(-Omega(r^2))".to_string()),
        DistributionKind::GeneralizedGaussian { .. } => {
            Some("superpolynomial decay in r".to_string())
        }
        DistributionKind::Logistic { .. } => Some("exp(-Omega(r*d))".to_string()),
    };

    AssumptionAudit {
        pointwise_flatness: AuditCheck {
            pass: worst_flatness <= 0.1,
            margin: 0.1 - worst_flatness,
        },
        bounded_by_one: AuditCheck {
            pass: min_p >= 0.0 && max_p <= 1.0,
            margin: min_p.min(1.0 - max_p),
        },
        even_symmetry: AuditCheck {
            pass: worst_asym <= EVEN_TOL,
            margin: -worst_asym,
        },
        derivative_bound: AuditCheck {
            pass: worst_deriv <= deriv_cap,
            margin: deriv_cap - worst_deriv,
        },
        critical_points: AuditCheck {
            pass: max_changes <= MAX_SIGN_CHANGES,
            margin: MAX_SIGN_CHANGES as f64 - max_changes as f64,
        },
        scale_condition,
        epsilon_r_formula,
        grid_resolution: n,
    }
}

// === Classical hardness descriptors ===

/// Symbolic record of the classical sample-complexity lower bound for one
/// distribution family: the functional form and the parameters it grows in.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ClassicalBoundDescriptor {
    /// Distribution family name.
    pub family: String,
    /// Functional form of the lower bound (up to the unstated constant
    /// inside the exponent).
    pub form: String,
    /// Parameters the bound grows in.
    pub grows_in: Vec<String>,
}

/// Returns the classical lower-bound family for a distribution kind; the
/// uniform family carries no hardness claim and is unsupported.
pub fn classical_bound_descriptor(
    kind: &DistributionKind,
    _d: usize,
    _r_w: f64,
) -> ConceptResult<ClassicalBoundDescriptor> {
    match kind {
        DistributionKind::Uniform => {
            Err(ConceptError::UnsupportedKind("uniform".into()))
        }
        DistributionKind::Gaussian { .. } => Ok(ClassicalBoundDescriptor {
            family: "gaussian".into(),
            form: "exp(min(d, R_w^2))".into(),
            grows_in: vec!["d".into(), "R_w".into()],
        }),
        DistributionKind::GeneralizedGaussian { .. } => Ok(ClassicalBoundDescriptor {
            family: "generalized-gaussian".into(),
            form: "min(exp(d), superpoly(R_w))".into(),
            grows_in: vec!["d".into(), "R_w".into()],
        }),
        DistributionKind::Logistic { .. } => Ok(ClassicalBoundDescriptor {
            family: "logistic".into(),
            form: "exp(d*R_w)".into(),
            grows_in: vec!["d".into(), "R_w".into()],
        }),
    }
}
