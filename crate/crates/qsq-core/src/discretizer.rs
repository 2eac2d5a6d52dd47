//! Truncated, discretized targets and their pseudoperiodicity.
//!
//! The quantum example state encodes not `g_{w*}` itself but a discretized
//! proxy: inputs are integer lattice points `x` inside a truncation box, the
//! argument is rescaled by `M₁` (per-harmonic: `M₁ₘ = m·M₁`), and the output
//! is rounded down to the grid `(1/M₂ₘ)ℤ`:
//!
//! ```text
//! h(x) = ⌊ g_{w*}(x / M₁ₘ) · M₂ₘ ⌋ / M₂ₘ .
//! ```
//!
//! The decisive property is that `h` is *pseudoperiodic*: for most base
//! points, shifting by (a rounding of) any multiple of the real period
//! `S = M₁ₘ/w*_j` leaves the value unchanged — that is what lets a
//! period-finding routine built for exactly periodic functions work on an
//! irrational-period target. [`pseudoperiod_fraction`] measures the fraction
//! directly.
//!
//! Phase arguments are reduced exactly: the canonical value of `h(x)` is
//! defined through the integer residue of `xᵀw / M₁ₘ` (see
//! [`crate::exact::LatticePhase`]), rounded to a double exactly once. Every
//! oracle backend evaluates `h` through this path, so brute-force, grouped
//! DFT, and structured sampling all see the identical function.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::ConceptInstance;
use crate::exact::{ExactError, LatticePhase};

/// Errors from discretization.
#[derive(Debug, Error)]
pub enum DiscretizerError {
    /// A parameter is out of domain or internally inconsistent.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// An evaluation point left the active truncation box.
    #[error("coordinate {coord} = {value} outside truncation radius {radius}")]
    OutOfDomain { coord: usize, value: i64, radius: u64 },
    /// The exact phase lattice cannot represent the requested scale.
    #[error(transparent)]
    Scale(#[from] ExactError),
}

/// Result alias for this module.
pub type DiscretizerResult<T> = Result<T, DiscretizerError>;

/// Which truncation radius is active for a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TruncationMode {
    /// Fourier-sampling stage: the radius is `R_tilde` itself (the large
    /// Hallgren truncation).
    FourierSampling,
    /// Verification stage: the radius is `R_tilde · M₁ₘ`.
    Verification,
}

/// Discretization and truncation parameters for one stage of the pipeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiscretizationParams {
    /// Argument scale `M₁` (the base period multiplier).
    pub m1: u64,
    /// Output grid density `M₂` (values land on `(1/M₂)ℤ`).
    pub m2: u64,
    /// Truncation parameter: the radius itself in Fourier-sampling mode, or
    /// the per-`M₁ₘ` half-width in verification mode.
    pub r_tilde: u64,
    /// Harmonic index `m ≥ 1`; the stage operates on `M₁ₘ = m·M₁`,
    /// `M₂ₘ = m·M₂`.
    pub harmonic_index: u32,
    /// Which radius interpretation is active.
    pub truncation_mode: TruncationMode,
    /// True when the parameters were derived from the guarantee formulas;
    /// false marks free-mode ("unsafe-params") runs.
    pub theorem_mode: bool,
}

impl DiscretizationParams {
    /// Derives theorem-mode parameters:
    /// `M₁ = ⌈max(70π·d^k·D³·R_w, R_w²/ε₁)⌉` with `k = 1` for the uniform
    /// family and `k = 2` otherwise, and `M₂` the largest integer with
    /// `M₂/M₁` strictly below `1/(8πD·R_w)`.
    ///
    /// `r_tilde` is stage-specific and supplied by the caller (callers use
    /// the guarantee formulas for their stage).
    pub fn theorem(
        d: usize,
        cap_d: usize,
        r_w: f64,
        eps1: f64,
        uniform: bool,
        r_tilde: u64,
        harmonic_index: u32,
        truncation_mode: TruncationMode,
    ) -> DiscretizerResult<Self> {
        if d == 0 || cap_d == 0 || harmonic_index == 0 {
            return Err(DiscretizerError::InvalidParameter(
                "d, D, and the harmonic index must be positive".into(),
            ));
        }
        if !(r_w > 0.0 && r_w.is_finite()) || !(eps1 > 0.0 && eps1.is_finite()) {
            return Err(DiscretizerError::InvalidParameter(format!(
                "R_w = {r_w} and eps1 = {eps1} must be positive and finite"
            )));
        }
        let dd = cap_d as f64;
        let d_factor = if uniform { d as f64 } else { (d as f64) * (d as f64) };
        let m1_real = (70.0 * std::f64::consts::PI * d_factor * dd.powi(3) * r_w)
            .max(r_w * r_w / eps1);
        if !(m1_real < 9.0e15) {
            return Err(DiscretizerError::InvalidParameter(format!(
                "theorem-mode M1 = {m1_real:.3e} is too large to represent"
            )));
        }
        let m1 = m1_real.ceil() as u64;
        let m2 = largest_m2_below_cap(m1, cap_d, r_w)?;
        Self::free(m1, m2, r_tilde, harmonic_index, truncation_mode).map(|mut p| {
            p.theorem_mode = true;
            p
        })
    }

    /// Wraps raw parameters without deriving them; the result is marked
    /// free-mode and downstream reports tag it "unsafe-params".
    pub fn free(
        m1: u64,
        m2: u64,
        r_tilde: u64,
        harmonic_index: u32,
        truncation_mode: TruncationMode,
    ) -> DiscretizerResult<Self> {
        if m1 == 0 || m2 == 0 || r_tilde == 0 || harmonic_index == 0 {
            return Err(DiscretizerError::InvalidParameter(
                "M1, M2, R_tilde, and the harmonic index must all be positive".into(),
            ));
        }
        let params = Self {
            m1,
            m2,
            r_tilde,
            harmonic_index,
            truncation_mode,
            theorem_mode: false,
        };
        // Materialize the radius once to catch overflow at construction.
        params.radius().map(|_| params)
    }

    /// Per-harmonic argument scale `M₁ₘ = m·M₁`.
    pub fn m1m(&self) -> u64 {
        self.m1 * self.harmonic_index as u64
    }

    /// Per-harmonic output density `M₂ₘ = m·M₂`.
    pub fn m2m(&self) -> u64 {
        self.m2 * self.harmonic_index as u64
    }

    /// The active truncation radius `R`: evaluation points satisfy
    /// `|x_j| ≤ R`, and the example state runs over `x_j ∈ [-R, R-1]`.
    pub fn radius(&self) -> DiscretizerResult<u64> {
        match self.truncation_mode {
            TruncationMode::FourierSampling => Ok(self.r_tilde),
            TruncationMode::Verification => self
                .r_tilde
                .checked_mul(self.m1m())
                .ok_or_else(|| {
                    DiscretizerError::InvalidParameter(
                        "verification radius R_tilde·M1m overflows u64".into(),
                    )
                }),
        }
    }

    /// The rounding ratio `c = M₂/M₁` as a reduced rational `(num, den)`.
    pub fn c_rational(&self) -> (u64, u64) {
        let g = num_integer::gcd(self.m2, self.m1);
        (self.m2 / g, self.m1 / g)
    }

    /// The rounding ratio as a double.
    pub fn c_value(&self) -> f64 {
        self.m2 as f64 / self.m1 as f64
    }

    /// True when `c` satisfies the strict verification precondition
    /// `c < 1/(8πD·R_w)`.
    pub fn c_within_verification_cap(&self, cap_d: usize, r_w: f64) -> bool {
        self.c_value() < 1.0 / (8.0 * std::f64::consts::PI * cap_d as f64 * r_w)
    }
}

/// Largest `M₂ ≥ 1` with `M₂/M₁ < 1/(8πD·R_w)` strictly.
fn largest_m2_below_cap(m1: u64, cap_d: usize, r_w: f64) -> DiscretizerResult<u64> {
    let cap = m1 as f64 / (8.0 * std::f64::consts::PI * cap_d as f64 * r_w);
    let mut m2 = cap.ceil() as i64 - 1; // strictly below cap, integer
    while m2 > 0 && (m2 as f64) / (m1 as f64) >= 1.0 / (8.0 * std::f64::consts::PI * cap_d as f64 * r_w)
    {
        m2 -= 1;
    }
    if m2 < 1 {
        return Err(DiscretizerError::InvalidParameter(format!(
            "no integer M2 ≥ 1 satisfies M2/M1 < 1/(8πD·R_w) for M1 = {m1}, D = {cap_d}, R_w = {r_w}"
        )));
    }
    Ok(m2 as u64)
}

/// One discretized output value `numerator / scale ∈ [-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscretizedSample {
    /// Signed numerator; `|numerator| ≤ scale`.
    pub numerator: i64,
    /// Output grid density (the active `M₂ₘ`).
    pub scale: u64,
}

impl DiscretizedSample {
    /// The represented value `numerator / scale`.
    pub fn value(&self) -> f64 {
        self.numerator as f64 / self.scale as f64
    }
}

/// Evaluator for one instance and parameter set, with the exact phase
/// lattice precomputed.
#[derive(Debug, Clone)]
pub struct Discretizer {
    instance: ConceptInstance,
    params: DiscretizationParams,
    lattice: LatticePhase,
    radius: u64,
}

impl Discretizer {
    /// Precomputes the exact phase lattice for `(instance, params)`.
    pub fn new(instance: &ConceptInstance, params: DiscretizationParams) -> DiscretizerResult<Self> {
        Self::with_reach(instance, params, 0)
    }

    /// Like [`Discretizer::new`], but sizes the exact lattice to admit
    /// evaluation points up to `radius + extra_reach` in magnitude.
    ///
    /// Shift-correlation queries evaluate `h` at `x + T·e_k` where `x` stays
    /// inside the truncation box but the shifted argument may leave it; the
    /// function itself is defined on all of ℤ^d, so only the representable
    /// range of the lattice needs to grow. Domain checks in [`Self::phase`]
    /// and [`Self::sample`] still enforce the plain radius.
    pub fn with_reach(
        instance: &ConceptInstance,
        params: DiscretizationParams,
        extra_reach: u64,
    ) -> DiscretizerResult<Self> {
        let radius = params.radius()?;
        let reach = radius.checked_add(extra_reach).ok_or_else(|| {
            DiscretizerError::InvalidParameter("evaluation reach overflows u64".into())
        })?;
        let lattice = LatticePhase::new(&instance.w_star, params.m1m(), reach)?;
        Ok(Self {
            instance: instance.clone(),
            params,
            lattice,
            radius,
        })
    }

    /// The parameter set this evaluator runs under.
    pub fn params(&self) -> &DiscretizationParams {
        &self.params
    }

    /// The instance this evaluator encodes.
    pub fn instance(&self) -> &ConceptInstance {
        &self.instance
    }

    /// The active truncation radius.
    pub fn radius(&self) -> u64 {
        self.radius
    }

    /// The exact phase lattice (shared with sampling backends).
    pub fn lattice(&self) -> &LatticePhase {
        &self.lattice
    }

    /// Canonical phase `frac(xᵀw / M₁ₘ)` of a lattice point.
    pub fn phase(&self, x: &[i64]) -> DiscretizerResult<f64> {
        self.check_domain(x)?;
        Ok(self.lattice.frac_f64(x))
    }

    /// The discretized level `⌊g̃(φ)·M₂ₘ⌋` for an exact phase residue —
    /// the single definition of `h` all backends share.
    pub fn level_of_residue(&self, residue: u128) -> i64 {
        let phi = self.lattice.residue_to_f64(residue);
        let g = self.instance.eval_profile(phi);
        let level = (g * self.params.m2m() as f64).floor() as i64;
        debug_assert!(level.unsigned_abs() <= self.params.m2m());
        level
    }

    /// Discretizes one lattice point: `⌊g_{w*}(x/M₁ₘ)·M₂ₘ⌋ / M₂ₘ`, with the
    /// floor toward −∞.
    pub fn sample(&self, x: &[i64]) -> DiscretizerResult<DiscretizedSample> {
        self.check_domain(x)?;
        let numerator = self.level_of_residue(self.lattice.residue(x));
        Ok(DiscretizedSample {
            numerator,
            scale: self.params.m2m(),
        })
    }

    /// The discretized value as a double.
    pub fn value(&self, x: &[i64]) -> DiscretizerResult<f64> {
        Ok(self.sample(x)?.value())
    }

    fn check_domain(&self, x: &[i64]) -> DiscretizerResult<()> {
        if x.len() != self.instance.d {
            return Err(DiscretizerError::InvalidParameter(format!(
                "point has length {} but d = {}",
                x.len(),
                self.instance.d
            )));
        }
        for (coord, &value) in x.iter().enumerate() {
            if value.unsigned_abs() > self.radius {
                return Err(DiscretizerError::OutOfDomain {
                    coord,
                    value,
                    radius: self.radius,
                });
            }
        }
        Ok(())
    }
}

/// One-shot discretization of a single point (constructs the evaluator
/// internally; prefer [`Discretizer`] for repeated evaluation).
pub fn discretize_value(
    instance: &ConceptInstance,
    params: DiscretizationParams,
    x: &[i64],
) -> DiscretizerResult<DiscretizedSample> {
    Discretizer::new(instance, params)?.sample(x)
}

/// Default multiples of the period probed by pseudoperiodicity audits.
pub const DEFAULT_ELL_VALUES: [i64; 6] = [-3, -2, -1, 1, 2, 3];

/// Measures the pseudoperiodic fraction of `h` along coordinate `j`.
///
/// For each `k ∈ {0, …, ⌊M₁ₘ/w*_j⌋}`, the point `x` is `base` with its
/// `j`-th coordinate replaced by `k`; the trial succeeds when for *every*
/// `ℓ` in `ell_values`, shifting that coordinate by `⌊ℓS⌋` or by `⌈ℓS⌉`
/// (period `S = M₁ₘ/w*_j`) reproduces `h(x)` for at least one of the two
/// roundings. Returns the success fraction.
///
/// Errors with [`DiscretizerError::OutOfDomain`] when a probed shift leaves
/// the truncation box, rather than silently skipping it.
pub fn pseudoperiod_fraction(
    instance: &ConceptInstance,
    params: DiscretizationParams,
    j: usize,
    ell_values: &[i64],
    base: &[i64],
) -> DiscretizerResult<f64> {
    if j >= instance.d {
        return Err(DiscretizerError::InvalidParameter(format!(
            "coordinate {j} out of range for d = {}",
            instance.d
        )));
    }
    let disc = Discretizer::new(instance, params)?;
    let s = params.m1m() as f64 / instance.w_star[j];
    let k_max = s.floor() as i64;
    let mut x = base.to_vec();
    let mut good = 0u64;
    for k in 0..=k_max {
        x[j] = k;
        let reference = disc.sample(&x)?;
        let mut all_ells = true;
        for &ell in ell_values {
            let shift = ell as f64 * s;
            let mut matched = false;
            for rounded in [shift.floor() as i64, shift.ceil() as i64] {
                x[j] = k + rounded;
                if disc.sample(&x)? == reference {
                    matched = true;
                    break;
                }
            }
            if !matched {
                all_ells = false;
                break;
            }
        }
        if all_ells {
            good += 1;
        }
    }
    Ok(good as f64 / (k_max + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::make_instance;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit_instance() -> ConceptInstance {
        make_instance(1, 1.0, 1, vec![1.0], vec![1.0]).unwrap()
    }

    fn params_100_10() -> DiscretizationParams {
        DiscretizationParams::free(100, 10, 2, 1, TruncationMode::Verification).unwrap()
    }

    #[test]
    fn discretize_value_matches_reference_points() {
        let inst = unit_instance();
        let p = params_100_10();
        // cos(0) = 1 is already on the grid.
        let s = discretize_value(&inst, p, &[0]).unwrap();
        assert_eq!((s.numerator, s.scale), (10, 10));
        // cos(π/2) = 0.
        let s = discretize_value(&inst, p, &[25]).unwrap();
        assert_eq!((s.numerator, s.scale), (0, 10));
        // cos(0.6π) = −0.3090… floors toward −∞.
        let s = discretize_value(&inst, p, &[30]).unwrap();
        assert_eq!((s.numerator, s.scale), (-4, 10));
        assert_abs_diff_eq!(s.value(), -0.4, epsilon = 1e-15);
    }

    #[test]
    fn discretize_value_enforces_domain() {
        let inst = unit_instance();
        let p = params_100_10();
        // Verification radius = R_tilde·M1m = 200.
        assert!(discretize_value(&inst, p, &[200]).is_ok());
        let err = discretize_value(&inst, p, &[201]);
        assert!(matches!(err, Err(DiscretizerError::OutOfDomain { .. })));
    }

    #[test]
    fn theorem_mode_derives_documented_scales() {
        let p = DiscretizationParams::theorem(
            1,
            1,
            1.0,
            1.0,
            true,
            5,
            1,
            TruncationMode::Verification,
        )
        .unwrap();
        // ⌈70π⌉ = 220 and the largest M2 with M2/M1 < 1/(8π) is 8.
        assert_eq!(p.m1, 220);
        assert_eq!(p.m2, 8);
        assert!(p.theorem_mode);
        assert!(p.c_within_verification_cap(1, 1.0));
        let (num, den) = p.c_rational();
        assert_eq!((num, den), (2, 55));
    }

    #[test]
    fn harmonic_index_scales_both_parameters() {
        let p = DiscretizationParams::free(100, 10, 3, 4, TruncationMode::Verification).unwrap();
        assert_eq!(p.m1m(), 400);
        assert_eq!(p.m2m(), 40);
        assert_eq!(p.radius().unwrap(), 1200);
        let q = DiscretizationParams::free(100, 10, 777, 4, TruncationMode::FourierSampling)
            .unwrap();
        assert_eq!(q.radius().unwrap(), 777);
    }

    #[test]
    fn exactly_periodic_setup_has_fraction_one() {
        // 1/w* = 2 ∈ ℤ and M1 a multiple of M2: h is exactly periodic.
        let inst = make_instance(1, 0.5, 1, vec![0.5], vec![1.0]).unwrap();
        let p = DiscretizationParams::free(40, 8, 9, 1, TruncationMode::Verification).unwrap();
        let f = pseudoperiod_fraction(&inst, p, 0, &DEFAULT_ELL_VALUES, &[0]).unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn zero_shift_alone_gives_fraction_one() {
        let inst = unit_instance();
        let p = params_100_10();
        let f = pseudoperiod_fraction(&inst, p, 0, &[0], &[0]).unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn pseudoperiod_errors_when_shift_leaves_domain() {
        let inst = unit_instance();
        // Radius 100·1 = 100 cannot contain k + ⌈3S⌉ for S = 100.
        let p = DiscretizationParams::free(100, 10, 1, 1, TruncationMode::Verification).unwrap();
        let err = pseudoperiod_fraction(&inst, p, 0, &DEFAULT_ELL_VALUES, &[0]);
        assert!(matches!(err, Err(DiscretizerError::OutOfDomain { .. })));
    }

    #[test]
    fn theorem_mode_reaches_pseudoperiodicity_threshold() {
        // Small end-to-end check of the 33/35 bound at the documented scales.
        let inst = unit_instance();
        let p = DiscretizationParams::theorem(
            1,
            1,
            1.0,
            1.0,
            true,
            5,
            1,
            TruncationMode::Verification,
        )
        .unwrap();
        let f = pseudoperiod_fraction(&inst, p, 0, &DEFAULT_ELL_VALUES, &[0]).unwrap();
        assert!(f >= 33.0 / 35.0, "fraction {f} below 33/35");
    }

    #[test]
    fn floor_gap_is_below_grid_and_shrinks_on_refinement() {
        let inst = make_instance(1, 1.0, 2, vec![1.0], vec![0.25, 0.75]).unwrap();
        let coarse =
            DiscretizationParams::free(100, 10, 2, 1, TruncationMode::Verification).unwrap();
        let fine =
            DiscretizationParams::free(100, 20, 2, 1, TruncationMode::Verification).unwrap();
        let dc = Discretizer::new(&inst, coarse).unwrap();
        let df = Discretizer::new(&inst, fine).unwrap();
        for x in -200..=200i64 {
            let g = inst.eval_profile(dc.phase(&[x]).unwrap());
            let gap_c = g - dc.value(&[x]).unwrap();
            let gap_f = g - df.value(&[x]).unwrap();
            assert!(gap_c >= 0.0 && gap_c < 1.0 / 10.0, "coarse gap {gap_c} at {x}");
            assert!(gap_f <= gap_c + 1e-15, "refinement grew the gap at {x}");
        }
    }

    proptest! {
        #[test]
        fn prop_sample_is_exact_grid_multiple(x in -500i64..=500) {
            let inst = make_instance(1, 1.0, 2, vec![1.0], vec![0.6, 0.4]).unwrap();
            let p = DiscretizationParams::free(250, 17, 2, 1, TruncationMode::Verification)
                .unwrap();
            let d = Discretizer::new(&inst, p).unwrap();
            let s = d.sample(&[x]).unwrap();
            prop_assert!(s.numerator.unsigned_abs() <= s.scale);
            // Value times scale recovers the numerator exactly.
            prop_assert_eq!((s.value() * s.scale as f64).round() as i64, s.numerator);
        }

        #[test]
        fn prop_sliced_discretization_consistent(x0 in -100i64..=100, x1 in -100i64..=100) {
            // d = 2: evaluating through the full lattice equals evaluating the
            // slice with the other coordinate folded into the phase.
            let inst = make_instance(
                2, 1.0, 1, vec![0.6, 0.8], vec![1.0],
            ).unwrap();
            let p = DiscretizationParams::free(100, 10, 2, 1, TruncationMode::Verification)
                .unwrap();
            let d = Discretizer::new(&inst, p).unwrap();
            let full = d.sample(&[x0, x1]).unwrap();
            let residue = d.lattice().residue(&[x0, x1]);
            prop_assert_eq!(full.numerator, d.level_of_residue(residue));
        }
    }
}
