//! Exact integer arithmetic on phase lattices.
//!
//! Every quantity the simulator discretizes has the form
//! `frac((x₁w₁ + … + x_d w_d) / M₁)` for integer coordinates `x_i`. Because
//! each `w_i` is an IEEE-754 double, `w_i / M₁` is *exactly* a dyadic-style
//! rational `ν_i / Q` with a common denominator `Q = M₁ · 2^E`. Working with
//! the integer residues `Σ x_i ν_i mod Q` instead of floating-point phases
//! gives three things:
//!
//! - a single canonical phase value per lattice point, so every oracle
//!   backend (brute force, grouped DFT, structured sampler) sees the *same*
//!   discretized function bit for bit;
//! - exact counting of lattice points whose phase lands in a residue window,
//!   via Euclidean floor sums ([`floor_sum`], [`count_in_arc`]);
//! - exact enumeration of the maximal runs of consecutive lattice points
//!   inside a window ([`arc_runs`]), which is what makes Fourier sampling at
//!   astronomically large truncation radii tractable.
//!
//! All routines are pure integer arithmetic in `u128`/`i128` with documented
//! magnitude preconditions; they are validated against naive loops in the
//! test suite.

use num_integer::Integer;
use thiserror::Error;

/// Errors from exact lattice arithmetic.
#[derive(Debug, Error)]
pub enum ExactError {
    /// An input was outside the routine's documented domain.
    #[error("invalid input to exact arithmetic: {0}")]
    InvalidInput(String),
    /// The requested scale cannot be represented without overflowing the
    /// 128-bit fast path (denominator times coordinate range too large).
    #[error("scale overflow: {0}")]
    ScaleOverflow(String),
}

/// Result alias for exact lattice arithmetic.
pub type ExactResult<T> = Result<T, ExactError>;

// === Euclidean floor sums ===

/// Largest `n` accepted by the floor-sum routines.
pub const FLOOR_SUM_MAX_N: u128 = 1 << 40;

/// Returns `Σ_{x=0}^{n-1} ⌊(a·x + b) / m⌋` exactly.
///
/// Runs in `O(log min(a, m))` iterations via the Euclidean reduction used for
/// counting lattice points under a line. Operands shrink monotonically, so
/// after the first iteration the loop usually continues in native 64-bit
/// arithmetic.
///
/// # Preconditions
///
/// `m ≥ 1`, `n ≤ 2^40`, and `a·n + b < 2^126` (checked via `debug_assert` and
/// guaranteed by all call sites in this crate).
pub fn floor_sum(n: u128, m: u128, a: u128, b: u128) -> u128 {
    debug_assert!(m >= 1, "floor_sum: modulus must be positive");
    debug_assert!(n <= FLOOR_SUM_MAX_N, "floor_sum: n too large");
    debug_assert!(
        a.checked_mul(n).and_then(|an| an.checked_add(b)).is_some(),
        "floor_sum: a*n + b overflows"
    );
    if n == 0 {
        return 0;
    }
    let (mut n, mut m, mut a, mut b) = (n, m, a, b);
    let mut ans: u128 = 0;
    loop {
        // Downshift to 64-bit arithmetic once every operand fits comfortably.
        if n < (1 << 62) && m < (1 << 62) && a < (1 << 62) && b < (1 << 62) {
            if let (Ok(n64), Ok(m64), Ok(a64), Ok(b64)) = (
                u64::try_from(n),
                u64::try_from(m),
                u64::try_from(a),
                u64::try_from(b),
            ) {
                if a64.checked_mul(n64).and_then(|x| x.checked_add(b64)).is_some() {
                    return ans + floor_sum_u64(n64, m64, a64, b64);
                }
            }
        }
        if a >= m {
            ans += (n - 1) * n / 2 * (a / m);
            a %= m;
        }
        if b >= m {
            ans += n * (b / m);
            b %= m;
        }
        let y_max = a * n + b;
        if y_max < m {
            return ans;
        }
        n = y_max / m;
        b = y_max % m;
        std::mem::swap(&mut m, &mut a);
    }
}

/// 64-bit inner loop of [`floor_sum`]; same contract with 64-bit operands and
/// the additional precondition `a·n + b < 2^64`.
fn floor_sum_u64(n: u64, m: u64, a: u64, b: u64) -> u128 {
    let (mut n, mut m, mut a, mut b) = (n, m, a, b);
    let mut ans: u128 = 0;
    loop {
        if a >= m {
            ans += (n as u128 - 1) * n as u128 / 2 * (a / m) as u128;
            a %= m;
        }
        if b >= m {
            ans += n as u128 * (b / m) as u128;
            b %= m;
        }
        let y_max = a as u128 * n as u128 + b as u128;
        if y_max < m as u128 {
            return ans;
        }
        n = (y_max / m as u128) as u64;
        b = (y_max % m as u128) as u64;
        std::mem::swap(&mut m, &mut a);
    }
}

/// Returns `Σ_{x=0}^{n-1} ⌊(a·x + b) / m⌋` for a possibly negative offset
/// `b`, as a signed value.
///
/// Shifts `b` into `[0, m)` by a multiple of `m` and corrects the total, so
/// the same magnitude preconditions as [`floor_sum`] apply to the shifted
/// offset. Requires `b > -2^126`.
pub fn floor_sum_signed(n: u128, m: u128, a: u128, b: i128) -> i128 {
    debug_assert!(m >= 1 && m <= (1 << 126));
    if n == 0 {
        return 0;
    }
    if b >= 0 {
        return floor_sum(n, m, a, b as u128) as i128;
    }
    // k = ⌈-b / m⌉ so that b + k·m ∈ [0, m).
    let k = (-b as u128).div_ceil(m);
    let shifted = (b + (k * m) as i128) as u128;
    floor_sum(n, m, a, shifted) as i128 - (n * k) as i128
}

// === Residue-window counting ===

/// Returns `#{x ∈ [0, n) : (a·x + b) mod m < c}` exactly.
///
/// Uses the identity that `(a·x + b) mod m < c` holds iff
/// `⌊(a·x + b)/m⌋ − ⌊(a·x + b − c)/m⌋ = 1`, turning the count into a
/// difference of two floor sums.
pub fn count_below(n: u128, m: u128, a: u128, b: u128, c: u128) -> u128 {
    debug_assert!(b < m, "count_below: offset must be reduced mod m");
    if c == 0 || n == 0 {
        return 0;
    }
    if c >= m {
        return n;
    }
    let whole = floor_sum(n, m, a, b) as i128;
    let cut = floor_sum_signed(n, m, a, b as i128 - c as i128);
    (whole - cut) as u128
}

/// Returns `#{x ∈ [0, n) : (a·x + b) mod m ∈ arc}` for a half-open circular
/// arc `[c₁, c₂)` of residues, exactly.
///
/// If `c₁ ≤ c₂` the arc is the plain window `[c₁, c₂)`; if `c₁ > c₂` it wraps
/// around: `[c₁, m) ∪ [0, c₂)`.
pub fn count_in_arc(n: u128, m: u128, a: u128, b: u128, c1: u128, c2: u128) -> u128 {
    debug_assert!(c1 <= m && c2 <= m);
    if c1 <= c2 {
        count_below(n, m, a, b, c2) - count_below(n, m, a, b, c1)
    } else {
        n - count_below(n, m, a, b, c1) + count_below(n, m, a, b, c2)
    }
}

// === Run enumeration ===

/// One maximal run of consecutive lattice points inside a residue window:
/// the points `x ∈ [start, start + len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    /// First lattice point of the run.
    pub start: u64,
    /// Number of consecutive lattice points in the run.
    pub len: u64,
    /// True when the run was clipped by the domain boundary `[0, n)` rather
    /// than by the residue window itself. At most the first and last run of
    /// an enumeration are clipped; all unclipped runs of one window take at
    /// most two distinct lengths.
    pub clipped: bool,
}

/// Enumerates the maximal runs of `{x ∈ [0, n) : (ν·x + b₀) mod q ∈ [c₁, c₂)}`
/// in increasing order of `start`, calling `emit` for each run.
///
/// The window must not wrap (`c₁ < c₂`); callers split wrapped arcs into two
/// calls. Unclipped runs have lengths `⌊(c₂−c₁)/ν⌋` or `⌈(c₂−c₁)/ν⌉` — this
/// two-value structure is what downstream Fourier evaluation exploits.
///
/// # Preconditions
///
/// `0 < ν < q`, `b₀ < q`, `c₁ < c₂ ≤ q`, and `q·(n+1) < 2^126` so that all
/// intermediate values fit in `i128`.
pub fn arc_runs<F: FnMut(Run)>(n: u64, q: u128, nu: u128, b0: u128, c1: u128, c2: u128, emit: &mut F) {
    debug_assert!(nu > 0 && nu < q);
    debug_assert!(b0 < q);
    debug_assert!(c1 < c2 && c2 <= q);
    debug_assert!(q.checked_mul(n as u128 + 1).map(|v| v < (1 << 126)) == Some(true));
    if n == 0 {
        return;
    }
    let (q, nu) = (q as i128, nu as i128);
    let (b0, c1, c2) = (b0 as i128, c1 as i128, c2 as i128);
    let nn = n as i128;
    // Run k occupies x ∈ [⌈(k·q + c₁ − b₀)/ν⌉, ⌈(k·q + c₂ − b₀)/ν⌉).
    // Solve for the k range intersecting [0, n).
    let k_lo = Integer::div_floor(&(b0 - c2), &q) + 1; // first k with run end > 0
    let k_hi = Integer::div_floor(&(nu * (nn - 1) + b0 - c1), &q); // last k with run start ≤ n−1
    let mut k = k_lo;
    while k <= k_hi {
        let raw_start = div_ceil_i128(k * q + c1 - b0, nu);
        let raw_end = div_ceil_i128(k * q + c2 - b0, nu);
        let start = raw_start.max(0);
        let end = raw_end.min(nn);
        if end > start {
            emit(Run {
                start: start as u64,
                len: (end - start) as u64,
                clipped: raw_start < 0 || raw_end > nn,
            });
        }
        k += 1;
    }
}

/// `⌈a / b⌉` for signed `a` and positive `b`.
fn div_ceil_i128(a: i128, b: i128) -> i128 {
    debug_assert!(b > 0);
    -Integer::div_floor(&-a, &b)
}

// === Exact phase lattice ===

/// The exact rational representation of the phase map
/// `x ↦ frac(xᵀw / M₁)` on the integer lattice.
///
/// Each coordinate ratio `w_i / M₁` is stored as `ν_i / q` with a shared
/// denominator `q = M₁ · 2^E / g` (after removing the common factor `g`),
/// which is exact because every `w_i` is a binary floating-point number.
/// Phase evaluation reduces to modular integer arithmetic, giving one
/// canonical rounded phase per lattice point regardless of which oracle
/// backend asks for it.
#[derive(Debug, Clone)]
pub struct LatticePhase {
    q: u128,
    nums: Vec<u128>,
    x_abs_max: u64,
}

impl LatticePhase {
    /// Builds the exact lattice for frequency vector `w` and scale `M₁`,
    /// supporting coordinates with `|x_i| ≤ x_abs_max`.
    ///
    /// Fails with [`ExactError::ScaleOverflow`] when the common denominator
    /// (or its product with the coordinate range) cannot fit the 128-bit
    /// fast path — with IEEE-754 inputs this only happens for scales far
    /// outside the simulator's feasible regime.
    pub fn new(w: &[f64], m1: u64, x_abs_max: u64) -> ExactResult<Self> {
        if w.is_empty() {
            return Err(ExactError::InvalidInput("w must be non-empty".into()));
        }
        if m1 == 0 {
            return Err(ExactError::InvalidInput("M1 must be positive".into()));
        }
        let mut mants = Vec::with_capacity(w.len());
        let mut exps = Vec::with_capacity(w.len());
        for (i, &wi) in w.iter().enumerate() {
            if !wi.is_finite() || wi <= 0.0 {
                return Err(ExactError::InvalidInput(format!(
                    "w[{i}] = {wi} must be finite and positive"
                )));
            }
            let (m, e) = decompose_f64(wi);
            mants.push(m);
            exps.push(e);
        }
        // Common denominator exponent: enough binary digits for the least
        // significant mantissa bit among all coordinates.
        let e_shift = exps.iter().map(|&e| (-e).max(0)).max().unwrap() as u32;
        let q = (m1 as u128)
            .checked_shl(e_shift)
            .filter(|&q| q < (1 << 126))
            .ok_or_else(|| {
                ExactError::ScaleOverflow(format!(
                    "common denominator M1·2^{e_shift} exceeds 2^126"
                ))
            })?;
        let mut nums = Vec::with_capacity(w.len());
        for (&m, &e) in mants.iter().zip(&exps) {
            let up = (e_shift as i64 + e as i64) as u32;
            let num = (m as u128).checked_shl(up).ok_or_else(|| {
                ExactError::ScaleOverflow("numerator exceeds 128 bits".into())
            })?;
            nums.push(num % q);
        }
        // Remove any common factor so magnitudes stay minimal.
        let mut g = q;
        for &n in &nums {
            g = g.gcd(&n);
        }
        let (q, nums) = if g > 1 {
            (q / g, nums.iter().map(|&n| n / g).collect())
        } else {
            (q, nums)
        };
        // The residue accumulator needs |x|·ν < 2^127 − q per term.
        let per_term = (1u128 << 126) / q.max(1);
        if (x_abs_max as u128) > per_term {
            return Err(ExactError::ScaleOverflow(format!(
                "coordinate range {x_abs_max} times denominator ~2^{:.0} exceeds 2^126",
                (q as f64).log2()
            )));
        }
        Ok(Self { q, nums, x_abs_max })
    }

    /// The shared denominator `q`.
    pub fn denominator(&self) -> u128 {
        self.q
    }

    /// The numerator `ν_j` of coordinate `j`, already reduced mod `q`.
    pub fn numerator(&self, j: usize) -> u128 {
        self.nums[j]
    }

    /// Largest coordinate magnitude accepted by [`Self::residue`].
    pub fn x_abs_max(&self) -> u64 {
        self.x_abs_max
    }

    /// Exact residue `(Σ_i x_i ν_i) mod q` of the phase numerator.
    pub fn residue(&self, x: &[i64]) -> u128 {
        debug_assert_eq!(x.len(), self.nums.len());
        let mut acc: u128 = 0;
        for (&xi, &nu) in x.iter().zip(&self.nums) {
            debug_assert!(xi.unsigned_abs() <= self.x_abs_max);
            let mag = (xi.unsigned_abs() as u128 * nu) % self.q;
            acc += if xi >= 0 { mag } else { (self.q - mag) % self.q };
            if acc >= self.q {
                acc -= self.q;
            }
        }
        acc
    }

    /// Exact residue for a single-coordinate move: `(base + x·ν_j) mod q`.
    pub fn residue_step(&self, j: usize, x: i64, base: u128) -> u128 {
        debug_assert!(base < self.q);
        debug_assert!(x.unsigned_abs() <= self.x_abs_max);
        let mag = (x.unsigned_abs() as u128 * self.nums[j]) % self.q;
        let shift = if x >= 0 { mag } else { (self.q - mag) % self.q };
        let acc = base + shift;
        if acc >= self.q {
            acc - self.q
        } else {
            acc
        }
    }

    /// The canonical rounded phase `frac(xᵀw / M₁)` as a double: the exact
    /// residue divided by the exact denominator, rounded once.
    pub fn frac_f64(&self, x: &[i64]) -> f64 {
        self.residue_to_f64(self.residue(x))
    }

    /// Rounds an exact residue to the canonical phase double.
    pub fn residue_to_f64(&self, residue: u128) -> f64 {
        debug_assert!(residue < self.q);
        residue as f64 / self.q as f64
    }
}

/// Decomposes a finite positive double into `(mantissa, exponent)` with
/// `value = mantissa · 2^exponent` exactly and an odd mantissa.
fn decompose_f64(value: f64) -> (u64, i32) {
    debug_assert!(value.is_finite() && value > 0.0);
    let bits = value.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut mant, mut exp) = if biased == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), biased - 1075)
    };
    let tz = mant.trailing_zeros();
    mant >>= tz;
    exp += tz as i32;
    (mant, exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_floor_sum(n: u128, m: u128, a: u128, b: u128) -> u128 {
        (0..n).map(|x| (a * x + b) / m).sum()
    }

    #[test]
    fn floor_sum_matches_naive_exhaustively() {
        for n in 0..20u128 {
            for m in 1..12u128 {
                for a in 0..25u128 {
                    for b in 0..25u128 {
                        assert_eq!(
                            floor_sum(n, m, a, b),
                            naive_floor_sum(n, m, a, b),
                            "n={n} m={m} a={a} b={b}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn floor_sum_handles_huge_operands() {
        // Denominators around 2^90 with coordinates around 2^30, the regime
        // the structured Fourier sampler runs in.
        let m = (1u128 << 90) + 12_345_678_901_234_567;
        let a = (1u128 << 89) + 987_654_321;
        let b = (1u128 << 88) + 55;
        let n = 1u128 << 14;
        assert_eq!(floor_sum(n, m, a, b), naive_floor_sum(n, m, a, b));
    }

    #[test]
    fn floor_sum_signed_shifts_correctly() {
        for b in -40i128..40 {
            for n in 0..12u128 {
                for m in 1..9u128 {
                    for a in 0..9u128 {
                        let expect: i128 = (0..n as i128)
                            .map(|x| Integer::div_floor(&(a as i128 * x + b), &(m as i128)))
                            .sum();
                        assert_eq!(
                            floor_sum_signed(n, m, a, b),
                            expect,
                            "n={n} m={m} a={a} b={b}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn count_below_matches_naive() {
        for n in 0..18u128 {
            for m in 1..11u128 {
                for a in 0..11u128 {
                    for b in 0..m {
                        for c in 0..=m {
                            let expect = (0..n).filter(|&x| (a * x + b) % m < c).count() as u128;
                            assert_eq!(
                                count_below(n, m, a, b, c),
                                expect,
                                "n={n} m={m} a={a} b={b} c={c}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn count_in_arc_handles_wraparound() {
        let (n, m, a, b) = (50u128, 17u128, 5u128, 3u128);
        for c1 in 0..=m {
            for c2 in 0..=m {
                let expect = (0..n)
                    .filter(|&x| {
                        let r = (a * x + b) % m;
                        if c1 <= c2 {
                            r >= c1 && r < c2
                        } else {
                            r >= c1 || r < c2
                        }
                    })
                    .count() as u128;
                assert_eq!(count_in_arc(n, m, a, b, c1, c2), expect, "c1={c1} c2={c2}");
            }
        }
    }

    #[test]
    fn arc_runs_reconstruct_membership() {
        let cases = [
            (40u64, 23u128, 7u128, 5u128, 3u128, 11u128),
            (64, 64, 48, 0, 1, 17),
            (100, 97, 1, 96, 90, 97),
            (1, 13, 5, 2, 0, 13),
        ];
        for (n, q, nu, b0, c1, c2) in cases {
            let mut got = vec![false; n as usize];
            let mut lens = std::collections::BTreeSet::new();
            arc_runs(n, q, nu, b0, c1, c2, &mut |run| {
                for x in run.start..run.start + run.len {
                    assert!(!got[x as usize], "run overlap at {x}");
                    got[x as usize] = true;
                }
                if !run.clipped {
                    lens.insert(run.len);
                }
            });
            for x in 0..n {
                let member = (nu * x as u128 + b0) % q >= c1 && (nu * x as u128 + b0) % q < c2;
                assert_eq!(got[x as usize], member, "x={x} q={q} nu={nu}");
            }
            assert!(lens.len() <= 2, "more than two unclipped run lengths: {lens:?}");
        }
    }

    #[test]
    fn lattice_phase_matches_float_phase() {
        let w = [0.734_218_75f64, 0.031_25, 1.4142135623730951];
        let m1 = 220u64;
        let lat = LatticePhase::new(&w, m1, 1 << 20).unwrap();
        for x in [[0i64, 0, 0], [1, 2, 3], [-5, 17, -220], [220, -1, 1], [999_983, -999_983, 12]] {
            let dot: f64 = x.iter().zip(&w).map(|(&xi, &wi)| xi as f64 * wi).sum();
            let expect = (dot / m1 as f64).rem_euclid(1.0);
            let got = lat.frac_f64(&x);
            // The float reference accumulates rounding error; the lattice
            // value is exact, so compare loosely and wrap-aware.
            let diff = (got - expect).abs();
            assert!(diff.min((1.0 - diff).abs()) < 1e-9, "x={x:?} got={got} expect={expect}");
        }
    }

    #[test]
    fn lattice_phase_is_exactly_periodic() {
        // w = 3/8 with M1 = 3 gives phase period 8 exactly.
        let lat = LatticePhase::new(&[0.375], 3, 1 << 30).unwrap();
        let base = lat.residue(&[5]);
        for k in [-3i64, -1, 1, 2, 7] {
            assert_eq!(lat.residue(&[5 + 8 * k]), base, "k={k}");
        }
        assert_eq!(lat.denominator(), 8);
    }

    #[test]
    fn lattice_phase_rejects_overflowing_scales() {
        // Subnormal-scale coordinates force a gigantic denominator.
        let err = LatticePhase::new(&[1e-300], u64::MAX / 2, 1 << 40);
        assert!(matches!(err, Err(ExactError::ScaleOverflow(_))));
        let err = LatticePhase::new(&[f64::NAN], 10, 1);
        assert!(matches!(err, Err(ExactError::InvalidInput(_))));
    }

    #[test]
    fn residue_step_agrees_with_residue() {
        let w = [0.4375, 0.903_125];
        let lat = LatticePhase::new(&w, 7, 1 << 20).unwrap();
        let base = lat.residue(&[3, -9]);
        for x in [-13i64, -1, 0, 1, 4, 1000] {
            assert_eq!(lat.residue_step(0, x, base), lat.residue(&[3 + x, -9]));
        }
    }

    proptest! {
        #[test]
        fn prop_floor_sum_matches_naive(
            n in 0u128..500,
            m in 1u128..1_000_000,
            a in 0u128..1_000_000_000,
            b in 0u128..1_000_000_000,
        ) {
            prop_assert_eq!(floor_sum(n, m, a, b), naive_floor_sum(n, m, a, b));
        }

        #[test]
        fn prop_count_below_matches_naive(
            n in 0u128..400,
            m in 1u128..10_000,
            a in 0u128..10_000,
            bc in (0u128..10_000, 0u128..10_001),
        ) {
            let b = bc.0 % m;
            let c = bc.1 % (m + 1);
            let expect = (0..n).filter(|&x| (a * x + b) % m < c).count() as u128;
            prop_assert_eq!(count_below(n, m, a, b, c), expect);
        }

        #[test]
        fn prop_arc_runs_cover_window(
            n in 1u64..300,
            q in 2u128..5_000,
            nu in 1u128..5_000,
            b0 in 0u128..5_000,
            cs in (0u128..5_000, 1u128..5_000),
        ) {
            let nu = 1 + nu % (q - 1);
            let b0 = b0 % q;
            let c1 = cs.0 % q;
            let c2 = c1 + 1 + cs.1 % (q - c1);
            let mut members = Vec::new();
            arc_runs(n, q, nu, b0, c1, c2, &mut |run| {
                for x in run.start..run.start + run.len {
                    members.push(x);
                }
            });
            let expect: Vec<u64> = (0..n)
                .filter(|&x| {
                    let r = (nu * x as u128 + b0) % q;
                    r >= c1 && r < c2
                })
                .collect();
            prop_assert_eq!(members, expect);
        }
    }
}
