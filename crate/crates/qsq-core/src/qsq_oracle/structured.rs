//! Exact Fourier sampling at scales beyond the FFT budget.
//!
//! For uniform input the sliced measurement distribution is
//! `Pr(y) = (1/q²)·Σ_v |A_v(y)|²` with `A_v(y) = Σ_{t ∈ U_v} e^{2πity/q}`,
//! where `U_v` is the set of slice points whose quantized value sits on
//! level `v`. Each level set is a union of a handful of residue arcs, so
//! every count this sampler needs is a lattice-point count inside an arc —
//! an exact integer obtained by [`count_in_arc`] in logarithmic time, never
//! by enumerating the `q` points.
//!
//! A draw proceeds in three stages:
//!
//! 1. **Level draw.** `Pr(v) = N_v/q` with `N_v = |U_v|` counted exactly;
//!    the draw is an integer uniform on `[0, q)` walked through the counts,
//!    so this stage involves no floating point at all.
//! 2. **Low bits.** With `q` a power of two, the low bits of `y` are drawn
//!    one at a time: `Pr(y ≡ r (mod 2^b))` is a short cosine sum over exact
//!    circular autocorrelation counts of `U_v` at lags `u·q/2^b`, and each
//!    lag count is an arc ∩ shifted-arc intersection count.
//! 3. **High-part scan.** Once the residual outcome count drops to the scan
//!    budget, the remaining candidates `y = r + 2^b·s` are scored by
//!    `|A_v(y)|²` directly: `U_v` decomposes into maximal runs of
//!    consecutive points ([`arc_runs`]), each run contributes a geometric
//!    factor times a phase, and because the candidates form an arithmetic
//!    progression those phases have *integer* frequencies modulo the scan
//!    size — one FFT per distinct run length evaluates all of them at once.
//!
//! The bit stage and the scan stage compute the same conditional mass along
//! two independent routes; every draw cross-checks them and panics on
//! disagreement, so a defect in either path cannot silently skew samples.
//!
//! The level arcs are found once per oracle by bisecting each level
//! threshold inside the monotone pieces of the trigonometric profile. The
//! boundaries inherit the double-precision rounding of the canonical level
//! map, which can misplace a boundary by a few residue units out of a
//! denominator of ~2⁸⁰; a slice of ≤ 2⁴⁰ points hits such a sliver with
//! probability ≈ 2⁻³⁹ per draw, and construction-time probes (every arc
//! endpoint plus a deterministic random sweep) verify the arcs against the
//! canonical level map directly.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::discretizer::Discretizer;
use crate::exact::{arc_runs, count_in_arc};

use super::{OracleConfig, OracleError, OracleResult};

/// How many random residues the arc table is probed at after construction.
const BUILD_PROBES: usize = 2048;

/// Grid density per harmonic when scanning for extrema of the profile.
const EXTREMA_GRID_PER_HARMONIC: usize = 4096;

/// Relative disagreement between the bit-stage mass and the scan-stage mass
/// that is treated as an internal defect.
const CONSISTENCY_RTOL: f64 = 1.0e-6;

// ===================================================================
// Level arcs: the level map as a partition of residue space
// ===================================================================

/// The canonical level map `residue ↦ ⌊M₂ₘ·g̃(residue/Q)⌋` represented as a
/// partition of `[0, Q)` into constant-level arcs.
///
/// Arc `i` is `[starts[i], starts[i+1])` (the last runs to `Q`) and carries
/// `levels[i]`. The table depends only on the instance and the
/// discretization, not on the slice, so one table serves every query of an
/// oracle.
pub(crate) struct LevelArcs {
    big_q: u128,
    starts: Vec<u128>,
    levels: Vec<i64>,
}

impl LevelArcs {
    /// Builds the arc table for `disc` and verifies it against the canonical
    /// level map at every arc endpoint and at [`BUILD_PROBES`] deterministic
    /// random residues.
    ///
    /// # Panics
    ///
    /// Panics if any probe disagrees with [`Discretizer::level_of_residue`];
    /// that indicates a defect in the boundary search, and sampling from an
    /// inconsistent table would silently skew the distribution.
    pub(crate) fn build(disc: &Discretizer) -> Self {
        let big_q = disc.lattice().denominator();
        let level = |r: u128| disc.level_of_residue(r % big_q);

        // Split residue space at the extrema of the profile; between two
        // extrema the level map is monotone, so each threshold crossing is a
        // single bisection.
        let mut seams: Vec<u128> = phase_extrema(disc)
            .into_iter()
            .map(|phi| ((phi * big_q as f64) as u128).min(big_q - 1))
            .collect();
        seams.push(0);
        seams.sort_unstable();
        seams.dedup();

        let mut starts = seams.clone();
        for (i, &lo) in seams.iter().enumerate() {
            let hi = if i + 1 < seams.len() { seams[i + 1] } else { seams[0] + big_q };
            if hi <= lo + 1 {
                continue;
            }
            let l_lo = level(lo);
            let l_hi = level(hi - 1);
            if l_hi > l_lo {
                for v in l_lo + 1..=l_hi {
                    starts.push(bisect_first(lo, hi, |r| level(r) >= v) % big_q);
                }
            } else {
                for v in l_hi..l_lo {
                    starts.push(bisect_first(lo, hi, |r| level(r) <= v) % big_q);
                }
            }
        }
        starts.sort_unstable();
        starts.dedup();

        let levels: Vec<i64> = starts.iter().map(|&s| level(s)).collect();
        let arcs = LevelArcs { big_q, starts, levels };

        // Every arc must be constant through its final residue, and random
        // probes must agree with the canonical map.
        for i in 0..arcs.starts.len() {
            let end = if i + 1 < arcs.starts.len() { arcs.starts[i + 1] } else { big_q };
            assert_eq!(
                arcs.levels[i],
                level(end - 1),
                "level arc {i} is not constant; boundary search is inconsistent"
            );
        }
        let mut state = 0x9e37_79b9_7f4a_7c15u128;
        for _ in 0..BUILD_PROBES {
            // splitmix-style probe sequence; deterministic and seed-free.
            state = state.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(0x632b_e5ab);
            let r = state % big_q;
            assert_eq!(
                arcs.level_at(r),
                level(r),
                "level arc table disagrees with the canonical level map at residue {r}"
            );
        }
        arcs
    }

    /// Level of the arc containing `res`.
    fn level_at(&self, res: u128) -> i64 {
        let i = match self.starts.binary_search(&res) {
            Ok(i) => i,
            Err(0) => self.starts.len() - 1,
            Err(i) => i - 1,
        };
        self.levels[i]
    }

    /// The distinct levels, ascending.
    fn distinct_levels(&self) -> Vec<i64> {
        let mut vs = self.levels.clone();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    /// All arcs `[start, end)` (non-wrapping, `end ≤ Q`) of level `v`.
    fn arcs_of(&self, v: i64) -> Vec<(u128, u128)> {
        let mut out = Vec::new();
        for i in 0..self.starts.len() {
            if self.levels[i] == v {
                let end = if i + 1 < self.starts.len() { self.starts[i + 1] } else { self.big_q };
                out.push((self.starts[i], end));
            }
        }
        out
    }
}

/// First `r ∈ (lo, hi)` with `pred(r)`, given `!pred(lo)`, `pred(hi − 1)`,
/// and monotone `pred` (residues unwrapped past `Q`; callers reduce).
fn bisect_first<F: Fn(u128) -> bool>(lo: u128, hi: u128, pred: F) -> u128 {
    let (mut lo, mut hi) = (lo, hi - 1);
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Extrema of the profile `φ ↦ Σ_j β_j cos(2πjφ)` in `[0, 1)`: sign changes
/// of its derivative found on a dense grid and sharpened by bisection. An
/// inflection with horizontal tangent is not an extremum and may be skipped;
/// the map stays monotone through it.
fn phase_extrema(disc: &Discretizer) -> Vec<f64> {
    let beta = &disc.instance().beta_star;
    let deriv = |phi: f64| -> f64 {
        let mut s = 0.0;
        for (idx, b) in beta.iter().enumerate() {
            let j = (idx + 1) as f64;
            s -= j * b * (2.0 * PI * j * phi).sin();
        }
        s
    };
    let n = EXTREMA_GRID_PER_HARMONIC * beta.len();
    let mut roots = Vec::new();
    let mut prev = deriv(0.0);
    for i in 0..n {
        let x0 = i as f64 / n as f64;
        let x1 = (i + 1) as f64 / n as f64;
        let next = deriv(x1);
        if prev == 0.0 {
            roots.push(x0);
        } else if prev * next < 0.0 {
            let (mut a, mut b) = (x0, x1);
            let mut fa = prev;
            for _ in 0..64 {
                let m = 0.5 * (a + b);
                let fm = deriv(m);
                if fm == 0.0 {
                    a = m;
                    break;
                }
                if fa * fm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = next;
    }
    roots
}

// ===================================================================
// Slice geometry: exact counts on one measurement slice
// ===================================================================

/// One sampling slice: coordinate `j` swept over `t' ∈ [0, q)` (the lattice
/// interval `[-R, R-1]` shifted to start at zero — a global phase that no
/// squared magnitude sees), remaining coordinates pinned.
struct SliceGeometry<'a> {
    q: u64,
    big_q: u128,
    nu: u128,
    b0: u128,
    arcs: &'a LevelArcs,
}

impl<'a> SliceGeometry<'a> {
    fn new(
        disc: &Discretizer,
        arcs: &'a LevelArcs,
        j: usize,
        others: &[i64],
    ) -> OracleResult<Self> {
        let radius = disc.radius();
        let q = 2 * radius;
        if !q.is_power_of_two() {
            return Err(OracleError::InfeasibleScale(format!(
                "structured sampling needs q = 2R to be a power of two, got q = {q}; \
                 round the sampling radius up to the next power of two"
            )));
        }
        let lattice = disc.lattice();
        let big_q = lattice.denominator();
        if big_q.checked_mul(q as u128 + 1).is_none_or(|v| v >= 1 << 126) {
            return Err(OracleError::InfeasibleScale(format!(
                "phase denominator {big_q} times q = {q} exceeds the exact-arithmetic range"
            )));
        }
        let nu = lattice.numerator(j) % big_q;
        let mut x0 = others.to_vec();
        x0[j] = 0;
        let base = lattice.residue(&x0);
        let b0 = lattice.residue_step(j, -(radius as i64), base);
        Ok(SliceGeometry { q, big_q, nu, b0, arcs })
    }

    /// Residue of slice point `t'` is `(b0 + t'·ν) mod Q`; counts the points
    /// of `[0, n)` landing in the (possibly wrapping) arc `[c1, c2)`.
    fn count(&self, n: u64, c1: u128, c2: u128) -> u128 {
        count_in_arc(n as u128, self.big_q, self.nu, self.b0, c1, c2)
    }

    /// `N_v` for every distinct level; the counts partition the slice.
    fn level_counts(&self) -> (Vec<i64>, Vec<u64>) {
        let levels = self.arcs.distinct_levels();
        let counts: Vec<u64> = levels
            .iter()
            .map(|&v| {
                self.arcs
                    .arcs_of(v)
                    .iter()
                    .map(|&(c1, c2)| self.count(self.q, c1, c2))
                    .sum::<u128>() as u64
            })
            .collect();
        let total: u128 = counts.iter().map(|&c| c as u128).sum();
        assert_eq!(
            total,
            self.q as u128,
            "level counts must partition the slice; the arc table is inconsistent"
        );
        (levels, counts)
    }

    /// Circular autocorrelation count of `U_v` at lag `delta ∈ [0, q)`:
    /// `#{t' : t', t'+Δ ∈ [0, q), both residues on level v}` plus the same
    /// with the window wrapped (`Δ − q`), which equals the plain count at
    /// lag `q − Δ`.
    fn circular_lag_count(&self, v_arcs: &[(u128, u128)], delta: u64) -> u128 {
        if delta == 0 {
            return v_arcs.iter().map(|&(c1, c2)| self.count(self.q, c1, c2)).sum();
        }
        self.linear_lag_count(v_arcs, delta) + self.linear_lag_count(v_arcs, self.q - delta)
    }

    /// `#{t' ∈ [0, q − Δ) : t' and t' + Δ both on level v}`.
    fn linear_lag_count(&self, v_arcs: &[(u128, u128)], delta: u64) -> u128 {
        let n = self.q - delta;
        if n == 0 {
            return 0;
        }
        // Residue of t'+Δ lies in arc b iff residue of t' lies in b shifted
        // back by Δ·ν; Δ·ν ≤ q·Q < 2^126 by the constructor guard.
        let shift = (delta as u128 * self.nu) % self.big_q;
        let mut total = 0u128;
        for &(a1, a2) in v_arcs {
            for &(b1, b2) in v_arcs {
                let shifted = (b1 + self.big_q - shift) % self.big_q;
                for (c1, c2) in intersect_arc(a1, a2 - a1, shifted, b2 - b1, self.big_q) {
                    total += self.count(n, c1, c2);
                }
            }
        }
        total
    }

    /// `|A_v(r + s·2^{n_bits})|²` for every `s` in the scan window, via run
    /// decomposition and one FFT per distinct run length.
    fn scan_weights(&self, v_arcs: &[(u128, u128)], r: u64, n_bits: u32) -> Vec<f64> {
        let scan_n = (self.q >> n_bits) as usize;
        let mut starts_by_len: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for &(c1, c2) in v_arcs {
            arc_runs(self.q, self.big_q, self.nu, self.b0, c1, c2, &mut |run| {
                starts_by_len.entry(run.len).or_default().push(run.start);
            });
        }

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_inverse(scan_n);
        let mut hist = vec![Complex64::new(0.0, 0.0); scan_n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut acc = vec![Complex64::new(0.0, 0.0); scan_n];
        let mask = scan_n as u64 - 1;
        for (&len, starts) in &starts_by_len {
            hist.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for &start in starts {
                // e^{2πi·start·y/q} at y = r + s·2^{n_bits} splits into the
                // r-dependent weight below times e^{2πi·(start mod scan)·s/scan}.
                let m = (start as u128 * r as u128) % (self.q as u128);
                let ang = 2.0 * PI * (m as f64) / (self.q as f64);
                hist[(start & mask) as usize] += Complex64::from_polar(1.0, ang);
            }
            fft.process_with_scratch(&mut hist, &mut scratch);
            for (s, weight) in acc.iter_mut().enumerate() {
                let y = r + ((s as u64) << n_bits);
                *weight += geometric_factor(len, y, self.q) * hist[s];
            }
        }
        acc.into_iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Intersection of the non-wrapping arc `[a, a+la)` with the possibly
/// wrapping arc `[b, b+lb)` on the circle `[0, m)`: up to two non-wrapping
/// pieces `(start, end)`.
fn intersect_arc(a: u128, la: u128, b: u128, lb: u128, m: u128) -> Vec<(u128, u128)> {
    let mut out = Vec::new();
    let r = (b + m - a) % m;
    if r < la {
        let end = la.min(r + lb);
        if end > r {
            out.push((a + r, a + end));
        }
    }
    if r + lb > m {
        let end = la.min(r + lb - m);
        if end > 0 {
            out.push((a, a + end));
        }
    }
    out
}

/// `Σ_{i=0}^{len−1} e^{2πi·i·y/q} = e^{iπ(len−1)y/q}·sin(πleny/q)/sin(πy/q)`,
/// with both arguments reduced exactly: `q` is a power of two, so after the
/// integer reductions mod `2q` every quotient below is a dyadic rational
/// represented exactly in double precision.
fn geometric_factor(len: u64, y: u64, q: u64) -> Complex64 {
    if y == 0 {
        return Complex64::new(len as f64, 0.0);
    }
    let two_q = 2 * q as u128;
    let num = ((len as u128 * y as u128) % two_q) as f64 / q as f64;
    let phs = (((len as u128 - 1) * y as u128) % two_q) as f64 / q as f64;
    let den = y as f64 / q as f64;
    let mag = (PI * num).sin() / (PI * den).sin();
    let (s, c) = (PI * phs).sin_cos();
    Complex64::new(c * mag, s * mag)
}

// ===================================================================
// The sampler
// ===================================================================

/// Draws one outcome `y ∈ [0, q)` of the sliced measurement under the
/// uniform input distribution, for `q` far beyond what a dense FFT can
/// hold. Exact in distribution up to double-precision evaluation of the
/// stage masses (relative error ~1e-12; every draw cross-checks the two
/// independent mass computations at [`CONSISTENCY_RTOL`]).
pub(crate) fn sample_uniform_slice(
    disc: &Discretizer,
    j: usize,
    others: &[i64],
    arcs: &LevelArcs,
    config: &OracleConfig,
    rng: &mut ChaCha8Rng,
) -> OracleResult<u64> {
    let geom = SliceGeometry::new(disc, arcs, j, others)?;
    let q = geom.q;

    // Stage 1: draw the level exactly.
    let (levels, counts) = geom.level_counts();
    let mut target = rng.gen_range(0..q);
    let mut chosen = levels.len() - 1;
    for (i, &c) in counts.iter().enumerate() {
        if target < c {
            chosen = i;
            break;
        }
        target -= c;
    }
    let n_v = counts[chosen];
    let v_arcs = arcs.arcs_of(levels[chosen]);

    // Stage 2: draw the low bits of y.
    let log_q = q.trailing_zeros();
    let scan_bits = config.structured_scan_bits.min(log_q);
    let n_bits = log_q - scan_bits;
    let mut r = 0u64;
    let mut ctilde = Vec::new();
    if n_bits > 0 {
        // Lag table at δ = u·2^scan_bits; symmetric, so count half.
        let m = 1usize << n_bits;
        ctilde = vec![0.0f64; m];
        for u in 0..=m / 2 {
            let delta = (u as u64) << scan_bits;
            let c = geom.circular_lag_count(&v_arcs, delta) as f64;
            ctilde[u] = c;
            if u > 0 && u < m - u {
                ctilde[m - u] = c;
            }
        }
        assert_eq!(ctilde[0] as u64, n_v, "zero-lag count must equal the level count");
        for b in 1..=n_bits {
            let half = 1u64 << (b - 1);
            let p0 = bit_mass(&ctilde, b, n_bits, r);
            let p1 = bit_mass(&ctilde, b, n_bits, r + half);
            let total = p0 + p1;
            let p_one = if total > 0.0 { (p1 / total).clamp(0.0, 1.0) } else { 0.5 };
            if rng.gen_bool(p_one) {
                r += half;
            }
        }
    }

    // Stage 3: scan the remaining candidates by |A_v|².
    let weights = geom.scan_weights(&v_arcs, r, n_bits);
    let total_weight: f64 = weights.iter().sum();

    // The two routes to Pr(y ≡ r) must agree: the cosine sum over exact lag
    // counts, and the run/FFT evaluation summed over the scan.
    let scan_mass = total_weight / (q as f64 * n_v as f64);
    let bit_route = if n_bits == 0 {
        1.0
    } else {
        bit_mass(&ctilde, n_bits, n_bits, r) / ((1u64 << n_bits) as f64 * n_v as f64)
    };
    let tol = CONSISTENCY_RTOL * scan_mass.max(bit_route) + 1.0e-15;
    assert!(
        (scan_mass - bit_route).abs() <= tol,
        "bit-stage mass {bit_route:.17e} and scan-stage mass {scan_mass:.17e} disagree; \
         the sampler has an internal defect"
    );

    let mut draw = rng.gen::<f64>() * total_weight;
    let mut s_drawn = weights.len() - 1;
    for (s, &w) in weights.iter().enumerate() {
        if draw < w {
            s_drawn = s;
            break;
        }
        draw -= w;
    }
    Ok(r + ((s_drawn as u64) << n_bits))
}

/// Unnormalized `Pr(y ≡ r (mod 2^b))`: `Σ_{u<2^b} C̃(u·q/2^b)·cos(2πur/2^b)`,
/// real by the symmetry `C̃(δ) = C̃(q − δ)`, clamped at zero. The table holds
/// `C̃` at `δ = u·2^scan_bits`, so bit level `b` strides it by `2^{n_bits−b}`.
fn bit_mass(ctilde: &[f64], b: u32, n_bits: u32, r: u64) -> f64 {
    let terms = 1usize << b;
    let stride = 1usize << (n_bits - b);
    let scale = 2.0 * PI * (r as f64) / (terms as f64);
    let mut sum = 0.0;
    for u in 0..terms {
        sum += ctilde[u * stride] * (scale * u as f64).cos();
    }
    sum.max(0.0)
}

// ===================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::{make_instance, DistributionKind, DistributionSpec};
    use crate::discretizer::{DiscretizationParams, TruncationMode};
    use crate::qsq_oracle::grouped;
    use rand::SeedableRng;

    fn fourier_params(m1: u64, m2: u64, radius: u64) -> DiscretizationParams {
        DiscretizationParams::free(m1, m2, radius, 1, TruncationMode::FourierSampling).unwrap()
    }

    fn small_disc() -> Discretizer {
        let inst = make_instance(1, 0.5, 2, vec![0.5], vec![0.6, 0.4]).unwrap();
        Discretizer::new(&inst, fourier_params(40, 8, 512)).unwrap()
    }

    #[test]
    fn arcs_match_canonical_levels_on_every_slice_point() {
        let disc = small_disc();
        let arcs = LevelArcs::build(&disc);
        let lattice = disc.lattice();
        let big_q = lattice.denominator();
        let nu = lattice.numerator(0) % big_q;
        let r = disc.radius() as i64;
        let mut res = lattice.residue_step(0, -r, lattice.residue(&[0]));
        for _ in -r..r {
            assert_eq!(arcs.level_at(res), disc.level_of_residue(res));
            res += nu;
            if res >= big_q {
                res -= big_q;
            }
        }
    }

    #[test]
    fn full_scan_distribution_matches_grouped_fft() {
        // With the whole outcome space inside the scan window, summing the
        // per-level scan weights reproduces the dense-FFT distribution
        // exactly: an end-to-end check of arcs, runs, and geometric factors.
        let inst = make_instance(1, 0.5, 2, vec![0.5], vec![0.6, 0.4]).unwrap();
        let disc = Discretizer::new(&inst, fourier_params(40, 8, 128)).unwrap();
        let dist = DistributionSpec::new(DistributionKind::Uniform, 1, disc.radius()).unwrap();
        let arcs = LevelArcs::build(&disc);
        let geom = SliceGeometry::new(&disc, &arcs, 0, &[0]).unwrap();
        let q = geom.q as usize;

        let mut probs = vec![0.0f64; q];
        let (levels, counts) = geom.level_counts();
        for (i, &v) in levels.iter().enumerate() {
            if counts[i] == 0 {
                continue;
            }
            let weights = geom.scan_weights(&arcs.arcs_of(v), 0, 0);
            for (y, w) in weights.iter().enumerate() {
                probs[y] += w / (q * q) as f64;
            }
        }

        let config = OracleConfig::default();
        let reference = grouped::slice_distribution(&disc, &dist, 0, &[0], &config).unwrap();
        for y in 0..q {
            assert!(
                (probs[y] - reference[y]).abs() < 1.0e-9,
                "outcome {y}: scan route {} vs FFT route {}",
                probs[y],
                reference[y]
            );
        }
    }

    #[test]
    fn sampled_histogram_matches_grouped_distribution() {
        let disc = small_disc();
        let dist = DistributionSpec::new(DistributionKind::Uniform, 1, disc.radius()).unwrap();
        let arcs = LevelArcs::build(&disc);
        let config = OracleConfig { structured_scan_bits: 3, ..OracleConfig::default() };
        let q = (2 * disc.radius()) as usize;

        let reference =
            grouped::slice_distribution(&disc, &dist, 0, &[0], &OracleConfig::default()).unwrap();
        let n_draws = 800usize;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut hist = vec![0usize; q];
        for _ in 0..n_draws {
            let y = sample_uniform_slice(&disc, 0, &[0], &arcs, &config, &mut rng).unwrap();
            hist[y as usize] += 1;
        }

        // Coarse-bin total-variation distance; 8 bins keep the statistical
        // noise at ~0.06 for 800 draws, so 0.2 flags only gross defects.
        let bins = 8;
        let width = q / bins;
        let mut tv = 0.0;
        for bin in 0..bins {
            let emp: f64 =
                hist[bin * width..(bin + 1) * width].iter().map(|&c| c as f64).sum::<f64>()
                    / n_draws as f64;
            let exact: f64 = reference[bin * width..(bin + 1) * width].iter().sum();
            tv += 0.5 * (emp - exact).abs();
        }
        assert!(tv < 0.2, "coarse-bin TV {tv} too large");
    }

    #[test]
    fn huge_dimension_draws_land_on_measurement_peaks() {
        // q = 2^31: the regime the sampler exists for. The profile has
        // period 8000/1 in x, so outcomes concentrate near multiples of
        // q/8000; a defective sampler would spread them uniformly.
        let inst = make_instance(1, 0.5, 1, vec![0.5], vec![1.0]).unwrap();
        let disc = Discretizer::new(&inst, fourier_params(4000, 8, 1 << 30)).unwrap();
        let arcs = LevelArcs::build(&disc);
        let config = OracleConfig::default();
        let q = 2.0 * (1u64 << 30) as f64;
        let spacing = q / 8000.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..4 {
            let y = sample_uniform_slice(&disc, 0, &[0], &arcs, &config, &mut rng).unwrap();
            let harmonics = y as f64 / spacing;
            let dist = (harmonics - harmonics.round()).abs() * spacing;
            assert!(dist <= 2000.0, "outcome {y} is {dist} away from the nearest peak");
        }
    }

    #[test]
    fn non_power_of_two_dimension_is_rejected() {
        let inst = make_instance(1, 0.5, 1, vec![0.5], vec![1.0]).unwrap();
        let disc = Discretizer::new(&inst, fourier_params(40, 8, 100)).unwrap();
        let arcs = LevelArcs::build(&disc);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = sample_uniform_slice(&disc, 0, &[0], &arcs, &OracleConfig::default(), &mut rng)
            .unwrap_err();
        assert!(matches!(err, OracleError::InfeasibleScale(_)));
    }

    #[test]
    fn geometric_factor_matches_direct_sum() {
        for &(len, y, q) in
            &[(1u64, 0u64, 16u64), (5, 0, 16), (5, 3, 16), (7, 8, 16), (12, 15, 16), (20, 1, 16)]
        {
            let mut direct = Complex64::new(0.0, 0.0);
            for i in 0..len {
                let ang = 2.0 * PI * (i as f64) * (y as f64) / (q as f64);
                direct += Complex64::from_polar(1.0, ang);
            }
            let fast = geometric_factor(len, y, q);
            assert!(
                (fast - direct).norm() < 1.0e-12,
                "len {len} y {y}: {fast} vs {direct}"
            );
        }
    }

    #[test]
    fn intersect_arc_handles_wrapping() {
        // [10, 20) ∩ [15, 25) = [15, 20)
        assert_eq!(intersect_arc(10, 10, 15, 10, 100), vec![(15, 20)]);
        // [10, 20) ∩ ([95, 100) ∪ [0, 12)) = [10, 12)
        assert_eq!(intersect_arc(10, 10, 95, 17, 100), vec![(10, 12)]);
        // [0, 60) against [50, 110) ≡ [50, 100) ∪ [0, 10): two pieces
        assert_eq!(intersect_arc(0, 60, 50, 60, 100), vec![(50, 60), (0, 10)]);
        // Disjoint.
        assert!(intersect_arc(0, 10, 40, 10, 100).is_empty());
    }
}
