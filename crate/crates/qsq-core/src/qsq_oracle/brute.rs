//! Exact reference backend: full enumeration of the truncated box.
//!
//! These routines exist to validate the production engines, so they favor
//! structural independence over speed: expectations enumerate every lattice
//! point, and the naive Fourier distribution evaluates each outcome by
//! direct sine/cosine accumulation with no FFT and no closed forms.

use rustfft::num_complex::Complex64;

use crate::concepts::{ConceptInstance, DistributionKind, DistributionSpec};
use crate::discretizer::{DiscretizationParams, Discretizer};

use super::{OracleError, OracleResult};

/// Exact shift-correlation expectation
/// `⟨O⟩ = (1/M₂ₘ²) · Σ_x W_T(x)·h(x)·h(x+T·e_k) / Norm`,
/// where `h ∈ [-1, 1]` is the value-scale quantized target, `x` ranges over
/// the box `[-R, R-1]^d`, the shifted argument is evaluated without wrapping
/// (`h` is defined on all of ℤ^d),
/// `W_T(x) = ∏_{i≠k} p_i²(x_i) · p_k(x_k)p_k(x_k+T)`, and
/// `Norm = Σ_x ∏_i p_i²(x_i)`. The `1/M₂ₘ²` prefactor is part of the
/// observable's normalization; the verification thresholds are stated on
/// this scale.
///
/// Uniform inputs accumulate in exact integer arithmetic; non-uniform
/// weights accumulate with Kahan compensation, leaving rounding noise many
/// orders below any meaningful tolerance.
pub(crate) fn shift_correlation_exact(
    instance: &ConceptInstance,
    dist: &DistributionSpec,
    params: DiscretizationParams,
    k: usize,
    shift: i64,
    point_cap: u64,
) -> OracleResult<f64> {
    let radius = params.radius()?;
    let d = instance.d;
    let side = 2u128 * radius as u128;
    let total = side.checked_pow(d as u32).ok_or_else(|| {
        OracleError::InfeasibleScale("box size overflows u128".into())
    })?;
    if total > point_cap as u128 {
        return Err(OracleError::InfeasibleScale(format!(
            "brute enumeration needs {total} points (cap {point_cap})"
        )));
    }
    let disc = Discretizer::with_reach(instance, params, shift.unsigned_abs())?;
    let lattice = disc.lattice();
    let big_q = lattice.denominator();
    let m2 = params.m2m();
    let r = radius as i64;

    // Residue offset of the shift T·e_k, applied modularly per point.
    let tshift = {
        let mag = (shift.unsigned_abs() as u128 * lattice.numerator(k)) % big_q;
        if shift >= 0 { mag } else { (big_q - mag) % big_q }
    };
    let add_mod = |a: u128, b: u128| {
        let s = a + b;
        if s >= big_q { s - big_q } else { s }
    };

    let uniform = matches!(dist.kind, DistributionKind::Uniform);

    // Per-coordinate weights over t ∈ [-R, R-1]; index t + R.
    let coord_weight = |i: usize, t: i64| -> f64 {
        if i == k {
            dist.amplitude(i, t as f64) * dist.amplitude(i, (t + shift) as f64)
        } else {
            let p = dist.amplitude(i, t as f64);
            p * p
        }
    };

    // Norm uses the unshifted squared profile on every coordinate.
    let norm: f64 = if uniform {
        (side as f64).powi(d as i32)
    } else {
        (0..d)
            .map(|i| {
                (-r..r)
                    .map(|t| {
                        let p = dist.amplitude(i, t as f64);
                        p * p
                    })
                    .sum::<f64>()
            })
            .product()
    };

    // Odometer over the outer d-1 coordinates; the last coordinate is the
    // inner loop with incremental residue stepping.
    let inner = d - 1;
    let nu_inner = lattice.numerator(inner) % big_q;
    let mut outer = vec![-r; inner];
    let mut int_acc: i128 = 0;
    let mut acc = 0.0f64;
    let mut comp = 0.0f64; // Kahan compensation
    loop {
        let mut x0 = outer.clone();
        x0.push(-r);
        let mut res = lattice.residue(&x0);
        let outer_w: f64 = if uniform {
            1.0
        } else {
            outer.iter().enumerate().map(|(i, &t)| coord_weight(i, t)).product()
        };
        for t in -r..r {
            let l1 = disc.level_of_residue(res);
            let l2 = disc.level_of_residue(add_mod(res, tshift));
            if uniform {
                int_acc += l1 as i128 * l2 as i128;
            } else {
                let term = outer_w * coord_weight(inner, t) * (l1 * l2) as f64;
                let y = term - comp;
                let s = acc + y;
                comp = (s - acc) - y;
                acc = s;
            }
            res = add_mod(res, nu_inner);
        }
        // Advance the outer odometer.
        let mut carry = inner;
        loop {
            if carry == 0 {
                break;
            }
            carry -= 1;
            outer[carry] += 1;
            if outer[carry] < r {
                break;
            }
            outer[carry] = -r;
            if carry == 0 {
                carry = usize::MAX;
                break;
            }
        }
        if inner == 0 || carry == usize::MAX {
            break;
        }
    }
    // The integer accumulation carries levels `l = M₂ₘ·h`, so dividing by
    // M₂ₘ² once recovers value-scale `h·h` and once more applies the
    // observable's `1/M₂ₘ²` prefactor.
    let numerator = if uniform { int_acc as f64 } else { acc };
    let m2sq = (m2 as f64) * (m2 as f64);
    Ok(numerator / (norm * m2sq * m2sq))
}

/// Exact outcome distribution of the sliced Fourier measurement on
/// coordinate `j`, by direct O(q²) summation (no FFT): for each outcome `y`,
/// `Pr(y) = (1/(q·G̃_j)) Σ_v |Σ_{t: level(t)=v} p_j(t)·e^{2πity/q}|²`,
/// where `t` runs over `[-R, R-1]` and the level is taken on the slice with
/// the other coordinates pinned at `others`.
pub(crate) fn fourier_distribution_naive(
    disc: &Discretizer,
    dist: &DistributionSpec,
    j: usize,
    others: &[i64],
    point_cap: u64,
) -> OracleResult<Vec<f64>> {
    let radius = disc.radius();
    let q = 2 * radius;
    let work = (q as u128) * (q as u128);
    if work > point_cap as u128 {
        return Err(OracleError::InfeasibleScale(format!(
            "naive Fourier distribution needs {work} operations (cap {point_cap})"
        )));
    }
    let lattice = disc.lattice();
    let mut x0 = others.to_vec();
    x0[j] = 0;
    let base = lattice.residue(&x0);
    let r = radius as i64;

    // Levels and amplitudes along the slice.
    let mut levels = Vec::with_capacity(q as usize);
    let mut amps = Vec::with_capacity(q as usize);
    for t in -r..r {
        levels.push(disc.level_of_residue(lattice.residue_step(j, t, base)));
        amps.push(dist.amplitude(j, t as f64));
    }

    // Map levels to group indices.
    let mut unique: Vec<i64> = levels.clone();
    unique.sort_unstable();
    unique.dedup();
    let group: Vec<usize> = levels
        .iter()
        .map(|l| unique.binary_search(l).expect("level present"))
        .collect();

    let g_norm: f64 = amps.iter().map(|a| a * a).sum();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut probs = Vec::with_capacity(q as usize);
    for y in 0..q {
        let mut acc = vec![Complex64::new(0.0, 0.0); unique.len()];
        for (idx, t) in (-r..r).enumerate() {
            let (s, c) = (two_pi * (t as f64) * (y as f64) / q as f64).sin_cos();
            acc[group[idx]] += amps[idx] * Complex64::new(c, s);
        }
        let p: f64 = acc.iter().map(|z| z.norm_sqr()).sum();
        probs.push(p / (q as f64 * g_norm));
    }
    Ok(probs)
}

// =======================================================================
// Tests
// =======================================================================
