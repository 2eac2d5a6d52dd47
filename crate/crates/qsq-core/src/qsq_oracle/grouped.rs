//! Grouped-DFT Fourier sampling engine.
//!
//! The measurement outcome distribution on a 1-D slice factors over level
//! sets of `h`: `Pr(y) = (1/(q·G)) Σ_v |Σ_{t: level(t)=v} p(t) ω^{ty}|²`.
//! Because `h` takes at most `2M₂ₘ + 1` distinct levels, the distribution is
//! the sum of that many size-`q` power spectra, each computed with one FFT
//! over a shared scratch buffer. Total work is `O(q · levels · log q)` and
//! memory stays at one complex buffer of length `q`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::concepts::{DistributionKind, DistributionSpec};
use crate::discretizer::Discretizer;

use super::{OracleConfig, OracleError, OracleResult};

/// Exact outcome distribution of the sliced measurement on coordinate `j`,
/// with the remaining coordinates pinned at `others`.
pub(crate) fn slice_distribution(
    disc: &Discretizer,
    dist: &DistributionSpec,
    j: usize,
    others: &[i64],
    config: &OracleConfig,
) -> OracleResult<Vec<f64>> {
    let radius = disc.radius();
    let q = 2 * radius;
    if q > config.grouped_q_cap {
        return Err(OracleError::InfeasibleScale(format!(
            "q = {q} exceeds the grouped-DFT cap {}",
            config.grouped_q_cap
        )));
    }
    let lattice = disc.lattice();
    let mut x0 = others.to_vec();
    x0[j] = 0;
    let base = lattice.residue(&x0);
    let big_q = lattice.denominator();
    let nu = lattice.numerator(j) % big_q;
    let r = radius as i64;

    // Slot-ordered levels and amplitudes: lattice point t ∈ [-R, R-1] lands
    // in DFT slot t mod q, and e^{2πity/q} = e^{2πi(t mod q)y/q} exactly.
    let qu = q as usize;
    let mut levels = vec![0i64; qu];
    let mut res = lattice.residue_step(j, -r, base);
    for t in -r..r {
        let slot = t.rem_euclid(q as i64) as usize;
        levels[slot] = disc.level_of_residue(res);
        res += nu;
        if res >= big_q {
            res -= big_q;
        }
    }
    let uniform = matches!(dist.kind, DistributionKind::Uniform);
    let amps: Vec<f64> = if uniform {
        Vec::new()
    } else {
        let mut a = vec![0.0f64; qu];
        for t in -r..r {
            a[t.rem_euclid(q as i64) as usize] = dist.amplitude(j, t as f64);
        }
        a
    };

    grouped_distribution_from_levels(&levels, if uniform { None } else { Some(&amps) }, config)
}

/// Core grouped-DFT computation over slot-ordered levels and amplitudes
/// (`None` amplitudes mean the all-ones profile).
pub(crate) fn grouped_distribution_from_levels(
    levels: &[i64],
    amps: Option<&[f64]>,
    config: &OracleConfig,
) -> OracleResult<Vec<f64>> {
    let q = levels.len();
    let mut unique: Vec<i64> = levels.to_vec();
    unique.sort_unstable();
    unique.dedup();
    let n_groups = unique.len();
    let work = q as u128 * n_groups as u128;
    if work > config.grouped_work_cap {
        return Err(OracleError::InfeasibleScale(format!(
            "grouped DFT needs q·levels = {work} units (cap {})",
            config.grouped_work_cap
        )));
    }
    let group: Vec<u32> = levels
        .iter()
        .map(|l| unique.binary_search(l).expect("level present") as u32)
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(q);
    let mut buf = vec![Complex64::new(0.0, 0.0); q];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut probs = vec![0.0f64; q];
    let g_norm: f64 = match amps {
        Some(a) => a.iter().map(|x| x * x).sum(),
        None => q as f64,
    };
    for g in 0..n_groups as u32 {
        for slot in 0..q {
            buf[slot] = if group[slot] == g {
                Complex64::new(amps.map_or(1.0, |a| a[slot]), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (p, z) in probs.iter_mut().zip(&buf) {
            *p += z.norm_sqr();
        }
    }
    let scale = 1.0 / (q as f64 * g_norm);
    for p in &mut probs {
        *p *= scale;
    }
    let total: f64 = probs.iter().sum();
    assert!(
        (total - 1.0).abs() < 1e-10,
        "grouped distribution must normalize: Σp = {total}"
    );
    Ok(probs)
}

// =======================================================================
// Tests
// =======================================================================
