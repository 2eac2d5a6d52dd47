//! Shared numerical utilities: Gauss–Legendre quadrature with adaptive
//! panel refinement.
//!
//! The integrands in this crate (truncated amplitude profiles multiplied by
//! trigonometric factors) are smooth but can oscillate many times over the
//! integration window, so the driver pre-splits the window proportionally to
//! an oscillation-count hint and then refines panels whose two-rule error
//! estimate is above tolerance.  Nodes and weights are computed at run time
//! by Newton iteration on the Legendre recurrence, which keeps the module
//! free of hard-coded coefficient tables and exact to machine precision.

/// Gauss–Legendre rule of order `n` on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub(crate) struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on P_n.
    pub(crate) fn new(n: usize) -> Self {
        assert!(n >= 2, "Gauss-Legendre rule needs at least two nodes");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for k in 0..m {
            // Tricomi initial guess for the k-th positive root.
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
            let (_, d) = legendre_with_derivative(n, 0.0);
            weights[n / 2] = 2.0 / (d * d);
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrates `f` over [a, b] with this rule.
    pub(crate) fn integrate<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// Evaluates (P_n(x), P_n'(x)) via the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0_f64;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1)
    let d = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Failure from the adaptive integrator: the panel budget was exhausted
/// before the error estimate dropped below tolerance.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct QuadratureBudgetExhausted {
    pub estimate: f64,
    pub error: f64,
    pub panels: usize,
}

/// Adaptive integration of `f` over [a, b].
///
/// `oscillations` is a hint for how many full periods the integrand sweeps
/// over the window; the window is pre-split into roughly two panels per
/// period before refinement starts.  Panels are bisected until the
/// coarse/fine Gauss-Legendre disagreement is below
/// `rel_tol * |integral| + abs_floor`, or until `max_panels` is reached.
pub(crate) fn integrate_adaptive<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    oscillations: f64,
    rel_tol: f64,
    abs_floor: f64,
    max_panels: usize,
) -> Result<f64, QuadratureBudgetExhausted> {
    assert!(b > a, "integration window must be nonempty");
    let coarse = GaussLegendre::new(12);
    let fine = GaussLegendre::new(24);
    let initial = (2.0 * oscillations.abs()).ceil().max(4.0) as usize;
    let initial = initial.min(max_panels.max(4));

    struct Panel {
        a: f64,
        b: f64,
        value: f64,
        err: f64,
    }
    let eval = |f: &mut F, lo: f64, hi: f64| -> (f64, f64) {
        let c = coarse.integrate(f, lo, hi);
        let v = fine.integrate(f, lo, hi);
        (v, (v - c).abs())
    };

    let mut panels: Vec<Panel> = Vec::with_capacity(initial * 2);
    let step = (b - a) / initial as f64;
    for i in 0..initial {
        let lo = a + step * i as f64;
        let hi = if i + 1 == initial { b } else { a + step * (i + 1) as f64 };
        let (value, err) = eval(f, lo, hi);
        panels.push(Panel { a: lo, b: hi, value, err });
    }

    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.err).sum();
        let tol = rel_tol * total.abs() + abs_floor;
        // When the integrand cancels heavily, `total` can be orders of
        // magnitude below the unsigned mass and the error estimate bottoms
        // out at rounding noise on that larger scale; further bisection
        // cannot improve it, so accept once that floor is reached.
        let unsigned: f64 = panels.iter().map(|p| p.value.abs()).sum();
        if err <= tol || err <= 4.0e-15 * unsigned {
            return Ok(total);
        }
        if panels.len() >= max_panels {
            return Err(QuadratureBudgetExhausted { estimate: total, error: err, panels: panels.len() });
        }
        // Bisect the worst panel.
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .expect("at least one panel");
        let Panel { a: lo, b: hi, .. } = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = eval(f, lo, mid);
        let (v2, e2) = eval(f, mid, hi);
        panels.push(Panel { a: lo, b: mid, value: v1, err: e1 });
        panels.push(Panel { a: mid, b: hi, value: v2, err: e2 });
    }
}

// =======================================================================
// Tests
// =======================================================================
