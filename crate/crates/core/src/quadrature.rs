//! Graded meshes and quadrature for integrands that blow up at an endpoint.
//!
//! A grid on `[lo, hi]` is the image of a uniform partition of `[0, 1]` under
//! the grading map `ζ ↦ ½(2ζ)^g` on `[0, ½]`, mirrored on `[½, 1]`. With
//! `g > 1` the panels shrink toward the endpoints like `distance^(1/g)`, which
//! turns an endpoint singularity `(t - lo)^(-a)` into a bounded integrand in
//! `ζ` once `g(1 - a) ≥ 1`.
//!
//! Evaluation points are ordinary doubles, so a node closer to `hi` than one
//! ulp collapses onto `hi`. Grid construction rejects such meshes instead of
//! producing an infinite weight evaluation later.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("grid needs N >= 8 half-panels, got {0}")]
    TooFewPanels(usize),
    #[error("grading exponent must be >= 1, got {0}")]
    BadGrading(f64),
    #[error("interval [{lo}, {hi}] is empty or not finite")]
    BadInterval { lo: f64, hi: f64 },
    #[error("grid too fine for double precision near t = {at}")]
    Resolution { at: f64 },
    #[error("integrand is {value} at t = {at}")]
    NonFinite { at: f64, value: f64 },
    #[error("tail of the integrand could not be bounded below {tol:e} (last sample {sample:e} at t = {at})")]
    TailNotCertified { at: f64, sample: f64, tol: f64 },
}

/// Where the panels cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Toward both endpoints (mirrored grading map).
    Both,
    /// Toward `lo` only; `ζ ↦ ζ^g` over the whole interval.
    Lower,
}

/// Per-panel rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// Panel endpoints as nodes, trapezoid weights. Includes `lo` and `hi`.
    Trapezoid,
    /// Image of each panel midpoint, weight equal to the panel width.
    Midpoint,
    /// `k` Gauss-Legendre points per panel in the `ζ` variable.
    Gauss(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub grading: f64,
    pub side: Side,
    pub rule: Rule,
}

/// Grading map from `[0, 1]` onto `[0, 1]` and its derivative.
fn grade(z: f64, g: f64, side: Side) -> (f64, f64) {
    match side {
        Side::Lower => (z.powf(g), g * z.powf(g - 1.0)),
        Side::Both => {
            if z <= 0.5 {
                let u = 2.0 * z;
                (0.5 * u.powf(g), g * u.powf(g - 1.0))
            } else {
                let u = 2.0 * (1.0 - z);
                (1.0 - 0.5 * u.powf(g), g * u.powf(g - 1.0))
            }
        }
    }
}

/// Distance of the graded point from its nearest clustered endpoint, in units
/// of the interval length. Computed without forming `1 - small`.
fn grade_gap(z: f64, g: f64, side: Side) -> (f64, bool) {
    match side {
        Side::Lower => (z.powf(g), false),
        Side::Both => {
            if z <= 0.5 {
                (0.5 * (2.0 * z).powf(g), false)
            } else {
                (0.5 * (2.0 * (1.0 - z)).powf(g), true)
            }
        }
    }
}

fn place(lo: f64, hi: f64, z: f64, g: f64, side: Side) -> f64 {
    let (gap, from_hi) = grade_gap(z, g, side);
    if from_hi {
        hi - (hi - lo) * gap
    } else {
        lo + (hi - lo) * gap
    }
}

/// Builder for graded grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    /// Panels per half interval; the grid has `2n` panels.
    pub n: usize,
    pub g: f64,
    pub side: Side,
    pub rule: Rule,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, n: usize, g: f64) -> Self {
        Self {
            lo,
            hi,
            n,
            g,
            side: Side::Both,
            rule: Rule::Midpoint,
        }
    }

    pub fn side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    pub fn rule(mut self, rule: Rule) -> Self {
        self.rule = rule;
        self
    }

    pub fn build(&self) -> Result<Grid, QuadError> {
        let GridSpec {
            lo,
            hi,
            n,
            g,
            side,
            rule,
        } = *self;
        if n < 8 {
            return Err(QuadError::TooFewPanels(n));
        }
        if !(g >= 1.0) || !g.is_finite() {
            return Err(QuadError::BadGrading(g));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(QuadError::BadInterval { lo, hi });
        }
        let panels = 2 * n;
        let h = 1.0 / panels as f64;
        let len = hi - lo;
        let edge = |k: usize| -> f64 {
            if k == 0 {
                lo
            } else if k == panels {
                hi
            } else {
                place(lo, hi, k as f64 * h, g, side)
            }
        };
        let (nodes, weights) = match rule {
            Rule::Trapezoid => {
                let nodes: Vec<f64> = (0..=panels).map(edge).collect();
                let mut w = vec![0.0; nodes.len()];
                for k in 0..panels {
                    let width = nodes[k + 1] - nodes[k];
                    w[k] += 0.5 * width;
                    w[k + 1] += 0.5 * width;
                }
                (nodes, w)
            }
            Rule::Midpoint => {
                let mut nodes = Vec::with_capacity(panels);
                let mut w = Vec::with_capacity(panels);
                for k in 0..panels {
                    nodes.push(place(lo, hi, (k as f64 + 0.5) * h, g, side));
                    w.push(edge(k + 1) - edge(k));
                }
                (nodes, w)
            }
            Rule::Gauss(q) => {
                let (x, wx) = gauss_legendre(q.max(1));
                let mut nodes = Vec::with_capacity(panels * x.len());
                let mut w = Vec::with_capacity(panels * x.len());
                for k in 0..panels {
                    let a = k as f64 * h;
                    for (xi, wi) in x.iter().zip(&wx) {
                        let z = a + 0.5 * h * (xi + 1.0);
                        let (_, dphi) = grade(z, g, side);
                        nodes.push(place(lo, hi, z, g, side));
                        w.push(0.5 * h * wi * dphi * len);
                    }
                }
                (nodes, w)
            }
        };
        for pair in nodes.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(QuadError::Resolution { at: pair[1] });
            }
        }
        if rule != Rule::Trapezoid {
            if let (Some(&first), Some(&last)) = (nodes.first(), nodes.last()) {
                if first <= lo {
                    return Err(QuadError::Resolution { at: lo });
                }
                if last >= hi {
                    return Err(QuadError::Resolution { at: hi });
                }
            }
        }
        let grid = Grid {
            lo,
            hi,
            nodes,
            weights,
            grading: g,
            side,
            rule,
        };
        if rule == Rule::Trapezoid {
            let total = sum(grid.weights.iter().copied());
            assert!(
                (total - len).abs() <= 1e-12 * len.max(1.0),
                "trapezoid weights sum to {total}, expected {len}"
            );
        }
        Ok(grid)
    }
}

/// Graded grid with `2n` panels: midpoint rule when `open`, trapezoid otherwise.
pub fn graded_grid(lo: f64, hi: f64, n: usize, g: f64, open: bool) -> Result<Grid, QuadError> {
    let rule = if open { Rule::Midpoint } else { Rule::Trapezoid };
    GridSpec::new(lo, hi, n, g).rule(rule).build()
}

/// Graded grid with `k`-point Gauss-Legendre panels in the grading variable.
///
/// When `g` matches the endpoint exponent `a` through `g(1 - a) ∈ ℕ`, the
/// transformed integrand is smooth and the rule converges at order `2k`.
pub fn graded_gauss(lo: f64, hi: f64, n: usize, g: f64, k: usize) -> Result<Grid, QuadError> {
    GridSpec::new(lo, hi, n, g).rule(Rule::Gauss(k)).build()
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_open(&self) -> bool {
        self.rule != Rule::Trapezoid
    }

    /// Weights of the cells `[m_{i-1}, m_i]` between consecutive node
    /// midpoints, with the outer cells closed off at `lo` and `hi`.
    ///
    /// On these weights the second central difference of a Nyström sum
    /// reproduces the integrand at interior nodes, which makes the discrete
    /// operator and the ODE residual consistent.
    pub fn cell_weights(&self) -> Vec<f64> {
        let t = &self.nodes;
        let m = t.len();
        (0..m)
            .map(|i| {
                let left = if i == 0 { self.lo } else { 0.5 * (t[i - 1] + t[i]) };
                let right = if i + 1 == m { self.hi } else { 0.5 * (t[i] + t[i + 1]) };
                right - left
            })
            .collect()
    }
}

/// Neumaier-compensated sum in input order.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// `Σ wᵢ f(tᵢ)` over the grid; a non-finite value aborts with its node.
pub fn integrate(mut f: impl FnMut(f64) -> f64, grid: &Grid) -> Result<f64, QuadError> {
    let mut terms = Vec::with_capacity(grid.len());
    for (&t, &w) in grid.nodes.iter().zip(&grid.weights) {
        let v = f(t);
        if !v.is_finite() {
            return Err(QuadError::NonFinite { at: t, value: v });
        }
        terms.push(w * v);
    }
    Ok(sum(terms))
}

/// Options for [`integrate_tail`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailOptions {
    /// Panels per unit of decay scale on the truncated window.
    pub panels_per_scale: usize,
    pub gauss_points: usize,
    /// Bound required on the discarded tail.
    pub tol: f64,
}

impl Default for TailOptions {
    fn default() -> Self {
        Self {
            panels_per_scale: 4,
            gauss_points: 8,
            tol: 1e-12,
        }
    }
}

/// `∫_lo^∞ f` for an integrand that decays like `exp(-t / decay_scale)`.
///
/// The window `[lo, lo + T]` grows until the envelope bound on the discarded
/// part, `decay_scale · max |f|` over `[T, T + 8·decay_scale]`, drops below
/// `opts.tol` while the samples there are nonincreasing. An integrand that
/// never settles is reported rather than truncated silently.
pub fn integrate_tail(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    decay_scale: f64,
    opts: TailOptions,
) -> Result<f64, QuadError> {
    if !(decay_scale > 0.0 && decay_scale.is_finite() && lo.is_finite()) {
        return Err(QuadError::BadInterval { lo, hi: f64::INFINITY });
    }
    let mut width = decay_scale * (decay_scale.max(1.0) / opts.tol).ln().max(1.0);
    let mut last = (lo, f64::NAN);
    for _ in 0..12 {
        let hi = lo + width;
        let probe: Vec<f64> = (0..=16).map(|k| hi + decay_scale * 0.5 * k as f64).collect();
        let samples: Vec<f64> = probe.iter().map(|&t| f(t).abs()).collect();
        let peak = samples.iter().cloned().fold(0.0f64, f64::max);
        let settled = samples.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        last = (hi, peak);
        if peak.is_finite() && settled && decay_scale * peak < opts.tol {
            let panels = ((width / decay_scale) * opts.panels_per_scale as f64).ceil() as usize;
            let grid = GridSpec::new(lo, hi, (panels / 2).max(8), 1.0)
                .rule(Rule::Gauss(opts.gauss_points))
                .build()?;
            return integrate(f, &grid);
        }
        width *= 2.0;
    }
    Err(QuadError::TailNotCertified {
        at: last.0,
        sample: last.1,
        tol: opts.tol,
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; k];
    let mut w = vec![0.0; k];
    let kf = k as f64;
    for i in 0..k.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(k, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(k, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[k - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[k - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(k: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if k == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = k as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_trapezoid() {
        let g = graded_grid(0.0, 1.0, 8, 1.0, false).unwrap();
        assert_eq!(g.len(), 17);
        for (k, &t) in g.nodes.iter().enumerate() {
            assert_relative_eq!(t, k as f64 / 16.0, epsilon = 1e-15);
        }
        assert_relative_eq!(g.weights[0], 1.0 / 32.0, epsilon = 1e-15);
        assert_relative_eq!(g.weights[5], 1.0 / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn first_open_node_scale() {
        let g = graded_grid(0.0, 1.0, 64, 3.0, true).unwrap();
        // Midpoint ζ = 1/256 maps to ½(1/128)³.
        assert_relative_eq!(g.nodes[0], 0.5 * (1.0f64 / 128.0).powi(3), max_relative = 1e-12);
        assert!(g.nodes[0] > 0.0);
        assert_relative_eq!(1.0 - g.nodes[127], g.nodes[0], max_relative = 1e-6);
    }

    #[test]
    fn gauss_rule_is_exact_on_polynomials() {
        for k in 1..12 {
            let (x, w) = gauss_legendre(k);
            for p in 0..(2 * k) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "k={k} p={p} {q} {exact}");
            }
        }
    }

    #[test]
    fn unit_integrand() {
        let g = graded_grid(0.0, 1.0, 512, 4.0, true).unwrap();
        let v = integrate(|t| t * (1.0 - t) * (1.0 / (t * (1.0 - t))), &g).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_is_reported() {
        let g = graded_grid(0.0, 1.0, 8, 1.0, false).unwrap();
        let err = integrate(|t| 1.0 / t, &g).unwrap_err();
        assert_eq!(
            err,
            QuadError::NonFinite {
                at: 0.0,
                value: f64::INFINITY
            }
        );
    }

    #[test]
    fn invalid_arguments() {
        assert_eq!(graded_grid(0.0, 1.0, 4, 2.0, true), Err(QuadError::TooFewPanels(4)));
        assert_eq!(graded_grid(0.0, 1.0, 8, 0.5, true), Err(QuadError::BadGrading(0.5)));
        assert!(matches!(
            graded_grid(0.0, 1.0, 4096, 8.0, true),
            Err(QuadError::Resolution { .. })
        ));
    }

    #[test]
    fn tails() {
        let o = TailOptions::default();
        assert_relative_eq!(
            integrate_tail(|t| (-t).exp(), 0.0, 1.0, o).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            integrate_tail(|t| (-t).exp(), 2.0, 1.0, o).unwrap(),
            (-2.0f64).exp(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            integrate_tail(|t| t * (-t).exp(), 0.0, 1.0, o).unwrap(),
            1.0,
            epsilon = 1e-11
        );
        assert!(matches!(
            integrate_tail(|t| (1.0 + t).powf(-0.5), 0.0, 1.0, o),
            Err(QuadError::TailNotCertified { .. })
        ));
    }
}
