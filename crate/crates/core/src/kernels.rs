//! Green's functions of the boundary-condition families, their t-derivatives
//! and the closed-form bound constants μ, ν.
//!
//! Every kernel here is affine in `t` on each side of the diagonal `t = s`
//! and (for the multi-point kernels) of the lines `s = η`, `s = ξ`. Branches
//! are selected with `≤` comparisons in a fixed order; adjacent branches agree
//! on shared edges, so the choice only matters for the derivative at a corner.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("{family}: invariant `{invariant}` violated ({detail})")]
    Invariant {
        family: &'static str,
        invariant: &'static str,
        detail: String,
    },
    #[error("point ({t}, {s}) lies outside the kernel domain [{lo}, {hi}]²")]
    OutOfDomain { t: f64, s: f64, lo: f64, hi: f64 },
    #[error("t = s = {0} is a corner of the kernel; use a one-sided derivative")]
    Corner(f64),
    #[error("no published bound constants for {0}")]
    Unsupported(&'static str),
}

/// Boundary-condition family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoundarySpec {
    /// `x(0) = 0, x(1) = αx(η)` for both components.
    ThreePoint { alpha: f64, eta: f64 },
    /// The three-point problem moved to `[1/n, 1 - 1/n]`.
    ThreePointTruncated { alpha: f64, eta: f64, n: u32 },
    /// `x(0) = 0, x(1) = αy(ξ), y(0) = 0, y(1) = βx(η)`.
    FourPointCoupled { alpha: f64, beta: f64, xi: f64, eta: f64 },
    /// `x(0) = 0, x'(1) = 0`.
    DirichletNeumann,
    /// `aᵢx(0) - bᵢx'(0) = 0, x'(1) = 0`, one pair per component.
    RobinNeumann { a1: f64, b1: f64, a2: f64, b2: f64 },
    /// `a₁y(0) - b₁x'(0) = 0, a₂x(0) - b₂y'(0) = 0, x'(1) = y'(1) = 0`.
    TwoPointCoupledRobin { a1: f64, b1: f64, a2: f64, b2: f64 },
    /// `x(0) = x(1) = 0`.
    DirichletDirichlet,
    /// `x(0) = 0, x'(∞) = 0`, solved on `[0, m]` with a Neumann end.
    HalfLineDirichlet,
    /// `aᵢx(0) - bᵢx'(0) = 0, x'(∞) = 0`.
    HalfLineRobin { a1: f64, b1: f64, a2: f64, b2: f64 },
}

/// Which equation of the pair a kernel belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    First,
    Second,
}

/// Closed-form constants with `νs(1-s) ≤ K(t,s) ≤ μs(1-s)`, the lower bound
/// holding for `t` in `nu_window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelBounds {
    pub mu: f64,
    pub nu: f64,
    pub nu_window: (f64, f64),
}

fn invariant(family: &'static str, invariant: &'static str, detail: String) -> KernelError {
    KernelError::Invariant {
        family,
        invariant,
        detail,
    }
}

/// Smallest admissible truncation index: the least integer strictly above
/// `max{1/η, 1/(1-η), (2-α)/(1-αη)}`.
pub fn truncation_n0(alpha: f64, eta: f64) -> u32 {
    let m = (1.0 / eta)
        .max(1.0 / (1.0 - eta))
        .max((2.0 - alpha) / (1.0 - alpha * eta));
    (m.floor() as u32) + 1
}

fn check_unit_open(family: &'static str, name: &'static str, v: f64) -> Result<(), KernelError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invariant(family, name, format!("got {v}")))
    }
}

fn check_robin(family: &'static str, a: f64, b: f64) -> Result<(), KernelError> {
    if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
        Ok(())
    } else {
        Err(invariant(family, "a > 0, b > 0", format!("a = {a}, b = {b}")))
    }
}

impl BoundarySpec {
    pub fn family(&self) -> &'static str {
        match self {
            BoundarySpec::ThreePoint { .. } => "three_point",
            BoundarySpec::ThreePointTruncated { .. } => "three_point_truncated",
            BoundarySpec::FourPointCoupled { .. } => "four_point_coupled",
            BoundarySpec::DirichletNeumann => "dirichlet_neumann",
            BoundarySpec::RobinNeumann { .. } => "robin_neumann",
            BoundarySpec::TwoPointCoupledRobin { .. } => "two_point_coupled_robin",
            BoundarySpec::DirichletDirichlet => "dirichlet_dirichlet",
            BoundarySpec::HalfLineDirichlet => "half_line_dirichlet",
            BoundarySpec::HalfLineRobin { .. } => "half_line_robin",
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let fam = self.family();
        match *self {
            BoundarySpec::ThreePoint { alpha, eta } => {
                check_unit_open(fam, "η ∈ (0,1)", eta)?;
                let ae = alpha * eta;
                if !(ae > 0.0 && ae < 1.0) {
                    return Err(invariant(fam, "0 < αη < 1", format!("αη = {ae}")));
                }
                Ok(())
            }
            BoundarySpec::ThreePointTruncated { alpha, eta, n } => {
                BoundarySpec::ThreePoint { alpha, eta }.validate()?;
                let n0 = truncation_n0(alpha, eta);
                if n < n0 {
                    return Err(invariant(
                        fam,
                        "n ≥ n₀ > max{1/η, 1/(1-η), (2-α)/(1-αη)}",
                        format!("n = {n}, n₀ = {n0}"),
                    ));
                }
                Ok(())
            }
            BoundarySpec::FourPointCoupled { alpha, beta, xi, eta } => {
                check_unit_open(fam, "ξ ∈ (0,1)", xi)?;
                check_unit_open(fam, "η ∈ (0,1)", eta)?;
                if !(alpha > 0.0 && beta > 0.0) {
                    return Err(invariant(fam, "α > 0, β > 0", format!("α = {alpha}, β = {beta}")));
                }
                let p = alpha * beta * xi * eta;
                if !(p > 0.0 && p < 1.0) {
                    return Err(invariant(fam, "0 < αβξη < 1", format!("αβξη = {p}")));
                }
                Ok(())
            }
            BoundarySpec::RobinNeumann { a1, b1, a2, b2 }
            | BoundarySpec::TwoPointCoupledRobin { a1, b1, a2, b2 }
            | BoundarySpec::HalfLineRobin { a1, b1, a2, b2 } => {
                check_robin(fam, a1, b1)?;
                check_robin(fam, a2, b2)
            }
            BoundarySpec::DirichletNeumann | BoundarySpec::DirichletDirichlet | BoundarySpec::HalfLineDirichlet => {
                Ok(())
            }
        }
    }

    /// Kernel acting on a component's own right-hand side.
    pub fn own_kernel(&self, c: Component) -> Kernel {
        match *self {
            BoundarySpec::ThreePoint { alpha, eta } => Kernel::ThreePoint { alpha, eta },
            BoundarySpec::ThreePointTruncated { alpha, eta, n } => Kernel::ThreePointTruncated { alpha, eta, n },
            BoundarySpec::FourPointCoupled { alpha, beta, xi, eta } => match c {
                Component::First => Kernel::FourPointF { alpha, beta, xi, eta },
                Component::Second => Kernel::FourPointF {
                    alpha: beta,
                    beta: alpha,
                    xi: eta,
                    eta: xi,
                },
            },
            BoundarySpec::DirichletNeumann
            | BoundarySpec::HalfLineDirichlet
            | BoundarySpec::TwoPointCoupledRobin { .. } => Kernel::Min,
            BoundarySpec::RobinNeumann { a1, b1, a2, b2 } | BoundarySpec::HalfLineRobin { a1, b1, a2, b2 } => match c {
                Component::First => Kernel::Robin { a: a1, b: b1 },
                Component::Second => Kernel::Robin { a: a2, b: b2 },
            },
            BoundarySpec::DirichletDirichlet => Kernel::DirichletDirichlet,
        }
    }

    /// Kernel acting on the other component's right-hand side, when the
    /// boundary conditions couple the two equations.
    pub fn cross_kernel(&self, c: Component) -> Option<Kernel> {
        match *self {
            BoundarySpec::FourPointCoupled { alpha, beta, xi, eta } => Some(match c {
                Component::First => Kernel::FourPointG { alpha, beta, xi, eta },
                Component::Second => Kernel::FourPointG {
                    alpha: beta,
                    beta: alpha,
                    xi: eta,
                    eta: xi,
                },
            }),
            BoundarySpec::TwoPointCoupledRobin { a1, b1, a2, b2 } => Some(match c {
                Component::First => Kernel::Constant(b2 / a2),
                Component::Second => Kernel::Constant(b1 / a1),
            }),
            _ => None,
        }
    }

    /// Domain of the kernel variables for the problem on `[lo, hi]`.
    pub fn domain(&self) -> (f64, f64) {
        match *self {
            BoundarySpec::ThreePointTruncated { n, .. } => {
                let h = 1.0 / n as f64;
                (h, 1.0 - h)
            }
            _ => (0.0, 1.0),
        }
    }

    pub fn is_half_line(&self) -> bool {
        matches!(
            self,
            BoundarySpec::HalfLineDirichlet | BoundarySpec::HalfLineRobin { .. }
        )
    }

    /// Robin ratio `bᵢ/aᵢ` of a component, zero for Dirichlet ends.
    pub fn robin_ratio(&self, c: Component) -> f64 {
        match *self {
            BoundarySpec::RobinNeumann { a1, b1, a2, b2 }
            | BoundarySpec::TwoPointCoupledRobin { a1, b1, a2, b2 }
            | BoundarySpec::HalfLineRobin { a1, b1, a2, b2 } => match c {
                Component::First => b1 / a1,
                Component::Second => b2 / a2,
            },
            _ => 0.0,
        }
    }
}

/// A single scalar kernel `K(t, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    ThreePoint {
        alpha: f64,
        eta: f64,
    },
    ThreePointTruncated {
        alpha: f64,
        eta: f64,
        n: u32,
    },
    /// `F_{ξη}`; the mirrored `F_{ηξ}` swaps `(α, ξ)` with `(β, η)`.
    FourPointF {
        alpha: f64,
        beta: f64,
        xi: f64,
        eta: f64,
    },
    /// `G_{αβξη}`; the mirrored `G_{βαηξ}` swaps `(α, ξ)` with `(β, η)`.
    FourPointG {
        alpha: f64,
        beta: f64,
        xi: f64,
        eta: f64,
    },
    /// `min(t, s)`.
    Min,
    /// `(b + a·min(t, s))/a`.
    Robin {
        a: f64,
        b: f64,
    },
    /// `s(1-t)` for `s ≤ t`, `t(1-s)` otherwise.
    DirichletDirichlet,
    /// Constant kernel, used for boundary couplings.
    Constant(f64),
}

/// Which side of a kernel corner a one-sided derivative is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Kernel {
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        match *self {
            Kernel::ThreePoint { alpha, eta } => {
                let d = 1.0 - alpha * eta;
                let base = t * (1.0 - s) / d;
                if s <= t && s <= eta {
                    base - alpha * t * (eta - s) / d - (t - s)
                } else if t <= s && s <= eta {
                    base - alpha * t * (eta - s) / d
                } else if t <= s {
                    base
                } else {
                    base - (t - s)
                }
            }
            Kernel::ThreePointTruncated { alpha, eta, n } => {
                let h = 1.0 / n as f64;
                let d = 1.0 - 2.0 * h + alpha * h - alpha * eta;
                if s <= t && s <= eta {
                    (t - h) * ((1.0 - h - s) - alpha * (eta - s)) / d - (t - s)
                } else if t <= s && s <= eta {
                    (t - h) * ((1.0 - h - s) - alpha * (eta - s)) / d
                } else if t <= s {
                    (t - h) * (1.0 - h - s) / d
                } else {
                    (t - h) * (1.0 - h - s) / d - (t - s)
                }
            }
            Kernel::FourPointF { alpha, beta, xi, eta } => {
                let d = 1.0 - alpha * beta * xi * eta;
                let base = t * (1.0 - s) / d;
                let shift = alpha * beta * xi * t * (eta - s) / d;
                if s <= t && s <= eta {
                    base - shift - (t - s)
                } else if t <= s && s <= eta {
                    base - shift
                } else if s <= t {
                    base - (t - s)
                } else {
                    base
                }
            }
            Kernel::FourPointG { alpha, beta, xi, eta } => {
                let d = 1.0 - alpha * beta * xi * eta;
                let base = alpha * xi * t * (1.0 - s) / d;
                if s <= xi {
                    base - alpha * t * (xi - s) / d
                } else {
                    base
                }
            }
            Kernel::Min => t.min(s),
            Kernel::Robin { a, b } => (b + a * t.min(s)) / a,
            Kernel::DirichletDirichlet => {
                if s <= t {
                    s * (1.0 - t)
                } else {
                    t * (1.0 - s)
                }
            }
            Kernel::Constant(c) => c,
        }
    }

    /// Slope in `t` on the branch where `s < t` (`Side::Left` of the
    /// diagonal, seen from `t`) or `s > t` (`Side::Right`).
    pub fn dt_side(&self, t: f64, s: f64, side: Side) -> f64 {
        let below = side == Side::Left; // s < t
        match *self {
            Kernel::ThreePoint { alpha, eta } => {
                let d = 1.0 - alpha * eta;
                let mut v = (1.0 - s) / d;
                if s <= eta {
                    v -= alpha * (eta - s) / d;
                }
                if below {
                    v -= 1.0;
                }
                let _ = t;
                v
            }
            Kernel::ThreePointTruncated { alpha, eta, n } => {
                let h = 1.0 / n as f64;
                let d = 1.0 - 2.0 * h + alpha * h - alpha * eta;
                let mut v = if s <= eta {
                    ((1.0 - h - s) - alpha * (eta - s)) / d
                } else {
                    (1.0 - h - s) / d
                };
                if below {
                    v -= 1.0;
                }
                v
            }
            Kernel::FourPointF { alpha, beta, xi, eta } => {
                let d = 1.0 - alpha * beta * xi * eta;
                let mut v = (1.0 - s) / d;
                if s <= eta {
                    v -= alpha * beta * xi * (eta - s) / d;
                }
                if below {
                    v -= 1.0;
                }
                v
            }
            Kernel::FourPointG { .. } => self.eval(1.0, s) - self.eval(0.0, s),
            Kernel::Min | Kernel::Robin { .. } => {
                if below {
                    0.0
                } else {
                    1.0
                }
            }
            Kernel::DirichletDirichlet => {
                if below {
                    -s
                } else {
                    1.0 - s
                }
            }
            Kernel::Constant(_) => 0.0,
        }
    }

    /// True when `∂K/∂t` jumps across `t = s`.
    pub fn has_corner(&self) -> bool {
        !matches!(self, Kernel::FourPointG { .. } | Kernel::Constant(_))
    }

    /// `∂K/∂t` at `(t, s)`; fails at a corner `t = s`.
    pub fn dt(&self, t: f64, s: f64) -> Result<f64, KernelError> {
        if t == s && self.has_corner() {
            return Err(KernelError::Corner(t));
        }
        let side = if s < t { Side::Left } else { Side::Right };
        Ok(self.dt_side(t, s, side))
    }

    /// Average of the one-sided slopes; equals [`Kernel::dt`] off the diagonal.
    pub fn dt_mean(&self, t: f64, s: f64) -> f64 {
        if t == s && self.has_corner() {
            0.5 * (self.dt_side(t, s, Side::Left) + self.dt_side(t, s, Side::Right))
        } else {
            let side = if s < t { Side::Left } else { Side::Right };
            self.dt_side(t, s, side)
        }
    }
}

fn check_params(spec: BoundarySpec) -> Result<(), KernelError> {
    spec.validate()
}

/// `H(t, s)` of the three-point problem on `[0, 1]`.
pub fn three_point(t: f64, s: f64, alpha: f64, eta: f64) -> Result<f64, KernelError> {
    check_params(BoundarySpec::ThreePoint { alpha, eta })?;
    in_domain(t, s, 0.0, 1.0)?;
    Ok(Kernel::ThreePoint { alpha, eta }.eval(t, s))
}

/// `Hₙ(t, s)` of the three-point problem on `[1/n, 1 - 1/n]`.
pub fn three_point_truncated(t: f64, s: f64, alpha: f64, eta: f64, n: u32) -> Result<f64, KernelError> {
    let spec = BoundarySpec::ThreePointTruncated { alpha, eta, n };
    check_params(spec)?;
    let (lo, hi) = spec.domain();
    in_domain(t, s, lo, hi)?;
    Ok(Kernel::ThreePointTruncated { alpha, eta, n }.eval(t, s))
}

pub fn four_point_f(t: f64, s: f64, alpha: f64, beta: f64, xi: f64, eta: f64) -> Result<f64, KernelError> {
    check_params(BoundarySpec::FourPointCoupled { alpha, beta, xi, eta })?;
    in_domain(t, s, 0.0, 1.0)?;
    Ok(Kernel::FourPointF { alpha, beta, xi, eta }.eval(t, s))
}

pub fn four_point_g(t: f64, s: f64, alpha: f64, beta: f64, xi: f64, eta: f64) -> Result<f64, KernelError> {
    check_params(BoundarySpec::FourPointCoupled { alpha, beta, xi, eta })?;
    in_domain(t, s, 0.0, 1.0)?;
    Ok(Kernel::FourPointG { alpha, beta, xi, eta }.eval(t, s))
}

/// Symmetric two-point kernel of the first component.
pub fn two_point(t: f64, s: f64, spec: &BoundarySpec) -> Result<f64, KernelError> {
    spec.validate()?;
    match spec {
        BoundarySpec::ThreePoint { .. }
        | BoundarySpec::ThreePointTruncated { .. }
        | BoundarySpec::FourPointCoupled { .. } => Err(KernelError::Unsupported(spec.family())),
        _ => Ok(spec.own_kernel(Component::First).eval(t, s)),
    }
}

/// `∂K/∂t` for the first component's own kernel.
pub fn kernel_dt(t: f64, s: f64, spec: &BoundarySpec) -> Result<f64, KernelError> {
    spec.validate()?;
    spec.own_kernel(Component::First).dt(t, s)
}

fn in_domain(t: f64, s: f64, lo: f64, hi: f64) -> Result<(), KernelError> {
    let tol = 1e-15;
    if t < lo - tol || t > hi + tol || s < lo - tol || s > hi + tol {
        Err(KernelError::OutOfDomain { t, s, lo, hi })
    } else {
        Ok(())
    }
}

pub fn bounds(spec: &BoundarySpec) -> Result<KernelBounds, KernelError> {
    spec.validate()?;
    match *spec {
        BoundarySpec::ThreePoint { alpha, eta } => {
            let d = 1.0 - alpha * eta;
            Ok(KernelBounds {
                mu: alpha.max(1.0) / d,
                nu: alpha.min(1.0) * eta.min(1.0 - eta) / d,
                nu_window: (eta, 1.0),
            })
        }
        BoundarySpec::ThreePointTruncated { alpha, eta, n } => {
            let h = 1.0 / n as f64;
            let d = 1.0 - 2.0 * h + alpha * h - alpha * eta;
            Ok(KernelBounds {
                mu: alpha.max(1.0) / d,
                nu: alpha.min(1.0) * (eta - h).min(1.0 - h - eta) / d,
                nu_window: (eta, 1.0 - h),
            })
        }
        BoundarySpec::FourPointCoupled { alpha, beta, xi, eta } => {
            let d = 1.0 - alpha * beta * xi * eta;
            let top = [1.0, alpha, beta, alpha * beta * xi, alpha * beta * eta]
                .into_iter()
                .fold(f64::MIN, f64::max);
            let low = [1.0, alpha * xi, alpha * beta * xi, beta * eta, alpha * beta * eta]
                .into_iter()
                .fold(f64::MAX, f64::min);
            let gap = [xi, eta, 1.0 - xi, 1.0 - eta].into_iter().fold(f64::MAX, f64::min);
            Ok(KernelBounds {
                mu: top / d,
                nu: low * gap / d,
                nu_window: (xi.max(eta), 1.0),
            })
        }
        _ => Err(KernelError::Unsupported(spec.family())),
    }
}

/// One inequality of a bound suite evaluated on a sample grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    /// Smallest `rhs - lhs` (upper bounds) or `lhs - rhs` (lower bounds).
    pub worst_slack: f64,
    pub at: (f64, f64),
    pub samples: usize,
}

impl BoundCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.worst_slack >= -slack
    }
}

struct Suite {
    checks: Vec<BoundCheck>,
}

impl Suite {
    fn record(&mut self, name: &str, slack: f64, at: (f64, f64)) {
        if let Some(c) = self.checks.iter_mut().find(|c| c.name == name) {
            c.samples += 1;
            if slack < c.worst_slack {
                c.worst_slack = slack;
                c.at = at;
            }
        } else {
            self.checks.push(BoundCheck {
                name: name.to_string(),
                worst_slack: slack,
                at,
                samples: 1,
            });
        }
    }
}

/// Evaluates every published kernel inequality for `spec` on a uniform
/// `k × k` sample of its domain.
pub fn bound_suite(spec: &BoundarySpec, k: usize) -> Result<Vec<BoundCheck>, KernelError> {
    spec.validate()?;
    let (lo, hi) = spec.domain();
    let pts: Vec<f64> = (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect();
    let mut suite = Suite { checks: Vec::new() };
    match *spec {
        BoundarySpec::ThreePoint { alpha, eta } => {
            let b = bounds(spec)?;
            let h = Kernel::ThreePoint { alpha, eta };
            for &t in &pts {
                for &s in &pts {
                    let v = h.eval(t, s);
                    let w = s * (1.0 - s);
                    suite.record("H >= 0", v, (t, s));
                    suite.record("H <= mu s(1-s)", b.mu * w - v, (t, s));
                    if t >= eta {
                        suite.record("H >= nu s(1-s) on [eta,1]", v - b.nu * w, (t, s));
                    }
                    suite.record("H >= nu t(1-t) s(1-s)", v - b.nu * t * (1.0 - t) * w, (t, s));
                }
            }
        }
        BoundarySpec::ThreePointTruncated { alpha, eta, n } => {
            let b = bounds(spec)?;
            let hk = Kernel::ThreePointTruncated { alpha, eta, n };
            let h = 1.0 / n as f64;
            for &t in &pts {
                for &s in &pts {
                    let v = hk.eval(t, s);
                    let w = (s - h) * (1.0 - h - s);
                    suite.record("Hn >= 0", v, (t, s));
                    suite.record("Hn <= mu_n (s-1/n)(1-1/n-s)", b.mu * w - v, (t, s));
                    if t >= eta {
                        suite.record("Hn >= nu_n (s-1/n)(1-1/n-s) on [eta,1-1/n]", v - b.nu * w, (t, s));
                    }
                }
            }
        }
        BoundarySpec::FourPointCoupled { alpha, beta, xi, eta } => {
            let d = 1.0 - alpha * beta * xi * eta;
            let b = bounds(spec)?;
            let f = spec.own_kernel(Component::First);
            let f_m = spec.own_kernel(Component::Second);
            let g = spec.cross_kernel(Component::First).expect("coupled");
            let g_m = spec.cross_kernel(Component::Second).expect("coupled");
            let top = b.nu_window.0;
            for &t in &pts {
                for &s in &pts {
                    let w = s * (1.0 - s);
                    let (fv, fmv, gv, gmv) = (f.eval(t, s), f_m.eval(t, s), g.eval(t, s), g_m.eval(t, s));
                    for (name, v) in [("F >= 0", fv), ("F' >= 0", fmv), ("G >= 0", gv), ("G' >= 0", gmv)] {
                        suite.record(name, v, (t, s));
                    }
                    // Upper bounds of each kernel and their common μ.
                    suite.record(
                        "F <= max{1,abxi}/D s(1-s)",
                        (alpha * beta * xi).max(1.0) / d * w - fv,
                        (t, s),
                    );
                    suite.record("G <= a/D s(1-s)", alpha / d * w - gv, (t, s));
                    suite.record(
                        "F' <= max{1,abeta}/D s(1-s)",
                        (alpha * beta * eta).max(1.0) / d * w - fmv,
                        (t, s),
                    );
                    suite.record("G' <= b/D s(1-s)", beta / d * w - gmv, (t, s));
                    for (name, v) in [
                        ("F <= mu s(1-s)", fv),
                        ("F' <= mu s(1-s)", fmv),
                        ("G <= mu s(1-s)", gv),
                        ("G' <= mu s(1-s)", gmv),
                    ] {
                        suite.record(name, b.mu * w - v, (t, s));
                    }
                    // Lower bounds on their individual windows.
                    if t >= eta {
                        let c = (alpha * beta * xi).min(1.0) * eta.min(1.0 - eta) / d;
                        suite.record("F >= min{1,abxi}min{eta,1-eta}/D s(1-s) on [eta,1]", fv - c * w, (t, s));
                        let c = beta * eta * eta.min(1.0 - eta) / d;
                        suite.record("G' >= b eta min{eta,1-eta}/D s(1-s) on [eta,1]", gmv - c * w, (t, s));
                    }
                    if t >= xi {
                        let c = alpha * xi * xi.min(1.0 - xi) / d;
                        suite.record("G >= a xi min{xi,1-xi}/D s(1-s) on [xi,1]", gv - c * w, (t, s));
                        let c = (alpha * beta * eta).min(1.0) * xi.min(1.0 - xi) / d;
                        suite.record("F' >= min{1,abeta}min{xi,1-xi}/D s(1-s) on [xi,1]", fmv - c * w, (t, s));
                    }
                    if t >= top {
                        for (name, v) in [
                            ("F >= nu s(1-s) on [max(xi,eta),1]", fv),
                            ("F' >= nu s(1-s) on [max(xi,eta),1]", fmv),
                            ("G >= nu s(1-s) on [max(xi,eta),1]", gv),
                            ("G' >= nu s(1-s) on [max(xi,eta),1]", gmv),
                        ] {
                            suite.record(name, v - b.nu * w, (t, s));
                        }
                    }
                }
            }
        }
        _ => {
            let kern = spec.own_kernel(Component::First);
            for &t in &pts {
                for &s in &pts {
                    suite.record("K >= 0", kern.eval(t, s), (t, s));
                    suite.record("K(t,s) == K(s,t)", -(kern.eval(t, s) - kern.eval(s, t)).abs(), (t, s));
                }
            }
        }
    }
    Ok(suite.checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TP: BoundarySpec = BoundarySpec::ThreePoint {
        alpha: 2.0,
        eta: 1.0 / 3.0,
    };

    #[test]
    fn three_point_values() {
        let eta = 1.0 / 3.0;
        assert_relative_eq!(three_point(0.5, 0.5, 2.0, eta).unwrap(), 0.75, epsilon = 1e-15);
        assert_relative_eq!(three_point(0.5, 0.2, 2.0, eta).unwrap(), 0.5, epsilon = 1e-15);
        for s in [0.0, 0.1, 0.5, 1.0] {
            assert_eq!(three_point(0.0, s, 2.0, eta).unwrap(), 0.0);
        }
        assert!(matches!(
            three_point(0.5, 0.5, 2.0, 0.6),
            Err(KernelError::Invariant {
                invariant: "0 < αη < 1",
                ..
            })
        ));
    }

    #[test]
    fn truncated_values() {
        let eta = 1.0 / 3.0;
        assert_eq!(truncation_n0(2.0, eta), 4);
        assert_relative_eq!(
            three_point_truncated(0.5, 0.5, 2.0, eta, 6).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        for s in [1.0 / 6.0, 0.3, 0.5, 5.0 / 6.0] {
            assert!(three_point_truncated(1.0 / 6.0, s, 2.0, eta, 6).unwrap().abs() < 1e-15);
        }
        assert!(matches!(
            three_point_truncated(0.1, 0.5, 2.0, eta, 6),
            Err(KernelError::OutOfDomain { .. })
        ));
        assert!(matches!(
            three_point_truncated(0.5, 0.5, 2.0, eta, 3),
            Err(KernelError::Invariant { .. })
        ));
    }

    #[test]
    fn four_point_values() {
        let f = |t, s| four_point_f(t, s, 1.0, 1.0, 0.5, 0.5).unwrap();
        let g = |t, s| four_point_g(t, s, 1.0, 1.0, 0.5, 0.5).unwrap();
        assert_relative_eq!(f(0.25, 0.5), 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(f(0.5, 0.25), 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(g(0.5, 0.25), 1.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn two_point_values() {
        let dn = BoundarySpec::DirichletNeumann;
        assert_eq!(two_point(0.3, 0.7, &dn).unwrap(), 0.3);
        let r11 = BoundarySpec::RobinNeumann {
            a1: 1.0,
            b1: 1.0,
            a2: 1.0,
            b2: 1.0,
        };
        assert_eq!(two_point(0.0, 0.4, &r11).unwrap(), 1.0);
        let r12 = BoundarySpec::RobinNeumann {
            a1: 1.0,
            b1: 2.0,
            a2: 1.0,
            b2: 1.0,
        };
        assert_eq!(two_point(0.5, 0.25, &r12).unwrap(), 2.25);
        let dd = BoundarySpec::DirichletDirichlet;
        assert_relative_eq!(two_point(0.25, 0.5, &dd).unwrap(), 0.125);
    }

    #[test]
    fn derivatives() {
        let dn = BoundarySpec::DirichletNeumann;
        assert_eq!(kernel_dt(0.3, 0.7, &dn).unwrap(), 1.0);
        assert_eq!(kernel_dt(0.7, 0.3, &dn).unwrap(), 0.0);
        assert_eq!(kernel_dt(0.4, 0.4, &dn), Err(KernelError::Corner(0.4)));
        assert_relative_eq!(kernel_dt(0.2, 0.5, &TP).unwrap(), 1.5, epsilon = 1e-14);
        let r = BoundarySpec::RobinNeumann {
            a1: 1.0,
            b1: 1.0,
            a2: 1.0,
            b2: 1.0,
        };
        assert_eq!(kernel_dt(0.3, 0.7, &r).unwrap(), 1.0);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let kernels = [
            Kernel::ThreePoint {
                alpha: 2.0,
                eta: 1.0 / 3.0,
            },
            Kernel::ThreePointTruncated {
                alpha: 0.5,
                eta: 0.4,
                n: 12,
            },
            Kernel::FourPointF {
                alpha: 0.5,
                beta: 3.0,
                xi: 0.25,
                eta: 0.5,
            },
            Kernel::FourPointG {
                alpha: 0.5,
                beta: 3.0,
                xi: 0.25,
                eta: 0.5,
            },
            Kernel::Robin { a: 2.0, b: 0.5 },
            Kernel::DirichletDirichlet,
        ];
        for k in kernels {
            for &(t, s) in &[(0.3, 0.6), (0.7, 0.2), (0.55, 0.45), (0.2, 0.9)] {
                let h = 1e-6;
                let fd = (k.eval(t + h, s) - k.eval(t - h, s)) / (2.0 * h);
                assert!((fd - k.dt(t, s).unwrap()).abs() < 1e-7, "{k:?} at ({t},{s})");
            }
        }
    }

    #[test]
    fn branch_edges_agree() {
        // Evaluate just across s = t, s = η and s = ξ; continuity makes the
        // branch choice immaterial for values.
        let kernels = [
            (
                Kernel::ThreePoint {
                    alpha: 2.0,
                    eta: 1.0 / 3.0,
                },
                vec![1.0 / 3.0],
            ),
            (
                Kernel::ThreePointTruncated {
                    alpha: 2.0,
                    eta: 1.0 / 3.0,
                    n: 8,
                },
                vec![1.0 / 3.0],
            ),
            (
                Kernel::FourPointF {
                    alpha: 0.5,
                    beta: 3.0,
                    xi: 0.25,
                    eta: 0.5,
                },
                vec![0.5],
            ),
            (
                Kernel::FourPointG {
                    alpha: 0.5,
                    beta: 3.0,
                    xi: 0.25,
                    eta: 0.5,
                },
                vec![0.25],
            ),
        ];
        let e = 1e-12;
        for (k, edges) in kernels {
            for t in [0.2, 0.4, 0.6, 0.8] {
                assert!((k.eval(t, t - e) - k.eval(t, t + e)).abs() < 1e-10);
                assert!((k.eval(t, t) - k.eval(t, t + e)).abs() < 1e-10);
                for &s in &edges {
                    assert!((k.eval(t, s - e) - k.eval(t, s + e)).abs() < 1e-10);
                    assert!((k.eval(t, s) - k.eval(t, s - e)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn bound_constants() {
        let b = bounds(&TP).unwrap();
        assert_relative_eq!(b.mu, 6.0, epsilon = 1e-14);
        assert_relative_eq!(b.nu, 1.0, epsilon = 1e-14);
        assert_relative_eq!(b.nu_window.0, 1.0 / 3.0);
        let fp = BoundarySpec::FourPointCoupled {
            alpha: 1.0,
            beta: 1.0,
            xi: 0.5,
            eta: 0.5,
        };
        let b = bounds(&fp).unwrap();
        assert_relative_eq!(b.mu, 4.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(b.nu, 1.0 / 3.0, epsilon = 1e-14);
        assert_eq!(
            bounds(&BoundarySpec::DirichletDirichlet),
            Err(KernelError::Unsupported("dirichlet_dirichlet"))
        );
    }

    #[test]
    fn truncated_kernel_reduces_to_full_kernel() {
        // Hₙ → H as n → ∞ on interior points.
        let h = Kernel::ThreePoint {
            alpha: 2.0,
            eta: 1.0 / 3.0,
        };
        let hn = Kernel::ThreePointTruncated {
            alpha: 2.0,
            eta: 1.0 / 3.0,
            n: 1_000_000,
        };
        for &(t, s) in &[(0.3, 0.6), (0.7, 0.2), (0.5, 0.5)] {
            assert!((h.eval(t, s) - hn.eval(t, s)).abs() < 1e-5);
        }
    }
}
