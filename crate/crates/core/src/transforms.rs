//! The monotone maps `I(μ) = ∫₀^μ dτ / (u(τ) + v(τ))` and their inverses.
//!
//! `u` and `v` are one-variable expressions; whichever of `t, x, y, d` they
//! mention is bound to `τ`. The cumulative integral is tabulated on
//! log-spaced knots with an 8-point Gauss panel per knot interval and queried
//! by adding one more Gauss panel from the nearest knot below.

use crate::expr::{EvalError, Expr};
use crate::quadrature::{self, gauss_legendre, QuadError};
use serde::Serialize;
use thiserror::Error;

pub const KNOTS: usize = 4096;
pub const FIRST_KNOT: f64 = 1e-12;
const PANEL_POINTS: usize = 8;
const MAX_DOUBLINGS: usize = 1100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("u must be positive, got u({at}) = {value}")]
    NonPositiveU { at: f64, value: f64 },
    #[error("v must be nonnegative, got v({at}) = {value}")]
    NegativeV { at: f64, value: f64 },
    #[error("evaluating {which} at {at}: {source}")]
    Eval {
        which: &'static str,
        at: f64,
        #[source]
        source: EvalError,
    },
    #[error("table cap must exceed {FIRST_KNOT:e}, got {0}")]
    BadCap(f64),
    #[error("transform argument must be nonnegative, got {0}")]
    Negative(f64),
    #[error("value {w} is beyond the reachable range (I({z:e}) = {reached})")]
    Unreachable { w: f64, z: f64, reached: f64 },
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// Tabulated `I` for a pair `(u, v)`.
#[derive(Debug, Clone)]
pub struct Transform {
    u: Expr,
    v: Expr,
    mu_max: f64,
    knots: Vec<f64>,
    cum: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
}

fn integrand(u: &Expr, v: &Expr, tau: f64) -> Result<f64, TransformError> {
    let uv = u.eval1(tau).map_err(|source| TransformError::Eval {
        which: "u",
        at: tau,
        source,
    })?;
    if uv <= 0.0 {
        return Err(TransformError::NonPositiveU { at: tau, value: uv });
    }
    let vv = v.eval1(tau).map_err(|source| TransformError::Eval {
        which: "v",
        at: tau,
        source,
    })?;
    if vv < 0.0 {
        return Err(TransformError::NegativeV { at: tau, value: vv });
    }
    Ok(1.0 / (uv + vv))
}

impl Transform {
    pub fn build(u: Expr, v: Expr, mu_max: f64) -> Result<Transform, TransformError> {
        if !(mu_max > FIRST_KNOT && mu_max.is_finite()) {
            return Err(TransformError::BadCap(mu_max));
        }
        let gl = gauss_legendre(PANEL_POINTS);
        let ratio = (mu_max / FIRST_KNOT).ln() / (KNOTS - 1) as f64;
        let mut knots = Vec::with_capacity(KNOTS + 1);
        knots.push(0.0);
        for k in 0..KNOTS {
            knots.push(FIRST_KNOT * (ratio * k as f64).exp());
        }
        knots[KNOTS] = mu_max;

        // The head [0, FIRST_KNOT] is graded toward 0, where u may blow up.
        let head_grid = quadrature::graded_gauss(0.0, FIRST_KNOT, 8, 4.0, PANEL_POINTS)?;
        let mut err = None;
        let head = quadrature::integrate(
            |tau| match integrand(&u, &v, tau) {
                Ok(val) => val,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            &head_grid,
        )?;
        if let Some(e) = err {
            return Err(e);
        }

        let mut t = Transform {
            u,
            v,
            mu_max,
            knots,
            cum: Vec::with_capacity(KNOTS + 1),
            gl,
        };
        t.cum.push(0.0);
        t.cum.push(head);
        // Running Neumaier sum of the panel integrals.
        let (mut s, mut c) = (head, 0.0);
        for k in 1..KNOTS {
            let piece = t.panel(t.knots[k], t.knots[k + 1])?;
            let next = s + piece;
            c += if s.abs() >= piece.abs() {
                (s - next) + piece
            } else {
                (piece - next) + s
            };
            s = next;
            t.cum.push(s + c);
        }
        Ok(t)
    }

    pub fn mu_max(&self) -> f64 {
        self.mu_max
    }

    pub fn u(&self) -> &Expr {
        &self.u
    }

    pub fn v(&self) -> &Expr {
        &self.v
    }

    /// `u(τ) + v(τ)`.
    pub fn denominator(&self, tau: f64) -> Result<f64, TransformError> {
        integrand(&self.u, &self.v, tau).map(|r| 1.0 / r)
    }

    fn panel(&self, a: f64, b: f64) -> Result<f64, TransformError> {
        let (xs, ws) = &self.gl;
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in xs.iter().zip(ws) {
            acc += w * integrand(&self.u, &self.v, mid + half * x)?;
        }
        Ok(acc * half)
    }

    /// `I(z)`. Arguments past the table cap are integrated on the fly over
    /// doubling panels.
    pub fn apply(&self, z: f64) -> Result<f64, TransformError> {
        if z < 0.0 || z.is_nan() {
            return Err(TransformError::Negative(z));
        }
        if z == 0.0 {
            return Ok(0.0);
        }
        if z <= self.mu_max {
            let k = self.knots.partition_point(|&kn| kn <= z) - 1;
            if self.knots[k] == z {
                return Ok(self.cum[k]);
            }
            if k == 0 {
                // Inside the head: integrate directly, graded toward 0.
                let grid = quadrature::graded_gauss(0.0, z, 8, 4.0, PANEL_POINTS)?;
                let mut err = None;
                let val = quadrature::integrate(
                    |tau| match integrand(&self.u, &self.v, tau) {
                        Ok(val) => val,
                        Err(e) => {
                            err.get_or_insert(e);
                            0.0
                        }
                    },
                    &grid,
                )?;
                return match err {
                    Some(e) => Err(e),
                    None => Ok(val),
                };
            }
            return Ok(self.cum[k] + self.panel(self.knots[k], z)?);
        }
        let mut acc = self.cum[KNOTS];
        let mut a = self.mu_max;
        while a < z {
            let b = (2.0 * a).min(z);
            acc += self.panel(a, b)?;
            a = b;
        }
        Ok(acc)
    }

    /// `I⁻¹(w)` by bisection. The bracket comes from the table, or from
    /// doubling past the cap when `w` exceeds the tabulated range.
    pub fn invert(&self, w: f64) -> Result<f64, TransformError> {
        if w < 0.0 || w.is_nan() {
            return Err(TransformError::Negative(w));
        }
        if w == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi);
        if w <= self.cum[KNOTS] {
            let k = self.cum.partition_point(|&c| c < w);
            hi = self.knots[k];
            lo = self.knots[k.saturating_sub(1)];
        } else {
            lo = self.mu_max;
            let mut i_lo = self.cum[KNOTS];
            hi = 2.0 * lo;
            let mut doublings = 0;
            loop {
                let reached = match self.apply(hi) {
                    Ok(r) => r,
                    Err(TransformError::Eval { .. }) => {
                        return Err(TransformError::Unreachable {
                            w,
                            z: lo,
                            reached: i_lo,
                        })
                    }
                    Err(e) => return Err(e),
                };
                if reached >= w {
                    break;
                }
                doublings += 1;
                if doublings > MAX_DOUBLINGS || !hi.is_finite() {
                    return Err(TransformError::Unreachable { w, z: hi, reached });
                }
                lo = hi;
                i_lo = reached;
                hi *= 2.0;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.apply(mid)? < w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (flo, fhi) = (self.apply(lo)?, self.apply(hi)?);
        Ok(if (w - flo).abs() <= (fhi - w).abs() { lo } else { hi })
    }
}

/// Largest relative gap between a transform and a closed form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormReport {
    pub max_rel_dev: f64,
    pub at: f64,
    pub samples: usize,
}

/// Compares `I` with `reference` at `samples` log-spaced points of
/// `[1e-8·μ_max, μ_max]`.
pub fn check_closed_form(t: &Transform, reference: &Expr, samples: usize) -> Result<ClosedFormReport, TransformError> {
    let hi = t.mu_max;
    let lo = 1e-8 * hi;
    let n = samples.max(2);
    let mut report = ClosedFormReport {
        max_rel_dev: 0.0,
        at: lo,
        samples: n,
    };
    for k in 0..n {
        let z = lo * (hi / lo).powf(k as f64 / (n - 1) as f64);
        let got = t.apply(z)?;
        let want = reference.eval1(z).map_err(|source| TransformError::Eval {
            which: "reference",
            at: z,
            source,
        })?;
        let dev = (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
        if dev > report.max_rel_dev {
            report.max_rel_dev = dev;
            report.at = z;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn power(beta: f64, cap: f64) -> Transform {
        Transform::build(parse(&format!("t^(-{beta})")).unwrap(), Expr::Const(0.0), cap).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let t = power(0.5, 10.0);
        assert!((t.apply(1.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(t.apply(0.0).unwrap(), 0.0);
        let t1 = power(1.0, 10.0);
        assert!((t1.apply(2.0).unwrap() - 2.0).abs() < 1e-12);
        let t3 = power(0.3, 10.0);
        let want = 2f64.powf(1.3) / 1.3;
        assert!((t3.apply(2.0).unwrap() - want).abs() < 1e-9 * want);
    }

    #[test]
    fn inverse_values() {
        let t = power(0.5, 10.0);
        assert!((t.invert(2.0 / 3.0).unwrap() - 1.0).abs() < 1e-10);
        assert!((t.invert(1.0).unwrap() - 1.5f64.powf(2.0 / 3.0)).abs() < 1e-10);
        assert_eq!(t.invert(0.0).unwrap(), 0.0);
        // Beyond the tabulated range.
        let w = 1000.0;
        let z = t.invert(w).unwrap();
        assert!((t.apply(z).unwrap() - w).abs() <= 1e-9 * w);
    }

    #[test]
    fn identity_transform() {
        let t = Transform::build(Expr::Const(1.0), Expr::Const(0.0), 5.0).unwrap();
        let r = check_closed_form(&t, &parse("t").unwrap(), 50).unwrap();
        assert!(r.max_rel_dev < 1e-12, "{r:?}");
    }

    #[test]
    fn bounded_transform_reports_unreachable() {
        // ∫₀^∞ dτ/(1+τ²) = π/2.
        let t = Transform::build(Expr::Const(1.0), parse("t^2").unwrap(), 10.0).unwrap();
        assert!((t.invert(1.0).unwrap() - 1f64.tan()).abs() < 1e-9);
        assert!(matches!(t.invert(2.0), Err(TransformError::Unreachable { .. })));
    }

    #[test]
    fn invalid_pairs() {
        let bad = Transform::build(parse("t - 1").unwrap(), Expr::Const(0.0), 2.0);
        assert!(matches!(bad, Err(TransformError::NonPositiveU { .. })));
        let bad = Transform::build(Expr::Const(1.0), Expr::Const(-1.0), 2.0);
        assert!(matches!(bad, Err(TransformError::NegativeV { .. })));
        let t = power(0.5, 1.0);
        assert_eq!(t.apply(-1.0), Err(TransformError::Negative(-1.0)));
    }
}
