//! Numerical audit of the hypothesis families attached to the existence
//! theorems.
//!
//! A hypothesis is a label plus a list of [`Check`]s. Each check samples its
//! inequality on fixed grids and returns a tri-state verdict; the report for
//! the label is the conjunction. Limits and suprema over unbounded ranges are
//! read off log grids with a trend flag, never claimed as exact.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Env, EvalError, Expr};
use crate::kernels::{self, BoundarySpec};
use crate::quadrature::{self, GridSpec, Rule, TailOptions};
use crate::transforms::{Transform, TransformError};

/// Number of points on the sup-ratio grid `c ∈ [1e-6, 1e6]`.
pub const SUP_GRID_POINTS: usize = 241;
/// Grading used by the refinement integrals. Stronger grading would put
/// nodes closer to an endpoint than `f64` can resolve next to `1`.
const REFINE_GRADING: f64 = 3.0;
/// Beyond this many doublings the nodes next to an endpoint sit where `t`
/// itself is rounded, and the integral stops improving.
const REFINE_LEVELS: usize = 6;
/// Increments below this relative size are at the rounding floor.
const REFINE_FLOOR: f64 = 1e-7;
/// Ratio of consecutive refinement increments separating convergence from
/// divergence.
const STALL_RATIO: f64 = 0.95;
/// Per-decade change of `log10` below which a ratio counts as flat.
const FLAT_DECADE: f64 = 0.01;
const REL_TOL: f64 = 1e-12;
const TRANSFORM_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("B15 is not a hypothesis label; the B family skips from B14 to B16")]
    Gap,
    #[error("unknown hypothesis label `{0}`")]
    Unknown(String),
}

/// A hypothesis label: `A1`–`A11`, `B1`–`B14`, `B16`–`B25` or `C1`–`C8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Label {
    family: char,
    index: u8,
}

impl Label {
    pub fn family(self) -> char {
        self.family
    }

    pub fn index(self) -> u8 {
        self.index
    }

    /// Every label, in order.
    pub fn all() -> Vec<Label> {
        let mut out = Vec::new();
        for (family, max) in [('A', 11u8), ('B', 25), ('C', 8)] {
            for index in 1..=max {
                if family == 'B' && index == 15 {
                    continue;
                }
                out.push(Label { family, index });
            }
        }
        out
    }
}

impl FromStr for Label {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        let family = chars.next().map(|c| c.to_ascii_uppercase());
        let index: Option<u8> = chars.as_str().parse().ok();
        let (Some(family), Some(index)) = (family, index) else {
            return Err(LabelError::Unknown(s.to_string()));
        };
        if family == 'B' && index == 15 {
            return Err(LabelError::Gap);
        }
        let max = match family {
            'A' => 11,
            'B' => 25,
            'C' => 8,
            _ => 0,
        };
        if index == 0 || index > max {
            return Err(LabelError::Unknown(s.to_string()));
        }
        Ok(Label { family, index })
    }
}

impl TryFrom<String> for Label {
    type Error = LabelError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Label> for String {
    fn from(l: Label) -> String {
        l.to_string()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.family, self.index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

/// A sample point and the value observed there. The meaning of the
/// coordinates is given in the report notes of the check that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub at: Vec<f64>,
    pub value: f64,
}

impl Witness {
    fn new(at: impl Into<Vec<f64>>, value: f64) -> Self {
        Witness { at: at.into(), value }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub label: Label,
    pub holds: Verdict,
    /// Distance of the sharpest sampled inequality from equality; negative
    /// when violated.
    pub margin: f64,
    pub witnesses: Vec<Witness>,
    pub notes: String,
}

/// Outcome of a single check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub verdict: Verdict,
    pub margin: f64,
    pub witnesses: Vec<Witness>,
    pub note: String,
}

impl CheckOutcome {
    fn holds(margin: f64, note: impl Into<String>) -> Self {
        CheckOutcome {
            verdict: Verdict::Holds,
            margin,
            witnesses: Vec::new(),
            note: note.into(),
        }
    }

    fn fails(margin: f64, witness: Witness, note: impl Into<String>) -> Self {
        CheckOutcome {
            verdict: Verdict::Fails,
            margin,
            witnesses: vec![witness],
            note: note.into(),
        }
    }

    fn inconclusive(witnesses: Vec<Witness>, note: impl Into<String>) -> Self {
        CheckOutcome {
            verdict: Verdict::Inconclusive,
            margin: f64::NAN,
            witnesses,
            note: note.into(),
        }
    }

    fn with_witnesses(mut self, w: Vec<Witness>) -> Self {
        self.witnesses.extend(w);
        self
    }
}

/// A state variable of the nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateVar {
    X,
    Y,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Nonincreasing,
    Nondecreasing,
}

/// Sampling box for `(t, x, y, d)`. Absent state ranges bind the variable to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub t: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<[f64; 2]>,
}

impl Region {
    pub fn unit() -> Self {
        Region {
            t: [0.0, 1.0],
            x: None,
            y: None,
            d: None,
        }
    }

    pub fn with(mut self, var: StateVar, lo: f64, hi: f64) -> Self {
        let r = Some([lo, hi]);
        match var {
            StateVar::X => self.x = r,
            StateVar::Y => self.y = r,
            StateVar::D => self.d = r,
        }
        self
    }

    fn range(&self, var: StateVar) -> Option<[f64; 2]> {
        match var {
            StateVar::X => self.x,
            StateVar::Y => self.y,
            StateVar::D => self.d,
        }
    }

    fn axis(&self, var: StateVar) -> Vec<f64> {
        self.range(var).map_or(vec![1.0], |[a, b]| state_samples(a, b))
    }

    /// All sample points as `[t, x, y, d]`.
    fn points(&self) -> Vec<[f64; 4]> {
        let ts = t_samples(self.t[0], self.t[1]);
        let (xs, ys, ds) = (self.axis(StateVar::X), self.axis(StateVar::Y), self.axis(StateVar::D));
        let mut out = Vec::with_capacity(ts.len() * xs.len() * ys.len() * ds.len());
        for &t in &ts {
            for &x in &xs {
                for &y in &ys {
                    for &d in &ds {
                        out.push([t, x, y, d]);
                    }
                }
            }
        }
        out
    }
}

/// Interior sample points of `(lo, hi)`, clustered at both ends.
fn t_samples(lo: f64, hi: f64) -> Vec<f64> {
    if hi.is_infinite() {
        return [
            1e-6, 1e-3, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 300.0,
        ]
        .iter()
        .map(|s| lo + s)
        .collect();
    }
    let mut fr = vec![1e-6, 1e-4, 1e-2, 0.05];
    fr.extend((1..10).map(|k| k as f64 / 10.0));
    fr.extend([0.95, 0.99, 1.0 - 1e-4, 1.0 - 1e-6]);
    fr.iter().map(|s| lo + (hi - lo) * s).collect()
}

/// Nine log-spaced samples of a state range; a closed end at 0 or an open
/// end at ∞ is approached to six decades.
fn state_samples(a: f64, b: f64) -> Vec<f64> {
    let hi = if b.is_finite() { b } else { 1e6 };
    let lo = if a > 0.0 { a } else { hi * 1e-6 };
    if hi <= lo {
        return vec![lo];
    }
    let k = 8;
    (0..=k).map(|i| lo * (hi / lo).powf(i as f64 / k as f64)).collect()
}

/// Evaluation that keeps overflow as a signed infinity and maps other
/// failures to NaN.
fn value(e: &Expr, env: &Env) -> f64 {
    match e.eval(env) {
        Ok(v) => v,
        Err(EvalError::NonFinite { value, .. }) => value,
        Err(_) => f64::NAN,
    }
}

fn value1(e: &Expr, z: f64) -> f64 {
    value(e, &Env::full(z, z, z, z))
}

fn env_of(p: [f64; 4]) -> Env {
    Env::full(p[0], p[1], p[2], p[3])
}

fn scaled(p: [f64; 4], var: StateVar, c: f64) -> [f64; 4] {
    let mut q = p;
    match var {
        StateVar::X => q[1] *= c,
        StateVar::Y => q[2] *= c,
        StateVar::D => q[3] *= c,
    }
    q
}

// ---------------------------------------------------------------------------
// Integrability by refinement.

/// Integral values under refinement and the verdict drawn from them.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub values: Vec<f64>,
    pub outcome: CheckOutcome,
}

impl Refinement {
    pub fn value(&self) -> f64 {
        *self.values.last().unwrap_or(&f64::NAN)
    }
}

/// `∫_lo^hi f` on graded Gauss grids with `8, 16, …` panels per half. A
/// half-line is mapped to `[0, 1)` by `t = lo + s/(1-s)`. The increments of
/// a convergent integral shrink geometrically; a stalled increment is read
/// as divergence.
pub fn refine(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, levels: usize) -> Refinement {
    let levels = levels.max(4);
    let half_line = hi.is_infinite();
    let (a, b) = if half_line { (0.0, 1.0) } else { (lo, hi) };
    let mut values = Vec::with_capacity(levels);
    for k in 0..levels {
        let grid = match GridSpec::new(a, b, 8 << k, REFINE_GRADING).rule(Rule::Gauss(8)).build() {
            Ok(g) => g,
            Err(e) => {
                return Refinement {
                    values,
                    outcome: CheckOutcome::inconclusive(Vec::new(), format!("grid: {e}")),
                }
            }
        };
        let mut bad = None;
        let terms: Vec<f64> = grid
            .nodes
            .iter()
            .zip(&grid.weights)
            .map(|(&s, &w)| {
                let (t, jac) = if half_line {
                    (lo + s / (1.0 - s), 1.0 / ((1.0 - s) * (1.0 - s)))
                } else {
                    (s, 1.0)
                };
                let v = f(t);
                if !v.is_finite() && bad.is_none() {
                    bad = Some((t, v));
                }
                w * v * jac
            })
            .collect();
        if let Some((t, v)) = bad {
            let outcome = if v.is_nan() {
                CheckOutcome::inconclusive(
                    vec![Witness::new([t], v)],
                    format!("integrand not evaluable at t = {t:e}"),
                )
            } else {
                CheckOutcome::fails(
                    f64::NEG_INFINITY,
                    Witness::new([t], v),
                    format!("integrand is infinite at t = {t:e}"),
                )
            };
            return Refinement { values, outcome };
        }
        values.push(quadrature::sum(terms));
    }
    let outcome = refinement_verdict(&values);
    Refinement { values, outcome }
}

fn refinement_verdict(values: &[f64]) -> CheckOutcome {
    let n = values.len();
    let last = values[n - 1];
    let inc: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let m = inc.len();
    let scale = last.abs().max(1.0);
    let witness = Witness::new([(8usize << (n - 1)) as f64], last);
    if inc[m - 1] <= REFINE_FLOOR * scale && inc[m - 2] <= REFINE_FLOOR * scale {
        return CheckOutcome::holds(f64::INFINITY, format!("integral {last:.12e}")).with_witnesses(vec![witness]);
    }
    let r1 = inc[m - 2] / inc[m - 3];
    let r2 = inc[m - 1] / inc[m - 2];
    if r1 < STALL_RATIO && r2 < STALL_RATIO {
        // Geometric extrapolation of what the remaining refinements add.
        let rest = inc[m - 1] * r2 / (1.0 - r2);
        let margin = -(r2.ln());
        CheckOutcome::holds(
            margin,
            format!("integral {last:.12e} (extrapolated remainder {rest:.1e}, increment ratio {r2:.3})"),
        )
        .with_witnesses(vec![witness])
    } else if r1 >= STALL_RATIO && r2 >= STALL_RATIO {
        CheckOutcome::fails(
            -(r2.ln()),
            witness,
            format!(
                "integral grows under refinement ({:.6e} -> {last:.6e}, increment ratio {r2:.3}); witness = (panels per half, value)",
                values[n - 2]
            ),
        )
    } else {
        CheckOutcome::inconclusive(
            vec![witness],
            format!("refinement increments not monotone (ratios {r1:.3}, {r2:.3})"),
        )
    }
}

/// Quick fixed-grid integral used inside outer integrands. The grid is built
/// on `[0, 1]` and mapped, so short intervals stay resolvable.
fn inner_integral(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let Ok(grid) = GridSpec::new(0.0, 1.0, panels, REFINE_GRADING)
        .rule(Rule::Gauss(8))
        .build()
    else {
        return f64::NAN;
    };
    if hi.is_infinite() {
        return quadrature::sum(grid.nodes.iter().zip(&grid.weights).map(|(&s, &w)| {
            let j = 1.0 / ((1.0 - s) * (1.0 - s));
            w * f(lo + s / (1.0 - s)) * j
        }));
    }
    let len = hi - lo;
    // Mapped nodes next to an end can round onto it.
    let (inside_lo, inside_hi) = (lo.next_up(), hi.next_down());
    quadrature::sum(grid.nodes.iter().zip(&grid.weights).map(|(&s, &w)| {
        let t = if s < 0.5 { lo + len * s } else { hi - len * (1.0 - s) };
        w * len * f(t.clamp(inside_lo, inside_hi))
    }))
}

fn finish(label: Label, parts: Vec<CheckOutcome>) -> HypothesisReport {
    let holds = if parts.iter().any(|p| p.verdict == Verdict::Fails) {
        Verdict::Fails
    } else if parts.iter().any(|p| p.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Holds
    };
    let margin = parts
        .iter()
        .filter(|p| p.verdict == holds || holds == Verdict::Holds)
        .map(|p| p.margin)
        .filter(|m| !m.is_nan())
        .fold(f64::INFINITY, f64::min);
    let margin = if holds == Verdict::Inconclusive {
        f64::NAN
    } else {
        margin.clamp(-f64::MAX, f64::MAX)
    };
    let mut witnesses = Vec::new();
    let mut notes = Vec::new();
    for p in parts {
        // A failing report keeps only the failing witnesses.
        if holds != Verdict::Fails || p.verdict == Verdict::Fails {
            witnesses.extend(p.witnesses);
        }
        if !p.note.is_empty() {
            notes.push(p.note);
        }
    }
    HypothesisReport {
        label,
        holds,
        margin,
        witnesses,
        notes: notes.join("; "),
    }
}

/// `∫ weight · envelope` over `interval`, for `t`-only expressions.
pub fn check_integrability(label: Label, weight: &Expr, envelope: &Expr, interval: [f64; 2]) -> HypothesisReport {
    finish(label, vec![integrable(weight, envelope, interval)])
}

fn integrable(weight: &Expr, envelope: &Expr, [lo, hi]: [f64; 2]) -> CheckOutcome {
    let r = refine(
        |t| {
            let env = Env::new().t(t);
            value(weight, &env) * value(envelope, &env)
        },
        lo,
        hi,
        REFINE_LEVELS,
    );
    r.outcome
}

/// `∫ p(t) · outer(c · arg(t)) dt` for every `c` in `scales`.
fn composed_integrable(p: &Expr, outer: &Expr, arg: &Expr, scales: &[f64], [lo, hi]: [f64; 2]) -> CheckOutcome {
    let parts = scales
        .iter()
        .map(|&c| {
            let mut r = refine(
                |t| value(p, &Env::new().t(t)) * value1(outer, c * value(arg, &Env::new().t(t))),
                lo,
                hi,
                REFINE_LEVELS,
            )
            .outcome;
            r.note = format!("C = {c}: {}", r.note);
            r
        })
        .collect();
    merge(parts)
}

/// `∫ p(t) · u(c · ∫_t^hi inner(s) ds) dt` for every `c` in `scales`.
fn nested_integrable(p: &Expr, u: &Expr, inner: &Expr, scales: &[f64], [lo, hi]: [f64; 2]) -> CheckOutcome {
    let parts = scales
        .iter()
        .map(|&c| {
            let mut r = refine(
                |t| {
                    let tail = inner_integral(|s| value(inner, &Env::new().t(s)), t, hi, 16);
                    value(p, &Env::new().t(t)) * value1(u, c * tail)
                },
                lo,
                hi,
                REFINE_LEVELS - 1,
            )
            .outcome;
            r.note = format!("C = {c}: {}", r.note);
            r
        })
        .collect();
    merge(parts)
}

/// Conjunction of several outcomes into one.
fn merge(parts: Vec<CheckOutcome>) -> CheckOutcome {
    let verdict = if parts.iter().any(|p| p.verdict == Verdict::Fails) {
        Verdict::Fails
    } else if parts.iter().any(|p| p.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Holds
    };
    let margin = parts.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
    let mut witnesses = Vec::new();
    let mut notes = Vec::new();
    for p in parts {
        if verdict != Verdict::Fails || p.verdict == Verdict::Fails {
            witnesses.extend(p.witnesses);
        }
        if !p.note.is_empty() {
            notes.push(p.note);
        }
    }
    CheckOutcome {
        verdict,
        margin: if verdict == Verdict::Inconclusive {
            f64::NAN
        } else {
            margin
        },
        witnesses,
        note: notes.join("; "),
    }
}

// ---------------------------------------------------------------------------
// Pointwise checks on a sampling box.

/// `lhs ≤ rhs` at every sample point.
fn bound(lhs: &Expr, rhs: &Expr, region: &Region) -> CheckOutcome {
    let mut margin = f64::INFINITY;
    let mut worst: Option<(f64, [f64; 4], f64, f64)> = None;
    for p in region.points() {
        let env = env_of(p);
        let (l, r) = (value(lhs, &env), value(rhs, &env));
        if l.is_nan() || r.is_nan() {
            return CheckOutcome::inconclusive(
                vec![Witness::new(p, if l.is_nan() { l } else { r })],
                "bound not evaluable; witness = ([t, x, y, d], value)",
            );
        }
        if l == r || (l == f64::NEG_INFINITY) || (r == f64::INFINITY) {
            margin = margin.min(if l == r { 0.0 } else { f64::INFINITY });
            continue;
        }
        let scale = l.abs().max(r.abs()).max(f64::MIN_POSITIVE);
        let rel = (r - l) / scale;
        if rel < margin {
            margin = rel;
            worst = Some((rel, p, l, r));
        }
    }
    match worst {
        Some((rel, p, l, r)) if rel < -REL_TOL => CheckOutcome::fails(
            rel,
            Witness::new(p, l - r),
            format!("lhs {l:.6e} exceeds rhs {r:.6e}; witness = ([t, x, y, d], lhs - rhs)"),
        ),
        _ => CheckOutcome::holds(margin, ""),
    }
}

/// `f > 0` and finite at every sample point.
fn positive(f: &Expr, region: &Region) -> CheckOutcome {
    let mut margin = f64::INFINITY;
    for p in region.points() {
        let v = value(f, &env_of(p));
        if !(v > 0.0) || !v.is_finite() {
            return CheckOutcome::fails(
                if v > 0.0 { 0.0 } else { v },
                Witness::new(p, v),
                "not positive and finite; witness = ([t, x, y, d], value)",
            );
        }
        margin = margin.min(v);
    }
    CheckOutcome::holds(margin, "")
}

fn finite(f: &Expr, region: &Region) -> CheckOutcome {
    for p in region.points() {
        let v = value(f, &env_of(p));
        if !v.is_finite() {
            return CheckOutcome::fails(
                f64::NEG_INFINITY,
                Witness::new(p, v),
                "not finite; witness = ([t, x, y, d], value)",
            );
        }
    }
    CheckOutcome::holds(f64::INFINITY, "")
}

fn monotone_pairs(values: &[(Vec<f64>, f64)], dir: Direction) -> CheckOutcome {
    let mut margin = f64::INFINITY;
    for w in values.windows(2) {
        let (a, b) = (w[0].1, w[1].1);
        if a.is_nan() || b.is_nan() {
            return CheckOutcome::inconclusive(
                vec![Witness::new(w[1].0.clone(), f64::NAN)],
                "not evaluable along the monotonicity direction",
            );
        }
        if a == b {
            margin = margin.min(0.0);
            continue;
        }
        let step = match dir {
            Direction::Nonincreasing => a - b,
            Direction::Nondecreasing => b - a,
        };
        let scale = a.abs().max(b.abs());
        let rel = if scale.is_finite() { step / scale } else { step.signum() };
        if rel < -REL_TOL {
            return CheckOutcome::fails(
                rel,
                Witness::new(w[1].0.clone(), b - a),
                format!("not {dir:?} between consecutive samples; witness = (point, jump)").to_lowercase(),
            );
        }
        margin = margin.min(rel.max(0.0));
    }
    CheckOutcome::holds(margin, "")
}

/// Pairwise monotonicity of `f` in `var` with the other coordinates fixed.
fn monotone(f: &Expr, var: StateVar, dir: Direction, region: &Region) -> CheckOutcome {
    let axis = region.axis(var);
    let mut base = region.clone();
    base = base.with(var, 1.0, 1.0);
    let mut parts = Vec::new();
    for p in base.points() {
        let line: Vec<(Vec<f64>, f64)> = axis
            .iter()
            .map(|&v| {
                let q = scaled(p, var, v);
                (q.to_vec(), value(f, &env_of(q)))
            })
            .collect();
        let out = monotone_pairs(&line, dir);
        if out.verdict != Verdict::Holds {
            return out;
        }
        parts.push(out);
    }
    merge(parts)
}

/// Monotonicity of a one-variable expression over `range`, optionally with
/// strict positivity.
fn monotone1(f: &Expr, dir: Direction, [a, b]: [f64; 2], positive: bool) -> CheckOutcome {
    let zs = {
        let hi = if b.is_finite() { b } else { 1e12 };
        let lo = if a > 0.0 { a } else { hi * 1e-12 };
        (0..=48)
            .map(|i| lo * (hi / lo).powf(i as f64 / 48.0))
            .collect::<Vec<_>>()
    };
    let line: Vec<(Vec<f64>, f64)> = zs.iter().map(|&z| (vec![z], value1(f, z))).collect();
    if positive {
        if let Some((z, v)) = line.iter().find(|(_, v)| !(*v > 0.0)) {
            return CheckOutcome::fails(*v, Witness::new(z.clone(), *v), "not positive; witness = (z, value)");
        }
    }
    monotone_pairs(&line, dir)
}

/// Two-sided power scaling in one state variable:
/// `c^high f ≤ f(c·) ≤ c^low f` for `c ≤ 1` and the reverse for `c ≥ 1`.
fn scaling(f: &Expr, var: StateVar, low: f64, high: f64, region: &Region) -> CheckOutcome {
    const CS: [f64; 8] = [1e-3, 1e-2, 0.1, 0.5, 2.0, 10.0, 100.0, 1e3];
    let mut margin = f64::INFINITY;
    for p in region.points() {
        let f0 = value(f, &env_of(p));
        if !(f0 > 0.0) || !f0.is_finite() {
            continue;
        }
        for c in CS {
            let fc = value(f, &env_of(scaled(p, var, c)));
            if fc.is_nan() {
                return CheckOutcome::inconclusive(
                    vec![Witness::new([p[0], p[1], p[2], p[3], c], fc)],
                    "scaled value not evaluable",
                );
            }
            let (lo_e, hi_e) = if c <= 1.0 { (high, low) } else { (low, high) };
            let (lo_b, hi_b) = (c.powf(lo_e) * f0, c.powf(hi_e) * f0);
            let rel = ((fc - lo_b) / fc.abs().max(lo_b.abs())).min((hi_b - fc) / fc.abs().max(hi_b.abs()));
            if rel < -REL_TOL {
                return CheckOutcome::fails(
                    rel,
                    Witness::new([p[0], p[1], p[2], p[3], c], fc / f0),
                    format!(
                        "f(c·)/f = {:.6e} outside [{:.6e}, {:.6e}]; witness = ([t, x, y, d, c], ratio)",
                        fc / f0,
                        c.powf(lo_e),
                        c.powf(hi_e)
                    ),
                );
            }
            margin = margin.min(rel);
        }
    }
    CheckOutcome::holds(margin, "")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentRule {
    /// `v[0] · v[1] ≤ 1`.
    ProductAtMostOne,
    /// `v[0] · v[1] ≥ 1`.
    ProductAtLeastOne,
    /// Pairs `(α, β)` with `α ≤ 0 ≤ β`.
    SignSplit,
    /// Pairs `(α, β)` with `0 ≤ α ≤ β < 1`.
    OrderedSubunit,
    /// Sum strictly below 1.
    SumBelowOne,
    /// Every value in `[0, 1)`.
    Subunit,
    /// `[γ₁, δ₁, γ₂, δ₂]` with `(1-γ₁)(1-γ₂) ≠ δ₁δ₂`.
    CrossProductDistinct,
}

fn exponents(rule: ExponentRule, v: &[f64]) -> CheckOutcome {
    let pairs = || v.chunks(2).filter(|c| c.len() == 2);
    let (ok, margin) = match rule {
        ExponentRule::ProductAtMostOne => {
            let p = v.iter().product::<f64>();
            (p <= 1.0, 1.0 - p)
        }
        ExponentRule::ProductAtLeastOne => {
            let p = v.iter().product::<f64>();
            (p >= 1.0, p - 1.0)
        }
        ExponentRule::SignSplit => {
            let m = pairs().map(|c| (-c[0]).min(c[1])).fold(f64::INFINITY, f64::min);
            (m >= 0.0, m)
        }
        ExponentRule::OrderedSubunit => {
            let m = pairs()
                .map(|c| c[0].min(c[1] - c[0]).min(1.0 - c[1]))
                .fold(f64::INFINITY, f64::min);
            (m >= 0.0 && pairs().all(|c| c[1] < 1.0), m)
        }
        ExponentRule::SumBelowOne => {
            let s = v.iter().sum::<f64>();
            (s < 1.0, 1.0 - s)
        }
        ExponentRule::Subunit => {
            let m = v.iter().map(|&e| e.min(1.0 - e)).fold(f64::INFINITY, f64::min);
            (v.iter().all(|&e| (0.0..1.0).contains(&e)), m)
        }
        ExponentRule::CrossProductDistinct => {
            if v.len() != 4 {
                return CheckOutcome::inconclusive(Vec::new(), "expects [γ1, δ1, γ2, δ2]");
            }
            let gap = ((1.0 - v[0]) * (1.0 - v[2]) - v[1] * v[3]).abs();
            (gap > 1e-14, gap)
        }
    };
    if ok {
        CheckOutcome::holds(margin, "")
    } else {
        CheckOutcome::fails(
            margin,
            Witness::new(v.to_vec(), margin),
            format!("{rule:?} violated by {v:?}"),
        )
    }
}

// ---------------------------------------------------------------------------
// Limits along log grids.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    /// `f / u^e → 0` as `u → ∞`.
    VanishesAtInfinity,
    /// `liminf_{u→0⁺} min_t f / u^e > 0`.
    PositiveAtZero,
    /// `f / u^e → ∞` as `u → ∞`.
    UnboundedAtInfinity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthData {
    pub f: Expr,
    pub exponent: f64,
    pub limit: Limit,
    /// The state variable that carries `u`. With `others` empty every state
    /// variable is bound to `u`.
    pub var: StateVar,
    /// `t` range for the minimum; absent means `t` is bound to `1/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<[f64; 2]>,
    /// Values of the remaining state variables to minimize over.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub others: Vec<f64>,
}

fn log_step(a: f64, b: f64) -> f64 {
    if a == b {
        // Both saturated at the same end: keep the direction of travel.
        return if a.is_infinite() {
            a.signum() * f64::INFINITY
        } else {
            0.0
        };
    }
    b.log10() - a.log10()
}

/// Sampled limit behavior of `f / u^exponent` on decades `10^{±k}`,
/// `k = 0..12`, minimized over the `t` grid and the other state values.
pub fn check_growth(label: Label, data: &GrowthData) -> HypothesisReport {
    finish(label, vec![growth(data)])
}

fn growth(data: &GrowthData) -> CheckOutcome {
    let toward_zero = data.limit == Limit::PositiveAtZero;
    let ts: Vec<f64> = match data.t {
        Some([a, b]) => (0..=64)
            .map(|i| a + (b - a) * (i as f64 / 64.0).min(1.0 - 1e-9))
            .collect(),
        None => vec![0.5],
    };
    let ratio_at = |u: f64| -> f64 {
        let mut m = f64::INFINITY;
        for &t in &ts {
            let mut pt = [t, u, u, u];
            if !data.others.is_empty() {
                for &o in &data.others {
                    pt = [t, o, o, o];
                    match data.var {
                        StateVar::X => pt[1] = u,
                        StateVar::Y => pt[2] = u,
                        StateVar::D => pt[3] = u,
                    }
                    let r = value(&data.f, &env_of(pt)) / u.powf(data.exponent);
                    m = if r.is_nan() { f64::NAN } else { m.min(r) };
                }
            } else {
                let r = value(&data.f, &env_of(pt)) / u.powf(data.exponent);
                m = if r.is_nan() { f64::NAN } else { m.min(r) };
            }
        }
        m
    };
    let us: Vec<f64> = (0..=12)
        .map(|k| if toward_zero { 10f64.powi(-k) } else { 10f64.powi(k) })
        .collect();
    let rs: Vec<f64> = us.iter().map(|&u| ratio_at(u)).collect();
    let witnesses: Vec<Witness> = us[10..]
        .iter()
        .zip(&rs[10..])
        .map(|(&u, &r)| Witness::new([u], r))
        .collect();
    if rs[10..].iter().any(|r| r.is_nan()) {
        return CheckOutcome::inconclusive(witnesses, "ratio not evaluable in the last decades");
    }
    if rs[10..].iter().any(|&r| r < 0.0) {
        return CheckOutcome::fails(rs[12], witnesses[2].clone(), "negative ratio");
    }
    let d1 = log_step(rs[10], rs[11]);
    let d2 = log_step(rs[11], rs[12]);
    let trend = format!("log10 steps over the last two decades: {d1:.4}, {d2:.4}; witness = (u, ratio)");
    let (up, flat_or_up, down) = (
        d1 > FLAT_DECADE && d2 > FLAT_DECADE,
        d1 >= -FLAT_DECADE && d2 >= -FLAT_DECADE,
        d1 < -FLAT_DECADE && d2 < -FLAT_DECADE,
    );
    let last = witnesses[2].clone();
    match data.limit {
        Limit::VanishesAtInfinity => {
            if down {
                CheckOutcome::holds(-d2, trend).with_witnesses(vec![last])
            } else if flat_or_up {
                CheckOutcome::fails(-d2, last, format!("ratio does not decay; {trend}"))
            } else {
                CheckOutcome::inconclusive(witnesses, format!("non-monotone trend; {trend}"))
            }
        }
        Limit::PositiveAtZero => {
            if rs[12] > 0.0 && flat_or_up {
                CheckOutcome::holds(rs[12].min(f64::MAX), trend).with_witnesses(vec![last])
            } else if rs[12] == 0.0 || down {
                CheckOutcome::fails(d2, last, format!("ratio decays toward 0; {trend}"))
            } else {
                CheckOutcome::inconclusive(witnesses, format!("non-monotone trend; {trend}"))
            }
        }
        Limit::UnboundedAtInfinity => {
            if up {
                CheckOutcome::holds(d2, trend).with_witnesses(vec![last])
            } else if d1 <= FLAT_DECADE && d2 <= FLAT_DECADE {
                CheckOutcome::fails(d2, last, format!("ratio does not grow; {trend}"))
            } else {
                CheckOutcome::inconclusive(witnesses, format!("non-monotone trend; {trend}"))
            }
        }
    }
}

/// `I(∞) = ∞` for `I(z) = ∫₀^z dτ/(u+v)`, read from the decade increments of
/// `I` up to `z = 1e12`: a stalled increment ratio is a bounded transform.
fn transform_unbounded(u: &Expr, v: &Expr) -> CheckOutcome {
    let t = match Transform::build(u.clone(), v.clone(), TRANSFORM_CAP) {
        Ok(t) => t,
        Err(e) => return CheckOutcome::inconclusive(Vec::new(), format!("transform: {e}")),
    };
    let mut vals = Vec::new();
    for k in 0..=12 {
        let z = 10f64.powi(k);
        match t.apply(z) {
            Ok(i) => vals.push((z, i)),
            Err(e) => return CheckOutcome::inconclusive(vec![Witness::new([z], f64::NAN)], format!("transform: {e}")),
        }
    }
    let inc = |k: usize| vals[k].1 - vals[k - 1].1;
    let r = inc(12) / inc(11);
    let last = Witness::new([vals[12].0], vals[12].1);
    if r >= 0.9 {
        CheckOutcome::holds(
            r,
            format!("I(1e12) = {:.6e}, decade increment ratio {r:.3}", vals[12].1),
        )
        .with_witnesses(vec![last])
    } else if r <= 0.5 {
        CheckOutcome::fails(
            r - 1.0,
            last,
            format!("I levels off: decade increment ratio {r:.3}; witness = (z, I(z))"),
        )
    } else {
        CheckOutcome::inconclusive(vec![last], format!("decade increment ratio {r:.3} undecided"))
    }
}

// ---------------------------------------------------------------------------
// Sup ratios.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupVariant {
    /// Nested `c / I⁻¹(k₁(J⁻¹(k₂(c)∫q))∫p)` and its mirror.
    Nested,
    /// The nested form with `(1 + bᵢ/aᵢ)` prefactors.
    NestedRobin,
    /// `c / [(1+b₁/a₁) I⁻¹(h₁k₁(c)∫p) + (1+b₂/a₂) J⁻¹(h₂k₂(c)∫q)]`.
    Additive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupRatioData {
    pub variant: SupVariant,
    pub k1: Expr,
    pub k2: Expr,
    #[serde(default = "one")]
    pub h1: Expr,
    #[serde(default = "one")]
    pub h2: Expr,
    pub u1: Expr,
    pub v1: Expr,
    pub u2: Expr,
    pub v2: Expr,
    /// `∫p` and `∫q`; computed from `p`, `q` on `interval` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_int: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_int: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Expr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Expr>,
    #[serde(default = "unit_interval")]
    pub interval: [f64; 2],
    /// `bᵢ/aᵢ`; zero for Dirichlet-type ends.
    #[serde(default)]
    pub robin: [f64; 2],
}

fn one() -> Expr {
    Expr::constant(1.0)
}

fn unit_interval() -> [f64; 2] {
    [0.0, 1.0]
}

/// The sup-ratio grid `c_k = 10^{-6 + 12k/240}`.
pub fn sup_grid() -> Vec<f64> {
    (0..SUP_GRID_POINTS)
        .map(|k| 10f64.powf(-6.0 + 12.0 * k as f64 / (SUP_GRID_POINTS - 1) as f64))
        .collect()
}

fn resolve_integral(given: Option<f64>, e: Option<&Expr>, interval: [f64; 2]) -> Result<f64, String> {
    if let Some(v) = given {
        return Ok(v);
    }
    let Some(e) = e else {
        return Err("neither the integral nor the weight is given".into());
    };
    let r = refine(|t| value(e, &Env::new().t(t)), interval[0], interval[1], REFINE_LEVELS);
    match r.outcome.verdict {
        Verdict::Holds => Ok(r.value()),
        _ => Err(format!("weight integral not certified: {}", r.outcome.note)),
    }
}

/// Sup over [`sup_grid`] of the cited ratio(s). Holds iff every sup exceeds
/// 1; a ratio still increasing at `c = 1e6` is flagged in the notes.
pub fn check_sup_ratio(label: Label, data: &SupRatioData) -> HypothesisReport {
    finish(label, vec![sup_ratio(data)])
}

fn sup_ratio(data: &SupRatioData) -> CheckOutcome {
    let pi = resolve_integral(data.p_int, data.p.as_ref(), data.interval);
    let qi = resolve_integral(data.q_int, data.q.as_ref(), data.interval);
    let (pi, qi) = match (pi, qi) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return CheckOutcome::inconclusive(Vec::new(), e),
    };
    let ti = Transform::build(data.u1.clone(), data.v1.clone(), TRANSFORM_CAP);
    let tj = Transform::build(data.u2.clone(), data.v2.clone(), TRANSFORM_CAP);
    let (ti, tj) = match (ti, tj) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return CheckOutcome::inconclusive(Vec::new(), format!("transform: {e}")),
    };
    let (ti, tj) = (&ti, &tj);
    let (s1, s2) = (1.0 + data.robin[0], 1.0 + data.robin[1]);
    let k1 = |c: f64| value1(&data.k1, c);
    let k2 = |c: f64| value1(&data.k2, c);
    let h1 = |c: f64| value1(&data.h1, c);
    let h2 = |c: f64| value1(&data.h2, c);
    let inv = |t: &Transform, w: f64| -> Result<f64, TransformError> { t.invert(w) };
    type RatioFn<'a> = Box<dyn Fn(f64) -> Result<f64, TransformError> + 'a>;
    let ratios: Vec<(&str, RatioFn)> = match data.variant {
        SupVariant::Nested | SupVariant::NestedRobin => {
            let (a1, a2) = if data.variant == SupVariant::Nested {
                (1.0, 1.0)
            } else {
                (s1, s2)
            };
            vec![
                (
                    "c / I^-1(k1(J^-1(k2(c) Q)) P)",
                    Box::new(move |c: f64| {
                        let inner = a2 * inv(tj, k2(c) * qi)?;
                        Ok(c / (a1 * inv(ti, k1(inner) * pi)?))
                    }),
                ),
                (
                    "c / J^-1(k2(I^-1(k1(c) P)) Q)",
                    Box::new(move |c: f64| {
                        let inner = a1 * inv(ti, k1(c) * pi)?;
                        Ok(c / (a2 * inv(tj, k2(inner) * qi)?))
                    }),
                ),
            ]
        }
        SupVariant::Additive => vec![(
            "c / (I^-1(h1 k1 P) + J^-1(h2 k2 Q))",
            Box::new(move |c: f64| Ok(c / (s1 * inv(ti, h1(c) * k1(c) * pi)? + s2 * inv(tj, h2(c) * k2(c) * qi)?))),
        )],
    };
    let grid = sup_grid();
    let parts = ratios
        .iter()
        .map(|(name, r)| {
            let mut vals = Vec::with_capacity(grid.len());
            let mut failures = Vec::new();
            for &c in &grid {
                match r(c) {
                    Ok(v) if !v.is_nan() => vals.push((c, v)),
                    Ok(v) => failures.push(Witness::new([c], v)),
                    Err(_) => failures.push(Witness::new([c], f64::NAN)),
                }
            }
            let (c_star, sup) = vals
                .iter()
                .cloned()
                .fold((f64::NAN, f64::NEG_INFINITY), |m, p| if p.1 > m.1 { p } else { m });
            let n = vals.len();
            let rising = n >= 3
                && vals[n - 1].0 == grid[grid.len() - 1]
                && vals[n - 3].1 < vals[n - 2].1
                && vals[n - 2].1 < vals[n - 1].1;
            let edge = if rising {
                "; still increasing at c = 1e6 (sup appears unbounded)"
            } else {
                ""
            };
            let skipped = if failures.is_empty() {
                String::new()
            } else {
                format!("; {} grid points not evaluable", failures.len())
            };
            if sup > 1.0 {
                CheckOutcome::holds(
                    sup - 1.0,
                    format!("sup {name} = {sup:.6e} at c = {c_star:.3e}{edge}{skipped}"),
                )
                .with_witnesses(vec![Witness::new([c_star], sup)])
            } else if !failures.is_empty() {
                CheckOutcome::inconclusive(failures, format!("{name}: inversion failed on the grid{skipped}"))
            } else if rising {
                CheckOutcome::inconclusive(
                    vec![Witness::new([c_star], sup)],
                    format!("{name} = {sup:.6e} <= 1 on the grid but still increasing at c = 1e6"),
                )
            } else {
                CheckOutcome::fails(
                    sup - 1.0,
                    Witness::new([c_star], sup),
                    format!("sup {name} = {sup:.6e} <= 1; witness = (c, ratio)"),
                )
            }
        })
        .collect();
    merge(parts)
}

// ---------------------------------------------------------------------------
// Truncated-kernel constants.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedData {
    /// Lower-bound form: `f(t, u)`. Upper-bound form: `F(u)`.
    pub f: Expr,
    /// Lower-bound form: `G(u)`. Upper-bound form: `g(t, u)`.
    pub other: Expr,
    /// Envelope weight giving `b = ∫t(1-t)L` (lower) or `a = ∫t(1-t)K` (upper).
    pub weight: Expr,
    pub alpha: f64,
    pub eta: f64,
    pub n: Vec<u32>,
}

/// `∫_η^{1-h} (s-h)(1-h-s) ds` in closed form.
fn window_moment(eta: f64, h: f64) -> f64 {
    let a = eta - h;
    let l = 1.0 - h - eta;
    a * l * l / 2.0 + l * l * l / 6.0
}

fn truncated_setup(data: &TruncatedData) -> Result<f64, CheckOutcome> {
    let w = Expr::bin(crate::expr::BinOp::Mul, parse_static("t*(1-t)"), data.weight.clone());
    let r = refine(|t| value(&w, &Env::new().t(t)), 0.0, 1.0, REFINE_LEVELS);
    match r.outcome.verdict {
        Verdict::Holds => Ok(r.value()),
        _ => Err(CheckOutcome::inconclusive(
            Vec::new(),
            format!("envelope constant: {}", r.outcome.note),
        )),
    }
}

fn parse_static(s: &str) -> Expr {
    crate::expr::parse(s).expect("static expression parses")
}

/// Lower constant: `ρₙ = νₙ Sₙ min_{t∈[1/n,1-1/n]} f(t, 1/n + b μₙ G(1/n)) > 0`.
fn truncated_lower(data: &TruncatedData) -> CheckOutcome {
    let b = match truncated_setup(data) {
        Ok(b) => b,
        Err(e) => return e,
    };
    let mut parts = Vec::new();
    for &n in &data.n {
        let spec = BoundarySpec::ThreePointTruncated {
            alpha: data.alpha,
            eta: data.eta,
            n,
        };
        let kb = match kernels::bounds(&spec) {
            Ok(kb) => kb,
            Err(e) => {
                return CheckOutcome::inconclusive(vec![Witness::new([n as f64], f64::NAN)], format!("n = {n}: {e}"))
            }
        };
        let h = 1.0 / n as f64;
        let w = h + b * kb.mu * value1(&data.other, h);
        let fmin = (0..=64)
            .map(|i| {
                let t = h + (1.0 - 2.0 * h) * i as f64 / 64.0;
                value(&data.f, &Env::full(t, w, w, w))
            })
            .fold(f64::INFINITY, f64::min);
        let rho = kb.nu * window_moment(data.eta, h) * fmin;
        let wit = Witness::new([n as f64], rho);
        parts.push(if rho > 0.0 && rho.is_finite() {
            CheckOutcome::holds(rho, format!("n = {n}: rho_n = {rho:.6e}")).with_witnesses(vec![wit])
        } else if rho.is_nan() {
            CheckOutcome::inconclusive(vec![wit], format!("n = {n}: rho_n not evaluable"))
        } else {
            CheckOutcome::fails(rho, wit, format!("n = {n}: rho_n = {rho:e}; witness = (n, rho_n)"))
        });
    }
    merge(parts)
}

/// Upper constant: the least `M = 10^{k/4}` with
/// `a μₙ F(νₙ ∫_η^{1-1/n} (s-1/n)(1-1/n-s) g(s, M+1/n) ds) ≤ M`.
fn truncated_upper(data: &TruncatedData) -> CheckOutcome {
    let a = match truncated_setup(data) {
        Ok(a) => a,
        Err(e) => return e,
    };
    let mut parts = Vec::new();
    for &n in &data.n {
        let spec = BoundarySpec::ThreePointTruncated {
            alpha: data.alpha,
            eta: data.eta,
            n,
        };
        let kb = match kernels::bounds(&spec) {
            Ok(kb) => kb,
            Err(e) => {
                return CheckOutcome::inconclusive(vec![Witness::new([n as f64], f64::NAN)], format!("n = {n}: {e}"))
            }
        };
        let h = 1.0 / n as f64;
        let lhs = |m: f64| {
            let arg = kb.nu
                * inner_integral(
                    |s| (s - h) * (1.0 - h - s) * value(&data.other, &Env::full(s, m + h, m + h, m + h)),
                    data.eta,
                    1.0 - h,
                    16,
                );
            a * kb.mu * value1(&data.f, arg)
        };
        let mut found = None;
        let mut best = f64::INFINITY;
        let mut best_at = f64::NAN;
        for k in -24..=1200 {
            let m = 10f64.powf(k as f64 / 4.0);
            let l = lhs(m);
            if l.is_nan() {
                continue;
            }
            let rel = l / m;
            if rel < best {
                best = rel;
                best_at = m;
            }
            if l <= m {
                found = Some((m, l));
                break;
            }
        }
        parts.push(match found {
            Some((m, l)) => CheckOutcome::holds(1.0 - l / m, format!("n = {n}: M = {m:.3e} gives {l:.6e} <= M"))
                .with_witnesses(vec![Witness::new([n as f64, m], l)]),
            None => CheckOutcome::fails(
                1.0 - best,
                Witness::new([n as f64, best_at], best),
                format!("n = {n}: no M in [1e-6, 1e300] satisfies the bound; smallest lhs/M = {best:.6e}; witness = ([n, M], lhs/M)"),
            ),
        });
    }
    merge(parts)
}

// ---------------------------------------------------------------------------
// The half-line constant ω(M).

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaComponent {
    pub h: Expr,
    pub k: Expr,
    pub u: Expr,
    pub v: Expr,
    pub p: Expr,
    /// `bᵢ/aᵢ`; zero for Dirichlet ends.
    #[serde(default)]
    pub robin_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaData {
    pub m: f64,
    pub eps: f64,
    /// Window end for the `ε > 0` values.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub components: Vec<OmegaComponent>,
}

fn default_horizon() -> f64 {
    64.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaValues {
    pub at_eps: f64,
    pub at_eps_tenth: f64,
    /// `lim_{ε→0} ω_ε(M)` over the whole half-line.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OmegaError {
    #[error("eps must lie in (0, 1e-3], got {0}")]
    Eps(f64),
    #[error("M must be positive, got {0}")]
    M(f64),
    #[error("transform: {0}")]
    Transform(#[from] TransformError),
    #[error("tail integral: {0}")]
    Tail(#[from] quadrature::QuadError),
    #[error("{which} not evaluable at {at}")]
    Eval { which: &'static str, at: f64 },
}

/// `ω_ε(M)` at `ε`, `ε/10` and the limit.
///
/// With `J(ε) > 0` the integrand tends to `ε` and the integral over the whole
/// half-line diverges, so the `ε > 0` values integrate over the window
/// `[0, horizon]` the truncated problems are posed on. The limit uses
/// `J(0) = 0` and a certified tail.
pub fn omega(data: &OmegaData) -> Result<OmegaValues, OmegaError> {
    if !(data.eps > 0.0 && data.eps <= 1e-3) {
        return Err(OmegaError::Eps(data.eps));
    }
    if !(data.m > 0.0 && data.m.is_finite()) {
        return Err(OmegaError::M(data.m));
    }
    let tail_opts = TailOptions::default();
    let mut at = [0.0; 3];
    for c in &data.components {
        let j = Transform::build(c.u.clone(), c.v.clone(), 1e3)?;
        let a = value1(&c.h, data.m) * value1(&c.k, data.m);
        if !a.is_finite() {
            return Err(OmegaError::Eval {
                which: "h(M) k(M)",
                at: data.m,
            });
        }
        let p_tail = |t: f64| quadrature::integrate_tail(|s| value(&c.p, &Env::new().t(s)), t, 1.0, tail_opts);
        let p0 = p_tail(0.0)?;
        for (slot, eps) in [(0, data.eps), (1, data.eps / 10.0), (2, 0.0)] {
            let je = j.apply(eps)?;
            let mut err = None;
            let mut integrand = |t: f64| {
                let w = match p_tail(t) {
                    Ok(pt) => a * pt + je,
                    Err(e) => {
                        err.get_or_insert(OmegaError::Tail(e));
                        return 0.0;
                    }
                };
                match j.invert(w) {
                    Ok(z) => z,
                    Err(e) => {
                        err.get_or_insert(OmegaError::Transform(e));
                        0.0
                    }
                }
            };
            let body = if eps > 0.0 {
                let grid = GridSpec::new(0.0, data.horizon, (data.horizon * 2.0).ceil() as usize, 1.0)
                    .rule(Rule::Gauss(8))
                    .build()?;
                quadrature::integrate(&mut integrand, &grid)?
            } else {
                quadrature::integrate_tail(&mut integrand, 0.0, 1.0, tail_opts)?
            };
            if let Some(e) = err {
                return Err(e);
            }
            at[slot] += body + (1.0 + c.robin_ratio) * j.invert(a * p0 + je)?;
        }
    }
    Ok(OmegaValues {
        at_eps: at[0],
        at_eps_tenth: at[1],
        limit: at[2],
    })
}

/// `M / ω(M) > 1`, with `ω` at `ε`, `ε/10` and the limit as witnesses.
pub fn check_omega(label: Label, data: &OmegaData) -> HypothesisReport {
    finish(label, vec![omega_check(data)])
}

fn omega_check(data: &OmegaData) -> CheckOutcome {
    let vals = match omega(data) {
        Ok(v) => v,
        Err(e) => return CheckOutcome::inconclusive(Vec::new(), e.to_string()),
    };
    let witnesses = vec![
        Witness::new([data.eps], vals.at_eps),
        Witness::new([data.eps / 10.0], vals.at_eps_tenth),
        Witness::new([0.0], vals.limit),
    ];
    let note = format!(
        "omega_eps(M) on [0, {}] = {:.9e} (eps = {:e}), {:.9e} (eps/10); limit omega(M) = {:.12e}; witness = (eps, omega)",
        data.horizon, vals.at_eps, data.eps, vals.at_eps_tenth, vals.limit
    );
    if vals.at_eps_tenth > vals.at_eps * (1.0 + 1e-12) {
        return CheckOutcome::inconclusive(witnesses, format!("omega_eps increased as eps decreased; {note}"));
    }
    let ratio = data.m / vals.limit;
    if ratio > 1.0 {
        CheckOutcome::holds(ratio - 1.0, note).with_witnesses(witnesses)
    } else {
        CheckOutcome::fails(
            ratio - 1.0,
            Witness::new([0.0], vals.limit),
            format!("M / omega(M) = {ratio:.6e}; {note}"),
        )
    }
}

// ---------------------------------------------------------------------------
// Declarative form.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Check {
    Integrable {
        weight: Expr,
        envelope: Expr,
        interval: [f64; 2],
    },
    ComposedIntegrable {
        p: Expr,
        outer: Expr,
        arg: Expr,
        scales: Vec<f64>,
        interval: [f64; 2],
    },
    NestedIntegrable {
        p: Expr,
        u: Expr,
        inner: Expr,
        scales: Vec<f64>,
        interval: [f64; 2],
    },
    Bound {
        lhs: Expr,
        rhs: Expr,
        region: Region,
    },
    Positive {
        f: Expr,
        region: Region,
    },
    /// Finite at every sample point; the sampled stand-in for continuity.
    Finite {
        f: Expr,
        region: Region,
    },
    Monotone {
        f: Expr,
        var: StateVar,
        direction: Direction,
        region: Region,
    },
    Monotone1 {
        f: Expr,
        direction: Direction,
        range: [f64; 2],
        #[serde(default)]
        positive: bool,
    },
    Scaling {
        f: Expr,
        var: StateVar,
        low: f64,
        high: f64,
        region: Region,
    },
    Exponents {
        rule: ExponentRule,
        values: Vec<f64>,
    },
    Growth(GrowthData),
    TransformUnbounded {
        u: Expr,
        v: Expr,
    },
    SupRatio(SupRatioData),
    TruncatedLower(TruncatedData),
    TruncatedUpper(TruncatedData),
    Omega(OmegaData),
}

impl Check {
    pub fn run(&self) -> CheckOutcome {
        match self {
            Check::Integrable {
                weight,
                envelope,
                interval,
            } => integrable(weight, envelope, *interval),
            Check::ComposedIntegrable {
                p,
                outer,
                arg,
                scales,
                interval,
            } => composed_integrable(p, outer, arg, scales, *interval),
            Check::NestedIntegrable {
                p,
                u,
                inner,
                scales,
                interval,
            } => nested_integrable(p, u, inner, scales, *interval),
            Check::Bound { lhs, rhs, region } => bound(lhs, rhs, region),
            Check::Positive { f, region } => positive(f, region),
            Check::Finite { f, region } => finite(f, region),
            Check::Monotone {
                f,
                var,
                direction,
                region,
            } => monotone(f, *var, *direction, region),
            Check::Monotone1 {
                f,
                direction,
                range,
                positive,
            } => monotone1(f, *direction, *range, *positive),
            Check::Scaling {
                f,
                var,
                low,
                high,
                region,
            } => scaling(f, *var, *low, *high, region),
            Check::Exponents { rule, values } => exponents(*rule, values),
            Check::Growth(g) => growth(g),
            Check::TransformUnbounded { u, v } => transform_unbounded(u, v),
            Check::SupRatio(s) => sup_ratio(s),
            Check::TruncatedLower(d) => truncated_lower(d),
            Check::TruncatedUpper(d) => truncated_upper(d),
            Check::Omega(o) => omega_check(o),
        }
    }
}

/// A labelled conjunction of checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSpec {
    pub label: Label,
    pub checks: Vec<Check>,
}

impl HypothesisSpec {
    pub fn new(label: &str, checks: Vec<Check>) -> Self {
        HypothesisSpec {
            label: label.parse().expect("valid hypothesis label"),
            checks,
        }
    }
}

pub fn audit(spec: &HypothesisSpec) -> HypothesisReport {
    finish(spec.label, spec.checks.iter().map(Check::run).collect())
}
