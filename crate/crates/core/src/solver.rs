//! Nyström solver for the regularized fixed-point problems.
//!
//! A stage fixes the regularization index `n` and discretizes
//! `x = a(t)/n + ∫K₁(t,s)p(s)f(s)ds + ∫C₁(t,s)q(s)g(s)ds` (and the mirror for
//! `y`) on midpoint nodes of a graded grid, using the dual-cell weights of
//! [`Grid::cell_weights`]. Every kernel is affine in `t` on either side of
//! `t = s`, so one operator application is a pair of prefix sums and costs
//! `O(N)`. The same structure makes the second central difference of the
//! discrete solution reproduce `-p·f` at interior nodes up to rounding.

use crate::expr::{Env, EvalError, Expr, Var};
use crate::kernels::{BoundarySpec, Component, Kernel, KernelError, Side as KSide};
use crate::quadrature::{Grid, GridSpec, QuadError, Rule, Side};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("evaluating {which} at t = {t}: {source}")]
    Eval {
        which: &'static str,
        t: f64,
        #[source]
        source: EvalError,
    },
    #[error("nonlinearity is declared singular at {0} = 0 but regularization is none")]
    Unregularized(&'static str),
    #[error("residual needs at least 5 interior nodes, grid has {0}")]
    GridTooSmall(usize),
    #[error("unknown cone `{0}` (expected t, t(1-t)gamma, four-point, robin, coupled-robin, concave)")]
    UnknownCone(String),
}

/// How the singular problem is replaced by a nonsingular one at index `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    /// `x ↦ max{x + 1/n, 1/n}` and likewise for `y`.
    ShiftState,
    /// `x ↦ x + a₁(t)/n`, `y ↦ y + a₂(t)/n`, `d ↦ |d| + 1/n`, Neumann end `x'(1) = 0`.
    ShiftDerivative,
    /// Clamps `θ` onto `[0, M]` for states and `ρ` onto `[1/n, L]` for the
    /// derivative; Neumann end `x'(1) = 1/n`.
    RetractionBox,
    None,
}

impl fmt::Display for Regularization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regularization::ShiftState => "shift_state",
            Regularization::ShiftDerivative => "shift_derivative",
            Regularization::RetractionBox => "retraction_box",
            Regularization::None => "none",
        })
    }
}

/// Declared singularities; informational except that they sharpen the
/// message when an unregularized evaluation fails.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Singularity {
    pub x: bool,
    pub y: bool,
    pub d: bool,
    pub endpoints: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub lo: f64,
    /// `f64::INFINITY` for half-line problems.
    pub hi: f64,
    pub bc: BoundarySpec,
    pub p: Expr,
    pub q: Expr,
    pub f: Expr,
    pub g: Expr,
    pub regularization: Regularization,
    pub singular: Singularity,
    /// Upper clamp for [`Regularization::RetractionBox`]; the divergence cap
    /// when unset.
    pub clamp: Option<f64>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), SolverError> {
        self.bc.validate()?;
        if !(self.lo.is_finite() && self.hi > self.lo) {
            return Err(SolverError::Invalid(format!(
                "interval [{}, {}] is degenerate",
                self.lo, self.hi
            )));
        }
        if self.hi.is_infinite() != self.bc.is_half_line() {
            return Err(SolverError::Invalid(format!(
                "boundary conditions {} do not match interval [{}, {}]",
                self.bc.family(),
                self.lo,
                self.hi
            )));
        }
        for (name, e) in [("p", &self.p), ("q", &self.q)] {
            if e.free_vars().iter().any(|&v| v != Var::T) {
                return Err(SolverError::Invalid(format!("{name} may depend on t only")));
            }
        }
        if self.regularization == Regularization::None {
            let s = &self.singular;
            for (flag, name) in [(s.x, "x"), (s.y, "y"), (s.d, "d")] {
                if flag {
                    return Err(SolverError::Unregularized(name));
                }
            }
        }
        if let Some(m) = self.clamp {
            if !(m > 0.0) {
                return Err(SolverError::Invalid(format!("clamp must be positive, got {m}")));
            }
        }
        Ok(())
    }

    /// Default regularization index for the first stage.
    pub fn default_n0(&self) -> u32 {
        match self.bc {
            BoundarySpec::ThreePointTruncated { alpha, eta, .. } => crate::kernels::truncation_n0(alpha, eta),
            _ => 4,
        }
    }

    /// The paper's cone for this family.
    pub fn default_cone(&self) -> Cone {
        match self.bc {
            BoundarySpec::ThreePoint { .. } => Cone::TGamma,
            BoundarySpec::FourPointCoupled { .. } => Cone::FourPoint,
            BoundarySpec::DirichletNeumann | BoundarySpec::HalfLineDirichlet => Cone::T,
            BoundarySpec::RobinNeumann { .. } | BoundarySpec::HalfLineRobin { .. } => Cone::Robin,
            BoundarySpec::TwoPointCoupledRobin { .. } => Cone::CoupledRobin,
            BoundarySpec::ThreePointTruncated { .. } | BoundarySpec::DirichletDirichlet => Cone::Concave,
        }
    }

    fn depends_on_n(&self) -> bool {
        self.regularization != Regularization::None || matches!(self.bc, BoundarySpec::ThreePointTruncated { .. })
    }
}

/// Starting iterate of a solve.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Zero,
    /// `x = y = 0.1·(t - lo)/(hi - lo)`.
    AffineRamp,
    /// `x = y = r·(t - lo)/(hi - lo)`.
    Ramp(f64),
    /// Values of an earlier solution, read through its interpolant.
    Supplied(Box<SolutionPair>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Panels per half interval; the grid has `2N` nodes.
    pub n_grid: usize,
    pub grading: f64,
    pub omega: f64,
    pub tol_fp: f64,
    pub max_iter: usize,
    pub n0: Option<u32>,
    pub n_growth: f64,
    pub n_max: u32,
    pub tol_reg: f64,
    pub init: Init,
    /// Sup-norm above which an iteration counts as divergent.
    pub cap: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            n_grid: 512,
            grading: 4.0,
            omega: 0.5,
            tol_fp: 1e-10,
            max_iter: 10_000,
            n0: None,
            n_growth: 2.0,
            n_max: 1 << 30,
            tol_reg: 1e-6,
            init: Init::AffineRamp,
            cap: 1e6,
        }
    }
}

/// Discrete state on the stage nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl State {
    pub fn zeros(m: usize) -> Self {
        Self {
            x: vec![0.0; m],
            y: vec![0.0; m],
            dx: vec![0.0; m],
            dy: vec![0.0; m],
        }
    }

    /// Sup-norm of the values `x, y`; derivatives are excluded because they
    /// legitimately blow up at singular endpoints.
    pub fn sup_norm(&self) -> f64 {
        [&self.x, &self.y]
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn sup_distance(&self, other: &State) -> f64 {
        let pairs = [
            (&self.x, &other.x),
            (&self.y, &other.y),
            (&self.dx, &other.dx),
            (&self.dy, &other.dy),
        ];
        pairs
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    fn is_finite(&self) -> bool {
        [&self.x, &self.y, &self.dx, &self.dy]
            .iter()
            .all(|v| v.iter().all(|a| a.is_finite()))
    }
}

/// Outcome of the inner fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FpStatus {
    Converged,
    MaxIter,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub n: u32,
    pub iterations: usize,
    pub fp_residual: f64,
    pub status: FpStatus,
    pub omega: f64,
    pub norm: f64,
    /// Sup distance in `(x, y)` to the previous stage.
    pub diff_prev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Diagnostics {
    pub n_final: u32,
    pub stages: Vec<StageRecord>,
    pub fp_residual: f64,
    pub fp_converged: bool,
    pub reg_converged: bool,
    pub ode_residual: f64,
    pub ode_skipped: usize,
    pub bc_residual: f64,
    pub positivity_ok: bool,
    pub cone: String,
    pub cone_ok: bool,
}

impl Diagnostics {
    pub fn converged(&self) -> bool {
        self.fp_converged && self.reg_converged
    }
}

/// One stage of the discretized operator.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub n: u32,
    pub lo: f64,
    pub hi: f64,
    pub bc: BoundarySpec,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    kernels: [Kernel; 2],
    cross: [Option<Kernel>; 2],
    affine: bool,
    offset: [f64; 2],
    style: Regularization,
    clamp: f64,
}

/// Parts of node `i`'s cell lying left and right of the node.
fn diag_split(t: &[f64], lo: f64, hi: f64, i: usize) -> (f64, f64) {
    let left = if i == 0 { lo } else { 0.5 * (t[i - 1] + t[i]) };
    let right = if i + 1 == t.len() { hi } else { 0.5 * (t[i] + t[i + 1]) };
    (t[i] - left, right - t[i])
}

fn stage_bc(bc: BoundarySpec, n: u32) -> BoundarySpec {
    match bc {
        BoundarySpec::ThreePointTruncated { alpha, eta, .. } => BoundarySpec::ThreePointTruncated { alpha, eta, n },
        other => other,
    }
}

fn has_neumann_end(bc: &BoundarySpec) -> bool {
    matches!(
        bc,
        BoundarySpec::DirichletNeumann
            | BoundarySpec::RobinNeumann { .. }
            | BoundarySpec::TwoPointCoupledRobin { .. }
            | BoundarySpec::HalfLineDirichlet
            | BoundarySpec::HalfLineRobin { .. }
    )
}

/// Constant term `x(lo)` carried by the affine part of component `c`.
fn affine_offset(bc: &BoundarySpec, c: Component) -> f64 {
    match bc {
        BoundarySpec::TwoPointCoupledRobin { .. } => bc.robin_ratio(match c {
            Component::First => Component::Second,
            Component::Second => Component::First,
        }),
        _ => bc.robin_ratio(c),
    }
}

fn eval_weight(e: &Expr, t: f64, which: &'static str) -> Result<f64, SolverError> {
    let v = e
        .eval(&Env::new().t(t))
        .map_err(|source| SolverError::Eval { which, t, source })?;
    if v < 0.0 {
        return Err(SolverError::Invalid(format!("{which} is negative at t = {t}")));
    }
    Ok(v)
}

impl Discretization {
    /// Stage `n` on `[lo, hi]`; `hi` replaces an infinite right end.
    pub fn new(problem: &ProblemSpec, n: u32, hi: f64, n_grid: usize, grading: f64) -> Result<Self, SolverError> {
        let bc = stage_bc(problem.bc, n);
        bc.validate()?;
        let (lo, hi) = match bc {
            BoundarySpec::ThreePointTruncated { .. } => bc.domain(),
            _ => (problem.lo, hi),
        };
        let side = if problem.hi.is_infinite() {
            Side::Lower
        } else {
            Side::Both
        };
        let grid: Grid = GridSpec::new(lo, hi, n_grid, grading)
            .side(side)
            .rule(Rule::Midpoint)
            .build()?;
        let weights = grid.cell_weights();
        Self::with_nodes(problem, n, lo, hi, grid.nodes, weights)
    }

    fn with_nodes(
        problem: &ProblemSpec,
        n: u32,
        lo: f64,
        hi: f64,
        nodes: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self, SolverError> {
        let bc = stage_bc(problem.bc, n);
        let p = nodes
            .iter()
            .map(|&t| eval_weight(&problem.p, t, "p"))
            .collect::<Result<Vec<_>, _>>()?;
        let q = nodes
            .iter()
            .map(|&t| eval_weight(&problem.q, t, "q"))
            .collect::<Result<Vec<_>, _>>()?;
        let comps = [Component::First, Component::Second];
        Ok(Self {
            n,
            lo,
            hi,
            bc,
            nodes,
            weights,
            p,
            q,
            kernels: comps.map(|c| bc.own_kernel(c)),
            cross: comps.map(|c| bc.cross_kernel(c)),
            affine: problem.regularization == Regularization::RetractionBox && has_neumann_end(&bc),
            offset: comps.map(|c| affine_offset(&bc, c)),
            style: problem.regularization,
            clamp: problem.clamp.unwrap_or(1e6),
        })
    }

    /// The stage operator on the nodes of an existing solution.
    pub fn for_solution(problem: &ProblemSpec, sol: &SolutionPair) -> Result<Self, SolverError> {
        Self::with_nodes(problem, sol.n, sol.lo, sol.hi, sol.nodes.clone(), sol.weights.clone())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Arguments handed to the nonlinearity of component `c`.
    fn args(&self, c: Component, t: f64, x: f64, y: f64, dx: f64, dy: f64) -> Env {
        let h = self.h();
        let d = match c {
            Component::First => dx,
            Component::Second => dy,
        };
        match self.style {
            Regularization::None => Env::full(t, x, y, d),
            Regularization::ShiftState => Env::full(t, (x + h).max(h), (y + h).max(h), d),
            Regularization::ShiftDerivative => {
                let a1 = (t - self.lo + self.offset[0]) * h;
                let a2 = (t - self.lo + self.offset[1]) * h;
                Env::full(t, x + a1, y + a2, d.abs() + h)
            }
            Regularization::RetractionBox => {
                let theta = |v: f64| v.min(self.clamp).max(0.0);
                Env::full(t, theta(x), theta(y), d.min(self.clamp).max(h))
            }
        }
    }

    /// `p·f` and `q·g` at every node for the given state.
    pub fn sources(&self, problem: &ProblemSpec, s: &State) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
        let zf = self.source(problem, Component::First, s)?;
        let zg = self.source(problem, Component::Second, s)?;
        Ok((zf, zg))
    }

    fn source(&self, problem: &ProblemSpec, c: Component, s: &State) -> Result<Vec<f64>, SolverError> {
        let (e, w, which) = match c {
            Component::First => (&problem.f, &self.p, "f"),
            Component::Second => (&problem.g, &self.q, "g"),
        };
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let t = self.nodes[i];
            if w[i] == 0.0 {
                out.push(0.0);
                continue;
            }
            let env = self.args(c, t, s.x[i], s.y[i], s.dx[i], s.dy[i]);
            let v = e.eval(&env).map_err(|source| SolverError::Eval { which, t, source })?;
            out.push(w[i] * v);
        }
        Ok(out)
    }

    /// Adds `∫K(t,s)z(s)ds` and its `t`-derivative at every node to `val`, `der`.
    fn accumulate(&self, k: &Kernel, z: &[f64], val: &mut [f64], der: &mut [f64]) {
        let m = self.len();
        let t = &self.nodes;
        let w = &self.weights;
        // Per node s_j: left branch (s_j < t) slope/intercept, right branch likewise.
        let mut l1 = vec![0.0; m];
        let mut l0 = vec![0.0; m];
        let mut r1 = vec![0.0; m];
        let mut r0 = vec![0.0; m];
        for j in 0..m {
            let s = t[j];
            let diag = k.eval(s, s);
            let sl = k.dt_side(s, s, KSide::Left);
            let sr = k.dt_side(s, s, KSide::Right);
            let wz = w[j] * z[j];
            l1[j] = wz * sl;
            l0[j] = wz * (diag - sl * s);
            r1[j] = wz * sr;
            r0[j] = wz * (diag - sr * s);
        }
        // Right sums: Σ_{j>i}.
        let mut right = vec![(0.0, 0.0); m];
        let (mut a1, mut a0) = (0.0, 0.0);
        for i in (0..m).rev() {
            right[i] = (a1, a0);
            a1 += r1[i];
            a0 += r0[i];
        }
        let (mut b1, mut b0) = (0.0, 0.0);
        for i in 0..m {
            let (ra1, ra0) = right[i];
            let wz = w[i] * z[i];
            let slope = b1 + ra1;
            val[i] += t[i] * slope + b0 + ra0 + wz * k.eval(t[i], t[i]);
            let (wl, wr) = diag_split(t, self.lo, self.hi, i);
            der[i] +=
                slope + z[i] * (wl * k.dt_side(t[i], t[i], KSide::Left) + wr * k.dt_side(t[i], t[i], KSide::Right));
            b1 += l1[i];
            b0 += l0[i];
        }
    }

    fn component(&self, c: Component, own: &[f64], other: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.len();
        let idx = match c {
            Component::First => 0,
            Component::Second => 1,
        };
        let mut val = vec![0.0; m];
        let mut der = vec![0.0; m];
        if self.affine {
            let h = self.h();
            for i in 0..m {
                val[i] = (self.nodes[i] - self.lo + self.offset[idx]) * h;
                der[i] = h;
            }
        }
        self.accumulate(&self.kernels[idx], own, &mut val, &mut der);
        if let Some(k) = &self.cross[idx] {
            self.accumulate(k, other, &mut val, &mut der);
        }
        (val, der)
    }

    /// One application of the stage operator: the `y` equation is updated
    /// first and its result feeds the `x` equation.
    pub fn apply(&self, problem: &ProblemSpec, s: &State) -> Result<State, SolverError> {
        let (zf, zg) = self.sources(problem, s)?;
        let (y, dy) = self.component(Component::Second, &zg, &zf);
        let mid = State {
            x: s.x.clone(),
            dx: s.dx.clone(),
            y,
            dy,
        };
        let zf = self.source(problem, Component::First, &mid)?;
        let (x, dx) = self.component(Component::First, &zf, &zg);
        Ok(State {
            x,
            dx,
            y: mid.y,
            dy: mid.dy,
        })
    }

    fn initial(&self, init: &Init) -> State {
        let m = self.len();
        let ramp = |r: f64| {
            let len = self.hi - self.lo;
            let x: Vec<f64> = self.nodes.iter().map(|&t| r * (t - self.lo) / len).collect();
            State {
                y: x.clone(),
                x,
                dx: vec![r / len; m],
                dy: vec![r / len; m],
            }
        };
        match init {
            Init::Zero => State::zeros(m),
            Init::AffineRamp => ramp(0.1),
            Init::Ramp(r) => ramp(*r),
            Init::Supplied(sol) => {
                let mut s = State::zeros(m);
                for (i, &t) in self.nodes.iter().enumerate() {
                    let (x, y, dx, dy) = sol.eval(t);
                    s.x[i] = x;
                    s.y[i] = y;
                    s.dx[i] = dx;
                    s.dy[i] = dy;
                }
                s
            }
        }
    }
}

/// Converged (or best) state of a stage with the data needed to evaluate its
/// Nyström interpolant anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPair {
    pub n: u32,
    pub lo: f64,
    pub hi: f64,
    pub bc: BoundarySpec,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    /// `p·f` and `q·g` evaluated at the state the interpolant is built from.
    pub zf: Vec<f64>,
    pub zg: Vec<f64>,
    pub affine: bool,
    pub offset: [f64; 2],
    pub diagnostics: Diagnostics,
}

impl SolutionPair {
    /// `(x, y, x', y')` at `t`, extended by constants outside `[lo, hi]`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64, f64) {
        if t < self.lo {
            let (x, y, _, _) = self.eval(self.lo);
            return (x, y, 0.0, 0.0);
        }
        if t > self.hi {
            let (x, y, _, _) = self.eval(self.hi);
            return (x, y, 0.0, 0.0);
        }
        let h = 1.0 / self.n as f64;
        let comp = |c: Component, own: &[f64], other: &[f64], idx: usize| -> (f64, f64) {
            let (mut v, mut d) = if self.affine {
                ((t - self.lo + self.offset[idx]) * h, h)
            } else {
                (0.0, 0.0)
            };
            let k = self.bc.own_kernel(c);
            let cross = self.bc.cross_kernel(c);
            for j in 0..self.nodes.len() {
                let s = self.nodes[j];
                let w = self.weights[j];
                v += w * k.eval(t, s) * own[j];
                d += if t == s {
                    let (wl, wr) = diag_split(&self.nodes, self.lo, self.hi, j);
                    (wl * k.dt_side(t, s, KSide::Left) + wr * k.dt_side(t, s, KSide::Right)) * own[j]
                } else {
                    w * k.dt_mean(t, s) * own[j]
                };
                if let Some(ck) = &cross {
                    v += w * ck.eval(t, s) * other[j];
                    d += w * ck.dt_mean(t, s) * other[j];
                }
            }
            (v, d)
        };
        let (x, dx) = comp(Component::First, &self.zf, &self.zg, 0);
        let (y, dy) = comp(Component::Second, &self.zg, &self.zf, 1);
        (x, y, dx, dy)
    }

    pub fn state(&self) -> State {
        State {
            x: self.x.clone(),
            y: self.y.clone(),
            dx: self.dx.clone(),
            dy: self.dy.clone(),
        }
    }

    /// Sup norm of `x` and `y` over the nodes and both ends.
    pub fn norms(&self) -> (f64, f64) {
        let (xl, yl, _, _) = self.eval(self.lo);
        let (xh, yh, _, _) = self.eval(self.hi);
        let nx = self.x.iter().fold(xl.abs().max(xh.abs()), |m, v| m.max(v.abs()));
        let ny = self.y.iter().fold(yl.abs().max(yh.abs()), |m, v| m.max(v.abs()));
        (nx, ny)
    }
}

/// `Tₙ` applied to `state` on stage `disc`.
pub fn apply_t(problem: &ProblemSpec, disc: &Discretization, state: &State) -> Result<State, SolverError> {
    disc.apply(problem, state)
}

fn package(problem: &ProblemSpec, disc: &Discretization, s: State) -> Result<SolutionPair, SolverError> {
    let (zf, zg) = disc.sources(problem, &s)?;
    Ok(SolutionPair {
        n: disc.n,
        lo: disc.lo,
        hi: disc.hi,
        bc: disc.bc,
        nodes: disc.nodes.clone(),
        weights: disc.weights.clone(),
        x: s.x,
        y: s.y,
        dx: s.dx,
        dy: s.dy,
        zf,
        zg,
        affine: disc.affine,
        offset: disc.offset,
        diagnostics: Diagnostics::default(),
    })
}

/// Damped Picard iteration `s ← (1-ω)s + ωT(s)` on one stage.
///
/// When the update grows, ω is halved (down to `omega/64`) and restored
/// gradually once progress resumes, which settles the mild oscillations of
/// decreasing nonlinearities such as `1/y` without slowing monotone problems.
pub fn fixed_point(
    problem: &ProblemSpec,
    disc: &Discretization,
    init: &Init,
    opts: &SolverOptions,
) -> Result<SolutionPair, SolverError> {
    let mut s = disc.initial(init);
    let mut omega = opts.omega;
    let mut prev_r = f64::INFINITY;
    let mut best: Option<(f64, State)> = None;
    let mut status = FpStatus::MaxIter;
    let mut iterations = 0;
    let mut last_r = f64::INFINITY;
    for it in 1..=opts.max_iter {
        iterations = it;
        let ts = disc.apply(problem, &s)?;
        let r = s.sup_distance(&ts);
        last_r = r;
        if !ts.is_finite() || ts.sup_norm() > opts.cap {
            status = FpStatus::Diverged;
            break;
        }
        if best.as_ref().is_none_or(|(br, _)| r < *br) {
            best = Some((r, s.clone()));
        }
        if r <= opts.tol_fp {
            status = FpStatus::Converged;
            s = ts;
            break;
        }
        if r > prev_r {
            omega = (omega * 0.5).max(opts.omega / 64.0);
        } else {
            omega = (omega * 1.1).min(opts.omega);
        }
        prev_r = r;
        for (a, b) in [
            (&mut s.x, &ts.x),
            (&mut s.y, &ts.y),
            (&mut s.dx, &ts.dx),
            (&mut s.dy, &ts.dy),
        ] {
            for (ai, bi) in a.iter_mut().zip(b) {
                *ai = (1.0 - omega) * *ai + omega * bi;
            }
        }
    }
    let fp_residual = if status == FpStatus::Converged {
        last_r
    } else {
        let (br, bs) = best.unwrap_or((last_r, s.clone()));
        s = bs;
        br
    };
    let mut sol = package(problem, disc, s)?;
    sol.diagnostics.n_final = disc.n;
    sol.diagnostics.fp_residual = fp_residual;
    sol.diagnostics.fp_converged = status == FpStatus::Converged;
    sol.diagnostics.stages.push(StageRecord {
        n: disc.n,
        iterations,
        fp_residual,
        status,
        omega,
        norm: sol.state().sup_norm(),
        diff_prev: None,
    });
    Ok(sol)
}

/// Right end used for a stage: the problem's own, or `m` for half-line stages.
fn finite_hi(problem: &ProblemSpec) -> Result<f64, SolverError> {
    if problem.hi.is_finite() {
        Ok(problem.hi)
    } else {
        Err(SolverError::Invalid(
            "half-line problems are solved through the halfline module".into(),
        ))
    }
}

/// Sup distance in `(x, y)` between `new` and `old` at the nodes of `new`,
/// reading `old` through its constant-extended interpolant.
pub fn stage_distance(new: &SolutionPair, old: &SolutionPair) -> f64 {
    new.nodes
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (x, y, _, _) = old.eval(t);
            (new.x[i] - x).abs().max((new.y[i] - y).abs())
        })
        .fold(0.0, f64::max)
}

/// Continuation over `n = n₀, ⌈growth·n₀⌉, …` with warm starts.
pub fn solve_regularized(problem: &ProblemSpec, opts: &SolverOptions) -> Result<SolutionPair, SolverError> {
    let hi = finite_hi(problem)?;
    solve_stages(problem, hi, opts)
}

pub(crate) fn solve_stages(problem: &ProblemSpec, hi: f64, opts: &SolverOptions) -> Result<SolutionPair, SolverError> {
    problem.validate()?;
    if !(opts.n_growth > 1.0) {
        return Err(SolverError::Invalid(format!(
            "n_growth must exceed 1, got {}",
            opts.n_growth
        )));
    }
    let mut n = opts.n0.unwrap_or_else(|| problem.default_n0());
    let mut records = Vec::new();
    let mut prev: Option<SolutionPair> = None;
    let reg_converged;
    loop {
        let disc = Discretization::new(problem, n, hi, opts.n_grid, opts.grading)?;
        let init = match &prev {
            Some(p) => Init::Supplied(Box::new(p.clone())),
            None => opts.init.clone(),
        };
        let mut sol = fixed_point(problem, &disc, &init, opts)?;
        let mut rec = sol.diagnostics.stages.pop().expect("stage record");
        if let Some(p) = &prev {
            rec.diff_prev = Some(stage_distance(&sol, p));
        }
        let fp_ok = rec.status == FpStatus::Converged;
        let cauchy = rec.diff_prev.is_some_and(|d| d < opts.tol_reg);
        records.push(rec);
        let done = !fp_ok || cauchy || !problem.depends_on_n() || n >= opts.n_max;
        if done {
            reg_converged = fp_ok && (cauchy || !problem.depends_on_n());
            sol.diagnostics.stages = records;
            sol.diagnostics.reg_converged = reg_converged;
            let report = residual(problem, &sol)?;
            report.apply(&mut sol.diagnostics);
            let cone = problem.default_cone();
            sol.diagnostics.cone = cone.to_string();
            sol.diagnostics.cone_ok = verify_cone(&sol, cone).ok;
            return Ok(sol);
        }
        prev = Some(sol);
        n = ((n as f64 * opts.n_growth).ceil() as u32).min(opts.n_max);
    }
}

/// Residual checks of a computed pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub ode_residual: f64,
    /// Interior nodes whose rounding floor for the second difference exceeds
    /// the checked tolerance.
    pub ode_skipped: usize,
    pub bc_residual: f64,
    pub positivity_ok: bool,
    /// Largest second difference over checked nodes (concavity when ≤ 0).
    pub max_d2: f64,
    /// Smallest `x'` and `y'` over the nodes.
    pub min_dx: f64,
    pub min_dy: f64,
}

impl ResidualReport {
    fn apply(&self, d: &mut Diagnostics) {
        d.ode_residual = self.ode_residual;
        d.ode_skipped = self.ode_skipped;
        d.bc_residual = self.bc_residual;
        d.positivity_ok = self.positivity_ok;
    }
}

/// Relative residual level below which nodes are always checked.
const ODE_FLOOR: f64 = 1e-6;

/// ODE, boundary and positivity checks. The second difference at nodes
/// where rounding alone exceeds [`ODE_FLOOR`] is skipped and counted; that
/// happens only next to strongly graded endpoints.
pub fn residual(problem: &ProblemSpec, sol: &SolutionPair) -> Result<ResidualReport, SolverError> {
    let m = sol.nodes.len();
    if m < 7 {
        return Err(SolverError::GridTooSmall(m.saturating_sub(2)));
    }
    // Sources at the reported state, not the ones the interpolant was built from.
    let (zf, zg) = Discretization::for_solution(problem, sol)?.sources(problem, &sol.state())?;
    let t = &sol.nodes;
    let eps = f64::EPSILON;
    let mut ode: f64 = 0.0;
    let mut skipped = 0;
    let mut max_d2 = f64::NEG_INFINITY;
    for (vals, z) in [(&sol.x, &zf), (&sol.y, &zg)] {
        let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 1..m - 1 {
            let hm = t[i] - t[i - 1];
            let hp = t[i + 1] - t[i];
            let d2 = 2.0 * ((vals[i + 1] - vals[i]) / hp - (vals[i] - vals[i - 1]) / hm) / (hm + hp);
            let floor = 16.0 * eps * scale / (hm * hp);
            if floor > ODE_FLOOR * (1.0 + z[i].abs()) {
                skipped += 1;
                continue;
            }
            max_d2 = max_d2.max(d2);
            ode = ode.max((d2 + z[i]).abs() / (1.0 + z[i].abs()));
        }
    }
    let positivity_ok = sol.x.iter().chain(&sol.y).all(|&v| v > 0.0);
    let min_dx = sol.dx.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_dy = sol.dy.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ResidualReport {
        ode_residual: ode,
        ode_skipped: skipped,
        bc_residual: bc_residual(sol),
        positivity_ok,
        max_d2,
        min_dx,
        min_dy,
    })
}

/// Largest absolute defect in the boundary conditions of the stage.
pub fn bc_residual(sol: &SolutionPair) -> f64 {
    let (x0, y0, dx0, dy0) = sol.eval(sol.lo);
    let (x1, y1, dx1, dy1) = sol.eval(sol.hi);
    let slope = if sol.affine { 1.0 / sol.n as f64 } else { 0.0 };
    let defects: Vec<f64> = match sol.bc {
        BoundarySpec::ThreePoint { alpha, eta } | BoundarySpec::ThreePointTruncated { alpha, eta, .. } => {
            let (xe, ye, _, _) = sol.eval(eta);
            vec![x0, y0, x1 - alpha * xe, y1 - alpha * ye]
        }
        BoundarySpec::FourPointCoupled { alpha, beta, xi, eta } => {
            let (_, yx, _, _) = sol.eval(xi);
            let (xe, _, _, _) = sol.eval(eta);
            vec![x0, y0, x1 - alpha * yx, y1 - beta * xe]
        }
        BoundarySpec::DirichletNeumann | BoundarySpec::HalfLineDirichlet => {
            vec![x0, y0, dx1 - slope, dy1 - slope]
        }
        BoundarySpec::RobinNeumann { a1, b1, a2, b2 } | BoundarySpec::HalfLineRobin { a1, b1, a2, b2 } => {
            vec![a1 * x0 - b1 * dx0, a2 * y0 - b2 * dy0, dx1 - slope, dy1 - slope]
        }
        BoundarySpec::TwoPointCoupledRobin { a1, b1, a2, b2 } => {
            vec![a1 * y0 - b1 * dx0, a2 * x0 - b2 * dy0, dx1 - slope, dy1 - slope]
        }
        BoundarySpec::DirichletDirichlet => vec![x0, y0, x1, y1],
    };
    defects.into_iter().fold(0.0, |m, d| m.max(d.abs()))
}

/// Cones of the positivity arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// `x(t) ≥ ((t - lo)/(hi - lo))‖x‖`.
    T,
    /// `x(t) ≥ t(1-t)γ‖x‖` with `γ = min{1,α}min{η,1-η}/max{1,α}`.
    TGamma,
    /// `min over [max{ξ,η}, 1]` of `x ≥ γ‖x‖`.
    FourPoint,
    /// `x ≥ γᵢ‖x‖` with `γᵢ = bᵢ/(aᵢL+bᵢ)` on an interval of length `L`, and
    /// `x(0) ≥ (bᵢ/aᵢ)‖x'‖`.
    Robin,
    /// `x(0) ≥ (b₂/a₂)‖y'‖`, `y(0) ≥ (b₁/a₁)‖x'‖`, both positive.
    CoupledRobin,
    /// Nonnegative and concave.
    Concave,
}

impl fmt::Display for Cone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cone::T => "t",
            Cone::TGamma => "t(1-t)gamma",
            Cone::FourPoint => "four-point",
            Cone::Robin => "robin",
            Cone::CoupledRobin => "coupled-robin",
            Cone::Concave => "concave",
        })
    }
}

impl FromStr for Cone {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "t" => Ok(Cone::T),
            "t(1-t)gamma" | "t(1−t)γ" => Ok(Cone::TGamma),
            "four-point" => Ok(Cone::FourPoint),
            "robin" => Ok(Cone::Robin),
            "coupled-robin" => Ok(Cone::CoupledRobin),
            "concave" => Ok(Cone::Concave),
            _ => Err(SolverError::UnknownCone(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeCheck {
    pub ok: bool,
    /// Smallest slack over all cone inequalities (negative when violated).
    pub worst: f64,
    pub at: f64,
}

/// Checks the discrete cone inequalities with slack `-1e-9·max(1, ‖x‖)`.
pub fn verify_cone(sol: &SolutionPair, cone: Cone) -> ConeCheck {
    let (nx, ny) = sol.norms();
    let mut worst = (f64::INFINITY, sol.lo);
    let mut note = |slack: f64, at: f64| {
        if slack < worst.0 {
            worst = (slack, at);
        }
    };
    let len = sol.hi - sol.lo;
    let scale = 1.0f64.max(nx).max(ny);
    match cone {
        Cone::T => {
            for (i, &t) in sol.nodes.iter().enumerate() {
                let w = (t - sol.lo) / len;
                note(sol.x[i] - w * nx, t);
                note(sol.y[i] - w * ny, t);
            }
        }
        Cone::TGamma => {
            let (alpha, eta) = match sol.bc {
                BoundarySpec::ThreePoint { alpha, eta } | BoundarySpec::ThreePointTruncated { alpha, eta, .. } => {
                    (alpha, eta)
                }
                _ => (1.0, 0.5),
            };
            let gamma = alpha.min(1.0) * eta.min(1.0 - eta) / alpha.max(1.0);
            for (i, &t) in sol.nodes.iter().enumerate() {
                let w = t * (1.0 - t) * gamma;
                note(sol.x[i] - w * nx, t);
                note(sol.y[i] - w * ny, t);
            }
        }
        Cone::FourPoint => {
            let (gamma, start) = match sol.bc {
                BoundarySpec::FourPointCoupled { alpha, beta, xi, eta } => {
                    let top = [1.0, alpha, beta, alpha * beta * xi, alpha * beta * eta]
                        .into_iter()
                        .fold(f64::MIN, f64::max);
                    let low = [1.0, alpha * xi, alpha * beta * xi, beta * eta, alpha * beta * eta]
                        .into_iter()
                        .fold(f64::MAX, f64::min);
                    let gap = [xi, eta, 1.0 - xi, 1.0 - eta].into_iter().fold(f64::MAX, f64::min);
                    (low * gap / top, xi.max(eta))
                }
                _ => (0.0, sol.lo),
            };
            for (i, &t) in sol.nodes.iter().enumerate() {
                if t >= start {
                    note(sol.x[i] - gamma * nx, t);
                    note(sol.y[i] - gamma * ny, t);
                }
            }
            let (x1, y1, _, _) = sol.eval(sol.hi);
            note(x1 - gamma * nx, sol.hi);
            note(y1 - gamma * ny, sol.hi);
        }
        Cone::Robin => {
            let (r1, r2) = (
                sol.bc.robin_ratio(Component::First),
                sol.bc.robin_ratio(Component::Second),
            );
            // On `[lo, lo + L]` concavity and `x(lo) = r·x'(lo)` give `x ≥ r/(L + r)‖x‖`.
            let (g1, g2) = (r1 / (len + r1), r2 / (len + r2));
            for (i, &t) in sol.nodes.iter().enumerate() {
                note(sol.x[i] - g1 * nx, t);
                note(sol.y[i] - g2 * ny, t);
            }
            let (x0, y0, dx0, dy0) = sol.eval(sol.lo);
            let ndx = sol.dx.iter().fold(dx0.abs(), |m, v| m.max(v.abs()));
            let ndy = sol.dy.iter().fold(dy0.abs(), |m, v| m.max(v.abs()));
            note(x0 - r1 * ndx, sol.lo);
            note(y0 - r2 * ndy, sol.lo);
        }
        Cone::CoupledRobin => {
            let (r1, r2) = (
                sol.bc.robin_ratio(Component::First),
                sol.bc.robin_ratio(Component::Second),
            );
            let (x0, y0, dx0, dy0) = sol.eval(sol.lo);
            let ndx = sol.dx.iter().fold(dx0.abs(), |m, v| m.max(v.abs()));
            let ndy = sol.dy.iter().fold(dy0.abs(), |m, v| m.max(v.abs()));
            note(x0 - r2 * ndy, sol.lo);
            note(y0 - r1 * ndx, sol.lo);
            for (i, &t) in sol.nodes.iter().enumerate() {
                note(sol.x[i], t);
                note(sol.y[i], t);
            }
        }
        Cone::Concave => {
            for (i, &t) in sol.nodes.iter().enumerate() {
                note(sol.x[i], t);
                note(sol.y[i], t);
            }
            // Concavity through the derivative arrays: x' nonincreasing.
            for k in 1..sol.nodes.len() {
                let at = sol.nodes[k];
                note(sol.dx[k - 1] - sol.dx[k], at);
                note(sol.dy[k - 1] - sol.dy[k], at);
            }
        }
    }
    let ok = worst.0 >= -1e-9 * scale;
    ConeCheck {
        ok,
        worst: worst.0,
        at: worst.1,
    }
}

/// Runs the continuation from the zero state and from a ramp of height
/// `r_star`, keeping the converged results that differ by more than `1e-3`.
pub fn solve_multi(problem: &ProblemSpec, opts: &SolverOptions, r_star: f64) -> Result<Vec<SolutionPair>, SolverError> {
    let mut found: Vec<SolutionPair> = Vec::new();
    for init in [Init::Zero, Init::Ramp(r_star)] {
        let o = SolverOptions { init, ..opts.clone() };
        let sol = match solve_regularized(problem, &o) {
            Ok(s) => s,
            Err(SolverError::Eval { .. }) => continue,
            Err(e) => return Err(e),
        };
        if !sol.diagnostics.converged() {
            continue;
        }
        let distinct = found.iter().all(|f| stage_distance(&sol, f) > 1e-3);
        if distinct {
            found.push(sol);
        }
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn problem(bc: BoundarySpec, f: &str, g: &str) -> ProblemSpec {
        ProblemSpec {
            lo: 0.0,
            hi: 1.0,
            bc,
            p: Expr::Const(1.0),
            q: Expr::Const(1.0),
            f: parse(f).unwrap(),
            g: parse(g).unwrap(),
            regularization: Regularization::None,
            singular: Singularity::default(),
            clamp: None,
        }
    }

    #[test]
    fn constant_source_dirichlet_neumann() {
        let pr = problem(BoundarySpec::DirichletNeumann, "1", "1");
        let disc = Discretization::new(&pr, 4, 1.0, 512, 4.0).unwrap();
        let s = disc.apply(&pr, &State::zeros(disc.len())).unwrap();
        for (i, &t) in disc.nodes.iter().enumerate() {
            assert!((s.x[i] - (t - t * t / 2.0)).abs() < 1e-6);
            assert!((s.dx[i] - (1.0 - t)).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_source_three_point() {
        let pr = problem(
            BoundarySpec::ThreePoint {
                alpha: 2.0,
                eta: 1.0 / 3.0,
            },
            "1",
            "1",
        );
        let disc = Discretization::new(&pr, 4, 1.0, 512, 4.0).unwrap();
        let s = disc.apply(&pr, &State::zeros(disc.len())).unwrap();
        for (i, &t) in disc.nodes.iter().enumerate() {
            assert!(
                (s.x[i] - (7.0 * t / 6.0 - t * t / 2.0)).abs() < 1e-5,
                "t={t} {}",
                s.x[i]
            );
        }
        let opts = SolverOptions {
            omega: 1.0,
            ..SolverOptions::default()
        };
        let sol = fixed_point(&pr, &disc, &Init::Zero, &opts).unwrap();
        assert!(sol.diagnostics.stages[0].iterations <= 2);
        let (x, _, _, _) = sol.eval(0.5);
        assert!((x - 11.0 / 24.0).abs() < 1e-5);
        assert!(bc_residual(&sol) < 1e-12);
    }

    #[test]
    fn zero_problem() {
        let pr = problem(BoundarySpec::DirichletNeumann, "0", "0");
        let sol = solve_regularized(&pr, &SolverOptions::default()).unwrap();
        assert!(sol.diagnostics.converged());
        assert_eq!(sol.diagnostics.stages.len(), 1);
        assert!(sol.x.iter().all(|&v| v == 0.0));
        let r = residual(&pr, &sol).unwrap();
        assert_eq!(r.ode_residual, 0.0);
        assert_eq!(r.bc_residual, 0.0);
    }

    #[test]
    fn missing_regularization_is_reported() {
        let mut pr = problem(BoundarySpec::DirichletNeumann, "d^(-0.5)", "1");
        pr.singular.d = true;
        let err = solve_regularized(&pr, &SolverOptions::default()).unwrap_err();
        assert_eq!(err, SolverError::Unregularized("d"));
    }

    #[test]
    fn cone_ids() {
        assert_eq!("t".parse::<Cone>().unwrap(), Cone::T);
        assert_eq!("t(1−t)γ".parse::<Cone>().unwrap(), Cone::TGamma);
        assert!(matches!("w".parse::<Cone>(), Err(SolverError::UnknownCone(_))));
    }
}
