//! Half-line problems by diagonalization over growing windows `[0, m]`.
//!
//! Each window is a finite problem with a Neumann end `x'(m) = 1/n`, solved
//! by the regular continuation in `n`. Because that end condition pins the
//! derivative at `m` on its own window, the decay of `x'` is read on the
//! next, larger window at the previous end point.

use crate::solver::{solve_stages, Init, ProblemSpec, SolutionPair, SolverError, SolverOptions};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HalfLineError {
    #[error("window sequence must be positive and strictly increasing, got {0:?}")]
    Schedule(Vec<f64>),
    #[error("tolerance {name} must be positive, got {value}")]
    Tolerance { name: &'static str, value: f64 },
    #[error("problem is posed on [{lo}, {hi}], not on a half-line")]
    NotHalfLine { lo: f64, hi: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineSchedule {
    pub m: Vec<f64>,
    /// Bound on `|x'| + |y'|` at the end of the accepted window.
    pub tol_tail: f64,
    /// Bound on the sup difference of consecutive windows on `[0, m_prev/2]`.
    pub tol_compact: f64,
}

impl HalfLineSchedule {
    /// `m = 1, 2, 4, …` up to and including `m_max`.
    pub fn doubling(m_max: f64, tol_tail: f64, tol_compact: f64) -> Self {
        let mut m = vec![1.0];
        while m[m.len() - 1] * 2.0 <= m_max {
            m.push(m[m.len() - 1] * 2.0);
        }
        Self {
            m,
            tol_tail,
            tol_compact,
        }
    }

    pub fn validate(&self) -> Result<(), HalfLineError> {
        let ordered = self.m.windows(2).all(|w| w[1] > w[0]);
        if self.m.is_empty() || !ordered || !(self.m[0] > 0.0) || self.m.iter().any(|v| !v.is_finite()) {
            return Err(HalfLineError::Schedule(self.m.clone()));
        }
        for (name, value) in [("tol_tail", self.tol_tail), ("tol_compact", self.tol_compact)] {
            if !(value > 0.0) {
                return Err(HalfLineError::Tolerance { name, value });
            }
        }
        Ok(())
    }
}

impl Default for HalfLineSchedule {
    fn default() -> Self {
        Self::doubling(64.0, 1e-4, 1e-5)
    }
}

/// One window of the diagonal sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowRecord {
    pub m: f64,
    pub n_final: u32,
    pub converged: bool,
    /// `|x'(m')| + |y'(m')|` at the previous window end `m'`, read on this window.
    pub tail: Option<f64>,
    /// Sup difference to the previous window on `[0, m'/2]`.
    pub compact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfLineSolution {
    pub solution: SolutionPair,
    pub windows: Vec<WindowRecord>,
    /// Tail and compact-agreement tolerances met before the schedule ran out.
    pub converged: bool,
    /// Window end where the tail criterion was met.
    pub m_final: Option<f64>,
}

fn ensure_half_line(problem: &ProblemSpec) -> Result<(), HalfLineError> {
    if problem.hi.is_finite() || !problem.bc.is_half_line() {
        return Err(HalfLineError::NotHalfLine {
            lo: problem.lo,
            hi: problem.hi,
        });
    }
    Ok(())
}

/// The regularized problem on `[0, m]` with `x'(m) = 1/n`.
pub fn solve_truncated(problem: &ProblemSpec, m: f64, opts: &SolverOptions) -> Result<SolutionPair, HalfLineError> {
    ensure_half_line(problem)?;
    if !(m > problem.lo && m.is_finite()) {
        return Err(HalfLineError::Schedule(vec![m]));
    }
    Ok(solve_stages(problem, m, opts)?)
}

/// Sup distance in `(x, y)` on `[lo, upto]` between two windows, sampled at
/// the nodes of `new`.
pub fn window_distance(new: &SolutionPair, old: &SolutionPair, upto: f64) -> f64 {
    new.nodes
        .iter()
        .enumerate()
        .filter(|(_, &t)| t <= upto)
        .map(|(i, &t)| {
            let (x, y, _, _) = old.eval(t);
            (new.x[i] - x).abs().max((new.y[i] - y).abs())
        })
        .fold(0.0, f64::max)
}

/// Solves the windows of `schedule` in order, warm-starting each from the
/// constant extension of the previous one, until the tail and compact checks
/// pass. Running out of windows is reported through `converged = false`.
pub fn diagonalize(
    problem: &ProblemSpec,
    schedule: &HalfLineSchedule,
    opts: &SolverOptions,
) -> Result<HalfLineSolution, HalfLineError> {
    ensure_half_line(problem)?;
    schedule.validate()?;
    let mut windows: Vec<WindowRecord> = Vec::new();
    let mut prev: Option<(f64, SolutionPair)> = None;
    for &m in &schedule.m {
        let mut stage_opts = opts.clone();
        if let Some((_, p)) = &prev {
            stage_opts.init = Init::Supplied(Box::new(p.clone()));
        }
        let sol = solve_stages(problem, m, &stage_opts)?;
        let stage_ok = sol.diagnostics.converged();
        let (tail, compact) = match &prev {
            Some((mp, p)) => {
                let (_, _, dx, dy) = sol.eval(*mp);
                (Some(dx.abs() + dy.abs()), Some(window_distance(&sol, p, mp / 2.0)))
            }
            None => (None, None),
        };
        windows.push(WindowRecord {
            m,
            n_final: sol.diagnostics.n_final,
            converged: stage_ok,
            tail,
            compact,
        });
        let done = stage_ok
            && tail.is_some_and(|v| v < schedule.tol_tail)
            && compact.is_some_and(|v| v < schedule.tol_compact);
        if done {
            let m_final = prev.as_ref().map(|(mp, _)| *mp);
            return Ok(HalfLineSolution {
                solution: sol,
                windows,
                converged: true,
                m_final,
            });
        }
        prev = Some((m, sol));
    }
    let (_, solution) = prev.expect("schedule is nonempty");
    Ok(HalfLineSolution {
        solution,
        windows,
        converged: false,
        m_final: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::kernels::BoundarySpec;
    use crate::solver::{Regularization, Singularity};

    fn problem(p: &str, f: &str) -> ProblemSpec {
        ProblemSpec {
            lo: 0.0,
            hi: f64::INFINITY,
            bc: BoundarySpec::HalfLineDirichlet,
            p: parse(p).unwrap(),
            q: parse(p).unwrap(),
            f: parse(f).unwrap(),
            g: parse(f).unwrap(),
            regularization: Regularization::RetractionBox,
            singular: Singularity::default(),
            clamp: Some(1.0),
        }
    }

    #[test]
    fn schedule_doubles_to_m_max() {
        let s = HalfLineSchedule::default();
        assert_eq!(s.m, vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]);
        assert!(s.validate().is_ok());
        let bad = HalfLineSchedule {
            m: vec![2.0, 1.0],
            ..HalfLineSchedule::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_nonlinearity_gives_regularization_ramp() {
        let pr = problem("exp(-t)", "0");
        let sol = solve_truncated(&pr, 4.0, &SolverOptions::default()).unwrap();
        let h = 1.0 / sol.n as f64;
        for (i, &t) in sol.nodes.iter().enumerate() {
            assert!((sol.x[i] - t * h).abs() < 1e-15);
            assert!((sol.dx[i] - h).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_finite_problems() {
        let mut pr = problem("1", "0");
        pr.hi = 1.0;
        pr.bc = BoundarySpec::DirichletNeumann;
        assert!(matches!(
            solve_truncated(&pr, 4.0, &SolverOptions::default()),
            Err(HalfLineError::NotHalfLine { .. })
        ));
    }
}
