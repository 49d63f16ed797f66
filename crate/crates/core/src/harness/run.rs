//! Executing a configured or registered problem: optional hypothesis audit,
//! then the solve, then the artifacts.

use super::config::{ConfigError, OutputConfig, RunConfig, SolverConfig};
use super::output::{self, CheckDocument, HalfLineSummary, ProblemSummary, SolveDocument};
use super::registry::ExampleRecord;
use crate::halfline::{diagonalize, HalfLineError};
use crate::hypotheses::{audit, HypothesisReport, HypothesisSpec, Verdict};
use crate::solver::{solve_regularized, ProblemSpec, SolverError};
use std::path::PathBuf;
use thiserror::Error;

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    HalfLine(#[from] HalfLineError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        fn solver(e: &SolverError) -> i32 {
            match e {
                SolverError::Invalid(_)
                | SolverError::Kernel(_)
                | SolverError::Unregularized(_)
                | SolverError::UnknownCone(_) => EXIT_CONFIG,
                SolverError::Quad(_) | SolverError::Eval { .. } | SolverError::GridTooSmall(_) => EXIT_NUMERIC,
            }
        }
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Solver(e) | RunError::HalfLine(HalfLineError::Solver(e)) => solver(e),
            RunError::HalfLine(_) => EXIT_CONFIG,
            RunError::Io { .. } => EXIT_NUMERIC,
        }
    }
}

/// A fully resolved run.
#[derive(Debug, Clone)]
pub struct Job {
    pub name: String,
    pub problem: ProblemSpec,
    pub solver: SolverConfig,
    pub hypotheses: Vec<HypothesisSpec>,
    pub output: OutputConfig,
}

impl Job {
    pub fn from_config(name: &str, cfg: &RunConfig) -> Self {
        Job {
            name: name.to_string(),
            problem: cfg.problem.to_spec(),
            solver: cfg.solver.clone(),
            hypotheses: cfg.hypotheses.clone(),
            output: cfg.output.clone(),
        }
    }

    pub fn from_record(rec: &ExampleRecord) -> Self {
        Job {
            name: rec.id.to_string(),
            problem: rec.problem.clone(),
            solver: SolverConfig::default(),
            hypotheses: rec.hypotheses.clone(),
            output: OutputConfig::default(),
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if key.starts_with("output.") {
            self.output.set(key, value)
        } else {
            self.solver.set(key, value)
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub converged: bool,
    pub reports: Vec<HypothesisReport>,
    pub written: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.converged {
            EXIT_CONVERGED
        } else {
            EXIT_NOT_CONVERGED
        }
    }
}

pub fn audit_all(specs: &[HypothesisSpec]) -> Vec<HypothesisReport> {
    specs.iter().map(audit).collect()
}

fn io_err(path: PathBuf) -> impl FnOnce(std::io::Error) -> RunError {
    move |source| RunError::Io { path, source }
}

/// Audits the hypotheses, solves, and writes the solution. A solve that
/// stops short of convergence still writes its artifacts.
pub fn solve(job: &Job) -> Result<RunOutcome, RunError> {
    job.problem.validate()?;
    let reports = audit_all(&job.hypotheses);
    let opts = job.solver.options();
    let (solution, half_line) = if job.problem.hi.is_infinite() {
        let h = diagonalize(&job.problem, &job.solver.schedule(), &opts)?;
        let summary = HalfLineSummary {
            converged: h.converged,
            m_final: h.m_final,
            windows: h.windows,
        };
        (h.solution, Some(summary))
    } else {
        (solve_regularized(&job.problem, &opts)?, None)
    };
    let converged = match &half_line {
        Some(h) => h.converged && solution.diagnostics.converged(),
        None => solution.diagnostics.converged(),
    };
    let doc = SolveDocument {
        name: job.name.clone(),
        converged,
        problem: ProblemSummary::new(&job.problem),
        t: solution.nodes.clone(),
        x: solution.x.clone(),
        y: solution.y.clone(),
        dx: solution.dx.clone(),
        dy: solution.dy.clone(),
        diagnostics: solution.diagnostics.clone(),
        half_line,
        hypotheses: reports.clone(),
    };
    let target = output::resolve_path(&job.output, &job.name, "");
    let written = output::write_solve(&doc, &solution, &job.output).map_err(io_err(target))?;
    Ok(RunOutcome {
        converged,
        reports,
        written,
    })
}

/// Audits the hypotheses only and writes the report as JSON.
pub fn check(job: &Job) -> Result<RunOutcome, RunError> {
    let reports = audit_all(&job.hypotheses);
    let doc = CheckDocument {
        name: job.name.clone(),
        all_hold: reports.iter().all(|r| r.holds == Verdict::Holds),
        hypotheses: reports.clone(),
    };
    let mut out = job.output.clone();
    out.format = super::config::OutputFormat::Json;
    let path = out
        .path
        .clone()
        .unwrap_or_else(|| output::resolve_path(&out, &job.name, ".hypotheses"));
    output::write_atomic(&path, &output::json_bytes(&doc)).map_err(io_err(path.clone()))?;
    Ok(RunOutcome {
        converged: doc.all_hold,
        reports,
        written: vec![path],
    })
}
