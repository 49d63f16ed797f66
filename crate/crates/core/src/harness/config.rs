//! Run configuration: a TOML file with `problem`, `solver`, `hypotheses` and
//! `output` sections.

use crate::expr::{parse, Expr, ParseError};
use crate::halfline::HalfLineSchedule;
use crate::hypotheses::HypothesisSpec;
use crate::kernels::{truncation_n0, BoundarySpec, KernelError};
use crate::solver::{ProblemSpec, Regularization, Singularity, SolverError, SolverOptions};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(String),
    #[error("{path}: {message}")]
    Field { path: String, message: String },
    #[error("{path}: {source}")]
    Expr {
        path: String,
        #[source]
        source: ParseError,
    },
    #[error("{path}: {source}")]
    Invariant {
        path: String,
        #[source]
        source: KernelError,
    },
    #[error("problem: {0}")]
    Problem(#[source] SolverError),
}

fn field(path: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError::Field {
        path: path.to_string(),
        message: message.to_string(),
    }
}

/// Boundary conditions in the flat `bc` table: `type` plus whichever of
/// `alpha, beta, xi, eta, a1, b1, a2, b2` the family uses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcConfig {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
}

impl BcConfig {
    pub fn to_spec(&self) -> Result<BoundarySpec, ConfigError> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| {
                field(
                    &format!("problem.bc.{name}"),
                    format!("required for type `{}`", self.kind),
                )
            })
        };
        let robin = || -> Result<[f64; 4], ConfigError> {
            Ok([
                need(self.a1, "a1")?,
                need(self.b1, "b1")?,
                need(self.a2, "a2")?,
                need(self.b2, "b2")?,
            ])
        };
        let spec = match self.kind.as_str() {
            "three_point" => BoundarySpec::ThreePoint {
                alpha: need(self.alpha, "alpha")?,
                eta: need(self.eta, "eta")?,
            },
            "three_point_truncated" => {
                let (alpha, eta) = (need(self.alpha, "alpha")?, need(self.eta, "eta")?);
                BoundarySpec::ThreePoint { alpha, eta }
                    .validate()
                    .map_err(|source| ConfigError::Invariant {
                        path: "problem.bc".into(),
                        source,
                    })?;
                BoundarySpec::ThreePointTruncated {
                    alpha,
                    eta,
                    n: truncation_n0(alpha, eta),
                }
            }
            "four_point_coupled" => BoundarySpec::FourPointCoupled {
                alpha: need(self.alpha, "alpha")?,
                beta: need(self.beta, "beta")?,
                xi: need(self.xi, "xi")?,
                eta: need(self.eta, "eta")?,
            },
            "dirichlet_neumann" => BoundarySpec::DirichletNeumann,
            "dirichlet_dirichlet" => BoundarySpec::DirichletDirichlet,
            "half_line_dirichlet" => BoundarySpec::HalfLineDirichlet,
            "robin_neumann" => {
                let [a1, b1, a2, b2] = robin()?;
                BoundarySpec::RobinNeumann { a1, b1, a2, b2 }
            }
            "two_point_coupled_robin" => {
                let [a1, b1, a2, b2] = robin()?;
                BoundarySpec::TwoPointCoupledRobin { a1, b1, a2, b2 }
            }
            "half_line_robin" => {
                let [a1, b1, a2, b2] = robin()?;
                BoundarySpec::HalfLineRobin { a1, b1, a2, b2 }
            }
            other => {
                return Err(field(
                    "problem.bc.type",
                    format!(
                        "unknown boundary family `{other}` (expected three_point, three_point_truncated, \
                         four_point_coupled, dirichlet_neumann, dirichlet_dirichlet, robin_neumann, \
                         two_point_coupled_robin, half_line_dirichlet, half_line_robin)"
                    ),
                ))
            }
        };
        spec.validate().map_err(|source| ConfigError::Invariant {
            path: "problem.bc".into(),
            source,
        })?;
        Ok(spec)
    }

    pub fn from_spec(spec: &BoundarySpec) -> Self {
        let mut bc = BcConfig {
            kind: spec.family().to_string(),
            ..BcConfig::default()
        };
        match *spec {
            BoundarySpec::ThreePoint { alpha, eta } | BoundarySpec::ThreePointTruncated { alpha, eta, .. } => {
                bc.alpha = Some(alpha);
                bc.eta = Some(eta);
            }
            BoundarySpec::FourPointCoupled { alpha, beta, xi, eta } => {
                bc.alpha = Some(alpha);
                bc.beta = Some(beta);
                bc.xi = Some(xi);
                bc.eta = Some(eta);
            }
            BoundarySpec::RobinNeumann { a1, b1, a2, b2 }
            | BoundarySpec::TwoPointCoupledRobin { a1, b1, a2, b2 }
            | BoundarySpec::HalfLineRobin { a1, b1, a2, b2 } => {
                bc.a1 = Some(a1);
                bc.b1 = Some(b1);
                bc.a2 = Some(a2);
                bc.b2 = Some(b2);
            }
            BoundarySpec::DirichletNeumann | BoundarySpec::DirichletDirichlet | BoundarySpec::HalfLineDirichlet => {}
        }
        bc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub interval: [f64; 2],
    pub bc: BoundarySpec,
    pub p: Expr,
    pub q: Expr,
    pub f: Expr,
    pub g: Expr,
    pub regularization: Regularization,
    pub singular: Singularity,
}

impl ProblemConfig {
    pub fn from_spec(spec: &ProblemSpec) -> Self {
        ProblemConfig {
            interval: [spec.lo, spec.hi],
            bc: spec.bc,
            p: spec.p.clone(),
            q: spec.q.clone(),
            f: spec.f.clone(),
            g: spec.g.clone(),
            regularization: spec.regularization,
            singular: spec.singular,
        }
    }

    pub fn to_spec(&self) -> ProblemSpec {
        ProblemSpec {
            lo: self.interval[0],
            hi: self.interval[1],
            bc: self.bc,
            p: self.p.clone(),
            q: self.q.clone(),
            f: self.f.clone(),
            g: self.g.clone(),
            regularization: self.regularization,
            singular: self.singular,
            clamp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    interval: [f64; 2],
    bc: toml::Value,
    #[serde(default = "one")]
    p: String,
    #[serde(default = "one")]
    q: String,
    f: String,
    g: String,
    regularization: Regularization,
    #[serde(default)]
    singular: Singularity,
}

fn one() -> String {
    "1".into()
}

/// Solver keys as they appear in the file; absent keys take the solver
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub grading: f64,
    pub omega: f64,
    pub tol_fp: f64,
    pub max_iter: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n0: Option<u32>,
    pub n_growth: f64,
    pub n_max: u32,
    pub tol_reg: f64,
    /// Largest half-line window.
    pub m_max: f64,
    /// Bound on `|x'| + |y'|` at the accepted window end.
    pub tol_tail: f64,
}

/// Agreement required of consecutive half-line windows on their common part.
pub const TOL_COMPACT: f64 = 1e-5;

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        let h = HalfLineSchedule::default();
        SolverConfig {
            n: o.n_grid,
            grading: o.grading,
            omega: o.omega,
            tol_fp: o.tol_fp,
            max_iter: o.max_iter,
            n0: o.n0,
            n_growth: o.n_growth,
            n_max: o.n_max,
            tol_reg: o.tol_reg,
            m_max: h.m[h.m.len() - 1],
            tol_tail: h.tol_tail,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            n_grid: self.n,
            grading: self.grading,
            omega: self.omega,
            tol_fp: self.tol_fp,
            max_iter: self.max_iter,
            n0: self.n0,
            n_growth: self.n_growth,
            n_max: self.n_max,
            tol_reg: self.tol_reg,
            ..SolverOptions::default()
        }
    }

    pub fn schedule(&self) -> HalfLineSchedule {
        HalfLineSchedule::doubling(self.m_max, self.tol_tail, TOL_COMPACT)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("grading", self.grading),
            ("omega", self.omega),
            ("tol_fp", self.tol_fp),
            ("tol_reg", self.tol_reg),
            ("m_max", self.m_max),
            ("tol_tail", self.tol_tail),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(field(
                    &format!("solver.{name}"),
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        if self.grading < 1.0 {
            return Err(field("solver.grading", format!("must be >= 1, got {}", self.grading)));
        }
        if self.omega > 1.0 {
            return Err(field(
                "solver.omega",
                format!("damping must lie in (0, 1], got {}", self.omega),
            ));
        }
        if self.n < 8 {
            return Err(field(
                "solver.N",
                format!("need at least 8 panels per half, got {}", self.n),
            ));
        }
        if self.n_growth <= 1.0 {
            return Err(field(
                "solver.n_growth",
                format!("must exceed 1, got {}", self.n_growth),
            ));
        }
        if self.max_iter == 0 {
            return Err(field("solver.max_iter", "must be positive"));
        }
        if self.m_max < 1.0 {
            return Err(field("solver.m_max", format!("must be at least 1, got {}", self.m_max)));
        }
        Ok(())
    }

    /// Applies `key=value`, where `key` is a solver key with or without the
    /// `solver.` prefix.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.strip_prefix("solver.").unwrap_or(key);
        let path = format!("solver.{key}");
        fn num<T: FromStr>(path: &str, v: &str) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            v.trim().parse().map_err(|e: T::Err| field(path, format!("`{v}`: {e}")))
        }
        match key {
            "N" => self.n = num(&path, value)?,
            "grading" => self.grading = num(&path, value)?,
            "omega" => self.omega = num(&path, value)?,
            "tol_fp" => self.tol_fp = num(&path, value)?,
            "max_iter" => self.max_iter = num(&path, value)?,
            "n0" => self.n0 = Some(num(&path, value)?),
            "n_growth" => self.n_growth = num(&path, value)?,
            "n_max" => self.n_max = num(&path, value)?,
            "tol_reg" => self.tol_reg = num(&path, value)?,
            "m_max" => self.m_max = num(&path, value)?,
            "tol_tail" => self.tol_tail = num(&path, value)?,
            _ => return Err(field(&path, "unknown solver key")),
        }
        self.validate()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(field("output.format", format!("expected json or csv, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Destination file; when absent the file goes to the default output
    /// directory under the run's name.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

impl OutputConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "output.path" => self.path = Some(PathBuf::from(value)),
            "output.format" => self.format = value.parse()?,
            _ => return Err(field(key, "unknown output key")),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    pub hypotheses: Vec<HypothesisSpec>,
    pub output: OutputConfig,
}

#[derive(Serialize)]
struct RawOut<'a> {
    problem: RawProblemOut<'a>,
    solver: &'a SolverConfig,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    hypotheses: &'a [HypothesisSpec],
    output: &'a OutputConfig,
}

#[derive(Serialize)]
struct RawProblemOut<'a> {
    interval: [f64; 2],
    bc: BcConfig,
    p: &'a Expr,
    q: &'a Expr,
    f: &'a Expr,
    g: &'a Expr,
    regularization: Regularization,
    singular: Singularity,
}

fn section<T: DeserializeOwned>(path: &str, v: toml::Value) -> Result<T, ConfigError> {
    T::deserialize(v).map_err(|e| field(path, e.to_string().trim_end()))
}

fn expr(path: &str, src: &str) -> Result<Expr, ConfigError> {
    parse(src).map_err(|source| ConfigError::Expr {
        path: path.to_string(),
        source,
    })
}

impl RunConfig {
    pub fn from_problem(problem: &ProblemSpec) -> Self {
        RunConfig {
            problem: ProblemConfig::from_spec(problem),
            solver: SolverConfig::default(),
            hypotheses: Vec::new(),
            output: OutputConfig::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        let p = &self.problem;
        let raw = RawOut {
            problem: RawProblemOut {
                interval: p.interval,
                bc: BcConfig::from_spec(&p.bc),
                p: &p.p,
                q: &p.q,
                f: &p.f,
                g: &p.g,
                regularization: p.regularization,
                singular: p.singular,
            },
            solver: &self.solver,
            hypotheses: &self.hypotheses,
            output: &self.output,
        };
        toml::to_string(&raw).expect("run config serializes")
    }

    /// Applies a `key=value` override to the solver or output section.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if key.starts_with("output.") {
            self.output.set(key, value)
        } else {
            self.solver.set(key, value)
        }
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(src: &str) -> Result<Self, ConfigError> {
        let mut table: toml::Table = src
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string().trim_end().to_string()))?;
        let known = ["problem", "solver", "hypotheses", "output"];
        if let Some(k) = table.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(field(
                k,
                "unknown section (expected problem, solver, hypotheses, output)",
            ));
        }
        let raw_problem = table
            .remove("problem")
            .ok_or_else(|| field("problem", "missing section"))?;
        let raw: RawProblem = section("problem", raw_problem)?;
        let bc: BcConfig = section("problem.bc", raw.bc)?;
        let bc = bc.to_spec()?;
        let [lo, hi] = raw.interval;
        if !(lo.is_finite() && hi > lo) {
            return Err(field(
                "problem.interval",
                format!("need finite lo < hi, got [{lo}, {hi}]"),
            ));
        }
        if hi.is_infinite() != bc.is_half_line() {
            return Err(field(
                "problem.interval",
                format!(
                    "`{}` boundary conditions do not match the interval [{lo}, {hi}]",
                    bc.family()
                ),
            ));
        }
        let problem = ProblemConfig {
            interval: raw.interval,
            bc,
            p: expr("problem.p", &raw.p)?,
            q: expr("problem.q", &raw.q)?,
            f: expr("problem.f", &raw.f)?,
            g: expr("problem.g", &raw.g)?,
            regularization: raw.regularization,
            singular: raw.singular,
        };
        problem.to_spec().validate().map_err(ConfigError::Problem)?;
        let solver: SolverConfig = match table.remove("solver") {
            Some(v) => section("solver", v)?,
            None => SolverConfig::default(),
        };
        solver.validate()?;
        let hypotheses = match table.remove("hypotheses") {
            Some(toml::Value::Array(items)) => items
                .into_iter()
                .enumerate()
                .map(|(i, v)| section(&format!("hypotheses[{i}]"), v))
                .collect::<Result<Vec<HypothesisSpec>, _>>()?,
            Some(_) => return Err(field("hypotheses", "expected an array of tables")),
            None => Vec::new(),
        };
        let output: OutputConfig = match table.remove("output") {
            Some(v) => section("output", v)?,
            None => OutputConfig::default(),
        };
        Ok(RunConfig {
            problem,
            solver,
            hypotheses,
            output,
        })
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    src.parse()
}
