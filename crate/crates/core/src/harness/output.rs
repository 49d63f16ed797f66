//! Solution and report files. Every file is written to a temporary sibling
//! and renamed into place.

use super::config::{OutputConfig, OutputFormat};
use crate::halfline::WindowRecord;
use crate::hypotheses::HypothesisReport;
use crate::solver::{Diagnostics, ProblemSpec, SolutionPair};
use serde::Serialize;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// Environment variable naming the directory for outputs without an
/// explicit path.
pub const OUTPUT_DIR_ENV: &str = "SBVP_OUTPUT_DIR";

pub fn default_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn resolve_path(output: &OutputConfig, name: &str, suffix: &str) -> PathBuf {
    output
        .path
        .clone()
        .unwrap_or_else(|| default_dir().join(format!("{name}{suffix}.{}", output.format.extension())))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn solution_csv(sol: &SolutionPair) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "x", "y", "dx", "dy"])?;
    for i in 0..sol.nodes.len() {
        w.write_record(
            [sol.nodes[i], sol.x[i], sol.y[i], sol.dx[i], sol.dy[i]]
                .iter()
                .map(|v| format!("{v:e}")),
        )?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemSummary {
    /// `null` upper end for a half-line.
    pub interval: [Option<f64>; 2],
    pub bc: String,
    pub p: String,
    pub q: String,
    pub f: String,
    pub g: String,
    pub regularization: String,
}

impl ProblemSummary {
    pub fn new(p: &ProblemSpec) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        ProblemSummary {
            interval: [finite(p.lo), finite(p.hi)],
            bc: p.bc.family().to_string(),
            p: p.p.to_string(),
            q: p.q.to_string(),
            f: p.f.to_string(),
            g: p.g.to_string(),
            regularization: p.regularization.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HalfLineSummary {
    pub converged: bool,
    pub m_final: Option<f64>,
    pub windows: Vec<WindowRecord>,
}

/// The JSON document of a solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveDocument {
    pub name: String,
    pub converged: bool,
    pub problem: ProblemSummary,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_line: Option<HalfLineSummary>,
    pub hypotheses: Vec<HypothesisReport>,
}

/// The JSON document of a hypothesis-only run.
#[derive(Debug, Clone, Serialize)]
pub struct CheckDocument {
    pub name: String,
    pub all_hold: bool,
    pub hypotheses: Vec<HypothesisReport>,
}

pub fn json_bytes<T: Serialize>(doc: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(doc).expect("document serializes");
    v.push(b'\n');
    v
}

/// Writes a solve in the configured format. CSV carries the solution only,
/// so any hypothesis reports go to a JSON file beside it. Returns the paths
/// written.
pub fn write_solve(doc: &SolveDocument, sol: &SolutionPair, output: &OutputConfig) -> io::Result<Vec<PathBuf>> {
    let path = resolve_path(output, &doc.name, "");
    match output.format {
        OutputFormat::Json => {
            write_atomic(&path, &json_bytes(doc))?;
            Ok(vec![path])
        }
        OutputFormat::Csv => {
            write_atomic(&path, &solution_csv(sol)?)?;
            let mut written = vec![path.clone()];
            if !doc.hypotheses.is_empty() {
                let side = path.with_extension("hypotheses.json");
                write_atomic(
                    &side,
                    &json_bytes(&CheckDocument {
                        name: doc.name.clone(),
                        all_hold: doc
                            .hypotheses
                            .iter()
                            .all(|r| r.holds == crate::hypotheses::Verdict::Holds),
                        hypotheses: doc.hypotheses.clone(),
                    }),
                )?;
                written.push(side);
            }
            Ok(written)
        }
    }
}
