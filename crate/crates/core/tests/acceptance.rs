//! Acceptance criteria, one PASS/FAIL line each. Failing criteria are
//! reported, not hidden: the process exits 0 either way so the remaining
//! suites still run, and the summary line counts the failures.

mod common;

use common::*;
use sbvp::expr::{parse, Env};
use sbvp::halfline::{diagonalize, HalfLineSchedule};
use sbvp::harness::registry::{registry, ExampleRecord};
use sbvp::hypotheses::{audit, omega, Check, OmegaData};
use sbvp::kernels::{bound_suite, BoundarySpec, Component, Kernel};
use sbvp::quadrature::{gauss_legendre, graded_gauss, integrate};
use sbvp::solver::{solve_regularized, SolutionPair, SolverOptions};
use sbvp::transforms::{check_closed_form, Transform};
use std::f64::consts::PI;
use std::time::{Duration, Instant};

// Tolerances, as stated in the criteria.
const QUAD_TOL: f64 = 1e-8;
const QUAD_TIME: Duration = Duration::from_secs(1);
const KERNEL_GRID: usize = 201;
const KERNEL_SLACK: f64 = 1e-12;
const KERNEL_TIME: Duration = Duration::from_secs(5);
const GREEN_POINTS: usize = 2001;
const GREEN_TOL: f64 = 1e-6;
const BC_TOL: f64 = 1e-10;
const TRANSFORM_TOL: f64 = 1e-8;
const TRANSFORM_SAMPLES: usize = 100;
const FP_TOL: f64 = 1e-10;
const ODE_TOL: f64 = 1e-5;
const BC_RESIDUAL_TOL: f64 = 1e-8;
const SOLVE_TIME: Duration = Duration::from_secs(10);
const TAIL_TOL: f64 = 1e-4;
const M_LIMIT: f64 = 64.0;
const COMPACT_TOL: f64 = 1e-5;
const OMEGA_TOL: f64 = 1e-6;

struct Outcome {
    ok: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            ok: true,
            details: Vec::new(),
        }
    }

    fn note(&mut self, ok: bool, line: String) {
        self.ok &= ok;
        self.details.push(format!("{}  {line}", if ok { "ok " } else { "BAD" }));
    }
}

fn report(id: u32, title: &str, out: Outcome, failures: &mut Vec<u32>) {
    for d in &out.details {
        println!("    {d}");
    }
    println!("{} {id}: {title}", if out.ok { "PASS" } else { "FAIL" });
    if !out.ok {
        failures.push(id);
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let v = f();
    (v, t0.elapsed())
}

fn criterion_quadrature() -> Outcome {
    let mut out = Outcome::new();
    type Case = (&'static str, fn(f64) -> f64, f64, f64);
    let cases: [Case; 3] = [
        (
            "t^(-1/3)(1-t)^(-2/3)",
            |t| t.powf(-1.0 / 3.0) * (1.0 - t).powf(-2.0 / 3.0),
            2.0 * PI / 3f64.sqrt(),
            3.0,
        ),
        ("(1-t)^(-3/4)", |t| (1.0 - t).powf(-0.75), 4.0, 4.0),
        ("(1-t)^(-1/4)", |t| (1.0 - t).powf(-0.25), 4.0 / 3.0, 4.0),
    ];
    for (name, f, exact, grading) in cases {
        let (value, dt) = timed(|| graded_gauss(0.0, 1.0, 16, grading, 4).and_then(|g| integrate(f, &g)));
        match value {
            Ok(v) => {
                let err = (v - exact).abs();
                out.note(
                    err <= QUAD_TOL && dt < QUAD_TIME,
                    format!("∫ {name} = {v:.15} (exact {exact:.15}, error {err:.1e}, {dt:.1?})"),
                );
            }
            Err(e) => out.note(false, format!("∫ {name}: {e}")),
        }
    }
    out
}

fn criterion_kernel_bounds() -> Outcome {
    let mut out = Outcome::new();
    let sets = [
        BoundarySpec::ThreePoint {
            alpha: 2.0,
            eta: 1.0 / 3.0,
        },
        BoundarySpec::FourPointCoupled {
            alpha: 1.0,
            beta: 1.0,
            xi: 0.5,
            eta: 0.5,
        },
        BoundarySpec::FourPointCoupled {
            alpha: 0.5,
            beta: 3.0,
            xi: 0.25,
            eta: 0.5,
        },
    ];
    for spec in sets {
        let (suite, dt) = timed(|| bound_suite(&spec, KERNEL_GRID));
        match suite {
            Ok(checks) => {
                let worst = checks.iter().min_by(|a, b| a.worst_slack.total_cmp(&b.worst_slack));
                let all = checks.iter().all(|c| c.holds(KERNEL_SLACK));
                for c in checks.iter().filter(|c| !c.holds(KERNEL_SLACK)) {
                    out.note(
                        false,
                        format!("{spec:?}: `{}` slack {:e} at {:?}", c.name, c.worst_slack, c.at),
                    );
                }
                out.note(
                    all && dt < KERNEL_TIME && !checks.is_empty(),
                    format!(
                        "{spec:?}: {} inequalities, worst slack {:.2e} ({}), {dt:.1?}",
                        checks.len(),
                        worst.map_or(f64::NAN, |c| c.worst_slack),
                        worst.map_or("", |c| c.name.as_str())
                    ),
                );
            }
            Err(e) => out.note(false, format!("{spec:?}: {e}")),
        }
    }
    out
}

/// `∫ K(t, s) ds` over `[0, 1]`, Gauss-Legendre on the pieces between the
/// kernel's corners. The kernels are piecewise linear in `s`, so this is exact
/// up to rounding.
fn kernel_integral(k: &Kernel, t: f64, corners: &[f64]) -> f64 {
    let (xs, ws) = gauss_legendre(4);
    let mut cuts = vec![0.0, 1.0, t];
    cuts.extend_from_slice(corners);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            xs.iter()
                .zip(&ws)
                .map(|(x, wt)| wt * half * k.eval(t, a + half * (x + 1.0)))
                .sum::<f64>()
        })
        .sum()
}

fn criterion_green() -> Outcome {
    let mut out = Outcome::new();
    let eta = 1.0 / 3.0;
    type Case = (&'static str, Kernel, Vec<f64>, fn(f64) -> f64);
    let cases: [Case; 2] = [
        (
            "three-point α=2, η=1/3",
            BoundarySpec::ThreePoint { alpha: 2.0, eta }.own_kernel(Component::First),
            vec![eta],
            |t| 7.0 * t / 6.0 - t * t / 2.0,
        ),
        (
            "Dirichlet-Neumann",
            BoundarySpec::DirichletNeumann.own_kernel(Component::First),
            vec![],
            |t| t - t * t / 2.0,
        ),
    ];
    for (name, k, corners, exact) in cases {
        let u = |t: f64| kernel_integral(&k, t, &corners);
        let mut worst: f64 = 0.0;
        for i in 0..GREEN_POINTS {
            let t = i as f64 / (GREEN_POINTS - 1) as f64;
            worst = worst.max((u(t) - exact(t)).abs());
        }
        out.note(
            worst < GREEN_TOL,
            format!("{name}: max |∫K(t,s)ds - u(t)| = {worst:.1e} on {GREEN_POINTS} points"),
        );
        if corners.is_empty() {
            let d = (u(1.0) - u(0.999_999)) / 1e-6;
            out.note(d.abs() < 1e-5, format!("{name}: u'(1) ≈ {d:.1e}"));
        } else {
            let gap = (u(1.0) - 2.0 * u(eta)).abs();
            out.note(gap < BC_TOL, format!("{name}: |u(1) - 2u(1/3)| = {gap:.1e}"));
        }
    }
    out
}

fn criterion_transforms() -> Outcome {
    let mut out = Outcome::new();
    let cap = 10.0;
    for beta in [0.25, 0.5, 0.75, 1.0] {
        let build = Transform::build(parse(&format!("t^(-{beta})")).unwrap(), parse("0").unwrap(), cap);
        let tr = match build {
            Ok(t) => t,
            Err(e) => {
                out.note(false, format!("β = {beta}: {e}"));
                continue;
            }
        };
        let reference = parse(&format!("t^({beta} + 1) / ({beta} + 1)")).unwrap();
        let forward = check_closed_form(&tr, &reference, TRANSFORM_SAMPLES);
        let (lo, hi) = (1e-8 * cap, cap);
        let mut inv_dev: f64 = 0.0;
        let mut round_dev: f64 = 0.0;
        let mut err = None;
        for k in 0..TRANSFORM_SAMPLES {
            let z = lo * (hi / lo).powf(k as f64 / (TRANSFORM_SAMPLES - 1) as f64);
            let w = z.powf(beta + 1.0) / (beta + 1.0);
            match (tr.invert(w), tr.apply(z).and_then(|v| tr.invert(v))) {
                (Ok(zi), Ok(zr)) => {
                    inv_dev = inv_dev.max((zi - z).abs() / z);
                    round_dev = round_dev.max((zr - z).abs() / z);
                }
                (Err(e), _) | (_, Err(e)) => {
                    err.get_or_insert(e);
                }
            }
        }
        match (forward, err) {
            (Ok(f), None) => out.note(
                f.max_rel_dev <= TRANSFORM_TOL && inv_dev <= TRANSFORM_TOL && round_dev <= TRANSFORM_TOL,
                format!(
                    "β = {beta}: I rel {:.1e}, I⁻¹ rel {inv_dev:.1e}, I⁻¹∘I rel {round_dev:.1e}",
                    f.max_rel_dev
                ),
            ),
            (Err(e), _) | (_, Some(e)) => out.note(false, format!("β = {beta}: {e}")),
        }
    }
    out
}

/// The two sup-displays of the Dirichlet-Neumann and Robin-Neumann examples
/// that grow without bound.
const UNBOUNDED_SUPS: [(&str, &str); 2] = [("ch3_ex_3_1_26", "B4"), ("ch3_ex_3_3_26", "B11")];

fn criterion_hypotheses(recs: &[ExampleRecord]) -> Outcome {
    let mut out = Outcome::new();
    let mut total = 0;
    let mut matched = 0;
    for r in recs {
        let mut bad = Vec::new();
        for (h, (label, want)) in r.hypotheses.iter().zip(&r.expected) {
            let rep = audit(h);
            total += 1;
            let mut ok = rep.holds == *want && rep.label == *label;
            if let Some(&(_, l)) = UNBOUNDED_SUPS
                .iter()
                .find(|(id, l)| *id == r.id && label.to_string() == *l)
            {
                let flagged = rep.notes.contains("unbounded");
                if !flagged {
                    bad.push(format!("{l} not flagged unbounded"));
                }
                ok &= flagged;
            }
            if ok {
                matched += 1;
            } else if rep.holds != *want {
                bad.push(format!(
                    "{label}: audited {:?}, stated {want:?} ({})",
                    rep.holds,
                    rep.notes.chars().take(160).collect::<String>()
                ));
            }
        }
        let line = if bad.is_empty() {
            format!("{}: {} hypotheses as stated", r.id, r.hypotheses.len())
        } else {
            format!("{}: {}", r.id, bad.join("; "))
        };
        out.note(bad.is_empty(), line);
    }
    out.note(matched == total, format!("{matched}/{total} verdicts match"));
    out
}

fn solution_checks(id: &str, sol: &SolutionPair, dt: Duration, extra_ok: bool, extra: String) -> (bool, String) {
    let d = &sol.diagnostics;
    let stage_fp = d.stages.iter().map(|s| s.fp_residual).fold(0.0, f64::max);
    let ok = d.fp_converged
        && d.stages.iter().all(|s| s.fp_residual <= FP_TOL)
        && d.reg_converged
        && d.ode_residual <= ODE_TOL
        && d.bc_residual <= BC_RESIDUAL_TOL
        && d.positivity_ok
        && d.cone_ok
        && dt <= SOLVE_TIME
        && extra_ok;
    (
        ok,
        format!(
            "{id}: n = {}, stages {}, fp {stage_fp:.1e}, stage-Cauchy {}, ode {:.1e}, bc {:.1e}, positive {}, cone {} {}, {dt:.1?}{extra}",
            d.n_final,
            d.stages.len(),
            d.reg_converged,
            d.ode_residual,
            d.bc_residual,
            d.positivity_ok,
            d.cone,
            d.cone_ok,
        ),
    )
}

fn criterion_solver(recs: &[ExampleRecord]) -> Outcome {
    let mut out = Outcome::new();
    let opts = SolverOptions::default();
    for r in recs {
        if r.is_half_line() {
            let (res, dt) = timed(|| diagonalize(&r.problem, &HalfLineSchedule::default(), &opts));
            match res {
                Ok(h) => {
                    let (ok, line) =
                        solution_checks(r.id, &h.solution, dt, h.converged, format!(", m_final {:?}", h.m_final));
                    out.note(ok, line);
                }
                Err(e) => out.note(false, format!("{}: {e}", r.id)),
            }
        } else {
            let (res, dt) = timed(|| solve_regularized(&r.problem, &opts));
            match res {
                Ok(sol) => {
                    let (ok, line) = solution_checks(r.id, &sol, dt, true, String::new());
                    out.note(ok, line);
                }
                Err(e) => out.note(false, format!("{}: {e}", r.id)),
            }
        }
    }
    out
}

fn omega_data(r: &ExampleRecord) -> Option<OmegaData> {
    r.hypotheses.iter().flat_map(|h| &h.checks).find_map(|c| match c {
        Check::Omega(d) => Some(d.clone()),
        _ => None,
    })
}

/// `ω(M)` for `u(x) = x^(-α)`, `v = 0`, `p = e^(-t)`: with
/// `J(z) = z^(α+1)/(α+1)` each component contributes
/// `((α+1)h(M)k(M))^(1/(α+1)) · (α + 2 + b/a)`.
fn omega_closed_form(data: &OmegaData, alpha: f64) -> f64 {
    data.components
        .iter()
        .map(|c| {
            let at = Env::new().x(data.m);
            let hk = c.h.eval(&at).unwrap() * c.k.eval(&at).unwrap();
            ((alpha + 1.0) * hk).powf(1.0 / (alpha + 1.0)) * (alpha + 2.0 + c.robin_ratio)
        })
        .sum()
}

fn criterion_half_line(recs: &[ExampleRecord]) -> Outcome {
    let mut out = Outcome::new();
    let opts = SolverOptions::default();
    for r in recs.iter().filter(|r| r.is_half_line()) {
        match diagonalize(&r.problem, &HalfLineSchedule::default(), &opts) {
            Ok(h) => {
                let accepted = h
                    .m_final
                    .and_then(|m| h.windows.iter().find(|w| w.tail.is_some() && w.m > m));
                let tail = accepted.and_then(|w| w.tail);
                let compact = h.windows.last().and_then(|w| w.compact);
                let ok = h.converged
                    && h.m_final.is_some_and(|m| m <= M_LIMIT)
                    && tail.is_some_and(|t| t < TAIL_TOL)
                    && compact.is_some_and(|c| c < COMPACT_TOL);
                out.note(
                    ok,
                    format!(
                        "{}: m_final {:?}, tail {:.1e}, last-window agreement on [0, m/2] {:.1e}",
                        r.id,
                        h.m_final,
                        tail.unwrap_or(f64::NAN),
                        compact.unwrap_or(f64::NAN)
                    ),
                );
            }
            Err(e) => out.note(false, format!("{}: {e}", r.id)),
        }
        match omega_data(r) {
            Some(data) => match omega(&data) {
                Ok(v) => {
                    let cf = omega_closed_form(&data, 0.5);
                    let rel = (v.limit - cf).abs() / cf;
                    out.note(
                        rel <= OMEGA_TOL,
                        format!(
                            "{}: ω(M) = {:.12} vs closed form {cf:.12} (rel {rel:.1e})",
                            r.id, v.limit
                        ),
                    );
                }
                Err(e) => out.note(false, format!("{}: ω: {e}", r.id)),
            },
            None => out.note(false, format!("{}: no ω hypothesis", r.id)),
        }
    }
    out
}

fn criterion_properties() -> Outcome {
    let mut out = Outcome::new();
    let mut prop = |name: &str, r: Result<(), String>| match r {
        Ok(()) => out.note(true, name.to_string()),
        Err(e) => out.note(false, format!("{name}: {e}")),
    };
    prop(
        "1000 expression round trips",
        run_property(1000, true, expr_strategy(), expr_round_trip),
    );
    prop(
        "1000 precedence checks against a shunting-yard evaluator",
        run_property(1000, true, arithmetic_strategy(), precedence_matches),
    );
    prop(
        "kernel nonnegativity and symmetry (2000 cases)",
        run_property(2000, true, kernel_case(), kernel_nonnegative_symmetric),
    );
    for id in CONE_EXAMPLES {
        let fx = cone_fixture(id);
        prop(
            &format!("apply_T cone invariance, 50 members ({id})"),
            run_property(50, true, member_strategy(), |m| cone_invariance(&fx, m)),
        );
    }
    for id in CH3_EXAMPLES {
        let r = stage_invariants(id, 4).map(|n| format!("{n} stages"));
        match r {
            Ok(n) => prop(&format!("concavity and x' floor at every stage ({id}, {n})"), Ok(())),
            Err(e) => prop("concavity and x' floor", Err(e)),
        }
    }
    for id in ["ch2_ex6_four_point_sublinear", "ch3_ex_3_1_26"] {
        prop(&format!("bit-identical re-runs ({id})"), deterministic(id));
    }
    out
}

fn main() {
    let recs = registry();
    let mut failures = Vec::new();
    report(
        1,
        "quadrature reproduces the printed integrals",
        criterion_quadrature(),
        &mut failures,
    );
    report(2, "kernel bound suites", criterion_kernel_bounds(), &mut failures);
    report(
        3,
        "Green's identity and boundary identity",
        criterion_green(),
        &mut failures,
    );
    report(
        4,
        "transforms and their inverses",
        criterion_transforms(),
        &mut failures,
    );
    report(
        5,
        "hypothesis verdicts match the examples",
        criterion_hypotheses(&recs),
        &mut failures,
    );
    report(
        6,
        "every example solves with default options",
        criterion_solver(&recs),
        &mut failures,
    );
    report(
        7,
        "half-line diagonalization and ω(M)",
        criterion_half_line(&recs),
        &mut failures,
    );
    report(8, "property suites", criterion_properties(), &mut failures);
    if failures.is_empty() {
        println!("acceptance: all 8 criteria pass");
    } else {
        println!("acceptance: {} of 8 criteria fail: {failures:?}", failures.len());
    }
}
