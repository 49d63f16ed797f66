//! Strategies and property bodies shared by the property suite and the
//! acceptance runner.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::sample::select;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};
use sbvp::expr::{parse, BinOp, Env, Expr, Func, Var};
use sbvp::harness::registry::find;
use sbvp::kernels::{truncation_n0, BoundarySpec, Component, Kernel};
use sbvp::solver::{
    apply_t, fixed_point, residual, solve_regularized, stage_distance, Discretization, Init, ProblemSpec,
    Regularization, SolutionPair, SolverOptions, State,
};

/// Runs `test` on `cases` inputs. `seeded` pins the generator so repeated
/// runs see the same inputs.
pub fn run_property<S: Strategy>(
    cases: u32,
    seeded: bool,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = if seeded {
        let rng = TestRng::deterministic_rng(config.rng_algorithm);
        TestRunner::new_with_rng(config, rng)
    } else {
        TestRunner::new(config)
    };
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Expressions.

pub fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..=16).prop_map(|k| Expr::constant(k as f64)),
        (-1e3f64..1e3).prop_map(Expr::constant),
        any::<f64>()
            .prop_filter("finite", |c| c.is_finite())
            .prop_map(Expr::constant),
        select(Var::ALL.to_vec()).prop_map(Expr::var),
    ];
    leaf.prop_recursive(8, 96, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::neg),
            (
                select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, l, r)| Expr::bin(op, l, r)),
            (select(Func::ALL.to_vec()), prop::collection::vec(inner, 2)).prop_map(|(f, mut args)| {
                args.truncate(f.arity());
                Expr::call(f, args)
            }),
        ]
    })
}

const ENVS: [(f64, f64, f64, f64); 4] = [
    (0.5, 1.5, 0.25, 2.0),
    (0.1, 0.0, 3.0, 0.01),
    (0.9, -2.0, 0.5, 1.0),
    (1e-3, 1e3, 1e-2, 7.0),
];

/// `parse(pretty(e))` is `e` again and evaluates to the same bits.
pub fn expr_round_trip(e: Expr) -> Result<(), TestCaseError> {
    let text = e.pretty();
    let back = parse(&text).map_err(|err| TestCaseError::fail(format!("`{text}` does not parse: {err}")))?;
    prop_assert_eq!(&back, &e, "text `{}`", text);
    for (t, x, y, d) in ENVS {
        let env = Env::full(t, x, y, d);
        match (e.eval(&env), back.eval(&env)) {
            (Ok(a), Ok(b)) => prop_assert!(
                a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()),
                "`{}` evaluates to {} then {}",
                text,
                a,
                b
            ),
            (Err(_), Err(_)) => {}
            (a, b) => return Err(TestCaseError::fail(format!("`{text}`: {a:?} vs {b:?}"))),
        }
    }
    Ok(())
}

/// Flat `+ - * /` expressions over the integers 1..=9, with up to two
/// parenthesized spans given as `(first, last)` operand indices.
pub fn arithmetic_strategy() -> impl Strategy<Value = String> {
    (2usize..12)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(1u32..=9, n),
                prop::collection::vec(select(vec!['+', '-', '*', '/']), n - 1),
                prop::collection::vec((0..n, 0..n), 0..=2),
            )
        })
        .prop_map(|(nums, ops, spans)| {
            let mut open = vec![0; nums.len()];
            let mut close = vec![0; nums.len()];
            for (a, b) in spans {
                open[a.min(b)] += 1;
                close[a.max(b)] += 1;
            }
            let mut s = String::new();
            for (i, n) in nums.iter().enumerate() {
                if i > 0 {
                    s.push(ops[i - 1]);
                }
                s.push_str(&"(".repeat(open[i]));
                s.push_str(&n.to_string());
                s.push_str(&")".repeat(close[i]));
            }
            s
        })
}

/// Reference evaluator: Dijkstra's shunting-yard over single-digit operands.
pub fn shunting_yard(src: &str) -> f64 {
    fn prec(op: char) -> u8 {
        if op == '+' || op == '-' {
            1
        } else {
            2
        }
    }
    fn reduce(vals: &mut Vec<f64>, op: char) {
        let b = vals.pop().expect("operand");
        let a = vals.pop().expect("operand");
        vals.push(match op {
            '+' => a + b,
            '-' => a - b,
            '*' => a * b,
            _ => a / b,
        });
    }
    let mut vals = Vec::new();
    let mut ops: Vec<char> = Vec::new();
    for c in src.chars() {
        match c {
            '0'..='9' => vals.push(c.to_digit(10).unwrap() as f64),
            '(' => ops.push(c),
            ')' => {
                while let Some(op) = ops.pop() {
                    if op == '(' {
                        break;
                    }
                    reduce(&mut vals, op);
                }
            }
            _ => {
                while let Some(&top) = ops.last() {
                    if top == '(' || prec(top) < prec(c) {
                        break;
                    }
                    reduce(&mut vals, ops.pop().unwrap());
                }
                ops.push(c);
            }
        }
    }
    while let Some(op) = ops.pop() {
        reduce(&mut vals, op);
    }
    vals[0]
}

/// The parser's precedence agrees with the reference evaluator bit for bit.
pub fn precedence_matches(src: String) -> Result<(), TestCaseError> {
    let want = shunting_yard(&src);
    let e = parse(&src).map_err(|err| TestCaseError::fail(format!("`{src}`: {err}")))?;
    match e.eval(&Env::new()) {
        Ok(got) => prop_assert_eq!(got.to_bits(), want.to_bits(), "`{}`: {} vs {}", src, got, want),
        // The reference divides by zero silently; the parser reports it.
        Err(err) => prop_assert!(
            err.to_string().contains("division by zero"),
            "`{}`: {}, reference {}",
            src,
            err,
            want
        ),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Kernels.

fn unit() -> impl Strategy<Value = f64> {
    0.0f64..=1.0
}

pub fn boundary_strategy() -> impl Strategy<Value = BoundarySpec> {
    let robin = (0.05f64..5.0, 0.05f64..5.0, 0.05f64..5.0, 0.05f64..5.0);
    prop_oneof![
        (0.02f64..0.98, 0.01f64..0.99).prop_map(|(eta, u)| BoundarySpec::ThreePoint { alpha: u / eta, eta }),
        (0.05f64..0.95, 0.01f64..0.99, 0u32..40).prop_map(|(eta, u, k)| {
            let alpha = u / eta;
            BoundarySpec::ThreePointTruncated {
                alpha,
                eta,
                n: truncation_n0(alpha, eta) + k,
            }
        }),
        (0.05f64..4.0, 0.05f64..4.0, 0.02f64..0.98, 0.02f64..0.98)
            .prop_filter("αβξη < 1", |(a, b, xi, eta)| a * b * xi * eta < 1.0)
            .prop_map(|(alpha, beta, xi, eta)| BoundarySpec::FourPointCoupled { alpha, beta, xi, eta }),
        Just(BoundarySpec::DirichletNeumann),
        Just(BoundarySpec::DirichletDirichlet),
        Just(BoundarySpec::HalfLineDirichlet),
        robin
            .clone()
            .prop_map(|(a1, b1, a2, b2)| BoundarySpec::RobinNeumann { a1, b1, a2, b2 }),
        robin
            .clone()
            .prop_map(|(a1, b1, a2, b2)| BoundarySpec::TwoPointCoupledRobin { a1, b1, a2, b2 }),
        robin.prop_map(|(a1, b1, a2, b2)| BoundarySpec::HalfLineRobin { a1, b1, a2, b2 }),
    ]
}

pub fn kernel_case() -> impl Strategy<Value = (BoundarySpec, f64, f64)> {
    (boundary_strategy(), unit(), unit())
}

fn symmetric(k: &Kernel) -> bool {
    matches!(
        k,
        Kernel::Min | Kernel::Robin { .. } | Kernel::DirichletDirichlet | Kernel::Constant(_)
    )
}

/// Every kernel of the family is nonnegative on its domain, and the
/// two-point kernels are symmetric.
pub fn kernel_nonnegative_symmetric((spec, u, v): (BoundarySpec, f64, f64)) -> Result<(), TestCaseError> {
    let (lo, hi) = spec.domain();
    let (t, s) = (lo + u * (hi - lo), lo + v * (hi - lo));
    for c in [Component::First, Component::Second] {
        let kernels = std::iter::once(spec.own_kernel(c)).chain(spec.cross_kernel(c));
        for k in kernels {
            let val = k.eval(t, s);
            prop_assert!(val >= 0.0, "{:?} at ({}, {}) = {}", k, t, s, val);
            if symmetric(&k) {
                let swapped = k.eval(s, t);
                prop_assert!(
                    (val - swapped).abs() <= 1e-15 * val.abs().max(1.0),
                    "{:?}: K({}, {}) = {} but K({}, {}) = {}",
                    k,
                    t,
                    s,
                    val,
                    s,
                    t,
                    swapped
                );
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Cones.

/// Cone constants written out from the cone definitions.
#[derive(Debug, Clone, Copy)]
pub enum ConeShape {
    /// `x(t) ≥ t‖x‖`.
    T,
    /// `x(t) ≥ t(1-t)γ‖x‖`.
    TGamma(f64),
    /// `x ≥ γ‖x‖` on `[from, 1]`.
    Window { gamma: f64, from: f64 },
}

impl ConeShape {
    pub fn of(bc: &BoundarySpec) -> Option<ConeShape> {
        match *bc {
            BoundarySpec::DirichletNeumann => Some(ConeShape::T),
            BoundarySpec::ThreePoint { alpha, eta } => {
                Some(ConeShape::TGamma(alpha.min(1.0) * eta.min(1.0 - eta) / alpha.max(1.0)))
            }
            BoundarySpec::FourPointCoupled { alpha, beta, xi, eta } => {
                let low = [1.0, alpha * xi, alpha * beta * xi, beta * eta, alpha * beta * eta]
                    .into_iter()
                    .fold(f64::INFINITY, f64::min);
                let gap = [xi, eta, 1.0 - xi, 1.0 - eta].into_iter().fold(f64::INFINITY, f64::min);
                let top = [1.0, alpha, beta, alpha * beta * xi, alpha * beta * eta]
                    .into_iter()
                    .fold(0.0, f64::max);
                Some(ConeShape::Window {
                    gamma: low * gap / top,
                    from: xi.max(eta),
                })
            }
            _ => None,
        }
    }

    /// Smallest slack of the cone inequalities at the nodes, relative to
    /// `max(1, ‖x‖)`.
    pub fn slack(&self, nodes: &[f64], x: &[f64]) -> f64 {
        let norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = f64::INFINITY;
        for (&t, &v) in nodes.iter().zip(x) {
            let floor = match *self {
                ConeShape::T => t * norm,
                ConeShape::TGamma(g) => t * (1.0 - t) * g * norm,
                ConeShape::Window { gamma, from } if t >= from => gamma * norm,
                ConeShape::Window { .. } => 0.0,
            };
            worst = worst.min(v - floor);
        }
        worst / norm.max(1.0)
    }
}

/// Registry problems whose operator maps the cone into itself, one per cone.
pub const CONE_EXAMPLES: [&str; 3] = [
    "ch3_ex_3_1_26",
    "ch2_ex5_three_point_shift",
    "ch2_ex6_four_point_sublinear",
];

pub struct ConeFixture {
    pub id: &'static str,
    pub problem: ProblemSpec,
    pub disc: Discretization,
    pub shape: ConeShape,
}

pub fn cone_fixture(id: &'static str) -> ConeFixture {
    let rec = find(id).expect("registered example");
    let shape = ConeShape::of(&rec.problem.bc).expect("cone with a closed form");
    let disc = Discretization::new(&rec.problem, rec.problem.default_n0(), rec.problem.hi, 128, 4.0)
        .expect("stage discretization");
    ConeFixture {
        id,
        problem: rec.problem,
        disc,
        shape,
    }
}

/// `(aₖ, cₖ)` terms of a ramp for `x` and for `y`.
pub type Member = (Vec<(f64, f64)>, Vec<(f64, f64)>);

/// Nondecreasing concave ramps `Σ aₖ min(t, cₖ)`: nonnegative and concave,
/// hence in each of the cones above.
pub fn member_strategy() -> impl Strategy<Value = Member> {
    let ramp = prop::collection::vec((0.01f64..3.0, 0.05f64..=1.0), 1..6);
    (ramp.clone(), ramp)
}

fn ramp(nodes: &[f64], terms: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let x = nodes
        .iter()
        .map(|&t| terms.iter().map(|&(a, c)| a * t.min(c)).sum())
        .collect();
    let dx = nodes
        .iter()
        .map(|&t| terms.iter().filter(|&&(_, c)| t < c).map(|&(a, _)| a).sum())
        .collect();
    (x, dx)
}

pub fn member_state(nodes: &[f64], (fx, fy): &Member) -> State {
    let (x, dx) = ramp(nodes, fx);
    let (y, dy) = ramp(nodes, fy);
    State { x, y, dx, dy }
}

pub const CONE_SLACK: f64 = 1e-10;

/// `T` maps a cone member to a cone member.
pub fn cone_invariance(fx: &ConeFixture, member: Member) -> Result<(), TestCaseError> {
    let s = member_state(&fx.disc.nodes, &member);
    for v in [&s.x, &s.y] {
        let slack = fx.shape.slack(&fx.disc.nodes, v);
        prop_assert!(
            slack >= -CONE_SLACK,
            "{}: input not a cone member (slack {:e})",
            fx.id,
            slack
        );
    }
    let out = apply_t(&fx.problem, &fx.disc, &s).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for (name, v) in [("x", &out.x), ("y", &out.y)] {
        prop_assert!(v.iter().all(|u| u.is_finite()), "{}: T{} not finite", fx.id, name);
        let slack = fx.shape.slack(&fx.disc.nodes, v);
        prop_assert!(
            slack >= -CONE_SLACK,
            "{}: T{} leaves the cone (slack {:e})",
            fx.id,
            name,
            slack
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Stage invariants and determinism.

/// Floor on `x'` and `y'` at stage `n`: the retraction problems carry
/// `x'(1) = y'(1) = 1/n`, the derivative-shift problems `x'(1) = y'(1) = 0`.
pub fn derivative_floor(problem: &ProblemSpec, n: u32) -> f64 {
    match problem.regularization {
        Regularization::RetractionBox => 1.0 / n as f64,
        _ => 0.0,
    }
}

pub const CH3_EXAMPLES: [&str; 5] = [
    "ch3_ex_3_1_26",
    "ch3_ex_3_2_39",
    "ch3_ex_3_3_26",
    "ch3_ex_3_4_43",
    "ch3_ex_4_2_21",
];

/// The continuation of `solve_regularized`, keeping every stage.
pub fn stages(problem: &ProblemSpec, opts: &SolverOptions, max_stages: usize) -> Result<Vec<SolutionPair>, String> {
    let mut n = opts.n0.unwrap_or_else(|| problem.default_n0());
    let mut out: Vec<SolutionPair> = Vec::new();
    for _ in 0..max_stages {
        let disc = Discretization::new(problem, n, problem.hi, opts.n_grid, opts.grading).map_err(|e| e.to_string())?;
        let init = match out.last() {
            Some(p) => Init::Supplied(Box::new(p.clone())),
            None => opts.init.clone(),
        };
        let sol = fixed_point(problem, &disc, &init, opts).map_err(|e| e.to_string())?;
        let done = out.last().is_some_and(|p| stage_distance(&sol, p) < opts.tol_reg);
        out.push(sol);
        if done {
            break;
        }
        n *= 2;
    }
    Ok(out)
}

/// Concavity (`x'` nonincreasing, second differences ≤ 0) and the
/// derivative floor at every stage.
pub fn stage_invariants(id: &str, max_stages: usize) -> Result<usize, String> {
    let rec = find(id).ok_or_else(|| format!("{id}: not registered"))?;
    let opts = SolverOptions::default();
    let sols = stages(&rec.problem, &opts, max_stages)?;
    for sol in &sols {
        let n = sol.n;
        let floor = derivative_floor(&rec.problem, n);
        for (name, d) in [("x'", &sol.dx), ("y'", &sol.dy)] {
            let scale = d.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if let Some((i, v)) = d.iter().enumerate().find(|(_, &v)| v < floor - 1e-12) {
                return Err(format!(
                    "{id}: stage n = {n}: {name}({}) = {v:e} < {floor:e}",
                    sol.nodes[i]
                ));
            }
            if let Some(k) = (1..d.len()).find(|&k| d[k] > d[k - 1] + 1e-12 * scale) {
                return Err(format!(
                    "{id}: stage n = {n}: {name} increases at t = {} ({:e} -> {:e})",
                    sol.nodes[k],
                    d[k - 1],
                    d[k]
                ));
            }
        }
        let r = residual(&rec.problem, sol).map_err(|e| e.to_string())?;
        if r.max_d2 > 1e-9 {
            return Err(format!("{id}: stage n = {n}: second difference {:e} > 0", r.max_d2));
        }
    }
    Ok(sols.len())
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn fingerprint(sol: &SolutionPair) -> (Vec<Vec<u64>>, String) {
    (
        [&sol.nodes, &sol.x, &sol.y, &sol.dx, &sol.dy, &sol.zf, &sol.zg]
            .map(|v| bits(v))
            .to_vec(),
        serde_json::to_string(&sol.diagnostics).expect("diagnostics serialize"),
    )
}

/// Two sequential solves and two concurrent ones agree bit for bit.
pub fn deterministic(id: &str) -> Result<(), String> {
    let rec = find(id).ok_or_else(|| format!("{id}: not registered"))?;
    let opts = SolverOptions::default();
    let solve = || {
        solve_regularized(&rec.problem, &opts)
            .map(|s| fingerprint(&s))
            .map_err(|e| e.to_string())
    };
    let first = solve()?;
    let second = solve()?;
    let (a, b) = std::thread::scope(|sc| {
        let ha = sc.spawn(solve);
        let hb = sc.spawn(solve);
        (ha.join().expect("solve thread"), hb.join().expect("solve thread"))
    });
    for (k, other) in [second, a?, b?].into_iter().enumerate() {
        if other != first {
            return Err(format!("{id}: run {} differs from the first", k + 2));
        }
    }
    Ok(())
}
