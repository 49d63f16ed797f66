//! The worked examples, pinned with their boundary conditions, regularization
//! style and the hypotheses each example is stated to satisfy.

use crate::expr::{parse, Expr, Var};
use crate::hypotheses::{
    Check, Direction, ExponentRule, GrowthData, HypothesisSpec, Label, Limit, OmegaComponent, OmegaData, Region,
    StateVar, SupRatioData, SupVariant, TruncatedData, Verdict,
};
use crate::kernels::{truncation_n0, BoundarySpec};
use crate::solver::{ProblemSpec, Regularization, Singularity};

const INF: f64 = f64::INFINITY;

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleRecord {
    pub id: &'static str,
    /// Chapter and topic, e.g. `ch3/dirichlet-neumann/existence`.
    pub anchor: &'static str,
    pub summary: &'static str,
    pub problem: ProblemSpec,
    pub hypotheses: Vec<HypothesisSpec>,
    /// Verdicts the example states.
    pub expected: Vec<(Label, Verdict)>,
}

impl ExampleRecord {
    pub fn is_half_line(&self) -> bool {
        self.problem.hi.is_infinite()
    }
}

fn e(s: &str) -> Expr {
    parse(s).unwrap_or_else(|err| panic!("registry expression `{s}`: {err}"))
}

/// `k(·)` with its variable rebound to `var`.
fn on(k: &str, var: Var) -> Expr {
    e(k).rebind(&Expr::var(var))
}

fn mul(a: &Expr, b: &Expr) -> Expr {
    e(&format!("({}) * ({})", a.pretty(), b.pretty()))
}

fn add(a: &Expr, b: &Expr) -> Expr {
    e(&format!("({}) + ({})", a.pretty(), b.pretty()))
}

fn spec(label: &str, checks: Vec<Check>) -> HypothesisSpec {
    HypothesisSpec::new(label, checks)
}

fn all_hold(hyps: &[HypothesisSpec]) -> Vec<(Label, Verdict)> {
    hyps.iter().map(|h| (h.label, Verdict::Holds)).collect()
}

fn unit_t() -> Region {
    Region::unit()
}

fn half_t() -> Region {
    Region {
        t: [0.0, INF],
        ..Region::unit()
    }
}

fn integrable(weight: &str, envelope: &str) -> Check {
    Check::Integrable {
        weight: e(weight),
        envelope: e(envelope),
        interval: [0.0, 1.0],
    }
}

fn bound(lhs: Expr, rhs: Expr, region: Region) -> Check {
    Check::Bound { lhs, rhs, region }
}

fn positive(f: &str, region: Region) -> Check {
    Check::Positive { f: e(f), region }
}

fn monotone(f: &str, var: StateVar, direction: Direction, region: Region) -> Check {
    Check::Monotone {
        f: e(f),
        var,
        direction,
        region,
    }
}

fn monotone1(f: &str, direction: Direction, positive: bool) -> Check {
    Check::Monotone1 {
        f: e(f),
        direction,
        range: [0.0, INF],
        positive,
    }
}

fn exponents(rule: ExponentRule, values: &[f64]) -> Check {
    Check::Exponents {
        rule,
        values: values.to_vec(),
    }
}

fn growth(f: &str, exponent: f64, limit: Limit, var: StateVar, t: Option<[f64; 2]>) -> Check {
    Check::Growth(GrowthData {
        f: e(f),
        exponent,
        limit,
        var,
        t,
        others: Vec::new(),
    })
}

fn scaling(f: &str, var: StateVar, low: f64, high: f64) -> Check {
    Check::Scaling {
        f: e(f),
        var,
        low,
        high,
        region: unit_t().with(StateVar::X, 0.0, INF).with(StateVar::Y, 0.0, INF),
    }
}

// ---------------------------------------------------------------------------
// Chapter 2: three-point and four-point problems.

/// Data of an example on the truncated three-point problem.
struct ThreePointData {
    f: &'static str,
    g: &'static str,
    k: &'static str,
    l: &'static str,
    big_f: &'static str,
    big_g: &'static str,
}

const ALPHA: f64 = 2.0;
const ETA: f64 = 1.0 / 3.0;

fn a1(d: &ThreePointData) -> HypothesisSpec {
    let kf = mul(&e(d.k), &e(d.big_f));
    let lg = mul(&e(d.l), &e(d.big_g));
    spec(
        "A1",
        vec![
            integrable("t*(1-t)", d.k),
            integrable("t*(1-t)", d.l),
            bound(e(d.f), kf, unit_t().with(StateVar::Y, 0.0, INF)),
            bound(e(d.g), lg, unit_t().with(StateVar::X, 0.0, INF)),
        ],
    )
}

fn a2(d: &ThreePointData, a1: f64, a2: f64) -> HypothesisSpec {
    spec(
        "A2",
        vec![
            growth(d.big_f, a1, Limit::VanishesAtInfinity, StateVar::Y, None),
            growth(d.big_g, a2, Limit::VanishesAtInfinity, StateVar::X, None),
            exponents(ExponentRule::ProductAtMostOne, &[a1, a2]),
        ],
    )
}

fn a3(d: &ThreePointData, b1: f64, b2: f64) -> HypothesisSpec {
    let t = Some([ETA, 1.0]);
    spec(
        "A3",
        vec![
            growth(d.f, b1, Limit::PositiveAtZero, StateVar::Y, t),
            growth(d.g, b2, Limit::PositiveAtZero, StateVar::X, t),
            exponents(ExponentRule::ProductAtLeastOne, &[b1, b2]),
        ],
    )
}

fn truncation_indices() -> Vec<u32> {
    let n0 = truncation_n0(ALPHA, ETA);
    vec![n0, 2 * n0, 8 * n0, 32 * n0]
}

fn a4(d: &ThreePointData) -> HypothesisSpec {
    spec(
        "A4",
        vec![
            monotone(
                d.f,
                StateVar::Y,
                Direction::Nonincreasing,
                unit_t().with(StateVar::Y, 0.0, INF),
            ),
            monotone1(d.big_g, Direction::Nonincreasing, false),
            Check::TruncatedLower(TruncatedData {
                f: e(d.f),
                other: e(d.big_g),
                weight: e(d.l),
                alpha: ALPHA,
                eta: ETA,
                n: truncation_indices(),
            }),
        ],
    )
}

fn a5(d: &ThreePointData) -> HypothesisSpec {
    spec(
        "A5",
        vec![
            monotone1(d.big_f, Direction::Nonincreasing, false),
            monotone(
                d.g,
                StateVar::X,
                Direction::Nonincreasing,
                unit_t().with(StateVar::X, 0.0, INF),
            ),
            Check::TruncatedUpper(TruncatedData {
                f: e(d.big_f),
                other: e(d.g),
                weight: e(d.k),
                alpha: ALPHA,
                eta: ETA,
                n: truncation_indices(),
            }),
        ],
    )
}

fn three_point_problem(d: &ThreePointData, singular: Singularity) -> ProblemSpec {
    ProblemSpec {
        lo: 0.0,
        hi: 1.0,
        bc: BoundarySpec::ThreePointTruncated {
            alpha: ALPHA,
            eta: ETA,
            n: truncation_n0(ALPHA, ETA),
        },
        p: e("1"),
        q: e("1"),
        f: e(d.f),
        g: e(d.g),
        regularization: Regularization::ShiftState,
        singular,
        clamp: None,
    }
}

fn state_singular() -> Singularity {
    Singularity {
        x: true,
        y: true,
        d: false,
        endpoints: true,
    }
}

fn ch2_three_point(
    id: &'static str,
    summary: &'static str,
    d: ThreePointData,
    hyps: Vec<HypothesisSpec>,
) -> ExampleRecord {
    let problem = three_point_problem(&d, state_singular());
    ExampleRecord {
        id,
        anchor: "ch2/three-point/truncated",
        summary,
        problem,
        expected: all_hold(&hyps),
        hypotheses: hyps,
    }
}

fn ch2_ex1() -> ExampleRecord {
    let d = ThreePointData {
        f: "(1/(t*(1-t)))*(1/y + 3*y^(1/3))",
        g: "(1/(t*(1-t)))*(1/x + 4*x)",
        k: "1/(t*(1-t))",
        l: "1/(t*(1-t))",
        big_f: "1/y + 3*y^(1/3)",
        big_g: "1/x + 4*x",
    };
    let hyps = vec![a1(&d), a2(&d, 0.5, 2.0), a3(&d, 1.0, 1.0)];
    ch2_three_point(
        "ch2_ex1_three_point",
        "power-law nonlinearities singular at zero state",
        d,
        hyps,
    )
}

fn ch2_ex2() -> ExampleRecord {
    let d = ThreePointData {
        f: "exp(1/y)/(t*(1-t))",
        g: "exp(1/x)/(t*(1-t))",
        k: "1/(t*(1-t))",
        l: "1/(t*(1-t))",
        big_f: "exp(1/y)",
        big_g: "exp(1/x)",
    };
    let hyps = vec![a1(&d), a2(&d, 1.0, 1.0), a4(&d)];
    ch2_three_point(
        "ch2_ex2_three_point",
        "exponential singularity at zero state, lower constant",
        d,
        hyps,
    )
}

fn ch2_ex3() -> ExampleRecord {
    let d = ThreePointData {
        f: "min(y,1)*exp(1/min(y,1))/(t*(1-t))",
        g: "min(x,1)*exp(1/min(x,1))/(t*(1-t))",
        k: "1/(t*(1-t))",
        l: "1/(t*(1-t))",
        big_f: "min(y,1)*exp(1/min(y,1))",
        big_g: "min(x,1)*exp(1/min(x,1))",
    };
    let hyps = vec![a1(&d), a3(&d, 1.0, 1.0), a5(&d)];
    ch2_three_point(
        "ch2_ex3_three_point",
        "capped exponential singularity, upper constant",
        d,
        hyps,
    )
}

fn ch2_ex4() -> ExampleRecord {
    let d = ThreePointData {
        f: "(1/(t*(1-t)))/sqrt(y)",
        g: "(1/(t*(1-t)))/x^2",
        k: "1/(t*(1-t))",
        l: "1/(t*(1-t))",
        big_f: "1/sqrt(y)",
        big_g: "1/x^2",
    };
    let hyps = vec![a1(&d), a4(&d), a5(&d)];
    ch2_three_point(
        "ch2_ex4_three_point",
        "inverse-power singularities, both constants",
        d,
        hyps,
    )
}

/// `(A6)`-`(A8)` for `f = g = (t(1-t)xy)^(-1/4)`.
fn shift_state_hypotheses() -> Vec<HypothesisSpec> {
    let f = "(t*(1-t)*x*y)^(-1/4)";
    let diag = "(t*(1-t)*(t*(1-t))*(t*(1-t)))^(-1/4)";
    let xy = unit_t().with(StateVar::X, 0.0, INF).with(StateVar::Y, 0.0, INF);
    let at_one = unit_t().with(StateVar::X, 1.0, 1.0).with(StateVar::Y, 1.0, 1.0);
    let mut a6 = Vec::new();
    for _component in 0..2 {
        a6.push(monotone(f, StateVar::X, Direction::Nonincreasing, xy.clone()));
        a6.push(monotone(f, StateVar::Y, Direction::Nonincreasing, xy.clone()));
        a6.push(positive(f, at_one.clone()));
        a6.push(integrable("t*(1-t)", diag));
    }
    let scaled = |label: &str| {
        spec(
            label,
            vec![
                scaling(f, StateVar::X, -0.25, 0.0),
                scaling(f, StateVar::Y, -0.25, 0.0),
                exponents(ExponentRule::SignSplit, &[-0.25, 0.0, -0.25, 0.0]),
            ],
        )
    };
    vec![spec("A6", a6), scaled("A7"), scaled("A8")]
}

fn ch2_shift_state() -> ExampleRecord {
    let f = "(t*(1-t)*x*y)^(-1/4)";
    let hyps = shift_state_hypotheses();
    ExampleRecord {
        id: "ch2_ex5_three_point_shift",
        anchor: "ch2/three-point/shift-state",
        summary: "three-point problem with nonlinearity singular in both states",
        problem: ProblemSpec {
            lo: 0.0,
            hi: 1.0,
            bc: BoundarySpec::ThreePoint { alpha: ALPHA, eta: ETA },
            p: e("1"),
            q: e("1"),
            f: e(f),
            g: e(f),
            regularization: Regularization::ShiftState,
            singular: state_singular(),
            clamp: None,
        },
        expected: all_hold(&hyps),
        hypotheses: hyps,
    }
}

fn four_point() -> BoundarySpec {
    BoundarySpec::FourPointCoupled {
        alpha: 1.0,
        beta: 1.0,
        xi: 0.5,
        eta: 0.5,
    }
}

fn ch2_four_point_sublinear() -> ExampleRecord {
    let f = "(1 + (x*y)^(1/4))/sqrt(t*(1-t))";
    let g = "(1 + x^(1/3)*y^(1/5))/sqrt(t*(1-t))";
    let at_one = unit_t().with(StateVar::X, 1.0, 1.0).with(StateVar::Y, 1.0, 1.0);
    let hyps = vec![
        spec(
            "A9",
            vec![
                positive(f, at_one.clone()),
                positive(g, at_one),
                integrable("t*(1-t)", "2/sqrt(t*(1-t))"),
                integrable("t*(1-t)", "2/sqrt(t*(1-t))"),
            ],
        ),
        spec(
            "A10",
            vec![
                scaling(f, StateVar::X, 0.0, 0.25),
                scaling(f, StateVar::Y, 0.0, 0.25),
                exponents(ExponentRule::OrderedSubunit, &[0.0, 0.25, 0.0, 0.25]),
                exponents(ExponentRule::SumBelowOne, &[0.25, 0.25]),
            ],
        ),
        spec(
            "A11",
            vec![
                scaling(g, StateVar::X, 0.0, 1.0 / 3.0),
                scaling(g, StateVar::Y, 0.0, 0.2),
                exponents(ExponentRule::OrderedSubunit, &[0.0, 1.0 / 3.0, 0.0, 0.2]),
                exponents(ExponentRule::SumBelowOne, &[1.0 / 3.0, 0.2]),
            ],
        ),
    ];
    ExampleRecord {
        id: "ch2_ex6_four_point_sublinear",
        anchor: "ch2/four-point/sublinear",
        summary: "four-point coupled problem with sublinear, nonsingular-in-state growth",
        problem: ProblemSpec {
            lo: 0.0,
            hi: 1.0,
            bc: four_point(),
            p: e("1"),
            q: e("1"),
            f: e(f),
            g: e(g),
            regularization: Regularization::None,
            singular: Singularity {
                endpoints: true,
                ..Singularity::default()
            },
            clamp: None,
        },
        expected: all_hold(&hyps),
        hypotheses: hyps,
    }
}

fn ch2_four_point_singular() -> ExampleRecord {
    let f = "(t*(1-t)*x*y)^(-1/4)";
    let hyps = shift_state_hypotheses();
    ExampleRecord {
        id: "ch2_ex7_four_point_shift",
        anchor: "ch2/four-point/shift-state",
        summary: "four-point coupled problem with nonlinearity singular in both states",
        problem: ProblemSpec {
            lo: 0.0,
            hi: 1.0,
            bc: four_point(),
            p: e("1"),
            q: e("1"),
            f: e(f),
            g: e(f),
            regularization: Regularization::ShiftState,
            singular: state_singular(),
            clamp: None,
        },
        expected: all_hold(&hyps),
        hypotheses: hyps,
    }
}

// ---------------------------------------------------------------------------
// Chapter 3: derivative-dependent problems.

/// Bounds of one equation: `f ≤ k(other)(u(d) + v(d))`, written as
/// one-variable expressions.
struct Envelope {
    f: &'static str,
    other: Var,
    k: &'static str,
    u: &'static str,
    v: &'static str,
}

impl Envelope {
    fn rhs(&self) -> Expr {
        mul(&on(self.k, self.other), &add(&on(self.u, Var::D), &on(self.v, Var::D)))
    }
}

fn state_box() -> Region {
    unit_t()
        .with(StateVar::X, 0.0, INF)
        .with(StateVar::Y, 0.0, INF)
        .with(StateVar::D, 0.0, INF)
}

fn b1(p: &str, q: &str) -> HypothesisSpec {
    spec(
        "B1",
        vec![
            integrable("1", p),
            integrable("1", q),
            positive(p, unit_t()),
            positive(q, unit_t()),
        ],
    )
}

fn b2(f: &str, g: &str) -> HypothesisSpec {
    spec("B2", vec![positive(f, state_box()), positive(g, state_box())])
}

fn b3(a: &Envelope, b: &Envelope) -> HypothesisSpec {
    let mut checks = Vec::new();
    for env in [a, b] {
        checks.push(bound(e(env.f), env.rhs(), state_box()));
        checks.push(monotone1(env.u, Direction::Nonincreasing, true));
        checks.push(monotone1(env.k, Direction::Nondecreasing, false));
        checks.push(monotone1(env.v, Direction::Nondecreasing, false));
    }
    spec("B3", checks)
}

fn b5(a: &Envelope, b: &Envelope) -> HypothesisSpec {
    spec(
        "B5",
        vec![
            Check::TransformUnbounded { u: e(a.u), v: e(a.v) },
            Check::TransformUnbounded { u: e(b.u), v: e(b.v) },
        ],
    )
}

fn sup_ratio(
    label: &str,
    variant: SupVariant,
    a: &Envelope,
    b: &Envelope,
    p: &str,
    q: &str,
    robin: [f64; 2],
) -> HypothesisSpec {
    spec(
        label,
        vec![Check::SupRatio(SupRatioData {
            variant,
            k1: e(a.k),
            k2: e(b.k),
            h1: e("1"),
            h2: e("1"),
            u1: e(a.u),
            v1: e(a.v),
            u2: e(b.u),
            v2: e(b.v),
            p_int: None,
            q_int: None,
            p: Some(e(p)),
            q: Some(e(q)),
            interval: [0.0, 1.0],
            robin,
        })],
    )
}

/// Lower bound `φ(t) · other^δ ≤ f` on `t ∈ (0,1)`, `other ∈ (0, E]`,
/// `d ∈ (0, F]`.
fn lower(f: &str, phi: &str, other: Var, delta: f64, e_max: f64, f_max: f64) -> Check {
    let var = match other {
        Var::X => StateVar::X,
        _ => StateVar::Y,
    };
    let lhs = e(&format!("({phi}) * {}^{delta}", other.name()));
    bound(lhs, e(f), unit_t().with(var, 0.0, e_max).with(StateVar::D, 0.0, f_max))
}

/// `∫ p(t) u(C ∫_t^1 inner(s) ds) dt < ∞` for several `C`.
fn nested(p: &str, u: &str, inner: &str) -> Check {
    Check::NestedIntegrable {
        p: e(p),
        u: e(u),
        inner: e(inner),
        scales: vec![0.1, 1.0, 10.0],
        interval: [0.0, 1.0],
    }
}

fn ch3_record(
    id: &'static str,
    anchor: &'static str,
    summary: &'static str,
    problem: ProblemSpec,
    hyps: Vec<HypothesisSpec>,
) -> ExampleRecord {
    ExampleRecord {
        id,
        anchor,
        summary,
        problem,
        expected: all_hold(&hyps),
        hypotheses: hyps,
    }
}

fn ch3_problem(bc: BoundarySpec, p: &str, q: &str, f: &str, g: &str, regularization: Regularization) -> ProblemSpec {
    ProblemSpec {
        lo: 0.0,
        hi: 1.0,
        bc,
        p: e(p),
        q: e(q),
        f: e(f),
        g: e(g),
        regularization,
        singular: Singularity {
            x: false,
            y: false,
            d: true,
            endpoints: true,
        },
        clamp: None,
    }
}

fn ch3_ex_3_1_26() -> ExampleRecord {
    let (p, q) = ("t^(-1/3)*(1-t)^(-2/3)", "t^(-2/3)*(1-t)^(-1/3)");
    let a = Envelope {
        f: "y^(1/3)*d^(-1/2)",
        other: Var::Y,
        k: "x^(1/3)",
        u: "x^(-1/2)",
        v: "0",
    };
    let b = Envelope {
        f: "x^(2/3)*d^(-1/4)",
        other: Var::X,
        k: "x^(2/3)",
        u: "x^(-1/4)",
        v: "0",
    };
    let big_f = 10.0;
    let hyps = vec![
        b1(p, q),
        b2(a.f, b.f),
        b3(&a, &b),
        sup_ratio("B4", SupVariant::Nested, &a, &b, p, q, [0.0, 0.0]),
        b5(&a, &b),
        spec(
            "B6",
            vec![
                lower(a.f, &format!("{big_f}^(-1/2)"), Var::Y, 1.0 / 3.0, 10.0, big_f),
                lower(b.f, &format!("{big_f}^(-1/4)"), Var::X, 2.0 / 3.0, 10.0, big_f),
                lower(a.f, "1^(-1/2)", Var::Y, 1.0 / 3.0, 1.0, 1.0),
                lower(b.f, "1^(-1/4)", Var::X, 2.0 / 3.0, 1.0, 1.0),
                exponents(ExponentRule::Subunit, &[1.0 / 3.0, 2.0 / 3.0]),
            ],
        ),
        spec(
            "B7",
            vec![
                nested(p, a.u, &format!("t^(1/3)*({p})*{big_f}^(-1/2)")),
                nested(q, b.u, &format!("t^(2/3)*({q})*{big_f}^(-1/4)")),
            ],
        ),
    ];
    ch3_record(
        "ch3_ex_3_1_26",
        "ch3/dirichlet-neumann/existence",
        "derivative-singular system with Beta-type weights",
        ch3_problem(
            BoundarySpec::DirichletNeumann,
            p,
            q,
            a.f,
            b.f,
            Regularization::RetractionBox,
        ),
        hyps,
    )
}

/// The `(1 + x^δ + x^η)(1 + d^α + d^-β)` family with weights `μ₁, μ₂`.
fn multiplicity_envelopes() -> (Envelope, Envelope) {
    (
        Envelope {
            f: "(1 + y^(1/2) + y^2)*(1 + d^(1/2) + d^(-1/2))",
            other: Var::Y,
            k: "1 + x^(1/2) + x^2",
            u: "x^(-1/2)",
            v: "1 + x^(1/2)",
        },
        Envelope {
            f: "(1 + x^(1/2) + x^2)*(1 + d^(1/2) + d^(-1/2))",
            other: Var::X,
            k: "1 + x^(1/2) + x^2",
            u: "x^(-1/2)",
            v: "1 + x^(1/2)",
        },
    )
}

/// `(B8)` with `φ_E = μ` on `(0, E] × (0, ∞)` for two values of `E`.
fn b8(a: &Envelope, b: &Envelope, mu: [f64; 2]) -> HypothesisSpec {
    let mut checks = Vec::new();
    for e_max in [1.0, 10.0] {
        for (env, m, var) in [(a, mu[0], StateVar::Y), (b, mu[1], StateVar::X)] {
            let other = if var == StateVar::Y { "y" } else { "x" };
            checks.push(bound(
                e(&format!("{m} * {other}^(1/2)")),
                e(env.f),
                unit_t().with(var, 0.0, e_max).with(StateVar::D, 0.0, INF),
            ));
        }
    }
    checks.push(exponents(ExponentRule::Subunit, &[0.5, 0.5]));
    spec("B8", checks)
}

/// `(B10)` with `h = μ(1 + other^2)`.
fn b10(a: &Envelope, b: &Envelope, mu: [f64; 2]) -> HypothesisSpec {
    let mut checks = Vec::new();
    for (env, m, var, name) in [(a, mu[0], StateVar::Y, "y"), (b, mu[1], StateVar::X, "x")] {
        let h = format!("{m}*(1 + {name}^2)");
        checks.push(bound(e(&h), e(env.f), state_box()));
        checks.push(Check::Growth(GrowthData {
            f: e(&h),
            exponent: 1.0,
            limit: Limit::UnboundedAtInfinity,
            var,
            t: None,
            others: vec![1e-6, 1e-3, 1.0, 1e3, 1e6],
        }));
    }
    spec("B10", checks)
}

fn ch3_ex_3_2_39() -> ExampleRecord {
    let (mu1, mu2) = (0.1, 0.05);
    let (p, q) = (format!("{mu1}"), format!("{mu2}"));
    let (a, b) = multiplicity_envelopes();
    let hyps = vec![
        b1(&p, &q),
        b2(a.f, b.f),
        b3(&a, &b),
        sup_ratio("B4", SupVariant::Nested, &a, &b, &p, &q, [0.0, 0.0]),
        b5(&a, &b),
        b8(&a, &b, [mu1, mu2]),
        spec(
            "B9",
            vec![
                Check::ComposedIntegrable {
                    p: e(&p),
                    outer: e(a.v),
                    arg: e("1/t"),
                    scales: vec![0.1, 1.0, 10.0],
                    interval: [0.0, 1.0],
                },
                Check::ComposedIntegrable {
                    p: e(&q),
                    outer: e(b.v),
                    arg: e("1/t"),
                    scales: vec![0.1, 1.0, 10.0],
                    interval: [0.0, 1.0],
                },
                nested(&p, a.u, &format!("t^(1/2)*{mu1}*{mu1}")),
                nested(&q, b.u, &format!("t^(1/2)*{mu2}*{mu2}")),
            ],
        ),
        b10(&a, &b, [mu1, mu2]),
    ];
    ch3_record(
        "ch3_ex_3_2_39",
        "ch3/dirichlet-neumann/multiplicity",
        "superlinear-in-state system with two positive solutions",
        ch3_problem(
            BoundarySpec::DirichletNeumann,
            &p,
            &q,
            a.f,
            b.f,
            Regularization::ShiftDerivative,
        ),
        hyps,
    )
}

fn robin_unit() -> BoundarySpec {
    BoundarySpec::RobinNeumann {
        a1: 1.0,
        b1: 1.0,
        a2: 1.0,
        b2: 1.0,
    }
}

fn ch3_ex_3_3_26() -> ExampleRecord {
    let (p, q) = ("(1-t)^(-3/4)", "(1-t)^(-1/4)");
    let a = Envelope {
        f: "y^(1/4)*d^(-1/2)",
        other: Var::Y,
        k: "x^(1/4)",
        u: "x^(-1/2)",
        v: "0",
    };
    let b = Envelope {
        f: "x^(3/4)*d^(-1/4)",
        other: Var::X,
        k: "x^(3/4)",
        u: "x^(-1/4)",
        v: "0",
    };
    let big_f = 10.0;
    let hyps = vec![
        b1(p, q),
        b2(a.f, b.f),
        b3(&a, &b),
        b5(&a, &b),
        spec(
            "B6",
            vec![
                lower(a.f, &format!("{big_f}^(-1/2)"), Var::Y, 0.25, 10.0, big_f),
                lower(b.f, &format!("{big_f}^(-1/4)"), Var::X, 0.75, 10.0, big_f),
                exponents(ExponentRule::Subunit, &[0.25, 0.75]),
            ],
        ),
        sup_ratio("B11", SupVariant::NestedRobin, &a, &b, p, q, [1.0, 1.0]),
        spec(
            "B12",
            vec![
                nested(p, a.u, &format!("({p})*{big_f}^(-1/2)")),
                nested(q, b.u, &format!("({q})*{big_f}^(-1/4)")),
            ],
        ),
    ];
    ch3_record(
        "ch3_ex_3_3_26",
        "ch3/robin-neumann/existence",
        "Robin-Neumann system with weights singular at the right end",
        ch3_problem(robin_unit(), p, q, a.f, b.f, Regularization::RetractionBox),
        hyps,
    )
}

fn ch3_ex_3_4_43() -> ExampleRecord {
    let (mu1, mu2) = (0.05, 0.02);
    let (p, q) = (format!("{mu1}"), format!("{mu2}"));
    let (a, b) = multiplicity_envelopes();
    let hyps = vec![
        b1(&p, &q),
        b2(a.f, b.f),
        b3(&a, &b),
        b5(&a, &b),
        b8(&a, &b, [mu1, mu2]),
        b10(&a, &b, [mu1, mu2]),
        sup_ratio("B11", SupVariant::NestedRobin, &a, &b, &p, &q, [1.0, 1.0]),
        spec(
            "B13",
            vec![
                nested(&p, a.u, &format!("{mu1}*{mu1}")),
                nested(&q, b.u, &format!("{mu2}*{mu2}")),
            ],
        ),
    ];
    ch3_record(
        "ch3_ex_3_4_43",
        "ch3/robin-neumann/multiplicity",
        "Robin-Neumann superlinear system with two positive solutions",
        ch3_problem(robin_unit(), &p, &q, a.f, b.f, Regularization::ShiftDerivative),
        hyps,
    )
}

fn ch3_ex_4_2_21() -> ExampleRecord {
    let nu: f64 = 0.1;
    let c = nu.powf(1.5);
    let f = format!("{c}*x^(1/2)*y^(1/4)*d^(-1/2)");
    let g = format!("{c}*x^(1/4)*y^(1/2)*d^(-1/2)");
    let xyd = state_box();
    let (m, l) = (10.0, 10.0);
    let ml_box = unit_t()
        .with(StateVar::X, 0.0, m)
        .with(StateVar::Y, 0.0, m)
        .with(StateVar::D, 0.0, l);
    // The factored reading f ≤ h(x) k(y) (u + v)(d).
    let hyps = vec![
        b1("1", "1"),
        b2(&f, &g),
        spec(
            "B3",
            vec![
                bound(
                    e(&f),
                    e(&format!("({c}*x^(1/2)) * y^(1/4) * (d^(-1/2) + 0)")),
                    xyd.clone(),
                ),
                bound(e(&g), e(&format!("({c}*x^(1/4)) * y^(1/2) * (d^(-1/2) + 0)")), xyd),
                monotone1("x^(-1/2)", Direction::Nonincreasing, true),
                monotone1(&format!("{c}*x^(1/2)"), Direction::Nondecreasing, false),
                monotone1(&format!("{c}*x^(1/4)"), Direction::Nondecreasing, false),
                monotone1("x^(1/4)", Direction::Nondecreasing, false),
                monotone1("x^(1/2)", Direction::Nondecreasing, false),
            ],
        ),
        spec(
            "B5",
            vec![Check::TransformUnbounded {
                u: e("x^(-1/2)"),
                v: e("0"),
            }],
        ),
        spec(
            "B14",
            vec![Check::SupRatio(SupRatioData {
                variant: SupVariant::Additive,
                k1: e("x^(1/4)"),
                k2: e("x^(1/2)"),
                h1: e(&format!("{c}*x^(1/2)")),
                h2: e(&format!("{c}*x^(1/4)")),
                u1: e("x^(-1/2)"),
                v1: e("0"),
                u2: e("x^(-1/2)"),
                v2: e("0"),
                p_int: None,
                q_int: None,
                p: Some(e("1")),
                q: Some(e("1")),
                interval: [0.0, 1.0],
                robin: [1.0, 1.0],
            })],
        ),
        spec(
            "B16",
            vec![
                bound(e(&format!("{c}*{l}^(-1/2)*x^(1/2)*y^(1/4)")), e(&f), ml_box.clone()),
                bound(e(&format!("{c}*{l}^(-1/2)*x^(1/4)*y^(1/2)")), e(&g), ml_box),
                exponents(ExponentRule::Subunit, &[0.5, 0.25, 0.25, 0.5]),
                exponents(ExponentRule::CrossProductDistinct, &[0.5, 0.25, 0.25, 0.5]),
            ],
        ),
        spec(
            "B17",
            vec![
                nested("1", "x^(-1/2)", &format!("t^(1/4)*{c}*{l}^(-1/2)")),
                nested("1", "x^(-1/2)", &format!("t^(1/2)*{c}*{l}^(-1/2)")),
            ],
        ),
    ];
    let bc = BoundarySpec::TwoPointCoupledRobin {
        a1: 1.0,
        b1: 1.0,
        a2: 1.0,
        b2: 1.0,
    };
    ch3_record(
        "ch3_ex_4_2_21",
        "ch3/coupled-robin/existence",
        "coupled Robin system with nonlinearities depending on both states",
        ch3_problem(bc, "1", "1", &f, &g, Regularization::RetractionBox),
        hyps,
    )
}

// ---------------------------------------------------------------------------
// Chapter 5: half-line problems.

const CH5_M: f64 = 1.0;
const CH5_ALPHA: f64 = 0.5;
const CH5_EXPONENTS: [(f64, f64); 2] = [(0.5, 0.25), (0.25, 0.5)];

/// Largest admissible `ν` for the half-line example; `robin` is `b/a`.
pub fn ch5_nu_bound(robin: f64) -> f64 {
    let (m, a) = (CH5_M, CH5_ALPHA);
    let sum: f64 = CH5_EXPONENTS
        .iter()
        .map(|(g, d)| {
            (robin + a + 2.0)
                * (a + 1.0).powf(1.0 / (a + 1.0))
                * (2.0 * m + 1.0).powf(2.0 / (a + 1.0))
                * m.powf((g + d) / (a + 1.0))
        })
        .sum();
    m / sum
}

fn ch5_record(robin: Option<f64>) -> ExampleRecord {
    let r = robin.unwrap_or(0.0);
    let nu = ch5_nu_bound(r) / 2.0;
    let (m, a) = (CH5_M, CH5_ALPHA);
    let scale = nu.powf(a + 1.0);
    let mp1 = m + 1.0;
    let fs: Vec<String> = CH5_EXPONENTS
        .iter()
        .map(|(g, d)| format!("{scale}*exp(-t)*({mp1}-x)*({mp1}-y)*abs(x)^{g}*abs(y)^{d}*abs(d)^(-{a})"))
        .collect();
    let hs: Vec<String> = CH5_EXPONENTS
        .iter()
        .map(|(g, _)| format!("{scale}*({mp1}+x)*x^{g}"))
        .collect();
    let ks: Vec<String> = CH5_EXPONENTS.iter().map(|(_, d)| format!("({mp1}+x)*x^{d}")).collect();
    let u = format!("x^(-{a})");
    let p = "exp(-t)";
    let half = half_t();
    let mut state = half.clone();
    for v in [StateVar::X, StateVar::Y, StateVar::D] {
        state = state.with(v, 0.0, m);
    }
    let mut hyps = vec![
        spec(
            "C1",
            vec![
                Check::Integrable {
                    weight: e("1"),
                    envelope: e(p),
                    interval: [0.0, INF],
                },
                positive(p, half.clone()),
            ],
        ),
        spec(
            "C2",
            fs.iter()
                .map(|f| Check::Finite {
                    f: e(f),
                    region: half
                        .clone()
                        .with(StateVar::X, 0.0, 10.0)
                        .with(StateVar::Y, 0.0, 10.0)
                        .with(StateVar::D, 0.0, 10.0),
                })
                .collect(),
        ),
    ];
    let mut c3 = Vec::new();
    for i in 0..2 {
        let rhs = mul(
            &mul(
                &on(&hs[i], Var::X).rebind_abs(Var::X),
                &on(&ks[i], Var::Y).rebind_abs(Var::Y),
            ),
            &on(&u, Var::D).rebind_abs(Var::D),
        );
        c3.push(bound(
            e(&format!("abs({})", fs[i])),
            rhs,
            half.clone()
                .with(StateVar::X, 0.0, 10.0)
                .with(StateVar::Y, 0.0, 10.0)
                .with(StateVar::D, 0.0, 10.0),
        ));
        c3.push(monotone1(&u, Direction::Nonincreasing, true));
        c3.push(monotone1(&hs[i], Direction::Nondecreasing, false));
        c3.push(monotone1(&ks[i], Direction::Nondecreasing, false));
        c3.push(monotone1("0", Direction::Nondecreasing, false));
    }
    hyps.push(spec("C3", c3));
    let omega = |label: &str| {
        spec(
            label,
            vec![Check::Omega(OmegaData {
                m,
                eps: 1e-3,
                horizon: 64.0,
                components: (0..2)
                    .map(|i| OmegaComponent {
                        h: e(&hs[i]),
                        k: e(&ks[i]),
                        u: e(&u),
                        v: e("0"),
                        p: e(p),
                        robin_ratio: r,
                    })
                    .collect(),
            })],
        )
    };
    if robin.is_none() {
        hyps.push(omega("C4"));
    }
    hyps.push(spec(
        "C5",
        vec![
            Check::TransformUnbounded { u: e(&u), v: e("0") },
            Check::TransformUnbounded { u: e(&u), v: e("0") },
        ],
    ));
    hyps.push(spec("C6", fs.iter().map(|f| positive(f, state.clone())).collect()));
    let mut c7: Vec<Check> = fs
        .iter()
        .zip(CH5_EXPONENTS)
        .map(|(f, (g, d))| {
            bound(
                e(&format!("{scale}*{m}^(-{a})*exp(-t)*x^{g}*y^{d}")),
                e(f),
                state.clone(),
            )
        })
        .collect();
    c7.push(exponents(ExponentRule::Subunit, &[0.5, 0.25, 0.25, 0.5]));
    c7.push(exponents(ExponentRule::CrossProductDistinct, &[0.5, 0.25, 0.25, 0.5]));
    hyps.push(spec("C7", c7));
    if robin.is_some() {
        hyps.push(omega("C8"));
    }
    let (id, anchor, summary, bc) = match robin {
        None => (
            "ch5_ex_dirichlet",
            "ch5/half-line/dirichlet",
            "half-line system with Dirichlet start and decaying forcing",
            BoundarySpec::HalfLineDirichlet,
        ),
        Some(ratio) => (
            "ch5_ex_robin",
            "ch5/half-line/robin",
            "half-line system with Robin start and decaying forcing",
            BoundarySpec::HalfLineRobin {
                a1: 1.0,
                b1: ratio,
                a2: 1.0,
                b2: ratio,
            },
        ),
    };
    ExampleRecord {
        id,
        anchor,
        summary,
        problem: ProblemSpec {
            lo: 0.0,
            hi: INF,
            bc,
            p: e(p),
            q: e(p),
            f: e(&fs[0]),
            g: e(&fs[1]),
            regularization: Regularization::RetractionBox,
            singular: Singularity {
                x: false,
                y: false,
                d: true,
                endpoints: false,
            },
            clamp: Some(m),
        },
        expected: all_hold(&hyps),
        hypotheses: hyps,
    }
}

trait RebindAbs {
    fn rebind_abs(self, var: Var) -> Expr;
}

impl RebindAbs for Expr {
    /// Evaluates the bound at `|var|`.
    fn rebind_abs(self, var: Var) -> Expr {
        self.rebind(&e(&format!("abs({})", var.name())))
    }
}

/// Every worked example, in the order they appear.
pub fn registry() -> Vec<ExampleRecord> {
    vec![
        ch2_ex1(),
        ch2_ex2(),
        ch2_ex3(),
        ch2_ex4(),
        ch2_shift_state(),
        ch2_four_point_sublinear(),
        ch2_four_point_singular(),
        ch3_ex_3_1_26(),
        ch3_ex_3_2_39(),
        ch3_ex_3_3_26(),
        ch3_ex_3_4_43(),
        ch3_ex_4_2_21(),
        ch5_record(None),
        ch5_record(Some(1.0)),
    ]
}

pub fn find(id: &str) -> Option<ExampleRecord> {
    registry().into_iter().find(|r| r.id == id)
}
