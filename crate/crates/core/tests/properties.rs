mod common;

use common::*;

fn check(result: Result<(), String>) {
    if let Err(e) = result {
        panic!("{e}");
    }
}

#[test]
fn expression_round_trip() {
    check(run_property(1000, false, expr_strategy(), expr_round_trip));
}

#[test]
fn precedence_matches_reference_evaluator() {
    check(run_property(1000, false, arithmetic_strategy(), precedence_matches));
}

#[test]
fn kernels_nonnegative_and_symmetric() {
    check(run_property(2000, false, kernel_case(), kernel_nonnegative_symmetric));
}

#[test]
fn apply_t_keeps_cone_members_in_the_cone() {
    for id in CONE_EXAMPLES {
        let fx = cone_fixture(id);
        check(run_property(50, false, member_strategy(), |m| cone_invariance(&fx, m)));
    }
}

#[test]
fn stages_are_concave_with_derivative_floor() {
    for id in CH3_EXAMPLES {
        let n = stage_invariants(id, 4).unwrap_or_else(|e| panic!("{e}"));
        assert!(n >= 2, "{id}: only {n} stage");
    }
}

#[test]
fn solves_are_bit_identical() {
    for id in ["ch2_ex6_four_point_sublinear", "ch3_ex_3_1_26"] {
        check(deterministic(id));
    }
}

#[test]
fn cone_check_rejects_non_members() {
    let nodes: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    let falling: Vec<f64> = nodes.iter().map(|t| 1.0 - t).collect();
    let spike: Vec<f64> = nodes
        .iter()
        .map(|&t| if (t - 0.5).abs() < 0.02 { 1.0 } else { 0.0 })
        .collect();
    for bc in [
        sbvp::kernels::BoundarySpec::DirichletNeumann,
        sbvp::kernels::BoundarySpec::ThreePoint {
            alpha: 2.0,
            eta: 1.0 / 3.0,
        },
        sbvp::kernels::BoundarySpec::FourPointCoupled {
            alpha: 1.0,
            beta: 1.0,
            xi: 0.5,
            eta: 0.5,
        },
    ] {
        let shape = ConeShape::of(&bc).unwrap();
        assert!(shape.slack(&nodes, &spike) < -CONE_SLACK, "{bc:?}");
        if matches!(bc, sbvp::kernels::BoundarySpec::DirichletNeumann) {
            assert!(shape.slack(&nodes, &falling) < -CONE_SLACK);
        }
    }
}
