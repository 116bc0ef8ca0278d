use chb_core::graphs::linspace;
use chb_core::{check_domination, check_same_growth, GraphSpec, Perturbation};
use proptest::prelude::*;

fn graph() -> impl Strategy<Value = GraphSpec> {
    prop_oneof![
        Just(GraphSpec::Zero),
        (prop::sample::select(vec![3u32, 5, 7]), 0.1..5.0f64)
            .prop_map(|(exponent, coefficient)| GraphSpec::PowerOdd { exponent, coefficient }),
        (0.1..3.0f64).prop_map(|scale| GraphSpec::Logarithmic { scale }),
        (-2.0..0.0f64, 0.1..3.0f64).prop_map(|(lower, width)| GraphSpec::DoubleObstacle { lower, upper: lower + width }),
    ]
}

fn lambda() -> impl Strategy<Value = f64> {
    (-4.0..0.0f64).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #[test]
    fn resolvent_solves_inclusion(g in graph(), r in -4.0..4.0f64, lambda in lambda()) {
        let x = g.resolvent(r, lambda).unwrap();
        prop_assert!(g.domain().contains(x));
        match g {
            GraphSpec::DoubleObstacle { lower, upper } => {
                // r − x lies in the normal cone at x
                let d = r - x;
                prop_assert!(d == 0.0 || (d > 0.0 && x == upper) || (d < 0.0 && x == lower));
            }
            GraphSpec::Logarithmic { .. } if x.abs() > 0.999 => {}
            _ => {
                let beta = g.minimal_section(x).unwrap();
                prop_assert!((x + lambda * beta - r).abs() <= 1e-12 * r.abs().max(1.0));
            }
        }
    }

    #[test]
    fn resolvent_is_nondecreasing(g in graph(), a in -4.0..4.0f64, b in -4.0..4.0f64, lambda in lambda()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(g.resolvent(lo, lambda).unwrap() <= g.resolvent(hi, lambda).unwrap());
    }

    #[test]
    fn envelope_derivative_is_yosida(g in graph(), r in -2.0..2.0f64, lambda in (-3.0..0.0f64).prop_map(|e| 10f64.powf(e))) {
        let h = 1e-5 * lambda;
        let fd = (g.yosida_primitive(r + h, lambda).unwrap() - g.yosida_primitive(r - h, lambda).unwrap()) / (2.0 * h);
        let b = g.yosida(r, lambda).unwrap();
        prop_assert!((fd - b).abs() <= 1e-4 * (1.0 + b.abs()), "fd {fd} vs {b}");
    }

    #[test]
    fn yosida_grows_as_lambda_shrinks(g in graph(), r in -4.0..4.0f64, lambda in lambda(), shrink in 1.0..100.0f64) {
        let coarse = g.yosida(r, lambda).unwrap().abs();
        let fine = g.yosida(r, lambda / shrink).unwrap().abs();
        prop_assert!(fine >= coarse * (1.0 - 1e-12) - 1e-12, "{fine} < {coarse}");
    }

    #[test]
    fn yosida_derivative_is_bounded(g in graph(), r in -4.0..4.0f64, lambda in lambda()) {
        let d = g.yosida_derivative(r, lambda).unwrap();
        prop_assert!((0.0..=1.0 / lambda * (1.0 + 1e-12)).contains(&d));
    }

    #[test]
    fn tabulated_primitive_differentiates_to_eval(
        values in prop::collection::vec(-3.0..3.0f64, 2..6),
        x in -3.0..3.0f64,
    ) {
        let points = linspace(-2.0, 2.0, values.len());
        let p = Perturbation::Tabulated { points, values };
        p.validate().unwrap();
        let h = 1e-6;
        let fd = (p.primitive(x + h) - p.primitive(x - h)) / (2.0 * h);
        let lip = p.lipschitz_constant();
        // a kink inside [x − h, x + h] shifts the difference by at most lip·h
        prop_assert!((fd - p.eval(x)).abs() <= lip * h + 1e-8);
        prop_assert_eq!(p.primitive(0.0), 0.0);
    }

    #[test]
    fn graph_dominates_itself(g in graph()) {
        let samples = match g {
            GraphSpec::DoubleObstacle { lower, upper } => linspace(lower, upper, 41),
            _ => linspace(-0.95, 0.95, 41),
        };
        let rep = check_domination(&g, &g, &samples).unwrap();
        prop_assert!(rep.feasible && rep.domain_contained);
        let same = check_same_growth(&g, &g, &samples).unwrap();
        prop_assert!(same.feasible);
    }
}

#[test]
fn quintic_bulk_is_not_dominated_by_cubic_boundary() {
    let bulk = GraphSpec::PowerOdd { exponent: 5, coefficient: 1.0 };
    // |r|⁵ / (|r|³ + 1) is unbounded, so no (ρ₁, c₁) works on a wide grid
    let ratio = |r: f64| r.abs().powi(5) / (r.abs().powi(3) + 1.0);
    assert!(ratio(40.0) > 4.0 * ratio(10.0));
    let rep = check_domination(&bulk, &GraphSpec::CUBIC, &linspace(-10.0, 10.0, 201)).unwrap();
    assert!(rep.domain_contained);
    assert!(!rep.feasible);
    assert!(rep.violation.is_some());
}

#[test]
fn zero_bulk_under_obstacle_boundary_is_feasible() {
    let obstacle = GraphSpec::DoubleObstacle { lower: -1.0, upper: 1.0 };
    let rep = check_domination(&GraphSpec::Zero, &obstacle, &linspace(-0.99, 0.99, 50)).unwrap();
    assert!(rep.feasible);
    assert_eq!(rep.c1, 0.0);
}

#[test]
fn narrower_bulk_domain_is_rejected() {
    let bulk = GraphSpec::DoubleObstacle { lower: -0.5, upper: 0.5 };
    let rep = check_domination(&bulk, &GraphSpec::CUBIC, &linspace(-0.4, 0.4, 9)).unwrap();
    assert!(!rep.domain_contained && !rep.feasible);
}
