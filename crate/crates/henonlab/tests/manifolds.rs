use henonlab::family::HenonMap;
use henonlab::linalg::{Mat2, Point2};
use henonlab::manifolds::*;
use henonlab::maps::{LinearMap, PlaneMap};
use henonlab::periodic::{solve_periodic, OrbitType, PeriodicOrbit};
use henonlab::C64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn canonical() -> (HenonMap, PeriodicOrbit) {
    let map = HenonMap::quadratic(C64::new(0.0, 0.0), C64::new(0.5, 0.0)).unwrap();
    let o = solve_periodic(&map, 1, Point2::real(1.4, 1.4), 1e-12).unwrap();
    (map, o)
}

#[test]
fn functional_equation_on_validity_circle() {
    let (map, o) = canonical();
    for s in [unstable_series(&map, &o, 40).unwrap(), stable_series(&map, &o, 40).unwrap()] {
        let f = s.dynamics(&map);
        let r = functional_residual(&s, &f, s.validity_radius, 256);
        assert!(r < 1e-8, "{:?}: residual {r:e}", s.kind);
        assert!(functional_residual(&s, &f, 0.5 * s.validity_radius, 256) < 1e-8);
        assert_eq!(evaluate(&s, C64::new(0.0, 0.0), &f).unwrap(), o.points[0]);
    }
}

#[test]
fn stable_eigenvalue_is_reciprocal() {
    let (map, o) = canonical();
    let s = stable_series(&map, &o, 40).unwrap();
    assert!((s.eigenvalue.re - 5.6457513).abs() < 1e-6);
    let inv = map.differential_inverse(o.points[0]);
    assert!((inv.apply(s.direction) - s.direction.scale(s.eigenvalue)).norm() < 1e-12);
}

#[test]
fn equivariance_at_radius_five() {
    let (map, o) = canonical();
    for s in [unstable_series(&map, &o, 40).unwrap(), stable_series(&map, &o, 40).unwrap()] {
        let f = s.dynamics(&map);
        for k in 0..100 {
            let t = C64::from_polar(5.0, 2.0 * PI * k as f64 / 100.0);
            let lhs = f.eval(evaluate(&s, t, &f).unwrap()).unwrap();
            let rhs = evaluate(&s, t * s.eigenvalue, &f).unwrap();
            assert!((lhs - rhs).norm() < 1e-7 * (1.0 + lhs.norm()));
        }
    }
}

#[test]
fn linear_harness_in_both_directions() {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let base = PeriodicOrbit {
        points: vec![Point2::zero()],
        period: 1,
        multipliers: (one * 2.0, one * 0.5),
        kind: OrbitType::Saddle,
        residual: 0.0,
        prime: true,
    };
    let forward = LinearMap(Mat2::new(one * 2.0, zero, zero, one * 0.5));
    let backward = LinearMap(Mat2::new(one * 0.5, zero, zero, one * 2.0));
    let u = series_from_dynamics(&forward, base.clone(), ManifoldKind::Unstable, one * 2.0, 20).unwrap();
    let s = series_from_dynamics(&backward, base, ManifoldKind::Stable, one * 2.0, 20).unwrap();
    for series in [&u, &s] {
        assert!(series.coefficients[2..].iter().all(|a| a.norm() == 0.0));
    }
    assert!((u.direction - Point2::real(1.0, 0.0)).norm() < 1e-15);
    assert!((s.direction - Point2::real(0.0, 1.0)).norm() < 1e-15);
}

#[test]
fn orders_of_growth() {
    let (map, o) = canonical();
    let radii = geometric_schedule(1.0, 1e4, 8);
    let u = unstable_series(&map, &o, 40).unwrap();
    let gu = order_estimate(&u, &u.dynamics(&map), &radii, 512);
    assert!((gu.rho_theory - 0.6680).abs() < 1e-4);
    assert!((gu.rho_hat - gu.rho_theory).abs() <= 0.15 * gu.rho_theory);
    assert!(gu.m1.windows(2).all(|w| w[0] <= w[1]));
    let s = stable_series(&map, &o, 40).unwrap();
    let gs = order_estimate(&s, &s.dynamics(&map), &radii, 512);
    assert!((gs.rho_theory - 0.4004).abs() < 1e-4);
    assert!((gs.rho_hat - gs.rho_theory).abs() <= 0.15 * gs.rho_theory);
    assert!(gs.m2.windows(2).all(|w| w[0] <= w[1]));
    let csv = gs.csv();
    assert!(csv.starts_with("r,M1,M2\n"));
    assert_eq!(csv.lines().count(), gs.radii.len() + 1);
}

#[test]
fn wiman_circles_for_low_order_series() {
    let (map, o) = canonical();
    let s = stable_series(&map, &o, 40).unwrap();
    let f = s.dynamics(&map);
    let k = map.default_escape_radius();
    let small = wiman_circles(&s, &f, k, 1e3);
    let large = wiman_circles(&s, &f, k, 1e6);
    assert!(!large.is_empty());
    for c in &small {
        assert!(large.iter().any(|d| d.radius == c.radius));
    }
    assert!(large.iter().all(|c| c.min_modulus > k && c.radius <= 1e6));
    let u = unstable_series(&map, &o, 40).unwrap();
    let _ = wiman_circles(&u, &u.dynamics(&map), k, 1e3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn equivariance_property(r in 0.0f64..30.0, theta in 0.0f64..(2.0 * PI)) {
        let (map, o) = canonical();
        let s = unstable_series(&map, &o, 30).unwrap();
        let f = s.dynamics(&map);
        let t = C64::from_polar(r, theta);
        let lhs = f.eval(evaluate(&s, t, &f).unwrap()).unwrap();
        let rhs = evaluate(&s, t * s.eigenvalue, &f).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-7 * (1.0 + lhs.norm()));
    }
}
