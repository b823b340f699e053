use henonlab::basins::*;
use henonlab::family::{Escaped, HenonMap};
use henonlab::jet::Jet;
use henonlab::linalg::{Mat2, Point2};
use henonlab::manifolds::{evaluate, unstable_series, ManifoldSeries};
use henonlab::maps::{Iterate, LinearMap, PlaneMap};
use henonlab::periodic::{solve_periodic, OrbitType, PeriodicOrbit};
use henonlab::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn origin_sink(k1: f64, k2: f64) -> PeriodicOrbit {
    PeriodicOrbit {
        points: vec![Point2::zero()],
        period: 1,
        multipliers: (c(k1), c(k2)),
        kind: OrbitType::Sink,
        residual: 0.0,
        prime: true,
    }
}

/// (0.5z, 0.25w + z²): resonant with κ₂ = κ₁².
struct Resonant;

impl PlaneMap for Resonant {
    fn eval(&self, x: Point2) -> Result<Point2, Escaped> {
        Ok(Point2::new(x.z * 0.5, x.w * 0.25 + x.z * x.z))
    }
    fn differential(&self, x: Point2) -> Mat2 {
        Mat2::new(c(0.5), c(0.0), x.z * 2.0, c(0.25))
    }
    fn eval_jet(&self, z: &Jet, w: &Jet) -> Option<(Jet, Jet)> {
        Some((z.scale(c(0.5)), &w.scale(c(0.25)) + &(z * z)))
    }
}

/// (x + x² + 0.3x³, y/2): normalized semi-parabolic germ with k = 1 and c = 0.7.
struct Cubic;

impl PlaneMap for Cubic {
    fn eval(&self, x: Point2) -> Result<Point2, Escaped> {
        let z = x.z;
        Ok(Point2::new(z + z * z + z * z * z * 0.3, x.w * 0.5))
    }
    fn differential(&self, x: Point2) -> Mat2 {
        let z = x.z;
        Mat2::new(c(1.0) + z * 2.0 + z * z * 0.9, c(0.0), c(0.0), c(0.5))
    }
    fn eval_jet(&self, z: &Jet, w: &Jet) -> Option<(Jet, Jet)> {
        Some((z.poly(&[c(0.0), c(1.0), c(1.0), c(0.3)]), w.scale(c(0.5))))
    }
}

struct HenonSetup {
    map: HenonMap,
    lin: SinkLinearization,
    series: ManifoldSeries,
}

fn henon_setup() -> HenonSetup {
    let map = HenonMap::quadratic(c(0.225), c(0.05)).unwrap();
    let sink = solve_periodic(&map, 1, Point2::real(0.3, 0.3), 1e-13).unwrap();
    let saddle = solve_periodic(&map, 1, Point2::real(0.75, 0.75), 1e-13).unwrap();
    let lin = linearize_sink(&Iterate::forward(&map, 1), &sink, 12).unwrap();
    let series = unstable_series(&map, &saddle, 40).unwrap();
    HenonSetup { map, lin, series }
}

fn model() -> (ParabolicModel, FatouData) {
    let f = ParabolicModel { contraction: c(0.5) };
    let fd = fatou_data(&f, 0, 0.5, 0.0).unwrap();
    (f, fd)
}

#[test]
fn henon_sink_linearization() {
    let s = henon_setup();
    assert!((s.lin.eigenvalues.0 - c(0.5)).norm() < 1e-12);
    assert!((s.lin.eigenvalues.1 - c(0.1)).norm() < 1e-12);
    assert!(s.lin.resonance.is_none());
    assert!(s.lin.residual < 1e-10, "{}", s.lin.residual);
    let p = s.lin.sink.points[0];
    assert!((p - Point2::real(0.3, 0.3)).norm() < 1e-13);
    assert_eq!(strong_stable_value(&Iterate::forward(&s.map, 1), &s.lin, p, 100).unwrap(), c(0.0));
}

#[test]
fn resonant_map_keeps_the_resonant_term() {
    let lin = linearize_sink(&Resonant, &origin_sink(0.5, 0.25), 10).unwrap();
    assert_eq!(lin.resonance, Some(2));
    assert_eq!(lin.alpha, c(1.0));
    assert!(lin.residual < 1e-12, "{}", lin.residual);
    let x = Point2::new(C64::new(0.4, -0.3), C64::new(0.2, 0.1));
    let v = strong_stable_value(&Resonant, &lin, x, 200).unwrap();
    assert!((v - x.z).norm() < 1e-12);
}

#[test]
fn equal_moduli_refuse_projection() {
    let f = LinearMap(Mat2::new(c(0.5), c(0.0), c(0.0), c(-0.5)));
    let lin = linearize_sink(&f, &origin_sink(0.5, -0.5), 6).unwrap();
    assert!(lin.resonance.is_none());
    let r = strong_stable_value(&f, &lin, Point2::real(0.1, 0.1), 100);
    assert_eq!(r, Err(BasinError::NoStrongStableSplitting));
}

#[test]
fn henon_cocycle_on_random_basin_points() {
    let s = henon_setup();
    let f = Iterate::forward(&s.map, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 200 {
        let x = Point2::new(
            C64::new(0.3 + rng.gen_range(-0.4..0.4), rng.gen_range(-0.3..0.3)),
            C64::new(0.3 + rng.gen_range(-0.4..0.4), rng.gen_range(-0.3..0.3)),
        );
        let Ok(v) = strong_stable_value(&f, &s.lin, x, 2000) else { continue };
        let fx = f.eval(x).unwrap();
        let fv = strong_stable_value(&f, &s.lin, fx, 2000).unwrap();
        assert!((fv - s.lin.eigenvalues.0 * v).norm() < 1e-9 * v.norm().max(1.0), "{x:?}");
        let mut y = x;
        for n in 1..=20 {
            y = f.eval(y).unwrap();
            let vn = strong_stable_value(&f, &s.lin, y, 2000).unwrap();
            let expect = s.lin.eigenvalues.0.powu(n) * v;
            assert!((vn - expect).norm() < 1e-7 * v.norm().max(1.0));
        }
        checked += 1;
    }
}

#[test]
fn escaping_point_is_not_in_basin() {
    let s = henon_setup();
    let r = strong_stable_value(&Iterate::forward(&s.map, 1), &s.lin, Point2::real(3.0, 0.0), 500);
    assert!(matches!(r, Err(BasinError::NotInBasin(_))));
}

#[test]
fn model_fatou_coordinate_is_reciprocal() {
    let (f, fd) = model();
    let x = Point2::new(c(-0.1), c(0.05));
    let v = fatou_coordinate(&f, &fd, x, 100_000).unwrap();
    assert!((v - c(-10.0)).norm() < 1e-8, "{v}");
}

#[test]
fn model_translation_identity_on_sector_points() {
    let (f, fd) = model();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 100 {
        let x = C64::new(rng.gen_range(-0.5..0.0), rng.gen_range(-0.25..0.25));
        if !fd.in_petal(x, fd.eta) {
            continue;
        }
        let p = Point2::new(x, C64::new(rng.gen_range(-1.0..1.0), 0.0));
        let v = fatou_coordinate(&f, &fd, p, 100_000).unwrap();
        let fv = fatou_coordinate(&f, &fd, f.eval(p).unwrap(), 100_000).unwrap();
        assert!((fv - (v - 1.0)).norm() < 1e-8);
        assert!((v - x.inv()).norm() < 1e-8 * x.inv().norm());
        checked += 1;
    }
}

#[test]
fn orbit_asymptotics_exponent() {
    let f = Cubic;
    let mut p = Point2::new(c(-0.1), c(0.0));
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for n in 1..=20_000usize {
        p = f.eval(p).unwrap();
        if n >= 1000 && n % 100 == 0 {
            xs.push((n as f64).ln());
            ys.push(p.z.norm().ln());
        }
    }
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    assert!((slope + 1.0).abs() < 0.05, "{slope}");
}

#[test]
fn log_coefficient_from_jet() {
    let fd = fatou_data(&Cubic, 0, 0.3, 0.0).unwrap();
    assert_eq!(fd.k, 1);
    assert!((fd.c - c(0.7)).norm() < 1e-12);
    assert!(!fd.fitted);
    // The functional equation for a germ without a closed form.
    for x in [C64::new(-0.1, 0.0), C64::new(-0.05, 0.03), C64::new(-0.2, -0.05)] {
        let p = Point2::new(x, c(0.1));
        let v = fatou_coordinate(&Cubic, &fd, p, 1_000_000).unwrap();
        let fv = fatou_coordinate(&Cubic, &fd, Cubic.eval(p).unwrap(), 1_000_000).unwrap();
        assert!((fv - (v - 1.0)).norm() < 1e-8, "{x}: {}", (fv - (v - 1.0)).norm());
    }
}

#[test]
fn repelling_side_needs_the_orbit_extension() {
    let (f, fd) = model();
    let x = Point2::new(c(0.1), c(0.0));
    let r = fatou_coordinate(&f, &fd, x, 5);
    assert!(matches!(r, Err(BasinError::NotInPetal(_))));
    // The Möbius orbit of 0.1 passes the pole and enters the petal; 1/x still conjugates.
    let v = fatou_coordinate(&f, &fd, x, 1000).unwrap();
    assert!((v - c(10.0)).norm() < 1e-6, "{v}");
}

#[test]
fn synthetic_parabola_has_one_critical_point() {
    let f = LinearMap(Mat2::new(c(0.5), c(0.0), c(0.0), c(0.1)));
    let lin = linearize_sink(&f, &origin_sink(0.5, 0.1), 6).unwrap();
    let curve = |t: C64| Some(Point2::new(t * t, t));
    let h = |t: C64| strong_stable_value(&f, &lin, curve(t)?, 100).ok();
    let disk = SearchDisk { center: C64::new(0.05, -0.02), radius: 1.0 };
    let rep = critical_points_of(&h, &curve, &disk, 1e-6, FibrationKind::StrongStable);
    assert_eq!(rep.boundary_count, Some(1));
    assert_eq!(rep.refined_count, 1);
    assert_eq!(rep.points.len(), 1);
    let p = &rep.points[0];
    assert!(p.t_star[0].hypot(p.t_star[1]) < 1e-8);
    assert_eq!(p.degree, 1);
    assert_eq!(p.cert.winding, 1);
    assert!(rep.holes.is_empty());
}

#[test]
fn henon_critical_points_are_certified() {
    let s = henon_setup();
    let disk = SearchDisk { center: C64::new(0.1313, 0.3265), radius: 0.02 };
    let rep = critical_points(&s.map, &s.lin, &s.series, &disk, 1e-6, 3000);
    assert_eq!(rep.dissipative_hypothesis, Some(true));
    assert!(rep.holes.is_empty());
    assert!(!rep.points.is_empty());
    assert_eq!(rep.boundary_count, Some(rep.refined_count));
    for p in &rep.points {
        assert!(p.derivative < 1e-6);
        assert_eq!(p.cert.winding, p.degree);
        assert_eq!(p.fibration, FibrationKind::StrongStable);
    }
    let json = serde_json::to_value(&rep.points[0]).unwrap();
    assert_eq!(json["fibration"], "strong_stable");
    assert!(json["cert"]["winding"].is_i64());
    assert_eq!(json["t_star"].as_array().unwrap().len(), 2);
}

#[test]
fn critical_points_follow_the_unstable_multiplier() {
    // h(ψ(κt)) = κ₁·h(ψ(t)) maps critical points t* to κ·t*.
    let s = henon_setup();
    let disk = SearchDisk { center: C64::new(0.1313, 0.3265), radius: 0.02 };
    let rep = critical_points(&s.map, &s.lin, &s.series, &disk, 1e-6, 3000);
    let t = C64::new(rep.points[0].t_star[0], rep.points[0].t_star[1]) * s.series.eigenvalue;
    let image = critical_points(&s.map, &s.lin, &s.series, &SearchDisk { center: t, radius: 0.02 }, 1e-6, 3000);
    let found = image.points.iter().map(|p| (C64::new(p.t_star[0], p.t_star[1]) - t).norm()).fold(f64::INFINITY, f64::min);
    assert!(found < 1e-6, "{found}");
}

#[test]
fn winding_count_matches_refined_zeros_on_random_subdisks() {
    let s = henon_setup();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut certified = 0;
    for _ in 0..20 {
        let disk = SearchDisk {
            center: C64::new(rng.gen_range(0.0..0.8), rng.gen_range(0.15..1.2)),
            radius: rng.gen_range(0.02..0.1),
        };
        let rep = critical_points(&s.map, &s.lin, &s.series, &disk, 1e-6, 3000);
        if rep.holes.is_empty() {
            if let Some(n) = rep.boundary_count {
                assert_eq!(n, rep.refined_count, "{disk:?}");
                certified += 1;
            }
        }
    }
    assert!(certified >= 10, "{certified}");
}

#[test]
fn curve_points_of_critical_points_lie_in_the_basin() {
    let s = henon_setup();
    let disk = SearchDisk { center: C64::new(0.1313, 0.3265), radius: 0.02 };
    let rep = critical_points(&s.map, &s.lin, &s.series, &disk, 1e-6, 3000);
    let f = s.series.dynamics(&s.map);
    for p in &rep.points {
        let x = evaluate(&s.series, C64::new(p.t_star[0], p.t_star[1]), &f).unwrap();
        assert!(strong_stable_value(&Iterate::forward(&s.map, 1), &s.lin, x, 3000).is_ok());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cocycle_property(re in -0.1f64..0.7, im in -0.2f64..0.2, wre in -0.1f64..0.7) {
        let s = henon_setup();
        let f = Iterate::forward(&s.map, 1);
        let x = Point2::new(C64::new(re, im), C64::new(wre, 0.0));
        if let Ok(v) = strong_stable_value(&f, &s.lin, x, 2000) {
            let fv = strong_stable_value(&f, &s.lin, f.eval(x).unwrap(), 2000).unwrap();
            prop_assert!((fv - s.lin.eigenvalues.0 * v).norm() < 1e-9 * v.norm().max(1.0));
        }
    }

    #[test]
    fn translation_property(re in -0.45f64..-0.01, im in -0.2f64..0.2) {
        let (f, fd) = model();
        let x = C64::new(re, im);
        prop_assume!(fd.in_petal(x, fd.eta));
        let p = Point2::new(x, c(0.3));
        let v = fatou_coordinate(&f, &fd, p, 100_000).unwrap();
        let fv = fatou_coordinate(&f, &fd, f.eval(p).unwrap(), 100_000).unwrap();
        prop_assert!((fv - (v - 1.0)).norm() < 1e-8);
    }
}
