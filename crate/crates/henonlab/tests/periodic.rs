use henonlab::family::{Disk, HenonMap, ParamHenonFamily};
use henonlab::linalg::Point2;
use henonlab::periodic::*;
use henonlab::C64;
use nalgebra::Matrix4;
use proptest::prelude::*;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn family(b: f64) -> ParamHenonFamily {
    ParamHenonFamily::quadratic(c(b), Disk { center: c(0.0), radius: 4.0 })
}

/// Fixed point z(λ) on the sink branch of z² − (1+b)z + λ = 0.
fn sink_branch(lambda: C64, b: f64) -> C64 {
    ((1.0 + b) - ((1.0 + b) * (1.0 + b) - 4.0 * lambda).sqrt()) * 0.5
}

#[test]
fn sink_continues_without_events() {
    let fam = family(0.1);
    let map = fam.family_at(c(0.0)).unwrap();
    let o = solve_periodic(&map, 1, Point2::real(0.01, 0.01), 1e-12).unwrap();
    let r = continue_orbit(&fam, &o, &[c(0.0), c(0.2)], &StepControl::default()).unwrap();
    assert!(r.completed);
    assert!(r.events.is_empty());
    assert_eq!(r.orbits[0].kind, OrbitType::Sink);
    let z = sink_branch(c(0.2), 0.1);
    assert!((r.orbits[0].points[0] - Point2::new(z, z)).norm() < 1e-10);
}

#[test]
fn continuation_past_fold_reports_one_type_change() {
    let fam = family(0.1);
    let map = fam.family_at(c(0.0)).unwrap();
    let o = solve_periodic(&map, 1, Point2::real(0.01, 0.01), 1e-12).unwrap();
    let r = continue_orbit(&fam, &o, &[c(0.0), c(0.31)], &StepControl::default()).unwrap();
    assert!(r.completed, "{:?}", r.events);
    let changes: Vec<_> = r.events.iter().filter(|e| e.kind == EventKind::TypeChange).collect();
    assert_eq!(changes.len(), 1, "{:?}", r.events);
    assert!((changes[0].lambda - c(0.3025)).norm() < 1e-3);
    assert_eq!(r.orbits[0].kind, OrbitType::Saddle);
    assert!((r.lambda - c(0.31)).norm() < 1e-14);
}

#[test]
fn small_loop_returns_start_orbit() {
    let fam = family(0.1);
    let map = fam.family_at(c(-0.5)).unwrap();
    let o = solve_periodic(&map, 1, Point2::real(1.5, 1.5), 1e-12).unwrap();
    let path = [c(-0.5), C64::new(-0.4, 0.1), C64::new(-0.6, 0.1), c(-0.5)];
    let r = continue_orbit(&fam, &o, &path, &StepControl::default()).unwrap();
    assert!(r.events.is_empty());
    assert!((r.orbits[0].points[0] - o.points[0]).norm() < 1e-9);
}

#[test]
fn loop_around_fold_swaps_branches() {
    let fam = family(0.1);
    let map = fam.family_at(c(0.2)).unwrap();
    let o = solve_periodic(&map, 1, Point2::real(0.3, 0.3), 1e-12).unwrap();
    let path = [c(0.2), C64::new(0.4, -0.1), C64::new(0.4, 0.1), c(0.2)];
    let r = continue_orbit(&fam, &o, &path, &StepControl::default()).unwrap();
    assert!(r.completed);
    let other = sink_branch(c(0.2), 0.1);
    let other = c(1.1) - other;
    assert!((r.orbits[0].points[0] - Point2::new(other, other)).norm() < 1e-9);
}

#[test]
fn collision_is_reported_for_merging_cycles() {
    let fam = family(0.1);
    let lam = c(0.3025 - 1e-13);
    let map = fam.map_unchecked(lam).unwrap();
    let z = sink_branch(lam, 0.1);
    let zz = c(1.1) - z;
    let a = henonlab::periodic::orbit_at(&map, 1, Point2::new(z, z), DEFAULT_TAU).unwrap();
    let b = henonlab::periodic::orbit_at(&map, 1, Point2::new(zz, zz), DEFAULT_TAU).unwrap();
    let r = continue_orbits(&fam, &[a, b], &[lam, c(0.2)], &StepControl::default()).unwrap();
    assert!(r.events.iter().any(|e| e.kind == EventKind::Collision));
}

/// Roots of the quartic (z² + λ)² + λ(1+b)² − (1+b)³ z = 0 from the eliminated
/// period-two system, via companion-matrix eigenvalues.
fn period_two_oracle(lambda: f64, b: f64) -> Vec<(C64, C64)> {
    let s = 1.0 + b;
    // z⁴ + 2λz² − s³z + λ² + λs²
    let coeffs = [lambda * lambda + lambda * s * s, -s * s * s, 2.0 * lambda, 0.0];
    let mut m = Matrix4::<f64>::zeros();
    for i in 1..4 {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..4 {
        m[(i, 3)] = -coeffs[i];
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z0| (*z0, (z0 * z0 + lambda) / s))
        .collect()
}

#[test]
fn horseshoe_period_two_matches_elimination() {
    let map = HenonMap::quadratic(c(-3.0), c(0.1)).unwrap();
    let e = enumerate_periodic(&map, 2, None, 8);
    let points: Vec<Point2> = e.orbits.iter().flat_map(|o| o.points.iter().copied()).collect();
    let oracle = period_two_oracle(-3.0, 0.1);
    assert_eq!(points.len(), oracle.len());
    for (z0, z1) in oracle {
        let target = Point2::new(z0, z1);
        let best = points.iter().map(|p| (*p - target).norm()).fold(f64::INFINITY, f64::min);
        assert!(best < 1e-9, "missing {:?}", target);
    }
    let fixed = e.orbits.iter().filter(|o| o.period == 1).count();
    let two = e.orbits.iter().filter(|o| o.period == 2).count();
    assert_eq!((fixed, two), (2, 1));
}

#[test]
fn fixed_points_match_quadratic_formula() {
    let map = HenonMap::quadratic(c(-3.0), c(0.1)).unwrap();
    let e = enumerate_periodic(&map, 1, None, 8);
    let disc = (1.21f64 + 12.0).sqrt();
    let roots = [(1.1 - disc) / 2.0, (1.1 + disc) / 2.0];
    assert_eq!(e.orbits.len(), 2);
    for (o, r) in e.orbits.iter().zip(roots) {
        assert!((o.points[0] - Point2::real(r, r)).norm() < 1e-12);
        assert_eq!(o.kind, OrbitType::Saddle);
    }
}

#[test]
fn vanishing_jacobian_limit_approaches_quadratic_parabolic_parameter() {
    let mut last = f64::INFINITY;
    for b in [1e-2, 1e-4, 1e-6, 1e-8] {
        let fam = family(b);
        let map = fam.family_at(c(0.2)).unwrap();
        let o = solve_periodic(&map, 1, Point2::real(0.3, 0.3), 1e-12).unwrap();
        let r = solve_multiplier_root_of_unity(&fam, &o, c(1.0), c(0.2)).unwrap();
        let closed = (1.0 + b) * (1.0 + b) / 4.0;
        assert!((r.lambda - c(closed)).norm() < 1e-10);
        let gap = (r.lambda - c(0.25)).norm();
        assert!(gap < last);
        last = gap;
    }
    assert!(last < 1e-8);
}

#[test]
fn bifurcation_row_brackets_fold() {
    let fam = family(0.1);
    let grid = ParamGrid { re_range: (0.2, 0.4), im_range: (0.0, 0.0), cols: 20, rows: 1 };
    let raster = scan_bifurcation_grid(&fam, &grid, 1, &ScanBudget::default());
    for col in 0..20 {
        let lo = grid.vertex(col, 0).re;
        let hi = grid.vertex(col + 1, 0).re;
        let expected = if lo < 0.3025 && 0.3025 < hi { CellTag::Crossing } else { CellTag::Constant };
        assert_eq!(raster.tag(col, 0), expected, "cell [{lo}, {hi}]");
    }
    let again = scan_bifurcation_grid(&fam, &grid, 1, &ScanBudget::default());
    assert_eq!(raster, again);
}

#[test]
fn horseshoe_and_sink_cells() {
    let fam = family(0.1);
    let grid = ParamGrid { re_range: (-3.05, -2.95), im_range: (-0.05, 0.05), cols: 1, rows: 1 };
    let raster = scan_bifurcation_grid(&fam, &grid, 2, &ScanBudget::default());
    assert_eq!(raster.tag(0, 0), CellTag::Constant);
    assert_eq!(raster.sinks(0, 0), 0);
    let grid = ParamGrid { re_range: (-0.05, 0.05), im_range: (-0.05, 0.05), cols: 1, rows: 1 };
    let raster = scan_bifurcation_grid(&fam, &grid, 1, &ScanBudget::default());
    assert!(raster.sinks(0, 0) >= 1);
}

#[test]
fn records_serialize_with_type_field() {
    let map = HenonMap::quadratic(c(0.0), c(0.5)).unwrap();
    let o = solve_periodic(&map, 1, Point2::real(1.4, 1.4), 1e-12).unwrap();
    let json = serde_json::to_value(o.record(c(0.0))).unwrap();
    assert_eq!(json["type"], "Saddle");
    assert_eq!(json["points"][0][0][0].as_f64().unwrap(), o.points[0].z.re);
    assert_eq!(o.record(c(0.0)).csv_rows()[0].split(',').count(), CSV_HEADER.split(',').count());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn multiplier_product_is_jacobian_power(lre in -3.5f64..0.2, lim in -0.5f64..0.5, b in 0.05f64..0.4, n in 1usize..4) {
        let map = HenonMap::quadratic(C64::new(lre, lim), c(b)).unwrap();
        let e = enumerate_periodic(&map, n, None, 6);
        prop_assert!(e.point_count <= e.expected);
        for o in &e.orbits {
            let prod = o.multipliers.0 * o.multipliers.1;
            let jac = c(b).powu(o.period as u32);
            prop_assert!((prod - jac).norm() <= 1e-8 * jac.norm());
            prop_assert!(o.multipliers.0.norm() >= o.multipliers.1.norm());
        }
    }

    #[test]
    fn classification_is_rotation_invariant(lre in -3.5f64..-2.0, b in 0.05f64..0.3) {
        let map = HenonMap::quadratic(c(lre), c(b)).unwrap();
        let e = enumerate_periodic(&map, 3, None, 6);
        for o in e.orbits.iter().filter(|o| o.period == 3) {
            for k in 1..3 {
                let r = o.rotated(&map, k).unwrap();
                prop_assert_eq!(r.kind, o.kind);
                prop_assert!((r.multipliers.0 - o.multipliers.0).norm() <= 1e-8 * o.multipliers.0.norm());
            }
        }
    }

    #[test]
    fn path_and_reverse_return_start(dre in -0.2f64..0.2, dim in -0.2f64..0.2) {
        let fam = family(0.1);
        let start = c(-1.5);
        let map = fam.family_at(start).unwrap();
        let o = solve_periodic(&map, 1, Point2::real(1.7, 1.7), 1e-12).unwrap();
        let end = start + C64::new(dre, dim);
        let there = continue_orbit(&fam, &o, &[start, end], &StepControl::default()).unwrap();
        let back = continue_orbit(&fam, &there.orbits[0], &[end, start], &StepControl::default()).unwrap();
        if there.events.is_empty() && back.events.is_empty() {
            prop_assert!((back.orbits[0].points[0] - o.points[0]).norm() < 1e-9);
        }
    }
}
