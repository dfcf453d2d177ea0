//! End-to-end runs across modules.

use outer_billiards::horizontal::{reconstruct_table, shoot, verify_periodic_family, ShootOptions};
use outer_billiards::periodicity::find_periodic;
use outer_billiards::triangle::{build_family, solve_monodromy3, verify_family3, EquivariantCurve, DEFAULT_MAX_FREQ};
use outer_billiards::{ConvexTable, Vec2};

#[test]
fn circular_three_family_gives_the_circle() {
    let c = EquivariantCurve::circle(DEFAULT_MAX_FREQ);
    let rep = solve_monodromy3(&c, 2).unwrap();
    let fam = build_family(&rep.curve).unwrap();
    let v = verify_family3(&fam, 12).unwrap();
    // an equilateral triangle of double area 3 has circumradius² = 2/√3
    let r = (2.0 / 3f64.sqrt()).sqrt();
    for p in fam.boundary().iter().step_by(64) {
        assert!((p.norm() - r).abs() < 1e-9, "{}", p.norm());
    }
    assert!(v.max_closure < 1e-9);
}

#[test]
fn baseline_shooting_reproduces_the_circle() {
    let rep = shoot(4, 1, &[], ShootOptions::default()).unwrap();
    let curve = reconstruct_table(&rep.path).unwrap();
    let fam = verify_periodic_family(&curve, &rep.path, 8).unwrap();
    // side midpoints of the inscribed square lie at radius cos(π/4)
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for p in curve.points.iter().step_by(37) {
        assert!((p.norm() - r).abs() < 1e-9);
    }
    assert!(fam.max_closure < 1e-8);
}

#[test]
fn periodic_orbit_on_a_fitted_table() {
    let rep = shoot(5, 2, &[], ShootOptions::default()).unwrap();
    let curve = reconstruct_table(&rep.path).unwrap();
    let fam = verify_periodic_family(&curve, &rep.path, 5).unwrap();
    let orbit = find_periodic(&fam.table, 5, 2, Vec2::new(1.0, 0.2)).unwrap();
    assert_eq!(orbit.rotation, 2);
    assert!(orbit.closure_error < 1e-9);
}

#[test]
fn tables_round_trip_through_json() {
    let t = ConvexTable::ellipse(1.2, 0.9, 16).unwrap();
    let s = serde_json::to_string(&t).unwrap();
    let back: ConvexTable = serde_json::from_str(&s).unwrap();
    assert_eq!(t, back);
}
