//! Acceptance suite: one test per criterion. Each prints its measured
//! quantities on a single line (visible with `--nocapture`).

use outer_billiards::verify::{run_criterion, Tolerances};

fn check(id: usize) {
    let c = run_criterion(id, 0, &Tolerances::default());
    println!("{}", c.line());
    assert!(c.passed, "{}", c.line());
}

macro_rules! criteria {
    ($($name:ident = $id:expr),* $(,)?) => {
        $(#[test] fn $name() { check($id) })*
    };
}

criteria! {
    c01_mirror_differential = 1,
    c02_area_preservation = 2,
    c03_circular_periodic_families = 3,
    c04_bracket_growth = 4,
    c05_form_identities = 5,
    c06_three_periodic_construction = 6,
    c07_general_shooting = 7,
    c08_identity_example = 8,
    c09_rounded_square = 9,
    c10_discrete_rotation = 10,
    c11_integrator_order = 11,
}
