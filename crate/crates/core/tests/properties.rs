use outer_billiards::birkhoff::{alphas, field, random_polygon, random_tangent, sum_alpha_vs_da};
use outer_billiards::discrete::{apply_move, legal_moves, DiscreteState, PARALLEL_TOL};
use outer_billiards::geom::{area2, hausdorff};
use outer_billiards::verify::random_support_table;
use outer_billiards::{ConvexTable, Polygon, Vec2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn table(seed: u64) -> ConvexTable {
    random_support_table(&mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_undoes_the_map(seed in 0u64..1000, th in 0.0..std::f64::consts::TAU, d in 0.05f64..3.0) {
        let t = table(seed);
        let x = t.boundary_point(th).unwrap() + Vec2::polar(th) * d;
        let y = t.outer_map(x).unwrap();
        prop_assert!((t.inverse_outer_map(y).unwrap() - x).norm() < 1e-9 * (1.0 + x.norm()));
    }

    #[test]
    fn analytic_differential_is_unimodular(seed in 0u64..1000, th in 0.0..std::f64::consts::TAU, d in 0.05f64..3.0) {
        let t = table(seed);
        let x = t.boundary_point(th).unwrap() + Vec2::polar(th) * d;
        let det = t.outer_map_diff(x).unwrap().world.determinant();
        prop_assert!((det - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circle_orbits_stay_on_their_circle(r in 1.01f64..5.0, phase in 0.0..std::f64::consts::TAU) {
        let t = ConvexTable::circle(Vec2::new(0.3, -0.2), 1.0);
        let c = Vec2::new(0.3, -0.2);
        let x = c + Vec2::polar(phase) * r;
        for p in t.orbit(x, 10).unwrap() {
            prop_assert!(((p - c).norm() - r).abs() < 1e-10 * r);
        }
    }

    #[test]
    fn forms_sum_to_minus_area_derivative(seed in 0u64..10_000, n in 3usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = random_polygon(&mut rng, n, 2.0);
        let w = random_tangent(&mut rng, n);
        let (s, da) = sum_alpha_vs_da(&z, &w);
        prop_assert!((s + da).abs() < 1e-12 * z.diameter().powi(3));
        for k in 0..n as isize {
            let a = alphas(&z, &field(&z, k));
            prop_assert!(a.iter().all(|x| x.abs() < 1e-12 * z.diameter().powi(4)));
        }
    }

    #[test]
    fn slides_keep_the_triangle_area(n in 1usize..6, steps in 1usize..40) {
        let k = 3 * n + 1;
        let host = Polygon::regular(k, 1, 1.0, 0.4).unwrap();
        let mut s = DiscreteState::new(host, [0, n + 1, 2 * n + 1]).unwrap();
        let tri_area = |s: &DiscreteState| area2(&Polygon::new(s.points().to_vec()).unwrap());
        let a0 = tri_area(&s);
        for j in 0..steps {
            let moves = legal_moves(&s, PARALLEL_TOL);
            prop_assert!(!moves.is_empty());
            s = apply_move(&s, moves[j % moves.len()]);
            prop_assert!((tri_area(&s) - a0).abs() < 1e-12);
        }
    }

    #[test]
    fn hausdorff_is_symmetric_and_bounded_by_a_shift(dx in -1.0f64..1.0, dy in -1.0f64..1.0) {
        let a: Vec<Vec2> = (0..16).map(|j| Vec2::polar(j as f64 * 0.4)).collect();
        let b: Vec<Vec2> = a.iter().map(|p| *p + Vec2::new(dx, dy)).collect();
        let h = hausdorff(&a, &b);
        prop_assert!((h - hausdorff(&b, &a)).abs() < 1e-15);
        prop_assert!(h <= (dx * dx + dy * dy).sqrt() + 1e-15);
    }
}
