//! Checks that tie several modules together through the public API.

use std::collections::HashSet;

use proptest::prelude::*;
use slelab::angular::{generator_residual, ExponentPair};
use slelab::excursions::{estimate_pi_extremal_distance, rectangle_crossing_mass, Region};
use slelab::exponents::{xi, xi_1_lambda, Num, PackVector};
use slelab::stochastic::{merge_all, run_chunked, Accumulator};
use slelab::walk::{cut_points, nonintersection_time_probability, simulate_walk};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn chunked_estimates_do_not_depend_on_pool_size() {
    let ks = [4, 16, 64];
    let estimate = || {
        let parts = run_chunked(7, 100, 2500, 300, |stream, n| {
            nonintersection_time_probability(1, 1, &ks, n, stream).unwrap()
        });
        merge_all(&parts)
    };
    let one: Vec<Accumulator> = in_pool(1, estimate);
    let four: Vec<Accumulator> = in_pool(4, estimate);
    assert_eq!(one, four);
    assert_eq!(one[0].count, 2500);
}

#[test]
fn walk_and_exponent_modules_agree_on_the_two_walk_exponent() {
    let from_packs = xi(&PackVector::integers(&[1, 1]).unwrap()).unwrap().value;
    let from_lambda = xi_1_lambda(Num::int(1)).unwrap().value;
    assert_eq!(from_packs, 1.25);
    assert_eq!(from_lambda, 1.25);
}

#[test]
fn closed_form_angular_solution_satisfies_its_equation() {
    for b in [0.5, 1.0, 2.0] {
        let p = ExponentPair::new(6.0, b).unwrap();
        assert!(p.boundary_residual().abs() < 1e-12);
        assert!(p.rate_residual().abs() < 1e-12);
        for x in [0.5, 1.5, 3.0, 5.5] {
            let r = generator_residual(x, 1.0, 6.0, b, 1e-3).unwrap();
            assert!(r.abs() < 1e-4, "b={b} x={x}: {r}");
        }
    }
}

#[test]
fn grid_extremal_distances_match_conformal_values() {
    let rect = estimate_pi_extremal_distance(&Region::Rectangle { l: 1.5 }, 64).unwrap();
    assert!((rect.value - 1.5).abs() < 1e-2, "{rect:?}");
    let r: f64 = 0.05;
    let ann = estimate_pi_extremal_distance(&Region::Annulus { r }, 64).unwrap();
    let exact = 0.5 * (1.0 / r).ln();
    assert!(
        (ann.value - exact).abs() < 2e-2 * exact,
        "{ann:?} vs {exact}"
    );
    let slit = estimate_pi_extremal_distance(&Region::SlitAnnulus { r }, 64).unwrap();
    // A radial slit is parallel to every extremal curve, so it costs nothing.
    assert!((slit.value - ann.value).abs() < 1e-9 * exact, "{slit:?}");
}

#[test]
fn crossing_mass_decays_at_unit_rate() {
    let m = |l: f64| rectangle_crossing_mass(l).unwrap();
    let rate = (m(8.0) / m(9.0)).ln();
    assert!((rate - 1.0).abs() < 1e-3, "{rate}");
}

fn brute_cut_points(positions: &[(i32, i32)]) -> Vec<usize> {
    (1..positions.len() - 1)
        .filter(|&k| {
            let before: HashSet<_> = positions[..=k].iter().collect();
            positions[k + 1..].iter().all(|s| !before.contains(s))
        })
        .collect()
}

proptest! {
    #[test]
    fn cut_points_match_brute_force(seed in 0u64..10_000, steps in 2usize..200) {
        let mut stream = slelab::stochastic::RandomStream::new(seed, 0);
        let path = simulate_walk(steps, (0, 0), &mut stream).unwrap();
        prop_assert_eq!(cut_points(&path).unwrap(), brute_cut_points(&path.positions));
    }
}
