//! Cross-estimator properties: Girsanov round trips, direct vs
//! importance-sampled agreement, the Jensen floor, and bitwise
//! reproducibility of every estimator entry point.

use bdvar::drift::SimpleDrift;
use bdvar::estimate::{batch_map, combined_stderr, Estimate};
use bdvar::functional::Functional;
use bdvar::variational::{estimate_lhs_direct, estimate_lhs_importance, rhs_objective};
use bdvar::wiener::{girsanov_reweighted_mean, sample_wiener, TimeGrid};
use std::sync::Arc;

fn grid() -> Arc<TimeGrid> {
    TimeGrid::uniform(16)
}

fn fixture_functionals() -> Vec<Functional> {
    vec![
        Functional::linear_terminal(1.0),
        Functional::quadratic_terminal(-0.5),
        Functional::custom("tanh-sup", |w| (1.0 - w.sup_norm()).tanh()),
    ]
}

fn fixture_drifts(g: &Arc<TimeGrid>) -> Vec<SimpleDrift> {
    vec![
        SimpleDrift::constant(g.clone(), vec![-1.0]),
        SimpleDrift::constant(g.clone(), vec![0.5]),
        SimpleDrift::piecewise_constant(
            g.clone(),
            vec![0.0, 0.5, 1.0],
            vec![vec![1.0], vec![-0.5]],
        )
        .unwrap(),
    ]
}

#[test]
fn girsanov_round_trip_for_all_fixture_pairs() {
    let g = grid();
    for (fi, f) in fixture_functionals().iter().enumerate() {
        let plain_vals = batch_map(200_000, |i| f.eval(&sample_wiener(&g, 1, 7000, i)));
        let plain = Estimate::from_values(&plain_vals, 7000);
        for (vi, v) in fixture_drifts(&g).iter().enumerate() {
            let seed = 7100 + (fi * 10 + vi) as u64;
            let rw = girsanov_reweighted_mean(f, v, &g, 1, 200_000, seed).unwrap();
            let se = combined_stderr(&rw, &plain);
            assert!(
                (rw.value - plain.value).abs() <= 3.0 * se,
                "fixture ({fi}, {vi}): {} vs {} ± {se}",
                rw.value,
                plain.value
            );
        }
    }
}

#[test]
fn direct_and_importance_lhs_agree() {
    let g = grid();
    for (fi, f) in fixture_functionals().iter().enumerate() {
        let direct = estimate_lhs_direct(f, &g, 1, 200_000, 8000 + fi as u64).unwrap();
        for (vi, v) in fixture_drifts(&g).iter().enumerate() {
            let seed = 8100 + (fi * 10 + vi) as u64;
            let is = estimate_lhs_importance(f, v, &g, 1, 200_000, seed).unwrap();
            let se = combined_stderr(&direct, &is);
            assert!(
                (direct.value - is.value).abs() <= 3.0 * se,
                "fixture ({fi}, {vi}): direct {} vs importance {} ± {se}",
                direct.value,
                is.value
            );
        }
    }
}

#[test]
fn jensen_floor_always_holds() {
    let g = grid();
    let zero = SimpleDrift::constant(g.clone(), vec![0.0]);
    for (fi, f) in fixture_functionals().iter().enumerate() {
        let lhs = estimate_lhs_direct(f, &g, 1, 100_000, 8200 + fi as u64).unwrap();
        let obj = rhs_objective(f, &zero, &g, 1, 100_000, 8200 + fi as u64).unwrap();
        assert!(
            lhs.value >= obj.value - 3.0 * combined_stderr(&lhs, &obj),
            "fixture {fi}: {} < {}",
            lhs.value,
            obj.value
        );
    }
}

#[test]
fn estimators_bitwise_reproducible() {
    let g = grid();
    let f = Functional::quadratic_terminal(-0.5);
    let v = SimpleDrift::constant(g.clone(), vec![0.5]);
    let pairs = [
        (
            estimate_lhs_direct(&f, &g, 1, 20_000, 42).unwrap(),
            estimate_lhs_direct(&f, &g, 1, 20_000, 42).unwrap(),
        ),
        (
            estimate_lhs_importance(&f, &v, &g, 1, 20_000, 42).unwrap(),
            estimate_lhs_importance(&f, &v, &g, 1, 20_000, 42).unwrap(),
        ),
        (
            rhs_objective(&f, &v, &g, 1, 20_000, 42).unwrap(),
            rhs_objective(&f, &v, &g, 1, 20_000, 42).unwrap(),
        ),
        (
            girsanov_reweighted_mean(&f, &v, &g, 1, 20_000, 42).unwrap(),
            girsanov_reweighted_mean(&f, &v, &g, 1, 20_000, 42).unwrap(),
        ),
    ];
    for (a, b) in pairs {
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }
}

#[test]
fn reductions_independent_of_thread_count() {
    let g = grid();
    let f = Functional::linear_terminal(1.0);
    let across = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| estimate_lhs_direct(&f, &g, 1, 50_000, 77).unwrap())
    };
    let one = across(1);
    let four = across(4);
    assert_eq!(one.value.to_bits(), four.value.to_bits());
    assert_eq!(one.stderr.to_bits(), four.stderr.to_bits());
}
