#![allow(clippy::needless_range_loop)]

mod common;

use common::{load_fixture, random_model, CASES, FIXTURE_POLICY, FIXTURE_V};
use ezdp::operators::aggregator_h;
use ezdp::policyeval::{
    bellman_iterates_from_zero, finite_horizon, infinite_horizon, Direction, MarkovPlan,
};
use ezdp::{derive, solve, Policy, SolveOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn fixture_horizon_values_increase_to_v_star() {
    let m = load_fixture();
    let d = derive(&m).unwrap();
    let plan = MarkovPlan::stationary(&m, &Policy(FIXTURE_POLICY.to_vec()), 400).unwrap();
    let rep = finite_horizon(&m, &d, &plan).unwrap();
    assert_eq!(rep.monotone_direction, Direction::Increasing);
    for pair in rep.horizon_values.windows(2) {
        for s in 0..2 {
            assert!(pair[0].values[s] <= pair[1].values[s]);
        }
    }
    let last = rep.horizon_values.last().unwrap();
    for s in 0..2 {
        assert!((last.values[s] - FIXTURE_V[s]).abs() < 1e-8);
        assert!((rep.limit_value.values[s] - FIXTURE_V[s]).abs() < 1e-11);
    }
}

#[test]
fn horizon_values_are_monotone_in_both_regimes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &case in &CASES {
        for _ in 0..10 {
            let (m, d) = random_model(case, 0.9, &mut rng);
            let plan = MarkovPlan::random(&m, 15, &mut rng);
            let rep = finite_horizon(&m, &d, &plan).unwrap();
            let increasing = rep.monotone_direction == Direction::Increasing;
            assert_eq!(increasing, m.rho() < 1.0);
            for pair in rep.horizon_values.windows(2) {
                for s in 0..m.n_states() {
                    let (a, b) = (pair[0].values[s], pair[1].values[s]);
                    let tol = 1e-12 * a.abs().max(b.abs());
                    if increasing {
                        assert!(a <= b + tol, "{case:?}: {a} > {b}");
                    } else {
                        assert!(a + tol >= b, "{case:?}: {a} < {b}");
                    }
                }
            }
        }
    }
}

#[test]
fn stationary_value_satisfies_its_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for &case in &CASES {
        let (m, d) = random_model(case, 0.9, &mut rng);
        let f = Policy(
            m.pairs()
                .fold(vec![usize::MAX; m.n_states()], |mut acc, (s, a)| {
                    if acc[s] == usize::MAX {
                        acc[s] = a;
                    }
                    acc
                }),
        );
        let v = infinite_horizon(&m, &d, &f, 1e-13).unwrap();
        for s in 0..m.n_states() {
            let h = aggregator_h(&m, &d, s, f.action(s), &v.values).unwrap();
            assert!(
                (h - v.values[s]).abs() <= 1e-9 * v.values[s].max(1.0),
                "{case:?} state {s}"
            );
        }
    }
}

#[test]
fn bellman_iteration_from_terminal_reaches_optimum() {
    // Case B from above, Case A from below: both reach the w-space fixed point
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for &case in &CASES {
        let (m, d) = random_model(case, 0.8, &mut rng);
        let sol = solve(
            &m,
            &SolveOptions {
                tol: 1e-13,
                ..Default::default()
            },
        )
        .unwrap();
        let iterates = bellman_iterates_from_zero(&m, &d, 400).unwrap();
        let last = iterates.last().unwrap();
        for s in 0..m.n_states() {
            let rel = (last.values[s] - sol.v_star.values[s]).abs() / sol.v_star.values[s];
            assert!(rel < 1e-8, "{case:?} state {s}: {rel:e}");
        }
        let upper = m.rho() > 1.0;
        for pair in iterates.windows(2) {
            for s in 0..m.n_states() {
                let (a, b) = (pair[0].values[s], pair[1].values[s]);
                let tol = 1e-12 * a.max(b);
                assert!(if upper { a + tol >= b } else { a <= b + tol }, "{case:?}");
            }
        }
    }
}
