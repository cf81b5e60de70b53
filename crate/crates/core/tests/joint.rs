mod common;

use common::instance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wpmec_core::dual_solver::{dual_function, objective_subgradient, psd_constraint_cut, DualPoint};
use wpmec_core::model::check_feasible;
use wpmec_core::oracle::{grid_oracle_k1, weak_duality_sampler, DEFAULT_GRID};
use wpmec_core::{solve_joint, SolveOptions, SolveStatus};

#[test]
fn random_instances_are_certified() {
    for (seed, k) in [(1, 2), (2, 2), (3, 4), (4, 6), (5, 10)] {
        let (p, ch) = instance(seed, k, 4, 0.1, 1e4);
        let r = solve_joint(&p, &ch, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Converged, "seed {seed}");
        assert!(r.relative_gap <= 1e-4, "seed {seed}: gap {}", r.relative_gap);
        assert!(r.dual_value <= r.primal_value * (1.0 + 1e-9), "weak duality, seed {seed}");
        assert!(r.kkt.max_product() <= 1e-5, "seed {seed}: {:?}", r.kkt);
        assert!(check_feasible(&r.allocation, &p, &ch).is_feasible(1e-12), "seed {seed}");
        assert!(r.allocation.time.iter().sum::<f64>() <= p.block_length * (1.0 + 1e-12));
    }
}

#[test]
fn offloading_users_keep_some_bits_local() {
    for seed in 10..15 {
        let (p, ch) = instance(seed, 3, 4, 0.1, 1e4);
        let r = solve_joint(&p, &ch, &SolveOptions::default()).unwrap();
        let max = r.dual.lambda.iter().copied().fold(0.0, f64::max);
        for (i, u) in p.users.iter().enumerate() {
            if r.dual.lambda[i] > 1e-9 * max {
                assert!(r.allocation.bits[i] < u.task_bits, "seed {seed} user {i}");
            }
        }
    }
}

#[test]
fn slack_users_compute_locally() {
    // A user next to the access point harvests more than it needs once
    // the far user is served.
    let (mut p, mut ch) = instance(30, 2, 4, 0.2, 2e4);
    let near = ch.downlink(0).scaled(4.0);
    ch = wpmec_core::model::ChannelSet::new(vec![near, ch.downlink(1).clone()], vec![ch.uplink(0).clone(), ch.uplink(1).clone()]).unwrap();
    p.users[0].task_bits = 2e4;
    let r = solve_joint(&p, &ch, &SolveOptions::default()).unwrap();
    for (i, e) in r.allocation.energy.iter().enumerate() {
        if e.residual() > 1e-8 {
            assert!(r.allocation.bits[i] <= 1e-8 * p.users[i].task_bits, "user {i}");
        }
    }
}

#[test]
fn single_user_matches_the_grid_oracle() {
    for (seed, n) in [(40, 1), (41, 2), (42, 1), (43, 2)] {
        let (p, ch) = instance(seed, 1, n, 0.1, 1e4);
        let r = solve_joint(&p, &ch, &SolveOptions::default()).unwrap();
        let o = grid_oracle_k1(&p, &ch, DEFAULT_GRID).unwrap();
        let rel = (r.primal_value - o.allocation.objective).abs() / o.allocation.objective;
        assert!(rel <= 1e-3, "seed {seed}: {} vs {}", r.primal_value, o.allocation.objective);
        assert!(r.primal_value <= o.allocation.objective * (1.0 + 1e-9));
        assert!(o.allocation.bits[0] < p.users[0].task_bits);
    }
}

#[test]
fn converged_dual_point_bounds_random_feasible_points() {
    let (p, ch) = instance(50, 3, 4, 0.1, 1e4);
    let r = solve_joint(&p, &ch, &SolveOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    assert!(weak_duality_sampler(&p, &ch, &r.dual, 200, &mut rng).unwrap());
}

#[test]
fn supergradient_inequality_holds_inside_s() {
    let (p, ch) = instance(60, 3, 4, 0.1, 1e4);
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let bound: Vec<f64> = (0..3).map(|i| 1.0 / (p.eh_efficiency * ch.downlink_gain(i))).collect();
    let mut checked = 0;
    while checked < 100 {
        let point = DualPoint {
            lambda: bound.iter().map(|b| rng.random_range(0.05..0.35) * b).collect(),
            mu: rng.random_range(0.0..50.0),
        };
        let other = DualPoint {
            lambda: bound.iter().map(|b| rng.random_range(0.05..0.35) * b).collect(),
            mu: rng.random_range(0.0..50.0),
        };
        let inside = |d: &DualPoint| psd_constraint_cut(&d.lambda, &ch, p.eh_efficiency).unwrap().margin >= 0.0;
        if !inside(&point) || !inside(&other) {
            continue;
        }
        let v = dual_function(&point, &p, &ch).unwrap();
        let g = objective_subgradient(&v.subsolutions, &p, &ch);
        let w = dual_function(&other, &p, &ch).unwrap().value;
        let mut linear = v.value;
        for (i, gi) in g.iter().take(3).enumerate() {
            linear += gi * (other.lambda[i] - point.lambda[i]);
        }
        linear += g[3] * (other.mu - point.mu);
        // Φ is concave: it lies below every supporting hyperplane.
        assert!(w <= linear + 1e-9 * (1.0 + linear.abs()), "{w} > {linear}");
        checked += 1;
    }
}
