use nalgebra::DVector;

use scenario_game::admm::{
    self, consensus_residual, lemma3_check, lyapunov, vi_optimality_residual, AdmmConfig,
    AdmmStatus,
};
use scenario_game::certificates::{sample_scenarios, ScenarioSet};
use scenario_game::fixtures::{self_quadratic, shared_budget_pair};
use scenario_game::inner::{solve_subgame, InnerOptions, ScenarioSubproblem};
use scenario_game::oracle::solve_centralized;
use scenario_game::rendezvous::{build_game, RendezvousConfig};

fn budget_instance(s: usize, seed: u64) -> (scenario_game::GameSpec, ScenarioSet) {
    let spec = shared_budget_pair();
    let set = sample_scenarios(spec.param_sampler(), s, seed).unwrap();
    (spec, set)
}

#[test]
fn oracle_point_has_small_vi_residual() {
    let (spec, set) = budget_instance(4, 3);
    let reference = solve_centralized(&spec, &set, &InnerOptions::default()).unwrap();
    let r = vi_optimality_residual(
        &spec,
        &set,
        &reference.as_state(),
        &reference.kkt_points(),
        5.0,
    )
    .unwrap();
    assert!(r.max <= 1e-6, "{r:?}");
}

#[test]
fn perturbed_consensus_shows_in_third_block() {
    let (spec, set) = budget_instance(4, 3);
    let reference = solve_centralized(&spec, &set, &InnerOptions::default()).unwrap();
    let mut state = reference.as_state();
    let mut x = state.x.as_slice().to_vec();
    x[1] += 0.1;
    state.x = scenario_game::JointDecision::new(2, 1, x).unwrap();
    let rho = 5.0;
    let r = vi_optimality_residual(&spec, &set, &state, &reference.kkt_points(), rho).unwrap();
    assert!(r.consensus >= rho * 0.1 * 2.0 - 1e-9, "{r:?}");
}

#[test]
fn single_unconstrained_scenario_at_rest_has_zero_residual() {
    let spec = self_quadratic(2, 1);
    let set = ScenarioSet::from_vectors(vec![vec![0.0]]).unwrap();
    let out = admm::run(&spec, &set, &AdmmConfig::default(), None, None).unwrap();
    let r = vi_optimality_residual(&spec, &set, &out.state, &out.kkt, 5.0).unwrap();
    assert!(r.max <= 1e-8, "{r:?}");
}

#[test]
fn stopping_residual_shrinks_with_tolerance() {
    let (spec, set) = budget_instance(5, 11);
    let mut last = f64::INFINITY;
    for tol in [1e-4, 1e-6, 1e-8] {
        let cfg = AdmmConfig {
            tol,
            workers: Some(1),
            ..Default::default()
        };
        let out = admm::run(&spec, &set, &cfg, None, None).unwrap();
        assert_eq!(out.status, AdmmStatus::Converged);
        let r = vi_optimality_residual(&spec, &set, &out.state, &out.kkt, cfg.rho).unwrap();
        assert!(r.max < last, "tol {tol}: {} !< {last}", r.max);
        last = r.max;
    }
    assert!(last <= 1e-3);
}

#[test]
fn key_inequality_at_the_fixed_point() {
    let (spec, set) = budget_instance(3, 2);
    let reference = solve_centralized(&spec, &set, &InnerOptions::default()).unwrap();
    let st = reference.as_state();
    let r = lemma3_check(&st, &st, &reference, 5.0).unwrap();
    assert_eq!(r.lhs, 0.0);
    assert_eq!(r.rhs, 0.0);
    assert!(r.holds);
}

#[test]
fn key_inequality_detects_adversarial_multipliers() {
    let (spec, set) = budget_instance(3, 2);
    let reference = solve_centralized(&spec, &set, &InnerOptions::default()).unwrap();
    let prev = reference.as_state();
    let mut next = prev.clone();
    next.lambda[0] += DVector::from_element(2, 1.0);
    next.lambda[1] -= DVector::from_element(2, 1.0);
    let r = lemma3_check(&prev, &next, &reference, 5.0).unwrap();
    assert!(r.lhs > 0.0);
    assert!(!r.holds);
}

#[test]
fn key_inequality_along_a_converged_run() {
    let (spec, set) = budget_instance(4, 8);
    let reference = solve_centralized(&spec, &set, &InnerOptions::default()).unwrap();
    let cfg = AdmmConfig {
        tol: 1e-12,
        record_iterates: true,
        workers: Some(2),
        ..Default::default()
    };
    let out = admm::run(&spec, &set, &cfg, None, Some(&reference)).unwrap();
    assert_eq!(out.status, AdmmStatus::Converged);
    for pair in out.history.windows(2) {
        assert!(
            lemma3_check(&pair[0], &pair[1], &reference, cfg.rho)
                .unwrap()
                .holds
        );
    }
    let v = out.trace.lyapunov_series().unwrap();
    for (k, row) in out.trace.rows.iter().enumerate() {
        assert!(v[k + 1] - v[k] + cfg.rho * row.consensus_residual <= 1e-8 * (1.0 + v[k]));
    }
    assert!(*v.last().unwrap() <= 1e-6 * v[0]);
}

#[test]
fn single_scenario_oracle_is_a_subgame_fixed_point() {
    let (spec, set) = budget_instance(1, 4);
    let reference = solve_centralized(&spec, &set, &InnerOptions::default()).unwrap();
    let zero = DVector::zeros(2);
    let p = ScenarioSubproblem::new(&spec, set.get(0), &reference.x_star, &zero, 5.0, 1).unwrap();
    let point = solve_subgame(&p, None, &InnerOptions::default()).unwrap();
    let gap = (point.w.as_vector() - reference.x_star.as_vector()).amax();
    assert!(gap <= 1e-7, "gap {gap}");
    assert!(reference.lambda_star[0].amax() <= 1e-12);
}

#[test]
fn self_quadratic_converges_to_zero() {
    let spec = self_quadratic(3, 2);
    let set = ScenarioSet::from_vectors(vec![vec![0.0]; 3]).unwrap();
    let mut init = admm::ConsensusState::zeros(&spec, 3);
    for (j, w) in init.w.iter_mut().enumerate() {
        w.fill(j as f64 + 1.0);
    }
    init.x = scenario_game::JointDecision::new(3, 2, vec![2.0; 6]).unwrap();
    let cfg = AdmmConfig {
        tol: 1e-20,
        max_iter: 20_000,
        ..Default::default()
    };
    let out = admm::run(&spec, &set, &cfg, Some(init), None).unwrap();
    assert_eq!(out.status, AdmmStatus::Converged);
    assert!(
        out.x.as_vector().amax() <= 1e-6,
        "{:?} after {}",
        out.x.as_slice(),
        out.iterations()
    );
}

#[test]
fn rendezvous_run_is_converged_and_consistent() {
    let game = build_game(&RendezvousConfig::default()).unwrap();
    let set = sample_scenarios(&game.sampler, 5, 1).unwrap();
    let reference = solve_centralized(&game.spec, &set, &InnerOptions::default()).unwrap();
    let cfg = AdmmConfig {
        workers: Some(2),
        ..Default::default()
    };
    let out = admm::run(&game.spec, &set, &cfg, None, Some(&reference)).unwrap();
    assert_eq!(out.status, AdmmStatus::Converged);
    let last = out.trace.rows.last().unwrap();
    assert!(last.consensus_residual <= cfg.tol);
    assert_eq!(out.trace.rows.len(), out.iterations());
    // The stopping quantity is measured against the previous consensus iterate.
    assert!(consensus_residual(&out.state, &out.x) <= cfg.tol);
    assert!(
        lyapunov(&out.state, &reference, cfg.rho).unwrap() < out.trace.initial_lyapunov.unwrap()
    );
}
