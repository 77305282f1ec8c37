//! Instance builders shared by the benchmarks.

use scenario_game::certificates::sample_scenarios;
use scenario_game::rendezvous::{build_game, RendezvousConfig};
use scenario_game::{GameSpec, ScenarioSet};

/// Default rendezvous game with `num_scenarios` draws from `seed`.
pub fn rendezvous_instance(num_scenarios: usize, seed: u64) -> (GameSpec, ScenarioSet) {
    let game = build_game(&RendezvousConfig::default()).expect("default config is valid");
    let set = sample_scenarios(&game.sampler, num_scenarios, seed).expect("valid sample size");
    (game.spec, set)
}
