//! Fixtures shared by the benchmarks.

use icsim::{scenario, ScenarioSpec, World, WorldConfig};

/// The degraded-sensing configuration used by the accuracy sweeps.
pub fn sweep_config() -> WorldConfig {
    icsim::harness::degraded_sensing()
}

pub fn fleet(cfg: &WorldConfig, cars: usize) -> ScenarioSpec {
    scenario::generate(cfg, cars, 7, true).expect("fleet fits the default road")
}

/// A world that has already run long enough for tables to be populated.
pub fn warm_world(cfg: &WorldConfig, cars: usize, steps: usize) -> World {
    let mut world = World::new(cfg.clone(), &fleet(cfg, cars)).expect("valid fleet");
    for _ in 0..steps {
        world.step();
    }
    world
}
