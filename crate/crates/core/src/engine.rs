//! Engine state machine and longitudinal speed control.

use crate::avoidance::{required_gap, Decision};
use crate::config::WorldConfig;
use crate::vision::EngineCommand;
use crate::world::{CarState, SensorReading};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineState {
    /// Off and stationary.
    Stop,
    /// On; speed decays to zero.
    Active,
    /// On and free to drive.
    Moving,
}

impl EngineState {
    pub const ALL: [EngineState; 3] = [EngineState::Stop, EngineState::Active, EngineState::Moving];

    pub fn to_byte(self) -> u8 {
        match self {
            EngineState::Stop => 0,
            EngineState::Active => 1,
            EngineState::Moving => 2,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(EngineState::Stop),
            1 => Some(EngineState::Active),
            2 => Some(EngineState::Moving),
            _ => None,
        }
    }
}

/// Full transition table:
///
/// | from \ cmd | StopEngine | ActivateEngine | MoveEngine |
/// |------------|------------|----------------|------------|
/// | Stop       | Stop       | Active         | Active     |
/// | Active     | Stop       | Active         | Moving     |
/// | Moving     | Stop       | Active         | Moving     |
///
/// A stopped engine needs an ignition step through `Active` before it moves.
pub fn engine_transition(state: EngineState, cmd: EngineCommand) -> EngineState {
    use EngineCommand::*;
    use EngineState::*;
    match (state, cmd) {
        (_, StopEngine) => Stop,
        (_, ActivateEngine) => Active,
        (Stop, MoveEngine) => Active,
        (Active | Moving, MoveEngine) => Moving,
    }
}

/// Cruise target for a given front gap: `v_max` scaled linearly by how much
/// of the required headway beyond the standstill gap is available.
pub fn target_speed(speed: f64, front_gap: f64, cfg: &WorldConfig) -> f64 {
    let span = required_gap(speed, cfg) - cfg.d_min;
    let fraction = if span <= 0.0 {
        if front_gap > cfg.d_min {
            1.0
        } else {
            0.0
        }
    } else {
        ((front_gap - cfg.d_min) / span).clamp(0.0, 1.0)
    };
    cfg.v_max * fraction
}

fn approach(from: f64, to: f64, max_delta: f64) -> f64 {
    if to > from {
        (from + max_delta).min(to)
    } else {
        (from - max_delta).max(to)
    }
}

/// Next speed for `car` after acting on `decision`. `car.engine` is the state
/// after this step's engine transition.
pub fn speed_update(
    car: &CarState,
    decision: Decision,
    gaps: &SensorReading,
    cfg: &WorldConfig,
    dt: f64,
) -> f64 {
    let step = cfg.a_max * dt;
    let next = if car.engine != EngineState::Moving {
        (car.speed - step).max(0.0)
    } else {
        match decision {
            Decision::Brake => approach(car.speed, 0.0, step),
            Decision::EmergencyBrake => approach(car.speed, 0.0, 2.0 * step),
            // Decided while the engine was not yet moving: no acceleration this tick.
            Decision::Hold => car.speed,
            Decision::KeepLane | Decision::Accelerate | Decision::MoveLeft | Decision::MoveRight => {
                approach(car.speed, target_speed(car.speed, gaps.front.gap, cfg), step)
            }
        }
    };
    next.clamp(0.0, cfg.v_max)
}
