//! Decision support: required headway, the scenario rule cascade, and the
//! perfect-information oracle it is scored against.

use crate::comms::{Beacon, NetworkTable};
use crate::config::WorldConfig;
use crate::engine::EngineState;
use crate::error::Result;
use crate::world::{CarState, SensorReading, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    KeepLane,
    Accelerate,
    Brake,
    EmergencyBrake,
    MoveLeft,
    MoveRight,
    /// Engine not in `Moving`; nothing to decide.
    Hold,
}

impl Decision {
    pub const ALL: [Decision; 7] = [
        Decision::KeepLane,
        Decision::Accelerate,
        Decision::Brake,
        Decision::EmergencyBrake,
        Decision::MoveLeft,
        Decision::MoveRight,
        Decision::Hold,
    ];

    pub fn to_byte(self) -> u8 {
        Self::ALL.iter().position(|d| *d == self).unwrap() as u8
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.get(b as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Decision::KeepLane => "keep_lane",
            Decision::Accelerate => "accelerate",
            Decision::Brake => "brake",
            Decision::EmergencyBrake => "emergency_brake",
            Decision::MoveLeft => "move_left",
            Decision::MoveRight => "move_right",
            Decision::Hold => "hold",
        }
    }
}

/// Standstill gap plus reaction distance plus braking distance.
pub fn required_gap(speed: f64, cfg: &WorldConfig) -> f64 {
    cfg.d_min + speed * cfg.t_react + speed * speed / (2.0 * cfg.a_max)
}

/// Minimum free space beside the car for a lane change.
pub fn lateral_threshold(cfg: &WorldConfig) -> f64 {
    cfg.car_length + cfg.d_min
}

/// Sensor gaps merged with what the network table implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedGaps {
    pub front: f64,
    pub back: f64,
    pub left: f64,
    pub right: f64,
    /// Beaconed speed of the nearest follower, when the table identifies it.
    pub follower_speed: Option<f64>,
}

impl FusedGaps {
    /// Fused view as a reading, for the speed controller.
    pub fn as_reading(&self) -> SensorReading {
        use crate::world::Gap;
        let g = |gap: f64| Gap {
            gap,
            saturated: false,
        };
        SensorReading {
            front: g(self.front),
            back: g(self.back),
            left: g(self.left),
            right: g(self.right),
        }
    }
}

/// `(position, id)` order along a lane; defines ahead/behind with ties broken by id.
fn is_ahead(pos: f64, id: u64, of_pos: f64, of_id: u64) -> bool {
    pos > of_pos || (pos == of_pos && id > of_id)
}

fn combine(sensor: crate::world::Gap, table: f64, range: f64) -> f64 {
    let sensor = if sensor.saturated { f64::INFINITY } else { sensor.gap };
    let best = sensor.min(table);
    if best.is_finite() {
        best
    } else {
        range
    }
}

/// Merges a sensor reading with beacons dead-reckoned to `now`.
///
/// A saturated sensor direction carries no information, so a table row
/// beyond sensor range still counts; with nothing known either way the
/// direction reads as `sensor_range`. Lateral gaps from beacons are net of
/// stopping distance: a car ahead in the target lane must be clear of the
/// mover's required gap, a car behind must be clear of its own. Cars two
/// lanes over count too, since they may merge into the same lane this tick.
pub fn fuse<'a>(
    reading: &SensorReading,
    beacons: impl IntoIterator<Item = &'a Beacon>,
    now: f64,
    me: &CarState,
    cfg: &WorldConfig,
) -> FusedGaps {
    let lane = me.lane as i64;
    let left_lane = lane - 1;
    let right_lane = lane + 1;
    let lanes = cfg.lane_count as i64;
    let own_need = required_gap(me.speed, cfg) - cfg.d_min;

    let mut front = f64::INFINITY;
    let mut back = f64::INFINITY;
    let mut follower: Option<f64> = None;
    let mut left = f64::INFINITY;
    let mut right = f64::INFINITY;

    for b in beacons {
        if b.sender_id == me.car_id {
            continue;
        }
        let pos = b.position_at(now);
        let their_lane = b.lane as i64;
        let ahead = is_ahead(pos, b.sender_id, me.position, me.car_id);
        let bumper = ((pos - me.position).abs() - cfg.car_length).max(0.0);
        if their_lane == lane {
            if ahead {
                front = front.min(bumper);
            } else if bumper < back {
                back = bumper;
                follower = Some(b.speed);
            }
            continue;
        }
        let net = if ahead {
            bumper - own_need
        } else {
            bumper - (required_gap(b.speed, cfg) - cfg.d_min)
        }
        .max(0.0);
        if their_lane == left_lane || their_lane == left_lane - 1 {
            left = left.min(net);
        }
        if their_lane == right_lane || their_lane == right_lane + 1 {
            right = right.min(net);
        }
    }

    let range = cfg.sensor_range;
    let sensed_back = if reading.back.saturated {
        f64::INFINITY
    } else {
        reading.back.gap
    };
    let wall = |l: i64| l < 0 || l >= lanes;
    FusedGaps {
        front: combine(reading.front, front, range),
        back: combine(reading.back, back, range),
        left: if wall(left_lane) { 0.0 } else { combine(reading.left, left, range) },
        right: if wall(right_lane) { 0.0 } else { combine(reading.right, right, range) },
        follower_speed: if back <= sensed_back { follower } else { None },
    }
}

/// The rule cascade on already-fused gaps. First match wins.
pub fn cascade(gaps: &FusedGaps, me: &CarState, cfg: &WorldConfig) -> Decision {
    if me.engine != EngineState::Moving {
        return Decision::Hold;
    }
    let need = required_gap(me.speed, cfg);
    if gaps.front >= need {
        return if gaps.front >= 2.0 * need {
            Decision::Accelerate
        } else {
            Decision::KeepLane
        };
    }
    let follower_need = required_gap(gaps.follower_speed.unwrap_or(me.speed), cfg);
    if gaps.back >= follower_need {
        return Decision::Brake;
    }
    let threshold = lateral_threshold(cfg);
    if gaps.left >= threshold {
        Decision::MoveLeft
    } else if gaps.right >= threshold {
        Decision::MoveRight
    } else {
        Decision::EmergencyBrake
    }
}

/// Onboard decision from this step's reading and the car's own table.
pub fn decide(reading: &SensorReading, table: &NetworkTable, me: &CarState, cfg: &WorldConfig) -> Decision {
    evaluate(reading, table.beacons(), table.as_of(), me, cfg).0
}

pub fn evaluate<'a>(
    reading: &SensorReading,
    beacons: impl IntoIterator<Item = &'a Beacon>,
    now: f64,
    me: &CarState,
    cfg: &WorldConfig,
) -> (Decision, FusedGaps) {
    let gaps = fuse(reading, beacons, now, me, cfg);
    (cascade(&gaps, me, cfg), gaps)
}

/// Same cascade with noise-free sensing and a zero-age table of every car.
pub fn oracle_decide(world: &World, car_id: u64) -> Result<Decision> {
    let idx = world.index_of(car_id)?;
    let beacons = world.snapshot_beacons();
    Ok(world.oracle_evaluate(idx, &beacons).0)
}
