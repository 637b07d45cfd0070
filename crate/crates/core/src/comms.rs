//! Single-hop V2V beaconing and the per-car tables.
//!
//! Each car keeps three tables: a [`NetworkTable`] of recently heard
//! neighbours, a [`PresentRecord`] of its own state, and a [`DecisionRecord`]
//! of what it committed to next. The decision record is what a car beacons,
//! so it feeds the network tables of its peers.

use std::collections::{BTreeMap, BTreeSet};

use crate::avoidance::{required_gap, Decision};
use crate::config::WorldConfig;
use crate::engine::EngineState;
use crate::error::{Error, Result};
use crate::world::{CarState, Direction};

/// Lateral distance between adjacent lane centres, meters.
pub const LANE_WIDTH: f64 = 3.5;

/// Encoded size of a [`Beacon`].
pub const BEACON_LEN: usize = 8 + 8 + 2 + 8 + 8 + 1 + 1 + 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beacon {
    pub sender_id: u64,
    pub sent_at: f64,
    pub lane: u16,
    pub position: f64,
    pub speed: f64,
    pub engine: EngineState,
    pub direction: Direction,
    pub intended_decision: Decision,
}

impl Beacon {
    pub fn from_state(state: &CarState, sent_at: f64, intended_decision: Decision) -> Self {
        Self {
            sender_id: state.car_id,
            sent_at,
            lane: state.lane as u16,
            position: state.position,
            speed: state.speed,
            engine: state.engine,
            direction: state.direction,
            intended_decision,
        }
    }

    /// Dead-reckoned position at `now`.
    pub fn position_at(&self, now: f64) -> f64 {
        self.position + self.speed * (now - self.sent_at).max(0.0)
    }

    /// Little-endian fixed layout: sender_id u64, sent_at f64, lane u16,
    /// position f64, speed f64, engine u8, direction u8, decision u8.
    pub fn encode(&self) -> [u8; BEACON_LEN] {
        let mut out = [0u8; BEACON_LEN];
        out[0..8].copy_from_slice(&self.sender_id.to_le_bytes());
        out[8..16].copy_from_slice(&self.sent_at.to_bits().to_le_bytes());
        out[16..18].copy_from_slice(&self.lane.to_le_bytes());
        out[18..26].copy_from_slice(&self.position.to_bits().to_le_bytes());
        out[26..34].copy_from_slice(&self.speed.to_bits().to_le_bytes());
        out[34] = self.engine.to_byte();
        out[35] = self.direction.to_byte();
        out[36] = self.intended_decision.to_byte();
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != BEACON_LEN {
            return Err(Error::Codec(format!(
                "expected {BEACON_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let tag = |name: &str, b: u8| Error::Codec(format!("invalid {name} tag {b}"));
        Ok(Self {
            sender_id: u64_at(0),
            sent_at: f64::from_bits(u64_at(8)),
            lane: u16::from_le_bytes([bytes[16], bytes[17]]),
            position: f64::from_bits(u64_at(18)),
            speed: f64::from_bits(u64_at(26)),
            engine: EngineState::from_byte(bytes[34]).ok_or_else(|| tag("engine", bytes[34]))?,
            direction: Direction::from_byte(bytes[35]).ok_or_else(|| tag("direction", bytes[35]))?,
            intended_decision: Decision::from_byte(bytes[36])
                .ok_or_else(|| tag("decision", bytes[36]))?,
        })
    }
}

/// Lane-offset-aware Euclidean distance used for the radio range check.
pub fn radio_distance(lane_a: usize, pos_a: f64, lane_b: usize, pos_b: f64) -> f64 {
    let lateral = (lane_a as f64 - lane_b as f64) * LANE_WIDTH;
    lateral.hypot(pos_a - pos_b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub beacon: Beacon,
    pub received_at: f64,
}

/// Latest beacon heard from each neighbour, bounded in age by the TTL.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTable {
    owner: u64,
    rows: BTreeMap<u64, TableRow>,
    as_of: f64,
}

impl NetworkTable {
    pub fn new(owner: u64) -> Self {
        Self {
            owner,
            rows: BTreeMap::new(),
            as_of: 0.0,
        }
    }

    pub fn owner(&self) -> u64 {
        self.owner
    }

    /// Time of the most recent update.
    pub fn as_of(&self) -> f64 {
        self.as_of
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&TableRow> {
        self.rows.get(&id)
    }

    pub fn keys(&self) -> impl Iterator<Item = u64> + '_ {
        self.rows.keys().copied()
    }

    pub fn rows(&self) -> impl Iterator<Item = &TableRow> {
        self.rows.values()
    }

    pub fn beacons(&self) -> impl Iterator<Item = &Beacon> {
        self.rows.values().map(|r| &r.beacon)
    }

    /// Folds `incoming` in (newer `sent_at` replaces, ties keep the existing
    /// row), then evicts rows received more than `ttl` before `now`.
    pub fn merge<'a>(&mut self, incoming: impl IntoIterator<Item = &'a Beacon>, now: f64, ttl: f64) {
        for beacon in incoming {
            if beacon.sender_id == self.owner {
                continue;
            }
            let fresh = TableRow {
                beacon: *beacon,
                received_at: now,
            };
            self.rows
                .entry(beacon.sender_id)
                .and_modify(|row| {
                    if beacon.sent_at > row.beacon.sent_at {
                        *row = fresh;
                    }
                })
                .or_insert(fresh);
        }
        self.rows.retain(|_, row| now - row.received_at <= ttl);
        self.as_of = now;
    }
}

pub fn update_network_table(table: &NetworkTable, incoming: &[Beacon], now: f64, ttl: f64) -> NetworkTable {
    let mut next = table.clone();
    next.merge(incoming, now, ttl);
    next
}

/// The owner's own state this step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresentRecord(pub CarState);

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub next_decision: Decision,
    pub next_direction: Direction,
    /// Neighbours within twice the required gap at decision time.
    pub basis: BTreeSet<u64>,
}

/// Commits `decision`. A car at or past its destination that is not changing
/// lanes reports `Stopped` as its next direction.
pub fn build_decision_record(
    present: &PresentRecord,
    table: &NetworkTable,
    destination: f64,
    decision: Decision,
    cfg: &WorldConfig,
) -> DecisionRecord {
    let me = &present.0;
    let next_direction = match decision {
        Decision::MoveLeft => Direction::LateralLeft,
        Decision::MoveRight => Direction::LateralRight,
        Decision::Hold => Direction::Stopped,
        _ if me.position >= destination => Direction::Stopped,
        _ => Direction::Forward,
    };
    let window = 2.0 * required_gap(me.speed, cfg);
    let now = table.as_of();
    let basis = table
        .beacons()
        .filter(|b| (b.position_at(now) - me.position).abs() <= window)
        .map(|b| b.sender_id)
        .collect();
    DecisionRecord {
        next_decision: decision,
        next_direction,
        basis,
    }
}
