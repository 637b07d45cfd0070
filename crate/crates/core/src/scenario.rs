//! Scenario records and the random placement generator.
//!
//! File format, one record per line, `#` starts a comment:
//!
//! ```text
//! car <id> <lane> <pos> <speed> <dest> [stop|active|moving]
//! light <id> <lane> <pos> <initial_phase>
//! ```

use std::fmt::Write as _;

use rand::Rng;

use crate::avoidance::required_gap;
use crate::config::WorldConfig;
use crate::engine::EngineState;
use crate::error::{Error, Result};
use crate::rng::{self, channel};
use crate::signals::Phase;

#[derive(Debug, Clone, PartialEq)]
pub struct CarSpec {
    pub id: u64,
    pub lane: usize,
    pub position: f64,
    pub speed: f64,
    pub destination: f64,
    /// Defaults to `Moving` when the car has speed, `Stop` otherwise.
    pub engine: Option<EngineState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightSpec {
    pub id: u64,
    pub lane: usize,
    pub position: f64,
    pub initial_phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioSpec {
    pub cars: Vec<CarSpec>,
    pub lights: Vec<LightSpec>,
}

fn engine_name(e: EngineState) -> &'static str {
    match e {
        EngineState::Stop => "stop",
        EngineState::Active => "active",
        EngineState::Moving => "moving",
    }
}

fn phase_name(p: Phase) -> &'static str {
    match p {
        Phase::Green => "green",
        Phase::Yellow => "yellow",
        Phase::Red => "red",
    }
}

impl ScenarioSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = ScenarioSpec::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let err = |msg: String| Error::Parse { line, msg };
            fn field<T: std::str::FromStr>(
                fields: &[&str],
                i: usize,
                name: &str,
                line: usize,
            ) -> Result<T> {
                let raw = fields.get(i).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("missing {name}"),
                })?;
                raw.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("invalid {name} {raw:?}"),
                })
            }
            match fields[0] {
                "car" => {
                    if !(6..=7).contains(&fields.len()) {
                        return Err(err(format!(
                            "car record takes 5 or 6 fields, got {}",
                            fields.len() - 1
                        )));
                    }
                    let engine = match fields.get(6) {
                        None => None,
                        Some(&"stop") => Some(EngineState::Stop),
                        Some(&"active") => Some(EngineState::Active),
                        Some(&"moving") => Some(EngineState::Moving),
                        Some(other) => return Err(err(format!("invalid engine state {other:?}"))),
                    };
                    spec.cars.push(CarSpec {
                        id: field(&fields, 1, "car id", line)?,
                        lane: field(&fields, 2, "lane", line)?,
                        position: field(&fields, 3, "position", line)?,
                        speed: field(&fields, 4, "speed", line)?,
                        destination: field(&fields, 5, "destination", line)?,
                        engine,
                    });
                }
                "light" => {
                    if fields.len() != 5 {
                        return Err(err(format!(
                            "light record takes 4 fields, got {}",
                            fields.len() - 1
                        )));
                    }
                    spec.lights.push(LightSpec {
                        id: field(&fields, 1, "light id", line)?,
                        lane: field(&fields, 2, "lane", line)?,
                        position: field(&fields, 3, "position", line)?,
                        initial_phase: fields[4].parse().map_err(err)?,
                    });
                }
                other => return Err(err(format!("unknown record type {other:?}"))),
            }
        }
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.cars {
            let _ = write!(out, "car {} {} {} {} {}", c.id, c.lane, c.position, c.speed, c.destination);
            if let Some(e) = c.engine {
                let _ = write!(out, " {}", engine_name(e));
            }
            out.push('\n');
        }
        for l in &self.lights {
            let _ = writeln!(out, "light {} {} {} {}", l.id, l.lane, l.position, phase_name(l.initial_phase));
        }
        out
    }
}

/// Fraction of the lane cars are initially placed in, leaving road ahead.
const PLACEMENT_SPAN: f64 = 0.6;
/// Where generated lights sit along each lane.
const LIGHT_POSITION: f64 = 0.8;

/// Uniform random placement of `count` cars with initial speeds in
/// `[0, v_max / 2]`, every same-lane gap at least the required gap of the
/// fastest initial speed. Optionally one light per lane with a random phase.
pub fn generate(cfg: &WorldConfig, count: usize, seed: u64, with_lights: bool) -> Result<ScenarioSpec> {
    let mut rng = rng::substream(seed, &[channel::PLACEMENT, count as u64]);
    let v_init_max = cfg.v_max / 2.0;
    let spacing = cfg.car_length + required_gap(v_init_max, cfg) + 1e-6;
    let span = cfg.lane_length * PLACEMENT_SPAN;

    let lanes: Vec<usize> = (0..count).map(|_| rng.random_range(0..cfg.lane_count)).collect();
    let mut per_lane: Vec<Vec<usize>> = vec![Vec::new(); cfg.lane_count];
    for (car, &lane) in lanes.iter().enumerate() {
        per_lane[lane].push(car);
    }
    let mut positions = vec![0.0; count];
    for (lane, cars) in per_lane.iter().enumerate() {
        if cars.is_empty() {
            continue;
        }
        let slack = span - (cars.len() - 1) as f64 * spacing;
        if slack < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "{} cars do not fit in lane {lane} with {spacing:.1} m spacing",
                cars.len()
            )));
        }
        let mut offsets: Vec<f64> = cars.iter().map(|_| rng.random::<f64>() * slack).collect();
        offsets.sort_by(f64::total_cmp);
        for (k, (&car, off)) in cars.iter().zip(offsets).enumerate() {
            positions[car] = off + k as f64 * spacing;
        }
    }
    let cars = (0..count)
        .map(|i| CarSpec {
            id: i as u64,
            lane: lanes[i],
            position: positions[i],
            speed: rng.random::<f64>() * v_init_max,
            destination: cfg.lane_length,
            engine: Some(EngineState::Moving),
        })
        .collect();
    let lights = if with_lights {
        (0..cfg.lane_count)
            .map(|lane| LightSpec {
                id: lane as u64,
                lane,
                position: cfg.lane_length * LIGHT_POSITION,
                initial_phase: Phase::ALL[rng.random_range(0..3)],
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ScenarioSpec { cars, lights })
}
