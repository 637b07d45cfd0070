//! World tunables and their flat `key=value` file format.

use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::signals::Phase;

/// Per-phase durations of every traffic light, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightDurations {
    pub green: f64,
    pub yellow: f64,
    pub red: f64,
}

impl LightDurations {
    pub fn of(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Green => self.green,
            Phase::Yellow => self.yellow,
            Phase::Red => self.red,
        }
    }

    pub fn cycle(&self) -> f64 {
        self.green + self.yellow + self.red
    }
}

/// Which decision a car actually executes each step.
///
/// `Onboard` is the normal mode: the car acts on its own noisy sensors and
/// network table. `Oracle` drives every car from perfect information, which
/// is how the safety property of the rule cascade is exercised in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecisionSource {
    #[default]
    Onboard,
    Oracle,
}

impl FromStr for DecisionSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "onboard" => Ok(Self::Onboard),
            "oracle" => Ok(Self::Oracle),
            other => Err(format!("expected onboard|oracle, got {other:?}")),
        }
    }
}

impl DecisionSource {
    fn as_str(self) -> &'static str {
        match self {
            Self::Onboard => "onboard",
            Self::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub lane_count: usize,
    pub lane_length: f64,
    pub time_step: f64,
    pub sensor_range: f64,
    /// Standard deviation of range-sensor noise, meters.
    pub sensor_noise_sigma: f64,
    pub comms_radius: f64,
    pub car_length: f64,
    pub v_max: f64,
    /// Braking magnitude, m/s². Also the acceleration cap.
    pub a_max: f64,
    pub t_react: f64,
    /// Standstill gap.
    pub d_min: f64,
    pub light_durations: LightDurations,
    pub beacon_ttl: f64,
    /// Comms rounds per step before cars commit to a decision.
    pub decision_rounds: u32,
    pub rng_seed: u64,
    /// Independent per-delivery beacon loss probability.
    pub p_loss: f64,
    /// Camera intensity noise as a fraction of full scale.
    pub camera_noise_sigma: f64,
    pub decision_source: DecisionSource,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            lane_count: 3,
            lane_length: 1000.0,
            time_step: 0.1,
            sensor_range: 150.0,
            sensor_noise_sigma: 0.0,
            comms_radius: 300.0,
            car_length: 5.0,
            v_max: 20.0,
            a_max: 4.0,
            t_react: 1.0,
            d_min: 2.0,
            light_durations: LightDurations {
                green: 20.0,
                yellow: 3.0,
                red: 15.0,
            },
            beacon_ttl: 1.0,
            decision_rounds: 1,
            rng_seed: 42,
            p_loss: 0.0,
            camera_noise_sigma: 0.05,
            decision_source: DecisionSource::Onboard,
        }
    }
}

const KEYS: &[&str] = &[
    "lane_count",
    "lane_length",
    "time_step",
    "sensor_range",
    "sensor_noise_sigma",
    "comms_radius",
    "car_length",
    "v_max",
    "a_max",
    "t_react",
    "d_min",
    "light_durations",
    "beacon_ttl",
    "decision_rounds",
    "rng_seed",
    "p_loss",
    "camera_noise_sigma",
    "decision_source",
];

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lane_length", self.lane_length),
            ("time_step", self.time_step),
            ("sensor_range", self.sensor_range),
            ("comms_radius", self.comms_radius),
            ("car_length", self.car_length),
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("d_min", self.d_min),
            ("beacon_ttl", self.beacon_ttl),
            ("light_durations.green", self.light_durations.green),
            ("light_durations.yellow", self.light_durations.yellow),
            ("light_durations.red", self.light_durations.red),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("sensor_noise_sigma", self.sensor_noise_sigma),
            ("t_react", self.t_react),
            ("camera_noise_sigma", self.camera_noise_sigma),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.lane_count == 0 {
            return Err(Error::InvalidConfig("lane_count must be >= 1".into()));
        }
        if self.lane_count > u16::MAX as usize {
            return Err(Error::InvalidConfig("lane_count must fit in 16 bits".into()));
        }
        if self.decision_rounds == 0 {
            return Err(Error::InvalidConfig("decision_rounds must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_loss) {
            return Err(Error::InvalidConfig(format!(
                "p_loss must be in [0, 1], got {}",
                self.p_loss
            )));
        }
        Ok(())
    }

    /// Parses the `key=value` format. Keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|msg| Error::Parse { line: line_no, msg })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse()
                .map_err(|_| format!("{key}: cannot parse {v:?} as a number"))
        }
        match key {
            "lane_count" => self.lane_count = num(key, value)?,
            "lane_length" => self.lane_length = num(key, value)?,
            "time_step" => self.time_step = num(key, value)?,
            "sensor_range" => self.sensor_range = num(key, value)?,
            "sensor_noise_sigma" => self.sensor_noise_sigma = num(key, value)?,
            "comms_radius" => self.comms_radius = num(key, value)?,
            "car_length" => self.car_length = num(key, value)?,
            "v_max" => self.v_max = num(key, value)?,
            "a_max" => self.a_max = num(key, value)?,
            "t_react" => self.t_react = num(key, value)?,
            "d_min" => self.d_min = num(key, value)?,
            "light_durations" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(format!(
                        "light_durations: expected green,yellow,red, got {value:?}"
                    ));
                }
                self.light_durations = LightDurations {
                    green: num(key, parts[0])?,
                    yellow: num(key, parts[1])?,
                    red: num(key, parts[2])?,
                };
            }
            "beacon_ttl" => self.beacon_ttl = num(key, value)?,
            "decision_rounds" => self.decision_rounds = num(key, value)?,
            "rng_seed" => self.rng_seed = num(key, value)?,
            "p_loss" => self.p_loss = num(key, value)?,
            "camera_noise_sigma" => self.camera_noise_sigma = num(key, value)?,
            "decision_source" => self.decision_source = value.parse()?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Canonical serialization: every key, fixed order, shortest round-trip floats.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = match *key {
                "lane_count" => self.lane_count.to_string(),
                "lane_length" => self.lane_length.to_string(),
                "time_step" => self.time_step.to_string(),
                "sensor_range" => self.sensor_range.to_string(),
                "sensor_noise_sigma" => self.sensor_noise_sigma.to_string(),
                "comms_radius" => self.comms_radius.to_string(),
                "car_length" => self.car_length.to_string(),
                "v_max" => self.v_max.to_string(),
                "a_max" => self.a_max.to_string(),
                "t_react" => self.t_react.to_string(),
                "d_min" => self.d_min.to_string(),
                "light_durations" => format!(
                    "{},{},{}",
                    self.light_durations.green,
                    self.light_durations.yellow,
                    self.light_durations.red
                ),
                "beacon_ttl" => self.beacon_ttl.to_string(),
                "decision_rounds" => self.decision_rounds.to_string(),
                "rng_seed" => self.rng_seed.to_string(),
                "p_loss" => self.p_loss.to_string(),
                "camera_noise_sigma" => self.camera_noise_sigma.to_string(),
                "decision_source" => self.decision_source.as_str().to_string(),
                _ => unreachable!(),
            };
            let _ = writeln!(out, "{key}={value}");
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization.
    pub fn hash_hex(&self) -> String {
        let digest = Sha256::digest(self.to_kv_string().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        WorldConfig::default().validate().unwrap();
    }

    #[test]
    fn kv_round_trip() {
        let mut cfg = WorldConfig {
            p_loss: 0.25,
            decision_source: DecisionSource::Oracle,
            ..WorldConfig::default()
        };
        cfg.light_durations.yellow = 2.5;
        let parsed = WorldConfig::parse(&cfg.to_kv_string()).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.hash_hex(), cfg.hash_hex());
    }

    #[test]
    fn comments_and_partial_files() {
        let cfg = WorldConfig::parse("# tuned\nv_max = 15 # slower\n\nlane_count=2\n").unwrap();
        assert_eq!(cfg.v_max, 15.0);
        assert_eq!(cfg.lane_count, 2);
        assert_eq!(cfg.a_max, WorldConfig::default().a_max);
    }

    #[test]
    fn rejects_unknown_key_and_bad_values() {
        assert!(matches!(
            WorldConfig::parse("speed_limit=3"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            WorldConfig::parse("time_step=0"),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            WorldConfig::parse("d_min=-1"),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            WorldConfig::parse("light_durations=1,2"),
            Err(Error::Parse { .. })
        ));
        assert!(WorldConfig::parse("decision_rounds=0").is_err());
    }

    #[test]
    fn hash_changes_with_any_field() {
        let base = WorldConfig::default();
        let mut other = base.clone();
        other.rng_seed += 1;
        assert_ne!(base.hash_hex(), other.hash_hex());
    }
}
