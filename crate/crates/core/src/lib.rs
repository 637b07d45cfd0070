//! Deterministic simulator of cooperative "intelligent" cars.
//!
//! Each step every car senses its neighbours with four range sensors, reads
//! the traffic light ahead through a synthetic camera, exchanges beacons with
//! cars inside its radio radius, and runs a rule cascade to pick a decision.
//! The same cascade on perfect information acts as referee; the [`harness`]
//! module turns agreement with it into accuracy curves.

pub mod avoidance;
pub mod comms;
pub mod config;
pub mod engine;
pub mod error;
pub mod harness;
pub mod rng;
pub mod scenario;
pub mod signals;
pub mod vision;
pub mod world;

pub use avoidance::{decide, oracle_decide, required_gap, Decision};
pub use comms::{Beacon, DecisionRecord, NetworkTable, PresentRecord};
pub use config::{DecisionSource, LightDurations, WorldConfig};
pub use engine::{engine_transition, speed_update, EngineState};
pub use error::{Error, Result};
pub use harness::MetricsReport;
pub use scenario::{CarSpec, LightSpec, ScenarioSpec};
pub use signals::{light_step, render_patch, ImagePatch, Phase, TrafficLight};
pub use vision::{classify, color_to_command, EngineCommand, LightColor, NoGlowingLamp};
pub use world::{CarDecision, CarState, CollisionEvent, Direction, Gap, SensorReading, StepReport, World};
