use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("unknown car id {0}")]
    UnknownCar(u64),

    #[error("duplicate car id {0}")]
    DuplicateCar(u64),

    #[error("cars {a} and {b} overlap in lane {lane}")]
    Overlap { a: u64, b: u64, lane: usize },

    #[error("{entity} {id} references lane {lane}, but the world has {lane_count} lanes")]
    LaneOutOfRange {
        entity: &'static str,
        id: u64,
        lane: usize,
        lane_count: usize,
    },

    #[error("{entity} {id}: {msg}")]
    OutOfBounds {
        entity: &'static str,
        id: u64,
        msg: String,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("beacon decode: {0}")]
    Codec(String),

    #[error("{0}")]
    InvalidArgument(String),
}
