use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("target lies inside an obstacle")]
    TargetInsideObstacle,
    #[error("base station lies inside an obstacle")]
    BaseStationInsideObstacle,
    #[error("{what} lies outside the map bounds")]
    OutOfBounds { what: &'static str },
    #[error("invalid obstacle rectangle #{index}: {reason}")]
    InvalidObstacle { index: usize, reason: &'static str },
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("disconnected map: spawn cell ({col}, {row}) has no free path to the target")]
    DisconnectedMap { col: usize, row: usize },
    #[error("range scan origin is occupied")]
    OriginOccupied,
    #[error("goal is unreachable from the start cell")]
    UnreachableGoal,
    #[error("twin registry is empty")]
    EmptyRegistry,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("map file: {0}")]
    MapFile(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
