//! Discrete-time simulator of swarm source localization in an obstacle-rich
//! plant, coordinated either through edge-server digital twins or
//! peer-to-peer.
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod avoidance;
pub mod coordinator;
pub mod engine;
pub mod environment;
pub mod error;
pub mod geometry;
pub mod planner;
pub mod radio;
pub mod rng;
pub mod scalar;
pub mod swarm;

pub use coordinator::Mode;
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point = geometry::Vec2<f64>;
pub type Map = environment::WorldMap<f64>;
pub type MapSpec = environment::MapSpec<f64>;
pub type Field = radio::RadioField<f64>;
pub type Agent = swarm::AgentState<f64>;
pub type Registry = coordinator::TwinRegistry<f64>;
pub type Config = engine::ScenarioConfig<f64>;
pub type World = engine::World<f64>;
pub type Metrics = engine::RunMetrics<f64>;
pub type Batch = engine::MonteCarlo<f64>;

pub type Map32 = environment::WorldMap<f32>;
pub type Config32 = engine::ScenarioConfig<f32>;
pub type World32 = engine::World<f32>;
