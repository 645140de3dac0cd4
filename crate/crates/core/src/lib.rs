//! Handover-count statistics for cellular-connected UAVs: network and
//! channel simulation, the A3 handover state machine, Monte Carlo campaigns,
//! distribution fitting, speed estimation and mobility-state detection.

pub mod antenna;
pub mod channel;
pub mod error;
pub mod estimation;
pub mod fitting;
pub mod format;
pub mod geometry;
pub mod handover;
pub mod montecarlo;
pub mod msd;
pub mod registry;

pub use error::{Error, Result};
