//! Scenario model, session engine, wire protocol and survey statistics for
//! a classroom location-based game.

pub mod engine;
pub mod ids;
pub mod phase;
pub mod protocol;
pub mod scenario;
pub mod survey;
