//! Deterministic bot-client simulation of classplay sessions.
//!
//! Bots with configurable behaviour profiles play a whole session against a
//! room, either in process or over real TCP. Everything runs on a virtual
//! clock, so a (scenario, size, seed, profiles, faults) tuple always yields
//! the same transcript.

pub mod bot;
pub mod corpus;
pub mod equivalence;
pub mod error;
pub mod profile;
pub mod run;
pub mod screen;
pub mod sweep;
pub mod transcript;
pub mod transport;

pub use equivalence::{checkpoint_equivalence, EquivalenceReport};
pub use error::SimError;
pub use profile::{BotKind, BotProfile, Fault, ProfileSpec};
pub use run::{roster, run_on, run_simulation, RunReport, SimConfig, TransportKind};
pub use sweep::{sweep, SweepReport};
pub use transcript::{idle_metric, IdleReport, Transcript};
