//! Stochastic exchange dynamics of individual agents.

pub mod engine;
pub mod graph;
pub mod kernel;
pub mod population;

pub use engine::{replica_seed, BurnIn, BurnInReport, Engine, SimConfig};
pub use graph::{Channel, EncounterGraph};
pub use kernel::{AgentSelector, BetaCache, GiftPot, TradeFlow, Trader};
pub use population::Population;
