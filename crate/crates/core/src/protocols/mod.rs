//! Multi-economy processes in analytic (oracle-driven) and stochastic
//! (agent-driven) modes.

pub mod arbitrage;
pub mod carnot;
pub mod economy;
pub mod join;
pub mod path;
pub mod price;
pub mod script;
pub mod stochastic_carnot;
pub mod thermometer;

pub use economy::{money_for_entropy, money_for_temperature, Economy};
pub use join::{join_all, join_to_equilibrium, AgentEconomy, JoinOutcome};
