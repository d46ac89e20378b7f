//! Thermodynamics of exchange economies.
//!
//! The crate is organised bottom-up: an analytic entropy oracle
//! ([`model`], [`thermo`]), numerical plumbing ([`diff`], [`roots`], [`ode`],
//! [`stats`]), the stochastic agent model ([`micro`]), multi-economy
//! processes ([`protocols`]), entropy-based trade optimisation ([`trade`]),
//! derivative and fluctuation analyses ([`analysis`]) and the acceptance
//! batteries shared by the CLI and tests ([`verify`]).

pub mod analysis;
pub mod diff;
pub mod micro;
pub mod error;
pub mod io;
pub mod model;
pub mod protocols;
pub mod ode;
pub mod roots;
pub mod state;
pub mod stats;
pub mod table;
pub mod thermo;
pub mod trade;
pub mod verify;

pub use error::{Error, Result};
pub use model::{CobbDouglasParams, EntropyModel, Gradient, ModelSpec};
pub use state::{GoodsVector, MacroState};
pub use thermo::{thermo_quantities, ThermoQuantities};
