//! Optimisation over entropy functions: allocations, trade classification,
//! gains of trade, exergy and tariffs.

pub mod allocation;
pub mod optimize;

pub use allocation::Allocation;
pub use optimize::{cobb_douglas_max_entropy, max_entropy_allocation, pareto_set, weighted_max_entropy, MaxEntropy, ParetoPoint};
pub mod classify;
pub mod gains;
pub mod cone;
pub mod edgeworth;
pub mod tariff;

pub use classify::{classify_trade, Classification, TradeClass};
pub use cone::{feasible_cone, FeasibleCone, Quadrant};
pub use edgeworth::{edgeworth_box, EdgeworthBox};
pub use gains::{exergy, gains_by_protocol, gains_closed_form, gains_of_trade, Exergy, GainsResult, ProtocolGains};
pub use tariff::{tariff_equilibrium, TariffOutcome, TariffSpec};
