//! Checks on derivative relations, the equal-area rule, entropy
//! reconstruction from prices, equilibrium fluctuations and linear flux
//! response.

pub mod area;
pub mod derivatives;
pub mod fluctuations;
pub mod onsager;
pub mod reconstruct;

pub use area::{area_curves, equal_area_check, AreaOptions, AreaReport, CellArea, CurvePoint};
pub use derivatives::{
    compensated_derivative, derivative_relations_report, flexibility_matrix, le_chatelier, DerivativeReport,
    FlexibilityMatrix, LeChatelier, ProbeSettings, Quantity, Relation, RelationRecord,
};
pub use fluctuations::{fluctuation_report, FluctuationConfig, FluctuationReport, Ratio, ShipFluctuations};
pub use onsager::{estimate_onsager, OnsagerConfig, OnsagerEstimate};
pub use reconstruct::{
    measure_price_grid, reconstruct_entropy, AffineFit, PriceOracle, PriceSample, PriceSurface, ReconstructOptions,
    ReconstructionResult, Reference,
};
