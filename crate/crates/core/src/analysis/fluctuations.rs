//! Equilibrium fluctuations of a ship economy in money contact with a
//! mainland, against the capacity formulas `Var M = C T²`,
//! `Var T_m = T²/(ηN)` and `Var μ = −T ∂μ/∂G|_S`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::micro::{replica_seed, BurnIn};
use crate::model::EntropyModel;
use crate::protocols::join::AgentEconomy;
use crate::protocols::thermometer::{ship_thermometer_stochastic, Readout, ShipConfig, ShipSeries};
use crate::state::MacroState;
use crate::stats::Summary;

/// A variance ratio with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub se: f64,
}

impl Ratio {
    /// Variance of an autocorrelated series over a reference, with the
    /// Gaussian large-sample SE `var·√(2τ/n)`.
    fn of_variance(s: &Summary, reference: f64) -> Self {
        let value = s.variance / reference;
        let se = if s.ess > 0.0 { value * (2.0 / s.ess).sqrt() } else { f64::INFINITY };
        Self { value, se }
    }

    pub fn ci(&self, k: f64) -> (f64, f64) {
        (self.value - k * self.se, self.value + k * self.se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShipFluctuations {
    pub ship_agents: usize,
    pub temperature: f64,
    pub capacity: f64,
    /// `Var M / (C T²)`.
    pub money: Ratio,
    /// `Var T_m / T²`, expected `1/(ηN)`.
    pub thermometer: Ratio,
    pub thermometer_expected: f64,
    /// `Var μ / (−T ∂μ/∂G|_S)`. Conditional on entropy being the log of the
    /// accessible volume; reported, never asserted.
    pub price_conditional: Ratio,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationReport {
    pub ships: Vec<ShipFluctuations>,
    /// `(Var T_m/T²)` at `N` over the same at `2N`, for consecutive
    /// doublings in the ship list; ideally 2.
    pub halving_ratios: Vec<Ratio>,
}

/// `−T ∂μ/∂G|_S` for a single-good Cobb-Douglas ship: along an isentrope
/// `M ∝ G^{−α/η}`, so `∂μ/∂G|_S = −μ (1 + α/η)/G`.
fn price_reference(model: &EntropyModel, state: &MacroState, t: f64) -> Result<f64> {
    let EntropyModel::CobbDouglas { alpha, eta, .. } = model else {
        return Err(Error::InvalidParameter("ship must be Cobb-Douglas".into()));
    };
    let g = state.good(0);
    let mu = alpha[0] * state.money / (eta * g);
    Ok(t * mu * (1.0 + alpha[0] / eta) / g)
}

pub fn ship_fluctuations(ship: &AgentEconomy, series: &ShipSeries) -> Result<ShipFluctuations> {
    let model = ship.params.model()?;
    let EntropyModel::CobbDouglas { n, eta, .. } = &model else { unreachable!("agent economies are Cobb-Douglas") };
    let t = series.t_joint;
    let c = series.capacity;
    let mut state = ship.state.clone();
    state.money = c * t;
    let money = Ratio::of_variance(&series.ship_money, c * t * t);
    let thermometer = Ratio::of_variance(&series.t_measured, t * t);
    let price_conditional = Ratio::of_variance(&series.ship_price, price_reference(&model, &state, t)?);
    let mut warnings = series.reading.warnings.clone();
    for s in [&series.ship_money, &series.t_measured, &series.ship_price] {
        if s.low_ess {
            warnings.push(format!("{}: effective sample size {:.0}", s.name, s.ess));
        }
    }
    Ok(ShipFluctuations {
        ship_agents: ship.params.n_agents,
        temperature: t,
        capacity: c,
        money,
        thermometer,
        thermometer_expected: 1.0 / (eta * n),
        price_conditional,
        warnings,
    })
}

/// Ships of each size in `ship_sizes`, each a scaled copy of `ship`
/// (goods and money per agent kept), in contact with `mainland`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluctuationConfig {
    pub mainland: AgentEconomy,
    pub ship: AgentEconomy,
    pub ship_sizes: Vec<usize>,
    pub cross_rate: f64,
    pub sweeps: u64,
    pub seed: u64,
    #[serde(default)]
    pub burn_in: BurnIn,
}

pub fn fluctuation_report(cfg: &FluctuationConfig) -> Result<FluctuationReport> {
    if cfg.ship.state.dim() != 1 {
        return Err(Error::InvalidParameter("fluctuation study uses single-good ships".into()));
    }
    let base_n = cfg.ship.params.n_agents as f64;
    let mut ships = Vec::with_capacity(cfg.ship_sizes.len());
    for (k, &size) in cfg.ship_sizes.iter().enumerate() {
        let mut ship = cfg.ship.clone();
        ship.params.n_agents = size;
        ship.state = cfg.ship.state.scaled(size as f64 / base_n);
        let sc = ShipConfig {
            mainland: cfg.mainland.clone(),
            ship: ship.clone(),
            readout: Readout::Money,
            cross_rate: cfg.cross_rate,
            sweeps: cfg.sweeps,
            seed: replica_seed(cfg.seed, k as u64),
            burn_in: cfg.burn_in.clone(),
        };
        let series = ship_thermometer_stochastic(&sc)?;
        ships.push(ship_fluctuations(&ship, &series)?);
    }
    let mut halving_ratios = Vec::new();
    for a in &ships {
        if let Some(b) = ships.iter().find(|b| b.ship_agents == 2 * a.ship_agents) {
            let value = a.thermometer.value / b.thermometer.value;
            let rel = ((a.thermometer.se / a.thermometer.value).powi(2) + (b.thermometer.se / b.thermometer.value).powi(2)).sqrt();
            halving_ratios.push(Ratio { value, se: value * rel });
        }
    }
    Ok(FluctuationReport { ships, halving_ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CobbDouglasParams;

    #[test]
    fn small_ship_money_variance_tracks_capacity() {
        let cfg = FluctuationConfig {
            mainland: AgentEconomy { params: CobbDouglasParams::homogeneous(200, &[1.0], 2.5), state: MacroState::new(100.0, &[200.0]).unwrap() },
            ship: AgentEconomy { params: CobbDouglasParams::homogeneous(10, &[1.0], 2.5), state: MacroState::new(5.0, &[10.0]).unwrap() },
            ship_sizes: vec![10],
            cross_rate: 1.0,
            sweeps: 4000,
            seed: 11,
            burn_in: BurnIn::Fixed { sweeps: 200 },
        };
        let r = fluctuation_report(&cfg).unwrap();
        // Finite mainland: Var M = C T² · Nη_land / (Nη_total + 1).
        let expected = 500.0 / 526.0;
        let s = &r.ships[0];
        assert!((s.money.value - expected).abs() < 4.0 * s.money.se + 0.02, "{s:?}");
        assert!((s.thermometer_expected - 1.0 / 25.0).abs() < 1e-15);
    }
}
