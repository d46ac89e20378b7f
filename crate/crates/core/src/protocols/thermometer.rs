//! Ship thermometer: a small Cobb-Douglas economy put in money contact with
//! a mainland; its money (or price level) reads the mainland temperature.

use serde::{Deserialize, Serialize};

use super::economy::Economy;
use super::join::{build_engine, join_to_equilibrium, AgentEconomy};
use crate::error::{Error, Result};
use crate::micro::{BurnIn, Channel};
use crate::model::EntropyModel;
use crate::stats::{StatsAccumulator, Summary};
use crate::thermo;

/// Ships larger than this fraction of the mainland trigger a warning.
pub const DEFAULT_SIZE_RATIO: f64 = 0.05;
/// Relative shift of the mainland temperature that triggers a warning.
pub const PERTURBATION_WARNING: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "readout", rename_all = "kebab-case")]
pub enum Readout {
    /// `T̂ = M_ship / (N η)`.
    Money,
    /// `T̂ = μ_ship G_ship / (α N)`.
    Price { good: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermometerReading {
    pub temperature: f64,
    pub se: f64,
    pub mainland_before: f64,
    pub mainland_after: f64,
    /// `|ΔT_mainland| / T_mainland` caused by the contact.
    pub perturbation: f64,
    pub warnings: Vec<String>,
}

/// Temperature read off a Cobb-Douglas ship's state.
pub fn read(ship: &EntropyModel, state: &crate::state::MacroState, readout: Readout) -> Result<f64> {
    let EntropyModel::CobbDouglas { n, alpha, eta } = ship else {
        return Err(Error::InvalidParameter("the ship must be a Cobb-Douglas economy".into()));
    };
    match readout {
        Readout::Money => Ok(state.money / (n * eta)),
        Readout::Price { good } => {
            let mu = thermo::price(ship, state, good)?;
            Ok(mu * state.good(good) / (alpha[good] * n))
        }
    }
}

fn agent_count(model: &EntropyModel) -> Option<f64> {
    match model {
        EntropyModel::CobbDouglas { n, .. }
        | EntropyModel::CoupledTest { n, .. }
        | EntropyModel::PerfectSubstitutes { n, .. } => Some(*n),
        _ => None,
    }
}

fn size_warnings(mainland: Option<f64>, ship: f64, warnings: &mut Vec<String>) {
    if let Some(n) = mainland {
        if ship > DEFAULT_SIZE_RATIO * n {
            warnings.push(format!("ship of {ship} agents exceeds {DEFAULT_SIZE_RATIO} of the mainland's {n}"));
        }
    }
}

/// Analytic reading: join to equilibrium, then read the ship.
pub fn ship_thermometer(mainland: &Economy, ship: &Economy, readout: Readout) -> Result<ThermometerReading> {
    let before = mainland.temperature()?;
    let (land, boat, _) = join_to_equilibrium(mainland, ship)?;
    let after = land.temperature()?;
    let mut warnings = Vec::new();
    size_warnings(agent_count(&mainland.model), agent_count(&ship.model).unwrap_or(f64::NAN), &mut warnings);
    let perturbation = ((after - before) / before).abs();
    if perturbation > PERTURBATION_WARNING {
        warnings.push(format!("ship shifts the mainland temperature by {:.3}%", 100.0 * perturbation));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ThermometerReading {
        temperature: read(&boat.model, &boat.state, readout)?,
        se: 0.0,
        mainland_before: before,
        mainland_after: after,
        perturbation,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShipConfig {
    pub mainland: AgentEconomy,
    pub ship: AgentEconomy,
    pub readout: Readout,
    pub cross_rate: f64,
    pub sweeps: u64,
    pub seed: u64,
    #[serde(default)]
    pub burn_in: BurnIn,
}

/// Stochastic reading with the series behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShipSeries {
    pub reading: ThermometerReading,
    /// Common temperature of the joined system (oracle).
    pub t_joint: f64,
    /// Ship money capacity `N η`.
    pub capacity: f64,
    pub ship_money: Summary,
    pub t_measured: Summary,
    /// Instantaneous ship price of good 0.
    pub ship_price: Summary,
}

pub fn ship_thermometer_stochastic(cfg: &ShipConfig) -> Result<ShipSeries> {
    let ship_model = cfg.ship.params.model()?;
    let land_model = cfg.mainland.params.model()?;
    let mainland = Economy::new("mainland", land_model.clone(), cfg.mainland.state.clone())?;
    let ship = Economy::new("ship", ship_model.clone(), cfg.ship.state.clone())?;
    let (joined_land, _, _) = join_to_equilibrium(&mainland, &ship)?;
    let t_joint = joined_land.temperature()?;
    let before = mainland.temperature()?;

    let mut engine = build_engine(&[cfg.mainland.clone(), cfg.ship.clone()], cfg.seed)?;
    engine.connect(0, 1, cfg.cross_rate, Channel::Money)?;
    engine.burn_in(&cfg.burn_in);
    let (mut money, mut t_hat, mut price, mut land_t) =
        (StatsAccumulator::new(), StatsAccumulator::new(), StatsAccumulator::new(), StatsAccumulator::new());
    engine.run(cfg.sweeps, 1, |e| {
        let st = e.pop.macro_state(1);
        money.push(st.money);
        t_hat.push(read(&ship_model, &st, cfg.readout).unwrap_or(f64::NAN));
        price.push(e.pop.empirical_price(1, 0));
        land_t.push(thermo::temperature(&land_model, &e.pop.macro_state(0)).unwrap_or(f64::NAN));
    });
    let after = land_t.mean();
    let perturbation = ((after - before) / before).abs();
    let mut warnings = Vec::new();
    size_warnings(Some(cfg.mainland.params.n_agents as f64), cfg.ship.params.n_agents as f64, &mut warnings);
    if perturbation > PERTURBATION_WARNING {
        warnings.push(format!("ship shifts the mainland temperature by {:.3}%", 100.0 * perturbation));
    }
    let EntropyModel::CobbDouglas { n, eta, .. } = &ship_model else { unreachable!("agent economies are Cobb-Douglas") };
    let t_summary = t_hat.summary("t_measured");
    Ok(ShipSeries {
        reading: ThermometerReading {
            temperature: t_summary.mean,
            se: t_summary.se,
            mainland_before: before,
            mainland_after: after,
            perturbation,
            warnings,
        },
        t_joint,
        capacity: n * eta,
        ship_money: money.summary("ship_money"),
        t_measured: t_summary,
        ship_price: price.summary("ship_price"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GoodsTerm;
    use crate::state::MacroState;

    #[test]
    fn scaled_clone_reads_the_mainland_exactly() {
        let land = Economy::new("l", EntropyModel::cobb_douglas(400.0, &[1.0], 2.5), MacroState::new(80.0, &[300.0]).unwrap()).unwrap();
        let ship = Economy::new("s", EntropyModel::cobb_douglas(8.0, &[1.0], 2.5), MacroState::new(1.6, &[6.0]).unwrap()).unwrap();
        for readout in [Readout::Money, Readout::Price { good: 0 }] {
            let r = ship_thermometer(&land, &ship, readout).unwrap();
            assert!((r.temperature - 0.08).abs() < 1e-15);
            assert!(r.warnings.is_empty());
        }
    }

    #[test]
    fn pure_money_mainland_price_reading_tracks_temperature() {
        let model = EntropyModel::PureMoney { k: 50.0, goods: vec![GoodsTerm::Log { weight: 20.0 }] };
        let ship = Economy::new("s", EntropyModel::cobb_douglas(2.0, &[1.0], 1.0), MacroState::new(1.0, &[3.0]).unwrap()).unwrap();
        let reading = |m: f64| {
            let land = Economy::new("l", model.clone(), MacroState::new(m, &[10.0]).unwrap()).unwrap();
            let r = ship_thermometer(&land, &ship, Readout::Price { good: 0 }).unwrap();
            (r.temperature, r.mainland_after)
        };
        let (t1, land1) = reading(100.0);
        let (t2, land2) = reading(200.0);
        assert!((t2 / t1 - land2 / land1).abs() < 1e-12);
    }

    #[test]
    fn big_ships_are_flagged() {
        let land = Economy::new("l", EntropyModel::cobb_douglas(10.0, &[1.0], 1.0), MacroState::new(1.0, &[1.0]).unwrap()).unwrap();
        let ship = Economy::new("s", EntropyModel::cobb_douglas(5.0, &[1.0], 1.0), MacroState::new(5.0, &[1.0]).unwrap()).unwrap();
        let r = ship_thermometer(&land, &ship, Readout::Money).unwrap();
        assert_eq!(r.warnings.len(), 2);
    }
}
