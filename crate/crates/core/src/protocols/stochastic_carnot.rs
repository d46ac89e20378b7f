//! Agent-level Carnot engine. The trader walks the boat around the ideal
//! cycle by posting the market price of successive points on each leg and
//! letting the boat relax to it; the hot and cold mainlands are finite agent
//! economies in money contact with the boat during the isothermal legs.

use serde::{Deserialize, Serialize};

use super::economy::{money_for_temperature, Economy};
use super::join::{build_engine, AgentEconomy};
use super::path::{isentrope_at, isentrope_goods_at_temperature};
use crate::error::{Error, Result};
use crate::micro::{replica_seed, AgentSelector, Channel, Engine, Trader};
use crate::state::MacroState;
use crate::stats::mean_se;
use crate::thermo;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticCarnotConfig {
    pub hot: AgentEconomy,
    pub cold: AgentEconomy,
    /// Single-good boat; its money is reset to the cold temperature.
    pub boat: AgentEconomy,
    pub goods_ratio: f64,
    /// Posted prices per leg.
    pub n_steps: usize,
    /// Relaxation sweeps after each price change.
    pub sweeps_per_step: u64,
    /// Trader encounters with the boat per sweep.
    pub trades_per_sweep: u64,
    /// Rate of each boat–mainland pair during contact.
    pub cross_rate: f64,
    pub cycles: usize,
    pub replicas: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarnotReplica {
    pub seed: u64,
    pub money_from_hot: f64,
    pub money_to_cold: f64,
    pub trader_profit: f64,
    pub boat_money_change: f64,
    pub efficiency: f64,
    pub final_t_hot: f64,
    pub final_t_cold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticCarnotResult {
    pub replicas: Vec<CarnotReplica>,
    pub mean_efficiency: f64,
    pub se: f64,
    pub ideal: f64,
    /// Trader profit of the reversible cycle at the nominal temperatures.
    pub ideal_profit: f64,
}

const HOT: usize = 0;
const COLD: usize = 1;
const BOAT: usize = 2;

/// Posted-price schedule for the four legs of the ideal engine cycle.
fn schedule(boat: &Economy, t_hot: f64, t_cold: f64, ratio: f64, n: usize) -> Result<[Vec<f64>; 4]> {
    let model = &boat.model;
    let a = boat.state.clone();
    let gb = isentrope_goods_at_temperature(model, &a, 0, t_hot)?;
    let gc = gb * ratio;
    let c = MacroState::new(money_for_temperature(model, &[gc], t_hot)?, &[gc])?;
    let gd = isentrope_goods_at_temperature(model, &c, 0, t_cold)?;
    let isentrope = |from: &MacroState, g1: f64| -> Result<Vec<f64>> {
        let g0 = from.good(0);
        (1..=n).map(|k| thermo::price(model, &isentrope_at(model, from, 0, g0 + (g1 - g0) * k as f64 / n as f64)?, 0)).collect()
    };
    let isotherm = |g0: f64, g1: f64, t: f64| -> Result<Vec<f64>> {
        (1..=n)
            .map(|k| {
                let g = g0 + (g1 - g0) * k as f64 / n as f64;
                thermo::price(model, &MacroState::new(money_for_temperature(model, &[g], t)?, &[g])?, 0)
            })
            .collect()
    };
    Ok([isentrope(&a, gb)?, isotherm(gb, gc, t_hot)?, isentrope(&c, gd)?, isotherm(gd, a.good(0), t_cold)?])
}

fn check(cfg: &StochasticCarnotConfig) -> Result<()> {
    if cfg.boat.state.dim() != 1 || cfg.hot.state.dim() != 1 || cfg.cold.state.dim() != 1 {
        return Err(Error::InvalidParameter("stochastic Carnot runs single-good economies".into()));
    }
    if cfg.n_steps == 0 || cfg.cycles == 0 || cfg.replicas == 0 || cfg.sweeps_per_step == 0 {
        return Err(Error::InvalidParameter("steps, cycles, replicas and sweeps must be positive".into()));
    }
    Ok(())
}

pub fn stochastic_carnot(cfg: &StochasticCarnotConfig) -> Result<StochasticCarnotResult> {
    check(cfg)?;
    let t_hot = thermo::temperature(&cfg.hot.params.model()?, &cfg.hot.state)?;
    let t_cold = thermo::temperature(&cfg.cold.params.model()?, &cfg.cold.state)?;
    if t_hot <= t_cold {
        return Err(Error::InvalidParameter("engine needs T_H > T_C".into()));
    }
    let boat_model = cfg.boat.params.model()?;
    let boat_money = money_for_temperature(&boat_model, &cfg.boat.state.goods.amounts, t_cold)?;
    let boat = Economy::new("boat", boat_model, MacroState::new(boat_money, &cfg.boat.state.goods.amounts)?)?;
    let prices = schedule(&boat, t_hot, t_cold, cfg.goods_ratio, cfg.n_steps)?;
    let ideal_profit = cfg.cycles as f64
        * super::carnot::ideal_loop(&boat, 0, t_hot, t_cold, cfg.goods_ratio, super::carnot::Direction::Engine)?.1;

    let mut replicas = Vec::with_capacity(cfg.replicas as usize);
    for r in 0..cfg.replicas {
        let seed = replica_seed(cfg.seed, r);
        let mut boat_agents = cfg.boat.clone();
        boat_agents.state.money = boat_money;
        let mut engine = build_engine(&[cfg.hot.clone(), cfg.cold.clone(), boat_agents], seed)?;
        replicas.push(run_replica(&mut engine, cfg, &prices, seed)?);
    }
    let effs: Vec<f64> = replicas.iter().map(|r| r.efficiency).collect();
    let (mean, se) = mean_se(&effs);
    Ok(StochasticCarnotResult { replicas, mean_efficiency: mean, se, ideal: 1.0 - t_cold / t_hot, ideal_profit })
}

fn run_replica(engine: &mut Engine, cfg: &StochasticCarnotConfig, prices: &[Vec<f64>; 4], seed: u64) -> Result<CarnotReplica> {
    let selector = AgentSelector::uniform(&engine.pop, BOAT);
    let (mh0, mc0, mb0) = (engine.pop.money_total(HOT), engine.pop.money_total(COLD), engine.pop.money_total(BOAT));
    let mut profit = 0.0;
    for _ in 0..cfg.cycles {
        for (leg, schedule) in prices.iter().enumerate() {
            let contact = match leg {
                1 => Some(HOT),
                3 => Some(COLD),
                _ => None,
            };
            if let Some(land) = contact {
                engine.connect(land, BOAT, cfg.cross_rate, Channel::Money)?;
            }
            for &price in schedule {
                let trader = Trader { good: 0, price, selector: selector.clone() };
                for _ in 0..cfg.sweeps_per_step {
                    engine.sweep();
                    for _ in 0..cfg.trades_per_sweep {
                        profit += engine.trade(&trader).money;
                    }
                }
            }
            if let Some(land) = contact {
                engine.disconnect(land, BOAT);
            }
        }
    }
    let from_hot = mh0 - engine.pop.money_total(HOT);
    let to_cold = engine.pop.money_total(COLD) - mc0;
    let temp = |e: usize| thermo::temperature(&engine.pop.model(e), &engine.pop.macro_state(e)).unwrap_or(f64::NAN);
    Ok(CarnotReplica {
        seed,
        money_from_hot: from_hot,
        money_to_cold: to_cold,
        trader_profit: profit,
        boat_money_change: engine.pop.money_total(BOAT) - mb0,
        efficiency: profit / from_hot,
        final_t_hot: temp(HOT),
        final_t_cold: temp(COLD),
    })
}
