//! Carnot cycle of a boat economy shuttling between a hot and a cold
//! mainland, run as an engine (extracting money) or a pump (driving money
//! from cold to hot).

use serde::{Deserialize, Serialize};

use super::economy::{money_for_temperature, Economy};
use super::join::join_to_equilibrium;
use super::path::{isentrope_at, isentrope_goods_at_temperature, isentrope_step};
use crate::error::{Error, Result};
use crate::ode;
use crate::state::MacroState;
use crate::thermo;

/// A mainland is either an ideal reservoir at fixed temperature or a finite
/// economy whose temperature responds to the money it exchanges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Mainland {
    Reservoir { temperature: f64 },
    Finite { economy: Economy },
}

impl Mainland {
    pub fn temperature(&self) -> Result<f64> {
        match self {
            Mainland::Reservoir { temperature } => Ok(*temperature),
            Mainland::Finite { economy } => economy.temperature(),
        }
    }

    /// Brings `boat` to financial equilibrium; returns the money moved from
    /// the mainland to the boat.
    fn equilibrate(&mut self, boat: &mut Economy) -> Result<f64> {
        match self {
            Mainland::Reservoir { temperature } => {
                let m = money_for_temperature(&boat.model, &boat.state.goods.amounts, *temperature)?;
                let flow = m - boat.state.money;
                boat.state.money = m;
                Ok(flow)
            }
            Mainland::Finite { economy } => {
                let (land, b, flow) = join_to_equilibrium(economy, boat)?;
                *economy = land;
                *boat = b;
                Ok(flow)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Engine,
    Pump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarnotConfig {
    pub hot: Mainland,
    pub cold: Mainland,
    /// Boat economy; its goods fix the cycle's starting corner and its money
    /// is reset to the cold temperature before the first leg.
    pub boat: Economy,
    #[serde(default)]
    pub good: usize,
    /// Goods ratio across each isothermal leg.
    pub goods_ratio: f64,
    pub n_steps: usize,
    pub direction: Direction,
    #[serde(default = "one")]
    pub cycles: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contact {
    None,
    Hot,
    Cold,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Goods(f64),
    Temperature(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegSpec {
    pub contact: Contact,
    pub target: Target,
}

/// One row of the per-leg trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegPoint {
    pub cycle: usize,
    pub leg: usize,
    #[serde(rename = "G_boat")]
    pub g_boat: f64,
    #[serde(rename = "M_boat")]
    pub m_boat: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub mu: f64,
    pub trader_money: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarnotResult {
    pub direction: Direction,
    pub good: usize,
    pub money_from_hot: f64,
    pub money_to_cold: f64,
    pub trader_profit: f64,
    pub boat_money_change: f64,
    /// Engine: profit / money from hot. Pump: money into hot / money spent.
    pub performance: f64,
    /// Engine: `1 − T_C/T_H`. Pump: `1/(1 − T_C/T_H)`.
    pub ideal: f64,
    pub loop_mu_dg: f64,
    pub loop_t_ds: f64,
    /// Boat goods at the end of each leg, per cycle.
    pub corners: Vec<[f64; 4]>,
    pub trace: Vec<LegPoint>,
    pub boat: Economy,
    pub hot: Mainland,
    pub cold: Mainland,
}

struct Run {
    boat: Economy,
    hot: Mainland,
    cold: Mainland,
    good: usize,
    trader: f64,
    from_hot: f64,
    to_cold: f64,
    trace: Vec<LegPoint>,
}

impl Run {
    fn record(&mut self, cycle: usize, leg: usize) -> Result<()> {
        let q = self.boat.thermo()?;
        self.trace.push(LegPoint {
            cycle,
            leg,
            g_boat: self.boat.state.good(self.good),
            m_boat: self.boat.state.money,
            t: q.t,
            s: q.s,
            mu: q.mu[self.good],
            trader_money: self.trader,
        });
        Ok(())
    }

    /// Reversible trade of `dg` goods into the boat; the trader receives the
    /// boat's money change.
    fn trade(&mut self, dg: f64) -> Result<()> {
        let next = isentrope_step(&self.boat.model, &self.boat.state, self.good, dg).map_err(infeasible)?;
        self.trader += self.boat.state.money - next.money;
        self.boat.state = next;
        Ok(())
    }

    fn contact(&mut self, side: Contact) -> Result<()> {
        match side {
            Contact::None => {}
            Contact::Hot => self.from_hot += self.hot.equilibrate(&mut self.boat).map_err(infeasible)?,
            Contact::Cold => self.to_cold -= self.cold.equilibrate(&mut self.boat).map_err(infeasible)?,
        }
        Ok(())
    }

    fn leg(&mut self, spec: LegSpec, n_steps: usize, cycle: usize, leg: usize) -> Result<()> {
        self.contact(spec.contact)?;
        let g0 = self.boat.state.good(self.good);
        let g1 = match spec.target {
            Target::Goods(g) => g,
            Target::Temperature(t) => {
                isentrope_goods_at_temperature(&self.boat.model, &self.boat.state, self.good, t).map_err(infeasible)?
            }
        };
        if !(g1 > 0.0) {
            return Err(Error::LegInfeasible(format!("leg {leg} targets goods {g1}")));
        }
        let dg = (g1 - g0) / n_steps as f64;
        for k in 1..=n_steps {
            // Land exactly on the target goods at the last step.
            let step = if k == n_steps { g1 - self.boat.state.good(self.good) } else { dg };
            self.trade(step)?;
            self.contact(spec.contact)?;
            self.record(cycle, leg)?;
        }
        Ok(())
    }
}

fn infeasible(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::LegInfeasible(m),
        other => other,
    }
}

fn validate(cfg: &CarnotConfig) -> Result<(f64, f64)> {
    let (th, tc) = (cfg.hot.temperature()?, cfg.cold.temperature()?);
    if cfg.n_steps == 0 || cfg.cycles == 0 {
        return Err(Error::InvalidParameter("n_steps and cycles must be at least 1".into()));
    }
    if !(cfg.goods_ratio > 0.0) {
        return Err(Error::InvalidParameter("goods ratio must be positive".into()));
    }
    if cfg.direction == Direction::Engine && th < tc {
        return Err(Error::InvalidParameter(format!("engine needs T_H ≥ T_C, got {th} < {tc}")));
    }
    if cfg.good >= cfg.boat.model.n_goods() {
        return Err(Error::DimensionMismatch { expected: cfg.boat.model.n_goods(), got: cfg.good + 1 });
    }
    Ok((th, tc))
}

/// Runs the cycle. Legs start from the boat at the cold temperature (`a`).
///
/// Engine: isentrope up to `T_H` (trader buys goods), isotherm at `T_H`
/// selling goods until they grow by `goods_ratio`, isentrope down to `T_C`
/// (trader sells), isotherm at `T_C` buying back to the starting goods.
/// The pump runs the same corners in reverse order.
pub fn carnot_cycle(cfg: &CarnotConfig) -> Result<CarnotResult> {
    let (th, tc) = validate(cfg)?;
    let mut boat = cfg.boat.clone();
    boat.state.money = money_for_temperature(&boat.model, &boat.state.goods.amounts, tc).map_err(infeasible)?;
    let ga = boat.state.good(cfg.good);
    let r = cfg.goods_ratio;
    let mut run = Run { boat, hot: cfg.hot.clone(), cold: cfg.cold.clone(), good: cfg.good, trader: 0.0, from_hot: 0.0, to_cold: 0.0, trace: Vec::new() };
    let m_start = run.boat.state.money;
    let ideal_cycle = ideal_loop(&run.boat, cfg.good, th, tc, r, cfg.direction)?;
    run.record(0, 0)?;
    let mut corners = Vec::with_capacity(cfg.cycles);
    for cycle in 1..=cfg.cycles {
        let mut c = [0.0; 4];
        for leg in 1..=4 {
            let (t_hot, t_cold) = (run.hot.temperature()?, run.cold.temperature()?);
            let g = run.boat.state.good(cfg.good);
            let spec = match (cfg.direction, leg) {
                (Direction::Engine, 1) => LegSpec { contact: Contact::None, target: Target::Temperature(t_hot) },
                (Direction::Engine, 2) => LegSpec { contact: Contact::Hot, target: Target::Goods(g * r) },
                (Direction::Engine, 3) => LegSpec { contact: Contact::None, target: Target::Temperature(t_cold) },
                (Direction::Engine, _) => LegSpec { contact: Contact::Cold, target: Target::Goods(ga) },
                (Direction::Pump, 1) => LegSpec { contact: Contact::Cold, target: Target::Goods(g * r) },
                (Direction::Pump, 2) => LegSpec { contact: Contact::None, target: Target::Temperature(t_hot) },
                (Direction::Pump, 3) => LegSpec { contact: Contact::Hot, target: Target::Goods(g / r) },
                (Direction::Pump, _) => LegSpec { contact: Contact::None, target: Target::Goods(ga) },
            };
            run.leg(spec, cfg.n_steps, cycle, leg)?;
            c[leg - 1] = run.boat.state.good(cfg.good);
        }
        corners.push(c);
    }
    finish(run, cfg.direction, m_start, corners, ideal_cycle, th, tc)
}

/// Runs a pump through the reverse of an engine's recorded corners, starting
/// from the mainlands and boat the engine left behind.
pub fn retrace_as_pump(engine: &CarnotResult, n_steps: usize) -> Result<CarnotResult> {
    let corners = engine.corners.last().ok_or_else(|| Error::InvalidParameter("engine result has no cycles".into()))?;
    let good = engine.good;
    let (th, tc) = (engine.hot.temperature()?, engine.cold.temperature()?);
    let mut run = Run {
        boat: engine.boat.clone(),
        hot: engine.hot.clone(),
        cold: engine.cold.clone(),
        good,
        trader: 0.0,
        from_hot: 0.0,
        to_cold: 0.0,
        trace: Vec::new(),
    };
    let m_start = run.boat.state.money;
    run.record(0, 0)?;
    let [_, gb, gc, gd] = *corners;
    let ga = run.boat.state.good(good);
    let legs = [
        LegSpec { contact: Contact::Cold, target: Target::Goods(gd) },
        LegSpec { contact: Contact::None, target: Target::Goods(gc) },
        LegSpec { contact: Contact::Hot, target: Target::Goods(gb) },
        LegSpec { contact: Contact::None, target: Target::Goods(ga) },
    ];
    for (i, spec) in legs.into_iter().enumerate() {
        run.leg(spec, n_steps, 1, i + 1)?;
    }
    let ideal = ideal_loop(&run.boat, good, th, tc, gc / gb, Direction::Pump).unwrap_or((f64::NAN, f64::NAN));
    finish(run, Direction::Pump, m_start, vec![[gd, gc, gb, ga]], ideal, th, tc)
}

fn finish(
    run: Run,
    direction: Direction,
    m_start: f64,
    corners: Vec<[f64; 4]>,
    loops: (f64, f64),
    th: f64,
    tc: f64,
) -> Result<CarnotResult> {
    let carnot = 1.0 - tc / th;
    let (performance, ideal) = match direction {
        Direction::Engine => (run.trader / run.from_hot, carnot),
        Direction::Pump => ((-run.from_hot) / (-run.trader), 1.0 / carnot),
    };
    Ok(CarnotResult {
        direction,
        good: run.good,
        money_from_hot: run.from_hot,
        money_to_cold: run.to_cold,
        trader_profit: run.trader,
        boat_money_change: run.boat.state.money - m_start,
        performance,
        ideal,
        loop_mu_dg: loops.0,
        loop_t_ds: loops.1,
        corners,
        trace: run.trace,
        boat: run.boat,
        hot: run.hot,
        cold: run.cold,
    })
}

/// Quadrature panels per leg for loop integrals.
const LOOP_PANELS: usize = 32;

/// `∮μ dG` and `∮T dS` of the reversible cycle at fixed reservoir
/// temperatures, starting from `boat` at `t_cold`. Signs follow the trader's
/// gain: positive for an engine, negative for a pump.
pub fn ideal_loop(boat: &Economy, good: usize, t_hot: f64, t_cold: f64, ratio: f64, direction: Direction) -> Result<(f64, f64)> {
    let model = &boat.model;
    let mut goods = boat.state.goods.amounts.clone();
    let at_t = |g: f64, t: f64, goods: &mut Vec<f64>| -> Result<MacroState> {
        goods[good] = g;
        MacroState::new(money_for_temperature(model, goods, t)?, goods)
    };
    let a = at_t(boat.state.good(good), t_cold, &mut goods)?;
    let gb = isentrope_goods_at_temperature(model, &a, good, t_hot)?;
    let b = isentrope_at(model, &a, good, gb)?;
    let c = at_t(gb * ratio, t_hot, &mut goods)?;
    let gd = isentrope_goods_at_temperature(model, &c, good, t_cold)?;
    let d = isentrope_at(model, &c, good, gd)?;

    let isentrope_leg = |from: &MacroState, g1: f64| -> Result<f64> {
        panels(from.good(good), g1, |g| thermo::price(model, &isentrope_at(model, from, good, g)?, good))
    };
    let isotherm_leg = |from: &MacroState, g1: f64, t: f64| -> Result<f64> {
        let mut goods = from.goods.amounts.clone();
        panels(from.good(good), g1, |g| {
            goods[good] = g;
            let st = MacroState::new(money_for_temperature(model, &goods, t)?, &goods)?;
            thermo::price(model, &st, good)
        })
    };
    let mu_dg = isentrope_leg(&a, b.good(good))?
        + isotherm_leg(&b, c.good(good), t_hot)?
        + isentrope_leg(&c, d.good(good))?
        + isotherm_leg(&d, a.good(good), t_cold)?;
    let s = |st: &MacroState| model.entropy(st);
    let t_ds = t_hot * (s(&c)? - s(&b)?) + t_cold * (s(&a)? - s(&d)?);
    Ok(match direction {
        Direction::Engine => (mu_dg, t_ds),
        Direction::Pump => (-mu_dg, -t_ds),
    })
}

fn panels<F: FnMut(f64) -> Result<f64>>(g0: f64, g1: f64, mut f: F) -> Result<f64> {
    let h = (g1 - g0) / LOOP_PANELS as f64;
    let mut acc = 0.0;
    for k in 0..LOOP_PANELS {
        let lo = g0 + h * k as f64;
        acc += ode::integrate(&mut f, lo, lo + h, 20)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EntropyModel;

    fn config(th: f64, tc: f64, n: usize, direction: Direction) -> CarnotConfig {
        CarnotConfig {
            hot: Mainland::Reservoir { temperature: th },
            cold: Mainland::Reservoir { temperature: tc },
            boat: Economy::new("boat", EntropyModel::cobb_douglas(10.0, &[2.0], 2.5), MacroState::new(1.0, &[10.0]).unwrap()).unwrap(),
            good: 0,
            goods_ratio: 2.0,
            n_steps: n,
            direction,
            cycles: 1,
        }
    }

    #[test]
    fn equal_temperatures_give_no_profit() {
        // Only the discretisation loss remains, and it shrinks like 1/n.
        let coarse = carnot_cycle(&config(0.3, 0.3, 50, Direction::Engine)).unwrap();
        let fine = carnot_cycle(&config(0.3, 0.3, 500, Direction::Engine)).unwrap();
        assert!(coarse.trader_profit < 0.0 && fine.trader_profit < 0.0);
        let ratio = coarse.trader_profit / fine.trader_profit;
        assert!((ratio - 10.0).abs() < 0.5, "ratio {ratio}");
        assert!(coarse.loop_t_ds.abs() < 1e-12);
    }

    #[test]
    fn reservoir_cycle_conserves_money_and_returns_the_boat() {
        let r = carnot_cycle(&config(0.47, 0.24, 200, Direction::Engine)).unwrap();
        assert!((r.money_from_hot - r.money_to_cold - r.trader_profit).abs() < 1e-12);
        assert!(r.boat_money_change.abs() < 1e-12);
        assert!(r.trader_profit > 0.0 && r.performance <= r.ideal);
    }

    #[test]
    fn loop_areas_agree_with_closed_form() {
        // Isotherm legs of a Cobb-Douglas boat contribute αN T ln r each.
        let r = carnot_cycle(&config(0.47, 0.24, 10, Direction::Engine)).unwrap();
        let closed = 2.0 * 10.0 * (0.47 - 0.24) * 2f64.ln();
        assert!((r.loop_t_ds - closed).abs() < 1e-12);
        assert!((r.loop_mu_dg - closed).abs() < 1e-10);
    }

    #[test]
    fn pump_cop_is_below_the_carnot_bound() {
        let r = carnot_cycle(&config(0.47, 0.24, 200, Direction::Pump)).unwrap();
        assert!(r.trader_profit < 0.0 && r.money_from_hot < 0.0);
        assert!(r.performance < r.ideal && r.performance > 0.9 * r.ideal);
    }

    #[test]
    fn engine_rejects_reversed_temperatures() {
        assert!(carnot_cycle(&config(0.2, 0.3, 10, Direction::Engine)).is_err());
    }
}
