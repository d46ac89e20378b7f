//! Financial joins: money flows between economies until temperatures agree.

use serde::{Deserialize, Serialize};

use super::economy::{money_for_temperature, solve_increasing, Economy};
use crate::error::{Error, Result};
use crate::micro::{BurnIn, Channel, EncounterGraph, Engine, Population};
use crate::model::CobbDouglasParams;
use crate::state::MacroState;
use crate::stats::{StatsAccumulator, Summary};

/// Outcome of an analytic join of several economies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinOutcome {
    pub economies: Vec<Economy>,
    pub temperature: f64,
    /// Money received by each economy (negative when it pays out).
    pub inflows: Vec<f64>,
    pub entropy_before: f64,
    pub entropy_after: f64,
}

/// Joins economies financially and returns the common-temperature state.
/// Total money is conserved exactly: the last economy takes the remainder.
pub fn join_all(economies: &[Economy]) -> Result<JoinOutcome> {
    if economies.is_empty() {
        return Err(Error::InvalidParameter("join needs at least one economy".into()));
    }
    let total: f64 = economies.iter().map(|e| e.state.money).sum();
    let mut entropy_before = 0.0;
    let mut temps = Vec::with_capacity(economies.len());
    for e in economies {
        let q = e.thermo()?;
        if !(q.beta > 0.0) {
            return Err(Error::SingularDerivative(q.beta));
        }
        entropy_before += q.s;
        temps.push(q.t);
    }
    let money_at = |t: f64| -> Result<Vec<f64>> {
        economies.iter().map(|e| money_for_temperature(&e.model, &e.state.goods.amounts, t)).collect()
    };
    let t0 = temps.iter().sum::<f64>() / temps.len() as f64;
    let t = if temps.iter().all(|x| *x == temps[0]) {
        temps[0]
    } else {
        solve_increasing(|t| Ok(money_at(t)?.iter().sum::<f64>() - total), t0, 1e-15).map_err(|e| match e {
            Error::NoRoot { .. } | Error::Domain(_) => Error::NoEquilibrium(format!("no common temperature: {e}")),
            other => other,
        })?
    };
    let mut money = money_at(t)?;
    let last = money.len() - 1;
    money[last] = total - money[..last].iter().sum::<f64>();
    let mut out = Vec::with_capacity(economies.len());
    let mut inflows = Vec::with_capacity(economies.len());
    let mut entropy_after = 0.0;
    for (e, m) in economies.iter().zip(&money) {
        let joined = e.with_money(*m);
        entropy_after += joined.entropy()?;
        inflows.push(m - e.state.money);
        out.push(joined);
    }
    Ok(JoinOutcome { economies: out, temperature: t, inflows, entropy_before, entropy_after })
}

/// Two-economy join; the flow is the money moved from `a` to `b`.
pub fn join_to_equilibrium(a: &Economy, b: &Economy) -> Result<(Economy, Economy, f64)> {
    let out = join_all(&[a.clone(), b.clone()])?;
    let flow = out.inflows[1];
    let mut it = out.economies.into_iter();
    Ok((it.next().expect("two economies"), it.next().expect("two economies"), flow))
}

/// A Cobb-Douglas economy realised as agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEconomy {
    pub params: CobbDouglasParams,
    pub state: MacroState,
}

/// Stochastic join settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticJoinConfig {
    pub seed: u64,
    pub sweeps: u64,
    /// Rate of each cross-economy pair relative to the internal pair rate 1.
    pub cross_rate: f64,
    pub burn_in: BurnIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticJoin {
    /// Time-averaged money per economy with autocorrelation-corrected SE.
    pub money: Vec<Summary>,
    pub burn_in_sweeps: u64,
}

/// Builds the agent population for `economies`, complete graphs inside each.
pub fn build_engine(economies: &[AgentEconomy], seed: u64) -> Result<Engine> {
    let k = economies.first().map(|e| e.state.dim()).ok_or_else(|| Error::InvalidParameter("no economies".into()))?;
    let mut pop = Population::new(k);
    for e in economies {
        pop.add_economy(&e.params, e.state.money, &e.state.goods.amounts)?;
    }
    let graph = EncounterGraph::complete_within_each(&pop, 1.0)?;
    let mut engine = Engine::new(pop, graph, seed)?;
    for e in 0..economies.len() {
        engine.resample_stationary(e)?;
    }
    Ok(engine)
}

/// Every pair of economies in money contact; the long-run money split is
/// measured after burn-in.
pub fn stochastic_join(economies: &[AgentEconomy], cfg: &StochasticJoinConfig) -> Result<StochasticJoin> {
    let mut engine = build_engine(economies, cfg.seed)?;
    for a in 0..economies.len() {
        for b in a + 1..economies.len() {
            engine.connect(a, b, cfg.cross_rate, Channel::Money)?;
        }
    }
    let burn = engine.burn_in(&cfg.burn_in);
    let mut acc = vec![StatsAccumulator::new(); economies.len()];
    engine.run(cfg.sweeps, 1, |e| {
        for (i, a) in acc.iter_mut().enumerate() {
            a.push(e.pop.money_total(i));
        }
    });
    Ok(StochasticJoin {
        money: acc.iter().enumerate().map(|(i, a)| a.summary(&format!("money[{i}]"))).collect(),
        burn_in_sweeps: burn.sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EntropyModel;

    fn econ(n: f64, eta: f64, m: f64, g: f64) -> Economy {
        Economy::new("e", EntropyModel::cobb_douglas(n, &[1.0], eta), MacroState::new(m, &[g]).unwrap()).unwrap()
    }

    #[test]
    fn equal_temperatures_do_not_flow() {
        let (_, _, flow) = join_to_equilibrium(&econ(10.0, 2.0, 2.0, 5.0), &econ(5.0, 2.0, 1.0, 9.0)).unwrap();
        assert!(flow.abs() < 1e-15);
    }

    #[test]
    fn money_runs_downhill_in_temperature() {
        let hot = econ(10.0, 1.0, 8.0, 5.0);
        let cold = econ(10.0, 1.0, 2.0, 5.0);
        let (h, c, flow) = join_to_equilibrium(&hot, &cold).unwrap();
        assert!(flow > 0.0);
        assert!((h.state.money - 5.0).abs() < 1e-12 && (c.state.money - 5.0).abs() < 1e-12);
        let gained = c.entropy().unwrap() - cold.entropy().unwrap();
        let lost = hot.entropy().unwrap() - h.entropy().unwrap();
        assert!(gained > lost && lost > 0.0);
    }

    #[test]
    fn three_way_join_conserves_money() {
        let es = [econ(3.0, 1.0, 1.0, 1.0), econ(4.0, 2.0, 7.0, 2.0), econ(5.0, 0.5, 0.3, 3.0)];
        let out = join_all(&es).unwrap();
        let after: f64 = out.economies.iter().map(|e| e.state.money).sum();
        assert!((after - 8.3).abs() < 1e-14);
        for e in &out.economies {
            assert!((e.temperature().unwrap() / out.temperature - 1.0).abs() < 1e-12);
        }
        assert!(out.entropy_after > out.entropy_before);
    }
}
