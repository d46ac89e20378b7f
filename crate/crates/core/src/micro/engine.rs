//! Seeded simulation engine owning one population and its encounter graph.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::graph::{Channel, EncounterGraph};
use super::kernel::{self, BetaCache, GiftPot, TradeFlow, Trader};
use super::population::Population;
use crate::error::{Error, Result};
use crate::thermo;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BurnIn {
    Fixed { sweeps: u64 },
    /// Consecutive windows of `window` sweeps until every monitored
    /// observable's window mean moves by less than `threshold` window SDs.
    Adaptive { window: u64, threshold: f64, max_windows: u64 },
}

impl Default for BurnIn {
    fn default() -> Self {
        BurnIn::Adaptive { window: 200, threshold: 0.2, max_windows: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub sweeps: u64,
    #[serde(default = "one")]
    pub thin: u64,
    #[serde(default)]
    pub burn_in: BurnIn,
    #[serde(default = "scheme")]
    pub scheme: String,
}

fn one() -> u64 {
    1
}

fn scheme() -> String {
    "random-scan-gibbs".into()
}

impl SimConfig {
    pub fn new(seed: u64, sweeps: u64) -> Self {
        Self { seed, sweeps, thin: 1, burn_in: BurnIn::default(), scheme: scheme() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurnInReport {
    pub sweeps: u64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RenormLog {
    pub count: u64,
    pub max_rel_correction: f64,
}

/// Sweeps between renormalizations of the conserved totals.
const RENORM_SWEEPS: u64 = 1000;

pub struct Engine {
    pub pop: Population,
    graph: EncounterGraph,
    pub rng: ChaCha8Rng,
    pub cache: BetaCache,
    pub steps: u64,
    pub renorm: RenormLog,
    money_comp: Vec<usize>,
    goods_comp: Vec<usize>,
    money_ref: Vec<f64>,
    goods_ref: Vec<f64>,
    since_renorm: u64,
}

/// Counter-based seed splitter: replica `index` of master seed `seed`.
pub fn replica_seed(seed: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(index.wrapping_add(1)))
}

impl Engine {
    pub fn new(pop: Population, graph: EncounterGraph, seed: u64) -> Result<Self> {
        graph.validate(&pop)?;
        if !pop.all_positive() {
            return Err(Error::Domain("holdings must be strictly positive".into()));
        }
        let mut e = Engine {
            pop,
            graph,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cache: BetaCache::new(),
            steps: 0,
            renorm: RenormLog::default(),
            money_comp: Vec::new(),
            goods_comp: Vec::new(),
            money_ref: Vec::new(),
            goods_ref: Vec::new(),
            since_renorm: 0,
        };
        e.reset_conservation();
        Ok(e)
    }

    pub fn graph(&self) -> &EncounterGraph {
        &self.graph
    }

    /// Recomputes conservation components and takes current sums as reference.
    fn reset_conservation(&mut self) {
        let n = self.pop.n_agents();
        let k = self.pop.n_goods;
        self.money_comp = self.graph.components(n, Channel::moves_money);
        self.goods_comp = self.graph.components(n, Channel::moves_goods);
        self.money_ref = vec![0.0; n];
        self.goods_ref = vec![0.0; n * k];
        for i in 0..n {
            self.money_ref[self.money_comp[i]] += self.pop.m[i];
            for good in 0..k {
                self.goods_ref[self.goods_comp[i] * k + good] += self.pop.g[i * k + good];
            }
        }
    }

    pub fn connect(&mut self, a: usize, b: usize, rate: f64, channel: Channel) -> Result<()> {
        self.graph.connect(&self.pop, a, b, rate, channel)?;
        self.reset_conservation();
        Ok(())
    }

    pub fn disconnect(&mut self, a: usize, b: usize) -> usize {
        let n = self.graph.disconnect(a, b);
        self.reset_conservation();
        n
    }

    /// Rescales holdings so each conserved total matches its reference.
    pub fn renormalize(&mut self) {
        let n = self.pop.n_agents();
        let k = self.pop.n_goods;
        let mut msum = vec![0.0; n];
        let mut gsum = vec![0.0; n * k];
        for i in 0..n {
            msum[self.money_comp[i]] += self.pop.m[i];
            for good in 0..k {
                gsum[self.goods_comp[i] * k + good] += self.pop.g[i * k + good];
            }
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            let c = self.money_comp[i];
            let f = self.money_ref[c] / msum[c];
            worst = worst.max((f - 1.0).abs());
            self.pop.m[i] *= f;
            for good in 0..k {
                let c = self.goods_comp[i] * k + good;
                let f = self.goods_ref[c] / gsum[c];
                worst = worst.max((f - 1.0).abs());
                self.pop.g[i * k + good] *= f;
            }
        }
        self.renorm.count += 1;
        self.renorm.max_rel_correction = self.renorm.max_rel_correction.max(worst);
        if worst > 0.0 {
            log::debug!("renormalized totals; relative correction {worst:e}");
        }
        self.since_renorm = 0;
    }

    #[inline]
    pub fn step(&mut self) {
        kernel::exchange_step(&mut self.pop, &self.graph, &mut self.rng, &mut self.cache);
        self.steps += 1;
    }

    /// `n_agents` pair encounters.
    pub fn sweep(&mut self) {
        for _ in 0..self.pop.n_agents() {
            kernel::exchange_step(&mut self.pop, &self.graph, &mut self.rng, &mut self.cache);
        }
        self.steps += self.pop.n_agents() as u64;
        self.since_renorm += 1;
        if self.since_renorm >= RENORM_SWEEPS {
            self.renormalize();
        }
    }

    pub fn sweeps(&mut self, n: u64) {
        for _ in 0..n {
            self.sweep();
        }
    }

    /// One trader encounter; conserved references follow the trade.
    pub fn trade(&mut self, trader: &Trader) -> TradeFlow {
        let k = self.pop.n_goods;
        let flow = kernel::trader_trade_step(&mut self.pop, trader, &mut self.rng, &mut self.cache);
        self.money_ref[self.money_comp[flow.agent]] -= flow.money;
        self.goods_ref[self.goods_comp[flow.agent] * k + trader.good] -= flow.goods;
        flow
    }

    /// One gift encounter; returns the economy's money change.
    pub fn gift(&mut self, pot: &GiftPot, economy_money: f64) -> f64 {
        let (agent, delta) = kernel::trader_gift_step(&mut self.pop, pot, economy_money, &mut self.rng);
        self.money_ref[self.money_comp[agent]] += delta;
        delta
    }

    /// Replaces an isolated economy's holdings by an exact draw from its
    /// stationary law (independent Dirichlet splits of goods and money).
    pub fn resample_stationary(&mut self, economy: usize) -> Result<()> {
        let r = self.pop.agents(economy);
        if r.clone().any(|i| self.money_comp[i] != self.money_comp[r.start] || self.goods_comp[i] != self.goods_comp[r.start])
            || (0..self.pop.n_agents()).any(|i| !r.contains(&i) && self.money_comp[i] == self.money_comp[r.start])
        {
            return Err(Error::InvalidParameter("stationary resampling needs an isolated economy".into()));
        }
        let k = self.pop.n_goods;
        let mtot = self.pop.money_total(economy);
        let draws: Vec<f64> = r.clone().map(|i| gamma(self.pop.eta[i], &mut self.rng)).collect();
        let s: f64 = draws.iter().sum();
        for (i, d) in r.clone().zip(&draws) {
            self.pop.m[i] = mtot * d / s;
        }
        for good in 0..k {
            let gtot = self.pop.goods_total(economy, good);
            let draws: Vec<f64> = r.clone().map(|i| gamma(self.pop.alpha[i * k + good], &mut self.rng)).collect();
            let s: f64 = draws.iter().sum();
            for (i, d) in r.clone().zip(&draws) {
                self.pop.g[i * k + good] = gtot * d / s;
            }
        }
        self.renormalize();
        Ok(())
    }

    /// Per-economy drift observables: oracle entropy at the measured macro
    /// state and the mean log holding.
    fn drift_observables(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.pop.n_economies());
        for e in 0..self.pop.n_economies() {
            let s = self.pop.model(e).entropy(&self.pop.macro_state(e)).unwrap_or(f64::NAN);
            v.push(s);
            v.push(self.pop.log_holdings(e) / self.pop.economies[e].len as f64);
        }
        v
    }

    pub fn burn_in(&mut self, policy: &BurnIn) -> BurnInReport {
        match policy {
            BurnIn::Fixed { sweeps } => {
                self.sweeps(*sweeps);
                BurnInReport { sweeps: *sweeps, converged: true }
            }
            BurnIn::Adaptive { window, threshold, max_windows } => {
                let window = (*window).max(2);
                let mut prev: Option<Vec<(f64, f64)>> = None;
                let mut done = 0;
                for _ in 0..*max_windows {
                    let mut acc: Vec<crate::stats::StatsAccumulator> = Vec::new();
                    for _ in 0..window {
                        self.sweep();
                        let obs = self.drift_observables();
                        if acc.is_empty() {
                            acc = vec![crate::stats::StatsAccumulator::new(); obs.len()];
                        }
                        for (a, o) in acc.iter_mut().zip(obs) {
                            a.push(o);
                        }
                    }
                    done += window;
                    let cur: Vec<(f64, f64)> = acc.iter().map(|a| (a.mean(), a.variance().sqrt())).collect();
                    if let Some(p) = &prev {
                        let stable = p.iter().zip(&cur).all(|((m0, _), (m1, sd))| (m1 - m0).abs() <= threshold * sd);
                        if stable {
                            return BurnInReport { sweeps: done, converged: true };
                        }
                    }
                    prev = Some(cur);
                }
                log::warn!("burn-in did not pass the drift test after {done} sweeps");
                BurnInReport { sweeps: done, converged: false }
            }
        }
    }

    /// Runs `sweeps` sweeps, calling `observe` every `thin` sweeps.
    pub fn run<F: FnMut(&Engine)>(&mut self, sweeps: u64, thin: u64, mut observe: F) {
        let thin = thin.max(1);
        for s in 1..=sweeps {
            self.sweep();
            if s % thin == 0 {
                observe(self);
            }
        }
    }

    /// Macro trajectory rows for every economy at the current step.
    pub fn trajectory_rows(&self) -> Vec<TrajectoryRow> {
        (0..self.pop.n_economies())
            .map(|e| {
                let state = self.pop.macro_state(e);
                let model = self.pop.model(e);
                TrajectoryRow {
                    step: self.steps,
                    economy: e,
                    money: state.money,
                    goods: state.goods.amounts.clone(),
                    t_oracle: thermo::temperature(&model, &state).unwrap_or(f64::NAN),
                    s_oracle: model.entropy(&state).unwrap_or(f64::NAN),
                    empirical_price: (0..self.pop.n_goods).map(|k| self.pop.empirical_price(e, k)).collect(),
                }
            })
            .collect()
    }
}

fn gamma(shape: f64, rng: &mut ChaCha8Rng) -> f64 {
    let d = Gamma::new(shape, 1.0).expect("positive shape");
    loop {
        let x = d.sample(rng);
        if x > 0.0 {
            return x;
        }
    }
}

/// One row of the trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: u64,
    pub economy: usize,
    pub money: f64,
    pub goods: Vec<f64>,
    pub t_oracle: f64,
    pub s_oracle: f64,
    pub empirical_price: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CobbDouglasParams;
    use crate::micro::kernel::AgentSelector;

    fn engine(seed: u64) -> Engine {
        let mut p = Population::new(1);
        p.add_economy(&CobbDouglasParams::homogeneous(10, &[1.0], 2.5), 1.0, &[30.0]).unwrap();
        let g = EncounterGraph::complete_within_each(&p, 1.0).unwrap();
        Engine::new(p, g, seed).unwrap()
    }

    #[test]
    fn identical_seeds_give_identical_trajectories() {
        let (mut a, mut b) = (engine(42), engine(42));
        a.sweeps(500);
        b.sweeps(500);
        assert_eq!(a.pop.m, b.pop.m);
        assert_eq!(a.pop.g, b.pop.g);
        let mut c = engine(43);
        c.sweeps(500);
        assert_ne!(a.pop.m, c.pop.m);
    }

    #[test]
    fn totals_are_conserved_over_a_million_steps() {
        let mut e = engine(7);
        for _ in 0..1_000_000 {
            e.step();
        }
        let m: f64 = e.pop.m.iter().sum();
        let g: f64 = e.pop.g.iter().sum();
        assert!((m - 1.0).abs() < 1e-12, "money drift {}", m - 1.0);
        assert!((g - 30.0).abs() / 30.0 < 1e-12, "goods drift {}", g - 30.0);
        e.renormalize();
        assert!(e.renorm.max_rel_correction < 1e-12);
    }

    #[test]
    fn trades_move_the_conserved_reference() {
        let mut e = engine(3);
        let t = Trader { good: 0, price: 0.1, selector: AgentSelector::uniform(&e.pop, 0) };
        let mut paid = 0.0;
        for _ in 0..100 {
            paid += e.trade(&t).money;
            e.sweep();
        }
        e.renormalize();
        assert!((e.pop.money_total(0) - (1.0 - paid)).abs() < 1e-12);
    }

    #[test]
    fn adaptive_burn_in_converges() {
        let mut e = engine(5);
        let r = e.burn_in(&BurnIn::default());
        assert!(r.converged);
    }

    #[test]
    fn stationary_resampling_keeps_totals() {
        let mut e = engine(5);
        e.resample_stationary(0).unwrap();
        assert!((e.pop.money_total(0) - 1.0).abs() < 1e-14);
        assert!((e.pop.goods_total(0, 0) - 30.0).abs() < 1e-12);
    }
}
