//! Transition kernels: pair re-splits, trader trades and gifts.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Beta, Distribution};

use super::graph::{Channel, EncounterGraph};
use super::population::Population;
use crate::error::{Error, Result};

/// Interior margin for budget-line trades, relative to the agent's wealth.
pub const INTERIOR_MARGIN: f64 = 1e-9;

/// Beta samplers keyed by their parameters, with a degenerate-draw counter.
#[derive(Debug, Clone, Default)]
pub struct BetaCache {
    entries: Vec<((u64, u64), Beta<f64>)>,
    pub rejections: u64,
}

impl BetaCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&mut self, a: f64, b: f64) -> &Beta<f64> {
        let key = (a.to_bits(), b.to_bits());
        if let Some(pos) = self.entries.iter().position(|(k, _)| *k == key) {
            if pos != 0 {
                self.entries.swap(0, pos);
            }
        } else {
            let d = Beta::new(a, b).expect("exponents are validated positive");
            self.entries.insert(0, (key, d));
            self.entries.truncate(16);
        }
        &self.entries[0].1
    }

    /// A draw from Beta(a, b) in the open interval (0, 1).
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&mut self, a: f64, b: f64, rng: &mut R) -> f64 {
        loop {
            let x = self.get(a, b).sample(rng);
            if x > 0.0 && x < 1.0 {
                return x;
            }
            self.rejections += 1;
        }
    }

    /// Splits `total` into two strictly positive parts with fraction ~ Beta(a, b).
    #[inline]
    pub fn split<R: Rng + ?Sized>(&mut self, total: f64, a: f64, b: f64, rng: &mut R) -> (f64, f64) {
        loop {
            let x = self.draw(a, b, rng);
            let first = x * total;
            let second = total - first;
            if first > 0.0 && second > 0.0 {
                return (first, second);
            }
            self.rejections += 1;
        }
    }
}

/// Re-splits the pooled holdings of `i` and `j` along `channel`.
#[inline]
pub fn resplit<R: Rng + ?Sized>(pop: &mut Population, i: usize, j: usize, channel: Channel, rng: &mut R, cache: &mut BetaCache) {
    let k = pop.n_goods;
    if channel.moves_goods() {
        for good in 0..k {
            let (ii, jj) = (i * k + good, j * k + good);
            let (a, b) = cache.split(pop.g[ii] + pop.g[jj], pop.alpha[ii], pop.alpha[jj], rng);
            pop.g[ii] = a;
            pop.g[jj] = b;
        }
    }
    if channel.moves_money() {
        let (a, b) = cache.split(pop.m[i] + pop.m[j], pop.eta[i], pop.eta[j], rng);
        pop.m[i] = a;
        pop.m[j] = b;
    }
}

/// One encounter: pair chosen with probability ∝ k_ij, then a full conditional re-split.
#[inline]
pub fn exchange_step<R: Rng + ?Sized>(pop: &mut Population, graph: &EncounterGraph, rng: &mut R, cache: &mut BetaCache) -> (usize, usize) {
    let (i, j, channel) = graph.sample(rng);
    resplit(pop, i, j, channel, rng, cache);
    (i, j)
}

/// Encounter of a cross pair from a contact block: money only.
pub fn financial_contact_step<R: Rng + ?Sized>(
    pop: &mut Population,
    contact: &EncounterGraph,
    rng: &mut R,
    cache: &mut BetaCache,
) -> Result<(usize, usize)> {
    let (i, j, channel) = contact.sample(rng);
    if channel != Channel::Money || pop.owner(i) == pop.owner(j) {
        return Err(Error::InvalidParameter("financial contact needs a cross-economy money block".into()));
    }
    resplit(pop, i, j, channel, rng, cache);
    Ok((i, j))
}

/// Agent selection with probability ∝ K_i within one economy.
#[derive(Debug, Clone)]
pub enum AgentSelector {
    Uniform { start: usize, len: usize },
    Weighted { agents: Vec<usize>, alias: WeightedAliasIndex<f64> },
}

impl AgentSelector {
    pub fn uniform(pop: &Population, economy: usize) -> Self {
        let s = pop.economies[economy];
        AgentSelector::Uniform { start: s.start, len: s.len }
    }

    pub fn weighted(pop: &Population, economy: usize, rates: Vec<f64>) -> Result<Self> {
        let agents: Vec<usize> = pop.agents(economy).collect();
        if rates.len() != agents.len() {
            return Err(Error::DimensionMismatch { expected: agents.len(), got: rates.len() });
        }
        let alias = WeightedAliasIndex::new(rates).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(AgentSelector::Weighted { agents, alias })
    }

    #[inline]
    pub fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            AgentSelector::Uniform { start, len } => start + rng.random_range(0..*len),
            AgentSelector::Weighted { agents, alias } => agents[alias.sample(rng)],
        }
    }
}

/// A trader posting price `price` for `good`.
#[derive(Debug, Clone)]
pub struct Trader {
    pub good: usize,
    pub price: f64,
    pub selector: AgentSelector,
}

/// Trader's balance change from one trade with `agent`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TradeFlow {
    pub agent: usize,
    pub money: f64,
    pub goods: f64,
}

/// One trader encounter along the agent's budget line
/// `m + μ g = const`: `g′ = x (g + m/μ)`, `x ~ Beta(α, η)`.
pub fn trader_trade_step<R: Rng + ?Sized>(pop: &mut Population, trader: &Trader, rng: &mut R, cache: &mut BetaCache) -> TradeFlow {
    let i = trader.selector.pick(rng);
    let k = pop.n_goods;
    let idx = i * k + trader.good;
    let mu = trader.price;
    let (m, g) = (pop.m[i], pop.g[idx]);
    let wealth = g + m / mu;
    let (g_new, m_new) = loop {
        let x = cache.draw(pop.alpha[idx], pop.eta[i], rng);
        let g_new = x * wealth;
        let m_new = m + mu * (g - g_new);
        if g_new > INTERIOR_MARGIN * wealth && m_new > INTERIOR_MARGIN * mu * wealth {
            break (g_new, m_new);
        }
        cache.rejections += 1;
    };
    pop.g[idx] = g_new;
    pop.m[i] = m_new;
    TradeFlow { agent: i, money: m - m_new, goods: g - g_new }
}

/// Money ceiling for a gift interaction: the economy's holdings may not
/// exceed `M + M_T`.
#[derive(Debug, Clone)]
pub struct GiftPot {
    pub economy: usize,
    pub ceiling: f64,
    pub selector: AgentSelector,
}

impl GiftPot {
    pub fn new(pop: &Population, economy: usize, budget: f64) -> Result<Self> {
        if !(budget >= 0.0) {
            return Err(Error::InvalidParameter("gift budget must be non-negative".into()));
        }
        Ok(Self { economy, ceiling: pop.money_total(economy) + budget, selector: AgentSelector::uniform(pop, economy) })
    }
}

/// One gift encounter: the chosen agent redraws `m_i` from the density
/// ∝ m^{η−1} on `(0, ceiling − Σ_{j≠i} m_j)`. Returns the change in the
/// economy's money (positive when the trader gives) and the agent.
pub fn trader_gift_step<R: Rng + ?Sized>(pop: &mut Population, pot: &GiftPot, economy_money: f64, rng: &mut R) -> (usize, f64) {
    let i = pot.selector.pick(rng);
    let others = economy_money - pop.m[i];
    let limit = (pot.ceiling - others).max(0.0);
    let eta = pop.eta[i];
    let new = loop {
        let u: f64 = rng.random();
        let v = limit * u.powf(1.0 / eta);
        if v > 0.0 && v < limit {
            break v;
        }
    };
    let delta = new - pop.m[i];
    pop.m[i] = new;
    (i, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CobbDouglasParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_split_has_mean_one_half() {
        let mut c = BetaCache::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let mean = (0..n).map(|_| c.draw(2.5, 2.5, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.002);
    }

    #[test]
    fn pair_totals_are_conserved() {
        let mut p = Population::new(2);
        p.add_economy(&CobbDouglasParams::homogeneous(5, &[1.0, 3.0], 2.0), 7.0, &[2.0, 9.0]).unwrap();
        let g = EncounterGraph::complete_within_each(&p, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut c = BetaCache::new();
        for _ in 0..10_000 {
            let (i, j) = (0, 1);
            let before = (p.m[i] + p.m[j], p.g[0] + p.g[2]);
            resplit(&mut p, i, j, Channel::Full, &mut rng, &mut c);
            assert!((p.m[i] + p.m[j] - before.0).abs() <= 4.0 * f64::EPSILON * before.0);
            assert!((p.g[0] + p.g[2] - before.1).abs() <= 4.0 * f64::EPSILON * before.1);
            exchange_step(&mut p, &g, &mut rng, &mut c);
        }
        assert!(p.all_positive());
    }

    #[test]
    fn trade_stays_on_the_budget_line() {
        let mut p = Population::new(1);
        p.add_economy(&CobbDouglasParams::homogeneous(4, &[1.0], 2.5), 4.0, &[4.0]).unwrap();
        let t = Trader { good: 0, price: 0.7, selector: AgentSelector::uniform(&p, 0) };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut c = BetaCache::new();
        for _ in 0..1000 {
            let before: Vec<f64> = (0..4).map(|i| p.m[i] + 0.7 * p.g[i]).collect();
            let f = trader_trade_step(&mut p, &t, &mut rng, &mut c);
            let after: Vec<f64> = (0..4).map(|i| p.m[i] + 0.7 * p.g[i]).collect();
            for (b, a) in before.iter().zip(&after) {
                assert!((a - b).abs() < 1e-12 * b);
            }
            assert!((f.money + 0.7 * f.goods).abs() < 1e-12);
        }
    }

    #[test]
    fn trade_mean_matches_beta_mean() {
        let mut p = Population::new(1);
        p.add_economy(&CobbDouglasParams::homogeneous(2, &[1.0], 2.5), 2.0, &[2.0]).unwrap();
        let t = Trader { good: 0, price: 0.5, selector: AgentSelector::Uniform { start: 0, len: 1 } };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut c = BetaCache::new();
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            p.m[0] = 1.0;
            p.g[0] = 1.0;
            trader_trade_step(&mut p, &t, &mut rng, &mut c);
            acc += p.g[0];
        }
        let expected = 1.0 / 3.5 * (1.0 + 1.0 / 0.5);
        assert!((acc / n as f64 - expected).abs() < 0.01 * expected);
    }

    #[test]
    fn gift_respects_the_ceiling() {
        let mut p = Population::new(1);
        p.add_economy(&CobbDouglasParams::homogeneous(3, &[1.0], 1.5), 3.0, &[3.0]).unwrap();
        let pot = GiftPot::new(&p, 0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut total = p.money_total(0);
        for _ in 0..10_000 {
            total += trader_gift_step(&mut p, &pot, total, &mut rng).1;
            assert!(total <= 3.0 * (1.0 + 1e-12));
        }
    }
}
