//! Per-agent holdings and exponents for one or more economies.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CobbDouglasParams, EntropyModel};
use crate::state::MacroState;

/// Agents of one economy occupy a contiguous index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EconomySlice {
    pub start: usize,
    pub len: usize,
}

impl EconomySlice {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// Holdings `m_i`, `g_ik` (agent-major) and exponents `α_ik`, `η_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub n_goods: usize,
    pub m: Vec<f64>,
    pub g: Vec<f64>,
    pub alpha: Vec<f64>,
    pub eta: Vec<f64>,
    pub economies: Vec<EconomySlice>,
    owner: Vec<usize>,
}

impl Population {
    pub fn new(n_goods: usize) -> Self {
        Self { n_goods, m: Vec::new(), g: Vec::new(), alpha: Vec::new(), eta: Vec::new(), economies: Vec::new(), owner: Vec::new() }
    }

    /// Appends an economy holding `money` and `goods`, split equally across agents.
    pub fn add_economy(&mut self, params: &CobbDouglasParams, money: f64, goods: &[f64]) -> Result<usize> {
        params.validate()?;
        if params.alpha.len() != self.n_goods || goods.len() != self.n_goods {
            return Err(Error::DimensionMismatch { expected: self.n_goods, got: goods.len() });
        }
        MacroState::new(money, goods)?.check_evaluable()?;
        let id = self.economies.len();
        let n = params.n_agents;
        self.economies.push(EconomySlice { start: self.m.len(), len: n });
        for i in 0..n {
            self.m.push(money / n as f64);
            self.eta.push(params.agent_eta(i));
            for (k, gk) in goods.iter().enumerate() {
                self.g.push(gk / n as f64);
                self.alpha.push(params.agent_alpha(i, k));
            }
            self.owner.push(id);
        }
        Ok(id)
    }

    pub fn n_agents(&self) -> usize {
        self.m.len()
    }

    pub fn n_economies(&self) -> usize {
        self.economies.len()
    }

    pub fn owner(&self, agent: usize) -> usize {
        self.owner[agent]
    }

    pub fn agents(&self, economy: usize) -> Range<usize> {
        self.economies[economy].range()
    }

    #[inline]
    pub fn goods_of(&self, agent: usize, good: usize) -> f64 {
        self.g[agent * self.n_goods + good]
    }

    pub fn money_total(&self, economy: usize) -> f64 {
        self.m[self.agents(economy)].iter().sum()
    }

    pub fn goods_total(&self, economy: usize, good: usize) -> f64 {
        self.agents(economy).map(|i| self.goods_of(i, good)).sum()
    }

    pub fn macro_state(&self, economy: usize) -> MacroState {
        let goods: Vec<f64> = (0..self.n_goods).map(|k| self.goods_total(economy, k)).collect();
        MacroState::new(self.money_total(economy), &goods).expect("holdings stay positive")
    }

    /// Macro entropy model with agent-averaged exponents.
    pub fn model(&self, economy: usize) -> EntropyModel {
        let r = self.agents(economy);
        let n = r.len() as f64;
        let alpha = (0..self.n_goods).map(|k| r.clone().map(|i| self.alpha[i * self.n_goods + k]).sum::<f64>() / n).collect();
        let eta = r.map(|i| self.eta[i]).sum::<f64>() / n;
        EntropyModel::CobbDouglas { n, alpha, eta }
    }

    /// `Σα_ik m_i / Σ η_i g_ik`: the posted price at which the expected
    /// trader goods flow from the current holdings vanishes.
    pub fn empirical_price(&self, economy: usize, good: usize) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in self.agents(economy) {
            num += self.alpha[i * self.n_goods + good] * self.m[i];
            den += self.eta[i] * self.goods_of(i, good);
        }
        num / den
    }

    /// Sum of `ln m_i + Σ_k ln g_ik`, a mixing diagnostic.
    pub fn log_holdings(&self, economy: usize) -> f64 {
        self.agents(economy)
            .map(|i| self.m[i].ln() + (0..self.n_goods).map(|k| self.goods_of(i, k).ln()).sum::<f64>())
            .sum()
    }

    pub fn all_positive(&self) -> bool {
        self.m.iter().chain(&self.g).all(|v| *v > 0.0 && v.is_finite())
    }
}
