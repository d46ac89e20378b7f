//! Empirical market price: the posted price at which a trader's goods flow
//! with the economy vanishes.
//!
//! Flows are measured with virtual probes: after each sweep of the
//! equilibrated economy, randomly chosen agents are offered a budget-line
//! trade `g′ = x (g + m/μ)` that is drawn but not executed. One set of draws
//! `(x, g, m)` serves every candidate price, so the mean flow
//! `A/μ − B` (with `A = Σ x m`, `B = Σ (1 − x) g`) is exactly decreasing in
//! `μ` and bisection on it is well defined.

use serde::{Deserialize, Serialize};

use super::join::{build_engine, AgentEconomy};
use crate::error::{Error, Result};
use crate::micro::BurnIn;
use crate::model::CobbDouglasParams;
use crate::state::MacroState;
use crate::stats::integrated_autocorrelation_time;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceSearchConfig {
    pub seed: u64,
    pub sweeps: u64,
    pub probes_per_sweep: u64,
    #[serde(default)]
    pub burn_in: BurnIn,
    /// Initial bracket.
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "rel_tol")]
    pub rel_tol: f64,
}

fn rel_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceEstimate {
    pub price: f64,
    pub se: f64,
    /// Two-standard-error interval.
    pub ci: (f64, f64),
    pub probes: u64,
    pub bisection_steps: usize,
    /// Mean probe flow at the returned price and its SE.
    pub residual_flow: f64,
    pub residual_se: f64,
}

/// Expected goods gained by the economy in one trader encounter at price
/// `mu`, averaged over the stationary ensemble of a homogeneous economy:
/// `(α M/μ − η G) / (N (α + η))`.
pub fn expected_flow(params: &CobbDouglasParams, state: &MacroState, good: usize, mu: f64) -> f64 {
    let (a, e, n) = (params.alpha[good], params.eta, params.n_agents as f64);
    (a * state.money / mu - e * state.good(good)) / (n * (a + e))
}

pub fn find_market_price(economy: &AgentEconomy, good: usize, cfg: &PriceSearchConfig) -> Result<PriceEstimate> {
    if !(cfg.lo > 0.0 && cfg.hi > cfg.lo) {
        return Err(Error::InvalidParameter("price bracket must satisfy 0 < lo < hi".into()));
    }
    if good >= economy.state.dim() {
        return Err(Error::DimensionMismatch { expected: economy.state.dim(), got: good + 1 });
    }
    let mut engine = build_engine(std::slice::from_ref(economy), cfg.seed)?;
    engine.burn_in(&cfg.burn_in);
    let k = engine.pop.n_goods;
    let agents = engine.pop.agents(0);
    let mut a_series = Vec::with_capacity(cfg.sweeps as usize);
    let mut b_series = Vec::with_capacity(cfg.sweeps as usize);
    for _ in 0..cfg.sweeps {
        engine.sweep();
        let (mut a, mut b) = (0.0, 0.0);
        for _ in 0..cfg.probes_per_sweep {
            let i = rand::Rng::random_range(&mut engine.rng, agents.clone());
            let idx = i * k + good;
            let (alpha, eta) = (engine.pop.alpha[idx], engine.pop.eta[i]);
            let x = engine.cache.draw(alpha, eta, &mut engine.rng);
            a += x * engine.pop.m[i];
            b += (1.0 - x) * engine.pop.g[idx];
        }
        a_series.push(a);
        b_series.push(b);
    }
    let probes = cfg.sweeps * cfg.probes_per_sweep;
    let (sa, sb): (f64, f64) = (a_series.iter().sum(), b_series.iter().sum());
    let flow = |mu: f64| (sa / mu - sb) / probes as f64;
    let (f_lo, f_hi) = (flow(cfg.lo), flow(cfg.hi));
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoRoot { lo: cfg.lo, hi: cfg.hi });
    }
    let (mut lo, mut hi) = (cfg.lo, cfg.hi);
    let mut steps = 0;
    while (hi - lo) > cfg.rel_tol * hi && steps < 200 {
        let mid = 0.5 * (lo + hi);
        if flow(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    let price = 0.5 * (lo + hi);
    // Delta method on the ratio A/B with autocorrelated per-sweep terms.
    let z: Vec<f64> = a_series.iter().zip(&b_series).map(|(a, b)| a - price * b).collect();
    let n = z.len() as f64;
    let zbar = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|v| (v - zbar) * (v - zbar)).sum::<f64>() / (n - 1.0);
    let tau = integrated_autocorrelation_time(&z);
    let se_mean_z = (var * tau / n).sqrt();
    let bbar = sb / n;
    let se = se_mean_z / bbar;
    let residual_se = se_mean_z / price / cfg.probes_per_sweep as f64;
    Ok(PriceEstimate {
        price,
        se,
        ci: (price - 2.0 * se, price + 2.0 * se),
        probes,
        bisection_steps: steps,
        residual_flow: flow(price),
        residual_se,
    })
}
