//! Classification of a proposed trade between two or more economies.

use serde::{Deserialize, Serialize};

use super::allocation::Allocation;
use super::optimize::{max_entropy_allocation, weighted_max_entropy};
use crate::error::{Error, Result};
use crate::model::EntropyModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TradeClass {
    /// No economy loses entropy.
    MutuallyBeneficial,
    /// Total entropy rises and an isentropic redistribution can make the
    /// trade mutually beneficial.
    PotentiallyMutuallyBeneficial,
    EntropyIncreasing,
    /// Total entropy falls.
    Forbidden,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: TradeClass,
    pub delta_entropy: Vec<f64>,
    pub delta_total: f64,
    /// Largest total entropy over the region where no economy is worse off
    /// than initially (computed for two-economy trades that are not MB).
    pub mb_region_max: Option<f64>,
}

/// Absolute slack on entropy comparisons, relative to the entropy scale.
const ENTROPY_SLACK: f64 = 1e-12;

/// `final_` must hold the same totals as `initial`. A final state is
/// potentially-MB exactly when its total entropy does not exceed the
/// maximum of total entropy over the MB region: only then does the total
/// isentrope through it reach that region.
pub fn classify_trade(models: &[EntropyModel], initial: &Allocation, final_: &Allocation) -> Result<Classification> {
    initial.check_same_totals(final_)?;
    let s0 = initial.entropies(models)?;
    let s1 = final_.entropies(models)?;
    let scale = s0.iter().map(|s| s.abs()).fold(1.0, f64::max);
    let slack = ENTROPY_SLACK * scale;
    let delta: Vec<f64> = s1.iter().zip(&s0).map(|(a, b)| a - b).collect();
    let delta_total = s1.iter().sum::<f64>() - s0.iter().sum::<f64>();
    let class_only = |class| Classification { class, delta_entropy: delta.clone(), delta_total, mb_region_max: None };
    if delta_total < -slack * s0.len() as f64 {
        return Ok(class_only(TradeClass::Forbidden));
    }
    if delta.iter().all(|d| *d >= -slack) {
        return Ok(class_only(TradeClass::MutuallyBeneficial));
    }
    if models.len() != 2 {
        return Err(Error::InvalidParameter("potentially-MB classification is implemented for two economies".into()));
    }
    let best = mb_region_max(models, initial, &s0)?;
    let class = if s1.iter().sum::<f64>() <= best + slack {
        TradeClass::PotentiallyMutuallyBeneficial
    } else {
        TradeClass::EntropyIncreasing
    };
    Ok(Classification { class, delta_entropy: delta, delta_total, mb_region_max: Some(best) })
}

/// `max ΣS` subject to `S_e ≥ S_e⁰` for two economies. When the global
/// maximum leaves economy `e` worse off, the constraint on `e` binds and the
/// optimum is the Pareto point with `S_e = S_e⁰`, reached by raising the
/// weight of `e` in a weighted entropy maximum.
pub fn mb_region_max(models: &[EntropyModel], initial: &Allocation, s0: &[f64]) -> Result<f64> {
    let (m, g) = (initial.money_total, initial.goods_total.as_slice());
    let global = max_entropy_allocation(models, m, g)?;
    let sg = global.allocation.entropies(models)?;
    let Some(e) = (0..2).find(|&e| sg[e] < s0[e]) else {
        return Ok(global.total_entropy);
    };
    let weights = |lw: f64| if e == 0 { [lw.exp(), 1.0] } else { [1.0, lw.exp()] };
    let solve = |lw: f64, start: Option<&Allocation>| weighted_max_entropy(models, &weights(lw), m, g, start);
    // S_e at the weighted optimum increases with its weight.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut at_hi = solve(hi, Some(&global.allocation))?;
    while at_hi.allocation.entropies(models)?[e] < s0[e] {
        lo = hi;
        hi *= 2.0;
        if hi > 60.0 {
            return Err(Error::NoEquilibrium("MB region not reached by reweighting".into()));
        }
        at_hi = solve(hi, Some(&at_hi.allocation))?;
    }
    let mut best = at_hi;
    for _ in 0..200 {
        if hi - lo < 1e-15 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let opt = solve(mid, Some(&best.allocation))?;
        if opt.allocation.entropies(models)?[e] < s0[e] {
            lo = mid;
        } else {
            hi = mid;
            best = opt;
        }
    }
    let s = best.allocation.entropies(models)?;
    // Pin the binding constraint exactly; the other side is the Pareto value.
    Ok(s0[e] + s[1 - e])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::MacroState;

    fn models() -> Vec<EntropyModel> {
        vec![EntropyModel::cobb_douglas(10.0, &[1.0], 2.5), EntropyModel::cobb_douglas(20.0, &[1.0], 1.5)]
    }

    fn alloc(m1: f64, g1: f64) -> Allocation {
        Allocation::new(vec![MacroState::new(m1, &[g1]).unwrap(), MacroState::new(1.0 - m1, &[30.0 - g1]).unwrap()]).unwrap()
    }

    #[test]
    fn no_trade_is_mutually_beneficial() {
        let a = alloc(0.8, 5.0);
        assert_eq!(classify_trade(&models(), &a, &a).unwrap().class, TradeClass::MutuallyBeneficial);
    }

    #[test]
    fn trade_at_an_intermediate_price_benefits_both() {
        let a = alloc(0.8, 5.0);
        let ms = models();
        let mu1 = ms[0].gradient(&a.states[0]).unwrap();
        let mu2 = ms[1].gradient(&a.states[1]).unwrap();
        let (p1, p2) = (mu1.nu[0] / mu1.beta, mu2.nu[0] / mu2.beta);
        let p = 0.5 * (p1 + p2);
        // Goods go to the economy with the higher market price.
        let dg = if p1 > p2 { 0.01 } else { -0.01 };
        let b = alloc(0.8 - p * dg, 5.0 + dg);
        assert_eq!(classify_trade(&ms, &a, &b).unwrap().class, TradeClass::MutuallyBeneficial);
    }

    #[test]
    fn maximum_entropy_final_is_not_potentially_mb() {
        let a = alloc(0.8, 5.0);
        let b = alloc(5.0 / 11.0, 10.0);
        let c = classify_trade(&models(), &a, &b).unwrap();
        assert!(c.delta_entropy[0] < 0.0);
        assert_eq!(c.class, TradeClass::EntropyIncreasing);
    }

    #[test]
    fn entropy_decrease_is_forbidden() {
        let c = classify_trade(&models(), &alloc(5.0 / 11.0, 10.0), &alloc(0.8, 5.0)).unwrap();
        assert_eq!(c.class, TradeClass::Forbidden);
    }

    #[test]
    fn totals_must_match() {
        let b = Allocation::new(vec![MacroState::new(0.5, &[5.0]).unwrap(), MacroState::new(0.6, &[25.0]).unwrap()]).unwrap();
        assert!(classify_trade(&models(), &alloc(0.5, 5.0), &b).is_err());
    }
}
