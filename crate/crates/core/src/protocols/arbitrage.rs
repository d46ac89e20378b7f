//! Reversible arbitrage: buy a good where it is cheap, sell where it is dear,
//! moving both economies along their isentropes until prices meet.

use serde::{Deserialize, Serialize};

use super::economy::Economy;
use super::path::{isentrope_at, isentrope_step};
use crate::error::{Error, Result};
use crate::roots;
use crate::thermo;

/// Largest relative price change allowed in one step.
pub const MAX_PRICE_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArbitragePoint {
    pub step: usize,
    /// Goods moved so far from the cheap economy to the dear one.
    pub moved: f64,
    pub money_a: f64,
    pub money_b: f64,
    pub price_a: f64,
    pub price_b: f64,
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageResult {
    pub a: Economy,
    pub b: Economy,
    /// Goods moved from `a` to `b` (negative when `b` was cheaper).
    pub moved: f64,
    pub profit: f64,
    pub trace: Vec<ArbitragePoint>,
    /// Endpoint from exact isentrope projection, for comparison with the path.
    pub exact_profit: f64,
    pub exact_moved: f64,
    pub entropy_drift: f64,
}

/// Arbitrage in `good` with steps of `step` goods units. The final step is
/// shortened so that prices meet.
pub fn arbitrage(a: &Economy, b: &Economy, good: usize, step: f64, max_steps: usize) -> Result<ArbitrageResult> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("arbitrage step must be positive".into()));
    }
    let (mu_a, mu_b) = (a.price(good)?, b.price(good)?);
    // Goods flow from the cheap economy to the dear one; `dir` is the sign of
    // the flow from `a` to `b`.
    let dir = if mu_a < mu_b { 1.0 } else { -1.0 };
    let (s_a, s_b) = (a.entropy()?, b.entropy()?);
    let money0 = a.state.money + b.state.money;
    let (exact_moved, exact_profit) = exact_endpoint(a, b, good)?;

    let mut cur_a = a.clone();
    let mut cur_b = b.clone();
    let mut moved = 0.0;
    let mut trace = vec![point(0, 0.0, &cur_a, &cur_b, good, money0)?];
    if mu_a == mu_b {
        return finish(cur_a, cur_b, 0.0, trace, exact_profit, exact_moved, (s_a, s_b), money0);
    }
    for k in 1..=max_steps {
        let remaining = (exact_moved - moved) * dir;
        let h = step.min(remaining);
        if h <= 0.0 {
            break;
        }
        let next_a = isentrope_step(&a.model, &cur_a.state, good, -dir * h)?;
        let next_b = isentrope_step(&b.model, &cur_b.state, good, dir * h)?;
        let (pa0, pb0) = (cur_a.price(good)?, cur_b.price(good)?);
        let (pa1, pb1) = (thermo::price(&a.model, &next_a, good)?, thermo::price(&b.model, &next_b, good)?);
        if ((pa1 - pa0) / pa0).abs() > MAX_PRICE_STEP || ((pb1 - pb0) / pb0).abs() > MAX_PRICE_STEP {
            return Err(Error::StepTooLarge(format!("step {h} moves a price by more than {MAX_PRICE_STEP}")));
        }
        cur_a.state = next_a;
        cur_b.state = next_b;
        moved += dir * h;
        trace.push(point(k, moved, &cur_a, &cur_b, good, money0)?);
        if h == remaining {
            break;
        }
    }
    finish(cur_a, cur_b, moved, trace, exact_profit, exact_moved, (s_a, s_b), money0)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    a: Economy,
    b: Economy,
    moved: f64,
    trace: Vec<ArbitragePoint>,
    exact_profit: f64,
    exact_moved: f64,
    s0: (f64, f64),
    money0: f64,
) -> Result<ArbitrageResult> {
    let drift = (a.entropy()? - s0.0).abs().max((b.entropy()? - s0.1).abs());
    let profit = money0 - a.state.money - b.state.money;
    Ok(ArbitrageResult { a, b, moved, profit, trace, exact_profit, exact_moved, entropy_drift: drift })
}

fn point(step: usize, moved: f64, a: &Economy, b: &Economy, good: usize, money0: f64) -> Result<ArbitragePoint> {
    Ok(ArbitragePoint {
        step,
        moved,
        money_a: a.state.money,
        money_b: b.state.money,
        price_a: a.price(good)?,
        price_b: b.price(good)?,
        profit: money0 - a.state.money - b.state.money,
    })
}

/// Goods moved and profit at the price-equalising point, both economies
/// projected exactly onto their initial isentropes.
pub fn exact_endpoint(a: &Economy, b: &Economy, good: usize) -> Result<(f64, f64)> {
    let (ga, gb) = (a.state.good(good), b.state.good(good));
    let gap = |x: f64| -> Result<f64> {
        let sa = isentrope_at(&a.model, &a.state, good, ga - x)?;
        let sb = isentrope_at(&b.model, &b.state, good, gb + x)?;
        Ok(thermo::price(&a.model, &sa, good)? - thermo::price(&b.model, &sb, good)?)
    };
    let g0 = gap(0.0)?;
    if g0 == 0.0 {
        return Ok((0.0, 0.0));
    }
    // The gap μ_A − μ_B increases with goods moved out of `a`; the root lies
    // between 0 and the amount that empties one side.
    let (lo, hi) = if g0 < 0.0 { (0.0, ga * (1.0 - 1e-12)) } else { (-gb * (1.0 - 1e-12), 0.0) };
    let x = roots::brent(|x| gap(x).unwrap_or(if x > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY }), lo, hi, 1e-15)?;
    let sa = isentrope_at(&a.model, &a.state, good, ga - x)?;
    let sb = isentrope_at(&b.model, &b.state, good, gb + x)?;
    let profit = a.state.money + b.state.money - sa.money - sb.money;
    Ok((x, profit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EntropyModel;
    use crate::state::MacroState;

    fn econ(n: f64, m: f64, g: f64) -> Economy {
        Economy::new("e", EntropyModel::cobb_douglas(n, &[1.0], 1.0), MacroState::new(m, &[g]).unwrap()).unwrap()
    }

    #[test]
    fn equal_prices_make_no_profit() {
        let r = arbitrage(&econ(10.0, 2.0, 2.0), &econ(5.0, 3.0, 3.0), 0, 0.01, 100).unwrap();
        assert_eq!(r.profit, 0.0);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn prices_meet_and_entropies_hold() {
        let a = econ(10.0, 1.0, 15.0);
        let b = econ(10.0, 4.0, 15.0);
        let r = arbitrage(&a, &b, 0, 0.01, 100_000).unwrap();
        assert!(r.moved > 0.0);
        let (pa, pb) = (r.a.price(0).unwrap(), r.b.price(0).unwrap());
        assert!((pa - pb).abs() < 1e-8 * pa);
        assert!(r.entropy_drift < 1e-8);
        assert!((r.profit - r.exact_profit).abs() < 1e-8);
        assert!(r.profit > 0.0);
    }

    #[test]
    fn first_unit_earns_the_price_ratio() {
        // Buying a tiny amount at μ_A and selling at μ_B returns μ_B/μ_A − 1 per unit spent.
        let a = econ(10.0, 1.0, 15.0);
        let b = econ(10.0, 4.0, 15.0);
        let r = arbitrage(&a, &b, 0, 1e-6, 1).unwrap();
        let spent = r.a.state.money - a.state.money;
        let rate = r.profit / spent;
        let expected = b.price(0).unwrap() / a.price(0).unwrap() - 1.0;
        assert!((rate - expected).abs() < 1e-4 * expected, "{rate} vs {expected}");
    }

    #[test]
    fn coarse_steps_are_rejected() {
        let r = arbitrage(&econ(10.0, 1.0, 15.0), &econ(10.0, 4.0, 15.0), 0, 1.0, 100);
        assert!(matches!(r, Err(Error::StepTooLarge(_))));
    }
}
