//! Maximum money a trader can extract by reversible trades between
//! economies, computed three ways, and the exergy of a small economy
//! against a large one.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::allocation::Allocation;
use super::optimize::{cd_params, kkt_residual, max_entropy_allocation, maximize, weighted_max_entropy, Objective, Part};
use crate::error::{Error, Result};
use crate::model::EntropyModel;
use crate::protocols::arbitrage::exact_endpoint;
use crate::protocols::economy::{money_for_temperature, Economy};
use crate::protocols::path::isentrope_at;
use crate::roots;
use crate::state::MacroState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainsResult {
    /// Common final temperature.
    pub temperature: f64,
    /// Common final market prices.
    pub prices: Vec<f64>,
    pub money_initial: f64,
    pub money_final: f64,
    pub profit: f64,
    pub final_allocation: Allocation,
    pub entropy_initial: f64,
    pub entropy_final: f64,
    /// Spread of temperatures and prices across economies (relative).
    pub kkt_residual: f64,
}

fn summarize(models: &[EntropyModel], initial: &Allocation, final_: Allocation) -> Result<GainsResult> {
    let s0 = initial.total_entropy(models)?;
    let s1 = final_.total_entropy(models)?;
    let g = models[0].gradient(&final_.states[0])?;
    let kkt = kkt_residual(models, &vec![1.0; models.len()], &final_.states)?;
    Ok(GainsResult {
        temperature: 1.0 / g.beta,
        prices: g.nu.iter().map(|v| v / g.beta).collect(),
        money_initial: initial.money_total,
        money_final: final_.money_total,
        profit: initial.money_total - final_.money_total,
        final_allocation: final_,
        entropy_initial: s0,
        entropy_final: s1,
        kkt_residual: kkt,
    })
}

/// Minimises total money over allocations of the same goods with the
/// initial total entropy. The maximum total entropy at total money `M`
/// increases with `M`, so the optimum is its root at `S⁰`.
pub fn gains_of_trade(models: &[EntropyModel], initial: &Allocation) -> Result<GainsResult> {
    let s0 = initial.total_entropy(models)?;
    let g = initial.goods_total.clone();
    let m0 = initial.money_total;
    let slack = 1e-13 * s0.abs().max(1.0);
    let ones = vec![1.0; models.len()];
    let at = |m: f64, start: Option<&Allocation>| -> Result<(f64, Allocation)> {
        let scaled = start.map(|a| rescale_money(a, m)).transpose()?;
        let opt = weighted_max_entropy(models, &ones, m, &g, scaled.as_ref())?;
        Ok((opt.total_entropy - s0, opt.allocation))
    };
    let (h0, mut best) = at(m0, None)?;
    if h0 <= slack {
        if h0 < -slack {
            return Err(Error::Infeasible("initial total entropy exceeds the maximum at the same totals".into()));
        }
        return summarize(models, initial, best);
    }
    let mut lo = m0;
    let mut tries = 0;
    loop {
        lo *= 0.5;
        tries += 1;
        match at(lo, Some(&best)) {
            Ok((h, a)) if h < 0.0 => {
                best = a;
                break;
            }
            Ok((_, a)) => best = a,
            Err(e) if tries > 200 => return Err(e),
            Err(_) => {}
        }
        if tries > 200 {
            return Err(Error::NoRoot { lo, hi: m0 });
        }
    }
    let mut warm = best.clone();
    let m_f = roots::brent(
        |m| match at(m, Some(&warm)) {
            Ok((h, a)) => {
                warm = a;
                h
            }
            Err(_) => f64::NAN,
        },
        lo,
        m0,
        1e-15,
    )?;
    let (_, alloc) = at(m_f, Some(&warm))?;
    summarize(models, initial, alloc)
}

fn rescale_money(a: &Allocation, m: f64) -> Result<Allocation> {
    let f = m / a.money_total;
    Allocation::new(a.states.iter().map(|s| { let mut t = s.clone(); t.money *= f; t }).collect())
}

/// Closed form for Cobb-Douglas economies: goods end at shares
/// `p_ek ∝ α_ek N_e`, money at `q_e T` with `q_e = η_e N_e`, and `T` fixed by
/// `Σ q_e ln T = Σ_e [Σ_k α_ek N_e ln(G⁰_ek/(p_ek G_k)) + q_e ln(M⁰_e/q_e)]`.
pub fn gains_closed_form(models: &[EntropyModel], initial: &Allocation) -> Result<GainsResult> {
    let params = models.iter().map(cd_params).collect::<Result<Vec<_>>>()?;
    let k = initial.n_goods();
    let share = |e: usize, i: usize| {
        let w: f64 = params.iter().map(|(n, a, _)| n * a[i]).sum();
        params[e].0 * params[e].1[i] / w
    };
    let q_total: f64 = params.iter().map(|(n, _, eta)| n * eta).sum();
    let mut log_t = 0.0;
    for (e, (n, alpha, eta)) in params.iter().enumerate() {
        let st = &initial.states[e];
        for i in 0..k {
            log_t += alpha[i] * n * (st.good(i) / (share(e, i) * initial.goods_total[i])).ln();
        }
        let q = n * eta;
        log_t += q * (st.money / q).ln();
    }
    let t = (log_t / q_total).exp();
    let states = params
        .iter()
        .enumerate()
        .map(|(e, (n, _, eta))| {
            let goods: Vec<f64> = (0..k).map(|i| share(e, i) * initial.goods_total[i]).collect();
            MacroState::new(n * eta * t, &goods)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = summarize(models, initial, Allocation::new(states)?)?;
    out.temperature = t;
    out.money_final = q_total * t;
    out.profit = initial.money_total - out.money_final;
    Ok(out)
}

/// Reversible trade sequence realising the gains between two economies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolGains {
    pub arbitrage_profit: f64,
    pub carnot_profit: f64,
    pub profit: f64,
    pub rounds: usize,
    pub a: Economy,
    pub b: Economy,
}

/// Money extracted by an ideal Carnot engine run between two economies
/// (goods fixed) until their temperatures meet: total entropy is conserved,
/// so the common final temperature solves `S_A(T) + S_B(T) = S_A + S_B`.
pub fn reversible_carnot_limit(a: &Economy, b: &Economy) -> Result<(Economy, Economy, f64)> {
    let (ta, tb) = (a.temperature()?, b.temperature()?);
    let s0 = a.entropy()? + b.entropy()?;
    if ta == tb {
        return Ok((a.clone(), b.clone(), 0.0));
    }
    let at = |t: f64| -> Result<(Economy, Economy)> {
        let ma = money_for_temperature(&a.model, &a.state.goods.amounts, t)?;
        let mb = money_for_temperature(&b.model, &b.state.goods.amounts, t)?;
        Ok((a.with_money(ma), b.with_money(mb)))
    };
    let gap = |t: f64| at(t).and_then(|(x, y)| Ok(x.entropy()? + y.entropy()? - s0)).unwrap_or(f64::NAN);
    let t = roots::brent(gap, ta.min(tb), ta.max(tb), 1e-15)?;
    let (a1, b1) = at(t)?;
    let profit = a.state.money + b.state.money - a1.state.money - b1.state.money;
    Ok((a1, b1, profit))
}

/// Alternates exact isentropic arbitrage of every good with the reversible
/// Carnot limit until prices and temperatures agree to `rel_tol`.
pub fn gains_by_protocol(a: &Economy, b: &Economy, rel_tol: f64, max_rounds: usize) -> Result<ProtocolGains> {
    let (mut a, mut b) = (a.clone(), b.clone());
    let (mut arb, mut car) = (0.0, 0.0);
    let k = a.state.dim();
    for round in 0..max_rounds {
        for good in 0..k {
            let (x, profit) = exact_endpoint(&a, &b, good)?;
            if x != 0.0 {
                a.state = isentrope_at(&a.model, &a.state, good, a.state.good(good) - x)?;
                b.state = isentrope_at(&b.model, &b.state, good, b.state.good(good) + x)?;
                arb += profit;
            }
        }
        let (a1, b1, profit) = reversible_carnot_limit(&a, &b)?;
        a = a1;
        b = b1;
        car += profit;
        let (ta, tb) = (a.temperature()?, b.temperature()?);
        let mut gap = (ta - tb).abs() / ta;
        for good in 0..k {
            let (pa, pb) = (a.price(good)?, b.price(good)?);
            gap = gap.max((pa - pb).abs() / pa);
        }
        if gap < rel_tol {
            return Ok(ProtocolGains { arbitrage_profit: arb, carnot_profit: car, profit: arb + car, rounds: round + 1, a, b });
        }
    }
    Err(Error::NonConvergence(format!("prices and temperatures still differ after {max_rounds} rounds")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exergy {
    pub work: f64,
    /// State of the small economy at the reservoir's temperature and prices.
    pub equilibrium: MacroState,
    pub reservoir_temperature: f64,
    pub reservoir_prices: Vec<f64>,
}

/// `W = M_B − M_Bᵉ − T_A (S_B − S_Bᵉ) + μ_A·(G_B − G_Bᵉ)`. The equilibrium
/// state minimises the convex `β_A M + ν_A·G − S_B`, so `W ≥ 0`.
pub fn exergy(small: &Economy, reservoir: &Economy) -> Result<Exergy> {
    let ga = reservoir.model.gradient(&reservoir.state)?;
    let c = 1 + small.state.dim();
    if ga.nu.len() + 1 != c {
        return Err(Error::DimensionMismatch { expected: c - 1, got: ga.nu.len() });
    }
    let mut lin = vec![-ga.beta];
    lin.extend(ga.nu.iter().map(|v| -v));
    let linear = DVector::from_vec(lin);
    let obj = Objective {
        parts: vec![Part { model: &small.model, weight: 1.0, a: DMatrix::identity(c, c), b: DVector::zeros(c) }],
        linear: linear.clone(),
    };
    let z0 = DVector::from_vec(small.state.coords());
    let opt = maximize(&obj, z0.clone(), 500).map_err(|e| Error::NoEquilibrium(format!("small economy cannot reach the reservoir's prices: {e}")))?;
    let equilibrium = small.state.with_coords(opt.z.as_slice());
    let fit = kkt_residual(&[small.model.clone(), reservoir.model.clone()], &[1.0, 1.0], &[equilibrium.clone(), reservoir.state.clone()])?;
    if fit > 1e-8 {
        return Err(Error::NoEquilibrium(format!("reservoir conditions matched only to {fit:e}")));
    }
    let t_a = 1.0 / ga.beta;
    let phi0 = -obj.value(&z0)?;
    let phi_e = -opt.value;
    Ok(Exergy {
        work: t_a * (phi0 - phi_e),
        equilibrium,
        reservoir_temperature: t_a,
        reservoir_prices: ga.nu.iter().map(|v| v * t_a).collect(),
    })
}

/// Total profit when economies are merged one at a time in `order`, each
/// merge extracting the gains between the merged block and the next one.
pub fn sequential_gains(models: &[EntropyModel], initial: &Allocation, order: &[usize]) -> Result<f64> {
    let mut profit = 0.0;
    let mut states = initial.states.clone();
    let mut merged = vec![order[0]];
    for &next in &order[1..] {
        merged.push(next);
        let ms: Vec<EntropyModel> = merged.iter().map(|&i| models[i].clone()).collect();
        let sub = Allocation::new(merged.iter().map(|&i| states[i].clone()).collect())?;
        let r = gains_of_trade(&ms, &sub)?;
        profit += r.profit;
        for (slot, st) in merged.iter().zip(r.final_allocation.states) {
            states[*slot] = st;
        }
    }
    Ok(profit)
}

/// Unconstrained maximum-entropy allocation; re-exported for callers that
/// compare gains against free-for-all trade.
pub fn free_trade_allocation(models: &[EntropyModel], initial: &Allocation) -> Result<Allocation> {
    Ok(max_entropy_allocation(models, initial.money_total, &initial.goods_total)?.allocation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cd(n: f64, eta: f64) -> EntropyModel {
        EntropyModel::cobb_douglas(n, &[1.0], eta)
    }

    fn desk() -> (Vec<EntropyModel>, Allocation) {
        let models = vec![cd(10.0, 1.0), cd(10.0, 1.0)];
        let alloc = Allocation::new(vec![MacroState::new(1.0, &[15.0]).unwrap(), MacroState::new(4.0, &[15.0]).unwrap()]).unwrap();
        (models, alloc)
    }

    #[test]
    fn desk_case_by_every_route() {
        let (models, alloc) = desk();
        // (0.1¹⁰ · 0.4¹⁰)^(1/20) = 0.2.
        let closed = gains_closed_form(&models, &alloc).unwrap();
        assert!((closed.temperature - 0.2).abs() < 1e-14);
        assert!((closed.money_final - 4.0).abs() < 1e-13);
        assert!((closed.profit - 1.0).abs() < 1e-13);
        let numeric = gains_of_trade(&models, &alloc).unwrap();
        assert!((numeric.profit - 1.0).abs() < 1e-9);
        assert!(numeric.kkt_residual < 1e-9);
        let a = Economy::new("a", models[0].clone(), alloc.states[0].clone()).unwrap();
        let b = Economy::new("b", models[1].clone(), alloc.states[1].clone()).unwrap();
        let proto = gains_by_protocol(&a, &b, 1e-12, 1000).unwrap();
        assert!((proto.profit - 1.0).abs() < 1e-9, "{proto:?}");
    }

    #[test]
    fn equilibrium_yields_no_profit() {
        let models = vec![cd(10.0, 1.0), cd(20.0, 2.0)];
        let alloc = Allocation::new(vec![MacroState::new(1.0, &[3.0]).unwrap(), MacroState::new(4.0, &[6.0]).unwrap()]).unwrap();
        assert!(gains_of_trade(&models, &alloc).unwrap().profit.abs() < 1e-12);
        assert!(gains_closed_form(&models, &alloc).unwrap().profit.abs() < 1e-12);
    }

    #[test]
    fn exergy_vanishes_at_reservoir_conditions() {
        let land = Economy::new("l", cd(1000.0, 1.0), MacroState::new(100.0, &[50.0]).unwrap()).unwrap();
        let boat = Economy::new("b", cd(10.0, 2.0), MacroState::new(2.0, &[0.5]).unwrap()).unwrap();
        assert!(exergy(&boat, &land).unwrap().work.abs() < 1e-12);
        let off = Economy::new("b", cd(10.0, 2.0), MacroState::new(1.0, &[2.0]).unwrap()).unwrap();
        assert!(exergy(&off, &land).unwrap().work > 0.0);
    }

    #[test]
    fn three_routes_agree_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let model = EntropyModel::cobb_douglas(rng.random_range(2.0..40.0), &[rng.random_range(0.3..3.0)], rng.random_range(0.3..3.0));
                let st = MacroState::new(rng.random_range(0.1..10.0), &[rng.random_range(0.1..30.0)]).unwrap();
                Economy::new("e", model, st).unwrap()
            };
            let (a, b) = (mk(&mut rng), mk(&mut rng));
            let models = vec![a.model.clone(), b.model.clone()];
            let alloc = Allocation::new(vec![a.state.clone(), b.state.clone()]).unwrap();
            let closed = gains_closed_form(&models, &alloc).unwrap().profit;
            let numeric = gains_of_trade(&models, &alloc).unwrap().profit;
            let proto = gains_by_protocol(&a, &b, 1e-12, 10_000).unwrap();
            let scale = alloc.money_total;
            assert!((numeric - closed).abs() <= 1e-6 * closed.abs().max(1e-12 * scale), "{numeric} vs {closed}");
            assert!((proto.profit - closed).abs() <= 1e-6 * closed.abs().max(1e-12 * scale), "{} vs {closed}", proto.profit);
        }
    }
}
