//! Reversible paths: isentropes `dM = −μ dG` and isotherms.

use super::economy::money_for_entropy;
use crate::error::{Error, Result};
use crate::model::EntropyModel;
use crate::ode;
use crate::roots;
use crate::state::MacroState;
use crate::thermo;

/// Largest entropy change tolerated in one isentrope step.
pub const STEP_DRIFT: f64 = 1e-10;

/// Moves `state` along its isentrope by `dg` units of `good` with RK4,
/// halving the step until the entropy drift per step is below [`STEP_DRIFT`].
pub fn isentrope_step(model: &EntropyModel, state: &MacroState, good: usize, dg: f64) -> Result<MacroState> {
    isentrope_step_depth(model, state, good, dg, 0)
}

fn isentrope_step_depth(model: &EntropyModel, state: &MacroState, good: usize, dg: f64, depth: u32) -> Result<MacroState> {
    let s0 = model.entropy(state)?;
    let g0 = state.good(good);
    let mut rhs = |g: f64, y: &[f64], d: &mut [f64]| -> Result<()> {
        let mut st = state.clone();
        st.money = y[0];
        st.goods.amounts[good] = g;
        d[0] = -thermo::price(model, &st, good)?;
        Ok(())
    };
    let attempt = ode::rk4_step(&mut rhs, g0, &[state.money], dg).and_then(|y| {
        let mut st = state.clone();
        st.money = y[0];
        st.goods.amounts[good] = g0 + dg;
        let drift = (model.entropy(&st)? - s0).abs();
        Ok((st, drift))
    });
    match attempt {
        Ok((st, drift)) if drift <= STEP_DRIFT => Ok(st),
        _ if depth < 30 => {
            let mid = isentrope_step_depth(model, state, good, 0.5 * dg, depth + 1)?;
            isentrope_step_depth(model, &mid, good, 0.5 * dg, depth + 1)
        }
        Ok(_) => Err(Error::StepUnderflow),
        Err(e) => Err(e),
    }
}

/// Point of the isentrope through `state` where `good` equals `g`.
pub fn isentrope_at(model: &EntropyModel, state: &MacroState, good: usize, g: f64) -> Result<MacroState> {
    let s = model.entropy(state)?;
    let mut goods = state.goods.amounts.clone();
    goods[good] = g;
    let m = money_for_entropy(model, &goods, s)?;
    MacroState::new(m, &goods)
}

/// Amount of `good` at which the isentrope through `state` reaches
/// temperature `t`.
pub fn isentrope_goods_at_temperature(model: &EntropyModel, state: &MacroState, good: usize, t: f64) -> Result<f64> {
    if let EntropyModel::CobbDouglas { alpha, eta, .. } = model {
        let t0 = thermo::temperature(model, state)?;
        return Ok(state.good(good) * (t0 / t).powf(eta / alpha[good]));
    }
    let f = |g: f64| -> Result<f64> { Ok(thermo::temperature(model, &isentrope_at(model, state, good, g)?)? - t) };
    monotone_root(f, state.good(good))
}

/// Root in `g > 0` of a function monotone in `g`, bracketed geometrically
/// from `g0`.
pub fn monotone_root<F: Fn(f64) -> Result<f64>>(f: F, g0: f64) -> Result<f64> {
    let f0 = f(g0)?;
    if f0 == 0.0 {
        return Ok(g0);
    }
    let h = g0 * 1e-6;
    let slope = f(g0 + h)? - f(g0 - h)?;
    if slope == 0.0 {
        return Err(Error::NoRoot { lo: g0, hi: g0 });
    }
    let factor = if (f0 < 0.0) == (slope > 0.0) { 1.25 } else { 0.8 };
    let mut prev = g0;
    for _ in 0..400 {
        let next = prev * factor;
        let v = match f(next) {
            Ok(v) => v,
            Err(Error::Domain(_)) | Err(Error::NoRoot { .. }) => break,
            Err(e) => return Err(e),
        };
        if v.signum() != f0.signum() {
            let (lo, hi) = if prev < next { (prev, next) } else { (next, prev) };
            return roots::brent(|x| f(x).unwrap_or(f64::NAN), lo, hi, 1e-14);
        }
        prev = next;
    }
    Err(Error::NoRoot { lo: g0.min(prev), hi: g0.max(prev) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_step_stays_on_cobb_douglas_isentrope() {
        let m = EntropyModel::cobb_douglas(10.0, &[2.0], 2.5);
        let st = MacroState::new(3.0, &[10.0]).unwrap();
        let next = isentrope_step(&m, &st, 0, 4.0).unwrap();
        let exact = 3.0 * (10.0f64 / 14.0).powf(2.0 / 2.5);
        assert!((next.money - exact).abs() < 1e-10 * exact, "{} vs {exact}", next.money);
        assert!((m.entropy(&next).unwrap() - m.entropy(&st).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn temperature_target_matches_closed_form_for_coupled_search() {
        let cd = EntropyModel::cobb_douglas(10.0, &[2.0], 2.5);
        let st = MacroState::new(2.4, &[10.0]).unwrap();
        let closed = isentrope_goods_at_temperature(&cd, &st, 0, 0.47).unwrap();
        let f = |g: f64| -> Result<f64> { Ok(thermo::temperature(&cd, &isentrope_at(&cd, &st, 0, g)?)? - 0.47) };
        let searched = monotone_root(f, 10.0).unwrap();
        assert!((closed - searched).abs() < 1e-10 * closed);
    }
}
