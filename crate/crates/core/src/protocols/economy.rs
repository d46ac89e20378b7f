//! A named economy with its entropy model, and monotone solves on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EntropyModel;
use crate::roots;
use crate::state::MacroState;
use crate::thermo::{self, ThermoQuantities};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Economy {
    pub name: String,
    pub model: EntropyModel,
    pub state: MacroState,
}

impl Economy {
    pub fn new(name: &str, model: EntropyModel, state: MacroState) -> Result<Self> {
        model.validate()?;
        if state.dim() != model.n_goods() {
            return Err(Error::DimensionMismatch { expected: model.n_goods(), got: state.dim() });
        }
        Ok(Self { name: name.to_string(), model, state })
    }

    pub fn entropy(&self) -> Result<f64> {
        self.model.entropy(&self.state)
    }

    pub fn temperature(&self) -> Result<f64> {
        thermo::temperature(&self.model, &self.state)
    }

    pub fn price(&self, good: usize) -> Result<f64> {
        thermo::price(&self.model, &self.state, good)
    }

    pub fn thermo(&self) -> Result<ThermoQuantities> {
        thermo::thermo_quantities(&self.model, &self.state)
    }

    pub fn with_money(&self, money: f64) -> Economy {
        let mut e = self.clone();
        e.state.money = money;
        e
    }
}

/// Root of an increasing function of a positive variable, bracketed by
/// geometric expansion from `x0`.
pub fn solve_increasing<F: FnMut(f64) -> Result<f64>>(mut f: F, x0: f64, rel_tol: f64) -> Result<f64> {
    let f0 = f(x0)?;
    if f0 == 0.0 {
        return Ok(x0);
    }
    let up = f0 < 0.0;
    let mut outer = x0;
    for _ in 0..400 {
        let next = if up { outer * 2.0 } else { outer * 0.5 };
        match f(next) {
            Ok(v) => {
                if (up && v >= 0.0) || (!up && v <= 0.0) {
                    let (lo, hi) = if up { (outer, next) } else { (next, outer) };
                    return roots::brent(|x| f(x).unwrap_or(f64::NAN), lo, hi, rel_tol);
                }
                outer = next;
            }
            Err(Error::Domain(_)) => return Err(Error::NoRoot { lo: outer.min(next), hi: outer.max(next) }),
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoRoot { lo: x0, hi: outer })
}

/// Money at which the economy with goods `goods` has temperature `t`.
pub fn money_for_temperature(model: &EntropyModel, goods: &[f64], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("temperature {t} must be positive")));
    }
    if let EntropyModel::CobbDouglas { n, eta, .. } = model {
        return Ok(n * eta * t);
    }
    solve_money(model, goods, |st| Ok(thermo::temperature(model, st)? - t))
}

/// Money at which the economy with goods `goods` has entropy `s`.
pub fn money_for_entropy(model: &EntropyModel, goods: &[f64], s: f64) -> Result<f64> {
    if let EntropyModel::CobbDouglas { n, alpha, eta } = model {
        let goods_part: f64 = alpha.iter().zip(goods).map(|(a, g)| a * (g / n).ln()).sum();
        return Ok(n * ((s / n - goods_part) / eta).exp());
    }
    solve_money(model, goods, |st| Ok(model.entropy(st)? - s))
}

/// Money solving `f(state) = 0` for `f` increasing in money; tabulated
/// models are bracketed by their money range.
fn solve_money<F: FnMut(&MacroState) -> Result<f64>>(model: &EntropyModel, goods: &[f64], mut f: F) -> Result<f64> {
    let probe = MacroState::new(1.0, goods)?;
    let mut h = |m: f64| f(&probe.with_coords(&coords(m, goods)));
    if let EntropyModel::Tabulated(t) = model {
        let (lo, hi) = t.money_range();
        let (flo, fhi) = (h(lo)?, h(hi)?);
        if flo > 0.0 || fhi < 0.0 {
            return Err(Error::NoRoot { lo, hi });
        }
        return roots::brent(|m| h(m).unwrap_or(f64::NAN), lo, hi, 1e-14);
    }
    solve_increasing(h, guess_money(goods), 1e-14)
}

fn coords(m: f64, goods: &[f64]) -> Vec<f64> {
    let mut v = vec![m];
    v.extend_from_slice(goods);
    v
}

fn guess_money(goods: &[f64]) -> f64 {
    goods.iter().sum::<f64>().max(1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temperature_and_entropy_solves_invert() {
        let models = [
            EntropyModel::cobb_douglas(10.0, &[1.0], 2.5),
            EntropyModel::CoupledTest { n: 3.0, a: 1.0, b: vec![2.0], c: 0.5 },
        ];
        for m in &models {
            let goods = [4.0];
            let money = money_for_temperature(m, &goods, 0.3).unwrap();
            let st = MacroState::new(money, &goods).unwrap();
            assert!((thermo::temperature(m, &st).unwrap() - 0.3).abs() < 1e-13);
            let s = m.entropy(&st).unwrap();
            let back = money_for_entropy(m, &goods, s).unwrap();
            assert!((back - money).abs() < 1e-12 * money);
        }
    }
}
