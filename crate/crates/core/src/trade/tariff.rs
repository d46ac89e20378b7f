//! Trade equilibrium under reversible tariffs: each economy charges `τ` per
//! unit of a good arriving and rebates `τ` per unit leaving.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::optimize::{maximize, Objective, Part};
use crate::error::{Error, Result};
use crate::model::EntropyModel;
use crate::state::MacroState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffSpec {
    /// Per-good tariff of economy A (negative values subsidise imports).
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TariffSpec {
    pub fn none(n_goods: usize) -> Self {
        Self { a: vec![0.0; n_goods], b: vec![0.0; n_goods] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffOutcome {
    pub a: MacroState,
    pub b: MacroState,
    /// Goods moved from A to B, per good.
    pub moved: Vec<f64>,
    /// Money moved from A to B apart from tariffs.
    pub money_flow: f64,
    pub revenue_a: f64,
    pub revenue_b: f64,
    pub entropy_before: f64,
    pub entropy_after: f64,
    /// `max_i |(μ_A + τ_A) − (μ_B + τ_B)| / μ` and the temperature gap.
    pub price_residual: f64,
    pub temperature_residual: f64,
}

/// States after moving `moved` goods and `money_flow` money from A to B:
/// `M_A − τ_A·ΔG − X`, `M_B + τ_B·ΔG + X`.
pub fn tariff_states(a: &MacroState, b: &MacroState, tariffs: &TariffSpec, money_flow: f64, moved: &[f64]) -> (MacroState, MacroState) {
    let ta: f64 = tariffs.a.iter().zip(moved).map(|(t, g)| t * g).sum();
    let tb: f64 = tariffs.b.iter().zip(moved).map(|(t, g)| t * g).sum();
    let mut xa = a.coords();
    let mut xb = b.coords();
    xa[0] -= ta + money_flow;
    xb[0] += tb + money_flow;
    for (i, g) in moved.iter().enumerate() {
        xa[i + 1] -= g;
        xb[i + 1] += g;
    }
    (a.with_coords(&xa), b.with_coords(&xb))
}

/// Maximises `S_A + S_B` over the money flow and goods moved. Total
/// entropy is concave in these variables, so the optimum is where
/// `β_A = β_B` and `μ_A + τ_A = μ_B + τ_B` for every good.
pub fn tariff_equilibrium(
    models: (&EntropyModel, &EntropyModel),
    states: (&MacroState, &MacroState),
    tariffs: &TariffSpec,
) -> Result<TariffOutcome> {
    let k = states.0.dim();
    if states.1.dim() != k || tariffs.a.len() != k || tariffs.b.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: tariffs.a.len().min(tariffs.b.len()).min(states.1.dim()) });
    }
    let c = k + 1;
    // z = (X, ΔG_1..ΔG_k).
    let mut aa = DMatrix::zeros(c, c);
    let mut ab = DMatrix::zeros(c, c);
    aa[(0, 0)] = -1.0;
    ab[(0, 0)] = 1.0;
    for i in 0..k {
        aa[(0, i + 1)] = -tariffs.a[i];
        ab[(0, i + 1)] = tariffs.b[i];
        aa[(i + 1, i + 1)] = -1.0;
        ab[(i + 1, i + 1)] = 1.0;
    }
    let obj = Objective {
        parts: vec![
            Part { model: models.0, weight: 1.0, a: aa, b: DVector::from_vec(states.0.coords()) },
            Part { model: models.1, weight: 1.0, a: ab, b: DVector::from_vec(states.1.coords()) },
        ],
        linear: DVector::zeros(c),
    };
    let z0 = DVector::zeros(c);
    let before = obj.value(&z0)?;
    let opt = maximize(&obj, z0, 500)?;
    let moved: Vec<f64> = opt.z.as_slice()[1..].to_vec();
    let (a, b) = tariff_states(states.0, states.1, tariffs, opt.z[0], &moved);
    let (ga, gb) = (models.0.gradient(&a)?, models.1.gradient(&b)?);
    let mut price_residual = 0.0f64;
    for i in 0..k {
        let pa = ga.nu[i] / ga.beta + tariffs.a[i];
        let pb = gb.nu[i] / gb.beta + tariffs.b[i];
        price_residual = price_residual.max((pa - pb).abs() / (ga.nu[i] / ga.beta));
    }
    Ok(TariffOutcome {
        revenue_a: -moved.iter().zip(&tariffs.a).map(|(g, t)| g * t).sum::<f64>(),
        revenue_b: moved.iter().zip(&tariffs.b).map(|(g, t)| g * t).sum::<f64>(),
        a,
        b,
        moved,
        money_flow: opt.z[0],
        entropy_before: before,
        entropy_after: opt.value,
        price_residual,
        temperature_residual: (ga.beta - gb.beta).abs() / ga.beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trade::max_entropy_allocation;

    fn setup() -> (EntropyModel, EntropyModel, MacroState, MacroState) {
        (
            EntropyModel::cobb_douglas(10.0, &[1.0], 2.5),
            EntropyModel::cobb_douglas(20.0, &[1.0], 1.5),
            MacroState::new(0.8, &[5.0]).unwrap(),
            MacroState::new(0.2, &[25.0]).unwrap(),
        )
    }

    #[test]
    fn zero_tariff_is_the_maximum_entropy_split() {
        let (ma, mb, sa, sb) = setup();
        let out = tariff_equilibrium((&ma, &mb), (&sa, &sb), &TariffSpec::none(1)).unwrap();
        let free = max_entropy_allocation(&[ma, mb], 1.0, &[30.0]).unwrap();
        for (x, y) in out.a.coords().iter().zip(free.allocation.states[0].coords()) {
            assert!((x - y).abs() < 1e-10 * y);
        }
        assert_eq!(out.revenue_a, 0.0);
    }

    #[test]
    fn tariff_inclusive_prices_and_temperatures_meet() {
        let (ma, mb, sa, sb) = setup();
        let t = TariffSpec { a: vec![0.003], b: vec![-0.001] };
        let out = tariff_equilibrium((&ma, &mb), (&sa, &sb), &t).unwrap();
        assert!(out.price_residual < 1e-9 && out.temperature_residual < 1e-9);
        assert!((out.revenue_a + out.moved[0] * 0.003).abs() < 1e-15);
        assert!((out.revenue_b + out.moved[0] * 0.001).abs() < 1e-15);
        // Money in the economies changes by exactly the revenues raised.
        let total = out.a.money + out.b.money;
        assert!((total - 1.0 - out.revenue_a - out.revenue_b).abs() < 1e-14);
    }
}
