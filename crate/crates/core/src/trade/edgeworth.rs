//! Edgeworth-box geometry of two single-good economies with fixed totals,
//! in the coordinates `(M₁, G₁)` of the first economy.

use serde::{Deserialize, Serialize};

use super::allocation::Allocation;
use super::cone::{feasible_cone, Quadrant};
use super::optimize::pareto_set;
use crate::error::{Error, Result};
use crate::model::EntropyModel;
use crate::protocols::economy::money_for_entropy;
use crate::roots;
use crate::state::MacroState;
use crate::thermo;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsentropePoint {
    /// Economy whose entropy is held at its endowment value.
    pub economy: usize,
    pub m1: f64,
    pub g1: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoRow {
    pub m1: f64,
    pub g1: f64,
    pub price: f64,
    pub t1: f64,
    pub t2: f64,
    pub total_entropy: f64,
    pub price_gap: f64,
    /// Neither economy is below its endowment entropy.
    pub mb: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualTemperaturePoint {
    pub m1: f64,
    pub g1: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrantPoint {
    pub m1: f64,
    pub g1: f64,
    pub quadrant: Quadrant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeworthBox {
    pub money_total: f64,
    pub goods_total: f64,
    pub initial: (f64, f64),
    pub isentropes: Vec<IsentropePoint>,
    pub pareto: Vec<ParetoRow>,
    pub equal_temperature: Vec<EqualTemperaturePoint>,
    pub quadrants: Vec<QuadrantPoint>,
}

fn pair(m1: f64, g1: f64, m: f64, g: f64) -> Result<(MacroState, MacroState)> {
    Ok((MacroState::new(m1, &[g1])?, MacroState::new(m - m1, &[g - g1])?))
}

/// Samples every curve at `n_points` interior goods levels and the
/// quadrants on a `grid × grid` interior lattice.
pub fn edgeworth_box(models: [&EntropyModel; 2], initial: &Allocation, n_points: usize, grid: usize) -> Result<EdgeworthBox> {
    if initial.states.len() != 2 || initial.n_goods() != 1 {
        return Err(Error::InvalidParameter("the Edgeworth box needs two single-good economies".into()));
    }
    let (m, g) = (initial.money_total, initial.goods_total[0]);
    let s0 = initial.entropies(&[models[0].clone(), models[1].clone()])?;
    let frac = |k: usize, n: usize| (k + 1) as f64 / (n + 1) as f64;

    let mut isentropes = Vec::new();
    for k in 0..n_points {
        let g1 = g * frac(k, n_points);
        if let Ok(m1) = money_for_entropy(models[0], &[g1], s0[0]) {
            if m1 < m {
                isentropes.push(IsentropePoint { economy: 0, m1, g1, entropy: s0[0] });
            }
        }
        if let Ok(m2) = money_for_entropy(models[1], &[g - g1], s0[1]) {
            if m2 < m {
                isentropes.push(IsentropePoint { economy: 1, m1: m - m2, g1, entropy: s0[1] });
            }
        }
    }

    let mut pareto = Vec::new();
    for p in pareto_set(models[0], models[1], m, &[g], n_points)? {
        let (a, b) = (&p.allocation.states[0], &p.allocation.states[1]);
        let (sa, sb) = (models[0].entropy(a)?, models[1].entropy(b)?);
        pareto.push(ParetoRow {
            m1: a.money,
            g1: a.good(0),
            price: thermo::price(models[0], a, 0)?,
            t1: thermo::temperature(models[0], a)?,
            t2: thermo::temperature(models[1], b)?,
            total_entropy: sa + sb,
            price_gap: p.price_gap,
            mb: sa >= s0[0] && sb >= s0[1],
        });
    }

    // T₁ rises and T₂ falls with M₁, so the gap has one root per G₁.
    let mut equal_temperature = Vec::new();
    for k in 0..n_points {
        let g1 = g * frac(k, n_points);
        let gap = |m1: f64| {
            pair(m1, g1, m, g)
                .and_then(|(a, b)| Ok(thermo::temperature(models[0], &a)? - thermo::temperature(models[1], &b)?))
                .unwrap_or(f64::NAN)
        };
        if let Ok(m1) = roots::brent(gap, m * 1e-9, m * (1.0 - 1e-9), 1e-13) {
            let temperature = thermo::temperature(models[0], &MacroState::new(m1, &[g1])?)?;
            equal_temperature.push(EqualTemperaturePoint { m1, g1, temperature });
        }
    }

    let mut quadrants = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let (m1, g1) = (m * frac(i, grid), g * frac(j, grid));
            let (a, b) = pair(m1, g1, m, g)?;
            let quadrant = feasible_cone((models[0], models[1]), (&a, &b))?.quadrant;
            quadrants.push(QuadrantPoint { m1, g1, quadrant });
        }
    }

    Ok(EdgeworthBox {
        money_total: m,
        goods_total: g,
        initial: (initial.states[0].money, initial.states[0].good(0)),
        isentropes,
        pareto,
        equal_temperature,
        quadrants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ([EntropyModel; 2], Allocation) {
        let models = [EntropyModel::cobb_douglas(10.0, &[1.0], 2.5), EntropyModel::cobb_douglas(20.0, &[1.0], 1.5)];
        let alloc = Allocation::new(vec![MacroState::new(0.8, &[5.0]).unwrap(), MacroState::new(0.2, &[25.0]).unwrap()]).unwrap();
        (models, alloc)
    }

    #[test]
    fn equal_temperature_line_is_constant_money_for_cobb_douglas() {
        let (models, alloc) = toy();
        let b = edgeworth_box([&models[0], &models[1]], &alloc, 20, 4).unwrap();
        assert_eq!(b.equal_temperature.len(), 20);
        for p in &b.equal_temperature {
            assert!((p.m1 - 5.0 / 11.0).abs() < 1e-10, "{p:?}");
        }
    }

    #[test]
    fn mb_segment_lies_between_the_endowment_isentropes() {
        let (models, alloc) = toy();
        let b = edgeworth_box([&models[0], &models[1]], &alloc, 200, 2).unwrap();
        let mb: Vec<_> = b.pareto.iter().filter(|p| p.mb).collect();
        assert!(!mb.is_empty() && mb.len() < b.pareto.len());
        for p in &b.pareto {
            assert!(p.price_gap < 1e-12);
        }
        assert!(b.isentropes.iter().all(|p| p.m1 > 0.0 && p.m1 < 1.0));
    }

    #[test]
    fn quadrant_grid_covers_the_box() {
        let (models, alloc) = toy();
        let b = edgeworth_box([&models[0], &models[1]], &alloc, 5, 6).unwrap();
        assert_eq!(b.quadrants.len(), 36);
        for q in [Quadrant::HotterDearer, Quadrant::HotterCheaper, Quadrant::CoolerCheaper, Quadrant::CoolerDearer] {
            assert!(b.quadrants.iter().any(|p| p.quadrant == q), "{q:?} missing");
        }
    }
}
