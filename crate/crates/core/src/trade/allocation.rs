use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EntropyModel;
use crate::state::MacroState;

/// Relative tolerance on conserved totals.
pub const TOTALS_TOL: f64 = 1e-12;

/// Holdings of several economies with their conserved totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub states: Vec<MacroState>,
    pub money_total: f64,
    pub goods_total: Vec<f64>,
}

impl Allocation {
    pub fn new(states: Vec<MacroState>) -> Result<Self> {
        let k = states.first().map(|s| s.dim()).ok_or_else(|| Error::InvalidParameter("empty allocation".into()))?;
        if let Some(s) = states.iter().find(|s| s.dim() != k) {
            return Err(Error::DimensionMismatch { expected: k, got: s.dim() });
        }
        let money_total = states.iter().map(|s| s.money).sum();
        let goods_total = (0..k).map(|i| states.iter().map(|s| s.good(i)).sum()).collect();
        Ok(Self { states, money_total, goods_total })
    }

    pub fn n_goods(&self) -> usize {
        self.goods_total.len()
    }

    /// Errors unless `other` holds the same economies and totals.
    pub fn check_same_totals(&self, other: &Allocation) -> Result<()> {
        if self.states.len() != other.states.len() {
            return Err(Error::DimensionMismatch { expected: self.states.len(), got: other.states.len() });
        }
        if self.n_goods() != other.n_goods() {
            return Err(Error::DimensionMismatch { expected: self.n_goods(), got: other.n_goods() });
        }
        let close = |a: f64, b: f64| (a - b).abs() <= TOTALS_TOL * a.abs().max(b.abs()).max(1.0);
        if !close(self.money_total, other.money_total) || !self.goods_total.iter().zip(&other.goods_total).all(|(a, b)| close(*a, *b)) {
            return Err(Error::InvalidParameter("allocations do not conserve totals".into()));
        }
        Ok(())
    }

    pub fn entropies(&self, models: &[EntropyModel]) -> Result<Vec<f64>> {
        if models.len() != self.states.len() {
            return Err(Error::DimensionMismatch { expected: self.states.len(), got: models.len() });
        }
        models.iter().zip(&self.states).map(|(m, s)| m.entropy(s)).collect()
    }

    pub fn total_entropy(&self, models: &[EntropyModel]) -> Result<f64> {
        Ok(self.entropies(models)?.iter().sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_are_recorded_and_compared() {
        let a = Allocation::new(vec![MacroState::new(1.0, &[2.0]).unwrap(), MacroState::new(3.0, &[4.0]).unwrap()]).unwrap();
        assert_eq!(a.money_total, 4.0);
        assert_eq!(a.goods_total, vec![6.0]);
        let b = Allocation::new(vec![MacroState::new(2.0, &[1.0]).unwrap(), MacroState::new(2.0, &[5.0]).unwrap()]).unwrap();
        assert!(a.check_same_totals(&b).is_ok());
        let c = Allocation::new(vec![MacroState::new(2.0, &[1.0]).unwrap(), MacroState::new(2.1, &[5.0]).unwrap()]).unwrap();
        assert!(a.check_same_totals(&c).is_err());
    }
}
