//! Thermodynamic coordinates of a single economy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodsVector {
    pub amounts: Vec<f64>,
    pub labels: Vec<String>,
}

impl GoodsVector {
    pub fn new(amounts: Vec<f64>) -> Result<Self> {
        let labels = (0..amounts.len()).map(|i| format!("g{i}")).collect();
        Self::with_labels(amounts, labels)
    }

    pub fn with_labels(amounts: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != amounts.len() {
            return Err(Error::DimensionMismatch { expected: amounts.len(), got: labels.len() });
        }
        if let Some(a) = amounts.iter().find(|a| !(**a >= 0.0) || !a.is_finite()) {
            return Err(Error::Domain(format!("goods amount {a} is negative or not finite")));
        }
        Ok(Self { amounts, labels })
    }

    pub fn dim(&self) -> usize {
        self.amounts.len()
    }

    pub fn check_dim(&self, other: &GoodsVector) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(())
    }
}

/// Money and goods held by one economy. Boundary states (a zero coordinate)
/// are representable; only interior states are evaluable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroState {
    pub money: f64,
    pub goods: GoodsVector,
}

impl MacroState {
    pub fn new(money: f64, goods: &[f64]) -> Result<Self> {
        if !(money >= 0.0) || !money.is_finite() {
            return Err(Error::Domain(format!("money {money} is negative or not finite")));
        }
        Ok(Self { money, goods: GoodsVector::new(goods.to_vec())? })
    }

    pub fn dim(&self) -> usize {
        self.goods.dim()
    }

    pub fn good(&self, i: usize) -> f64 {
        self.goods.amounts[i]
    }

    pub fn is_evaluable(&self) -> bool {
        self.money > 0.0 && self.goods.amounts.iter().all(|g| *g > 0.0)
    }

    pub fn check_evaluable(&self) -> Result<()> {
        if self.is_evaluable() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "M = {}, G = {:?}; evaluation needs all coordinates > 0",
                self.money, self.goods.amounts
            )))
        }
    }

    /// Coordinates ordered (M, G_1, …, G_k).
    pub fn coords(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.dim());
        v.push(self.money);
        v.extend_from_slice(&self.goods.amounts);
        v
    }

    /// Inverse of [`MacroState::coords`]; keeps existing labels.
    pub fn with_coords(&self, x: &[f64]) -> MacroState {
        let mut s = self.clone();
        s.money = x[0];
        s.goods.amounts.copy_from_slice(&x[1..]);
        s
    }

    pub fn from_coords(x: &[f64]) -> Result<Self> {
        Self::new(x[0], &x[1..])
    }

    pub fn scaled(&self, lambda: f64) -> MacroState {
        let x: Vec<f64> = self.coords().iter().map(|c| c * lambda).collect();
        self.with_coords(&x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_states_are_storable_but_not_evaluable() {
        let s = MacroState::new(0.0, &[1.0]).unwrap();
        assert!(!s.is_evaluable());
        assert!(matches!(s.check_evaluable(), Err(Error::Domain(_))));
    }

    #[test]
    fn negative_amounts_are_rejected() {
        assert!(MacroState::new(-1.0, &[1.0]).is_err());
        assert!(MacroState::new(1.0, &[-0.5]).is_err());
    }

    #[test]
    fn coords_round_trip() {
        let s = MacroState::new(2.0, &[3.0, 4.0]).unwrap();
        assert_eq!(s.coords(), vec![2.0, 3.0, 4.0]);
        assert_eq!(MacroState::from_coords(&s.coords()).unwrap(), s);
    }

    #[test]
    fn mismatched_goods_dimensions_error() {
        let a = GoodsVector::new(vec![1.0]).unwrap();
        let b = GoodsVector::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(a.check_dim(&b), Err(Error::DimensionMismatch { .. })));
    }
}
