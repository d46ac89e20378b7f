//! First-order geometry of single-good trade between two economies in the
//! `(dM₁, dG₁)` plane: the entropy half-space, the MB price band, the
//! investment direction and the quadrant of the pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EntropyModel;
use crate::state::MacroState;

/// Signs of `(T₂ − T₁, μ₂ − μ₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrant {
    /// `T₁ > T₂`, `μ₁ > μ₂`.
    HotterDearer,
    /// `T₁ > T₂`, `μ₁ < μ₂`.
    HotterCheaper,
    /// `T₁ < T₂`, `μ₁ < μ₂`.
    CoolerCheaper,
    /// `T₁ < T₂`, `μ₁ > μ₂`.
    CoolerDearer,
    /// On the equal-temperature line or the Pareto curve.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleCone {
    /// `dΣS = normal · (dM₁, dG₁)`; feasible directions have `dΣS ≥ 0`.
    pub normal: (f64, f64),
    /// Slope `dM₁/dG₁ = (ν₁ − ν₂)/(β₂ − β₁)` of the total isentrope
    /// (infinite at equal temperatures).
    pub isentrope_slope: f64,
    /// MB trades have `dM₁ = −p dG₁` with `p` in this band.
    pub mb_price_band: (f64, f64),
    /// Unit money flow into economy 1 that raises total entropy (zero at
    /// equal temperatures).
    pub investment: (f64, f64),
    pub quadrant: Quadrant,
    /// Equal temperatures and prices: every direction is entropy-neutral.
    pub degenerate: bool,
}

impl FeasibleCone {
    pub fn entropy_rate(&self, dm: f64, dg: f64) -> f64 {
        self.normal.0 * dm + self.normal.1 * dg
    }

    pub fn contains(&self, dm: f64, dg: f64) -> bool {
        self.entropy_rate(dm, dg) >= 0.0
    }

    /// Whether `(dM₁, dG₁)` is a trade at a price inside the MB band.
    pub fn is_mb_direction(&self, dm: f64, dg: f64) -> bool {
        if dg == 0.0 {
            return dm == 0.0;
        }
        let p = -dm / dg;
        let (lo, hi) = self.mb_price_band;
        // Goods must flow towards the dearer economy.
        let towards_dearer = if self.normal.1 > 0.0 { dg > 0.0 } else { dg < 0.0 };
        p >= lo && p <= hi && towards_dearer
    }
}

/// Relative tolerance below which temperatures or prices count as equal.
const EQUAL_TOL: f64 = 1e-12;

pub fn feasible_cone(models: (&EntropyModel, &EntropyModel), states: (&MacroState, &MacroState)) -> Result<FeasibleCone> {
    if states.0.dim() != 1 || states.1.dim() != 1 {
        return Err(Error::InvalidParameter("the feasible cone is defined for one good and money".into()));
    }
    let g1 = models.0.gradient(states.0)?;
    let g2 = models.1.gradient(states.1)?;
    let (b1, b2, n1, n2) = (g1.beta, g2.beta, g1.nu[0], g2.nu[0]);
    let (mu1, mu2) = (n1 / b1, n2 / b2);
    // Moving (dM₁, dG₁) into 1 takes the same out of 2.
    let normal = (b1 - b2, n1 - n2);
    let eq_t = (b1 - b2).abs() <= EQUAL_TOL * b1.max(b2);
    let eq_mu = (mu1 - mu2).abs() <= EQUAL_TOL * mu1.max(mu2);
    let quadrant = if eq_t || eq_mu {
        Quadrant::Boundary
    } else {
        match (b1 < b2, mu1 > mu2) {
            (true, true) => Quadrant::HotterDearer,
            (true, false) => Quadrant::HotterCheaper,
            (false, false) => Quadrant::CoolerCheaper,
            (false, true) => Quadrant::CoolerDearer,
        }
    };
    let investment = if eq_t { (0.0, 0.0) } else { ((b1 - b2).signum(), 0.0) };
    Ok(FeasibleCone {
        normal: if eq_t && eq_mu { (0.0, 0.0) } else { normal },
        isentrope_slope: if eq_t { f64::INFINITY } else { (n1 - n2) / (b2 - b1) },
        mb_price_band: (mu1.min(mu2), mu1.max(mu2)),
        investment,
        quadrant,
        degenerate: eq_t && eq_mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cd(n: f64, eta: f64) -> EntropyModel {
        EntropyModel::cobb_douglas(n, &[1.0], eta)
    }

    #[test]
    fn equilibrium_is_degenerate() {
        let c = feasible_cone((&cd(10.0, 1.0), &cd(20.0, 1.0)), (&MacroState::new(1.0, &[2.0]).unwrap(), &MacroState::new(2.0, &[4.0]).unwrap())).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.entropy_rate(0.3, -0.7), 0.0);
    }

    #[test]
    fn every_quadrant_is_reached() {
        let m = cd(10.0, 1.0);
        let base = MacroState::new(1.0, &[1.0]).unwrap();
        let q = |m2: f64, g2: f64| feasible_cone((&m, &m), (&base, &MacroState::new(m2, &[g2]).unwrap())).unwrap().quadrant;
        // T = M/10 and μ = M/G for these economies.
        assert_eq!(q(0.5, 1.0), Quadrant::HotterDearer);
        assert_eq!(q(0.5, 0.25), Quadrant::HotterCheaper);
        assert_eq!(q(2.0, 1.0), Quadrant::CoolerCheaper);
        assert_eq!(q(2.0, 4.0), Quadrant::CoolerDearer);
    }
}
