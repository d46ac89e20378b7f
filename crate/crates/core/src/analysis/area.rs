//! Equal-area rule: Carnot loops around the cells of an isotherm/isentrope
//! grid enclose the same money in the (G, μ) plane as in the (S, T) plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EntropyModel;
use crate::ode;
use crate::protocols::economy::{money_for_entropy, money_for_temperature};
use crate::protocols::path::monotone_root;
use crate::state::MacroState;
use crate::thermo;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaOptions {
    /// Gauss–Legendre panels per leg.
    pub panels: usize,
    /// Nodes per panel.
    pub order: usize,
}

impl Default for AreaOptions {
    fn default() -> Self {
        Self { panels: 16, order: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellArea {
    /// Grid indices of the cell's lower temperature and entropy lines.
    pub ti: usize,
    pub sj: usize,
    /// `∮ μ dG` around the cell (hot isotherm first, entropy rising).
    pub loop_integral: f64,
    /// `ΔT · ΔS`.
    pub rectangle: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub temperatures: Vec<f64>,
    pub entropies: Vec<f64>,
    /// Goods of `good` at each grid node, indexed `[t][s]`.
    pub node_goods: Vec<Vec<f64>>,
    pub cells: Vec<CellArea>,
    pub max_residual: f64,
    /// Largest `|A_{i,j} A_{i+1,j+1} − A_{i,j+1} A_{i+1,j}|` over adjacent
    /// 2×2 blocks of loop integrals.
    pub cross_ratio_residual: f64,
}

fn check_grid(v: &[f64], name: &str) -> Result<()> {
    if v.len() < 2 || v.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidParameter(format!("{name} grid needs ≥ 2 non-decreasing values")));
    }
    Ok(())
}

/// Loop integrals over the cells of the grid `temperatures × entropies`,
/// moving `good` with the other goods as in `base`. Grid nodes are found
/// from the isotherm/isentrope intersections starting at `base`.
pub fn equal_area_check(
    model: &EntropyModel,
    base: &MacroState,
    good: usize,
    temperatures: &[f64],
    entropies: &[f64],
    opts: AreaOptions,
) -> Result<AreaReport> {
    check_grid(temperatures, "temperature")?;
    check_grid(entropies, "entropy")?;
    if good >= base.dim() {
        return Err(Error::DimensionMismatch { expected: base.dim(), got: good + 1 });
    }
    let goods_at = |g: f64| {
        let mut v = base.goods.amounts.clone();
        v[good] = g;
        v
    };
    let node = |t: f64, s: f64| -> Result<f64> {
        let f = |g: f64| -> Result<f64> {
            let goods = goods_at(g);
            let m = money_for_temperature(model, &goods, t)?;
            Ok(model.entropy(&MacroState::new(m, &goods)?)? - s)
        };
        monotone_root(f, base.good(good))
    };
    let mut node_goods = Vec::with_capacity(temperatures.len());
    for &t in temperatures {
        node_goods.push(entropies.iter().map(|&s| node(t, s)).collect::<Result<Vec<f64>>>()?);
    }
    let price_at = |m: f64, g: f64| -> Result<f64> {
        let goods = goods_at(g);
        thermo::price(model, &MacroState::new(m, &goods)?, good)
    };
    let isotherm = |t: f64, g0: f64, g1: f64| -> Result<f64> {
        leg(|g| price_at(money_for_temperature(model, &goods_at(g), t)?, g), g0, g1, opts)
    };
    let isentrope = |s: f64, g0: f64, g1: f64| -> Result<f64> {
        leg(|g| price_at(money_for_entropy(model, &goods_at(g), s)?, g), g0, g1, opts)
    };
    let mut cells = Vec::new();
    let nt = temperatures.len() - 1;
    let ns = entropies.len() - 1;
    let mut grid = vec![vec![0.0; ns]; nt];
    for i in 0..nt {
        for j in 0..ns {
            let (tl, th) = (temperatures[i], temperatures[i + 1]);
            let (sl, sh) = (entropies[j], entropies[j + 1]);
            let g = |ti: usize, sj: usize| node_goods[ti][sj];
            let loop_integral = if th == tl {
                0.0
            } else {
                isotherm(th, g(i + 1, j), g(i + 1, j + 1))?
                    + isentrope(sh, g(i + 1, j + 1), g(i, j + 1))?
                    + isotherm(tl, g(i, j + 1), g(i, j))?
                    + isentrope(sl, g(i, j), g(i + 1, j))?
            };
            let rectangle = (th - tl) * (sh - sl);
            grid[i][j] = loop_integral;
            cells.push(CellArea { ti: i, sj: j, loop_integral, rectangle, residual: (loop_integral - rectangle).abs() });
        }
    }
    let mut cross = 0.0f64;
    for i in 0..nt.saturating_sub(1) {
        for j in 0..ns.saturating_sub(1) {
            cross = cross.max((grid[i][j] * grid[i + 1][j + 1] - grid[i][j + 1] * grid[i + 1][j]).abs());
        }
    }
    let max_residual = cells.iter().map(|c| c.residual).fold(0.0, f64::max);
    Ok(AreaReport {
        temperatures: temperatures.to_vec(),
        entropies: entropies.to_vec(),
        node_goods,
        cells,
        max_residual,
        cross_ratio_residual: cross,
    })
}

/// A point on a grid isotherm (`isotherm`) or isentrope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub isotherm: bool,
    /// Temperature or entropy of the curve.
    pub level: f64,
    pub goods: f64,
    pub money: f64,
    pub price: f64,
}

/// `n_points` points along each grid line of `report`, spanning its nodes.
pub fn area_curves(model: &EntropyModel, base: &MacroState, good: usize, report: &AreaReport, n_points: usize) -> Result<Vec<CurvePoint>> {
    let n = n_points.max(2);
    let nodes = &report.node_goods;
    let mut out = Vec::new();
    let mut sample = |isotherm: bool, level: f64, g0: f64, g1: f64| -> Result<()> {
        for k in 0..n {
            let mut goods = base.goods.amounts.clone();
            goods[good] = g0 + (g1 - g0) * k as f64 / (n - 1) as f64;
            let money = if isotherm { money_for_temperature(model, &goods, level)? } else { money_for_entropy(model, &goods, level)? };
            let price = thermo::price(model, &MacroState::new(money, &goods)?, good)?;
            out.push(CurvePoint { isotherm, level, goods: goods[good], money, price });
        }
        Ok(())
    };
    let last_s = report.entropies.len() - 1;
    for (i, &t) in report.temperatures.iter().enumerate() {
        sample(true, t, nodes[i][0], nodes[i][last_s])?;
    }
    let last_t = report.temperatures.len() - 1;
    for (j, &s) in report.entropies.iter().enumerate() {
        sample(false, s, nodes[0][j], nodes[last_t][j])?;
    }
    Ok(out)
}

/// `∫ μ(G) dG` from `g0` to `g1` by composite Gauss–Legendre quadrature.
fn leg<F: FnMut(f64) -> Result<f64>>(mut mu: F, g0: f64, g1: f64, opts: AreaOptions) -> Result<f64> {
    let h = (g1 - g0) / opts.panels as f64;
    let mut acc = 0.0;
    for p in 0..opts.panels {
        let a = g0 + h * p as f64;
        acc += ode::integrate(&mut mu, a, a + h, opts.order)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_cell_has_zero_area() {
        let m = EntropyModel::cobb_douglas(10.0, &[1.0], 2.5);
        let base = MacroState::new(5.0, &[10.0]).unwrap();
        let r = equal_area_check(&m, &base, 0, &[0.2, 0.2], &[0.0, 1.0], AreaOptions::default()).unwrap();
        assert_eq!(r.cells[0].loop_integral, 0.0);
        assert_eq!(r.cells[0].rectangle, 0.0);
    }

    #[test]
    fn coupled_model_cells_match_rectangles() {
        let m = EntropyModel::CoupledTest { n: 5.0, a: 1.0, b: vec![1.0], c: 0.5 };
        let base = MacroState::new(2.0, &[3.0]).unwrap();
        let s0 = m.entropy(&base).unwrap();
        let t0 = thermo::temperature(&m, &base).unwrap();
        let r = equal_area_check(&m, &base, 0, &[t0, 1.1 * t0, 1.25 * t0], &[s0, s0 + 0.3, s0 + 0.5], AreaOptions::default()).unwrap();
        assert!(r.max_residual < 1e-8, "{r:?}");
        assert!(r.cross_ratio_residual < 1e-8);
        let curves = area_curves(&m, &base, 0, &r, 5).unwrap();
        assert_eq!(curves.len(), 6 * 5);
        for c in curves.iter().filter(|c| c.isotherm) {
            let st = MacroState::new(c.money, &[c.goods]).unwrap();
            assert!((thermo::temperature(&m, &st).unwrap() - c.level).abs() < 1e-10);
        }
    }

    #[test]
    fn grids_must_be_ordered() {
        let m = EntropyModel::cobb_douglas(1.0, &[1.0], 1.0);
        let base = MacroState::new(1.0, &[1.0]).unwrap();
        assert!(equal_area_check(&m, &base, 0, &[0.3, 0.2], &[0.0, 1.0], AreaOptions::default()).is_err());
    }
}
