//! Entropy from prices alone, by the reversible-accessibility construction
//! for a single good.
//!
//! A state `(G, M)` is first carried along its isentrope `dM/dG = −μ` to the
//! reference goods level `G_ref`, landing at money `M*`. Its entropy is the
//! fraction `λ` for which splitting the system into `1 − λ` of
//! `(G_ref, M₀)` and `λ` of `(G_ref, M₁)` and recombining reversibly ends at
//! `(G_ref, M*)`. Recombining has two phases:
//!
//! 1. each part moves along its own isentrope until both hold the same money
//!    per unit size, while the trader's goods balance is kept at zero;
//! 2. the parts, now in financial equilibrium, exchange goods at their
//!    market prices with money kept equal per unit size, until their goods
//!    per unit size also agree.
//!
//! Financial equilibrium at equal money per unit size holds for
//! Cobb-Douglas agents, which is the setting of the construction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::micro::replica_seed;
use crate::model::CobbDouglasParams;
use crate::ode::{self, AdaptiveOptions};
use crate::protocols::join::AgentEconomy;
use crate::protocols::price::{find_market_price, PriceSearchConfig};
use crate::roots;
use crate::state::MacroState;

/// Market price of the single good as a function of `(G, M)`.
pub trait PriceOracle {
    fn price(&self, g: f64, m: f64) -> Result<f64>;
}

impl<F: Fn(f64, f64) -> Result<f64>> PriceOracle for F {
    fn price(&self, g: f64, m: f64) -> Result<f64> {
        let p = self(g, m)?;
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Domain(format!("price {p} at G = {g}, M = {m}")));
        }
        Ok(p)
    }
}

/// Reference states `(G_ref, M₀)` and `(G_ref, M₁)`, assigned entropy 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub goods: f64,
    pub money_low: f64,
    pub money_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructOptions {
    pub ode: OdeTolerances,
    /// Chebyshev–Lobatto nodes for the recombination map `λ ↦ M*`.
    pub nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeTolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self { ode: OdeTolerances { rtol: 1e-10, atol: 1e-13 }, nodes: 33 }
    }
}

impl ReconstructOptions {
    fn adaptive(&self) -> AdaptiveOptions {
        AdaptiveOptions { rtol: self.ode.rtol, atol: self.ode.atol, ..AdaptiveOptions::default() }
    }
}

/// Least-squares `S_ref ≈ a Ŝ + b` over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub a: f64,
    pub b: f64,
    /// `max |a Ŝ + b − S_ref|` divided by the range of `S_ref` over the grid.
    pub max_rel_deviation: f64,
    pub reference_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub reference: Reference,
    pub goods: Vec<f64>,
    pub money: Vec<f64>,
    /// `Ŝ[i][j]` at `(goods[i], money[j])`.
    pub s_hat: Vec<Vec<f64>>,
    /// Money where each grid point's isentrope meets `G_ref`.
    pub money_at_reference: Vec<Vec<f64>>,
    pub fit: Option<AffineFit>,
}

impl ReconstructionResult {
    /// Fits the affine map to `reference` and stores it.
    pub fn fit_to<F: Fn(f64, f64) -> f64>(&mut self, reference: F) -> Result<AffineFit> {
        let mut rows = Vec::new();
        let mut target = Vec::new();
        for (i, g) in self.goods.iter().enumerate() {
            for (j, m) in self.money.iter().enumerate() {
                rows.push(self.s_hat[i][j]);
                target.push(reference(*g, *m));
            }
        }
        let n = rows.len();
        let x = DMatrix::from_fn(n, 2, |r, c| if c == 0 { rows[r] } else { 1.0 });
        let y = DVector::from_vec(target.clone());
        let coef = x
            .clone()
            .svd(true, true)
            .solve(&y, 1e-14)
            .map_err(|e| Error::NonConvergence(format!("affine fit: {e}")))?;
        let (a, b) = (coef[0], coef[1]);
        let lo = target.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = target.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        if !(range > 0.0) {
            return Err(Error::InsufficientData("reference entropy is constant over the grid".into()));
        }
        let dev = rows.iter().zip(&target).map(|(s, r)| (a * s + b - r).abs()).fold(0.0, f64::max);
        let fit = AffineFit { a, b, max_rel_deviation: dev / range, reference_range: range };
        self.fit = Some(fit);
        Ok(fit)
    }
}

/// Money on the isentrope through `(g, m)` at goods `g_target`.
pub fn integrate_isentrope<P: PriceOracle>(oracle: &P, g: f64, m: f64, g_target: f64, opts: &ReconstructOptions) -> Result<f64> {
    let y = ode::dopri(
        |gg: f64, y: &[f64], d: &mut [f64]| {
            d[0] = -oracle.price(gg, y[0])?;
            Ok(())
        },
        g,
        &[m],
        g_target,
        opts.adaptive(),
    )
    .map_err(leaves_domain)?;
    Ok(y[0])
}

fn leaves_domain(e: Error) -> Error {
    match e {
        Error::Domain(s) => Error::Domain(format!("isentrope leaves the domain: {s}")),
        other => other,
    }
}

/// Goods on the isentrope through `(g_ref, m_start)` at money `m`.
fn goods_on_isentrope<P: PriceOracle>(oracle: &P, g_ref: f64, m_start: f64, m: f64, opts: &ReconstructOptions) -> Result<f64> {
    let y = ode::dopri(
        |mm: f64, y: &[f64], d: &mut [f64]| {
            d[0] = -1.0 / oracle.price(y[0], mm)?;
            Ok(())
        },
        m_start,
        &[g_ref],
        m,
        opts.adaptive(),
    )
    .map_err(leaves_domain)?;
    Ok(y[0])
}

/// Final money at `g_ref` after recombining `1 − t` of `(g_ref, ma)` with
/// `t` of `(g_ref, mb)`.
pub fn recombine<P: PriceOracle>(oracle: &P, g_ref: f64, ma: f64, mb: f64, t: f64, opts: &ReconstructOptions) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("fraction {t} outside [0, 1]")));
    }
    if t == 0.0 || ma == mb {
        return Ok(ma);
    }
    if t == 1.0 {
        return Ok(mb);
    }
    let s = 1.0 - t;
    // Phase 1: common money per unit size with the trader's goods balanced.
    let balance = |mbar: f64| -> Result<f64> {
        Ok(s * goods_on_isentrope(oracle, g_ref, ma, mbar, opts)? + t * goods_on_isentrope(oracle, g_ref, mb, mbar, opts)? - g_ref)
    };
    let (lo, hi) = (ma.min(mb), ma.max(mb));
    let mbar = roots::brent(|x| balance(x).unwrap_or(f64::NAN), lo, hi, 1e-15)?;
    let ga = goods_on_isentrope(oracle, g_ref, ma, mbar, opts)?;
    // Phase 2: goods move from one part to the other at market prices.
    let y = ode::dopri(
        |u: f64, y: &[f64], d: &mut [f64]| {
            let gb = (g_ref - s * u) / t;
            d[0] = -s * (oracle.price(u, y[0])? - oracle.price(gb, y[0])?);
            Ok(())
        },
        ga,
        &[mbar],
        g_ref,
        opts.adaptive(),
    )
    .map_err(leaves_domain)?;
    Ok(y[0])
}

/// Barycentric interpolant on Chebyshev–Lobatto nodes of `[0, 1]`.
struct Chebyshev {
    t: Vec<f64>,
    f: Vec<f64>,
    w: Vec<f64>,
}

impl Chebyshev {
    fn build<F: FnMut(f64) -> Result<f64>>(n: usize, mut f: F) -> Result<Self> {
        let t: Vec<f64> = (0..=n).map(|k| 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / n as f64).cos())).collect();
        let vals = t.iter().map(|x| f(*x)).collect::<Result<Vec<f64>>>()?;
        let w = (0..=n)
            .map(|k| {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                if k == 0 || k == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        Ok(Self { t, f: vals, w })
    }

    fn eval(&self, x: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for ((tk, fk), wk) in self.t.iter().zip(&self.f).zip(&self.w) {
            let d = x - tk;
            if d == 0.0 {
                return *fk;
            }
            let c = wk / d;
            num += c * fk;
            den += c;
        }
        num / den
    }

    /// Root of `eval(t) = y` in `[0, 1]`, solved in `1 + t` so the tolerance
    /// is absolute in `t`.
    fn inverse(&self, y: f64) -> Result<f64> {
        let u = roots::brent(|u| self.eval(u - 1.0) - y, 1.0, 2.0, 1e-15)?;
        Ok(u - 1.0)
    }
}

/// `Ŝ` on the grid `goods × money`; the reference states get exactly 0 and 1.
pub fn reconstruct_entropy<P: PriceOracle>(
    oracle: &P,
    reference: Reference,
    goods: &[f64],
    money: &[f64],
    opts: &ReconstructOptions,
) -> Result<ReconstructionResult> {
    if !(reference.money_low > 0.0 && reference.money_high > reference.money_low && reference.goods > 0.0) {
        return Err(Error::InvalidParameter("reference needs 0 < M₀ < M₁ and G_ref > 0".into()));
    }
    if opts.nodes < 2 {
        return Err(Error::InvalidParameter("at least 2 interpolation nodes".into()));
    }
    let g_ref = reference.goods;
    let mut landed = Vec::with_capacity(goods.len());
    for &g in goods {
        let row = money.iter().map(|&m| integrate_isentrope(oracle, g, m, g_ref, opts)).collect::<Result<Vec<f64>>>()?;
        landed.push(row);
    }
    let all = landed.iter().flatten().copied();
    let m_lo = all.clone().fold(reference.money_low, f64::min);
    let m_hi = all.fold(reference.money_high, f64::max);
    // Every landed money lies between the outer pair, so each is one
    // recombination of it; entropy is affine in the recombination fraction.
    let map = Chebyshev::build(opts.nodes, |t| recombine(oracle, g_ref, m_lo, m_hi, t, opts))?;
    let t0 = map.inverse(reference.money_low)?;
    let t1 = map.inverse(reference.money_high)?;
    let s_hat = landed
        .iter()
        .map(|row| row.iter().map(|&m| Ok((map.inverse(m)? - t0) / (t1 - t0))).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(ReconstructionResult {
        reference,
        goods: goods.to_vec(),
        money: money.to_vec(),
        s_hat,
        money_at_reference: landed,
        fit: None,
    })
}

/// A measured market price with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceSample {
    pub goods: f64,
    pub money: f64,
    pub price: f64,
    pub se: f64,
}

/// `ln μ` as a quadratic in `(ln G, ln M)`, fitted by weighted least squares
/// to measured prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSurface {
    pub coefficients: Vec<f64>,
    /// Largest `|ln μ̂ − fit|` over the samples, in units of their log SE.
    pub max_standardized_residual: f64,
}

fn features(g: f64, m: f64) -> [f64; 6] {
    let (x, y) = (g.ln(), m.ln());
    [1.0, x, y, x * x, x * y, y * y]
}

impl PriceSurface {
    pub fn fit(samples: &[PriceSample]) -> Result<Self> {
        if samples.len() < 7 {
            return Err(Error::InsufficientData(format!("{} price samples for 6 coefficients", samples.len())));
        }
        let n = samples.len();
        let w: Vec<f64> = samples.iter().map(|s| s.price / s.se.max(1e-300)).collect();
        let x = DMatrix::from_fn(n, 6, |r, c| w[r] * features(samples[r].goods, samples[r].money)[c]);
        let y = DVector::from_fn(n, |r, _| w[r] * samples[r].price.ln());
        let coef = x
            .clone()
            .svd(true, true)
            .solve(&y, 1e-12)
            .map_err(|e| Error::NonConvergence(format!("price surface fit: {e}")))?;
        let resid = (&x * &coef - &y).amax();
        Ok(Self { coefficients: coef.iter().copied().collect(), max_standardized_residual: resid })
    }
}

impl PriceOracle for PriceSurface {
    fn price(&self, g: f64, m: f64) -> Result<f64> {
        if !(g > 0.0 && m > 0.0) {
            return Err(Error::Domain(format!("G = {g}, M = {m}")));
        }
        Ok(features(g, m).iter().zip(&self.coefficients).map(|(f, c)| f * c).sum::<f64>().exp())
    }
}

/// Measures the no-flow price at every `(goods[i], money[j])` of a
/// single-good agent economy. `cfg.lo`/`cfg.hi` are scaled by `M/G` at each
/// point; the seed of point `k` is replica `k` of `cfg.seed`.
pub fn measure_price_grid(params: &CobbDouglasParams, goods: &[f64], money: &[f64], cfg: &PriceSearchConfig) -> Result<Vec<PriceSample>> {
    if params.alpha.len() != 1 {
        return Err(Error::InvalidParameter("price grid needs a single-good economy".into()));
    }
    let mut out = Vec::with_capacity(goods.len() * money.len());
    for &g in goods {
        for &m in money {
            let k = out.len() as u64;
            let econ = AgentEconomy { params: params.clone(), state: MacroState::new(m, &[g])? };
            let scale = m / g;
            let c = PriceSearchConfig { seed: replica_seed(cfg.seed, k), lo: cfg.lo * scale, hi: cfg.hi * scale, ..cfg.clone() };
            let est = find_market_price(&econ, 0, &c)?;
            out.push(PriceSample { goods: g, money: m, price: est.price, se: est.se });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cd_oracle(g: f64, m: f64) -> Result<f64> {
        Ok(1.0 * m / (2.5 * g))
    }

    #[test]
    fn reference_states_get_zero_and_one() {
        let r = Reference { goods: 2.0, money_low: 1.0, money_high: 3.0 };
        let res = reconstruct_entropy(&cd_oracle, r, &[1.0, 2.0, 4.0], &[0.5, 1.0, 3.0, 5.0], &ReconstructOptions::default()).unwrap();
        assert_eq!(res.s_hat[1][1], 0.0);
        assert_eq!(res.s_hat[1][2], 1.0);
    }

    #[test]
    fn cobb_douglas_recombination_is_log_linear() {
        // Merged money per unit size is the λ-weighted geometric mean.
        let opts = ReconstructOptions::default();
        for t in [0.1, 0.37, 0.8] {
            let m = recombine(&cd_oracle, 2.0, 1.0, 3.0, t, &opts).unwrap();
            assert!((m.ln() - t * 3f64.ln()).abs() < 1e-9, "{t}: {m}");
        }
    }

    #[test]
    fn reconstruction_is_affine_in_cobb_douglas_entropy() {
        let goods: Vec<f64> = (0..8).map(|i| 0.5 + 0.5 * i as f64).collect();
        let money: Vec<f64> = (0..8).map(|i| 0.4 + 0.6 * i as f64).collect();
        let r = Reference { goods: 1.5, money_low: 1.0, money_high: 2.0 };
        let mut res = reconstruct_entropy(&cd_oracle, r, &goods, &money, &ReconstructOptions::default()).unwrap();
        let fit = res.fit_to(|g, m| 10.0 * (1.0 * (g / 10.0).ln() + 2.5 * (m / 10.0).ln())).unwrap();
        assert!(fit.a > 0.0);
        assert!(fit.max_rel_deviation < 1e-8, "{fit:?}");
    }

    #[test]
    fn price_surface_recovers_a_power_law() {
        let samples: Vec<PriceSample> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (1.0 + i as f64, 0.5 + j as f64)))
            .map(|(g, m)| PriceSample { goods: g, money: m, price: 0.4 * m / g, se: 0.01 })
            .collect();
        let s = PriceSurface::fit(&samples).unwrap();
        assert!((s.price(2.5, 1.7).unwrap() - 0.4 * 1.7 / 2.5).abs() < 1e-10);
    }
}
