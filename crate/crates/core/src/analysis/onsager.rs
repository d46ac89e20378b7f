//! Linear response of money and goods flows to small value differences
//! between two agent economies in contact.
//!
//! Each run starts both economies from exact stationary draws at perturbed
//! macro states, opens the contact for a short window and records the flux
//! into `B` together with the value differences `X = (β_B − β_A, ν_B − ν_A)`
//! averaged over the window's endpoints. `J ≈ L X` is fitted by least
//! squares without intercept, one row of `L` per flux component.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::micro::{replica_seed, Channel, Engine};
use crate::protocols::join::{build_engine, AgentEconomy};
use crate::stats::{mean_se, ols};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnsagerConfig {
    /// Base economies; perturbations scale `A` up and `B` down.
    pub a: AgentEconomy,
    pub b: AgentEconomy,
    pub channel: Channel,
    /// Relative size of each perturbed coordinate difference.
    #[serde(default = "rel_perturbation")]
    pub rel_perturbation: f64,
    #[serde(default = "replicates")]
    pub replicates: usize,
    /// Rate of each cross pair relative to the internal pair rate 1.
    pub cross_rate: f64,
    pub window_sweeps: u64,
    pub seed: u64,
}

fn rel_perturbation() -> f64 {
    0.05
}

fn replicates() -> usize {
    5
}

/// One design setting: relative perturbation per flux coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub perturbation: Vec<f64>,
    pub forces: Vec<Vec<f64>>,
    pub fluxes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsagerEstimate {
    /// Flux coordinates in order: `money` and/or `good{i}`.
    pub coordinates: Vec<String>,
    /// `L[r][c]`: flux `r` per unit of force `c`.
    pub l: Vec<Vec<f64>>,
    /// Standard errors of the entries of `L`.
    pub l_se: Vec<Vec<f64>>,
    /// Smallest eigenvalue of `(L + Lᵀ)/2` and its delta-method SE.
    pub min_eigenvalue: f64,
    pub min_eigenvalue_se: f64,
    /// Largest `|L_rc − L_cr|` and its SE.
    pub asymmetry: f64,
    pub asymmetry_se: f64,
    /// `X*ᵀ L X*` at the mean forces of the mixed design point.
    pub sigma: f64,
    pub sigma_se: f64,
    /// Mean of `J·X` over the mixed design runs.
    pub sigma_direct: f64,
    pub sigma_direct_se: f64,
    /// Mean flux per coordinate at zero perturbation, with SE.
    pub null_flux: Vec<(f64, f64)>,
    pub design: Vec<DesignPoint>,
    pub warnings: Vec<String>,
}

impl OnsagerEstimate {
    /// `λ_min(L_sym) ≥ −k·SE`.
    pub fn psd_at(&self, k: f64) -> bool {
        self.min_eigenvalue >= -k * self.min_eigenvalue_se
    }

    pub fn entropy_production_nonnegative_at(&self, k: f64) -> bool {
        self.sigma >= -k * self.sigma_se && self.sigma_direct >= -k * self.sigma_direct_se
    }

    pub fn symmetric_at(&self, k: f64) -> bool {
        self.asymmetry <= k * self.asymmetry_se
    }
}

/// Condition number of the design's normal matrix above which a warning is issued.
const CONDITION_WARNING: f64 = 1e8;

fn coordinates(channel: Channel, k: usize) -> Vec<Option<usize>> {
    let mut v = Vec::new();
    if channel.moves_money() {
        v.push(None);
    }
    if channel.moves_goods() {
        v.extend((0..k).map(Some));
    }
    v
}

fn forces(engine: &Engine, coords: &[Option<usize>]) -> Result<Vec<f64>> {
    let ga = engine.pop.model(0).gradient(&engine.pop.macro_state(0))?;
    let gb = engine.pop.model(1).gradient(&engine.pop.macro_state(1))?;
    Ok(coords
        .iter()
        .map(|c| match c {
            None => gb.beta - ga.beta,
            Some(i) => gb.nu[*i] - ga.nu[*i],
        })
        .collect())
}

fn holdings(engine: &Engine, coords: &[Option<usize>]) -> Vec<f64> {
    coords
        .iter()
        .map(|c| match c {
            None => engine.pop.money_total(1),
            Some(i) => engine.pop.goods_total(1, *i),
        })
        .collect()
}

fn perturbed(base: &AgentEconomy, coords: &[Option<usize>], eps: &[f64], sign: f64) -> Result<AgentEconomy> {
    let mut e = base.clone();
    for (c, x) in coords.iter().zip(eps) {
        let f = 1.0 + sign * 0.5 * x;
        match c {
            None => e.state.money *= f,
            Some(i) => e.state.goods.amounts[*i] *= f,
        }
    }
    e.state.check_evaluable()?;
    Ok(e)
}

/// `(forces, fluxes)` of one contact window.
fn run_once(cfg: &OnsagerConfig, coords: &[Option<usize>], eps: &[f64], seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = perturbed(&cfg.a, coords, eps, 1.0)?;
    let b = perturbed(&cfg.b, coords, eps, -1.0)?;
    let mut engine = build_engine(&[a, b], seed)?;
    engine.connect(0, 1, cfg.cross_rate, cfg.channel)?;
    let x0 = forces(&engine, coords)?;
    let h0 = holdings(&engine, coords);
    engine.sweeps(cfg.window_sweeps);
    let x1 = forces(&engine, coords)?;
    let h1 = holdings(&engine, coords);
    let w = cfg.window_sweeps as f64;
    let x = x0.iter().zip(&x1).map(|(p, q)| 0.5 * (p + q)).collect();
    let j = h0.iter().zip(&h1).map(|(p, q)| (q - p) / w).collect();
    Ok((x, j))
}

/// One-factor-at-a-time settings, one mixed setting with every coordinate
/// perturbed, and a null setting; `replicates` runs each.
pub fn estimate_onsager(cfg: &OnsagerConfig) -> Result<OnsagerEstimate> {
    if cfg.a.state.dim() != cfg.b.state.dim() {
        return Err(Error::DimensionMismatch { expected: cfg.a.state.dim(), got: cfg.b.state.dim() });
    }
    if cfg.replicates < 2 || cfg.window_sweeps == 0 || !(cfg.rel_perturbation > 0.0 && cfg.rel_perturbation < 1.0) {
        return Err(Error::InvalidParameter("need ≥ 2 replicates, a positive window and 0 < perturbation < 1".into()));
    }
    let coords = coordinates(cfg.channel, cfg.a.state.dim());
    let p = coords.len();
    let eps = cfg.rel_perturbation;
    let mut settings: Vec<Vec<f64>> = vec![vec![0.0; p]];
    for c in 0..p {
        let mut v = vec![0.0; p];
        v[c] = eps;
        settings.push(v);
    }
    if p > 1 {
        settings.push(vec![eps; p]);
    }
    let mut design = Vec::with_capacity(settings.len());
    let mut run = 0u64;
    for s in settings {
        let mut pt = DesignPoint { perturbation: s.clone(), forces: Vec::new(), fluxes: Vec::new() };
        for _ in 0..cfg.replicates {
            let (x, j) = run_once(cfg, &coords, &s, replica_seed(cfg.seed, run))?;
            run += 1;
            pt.forces.push(x);
            pt.fluxes.push(j);
        }
        design.push(pt);
    }

    let rows: Vec<(&Vec<f64>, &Vec<f64>)> =
        design.iter().flat_map(|d| d.forces.iter().zip(&d.fluxes)).collect();
    let n = rows.len();
    let xm = DMatrix::from_fn(n, p, |r, c| rows[r].0[c]);
    let mut warnings = Vec::new();
    let xtx = xm.transpose() * &xm;
    let sv = xtx.clone().symmetric_eigen().eigenvalues;
    let (smin, smax) = (sv.min(), sv.max());
    if !(smin > 0.0) || smax / smin > CONDITION_WARNING {
        let w = format!("design is poorly conditioned (normal-matrix condition {:.3e})", smax / smin);
        log::warn!("{w}");
        warnings.push(w);
    }
    let mut l = DMatrix::zeros(p, p);
    let mut covs = Vec::with_capacity(p);
    for r in 0..p {
        let y = DVector::from_fn(n, |i, _| rows[i].1[r]);
        let (b, cov) = ols(&xm, &y)?;
        for c in 0..p {
            l[(r, c)] = b[c];
        }
        covs.push(cov);
    }
    let l_se = (0..p).map(|r| (0..p).map(|c| covs[r][(c, c)].max(0.0).sqrt()).collect()).collect();

    // Rows of L are fitted independently, so Var(vᵀ L u) = Σ_r v_r² uᵀ Cov_r u.
    let quad_var = |v: &[f64], u: &DVector<f64>| -> f64 { (0..p).map(|r| v[r] * v[r] * (u.transpose() * &covs[r] * u)[(0, 0)]).sum() };

    let sym = (&l + l.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let imin = (0..p).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap_or(0);
    let v: DVector<f64> = eig.eigenvectors.column(imin).into_owned();
    let min_eigenvalue = eig.eigenvalues[imin];
    let min_eigenvalue_se = quad_var(v.as_slice(), &v).sqrt();

    let (mut asymmetry, mut asymmetry_se) = (0.0, 0.0);
    for r in 0..p {
        for c in r + 1..p {
            let d = (l[(r, c)] - l[(c, r)]).abs();
            if d >= asymmetry {
                asymmetry = d;
                asymmetry_se = (covs[r][(c, c)] + covs[c][(r, r)]).sqrt();
            }
        }
    }

    let last = design.last().expect("design has the null point");
    let xstar = DVector::from_fn(p, |c, _| last.forces.iter().map(|f| f[c]).sum::<f64>() / last.forces.len() as f64);
    let sigma = (xstar.transpose() * &l * &xstar)[(0, 0)];
    let sigma_se = quad_var(xstar.as_slice(), &xstar).sqrt();
    let direct: Vec<f64> =
        last.forces.iter().zip(&last.fluxes).map(|(x, j)| x.iter().zip(j).map(|(a, b)| a * b).sum()).collect();
    let (sigma_direct, sigma_direct_se) = mean_se(&direct);

    let null = &design[0];
    let null_flux = (0..p).map(|c| mean_se(&null.fluxes.iter().map(|j| j[c]).collect::<Vec<_>>())).collect();

    Ok(OnsagerEstimate {
        coordinates: coords.iter().map(|c| c.map_or("money".to_string(), |i| format!("good{i}"))).collect(),
        l: (0..p).map(|r| (0..p).map(|c| l[(r, c)]).collect()).collect(),
        l_se,
        min_eigenvalue,
        min_eigenvalue_se,
        asymmetry,
        asymmetry_se,
        sigma,
        sigma_se,
        sigma_direct,
        sigma_direct_se,
        null_flux,
        design,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CobbDouglasParams;
    use crate::state::MacroState;

    fn cfg(channel: Channel) -> OnsagerConfig {
        let e = AgentEconomy { params: CobbDouglasParams::homogeneous(2000, &[1.0], 2.5), state: MacroState::new(2000.0, &[2000.0]).unwrap() };
        OnsagerConfig { a: e.clone(), b: e, channel, rel_perturbation: 0.05, replicates: 5, cross_rate: 0.05, window_sweeps: 2, seed: 3 }
    }

    #[test]
    fn money_flows_toward_the_cooler_economy() {
        let est = estimate_onsager(&cfg(Channel::Money)).unwrap();
        assert_eq!(est.coordinates, vec!["money"]);
        assert!(est.l[0][0] > 0.0, "{est:?}");
        assert!(est.psd_at(2.0));
        let (m, se) = est.null_flux[0];
        assert!(m.abs() <= 4.0 * se, "{m} ± {se}");
    }

    #[test]
    fn design_includes_a_mixed_setting_for_two_coordinates() {
        let est = estimate_onsager(&OnsagerConfig { replicates: 3, ..cfg(Channel::Full) }).unwrap();
        assert_eq!(est.design.len(), 4);
        assert_eq!(est.l.len(), 2);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(estimate_onsager(&OnsagerConfig { replicates: 1, ..cfg(Channel::Money) }).is_err());
    }
}
