//! Derived macro-quantities: temperature, money capacity, values and prices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::diff::{DiffToolkit, Estimate};
use crate::error::{Error, Result};
use crate::model::{CobbDouglasParams, EntropyModel};
use crate::state::MacroState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoQuantities {
    pub s: f64,
    pub t: f64,
    pub beta: f64,
    /// `∂M/∂T` at fixed goods; `+∞` when `∂²S/∂M² = 0`.
    pub c: f64,
    pub nu: Vec<f64>,
    pub mu: Vec<f64>,
    /// `M − T_bath·S` when a bath temperature was supplied.
    pub f_free: Option<f64>,
}

impl ThermoQuantities {
    pub fn capacity_is_infinite(&self) -> bool {
        self.c.is_infinite()
    }
}

pub fn thermo_quantities(model: &EntropyModel, state: &MacroState) -> Result<ThermoQuantities> {
    thermo_quantities_with_bath(model, state, None)
}

pub fn thermo_quantities_with_bath(
    model: &EntropyModel,
    state: &MacroState,
    t_bath: Option<f64>,
) -> Result<ThermoQuantities> {
    let s = model.entropy(state)?;
    let grad = model.gradient(state)?;
    if !(grad.beta > 0.0) {
        return Err(Error::SingularDerivative(grad.beta));
    }
    let beta = grad.beta;
    let t = 1.0 / beta;
    let s_mm = model.hessian(state)?[(0, 0)];
    let c = if s_mm < 0.0 { beta * beta / -s_mm } else { f64::INFINITY };
    let mu = grad.nu.iter().map(|n| n / beta).collect();
    Ok(ThermoQuantities { s, t, beta, c, nu: grad.nu, mu, f_free: t_bath.map(|tb| state.money - tb * s) })
}

/// Temperature only.
pub fn temperature(model: &EntropyModel, state: &MacroState) -> Result<f64> {
    let beta = model.gradient(state)?.beta;
    if !(beta > 0.0) {
        return Err(Error::SingularDerivative(beta));
    }
    Ok(1.0 / beta)
}

/// Market price of `good`.
pub fn price(model: &EntropyModel, state: &MacroState, good: usize) -> Result<f64> {
    let g = model.gradient(state)?;
    if !(g.beta > 0.0) {
        return Err(Error::SingularDerivative(g.beta));
    }
    Ok(g.nu[good] / g.beta)
}

/// `(β, ν)` from central differences of the entropy itself.
pub fn numeric_gradient(model: &EntropyModel, state: &MacroState, tk: &DiffToolkit) -> Result<Vec<Estimate>> {
    let x = state.coords();
    (0..x.len())
        .map(|i| tk.partial(|y| model.entropy(&state.with_coords(y)), &x, i))
        .collect()
}

/// Inflation rate `(1/T) dT/dt` as the least-squares slope of `ln T` on `t`.
pub fn inflation_rate(series: &[(f64, f64)]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::InsufficientData("inflation rate needs at least two samples".into()));
    }
    if series.iter().any(|(_, t)| !(*t > 0.0)) {
        return Err(Error::Domain("temperatures must be positive".into()));
    }
    let n = series.len() as f64;
    let tm = series.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = series.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, temp) in series {
        sxy += (t - tm) * (temp.ln() - ym);
        sxx += (t - tm) * (t - tm);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all samples share one time".into()));
    }
    Ok(sxy / sxx)
}

/// `ln Z` of the stationary density's normalisation for single-good Cobb-Douglas.
pub fn partition_log_volume(params: &CobbDouglasParams, state: &MacroState) -> Result<f64> {
    params.validate()?;
    if params.alpha.len() != 1 || state.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: state.dim().max(params.alpha.len()) });
    }
    state.check_evaluable()?;
    let n = params.n_agents as f64;
    let (a, e) = (params.alpha[0], params.eta);
    let (g, m) = (state.good(0), state.money);
    let v = (n * a - 1.0) * g.ln() + n * ln_gamma(a) - ln_gamma(n * a) + (n * e - 1.0) * m.ln() + n * ln_gamma(e)
        - ln_gamma(n * e);
    if !v.is_finite() {
        return Err(Error::Domain("log-volume overflow".into()));
    }
    Ok(v)
}

/// Per-agent constant in `ln Z ≈ N[α ln(G/N) + η ln(M/N) + c]`.
pub fn partition_leading_constant(alpha: f64, eta: f64) -> f64 {
    ln_gamma(alpha) - alpha * alpha.ln() + alpha + ln_gamma(eta) - eta * eta.ln() + eta
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HessianSource {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianReport {
    pub matrix: DMatrix<f64>,
    /// Element-wise error bounds; zero for the analytic source.
    pub errors: DMatrix<f64>,
    /// Largest `|H_ij − H_ji|` before symmetrization.
    pub asymmetry: f64,
    /// Ascending eigenvalues of the symmetrized matrix.
    pub eigenvalues: Vec<f64>,
}

pub fn hessian(model: &EntropyModel, state: &MacroState, source: HessianSource, tk: &DiffToolkit) -> Result<HessianReport> {
    let (raw, errors) = match source {
        HessianSource::Analytic => {
            let h = model.hessian(state)?;
            let z = DMatrix::zeros(h.nrows(), h.ncols());
            (h, z)
        }
        HessianSource::FiniteDifference => {
            let x = state.coords();
            let n = x.len();
            tk.jacobian(
                |y| {
                    let g = model.gradient(&state.with_coords(y))?;
                    let mut v = vec![g.beta];
                    v.extend(g.nu);
                    Ok(v)
                },
                &x,
                n,
            )?
        }
    };
    let asymmetry = crate::diff::max_asymmetry(&raw);
    let matrix = (&raw + raw.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = matrix.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(HessianReport { matrix, errors, asymmetry, eigenvalues })
}
