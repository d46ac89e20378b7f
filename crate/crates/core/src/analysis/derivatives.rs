//! Derivative relations of an entropy function: compensated derivatives, the
//! flexibility matrix, Maxwell-type symmetries and the inequalities implied by
//! concavity.
//!
//! Every relation is evaluated with finite differences of the model's
//! first-derivative functions and compared with its tolerance, which is the
//! Richardson error bound of the stencils involved plus a small absolute slack.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{DiffToolkit, Estimate};
use crate::error::{Error, Result};
use crate::model::EntropyModel;
use crate::state::MacroState;
use crate::thermo;

/// Slack added to every Richardson bound; covers cancellation in sums of
/// estimates whose individual bounds are tight.
pub const RELATION_SLACK: f64 = 1e-10;

/// Scalar function of a macro state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Entropy,
    Coolness,
    Temperature,
    Value(usize),
    Price(usize),
}

impl Quantity {
    pub fn eval(self, model: &EntropyModel, state: &MacroState) -> Result<f64> {
        match self {
            Quantity::Entropy => model.entropy(state),
            Quantity::Coolness => Ok(model.gradient(state)?.beta),
            Quantity::Temperature => thermo::temperature(model, state),
            Quantity::Value(i) => value(model, state, i),
            Quantity::Price(i) => thermo::price(model, state, i),
        }
    }
}

fn value(model: &EntropyModel, state: &MacroState, good: usize) -> Result<f64> {
    model
        .gradient(state)?
        .nu
        .get(good)
        .copied()
        .ok_or(Error::DimensionMismatch { expected: model.n_goods(), got: good + 1 })
}

fn check_good(model: &EntropyModel, good: usize) -> Result<()> {
    if good >= model.n_goods() {
        return Err(Error::DimensionMismatch { expected: model.n_goods(), got: good + 1 });
    }
    Ok(())
}

/// Partial derivative of `f` along money (`coord = 0`) or good `coord − 1`.
fn partial(model: &EntropyModel, state: &MacroState, f: Quantity, coord: usize, tk: &DiffToolkit) -> Result<Estimate> {
    tk.partial(|x| f.eval(model, &state.with_coords(x)), &state.coords(), coord)
}

/// `ðf/ðG_i = ∂f/∂G_i − μ_i ∂f/∂M`: the derivative along `dG_i = 1`,
/// `dM = −μ_i` with `μ_i` frozen at `state`, so goods are bought at the
/// market price. Zero for `f = S`.
pub fn compensated_derivative(
    model: &EntropyModel,
    state: &MacroState,
    f: Quantity,
    good: usize,
    tk: &DiffToolkit,
) -> Result<Estimate> {
    check_good(model, good)?;
    let mu = thermo::price(model, state, good)?;
    let (m0, g0) = (state.money, state.good(good));
    let mut st = state.clone();
    tk.derivative(
        |g| {
            st.money = m0 - mu * (g - g0);
            st.goods.amounts[good] = g;
            f.eval(model, &st)
        },
        g0,
    )
}

/// Price responses to compensated goods changes at one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexibilityMatrix {
    pub model_kind: String,
    pub state: MacroState,
    /// `𝓜_ij = ðμ_i/ðG_j` by compensated finite differences; row `i` is the
    /// price, column `j` the good.
    pub matrix: Vec<Vec<f64>>,
    pub errors: Vec<Vec<f64>>,
    /// `𝓜_ij` from second derivatives of entropy:
    /// `β𝓜_ij = ∂²S/∂G_i∂G_j − ∂/∂M(ν_i ν_j/β)`.
    pub formula: Vec<Vec<f64>>,
    /// Largest `|matrix − formula|` in excess of the difference error bound.
    pub agreement_excess: f64,
    pub symmetry_residual: f64,
    /// Ascending eigenvalues of the symmetrized difference matrix.
    pub eigenvalues: Vec<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn flexibility_matrix(model: &EntropyModel, state: &MacroState, tk: &DiffToolkit) -> Result<FlexibilityMatrix> {
    let k = model.n_goods();
    let mut fd = DMatrix::zeros(k, k);
    let mut err = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let e = compensated_derivative(model, state, Quantity::Price(i), j, tk)?;
            fd[(i, j)] = e.value;
            err[(i, j)] = e.error;
        }
    }
    let h = model.hessian(state)?;
    let beta = model.gradient(state)?.beta;
    let mut formula = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let d = tk.derivative(
                |m| {
                    let mut st = state.clone();
                    st.money = m;
                    let g = model.gradient(&st)?;
                    Ok(g.nu[i] * g.nu[j] / g.beta)
                },
                state.money,
            )?;
            formula[(i, j)] = (h[(i + 1, j + 1)] - d.value) / beta;
            // Fold the money-derivative bound into the agreement budget.
            err[(i, j)] += d.error / beta;
        }
    }
    let mut agreement_excess = f64::NEG_INFINITY;
    for i in 0..k {
        for j in 0..k {
            agreement_excess = agreement_excess.max((fd[(i, j)] - formula[(i, j)]).abs() - err[(i, j)]);
        }
    }
    let symmetry_residual = crate::diff::max_asymmetry(&fd);
    let sym = (&fd + fd.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(FlexibilityMatrix {
        model_kind: model.kind().into(),
        state: state.clone(),
        matrix: rows(&fd),
        errors: rows(&err),
        formula: rows(&formula),
        agreement_excess,
        symmetry_residual,
        eigenvalues,
    })
}

/// Own-price flexibility of good `i` with good `j` held fixed and with the
/// price of `j` held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeChatelier {
    pub i: usize,
    pub j: usize,
    /// `ðμ_i/ðG_i` at fixed `G_j`.
    pub fixed_goods: f64,
    /// `ðμ_i/ðG_i` at fixed `μ_j`: `𝓜_ii − 𝓜_ij 𝓜_ji / 𝓜_jj`.
    pub fixed_price: f64,
}

impl LeChatelier {
    /// Smallest slack in `fixed_goods ≤ fixed_price ≤ 0`.
    pub fn margin(&self) -> f64 {
        (self.fixed_price - self.fixed_goods).min(-self.fixed_price)
    }
}

/// `None` when `𝓜_jj = 0`: the price of `j` cannot then be held fixed by
/// adjusting `G_j`.
pub fn le_chatelier(flex: &FlexibilityMatrix, i: usize, j: usize) -> Option<LeChatelier> {
    let m = &flex.matrix;
    if m[j][j] == 0.0 || i == j {
        return None;
    }
    Some(LeChatelier { i, j, fixed_goods: m[i][i], fixed_price: m[i][i] - m[i][j] * m[j][i] / m[j][j] })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    Equal,
    AtMost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// Finite-difference Hessian against the analytic one, entry-wise.
    HessianAgreement,
    /// `∂ν_i/∂G_i ≤ 0`.
    ValueDecreasing,
    /// `(∂β/∂G_i)² ≤ ∂β/∂M · ∂ν_i/∂G_i`.
    PrincipalMinor,
    /// `∂β/∂G_i = ∂ν_i/∂M`.
    Maxwell,
    /// `∂T/∂G_i|_M = μ_i/C − T ∂μ_i/∂M|_G`.
    TemperatureGoods,
    /// `∂μ_i/∂T|_G = ∂S/∂G_i|_T`.
    PriceTemperature,
    /// `∂ν_i/∂G_i|_M ≤ ∂ν_i/∂G_i|_T`.
    ValueLeChatelier,
    /// `∂ν_i/∂G_i|_T ≤ 0`.
    IsothermalValueDecreasing,
    /// `Σ δν δG ≤ 0` over money and goods for a random direction.
    ValueProbe,
    /// `Σ δμ δG ≤ 0` for a random direction at market prices.
    PriceProbe,
    /// `ðμ_i/ðG_i|_{G_j} ≤ ðμ_i/ðG_i|_{μ_j}` (i = good, j = probe index).
    LeChatelierSamuelson,
    /// `ðμ_i/ðG_i|_{μ_j} ≤ 0`.
    LeChatelierSamuelsonBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationRecord {
    pub state: usize,
    pub relation: Relation,
    pub comparison: Comparison,
    pub good: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs` for inequalities, `−|lhs − rhs|` for equalities; a
    /// relation holds when its margin is at least `−tolerance`.
    pub margin: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl RelationRecord {
    fn new(state: usize, relation: Relation, comparison: Comparison, good: Option<usize>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let margin = match comparison {
            Comparison::Equal => -(lhs - rhs).abs(),
            Comparison::AtMost => rhs - lhs,
        };
        let tolerance = tol + RELATION_SLACK;
        Self { state, relation, comparison, good, lhs, rhs, margin, tolerance, passed: margin >= -tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub model_kind: String,
    pub n_states: usize,
    pub records: Vec<RelationRecord>,
    /// `∂T/∂G_i|_M` per state and good; its sign is not constrained.
    pub temperature_goods_slope: Vec<Vec<f64>>,
}

impl DerivativeReport {
    pub fn failures(&self) -> impl Iterator<Item = &RelationRecord> {
        self.records.iter().filter(|r| !r.passed)
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.passed)
    }

    /// Smallest `margin + tolerance` for one relation kind.
    pub fn worst(&self, relation: Relation) -> Option<&RelationRecord> {
        self.records
            .iter()
            .filter(|r| r.relation == relation)
            .min_by(|a, b| (a.margin + a.tolerance).total_cmp(&(b.margin + b.tolerance)))
    }
}

/// Random relative directions per state for the `Σδ·δG` probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub probes: usize,
    pub seed: u64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self { probes: 50, seed: 0 }
    }
}

/// Evaluates every relation at every state; failures are recorded, not
/// raised. Errors only for states outside the domain.
pub fn derivative_relations_report(
    model: &EntropyModel,
    states: &[MacroState],
    probes: ProbeSettings,
    tk: &DiffToolkit,
) -> Result<DerivativeReport> {
    use rand::SeedableRng;
    if states.is_empty() {
        return Err(Error::InsufficientData("no states to probe".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(probes.seed);
    let mut records = Vec::new();
    let mut slopes = Vec::with_capacity(states.len());
    for (idx, st) in states.iter().enumerate() {
        let slope = relations_at(model, st, idx, tk, &mut records)?;
        slopes.push(slope);
        for _ in 0..probes.probes {
            probe(model, st, idx, tk, &mut rng, &mut records)?;
        }
    }
    Ok(DerivativeReport { model_kind: model.kind().into(), n_states: states.len(), records, temperature_goods_slope: slopes })
}

fn relations_at(model: &EntropyModel, st: &MacroState, idx: usize, tk: &DiffToolkit, out: &mut Vec<RelationRecord>) -> Result<Vec<f64>> {
    use Comparison::*;
    let k = model.n_goods();
    let x = st.coords();
    let (jac, jerr) = tk.jacobian(
        |y| {
            let g = model.gradient(&st.with_coords(y))?;
            let mut v = vec![g.beta];
            v.extend(g.nu);
            Ok(v)
        },
        &x,
        k + 1,
    )?;
    let analytic = model.hessian(st)?;
    let mut excess = f64::NEG_INFINITY;
    for r in 0..=k {
        for c in 0..=k {
            excess = excess.max((jac[(r, c)] - analytic[(r, c)]).abs() - jerr[(r, c)]);
        }
    }
    out.push(RelationRecord::new(idx, Relation::HessianAgreement, AtMost, None, excess, 0.0, 0.0));

    let grad = model.gradient(st)?;
    let (beta, t) = (grad.beta, 1.0 / grad.beta);
    let (b_m, e_bm) = (jac[(0, 0)], jerr[(0, 0)]);
    let dt_dm = partial(model, st, Quantity::Temperature, 0, tk)?;
    let mut slopes = Vec::with_capacity(k);
    for i in 0..k {
        let g = Some(i);
        let (n_g, e_ng) = (jac[(i + 1, i + 1)], jerr[(i + 1, i + 1)]);
        let (b_g, e_bg) = (jac[(0, i + 1)], jerr[(0, i + 1)]);
        let (n_m, e_nm) = (jac[(i + 1, 0)], jerr[(i + 1, 0)]);
        out.push(RelationRecord::new(idx, Relation::ValueDecreasing, AtMost, g, n_g, 0.0, e_ng));
        let minor_tol = 2.0 * b_g.abs() * e_bg + b_m.abs() * e_ng + n_g.abs() * e_bm;
        out.push(RelationRecord::new(idx, Relation::PrincipalMinor, AtMost, g, b_g * b_g, b_m * n_g, minor_tol));
        out.push(RelationRecord::new(idx, Relation::Maxwell, Equal, g, b_g, n_m, e_bg + e_nm));

        let mu = grad.nu[i] / beta;
        let dt_dg = partial(model, st, Quantity::Temperature, i + 1, tk)?;
        let dmu_dm = partial(model, st, Quantity::Price(i), 0, tk)?;
        // 1/C = ∂T/∂M.
        let rhs = mu * dt_dm.value - t * dmu_dm.value;
        let tol = dt_dg.error + mu.abs() * dt_dm.error + t * dmu_dm.error;
        out.push(RelationRecord::new(idx, Relation::TemperatureGoods, Equal, g, dt_dg.value, rhs, tol));
        slopes.push(dt_dg.value);

        let lhs = dmu_dm.value / dt_dm.value;
        let dm_dg_t = -dt_dg.value / dt_dm.value;
        let rhs = grad.nu[i] + beta * dm_dg_t;
        let rel_t = dt_dm.error / dt_dm.value.abs();
        let tol = dmu_dm.error / dt_dm.value.abs()
            + lhs.abs() * rel_t
            + beta * (dt_dg.error / dt_dm.value.abs() + dm_dg_t.abs() * rel_t);
        out.push(RelationRecord::new(idx, Relation::PriceTemperature, Equal, g, lhs, rhs, tol));

        let iso = n_g - n_m * b_g / b_m;
        let iso_tol = e_ng + (e_nm * b_g.abs() + n_m.abs() * e_bg) / b_m.abs() + (n_m * b_g / b_m).abs() * e_bm / b_m.abs();
        out.push(RelationRecord::new(idx, Relation::ValueLeChatelier, AtMost, g, n_g, iso, iso_tol));
        out.push(RelationRecord::new(idx, Relation::IsothermalValueDecreasing, AtMost, g, iso, 0.0, iso_tol));
    }
    if k >= 2 {
        let flex = flexibility_matrix(model, st, tk)?;
        for i in 0..k {
            for j in (0..k).filter(|&j| j != i) {
                let Some(lc) = le_chatelier(&flex, i, j) else { continue };
                let e = &flex.errors;
                let m = &flex.matrix;
                let ratio = m[i][j] * m[j][i] / m[j][j];
                let tol = e[i][i]
                    + (e[i][j] * m[j][i].abs() + m[i][j].abs() * e[j][i]) / m[j][j].abs()
                    + ratio.abs() * e[j][j] / m[j][j].abs();
                out.push(RelationRecord::new(idx, Relation::LeChatelierSamuelson, AtMost, Some(i), lc.fixed_goods, lc.fixed_price, tol));
                out.push(RelationRecord::new(idx, Relation::LeChatelierSamuelsonBound, AtMost, Some(i), lc.fixed_price, 0.0, tol));
            }
        }
    }
    Ok(slopes)
}

/// Directional derivative of `f` along `d` (absolute coordinates) at `st`.
fn directional(model: &EntropyModel, st: &MacroState, f: Quantity, d: &[f64], tk: &DiffToolkit) -> Result<Estimate> {
    let x = st.coords();
    // Parametrised about t = 1 so the step is relative to a unit scale.
    tk.derivative(
        |t| {
            let y: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + (t - 1.0) * di).collect();
            f.eval(model, &st.with_coords(&y))
        },
        1.0,
    )
}

fn probe<R: Rng + ?Sized>(
    model: &EntropyModel,
    st: &MacroState,
    idx: usize,
    tk: &DiffToolkit,
    rng: &mut R,
    out: &mut Vec<RelationRecord>,
) -> Result<()> {
    let k = model.n_goods();
    let x = st.coords();
    let d: Vec<f64> = x.iter().map(|xi| rng.random_range(-1.0..1.0) * xi).collect();
    let mut acc = 0.0;
    let mut tol = 0.0;
    for (c, dc) in d.iter().enumerate() {
        let f = if c == 0 { Quantity::Coolness } else { Quantity::Value(c - 1) };
        let e = directional(model, st, f, &d, tk)?;
        acc += e.value * dc;
        tol += e.error * dc.abs();
    }
    out.push(RelationRecord::new(idx, Relation::ValueProbe, Comparison::AtMost, None, acc, 0.0, tol));

    let mu = thermo::thermo_quantities(model, st)?.mu;
    let mut d = d;
    d[0] = -(0..k).map(|i| mu[i] * d[i + 1]).sum::<f64>();
    let (mut acc, mut tol) = (0.0, 0.0);
    for i in 0..k {
        let e = directional(model, st, Quantity::Price(i), &d, tk)?;
        acc += e.value * d[i + 1];
        tol += e.error * d[i + 1].abs();
    }
    out.push(RelationRecord::new(idx, Relation::PriceProbe, Comparison::AtMost, None, acc, 0.0, tol));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(m: f64, g: &[f64]) -> MacroState {
        MacroState::new(m, g).unwrap()
    }

    #[test]
    fn compensated_entropy_derivative_vanishes() {
        let tk = DiffToolkit::default();
        let m = EntropyModel::CoupledTest { n: 3.0, a: 1.5, b: vec![0.7, 2.0], c: 0.4 };
        for good in 0..2 {
            let e = compensated_derivative(&m, &st(2.0, &[1.3, 0.6]), Quantity::Entropy, good, &tk).unwrap();
            assert!(e.agrees_with(0.0, 1e-10), "{e:?}");
        }
    }

    #[test]
    fn cobb_douglas_compensated_price_derivative() {
        // ∂μ/∂G − μ ∂μ/∂M with μ = αM/(ηG): −(αM/(ηG²))(1 + α/η).
        let tk = DiffToolkit::default();
        let m = EntropyModel::cobb_douglas(1.0, &[1.0], 1.0);
        let e = compensated_derivative(&m, &st(1.0, &[1.0]), Quantity::Price(0), 0, &tk).unwrap();
        assert!(e.agrees_with(-2.0, 1e-10), "{e:?}");
    }

    #[test]
    fn compensated_temperature_derivative_matches_price_slope() {
        let tk = DiffToolkit::default();
        let m = EntropyModel::CoupledTest { n: 2.0, a: 1.0, b: vec![1.5], c: 0.8 };
        let s = st(1.7, &[0.9]);
        let lhs = compensated_derivative(&m, &s, Quantity::Temperature, 0, &tk).unwrap();
        let t = thermo::temperature(&m, &s).unwrap();
        let dmu_dm = partial(&m, &s, Quantity::Price(0), 0, &tk).unwrap();
        assert!(lhs.agrees_with(-t * dmu_dm.value, t * dmu_dm.error + 1e-12), "{lhs:?} vs {}", -t * dmu_dm.value);
    }

    #[test]
    fn coupled_test_maxwell_sides_equal_minus_quarter() {
        let tk = DiffToolkit::default();
        let m = EntropyModel::CoupledTest { n: 1.0, a: 1.0, b: vec![1.0], c: 1.0 };
        let r = derivative_relations_report(&m, &[st(1.0, &[1.0])], ProbeSettings { probes: 5, seed: 1 }, &tk).unwrap();
        let mx = r.records.iter().find(|x| x.relation == Relation::Maxwell).unwrap();
        assert!((mx.lhs + 0.25).abs() < 1e-9 && (mx.rhs + 0.25).abs() < 1e-9, "{mx:?}");
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn cobb_douglas_maxwell_sides_vanish() {
        let tk = DiffToolkit::default();
        let m = EntropyModel::cobb_douglas(4.0, &[1.0, 2.0], 2.5);
        let r = derivative_relations_report(&m, &[st(3.0, &[2.0, 5.0])], ProbeSettings::default(), &tk).unwrap();
        for mx in r.records.iter().filter(|x| x.relation == Relation::Maxwell) {
            assert!(mx.lhs.abs() < 1e-9 && mx.rhs.abs() < 1e-9);
        }
        assert!(r.passed());
    }

    #[test]
    fn perfect_substitutes_flexibilities_are_all_equal() {
        let tk = DiffToolkit::default();
        let m = EntropyModel::PerfectSubstitutes { n: 2.0, eta: 1.5, alpha: 1.0, c: 0.5, goods: 2 };
        let f = flexibility_matrix(&m, &st(1.2, &[0.7, 1.9]), &tk).unwrap();
        let v = f.matrix[0][0];
        for row in &f.matrix {
            for x in row {
                assert!((x - v).abs() < 1e-8, "{:?}", f.matrix);
            }
        }
        assert!(f.agreement_excess <= 1e-10);
        assert!(f.eigenvalues.iter().all(|e| *e <= 1e-8));
    }

    #[test]
    fn cobb_douglas_flexibility_matches_hand_formula() {
        // 𝓜_ij = −δ_ij μ_i/G_i − μ_i μ_j/M.
        let tk = DiffToolkit::default();
        let (m, g) = (2.0, [1.5, 4.0]);
        let model = EntropyModel::cobb_douglas(3.0, &[0.5, 2.0], 1.5);
        let mu = [0.5 * m / (1.5 * g[0]), 2.0 * m / (1.5 * g[1])];
        let f = flexibility_matrix(&model, &st(m, &g), &tk).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = -mu[i] * mu[j] / m - if i == j { mu[i] / g[i] } else { 0.0 };
                assert!((f.matrix[i][j] - want).abs() < 1e-9, "{i}{j}: {} vs {want}", f.matrix[i][j]);
            }
        }
        let lc = le_chatelier(&f, 0, 1).unwrap();
        assert!(lc.fixed_goods <= lc.fixed_price && lc.fixed_price <= 0.0);
    }

    #[test]
    fn relation_margins_have_the_documented_sign() {
        let r = RelationRecord::new(0, Relation::ValueDecreasing, Comparison::AtMost, Some(0), -1.0, 0.0, 0.0);
        assert!(r.passed && r.margin == 1.0);
        let r = RelationRecord::new(0, Relation::Maxwell, Comparison::Equal, Some(0), 1.0, 1.1, 0.0);
        assert!(!r.passed);
    }
}
