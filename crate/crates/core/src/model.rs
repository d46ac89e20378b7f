//! Concave entropy functions `S(G, M)` of a simple economy.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::MacroState;
use crate::table::{BicubicTable, CubicSpline};

/// Agent-level Cobb-Douglas parameters; the macro entropy uses the averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CobbDouglasParams {
    pub n_agents: usize,
    pub alpha: Vec<f64>,
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_alpha: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_eta: Option<Vec<f64>>,
}

impl CobbDouglasParams {
    pub fn homogeneous(n_agents: usize, alpha: &[f64], eta: f64) -> Self {
        Self { n_agents, alpha: alpha.to_vec(), eta, agent_alpha: None, agent_eta: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::InvalidParameter("n_agents must be positive".into()));
        }
        if self.alpha.is_empty() {
            return Err(Error::InvalidParameter("at least one good is required".into()));
        }
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !self.alpha.iter().all(|a| pos(*a)) || !pos(self.eta) {
            return Err(Error::InvalidParameter("alpha and eta must be positive".into()));
        }
        if let Some(aa) = &self.agent_alpha {
            if aa.len() != self.n_agents || aa.iter().any(|r| r.len() != self.alpha.len()) {
                return Err(Error::InvalidParameter("agent_alpha must be n_agents × goods".into()));
            }
            if !aa.iter().flatten().all(|a| pos(*a)) {
                return Err(Error::InvalidParameter("agent alpha must be positive".into()));
            }
        }
        if let Some(ee) = &self.agent_eta {
            if ee.len() != self.n_agents || !ee.iter().all(|e| pos(*e)) {
                return Err(Error::InvalidParameter("agent_eta must hold n_agents positive values".into()));
            }
        }
        Ok(())
    }

    pub fn agent_alpha(&self, agent: usize, good: usize) -> f64 {
        self.agent_alpha.as_ref().map_or(self.alpha[good], |a| a[agent][good])
    }

    pub fn agent_eta(&self, agent: usize) -> f64 {
        self.agent_eta.as_ref().map_or(self.eta, |e| e[agent])
    }

    /// Macro model with agent-averaged exponents.
    pub fn model(&self) -> Result<EntropyModel> {
        self.validate()?;
        let n = self.n_agents as f64;
        let alpha = (0..self.alpha.len())
            .map(|k| (0..self.n_agents).map(|i| self.agent_alpha(i, k)).sum::<f64>() / n)
            .collect();
        let eta = (0..self.n_agents).map(|i| self.agent_eta(i)).sum::<f64>() / n;
        Ok(EntropyModel::CobbDouglas { n, alpha, eta })
    }
}

/// One additive goods term of a separable entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GoodsTerm {
    Log { weight: f64 },
    Table(CubicSpline),
}

impl GoodsTerm {
    fn eval(&self, g: f64) -> Result<(f64, f64, f64)> {
        match self {
            GoodsTerm::Log { weight } => Ok((weight * g.ln(), weight / g, -weight / (g * g))),
            GoodsTerm::Table(s) => s.eval(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EntropyModel {
    /// `N[Σ α_i ln(G_i/N) + η ln(M/N)]`
    CobbDouglas { n: f64, alpha: Vec<f64>, eta: f64 },
    /// `K ln M + Σ F_i(G_i)`
    PureMoney { k: f64, goods: Vec<GoodsTerm> },
    /// `N[a ln(M/N) + Σ b_i ln(G_i/N) + c ln((M + ΣG)/N)]`
    CoupledTest { n: f64, a: f64, b: Vec<f64>, c: f64 },
    /// `N[η ln(M/N) + α ln(ΣG/N) + c ln((M + ΣG)/N)]`; goods enter only through their sum.
    PerfectSubstitutes { n: f64, eta: f64, alpha: f64, c: f64, goods: usize },
    /// `k1 ln M + k2 ln G_0 + Σ_{i≥1} F_i(G_i)`; good 0 is the second currency.
    TwoPureCurrency { k1: f64, k2: f64, goods: Vec<GoodsTerm> },
    /// Single good, `S(G, M)` from a table.
    Tabulated(BicubicTable),
}

/// First derivatives of entropy: coolness `β = ∂S/∂M` and values `ν_i = ∂S/∂G_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub beta: f64,
    pub nu: Vec<f64>,
}

impl EntropyModel {
    pub fn cobb_douglas(n: f64, alpha: &[f64], eta: f64) -> Self {
        EntropyModel::CobbDouglas { n, alpha: alpha.to_vec(), eta }
    }

    pub fn n_goods(&self) -> usize {
        match self {
            EntropyModel::CobbDouglas { alpha, .. } => alpha.len(),
            EntropyModel::PureMoney { goods, .. } => goods.len(),
            EntropyModel::CoupledTest { b, .. } => b.len(),
            EntropyModel::PerfectSubstitutes { goods, .. } => *goods,
            EntropyModel::TwoPureCurrency { goods, .. } => 1 + goods.len(),
            EntropyModel::Tabulated(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            EntropyModel::CobbDouglas { .. } => "cobb-douglas",
            EntropyModel::PureMoney { .. } => "pure-money",
            EntropyModel::CoupledTest { .. } => "coupled-test",
            EntropyModel::PerfectSubstitutes { .. } => "perfect-substitutes",
            EntropyModel::TwoPureCurrency { .. } => "two-pure-currency",
            EntropyModel::Tabulated(_) => "tabulated",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let ok = match self {
            EntropyModel::CobbDouglas { n, alpha, eta } => {
                pos(*n) && !alpha.is_empty() && alpha.iter().all(|a| pos(*a)) && pos(*eta)
            }
            EntropyModel::PureMoney { k, goods } => pos(*k) && goods_terms_valid(goods),
            EntropyModel::CoupledTest { n, a, b, c } => {
                pos(*n) && pos(*a) && !b.is_empty() && b.iter().all(|v| pos(*v)) && *c >= 0.0
            }
            EntropyModel::PerfectSubstitutes { n, eta, alpha, c, goods } => {
                pos(*n) && pos(*eta) && pos(*alpha) && *c >= 0.0 && *goods >= 1
            }
            EntropyModel::TwoPureCurrency { k1, k2, goods } => pos(*k1) && pos(*k2) && goods_terms_valid(goods),
            EntropyModel::Tabulated(t) => return t.validate(1e-9),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid {} parameters", self.kind())))
        }
    }

    fn check(&self, state: &MacroState) -> Result<()> {
        if state.dim() != self.n_goods() {
            return Err(Error::DimensionMismatch { expected: self.n_goods(), got: state.dim() });
        }
        state.check_evaluable()
    }

    pub fn entropy(&self, state: &MacroState) -> Result<f64> {
        self.check(state)?;
        let m = state.money;
        let g = &state.goods.amounts;
        Ok(match self {
            EntropyModel::CobbDouglas { n, alpha, eta } => {
                n * (alpha.iter().zip(g).map(|(a, gi)| a * (gi / n).ln()).sum::<f64>() + eta * (m / n).ln())
            }
            EntropyModel::PureMoney { k, goods } => k * m.ln() + sum_terms(goods, g)?.0,
            EntropyModel::CoupledTest { n, a, b, c } => {
                let w = m + g.iter().sum::<f64>();
                n * (a * (m / n).ln() + b.iter().zip(g).map(|(bi, gi)| bi * (gi / n).ln()).sum::<f64>() + c * (w / n).ln())
            }
            EntropyModel::PerfectSubstitutes { n, eta, alpha, c, .. } => {
                let sg = g.iter().sum::<f64>();
                n * (eta * (m / n).ln() + alpha * (sg / n).ln() + c * ((m + sg) / n).ln())
            }
            EntropyModel::TwoPureCurrency { k1, k2, goods } => k1 * m.ln() + k2 * g[0].ln() + sum_terms(goods, &g[1..])?.0,
            EntropyModel::Tabulated(t) => t.eval(g[0], m)?.s,
        })
    }

    pub fn gradient(&self, state: &MacroState) -> Result<Gradient> {
        self.check(state)?;
        let m = state.money;
        let g = &state.goods.amounts;
        Ok(match self {
            EntropyModel::CobbDouglas { n, alpha, eta } => Gradient {
                beta: n * eta / m,
                nu: alpha.iter().zip(g).map(|(a, gi)| n * a / gi).collect(),
            },
            EntropyModel::PureMoney { k, goods } => Gradient { beta: k / m, nu: sum_terms(goods, g)?.1 },
            EntropyModel::CoupledTest { n, a, b, c } => {
                let w = m + g.iter().sum::<f64>();
                Gradient {
                    beta: n * (a / m + c / w),
                    nu: b.iter().zip(g).map(|(bi, gi)| n * (bi / gi + c / w)).collect(),
                }
            }
            EntropyModel::PerfectSubstitutes { n, eta, alpha, c, goods } => {
                let sg = g.iter().sum::<f64>();
                let w = m + sg;
                Gradient { beta: n * (eta / m + c / w), nu: vec![n * (alpha / sg + c / w); *goods] }
            }
            EntropyModel::TwoPureCurrency { k1, k2, goods } => {
                let mut nu = vec![k2 / g[0]];
                nu.extend(sum_terms(goods, &g[1..])?.1);
                Gradient { beta: k1 / m, nu }
            }
            EntropyModel::Tabulated(t) => {
                let e = t.eval(g[0], m)?;
                Gradient { beta: e.s_m, nu: vec![e.s_g] }
            }
        })
    }

    /// Analytic `D²S` over the coordinates `(M, G_1, …, G_k)`.
    pub fn hessian(&self, state: &MacroState) -> Result<DMatrix<f64>> {
        self.check(state)?;
        let m = state.money;
        let g = &state.goods.amounts;
        let k = g.len();
        let mut h = DMatrix::zeros(k + 1, k + 1);
        match self {
            EntropyModel::CobbDouglas { n, alpha, eta } => {
                h[(0, 0)] = -n * eta / (m * m);
                for i in 0..k {
                    h[(i + 1, i + 1)] = -n * alpha[i] / (g[i] * g[i]);
                }
            }
            EntropyModel::PureMoney { k: kk, goods } => {
                h[(0, 0)] = -kk / (m * m);
                let d2 = sum_terms(goods, g)?.2;
                for i in 0..k {
                    h[(i + 1, i + 1)] = d2[i];
                }
            }
            EntropyModel::CoupledTest { n, a, b, c } => {
                let w = m + g.iter().sum::<f64>();
                h.fill(-n * c / (w * w));
                h[(0, 0)] -= n * a / (m * m);
                for i in 0..k {
                    h[(i + 1, i + 1)] -= n * b[i] / (g[i] * g[i]);
                }
            }
            EntropyModel::PerfectSubstitutes { n, eta, alpha, c, .. } => {
                let sg = g.iter().sum::<f64>();
                let w = m + sg;
                h.fill(-n * c / (w * w));
                h[(0, 0)] -= n * eta / (m * m);
                for i in 0..k {
                    for j in 0..k {
                        h[(i + 1, j + 1)] -= n * alpha / (sg * sg);
                    }
                }
            }
            EntropyModel::TwoPureCurrency { k1, k2, goods } => {
                h[(0, 0)] = -k1 / (m * m);
                h[(1, 1)] = -k2 / (g[0] * g[0]);
                let d2 = sum_terms(goods, &g[1..])?.2;
                for i in 1..k {
                    h[(i + 1, i + 1)] = d2[i - 1];
                }
            }
            EntropyModel::Tabulated(t) => {
                let e = t.eval(g[0], m)?;
                h[(0, 0)] = e.s_mm;
                h[(0, 1)] = e.s_mg;
                h[(1, 0)] = e.s_mg;
                h[(1, 1)] = e.s_gg;
            }
        }
        Ok(h)
    }

    /// `S(λ·state)` model for extensive kinds: agent count scales with λ.
    pub fn scaled(&self, lambda: f64) -> Option<EntropyModel> {
        match self {
            EntropyModel::CobbDouglas { n, alpha, eta } => {
                Some(EntropyModel::CobbDouglas { n: n * lambda, alpha: alpha.clone(), eta: *eta })
            }
            EntropyModel::CoupledTest { n, a, b, c } => {
                Some(EntropyModel::CoupledTest { n: n * lambda, a: *a, b: b.clone(), c: *c })
            }
            EntropyModel::PerfectSubstitutes { n, eta, alpha, c, goods } => Some(EntropyModel::PerfectSubstitutes {
                n: n * lambda,
                eta: *eta,
                alpha: *alpha,
                c: *c,
                goods: *goods,
            }),
            _ => None,
        }
    }

    /// Entropy is `K ln M + F(G)`, so `∂β/∂G = 0`.
    pub fn is_pure_money(&self) -> bool {
        matches!(
            self,
            EntropyModel::CobbDouglas { .. } | EntropyModel::PureMoney { .. } | EntropyModel::TwoPureCurrency { .. }
        )
    }
}

fn goods_terms_valid(goods: &[GoodsTerm]) -> bool {
    goods.iter().all(|t| match t {
        GoodsTerm::Log { weight } => *weight > 0.0 && weight.is_finite(),
        GoodsTerm::Table(s) => s.validate_concave_increasing(1e-9).is_ok(),
    })
}

/// Sum of terms with per-good first and second derivatives.
fn sum_terms(terms: &[GoodsTerm], g: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let mut s = 0.0;
    let mut d = Vec::with_capacity(g.len());
    let mut dd = Vec::with_capacity(g.len());
    for (t, gi) in terms.iter().zip(g) {
        let (a, b, c) = t.eval(*gi)?;
        s += a;
        d.push(b);
        dd.push(c);
    }
    Ok((s, d, dd))
}

/// Goods term as written in a config file: exactly one of the two keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodsTermSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

impl GoodsTermSpec {
    fn build(&self, base: &Path) -> Result<GoodsTerm> {
        match (&self.log_weight, &self.table) {
            (Some(w), None) => Ok(GoodsTerm::Log { weight: *w }),
            (None, Some(p)) => Ok(GoodsTerm::Table(CubicSpline::from_csv(&base.join(p))?)),
            _ => Err(Error::InvalidParameter("goods term needs exactly one of log_weight, table".into())),
        }
    }
}

/// Entropy model as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    CobbDouglas {
        n_agents: usize,
        alpha: Vec<f64>,
        eta: f64,
        #[serde(default)]
        agent_alpha: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        agent_eta: Option<Vec<f64>>,
    },
    PureMoney { k: f64, goods: Vec<GoodsTermSpec> },
    CoupledTest {
        #[serde(default = "one")]
        n_agents: f64,
        a: f64,
        b: Vec<f64>,
        c: f64,
    },
    PerfectSubstitutes {
        #[serde(default = "one")]
        n_agents: f64,
        eta: f64,
        alpha: f64,
        c: f64,
        #[serde(default = "two")]
        goods: usize,
    },
    TwoPureCurrency { k1: f64, k2: f64, goods: Vec<GoodsTermSpec> },
    Tabulated { table: String },
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

impl ModelSpec {
    /// Builds and validates the model; relative table paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<EntropyModel> {
        let model = match self {
            ModelSpec::CobbDouglas { n_agents, alpha, eta, agent_alpha, agent_eta } => CobbDouglasParams {
                n_agents: *n_agents,
                alpha: alpha.clone(),
                eta: *eta,
                agent_alpha: agent_alpha.clone(),
                agent_eta: agent_eta.clone(),
            }
            .model()?,
            ModelSpec::PureMoney { k, goods } => EntropyModel::PureMoney {
                k: *k,
                goods: goods.iter().map(|t| t.build(base)).collect::<Result<_>>()?,
            },
            ModelSpec::CoupledTest { n_agents, a, b, c } => {
                EntropyModel::CoupledTest { n: *n_agents, a: *a, b: b.clone(), c: *c }
            }
            ModelSpec::PerfectSubstitutes { n_agents, eta, alpha, c, goods } => {
                EntropyModel::PerfectSubstitutes { n: *n_agents, eta: *eta, alpha: *alpha, c: *c, goods: *goods }
            }
            ModelSpec::TwoPureCurrency { k1, k2, goods } => EntropyModel::TwoPureCurrency {
                k1: *k1,
                k2: *k2,
                goods: goods.iter().map(|t| t.build(base)).collect::<Result<_>>()?,
            },
            ModelSpec::Tabulated { table } => EntropyModel::Tabulated(BicubicTable::from_csv(&base.join(table))?),
        };
        model.validate()?;
        Ok(model)
    }

    /// Agent-level parameters of a Cobb-Douglas model.
    pub fn cobb_douglas_params(&self) -> Option<CobbDouglasParams> {
        match self {
            ModelSpec::CobbDouglas { n_agents, alpha, eta, agent_alpha, agent_eta } => Some(CobbDouglasParams {
                n_agents: *n_agents,
                alpha: alpha.clone(),
                eta: *eta,
                agent_alpha: agent_alpha.clone(),
                agent_eta: agent_eta.clone(),
            }),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(m: f64, g: &[f64]) -> MacroState {
        MacroState::new(m, g).unwrap()
    }

    #[test]
    fn cobb_douglas_unit_state_has_zero_entropy() {
        let cd = EntropyModel::cobb_douglas(10.0, &[1.0], 1.0);
        assert_eq!(cd.entropy(&st(10.0, &[10.0])).unwrap(), 0.0);
    }

    #[test]
    fn cobb_douglas_reference_value() {
        let cd = EntropyModel::cobb_douglas(10.0, &[1.0], 2.5);
        let s = cd.entropy(&st(5.0, &[20.0])).unwrap();
        // 10·(ln 2 + 2.5·ln 0.5), evaluated independently to 16 digits.
        assert!((s - (-10.397_207_708_399_179)).abs() < 1e-12, "{s}");
    }

    #[test]
    fn coupled_test_mixed_derivative() {
        let m = EntropyModel::CoupledTest { n: 1.0, a: 1.0, b: vec![1.0], c: 1.0 };
        let h = m.hessian(&st(1.0, &[1.0])).unwrap();
        assert_eq!(h[(0, 1)], -0.25);
        assert_eq!(h[(1, 0)], -0.25);
    }

    #[test]
    fn boundary_and_dimension_errors() {
        let cd = EntropyModel::cobb_douglas(10.0, &[1.0, 1.0], 1.0);
        assert!(matches!(cd.entropy(&st(1.0, &[1.0, 0.0])), Err(Error::Domain(_))));
        assert!(matches!(cd.entropy(&st(1.0, &[1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn heterogeneous_agents_average() {
        let p = CobbDouglasParams {
            n_agents: 2,
            alpha: vec![1.0],
            eta: 1.0,
            agent_alpha: Some(vec![vec![1.0], vec![3.0]]),
            agent_eta: Some(vec![2.0, 4.0]),
        };
        assert_eq!(p.model().unwrap(), EntropyModel::cobb_douglas(2.0, &[2.0], 3.0));
    }

    #[test]
    fn spec_parses_and_rejects_unknown_keys() {
        let spec: ModelSpec = toml::from_str("kind = \"cobb-douglas\"\nn_agents = 10\nalpha = [1.0]\neta = 2.5\n").unwrap();
        assert_eq!(spec.build(Path::new(".")).unwrap(), EntropyModel::cobb_douglas(10.0, &[1.0], 2.5));
        let bad = toml::from_str::<ModelSpec>("kind = \"cobb-douglas\"\nn_agents = 10\nalpha = [1.0]\neta = 2.5\nzeta = 1\n");
        assert!(bad.is_err());
        let missing = toml::from_str::<ModelSpec>("kind = \"cobb-douglas\"\nalpha = [1.0]\neta = 2.5\n");
        assert!(missing.is_err());
    }

    #[test]
    fn tabulated_model_loads_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let mut w = csv::Writer::from_path(&path).unwrap();
        w.write_record(["G", "M", "S"]).unwrap();
        for i in 0..30 {
            for j in 0..30 {
                let g = 1.0 + i as f64 * 0.1;
                let m = 0.5 + j as f64 * 0.05;
                w.write_record([g.to_string(), m.to_string(), (g.ln() + 2.0 * m.ln()).to_string()]).unwrap();
            }
        }
        w.flush().unwrap();
        let spec: ModelSpec = toml::from_str("kind = \"tabulated\"\ntable = \"s.csv\"\n").unwrap();
        let model = spec.build(dir.path()).unwrap();
        let grad = model.gradient(&st(1.0, &[2.0])).unwrap();
        assert!((grad.beta - 2.0).abs() < 1e-3);
        assert!((grad.nu[0] - 0.5).abs() < 1e-3);
        assert!(model.entropy(&st(10.0, &[2.0])).is_err());
    }
}
