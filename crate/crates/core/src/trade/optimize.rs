//! Damped Newton ascent for sums of concave entropies composed with affine
//! maps, and the allocation problems built on it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::allocation::Allocation;
use crate::error::{Error, Result};
use crate::model::EntropyModel;
use crate::state::MacroState;

/// One term `w · S(A z + b)` of a concave objective.
pub(crate) struct Part<'a> {
    pub model: &'a EntropyModel,
    pub weight: f64,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// `f(z) = Σ w_e S_e(A_e z + b_e) + c·z`.
pub(crate) struct Objective<'a> {
    pub parts: Vec<Part<'a>>,
    pub linear: DVector<f64>,
}

pub(crate) struct Optimum {
    pub z: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
}

impl Objective<'_> {
    pub fn state(&self, i: usize, z: &DVector<f64>) -> Result<MacroState> {
        let p = &self.parts[i];
        let x = &p.a * z + &p.b;
        let st = MacroState::from_coords(x.as_slice())?;
        st.check_evaluable()?;
        Ok(st)
    }

    pub fn value(&self, z: &DVector<f64>) -> Result<f64> {
        let mut f = self.linear.dot(z);
        for (i, p) in self.parts.iter().enumerate() {
            f += p.weight * p.model.entropy(&self.state(i, z)?)?;
        }
        Ok(f)
    }

    fn derivatives(&self, z: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let d = z.len();
        let mut g = self.linear.clone();
        let mut h = DMatrix::zeros(d, d);
        for (i, p) in self.parts.iter().enumerate() {
            let st = self.state(i, z)?;
            let grad = p.model.gradient(&st)?;
            let mut gs = Vec::with_capacity(1 + grad.nu.len());
            gs.push(grad.beta);
            gs.extend(grad.nu);
            let gs = DVector::from_vec(gs);
            g += p.weight * p.a.transpose() * gs;
            h += p.weight * p.a.transpose() * p.model.hessian(&st)? * &p.a;
        }
        Ok((g, h))
    }
}

/// Newton direction `−H⁻¹ g` for negative (semi)definite `H`; flat
/// directions are regularised.
fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Result<DVector<f64>> {
    let neg = -h;
    let scale = neg.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut shift = 0.0;
    for _ in 0..40 {
        let m = &neg + DMatrix::identity(g.len(), g.len()) * shift;
        if let Some(ch) = m.cholesky() {
            return Ok(ch.solve(g));
        }
        shift = if shift == 0.0 { 1e-14 * scale } else { shift * 10.0 };
    }
    Err(Error::NonConvergence("Hessian is not negative semi-definite".into()))
}

/// Maximises a concave objective from an evaluable start.
pub(crate) fn maximize(obj: &Objective, z0: DVector<f64>, max_iter: usize) -> Result<Optimum> {
    let mut z = z0;
    let mut f = obj.value(&z)?;
    for it in 0..max_iter {
        let (g, h) = obj.derivatives(&z)?;
        let d = newton_direction(&g, &h)?;
        let decrement = g.dot(&d);
        let zscale = z.amax().max(1.0);
        if d.amax() <= 1e-14 * zscale || decrement <= 0.0 {
            return Ok(Optimum { z, value: f, iterations: it });
        }
        // Near the optimum take full steps: roundoff in f hides the
        // Armijo gain long before the coordinates converge.
        let near = decrement < 1e-8 * (1.0 + f.abs());
        let mut t = 1.0;
        loop {
            let trial = &z + &d * t;
            match obj.value(&trial) {
                Ok(ft) if near || ft >= f + 1e-4 * t * decrement => {
                    z = trial;
                    f = ft;
                    break;
                }
                Ok(_) | Err(Error::Domain(_)) => t *= 0.5,
                Err(e) => return Err(e),
            }
            if t < 1e-20 {
                return Err(Error::NonConvergence(format!("line search stalled after {it} Newton steps")));
            }
        }
    }
    Err(Error::NonConvergence(format!("no convergence in {max_iter} Newton steps")))
}

/// Maximum of a weighted total entropy over the conservation manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntropy {
    pub allocation: Allocation,
    pub total_entropy: f64,
    /// Largest relative spread of the weighted values `w_e ∂S_e/∂x`
    /// across economies, per coordinate.
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Some coordinate sits within the interior margin of zero.
    pub boundary: bool,
}

/// Interior margin, relative to the conserved total of a coordinate.
pub const INTERIOR_MARGIN: f64 = 1e-9;

fn conservation_objective<'a>(models: &'a [EntropyModel], weights: &[f64], totals: &[f64]) -> Objective<'a> {
    let n = models.len();
    let c = totals.len();
    let d = (n - 1) * c;
    let mut parts = Vec::with_capacity(n);
    for (e, model) in models.iter().enumerate() {
        let mut a = DMatrix::zeros(c, d);
        let mut b = DVector::zeros(c);
        if e + 1 < n {
            for j in 0..c {
                a[(j, e * c + j)] = 1.0;
            }
        } else {
            for f in 0..n - 1 {
                for j in 0..c {
                    a[(j, f * c + j)] = -1.0;
                }
            }
            b.copy_from_slice(totals);
        }
        parts.push(Part { model, weight: weights[e], a, b });
    }
    Objective { parts, linear: DVector::zeros(d) }
}

/// Relative spread of `w_e ∇S_e` across economies.
pub fn kkt_residual(models: &[EntropyModel], weights: &[f64], states: &[MacroState]) -> Result<f64> {
    let mut grads = Vec::with_capacity(models.len());
    for ((m, s), w) in models.iter().zip(states).zip(weights) {
        let g = m.gradient(s)?;
        let mut v = vec![w * g.beta];
        v.extend(g.nu.iter().map(|x| w * x));
        grads.push(v);
    }
    let mut worst = 0.0f64;
    for c in 0..grads[0].len() {
        let (lo, hi) = grads.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g[c]), hi.max(g[c])));
        worst = worst.max((hi - lo) / hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Maximises `Σ w_e S_e` subject to fixed totals of money and each good.
/// `start` (an allocation with the same totals) seeds the iteration.
pub fn weighted_max_entropy(
    models: &[EntropyModel],
    weights: &[f64],
    money_total: f64,
    goods_total: &[f64],
    start: Option<&Allocation>,
) -> Result<MaxEntropy> {
    let n = models.len();
    if n < 2 || weights.len() != n {
        return Err(Error::InvalidParameter("need two or more economies with one weight each".into()));
    }
    if models.iter().any(|m| m.n_goods() != goods_total.len()) {
        return Err(Error::DimensionMismatch { expected: goods_total.len(), got: models[0].n_goods() });
    }
    let mut totals = vec![money_total];
    totals.extend_from_slice(goods_total);
    if totals.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter("totals must be strictly positive".into()));
    }
    let c = totals.len();
    let obj = conservation_objective(models, weights, &totals);
    let z0: Vec<f64> = match start {
        Some(a) => a.states[..n - 1].iter().flat_map(|s| s.coords()).collect(),
        None => (0..n - 1).flat_map(|_| totals.iter().map(|t| t / n as f64)).collect(),
    };
    let opt = maximize(&obj, DVector::from_vec(z0), 200)?;
    let states = (0..n).map(|e| obj.state(e, &opt.z)).collect::<Result<Vec<_>>>()?;
    let boundary = states.iter().any(|s| s.coords().iter().zip(&totals).any(|(x, t)| *x < INTERIOR_MARGIN * t));
    let kkt = kkt_residual(models, weights, &states)?;
    let total_entropy = models.iter().zip(&states).map(|(m, s)| m.entropy(s)).sum::<Result<f64>>()?;
    debug_assert_eq!(states[0].coords().len(), c);
    Ok(MaxEntropy { allocation: Allocation::new(states)?, total_entropy, kkt_residual: kkt, iterations: opt.iterations, boundary })
}

/// Unweighted maximum-entropy allocation.
pub fn max_entropy_allocation(models: &[EntropyModel], money_total: f64, goods_total: &[f64]) -> Result<MaxEntropy> {
    let start = cobb_douglas_max_entropy(models, money_total, goods_total).ok();
    weighted_max_entropy(models, &vec![1.0; models.len()], money_total, goods_total, start.as_ref())
}

/// Closed form for Cobb-Douglas economies: `G_ek = p_ek G_k` with
/// `p_ek ∝ α_ek N_e` and `M_e ∝ η_e N_e` (common temperature).
pub fn cobb_douglas_max_entropy(models: &[EntropyModel], money_total: f64, goods_total: &[f64]) -> Result<Allocation> {
    let params = models.iter().map(cd_params).collect::<Result<Vec<_>>>()?;
    let q: f64 = params.iter().map(|(n, _, eta)| n * eta).sum();
    let states = params
        .iter()
        .map(|(n, alpha, eta)| {
            let goods: Vec<f64> = goods_total
                .iter()
                .enumerate()
                .map(|(k, g)| {
                    let w: f64 = params.iter().map(|(nf, af, _)| nf * af[k]).sum();
                    n * alpha[k] / w * g
                })
                .collect();
            MacroState::new(n * eta / q * money_total, &goods)
        })
        .collect::<Result<Vec<_>>>()?;
    Allocation::new(states)
}

pub(crate) fn cd_params(model: &EntropyModel) -> Result<(f64, Vec<f64>, f64)> {
    match model {
        EntropyModel::CobbDouglas { n, alpha, eta } => Ok((*n, alpha.clone(), *eta)),
        other => Err(Error::InvalidParameter(format!("closed form needs Cobb-Douglas economies, got {}", other.kind()))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub allocation: Allocation,
    /// Largest relative price gap `|μ_A − μ_B| / μ` over goods.
    pub price_gap: f64,
}

/// Samples the Pareto set (equal market prices) of two economies with fixed
/// totals. Single-good Cobb-Douglas pairs use the closed-form curve
/// parametrised by `M_A`; other pairs trace weighted entropy maxima.
pub fn pareto_set(
    a: &EntropyModel,
    b: &EntropyModel,
    money_total: f64,
    goods_total: &[f64],
    n_points: usize,
) -> Result<Vec<ParetoPoint>> {
    let models = [a.clone(), b.clone()];
    let mut out = Vec::with_capacity(n_points);
    if let (Ok((_, aa, ea)), Ok((_, ab, eb)), 1) = (cd_params(a), cd_params(b), goods_total.len()) {
        // α_A M_A / (η_A G_A) = α_B M_B / (η_B G_B), solved for G_A.
        let (g, m) = (goods_total[0], money_total);
        for i in 1..=n_points {
            let ma = m * i as f64 / (n_points + 1) as f64;
            let ga = aa[0] * eb * ma * g / (aa[0] * eb * ma + ab[0] * ea * (m - ma));
            let alloc = Allocation::new(vec![MacroState::new(ma, &[ga])?, MacroState::new(m - ma, &[g - ga])?])?;
            out.push(ParetoPoint { price_gap: price_gap(&models, &alloc)?, allocation: alloc });
        }
        return Ok(out);
    }
    let mut prev: Option<Allocation> = None;
    for i in 1..=n_points {
        // Weight ratio w_A/w_B spans six decades around 1.
        let s = -6.0 + 12.0 * i as f64 / (n_points + 1) as f64;
        let w = [s.exp(), 1.0];
        match weighted_max_entropy(&models, &w, money_total, goods_total, prev.as_ref()) {
            Ok(opt) if !opt.boundary => {
                let gap = price_gap(&models, &opt.allocation)?;
                prev = Some(opt.allocation.clone());
                out.push(ParetoPoint { allocation: opt.allocation, price_gap: gap });
            }
            Ok(_) => log::warn!("pareto sample {i} hit the domain boundary"),
            Err(e) => log::warn!("pareto sample {i} failed: {e}"),
        }
    }
    Ok(out)
}

fn price_gap(models: &[EntropyModel], alloc: &Allocation) -> Result<f64> {
    let ga = models[0].gradient(&alloc.states[0])?;
    let gb = models[1].gradient(&alloc.states[1])?;
    Ok(ga
        .nu
        .iter()
        .zip(&gb.nu)
        .map(|(na, nb)| {
            let (pa, pb) = (na / ga.beta, nb / gb.beta);
            (pa - pb).abs() / pa.max(pb)
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cd(n: f64, alpha: &[f64], eta: f64) -> EntropyModel {
        EntropyModel::cobb_douglas(n, alpha, eta)
    }

    #[test]
    fn identical_economies_split_evenly() {
        let m = cd(10.0, &[1.0, 2.0], 1.5);
        let opt = max_entropy_allocation(&[m.clone(), m], 4.0, &[6.0, 8.0]).unwrap();
        for c in opt.allocation.states[0].coords().iter().zip(opt.allocation.states[1].coords()) {
            assert!((c.0 - c.1).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_temperature_split_of_the_edgeworth_pair() {
        let opt = max_entropy_allocation(&[cd(10.0, &[1.0], 2.5), cd(20.0, &[1.0], 1.5)], 1.0, &[30.0]).unwrap();
        assert!((opt.allocation.states[0].money - 5.0 / 11.0).abs() < 1e-12);
        assert!(opt.kkt_residual < 1e-8);
    }

    #[test]
    fn newton_matches_the_closed_form_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let k = rng.random_range(1..=3);
            let mk = |rng: &mut ChaCha8Rng| {
                let alpha: Vec<f64> = (0..k).map(|_| rng.random_range(0.3..3.0)).collect();
                cd(rng.random_range(2.0..50.0), &alpha, rng.random_range(0.3..3.0))
            };
            let models = [mk(&mut rng), mk(&mut rng)];
            let m = rng.random_range(0.1..10.0);
            let g: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..50.0)).collect();
            let closed = cobb_douglas_max_entropy(&models, m, &g).unwrap();
            // Start far from the optimum so Newton does the work.
            let start = Allocation::new(vec![
                MacroState::new(0.9 * m, &g.iter().map(|x| 0.1 * x).collect::<Vec<_>>()).unwrap(),
                MacroState::new(0.1 * m, &g.iter().map(|x| 0.9 * x).collect::<Vec<_>>()).unwrap(),
            ])
            .unwrap();
            let opt = weighted_max_entropy(&models, &[1.0, 1.0], m, &g, Some(&start)).unwrap();
            for (s, c) in opt.allocation.states.iter().zip(&closed.states) {
                for (x, y) in s.coords().iter().zip(c.coords()) {
                    assert!((x - y).abs() <= 1e-8 * y, "{x} vs {y}");
                }
            }
            assert!(opt.kkt_residual < 1e-8);
        }
    }

    #[test]
    fn coupled_models_satisfy_first_order_conditions() {
        let models = [
            EntropyModel::CoupledTest { n: 5.0, a: 1.0, b: vec![1.0, 0.5], c: 0.7 },
            cd(8.0, &[1.0, 1.0], 2.0),
            EntropyModel::CoupledTest { n: 3.0, a: 2.0, b: vec![0.5, 2.0], c: 0.3 },
        ];
        let opt = max_entropy_allocation(&models, 3.0, &[5.0, 7.0]).unwrap();
        assert!(opt.kkt_residual < 1e-8, "{}", opt.kkt_residual);
        assert!(!opt.boundary);
    }

    #[test]
    fn closed_form_pareto_curve_has_equal_prices() {
        let pts = pareto_set(&cd(10.0, &[1.0], 2.5), &cd(20.0, &[1.0], 1.5), 1.0, &[30.0], 25).unwrap();
        assert_eq!(pts.len(), 25);
        assert!(pts.iter().all(|p| p.price_gap < 1e-12));
    }

    #[test]
    fn weighted_pareto_samples_have_equal_prices() {
        let a = EntropyModel::CoupledTest { n: 5.0, a: 1.0, b: vec![1.0], c: 0.5 };
        let pts = pareto_set(&a, &cd(10.0, &[1.0], 1.0), 2.0, &[3.0], 15).unwrap();
        assert!(pts.len() >= 10);
        assert!(pts.iter().all(|p| p.price_gap < 1e-9), "{:?}", pts.iter().map(|p| p.price_gap).collect::<Vec<_>>());
    }
}
