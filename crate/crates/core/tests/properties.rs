use proptest::prelude::*;

use thermacro::analysis::{reconstruct_entropy, ReconstructOptions, Reference};
use thermacro::diff::DiffToolkit;
use thermacro::model::{EntropyModel, GoodsTerm};
use thermacro::protocols::{join_all, Economy};
use thermacro::state::MacroState;
use thermacro::thermo::{self, HessianSource};

fn models() -> impl Strategy<Value = EntropyModel> {
    prop_oneof![
        (1.0..50.0f64, 0.2..3.0f64, 0.2..3.0f64, 0.2..3.0f64, 0.3..4.0f64)
            .prop_map(|(n, a0, a1, eta, _)| EntropyModel::cobb_douglas(n, &[a0, a1], eta)),
        (1.0..50.0f64, 0.2..3.0f64, 0.2..3.0f64, 0.2..3.0f64, 0.1..2.0f64)
            .prop_map(|(n, a, b0, b1, c)| EntropyModel::CoupledTest { n, a, b: vec![b0, b1], c }),
        (1.0..50.0f64, 0.2..3.0f64, 0.2..3.0f64, 0.1..2.0f64, 0.0..1.0f64)
            .prop_map(|(n, eta, alpha, c, _)| EntropyModel::PerfectSubstitutes { n, eta, alpha, c, goods: 2 }),
    ]
}

fn states() -> impl Strategy<Value = MacroState> {
    (0.05..50.0f64, 0.05..50.0f64, 0.05..50.0f64).prop_map(|(m, g0, g1)| MacroState::new(m, &[g0, g1]).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn entropy_is_extensive(model in models(), state in states(), lambda in 0.01..100.0f64) {
        let big = model.scaled(lambda).unwrap();
        let lhs = big.entropy(&state.scaled(lambda)).unwrap();
        let rhs = lambda * model.entropy(&state).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * rhs.abs().max(lambda), "{lhs} vs {rhs}");
    }

    #[test]
    fn intensive_quantities_are_scale_free(model in models(), state in states(), lambda in 0.01..100.0f64) {
        let q = thermo::thermo_quantities(&model, &state).unwrap();
        let r = thermo::thermo_quantities(&model.scaled(lambda).unwrap(), &state.scaled(lambda)).unwrap();
        prop_assert!(rel(r.t, q.t) < 1e-12);
        for (a, b) in r.mu.iter().zip(&q.mu) {
            prop_assert!(rel(*a, *b) < 1e-12);
        }
    }

    #[test]
    fn coolness_and_values_are_consistent(model in models(), state in states()) {
        let q = thermo::thermo_quantities(&model, &state).unwrap();
        prop_assert!((q.beta * q.t - 1.0).abs() < 1e-14);
        for (mu, nu) in q.mu.iter().zip(&q.nu) {
            prop_assert!(rel(mu * q.beta, *nu) < 1e-14);
        }
    }

    #[test]
    fn entropy_is_concave(model in models(), state in states()) {
        let h = thermo::hessian(&model, &state, HessianSource::Analytic, &DiffToolkit::default()).unwrap();
        let scale = h.matrix.abs().max();
        prop_assert!(h.eigenvalues.iter().all(|e| *e <= 1e-8 * scale), "{:?}", h.eigenvalues);
    }

    #[test]
    fn pure_money_coolness_ignores_goods(
        k in 0.5..50.0f64, w0 in 0.1..5.0f64, w1 in 0.1..5.0f64, m in 0.1..50.0f64, g0 in 0.1..50.0f64, g1 in 0.1..50.0f64, dg in 0.1..10.0f64,
    ) {
        let model = EntropyModel::PureMoney { k, goods: vec![GoodsTerm::Log { weight: w0 }, GoodsTerm::Log { weight: w1 }] };
        let s = MacroState::new(m, &[g0, g1]).unwrap();
        let h = model.hessian(&s).unwrap();
        prop_assert_eq!(h[(0, 1)], 0.0);
        prop_assert_eq!(h[(0, 2)], 0.0);
        let moved = MacroState::new(m, &[g0 + dg, g1]).unwrap();
        prop_assert_eq!(thermo::temperature(&model, &s).unwrap(), thermo::temperature(&model, &moved).unwrap());
    }

    #[test]
    fn joining_conserves_money_and_never_lowers_entropy(
        params in prop::collection::vec((1.0..30.0f64, 0.3..3.0f64, 0.3..3.0f64, 0.1..10.0f64, 0.1..30.0f64), 2..5),
    ) {
        let econs: Vec<Economy> = params
            .iter()
            .map(|&(n, a, eta, m, g)| Economy::new("e", EntropyModel::cobb_douglas(n, &[a], eta), MacroState::new(m, &[g]).unwrap()).unwrap())
            .collect();
        let out = join_all(&econs).unwrap();
        let before: f64 = econs.iter().map(|e| e.state.money).sum();
        let after: f64 = out.economies.iter().map(|e| e.state.money).sum();
        prop_assert!(rel(after, before) < 1e-14, "{before} -> {after}");
        prop_assert!(out.entropy_after >= out.entropy_before - 1e-12 * out.entropy_before.abs().max(1.0));
        for e in &out.economies {
            prop_assert!(rel(e.temperature().unwrap(), out.temperature) < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Prices fix entropy only up to `aS + b`: a different reference pair
    /// gives an affine image of the same reconstruction, and fitting to an
    /// affine image of the true entropy leaves the relative deviation alone.
    #[test]
    fn reconstruction_is_affine_invariant(
        n in 5.0..40.0f64, alpha in 0.3..3.0f64, eta in 0.3..3.0f64, c in 0.1..10.0f64, d in -50.0..50.0f64,
        m0 in 5.0..15.0f64, dm in 5.0..20.0f64,
    ) {
        let model = EntropyModel::cobb_douglas(n, &[alpha], eta);
        let oracle = |g: f64, m: f64| thermo::price(&model, &MacroState::new(m, &[g])?, 0);
        let exact = |g: f64, m: f64| model.entropy(&MacroState::new(m, &[g]).unwrap()).unwrap();
        let goods = [10.0, 20.0, 30.0, 40.0];
        let money = [5.0, 15.0, 25.0, 35.0];
        let opts = ReconstructOptions::default();
        let mut r1 = reconstruct_entropy(&oracle, Reference { goods: 25.0, money_low: 10.0, money_high: 30.0 }, &goods, &money, &opts).unwrap();
        let r2 = reconstruct_entropy(&oracle, Reference { goods: 15.0, money_low: m0, money_high: m0 + dm }, &goods, &money, &opts).unwrap();
        let s1: Vec<f64> = r1.s_hat.iter().flatten().copied().collect();
        let s2: Vec<f64> = r2.s_hat.iter().flatten().copied().collect();
        // Ŝ₂ = p Ŝ₁ + q from two grid points, checked on all of them.
        let p = (s2[15] - s2[0]) / (s1[15] - s1[0]);
        let q = s2[0] - p * s1[0];
        for (a, b) in s1.iter().zip(&s2) {
            prop_assert!((p * a + q - b).abs() < 1e-6 * (1.0 + b.abs()), "{a} {b} {p} {q}");
        }
        let f1 = r1.fit_to(exact).unwrap();
        let f2 = r1.fit_to(|g, m| c * exact(g, m) + d).unwrap();
        prop_assert!(rel(f2.a, c * f1.a) < 1e-8);
        prop_assert!((f2.b - (c * f1.b + d)).abs() < 1e-8 * (1.0 + f2.b.abs()));
        prop_assert!((f2.max_rel_deviation - f1.max_rel_deviation).abs() < 1e-9);
        prop_assert!(f1.max_rel_deviation < 1e-6);
    }
}
