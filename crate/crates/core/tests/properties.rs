use dampwave::coeffs::{CoefficientProfile, Monotonicity, RegimeClass};
use dampwave::fit::{fit_decay, FitModel};
use dampwave::rates::{l2_norm_curve, predicted_energy_rate, RateQuery, XiGrid};
use proptest::prelude::*;

fn power_exponent(kappa: f64, q: &RateQuery) -> f64 {
    let p = CoefficientProfile::power(1.0, kappa).unwrap();
    predicted_energy_rate(&p, q)
        .unwrap()
        .exponent_for(FitModel::PowerOfShifted, &p)
        .unwrap()
}

proptest! {
    #[test]
    fn power_damping_classification(kappa in -0.99f64..3.0) {
        let p = CoefficientProfile::power(1.0, kappa).unwrap();
        let class = p.classify_regime().unwrap().class;
        if kappa > 1.0 {
            prop_assert_eq!(class, RegimeClass::OverDamping);
        } else {
            prop_assert_eq!(class, RegimeClass::Effective);
        }
    }

    #[test]
    fn declared_monotonicity_holds(kappa in -0.99f64..3.0, c in 0.1f64..5.0, t in 0.0f64..1e3, dt in 1e-3f64..10.0) {
        let p = CoefficientProfile::power(c, kappa).unwrap();
        let (b0, b1) = (p.b(t).unwrap(), p.b(t + dt).unwrap());
        match p.monotonicity() {
            Monotonicity::NonDecreasing => prop_assert!(b1 >= b0),
            Monotonicity::NonIncreasing => prop_assert!(b1 <= b0),
        }
    }

    #[test]
    fn scale_invariant_rate_is_continuous_at_two(n in 1u32..5, eps in 1e-9f64..1e-6) {
        let q = RateQuery::l2(n);
        let at = |mu: f64| {
            let p = CoefficientProfile::scale_invariant(mu).unwrap();
            predicted_energy_rate(&p, &q).unwrap().exponent_for(FitModel::PowerOfShifted, &p).unwrap()
        };
        prop_assert!((at(2.0 - eps) - at(2.0 + eps)).abs() < 1e-5);
        prop_assert!((at(2.0) - at(2.0 + eps)).abs() < 1e-5);
    }

    #[test]
    fn power_rate_tends_to_wave_limit(n in 1u32..5) {
        let q = RateQuery::new(n, 1.0, f64::INFINITY, n as f64 + 1.0).unwrap();
        let e = power_exponent(-1.0 + 1e-9, &q);
        prop_assert!((e + (n as f64 + 1.0)).abs() < 1e-6, "{}", e);
    }

    #[test]
    fn fit_recovers_synthetic_power(alpha in -3.0f64..-0.05, scale in 0.1f64..10.0) {
        let times: Vec<f64> = (0..30).map(|i| 10f64.powf(1.0 + 3.0 * i as f64 / 29.0)).collect();
        let values: Vec<f64> = times.iter().map(|t| scale * (1.0 + t).powf(alpha)).collect();
        let fit = fit_decay(&times, &values, FitModel::PowerOfShifted, (10.0, 1e4), None).unwrap();
        prop_assert!(!fit.refused);
        prop_assert!((fit.exponent - alpha).abs() < 1e-9);
        prop_assert!((fit.intercept.exp() - scale).abs() < 1e-8 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn energy_curve_is_bounded_and_nonincreasing(b0 in 0.1f64..4.0) {
        let p = CoefficientProfile::constant(b0).unwrap();
        let times = [0.0, 1.0, 5.0, 20.0, 100.0];
        let grid = XiGrid { per_decade: 6, ..XiGrid::default() };
        let curve = l2_norm_curve(&p, &times, &grid, 1e-10).unwrap();
        for w in curve.values.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-8));
        }
        prop_assert!(curve.values.iter().all(|v| *v <= 1.0 + 1e-8));
    }
}
