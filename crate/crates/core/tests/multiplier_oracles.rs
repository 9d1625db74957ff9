use dampwave::coeffs::CoefficientProfile;
use dampwave::multiplier::{
    constant_residual, dissipation_residual, energy_real_equivalent, free_propagator, oracle_constant, oracle_scale_invariant,
    solve_fundamental, FrequencyPoint,
};
use num_complex::Complex64;

fn grid(t_max: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
}

#[test]
fn scale_invariant_solver_matches_bessel_oracle() {
    let tol = 1e-12;
    let ts = grid(100.0, 50);
    for &mu in &[0.0, 0.5, 1.0, 2.0, 3.0, 10.0] {
        let p = CoefficientProfile::scale_invariant(mu).unwrap();
        for &xi in &[0.1, 0.3, 1.0, 3.0, 10.0] {
            let pair = solve_fundamental(&p, FrequencyPoint::new(xi).unwrap(), 0.0, &ts, tol).unwrap();
            let mut worst: f64 = 0.0;
            for s in &pair.samples {
                let o = oracle_scale_invariant(mu, xi, s.t).unwrap();
                worst = worst.max(s.values.distance(&o));
            }
            assert!(worst <= 1e-8, "mu={mu} xi={xi}: {worst:e}");
        }
    }
}

#[test]
fn constant_solver_matches_root_oracle() {
    let tol = 1e-12;
    let ts = grid(60.0, 60);
    for &b0 in &[0.0, 0.3, 1.0, 4.0, 50.0] {
        let p = CoefficientProfile::constant(b0).unwrap();
        for &xi in &[0.0, 0.3, 0.5 * b0, 1.0, 7.0] {
            let pair = solve_fundamental(&p, FrequencyPoint::new(xi).unwrap(), 0.0, &ts, tol).unwrap();
            for s in &pair.samples {
                let o = oracle_constant(b0, xi, s.t);
                assert!(s.values.distance(&o) <= 1e-8, "b0={b0} xi={xi} t={}", s.t);
            }
        }
    }
}

#[test]
fn wronskian_identity_across_profiles() {
    let tol = 1e-10;
    let profiles = [
        CoefficientProfile::zero(),
        CoefficientProfile::constant(1.0).unwrap(),
        CoefficientProfile::scale_invariant(0.5).unwrap(),
        CoefficientProfile::scale_invariant(10.0).unwrap(),
        CoefficientProfile::power(1.0, 0.5).unwrap(),
        CoefficientProfile::power(1.0, 2.0).unwrap(),
        CoefficientProfile::iterated_log(1.0, 2).unwrap(),
        CoefficientProfile::integrable(1.0, 2.0).unwrap(),
    ];
    let ts: Vec<f64> = (0..=30).map(|i| 10f64.powf(i as f64 / 10.0) - 1.0).collect();
    let mut checked = 0;
    for p in &profiles {
        for &xi in &[1e-3, 0.1, 1.0, 10.0, 100.0] {
            let pair = solve_fundamental(p, FrequencyPoint::new(xi).unwrap(), 0.0, &ts, tol).unwrap();
            for s in &pair.samples {
                // past ∫b ≈ 25 det M is below the resolution of the entries
                if p.primitive(s.t, 1e-12).unwrap() > 25.0 {
                    continue;
                }
                checked += 1;
                assert!(s.wronskian_rounding_floor <= 1e-3, "{} xi={xi} t={}", p.label(), s.t);
                assert!(
                    s.wronskian_residual <= 100.0 * tol + s.wronskian_rounding_floor,
                    "{} xi={xi} t={}: {:e} (floor {:e})",
                    p.label(),
                    s.t,
                    s.wronskian_residual,
                    s.wronskian_rounding_floor
                );
            }
        }
    }
    assert!(checked > 800, "{checked}");
}

#[test]
fn energy_norm_is_nonincreasing_and_bounded() {
    let p = CoefficientProfile::constant(1.0).unwrap();
    let ts = grid(20.0, 80);
    let xi = FrequencyPoint::new(2.0).unwrap();
    let pair = solve_fundamental(&p, xi, 0.0, &ts, 1e-11).unwrap();
    let norms: Vec<f64> = pair.matrices.iter().map(|m| energy_real_equivalent(m, xi).spectral_norm()).collect();
    assert!(norms.iter().all(|&n| n <= 1.0 + 1e-12));
    assert!(norms.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn zero_profile_energy_is_free_propagation() {
    let z = CoefficientProfile::zero();
    for &xi in &[0.0, 0.4, 3.0] {
        let f = FrequencyPoint::new(xi).unwrap();
        let ts = grid(30.0, 15);
        let pair = solve_fundamental(&z, f, 0.0, &ts, 1e-12).unwrap();
        let e0 = dampwave::multiplier::energy_from_matrix(&pair.matrices[0], f);
        for (t, m) in ts.iter().zip(&pair.matrices) {
            let e = dampwave::multiplier::energy_from_matrix(m, f);
            let expect = free_propagator(xi, *t).mul(&e0);
            assert!(e.sub(&expect).max_abs() <= 1e-9, "xi={xi} t={t}");
        }
    }
}

#[test]
fn dissipation_identity_random_data() {
    let p = CoefficientProfile::scale_invariant(3.0).unwrap();
    let data = [Complex64::new(1.0, -0.2), Complex64::new(0.1, 0.7)];
    for &xi in &[0.05, 1.0, 8.0] {
        let r = dissipation_residual(&p, xi, data, 2.0, 40.0, 1e-11).unwrap();
        assert!(r <= 1e-6, "xi={xi}: {r:e}");
    }
}

#[test]
fn energy_multiplier_continuous_through_confluence() {
    let p = CoefficientProfile::constant(1.0).unwrap();
    let t = [5.0];
    let at = |xi: f64| {
        solve_fundamental(&p, FrequencyPoint::new(xi).unwrap(), 0.0, &t, 1e-12).unwrap().samples[0].values
    };
    let centre = at(0.5);
    for h in [1e-2, 1e-3, 1e-4] {
        assert!(at(0.5 + h).distance(&centre) < 20.0 * h);
        assert!(at(0.5 - h).distance(&centre) < 20.0 * h);
    }
}

#[test]
fn closed_forms_satisfy_the_equation() {
    for &b0 in &[0.0, 0.5, 1.0, 4.0] {
        for &xi in &[0.1, 0.25, 1.0, 10.0] {
            for &t in &[0.0, 1.0, 30.0, 100.0] {
                let r = constant_residual(b0, xi, t).unwrap();
                assert!(r <= 1e-10, "b0={b0} xi={xi} t={t}: {r:e}");
            }
        }
    }
}
