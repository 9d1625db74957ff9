//! Phase-space zones.
//!
//! Non-effective geometry splits (t, ξ) by (1+t)ξ ≤ N into a dissipative
//! and a hyperbolic zone. Effective geometry uses the separating curve
//! 2ξ = b(t): below it the elliptic part (m = ξ² − b²/4 < 0), a relative
//! collar around it (reduced zone), above it the hyperbolic part, and a
//! dissipative core (1+t)ξ ≤ N that takes precedence over the elliptic zone.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coeffs::{CoefficientProfile, Monotonicity, RegimeClass};
use crate::error::{LabError, Result};
use crate::mat2::Mat2;
use crate::multiplier::fundamental_matrices;
use crate::quad::{integrate, QuadOptions};

pub const DEFAULT_ZONE_CONSTANT: f64 = 10.0;
pub const DEFAULT_EPS_RED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneConfig {
    pub n_const: f64,
    pub eps_red: f64,
    pub regime: RegimeClass,
}

impl ZoneConfig {
    pub fn new(n_const: f64, eps_red: f64, regime: RegimeClass) -> Result<Self> {
        if !(n_const > 0.0 && n_const.is_finite()) {
            return Err(LabError::invalid("zone constant N must be positive"));
        }
        if !(eps_red > 0.0 && eps_red < 0.5) {
            return Err(LabError::invalid("eps_red must lie in (0, 1/2)"));
        }
        if n_const < 1.0 {
            log::warn!("zone constant N = {n_const} < 1");
        }
        Ok(Self { n_const, eps_red, regime })
    }

    /// Defaults with the regime taken from the profile.
    pub fn for_profile(profile: &CoefficientProfile) -> Result<Self> {
        Self::new(DEFAULT_ZONE_CONSTANT, DEFAULT_EPS_RED, profile.classify_regime()?.class)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneLabel {
    DissipativeZone,
    HyperbolicZone,
    EllipticZone,
    ReducedZone,
    DissipativeCore,
}

impl fmt::Display for ZoneLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZoneLabel::DissipativeZone => "dissipative_zone",
            ZoneLabel::HyperbolicZone => "hyperbolic_zone",
            ZoneLabel::EllipticZone => "elliptic_zone",
            ZoneLabel::ReducedZone => "reduced_zone",
            ZoneLabel::DissipativeCore => "dissipative_core",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub t: f64,
    pub xi: f64,
    /// ξ² − b²/4
    pub m_value: f64,
    /// 2ξ − b
    pub gamma_distance: f64,
}

impl PhaseSpacePoint {
    pub fn new(profile: &CoefficientProfile, t: f64, xi: f64) -> Result<Self> {
        if !(xi >= 0.0 && xi.is_finite()) {
            return Err(LabError::domain(format!("frequency must be >= 0, got {xi}")));
        }
        let b = profile.b(t)?;
        // factored so that m vanishes exactly where 2ξ = b
        let m_value = (xi - 0.5 * b) * (xi + 0.5 * b);
        Ok(Self {
            t,
            xi,
            m_value,
            gamma_distance: 2.0 * xi - b,
        })
    }
}

fn check_family(config: &ZoneConfig, profile: &CoefficientProfile) -> Result<()> {
    let actual = profile.classify_regime()?.class;
    if actual.uses_non_effective_geometry() != config.regime.uses_non_effective_geometry() {
        return Err(LabError::RegimeMismatch(format!(
            "zone config is for {:?} but {} is {:?}",
            config.regime,
            profile.label(),
            actual
        )));
    }
    Ok(())
}

fn label_unchecked(config: &ZoneConfig, b: f64, t: f64, xi: f64) -> ZoneLabel {
    let in_core = (1.0 + t) * xi <= config.n_const;
    if config.regime.uses_non_effective_geometry() {
        return if in_core {
            ZoneLabel::DissipativeZone
        } else {
            ZoneLabel::HyperbolicZone
        };
    }
    let d = config.eps_red;
    if 2.0 * xi >= (1.0 + d) * b {
        ZoneLabel::HyperbolicZone
    } else if 2.0 * xi > (1.0 - d) * b {
        ZoneLabel::ReducedZone
    } else if in_core {
        ZoneLabel::DissipativeCore
    } else {
        ZoneLabel::EllipticZone
    }
}

pub fn classify_point(config: &ZoneConfig, profile: &CoefficientProfile, t: f64, xi: f64) -> Result<ZoneLabel> {
    check_family(config, profile)?;
    let p = PhaseSpacePoint::new(profile, t, xi)?;
    Ok(label_unchecked(config, profile.b_unchecked(p.t), p.t, p.xi))
}

/// Non-effective split by ξ ≤ N·b(t) instead of (1+t)ξ ≤ N.
pub fn classify_point_b_form(config: &ZoneConfig, profile: &CoefficientProfile, t: f64, xi: f64) -> Result<ZoneLabel> {
    check_family(config, profile)?;
    if !config.regime.uses_non_effective_geometry() {
        return classify_point(config, profile, t, xi);
    }
    let b = profile.b(t)?;
    Ok(if xi <= config.n_const * b {
        ZoneLabel::DissipativeZone
    } else {
        ZoneLabel::HyperbolicZone
    })
}

/// h(t, ξ) = N/(1+t) in the dissipative zone, ξ outside.
pub fn micro_energy_weight_h(t: f64, xi: f64, n_const: f64) -> Result<f64> {
    if !(n_const > 0.0) || !(t >= 0.0) || !(xi >= 0.0) {
        return Err(LabError::domain("micro-energy weight needs N > 0, t >= 0, xi >= 0"));
    }
    Ok(if (1.0 + t) * xi <= n_const {
        n_const / (1.0 + t)
    } else {
        xi
    })
}

/// ξ on Γ = {2ξ = b(t)}.
pub fn separating_curve(profile: &CoefficientProfile, t: f64) -> Result<f64> {
    Ok(0.5 * profile.b(t)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticBound {
    /// ∫ₛᵗ (√|m| − b/2)
    pub lhs: f64,
    /// −ξ² ∫ₛᵗ 1/b
    pub rhs: f64,
    pub holds: bool,
}

/// Earliest τ in [s, t] with 2ξ ≥ b(τ), if any.
fn elliptic_exit(profile: &CoefficientProfile, xi: f64, s: f64, t: f64) -> Option<f64> {
    let outside = |tau: f64| 2.0 * xi >= profile.b_unchecked(tau);
    if outside(s) {
        return Some(s);
    }
    let monotone_known = !matches!(profile.kind(), crate::coeffs::ProfileKind::Custom(_));
    if monotone_known || profile.monotonicity() == Monotonicity::NonDecreasing {
        if outside(t) {
            return Some(profile.crossing_time(2.0 * xi, s, t));
        }
        return None;
    }
    // declared non-increasing custom profile: still scan, declarations can be wrong
    let n = 256;
    for i in 1..=n {
        let tau = s + (t - s) * i as f64 / n as f64;
        if outside(tau) {
            let lo = s + (t - s) * (i - 1) as f64 / n as f64;
            return Some(profile.crossing_time(2.0 * xi, lo, tau));
        }
    }
    None
}

/// Checks ∫ₛᵗ(√|m| − b/2) ≤ −ξ²∫ₛᵗ 1/b on an interval inside the elliptic part.
pub fn elliptic_exponent_bound(
    profile: &CoefficientProfile,
    xi: f64,
    s: f64,
    t: f64,
    tol: f64,
) -> Result<EllipticBound> {
    if !(xi >= 0.0) || !(s >= 0.0) || !(t >= s) || !(tol > 0.0) {
        return Err(LabError::domain("elliptic bound needs xi >= 0, 0 <= s <= t, tol > 0"));
    }
    if let Some(crossing_time) = elliptic_exit(profile, xi, s, t) {
        return Err(LabError::LeavesEllipticPart { crossing_time });
    }
    let opts = QuadOptions {
        abs_tol: 0.25 * tol,
        rel_tol: 0.25 * tol,
        max_intervals: 4000,
    };
    let xi2 = xi * xi;
    // √(b²/4 − ξ²) − b/2 = −ξ²/(√(b²/4 − ξ²) + b/2), free of cancellation
    let lhs = integrate(
        |tau| {
            let b = profile.b_unchecked(tau);
            -xi2 / (((0.5 * b - xi) * (0.5 * b + xi)).max(0.0).sqrt() + 0.5 * b)
        },
        s,
        t,
        opts,
    )?
    .value;
    let rhs = -xi2 * integrate(|tau| 1.0 / profile.b_unchecked(tau), s, t, opts)?.value;
    Ok(EllipticBound {
        lhs,
        rhs,
        holds: lhs <= rhs + tol * rhs.abs().max(1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneMap {
    pub t_grid: Vec<f64>,
    pub xi_grid: Vec<f64>,
    /// labels[i][j] at (t_grid[i], xi_grid[j])
    pub labels: Vec<Vec<ZoneLabel>>,
    /// Non-effective split by ξ ≤ N·b(t); equal to `labels` in effective geometry.
    pub b_form_labels: Vec<Vec<ZoneLabel>>,
    /// b(t)/2 per time: the separating curve.
    pub gamma: Vec<f64>,
}

pub fn zone_map(
    config: &ZoneConfig,
    profile: &CoefficientProfile,
    t_grid: &[f64],
    xi_grid: &[f64],
) -> Result<ZoneMap> {
    check_family(config, profile)?;
    let mut labels = Vec::with_capacity(t_grid.len());
    let mut b_form = Vec::with_capacity(t_grid.len());
    let mut gamma = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let b = profile.b(t)?;
        gamma.push(0.5 * b);
        let mut row = Vec::with_capacity(xi_grid.len());
        let mut row_b = Vec::with_capacity(xi_grid.len());
        for &xi in xi_grid {
            if !(xi >= 0.0) {
                return Err(LabError::domain(format!("frequency must be >= 0, got {xi}")));
            }
            let l = label_unchecked(config, b, t, xi);
            row.push(l);
            row_b.push(if config.regime.uses_non_effective_geometry() {
                if xi <= config.n_const * b {
                    ZoneLabel::DissipativeZone
                } else {
                    ZoneLabel::HyperbolicZone
                }
            } else {
                l
            });
        }
        labels.push(row);
        b_form.push(row_b);
    }
    Ok(ZoneMap {
        t_grid: t_grid.to_vec(),
        xi_grid: xi_grid.to_vec(),
        labels,
        b_form_labels: b_form,
        gamma,
    })
}

impl ZoneMap {
    /// CSV with header `t,xi,label,b_form_label,gamma_side`; the last column
    /// is `elliptic` for 2ξ < b(t), `hyperbolic` for 2ξ > b(t) and `gamma` on it.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,xi,label,b_form_label,gamma_side")?;
        for (i, &t) in self.t_grid.iter().enumerate() {
            for (j, &xi) in self.xi_grid.iter().enumerate() {
                let side = match xi.partial_cmp(&self.gamma[i]) {
                    Some(std::cmp::Ordering::Less) => "elliptic",
                    Some(std::cmp::Ordering::Greater) => "hyperbolic",
                    _ => "gamma",
                };
                writeln!(
                    w,
                    "{t:.16e},{xi:.16e},{},{},{side}",
                    self.labels[i][j], self.b_form_labels[i][j]
                )?;
            }
        }
        Ok(())
    }

    pub fn count(&self, label: ZoneLabel) -> usize {
        self.labels.iter().flatten().filter(|&&l| l == label).count()
    }
}

/// Worst distortion max(‖K‖, 1/σ_min(K)) over the grid, where K maps the
/// v̂-system vector (√|m|·v̂, ∂ₜv̂) at time s to the one at t, v̂ = λû.
/// Requires 2ξ ≥ 2b(τ) on [s, max t].
pub fn hyperbolic_norm_distortion(
    profile: &CoefficientProfile,
    xi: f64,
    s: f64,
    t_grid: &[f64],
    tol: f64,
) -> Result<f64> {
    let t_end = t_grid.last().copied().unwrap_or(s);
    let deep = |tau: f64| xi >= profile.b_unchecked(tau);
    let n = 64;
    for i in 0..=n {
        let tau = s + (t_end - s) * i as f64 / n as f64;
        if !deep(tau) {
            return Err(LabError::domain(format!("(t={tau}, xi={xi}) is not deep in the hyperbolic zone")));
        }
    }
    let prop = fundamental_matrices(profile, xi, s, t_grid, tol)?;
    // (u, u') ↦ (√|m|·u, u' + b/2·u): the v̂ state up to the factor λ
    let to_v = |tau: f64| {
        let b = profile.b_unchecked(tau);
        let root_m = ((xi - 0.5 * b) * (xi + 0.5 * b)).abs().sqrt();
        Mat2::new(root_m, 0.0, 0.5 * b, 1.0)
    };
    let from_v_s = {
        let b = profile.b_unchecked(s);
        let root_m = ((xi - 0.5 * b) * (xi + 0.5 * b)).abs().sqrt();
        Mat2::new(1.0 / root_m, 0.0, -0.5 * b / root_m, 1.0)
    };
    let ln_lambda_s = profile.log_lambda(s, tol)?;
    let mut worst: f64 = 1.0;
    for (&t, m) in prop.times.iter().zip(&prop.states) {
        let gain = (profile.log_lambda(t, tol)? - ln_lambda_s).exp();
        let k = (to_v(t) * *m * from_v_s).scale(gain);
        worst = worst.max(k.spectral_norm()).max(1.0 / k.min_singular_value());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eff() -> ZoneConfig {
        ZoneConfig::new(10.0, 0.1, RegimeClass::Effective).unwrap()
    }

    #[test]
    fn classify_examples() {
        let c = CoefficientProfile::constant(1.0).unwrap();
        assert_eq!(classify_point(&eff(), &c, 1000.0, 0.4).unwrap(), ZoneLabel::EllipticZone);
        assert_eq!(classify_point(&eff(), &c, 1000.0, 0.6).unwrap(), ZoneLabel::HyperbolicZone);
        assert_eq!(classify_point(&eff(), &c, 1000.0, 0.5).unwrap(), ZoneLabel::ReducedZone);
        assert_eq!(classify_point(&eff(), &c, 1.0, 0.4).unwrap(), ZoneLabel::DissipativeCore);
        let si = CoefficientProfile::scale_invariant(0.5).unwrap();
        let ne = ZoneConfig::for_profile(&si).unwrap();
        assert_eq!(classify_point(&ne, &si, 99.0, 0.05).unwrap(), ZoneLabel::DissipativeZone);
        assert_eq!(classify_point(&ne, &si, 99.0, 0.2).unwrap(), ZoneLabel::HyperbolicZone);
        assert!(matches!(classify_point(&eff(), &si, 1.0, 1.0), Err(LabError::RegimeMismatch(_))));
    }

    #[test]
    fn b_form_differs_from_h_form() {
        let si = CoefficientProfile::scale_invariant(0.5).unwrap();
        let ne = ZoneConfig::for_profile(&si).unwrap();
        // ξ ≤ N·μ/(1+t) versus (1+t)ξ ≤ N: differ by the factor μ
        assert_eq!(classify_point_b_form(&ne, &si, 99.0, 0.04).unwrap(), ZoneLabel::DissipativeZone);
        assert_eq!(classify_point(&ne, &si, 99.0, 0.04).unwrap(), ZoneLabel::DissipativeZone);
        assert_eq!(classify_point_b_form(&ne, &si, 99.0, 0.07).unwrap(), ZoneLabel::HyperbolicZone);
        assert_eq!(classify_point(&ne, &si, 99.0, 0.07).unwrap(), ZoneLabel::DissipativeZone);
    }

    #[test]
    fn micro_energy_weight_examples() {
        assert_relative_eq!(micro_energy_weight_h(9.0, 0.1, 1.0).unwrap(), 0.1, epsilon = 1e-15);
        assert_eq!(micro_energy_weight_h(0.0, 0.01, 1.0).unwrap(), 1.0);
        assert_eq!(micro_energy_weight_h(0.0, 5.0, 1.0).unwrap(), 5.0);
        // both branches agree on the boundary
        for &t in &[0.0, 3.0, 99.0] {
            let xi = 2.0 / (1.0 + t);
            assert_relative_eq!(2.0 / (1.0 + t), xi, epsilon = 1e-15);
            assert_relative_eq!(micro_energy_weight_h(t, xi, 2.0).unwrap(), xi, epsilon = 1e-15);
        }
    }

    #[test]
    fn separating_curve_examples() {
        assert_eq!(separating_curve(&CoefficientProfile::constant(1.0).unwrap(), 7.0).unwrap(), 0.5);
        assert_eq!(separating_curve(&CoefficientProfile::power(1.0, 1.0).unwrap(), 3.0).unwrap(), 2.0);
        assert_eq!(separating_curve(&CoefficientProfile::scale_invariant(4.0).unwrap(), 1.0).unwrap(), 1.0);
        let p = CoefficientProfile::power(1.3, 0.7).unwrap();
        for &t in &[0.0, 2.5, 40.0] {
            let xi = separating_curve(&p, t).unwrap();
            assert_eq!(PhaseSpacePoint::new(&p, t, xi).unwrap().m_value, 0.0);
        }
    }

    #[test]
    fn elliptic_bound_examples() {
        let c = CoefficientProfile::constant(1.0).unwrap();
        let r = elliptic_exponent_bound(&c, 0.3, 0.0, 10.0, 1e-10).unwrap();
        assert_relative_eq!(r.lhs, -1.0, epsilon = 1e-9);
        assert_relative_eq!(r.rhs, -0.9, epsilon = 1e-9);
        assert!(r.holds);
        let p = CoefficientProfile::power(1.0, 0.5).unwrap();
        assert!(elliptic_exponent_bound(&p, 0.1, 0.0, 50.0, 1e-10).unwrap().holds);
        let tiny = elliptic_exponent_bound(&c, 1e-8, 0.0, 10.0, 1e-10).unwrap();
        assert!(tiny.lhs.abs() < 1e-14 && tiny.rhs.abs() < 1e-14);
        // decreasing b leaves the elliptic part where μ/(1+t) = 2ξ
        let si = CoefficientProfile::scale_invariant(4.0).unwrap();
        match elliptic_exponent_bound(&si, 0.5, 0.0, 10.0, 1e-10) {
            Err(LabError::LeavesEllipticPart { crossing_time }) => assert_relative_eq!(crossing_time, 3.0, epsilon = 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zone_map_figures() {
        let xi: Vec<f64> = (0..200).map(|j| j as f64 * 0.05).collect();
        let ts = [100.0, 1000.0, 10000.0];
        let inc = CoefficientProfile::power(1.0, 1.0).unwrap();
        let m = zone_map(&eff(), &inc, &ts, &xi).unwrap();
        let ell: Vec<usize> = m.labels.iter().map(|r| r.iter().filter(|&&l| l == ZoneLabel::EllipticZone).count()).collect();
        assert!(ell[0] < ell[1] && ell[1] <= ell[2]);
        let dec = CoefficientProfile::power(4.0, -0.5).unwrap();
        let ts = [20.0, 100.0, 1000.0];
        let small_core = ZoneConfig::new(1.0, 0.1, RegimeClass::Effective).unwrap();
        let m = zone_map(&small_core, &dec, &ts, &xi).unwrap();
        let ell: Vec<usize> = m.labels.iter().map(|r| r.iter().filter(|&&l| l == ZoneLabel::EllipticZone).count()).collect();
        assert!(ell[0] > ell[1] && ell[1] >= ell[2]);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,xi,label,b_form_label,gamma_side\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 200);
    }

    #[test]
    fn hyperbolic_zone_keeps_v_norm() {
        let si = CoefficientProfile::scale_invariant(3.0).unwrap();
        let ts: Vec<f64> = (0..=40).map(|i| 5.0 + i as f64 * 5.0).collect();
        let d = hyperbolic_norm_distortion(&si, 4.0, 5.0, &ts, 1e-10).unwrap();
        assert!(d <= 10.0, "{d}");
        let c = CoefficientProfile::constant(1.0).unwrap();
        let d = hyperbolic_norm_distortion(&c, 2.0, 0.0, &ts, 1e-10).unwrap();
        assert!(d <= 10.0, "{d}");
        assert!(hyperbolic_norm_distortion(&c, 0.7, 0.0, &ts, 1e-10).is_err());
    }
}
