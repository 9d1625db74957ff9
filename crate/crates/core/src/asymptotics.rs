//! Long-time limits: wave operators, the parabolic surrogate, over-damped
//! asymptotic states and frequency-truncated decay.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{CoefficientProfile, RegimeClass};
use crate::error::{LabError, Result};
use crate::mat2::CMat2;
use crate::multiplier::{energy_from_matrix, free_propagator, fundamental_matrices, FrequencyPoint};
use crate::rates::{truncated_l2_norm_curve, DecayCurve, XiGrid};

const AUX_TOL: f64 = 1e-12;

/// Required improvement of the amplified truncated curve over the window.
pub const IMPROVEMENT_FACTOR: f64 = 5.0;

/// Default probe times for limits at infinity.
pub const DEFAULT_PROBES: [f64; 5] = [1.0, 10.0, 100.0, 1e3, 1e4];

/// Last three Cauchy differences nonincreasing with a net decrease, or all
/// of them already below their floors (differences the integrator cannot
/// resolve).
fn certify(diffs: &[f64], floors: &[f64]) -> bool {
    if diffs.len() < 3 {
        return false;
    }
    let k = diffs.len() - 3;
    let last = &diffs[k..];
    if last.iter().zip(&floors[k..]).all(|(d, f)| d <= f) {
        return true;
    }
    last[1] <= last[0] && last[2] <= last[1] && last[2] < last[0]
}

fn check_probes(probes: &[f64]) -> Result<()> {
    if probes.len() < 4 {
        return Err(LabError::invalid("limits at infinity need at least 4 probe times"));
    }
    if probes.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || probes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::invalid("probe times must be finite, >= 0 and increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveOperatorEstimate {
    pub xi: f64,
    pub probe_times: Vec<f64>,
    /// λ(t)·E₀(t,ξ)*·E(t,ξ) at each probe.
    pub iterates: Vec<CMat2>,
    pub cauchy_differences: Vec<f64>,
    pub det_samples: Vec<Complex64>,
    /// max over probes of ‖E₀*E₀ − I‖.
    pub unitarity_defect: f64,
    pub certified: bool,
    /// The last iterate, present only when certified.
    pub estimate: Option<CMat2>,
}

/// Approximates W₊(ξ) = lim λ(t)E₀(t,ξ)⁻¹E(t,ξ) along `probe_times`.
pub fn wave_operator_approx(
    profile: &CoefficientProfile,
    xi: f64,
    probe_times: &[f64],
    tol: f64,
) -> Result<WaveOperatorEstimate> {
    check_probes(probe_times)?;
    if !profile.classify_regime()?.class.uses_non_effective_geometry()
        || profile.classify_regime()?.class != RegimeClass::NonEffective
    {
        return Err(LabError::RegimeMismatch(
            "wave operators exist only for non-effective dissipation".into(),
        ));
    }
    let fp = FrequencyPoint::new(xi)?;
    let prop = fundamental_matrices(profile, xi, 0.0, probe_times, tol)?;
    let mut iterates = Vec::with_capacity(probe_times.len());
    let mut det_samples = Vec::with_capacity(probe_times.len());
    let mut unitarity_defect: f64 = 0.0;
    for (i, &t) in probe_times.iter().enumerate() {
        let e0 = free_propagator(xi, t);
        let e0_inv = e0.adjoint();
        unitarity_defect = unitarity_defect.max(e0_inv.mul(&e0).sub(&CMat2::identity()).max_abs());
        let gain = (prop.log_scales[i] + profile.log_lambda(t, AUX_TOL)?).exp();
        let w = e0_inv.mul(&energy_from_matrix(&prop.scaled_states[i], fp)).scale(gain);
        det_samples.push(w.det());
        iterates.push(w);
    }
    if unitarity_defect > 1e-12 {
        return Err(LabError::domain(format!(
            "free propagator failed the unitarity check: defect {unitarity_defect:e}"
        )));
    }
    let cauchy_differences: Vec<f64> = iterates.windows(2).map(|w| w[1].sub(&w[0]).spectral_norm()).collect();
    let size = iterates.last().unwrap().spectral_norm().max(1.0);
    let floors: Vec<f64> = prop.error_estimates[1..]
        .iter()
        .map(|e| (100.0 * tol).max(2.0 * e) * size)
        .collect();
    let certified = certify(&cauchy_differences, &floors);
    Ok(WaveOperatorEstimate {
        xi,
        probe_times: probe_times.to_vec(),
        estimate: certified.then(|| *iterates.last().unwrap()),
        iterates,
        cauchy_differences,
        det_samples,
        unitarity_defect,
        certified,
    })
}

/// Heat-type symbol exp(−ξ²R(t)).
pub fn parabolic_multiplier(profile: &CoefficientProfile, xi: f64, t: f64, tol: f64) -> Result<f64> {
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(LabError::domain(format!("frequency must be finite and >= 0, got {xi}")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    Ok((-xi * xi * profile.recip_primitive(t, tol)?).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionReport {
    pub t: f64,
    /// Time at which the corrected variant matches amplitudes.
    pub t_ref: f64,
    pub xis: Vec<f64>,
    pub parabolic: Vec<f64>,
    pub hyperbolic: Vec<f64>,
    /// |Φ₁(t,ξ) − e^{−ξ²R(t)}|
    pub raw: Vec<f64>,
    /// |Φ₁(t,ξ) − c(ξ)e^{−ξ²R(t)}| with c(ξ) = Φ₁(t_ref,ξ)e^{ξ²R(t_ref)}
    pub corrected: Vec<f64>,
    pub relative_raw: Vec<f64>,
    pub relative_corrected: Vec<f64>,
    pub sup_raw: f64,
    pub sup_corrected: f64,
    pub sup_relative_raw: f64,
    pub sup_relative_corrected: f64,
}

/// Compares the first solution component for data (1, 0) with the
/// parabolic multiplier at the given frequencies. Relative values are
/// taken against the parabolic multiplier.
pub fn diffusion_discrepancy(profile: &CoefficientProfile, xis: &[f64], t: f64, tol: f64) -> Result<DiffusionReport> {
    let class = profile.classify_regime()?.class;
    if class.uses_non_effective_geometry() || class == RegimeClass::OverDamping {
        return Err(LabError::RegimeMismatch(
            "the diffusion comparison needs effective, non-over-damping dissipation".into(),
        ));
    }
    if xis.is_empty() {
        return Err(LabError::invalid("empty frequency window"));
    }
    let half_b = 0.5 * profile.b(t)?;
    if let Some(x) = xis.iter().find(|x| !(**x >= 0.0 && **x < half_b)) {
        return Err(LabError::domain(format!(
            "frequency {x} outside the elliptic part [0, {half_b}) at t = {t}"
        )));
    }
    let t_ref = 0.5 * t;
    let r_t = profile.recip_primitive(t, AUX_TOL)?;
    let r_ref = profile.recip_primitive(t_ref, AUX_TOL)?;
    let rows: Vec<(f64, f64, f64, f64)> = xis
        .par_iter()
        .map(|&xi| -> Result<_> {
            let grid = if t_ref < t { vec![t_ref, t] } else { vec![t] };
            let prop = fundamental_matrices(profile, xi, 0.0, &grid, tol)?;
            let phi_t = prop.states[grid.len() - 1].0[0][0];
            let phi_ref = prop.states[0].0[0][0];
            let par_t = (-xi * xi * r_t).exp();
            let c = phi_ref * (xi * xi * r_ref).exp();
            Ok((phi_t, par_t, (phi_t - par_t).abs(), (phi_t - c * par_t).abs()))
        })
        .collect::<Result<_>>()?;
    let sup = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    let hyperbolic: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let parabolic: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let raw: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let corrected: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let relative_raw: Vec<f64> = rows.iter().map(|r| r.2 / r.1).collect();
    let relative_corrected: Vec<f64> = rows.iter().map(|r| r.3 / r.1).collect();
    Ok(DiffusionReport {
        t,
        t_ref,
        xis: xis.to_vec(),
        sup_raw: sup(&raw),
        sup_corrected: sup(&corrected),
        sup_relative_raw: sup(&relative_raw),
        sup_relative_corrected: sup(&relative_corrected),
        parabolic,
        hyperbolic,
        raw,
        corrected,
        relative_raw,
        relative_corrected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateLimit {
    pub xi: f64,
    pub iterates: Vec<f64>,
    pub differences: Vec<f64>,
    /// Tail-extrapolated limit, or the last iterate without R(∞).
    pub limit: f64,
    /// Bound on |limit − last iterate| from the tail model.
    pub bound: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticState {
    pub probe_times: Vec<f64>,
    pub data: (f64, f64),
    pub r_infinity: Option<f64>,
    pub limits: Vec<StateLimit>,
}

impl AsymptoticState {
    pub fn all_certified(&self) -> bool {
        self.limits.iter().all(|l| l.certified)
    }
}

/// Per-frequency limits of û(t,ξ) = Φ₁u₁ + ∂-normalised Φ₂u₂ for
/// over-damping profiles. The real solution with û(0) = u₁, ∂ₜû(0) = u₂
/// is followed along `probe_times`; when R(∞) is known the last two probes
/// are extrapolated with a tail proportional to R(∞) − R(t).
pub fn overdamping_state(
    profile: &CoefficientProfile,
    xis: &[f64],
    data: (f64, f64),
    probe_times: &[f64],
    tol: f64,
) -> Result<AsymptoticState> {
    check_probes(probe_times)?;
    if profile.classify_regime()?.class != RegimeClass::OverDamping {
        return Err(LabError::RegimeMismatch("asymptotic states need over-damping".into()));
    }
    let r_inf = profile.recip_primitive_limit();
    let tails: Option<Vec<f64>> = match r_inf {
        Some(ri) => probe_times
            .iter()
            .map(|&t| Ok(ri - profile.recip_primitive(t, AUX_TOL)?))
            .collect::<Result<Vec<f64>>>()
            .ok(),
        None => None,
    };
    let limits = xis
        .par_iter()
        .map(|&xi| -> Result<StateLimit> {
            let prop = fundamental_matrices(profile, xi, 0.0, probe_times, tol)?;
            let iterates: Vec<f64> = prop
                .states
                .iter()
                .map(|m| m.0[0][0] * data.0 + m.0[0][1] * data.1)
                .collect();
            let differences: Vec<f64> = iterates.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
            let scale = data.0.abs() + data.1.abs();
            let floor = 100.0 * tol * scale.max(f64::MIN_POSITIVE);
            let floors: Vec<f64> = prop.error_estimates[1..].iter().map(|e| floor.max(2.0 * e * scale)).collect();
            let certified = certify(&differences, &floors);
            let k = iterates.len() - 1;
            let (limit, bound) = match &tails {
                Some(tl) if tl[k - 1] - tl[k] > 0.0 && tl[k] >= 0.0 => {
                    let slope = (iterates[k] - iterates[k - 1]) / (tl[k - 1] - tl[k]);
                    let corr = slope * tl[k];
                    (iterates[k] + corr, corr.abs() + floor)
                }
                _ => (iterates[k], differences[k - 1] + floor),
            };
            Ok(StateLimit {
                xi,
                iterates,
                differences,
                limit,
                bound,
                certified,
            })
        })
        .collect::<Result<_>>()?;
    Ok(AsymptoticState {
        probe_times: probe_times.to_vec(),
        data,
        r_infinity: r_inf,
        limits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImprovementVerdict {
    Improved,
    NotImproved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedDecay {
    pub c_cut: f64,
    pub curve: DecayCurve,
    /// √(1+R(t))·curve
    pub amplified: Vec<f64>,
    /// amplified at the first time over amplified at the last.
    pub improvement: f64,
    pub verdict: ImprovementVerdict,
}

/// Energy norm on frequencies ξ ≥ c_cut, amplified by √(1+R(t)).
pub fn frequency_truncated_decay(
    profile: &CoefficientProfile,
    c_cut: f64,
    times: &[f64],
    tol: f64,
) -> Result<TruncatedDecay> {
    let class = profile.classify_regime()?.class;
    if class.uses_non_effective_geometry() || class == RegimeClass::OverDamping {
        return Err(LabError::RegimeMismatch(
            "frequency truncation applies to effective, non-over-damping dissipation".into(),
        ));
    }
    let curve = truncated_l2_norm_curve(profile, times, c_cut, &XiGrid::default(), tol)?;
    let mut amplified = Vec::with_capacity(times.len());
    for (&t, &v) in times.iter().zip(&curve.values) {
        amplified.push(v * (1.0 + profile.recip_primitive(t, AUX_TOL)?).sqrt());
    }
    let improvement = amplified[0] / amplified[amplified.len() - 1];
    let decreasing = amplified.windows(2).all(|w| w[1] <= w[0] * 1.01);
    Ok(TruncatedDecay {
        c_cut,
        verdict: if decreasing && improvement >= IMPROVEMENT_FACTOR {
            ImprovementVerdict::Improved
        } else {
            ImprovementVerdict::NotImproved
        },
        curve,
        amplified,
        improvement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{l2_norm_curve, log_times};

    #[test]
    fn zero_profile_wave_operator_is_initial_normalisation() {
        let z = CoefficientProfile::zero();
        for xi in [0.01, 0.3, 1.0, 7.0] {
            let w = wave_operator_approx(&z, xi, &[1.0, 10.0, 100.0, 1000.0], 1e-12).unwrap();
            assert!(w.certified, "{xi}: {:?}", w.cauchy_differences);
            let fp = FrequencyPoint::new(xi).unwrap();
            let expect = CMat2::diag((xi / fp.bracket).into(), 1.0.into());
            for it in &w.iterates {
                assert!(it.sub(&expect).max_abs() < 1e-10, "{xi}: {it:?}");
            }
        }
    }

    #[test]
    fn scale_invariant_wave_operator_converges() {
        let p = CoefficientProfile::scale_invariant(0.5).unwrap();
        let w = wave_operator_approx(&p, 1.0, &[10.0, 100.0, 1e3, 1e4], 1e-12).unwrap();
        assert!(w.certified, "{:?}", w.cauchy_differences);
        assert!(w.det_samples.last().unwrap().norm() > 0.1);
        let c = CoefficientProfile::constant(1.0).unwrap();
        assert!(wave_operator_approx(&c, 1.0, &[1.0, 2.0, 3.0, 4.0], 1e-10).is_err());
        assert!(wave_operator_approx(&p, 1.0, &[1.0, 2.0, 3.0], 1e-10).is_err());
    }

    #[test]
    fn parabolic_values() {
        let c = CoefficientProfile::constant(1.0).unwrap();
        assert!((parabolic_multiplier(&c, 0.3, 2.0, 1e-12).unwrap() - (-0.18f64).exp()).abs() < 1e-15);
        assert_eq!(parabolic_multiplier(&c, 0.3, 0.0, 1e-12).unwrap(), 1.0);
        let p = CoefficientProfile::power(1.0, 0.5).unwrap();
        assert!((parabolic_multiplier(&p, 1.0, 3.0, 1e-12).unwrap() - (-2f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn diffusion_edges() {
        let c = CoefficientProfile::constant(1.0).unwrap();
        let r = diffusion_discrepancy(&c, &[0.0, 0.05], 200.0, 1e-11).unwrap();
        assert!(r.raw[0] < 1e-12 && r.corrected[0] < 1e-12);
        assert!(r.relative_corrected[1] <= 0.05);
        let r0 = diffusion_discrepancy(&c, &[0.1, 0.3], 0.0, 1e-11).unwrap();
        assert_eq!(r0.sup_raw, 0.0);
        assert!(diffusion_discrepancy(&c, &[0.6], 10.0, 1e-10).is_err());
    }

    #[test]
    fn overdamped_limits() {
        let p = CoefficientProfile::power(1.0, 2.0).unwrap();
        let s = overdamping_state(&p, &[0.0, 1.0], (1.0, 0.0), &DEFAULT_PROBES, 1e-11).unwrap();
        assert!(s.all_certified());
        assert!((s.limits[0].limit - 1.0).abs() < 1e-12);
        let l = s.limits[1].limit;
        assert!(l > 0.0 && l <= 1.0, "{l}");
        let z = overdamping_state(&p, &[1.0], (0.0, 0.0), &DEFAULT_PROBES, 1e-11).unwrap();
        assert_eq!(z.limits[0].limit, 0.0);
        assert!(z.all_certified());
    }

    #[test]
    fn truncation_improves_constant_damping() {
        let c = CoefficientProfile::constant(1.0).unwrap();
        let ts = log_times(10.0, 1e3, 9);
        let r = frequency_truncated_decay(&c, 0.5, &ts, 1e-10).unwrap();
        assert_eq!(r.verdict, ImprovementVerdict::Improved);
        let r = frequency_truncated_decay(&c, 0.1, &ts, 1e-10).unwrap();
        assert!(r.amplified[8] < 0.5 * r.amplified[0], "{:?}", r.amplified);
        // a tiny cut-off reproduces the full curve
        let tiny = frequency_truncated_decay(&c, 1e-6, &ts[..3], 1e-10).unwrap();
        let full = l2_norm_curve(&c, &ts[..3], &XiGrid::default(), 1e-10).unwrap();
        for (a, b) in tiny.curve.values.iter().zip(&full.values) {
            assert!((a / b - 1.0).abs() < 0.01);
        }
    }
}
