//! Log-space least-squares fits of decay curves.

use serde::{Deserialize, Serialize};

use crate::coeffs::{iterated_exp, iterated_ln, CoefficientProfile};
use crate::error::{LabError, Result};

/// Threshold on the curvature statistic above which a fit is refused.
pub const CURVATURE_THRESHOLD: f64 = 0.05;
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitModel {
    /// t^α
    PowerLaw,
    /// (1+t)^α
    PowerOfShifted,
    /// (1+R(t))^α
    PowerOfR,
    /// (ln^[m](e^[m]+t))^α
    LogPower { m: u32 },
}

impl FitModel {
    pub fn abscissa(&self, t: f64, profile: Option<&CoefficientProfile>) -> Result<f64> {
        match self {
            FitModel::PowerLaw => {
                if t <= 0.0 {
                    return Err(LabError::domain("power-law fit needs t > 0"));
                }
                Ok(t.ln())
            }
            FitModel::PowerOfShifted => Ok(t.ln_1p()),
            FitModel::PowerOfR => {
                let p = profile.ok_or_else(|| LabError::invalid("PowerOfR fit needs a profile"))?;
                Ok(p.recip_primitive(t, 1e-12)?.ln_1p())
            }
            FitModel::LogPower { m } => {
                if *m == 0 || *m > 3 {
                    return Err(LabError::invalid("LogPower depth must be 1..=3"));
                }
                Ok(iterated_ln(iterated_exp(*m) + t, *m).ln())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub exponent: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub window: (f64, f64),
    pub points: usize,
    /// |γ|·Δx/|α| from a quadratic fit in the same coordinates.
    pub curvature: f64,
    /// Curvature exceeded the threshold: the model family looks wrong.
    pub refused: bool,
}

/// Least squares y = a + αx; returns (α, a, rms).
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let alpha = sxy / sxx;
    let a = my - alpha * mx;
    let rss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - alpha * u).powi(2)).sum();
    (alpha, a, (rss / n).sqrt())
}

/// Coefficient γ of (x - x̄)² in a quadratic least-squares fit.
fn quadratic_coefficient(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let u: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let w: Vec<f64> = u.iter().map(|v| v * v).collect();
    let mw = w.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    // orthogonalise (u², u) against 1 and each other, then project y
    let w_c: Vec<f64> = w.iter().map(|v| v - mw).collect();
    let suu: f64 = u.iter().map(|v| v * v).sum();
    let swu: f64 = w_c.iter().zip(&u).map(|(a, b)| a * b).sum();
    let w_perp: Vec<f64> = w_c.iter().zip(&u).map(|(a, b)| a - swu / suu * b).collect();
    let sww: f64 = w_perp.iter().map(|v| v * v).sum();
    if sww <= 0.0 {
        return 0.0;
    }
    w_perp.iter().zip(y).map(|(a, b)| a * (b - my)).sum::<f64>() / sww
}

/// Fits `values ≈ e^a · X(t)^α` over the points with t in `window`.
pub fn fit_decay(
    times: &[f64],
    values: &[f64],
    model: FitModel,
    window: (f64, f64),
    profile: Option<&CoefficientProfile>,
) -> Result<FitResult> {
    if times.len() != values.len() {
        return Err(LabError::invalid("times and values differ in length"));
    }
    if !(window.0 < window.1) {
        return Err(LabError::invalid(format!("degenerate fit window [{}, {}]", window.0, window.1)));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(LabError::invalid(format!("non-positive or non-finite value {v} at t = {t}")));
        }
        x.push(model.abscissa(t, profile)?);
        y.push(v.ln());
    }
    if x.len() < MIN_FIT_POINTS {
        return Err(LabError::invalid(format!(
            "fit needs at least {MIN_FIT_POINTS} points in the window, got {}",
            x.len()
        )));
    }
    let span = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return Err(LabError::invalid("fit window has no spread in the model coordinate"));
    }
    let (alpha, a, rms) = linear_fit(&x, &y);
    let gamma = quadratic_coefficient(&x, &y);
    // relative to a slope of at least 0.01 so that flat curves are not refused for noise
    let curvature = gamma.abs() * span / alpha.abs().max(1e-2);
    Ok(FitResult {
        model,
        exponent: alpha,
        intercept: a,
        residual_rms: rms,
        window,
        points: x.len(),
        curvature,
        refused: curvature > CURVATURE_THRESHOLD,
    })
}

/// Fits with `first`; when refused for curvature, retries LogPower m = 1..=3
/// and returns every attempt, the accepted one (if any) last.
pub fn fit_decay_auto(
    times: &[f64],
    values: &[f64],
    first: FitModel,
    window: (f64, f64),
    profile: Option<&CoefficientProfile>,
) -> Result<Vec<FitResult>> {
    let mut attempts = vec![fit_decay(times, values, first, window, profile)?];
    if !attempts[0].refused {
        return Ok(attempts);
    }
    for m in 1..=3 {
        let r = fit_decay(times, values, FitModel::LogPower { m }, window, profile)?;
        let done = !r.refused;
        attempts.push(r);
        if done {
            break;
        }
    }
    Ok(attempts)
}

/// Default window: the last decade of the time range.
pub fn last_decade(times: &[f64]) -> (f64, f64) {
    let t_max = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (t_max / 10.0, t_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geom(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn recovers_synthetic_exponents() {
        let ts = geom(10.0, 1e3, 30);
        let v: Vec<f64> = ts.iter().map(|t| (1.0 + t).powf(-0.25)).collect();
        let r = fit_decay(&ts, &v, FitModel::PowerOfShifted, (10.0, 1e3), None).unwrap();
        assert!((r.exponent + 0.25).abs() < 1e-6);
        assert!(!r.refused && r.residual_rms < 1e-12);
        let c = CoefficientProfile::constant(1.0).unwrap();
        let v: Vec<f64> = ts.iter().map(|t| (1.0 + t).powf(-0.5)).collect();
        let r = fit_decay(&ts, &v, FitModel::PowerOfR, (10.0, 1e3), Some(&c)).unwrap();
        assert!((r.exponent + 0.5).abs() < 1e-6);
        let v: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(-1.5)).collect();
        let r = fit_decay(&ts, &v, FitModel::PowerLaw, (10.0, 1e3), None).unwrap();
        assert_relative_eq!(r.exponent, -1.5, epsilon = 1e-9);
        assert_relative_eq!(r.intercept, 3f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn log_curves_are_refused_by_power_law_and_caught_by_log_power() {
        let ts = geom(100.0, 1e5, 30);
        let v: Vec<f64> = ts.iter().map(|t| (std::f64::consts::E + t).ln().powf(-0.5)).collect();
        let attempts = fit_decay_auto(&ts, &v, FitModel::PowerOfShifted, (100.0, 1e5), None).unwrap();
        assert!(attempts[0].refused);
        let last = attempts.last().unwrap();
        assert_eq!(last.model, FitModel::LogPower { m: 1 });
        assert!((last.exponent + 0.5).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        let ts = [1.0, 2.0, 3.0, 4.0];
        let v = [1.0, 0.5, 0.3, 0.2];
        assert!(fit_decay(&ts, &v, FitModel::PowerLaw, (0.0, 10.0), None).is_err());
        let ts = [1.0, 2.0, 3.0, 4.0, 5.0];
        let v = [1.0, 0.5, 0.0, 0.2, 0.1];
        assert!(fit_decay(&ts, &v, FitModel::PowerLaw, (0.0, 10.0), None).is_err());
        assert!(fit_decay(&ts, &[1.0; 5], FitModel::PowerLaw, (3.0, 3.0), None).is_err());
        assert!(fit_decay(&ts, &[1.0; 5], FitModel::PowerOfR, (0.0, 10.0), None).is_err());
    }

    #[test]
    fn constant_curve_is_flat_and_accepted() {
        let ts = geom(1.0, 1e3, 20);
        let r = fit_decay(&ts, &[0.7; 20], FitModel::PowerOfShifted, (1.0, 1e3), None).unwrap();
        assert!(r.exponent.abs() < 1e-12 && !r.refused);
    }
}
