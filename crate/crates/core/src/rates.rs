//! Operator-norm decay curves and predicted rates.
//!
//! L²→L² norms are sup over ξ ≥ 0 of the per-frequency matrix norm
//! (multipliers are radial). The sup is taken on a log-spaced ξ grid and
//! refined around the grid maximiser by golden-section search in ln ξ.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{CoefficientProfile, ProfileKind, RegimeClass};
use crate::error::{LabError, Result};
use crate::fit::FitModel;
use crate::mat2::Mat2;
use crate::multiplier::{energy_real_equivalent, fundamental_matrices, FrequencyPoint};
use crate::quad::{integrate, QuadOptions};

/// Relative tolerance used for λ and R inside rate evaluations.
const AUX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateQuery {
    pub n: u32,
    pub p: f64,
    /// `f64::INFINITY` for q = ∞.
    pub q: f64,
    pub r_p: f64,
    #[serde(default)]
    pub k: u32,
    #[serde(default)]
    pub alpha_order: u32,
}

impl RateQuery {
    pub fn new(n: u32, p: f64, q: f64, r_p: f64) -> Result<Self> {
        let rq = Self {
            n,
            p,
            q,
            r_p,
            k: 0,
            alpha_order: 0,
        };
        rq.validate()?;
        Ok(rq)
    }

    /// p = q = 2 with the smallest admissible regularity bumped by one.
    pub fn l2(n: u32) -> Self {
        Self {
            n,
            p: 2.0,
            q: 2.0,
            r_p: 1.0,
            k: 0,
            alpha_order: 0,
        }
    }

    pub fn with_orders(mut self, k: u32, alpha_order: u32) -> Self {
        self.k = k;
        self.alpha_order = alpha_order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(LabError::invalid("space dimension must be positive"));
        }
        if !(self.p >= 1.0 && self.p <= 2.0) {
            return Err(LabError::invalid(format!("p = {} outside [1, 2]", self.p)));
        }
        if !(self.q >= 2.0) {
            return Err(LabError::invalid(format!("q = {} outside [2, ∞]", self.q)));
        }
        let conjugate = if self.q.is_infinite() {
            self.p == 1.0
        } else {
            (self.p * self.q - self.p - self.q).abs() <= 1e-12 * self.p * self.q
        };
        if !conjugate {
            return Err(LabError::invalid(format!(
                "(p, q) = ({}, {}) is not on the conjugate line pq = p + q",
                self.p, self.q
            )));
        }
        if !(self.r_p > self.n as f64 * self.d()) || !self.r_p.is_finite() {
            return Err(LabError::invalid(format!(
                "regularity r_p = {} must exceed n(1/p - 1/q) = {}",
                self.r_p,
                self.n as f64 * self.d()
            )));
        }
        Ok(())
    }

    /// 1/p − 1/q.
    pub fn d(&self) -> f64 {
        1.0 / self.p - if self.q.is_infinite() { 0.0 } else { 1.0 / self.q }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub norm: String,
    pub xi_grid: String,
    pub regime: Option<RegimeClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: CurveMeta,
    /// Maximising ξ per time, where meaningful.
    pub argmax: Vec<f64>,
    pub warnings: Vec<String>,
}

impl DecayCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>, meta: CurveMeta) -> Result<Self> {
        if times.len() != values.len() {
            return Err(LabError::invalid("times and values differ in length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::invalid("curve times must be strictly increasing"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(LabError::invalid(format!("curve value {v} is not finite and positive")));
        }
        Ok(Self {
            times,
            values,
            meta,
            argmax: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,value")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

/// Frequency grid for sup-norm sweeps. Unset bounds are chosen from the
/// profile: ξ_max = max(10, 5·b(0)) and ξ_lo well below the diffusive
/// scale 1/√(1+R(t_max)) and the non-effective scale 1/(1+t_max).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XiGrid {
    pub xi_lo: Option<f64>,
    pub xi_max: Option<f64>,
    pub per_decade: usize,
    pub refine: bool,
    /// Function evaluations allowed per refinement.
    pub refine_budget: usize,
}

impl Default for XiGrid {
    fn default() -> Self {
        Self {
            xi_lo: None,
            xi_max: None,
            per_decade: 12,
            refine: true,
            refine_budget: 40,
        }
    }
}

impl XiGrid {
    /// Grid points: 0 followed by a geometric sequence.
    pub fn resolve(&self, profile: &CoefficientProfile, t_max: f64) -> Result<Vec<f64>> {
        let xi_max = match self.xi_max {
            Some(v) => v,
            None => 10f64.max(5.0 * profile.b(0.0)?.abs()),
        };
        let xi_lo = match self.xi_lo {
            Some(v) => v,
            None => {
                let mut lo = 0.1 / (1.0 + t_max);
                if let Ok(r) = profile.recip_primitive(t_max, AUX_TOL) {
                    lo = lo.min(0.05 / (1.0 + r).sqrt());
                }
                lo
            }
        };
        if !(xi_lo > 0.0 && xi_max > xi_lo && xi_max.is_finite()) {
            return Err(LabError::invalid(format!("bad frequency range [{xi_lo}, {xi_max}]")));
        }
        if self.per_decade < 2 {
            return Err(LabError::invalid("frequency grid needs at least 2 points per decade"));
        }
        let decades = (xi_max / xi_lo).log10();
        let n = (decades * self.per_decade as f64).ceil().max(1.0) as usize;
        let mut out = Vec::with_capacity(n + 2);
        out.push(0.0);
        for i in 0..=n {
            out.push(xi_lo * (xi_max / xi_lo).powf(i as f64 / n as f64));
        }
        Ok(out)
    }

    fn describe(&self, pts: &[f64]) -> String {
        format!(
            "0 + {} log-spaced points in [{:.3e}, {:.3e}], refine={}",
            pts.len() - 1,
            pts[1],
            pts[pts.len() - 1],
            self.refine
        )
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(LabError::invalid("empty time list"));
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::invalid("times must be finite, >= 0 and strictly increasing"));
    }
    Ok(())
}

/// ln of a per-frequency norm from the scaled fundamental matrix:
/// (M / e^{log_scale}, log_scale, ξ, t) ↦ ln‖·‖.
trait LogNorm: Fn(&Mat2, f64, FrequencyPoint, f64) -> f64 + Sync {}
impl<F: Fn(&Mat2, f64, FrequencyPoint, f64) -> f64 + Sync> LogNorm for F {}

struct SupOutcome {
    log_values: Vec<f64>,
    argmax: Vec<f64>,
    warnings: Vec<String>,
    grid_description: String,
}

fn log_norm_at(profile: &CoefficientProfile, xi: f64, t: f64, tol: f64, f: &impl LogNorm) -> Result<f64> {
    let p = fundamental_matrices(profile, xi, 0.0, &[t], tol)?;
    Ok(f(&p.scaled_states[0], p.log_scales[0], FrequencyPoint::new(xi)?, t))
}

fn sup_over_xi(
    profile: &CoefficientProfile,
    times: &[f64],
    grid: &XiGrid,
    tol: f64,
    f: impl LogNorm,
) -> Result<SupOutcome> {
    check_times(times)?;
    let t_max = *times.last().unwrap();
    let xis = grid.resolve(profile, t_max)?;
    let table: Vec<Vec<f64>> = xis
        .par_iter()
        .map(|&xi| -> Result<Vec<f64>> {
            let p = fundamental_matrices(profile, xi, 0.0, times, tol)?;
            let fp = FrequencyPoint::new(xi)?;
            Ok((0..times.len())
                .map(|i| f(&p.scaled_states[i], p.log_scales[i], fp, times[i]))
                .collect())
        })
        .collect::<Result<_>>()?;
    let per_time: Vec<(f64, f64, Option<String>)> = (0..times.len())
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, Option<String>)> {
            let (j, best) = table
                .iter()
                .map(|row| row[i])
                .enumerate()
                .filter(|(_, v)| !v.is_nan())
                .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
            if !grid.refine || j < 2 || j + 1 >= xis.len() {
                return Ok((best, xis[j], None));
            }
            refine_max(profile, times[i], xis[j - 1].ln(), xis[j + 1].ln(), xis[j], best, grid.refine_budget, tol, &f)
        })
        .collect::<Result<_>>()?;
    let mut out = SupOutcome {
        log_values: Vec::with_capacity(times.len()),
        argmax: Vec::with_capacity(times.len()),
        warnings: Vec::new(),
        grid_description: grid.describe(&xis),
    };
    for (v, x, w) in per_time {
        out.log_values.push(v);
        out.argmax.push(x);
        out.warnings.extend(w);
    }
    Ok(out)
}

/// Golden-section maximisation of the log-norm in u = ln ξ on [a, b].
#[allow(clippy::too_many_arguments)]
fn refine_max(
    profile: &CoefficientProfile,
    t: f64,
    mut a: f64,
    mut b: f64,
    xi0: f64,
    v0: f64,
    budget: usize,
    tol: f64,
    f: &impl LogNorm,
) -> Result<(f64, f64, Option<String>)> {
    const G: f64 = 0.618_033_988_749_894_9;
    let eval = |u: f64| log_norm_at(profile, u.exp(), t, tol, f);
    let (mut best, mut best_xi) = (v0, xi0);
    let mut c = b - G * (b - a);
    let mut d = a + G * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    let mut evals = 2;
    loop {
        for (u, v) in [(c, fc), (d, fd)] {
            if v > best {
                best = v;
                best_xi = u.exp();
            }
        }
        // width 0.01 in ln ξ, or a max already settled well inside 1%
        if b - a < 0.01 || (fc - fd).abs() < 1e-4 {
            return Ok((best, best_xi, None));
        }
        if evals >= budget {
            let upper = best + (fc - fd).abs();
            return Ok((
                best,
                best_xi,
                Some(format!(
                    "refinement budget exceeded at t = {t:e}: max in [{:.6e}, {:.6e}]",
                    best.exp(),
                    upper.exp()
                )),
            ));
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - G * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + G * (b - a);
            fd = eval(d)?;
        }
        evals += 1;
    }
}

fn finish_curve(
    profile: &CoefficientProfile,
    times: &[f64],
    sup: SupOutcome,
    norm: &str,
) -> Result<DecayCurve> {
    let mut warnings = sup.warnings;
    let values: Vec<f64> = times
        .iter()
        .zip(&sup.log_values)
        .map(|(t, v)| {
            let e = v.exp();
            if e < f64::MIN_POSITIVE && !v.is_nan() {
                warnings.push(format!("value e^{v:.3} at t = {t:e} below f64 range, clamped"));
                f64::MIN_POSITIVE
            } else {
                e
            }
        })
        .collect();
    let regime = profile.classify_regime().ok().map(|r| r.class);
    let meta = CurveMeta {
        norm: norm.to_string(),
        xi_grid: sup.grid_description,
        regime,
    };
    let mut curve = DecayCurve::new(times.to_vec(), values, meta)?;
    curve.argmax = sup.argmax;
    curve.warnings = warnings;
    Ok(curve)
}

fn energy_log_norm(m: &Mat2, log_scale: f64, xi: FrequencyPoint, _t: f64) -> f64 {
    energy_real_equivalent(m, xi).spectral_norm().ln() + log_scale
}

/// ‖E(t)‖_{L²→L²} = sup_ξ ‖E(t,ξ)‖ on the given times.
pub fn l2_norm_curve(profile: &CoefficientProfile, times: &[f64], xi_grid: &XiGrid, tol: f64) -> Result<DecayCurve> {
    let sup = sup_over_xi(profile, times, xi_grid, tol, energy_log_norm)?;
    finish_curve(profile, times, sup, "energy L2->L2")
}

/// Energy norm restricted to ξ ≥ c_cut (the frequency-side cut-off V_c).
pub fn truncated_l2_norm_curve(
    profile: &CoefficientProfile,
    times: &[f64],
    c_cut: f64,
    xi_grid: &XiGrid,
    tol: f64,
) -> Result<DecayCurve> {
    if !(c_cut > 0.0) {
        return Err(LabError::invalid("frequency cut-off must be positive"));
    }
    let mut grid = *xi_grid;
    grid.xi_lo = Some(c_cut);
    if grid.xi_max.map_or(false, |m| m <= c_cut) {
        return Err(LabError::invalid("frequency cut-off above the grid maximum"));
    }
    let sup = sup_over_xi(profile, times, &grid, tol, move |m: &Mat2, ls: f64, xi: FrequencyPoint, t: f64| {
        if xi.xi < c_cut {
            f64::NEG_INFINITY
        } else {
            energy_log_norm(m, ls, xi, t)
        }
    })?;
    finish_curve(profile, times, sup, &format!("energy L2->L2 on xi >= {c_cut}"))
}

/// ln of ξ^{|α|}‖(D_tᵏΦ₁, ⟨ξ⟩D_tᵏΦ₂)‖ / ⟨ξ⟩^{k+|α|}; D_t² is eliminated
/// through the equation, D_t²Φ = ξ²Φ + b∂ₜΦ up to a unimodular factor.
fn higher_order_log_norm(
    profile: &CoefficientProfile,
    k: u32,
    alpha: u32,
) -> impl Fn(&Mat2, f64, FrequencyPoint, f64) -> f64 + Sync + '_ {
    move |m: &Mat2, ls: f64, xi: FrequencyPoint, t: f64| {
        let [[a, b], [c, d]] = m.0;
        let (r0, r1) = match k {
            0 => (a, b),
            1 => (c, d),
            _ => {
                let bt = profile.b_unchecked(t);
                let x2 = xi.xi * xi.xi;
                (x2 * a + bt * c, x2 * b + bt * d)
            }
        };
        let row = r0.hypot(xi.bracket * r1);
        let scale = if alpha == 0 { 0.0 } else { alpha as f64 * xi.xi.ln() };
        row.ln() + ls + scale - (k + alpha) as f64 * xi.bracket.ln()
    }
}

/// Sup-norm curve of the higher-order multiplier row.
pub fn higher_order_curve(
    profile: &CoefficientProfile,
    times: &[f64],
    k: u32,
    alpha_order: u32,
    xi_grid: &XiGrid,
    tol: f64,
) -> Result<DecayCurve> {
    if k > 2 {
        return Err(LabError::invalid("time-derivative order above 2 is not supported"));
    }
    let sup = sup_over_xi(profile, times, xi_grid, tol, higher_order_log_norm(profile, k, alpha_order))?;
    finish_curve(profile, times, sup, &format!("higher-order row k={k} |alpha|={alpha_order}"))
}

/// ‖S(t)‖_{L²→L²} with data normalised by ⟨ξ⟩ in the second slot.
pub fn solution_norm_curve(profile: &CoefficientProfile, times: &[f64], xi_grid: &XiGrid, tol: f64) -> Result<DecayCurve> {
    let mut c = higher_order_curve(profile, times, 0, 0, xi_grid, tol)?;
    c.meta.norm = "solution L2->L2".into();
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HigherOrderPoint {
    pub t: f64,
    pub k: u32,
    pub alpha_order: u32,
    pub value: f64,
    pub argmax: f64,
    /// (1+R(t))^{-k-|α|/2}; only in the effective regime.
    pub predicted: Option<PredictedRate>,
    pub warnings: Vec<String>,
}

/// (1+R(t))^{-k-|α|/2} for L² data; `None` outside effective,
/// non-over-damping dissipation.
pub fn predicted_higher_order_rate(profile: &CoefficientProfile, k: u32, alpha_order: u32) -> Option<PredictedRate> {
    let regime = regime_of(profile).ok()?;
    if regime.uses_non_effective_geometry() || regime == RegimeClass::OverDamping {
        return None;
    }
    Some(PredictedRate {
        form: RateForm::OfR {
            exponent: -(k as f64) - alpha_order as f64 / 2.0,
        },
        flag: None,
        p_star: None,
        anchor: "higher-order effective estimate, -n/2(1/p-1/q) - k - |alpha|/2".into(),
    })
}

pub fn higher_order_check(
    profile: &CoefficientProfile,
    t: f64,
    k: u32,
    alpha_order: u32,
    xi_grid: &XiGrid,
    tol: f64,
) -> Result<HigherOrderPoint> {
    let c = higher_order_curve(profile, &[t], k, alpha_order, xi_grid, tol)?;
    let predicted = predicted_higher_order_rate(profile, k, alpha_order);
    Ok(HigherOrderPoint {
        t,
        k,
        alpha_order,
        value: c.values[0],
        argmax: c.argmax[0],
        predicted,
        warnings: c.warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialL1 {
    pub value: f64,
    pub error: f64,
    /// The elliptic part {ξ < b(t)/2} was empty at this time.
    pub empty_elliptic_part: bool,
}

/// ∫ ‖E(t,ξ)‖ ξ^{n-1} dξ over the elliptic part 0 < ξ < min(b(t)/2, ξ_max).
/// The surface-measure constant of the sphere is omitted.
pub fn radial_l1_multiplier_norm(profile: &CoefficientProfile, t: f64, n: u32, tol: f64) -> Result<RadialL1> {
    if !(1..=3).contains(&n) {
        return Err(LabError::invalid("radial L1 norm supports n in 1..=3"));
    }
    if !(tol > 0.0) {
        return Err(LabError::invalid("tolerance must be positive"));
    }
    if regime_of(profile)? == RegimeClass::NonEffective {
        return Err(LabError::RegimeMismatch(
            "radial L1 elliptic-part norm needs an effective-type profile".into(),
        ));
    }
    let bt = profile.b(t)?;
    let xi_max = 10f64.max(5.0 * profile.b(0.0)?.abs());
    let upper = (0.5 * bt).min(xi_max);
    if !(upper > 0.0) {
        return Ok(RadialL1 {
            value: 0.0,
            error: 0.0,
            empty_elliptic_part: true,
        });
    }
    // below ξ_lo the integrand is at most ξ^{n-1}·‖E‖ ≤ ξ^{n-1}, a tail of ξ_lo^n/n
    let scale = profile.recip_primitive(t, AUX_TOL).map(|r| 1.0 / (1.0 + r).sqrt()).unwrap_or(1.0 / (1.0 + t));
    let xi_lo = (1e-6 * scale).min(1e-3 * upper);
    let tail = xi_lo.powi(n as i32) / n as f64;
    let mut failure = None;
    let res = integrate(
        |u| {
            let xi = u.exp();
            match log_norm_at(profile, xi, t, 0.1 * tol, &energy_log_norm) {
                Ok(v) => (v + n as f64 * u).exp(),
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        xi_lo.ln(),
        upper.ln(),
        QuadOptions::relative(tol),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RadialL1 {
        value: res.value + 0.5 * tail,
        error: res.error + 0.5 * tail,
        empty_elliptic_part: false,
    })
}

/// Shape of a predicted rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum RateForm {
    Constant,
    /// (1+t)^e
    Shifted { exponent: f64 },
    /// (1+t)^{max(a, b)}, both branches kept for reporting
    MaxOfShifted { a: f64, b: f64 },
    /// (1+R(t))^e
    OfR { exponent: f64 },
    /// (ln^[m](e^[m]+t))^e
    LogPower { m: u32, exponent: f64 },
    /// λ(t)^{-lambda_power}(1+t)^e
    LambdaShifted { lambda_power: f64, exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedRate {
    pub form: RateForm,
    pub flag: Option<String>,
    pub p_star: Option<f64>,
    /// Which estimate the rate comes from.
    pub anchor: String,
}

impl PredictedRate {
    pub fn evaluate(&self, profile: &CoefficientProfile, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(LabError::domain(format!("time must be >= 0, got {t}")));
        }
        Ok(match self.form {
            RateForm::Constant => 1.0,
            RateForm::Shifted { exponent } => (1.0 + t).powf(exponent),
            RateForm::MaxOfShifted { a, b } => (1.0 + t).powf(a.max(b)),
            RateForm::OfR { exponent } => (1.0 + profile.recip_primitive(t, AUX_TOL)?).powf(exponent),
            RateForm::LogPower { m, exponent } => {
                FitModel::LogPower { m }.abscissa(t, None)?.exp().powf(exponent)
            }
            RateForm::LambdaShifted { lambda_power, exponent } => {
                (exponent * t.ln_1p() - lambda_power * profile.log_lambda(t, AUX_TOL)?).exp()
            }
        })
    }

    /// Asymptotic exponent in the coordinate of `model`, when the rate is a
    /// pure power there.
    pub fn exponent_for(&self, model: FitModel, profile: &CoefficientProfile) -> Option<f64> {
        let shifted = matches!(model, FitModel::PowerOfShifted | FitModel::PowerLaw);
        match (self.form, model) {
            (RateForm::Constant, _) => Some(0.0),
            (RateForm::Shifted { exponent }, _) if shifted => Some(exponent),
            (RateForm::MaxOfShifted { a, b }, _) if shifted => Some(a.max(b)),
            (RateForm::OfR { exponent }, FitModel::PowerOfR) => Some(exponent),
            (RateForm::OfR { exponent }, _) if shifted => r_growth(profile).map(|g| g * exponent),
            (RateForm::LogPower { m, exponent }, FitModel::LogPower { m: mm }) if m == mm => Some(exponent),
            (RateForm::LambdaShifted { lambda_power, exponent }, _) if shifted => {
                lambda_growth(profile).map(|g| exponent - lambda_power * g)
            }
            _ => None,
        }
    }
}

/// γ with R(t) ≍ (1+t)^γ.
fn r_growth(profile: &CoefficientProfile) -> Option<f64> {
    match profile.kind() {
        ProfileKind::Constant { b0 } if *b0 > 0.0 => Some(1.0),
        ProfileKind::ScaleInvariant { mu } if *mu > 0.0 => Some(2.0),
        ProfileKind::Power { kappa, .. } if *kappa < 1.0 => Some(1.0 - kappa),
        ProfileKind::Integrable { sigma, .. } => Some(1.0 + sigma),
        _ => None,
    }
}

/// γ with λ(t) ≍ (1+t)^γ up to slower factors.
fn lambda_growth(profile: &CoefficientProfile) -> Option<f64> {
    match profile.kind() {
        ProfileKind::Zero | ProfileKind::Integrable { .. } | ProfileKind::IteratedLog { .. } => Some(0.0),
        ProfileKind::Constant { b0 } if *b0 == 0.0 => Some(0.0),
        ProfileKind::ScaleInvariant { mu } => Some(mu / 2.0),
        _ => None,
    }
}

fn regime_of(profile: &CoefficientProfile) -> Result<RegimeClass> {
    Ok(profile.classify_regime()?.class)
}

/// Predicted decay of ‖E(t)‖ from L^p to L^q data norms.
pub fn predicted_energy_rate(profile: &CoefficientProfile, query: &RateQuery) -> Result<PredictedRate> {
    query.validate()?;
    let n = query.n as f64;
    let d = query.d();
    let regime = regime_of(profile)?;
    let rate = |form, anchor: &str| PredictedRate {
        form,
        flag: None,
        p_star: None,
        anchor: anchor.to_string(),
    };
    Ok(match regime {
        RegimeClass::NonEffective => rate(
            RateForm::LambdaShifted {
                lambda_power: 1.0,
                exponent: -(n - 1.0) / 2.0 * d,
            },
            "non-effective estimate lambda^-1 (1+t)^{-(n-1)/2(1/p-1/q)}",
        ),
        RegimeClass::ScaleInvariantBorderline { mu_eff } => rate(
            RateForm::MaxOfShifted {
                a: -(n - 1.0) / 2.0 * d - mu_eff / 2.0,
                b: -n * d - 1.0,
            },
            "scale-invariant max-form max{-(n-1)/2(1/p-1/q) - mu/2, -n(1/p-1/q) - 1}",
        ),
        RegimeClass::Effective => {
            let e = -n / 2.0 * d - 0.5;
            match profile.kind() {
                ProfileKind::Power { kappa, .. } if *kappa == 1.0 => rate(
                    RateForm::LogPower { m: 1, exponent: e },
                    "logarithmic estimate for b = 1+t",
                ),
                ProfileKind::Power { kappa, .. } if *kappa < 1.0 => rate(
                    RateForm::Shifted {
                        exponent: (kappa - 1.0) * (n / 2.0 * d + 0.5),
                    },
                    "power-damping example (kappa-1)(n/2(1/p-1/q)+1/2)",
                ),
                _ => rate(RateForm::OfR { exponent: e }, "effective estimate (1+R)^{-n/2(1/p-1/q)-1/2}"),
            }
        }
        RegimeClass::OverDamping => PredictedRate {
            form: RateForm::Constant,
            flag: Some("over-damping: bounded (<~ 1), no decay".into()),
            p_star: None,
            anchor: "over-damping".into(),
        },
    })
}

/// liminf(1 − log_t λ(t)) for the non-effective solution estimate.
fn log_lambda_defect(profile: &CoefficientProfile) -> Result<(f64, bool)> {
    Ok(match profile.kind() {
        ProfileKind::Zero | ProfileKind::Integrable { .. } | ProfileKind::IteratedLog { .. } => (1.0, false),
        ProfileKind::Constant { b0 } if *b0 == 0.0 => (1.0, false),
        ProfileKind::ScaleInvariant { mu } => (1.0 - mu / 2.0, false),
        _ => {
            let horizon = 1e8;
            (1.0 - profile.log_lambda(horizon, 1e-10)? / f64::ln(horizon), true)
        }
    })
}

/// Predicted decay of ‖S(t)‖ together with the critical p*.
pub fn predicted_solution_rate(profile: &CoefficientProfile, query: &RateQuery) -> Result<PredictedRate> {
    query.validate()?;
    let n = query.n as f64;
    let d = query.d();
    let regime = regime_of(profile)?;
    if regime == RegimeClass::OverDamping {
        return Ok(PredictedRate {
            form: RateForm::Constant,
            flag: Some("over-damping: bounded (<~ 1), no decay".into()),
            p_star: None,
            anchor: "over-damping".into(),
        });
    }
    if !regime.uses_non_effective_geometry() {
        return Ok(PredictedRate {
            form: RateForm::OfR { exponent: -n / 2.0 * d },
            flag: None,
            p_star: None,
            anchor: "effective solution estimate (1+R)^{-n/2(1/p-1/q)}".into(),
        });
    }
    let (l, estimated) = log_lambda_defect(profile)?;
    let inv = 0.5 + l / (n + 1.0);
    let p_star = 1.0 / inv;
    let mut flags = Vec::new();
    if estimated {
        flags.push(format!("liminf(1 - log_t lambda) estimated at t = 1e8 as {l:.6}"));
    }
    if !(1.0..=2.0).contains(&p_star) {
        flags.push(format!("p* = {p_star:.6} outside [1, 2]: single branch"));
    }
    let form = if query.p < p_star {
        RateForm::LambdaShifted {
            lambda_power: 1.0,
            exponent: -(n - 1.0) / 2.0 * d,
        }
    } else {
        RateForm::LambdaShifted {
            lambda_power: 2.0,
            exponent: 1.0 - n * d,
        }
    };
    Ok(PredictedRate {
        form,
        flag: if flags.is_empty() { None } else { Some(flags.join("; ")) },
        p_star: Some(p_star),
        anchor: "non-effective solution estimate with critical p*".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharpnessVerdict {
    TwoSidedBounded,
    NotBounded,
}

/// Largest admissible C/c for a two-sided bound.
pub const BAND_RATIO: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub amplified: DecayCurve,
    pub amplifier: String,
    pub band_low: f64,
    pub band_high: f64,
    pub ratio: f64,
    pub verdict: SharpnessVerdict,
}

/// ‖E(t)‖ times λ(t) (non-effective) or √(1+R(t)) (effective), with a band
/// verdict over the given times.
pub fn sharpness_probe(
    profile: &CoefficientProfile,
    times: &[f64],
    xi_grid: &XiGrid,
    tol: f64,
) -> Result<SharpnessReport> {
    let regime = regime_of(profile)?;
    if regime == RegimeClass::OverDamping {
        return Err(LabError::RegimeMismatch(
            "over-damping has no decay to amplify; use the asymptotic state instead".into(),
        ));
    }
    let curve = l2_norm_curve(profile, times, xi_grid, tol)?;
    let ne = regime.uses_non_effective_geometry();
    let mut values = Vec::with_capacity(times.len());
    for (&t, &v) in times.iter().zip(&curve.values) {
        let log_amp = if ne {
            profile.log_lambda(t, AUX_TOL)?
        } else {
            0.5 * profile.recip_primitive(t, AUX_TOL)?.ln_1p()
        };
        values.push((v.ln() + log_amp).exp());
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut amplified = DecayCurve::new(times.to_vec(), values, curve.meta.clone())?;
    amplified.meta.norm = format!("{} amplified", curve.meta.norm);
    amplified.argmax = curve.argmax;
    amplified.warnings = curve.warnings;
    let ratio = hi / lo;
    Ok(SharpnessReport {
        amplified,
        amplifier: if ne { "lambda(t)".into() } else { "sqrt(1+R(t))".into() },
        band_low: lo,
        band_high: hi,
        ratio,
        verdict: if ratio <= BAND_RATIO {
            SharpnessVerdict::TwoSidedBounded
        } else {
            SharpnessVerdict::NotBounded
        },
    })
}

/// Log-spaced times in [a, b].
pub fn log_times(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
}
