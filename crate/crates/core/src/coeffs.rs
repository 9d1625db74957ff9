//! Dissipation coefficient families b(t) and their calculus.
//!
//! Every profile exposes b and its derivatives, the primitive
//! B(t) = ∫₀ᵗ b, the gauge λ(t) = exp(B(t)/2) and the reciprocal primitive
//! R(t) = ∫₀ᵗ dτ/b(τ). Closed forms are used where they exist; otherwise
//! adaptive quadrature runs in the logarithmic variable u = ln(1+τ), which
//! keeps integrands that decay or grow like powers of (1+τ) well resolved over
//! many decades.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quad::{integrate, QuadOptions};

/// e^[k]: e, e^e, e^(e^e).
const ITERATED_E: [f64; 3] = [std::f64::consts::E, 15.154_262_241_479_262, 3_814_279.104_760_214];

pub const MAX_ITERATED_LOG_DEPTH: u32 = 3;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    NonDecreasing,
    NonIncreasing,
}

/// Declared long-time behaviour of t·b(t) for a user-supplied profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeclaredAsymptotics {
    /// Estimate the limit by sampling t·b(t) geometrically up to `horizon`.
    Sampled { horizon: f64 },
}

/// A user-supplied coefficient with its first derivative.
#[derive(Clone)]
pub struct CustomProfile {
    pub name: String,
    pub b: ScalarFn,
    pub db: ScalarFn,
    pub monotonicity: Monotonicity,
    pub asymptotics: DeclaredAsymptotics,
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomProfile")
            .field("name", &self.name)
            .field("monotonicity", &self.monotonicity)
            .field("asymptotics", &self.asymptotics)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum ProfileKind {
    Zero,
    Constant { b0: f64 },
    /// μ/(1+t)
    ScaleInvariant { mu: f64 },
    /// c(1+t)^κ, κ > -1
    Power { c: f64, kappa: f64 },
    /// μ / ((1+t) ln(e+t) ⋯ ln^[m](e^[m]+t))
    IteratedLog { mu: f64, depth: u32 },
    /// c(1+t)^(-σ), σ > 1
    Integrable { c: f64, sigma: f64 },
    Custom(CustomProfile),
}

/// Serializable description of the built-in profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Zero,
    Constant { b0: f64 },
    ScaleInvariant { mu: f64 },
    Power { c: f64, kappa: f64 },
    IteratedLog { mu: f64, depth: u32 },
    Integrable { c: f64, sigma: f64 },
}

impl ProfileSpec {
    pub fn build(&self) -> Result<CoefficientProfile> {
        match *self {
            ProfileSpec::Zero => Ok(CoefficientProfile::zero()),
            ProfileSpec::Constant { b0 } => CoefficientProfile::constant(b0),
            ProfileSpec::ScaleInvariant { mu } => CoefficientProfile::scale_invariant(mu),
            ProfileSpec::Power { c, kappa } => CoefficientProfile::power(c, kappa),
            ProfileSpec::IteratedLog { mu, depth } => CoefficientProfile::iterated_log(mu, depth),
            ProfileSpec::Integrable { c, sigma } => CoefficientProfile::integrable(c, sigma),
        }
    }

    /// Names and parameter lists of the built-in kinds.
    pub fn catalogue() -> &'static [(&'static str, &'static str, &'static str)] {
        &[
            ("zero", "", "b(t) = 0"),
            ("constant", "b0 >= 0", "b(t) = b0"),
            ("scale_invariant", "mu >= 0", "b(t) = mu/(1+t)"),
            ("power", "c > 0, kappa > -1", "b(t) = c(1+t)^kappa"),
            (
                "iterated_log",
                "mu > 0, depth in 1..=3",
                "b(t) = mu/((1+t) ln(e+t) ... ln^[m](e^[m]+t))",
            ),
            ("integrable", "c > 0, sigma > 1", "b(t) = c(1+t)^(-sigma)"),
        ]
    }
}

/// An immutable dissipation coefficient.
#[derive(Debug, Clone)]
pub struct CoefficientProfile {
    kind: ProfileKind,
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(LabError::invalid(format!("{name} must be finite, got {v}")))
    }
}

impl CoefficientProfile {
    pub fn zero() -> Self {
        Self { kind: ProfileKind::Zero }
    }

    pub fn constant(b0: f64) -> Result<Self> {
        check_finite("b0", b0)?;
        if b0 < 0.0 {
            return Err(LabError::invalid("constant coefficient needs b0 >= 0"));
        }
        Ok(Self {
            kind: ProfileKind::Constant { b0 },
        })
    }

    pub fn scale_invariant(mu: f64) -> Result<Self> {
        check_finite("mu", mu)?;
        if mu < 0.0 {
            return Err(LabError::invalid("scale-invariant coefficient needs mu >= 0"));
        }
        Ok(Self {
            kind: ProfileKind::ScaleInvariant { mu },
        })
    }

    pub fn power(c: f64, kappa: f64) -> Result<Self> {
        check_finite("c", c)?;
        check_finite("kappa", kappa)?;
        if c <= 0.0 || kappa <= -1.0 {
            return Err(LabError::invalid("power coefficient needs c > 0 and kappa > -1"));
        }
        Ok(Self {
            kind: ProfileKind::Power { c, kappa },
        })
    }

    pub fn iterated_log(mu: f64, depth: u32) -> Result<Self> {
        check_finite("mu", mu)?;
        if mu <= 0.0 || depth == 0 || depth > MAX_ITERATED_LOG_DEPTH {
            return Err(LabError::invalid(format!(
                "iterated-log coefficient needs mu > 0 and depth in 1..={MAX_ITERATED_LOG_DEPTH}"
            )));
        }
        Ok(Self {
            kind: ProfileKind::IteratedLog { mu, depth },
        })
    }

    pub fn integrable(c: f64, sigma: f64) -> Result<Self> {
        check_finite("c", c)?;
        check_finite("sigma", sigma)?;
        if c <= 0.0 || sigma <= 1.0 {
            return Err(LabError::invalid("integrable coefficient needs c > 0 and sigma > 1"));
        }
        Ok(Self {
            kind: ProfileKind::Integrable { c, sigma },
        })
    }

    pub fn custom(profile: CustomProfile) -> Self {
        Self {
            kind: ProfileKind::Custom(profile),
        }
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn spec(&self) -> Option<ProfileSpec> {
        Some(match self.kind {
            ProfileKind::Zero => ProfileSpec::Zero,
            ProfileKind::Constant { b0 } => ProfileSpec::Constant { b0 },
            ProfileKind::ScaleInvariant { mu } => ProfileSpec::ScaleInvariant { mu },
            ProfileKind::Power { c, kappa } => ProfileSpec::Power { c, kappa },
            ProfileKind::IteratedLog { mu, depth } => ProfileSpec::IteratedLog { mu, depth },
            ProfileKind::Integrable { c, sigma } => ProfileSpec::Integrable { c, sigma },
            ProfileKind::Custom(_) => return None,
        })
    }

    pub fn label(&self) -> String {
        match &self.kind {
            ProfileKind::Zero => "zero".into(),
            ProfileKind::Constant { b0 } => format!("constant(b0={b0})"),
            ProfileKind::ScaleInvariant { mu } => format!("scale_invariant(mu={mu})"),
            ProfileKind::Power { c, kappa } => format!("power(c={c},kappa={kappa})"),
            ProfileKind::IteratedLog { mu, depth } => format!("iterated_log(mu={mu},depth={depth})"),
            ProfileKind::Integrable { c, sigma } => format!("integrable(c={c},sigma={sigma})"),
            ProfileKind::Custom(p) => format!("custom({})", p.name),
        }
    }

    fn check_time(t: f64) -> Result<()> {
        if t >= 0.0 && t.is_finite() {
            Ok(())
        } else {
            Err(LabError::domain(format!("time must be finite and >= 0, got {t}")))
        }
    }

    /// b(t) for t ≥ 0.
    pub fn b(&self, t: f64) -> Result<f64> {
        Self::check_time(t)?;
        Ok(self.b_unchecked(t))
    }

    /// b(t) without the domain check; callers guarantee t ≥ 0.
    pub fn b_unchecked(&self, t: f64) -> f64 {
        match &self.kind {
            ProfileKind::Zero => 0.0,
            ProfileKind::Constant { b0 } => *b0,
            ProfileKind::ScaleInvariant { mu } => mu / (1.0 + t),
            ProfileKind::Power { c, kappa } => c * (1.0 + t).powf(*kappa),
            ProfileKind::IteratedLog { mu, depth } => {
                let mut denom = 1.0 + t;
                for k in 1..=*depth {
                    denom *= iterated_ln(ITERATED_E[k as usize - 1] + t, k);
                }
                mu / denom
            }
            ProfileKind::Integrable { c, sigma } => c * (1.0 + t).powf(-sigma),
            ProfileKind::Custom(p) => (p.b)(t),
        }
    }

    /// k-th derivative of b at t.
    pub fn derivative(&self, t: f64, k: u32) -> Result<f64> {
        Ok(self.derivative_with_estimate(t, k)?.0)
    }

    /// k-th derivative with an error estimate (zero for closed forms).
    pub fn derivative_with_estimate(&self, t: f64, k: u32) -> Result<(f64, f64)> {
        Self::check_time(t)?;
        if k == 0 {
            return Ok((self.b_unchecked(t), 0.0));
        }
        let closed = match &self.kind {
            ProfileKind::Zero | ProfileKind::Constant { .. } => Some(0.0),
            ProfileKind::ScaleInvariant { mu } => {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let fact: f64 = (1..=k).map(f64::from).product();
                Some(sign * mu * fact / (1.0 + t).powi(k as i32 + 1))
            }
            ProfileKind::Power { c, kappa } => Some(c * falling(*kappa, k) * (1.0 + t).powf(kappa - k as f64)),
            ProfileKind::Integrable { c, sigma } => Some(c * falling(-sigma, k) * (1.0 + t).powf(-sigma - k as f64)),
            ProfileKind::IteratedLog { mu, depth } if k <= 2 => {
                let b = self.b_unchecked(t);
                let (g, dg) = iterated_log_log_derivatives(t, *depth);
                let _ = mu;
                Some(if k == 1 { b * g } else { b * (dg + g * g) })
            }
            ProfileKind::Custom(p) if k == 1 => Some((p.db)(t)),
            _ => None,
        };
        if let Some(v) = closed {
            return Ok((v, 0.0));
        }
        // finite differences of the next-lower derivative
        let lower = |s: f64| self.derivative_with_estimate(s, k - 1).map(|r| r.0).unwrap_or(f64::NAN);
        let (v, est) = richardson_derivative(lower, t);
        let scale = v.abs().max(self.b_unchecked(t).abs() / (1.0 + t).powi(k as i32)).max(f64::MIN_POSITIVE);
        if est > 1e-6 * scale {
            log::warn!("finite-difference derivative k={k} at t={t}: error estimate {est:e} exceeds 1e-6 relative");
        }
        Ok((v, est))
    }

    /// B(t) = ∫₀ᵗ b(τ)dτ.
    pub fn primitive(&self, t: f64, tol: f64) -> Result<f64> {
        Self::check_time(t)?;
        match &self.kind {
            ProfileKind::Zero => Ok(0.0),
            ProfileKind::Constant { b0 } => Ok(b0 * t),
            ProfileKind::ScaleInvariant { mu } => Ok(mu * t.ln_1p()),
            ProfileKind::Power { c, kappa } => {
                let e = kappa + 1.0;
                Ok(c * (e * t.ln_1p()).exp_m1() / e)
            }
            ProfileKind::Integrable { c, sigma } => Ok(-c * ((1.0 - sigma) * t.ln_1p()).exp_m1() / (sigma - 1.0)),
            _ => self.primitive_by_quadrature(t, tol),
        }
    }

    /// B(t) by adaptive quadrature regardless of closed forms.
    pub fn primitive_by_quadrature(&self, t: f64, tol: f64) -> Result<f64> {
        Self::check_time(t)?;
        check_tol(tol)?;
        let opts = QuadOptions {
            abs_tol: 2.0 * tol,
            rel_tol: 1e-14,
            max_intervals: 4000,
        };
        let r = integrate(
            |u| {
                let tau = u.exp_m1();
                self.b_unchecked(tau) * (1.0 + tau)
            },
            0.0,
            t.ln_1p(),
            opts,
        )?;
        Ok(r.value)
    }

    /// λ(t) = exp(B(t)/2), relative accuracy `tol`.
    pub fn lambda(&self, t: f64, tol: f64) -> Result<f64> {
        check_tol(tol)?;
        Ok((0.5 * self.primitive(t, tol)?).exp())
    }

    /// ln λ(t), usable where λ itself overflows.
    pub fn log_lambda(&self, t: f64, tol: f64) -> Result<f64> {
        check_tol(tol)?;
        Ok(0.5 * self.primitive(t, tol)?)
    }

    /// R(t) = ∫₀ᵗ dτ/b(τ).
    pub fn recip_primitive(&self, t: f64, tol: f64) -> Result<f64> {
        Self::check_time(t)?;
        check_tol(tol)?;
        match &self.kind {
            ProfileKind::Zero => Err(LabError::VanishingCoefficient { lower: 0.0, upper: t }),
            ProfileKind::Constant { b0 } => {
                if *b0 == 0.0 {
                    Err(LabError::VanishingCoefficient { lower: 0.0, upper: t })
                } else {
                    Ok(t / b0)
                }
            }
            ProfileKind::ScaleInvariant { mu } => {
                if *mu == 0.0 {
                    Err(LabError::VanishingCoefficient { lower: 0.0, upper: t })
                } else {
                    Ok(t * (t + 2.0) / (2.0 * mu))
                }
            }
            ProfileKind::Power { c, kappa } => {
                if *kappa == 1.0 {
                    Ok(t.ln_1p() / c)
                } else {
                    let e = 1.0 - kappa;
                    Ok((e * t.ln_1p()).exp_m1() / (c * e))
                }
            }
            ProfileKind::Integrable { c, sigma } => {
                let e = 1.0 + sigma;
                Ok((e * t.ln_1p()).exp_m1() / (c * e))
            }
            _ => self.recip_primitive_by_quadrature(t, tol),
        }
    }

    /// R(t) by quadrature; rejects coefficients vanishing on a subinterval.
    pub fn recip_primitive_by_quadrature(&self, t: f64, tol: f64) -> Result<f64> {
        Self::check_time(t)?;
        check_tol(tol)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        // a vanishing sample away from τ = 0 means b = 0 on a set we cannot integrate 1/b over
        let probes = 64;
        for i in 1..=probes {
            let tau = t * i as f64 / probes as f64;
            if self.b_unchecked(tau) <= 0.0 {
                return Err(LabError::VanishingCoefficient {
                    lower: t * (i - 1) as f64 / probes as f64,
                    upper: tau,
                });
            }
        }
        let opts = QuadOptions {
            abs_tol: 1e-300,
            rel_tol: tol,
            max_intervals: 4000,
        };
        let r = integrate(
            |u| {
                let tau = u.exp_m1();
                (1.0 + tau) / self.b_unchecked(tau)
            },
            0.0,
            t.ln_1p(),
            opts,
        )
        .map_err(|e| match e {
            LabError::Quadrature { achieved, .. } if !achieved.is_finite() => {
                LabError::VanishingCoefficient { lower: 0.0, upper: t }
            }
            other => other,
        })?;
        Ok(r.value)
    }

    /// R(∞) when 1/b is integrable and a closed form is known.
    pub fn recip_primitive_limit(&self) -> Option<f64> {
        match self.kind {
            ProfileKind::Power { c, kappa } if kappa > 1.0 => Some(1.0 / (c * (kappa - 1.0))),
            _ => None,
        }
    }

    /// Declared or closed-form monotonicity.
    pub fn monotonicity(&self) -> Monotonicity {
        match &self.kind {
            ProfileKind::Zero | ProfileKind::Constant { .. } => Monotonicity::NonIncreasing,
            ProfileKind::ScaleInvariant { .. } | ProfileKind::IteratedLog { .. } | ProfileKind::Integrable { .. } => {
                Monotonicity::NonIncreasing
            }
            ProfileKind::Power { kappa, .. } => {
                if *kappa >= 0.0 {
                    Monotonicity::NonDecreasing
                } else {
                    Monotonicity::NonIncreasing
                }
            }
            ProfileKind::Custom(p) => p.monotonicity,
        }
    }

    /// Solves b(τ) = level on [lo, hi] by bisection, assuming a sign change.
    pub fn crossing_time(&self, level: f64, lo: f64, hi: f64) -> f64 {
        let (mut a, mut b) = (lo, hi);
        let fa = self.b_unchecked(a) - level;
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = self.b_unchecked(m) - level;
            if (fm > 0.0) == (fa > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Regime classification by the long-time behaviour of t·b(t).
    pub fn classify_regime(&self) -> Result<RegimeReport> {
        let (limit, b_int, inv_int, b_limsup) = match &self.kind {
            ProfileKind::Zero => (TbLimit::Zero, true, false, 0.0),
            ProfileKind::Constant { b0 } => {
                if *b0 == 0.0 {
                    (TbLimit::Zero, true, false, 0.0)
                } else {
                    (TbLimit::Infinite, false, false, *b0)
                }
            }
            ProfileKind::ScaleInvariant { mu } => {
                if *mu == 0.0 {
                    (TbLimit::Zero, true, false, 0.0)
                } else {
                    (TbLimit::Finite(*mu), false, false, 0.0)
                }
            }
            ProfileKind::Power { c, kappa } => {
                let limsup = if *kappa < 0.0 {
                    0.0
                } else if *kappa == 0.0 {
                    *c
                } else {
                    f64::INFINITY
                };
                (TbLimit::Infinite, false, *kappa > 1.0, limsup)
            }
            ProfileKind::IteratedLog { .. } => (TbLimit::Zero, false, false, 0.0),
            ProfileKind::Integrable { .. } => (TbLimit::Zero, true, false, 0.0),
            ProfileKind::Custom(p) => {
                let DeclaredAsymptotics::Sampled { horizon } = p.asymptotics;
                sample_custom_asymptotics(self, horizon)?
            }
        };
        let class = match limit {
            TbLimit::Zero => RegimeClass::NonEffective,
            TbLimit::Finite(mu) if mu < 1.0 => RegimeClass::NonEffective,
            TbLimit::Finite(mu) => RegimeClass::ScaleInvariantBorderline { mu_eff: mu },
            TbLimit::Infinite if inv_int => RegimeClass::OverDamping,
            TbLimit::Infinite => RegimeClass::Effective,
        };
        let literal_ne = b_limsup < 1.0;
        let ours_ne = class == RegimeClass::NonEffective;
        Ok(RegimeReport {
            class,
            tb_limit: limit,
            b_integrable: b_int,
            inverse_b_integrable: inv_int,
            literal_condition_disagrees: literal_ne != ours_ne,
        })
    }

    /// Empirical hypothesis constants Ĉ_k = max |b^(k)|(1+t)^k / b over samples.
    pub fn check_hypotheses(&self, t_samples: &[f64], k_max: u32) -> Result<HypothesisReport> {
        if t_samples.is_empty() {
            return Err(LabError::invalid("check_hypotheses needs at least one sample"));
        }
        if k_max > 3 {
            return Err(LabError::invalid("check_hypotheses supports k_max <= 3"));
        }
        let mut samples = t_samples.to_vec();
        for &t in &samples {
            Self::check_time(t)?;
        }
        samples.sort_by(f64::total_cmp);
        let values: Vec<f64> = samples.iter().map(|&t| self.b_unchecked(t)).collect();
        let positive = values.iter().all(|&v| v >= 0.0);
        let zero_samples: Vec<f64> = samples
            .iter()
            .zip(&values)
            .filter(|(_, &v)| v == 0.0)
            .map(|(&t, _)| t)
            .collect();
        let slack = |a: f64, b: f64| 1e-13 * a.abs().max(b.abs());
        let nondecreasing = values.windows(2).all(|w| w[1] >= w[0] - slack(w[0], w[1]));
        let nonincreasing = values.windows(2).all(|w| w[1] <= w[0] + slack(w[0], w[1]));
        let mut constants = Vec::with_capacity(k_max as usize);
        for k in 1..=k_max {
            let mut c_hat: f64 = 0.0;
            for (&t, &b) in samples.iter().zip(&values) {
                if b == 0.0 {
                    continue;
                }
                let d = self.derivative(t, k)?;
                c_hat = c_hat.max(d.abs() * (1.0 + t).powi(k as i32) / b);
            }
            constants.push(c_hat);
        }
        Ok(HypothesisReport {
            constants,
            positive,
            monotone: nondecreasing || nonincreasing,
            zero_samples,
        })
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(LabError::invalid(format!("tolerance must be positive, got {tol}")))
    }
}

/// κ(κ-1)⋯(κ-k+1)
fn falling(kappa: f64, k: u32) -> f64 {
    (0..k).map(|j| kappa - j as f64).product()
}

/// ln^[k](x), k-fold iterated natural logarithm.
pub fn iterated_ln(x: f64, k: u32) -> f64 {
    (0..k).fold(x, |acc, _| acc.ln())
}

/// e^[k]
pub fn iterated_exp(k: u32) -> f64 {
    match k {
        0 => 1.0,
        1..=3 => ITERATED_E[k as usize - 1],
        _ => f64::INFINITY,
    }
}

/// g = b'/b and g' for the iterated-log family.
fn iterated_log_log_derivatives(t: f64, depth: u32) -> (f64, f64) {
    // b'/b = -Σ_{k=0}^m 1/P_k with P_0 = 1+t and P_k = Π_{j=0}^k ln^[j](e^[k]+t)
    let mut g = -1.0 / (1.0 + t);
    let mut dg = 1.0 / ((1.0 + t) * (1.0 + t));
    for k in 1..=depth {
        let x = ITERATED_E[k as usize - 1] + t;
        let mut l = x;
        let mut p = x;
        let mut dlogp = 1.0 / x; // Σ_{j≤k} 1/p_j
        for _ in 1..=k {
            l = l.ln();
            p *= l;
            dlogp += 1.0 / p;
        }
        g -= 1.0 / p;
        dg += dlogp / p;
    }
    (g, dg)
}

/// First derivative by central (or forward, near 0) differences with one
/// Richardson step; returns (value, error estimate).
fn richardson_derivative<F: Fn(f64) -> f64>(f: F, t: f64) -> (f64, f64) {
    let h = 1e-2 * (1.0 + t);
    if t >= h {
        let d = |h: f64| (f(t + h) - f(t - h)) / (2.0 * h);
        let (d1, d2) = (d(h), d(h / 2.0));
        let r = (4.0 * d2 - d1) / 3.0;
        let (d3, d4) = (d(h / 4.0), d(h / 8.0));
        let r2 = (4.0 * d4 - d3) / 3.0;
        let best = (16.0 * r2 - r) / 15.0;
        (best, (best - r2).abs())
    } else {
        let h = 1e-3 * (1.0 + t);
        let d = |h: f64| (-3.0 * f(t) + 4.0 * f(t + h) - f(t + 2.0 * h)) / (2.0 * h);
        let (d1, d2) = (d(h), d(h / 2.0));
        let r = (4.0 * d2 - d1) / 3.0;
        (r, (r - d2).abs())
    }
}

fn sample_custom_asymptotics(profile: &CoefficientProfile, horizon: f64) -> Result<(TbLimit, bool, bool, f64)> {
    if !(horizon > 10.0) || !horizon.is_finite() {
        return Err(LabError::invalid("custom profile horizon must exceed 10"));
    }
    let n = 40;
    let t0 = horizon / 1e3;
    let ts: Vec<f64> = (0..=n).map(|i| t0 * (horizon / t0).powf(i as f64 / n as f64)).collect();
    let v: Vec<f64> = ts.iter().map(|&t| t * profile.b_unchecked(t)).collect();
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(LabError::Unclassifiable("t·b(t) not finite and non-negative on the horizon".into()));
    }
    let inc: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
    let last = *v.last().unwrap();
    let tail = &inc[inc.len() / 2..];
    let increasing = inc.iter().all(|&d| d >= -1e-12 * last.abs());
    let decreasing = inc.iter().all(|&d| d <= 1e-12 * last.abs());
    let tail_change = tail.iter().map(|d| d.abs()).sum::<f64>();
    let limit = if last.abs() < 1e-8 || (decreasing && last < 1e-3 * v[0].max(1e-300)) {
        TbLimit::Zero
    } else if tail_change <= 1e-3 * last.abs() {
        TbLimit::Finite(last)
    } else if increasing && last > 1e3 * v[0].max(1e-300) {
        TbLimit::Infinite
    } else if decreasing || increasing {
        // monotone but neither settled nor clearly divergent
        let ratio = tail.last().unwrap().abs() / tail.first().unwrap().abs().max(1e-300);
        if increasing && ratio >= 0.5 {
            TbLimit::Infinite
        } else if ratio < 0.5 {
            TbLimit::Finite(last)
        } else {
            return Err(LabError::Unclassifiable("sampled t·b(t) neither converges nor diverges".into()));
        }
    } else {
        return Err(LabError::Unclassifiable("sampled t·b(t) is not monotone on the horizon".into()));
    };
    // integrability of b and 1/b from the decay of decade contributions
    let decade = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| -> f64 {
        integrate(|u| f(u.exp()) * u.exp(), a.ln(), b.ln(), QuadOptions::relative(1e-6))
            .map(|r| r.value)
            .unwrap_or(f64::INFINITY)
    };
    let b_fn = |t: f64| profile.b_unchecked(t);
    let inv_fn = |t: f64| 1.0 / profile.b_unchecked(t);
    let shrink = |f: &dyn Fn(f64) -> f64| {
        let a = decade(f, horizon / 100.0, horizon / 10.0);
        let b = decade(f, horizon / 10.0, horizon);
        b.is_finite() && b < 0.5 * a
    };
    let limsup_b = profile.b_unchecked(horizon);
    Ok((limit, shrink(&b_fn), shrink(&inv_fn), limsup_b))
}

/// Long-time behaviour of t·b(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TbLimit {
    Zero,
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeClass {
    NonEffective,
    ScaleInvariantBorderline { mu_eff: f64 },
    Effective,
    OverDamping,
}

impl RegimeClass {
    /// Whether rate predictions and zone geometry follow the non-effective
    /// picture. Borderline profiles with μ ≤ 2 keep the non-effective rates.
    pub fn uses_non_effective_geometry(&self) -> bool {
        match self {
            RegimeClass::NonEffective => true,
            RegimeClass::ScaleInvariantBorderline { mu_eff } => *mu_eff <= 2.0,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub class: RegimeClass,
    pub tb_limit: TbLimit,
    pub b_integrable: bool,
    pub inverse_b_integrable: bool,
    /// The literal condition `limsup b < 1` gives a different verdict than
    /// `limsup t·b < 1`.
    pub literal_condition_disagrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// Ĉ_1, …, Ĉ_kmax
    pub constants: Vec<f64>,
    pub positive: bool,
    pub monotone: bool,
    /// Samples where b(t) = 0, excluded from the ratios.
    pub zero_samples: Vec<f64>,
}
