//! Per-frequency fundamental solutions and the multipliers built from them.
//!
//! Φ₁ and Φ₂ solve û'' + ξ²û + b(t)û' = 0 with Φ₁(s) = 1, ∂ₜΦ₁(s) = 0,
//! Φ₂(s) = 0, D_tΦ₂(s) = 1 where D_t = -i∂ₜ. With M(t, s) the real
//! fundamental matrix of the first-order system, Φ₁ = M₀₀, ∂ₜΦ₁ = M₁₀,
//! Φ₂ = iM₀₁ and ∂ₜΦ₂ = iM₁₁.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientProfile;
use crate::error::{LabError, Result};
use crate::mat2::{CMat2, Mat2};
use crate::ode::{propagate, OdeOptions, Propagation};
use crate::quad::gk15_nodes;
use crate::special::bessel_jy;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub xi: f64,
    pub bracket: f64,
}

impl FrequencyPoint {
    pub fn new(xi: f64) -> Result<Self> {
        if !(xi >= 0.0 && xi.is_finite()) {
            return Err(LabError::domain(format!("frequency must be finite and >= 0, got {xi}")));
        }
        Ok(Self {
            xi,
            bracket: xi.hypot(1.0),
        })
    }
}

/// (Φ₁, Φ₂, ∂ₜΦ₁, ∂ₜΦ₂) at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FundamentalValues {
    pub phi1: Complex64,
    pub phi2: Complex64,
    pub dphi1: Complex64,
    pub dphi2: Complex64,
}

impl FundamentalValues {
    pub fn from_matrix(m: &Mat2) -> Self {
        let [[a, b], [c, d]] = m.0;
        Self {
            phi1: a.into(),
            phi2: I * b,
            dphi1: c.into(),
            dphi2: I * d,
        }
    }

    pub fn wronskian(&self) -> Complex64 {
        self.phi1 * self.dphi2 - self.phi2 * self.dphi1
    }

    fn max_abs_diff(&self, o: &Self) -> f64 {
        [
            (self.phi1 - o.phi1).norm(),
            (self.phi2 - o.phi2).norm(),
            (self.dphi1 - o.dphi1).norm(),
            (self.dphi2 - o.dphi2).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Largest entry-wise modulus difference.
    pub fn distance(&self, o: &Self) -> f64 {
        self.max_abs_diff(o)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalSample {
    pub t: f64,
    pub values: FundamentalValues,
    pub error_estimate: f64,
    /// |W(t)·exp(∫ₛᵗb) - W(s)|
    pub wronskian_residual: f64,
    /// Part of the residual attributable to floating-point cancellation: a
    /// few ulps per step times (|Φ₁∂Φ₂| + |Φ₂∂Φ₁|)/|W(s)e^{-∫b}|.
    pub wronskian_rounding_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalPair {
    pub s: f64,
    pub xi: FrequencyPoint,
    pub samples: Vec<FundamentalSample>,
    pub matrices: Vec<Mat2>,
    pub steps: usize,
    pub warning: Option<String>,
}

impl FundamentalPair {
    /// Whether every sample meets |residual| ≤ 100·tol + rounding floor.
    pub fn wronskian_ok(&self, tol: f64) -> bool {
        self.samples
            .iter()
            .all(|s| s.wronskian_residual <= 100.0 * tol + s.wronskian_rounding_floor)
    }
}

/// Real fundamental matrices M(t, s) on the grid.
pub fn fundamental_matrices(
    profile: &CoefficientProfile,
    xi: f64,
    s: f64,
    t_grid: &[f64],
    tol: f64,
) -> Result<Propagation> {
    if !(tol > 0.0) {
        return Err(LabError::invalid("tolerance must be positive"));
    }
    propagate(|t| profile.b_unchecked(t), xi, s, t_grid, &OdeOptions::with_tol(tol))
}

/// Wronskian residual and its rounding floor for a fundamental matrix with
/// ΔB = ∫ₛᵗ b, built from `steps` matrix products. Each product perturbs
/// the entries by a few ulps of the largest term, so the floor grows
/// linearly with the step count.
/// The matrix is passed as `m · exp(log_scale)`.
pub fn wronskian_residual(m: &Mat2, log_scale: f64, delta_b: f64, steps: usize) -> (f64, f64) {
    // normalise first: det itself may underflow while the entries do not
    let size = m.max_abs();
    if !(size > 0.0) || !size.is_finite() {
        return (f64::INFINITY, 0.0);
    }
    let n = m.scale(1.0 / size);
    let ln_scale = 2.0 * (size.ln() + log_scale) + delta_b;
    let det = n.det_accurate();
    let residual = if det > 0.0 {
        (det.ln() + ln_scale).exp_m1().abs()
    } else {
        1.0 + (det.abs().ln() + ln_scale).exp()
    };
    let [[a, b], [c, d]] = n.0;
    let products = (a * d).abs() + (b * c).abs();
    // summing ΔB step by step costs a further ulp of |ΔB| in the exponent
    let floor = 4.0 * f64::EPSILON * ((1.0 + steps as f64) * (products.ln() + ln_scale).exp() + delta_b.abs());
    (residual, floor)
}

pub fn solve_fundamental(
    profile: &CoefficientProfile,
    xi: FrequencyPoint,
    s: f64,
    t_grid: &[f64],
    tol: f64,
) -> Result<FundamentalPair> {
    let prop = fundamental_matrices(profile, xi.xi, s, t_grid, tol)?;
    let b_s = profile.primitive(s, tol)?;
    let mut samples = Vec::with_capacity(t_grid.len());
    let mut worst: f64 = 0.0;
    for (i, (&t, m)) in prop.times.iter().zip(&prop.states).enumerate() {
        let err = prop.error_estimates[i];
        let delta_b = profile.primitive(t, tol)? - b_s;
        let (residual, floor) = wronskian_residual(&prop.scaled_states[i], prop.log_scales[i], delta_b, prop.step_counts[i]);
        worst = worst.max(err);
        samples.push(FundamentalSample {
            t,
            values: FundamentalValues::from_matrix(m),
            error_estimate: err,
            wronskian_residual: residual,
            wronskian_rounding_floor: floor,
        });
    }
    let warning = (worst > 1e3 * tol).then(|| {
        log::warn!("xi={}: accumulated error estimate {worst:e} exceeds tolerance {tol:e}", xi.xi);
        format!("accumulated error estimate {worst:e} exceeds tolerance {tol:e}")
    });
    Ok(FundamentalPair {
        s,
        xi,
        samples,
        matrices: prop.states,
        steps: prop.steps,
        warning,
    })
}

/// Closed form for constant damping b₀ ≥ 0, with s = 0.
pub fn oracle_constant(b0: f64, xi: f64, t: f64) -> FundamentalValues {
    // u = e^{at}(C cosh δt + D sinh δt/δ), a = -b₀/2, δ² = b₀²/4 - ξ²
    let a = -0.5 * b0;
    let d2 = 0.25 * b0 * b0 - xi * xi;
    let x2 = d2 * t * t;
    // with c = cosh δt, sc = sinh δt/δ: Φ₁ = e^{at}(c - a·sc), ψ = e^{at}sc,
    // Φ₁' = e^{at}(δ² - a²)sc, ψ' = e^{at}(c + a·sc)
    let (phi1, dphi1, psi, dpsi) = if x2.abs() < 1e-3 {
        let c = 1.0 + x2 / 2.0 + x2 * x2 / 24.0 + x2 * x2 * x2 / 720.0;
        let sc = t * (1.0 + x2 / 6.0 + x2 * x2 / 120.0 + x2 * x2 * x2 / 5040.0);
        let e = (a * t).exp();
        (e * (c - a * sc), e * (d2 - a * a) * sc, e * sc, e * (a * sc + c))
    } else if d2 > 0.0 {
        // real roots r± = a ± δ; r₊ = -ξ²/(δ - a) avoids cancellation
        let d = d2.sqrt();
        let rp = -xi * xi / (d - a);
        let rm = a - d;
        let (ep, em) = ((rp * t).exp(), (rm * t).exp());
        let c = 0.5 * (ep + em); // e^{at} cosh δt
        let sc = 0.5 * (ep - em) / d; // e^{at} sinh δt / δ
        (c - a * sc, (d2 - a * a) * sc, sc, a * sc + c)
    } else {
        let w = (-d2).sqrt();
        let e = (a * t).exp();
        let (c, sc) = ((w * t).cos(), (w * t).sin() / w);
        (e * (c - a * sc), e * (d2 - a * a) * sc, e * sc, e * (a * sc + c))
    };
    FundamentalValues {
        phi1: phi1.into(),
        phi2: I * psi,
        dphi1: dphi1.into(),
        dphi2: I * dpsi,
    }
}

/// Real basis (u, u') of the scale-invariant equation: τ^ν Z_|ν|(τ),
/// τ = ξ(1+t), ν = (1-μ)/2, for Z = J and Z = Y.
fn scale_invariant_basis(mu: f64, xi: f64, t: f64) -> Result<[[f64; 2]; 2]> {
    let nu = 0.5 * (1.0 - mu);
    let tau = xi * (1.0 + t);
    let bj = bessel_jy(nu.abs(), tau)?;
    let p = tau.powf(nu);
    let dp = nu * tau.powf(nu - 1.0);
    Ok([
        [p * bj.j, xi * (dp * bj.j + p * bj.jp)],
        [p * bj.y, xi * (dp * bj.y + p * bj.yp)],
    ])
}

/// Coefficients of (Φ₁, ψ) in the J/Y basis from the data at t = 0.
fn scale_invariant_coefficients(mu: f64, xi: f64) -> Result<[[f64; 2]; 2]> {
    let [[j0, dj0], [y0, dy0]] = scale_invariant_basis(mu, xi, 0.0)?;
    let w = j0 * dy0 - y0 * dj0;
    if w == 0.0 || !w.is_finite() {
        return Err(LabError::domain("degenerate Bessel basis at t = 0"));
    }
    // [j0 y0; dj0 dy0][α β]ᵀ = e_k
    Ok([[dy0 / w, -dj0 / w], [-y0 / w, j0 / w]])
}

fn scale_invariant_real(mu: f64, xi: f64, t: f64, coef: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let [[j, dj], [y, dy]] = scale_invariant_basis(mu, xi, t)?;
    let [[a1, b1], [a2, b2]] = *coef;
    Ok([[a1 * j + b1 * y, a1 * dj + b1 * dy], [a2 * j + b2 * y, a2 * dj + b2 * dy]])
}

/// Eighth-order central difference weights for the first derivative.
const FD8: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];

/// Relative residual of (u, u') rows substituted into u'' + ξ²u + bu' = 0,
/// with the derivative taken by central differences of step h.
fn substituted_residual(eval: impl Fn(f64) -> Result<[[f64; 2]; 2]>, xi: f64, b: f64, t: f64, h: f64) -> Result<f64> {
    let centre = eval(t)?;
    let mut deriv = [[0.0; 2]; 2];
    for (k, w) in FD8.iter().enumerate() {
        let d = (k + 1) as f64 * h;
        let plus = eval(t + d)?;
        let minus = eval(t - d)?;
        for i in 0..2 {
            for j in 0..2 {
                deriv[i][j] += w * (plus[i][j] - minus[i][j]) / h;
            }
        }
    }
    let xw = xi.max(1.0);
    let mut worst: f64 = 0.0;
    for (i, row) in centre.iter().enumerate() {
        let [u, du] = *row;
        let scale1 = xw * u.abs() + du.abs();
        let scale2 = xw * scale1 + b * du.abs();
        let r1 = (deriv[i][0] - du).abs() / scale1;
        let r2 = (deriv[i][1] + xi * xi * u + b * du).abs() / scale2;
        worst = worst.max(r1).max(r2);
    }
    Ok(worst)
}

/// Relative residual of the first-order system for the Bessel oracle at t.
pub fn scale_invariant_residual(mu: f64, xi: f64, t: f64) -> Result<f64> {
    let coef = scale_invariant_coefficients(mu, xi)?;
    let h = (0.02 * (1.0 + t) / (1.0 + mu)).min(0.08 / xi.max(1.0));
    substituted_residual(|x| scale_invariant_real(mu, xi, x, &coef), xi, mu / (1.0 + t), t, h)
}

/// Relative residual of the constant-damping closed form at t.
pub fn constant_residual(b0: f64, xi: f64, t: f64) -> Result<f64> {
    if !(b0 >= 0.0 && xi >= 0.0 && t >= 0.0) {
        return Err(LabError::domain(format!("need b0, xi, t >= 0; got ({b0}, {xi}, {t})")));
    }
    let h = 0.08 / xi.max(b0).max(1.0);
    let eval = |x: f64| {
        let v = oracle_constant(b0, xi, x);
        Ok([[v.phi1.re, v.dphi1.re], [v.phi2.im, v.dphi2.im]])
    };
    substituted_residual(eval, xi, b0, t, h)
}

/// Bessel-function oracle for b = μ/(1+t), s = 0. The result is only
/// returned when the substituted residual is at most 1e-10.
pub fn oracle_scale_invariant(mu: f64, xi: f64, t: f64) -> Result<FundamentalValues> {
    if !(mu >= 0.0 && mu.is_finite()) || !(xi > 0.0 && xi.is_finite()) || !(t >= 0.0 && t.is_finite()) {
        return Err(LabError::domain(format!("oracle needs mu >= 0, xi > 0, t >= 0; got ({mu}, {xi}, {t})")));
    }
    let coef = scale_invariant_coefficients(mu, xi)?;
    let [[p1, dp1], [psi, dpsi]] = scale_invariant_real(mu, xi, t, &coef)?;
    let residual = scale_invariant_residual(mu, xi, t)?;
    if !(residual <= 1e-10) {
        return Err(LabError::domain(format!(
            "Bessel oracle residual {residual:e} exceeds 1e-10 at (mu={mu}, xi={xi}, t={t})"
        )));
    }
    Ok(FundamentalValues {
        phi1: p1.into(),
        phi2: I * psi,
        dphi1: dp1.into(),
        dphi2: I * dpsi,
    })
}

/// Energy multiplier from a real fundamental matrix.
pub fn energy_from_matrix(m: &Mat2, xi: FrequencyPoint) -> CMat2 {
    let [[a, b], [c, d]] = m.0;
    let r = xi.xi / xi.bracket;
    CMat2([
        [(r * a).into(), I * (xi.xi * b)],
        [-I * (c / xi.bracket), d.into()],
    ])
}

/// Real matrix unitarily equivalent to the energy multiplier (same singular
/// values): diag(1, i)·E·diag(1, -i).
pub fn energy_real_equivalent(m: &Mat2, xi: FrequencyPoint) -> Mat2 {
    let [[a, b], [c, d]] = m.0;
    Mat2::new(xi.xi / xi.bracket * a, xi.xi * b, c / xi.bracket, d)
}

pub fn energy_multiplier(profile: &CoefficientProfile, xi: FrequencyPoint, t: f64, tol: f64) -> Result<CMat2> {
    let p = fundamental_matrices(profile, xi.xi, 0.0, &[t], tol)?;
    Ok(energy_from_matrix(&p.states[0], xi))
}

/// Row (Φ₁, ⟨ξ⟩Φ₂).
pub fn solution_from_matrix(m: &Mat2, xi: FrequencyPoint) -> [Complex64; 2] {
    [m.0[0][0].into(), I * (xi.bracket * m.0[0][1])]
}

pub fn solution_multiplier(
    profile: &CoefficientProfile,
    xi: FrequencyPoint,
    t: f64,
    tol: f64,
) -> Result<[Complex64; 2]> {
    let p = fundamental_matrices(profile, xi.xi, 0.0, &[t], tol)?;
    Ok(solution_from_matrix(&p.states[0], xi))
}

/// Unitary free-wave propagator on (|ξ|û, D_tû).
pub fn free_propagator(xi: f64, t: f64) -> CMat2 {
    let (s, c) = (xi * t).sin_cos();
    CMat2([[c.into(), I * s], [I * s, c.into()]])
}

/// max over the grid of |v'' + (ξ² - b²/4 - b'/2)v| / max|v| for v = λû,
/// with û = Φ₁ and û = ψ.
pub fn kg_transform_residual(profile: &CoefficientProfile, xi: f64, t_grid: &[f64], tol: f64) -> Result<f64> {
    let p = fundamental_matrices(profile, xi, 0.0, t_grid, tol)?;
    let mut worst: f64 = 0.0;
    for col in 0..2 {
        let mut rows = Vec::with_capacity(t_grid.len());
        for (&t, m) in p.times.iter().zip(&p.states) {
            let [u, du] = m.col(col);
            let b = profile.b_unchecked(t);
            let db = profile.derivative(t, 1)?;
            let ln_lambda = profile.log_lambda(t, tol)?;
            // λ' = bλ/2, λ'' = (b'/2 + b²/4)λ, û'' from the equation
            let ddu = -xi * xi * u - b * du;
            let v_over = u;
            let dd_over = (0.5 * db + 0.25 * b * b) * u + b * du + ddu;
            let r = dd_over + (xi * xi - 0.25 * b * b - 0.5 * db) * v_over;
            rows.push((ln_lambda, v_over.abs(), r.abs()));
        }
        let top = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
        let scale = rows.iter().map(|r| (r.0 - top).exp() * r.1).fold(0.0, f64::max);
        if scale == 0.0 {
            continue;
        }
        for (ll, _, r) in rows {
            worst = worst.max((ll - top).exp() * r / scale);
        }
    }
    Ok(worst)
}

/// Composite Kronrod nodes covering [t1, t2] with panels short against
/// oscillation (1/ξ), the slow decay, (1+t), and the fast transient (1/b)
/// until ∫₀ᵗb has damped it out.
fn dissipation_nodes(profile: &CoefficientProfile, xi: f64, t1: f64, t2: f64) -> Vec<(f64, f64)> {
    let mut nodes = Vec::new();
    let mut a = t1;
    let mut transient = true;
    while a < t2 {
        let b = profile.b_unchecked(a).max(profile.b_unchecked((a + 1e-3 * (1.0 + a)).min(t2)));
        let mut len = 0.25 * (1.0 + a);
        if xi > 0.5 * b {
            len = len.min(1.5 / xi);
        } else if xi > 0.0 {
            let half = 0.5 * b;
            let slow = xi * xi / (half + ((half - xi) * (half + xi)).sqrt());
            len = len.min(1.0 / slow);
        }
        if transient {
            transient = profile.primitive(a, 1e-10).map_or(true, |p| p < 40.0);
        }
        if transient && b > 0.0 {
            len = len.min(1.0 / b);
        }
        let end = (a + len).min(t2);
        nodes.extend(gk15_nodes(a, end));
        a = end;
    }
    nodes
}

/// Relative residual of y(t₂) - y(t₁) + 2∫b|∂ₜû|² for y = ξ²|û|² + |∂ₜû|²
/// and û = c₁Φ₁ + c₂Φ₂ started at s = 0.
pub fn dissipation_residual(
    profile: &CoefficientProfile,
    xi: f64,
    data: [Complex64; 2],
    t1: f64,
    t2: f64,
    tol: f64,
) -> Result<f64> {
    if !(t2 > t1 && t1 >= 0.0) {
        return Err(LabError::invalid("dissipation check needs 0 <= t1 < t2"));
    }
    let nodes = dissipation_nodes(profile, xi, t1, t2);
    let mut grid = Vec::with_capacity(nodes.len() + 2);
    grid.push(t1);
    grid.extend(nodes.iter().map(|n| n.0));
    grid.push(t2);
    let p = fundamental_matrices(profile, xi, 0.0, &grid, tol)?;
    let state = |m: &Mat2| {
        let v = FundamentalValues::from_matrix(m);
        let u = data[0] * v.phi1 + data[1] * v.phi2;
        let du = data[0] * v.dphi1 + data[1] * v.dphi2;
        (u, du)
    };
    let energy = |m: &Mat2| {
        let (u, du) = state(m);
        xi * xi * u.norm_sqr() + du.norm_sqr()
    };
    let y1 = energy(&p.states[0]);
    let y2 = energy(p.states.last().unwrap());
    let integral: f64 = nodes
        .iter()
        .zip(&p.states[1..p.states.len() - 1])
        .map(|(&(t, w), m)| w * profile.b_unchecked(t) * state(m).1.norm_sqr())
        .sum();
    if y1 == 0.0 {
        return Err(LabError::invalid("zero initial energy"));
    }
    Ok((y2 - y1 + 2.0 * integral).abs() / y1)
}
