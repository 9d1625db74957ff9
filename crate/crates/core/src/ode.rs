//! Propagator for the damped oscillator u'' + b(t)u' + ξ²u = 0.
//!
//! The state is the 2×2 fundamental matrix M(t, s) of y' = A(t)y with
//! A = [[0, 1], [-ξ², -b]] and M(s, s) = I. Steps use the fourth-order
//! commutator-free Magnus scheme: two frozen-coefficient exponentials built
//! from b at the Gauss nodes. Each factor is an exact 2×2 exponential, so
//! the scheme is unconditionally stable when b is large, exact when b is
//! constant, and multiplies det M by exp(-h(b₁+b₂)/2), the two-point Gauss
//! rule for ∫b.
//!
//! Step size is chosen by step doubling. The two-half-step result is kept
//! without extrapolation, which would spoil the determinant property.

use crate::error::{LabError, Result};
use crate::mat2::Mat2;

const SQRT3_6: f64 = 0.288_675_134_594_812_9; // √3/6
const A_BIG: f64 = 0.25 + SQRT3_6;
const A_SMALL: f64 = 0.25 - SQRT3_6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    /// Per-step relative tolerance on each column of M, measured in the
    /// energy-weighted vector (max(ξ,1)·u, u').
    pub rel_tol: f64,
    pub max_steps: usize,
    /// Upper bound on h·ω per step, ω the local oscillation frequency.
    pub phase_cap: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            max_steps: 5_000_000,
            phase_cap: std::f64::consts::FRAC_PI_4,
        }
    }
}

impl OdeOptions {
    pub fn with_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub times: Vec<f64>,
    /// M(t_i, s); entries may underflow when the solution decays past f64 range.
    pub states: Vec<Mat2>,
    /// M(t_i, s) = scaled_states[i] · exp(log_scales[i]), never underflowing.
    pub scaled_states: Vec<Mat2>,
    pub log_scales: Vec<f64>,
    /// Accumulated relative local error estimate up to t_i.
    pub error_estimates: Vec<f64>,
    /// Accepted steps taken up to t_i.
    pub step_counts: Vec<usize>,
    pub steps: usize,
}

/// One CFM4 step of length h from t; also returns the Gauss estimate of ∫b.
pub fn cfm4_step<B: Fn(f64) -> f64>(b: &B, xi2: f64, t: f64, h: f64) -> (Mat2, f64) {
    let b1 = b(t + (0.5 - SQRT3_6) * h);
    let b2 = b(t + (0.5 + SQRT3_6) * h);
    let first = Mat2::new(0.0, 0.5 * h, -0.5 * xi2 * h, -h * (A_BIG * b1 + A_SMALL * b2)).exp();
    let second = Mat2::new(0.0, 0.5 * h, -0.5 * xi2 * h, -h * (A_SMALL * b1 + A_BIG * b2)).exp();
    (second * first, 0.5 * h * (b1 + b2))
}

fn column_error(full: &Mat2, fine: &Mat2, weight: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..2 {
        let [u, v] = fine.col(j);
        let [fu, fv] = full.col(j);
        let size = (weight * u).abs().max(v.abs());
        let diff = (weight * (u - fu)).abs().max((v - fv).abs());
        worst = worst.max(diff / 15.0 / (size + 1e-300));
    }
    worst
}

/// Local error of each column in the weighted norm, with the fast
/// eigencomponent of the frozen system at the step end scaled by `damp`.
/// In stiff stretches the step-doubling difference is dominated by a fast
/// transient that decays by `damp` before the next output time.
fn damped_column_error(full: &Mat2, fine: &Mat2, weight: f64, modes: Option<(f64, f64, f64)>) -> f64 {
    let Some((ls, lf, damp)) = modes else {
        return column_error(full, fine, weight);
    };
    let mut worst: f64 = 0.0;
    for j in 0..2 {
        let [u, v] = fine.col(j);
        let [fu, fv] = full.col(j);
        let (du, dv) = (u - fu, v - fv);
        let cf = (dv - ls * du) / (lf - ls);
        let cs = du - cf;
        let eu = cs + damp * cf;
        let ev = cs * ls + damp * cf * lf;
        let size = (weight * u).abs().max(v.abs());
        let diff = (weight * eu).abs().max(ev.abs());
        worst = worst.max(diff / 15.0 / (size + 1e-300));
    }
    worst
}

/// (λ_slow, λ_fast, e^{λ_fast·remaining}) for a clearly overdamped frozen
/// system, None otherwise.
fn stiff_modes(b: f64, xi2: f64, remaining: f64) -> Option<(f64, f64, f64)> {
    let half = 0.5 * b;
    let disc = half * half - xi2;
    if !(disc > 0.0) || !(remaining > 0.0) {
        return None;
    }
    let lf = -(half + disc.sqrt());
    let ls = xi2 / lf;
    // too close to the confluence the eigenbasis is ill-conditioned
    if lf > 4.0 * ls {
        return None;
    }
    Some((ls, lf, (lf * remaining).exp()))
}

fn local_frequency<B: Fn(f64) -> f64>(b: &B, xi2: f64, t: f64) -> f64 {
    let bt = b(t);
    (xi2 - 0.25 * bt * bt).max(0.0).sqrt()
}

/// Largest e-folding of the slowest mode allowed within one step.
const MAX_STEP_DECAY: f64 = 200.0;

/// Decay rate of the slowest mode of the frozen system.
fn slow_decay_rate<B: Fn(f64) -> f64>(b: &B, xi2: f64, t: f64) -> f64 {
    let half = 0.5 * b(t);
    let disc = half * half - xi2;
    if disc <= 0.0 {
        half
    } else {
        // b/2 - √(b²/4 - ξ²) without cancellation
        xi2 / (half + disc.sqrt())
    }
}

/// Fundamental matrix M(t, s) at each grid time t ≥ s (grid ascending).
pub fn propagate<B: Fn(f64) -> f64>(b: B, xi: f64, s: f64, grid: &[f64], opts: &OdeOptions) -> Result<Propagation> {
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(LabError::domain(format!("frequency must be finite and >= 0, got {xi}")));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(LabError::domain(format!("start time must be finite and >= 0, got {s}")));
    }
    if !(opts.rel_tol > 0.0) {
        return Err(LabError::invalid("ode tolerance must be positive"));
    }
    if grid.iter().any(|&t| !(t >= s) || !t.is_finite()) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(LabError::invalid("grid must be ascending, finite and >= start time"));
    }
    let xi2 = xi * xi;
    let weight = xi.max(1.0);
    let b0 = b(s).abs();
    let mut h = 0.05 * (1.0 + s) / (1.0 + xi + b0).min(1e6);
    let mut t = s;
    let mut m = Mat2::IDENTITY;
    let mut log_scale = 0.0;
    let mut acc_err = 0.0;
    let mut steps = 0usize;
    let mut accepted = 0usize;
    let mut out = Propagation {
        times: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        scaled_states: Vec::with_capacity(grid.len()),
        log_scales: Vec::with_capacity(grid.len()),
        error_estimates: Vec::with_capacity(grid.len()),
        step_counts: Vec::with_capacity(grid.len()),
        steps: 0,
    };
    for &target in grid {
        while t < target {
            if steps >= opts.max_steps {
                return Err(LabError::StepBudget {
                    max_steps: opts.max_steps,
                    last_good_time: t,
                });
            }
            // caps: relative to (1+t) and a phase limit at both step ends
            let mut h_try = h.min(0.5 * (1.0 + t));
            let omega = local_frequency(&b, xi2, t).max(local_frequency(&b, xi2, t + h_try));
            if omega > 0.0 {
                h_try = h_try.min(opts.phase_cap / omega);
            }
            // keep the slow mode within range over one step so the product cannot underflow
            let sigma = slow_decay_rate(&b, xi2, t).max(slow_decay_rate(&b, xi2, t + h_try));
            if sigma > 0.0 {
                h_try = h_try.min(MAX_STEP_DECAY / sigma);
            }
            let landing = t + h_try >= target;
            if landing {
                h_try = target - t;
            } else {
                // step by the representable increment so that elapsed time and t agree
                h_try = (t + h_try) - t;
            }
            if h_try < 1e-14 * (1.0 + t) && !landing {
                return Err(LabError::StepUnderflow { last_good_time: t });
            }
            let (full, q_full) = cfm4_step(&b, xi2, t, h_try);
            let half = 0.5 * h_try;
            let (f1, q1) = cfm4_step(&b, xi2, t, half);
            let (f2, q2) = cfm4_step(&b, xi2, t + half, half);
            let fine = f2 * f1;
            steps += 1;
            let modes = if landing {
                None
            } else {
                let b_end = b(t + h_try).min(b(target));
                stiff_modes(b_end, xi2, target - t - h_try)
            };
            let mut err = damped_column_error(&(full * m), &(fine * m), weight, modes);
            if modes.is_some() {
                // long stiff stretches take few large steps: control error per unit ln(1+t)
                err = (err - 16.0 * f64::EPSILON).max(0.0) * (1.0 + t) / h_try;
            }
            if !err.is_finite() {
                h = 0.25 * h_try;
                continue;
            }
            // det M = exp(-Σ Gauss ∫b): keep the quadrature error per unit ln(1+t) below tol
            let q_err = ((q1 + q2 - q_full).abs() / 15.0 - 8.0 * f64::EPSILON * (q1.abs() + q2.abs())).max(0.0);
            let ratio = (err / opts.rel_tol).max(q_err * (1.0 + t) / (opts.rel_tol * h_try));
            if ratio <= 1.0 {
                t = if landing { target } else { t + h_try };
                m = fine * m;
                acc_err += err;
                accepted += 1;
                let size = m.max_abs();
                if !(size.is_finite() && size > 0.0) {
                    return Err(LabError::domain(format!("fundamental matrix degenerated at t = {t}")));
                }
                if !(1e-100..=1e100).contains(&size) {
                    m = m.scale(1.0 / size);
                    log_scale += size.ln();
                }
                let grow = if ratio == 0.0 { 4.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 4.0) };
                // a step shortened to land on the grid does not shrink the next one
                h = if landing { h.max(h_try * grow) } else { h_try * grow };
            } else {
                h = h_try * (0.9 * ratio.powf(-0.2)).clamp(0.2, 0.9);
                if h < 1e-14 * (1.0 + t) {
                    return Err(LabError::StepUnderflow { last_good_time: t });
                }
            }
        }
        out.times.push(target);
        out.states.push(m.scale(log_scale.exp()));
        out.scaled_states.push(m);
        out.log_scales.push(log_scale);
        out.error_estimates.push(acc_err);
        out.step_counts.push(accepted);
    }
    out.steps = steps;
    Ok(out)
}
