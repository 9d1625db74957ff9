//! Randomised checks of the inequalities every solution must satisfy:
//! the elliptic exponent bound, the per-frequency energy identity and the
//! Wronskian (Abel) identity.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientProfile;
use crate::error::{LabError, Result};
use crate::multiplier::{dissipation_residual, solve_fundamental, FrequencyPoint};
use crate::zones::elliptic_exponent_bound;

/// Largest ∫ₛᵗb over which the Abel identity is checked.
pub const MAX_ABEL_EXPONENT: f64 = 25.0;
/// A Wronskian sample whose rounding floor exceeds this is counted as failed.
pub const MAX_ROUNDING_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckTally {
    pub samples: usize,
    pub failures: usize,
    /// Largest observed residual (or lhs − rhs for the elliptic bound).
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub tol: f64,
    pub dissipation_bound: f64,
    pub elliptic: CheckTally,
    pub dissipation: CheckTally,
    pub wronskian: CheckTally,
    /// First few failing samples, for diagnosis.
    pub failure_notes: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.elliptic.failures + self.dissipation.failures + self.wronskian.failures == 0
    }
}

/// Profiles used when a suite is run without an explicit list.
pub fn default_suite_profiles() -> Vec<CoefficientProfile> {
    vec![
        CoefficientProfile::constant(1.0).unwrap(),
        CoefficientProfile::constant(0.3).unwrap(),
        CoefficientProfile::scale_invariant(0.5).unwrap(),
        CoefficientProfile::scale_invariant(3.0).unwrap(),
        CoefficientProfile::power(1.0, 0.5).unwrap(),
        CoefficientProfile::power(1.0, 1.0).unwrap(),
        CoefficientProfile::power(1.0, 2.0).unwrap(),
        CoefficientProfile::integrable(1.0, 2.0).unwrap(),
        CoefficientProfile::iterated_log(1.0, 1).unwrap(),
    ]
}

enum Sample {
    Elliptic { p: usize, xi: f64, s: f64, t: f64 },
    Dissipation { p: usize, xi: f64, data: [Complex64; 2], t1: f64, t2: f64 },
    Wronskian { p: usize, xi: f64, s: f64, grid: Vec<f64> },
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Draws `samples` instances of each check from `profiles` (profiles whose
/// coefficient vanishes are skipped for the elliptic bound).
pub fn inequality_suite(
    profiles: &[CoefficientProfile],
    samples: usize,
    seed: u64,
    tol: f64,
    dissipation_bound: f64,
) -> Result<SuiteReport> {
    if profiles.is_empty() {
        return Err(LabError::invalid("inequality suite needs at least one profile"));
    }
    if !(tol > 0.0 && dissipation_bound > 0.0) {
        return Err(LabError::invalid("suite tolerances must be positive"));
    }
    let elliptic_ok: Vec<usize> = (0..profiles.len())
        .filter(|&i| profiles[i].b(0.0).map_or(false, |b| b > 0.0))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(3 * samples);
    for _ in 0..samples {
        // draws happen up front so that the sample set depends on the seed alone
        if !elliptic_ok.is_empty() {
            let p = elliptic_ok[rng.gen_range(0..elliptic_ok.len())];
            let s = rng.gen_range(0.0..100.0);
            let t = s + log_uniform(&mut rng, 0.01, 200.0);
            let prof = &profiles[p];
            // b is monotone on every built-in, so the interval minimum sits at an end
            let b_min = prof.b_unchecked(s).min(prof.b_unchecked(t));
            let xi = rng.gen_range(0.0..0.99) * 0.5 * b_min;
            draws.push(Sample::Elliptic { p, xi, s, t });
        }
        let p = rng.gen_range(0..profiles.len());
        let xi = log_uniform(&mut rng, 1e-2, 10.0);
        let t1 = rng.gen_range(0.0..50.0);
        let t2 = t1 + rng.gen_range(0.5..50.0);
        let mut c = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let data = [c(), c()];
        draws.push(Sample::Dissipation { p, xi, data, t1, t2 });
        let p = rng.gen_range(0..profiles.len());
        let xi = log_uniform(&mut rng, 1e-3, 30.0);
        let s = rng.gen_range(0.0..20.0);
        let mut span = log_uniform(&mut rng, 0.01, 300.0);
        // beyond ∫b ≈ 25 det M drops below the resolution of its entries
        let b_s = profiles[p].primitive(s, 1e-12)?;
        while profiles[p].primitive(s + span, 1e-12)? - b_s > MAX_ABEL_EXPONENT {
            span *= 0.5;
        }
        let mut grid: Vec<f64> = (0..4).map(|_| s + span * rng.gen_range(0.01..1.0)).collect();
        grid.sort_by(f64::total_cmp);
        draws.push(Sample::Wronskian { p, xi, s, grid });
    }
    // (kind, value, failed, note)
    let outcomes: Vec<(u8, f64, bool, String)> = draws
        .par_iter()
        .map(|d| -> Result<_> {
            Ok(match d {
                Sample::Elliptic { p, xi, s, t } => {
                    let r = elliptic_exponent_bound(&profiles[*p], *xi, *s, *t, tol)?;
                    let note = format!("elliptic {} xi={xi:e} s={s} t={t}", profiles[*p].label());
                    (0, r.lhs - r.rhs, !r.holds, note)
                }
                Sample::Dissipation { p, xi, data, t1, t2 } => {
                    let r = dissipation_residual(&profiles[*p], *xi, *data, *t1, *t2, tol)?;
                    let note = format!("dissipation {} xi={xi:e} t=[{t1}, {t2}] residual {r:e}", profiles[*p].label());
                    (1, r, !(r <= dissipation_bound), note)
                }
                Sample::Wronskian { p, xi, s, grid } => {
                    let pair = solve_fundamental(&profiles[*p], FrequencyPoint::new(*xi)?, *s, grid, tol)?;
                    let worst = pair.samples.iter().map(|x| x.wronskian_residual).fold(0.0, f64::max);
                    let floor = pair.samples.iter().map(|x| x.wronskian_rounding_floor).fold(0.0, f64::max);
                    let note = format!(
                        "wronskian {} xi={xi:e} s={s} residual {worst:e} floor {floor:e}",
                        profiles[*p].label()
                    );
                    (2, worst, !pair.wronskian_ok(tol) || !(floor <= MAX_ROUNDING_FLOOR), note)
                }
            })
        })
        .collect::<Result<_>>()?;
    let tally = |k: u8| {
        let v: Vec<_> = outcomes.iter().filter(|o| o.0 == k).collect();
        CheckTally {
            samples: v.len(),
            failures: v.iter().filter(|o| o.2).count(),
            worst: v.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max),
        }
    };
    Ok(SuiteReport {
        seed,
        tol,
        dissipation_bound,
        elliptic: tally(0),
        dissipation: tally(1),
        wronskian: tally(2),
        failure_notes: outcomes.iter().filter(|o| o.2).take(10).map(|o| o.3.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes_and_is_reproducible() {
        let profiles = default_suite_profiles();
        let a = inequality_suite(&profiles, 20, 11, 1e-11, 1e-6).unwrap();
        assert!(a.passed(), "{a:?}");
        assert_eq!(a.elliptic.samples, 20);
        let b = inequality_suite(&profiles, 20, 11, 1e-11, 1e-6).unwrap();
        assert_eq!(a, b);
        assert!(inequality_suite(&[], 1, 0, 1e-10, 1e-6).is_err());
    }
}
