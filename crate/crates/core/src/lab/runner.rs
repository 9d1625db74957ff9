use rayon::prelude::*;
use serde_json::json;

use crate::asymptotics::{
    diffusion_discrepancy, frequency_truncated_decay, overdamping_state, wave_operator_approx, DEFAULT_PROBES,
};
use crate::coeffs::{CoefficientProfile, ProfileSpec};
use crate::error::{LabError, Result};
use crate::fit::{fit_decay_auto, FitModel, FitResult};
use crate::multiplier::{
    constant_residual, oracle_constant, oracle_scale_invariant, scale_invariant_residual, solve_fundamental,
    FrequencyPoint, FundamentalValues,
};
use crate::rates::{
    higher_order_curve, l2_norm_curve, predicted_energy_rate, predicted_higher_order_rate, predicted_solution_rate,
    radial_l1_multiplier_norm, sharpness_probe, solution_norm_curve, CurveMeta, DecayCurve, PredictedRate, RateQuery,
};
use crate::suite::{default_suite_profiles, inequality_suite};
use crate::zones::{zone_map, ZoneConfig, ZoneLabel, DEFAULT_EPS_RED, DEFAULT_ZONE_CONSTANT};

use super::config::{ExperimentConfig, ExperimentKind, LabConfig, Quantity};
use super::report::{ComparisonRow, ExperimentReport, NamedCurve, ReportBundle};

/// Options from the command line that override the file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub only: Option<String>,
    pub seed: Option<u64>,
}

/// Runs every selected experiment; experiments run concurrently and a
/// failing one does not stop the others.
pub fn run_bundle(config: &LabConfig, opts: &RunOptions) -> Result<ReportBundle> {
    config.validate()?;
    let selected: Vec<ExperimentConfig> = config
        .experiment
        .iter()
        .filter(|e| opts.only.as_ref().map_or(true, |n| *n == e.name))
        .cloned()
        .map(|mut e| {
            if let Some(s) = opts.seed {
                e.seed = s;
            }
            e
        })
        .collect();
    if let Some(n) = &opts.only {
        if selected.is_empty() {
            return Err(LabError::config("--only", format!("no experiment named `{n}`")));
        }
    }
    let reports = selected.into_par_iter().map(run_experiment).collect();
    Ok(ReportBundle::new(reports))
}

pub fn run_experiment(config: ExperimentConfig) -> ExperimentReport {
    let mut report = ExperimentReport::new(config.clone());
    log::info!("running {} ({})", config.name, config.kind.as_str());
    if let Err(e) = dispatch(&config, &mut report) {
        log::error!("{}: {e}", config.name);
        report.error = Some(e.to_string());
    }
    report.settle();
    report
}

fn dispatch(c: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    match c.kind {
        ExperimentKind::NormCurve => norm_curve(c, r),
        ExperimentKind::ZoneMap => zone_map_run(c, r),
        ExperimentKind::Sharpness => sharpness(c, r),
        ExperimentKind::WaveOperator => wave_operator(c, r),
        ExperimentKind::Diffusion => diffusion(c, r),
        ExperimentKind::OverDamping => over_damping(c, r),
        ExperimentKind::HypothesisCheck => hypothesis_check(c, r),
        ExperimentKind::OracleCrosscheck => oracle_crosscheck(c, r),
        ExperimentKind::HigherOrder => higher_order(c, r),
    }
}

fn profile(c: &ExperimentConfig) -> Result<CoefficientProfile> {
    c.coefficient
        .as_ref()
        .ok_or_else(|| LabError::config("coefficient", "missing"))?
        .build()
}

fn regime(p: &CoefficientProfile) -> Result<crate::coeffs::RegimeClass> {
    Ok(p.classify_regime()?.class)
}

/// Fits `curve`, starting from the configured model, and compares the
/// accepted exponent with `predicted`.
fn compare_fit(
    c: &ExperimentConfig,
    r: &mut ExperimentReport,
    p: &CoefficientProfile,
    curve: &DecayCurve,
    quantity: &str,
    predicted: &PredictedRate,
    query: Option<RateQuery>,
) -> Result<()> {
    let first = c.fit_model.unwrap_or(FitModel::PowerOfShifted);
    let attempts = fit_decay_auto(&curve.times, &curve.values, first, c.fit_window(), Some(p))?;
    let accepted: Option<FitResult> = attempts.iter().rev().find(|f| !f.refused).cloned();
    for f in &attempts {
        if f.refused {
            r.warnings.push(format!(
                "{quantity}: {:?} fit refused (curvature {:.3})",
                f.model, f.curvature
            ));
        }
    }
    r.fits.extend(attempts);
    let mut row = match accepted {
        None => ComparisonRow::failed(quantity, None, &predicted.anchor, "every fit model was refused for curvature"),
        Some(f) => match predicted.exponent_for(f.model, p) {
            Some(e) => ComparisonRow::within(quantity, e, f.exponent, c.tolerances.exponent, &predicted.anchor)
                .with_note(format!("{:?}", f.model)),
            None => ComparisonRow::reported(quantity, None, Some(f.exponent), &predicted.anchor)
                .with_note(format!("{:?} has no pure exponent in the {:?} coordinate", predicted.form, f.model)),
        },
    };
    if let Some(flag) = &predicted.flag {
        row.note = Some(format!("{}; {flag}", row.note.take().unwrap_or_default()));
    }
    if let Some(q) = query {
        row = row.with_query(q);
    }
    r.comparisons.push(row);
    Ok(())
}

fn norm_curve(c: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = profile(c)?;
    let class = regime(&p)?;
    let times = c.times();
    let grid = c.xi_grid();
    let tol = c.tolerances.ode;
    let mut l2: Option<DecayCurve> = None;
    let mut predictions = Vec::new();
    let multiple = c.query.len() > 1;
    for (i, q) in c.query.iter().enumerate() {
        let predicted = match c.quantity {
            Quantity::Energy => predicted_energy_rate(&p, q)?,
            Quantity::Solution => predicted_solution_rate(&p, q)?,
        };
        predictions.push(json!({ "query": q, "predicted": predicted }));
        let label = format!("{:?} p={} q={} n={}", c.quantity, q.p, q.q, q.n).to_lowercase();
        let curve = if q.p == 2.0 && q.q == 2.0 {
            if l2.is_none() {
                let curve = match c.quantity {
                    Quantity::Energy => l2_norm_curve(&p, &times, &grid, tol)?,
                    Quantity::Solution => solution_norm_curve(&p, &times, &grid, tol)?,
                };
                r.warnings.extend(curve.warnings.iter().cloned());
                r.curves.push(NamedCurve {
                    suffix: None,
                    curve: curve.clone(),
                });
                l2 = Some(curve);
            }
            l2.clone()
        } else if q.p == 1.0 && q.q.is_infinite() && c.quantity == Quantity::Energy && !class.uses_non_effective_geometry() {
            // the elliptic part carries the L¹ → L^∞ rate
            let mut values = Vec::with_capacity(times.len());
            for &t in &times {
                values.push(radial_l1_multiplier_norm(&p, t, q.n, tol)?.value);
            }
            let meta = CurveMeta {
                norm: format!("radial L1 of the elliptic multiplier, n={}", q.n),
                xi_grid: "adaptive quadrature in ln xi".into(),
                regime: Some(class),
            };
            let curve = DecayCurve::new(times.clone(), values, meta)?;
            r.curves.push(NamedCurve {
                suffix: Some(if multiple { format!("q{i}") } else { "l1".into() }),
                curve: curve.clone(),
            });
            Some(curve)
        } else {
            None
        };
        match curve {
            Some(curve) => compare_fit(c, r, &p, &curve, &label, &predicted, Some(*q))?,
            None => r.comparisons.push(
                ComparisonRow::reported(&label, predicted.exponent_for(FitModel::PowerOfShifted, &p), None, &predicted.anchor)
                    .with_query(*q)
                    .with_note("prediction only: this norm has no sup-over-frequency measurement"),
            ),
        }
    }
    r.details = json!({ "regime": class, "predictions": predictions });
    Ok(())
}

fn zone_map_run(c: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = profile(c)?;
    let class = regime(&p)?;
    let cfg = ZoneConfig::new(
        c.grid.zone_constant.unwrap_or(DEFAULT_ZONE_CONSTANT),
        c.grid.eps_red.unwrap_or(DEFAULT_EPS_RED),
        class,
    )?;
    let map = zone_map(&cfg, &p, &c.times(), &c.xis())?;
    let labels = [
        ZoneLabel::DissipativeZone,
        ZoneLabel::HyperbolicZone,
        ZoneLabel::EllipticZone,
        ZoneLabel::ReducedZone,
        ZoneLabel::DissipativeCore,
    ];
    let counts: serde_json::Map<String, serde_json::Value> =
        labels.iter().map(|l| (l.to_string(), json!(map.count(*l)))).collect();
    r.details = json!({ "regime": class, "gamma": map.gamma, "counts": counts });
    r.zones = Some(map);
    Ok(())
}

fn sharpness(c: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = profile(c)?;
    let s = sharpness_probe(&p, &c.times(), &c.xi_grid(), c.tolerances.ode)?;
    r.comparisons.push(ComparisonRow::at_most(
        "band ratio C/c of the amplified curve",
        s.ratio,
        c.tolerances.band_ratio,
        &format!("two-sided bound, norm ~ 1/{}", s.amplifier),
    ));
    r.warnings.extend(s.amplified.warnings.iter().cloned());
    r.details = json!({
        "amplifier": s.amplifier,
        "band_low": s.band_low,
        "band_high": s.band_high,
        "ratio": s.ratio,
        "verdict": s.verdict,
    });
    r.curves.push(NamedCurve {
        suffix: None,
        curve: s.amplified,
    });
    Ok(())
}

fn probes(c: &ExperimentConfig) -> Vec<f64> {
    c.grid.probes.clone().unwrap_or_else(|| DEFAULT_PROBES.to_vec())
}

fn wave_operator(c: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = profile(c)?;
    let probes = probes(c);
    let tol = c.tolerances.ode;
    let xis = c.xis();
    let ests = xis
        .par_iter()
        .map(|&xi| wave_operator_approx(&p, xi, &probes, tol))
        .collect::<Result<Vec<_>>>()?;
    let certified = ests.iter().filter(|e| e.certified).count();
    let anchor = "strong limit of lambda(t) E0(t)^-1 E(t)";
    r.comparisons.push(ComparisonRow::equals(
        "certified frequencies",
        xis.len() as f64,
        certified as f64,
        anchor,
    ));
    let min_det = ests
        .iter()
        .filter_map(|e| e.estimate.map(|m| m.det().norm()))
        .fold(f64::INFINITY, f64::min);
    if certified > 0 {
        r.comparisons.push(ComparisonRow::at_least("min |det W+|", min_det, c.tolerances.nonzero, anchor));
    }
    if matches!(c.coefficient, Some(ProfileSpec::Zero)) {
        let mut worst: f64 = 0.0;
        for e in &ests {
            for m in &e.iterates {
                let bracket = (1.0 + e.xi * e.xi).sqrt();
                let free = [[e.xi / bracket, 0.0], [0.0, 1.0]];
                for i in 0..2 {
                    for j in 0..2 {
                        worst = worst.max((m.0[i][j] - free[i][j]).norm());
                    }
                }
            }
        }
        r.comparisons.push(ComparisonRow::at_most(
            "max |W+ - diag(xi/<xi>, 1)|",
            worst,
            c.tolerances.identity,
            "no dissipation: free evolution",
        ));
    }
    let per_xi: Vec<_> = ests
        .iter()
        .map(|e| {
            json!({
                "xi": e.xi,
                "certified": e.certified,
                "cauchy_differences": e.cauchy_differences,
                "unitarity_defect": e.unitarity_defect,
                "det": e.estimate.map(|m| [m.det().re, m.det().im]),
                "estimate": e.estimate,
            })
        })
        .collect();
    r.details = json!({ "probes": probes, "frequencies": per_xi });
    Ok(())
}

fn diffusion(c: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = profile(c)?;
    let tol = c.tolerances.ode;
    let t = c.grid.t_eval.unwrap_or_else(|| *c.times().last().unwrap());
    let d = diffusion_discrepancy(&p, &c.xis(), t, tol)?;
    r.comparisons.push(ComparisonRow::at_most(
        "relative discrepancy (corrected)",
        d.sup_relative_corrected,
        c.tolerances.discrepancy,
        "diffusion phenomenon, parabolic multiplier exp(-xi^2 R(t))",
    ));
    r.comparisons.push(ComparisonRow::reported(
        "relative discrepancy (raw)",
        None,
        Some(d.sup_relative_raw),
        "diffusion phenomenon, parabolic multiplier exp(-xi^2 R(t))",
    ));
    let mut details = json!({ "discrepancy": d });
    if let Some(cut) = c.grid.c_cut {
        let tr = frequency_truncated_decay(&p, cut, &c.times(), tol)?;
        r.comparisons.push(ComparisonRow::at_least(
            "improvement of sqrt(1+R) * truncated curve",
            tr.improvement,
            c.tolerances.improvement,
            "strong limit of sqrt(1+R(t)) E(t) on data away from xi = 0",
        ));
        r.warnings.extend(tr.curve.warnings.iter().cloned());
        details["truncated"] = json!({
            "c_cut": tr.c_cut,
            "amplified": tr.amplified,
            "improvement": tr.improvement,
            "verdict": tr.verdict,
        });
        r.curves.push(NamedCurve {
            suffix: Some("truncated".into()),
            curve: tr.curve,
        });
    }
    r.details = details;
    Ok(())
}

fn over_damping(c: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = profile(c)?;
    let tol = c.tolerances.ode;
    let xis = c.xis();
    let state = overdamping_state(&p, &xis, (c.grid.data[0], c.grid.data[1]), &probes(c), tol)?;
    let anchor = "over-damping: solutions tend to a nonzero state";
    let certified = state.limits.iter().filter(|l| l.certified).count();
    r.comparisons.push(ComparisonRow::equals("certified frequencies", xis.len() as f64, certified as f64, anchor));
    // a limit counts as nonzero only when it clears its own error bound
    let resolved = state.limits.iter().filter(|l| l.limit.abs() > l.bound).count();
    r.comparisons.push(ComparisonRow::equals("limits above their error bound", xis.len() as f64, resolved as f64, anchor));
    let min_limit = state.limits.iter().map(|l| l.limit.abs()).fold(f64::INFINITY, f64::min);
    r.comparisons.push(ComparisonRow::at_least("min |limit|", min_limit, c.tolerances.nonzero, anchor));
    let curve = l2_norm_curve(&p, &c.times(), &c.xi_grid(), tol)?;
    let floor = curve.values.iter().cloned().fold(f64::INFINITY, f64::min);
    r.comparisons.push(ComparisonRow::at_least("min of the L2 curve", floor, c.tolerances.lower_bound, anchor));
    r.warnings.extend(curve.warnings.iter().cloned());
    r.curves.push(NamedCurve { suffix: None, curve });
    r.details = json!({ "state": state });
    Ok(())
}

fn hypothesis_check(c: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let profiles = match &c.coefficient {
        Some(spec) => vec![spec.build()?],
        None => default_suite_profiles(),
    };
    let mut hyp = Vec::new();
    for p in &profiles {
        let samples: Vec<f64> = (0..=40).map(|i| 10f64.powf(i as f64 / 8.0) - 1.0).collect();
        hyp.push(json!({
            "profile": p.label(),
            "regime": p.classify_regime()?,
            "hypotheses": p.check_hypotheses(&samples, 2)?,
        }));
    }
    let s = inequality_suite(&profiles, c.grid.samples, c.seed, c.tolerances.ode, c.tolerances.dissipation)?;
    let anchor = "proved inequality";
    r.invariants.push(
        ComparisonRow::equals("elliptic exponent bound failures", 0.0, s.elliptic.failures as f64, anchor)
            .with_note(format!("{} samples", s.elliptic.samples)),
    );
    r.invariants.push(
        ComparisonRow::at_most("dissipation identity residual", s.dissipation.worst, c.tolerances.dissipation, "energy identity")
            .with_note(format!("{} samples", s.dissipation.samples)),
    );
    r.invariants.push(
        ComparisonRow::equals("Wronskian residual failures", 0.0, s.wronskian.failures as f64, "Abel identity")
            .with_note(format!(
                "{} samples, bound 100*tol plus rounding floor, worst {:e}",
                s.wronskian.samples, s.wronskian.worst
            )),
    );
    r.details = json!({ "profiles": hyp, "suite": s });
    Ok(())
}

fn oracle_crosscheck(c: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = profile(c)?;
    let spec = c.coefficient.unwrap();
    let times = c.times();
    let xis = c.xis();
    let tol = c.tolerances.ode;
    let s0 = if times[0] == 0.0 { times.clone() } else { [vec![0.0], times.clone()].concat() };
    let oracle = |xi: f64, t: f64| -> Result<FundamentalValues> {
        match spec {
            ProfileSpec::Zero => Ok(oracle_constant(0.0, xi, t)),
            ProfileSpec::Constant { b0 } => Ok(oracle_constant(b0, xi, t)),
            ProfileSpec::ScaleInvariant { mu } => oracle_scale_invariant(mu, xi, t),
            _ => Err(LabError::invalid("no closed form for this profile")),
        }
    };
    let residual = |xi: f64, t: f64| -> Result<f64> {
        match spec {
            ProfileSpec::Zero => constant_residual(0.0, xi, t),
            ProfileSpec::Constant { b0 } => constant_residual(b0, xi, t),
            ProfileSpec::ScaleInvariant { mu } => scale_invariant_residual(mu, xi, t),
            _ => Err(LabError::invalid("no closed form for this profile")),
        }
    };
    let rows = xis
        .par_iter()
        .map(|&xi| -> Result<(f64, f64, f64)> {
            let pair = solve_fundamental(&p, FrequencyPoint::new(xi)?, 0.0, &s0, tol)?;
            let mut err: f64 = 0.0;
            let mut res: f64 = 0.0;
            for s in &pair.samples {
                err = err.max(s.values.distance(&oracle(xi, s.t)?));
                res = res.max(residual(xi, s.t)?);
            }
            Ok((xi, err, res))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst_err = rows.iter().map(|x| x.1).fold(0.0, f64::max);
    let worst_res = rows.iter().map(|x| x.2).fold(0.0, f64::max);
    r.invariants.push(ComparisonRow::at_most(
        "max |solver - closed form|",
        worst_err,
        c.tolerances.oracle,
        "closed-form fundamental solutions",
    ));
    r.invariants.push(ComparisonRow::at_most(
        "closed form substitution residual",
        worst_res,
        c.tolerances.oracle_residual,
        "closed-form fundamental solutions",
    ));
    let per_xi: Vec<_> = rows.iter().map(|(xi, e, s)| json!({ "xi": xi, "max_error": e, "residual": s })).collect();
    r.details = json!({ "times": s0, "frequencies": per_xi });
    Ok(())
}

fn higher_order(c: &ExperimentConfig, r: &mut ExperimentReport) -> Result<()> {
    let p = profile(c)?;
    let times = c.times();
    for (i, q) in c.query.iter().enumerate() {
        let curve = higher_order_curve(&p, &times, q.k, q.alpha_order, &c.xi_grid(), c.tolerances.ode)?;
        let label = format!("higher-order row k={} |alpha|={}", q.k, q.alpha_order);
        r.warnings.extend(curve.warnings.iter().cloned());
        match predicted_higher_order_rate(&p, q.k, q.alpha_order) {
            Some(pred) => compare_fit(c, r, &p, &curve, &label, &pred, Some(*q))?,
            None => {
                let fits = fit_decay_auto(&curve.times, &curve.values, FitModel::PowerOfShifted, c.fit_window(), Some(&p))?;
                let measured = fits.iter().rev().find(|f| !f.refused).map(|f| f.exponent);
                r.fits.extend(fits);
                r.comparisons.push(
                    ComparisonRow::reported(&label, None, measured, "higher-order effective estimate")
                        .with_query(*q)
                        .with_note("no prediction outside effective dissipation"),
                );
            }
        }
        r.curves.push(NamedCurve {
            suffix: Some(format!("k{}_a{}_{i}", q.k, q.alpha_order)),
            curve,
        });
    }
    Ok(())
}
