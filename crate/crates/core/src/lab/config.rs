//! Experiment configuration: a TOML document with `schema_version = 1` and
//! one `[[experiment]]` table per run.
//!
//! ```toml
//! schema_version = 1
//!
//! [[experiment]]
//! name = "si_half"
//! kind = "norm_curve"
//! coefficient = { kind = "scale_invariant", mu = 0.5 }
//! grid = { t_min = 10.0, t_max = 1000.0, t_points = 25 }
//! query = [{ n = 3, p = 2.0, q = 2.0, r_p = 1.0 }]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coeffs::ProfileSpec;
use crate::error::{LabError, Result};
use crate::fit::FitModel;
use crate::rates::{log_times, RateQuery, XiGrid};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub experiment: Vec<ExperimentConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    NormCurve,
    ZoneMap,
    Sharpness,
    WaveOperator,
    Diffusion,
    OverDamping,
    HypothesisCheck,
    OracleCrosscheck,
    HigherOrder,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::NormCurve => "norm_curve",
            ExperimentKind::ZoneMap => "zone_map",
            ExperimentKind::Sharpness => "sharpness",
            ExperimentKind::WaveOperator => "wave_operator",
            ExperimentKind::Diffusion => "diffusion",
            ExperimentKind::OverDamping => "over_damping",
            ExperimentKind::HypothesisCheck => "hypothesis_check",
            ExperimentKind::OracleCrosscheck => "oracle_crosscheck",
            ExperimentKind::HigherOrder => "higher_order",
        }
    }
}

/// Which multiplier a norm curve measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    #[default]
    Energy,
    Solution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<ProfileSpec>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub query: Vec<RateQuery>,
    #[serde(default)]
    pub quantity: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_model: Option<FitModel>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub t_points: usize,
    pub t_spacing: Spacing,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_max: Option<f64>,
    pub xi_points: usize,
    pub xi_spacing: Spacing,
    /// Sup-norm sweeps: grid density and golden-section budget.
    pub per_decade: usize,
    pub refine_budget: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<f64>>,
    /// Initial data (u(0), u_t(0)) per frequency.
    pub data: [f64; 2],
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zone_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_red: Option<f64>,
    /// Frequency cut for the truncated-data comparison.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_cut: Option<f64>,
    /// Single evaluation time (diffusion); defaults to t_max.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_eval: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let xi = XiGrid::default();
        Self {
            t_min: None,
            t_max: None,
            t_points: 25,
            t_spacing: Spacing::Log,
            xi_min: None,
            xi_max: None,
            xi_points: 20,
            xi_spacing: Spacing::Log,
            per_decade: xi.per_decade,
            refine_budget: xi.refine_budget,
            fit_window: None,
            probes: None,
            data: [1.0, 0.0],
            samples: 1000,
            zone_constant: None,
            eps_red: None,
            c_cut: None,
            t_eval: None,
        }
    }
}

/// Every pass/fail threshold an experiment uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Integrator tolerance.
    pub ode: f64,
    /// |fitted − predicted| for exponents.
    pub exponent: f64,
    /// Largest C/c for a two-sided band.
    pub band_ratio: f64,
    /// Solver against closed form, max abs error.
    pub oracle: f64,
    /// Closed form substituted into the equation, relative.
    pub oracle_residual: f64,
    /// Relative diffusion discrepancy.
    pub discrepancy: f64,
    /// Required drop of the amplified truncated curve.
    pub improvement: f64,
    /// Lower bound an over-damped curve must keep.
    pub lower_bound: f64,
    /// Per-frequency energy identity, relative.
    pub dissipation: f64,
    /// Smallest |det W₊| or |limit| accepted as nonzero.
    pub nonzero: f64,
    /// W₊ against the free-wave value for b = 0.
    pub identity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ode: 1e-10,
            exponent: 0.05,
            band_ratio: 10.0,
            oracle: 1e-8,
            oracle_residual: 1e-10,
            discrepancy: 0.05,
            improvement: 5.0,
            lower_bound: 0.01,
            dissipation: 1e-6,
            nonzero: 1e-6,
            identity: 1e-10,
        }
    }
}

impl Tolerances {
    fn fields(&self) -> [(&'static str, f64); 11] {
        [
            ("ode", self.ode),
            ("exponent", self.exponent),
            ("band_ratio", self.band_ratio),
            ("oracle", self.oracle),
            ("oracle_residual", self.oracle_residual),
            ("discrepancy", self.discrepancy),
            ("improvement", self.improvement),
            ("lower_bound", self.lower_bound),
            ("dissipation", self.dissipation),
            ("nonzero", self.nonzero),
            ("identity", self.identity),
        ]
    }
}

impl LabConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: LabConfig = toml::from_str(text).map_err(|e| {
            let path = e
                .span()
                .map(|s| format!("byte {}..{}", s.start, s.end))
                .unwrap_or_else(|| "<document>".into());
            LabError::config(path, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LabError::config("<document>", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(LabError::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        for (i, e) in self.experiment.iter().enumerate() {
            e.validate(&format!("experiment[{i}]"))?;
            if let Some(j) = self.experiment[..i].iter().position(|o| o.name == e.name) {
                return Err(LabError::config(
                    format!("experiment[{i}].name"),
                    format!("duplicate name `{}` (also experiment[{j}])", e.name),
                ));
            }
        }
        Ok(())
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(LabError::config(path, format!("must be finite and > 0, got {v}")))
    }
}

impl ExperimentConfig {
    fn validate(&self, at: &str) -> Result<()> {
        use ExperimentKind::*;
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(LabError::config(
                format!("{at}.name"),
                format!("`{}` must be nonempty and use only [A-Za-z0-9_-]", self.name),
            ));
        }
        for (k, v) in self.tolerances.fields() {
            positive(&format!("{at}.tolerances.{k}"), v)?;
        }
        match &self.coefficient {
            Some(spec) => {
                spec.build().map_err(|e| LabError::config(format!("{at}.coefficient"), e.to_string()))?;
            }
            None if self.kind != HypothesisCheck => {
                return Err(LabError::config(format!("{at}.coefficient"), "required for this experiment kind"));
            }
            None => {}
        }
        let g = &self.grid;
        let gp = format!("{at}.grid");
        let needs_t = matches!(self.kind, NormCurve | ZoneMap | Sharpness | Diffusion | OverDamping | OracleCrosscheck | HigherOrder);
        let needs_xi = matches!(self.kind, ZoneMap | WaveOperator | Diffusion | OverDamping | OracleCrosscheck);
        if needs_t {
            self.check_range(&gp, "t", g.t_min, g.t_max, g.t_points, g.t_spacing)?;
        }
        if needs_xi {
            self.check_range(&gp, "xi", g.xi_min, g.xi_max, g.xi_points, g.xi_spacing)?;
        }
        if g.per_decade < 2 {
            return Err(LabError::config(format!("{gp}.per_decade"), "must be at least 2"));
        }
        if g.refine_budget == 0 {
            return Err(LabError::config(format!("{gp}.refine_budget"), "must be positive"));
        }
        if let Some([a, b]) = g.fit_window {
            if !(a < b && a >= 0.0) {
                return Err(LabError::config(format!("{gp}.fit_window"), format!("[{a}, {b}] is not an interval in t >= 0")));
            }
        }
        if let Some(p) = &g.probes {
            if p.len() < 4 || p.windows(2).any(|w| !(w[1] > w[0])) || p[0] < 0.0 {
                return Err(LabError::config(format!("{gp}.probes"), "need at least 4 increasing times >= 0"));
            }
        }
        if !g.data.iter().all(|v| v.is_finite()) || g.data == [0.0, 0.0] {
            return Err(LabError::config(format!("{gp}.data"), "must be finite and not both zero"));
        }
        if self.kind == HypothesisCheck && g.samples == 0 {
            return Err(LabError::config(format!("{gp}.samples"), "must be positive"));
        }
        for (k, v) in [
            ("zone_constant", g.zone_constant),
            ("eps_red", g.eps_red),
            ("c_cut", g.c_cut),
            ("t_eval", g.t_eval),
        ] {
            if let Some(v) = v {
                positive(&format!("{gp}.{k}"), v)?;
            }
        }
        if matches!(self.kind, NormCurve | HigherOrder) && self.query.is_empty() {
            return Err(LabError::config(format!("{at}.query"), "at least one query is required"));
        }
        for (i, q) in self.query.iter().enumerate() {
            q.validate().map_err(|e| LabError::config(format!("{at}.query[{i}]"), e.to_string()))?;
            if self.kind == NormCurve && (q.k > 0 || q.alpha_order > 0) {
                return Err(LabError::config(format!("{at}.query[{i}]"), "derivative orders belong to higher_order"));
            }
            if self.kind == HigherOrder && q.k > 2 {
                return Err(LabError::config(format!("{at}.query[{i}].k"), "time-derivative order above 2"));
            }
        }
        if self.kind == OracleCrosscheck {
            let ok = matches!(
                self.coefficient,
                Some(ProfileSpec::Zero) | Some(ProfileSpec::Constant { .. }) | Some(ProfileSpec::ScaleInvariant { .. })
            );
            if !ok {
                return Err(LabError::config(
                    format!("{at}.coefficient.kind"),
                    "closed forms exist for zero, constant and scale_invariant only",
                ));
            }
        }
        Ok(())
    }

    fn check_range(&self, gp: &str, axis: &str, lo: Option<f64>, hi: Option<f64>, n: usize, spacing: Spacing) -> Result<()> {
        let lo = lo.ok_or_else(|| LabError::config(format!("{gp}.{axis}_min"), "required for this experiment kind"))?;
        let hi = hi.ok_or_else(|| LabError::config(format!("{gp}.{axis}_max"), "required for this experiment kind"))?;
        let floor_ok = match spacing {
            Spacing::Log => lo > 0.0,
            Spacing::Linear => lo >= 0.0,
        };
        if !floor_ok || !lo.is_finite() {
            return Err(LabError::config(
                format!("{gp}.{axis}_min"),
                format!("{lo} is out of range for {spacing:?} spacing"),
            ));
        }
        if n == 0 {
            return Err(LabError::config(format!("{gp}.{axis}_points"), "grids need at least 1 point"));
        }
        // a one-point grid is the single value lo = hi
        let ordered = if n == 1 { hi == lo } else { hi > lo };
        if !(ordered && hi.is_finite()) {
            return Err(LabError::config(
                format!("{gp}.{axis}_max"),
                format!("{hi} must be finite and exceed {axis}_min = {lo} (equal it for a single point)"),
            ));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let g = &self.grid;
        spaced(g.t_min.unwrap_or(1.0), g.t_max.unwrap_or(10.0), g.t_points, g.t_spacing)
    }

    pub fn xis(&self) -> Vec<f64> {
        let g = &self.grid;
        spaced(g.xi_min.unwrap_or(0.1), g.xi_max.unwrap_or(10.0), g.xi_points, g.xi_spacing)
    }

    pub fn xi_grid(&self) -> XiGrid {
        XiGrid {
            xi_lo: self.grid.xi_min,
            xi_max: self.grid.xi_max,
            per_decade: self.grid.per_decade,
            refine: true,
            refine_budget: self.grid.refine_budget,
        }
    }

    /// Configured window, or the whole time range.
    pub fn fit_window(&self) -> (f64, f64) {
        match self.grid.fit_window {
            Some([a, b]) => (a, b),
            None => {
                let t = self.times();
                (t[0], t[t.len() - 1])
            }
        }
    }
}

fn spaced(a: f64, b: f64, n: usize, spacing: Spacing) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    match spacing {
        Spacing::Log => log_times(a, b, n),
        Spacing::Linear => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
schema_version = 1

[[experiment]]
name = "si_half"
kind = "norm_curve"
coefficient = { kind = "scale_invariant", mu = 0.5 }
grid = { t_min = 10.0, t_max = 1000.0, t_points = 13 }
query = [{ n = 3, p = 2.0, q = 2.0, r_p = 1.0 }, { n = 2, p = 1.0, q = inf, r_p = 3.0 }]
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = LabConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.experiment[0].tolerances.exponent, 0.05);
        assert!(c.experiment[0].query[1].q.is_infinite());
        let again = LabConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.experiment[0].times().len(), 13);
    }

    #[test]
    fn errors_carry_field_paths() {
        let bad = SAMPLE.replace("t_min = 10.0", "t_min = -1.0");
        match LabConfig::from_toml(&bad) {
            Err(LabError::Config { path, .. }) => assert_eq!(path, "experiment[0].grid.t_min"),
            other => panic!("{other:?}"),
        }
        let bad = SAMPLE.replace("name = \"si_half\"\nkind", "name = \"si_half\"\ntolerances = { exponent = 0.0 }\nkind");
        match LabConfig::from_toml(&bad) {
            Err(LabError::Config { path, .. }) => assert_eq!(path, "experiment[0].tolerances.exponent"),
            other => panic!("{other:?}"),
        }
        let bad = SAMPLE.replace("q = inf", "q = 3.0");
        match LabConfig::from_toml(&bad) {
            Err(LabError::Config { path, .. }) => assert_eq!(path, "experiment[0].query[1]"),
            other => panic!("{other:?}"),
        }
        assert!(LabConfig::from_toml(&SAMPLE.replace("schema_version = 1", "schema_version = 2")).is_err());
        assert!(LabConfig::from_toml(&SAMPLE.replace("t_points", "t_pionts")).is_err());
    }

    #[test]
    fn kind_fixes_required_blocks() {
        let text = "schema_version = 1\n[[experiment]]\nname = \"z\"\nkind = \"zone_map\"\ncoefficient = { kind = \"constant\", b0 = 1.0 }\ngrid = { t_min = 1.0, t_max = 10.0 }\n";
        match LabConfig::from_toml(text) {
            Err(LabError::Config { path, .. }) => assert_eq!(path, "experiment[0].grid.xi_min"),
            other => panic!("{other:?}"),
        }
        let text = "schema_version = 1\n[[experiment]]\nname = \"h\"\nkind = \"hypothesis_check\"\n";
        assert!(LabConfig::from_toml(text).is_ok());
    }
}
