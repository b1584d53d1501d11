//! JSON configuration (schema version 1).
//!
//! Matrices are written as arrays of rows. Modes are 1-based in files.
//! The full schema is in `docs/config.md` at the repository root.

use std::path::Path;

use drgpb_core::{
    CovarianceUpdate, FilterConfig, InitialModeConvention, KalmanOptions, Matrix, MjlsModel,
    ModeMatrices, ModelSchedule, PiSchedule, RadiusSchedule, ValidationReport, Vector,
};
use serde::{Deserialize, Serialize};

use crate::experiment::{ExperimentSpec, Window};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "C")]
    pub c: Rows,
    #[serde(rename = "D")]
    pub d: Rows,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n_x: usize,
    pub n_y: usize,
    pub n_w: usize,
    pub n_v: usize,
    pub modes: Vec<ModeSpec>,
    #[serde(rename = "W")]
    pub w: Rows,
    #[serde(rename = "V")]
    pub v: Rows,
    #[serde(rename = "Pi")]
    pub pi: Rows,
    pub p0_mode: Vec<f64>,
    pub x0_mean: Vec<f64>,
    #[serde(rename = "X0")]
    pub x0_cov: Rows,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiSegment {
    /// First step (1-based, inclusive) this matrix applies to.
    pub start: usize,
    #[serde(rename = "Pi")]
    pub pi: Rows,
}

/// A constant radius, one radius per step, or `{"piecewise": [[start, r], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum RadiusSpec {
    Constant(f64),
    PerStep(Vec<f64>),
    Piecewise { piecewise: Vec<(usize, f64)> },
}

impl Default for RadiusSpec {
    fn default() -> Self {
        RadiusSpec::Constant(0.0)
    }
}

impl From<&RadiusSpec> for RadiusSchedule {
    fn from(r: &RadiusSpec) -> Self {
        match r {
            RadiusSpec::Constant(v) => RadiusSchedule::Constant(*v),
            RadiusSpec::PerStep(v) => RadiusSchedule::PerStep(v.clone()),
            RadiusSpec::Piecewise { piecewise } => RadiusSchedule::Piecewise(piecewise.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceUpdateSpec {
    #[default]
    Standard,
    Joseph,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialModeSpec {
    #[default]
    BeforeFirstTransition,
    AtFirstStep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSettings {
    pub rtv: RadiusSpec,
    pub mu_floor: f64,
    pub tie_tol: f64,
    pub condition_floor: f64,
    pub covariance_update: CovarianceUpdateSpec,
    pub initial_mode: InitialModeSpec,
}

impl Default for FilterSettings {
    fn default() -> Self {
        let base = FilterConfig::default();
        FilterSettings {
            rtv: RadiusSpec::default(),
            mu_floor: base.mu_floor,
            tie_tol: base.tie_tol,
            condition_floor: base.kalman.condition_floor,
            covariance_update: CovarianceUpdateSpec::Standard,
            initial_mode: InitialModeSpec::BeforeFirstTransition,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub name: String,
    /// First step, inclusive.
    pub start: usize,
    /// Last step, inclusive.
    pub end: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSettings {
    pub horizon: usize,
    pub runs: usize,
    pub rtv_grid: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub windows: Vec<WindowSpec>,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
}

fn default_resamples() -> usize {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema: u32,
    pub model: ModelSpec,
    /// Transition matrices generating the data. Defaults to `model.Pi`.
    #[serde(default)]
    pub true_pi_schedule: Option<Vec<PiSegment>>,
    /// Transition matrices assumed by the filter. Defaults to `model.Pi`.
    #[serde(default)]
    pub nominal_pi_schedule: Option<Vec<PiSegment>>,
    #[serde(default)]
    pub filter: FilterSettings,
    #[serde(default)]
    pub experiment: Option<ExperimentSettings>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub fn rows_to_matrix(name: &str, rows: &Rows) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(bad(format!("{name}: rows have different lengths")));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &Matrix) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl ModelSpec {
    /// Builds the model without validating it; see [`Config::validate`].
    pub fn to_model(&self) -> Result<MjlsModel> {
        let modes = self
            .modes
            .iter()
            .enumerate()
            .map(|(j, m)| {
                Ok(ModeMatrices {
                    a: rows_to_matrix(&format!("modes[{j}].A"), &m.a)?,
                    b: rows_to_matrix(&format!("modes[{j}].B"), &m.b)?,
                    c: rows_to_matrix(&format!("modes[{j}].C"), &m.c)?,
                    d: rows_to_matrix(&format!("modes[{j}].D"), &m.d)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MjlsModel {
            n_x: self.n_x,
            n_y: self.n_y,
            n_w: self.n_w,
            n_v: self.n_v,
            modes,
            w: rows_to_matrix("W", &self.w)?,
            v: rows_to_matrix("V", &self.v)?,
            pi: rows_to_matrix("Pi", &self.pi)?,
            p0_mode: Vector::from_vec(self.p0_mode.clone()),
            x0_mean: Vector::from_vec(self.x0_mean.clone()),
            x0_cov: rows_to_matrix("X0", &self.x0_cov)?,
        })
    }
}

fn pi_schedule(segments: &Option<Vec<PiSegment>>, fallback: &Matrix) -> Result<PiSchedule> {
    match segments {
        None => Ok(PiSchedule::constant(fallback.clone())),
        Some(segs) => {
            let parsed = segs
                .iter()
                .map(|s| Ok((s.start, rows_to_matrix(&format!("Pi at step {}", s.start), &s.pi)?)))
                .collect::<Result<Vec<_>>>()?;
            PiSchedule::new(parsed).map_err(|e| bad(e.to_string()))
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_json(&text).map_err(|source| Error::Json { path: path.into(), source })?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(bad(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    /// Model invariants plus schedule problems, all as human-readable lines.
    pub fn validate(&self) -> Result<(ValidationReport, Vec<String>)> {
        let model = self.model.to_model()?;
        let report = model.validate();
        let mut extra = Vec::new();
        if report.is_ok() {
            for (name, segs) in [("true_pi_schedule", &self.true_pi_schedule), ("nominal_pi_schedule", &self.nominal_pi_schedule)] {
                if let Err(e) = pi_schedule(segs, &model.pi)
                    .and_then(|s| ModelSchedule::new(model.clone(), s).map_err(|e| bad(e.to_string())))
                {
                    extra.push(format!("{name}: {e}"));
                }
            }
        }
        if let Err(e) = RadiusSchedule::from(&self.filter.rtv).validate() {
            extra.push(format!("filter.rtv: {e}"));
        }
        Ok((report, extra))
    }

    pub fn model(&self) -> Result<MjlsModel> {
        let model = self.model.to_model()?;
        model.validate().into_result().map_err(|e| bad(e.to_string()))?;
        Ok(model)
    }

    pub fn true_schedule(&self) -> Result<ModelSchedule> {
        let model = self.model()?;
        let s = pi_schedule(&self.true_pi_schedule, &model.pi)?;
        ModelSchedule::new(model, s).map_err(|e| bad(e.to_string()))
    }

    pub fn nominal_schedule(&self) -> Result<ModelSchedule> {
        let model = self.model()?;
        let s = pi_schedule(&self.nominal_pi_schedule, &model.pi)?;
        ModelSchedule::new(model, s).map_err(|e| bad(e.to_string()))
    }

    pub fn initial_mode(&self) -> InitialModeConvention {
        match self.filter.initial_mode {
            InitialModeSpec::BeforeFirstTransition => InitialModeConvention::BeforeFirstTransition,
            InitialModeSpec::AtFirstStep => InitialModeConvention::AtFirstStep,
        }
    }

    pub fn filter_config(&self) -> Result<FilterConfig> {
        let f = &self.filter;
        let radius = RadiusSchedule::from(&f.rtv);
        radius.validate().map_err(|e| bad(format!("filter.rtv: {e}")))?;
        if !(f.mu_floor > 0.0) || !(f.tie_tol >= 0.0) || !(f.condition_floor >= 0.0) {
            return Err(bad("filter tolerances must be nonnegative (mu_floor positive)"));
        }
        Ok(FilterConfig {
            radius,
            mu_floor: f.mu_floor,
            tie_tol: f.tie_tol,
            kalman: KalmanOptions {
                covariance_update: match f.covariance_update {
                    CovarianceUpdateSpec::Standard => CovarianceUpdate::Standard,
                    CovarianceUpdateSpec::Joseph => CovarianceUpdate::Joseph,
                },
                condition_floor: f.condition_floor,
            },
        })
    }

    /// Experiment spec from the `experiment` section, with optional overrides.
    pub fn experiment_spec(
        &self,
        runs: Option<usize>,
        rtv_grid: Option<Vec<f64>>,
        seed: Option<u64>,
    ) -> Result<ExperimentSpec> {
        let settings = self
            .experiment
            .as_ref()
            .ok_or_else(|| bad("config has no `experiment` section"))?;
        let horizon = settings.horizon;
        let windows = if settings.windows.is_empty() {
            vec![Window { name: "all".into(), start: 1, end: horizon }]
        } else {
            settings
                .windows
                .iter()
                .map(|w| Window { name: w.name.clone(), start: w.start, end: w.end })
                .collect()
        };
        let spec = ExperimentSpec {
            true_schedule: self.true_schedule()?,
            nominal_schedule: self.nominal_schedule()?,
            horizon,
            radii: rtv_grid.unwrap_or_else(|| settings.rtv_grid.clone()),
            runs: runs.unwrap_or(settings.runs),
            seed: seed.unwrap_or(settings.seed),
            windows,
            filter: self.filter_config()?,
            initial_mode: self.initial_mode(),
            bootstrap_resamples: settings.bootstrap_resamples,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": 1,
        "model": {
            "n_x": 1, "n_y": 1, "n_w": 1, "n_v": 1,
            "modes": [
                {"A": [[0.9]], "B": [[1]], "C": [[1]], "D": [[1]]},
                {"A": [[0.2]], "B": [[1]], "C": [[1]], "D": [[1]]}
            ],
            "W": [[1]], "V": [[1]],
            "Pi": [[0.6, 0.4], [0.45, 0.55]],
            "p0_mode": [0.4, 0.6],
            "x0_mean": [0], "X0": [[1]]
        }
    }"#;

    #[test]
    fn minimal_config_defaults() {
        let cfg = Config::from_json(MINIMAL).unwrap();
        let (report, extra) = cfg.validate().unwrap();
        assert!(report.is_ok() && extra.is_empty());
        let f = cfg.filter_config().unwrap();
        assert_eq!(f.radius, RadiusSchedule::Constant(0.0));
        let s = cfg.nominal_schedule().unwrap();
        assert_eq!(s.view(50).pi, &cfg.model().unwrap().pi);
        assert!(cfg.experiment_spec(None, None, None).is_err());
    }

    #[test]
    fn radius_forms() {
        let c: RadiusSpec = serde_json::from_str("0.25").unwrap();
        assert_eq!(c, RadiusSpec::Constant(0.25));
        let c: RadiusSpec = serde_json::from_str("[0.1, 0.2]").unwrap();
        assert_eq!(c, RadiusSpec::PerStep(vec![0.1, 0.2]));
        let c: RadiusSpec = serde_json::from_str(r#"{"piecewise": [[1, 0.0], [70, 0.3]]}"#).unwrap();
        assert_eq!(RadiusSchedule::from(&c).at(80), 0.3);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(rows_to_matrix("X", &vec![vec![1.0, 2.0], vec![3.0]]).is_err());
        let m = rows_to_matrix("X", &vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(matrix_to_rows(&m), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn bad_row_reported() {
        let text = MINIMAL.replace("[[0.6, 0.4], [0.45, 0.55]]", "[[0.6, 0.6], [0.45, 0.55]]");
        let cfg = Config::from_json(&text).unwrap();
        let (report, _) = cfg.validate().unwrap();
        assert!(report.to_string().contains("row sum ≠ 1"));
        assert!(matches!(cfg.model(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = MINIMAL.replace("\"schema\": 1,", "\"schema\": 1, \"bogus\": 3,");
        assert!(Config::from_json(&text).is_err());
    }
}
