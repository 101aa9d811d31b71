use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mesh::{ConstraintMode, Tiling};
use crate::metric::{FieldKind, MetricField, MetricTensor, Rect};
use crate::optimizer::{ContinuationSchedule, LbfgsParams, TerminationCriteria};
use crate::{Error, Result};

/// A metric field by catalog id, with optional parameters.
///
/// `metric` applies to `constant`, `smoothing` to `s6`, `slope` and
/// `offset` to `s4`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricTensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
}

impl FieldSpec {
    pub fn catalog(id: &str) -> Self {
        Self {
            id: id.to_string(),
            metric: None,
            smoothing: None,
            slope: None,
            offset: None,
        }
    }

    pub fn build(&self) -> Result<MetricField> {
        let id = self.id.to_ascii_lowercase();
        let unused = |name: &str| {
            Error::InvalidArgument(format!("parameter `{name}` does not apply to field `{id}`"))
        };
        if self.metric.is_some() && id != "constant" {
            return Err(unused("metric"));
        }
        if self.smoothing.is_some() && id != "s6" {
            return Err(unused("smoothing"));
        }
        if (self.slope.is_some() || self.offset.is_some()) && id != "s4" {
            return Err(unused("slope/offset"));
        }
        let mut field = MetricField::catalog(&id)?;
        if let Some(m) = self.metric {
            if !m.is_positive_definite() {
                return Err(Error::InvalidArgument(format!(
                    "metric {m:?} is not positive definite"
                )));
            }
            field = MetricField::constant(m);
        }
        if let Some(delta) = self.smoothing {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(Error::InvalidArgument("smoothing must be positive".into()));
            }
            field = field.with_smoothing(delta);
        }
        if id == "s4" {
            let slope = self.slope.unwrap_or(1.0);
            let offset = self.offset.unwrap_or(0.0);
            if !(slope.is_finite() && offset.is_finite()) {
                return Err(Error::InvalidArgument(
                    "slope and offset must be finite".into(),
                ));
            }
            field = MetricField::new(FieldKind::SqrtInverseLinear { slope, offset });
        }
        Ok(field)
    }

    /// Rectangle used when the config gives none.
    pub fn default_domain(&self) -> Rect {
        match self.id.to_ascii_lowercase().as_str() {
            "s2" | "s3" => Rect::new(-1.0, 1.0, 0.0, 1.0),
            "s4" => Rect::new(0.0174, 0.3495, -2.0, 2.0),
            "s5" => Rect::new(-1.0, 5.0, -3.0, 3.0),
            "s6" => Rect::new(-1.0, 1.0, -1.0, 1.0),
            _ => Rect::new(0.0, 1.0, 0.0, 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 3, ny: 3 }
    }
}

fn default_n() -> usize {
    10
}

fn default_tiling() -> Tiling {
    Tiling::Equilateral
}

/// One optimization run, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub field: FieldSpec,
    #[serde(default)]
    pub domain: Option<Rect>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_tiling")]
    pub tiling: Tiling,
    #[serde(default)]
    pub initial_rotation_degrees: f64,
    #[serde(default)]
    pub constraints: ConstraintMode,
    #[serde(default)]
    pub termination: TerminationCriteria,
    #[serde(default)]
    pub lbfgs: LbfgsParams,
    #[serde(default)]
    pub continuation: ContinuationSchedule,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Reserved; runs are deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn new(field: FieldSpec) -> Self {
        Self {
            field,
            domain: None,
            grid: GridSpec::default(),
            n: default_n(),
            tiling: default_tiling(),
            initial_rotation_degrees: 0.0,
            constraints: ConstraintMode::Free,
            termination: TerminationCriteria::default(),
            lbfgs: LbfgsParams::default(),
            continuation: ContinuationSchedule::default(),
            output_dir: None,
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn domain(&self) -> Rect {
        self.domain.unwrap_or_else(|| self.field.default_domain())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let field = self.field.build()?;
        if self.n == 0 {
            return bad("n must be >= 1".into());
        }
        if self.grid.nx == 0 || self.grid.ny == 0 {
            return bad("grid nx and ny must be >= 1".into());
        }
        let d = self.domain();
        if ![d.x0, d.x1, d.y0, d.y1].iter().all(|v| v.is_finite()) || d.x0 >= d.x1 || d.y0 >= d.y1 {
            return bad(format!("invalid domain {d:?}"));
        }
        let v = field.domain;
        let inside = |lo: f64, hi: f64, a: f64, b: f64| {
            (a > lo || lo == f64::NEG_INFINITY) && (b < hi || hi == f64::INFINITY)
        };
        if !(inside(v.x0, v.x1, d.x0, d.x1) && inside(v.y0, v.y1, d.y0, d.y1)) {
            return bad(format!(
                "domain {d:?} leaves the field's region of validity"
            ));
        }
        if !self.initial_rotation_degrees.is_finite() {
            return bad("initial rotation must be finite".into());
        }
        if self.initial_rotation_degrees != 0.0 && self.constraints == ConstraintMode::SlideBoundary
        {
            return bad("slide_boundary needs an axis-aligned mesh (rotation 0)".into());
        }
        let t = &self.termination;
        if !(t.rel_cost_decrease_tol >= 0.0 && t.grad_maxnorm_tol >= 0.0 && t.step_norm_tol >= 0.0)
        {
            return bad("termination tolerances must be non-negative".into());
        }
        let c = &self.continuation;
        if !(c.factor > 0.0 && c.factor <= 1.0 && c.cap >= 0.0 && c.cap < 1.0) {
            return bad("continuation needs factor in (0, 1] and cap in [0, 1)".into());
        }
        if self.lbfgs.history == 0 || !(self.lbfgs.c1 > 0.0 && self.lbfgs.c1 < 1.0) {
            return bad("lbfgs needs history >= 1 and c1 in (0, 1)".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::from_json(r#"{"field": {"id": "s2"}}"#).unwrap();
        assert_eq!(c.n, 10);
        assert_eq!(c.grid, GridSpec { nx: 3, ny: 3 });
        assert_eq!(c.tiling, Tiling::Equilateral);
        assert_eq!(c.domain(), Rect::new(-1.0, 1.0, 0.0, 1.0));
        assert_eq!(c.termination, TerminationCriteria::default());
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"{
            "field": {"id": "constant", "metric": {"m11": 2.0, "m12": 0.0, "m22": 1.0}},
            "domain": {"x0": 0, "x1": 4, "y0": 0, "y1": 4},
            "grid": {"nx": 4, "ny": 4}, "n": 1, "tiling": "right",
            "initial_rotation_degrees": 15, "constraints": "pin_corners",
            "termination": {"max_iters": 10}, "seed": 7
        }"#;
        let c = RunConfig::from_json(text).unwrap();
        assert_eq!(c.termination.max_iters, 10);
        assert_eq!(c.termination.grad_maxnorm_tol, 1e-10);
        let again = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(
            c.field.build().unwrap(),
            MetricField::constant(MetricTensor::diag(2.0, 1.0))
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            r#"{"field": {"id": "s9"}}"#,
            r#"{"field": {"id": "s1"}, "n": 0}"#,
            r#"{"field": {"id": "s1"}, "grid": {"nx": 0, "ny": 2}}"#,
            r#"{"field": {"id": "s4"}, "domain": {"x0": -0.5, "x1": 0.5, "y0": 0, "y1": 1}}"#,
            r#"{"field": {"id": "s4"}, "domain": {"x0": 0.0, "x1": 0.5, "y0": 0, "y1": 1}}"#,
            r#"{"field": {"id": "s1", "smoothing": 0.1}}"#,
            r#"{"field": {"id": "constant", "metric": {"m11": 1, "m12": 2, "m22": 1}}}"#,
            r#"{"field": {"id": "s1"}, "unknown": 1}"#,
            r#"{"field": {"id": "s1"}, "domain": {"x0": 1, "x1": 0, "y0": 0, "y1": 1}}"#,
            r#"{"field": {"id": "s1"}, "initial_rotation_degrees": 5, "constraints": "slide_boundary"}"#,
            r#"not json"#,
        ] {
            assert!(RunConfig::from_json(text).is_err(), "{text}");
        }
    }

    #[test]
    fn s6_smoothing_and_s4_parameters_apply() {
        let f = FieldSpec {
            smoothing: Some(0.01),
            ..FieldSpec::catalog("s6")
        }
        .build()
        .unwrap();
        assert_eq!(
            f.kind,
            FieldKind::BoundaryLayer {
                smoothing: Some(0.01)
            }
        );
        let f = FieldSpec {
            slope: Some(2.0),
            ..FieldSpec::catalog("s4")
        }
        .build()
        .unwrap();
        assert_eq!(
            f.kind,
            FieldKind::SqrtInverseLinear {
                slope: 2.0,
                offset: 0.0
            }
        );
    }
}
