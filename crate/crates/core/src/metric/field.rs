use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::MetricTensor;
use crate::{Error, Point, Result};

/// Partial derivatives of the metric components at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricDerivatives {
    pub dx: MetricTensor,
    pub dy: MetricTensor,
    /// Set when the point lies on a locus where the field is only continuous.
    pub nonsmooth: bool,
}

impl MetricDerivatives {
    pub const ZERO: Self = Self {
        dx: MetricTensor::ZERO,
        dy: MetricTensor::ZERO,
        nonsmooth: false,
    };

    fn smooth(dx: MetricTensor, dy: MetricTensor) -> Self {
        Self {
            dx,
            dy,
            nonsmooth: false,
        }
    }

    /// Directional derivative along `d`.
    pub fn along(&self, d: &Point) -> MetricTensor {
        self.dx.scale(d.x).add(&self.dy.scale(d.y))
    }
}

/// Profile `f(x)` of a surface `z = f(x)` extruded along `y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `f = x`
    Linear,
    /// `f = x^2`
    Quadratic,
    /// `f = exp(-10 x^2)`
    Gaussian,
}

impl Profile {
    /// `(f', f'')`
    fn slopes(self, x: f64) -> (f64, f64) {
        match self {
            Profile::Linear => (1.0, 0.0),
            Profile::Quadratic => (2.0 * x, 2.0),
            Profile::Gaussian => {
                let e = (-10.0 * x * x).exp();
                (-20.0 * x * e, (400.0 * x * x - 20.0) * e)
            }
        }
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`; bounds may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const PLANE: Rect = Rect {
        x0: f64::NEG_INFINITY,
        x1: f64::INFINITY,
        y0: f64::NEG_INFINITY,
        y1: f64::INFINITY,
    };

    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    Constant {
        metric: MetricTensor,
    },
    /// Metric induced by the graph of `z = f(x)`.
    Extruded {
        profile: Profile,
    },
    /// `M^{-1/2} = diag(slope * x + offset, 1)`.
    SqrtInverseLinear {
        slope: f64,
        offset: f64,
    },
    /// Graph of `z = x^2 + y^2`, in Cartesian coordinates `I + 4 p p^T`.
    Paraboloid,
    /// Undulating boundary layer. `smoothing` replaces `|t|` by `sqrt(t^2 + delta^2)`.
    BoundaryLayer {
        #[serde(default)]
        smoothing: Option<f64>,
    },
}

/// An analytic Riemannian metric field over a planar region of validity.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    pub kind: FieldKind,
    pub domain: Rect,
}

const S4_DOMAIN: Rect = Rect::new(0.0, 1.0, f64::NEG_INFINITY, f64::INFINITY);

fn boundary_layer_scale() -> f64 {
    (100.0 + 4.0 * PI * PI).sqrt()
}

impl MetricField {
    pub fn new(kind: FieldKind) -> Self {
        let domain = match kind {
            FieldKind::SqrtInverseLinear { .. } => S4_DOMAIN,
            _ => Rect::PLANE,
        };
        Self { kind, domain }
    }

    pub fn constant(m: MetricTensor) -> Self {
        Self::new(FieldKind::Constant { metric: m })
    }

    pub fn identity() -> Self {
        Self::constant(MetricTensor::IDENTITY)
    }

    /// Catalog lookup: `s1`..`s6` (case-insensitive) or `identity`.
    pub fn catalog(id: &str) -> Result<Self> {
        let kind = match id.to_ascii_lowercase().as_str() {
            "s1" => FieldKind::Extruded {
                profile: Profile::Linear,
            },
            "s2" => FieldKind::Extruded {
                profile: Profile::Quadratic,
            },
            "s3" => FieldKind::Extruded {
                profile: Profile::Gaussian,
            },
            "s4" => FieldKind::SqrtInverseLinear {
                slope: 1.0,
                offset: 0.0,
            },
            "s5" => FieldKind::Paraboloid,
            "s6" => FieldKind::BoundaryLayer { smoothing: None },
            "identity" | "constant" => FieldKind::Constant {
                metric: MetricTensor::IDENTITY,
            },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown field id `{other}`"
                )))
            }
        };
        Ok(Self::new(kind))
    }

    pub fn with_smoothing(mut self, delta: f64) -> Self {
        if let FieldKind::BoundaryLayer { smoothing } = &mut self.kind {
            *smoothing = Some(delta);
        }
        self
    }

    pub fn is_constant(&self) -> bool {
        matches!(
            self.kind,
            FieldKind::Constant { .. }
                | FieldKind::Extruded {
                    profile: Profile::Linear
                }
        )
    }

    fn check_domain(&self, p: &Point) -> Result<()> {
        if p.x.is_finite() && p.y.is_finite() && self.domain.contains(p) {
            Ok(())
        } else {
            Err(Error::OutsideDomain(*p))
        }
    }

    pub fn evaluate(&self, p: &Point) -> Result<MetricTensor> {
        self.check_domain(p)?;
        let m = match &self.kind {
            FieldKind::Constant { metric } => *metric,
            FieldKind::Extruded { profile } => {
                let (d, _) = profile.slopes(p.x);
                MetricTensor::diag(1.0 + d * d, 1.0)
            }
            FieldKind::SqrtInverseLinear { slope, offset } => {
                let s = slope * p.x + offset;
                if s <= 0.0 {
                    return Err(Error::Degenerate(format!(
                        "M^(-1/2) = diag({s}, 1) at x = {}",
                        p.x
                    )));
                }
                MetricTensor::diag(1.0 / (s * s), 1.0)
            }
            FieldKind::Paraboloid => MetricTensor::new(
                1.0 + 4.0 * p.x * p.x,
                4.0 * p.x * p.y,
                1.0 + 4.0 * p.y * p.y,
            ),
            FieldKind::BoundaryLayer { smoothing } => {
                let bl = BoundaryLayerTerms::at(p, *smoothing);
                bl.metric()
            }
        };
        if !m.is_positive_definite() {
            return Err(Error::Degenerate(format!("{m:?} at ({}, {})", p.x, p.y)));
        }
        Ok(m)
    }

    pub fn derivatives(&self, p: &Point) -> Result<MetricDerivatives> {
        self.check_domain(p)?;
        Ok(match &self.kind {
            FieldKind::Constant { .. } => MetricDerivatives::ZERO,
            FieldKind::Extruded { profile } => {
                let (d1, d2) = profile.slopes(p.x);
                MetricDerivatives::smooth(
                    MetricTensor::diag(2.0 * d1 * d2, 0.0),
                    MetricTensor::ZERO,
                )
            }
            FieldKind::SqrtInverseLinear { slope, offset } => {
                let s = slope * p.x + offset;
                if s <= 0.0 {
                    return Err(Error::Degenerate(format!(
                        "M^(-1/2) singular at x = {}",
                        p.x
                    )));
                }
                MetricDerivatives::smooth(
                    MetricTensor::diag(-2.0 * slope / (s * s * s), 0.0),
                    MetricTensor::ZERO,
                )
            }
            FieldKind::Paraboloid => MetricDerivatives::smooth(
                MetricTensor::new(8.0 * p.x, 4.0 * p.y, 0.0),
                MetricTensor::new(0.0, 4.0 * p.x, 8.0 * p.y),
            ),
            FieldKind::BoundaryLayer { smoothing } => {
                BoundaryLayerTerms::at(p, *smoothing).derivatives()
            }
        })
    }

    /// Metric and derivatives in one call.
    pub fn evaluate_with_derivatives(
        &self,
        p: &Point,
    ) -> Result<(MetricTensor, MetricDerivatives)> {
        Ok((self.evaluate(p)?, self.derivatives(p)?))
    }
}

/// Intermediate quantities of the boundary-layer metric
/// `J_phi^T diag(1, h^-2) J_phi`, `phi = (x, g)`, `h = 0.1 + 2|g|`.
struct BoundaryLayerTerms {
    gx: f64,
    gy: f64,
    gxx: f64,
    /// `|g|` or its smoothed version.
    abs_g: f64,
    /// d|g|/dg
    sign_g: f64,
    nonsmooth: bool,
}

impl BoundaryLayerTerms {
    fn at(p: &Point, smoothing: Option<f64>) -> Self {
        let c = boundary_layer_scale();
        let w = 2.0 * PI * p.x;
        let g = (10.0 * p.y - w.cos()) / c;
        let gx = 2.0 * PI * w.sin() / c;
        let gy = 10.0 / c;
        let gxx = 4.0 * PI * PI * w.cos() / c;
        let (abs_g, sign_g, nonsmooth) = match smoothing {
            Some(delta) => {
                let r = g.hypot(delta);
                (r, g / r, false)
            }
            None => {
                let s = if g > 0.0 {
                    1.0
                } else if g < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                (g.abs(), s, g == 0.0)
            }
        };
        Self {
            gx,
            gy,
            gxx,
            abs_g,
            sign_g,
            nonsmooth,
        }
    }

    fn h(&self) -> f64 {
        0.1 + 2.0 * self.abs_g
    }

    fn metric(&self) -> MetricTensor {
        let w = self.h().powi(-2);
        MetricTensor::new(
            1.0 + self.gx * self.gx * w,
            self.gx * self.gy * w,
            self.gy * self.gy * w,
        )
    }

    fn derivatives(&self) -> MetricDerivatives {
        let h = self.h();
        let w = h.powi(-2);
        // dw = -2 h^-3 dh, dh = 2 sign(g) dg
        let dw_dg = -2.0 * h.powi(-3) * 2.0 * self.sign_g;
        let wx = dw_dg * self.gx;
        let wy = dw_dg * self.gy;
        let dx = MetricTensor::new(
            2.0 * self.gx * self.gxx * w + self.gx * self.gx * wx,
            self.gxx * self.gy * w + self.gx * self.gy * wx,
            self.gy * self.gy * wx,
        );
        let dy = MetricTensor::new(
            self.gx * self.gx * wy,
            self.gx * self.gy * wy,
            self.gy * self.gy * wy,
        );
        MetricDerivatives {
            dx,
            dy,
            nonsmooth: self.nonsmooth,
        }
    }
}
