//! JSON run report: optimizer statistics and mesh diagnostics.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geodesic::{geodesic_deviation, ShootingOptions};
use crate::measures::{quality_element, segment_length_quadrature, TriangleQuadrature};
use crate::mesh::{EdgeClass, SubdividedMesh};
use crate::metric::{MetricField, Rect};
use crate::objective::TargetSpec;
use crate::optimizer::RunStats;
use crate::unitness::{
    classify_qu1_macro, classify_qu2, macro_edge_polylines, Qu2Options, Verdict,
};
use crate::{Error, Point, Result};

const LENGTH_QUADRATURE_POINTS: usize = 16;

/// Fixed-bin histogram; values outside `[lo, hi)` land in the outer counters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
    pub below: usize,
    pub above: usize,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize, values: &[f64]) -> Self {
        let mut h = Self {
            lo,
            hi,
            counts: vec![0; bins],
            below: 0,
            above: 0,
        };
        let width = (hi - lo) / bins as f64;
        for &v in values {
            if v < lo || v.is_nan() {
                h.below += 1;
            } else if v >= hi {
                h.above += 1;
            } else {
                let k = (((v - lo) / width) as usize).min(bins - 1);
                h.counts[k] += 1;
            }
        }
        h
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.below + self.above
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeClassSummary {
    pub class: EdgeClass,
    pub count: usize,
    pub target: f64,
    /// Extremes of metric length over target length.
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub histogram: Histogram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub fraction_at_least_0_9: f64,
    pub histogram: Histogram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroEdgeGeodesic {
    pub vertices: [usize; 2],
    /// Deviation from the geodesic over the Euclidean chord length.
    pub relative_deviation: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSummary {
    pub max_relative_deviation: f64,
    pub mean_relative_deviation: f64,
    pub failures: usize,
    pub edges: Vec<MacroEdgeGeodesic>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolaFit {
    pub vertices: [usize; 2],
    /// Largest subvertex distance from the fitted quadratic, over chord length.
    pub relative_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientRaster {
    pub domain: Rect,
    pub nx: usize,
    pub ny: usize,
    /// Row-major from the bottom row, sampled at cell centers.
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UnitnessSummary {
    pub macros: usize,
    pub qu1_pass: usize,
    pub qu2_pass: usize,
    pub qu2_indeterminate: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub n: usize,
    pub tiling: crate::mesh::Tiling,
    pub subtriangles: usize,
    pub subedges: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<RunStats>,
    pub edge_classes: Vec<EdgeClassSummary>,
    pub min_edge_ratio: f64,
    pub max_edge_ratio: f64,
    pub quality: QualitySummary,
    pub qualities: Vec<f64>,
    pub edge_lengths: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geodesics: Option<GeodesicSummary>,
    pub parabola_fit: Vec<ParabolaFit>,
    pub max_parabola_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anisotropic_quotient: Option<QuotientRaster>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitness: Option<UnitnessSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportOptions {
    pub quadrature: TriangleQuadrature,
    pub histogram_bins: usize,
    pub geodesics: bool,
    pub shooting: ShootingOptions,
    pub unitness: bool,
    pub qu1_a: f64,
    pub qu2: Qu2Options,
    /// Raster resolution for the anisotropic quotient, `None` to skip it.
    pub raster: Option<(usize, usize)>,
    pub raster_domain: Option<Rect>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            quadrature: TriangleQuadrature::Degree2,
            histogram_bins: 20,
            geodesics: true,
            shooting: ShootingOptions::default(),
            unitness: true,
            qu1_a: 0.8,
            qu2: Qu2Options::default(),
            raster: Some((32, 32)),
            raster_domain: None,
        }
    }
}

impl ReportOptions {
    /// Only the per-element measurements.
    pub fn minimal() -> Self {
        Self {
            geodesics: false,
            unitness: false,
            raster: None,
            ..Self::default()
        }
    }
}

/// Per-subtriangle quality in subtriangle order.
pub fn subtriangle_qualities(
    mesh: &SubdividedMesh,
    field: &MetricField,
    quad: TriangleQuadrature,
) -> Result<Vec<f64>> {
    let n = mesh.n() as f64;
    let ideal = mesh.tiling().ideal().map(|p| p / n);
    mesh.subtriangles()
        .iter()
        .map(|t| quality_element(&mesh.triangle_points(t), &ideal, field, quad))
        .collect()
}

/// Per-subedge metric length in subedge order.
pub fn subedge_lengths(mesh: &SubdividedMesh, field: &MetricField) -> Result<Vec<f64>> {
    mesh.subedges()
        .iter()
        .map(|e| {
            let [a, b] = e.vertices;
            segment_length_quadrature(
                &mesh.vertices[a],
                &mesh.vertices[b],
                field,
                LENGTH_QUADRATURE_POINTS,
            )
        })
        .collect()
}

/// Least-squares quadratic through the points at `t = k / (len - 1)`;
/// returns the largest residual distance.
pub fn quadratic_fit_residual(points: &[Point]) -> f64 {
    let m = points.len();
    if m <= 3 {
        return 0.0;
    }
    let t: Vec<f64> = (0..m).map(|k| k as f64 / (m - 1) as f64).collect();
    let mut ata = Matrix3::zeros();
    let mut atx = Vector3::zeros();
    let mut aty = Vector3::zeros();
    for (k, p) in points.iter().enumerate() {
        let row = Vector3::new(1.0, t[k], t[k] * t[k]);
        ata += row * row.transpose();
        atx += row * p.x;
        aty += row * p.y;
    }
    let chol = ata
        .cholesky()
        .expect("distinct samples give a definite system");
    let (cx, cy) = (chol.solve(&atx), chol.solve(&aty));
    points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let row = Vector3::new(1.0, t[k], t[k] * t[k]);
            (Point::new(cx.dot(&row), cy.dot(&row)) - p).norm()
        })
        .fold(0.0, f64::max)
}

pub fn parabola_fits(mesh: &SubdividedMesh) -> Vec<ParabolaFit> {
    mesh.macro_edges()
        .iter()
        .map(|e| {
            let pts: Vec<Point> = e.path.iter().map(|&v| mesh.vertices[v]).collect();
            let chord = (pts[pts.len() - 1] - pts[0]).norm();
            ParabolaFit {
                vertices: [e.path[0], e.path[e.path.len() - 1]],
                relative_residual: quadratic_fit_residual(&pts) / chord,
            }
        })
        .collect()
}

pub fn geodesic_summary(
    mesh: &SubdividedMesh,
    field: &MetricField,
    opts: &ShootingOptions,
) -> GeodesicSummary {
    let edges: Vec<MacroEdgeGeodesic> = mesh
        .macro_edges()
        .iter()
        .map(|e| {
            let pts: Vec<Point> = e.path.iter().map(|&v| mesh.vertices[v]).collect();
            let chord = (pts[pts.len() - 1] - pts[0]).norm();
            let vertices = [e.path[0], e.path[e.path.len() - 1]];
            match geodesic_deviation(&pts, field, opts) {
                Ok((d, _)) => MacroEdgeGeodesic {
                    vertices,
                    relative_deviation: Some(d / chord),
                    error: None,
                },
                Err(err) => MacroEdgeGeodesic {
                    vertices,
                    relative_deviation: None,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect();
    let ok: Vec<f64> = edges.iter().filter_map(|e| e.relative_deviation).collect();
    GeodesicSummary {
        max_relative_deviation: ok.iter().copied().fold(0.0, f64::max),
        mean_relative_deviation: if ok.is_empty() {
            0.0
        } else {
            ok.iter().sum::<f64>() / ok.len() as f64
        },
        failures: edges.len() - ok.len(),
        edges,
    }
}

pub fn quotient_raster(field: &MetricField, domain: Rect, nx: usize, ny: usize) -> QuotientRaster {
    let mut values = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let p = Point::new(
                domain.x0 + domain.width() * (i as f64 + 0.5) / nx as f64,
                domain.y0 + domain.height() * (j as f64 + 0.5) / ny as f64,
            );
            values.push(field.evaluate(&p).ok().map(|m| m.anisotropic_quotient()));
        }
    }
    QuotientRaster {
        domain,
        nx,
        ny,
        values,
    }
}

fn bounding_box(points: &[Point]) -> Rect {
    let mut r = Rect::new(
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in points {
        r.x0 = r.x0.min(p.x);
        r.x1 = r.x1.max(p.x);
        r.y0 = r.y0.min(p.y);
        r.y1 = r.y1.max(p.y);
    }
    r
}

pub fn build_report(
    mesh: &SubdividedMesh,
    field: &MetricField,
    stats: Option<RunStats>,
    opts: &ReportOptions,
) -> Result<Report> {
    if mesh.subtriangles().is_empty() {
        return Err(Error::InvalidArgument("mesh has no elements".into()));
    }
    let targets = TargetSpec::new(mesh.tiling(), mesh.n());
    let qualities = subtriangle_qualities(mesh, field, opts.quadrature)?;
    let lengths = subedge_lengths(mesh, field)?;
    let bins = opts.histogram_bins.max(1);

    let mut edge_classes = Vec::new();
    for class in [EdgeClass::Unit, EdgeClass::Leg, EdgeClass::Hypotenuse] {
        let target = targets.length(class);
        let ratios: Vec<f64> = mesh
            .subedges()
            .iter()
            .zip(&lengths)
            .filter(|(e, _)| e.class == class)
            .map(|(_, l)| l / target)
            .collect();
        if ratios.is_empty() {
            continue;
        }
        edge_classes.push(EdgeClassSummary {
            class,
            count: ratios.len(),
            target,
            min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
            max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            histogram: Histogram::new(0.5, 1.5, bins, &ratios),
        });
    }

    let count = qualities.len() as f64;
    let quality = QualitySummary {
        min: qualities.iter().copied().fold(f64::INFINITY, f64::min),
        max: qualities.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: qualities.iter().sum::<f64>() / count,
        fraction_at_least_0_9: qualities.iter().filter(|&&q| q >= 0.9).count() as f64 / count,
        histogram: Histogram::new(0.0, 1.0 + 1e-9, bins, &qualities),
    };

    let parabola_fit = parabola_fits(mesh);
    let unitness = if opts.unitness {
        let mut u = UnitnessSummary {
            macros: mesh.macros().len(),
            ..Default::default()
        };
        for m in 0..mesh.macros().len() {
            if classify_qu1_macro(mesh, m, field, opts.qu1_a)?.pass {
                u.qu1_pass += 1;
            }
            let edges = macro_edge_polylines(mesh, m);
            match classify_qu2(&edges, mesh.tiling(), field, &opts.qu2)?.verdict {
                Verdict::Pass => u.qu2_pass += 1,
                Verdict::Indeterminate => u.qu2_indeterminate += 1,
                Verdict::Fail => {}
            }
        }
        Some(u)
    } else {
        None
    };

    Ok(Report {
        n: mesh.n(),
        tiling: mesh.tiling(),
        subtriangles: mesh.subtriangles().len(),
        subedges: mesh.subedges().len(),
        stats,
        min_edge_ratio: edge_classes
            .iter()
            .map(|c| c.min_ratio)
            .fold(f64::INFINITY, f64::min),
        max_edge_ratio: edge_classes
            .iter()
            .map(|c| c.max_ratio)
            .fold(f64::NEG_INFINITY, f64::max),
        edge_classes,
        quality,
        qualities,
        edge_lengths: lengths,
        geodesics: opts
            .geodesics
            .then(|| geodesic_summary(mesh, field, &opts.shooting)),
        max_parabola_residual: parabola_fit
            .iter()
            .map(|f| f.relative_residual)
            .fold(0.0, f64::max),
        parabola_fit,
        anisotropic_quotient: opts.raster.map(|(nx, ny)| {
            let domain = opts
                .raster_domain
                .unwrap_or_else(|| bounding_box(&mesh.vertices));
            quotient_raster(field, domain, nx.max(1), ny.max(1))
        }),
        unitness,
    })
}

impl Report {
    /// JSON with the wall-clock field zeroed, for determinism checks.
    pub fn to_json_without_timing(&self) -> Result<String> {
        let mut r = self.clone();
        if let Some(s) = &mut r.stats {
            s.wall_time_s = 0.0;
        }
        Ok(serde_json::to_string_pretty(&r)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{MacroMesh, Tiling};
    use crate::metric::MetricTensor;
    use proptest::prelude::*;

    fn unit_mesh(tiling: Tiling) -> (SubdividedMesh, MetricField) {
        // Under diag(4, 1) the affine image of a unit grid is unit.
        let m = MacroMesh::uniform_grid(Rect::new(0.0, 1.0, 0.0, 2.0), 2, 2).unwrap();
        let mut s = SubdividedMesh::subdivide(&m, 2).unwrap();
        s.classify_edges(tiling);
        (s, MetricField::constant(MetricTensor::diag(4.0, 1.0)))
    }

    #[test]
    fn perfectly_unit_mesh_has_unit_quality() {
        let (s, field) = unit_mesh(Tiling::Right);
        let r = build_report(&s, &field, None, &ReportOptions::default()).unwrap();
        for q in &r.qualities {
            assert!((q - 1.0).abs() < 1e-8, "{q}");
        }
        assert!((r.min_edge_ratio - 1.0).abs() < 1e-12);
        assert!((r.max_edge_ratio - 1.0).abs() < 1e-12);
        assert_eq!(r.quality.fraction_at_least_0_9, 1.0);
        let g = r.geodesics.unwrap();
        assert_eq!(g.failures, 0);
        assert!(g.max_relative_deviation < 1e-6);
        assert!(r.max_parabola_residual < 1e-12);
        let u = r.unitness.unwrap();
        assert_eq!(u.qu1_pass, u.macros);
        assert_eq!(u.qu2_pass, u.macros);
    }

    #[test]
    fn histogram_mass_matches_element_counts() {
        let (mut s, field) = unit_mesh(Tiling::Right);
        s.vertices[9] += Point::new(0.05, -0.1);
        let r = build_report(&s, &field, None, &ReportOptions::minimal()).unwrap();
        assert_eq!(r.quality.histogram.total(), r.subtriangles);
        let edges: usize = r.edge_classes.iter().map(|c| c.histogram.total()).sum();
        assert_eq!(edges, r.subedges);
        assert_eq!(
            r.edge_classes.iter().map(|c| c.count).sum::<usize>(),
            r.subedges
        );
    }

    #[test]
    fn parabola_fit_is_exact_on_quadratics() {
        let pts: Vec<Point> = (0..=10)
            .map(|k| {
                let t = k as f64 / 10.0;
                Point::new(1.0 + 2.0 * t, 0.5 - t + 3.0 * t * t)
            })
            .collect();
        assert!(quadratic_fit_residual(&pts) < 1e-12);
        let cubic: Vec<Point> = (0..=10)
            .map(|k| {
                let t = k as f64 / 10.0;
                Point::new(t, t * t * t)
            })
            .collect();
        assert!(quadratic_fit_residual(&cubic) > 1e-3);
    }

    #[test]
    fn raster_samples_quotient() {
        let r = quotient_raster(
            &MetricField::catalog("s1").unwrap(),
            Rect::new(0.0, 1.0, 0.0, 1.0),
            3,
            2,
        );
        assert_eq!(r.values.len(), 6);
        for v in r.values {
            assert!((v.unwrap() - 2f64.powf(0.25)).abs() < 1e-12);
        }
        let s4 = quotient_raster(
            &MetricField::catalog("s4").unwrap(),
            Rect::new(-1.0, 1.0, 0.0, 1.0),
            2,
            1,
        );
        assert_eq!(s4.values[0], None);
        assert!(s4.values[1].is_some());
    }

    #[test]
    fn empty_mesh_is_rejected() {
        let s =
            SubdividedMesh::from_parts(1, Tiling::Right, vec![], vec![], vec![], vec![], vec![])
                .unwrap();
        assert!(build_report(
            &s,
            &MetricField::identity(),
            None,
            &ReportOptions::minimal()
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn histogram_conserves_mass(values in prop::collection::vec(-2.0f64..3.0, 0..200), bins in 1usize..30) {
            let h = Histogram::new(0.0, 1.0, bins, &values);
            prop_assert_eq!(h.total(), values.len());
        }
    }
}
