//! Classification of triangles against a metric and an ideal triangle:
//! linear unitness, Jacobian unitness, and the two quasi-unit criteria.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::geodesic::{geodesic_deviation, ShootingOptions};
use crate::measures::{
    affine_jacobian, distortion_pointwise, inner_angle, polyline_length, quality_element,
    segment_length_quadrature, TriangleQuadrature,
};
use crate::mesh::{lattice_triangles, SubdividedMesh, Tiling, EDGE_RATIO_WINDOW};
use crate::metric::{rotation, MetricField};
use crate::{Error, Point, Result};

const LENGTH_QUADRATURE_POINTS: usize = 16;

/// True when every edge of the straight triangle has metric length in `[1 - tol, 1 + tol]`.
pub fn is_unit_linear(tri: &[Point; 3], field: &MetricField, tol: f64) -> Result<bool> {
    for k in 0..3 {
        let l =
            segment_length_quadrature(&tri[k], &tri[(k + 1) % 3], field, LENGTH_QUADRATURE_POINTS)?;
        if (l - 1.0).abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Rotation closest to `a` in the Frobenius norm, as an angle.
pub fn polar_rotation_angle(a: &Matrix2<f64>) -> f64 {
    (a[(1, 0)] - a[(0, 1)]).atan2(a[(0, 0)] + a[(1, 1)])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianUnitness {
    /// Angle of the rotation relating the element to the ideal triangle.
    pub rotation: f64,
    /// `max |J_K - M^{-1/2} R J_0|_F / |J_0|_F` over the samples.
    pub residual: f64,
}

/// A sample of an element's Jacobian with respect to reference coordinates.
struct JacobianSample {
    point: Point,
    jacobian: Matrix2<f64>,
}

fn reference_to_ideal(ideal: Tiling) -> Matrix2<f64> {
    affine_jacobian(&Tiling::Right.ideal(), &ideal.ideal()).expect("ideal triangles are valid")
}

fn jacobian_unitness(
    samples: &[JacobianSample],
    ideal: Tiling,
    field: &MetricField,
    estimate_from: usize,
) -> Result<JacobianUnitness> {
    let j0 = reference_to_ideal(ideal);
    let j0_inv = j0.try_inverse().expect("ideal Jacobian is invertible");
    let first = samples
        .get(estimate_from)
        .ok_or_else(|| Error::InvalidArgument("no Jacobian samples".into()))?;
    if first.jacobian.determinant() == 0.0 {
        return Err(Error::InvalidArgument("singular element Jacobian".into()));
    }
    let m_half = field.evaluate(&first.point)?.sqrt()?;
    let theta = polar_rotation_angle(&(m_half * first.jacobian * j0_inv));
    let r = rotation(theta);
    let mut residual: f64 = 0.0;
    for s in samples {
        if s.jacobian.determinant() == 0.0 {
            return Err(Error::InvalidArgument("singular element Jacobian".into()));
        }
        let predicted = field.evaluate(&s.point)?.sqrt_inverse()? * r * j0;
        residual = residual.max((s.jacobian - predicted).norm() / j0.norm());
    }
    Ok(JacobianUnitness {
        rotation: theta,
        residual,
    })
}

/// Jacobian unitness of a straight triangle, sampled at barycentric points.
pub fn check_jacobian_unitness(
    tri: &[Point; 3],
    ideal: Tiling,
    field: &MetricField,
    samples: &[[f64; 3]],
) -> Result<JacobianUnitness> {
    let jk = affine_jacobian(&Tiling::Right.ideal(), tri)
        .map_err(|_| Error::InvalidArgument("singular element Jacobian".into()))?;
    let samples: Vec<_> = samples
        .iter()
        .map(|l| JacobianSample {
            point: tri[0] * l[0] + tri[1] * l[1] + tri[2] * l[2],
            jacobian: jk,
        })
        .collect();
    jacobian_unitness(&samples, ideal, field, 0)
}

/// Jacobian unitness of a subdivided macrotriangle: one sample per subtriangle,
/// at its centroid, with the rotation estimated on subtriangle `estimate_from`.
pub fn check_jacobian_unitness_macro(
    mesh: &SubdividedMesh,
    macro_id: usize,
    field: &MetricField,
    estimate_from: usize,
) -> Result<JacobianUnitness> {
    let n = mesh.n() as f64;
    let local = lattice_triangles(mesh.n());
    let samples = local
        .iter()
        .map(|pts| {
            let reference = pts.map(|(i, j)| Point::new(i as f64 / n, j as f64 / n));
            let physical = pts.map(|p| mesh.vertices[mesh.lattice_vertex(macro_id, p)]);
            Ok(JacobianSample {
                point: (physical[0] + physical[1] + physical[2]) / 3.0,
                jacobian: affine_jacobian(&reference, &physical)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    jacobian_unitness(&samples, ideal_of(mesh), field, estimate_from)
}

fn ideal_of(mesh: &SubdividedMesh) -> Tiling {
    mesh.tiling()
}

fn ratio_in_window(r: f64) -> bool {
    r >= EDGE_RATIO_WINDOW.0 && r <= EDGE_RATIO_WINDOW.1
}

fn ideal_edge_lengths(ideal: Tiling) -> [f64; 3] {
    let v = ideal.ideal();
    [0, 1, 2].map(|k| (v[(k + 1) % 3] - v[k]).norm())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Qu1Report {
    pub quality: f64,
    /// Metric length of each edge over the length of its homologous ideal edge.
    pub edge_ratios: [f64; 3],
    pub pass: bool,
}

impl Qu1Report {
    pub fn from_measurements(quality: f64, edge_ratios: [f64; 3], a: f64) -> Self {
        let pass =
            (a..=1.0 + 1e-12).contains(&quality) && edge_ratios.iter().all(|&r| ratio_in_window(r));
        Self {
            quality,
            edge_ratios,
            pass,
        }
    }
}

/// QU1 for a straight triangle `k` homologous, vertex by vertex, to `ideal`.
pub fn classify_qu1(
    k: &[Point; 3],
    ideal: Tiling,
    field: &MetricField,
    a: f64,
) -> Result<Qu1Report> {
    let quality = quality_element(k, &ideal.ideal(), field, TriangleQuadrature::Degree2)?;
    let ideal_len = ideal_edge_lengths(ideal);
    let mut ratios = [0.0; 3];
    for e in 0..3 {
        let l = segment_length_quadrature(&k[e], &k[(e + 1) % 3], field, LENGTH_QUADRATURE_POINTS)?;
        ratios[e] = l / ideal_len[e];
    }
    Ok(Qu1Report::from_measurements(quality, ratios, a))
}

/// Distortion-based quality of a subdivided macrotriangle against the ideal
/// triangle: the subtriangles tile it with equal reference areas.
pub fn macro_quality(
    mesh: &SubdividedMesh,
    macro_id: usize,
    field: &MetricField,
    quad: TriangleQuadrature,
) -> Result<f64> {
    let n = mesh.n() as f64;
    let j0 = reference_to_ideal(mesh.tiling());
    let mut mean = 0.0;
    for pts in lattice_triangles(mesh.n()) {
        let reference = pts.map(|(i, j)| Point::new(i as f64 / n, j as f64 / n));
        let ideal = reference.map(|p| j0 * p);
        let physical = pts.map(|p| mesh.vertices[mesh.lattice_vertex(macro_id, p)]);
        let j = affine_jacobian(&ideal, &physical)?;
        if j.determinant() <= 0.0 {
            return Ok(0.0);
        }
        let mut sub = 0.0;
        for (l, w) in quad.rule() {
            let x = physical[0] * l[0] + physical[1] * l[1] + physical[2] * l[2];
            sub += w * distortion_pointwise(&j, &field.evaluate(&x)?).powi(2);
        }
        mean += sub / (n * n);
    }
    Ok(1.0 / mean.sqrt())
}

/// Points of the three macroedges of a macrotriangle, `v0->v1, v1->v2, v2->v0`.
pub fn macro_edge_polylines(mesh: &SubdividedMesh, macro_id: usize) -> [Vec<Point>; 3] {
    mesh.macro_triangle_edges(macro_id)
        .map(|path| path.iter().map(|&v| mesh.vertices[v]).collect())
}

fn polyline_ratios(
    edges: &[Vec<Point>; 3],
    ideal: Tiling,
    field: &MetricField,
) -> Result<[f64; 3]> {
    let ideal_len = ideal_edge_lengths(ideal);
    let mut out = [0.0; 3];
    for e in 0..3 {
        out[e] = polyline_length(&edges[e], field, LENGTH_QUADRATURE_POINTS)? / ideal_len[e];
    }
    Ok(out)
}

pub fn classify_qu1_macro(
    mesh: &SubdividedMesh,
    macro_id: usize,
    field: &MetricField,
    a: f64,
) -> Result<Qu1Report> {
    let quality = macro_quality(mesh, macro_id, field, TriangleQuadrature::Degree2)?;
    let edges = macro_edge_polylines(mesh, macro_id);
    Ok(Qu1Report::from_measurements(
        quality,
        polyline_ratios(&edges, mesh.tiling(), field)?,
        a,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// A geodesic could not be computed for some edge.
    Indeterminate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Qu2Options {
    /// Angle window half-width, radians.
    pub b: f64,
    /// Allowed geodesic deviation as a fraction of the edge's Euclidean chord.
    pub geo_tol: f64,
    pub shooting: ShootingOptions,
}

impl Default for Qu2Options {
    fn default() -> Self {
        Self {
            b: 30f64.to_radians(),
            geo_tol: 0.05,
            shooting: ShootingOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Qu2Report {
    /// Deviation over chord length, `None` when the geodesic solve failed.
    pub geodesic_deviations: [Option<f64>; 3],
    /// Measured minus ideal angle at each vertex, radians.
    pub angle_offsets: [f64; 3],
    pub edge_ratios: [f64; 3],
    pub verdict: Verdict,
}

/// QU2 for a triangle with polyline edges `v0->v1, v1->v2, v2->v0`.
pub fn classify_qu2(
    edges: &[Vec<Point>; 3],
    ideal: Tiling,
    field: &MetricField,
    opts: &Qu2Options,
) -> Result<Qu2Report> {
    if edges.iter().any(|e| e.len() < 2) {
        return Err(Error::InvalidArgument(
            "edge polylines need two points".into(),
        ));
    }
    let mut deviations = [None; 3];
    for e in 0..3 {
        let chord = (edges[e][edges[e].len() - 1] - edges[e][0]).norm();
        deviations[e] = geodesic_deviation(&edges[e], field, &opts.shooting)
            .ok()
            .map(|(d, _)| d / chord);
    }
    let angles = ideal.ideal_angles();
    let mut offsets = [0.0; 3];
    for v in 0..3 {
        let out = &edges[v];
        let back = &edges[(v + 2) % 3];
        let t_out = out[1] - out[0];
        let t_in = back[back.len() - 2] - back[back.len() - 1];
        let m = field.evaluate(&out[0])?;
        offsets[v] = inner_angle(&t_out, &t_in, &m)? - angles[v];
    }
    let ratios = polyline_ratios(edges, ideal, field)?;
    let verdict = if deviations.iter().any(Option::is_none) {
        Verdict::Indeterminate
    } else {
        let geodesic = deviations.iter().all(|d| d.unwrap() <= opts.geo_tol);
        let angled = offsets.iter().all(|o| o.abs() <= opts.b);
        if geodesic && angled && ratios.iter().all(|&r| ratio_in_window(r)) {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    };
    Ok(Qu2Report {
        geodesic_deviations: deviations,
        angle_offsets: offsets,
        edge_ratios: ratios,
        verdict,
    })
}

/// All unitness checks for one macrotriangle of a subdivided mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitnessReport {
    pub macro_id: usize,
    pub is_unit_linear: bool,
    pub jacobian_residual: f64,
    pub estimated_rotation: f64,
    pub qu1: Qu1Report,
    pub qu2: Qu2Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitnessOptions {
    pub a: f64,
    pub linear_tol: f64,
    pub qu2: Qu2Options,
}

impl Default for UnitnessOptions {
    fn default() -> Self {
        Self {
            a: 0.8,
            linear_tol: 1e-3,
            qu2: Qu2Options::default(),
        }
    }
}

pub fn unitness_report(
    mesh: &SubdividedMesh,
    macro_id: usize,
    field: &MetricField,
    opts: &UnitnessOptions,
) -> Result<UnitnessReport> {
    let edges = macro_edge_polylines(mesh, macro_id);
    let ratios = polyline_ratios(&edges, mesh.tiling(), field)?;
    let jac = check_jacobian_unitness_macro(mesh, macro_id, field, 0)?;
    let straight = edges.iter().all(|e| {
        let (a, b) = (e[0], e[e.len() - 1]);
        e.iter()
            .all(|p| crate::mesh::signed_area(&a, &b, p).abs() <= 1e-9 * (b - a).norm_squared())
    });
    Ok(UnitnessReport {
        macro_id,
        is_unit_linear: straight && ratios.iter().all(|r| (r - 1.0).abs() <= opts.linear_tol),
        jacobian_residual: jac.residual,
        estimated_rotation: jac.rotation,
        qu1: classify_qu1_macro(mesh, macro_id, field, opts.a)?,
        qu2: classify_qu2(&edges, mesh.tiling(), field, &opts.qu2)?,
    })
}
