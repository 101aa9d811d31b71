//! Metric-weighted lengths, energies, areas, angles, Jacobians and
//! distortion-based quality of straight-sided triangles.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::mesh::signed_area;
use crate::metric::{pullback, MetricField, MetricTensor};
use crate::{Error, Point, Result};

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = ((4 * i + 3) as f64 * std::f64::consts::PI / (4 * n + 2) as f64).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// `sqrt(e^T M(mid) e)` with the metric sampled at the midpoint.
pub fn segment_length_midpoint(p0: &Point, p1: &Point, field: &MetricField) -> Result<f64> {
    let m = field.evaluate(&(0.5 * (p0 + p1)))?;
    Ok(m.norm(&(p1 - p0)))
}

/// Gauss-Legendre approximation of the metric length of a straight segment.
pub fn segment_length_quadrature(
    p0: &Point,
    p1: &Point,
    field: &MetricField,
    npts: usize,
) -> Result<f64> {
    if npts == 0 {
        return Err(Error::InvalidArgument(
            "quadrature needs at least one point".into(),
        ));
    }
    let e = p1 - p0;
    gauss_legendre(npts).iter().try_fold(0.0, |acc, &(t, w)| {
        Ok(acc + w * field.evaluate(&(p0 + t * e))?.norm(&e))
    })
}

/// Metric length of a polyline, each segment integrated by quadrature.
pub fn polyline_length(points: &[Point], field: &MetricField, npts: usize) -> Result<f64> {
    points.windows(2).try_fold(0.0, |acc, w| {
        Ok(acc + segment_length_quadrature(&w[0], &w[1], field, npts)?)
    })
}

/// `1/2 * integral of e^T M e` along the straight segment.
pub fn edge_energy(p0: &Point, p1: &Point, field: &MetricField, npts: usize) -> Result<f64> {
    if npts == 0 {
        return Err(Error::InvalidArgument(
            "quadrature needs at least one point".into(),
        ));
    }
    let e = p1 - p0;
    let s = gauss_legendre(npts).iter().try_fold(0.0, |acc, &(t, w)| {
        Ok::<_, Error>(acc + w * field.evaluate(&(p0 + t * e))?.quad(&e))
    })?;
    Ok(0.5 * s)
}

pub fn centroid(tri: &[Point; 3]) -> Point {
    (tri[0] + tri[1] + tri[2]) / 3.0
}

/// Signed metric area with the metric sampled at the centroid.
pub fn triangle_area_metric(tri: &[Point; 3], field: &MetricField) -> Result<f64> {
    let m = field.evaluate(&centroid(tri))?;
    Ok(m.det().sqrt() * signed_area(&tri[0], &tri[1], &tri[2]))
}

/// Angle between two vectors in the inner product of `m`, in `[0, pi]`.
pub fn inner_angle(u: &Point, v: &Point, m: &MetricTensor) -> Result<f64> {
    let (nu, nv) = (m.norm(u), m.norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::InvalidArgument("angle with a zero vector".into()));
    }
    Ok((m.inner(u, v) / (nu * nv)).clamp(-1.0, 1.0).acos())
}

fn edge_matrix(t: &[Point; 3]) -> Matrix2<f64> {
    Matrix2::from_columns(&[t[1] - t[0], t[2] - t[0]])
}

/// Constant Jacobian of the affine map sending `src` onto `dst` vertex by vertex.
pub fn affine_jacobian(src: &[Point; 3], dst: &[Point; 3]) -> Result<Matrix2<f64>> {
    let inv = edge_matrix(src)
        .try_inverse()
        .filter(|_| signed_area(&src[0], &src[1], &src[2]) != 0.0)
        .ok_or_else(|| Error::InvalidArgument("degenerate source triangle".into()))?;
    Ok(edge_matrix(dst) * inv)
}

/// `tr(J^T M J) / (2 sqrt(det(J^T M J)))`, at least 1; `+inf` for singular `J`.
pub fn distortion_pointwise(j: &Matrix2<f64>, m: &MetricTensor) -> f64 {
    let p = pullback(j, m);
    let det = p.det();
    if det <= 0.0 || j.determinant() == 0.0 {
        return f64::INFINITY;
    }
    0.5 * p.trace() / det.sqrt()
}

/// Quadrature rules on a triangle: barycentric nodes, weights summing to 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriangleQuadrature {
    /// 3 points, exact for degree 2.
    #[default]
    Degree2,
    /// 6 points, exact for degree 4.
    Degree4,
}

impl TriangleQuadrature {
    pub fn rule(self) -> Vec<([f64; 3], f64)> {
        let sym3 = |a: f64, w: f64| {
            let b = 1.0 - 2.0 * a;
            vec![([b, a, a], w), ([a, b, a], w), ([a, a, b], w)]
        };
        match self {
            TriangleQuadrature::Degree2 => sym3(1.0 / 6.0, 1.0 / 3.0),
            TriangleQuadrature::Degree4 => {
                let mut r = sym3(0.445_948_490_915_965, 0.223_381_589_678_011);
                r.extend(sym3(0.091_576_213_509_771, 0.109_951_743_655_322));
                r
            }
        }
    }
}

fn barycentric_point(t: &[Point; 3], l: &[f64; 3]) -> Point {
    t[0] * l[0] + t[1] * l[1] + t[2] * l[2]
}

/// Distortion-based quality of the straight triangle `k` with respect to the
/// ideal triangle `k0`: `(mean over k0 of eta^2)^(-1/2)`, 0 when inverted.
pub fn quality_element(
    k: &[Point; 3],
    k0: &[Point; 3],
    field: &MetricField,
    quad: TriangleQuadrature,
) -> Result<f64> {
    let j = affine_jacobian(k0, k)?;
    if j.determinant() * signed_area(&k0[0], &k0[1], &k0[2]).signum() <= 0.0 {
        return Ok(0.0);
    }
    let mut mean = 0.0;
    for (l, w) in quad.rule() {
        let m = field.evaluate(&barycentric_point(k, &l))?;
        mean += w * distortion_pointwise(&j, &m).powi(2);
    }
    Ok(1.0 / mean.sqrt())
}

/// Homologous edge vectors `v1 - v0, v2 - v1, v0 - v2`.
pub fn edge_vectors(t: &[Point; 3]) -> [Point; 3] {
    [t[1] - t[0], t[2] - t[1], t[0] - t[2]]
}
