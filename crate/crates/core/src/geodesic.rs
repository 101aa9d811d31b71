//! Geodesics of a metric field: initial-value integration with classical RK4
//! and two-point boundary values by shooting on the launch angle.

use serde::{Deserialize, Serialize};

use crate::measures::segment_length_quadrature;
use crate::metric::{rotation, MetricField};
use crate::{Error, Point, Result};

/// Christoffel symbols of the second kind, `gamma[k][i][j]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Christoffel(pub [[[f64; 2]; 2]; 2]);

impl Christoffel {
    /// `-Gamma^k_ij v^i v^j`
    pub fn acceleration(&self, v: &Point) -> Point {
        let w = [v.x, v.y];
        let mut a = [0.0; 2];
        for (k, ak) in a.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    *ak -= self.0[k][i][j] * w[i] * w[j];
                }
            }
        }
        Point::new(a[0], a[1])
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)`
pub fn christoffel(field: &MetricField, p: &Point) -> Result<Christoffel> {
    let (m, d) = field.evaluate_with_derivatives(p)?;
    let inv = m.inverse()?;
    let ginv = [[inv.m11, inv.m12], [inv.m12, inv.m22]];
    let comp = |t: &crate::metric::MetricTensor| [[t.m11, t.m12], [t.m12, t.m22]];
    // dg[l][i][j] = d_l g_ij
    let dg = [comp(&d.dx), comp(&d.dy)];
    let mut gamma = [[[0.0; 2]; 2]; 2];
    for (k, gk) in gamma.iter_mut().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for l in 0..2 {
                    s += ginv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                }
                gk[i][j] = 0.5 * s;
            }
        }
    }
    Ok(Christoffel(gamma))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicPolyline {
    pub points: Vec<Point>,
    pub velocities: Vec<Point>,
    pub initial_velocity: Point,
    /// Metric speed times integration time.
    pub metric_length: f64,
    /// Integration stopped early (left the field's domain).
    pub truncated: bool,
}

impl GeodesicPolyline {
    pub fn endpoint(&self) -> Point {
        *self.points.last().unwrap()
    }
}

fn rhs(field: &MetricField, x: &Point, v: &Point) -> Result<(Point, Point)> {
    Ok((*v, christoffel(field, x)?.acceleration(v)))
}

/// Integrates `x'' = -Gamma(x)(x', x')` on `[0, t_end]` with `n_steps` RK4 steps.
pub fn geodesic_ivp(
    field: &MetricField,
    x0: Point,
    v0: Point,
    t_end: f64,
    n_steps: usize,
) -> Result<GeodesicPolyline> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be positive".into()));
    }
    let speed = field.evaluate(&x0)?.norm(&v0);
    let h = t_end / n_steps as f64;
    let (mut x, mut v) = (x0, v0);
    let mut points = vec![x];
    let mut velocities = vec![v];
    let mut truncated = false;
    for _ in 0..n_steps {
        let step = || -> Result<(Point, Point)> {
            let (k1x, k1v) = rhs(field, &x, &v)?;
            let (k2x, k2v) = rhs(field, &(x + 0.5 * h * k1x), &(v + 0.5 * h * k1v))?;
            let (k3x, k3v) = rhs(field, &(x + 0.5 * h * k2x), &(v + 0.5 * h * k2v))?;
            let (k4x, k4v) = rhs(field, &(x + h * k3x), &(v + h * k3v))?;
            Ok((
                x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
                v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
            ))
        };
        match step() {
            Ok((xn, vn)) if field.evaluate(&xn).is_ok() => {
                x = xn;
                v = vn;
                points.push(x);
                velocities.push(v);
            }
            _ => {
                truncated = true;
                break;
            }
        }
    }
    Ok(GeodesicPolyline {
        points,
        velocities,
        initial_velocity: v0,
        metric_length: speed * t_end,
        truncated,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootingOptions {
    pub n_steps: usize,
    /// Euclidean endpoint tolerance.
    pub tol: f64,
    /// Half-width of the launch-angle scan, radians.
    pub max_angle: f64,
    /// Scan increment, radians.
    pub angle_step: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            n_steps: 200,
            tol: 1e-8,
            max_angle: 60f64.to_radians(),
            angle_step: 5f64.to_radians(),
        }
    }
}

struct Shot {
    path: GeodesicPolyline,
    /// Signed offset of the endpoint across the chord direction.
    transverse: f64,
}

struct Shooter<'a> {
    field: &'a MetricField,
    x0: Point,
    x1: Point,
    chord_dir: Point,
    chord_len: f64,
    chord_metric_len: f64,
    opts: ShootingOptions,
}

impl Shooter<'_> {
    /// Shoots at `angle` from the chord, rescaling the speed until the
    /// endpoint's projection on the chord lands on `x1`.
    fn shoot(&self, angle: f64) -> Option<Shot> {
        let dir = rotation(angle) * self.chord_dir;
        let m0 = self.field.evaluate(&self.x0).ok()?;
        let along = |s: f64| -> Option<(f64, GeodesicPolyline)> {
            let path = geodesic_ivp(self.field, self.x0, s * dir, 1.0, self.opts.n_steps).ok()?;
            if path.truncated {
                return None;
            }
            let r = (path.endpoint() - self.x0).dot(&self.chord_dir) - self.chord_len;
            Some((r, path))
        };
        let mut s0 = self.chord_metric_len / m0.norm(&dir);
        let (mut f0, mut path) = along(s0)?;
        // Rescale once by the overshoot ratio, then secant.
        let mut s1 = s0 * self.chord_len / (f0 + self.chord_len);
        if !(s1 > 0.0 && s1.is_finite()) {
            return None;
        }
        for _ in 0..60 {
            if f0.abs() <= 1e-14 * self.chord_len {
                break;
            }
            let (f1, p1) = along(s1)?;
            path = p1;
            if f1.abs() <= 1e-14 * self.chord_len || f1 == f0 {
                f0 = f1;
                break;
            }
            let s2 = s1 - f1 * (s1 - s0) / (f1 - f0);
            s0 = s1;
            f0 = f1;
            s1 = s2;
            if !(s1 > 0.0 && s1.is_finite()) {
                return None;
            }
        }
        if f0.abs() > 1e-10 * self.chord_len.max(1.0) {
            return None;
        }
        let e = path.endpoint() - self.x1;
        let transverse = self.chord_dir.x * e.y - self.chord_dir.y * e.x;
        Some(Shot { path, transverse })
    }
}

/// Geodesic from `x0` to `x1`, integration time 1, endpoint within `opts.tol`.
pub fn geodesic_bvp(
    field: &MetricField,
    x0: Point,
    x1: Point,
    opts: &ShootingOptions,
) -> Result<GeodesicPolyline> {
    let d = x1 - x0;
    let chord_len = d.norm();
    if chord_len == 0.0 {
        return Err(Error::InvalidArgument("geodesic endpoints coincide".into()));
    }
    let shooter = Shooter {
        field,
        x0,
        x1,
        chord_dir: d / chord_len,
        chord_len,
        chord_metric_len: segment_length_quadrature(&x0, &x1, field, 16)?,
        opts: *opts,
    };
    let done = |s: &Shot| (s.path.endpoint() - x1).norm() <= opts.tol;

    let center = shooter.shoot(0.0);
    if let Some(s) = &center {
        if done(s) {
            return Ok(s.path.clone());
        }
    }
    // Scan for a sign change of the transverse miss, nearest to the chord first.
    let n = (opts.max_angle / opts.angle_step).round() as i64;
    let samples: Vec<(f64, Option<Shot>)> = (-n..=n)
        .map(|k| {
            let a = k as f64 * opts.angle_step;
            (
                a,
                if k == 0 {
                    shooter.shoot(0.0)
                } else {
                    shooter.shoot(a)
                },
            )
        })
        .collect();
    let mut brackets: Vec<(f64, f64, f64)> = samples
        .windows(2)
        .filter_map(|w| match (&w[0].1, &w[1].1) {
            (Some(a), Some(b)) if a.transverse.signum() != b.transverse.signum() => {
                Some((w[0].0, w[1].0, a.transverse))
            }
            _ => None,
        })
        .collect();
    brackets.sort_by(|a, b| (a.0 + a.1).abs().total_cmp(&(b.0 + b.1).abs()));
    let (mut lo, mut hi, mut f_lo) = *brackets.first().ok_or_else(|| {
        Error::NoConvergence(format!(
            "no bracket within ±{:.0} degrees from ({}, {}) to ({}, {})",
            opts.max_angle.to_degrees(),
            x0.x,
            x0.y,
            x1.x,
            x1.y
        ))
    })?;
    let mut best: Option<Shot> = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let shot = shooter
            .shoot(mid)
            .ok_or_else(|| Error::NoConvergence("shot failed inside the bracket".into()))?;
        if done(&shot) {
            return Ok(shot.path);
        }
        if shot.transverse.signum() == f_lo.signum() {
            lo = mid;
            f_lo = shot.transverse;
        } else {
            hi = mid;
        }
        best = Some(shot);
        if hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1e-3) {
            break;
        }
    }
    let miss = best.map_or(f64::NAN, |s| (s.path.endpoint() - x1).norm());
    Err(Error::NoConvergence(format!(
        "bisection stalled, endpoint miss {miss:.3e}"
    )))
}

fn cumulative_lengths(points: &[Point]) -> Vec<f64> {
    let mut acc = vec![0.0];
    for w in points.windows(2) {
        acc.push(acc.last().unwrap() + (w[1] - w[0]).norm());
    }
    acc
}

/// `count` points equally spaced in Euclidean arc length along a polyline.
pub fn resample(points: &[Point], count: usize) -> Vec<Point> {
    let cum = cumulative_lengths(points);
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for k in 0..count {
        let target = total * k as f64 / (count - 1).max(1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < target {
            seg += 1;
        }
        let span = cum[seg + 1] - cum[seg];
        let t = if span > 0.0 {
            ((target - cum[seg]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(points[seg] + t * (points[seg + 1] - points[seg]));
    }
    out
}

fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p - (a + t * ab)).norm()
}

fn distance_to_polyline(p: &Point, line: &[Point]) -> f64 {
    line.windows(2)
        .map(|w| point_segment_distance(p, &w[0], &w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric maximum distance between two polylines, after resampling both
/// by arc length to a common sample count.
pub fn polyline_deviation(a: &[Point], b: &[Point]) -> f64 {
    let count = 4 * a.len().max(b.len()) + 1;
    let (ra, rb) = (resample(a, count), resample(b, count));
    let ab = ra
        .iter()
        .map(|p| distance_to_polyline(p, b))
        .fold(0.0, f64::max);
    let ba = rb
        .iter()
        .map(|p| distance_to_polyline(p, a))
        .fold(0.0, f64::max);
    ab.max(ba)
}

/// Euclidean deviation between an edge polyline and the geodesic joining its endpoints.
pub fn geodesic_deviation(
    edge: &[Point],
    field: &MetricField,
    opts: &ShootingOptions,
) -> Result<(f64, GeodesicPolyline)> {
    if edge.len() < 2 {
        return Err(Error::InvalidArgument(
            "edge polyline needs two points".into(),
        ));
    }
    let geo = geodesic_bvp(field, edge[0], *edge.last().unwrap(), opts)?;
    Ok((polyline_deviation(edge, &geo.points), geo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::polyline_length;
    use crate::metric::MetricTensor;
    use approx::assert_abs_diff_eq;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn christoffel_examples() {
        let c = MetricField::constant(MetricTensor::new(3.0, 1.0, 2.0));
        assert_eq!(christoffel(&c, &p(0.4, 2.0)).unwrap().max_abs(), 0.0);
        let s2 = MetricField::catalog("s2").unwrap();
        assert_eq!(christoffel(&s2, &p(0.0, 0.7)).unwrap().max_abs(), 0.0);
        let s5 = MetricField::catalog("s5").unwrap();
        assert_eq!(christoffel(&s5, &p(0.0, 0.0)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn christoffel_is_symmetric_and_matches_s2_closed_form() {
        let s2 = MetricField::catalog("s2").unwrap();
        let x = 0.8;
        let g = christoffel(&s2, &p(x, 0.3)).unwrap().0;
        // Only Gamma^x_xx = f' f'' / (1 + f'^2) is nonzero.
        assert_abs_diff_eq!(g[0][0][0], 4.0 * x / (1.0 + 4.0 * x * x), epsilon = 1e-15);
        let s6 = MetricField::catalog("s6").unwrap();
        for q in [p(0.1, 0.4), p(-0.7, -0.2), p(0.33, 0.9)] {
            let g = christoffel(&s6, &q).unwrap().0;
            for k in 0..2 {
                assert_eq!(g[k][0][1], g[k][1][0]);
            }
        }
    }

    #[test]
    fn straight_lines_for_constant_metrics() {
        let id = MetricField::identity();
        let g = geodesic_ivp(&id, p(0., 0.), p(1., 0.), 1.0, 10).unwrap();
        assert!((g.endpoint() - p(1., 0.)).norm() < 1e-15);
        assert!(g.points.iter().all(|q| q.y == 0.0));

        let c = MetricField::constant(MetricTensor::new(4.0, 0.5, 1.0));
        let (x0, v0) = (p(0.2, -0.3), p(0.7, 1.3));
        let g = geodesic_ivp(&c, x0, v0, 2.0, 40).unwrap();
        for (k, q) in g.points.iter().enumerate() {
            let t = 2.0 * k as f64 / 40.0;
            assert!((q - (x0 + t * v0)).norm() < 1e-10);
        }
    }

    #[test]
    fn radial_geodesics_of_the_paraboloid() {
        let s5 = MetricField::catalog("s5").unwrap();
        for a in [0.3f64, 1.0, 2.5] {
            let u = p(a.cos(), a.sin());
            let g = geodesic_ivp(&s5, p(0.0, 0.0), 0.8 * u, 1.0, 200).unwrap();
            for q in &g.points {
                assert!((u.x * q.y - u.y * q.x).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn speed_is_conserved() {
        for id in ["s2", "s3", "s5", "s6"] {
            let f = MetricField::catalog(id).unwrap();
            let g = geodesic_ivp(&f, p(0.1, 0.2), p(0.3, 0.15), 1.0, 200).unwrap();
            let speeds: Vec<f64> = g
                .points
                .iter()
                .zip(&g.velocities)
                .map(|(x, v)| f.evaluate(x).unwrap().norm(v))
                .collect();
            for s in &speeds {
                assert!(
                    (s / speeds[0] - 1.0).abs() < 1e-6,
                    "{id}: {s} vs {}",
                    speeds[0]
                );
            }
        }
    }

    #[test]
    fn truncates_when_leaving_the_domain() {
        let s4 = MetricField::catalog("s4").unwrap();
        // Along x the metric is ds = dx / x, so x grows like exp(6t) and
        // leaves x <= 1 near t = 0.12; it never reaches x = 0 going left.
        let g = geodesic_ivp(&s4, p(0.5, 0.0), p(3.0, 0.0), 1.0, 100).unwrap();
        assert!(g.truncated);
        assert!(g.points.len() < 101);
    }

    #[test]
    fn bvp_examples() {
        let opts = ShootingOptions::default();
        let id = MetricField::identity();
        let g = geodesic_bvp(&id, p(0.1, 0.2), p(1.3, -0.4), &opts).unwrap();
        assert!((g.endpoint() - p(1.3, -0.4)).norm() < 1e-8);

        let c = MetricField::constant(MetricTensor::diag(4.0, 1.0));
        let g = geodesic_bvp(&c, p(0., 0.), p(1., 1.), &opts).unwrap();
        for q in &g.points {
            assert!((q.x - q.y).abs() < 1e-10);
        }

        let s2 = MetricField::catalog("s2").unwrap();
        let (a, b) = (p(0.0, 0.0), p(1.0, 0.0));
        let g = geodesic_bvp(&s2, a, b, &opts).unwrap();
        assert!((g.endpoint() - b).norm() < 1e-8);
        let chord = segment_length_quadrature(&a, &b, &s2, 32).unwrap();
        assert!(polyline_length(&g.points, &s2, 8).unwrap() <= chord + 1e-6);

        // A curved case: the geodesic must bend away from the chord.
        let (a, b) = (p(-1.0, 0.0), p(1.0, 0.5));
        let g = geodesic_bvp(&s2, a, b, &opts).unwrap();
        assert!((g.endpoint() - b).norm() < 1e-8);
        let chord = segment_length_quadrature(&a, &b, &s2, 64).unwrap();
        let len = polyline_length(&g.points, &s2, 8).unwrap();
        assert!(len < chord - 1e-3, "{len} vs {chord}");
        assert_abs_diff_eq!(len, g.metric_length, epsilon = 1e-4);

        // Re-shooting from the returned velocity reproduces the endpoint.
        let again = geodesic_ivp(&s2, a, g.initial_velocity, 1.0, opts.n_steps).unwrap();
        assert!((again.endpoint() - b).norm() < 1e-8);

        assert!(geodesic_bvp(&id, a, a, &opts).is_err());
    }

    #[test]
    fn deviation_examples() {
        let id = MetricField::identity();
        let opts = ShootingOptions::default();
        let edge: Vec<Point> = (0..=10)
            .map(|k| p(0.1 * k as f64, 0.05 * k as f64))
            .collect();
        let (dev, _) = geodesic_deviation(&edge, &id, &opts).unwrap();
        assert!(dev < 1e-10);

        let s2 = MetricField::catalog("s2").unwrap();
        let g = geodesic_bvp(&s2, p(-1.0, 0.0), p(1.0, 0.5), &opts).unwrap();
        let sampled: Vec<Point> = g.points.iter().step_by(10).copied().collect();
        let (dev, _) = geodesic_deviation(&sampled, &s2, &opts).unwrap();
        assert!(dev < 1e-3, "{dev}");

        let bent = vec![p(0., 0.), p(0.5, 0.3), p(1., 0.)];
        let (dev, _) = geodesic_deviation(&bent, &id, &opts).unwrap();
        assert_abs_diff_eq!(dev, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn resample_keeps_endpoints() {
        let line = vec![p(0., 0.), p(1., 0.), p(1., 2.)];
        let r = resample(&line, 7);
        assert_eq!(r.len(), 7);
        assert_eq!(r[0], line[0]);
        assert_abs_diff_eq!(r[6], line[2], epsilon = 1e-15);
        assert_abs_diff_eq!(r[2], p(1.0, 0.0), epsilon = 1e-15);
    }
}
