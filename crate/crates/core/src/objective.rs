//! The cost `E = edge energy + area barrier` over a subdivided mesh and its
//! exact gradient with respect to the subvertex coordinates.

use serde::{Deserialize, Serialize};

use crate::mesh::{signed_area, ConstraintTag, EdgeClass, SubdividedMesh, Tiling};
use crate::metric::{MetricDerivatives, MetricField, MetricTensor};
use crate::sparse::SymmetricBuilder;
use crate::{Error, Point, Result};

/// Target quantities of an ideal subtriangle at scale 1/N.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub tiling: Tiling,
    pub n: usize,
}

impl TargetSpec {
    pub fn new(tiling: Tiling, n: usize) -> Self {
        Self { tiling, n }
    }

    pub fn length(&self, class: EdgeClass) -> f64 {
        class.ideal_length() / self.n as f64
    }

    pub fn length_squared(&self, class: EdgeClass) -> f64 {
        let l = match class {
            EdgeClass::Unit | EdgeClass::Leg => 1.0,
            EdgeClass::Hypotenuse => 2.0,
        };
        l / (self.n * self.n) as f64
    }

    pub fn area(&self) -> f64 {
        let nn = (self.n * self.n) as f64;
        match self.tiling {
            Tiling::Equilateral => 3f64.sqrt() / 4.0 / nn,
            Tiling::Right => 0.5 / nn,
        }
    }
}

/// Position of the logarithmic barrier, in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierParams {
    pub epsilon: f64,
}

impl BarrierParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if (0.0..1.0).contains(&epsilon) {
            Ok(Self { epsilon })
        } else {
            Err(Error::InvalidArgument(format!(
                "barrier epsilon {epsilon} not in [0, 1)"
            )))
        }
    }

    /// `ln((x - eps)/(1 - eps))^2 + (x - 1)^2`, `+inf` for `x <= eps`.
    pub fn penalty(&self, x: f64) -> f64 {
        let eps = self.epsilon;
        if !(x > eps) {
            return f64::INFINITY;
        }
        let l = ((x - eps) / (1.0 - eps)).ln();
        l * l + (x - 1.0) * (x - 1.0)
    }

    pub fn penalty_derivative(&self, x: f64) -> f64 {
        let eps = self.epsilon;
        let l = ((x - eps) / (1.0 - eps)).ln();
        2.0 * l / (x - eps) + 2.0 * (x - 1.0)
    }

    /// Gauss-Newton curvature of the penalty, `2 / (x - eps)^2 + 2`.
    pub fn gauss_newton_curvature(&self, x: f64) -> f64 {
        let u = x - self.epsilon;
        2.0 / (u * u) + 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub total: f64,
    pub energy: f64,
    pub barrier: f64,
    /// Smallest `|k|_M / |k|_target` over subtriangles.
    pub min_area_ratio: f64,
    pub max_area_ratio: f64,
    /// Largest absolute gradient component, when a gradient was computed.
    pub grad_max_norm: Option<f64>,
}

impl CostBreakdown {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }

    fn infeasible() -> Self {
        Self {
            total: f64::INFINITY,
            energy: f64::INFINITY,
            barrier: f64::INFINITY,
            min_area_ratio: f64::NAN,
            max_area_ratio: f64::NAN,
            grad_max_norm: None,
        }
    }
}

/// Cost of a fixed mesh topology as a function of subvertex positions.
pub struct Objective<'a> {
    pub mesh: &'a SubdividedMesh,
    pub field: &'a MetricField,
    pub targets: TargetSpec,
    pub barrier: BarrierParams,
}

struct Terms {
    energy: f64,
    barrier: f64,
    min_ratio: f64,
    max_ratio: f64,
}

impl<'a> Objective<'a> {
    pub fn new(
        mesh: &'a SubdividedMesh,
        field: &'a MetricField,
        targets: TargetSpec,
        barrier: BarrierParams,
    ) -> Self {
        Self {
            mesh,
            field,
            targets,
            barrier,
        }
    }

    /// Cost at the given coordinates; `+inf` total when infeasible.
    pub fn cost(&self, x: &[Point]) -> CostBreakdown {
        match self.accumulate(x, None) {
            Ok(Some(t)) => self.breakdown(t, None),
            _ => CostBreakdown::infeasible(),
        }
    }

    /// Cost and projected gradient. Fails if the cost is not finite.
    pub fn cost_and_gradient(&self, x: &[Point]) -> Result<(CostBreakdown, Vec<Point>)> {
        let mut g = vec![Point::zeros(); x.len()];
        let t = self
            .accumulate(x, Some(&mut g))?
            .ok_or_else(|| Error::Infeasible("subtriangle area ratio below barrier".into()))?;
        for (gi, c) in g.iter_mut().zip(&self.mesh.constraints) {
            c.project(gi);
        }
        let gmax = g.iter().map(|v| v.amax()).fold(0.0, f64::max);
        Ok((self.breakdown(t, Some(gmax)), g))
    }

    /// Gauss-Newton approximation of the Hessian at `x`, with one row per
    /// coordinate (`2 v`, `2 v + 1`). Constrained coordinates get identity rows
    /// and `regularization * mean diagonal` is added to remove the rigid modes.
    pub fn gauss_newton(&self, x: &[Point], regularization: f64) -> Result<SymmetricBuilder> {
        let mut h = SymmetricBuilder::new(2 * x.len());
        for e in self.mesh.subedges() {
            let [a, b] = e.vertices;
            let d = x[b] - x[a];
            let (m, dm) = self.metric_at(&(0.5 * (x[a] + x[b])), true)?;
            let md = 2.0 * m.mul_vec(&d);
            let dmid = 0.5 * Point::new(dm.dx.quad(&d), dm.dy.quad(&d));
            add_outer(&mut h, &[a, b], &[dmid - md, md + dmid], 1.0);
        }
        let target = self.targets.area();
        for t in self.mesh.subtriangles() {
            let v = t.vertices;
            let p = v.map(|i| x[i]);
            let area = signed_area(&p[0], &p[1], &p[2]);
            let (m, dm) = self.metric_at(&((p[0] + p[1] + p[2]) / 3.0), true)?;
            let s = m.det().sqrt();
            let ratio = s * area / target;
            if !(ratio > self.barrier.epsilon) {
                return Err(Error::Infeasible(
                    "subtriangle area ratio below barrier".into(),
                ));
            }
            let ddet = |d: &MetricTensor| d.m11 * m.m22 + m.m11 * d.m22 - 2.0 * m.m12 * d.m12;
            let grad_s = Point::new(ddet(&dm.dx), ddet(&dm.dy)) / (2.0 * s);
            let grads = [0, 1, 2].map(|k| {
                let (next, prev) = (p[(k + 1) % 3], p[(k + 2) % 3]);
                let d_area = 0.5 * Point::new(next.y - prev.y, prev.x - next.x);
                (s * d_area + area / 3.0 * grad_s) / target
            });
            add_outer(
                &mut h,
                &v,
                &grads,
                self.barrier.gauss_newton_curvature(ratio),
            );
        }
        let mean = (0..h.dim()).map(|i| h.diagonal(i)).sum::<f64>() / h.dim().max(1) as f64;
        let shift = regularization * if mean > 0.0 { mean } else { 1.0 };
        for i in 0..h.dim() {
            h.add(i, i, shift);
        }
        for (v, c) in self.mesh.constraints.iter().enumerate() {
            match c {
                ConstraintTag::Free => {}
                ConstraintTag::Fixed => {
                    h.clear_dof(2 * v);
                    h.clear_dof(2 * v + 1);
                }
                ConstraintTag::SlideX => h.clear_dof(2 * v + 1),
                ConstraintTag::SlideY => h.clear_dof(2 * v),
            }
        }
        Ok(h)
    }

    fn breakdown(&self, t: Terms, grad_max_norm: Option<f64>) -> CostBreakdown {
        CostBreakdown {
            total: t.energy + t.barrier,
            energy: t.energy,
            barrier: t.barrier,
            min_area_ratio: t.min_ratio,
            max_area_ratio: t.max_ratio,
            grad_max_norm,
        }
    }

    fn metric_at(
        &self,
        p: &Point,
        with_derivatives: bool,
    ) -> Result<(MetricTensor, MetricDerivatives)> {
        let m = self.field.evaluate(p)?;
        let d = if with_derivatives {
            self.field.derivatives(p)?
        } else {
            MetricDerivatives::ZERO
        };
        Ok((m, d))
    }

    /// Sums both terms in mesh order. `Ok(None)` signals a barrier violation.
    fn accumulate(&self, x: &[Point], mut grad: Option<&mut [Point]>) -> Result<Option<Terms>> {
        let want_grad = grad.is_some();
        let mut energy = 0.0;
        for e in self.mesh.subedges() {
            let [a, b] = e.vertices;
            let d = x[b] - x[a];
            let (m, dm) = self.metric_at(&(0.5 * (x[a] + x[b])), want_grad)?;
            let r = m.quad(&d) - self.targets.length_squared(e.class);
            energy += 0.5 * r * r;
            if let Some(g) = grad.as_deref_mut() {
                // d(l^2)/dp_b = 2 M d + 1/2 (d^T dM/dx d, d^T dM/dy d); p_a flips the first term.
                let md = 2.0 * m.mul_vec(&d);
                let dmid = 0.5 * Point::new(dm.dx.quad(&d), dm.dy.quad(&d));
                g[b] += r * (md + dmid);
                g[a] += r * (dmid - md);
            }
        }

        let target = self.targets.area();
        let mut barrier = 0.0;
        let mut min_ratio = f64::INFINITY;
        let mut max_ratio = f64::NEG_INFINITY;
        for t in self.mesh.subtriangles() {
            let v = t.vertices;
            let p = v.map(|i| x[i]);
            let area = signed_area(&p[0], &p[1], &p[2]);
            let (m, dm) = self.metric_at(&((p[0] + p[1] + p[2]) / 3.0), want_grad)?;
            let s = m.det().sqrt();
            let ratio = s * area / target;
            min_ratio = min_ratio.min(ratio);
            max_ratio = max_ratio.max(ratio);
            let f = self.barrier.penalty(ratio);
            if !f.is_finite() {
                return Ok(None);
            }
            barrier += f;
            if let Some(g) = grad.as_deref_mut() {
                let scale = self.barrier.penalty_derivative(ratio) / target;
                let ddet = |d: &MetricTensor| d.m11 * m.m22 + m.m11 * d.m22 - 2.0 * m.m12 * d.m12;
                let grad_s = Point::new(ddet(&dm.dx), ddet(&dm.dy)) / (2.0 * s);
                for k in 0..3 {
                    let (next, prev) = (p[(k + 1) % 3], p[(k + 2) % 3]);
                    let d_area = 0.5 * Point::new(next.y - prev.y, prev.x - next.x);
                    g[v[k]] += scale * (s * d_area + area / 3.0 * grad_s);
                }
            }
        }
        Ok(Some(Terms {
            energy,
            barrier,
            min_ratio,
            max_ratio,
        }))
    }
}

/// Adds `w g g^T` for a gradient `g` given per vertex.
fn add_outer(h: &mut SymmetricBuilder, verts: &[usize], grads: &[Point], w: f64) {
    for (k1, &v1) in verts.iter().enumerate() {
        for (k2, &v2) in verts.iter().enumerate() {
            for c1 in 0..2 {
                for c2 in 0..2 {
                    let (i, j) = (2 * v1 + c1, 2 * v2 + c2);
                    if i >= j {
                        h.add(i, j, w * grads[k1][c1] * grads[k2][c2]);
                    }
                }
            }
        }
    }
}

/// Edge energy of the mesh at its current coordinates.
pub fn energy_term(mesh: &SubdividedMesh, field: &MetricField, targets: TargetSpec) -> Result<f64> {
    let mut e = 0.0;
    for edge in mesh.subedges() {
        let [a, b] = edge.vertices;
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let m = field.evaluate(&(0.5 * (pa + pb)))?;
        let r = m.quad(&(pb - pa)) - targets.length_squared(edge.class);
        e += 0.5 * r * r;
    }
    Ok(e)
}

/// Barrier term of the mesh at its current coordinates, possibly `+inf`.
pub fn barrier_term(
    mesh: &SubdividedMesh,
    field: &MetricField,
    targets: TargetSpec,
    barrier: BarrierParams,
) -> f64 {
    Objective::new(mesh, field, targets, barrier)
        .cost(&mesh.vertices)
        .barrier
}

pub fn cost(
    mesh: &SubdividedMesh,
    field: &MetricField,
    targets: TargetSpec,
    barrier: BarrierParams,
) -> CostBreakdown {
    Objective::new(mesh, field, targets, barrier).cost(&mesh.vertices)
}

pub fn gradient(
    mesh: &SubdividedMesh,
    field: &MetricField,
    targets: TargetSpec,
    barrier: BarrierParams,
) -> Result<Vec<Point>> {
    Objective::new(mesh, field, targets, barrier)
        .cost_and_gradient(&mesh.vertices)
        .map(|(_, g)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{ConstraintTag, MacroMesh};
    use crate::metric::Rect;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::SQRT_2;

    fn square_mesh(n: usize, tiling: Tiling) -> SubdividedMesh {
        let m = MacroMesh::uniform_grid(Rect::new(0.0, 1.0, 0.0, 1.0), 1, 1).unwrap();
        let mut s = SubdividedMesh::subdivide(&m, n).unwrap();
        s.classify_edges(tiling);
        s
    }

    #[test]
    fn targets() {
        let t = TargetSpec::new(Tiling::Right, 4);
        assert_eq!(t.length(EdgeClass::Leg), 0.25);
        assert_abs_diff_eq!(t.length(EdgeClass::Hypotenuse), SQRT_2 / 4.0);
        assert_eq!(t.length_squared(EdgeClass::Hypotenuse), 2.0 / 16.0);
        assert_eq!(t.area(), 1.0 / 32.0);
        let t = TargetSpec::new(Tiling::Equilateral, 10);
        assert_abs_diff_eq!(t.area(), 3f64.sqrt() / 400.0);
    }

    #[test]
    fn energy_examples() {
        let id = MetricField::identity();
        let s = square_mesh(1, Tiling::Equilateral);
        let t = TargetSpec::new(Tiling::Equilateral, 1);
        assert_abs_diff_eq!(energy_term(&s, &id, t).unwrap(), 0.5);
        let s = square_mesh(1, Tiling::Right);
        assert_eq!(
            energy_term(&s, &id, TargetSpec::new(Tiling::Right, 1)).unwrap(),
            0.0
        );
    }

    #[test]
    fn barrier_examples() {
        let b0 = BarrierParams::new(0.0).unwrap();
        assert_eq!(b0.penalty(1.0), 0.0);
        assert_abs_diff_eq!(b0.penalty(2.0), 2f64.ln().powi(2) + 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b0.penalty(2.0), 1.480_453_013_918_201, epsilon = 1e-14);
        let b = BarrierParams::new(0.3).unwrap();
        assert_eq!(b.penalty(0.3), f64::INFINITY);
        assert_eq!(b.penalty(0.1), f64::INFINITY);
        assert_eq!(b0.penalty(-0.5), f64::INFINITY);
        assert!(BarrierParams::new(1.0).is_err());

        let s = square_mesh(1, Tiling::Right);
        let t = TargetSpec::new(Tiling::Right, 1);
        let id = MetricField::identity();
        assert_eq!(barrier_term(&s, &id, t, b0), 0.0);
    }

    #[test]
    fn penalty_derivative_matches_differences() {
        let b = BarrierParams::new(0.4).unwrap();
        for x in [0.45, 0.8, 1.0, 1.7, 3.0] {
            let h = 1e-6;
            let fd = (b.penalty(x + h) - b.penalty(x - h)) / (2.0 * h);
            assert_abs_diff_eq!(
                b.penalty_derivative(x),
                fd,
                epsilon = 1e-6 * fd.abs().max(1.0)
            );
        }
    }

    #[test]
    fn right_grid_is_an_exact_minimum() {
        let m = MacroMesh::uniform_grid(Rect::new(0.0, 4.0, 0.0, 4.0), 4, 4).unwrap();
        let mut s = SubdividedMesh::subdivide(&m, 1).unwrap();
        s.classify_edges(Tiling::Right);
        let t = TargetSpec::new(Tiling::Right, 1);
        let b = BarrierParams::new(0.0).unwrap();
        let id = MetricField::identity();
        let c = cost(&s, &id, t, b);
        assert_eq!(c.total, 0.0);
        assert_eq!(c.total, c.energy + c.barrier);
        let g = gradient(&s, &id, t, b).unwrap();
        assert!(g.iter().all(|v| v.amax() < 1e-12));
    }

    #[test]
    fn inverted_mesh_is_infeasible() {
        let mut s = square_mesh(2, Tiling::Equilateral);
        s.vertices[4] = Point::new(3.0, 3.0);
        let t = TargetSpec::new(Tiling::Equilateral, 2);
        let b = BarrierParams::new(0.0).unwrap();
        let id = MetricField::identity();
        assert_eq!(cost(&s, &id, t, b).total, f64::INFINITY);
        assert!(gradient(&s, &id, t, b).is_err());
    }

    #[test]
    fn translation_invariance_under_constant_metric() {
        let mut s = square_mesh(3, Tiling::Equilateral);
        let field = MetricField::constant(MetricTensor::new(2.0, 0.3, 1.5));
        let t = TargetSpec::new(Tiling::Equilateral, 3);
        let b = BarrierParams::new(0.0).unwrap();
        let (c0, g0) = Objective::new(&s, &field, t, b)
            .cost_and_gradient(&s.vertices)
            .unwrap();
        for p in &mut s.vertices {
            *p += Point::new(10.25, -3.5);
        }
        let (c1, g1) = Objective::new(&s, &field, t, b)
            .cost_and_gradient(&s.vertices)
            .unwrap();
        assert_abs_diff_eq!(c0.total, c1.total, epsilon = 1e-12);
        for (a, b) in g0.iter().zip(&g1) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn constrained_components_are_zeroed() {
        let mut s = square_mesh(2, Tiling::Equilateral);
        s.constraints[0] = ConstraintTag::Fixed;
        s.constraints[1] = ConstraintTag::SlideX;
        s.constraints[2] = ConstraintTag::SlideY;
        let field = MetricField::catalog("s2").unwrap();
        let t = TargetSpec::new(Tiling::Equilateral, 2);
        let g = gradient(&s, &field, t, BarrierParams::new(0.0).unwrap()).unwrap();
        assert_eq!(g[0], Point::zeros());
        assert_eq!(g[1].y, 0.0);
        assert_eq!(g[2].x, 0.0);
        assert!(g[1].x != 0.0 && g[2].y != 0.0);
    }
}
