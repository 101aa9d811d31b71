use isomesh::io::config::FieldSpec;
use isomesh::measures::distortion_pointwise;
use isomesh::mesh::{MacroMesh, SubdividedMesh, Tiling};
use isomesh::metric::{pullback, rotation, MetricTensor, Rect};
use isomesh::objective::{cost, BarrierParams, TargetSpec};
use isomesh::Point;
use nalgebra::Matrix2;
use proptest::prelude::*;

const FIELDS: [&str; 6] = ["s1", "s2", "s3", "s4", "s5", "s6"];

fn spd() -> impl Strategy<Value = MetricTensor> {
    (-2.0f64..2.0, -2.0f64..2.0, 0.0..std::f64::consts::PI).prop_map(|(a, b, t)| {
        pullback(
            &rotation(t),
            &MetricTensor::diag(10f64.powf(a), 10f64.powf(b)),
        )
    })
}

fn sup(m: &MetricTensor) -> f64 {
    m.m11.abs().max(m.m12.abs()).max(m.m22.abs())
}

fn point_in(domain: Rect, u: f64, v: f64) -> Point {
    Point::new(
        domain.x0 + u * domain.width(),
        domain.y0 + v * domain.height(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn catalog_fields_are_spd_with_exact_derivatives(k in 0usize..6, u in 0.01f64..0.99, v in 0.01f64..0.99) {
        let spec = FieldSpec::catalog(FIELDS[k]);
        let field = spec.build().unwrap();
        let p = point_in(spec.default_domain(), u, v);
        let (m, d) = field.evaluate_with_derivatives(&p).unwrap();
        prop_assert!(m.is_positive_definite());
        // Skip a thin band around the boundary-layer kink.
        let g = (10.0 * p.y - (2.0 * std::f64::consts::PI * p.x).cos()) / (100.0 + 4.0 * std::f64::consts::PI.powi(2)).sqrt();
        prop_assume!(FIELDS[k] != "s6" || g.abs() > 1e-3);
        prop_assert!(!d.nonsmooth);
        let h = 1e-5;
        for (axis, analytic) in [(Point::new(h, 0.0), d.dx), (Point::new(0.0, h), d.dy)] {
            let fp = field.evaluate(&(p + axis)).unwrap();
            let fm = field.evaluate(&(p - axis)).unwrap();
            let fd = fp.add(&fm.scale(-1.0)).scale(0.5 / h);
            let err = sup(&analytic.add(&fd.scale(-1.0)));
            prop_assert!(err <= 1e-6 * sup(&fd).max(1.0), "{} at {p:?}: err {err:e}", FIELDS[k]);
        }
    }

    #[test]
    fn anisotropic_quotient_is_scale_invariant(m in spd(), c in -3.0f64..3.0) {
        let q = m.anisotropic_quotient();
        prop_assert!(q >= 1.0 - 1e-12);
        prop_assert!((m.scale(10f64.powf(c)).anisotropic_quotient() - q).abs() <= 1e-12 * q);
    }

    #[test]
    fn distortion_is_at_least_one(m in spd(), a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in 0.05f64..2.0) {
        let mut j = Matrix2::new(a, b, c, d);
        if j.determinant() <= 1e-9 {
            j = Matrix2::new(d, 0.0, 0.0, d);
        }
        prop_assert!(distortion_pointwise(&j, &m) >= 1.0 - 1e-12);
    }

    #[test]
    fn cost_is_translation_invariant_under_constant_metrics(
        m in spd(),
        shift in (-5.0f64..5.0, -5.0f64..5.0),
        jitter in prop::collection::vec((-0.02f64..0.02, -0.02f64..0.02), 16),
    ) {
        let macros = MacroMesh::uniform_grid(Rect::new(0.0, 1.0, 0.0, 1.0), 1, 1).unwrap();
        let mut mesh = SubdividedMesh::subdivide(&macros, 3).unwrap();
        mesh.classify_edges(Tiling::Equilateral);
        for (p, (dx, dy)) in mesh.vertices.iter_mut().zip(&jitter) {
            *p += Point::new(*dx, *dy);
        }
        let field = isomesh::metric::MetricField::constant(m);
        let targets = TargetSpec::new(Tiling::Equilateral, 3);
        let barrier = BarrierParams::new(0.0).unwrap();
        let before = cost(&mesh, &field, targets, barrier);
        prop_assert!(before.total >= 0.0);
        let t = Point::new(shift.0, shift.1);
        for p in &mut mesh.vertices {
            *p += t;
        }
        let after = cost(&mesh, &field, targets, barrier);
        prop_assert!((after.total - before.total).abs() <= 1e-12 * before.total.max(1.0));
    }
}
