//! Browser bindings: sample a field's anisotropy, optimize a small mesh, and
//! shoot a geodesic. Every entry point takes and returns JSON strings.

use isomesh::geodesic::geodesic_ivp;
use isomesh::io::config::{FieldSpec, RunConfig};
use isomesh::io::report::{quotient_raster, ReportOptions};
use isomesh::metric::{MetricField, Rect};
use isomesh::pipeline::optimize;
use isomesh::Point;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Keeps a single optimization within a few seconds in the browser.
pub const MAX_SUBTRIANGLES: usize = 6000;

fn field_from(arg: &str) -> Result<MetricField, String> {
    let spec: FieldSpec = if arg.trim_start().starts_with('{') {
        serde_json::from_str(arg).map_err(|e| e.to_string())?
    } else {
        FieldSpec::catalog(arg)
    };
    spec.build().map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Raster {
    domain: Rect,
    nx: usize,
    ny: usize,
    /// `log10` of the quotient, `null` outside the field's domain.
    log10_quotient: Vec<Option<f64>>,
}

pub fn quotient_json(field: &str, domain: Rect, nx: usize, ny: usize) -> Result<String, String> {
    if nx == 0 || ny == 0 || nx * ny > 1 << 20 {
        return Err("raster size must be between 1 and 2^20 cells".into());
    }
    let f = field_from(field)?;
    let r = quotient_raster(&f, domain, nx, ny);
    let out = Raster {
        domain,
        nx,
        ny,
        log10_quotient: r.values.iter().map(|v| v.map(f64::log10)).collect(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct MeshView {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    macro_edges: Vec<Vec<usize>>,
    qualities: Vec<f64>,
    e_initial: f64,
    e_final: f64,
    stages: Vec<String>,
    min_quality: f64,
    min_edge_ratio: f64,
    max_edge_ratio: f64,
}

pub fn optimize_json(config: &str) -> Result<String, String> {
    let cfg = RunConfig::from_json(config).map_err(|e| e.to_string())?;
    let count = cfg.grid.nx * cfg.grid.ny * 2 * cfg.n * cfg.n;
    if count > MAX_SUBTRIANGLES {
        return Err(format!(
            "{count} subtriangles requested, the demo allows {MAX_SUBTRIANGLES}"
        ));
    }
    let out = optimize(&cfg, &ReportOptions::minimal()).map_err(|e| e.to_string())?;
    let view = MeshView {
        triangles: out.mesh.subtriangles().iter().map(|t| t.vertices).collect(),
        macro_edges: out.mesh.macro_edges().into_iter().map(|e| e.path).collect(),
        qualities: out.report.qualities.clone(),
        e_initial: out.stats.e_initial(),
        e_final: out.stats.e_final(),
        stages: out
            .stats
            .stages
            .iter()
            .map(|s| {
                format!(
                    "eps {:.4}: {} iterations, E = {:.3e} ({})",
                    s.epsilon, s.iterations, s.e_final, s.reason
                )
            })
            .collect(),
        min_quality: out.report.quality.min,
        min_edge_ratio: out.report.min_edge_ratio,
        max_edge_ratio: out.report.max_edge_ratio,
        vertices: out.mesh.vertices,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct GeodesicView {
    points: Vec<Point>,
    metric_length: f64,
    truncated: bool,
}

pub fn geodesic_json(
    field: &str,
    x0: Point,
    v0: Point,
    t_end: f64,
    steps: usize,
) -> Result<String, String> {
    if steps == 0 || steps > 100_000 {
        return Err("steps must be between 1 and 100000".into());
    }
    let f = field_from(field)?;
    let g = geodesic_ivp(&f, x0, v0, t_end, steps).map_err(|e| e.to_string())?;
    let view = GeodesicView {
        points: g.points,
        metric_length: g.metric_length,
        truncated: g.truncated,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

/// `log10` anisotropic quotient of `field` on an `nx` by `ny` raster.
#[wasm_bindgen(js_name = quotientRaster)]
pub fn quotient_raster_js(
    field: &str,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    nx: usize,
    ny: usize,
) -> Result<String, JsError> {
    quotient_json(field, Rect::new(x0, x1, y0, y1), nx, ny).map_err(|e| JsError::new(&e))
}

/// Runs the full optimization for a JSON run config.
#[wasm_bindgen(js_name = optimizeMesh)]
pub fn optimize_mesh_js(config: &str) -> Result<String, JsError> {
    optimize_json(config).map_err(|e| JsError::new(&e))
}

/// Integrates the geodesic from `(x, y)` with initial velocity `(vx, vy)`.
#[wasm_bindgen(js_name = shootGeodesic)]
pub fn shoot_geodesic_js(
    field: &str,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    t_end: f64,
    steps: usize,
) -> Result<String, JsError> {
    geodesic_json(field, Point::new(x, y), Point::new(vx, vy), t_end, steps)
        .map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn raster_marks_points_outside_the_domain() {
        let text = quotient_json("s4", Rect::new(-0.5, 0.5, 0.0, 1.0), 4, 2).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        let cells = v["log10_quotient"].as_array().unwrap();
        assert_eq!(cells.len(), 8);
        assert!(cells[0].is_null());
        assert!(cells[3].as_f64().unwrap() > 0.0);
        assert!(quotient_json("s1", Rect::new(0.0, 1.0, 0.0, 1.0), 0, 3).is_err());
    }

    #[test]
    fn optimizes_a_flat_mesh_exactly() {
        let text = optimize_json(r#"{"field":{"id":"s1"},"n":4,"grid":{"nx":2,"ny":2}}"#).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert!(v["e_final"].as_f64().unwrap() < 1e-12);
        assert_eq!(v["triangles"].as_array().unwrap().len(), 8 * 16);
        assert_eq!(v["stages"].as_array().unwrap().len(), 6);
        assert!(v["min_quality"].as_f64().unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn rejects_oversized_and_invalid_runs() {
        assert!(
            optimize_json(r#"{"field":{"id":"s1"},"n":40,"grid":{"nx":3,"ny":3}}"#)
                .unwrap_err()
                .contains("subtriangles")
        );
        assert!(optimize_json(r#"{"field":{"id":"s0"}}"#).is_err());
    }

    #[test]
    fn s5_radial_geodesic_stays_radial() {
        let text =
            geodesic_json("s5", Point::new(0.3, 0.3), Point::new(1.0, 1.0), 1.0, 100).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        for p in v["points"].as_array().unwrap() {
            let (x, y) = (p[0].as_f64().unwrap(), p[1].as_f64().unwrap());
            assert!((x - y).abs() < 1e-10);
        }
        assert!(geodesic_json("s5", Point::zeros(), Point::new(1.0, 0.0), 1.0, 0).is_err());
    }
}
